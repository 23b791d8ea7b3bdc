//! Scalar penalty primitives shared by the solvers.
//!
//! The minimax concave penalty is `rho(t; lambda, gamma) = lambda * int_0^|t| (1 - x/(lambda*gamma))_+ dx`.
//! It behaves like an L1 penalty near zero and becomes flat once `|t| >= lambda*gamma`.

use crate::error::{IsplsError, Result};

/// Parameters of the minimax concave penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McpParams {
    pub lambda: f64,
    pub gamma: f64,
}

impl McpParams {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(IsplsError::invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(IsplsError::invalid("gamma", format!("must be finite and > 1, got {gamma}")));
        }
        Ok(McpParams { lambda, gamma })
    }

    /// Skips the `gamma > 1` check. The outer penalty of the composite MCP uses
    /// `gamma = b = L*a*mu1^2/2`, which drops below one for small `mu1`.
    pub(crate) fn outer(gamma: f64) -> Self {
        McpParams { lambda: 1.0, gamma }
    }

    #[inline]
    fn knot(&self) -> f64 {
        self.lambda * self.gamma
    }
}

#[inline]
pub(crate) fn sgn(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn mcp(t: f64, params: &McpParams) -> f64 {
    let McpParams { lambda, gamma } = *params;
    if lambda == 0.0 {
        return 0.0;
    }
    let a = t.abs();
    if a <= params.knot() {
        lambda * a - a * a / (2.0 * gamma)
    } else {
        0.5 * lambda * lambda * gamma
    }
}

/// `lambda * (1 - |t|/(lambda*gamma))_+ * sgn(t)`, with `sgn(0) = 0`.
pub fn mcp_deriv(t: f64, params: &McpParams) -> f64 {
    if params.lambda == 0.0 {
        return 0.0;
    }
    sgn(t) * mcp_slope(t.abs(), params)
}

/// Right derivative of the penalty at `|t|`. Unlike [`mcp_deriv`] this equals
/// `lambda` at the origin, which is the weight a local linear approximation
/// needs there.
pub fn mcp_slope(t_abs: f64, params: &McpParams) -> f64 {
    if params.lambda == 0.0 {
        return 0.0;
    }
    (params.lambda - t_abs / params.gamma).max(0.0)
}

pub fn group_norm(c_j: &[f64]) -> f64 {
    c_j.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Linearized composite-MCP weight `alpha_jl` for coordinate `l` of group `c_j_prev`,
/// evaluated literally with `sgn(0) = 0`: an all-zero group gets weight zero.
pub fn composite_weight(c_j_prev: &[f64], l: usize, mu1: f64, a: f64, b: f64) -> f64 {
    if mu1 == 0.0 {
        return 0.0;
    }
    let inner = McpParams { lambda: mu1, gamma: a };
    let total: f64 = c_j_prev.iter().map(|c| mcp(c.abs(), &inner)).sum();
    mcp_deriv(total, &McpParams::outer(b)) * mcp_deriv(c_j_prev[l].abs(), &inner)
}

/// Same weight built from right derivatives, so a zero coordinate keeps the
/// full L1 weight `mu1` (times the outer factor). This is the weight the
/// solvers use; with the literal version a thresholded coordinate would be
/// unpenalized on the next pass and could never stay at zero.
pub fn composite_weight_lla(c_j_prev: &[f64], l: usize, mu1: f64, a: f64, b: f64) -> f64 {
    if mu1 == 0.0 {
        return 0.0;
    }
    let inner = McpParams { lambda: mu1, gamma: a };
    let total: f64 = c_j_prev.iter().map(|c| mcp(c.abs(), &inner)).sum();
    mcp_slope(total, &McpParams::outer(b)) * mcp_slope(c_j_prev[l].abs(), &inner)
}

/// Smooth surrogate for `sgn(c)`: `c / sqrt(c^2 + tau2)`.
#[inline]
pub fn smooth_sign(c: f64, tau2: f64) -> f64 {
    c / (c * c + tau2).sqrt()
}

#[inline]
pub fn soft_threshold(s: f64, alpha: f64) -> f64 {
    sgn(s) * (s.abs() - alpha).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(lambda: f64, gamma: f64) -> McpParams {
        McpParams::new(lambda, gamma).unwrap()
    }

    /// Composite Simpson quadrature of the defining integral.
    fn mcp_quadrature(t: f64, lambda: f64, gamma: f64) -> f64 {
        let n = 20_000;
        let h = t.abs() / n as f64;
        let f = |x: f64| lambda * (1.0 - x / (lambda * gamma)).max(0.0);
        let mut acc = f(0.0) + f(t.abs());
        for i in 1..n {
            let x = i as f64 * h;
            acc += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
        }
        acc * h / 3.0
    }

    #[test]
    fn mcp_examples() {
        assert_eq!(mcp(0.0, &p(1.0, 6.0)), 0.0);
        for t in [6.0, -6.0, 7.5, 100.0] {
            assert_eq!(mcp(t, &p(1.0, 6.0)), 3.0);
        }
        let q = mcp_quadrature(1.0, 1.0, 6.0);
        assert_abs_diff_eq!(q, 1.0 - 1.0 / 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mcp(1.0, &p(1.0, 6.0)), q, epsilon = 1e-9);
    }

    #[test]
    fn mcp_matches_quadrature_across_regions() {
        for &(t, l, g) in &[(0.4, 0.7, 3.0), (-2.5, 0.5, 4.0), (9.0, 1.2, 2.5), (0.01, 2.0, 6.0)] {
            assert_abs_diff_eq!(mcp(t, &p(l, g)), mcp_quadrature(t, l, g), epsilon = 1e-8);
        }
    }

    #[test]
    fn mcp_deriv_examples() {
        assert_eq!(mcp_deriv(0.0, &p(1.0, 6.0)), 0.0);
        assert_eq!(mcp_deriv(0.0, &p(3.0, 1.5)), 0.0);
        assert_eq!(mcp_deriv(3.0, &p(1.0, 6.0)), 0.5);
        let h = 1e-5;
        for t in [0.3, 1.7, -2.4] {
            let fd = (mcp(t + h, &p(1.0, 6.0)) - mcp(t - h, &p(1.0, 6.0))) / (2.0 * h);
            assert_abs_diff_eq!(mcp_deriv(t, &p(1.0, 6.0)), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_lambda_disables_penalty() {
        let off = McpParams::new(0.0, 6.0).unwrap();
        assert_eq!(mcp(4.0, &off), 0.0);
        assert_eq!(mcp_deriv(-4.0, &off), 0.0);
        assert_eq!(mcp_slope(0.0, &off), 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(McpParams::new(-1.0, 6.0).is_err());
        assert!(McpParams::new(1.0, 1.0).is_err());
        assert!(McpParams::new(f64::NAN, 6.0).is_err());
    }

    #[test]
    fn slope_is_lambda_at_origin() {
        assert_eq!(mcp_slope(0.0, &p(0.7, 6.0)), 0.7);
        assert_eq!(mcp_slope(4.2, &p(0.7, 6.0)), 0.0);
    }

    #[test]
    fn group_norm_examples() {
        assert_eq!(group_norm(&[0.0; 4]), 0.0);
        assert_eq!(group_norm(&[3.0, 4.0, 0.0, 0.0]), 5.0);
        let v = [0.3, -1.7, 2.2, 0.05, -0.9];
        let mut ss = 0.0;
        for x in v {
            ss += x * x;
        }
        assert_abs_diff_eq!(group_norm(&v), ss.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn composite_weight_examples() {
        assert_eq!(composite_weight(&[0.0; 4], 2, 0.2, 6.0, 0.48), 0.0);
        // |c_l| >= mu1 * a saturates the inner derivative
        assert_eq!(composite_weight(&[1.3, 0.1, 0.0, 0.3], 0, 0.2, 6.0, 0.48), 0.0);
        assert_eq!(composite_weight_lla(&[1.5, 0.1, 0.0, 0.3], 0, 0.2, 6.0, 0.48), 0.0);

        let (mu1, a) = (0.2, 6.0);
        let b = 0.5 * 4.0 * a * mu1 * mu1;
        let c = [0.1; 4];
        // compose independently-checked scalar pieces
        let inner_sum: f64 = c.iter().map(|v| mcp_quadrature(*v, mu1, a)).sum();
        let outer_fd = {
            let h = 1e-6;
            (mcp_quadrature(inner_sum + h, 1.0, b) - mcp_quadrature(inner_sum - h, 1.0, b)) / (2.0 * h)
        };
        let inner_fd = {
            let h = 1e-6;
            (mcp_quadrature(0.1 + h, mu1, a) - mcp_quadrature(0.1 - h, mu1, a)) / (2.0 * h)
        };
        let expected = outer_fd * inner_fd;
        assert_abs_diff_eq!(composite_weight(&c, 1, mu1, a, b), expected, epsilon = 1e-6);
        assert_abs_diff_eq!(composite_weight_lla(&c, 1, mu1, a, b), expected, epsilon = 1e-6);
    }

    #[test]
    fn lla_weight_keeps_zero_groups_penalized() {
        let w = composite_weight_lla(&[0.0; 3], 1, 0.5, 6.0, 0.5 * 3.0 * 6.0 * 0.25);
        assert_eq!(w, 0.5);
    }

    #[test]
    fn smooth_sign_examples() {
        assert_eq!(smooth_sign(0.0, 0.5), 0.0);
        assert!(smooth_sign(100.0, 0.5).abs() > 0.99997);
        for c in [0.1, 1.3, 47.0] {
            assert_eq!(smooth_sign(-c, 0.5), -smooth_sign(c, 0.5));
        }
    }

    #[test]
    fn smooth_sign_approaches_sign() {
        for c in [0.2, -0.7, 1.5] {
            let errs: Vec<f64> = [0.5, 0.05, 0.005].iter().map(|&t2| (smooth_sign(c, t2) - sgn(c)).abs()).collect();
            assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        }
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-2.5, 1.0), -1.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn deriv_matches_finite_differences(
            t in -20.0f64..20.0, lambda in 0.05f64..3.0, gamma in 1.1f64..10.0,
        ) {
            let prm = p(lambda, gamma);
            let h = 1e-5;
            prop_assume!(t.abs() > 10.0 * h);
            prop_assume!((t.abs() - lambda * gamma).abs() > 10.0 * h);
            let fd = (mcp(t + h, &prm) - mcp(t - h, &prm)) / (2.0 * h);
            prop_assert!((mcp_deriv(t, &prm) - fd).abs() < 1e-6);
        }

        #[test]
        fn mcp_below_l1_line_and_even(t in -50.0f64..50.0, lambda in 0.0f64..3.0, gamma in 1.01f64..10.0) {
            let prm = p(lambda, gamma);
            prop_assert!(mcp(t, &prm) <= lambda * t.abs() + 1e-15);
            prop_assert_eq!(mcp(t, &prm), mcp(-t, &prm));
            prop_assert_eq!(mcp_deriv(t, &prm), -mcp_deriv(-t, &prm));
        }

        #[test]
        fn soft_threshold_minimizes_prox_objective(s in -8.0f64..8.0, alpha in 0.0f64..4.0) {
            let obj = |x: f64| 0.5 * (x - s) * (x - s) + alpha * x.abs();
            let mut best = (f64::INFINITY, 0.0);
            for i in 0..=200_000 {
                let x = -10.0 + i as f64 * 1e-4;
                let v = obj(x);
                if v < best.0 {
                    best = (v, x);
                }
            }
            prop_assert!((soft_threshold(s, alpha) - best.1).abs() <= 1e-4);
            prop_assert!(obj(soft_threshold(s, alpha)) <= best.0 + 1e-12);
        }

        #[test]
        fn composite_weight_permutation_invariant(
            mut c in proptest::collection::vec(-2.0f64..2.0, 4), l in 0usize..4, shift in 1usize..4,
        ) {
            let (mu1, a) = (0.3, 6.0);
            let b = 0.5 * 4.0 * a * mu1 * mu1;
            let base = composite_weight(&c, l, mu1, a, b);
            let target = c[l];
            c.rotate_left(shift);
            let pos = (l + 4 - shift) % 4;
            prop_assert_eq!(c[pos], target);
            prop_assert!((composite_weight(&c, pos, mu1, a, b) - base).abs() < 1e-15);
        }

        #[test]
        fn composite_weight_zero_in_flat_region(
            rest in proptest::collection::vec(-3.0f64..3.0, 3), excess in 0.0f64..5.0, mu1 in 0.01f64..1.0,
        ) {
            let a = 6.0;
            let b = 0.5 * 4.0 * a * mu1 * mu1;
            let mut c = vec![mu1 * a + excess];
            c.extend(rest);
            prop_assert_eq!(composite_weight(&c, 0, mu1, a, b), 0.0);
            prop_assert_eq!(composite_weight_lla(&c, 0, mu1, a, b), 0.0);
        }

        #[test]
        fn smooth_sign_bounded_and_monotone(c in -20.0f64..20.0, d in 1e-3f64..10.0, tau2 in 1e-3f64..5.0) {
            prop_assert!(smooth_sign(c, tau2).abs() < 1.0);
            prop_assert!(smooth_sign(c + d, tau2) > smooth_sign(c, tau2));
        }
    }
}
