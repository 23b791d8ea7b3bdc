//! Exact minimizers of the per-coordinate c-step subproblems.
//!
//! For coordinate `j` the subproblem across the active datasets is
//!
//! ```text
//! sum_l omega_l (c_l^2/2 - g_l c_l) + P1(c) + (mu2/2) sum_{l<l'} (k_l c_l - k_l' c_l')^2
//! ```
//!
//! with `omega_l = 1/n_l^2`, `k_l = 1` (magnitude) or `1/sqrt(c_ref,l^2 + tau2)` (sign),
//! and `P1` the selection penalty linearized at the reference point. The
//! quadratic part has Hessian `diag(omega + mu2 L k^2) - mu2 k k'`.

use crate::penalty::soft_threshold;

/// Heterogeneity block: `P1 = sum_l omega_l alpha_l |c_l|`.
///
/// Stationarity gives `c_l(m) = soft(g_l + mu*_l k_l m, alpha_l) / (1 + mu*_l L k_l^2)`
/// with `m = sum_l k_l c_l` and `mu*_l = mu2 / omega_l`; `m` is the unique root of a
/// strictly increasing piecewise-linear function.
pub(crate) fn hetero(g: &[f64], omega: &[f64], alpha: &[f64], k: &[f64], mu2: f64, out: &mut [f64]) {
    let la = g.len();
    if mu2 == 0.0 || la < 2 {
        for l in 0..la {
            out[l] = soft_threshold(g[l], alpha[l]);
        }
        return;
    }
    let lf = la as f64;
    let mstar: Vec<f64> = omega.iter().map(|w| mu2 / w).collect();
    let den: Vec<f64> = (0..la).map(|l| 1.0 + mstar[l] * lf * k[l] * k[l]).collect();
    let value = |l: usize, m: f64| soft_threshold(g[l] + mstar[l] * k[l] * m, alpha[l]) / den[l];
    let psi = |m: f64| m - (0..la).map(|l| k[l] * value(l, m)).sum::<f64>();

    let mut bps: Vec<f64> = Vec::with_capacity(2 * la);
    for l in 0..la {
        let s = mstar[l] * k[l];
        bps.push((alpha[l] - g[l]) / s);
        if alpha[l] > 0.0 {
            bps.push((-alpha[l] - g[l]) / s);
        }
    }
    bps.sort_by(f64::total_cmp);
    bps.dedup();

    // First breakpoint where psi is nonnegative.
    let (mut lo, mut hi) = (0usize, bps.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if psi(bps[mid]) >= 0.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let i = lo;
    let (probe, lower, upper) = if i == 0 {
        let b = bps[0];
        (b - b.abs().max(1.0), f64::NEG_INFINITY, b)
    } else if i == bps.len() {
        let b = bps[i - 1];
        (b + b.abs().max(1.0), b, f64::INFINITY)
    } else {
        (0.5 * (bps[i - 1] + bps[i]), bps[i - 1], bps[i])
    };

    // On the segment containing `probe`, each c_l is affine in m: A_l + B_l m.
    let (mut ka, mut kb) = (0.0, 0.0);
    for l in 0..la {
        let s = g[l] + mstar[l] * k[l] * probe;
        let shift = if s > alpha[l] {
            -alpha[l]
        } else if s < -alpha[l] {
            alpha[l]
        } else {
            continue;
        };
        ka += k[l] * (g[l] + shift) / den[l];
        kb += k[l] * mstar[l] * k[l] / den[l];
    }
    let m = (ka / (1.0 - kb)).clamp(lower, upper);
    for l in 0..la {
        out[l] = value(l, m);
    }
}

/// Homogeneity block: `P1 = rho_bar * ||c||_2`.
///
/// Zero when `||omega g|| <= rho_bar`; otherwise `c = (H + eps I)^{-1} (omega g)`
/// where `eps ||c|| = rho_bar`.
pub(crate) fn homo(g: &[f64], omega: &[f64], k: &[f64], mu2: f64, rho_bar: f64, out: &mut [f64]) {
    let la = g.len();
    let v: Vec<f64> = (0..la).map(|l| omega[l] * g[l]).collect();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nv <= rho_bar {
        out.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let contrast = mu2 > 0.0 && la >= 2;
    let lf = la as f64;
    let d: Vec<f64> = (0..la).map(|l| omega[l] + if contrast { mu2 * lf * k[l] * k[l] } else { 0.0 }).collect();

    let solve = |eps: f64, out: &mut [f64]| {
        if !contrast {
            for l in 0..la {
                out[l] = v[l] / (d[l] + eps);
            }
            return;
        }
        // Sherman-Morrison on diag(d + eps) - mu2 k k'.
        let (mut ky, mut denom) = (0.0, 0.0);
        for l in 0..la {
            let dl = d[l] + eps;
            ky += k[l] * v[l] / dl;
            denom += (omega[l] + eps) / (lf * dl);
        }
        let coef = mu2 * ky / denom;
        for l in 0..la {
            out[l] = (v[l] + coef * k[l]) / (d[l] + eps);
        }
    };

    if rho_bar == 0.0 {
        solve(0.0, out);
        return;
    }
    let norm = |x: &[f64]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
    let omin = omega.iter().copied().fold(f64::INFINITY, f64::min);
    let dmax = d.iter().copied().fold(0.0f64, f64::max);
    let gap = nv - rho_bar;
    let (mut lo, mut hi) = (rho_bar * omin / gap, rho_bar * dmax / gap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        solve(mid, out);
        if mid * norm(out) < rho_bar {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solve(0.5 * (lo + hi), out);
}
