//! Single-component PLS: leading direction, latent regression, prediction.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::error::{IsplsError, Result};
use crate::model::CrossProduct;

/// Rank-one latent model `beta = w q_load'`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    pub w: Array1<f64>,
    pub q_load: Array1<f64>,
    pub beta: Array2<f64>,
}

impl LatentModel {
    /// The all-zero model, used when a direction was penalized away entirely.
    pub fn zero(p: usize, q: usize) -> Self {
        LatentModel { w: Array1::zeros(p), q_load: Array1::zeros(q), beta: Array2::zeros((p, q)) }
    }
}

/// Nonzero singular triplets of `z` (left vectors only), largest first.
pub(crate) fn left_singular(z: &Array2<f64>) -> (Vec<f64>, Vec<Array1<f64>>) {
    let (p, q) = z.dim();
    let m = DMatrix::from_fn(p, q, |i, j| z[[i, j]]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut sigma = Vec::new();
    let mut vecs = Vec::new();
    for k in order {
        let s = svd.singular_values[k];
        if s > 0.0 {
            sigma.push(s);
            vecs.push(Array1::from_iter(u.column(k).iter().copied()));
        }
    }
    (sigma, vecs)
}

/// Flip `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn orient(mut v: Array1<f64>) -> Array1<f64> {
    let mut best = 0;
    for (j, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = j;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
    v
}

/// Leading left singular vector of `Z`, the maximizer of `w'ZZ'w` over unit `w`.
pub fn first_direction(cp: &CrossProduct) -> Result<Array1<f64>> {
    if cp.is_zero() {
        return Err(IsplsError::NoSignal);
    }
    let (_, mut vecs) = left_singular(&cp.z);
    let u = vecs.swap_remove(0);
    let norm = u.dot(&u).sqrt();
    Ok(orient(u / norm))
}

/// Least-squares regression of every response column on `t = X w`.
pub fn latent_regress(x: &Array2<f64>, y: &Array2<f64>, w: &Array1<f64>) -> Result<LatentModel> {
    if x.ncols() != w.len() || x.nrows() != y.nrows() {
        return Err(IsplsError::invalid(
            "w",
            format!("shapes X {:?}, Y {:?}, w {} are inconsistent", x.dim(), y.dim(), w.len()),
        ));
    }
    let norm = w.dot(w).sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(IsplsError::invalid("w", format!("must have unit norm, got {norm}")));
    }
    let t = x.dot(w);
    let tt = t.dot(&t);
    if tt < 1e-12 {
        return Err(IsplsError::DegenerateComponent(tt));
    }
    let q_load = y.t().dot(&t) / tt;
    let beta = outer(w, &q_load);
    Ok(LatentModel { w: w.clone(), q_load, beta })
}

pub(crate) fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

pub fn predict(model: &LatentModel, x_new: &Array2<f64>) -> Result<Array2<f64>> {
    if x_new.ncols() != model.beta.nrows() {
        return Err(IsplsError::invalid(
            "x_new",
            format!("has {} columns, model expects {}", x_new.ncols(), model.beta.nrows()),
        ));
    }
    Ok(x_new.dot(&model.beta))
}

/// Minimum-norm least squares of `y` on the selected columns of `x`; other rows of the
/// returned `p x q` coefficient matrix are zero.
pub fn refit_selected(x: &Array2<f64>, y: &Array2<f64>, selected: &[bool]) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    if selected.len() != p || y.nrows() != n {
        return Err(IsplsError::invalid("selected", format!("expects {p} flags and {n} response rows")));
    }
    let cols: Vec<usize> = (0..p).filter(|&j| selected[j]).collect();
    let q = y.ncols();
    let mut beta = Array2::zeros((p, q));
    if cols.is_empty() {
        return Ok(beta);
    }
    let xs = DMatrix::from_fn(n, cols.len(), |i, k| x[[i, cols[k]]]);
    let ym = DMatrix::from_fn(n, q, |i, k| y[[i, k]]);
    let svd = xs.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let b = svd.solve(&ym, eps).map_err(|e| IsplsError::NumericFailure(e.to_string()))?;
    for (k, &j) in cols.iter().enumerate() {
        for i in 0..q {
            beta[[j, i]] = b[(k, i)];
        }
    }
    Ok(beta)
}
