//! Condition numbers of interaction matrices.
//!
//! Symmetric matrices use the ratio of extreme eigenvalue magnitudes.
//! Asymmetric matrices may have complex eigenvalues, so their condition
//! number is the ratio of extreme singular values; the eigenvalue-modulus
//! ratio is available separately for small matrices.

use nalgebra::DVector;

use crate::sparse::SparseMatrix;

/// Largest matrix handled with dense factorizations.
pub const DENSE_LIMIT: usize = 500;

const ITERATIVE_TOL: f64 = 1e-8;
const ITERATIVE_MAX: usize = 10_000;
const SINGULAR_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralConvention {
    Eigenvalue,
    SingularValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionNumber {
    /// `largest / smallest`, infinite when `smallest <= 1e-14`.
    pub value: f64,
    pub largest: f64,
    pub smallest: f64,
    pub convention: SpectralConvention,
}

impl ConditionNumber {
    fn new(largest: f64, smallest: f64, convention: SpectralConvention) -> Self {
        let value = if smallest <= SINGULAR_FLOOR {
            f64::INFINITY
        } else {
            largest / smallest
        };
        ConditionNumber {
            value,
            largest,
            smallest,
            convention,
        }
    }
}

pub fn condition_number(w: &SparseMatrix) -> ConditionNumber {
    let n = w.dim();
    if n == 0 {
        return ConditionNumber::new(1.0, 1.0, SpectralConvention::Eigenvalue);
    }
    if w.is_symmetric() {
        let (hi, lo) = if n <= DENSE_LIMIT {
            let eig = w.to_dense().symmetric_eigenvalues();
            extremes(eig.iter().map(|v| v.abs()))
        } else {
            // diagonally dominant weights are positive definite
            let apply = |v: &[f64], out: &mut [f64]| mul_into(w, v, out);
            spd_extremes(n, &apply)
        };
        ConditionNumber::new(hi, lo, SpectralConvention::Eigenvalue)
    } else {
        let (hi, lo) = if n <= DENSE_LIMIT {
            let sv = w.to_dense().singular_values();
            extremes(sv.iter().copied())
        } else {
            let apply = |v: &[f64], out: &mut [f64]| {
                let wv = w.mul_vec(v);
                out.copy_from_slice(&w.tr_mul_vec(&wv));
            };
            let (a, b) = spd_extremes(n, &apply);
            (a.max(0.0).sqrt(), b.max(0.0).sqrt())
        };
        ConditionNumber::new(hi, lo, SpectralConvention::SingularValue)
    }
}

/// Ratio of the largest to the smallest eigenvalue modulus, from a dense
/// Schur decomposition. `None` above [`DENSE_LIMIT`] links.
pub fn eigenvalue_modulus_ratio(w: &SparseMatrix) -> Option<f64> {
    if w.dim() == 0 || w.dim() > DENSE_LIMIT {
        return None;
    }
    let eig = w.to_dense().complex_eigenvalues();
    let (hi, lo) = extremes(eig.iter().map(|z| z.norm()));
    Some(if lo <= SINGULAR_FLOOR { f64::INFINITY } else { hi / lo })
}

fn extremes(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((0.0f64, f64::INFINITY), |(hi, lo), v| (hi.max(v), lo.min(v)))
}

fn mul_into(w: &SparseMatrix, v: &[f64], out: &mut [f64]) {
    for (r, slot) in out.iter_mut().enumerate() {
        *slot = w.row_dot(r, v);
    }
}

fn normalize(v: &mut DVector<f64>) -> f64 {
    let norm = v.norm();
    if norm > 0.0 {
        *v /= norm;
    }
    norm
}

/// Largest and smallest eigenvalues of a symmetric positive definite
/// operator: power iteration, then inverse iteration with conjugate
/// gradients.
fn spd_extremes(n: usize, apply: &dyn Fn(&[f64], &mut [f64])) -> (f64, f64) {
    let start = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
    let mut out = vec![0.0; n];
    let mut forward = |v: &DVector<f64>| {
        apply(v.as_slice(), &mut out);
        Some(DVector::from_column_slice(&out))
    };
    let largest = rayleigh_iteration(&start, &mut forward).unwrap_or(0.0);
    let mut backward = |v: &DVector<f64>| conjugate_gradient(apply, v);
    let inverse = rayleigh_iteration(&start, &mut backward).unwrap_or(0.0);
    let smallest = if inverse > 0.0 { 1.0 / inverse } else { 0.0 };
    (largest, smallest)
}

/// Dominant eigenvalue of `op` by power iteration, stopping once the
/// eigen-residual `|op v - θ v|` falls below `1e-8 θ`.
fn rayleigh_iteration(start: &DVector<f64>, op: &mut dyn FnMut(&DVector<f64>) -> Option<DVector<f64>>) -> Option<f64> {
    let mut v = start.clone();
    normalize(&mut v);
    let mut theta = 0.0;
    for _ in 0..ITERATIVE_MAX {
        let mut next = op(&v)?;
        theta = v.dot(&next);
        let residual = (&next - theta * &v).norm();
        normalize(&mut next);
        v = next;
        if residual <= ITERATIVE_TOL * theta.abs() {
            break;
        }
    }
    Some(theta)
}

fn conjugate_gradient(apply: &dyn Fn(&[f64], &mut [f64]), b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let target = (1e-12 * b.norm()).powi(2);
    let mut ap = vec![0.0; n];
    for _ in 0..(10 * n).max(100) {
        if rr <= target {
            return Some(x);
        }
        apply(p.as_slice(), &mut ap);
        let ap_v = DVector::from_column_slice(&ap);
        let curvature = p.dot(&ap_v);
        if curvature <= 0.0 {
            return None;
        }
        let alpha = rr / curvature;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap_v, 1.0);
        let rr_next = r.dot(&r);
        p = &r + (rr_next / rr) * &p;
        rr = rr_next;
    }
    Some(x)
}
