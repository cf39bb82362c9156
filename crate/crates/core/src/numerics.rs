//! Dense least squares via Householder QR with in-order rank detection.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Columns whose residual norm (after projecting out the columns already
/// accepted) falls below this fraction of the largest column norm are
/// dropped.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    /// One entry per design column; `None` for dropped columns.
    pub coefficients: Vec<Option<f64>>,
    pub residuals: Vec<f64>,
    pub sum_sq_residuals: f64,
    /// Design-column indices removed for rank deficiency, ascending.
    pub dropped_columns: Vec<usize>,
}

impl LeastSquaresFit {
    pub fn rank(&self) -> usize {
        self.coefficients.len() - self.dropped_columns.len()
    }
}

struct Reflector {
    row: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    fn apply(&self, x: &mut [f64]) {
        let tail = &mut x[self.row..];
        let dot: f64 = self.v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
        let s = self.beta * dot;
        for (xi, vi) in tail.iter_mut().zip(&self.v) {
            *xi -= s * vi;
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    // scaled to avoid overflow on large columns
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let ss: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * libm::sqrt(ss)
}

/// Ordinary least squares of `response` on the columns of `design`.
///
/// Columns are processed left to right; a column that is (numerically) in
/// the span of the columns already accepted is dropped, so among a set of
/// collinear columns the later-indexed ones go first.
pub fn ols(design: &Matrix, response: &[f64]) -> Result<LeastSquaresFit> {
    let n = design.rows();
    let p = design.cols();
    if response.len() != n {
        return Err(Error::ShapeMismatch { expected: n, found: response.len() });
    }
    if n == 0 || p == 0 {
        return Err(Error::NoIdentifyingVariation("empty design".to_string()));
    }

    let mut cols: Vec<Vec<f64>> = (0..p).map(|j| design.column(j)).collect();
    let max_norm = cols.iter().map(|c| norm(c)).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Err(Error::NoIdentifyingVariation("all design columns are zero".to_string()));
    }
    let tol = RANK_TOL * max_norm;

    let mut z = response.to_vec();
    let mut reflectors: Vec<Reflector> = Vec::new();
    let mut retained: Vec<usize> = Vec::new();
    let mut dropped: Vec<usize> = Vec::new();

    for j in 0..p {
        let r = reflectors.len();
        if r == n {
            dropped.push(j);
            continue;
        }
        let col = &cols[j];
        let tail_norm = norm(&col[r..]);
        if tail_norm <= tol {
            dropped.push(j);
            continue;
        }
        let alpha = if col[r] >= 0.0 { -tail_norm } else { tail_norm };
        let mut v = col[r..].to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|a| a * a).sum();
        let h = Reflector { row: r, v, beta: 2.0 / vtv };
        for c in cols.iter_mut().skip(j) {
            h.apply(c);
        }
        h.apply(&mut z);
        reflectors.push(h);
        retained.push(j);
    }

    if retained.is_empty() {
        return Err(Error::NoIdentifyingVariation("design has rank zero".to_string()));
    }

    // back substitution on the retained upper-triangular block
    let rank = retained.len();
    let mut beta = vec![0.0; rank];
    for k in (0..rank).rev() {
        let mut acc = z[k];
        for c in k + 1..rank {
            acc -= cols[retained[c]][k] * beta[c];
        }
        beta[k] = acc / cols[retained[k]][k];
    }

    let mut residuals = z;
    for v in residuals.iter_mut().take(rank) {
        *v = 0.0;
    }
    for h in reflectors.iter().rev() {
        h.apply(&mut residuals);
    }
    let sum_sq_residuals = residuals.iter().map(|e| e * e).sum();

    let mut coefficients = vec![None; p];
    for (k, &j) in retained.iter().enumerate() {
        coefficients[j] = Some(beta[k]);
    }
    Ok(LeastSquaresFit { coefficients, residuals, sum_sq_residuals, dropped_columns: dropped })
}

/// `target` minus its least-squares projection onto `controls`.
pub fn fwl_residualize(target: &[f64], controls: &Matrix) -> Result<Vec<f64>> {
    if controls.rows() != target.len() {
        return Err(Error::ShapeMismatch { expected: controls.rows(), found: target.len() });
    }
    if controls.cols() == 0 || target.is_empty() {
        return Ok(target.to_vec());
    }
    match ols(controls, target) {
        Ok(fit) => Ok(fit.residuals),
        Err(Error::NoIdentifyingVariation(_)) => Ok(target.to_vec()),
        Err(e) => Err(e),
    }
}

/// Both sides of the pairwise cross-moment identity
/// `Σ_t (x_t - x̄)(y_t - ȳ) = (1/T) Σ_{s>t} (x_s - x_t)(y_s - y_t)`,
/// each computed on its own.
pub fn pairwise_cross_moment(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch { expected: x.len(), found: y.len() });
    }
    let t = x.len();
    if t < 2 {
        return Err(Error::InvalidConfig("sequences need at least two elements".to_string()));
    }
    let xbar = mean(x);
    let ybar = mean(y);
    let lhs = x.iter().zip(y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
    let mut rhs = 0.0;
    for s in 1..t {
        for u in 0..s {
            rhs += (x[s] - x[u]) * (y[s] - y[u]);
        }
    }
    Ok((lhs, rhs / t as f64))
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    m + x.iter().map(|v| v - m).sum::<f64>() / n
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mean_fit() {
        let x = Matrix::from_columns(3, &[vec![1.0; 3]]).unwrap();
        let fit = ols(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert!((fit.coefficients[0].unwrap() - 2.0).abs() < 1e-14);
        for (e, want) in fit.residuals.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((e - want).abs() < 1e-14);
        }
        assert!((fit.sum_sq_residuals - 2.0).abs() < 1e-13);
    }

    #[test]
    fn duplicated_column_is_dropped() {
        let a = vec![1.0, 2.0, 0.5, -1.0];
        let ones = vec![1.0; 4];
        let y = [0.3, 1.1, 2.0, -0.7];
        let base = ols(&Matrix::from_columns(4, &[ones.clone(), a.clone()]).unwrap(), &y).unwrap();
        let dup = ols(&Matrix::from_columns(4, &[ones, a.clone(), a]).unwrap(), &y).unwrap();
        assert_eq!(dup.dropped_columns, vec![2]);
        assert_eq!(dup.coefficients[2], None);
        assert!((dup.coefficients[1].unwrap() - base.coefficients[1].unwrap()).abs() < 1e-12);
        assert!((dup.sum_sq_residuals - base.sum_sq_residuals).abs() < 1e-12);
    }

    #[test]
    fn zero_design_errors() {
        let x = Matrix::zeros(3, 2);
        assert!(matches!(ols(&x, &[1.0, 2.0, 3.0]), Err(Error::NoIdentifyingVariation(_))));
    }

    #[test]
    fn more_columns_than_rows() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![1.0, 1.0, 5.0]]).unwrap();
        let fit = ols(&x, &[3.0, 4.0]).unwrap();
        assert_eq!(fit.dropped_columns, vec![2]);
        assert!(fit.sum_sq_residuals < 1e-24);
    }

    #[test]
    fn fwl_intercept_only_demeans() {
        let c = Matrix::from_columns(4, &[vec![1.0; 4]]).unwrap();
        let r = fwl_residualize(&[1.0, 2.0, 3.0, 6.0], &c).unwrap();
        for (a, b) in r.iter().zip([-2.0, -1.0, 0.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fwl_orthogonal_target_unchanged() {
        let c = Matrix::from_columns(4, &[vec![1.0; 4]]).unwrap();
        let target = [1.0, -1.0, 2.0, -2.0];
        let r = fwl_residualize(&target, &c).unwrap();
        for (a, b) in r.iter().zip(target) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fwl_without_controls_is_identity() {
        let target = [1.0, 5.0];
        assert_eq!(fwl_residualize(&target, &Matrix::zeros(2, 0)).unwrap(), target.to_vec());
    }

    #[test]
    fn cross_moment_examples() {
        let (l, r) = pairwise_cross_moment(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((l - 2.0).abs() < 1e-15 && (r - 2.0).abs() < 1e-15);
        let (l, r) = pairwise_cross_moment(&[1.0, 4.0, 2.0], &[3.0; 3]).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
        assert!(pairwise_cross_moment(&[1.0], &[1.0, 2.0]).is_err());
        assert!(pairwise_cross_moment(&[1.0], &[1.0]).is_err());
    }
}
