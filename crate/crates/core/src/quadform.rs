//! Inertia of small real symmetric forms (`n ≤ 3`).
//!
//! A form `M` is the quadratic `θ ↦ θᵀMθ`. Eigenvalues come from a cyclic
//! Jacobi sweep, which is exact enough at this size and keeps eigenvectors
//! orthonormal to round-off.

use serde::Serialize;
use thiserror::Error;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("dimension mismatch: form is {form}x{form}, basis has {rows} rows")]
    DimensionMismatch { form: usize, rows: usize },
    #[error("basis has {0} columns, more than its row count")]
    TooManyColumns(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetricForm {
    n: usize,
    a: [[f64; MAX_DIM]; MAX_DIM],
}

impl Serialize for SymmetricForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl SymmetricForm {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM, "forms are limited to {MAX_DIM}x{MAX_DIM}");
        Self {
            n,
            a: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.a[i][i] = v;
        }
        m
    }

    /// Build from `f(i, j)`, symmetrizing as `(f(i,j) + f(j,i)) / 2`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i][j] = 0.5 * (f(i, j) + f(j, i));
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        Self::from_fn(rows.len(), |i, j| rows[i][j])
    }

    /// `v vᵀ`, the matrix of `(v·θ)²`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n);
        self.a[i][j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.a[i][..self.n].to_vec()).collect()
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n);
        Self::from_fn(self.n, |i, j| self.a[i][j] + o.a[i][j])
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n);
        Self::from_fn(self.n, |i, j| self.a[i][j] - o.a[i][j])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(self.n, |i, j| s * self.a[i][j])
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        s.sqrt()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a[i][j] * v[j]).sum())
            .collect()
    }

    /// `θᵀMθ`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        self.matvec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Eigenvalues in ascending order with matching orthonormal eigenvectors.
    pub fn eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let mut a = self.a;
        let stop = (1e-20 * self.frobenius()).powi(2);
        let mut v = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in v.iter_mut().enumerate().take(n) {
            row[i] = 1.0;
        }
        for _sweep in 0..64 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i][j] * a[i][j];
                }
            }
            if off <= stop {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q] == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut().take(n) {
                        let vkp = row[p];
                        let vkq = row[q];
                        row[p] = c * vkp - s * vkq;
                        row[q] = s * vkp + c * vkq;
                    }
                    a[p][q] = 0.0;
                    a[q][p] = 0.0;
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
        let vals = order.iter().map(|&i| a[i][i]).collect();
        let vecs = order
            .iter()
            .map(|&i| (0..n).map(|k| v[k][i]).collect())
            .collect();
        (vals, vecs)
    }
}

/// Inertia `(p, q, z)` with the data behind the zero/nonzero decisions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Signature {
    pub p: usize,
    pub q: usize,
    pub z: usize,
    pub eigenvalues: Vec<f64>,
    pub scale: f64,
    pub threshold: f64,
    /// Smallest `|λ|` counted as nonzero.
    pub min_nonzero: Option<f64>,
    /// Largest `|λ|` counted as zero.
    pub max_zero: Option<f64>,
    /// Some eigenvalue sits within a factor 10 of the threshold.
    pub fragile: bool,
}

impl Signature {
    pub fn pq(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn swapped(&self) -> (usize, usize) {
        (self.q, self.p)
    }
}

const SCALE_FLOOR: f64 = 1e-300;

pub fn signature(m: &SymmetricForm, tol: f64) -> Signature {
    signature_with_scale(m, tol, 0.0)
}

/// Like [`signature`], but the threshold is `tol·max(reference, ‖M‖)`. Used
/// when `M` is a difference of larger forms and may be pure round-off.
pub fn signature_with_scale(m: &SymmetricForm, tol: f64, reference: f64) -> Signature {
    let (vals, _) = m.eigen();
    classify_eigenvalues(vals, tol, reference)
}

fn classify_eigenvalues(eigenvalues: Vec<f64>, tol: f64, reference: f64) -> Signature {
    let spec = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = spec.max(reference).max(SCALE_FLOOR);
    let threshold = tol * scale;
    let (mut p, mut q, mut z) = (0, 0, 0);
    let mut min_nonzero: Option<f64> = None;
    let mut max_zero: Option<f64> = None;
    for &v in &eigenvalues {
        let a = v.abs();
        if v > threshold {
            p += 1;
        } else if v < -threshold {
            q += 1;
        } else {
            z += 1;
            max_zero = Some(max_zero.map_or(a, |m| m.max(a)));
            continue;
        }
        min_nonzero = Some(min_nonzero.map_or(a, |m| m.min(a)));
    }
    let fragile = min_nonzero.is_some_and(|m| m < 10.0 * threshold)
        || max_zero.is_some_and(|m| m > 0.1 * threshold && m > 0.0);
    Signature {
        p,
        q,
        z,
        eigenvalues,
        scale,
        threshold,
        min_nonzero,
        max_zero,
        fragile,
    }
}

/// Orthonormal basis of the numerical kernel (eigenvectors with
/// `|λ| ≤ tol·scale`). Its size equals `signature(m, tol).z`.
pub fn kernel_basis(m: &SymmetricForm, tol: f64) -> Vec<Vec<f64>> {
    kernel_basis_with_scale(m, tol, 0.0)
}

pub fn kernel_basis_with_scale(m: &SymmetricForm, tol: f64, reference: f64) -> Vec<Vec<f64>> {
    let (vals, vecs) = m.eigen();
    let spec = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let threshold = tol * spec.max(reference).max(SCALE_FLOOR);
    vals.iter()
        .zip(vecs)
        .filter(|(v, _)| v.abs() <= threshold)
        .map(|(_, e)| e)
        .collect()
}

/// `BᵀMB` for a column set `B` (each inner vector is one column).
pub fn restrict(m: &SymmetricForm, basis: &[Vec<f64>]) -> Result<SymmetricForm, QuadError> {
    for col in basis {
        if col.len() != m.n {
            return Err(QuadError::DimensionMismatch {
                form: m.n,
                rows: col.len(),
            });
        }
    }
    if basis.len() > m.n {
        return Err(QuadError::TooManyColumns(basis.len()));
    }
    let mb: Vec<Vec<f64>> = basis.iter().map(|c| m.matvec(c)).collect();
    Ok(SymmetricForm::from_fn(basis.len(), |i, j| {
        basis[i].iter().zip(&mb[j]).map(|(a, b)| a * b).sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_signatures() {
        let s = signature(&SymmetricForm::identity(3), 1e-8);
        assert_eq!((s.p, s.q, s.z), (3, 0, 0));
        let s = signature(&SymmetricForm::zeros(3), 1e-8);
        assert_eq!((s.p, s.q, s.z), (0, 0, 3));
        assert!(!s.fragile);
    }

    #[test]
    fn pair_sum_form_has_one_dimensional_kernel() {
        let m = SymmetricForm::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.0, 0.25],
        ]);
        let s = signature(&m, 1e-8);
        assert_eq!((s.p, s.q, s.z), (2, 0, 1));
        let k = kernel_basis(&m, 1e-8);
        assert_eq!(k.len(), 1);
        let mv = m.matvec(&k[0]);
        assert!(mv.iter().all(|x| x.abs() <= 1e-12));
        let r = 0.5f64.sqrt();
        assert!((k[0][0].abs() - r).abs() < 1e-12 && (k[0][0] + k[0][1]).abs() < 1e-12);
        assert!(kernel_basis(&SymmetricForm::identity(3), 1e-8).is_empty());
    }

    #[test]
    fn kernel_of_rank_one_sum_form() {
        let m = SymmetricForm::outer(&[1.0, 1.0, 1.0]).scale(0.25);
        let k = kernel_basis(&m, 1e-8);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(v.iter().sum::<f64>().abs() < 1e-12);
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(k[0].iter().zip(&k[1]).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn restriction_examples() {
        let r = 0.5f64.sqrt();
        let m = SymmetricForm::diag(&[0.0, 0.0, -0.005]);
        let out = restrict(&m, &[vec![r, -r, 0.0]]).unwrap();
        assert_eq!(out.n(), 1);
        assert_eq!(out.get(0, 0), 0.0);

        let m = SymmetricForm::from_rows(&[vec![1.0, 2.0, 0.0], vec![2.0, -1.0, 0.5], vec![0.0, 0.5, 3.0]]);
        let e: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        assert_eq!(restrict(&m, &e).unwrap(), m);
        assert!(matches!(
            restrict(&m, &[vec![1.0, 0.0]]),
            Err(QuadError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn restriction_to_sum_kernel_tracks_pairwise_products() {
        let k = kernel_basis(&SymmetricForm::outer(&[1.0, 1.0, 1.0]), 1e-8);
        for &(a, b, c) in &[(0.01, 0.01, 0.01), (0.01, -0.01, 0.0), (0.01, 0.0, 0.0), (-0.3, 0.2, 0.5)] {
            let r = restrict(&SymmetricForm::diag(&[a, b, c]), &k).unwrap();
            let det = r.get(0, 0) * r.get(1, 1) - r.get(0, 1) * r.get(1, 0);
            // On {Σθ = 0} with an orthonormal basis the determinant is (ab+bc+ca)/3.
            let expect = (a * b + b * c + c * a) / 3.0;
            assert!((det - expect).abs() < 1e-14, "{det} vs {expect}");
        }
    }

    #[test]
    fn negation_swaps_inertia() {
        let m = SymmetricForm::diag(&[2.0, -1.0, 0.0]);
        let s = signature(&m, 1e-8);
        let t = signature(&m.scale(-1.0), 1e-8);
        assert_eq!(s.pq(), t.swapped());
    }

    #[test]
    fn reference_scale_suppresses_round_off() {
        let m = SymmetricForm::diag(&[1e-17, -2e-17, 0.0]);
        assert_eq!(signature(&m, 1e-8).pq(), (1, 1));
        assert_eq!(signature_with_scale(&m, 1e-8, 1.0).pq(), (0, 0));
    }

    #[test]
    fn fragile_flag_near_threshold() {
        let m = SymmetricForm::diag(&[1.0, 5e-8]);
        let s = signature(&m, 1e-8);
        assert_eq!(s.pq(), (2, 0));
        assert!(s.fragile);
        assert!(!signature(&SymmetricForm::diag(&[1.0, 0.5]), 1e-8).fragile);
    }
}
