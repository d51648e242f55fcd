//! Order-3 truncated Taylor jets in the angular variables `θ ∈ R^d`.
//!
//! The jet of `ψ(θ) = conj(η)·p(ξ∘e^{iθ})` at `θ = 0` carries everything the
//! classifier reads off a contact: the linear stratum of `Im ψ` (the
//! gradient `ℓ`), the quadratic stratum of `Re ψ` (the contact form
//! `Q = −re_hess/2`) and the quadratic stratum of `Im ψ` (`A = im_hess/2`).

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::polysym::ComplexPolynomial;
use crate::quadform::SymmetricForm;

pub const ORDER: u32 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum JetError {
    #[error("jet dimension must be 1, 2 or 3 (got {0})")]
    BadDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("variable slot {slot} out of range for dimension {dim}")]
    BadSlot { slot: usize, dim: usize },
    #[error("base value has modulus {0}, expected 1")]
    NonUnimodular(f64),
    #[error("not a contact: |conj(η)p(ξ) − 1| = {residual:.3e}")]
    NotAContact { residual: f64 },
}

/// Monomials `θ^α` with `|α| ≤ 3` in a fixed order (by degree, then
/// lexicographically descending) plus the truncated product table.
struct Basis {
    exps: Vec<[u32; 3]>,
    mul: Vec<Option<usize>>,
}

impl Basis {
    fn build(dim: usize) -> Self {
        let mut exps = Vec::new();
        for deg in 0..=ORDER {
            let mut level = Vec::new();
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let c = deg - a - b;
                    let e = [a, b, c];
                    if e[dim..].iter().all(|&x| x == 0) {
                        level.push(e);
                    }
                }
            }
            level.sort_unstable_by(|x, y| y.cmp(x));
            level.dedup();
            exps.extend(level);
        }
        let n = exps.len();
        let mut mul = vec![None; n * n];
        for i in 0..n {
            for j in 0..n {
                let s = [
                    exps[i][0] + exps[j][0],
                    exps[i][1] + exps[j][1],
                    exps[i][2] + exps[j][2],
                ];
                mul[i * n + j] = exps.iter().position(|e| *e == s);
            }
        }
        Self { exps, mul }
    }

    fn index(&self, e: &[u32]) -> Option<usize> {
        let mut full = [0u32; 3];
        full[..e.len()].copy_from_slice(e);
        self.exps.iter().position(|x| *x == full)
    }
}

fn basis(dim: usize) -> &'static Basis {
    static TABLES: OnceLock<[Basis; 3]> = OnceLock::new();
    &TABLES.get_or_init(|| [Basis::build(1), Basis::build(2), Basis::build(3)])[dim - 1]
}

/// Number of monomials of degree ≤ 3 in `d` variables, `C(d+3, 3)`.
pub fn jet_len(dim: usize) -> usize {
    (dim + 1) * (dim + 2) * (dim + 3) / 6
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JetBase {
    pub xi: Vec<f64>,
    pub eta: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngularJet {
    dim: usize,
    coeffs: Vec<Complex64>,
    base: Option<JetBase>,
}

impl AngularJet {
    pub fn zero(dim: usize) -> Result<Self, JetError> {
        if !(1..=3).contains(&dim) {
            return Err(JetError::BadDimension(dim));
        }
        Ok(Self {
            dim,
            coeffs: vec![Complex64::new(0.0, 0.0); jet_len(dim)],
            base: None,
        })
    }

    pub fn constant(dim: usize, c: Complex64) -> Result<Self, JetError> {
        let mut j = Self::zero(dim)?;
        j.coeffs[0] = c;
        Ok(j)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn base(&self) -> Option<&JetBase> {
        self.base.as_ref()
    }

    /// Coefficient of `θ^α`; zero for `|α| > 3`.
    pub fn coefficient(&self, alpha: &[u32]) -> Complex64 {
        assert_eq!(alpha.len(), self.dim);
        basis(self.dim)
            .index(alpha)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn add(&self, o: &Self) -> Result<Self, JetError> {
        if self.dim != o.dim {
            return Err(JetError::DimensionMismatch(self.dim, o.dim));
        }
        Ok(Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect(),
            base: None,
        })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            base: self.base.clone(),
        }
    }

    /// The truncated polynomial evaluated at `θ`.
    pub fn evaluate(&self, theta: &[f64]) -> Complex64 {
        assert_eq!(theta.len(), self.dim);
        basis(self.dim)
            .exps
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| {
                let m: f64 = theta
                    .iter()
                    .zip(e)
                    .map(|(t, &a)| t.powi(a as i32))
                    .product();
                c * m
            })
            .sum()
    }

    /// Largest coefficient modulus in the cubic stratum.
    pub fn cubic_size(&self) -> f64 {
        basis(self.dim)
            .exps
            .iter()
            .zip(&self.coeffs)
            .filter(|(e, _)| e.iter().sum::<u32>() == 3)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Jet of `θ ↦ ξ_k e^{iθ_k}` in `dim` variables (`k` 0-based).
pub fn circle_jet(dim: usize, k: usize, xi_k: Complex64) -> Result<AngularJet, JetError> {
    if (xi_k.norm() - 1.0).abs() > 1e-12 {
        return Err(JetError::NonUnimodular(xi_k.norm()));
    }
    if k >= dim {
        return Err(JetError::BadSlot { slot: k, dim });
    }
    let mut j = AngularJet::zero(dim)?;
    let b = basis(dim);
    let i = Complex64::new(0.0, 1.0);
    let series = [Complex64::new(1.0, 0.0), i, Complex64::new(-0.5, 0.0), -i / 6.0];
    for (m, s) in series.iter().enumerate() {
        let mut e = vec![0u32; dim];
        e[k] = m as u32;
        let idx = b.index(&e).expect("degree ≤ 3 monomial");
        j.coeffs[idx] = xi_k * s;
    }
    Ok(j)
}

/// Product truncated at total degree 3.
pub fn jet_mul(a: &AngularJet, b: &AngularJet) -> Result<AngularJet, JetError> {
    if a.dim != b.dim {
        return Err(JetError::DimensionMismatch(a.dim, b.dim));
    }
    let basis = basis(a.dim);
    let n = a.coeffs.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, ca) in a.coeffs.iter().enumerate() {
        if *ca == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (j, cb) in b.coeffs.iter().enumerate() {
            if let Some(k) = basis.mul[i * n + j] {
                out[k] += ca * cb;
            }
        }
    }
    Ok(AngularJet {
        dim: a.dim,
        coeffs: out,
        base: None,
    })
}

/// Jet of `θ ↦ p(ξ∘e^{iθ})` without normalization.
pub fn local_jet(p: &ComplexPolynomial, xi: &[f64]) -> Result<AngularJet, JetError> {
    let dim = p.dim();
    if xi.len() != dim {
        return Err(JetError::DimensionMismatch(dim, xi.len()));
    }
    // powers[k][m] = jet of (ξ_k e^{iθ_k})^m
    let mut powers: Vec<Vec<AngularJet>> = Vec::with_capacity(dim);
    for (k, &t) in xi.iter().enumerate() {
        let z = circle_jet(dim, k, Complex64::from_polar(1.0, t))?;
        let mut pw = vec![AngularJet::constant(dim, Complex64::new(1.0, 0.0))?];
        for m in 1..=p.degree_in(k) as usize {
            let next = jet_mul(&pw[m - 1], &z)?;
            pw.push(next);
        }
        powers.push(pw);
    }
    let mut acc = AngularJet::zero(dim)?;
    for (e, c) in p.terms() {
        let mut t = AngularJet::constant(dim, *c)?;
        for (k, &a) in e.iter().enumerate() {
            if a > 0 {
                t = jet_mul(&t, &powers[k][a as usize])?;
            }
        }
        acc = acc.add(&t)?;
    }
    Ok(acc)
}

/// Contact-normalized jet `conj(η)·p(ξ∘e^{iθ})`; its constant term is 1.
pub fn symbol_jet(p: &ComplexPolynomial, xi: &[f64], eta: Complex64) -> Result<AngularJet, JetError> {
    if (eta.norm() - 1.0).abs() > 1e-9 {
        return Err(JetError::NonUnimodular(eta.norm()));
    }
    let raw = local_jet(p, xi)?;
    let mut j = raw.scale(eta.conj());
    let residual = (j.coeffs[0] - Complex64::new(1.0, 0.0)).norm();
    if residual > 1e-6 {
        return Err(JetError::NotAContact { residual });
    }
    j.base = Some(JetBase {
        xi: xi.to_vec(),
        eta,
    });
    Ok(j)
}

/// Gradients and Hessians at `θ = 0` of the real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealStrata {
    pub re_grad: Vec<f64>,
    pub im_grad: Vec<f64>,
    pub re_hess: SymmetricForm,
    pub im_hess: SymmetricForm,
}

impl RealStrata {
    /// Contact form `Q = −re_hess/2`, so `Re ψ = 1 − θᵀQθ + O(|θ|³)`.
    pub fn q_form(&self) -> SymmetricForm {
        self.re_hess.scale(-0.5)
    }

    /// `A = im_hess/2`, the quadratic stratum of `Im ψ`.
    pub fn a_form(&self) -> SymmetricForm {
        self.im_hess.scale(0.5)
    }
}

pub fn real_strata(j: &AngularJet) -> RealStrata {
    let d = j.dim;
    let unit = |k: usize| {
        let mut e = vec![0u32; d];
        e[k] = 1;
        e
    };
    let grad: Vec<Complex64> = (0..d).map(|k| j.coefficient(&unit(k))).collect();
    // Hessian entry from the θ_kθ_l coefficient: 2c on the diagonal, c off it.
    let hess = |k: usize, l: usize| {
        let mut e = vec![0u32; d];
        e[k] += 1;
        e[l] += 1;
        let c = j.coefficient(&e);
        if k == l {
            c * 2.0
        } else {
            c
        }
    };
    let h: Vec<Vec<Complex64>> = (0..d).map(|k| (0..d).map(|l| hess(k, l)).collect()).collect();
    RealStrata {
        re_grad: grad.iter().map(|c| c.re).collect(),
        im_grad: grad.iter().map(|c| c.im).collect(),
        re_hess: SymmetricForm::from_fn(d, |k, l| h[k][l].re),
        im_hess: SymmetricForm::from_fn(d, |k, l| h[k][l].im),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysym::parse_expression;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-14
    }

    #[test]
    fn lengths() {
        assert_eq!(jet_len(1), 4);
        assert_eq!(jet_len(2), 10);
        assert_eq!(jet_len(3), 20);
        for d in 1..=3 {
            assert_eq!(basis(d).exps.len(), jet_len(d));
        }
    }

    #[test]
    fn circle_jet_is_exponential_series() {
        let j = circle_jet(1, 0, c(1.0, 0.0)).unwrap();
        let want = [c(1.0, 0.0), c(0.0, 1.0), c(-0.5, 0.0), c(0.0, -1.0 / 6.0)];
        for (m, w) in want.iter().enumerate() {
            assert!(close(j.coefficient(&[m as u32]), *w));
        }
        let j3 = circle_jet(3, 2, c(1.0, 0.0)).unwrap();
        assert!(close(j3.coefficient(&[0, 0, 2]), c(-0.5, 0.0)));
        assert!(close(j3.coefficient(&[1, 0, 0]), c(0.0, 0.0)));
        let neg = circle_jet(1, 0, c(-1.0, 0.0)).unwrap();
        for (m, w) in want.iter().enumerate() {
            assert!(close(neg.coefficient(&[m as u32]), -w));
        }
        assert!(matches!(circle_jet(1, 0, c(0.5, 0.0)), Err(JetError::NonUnimodular(_))));
    }

    #[test]
    fn products() {
        let mut a = AngularJet::constant(2, c(1.0, 0.0)).unwrap();
        let mut b = a.clone();
        a.coeffs[basis(2).index(&[1, 0]).unwrap()] = c(0.0, 1.0);
        b.coeffs[basis(2).index(&[0, 1]).unwrap()] = c(0.0, 1.0);
        let p = jet_mul(&a, &b).unwrap();
        assert!(close(p.coefficient(&[1, 1]), c(-1.0, 0.0)));
        assert!(close(p.coefficient(&[1, 0]), c(0.0, 1.0)));

        let e1 = circle_jet(2, 0, c(1.0, 0.0)).unwrap();
        let e2 = circle_jet(2, 1, c(1.0, 0.0)).unwrap();
        let e12 = jet_mul(&e1, &e2).unwrap();
        assert!(close(e12.coefficient(&[2, 0]), c(-0.5, 0.0)));
        assert!(close(e12.coefficient(&[1, 1]), c(-1.0, 0.0)));
        assert!(close(e12.coefficient(&[0, 2]), c(-0.5, 0.0)));

        let z = AngularJet::zero(2).unwrap();
        assert_eq!(jet_mul(&e12, &z).unwrap(), z);
        assert!(jet_mul(&e1, &AngularJet::zero(3).unwrap()).is_err());
    }

    #[test]
    fn symbol_jet_examples() {
        let p = parse_expression("z1*z2", 2).unwrap();
        let j = symbol_jet(&p, &[0.0, 0.0], c(1.0, 0.0)).unwrap();
        assert!(close(j.coefficient(&[1, 1]), c(-1.0, 0.0)));
        assert!(close(j.coefficient(&[2, 1]), c(0.0, -0.5)));

        let g = parse_expression("(1+z3)/2", 3).unwrap();
        let j = symbol_jet(&g, &[0.0; 3], c(1.0, 0.0)).unwrap();
        assert!(close(j.coefficient(&[0, 0, 1]), c(0.0, 0.5)));
        assert!(close(j.coefficient(&[0, 0, 2]), c(-0.25, 0.0)));
        assert!(close(j.coefficient(&[0, 0, 3]), c(0.0, -1.0 / 12.0)));

        let avg = parse_expression("(z1+z2+z3)/3", 3).unwrap();
        let s = real_strata(&symbol_jet(&avg, &[0.0; 3], c(1.0, 0.0)).unwrap());
        for k in 0..3 {
            assert!((s.im_grad[k] - 1.0 / 3.0).abs() < 1e-15);
            assert!(s.re_grad[k].abs() < 1e-15);
            for l in 0..3 {
                let want = if k == l { -1.0 / 3.0 } else { 0.0 };
                assert!((s.re_hess.get(k, l) - want).abs() < 1e-15);
            }
        }

        assert!(matches!(
            symbol_jet(&avg, &[0.5, 0.0, 0.0], c(1.0, 0.0)),
            Err(JetError::NotAContact { .. })
        ));
    }

    #[test]
    fn strata_of_product_and_constant() {
        let p = parse_expression("z1*z2", 2).unwrap();
        let s = real_strata(&symbol_jet(&p, &[0.0, 0.0], c(1.0, 0.0)).unwrap());
        assert_eq!(s.re_grad, vec![0.0, 0.0]);
        assert_eq!(s.im_grad, vec![1.0, 1.0]);
        assert_eq!(s.re_hess.rows(), vec![vec![-1.0, -1.0], vec![-1.0, -1.0]]);
        let one = AngularJet::constant(3, c(1.0, 0.0)).unwrap();
        let s = real_strata(&one);
        assert!(s.re_grad.iter().chain(&s.im_grad).all(|&x| x == 0.0));
        assert_eq!(s.re_hess.max_abs(), 0.0);
        assert_eq!(s.im_hess.max_abs(), 0.0);
    }

    #[test]
    fn normalization_at_rotated_point() {
        // z1z2 at ξ = (α, −α): value 1, gradient (1, 1) as at the origin.
        let p = parse_expression("z1*z2", 2).unwrap();
        let j = symbol_jet(&p, &[0.7, -0.7], c(1.0, 0.0)).unwrap();
        let s = real_strata(&j);
        assert!((s.im_grad[0] - 1.0).abs() < 1e-14 && (s.im_grad[1] - 1.0).abs() < 1e-14);
    }
}
