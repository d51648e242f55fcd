//! Sparse complex polynomials in `d ≤ 3` variables and polynomial symbols
//! `φ = (φ_1, …, φ_d)` on the closed polydisc.

mod grid;
mod parse;
mod symbol;

pub use grid::{grid_angle, TorusGrid};
pub use parse::{parse_expression, ParseError, ParseErrorKind};
pub use symbol::{self_map_report, ComponentScreen, SelfMapReport, Symbol, SymbolError};

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

/// Exponent vector of a monomial; its length is the ambient dimension.
pub type Exponents = Vec<u32>;

/// Sparse polynomial with complex coefficients. Zero coefficients are never
/// stored, so `terms()` is exactly the support.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPolynomial {
    dim: usize,
    terms: BTreeMap<Exponents, Complex64>,
}

impl ComplexPolynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate `z_k` (0-based `k`).
    pub fn variable(dim: usize, k: usize) -> Self {
        assert!(k < dim, "variable index {k} out of range for dimension {dim}");
        let mut e = vec![0; dim];
        e[k] = 1;
        let mut p = Self::zero(dim);
        p.add_term(e, Complex64::new(1.0, 0.0));
        p
    }

    /// Build from `(exponents, coefficient)` pairs; repeated exponents are summed.
    ///
    /// Panics if an exponent vector does not have length `dim`.
    pub fn from_terms<I>(dim: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Exponents, Complex64)>,
    {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            assert_eq!(e.len(), dim, "exponent vector length must equal the dimension");
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, e: Exponents, c: Complex64) {
        use std::collections::btree_map::Entry;
        let zero = Complex64::new(0.0, 0.0);
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                if c != zero {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == zero {
                    o.remove();
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, e: &[u32]) -> Complex64 {
        self.terms
            .get(e)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Total degree; zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Largest exponent of `z_k` appearing in any term.
    pub fn degree_in(&self, k: usize) -> u32 {
        self.terms.keys().map(|e| e[k]).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&a| a == 0))
    }

    /// `Some(c)` when the polynomial is a single term `c·z^α`.
    pub fn as_monomial(&self) -> Option<(&Exponents, Complex64)> {
        if self.terms.len() == 1 {
            self.terms.iter().next().map(|(e, c)| (e, *c))
        } else {
            None
        }
    }

    pub fn evaluate(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(z.len(), self.dim, "point dimension mismatch");
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut t = *c;
            for (zk, &a) in z.iter().zip(e) {
                if a > 0 {
                    t *= zk.powu(a);
                }
            }
            acc += t;
        }
        acc
    }

    /// Evaluate at the torus point `e^{iθ}`.
    pub fn evaluate_angles(&self, theta: &[f64]) -> Complex64 {
        let z: Vec<Complex64> = theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        self.evaluate(&z)
    }

    /// Formal derivative with respect to `z_k` (0-based).
    pub fn partial_derivative(&self, k: usize) -> Self {
        assert!(k < self.dim, "variable index out of range");
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut e2 = e.clone();
                e2[k] -= 1;
                out.add_term(e2, c * f64::from(e[k]));
            }
        }
        out
    }

    /// True iff some stored term has a positive power of `z_k` (0-based).
    pub fn depends_on(&self, k: usize) -> bool {
        self.terms.keys().any(|e| e[k] > 0)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_terms(self.dim, self.terms.iter().map(|(e, c)| (e.clone(), c * s)))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::constant(self.dim, Complex64::new(1.0, 0.0));
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Substitute `z_k ↦ ρ_k z_k` for unimodular (or arbitrary) `ρ`.
    pub fn rotate_inputs(&self, rho: &[Complex64]) -> Self {
        assert_eq!(rho.len(), self.dim);
        Self::from_terms(
            self.dim,
            self.terms.iter().map(|(e, c)| {
                let mut s = *c;
                for (r, &a) in rho.iter().zip(e) {
                    s *= r.powu(a);
                }
                (e.clone(), s)
            }),
        )
    }

    /// Relabel variables: new variable `perm[k]` takes the role of old `z_k`.
    pub fn permute_variables(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        Self::from_terms(
            self.dim,
            self.terms.iter().map(|(e, c)| {
                let mut e2 = vec![0; self.dim];
                for (k, &a) in e.iter().enumerate() {
                    e2[perm[k]] = a;
                }
                (e2, *c)
            }),
        )
    }

    /// Expression text accepted by [`parse_expression`]; floats are printed in
    /// shortest round-trip form, so parsing the output reproduces the terms.
    pub fn to_expression(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut s = format!("({}{}{}i)", fmt_f64(c.re), if c.im.is_sign_negative() { "-" } else { "+" }, fmt_f64(c.im.abs()));
                for (k, &a) in e.iter().enumerate() {
                    match a {
                        0 => {}
                        1 => s.push_str(&format!("*z{}", k + 1)),
                        _ => s.push_str(&format!("*z{}^{}", k + 1, a)),
                    }
                }
                s
            })
            .collect();
        parts.join(" + ")
    }
}

fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

impl fmt::Display for ComplexPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_expression())
    }
}

impl<'a> Add<&'a ComplexPolynomial> for &'a ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn add(self, rhs: &ComplexPolynomial) -> ComplexPolynomial {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }
}

impl<'a> Sub<&'a ComplexPolynomial> for &'a ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn sub(self, rhs: &ComplexPolynomial) -> ComplexPolynomial {
        self + &(-rhs)
    }
}

impl Neg for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn neg(self) -> ComplexPolynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl<'a> Mul<&'a ComplexPolynomial> for &'a ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn mul(self, rhs: &ComplexPolynomial) -> ComplexPolynomial {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = ComplexPolynomial::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Exponents = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluate_product_at_imaginary_units() {
        let p = parse_expression("z1*z2", 3).unwrap();
        let v = p.evaluate(&[c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!((v - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn evaluate_average_and_quadratic_family() {
        let p = parse_expression("(z1+z2+z3)/3", 3).unwrap();
        let one = c(1.0, 0.0);
        assert!((p.evaluate(&[one, one, one]) - one).norm() < 1e-15);
        let f = parse_expression("(3+6*z1-z1^2)/8", 1).unwrap();
        assert!((f.evaluate(&[one]) - one).norm() < 1e-15);
    }

    #[test]
    fn derivatives() {
        let p = parse_expression("z1*z2", 2).unwrap();
        assert_eq!(p.partial_derivative(0), ComplexPolynomial::variable(2, 1));
        let q = parse_expression("(z1+z2)/2", 2).unwrap();
        assert_eq!(q.partial_derivative(1), ComplexPolynomial::constant(2, c(0.5, 0.0)));
        let k = ComplexPolynomial::constant(2, c(0.3, 0.1));
        assert!(k.partial_derivative(0).is_zero());
    }

    #[test]
    fn dependence_is_coefficient_level() {
        let p = parse_expression("z1*z2", 3).unwrap();
        assert!(!p.depends_on(2));
        let q = parse_expression("z1/3 + 2*z2/3", 3).unwrap();
        assert!(!q.depends_on(2));
        let r = parse_expression("z1*z2*z3", 3).unwrap();
        assert!(r.depends_on(2));
    }

    #[test]
    fn cancellation_removes_terms() {
        let p = parse_expression("z1 - z1 + 2", 2).unwrap();
        assert!(p.is_constant());
        assert_eq!(p.num_terms(), 1);
        let z = parse_expression("z1 - z1", 2).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.to_expression(), "0");
    }

    #[test]
    fn pretty_print_round_trips() {
        let p = parse_expression("0.1*z1^2*z3 - 2.5i*z2 + (1e-7+3i)", 3).unwrap();
        let q = parse_expression(&p.to_expression(), 3).unwrap();
        assert_eq!(p, q);
    }
}
