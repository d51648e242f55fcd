//! A library of symbols with known behaviour, including two families with a
//! small parameter whose admissibility (`|φ_j| ≤ 1` on the torus) is checked
//! on a dense grid.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::polysym::{ComplexPolynomial, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleName {
    Ex71,
    Ex73,
    Averaging3,
    TripleMonomial,
    Compact2Avg,
    Compact2Monomial,
    Compact3Pair,
    Compact3Avg,
    Identity,
}

impl ExampleName {
    pub const ALL: [ExampleName; 9] = [
        ExampleName::Ex71,
        ExampleName::Ex73,
        ExampleName::Averaging3,
        ExampleName::TripleMonomial,
        ExampleName::Compact2Avg,
        ExampleName::Compact2Monomial,
        ExampleName::Compact3Pair,
        ExampleName::Compact3Avg,
        ExampleName::Identity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleName::Ex71 => "ex71",
            ExampleName::Ex73 => "ex73",
            ExampleName::Averaging3 => "averaging3",
            ExampleName::TripleMonomial => "triple-monomial",
            ExampleName::Compact2Avg => "compact2-avg",
            ExampleName::Compact2Monomial => "compact2-monomial",
            ExampleName::Compact3Pair => "compact3-pair",
            ExampleName::Compact3Avg => "compact3-avg",
            ExampleName::Identity => "identity",
        }
    }

    /// Number of parameters and their defaults.
    pub fn default_params(self) -> Vec<f64> {
        match self {
            ExampleName::Ex71 => vec![0.01],
            ExampleName::Ex73 => vec![0.01, 0.01, 0.01],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleName {
    type Err = ExampleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| ExampleError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExampleError {
    #[error("unknown example `{0}`")]
    UnknownName(String),
    #[error("{name} takes {expected} parameter(s), got {found}")]
    BadParams {
        name: ExampleName,
        expected: usize,
        found: usize,
    },
    #[error("parameter {param} is not admissible: sup |·| on the torus is {sup:.15}")]
    Inadmissible { param: f64, sup: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleSpec {
    pub name: ExampleName,
    pub params: Vec<f64>,
}

impl ExampleSpec {
    pub fn new(name: ExampleName) -> Self {
        Self {
            name,
            params: name.default_params(),
        }
    }

    pub fn with_params(name: ExampleName, params: Vec<f64>) -> Self {
        Self { name, params }
    }
}

/// Grid density used to admit parameters.
pub const ADMISSIBILITY_GRID: usize = 4096;
const ADMISSIBILITY_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    /// `g_ε(z) = (1+z)/2 + iε(z−1)²`
    G,
    /// `F_ε(z) = (3+6z−z²)/8 + 2iε(z−1)² − iε(z−1)³`
    F,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The family member as a polynomial in `z_{k+1}` inside `dim` variables.
pub fn family_polynomial(family: Family, eps: f64, dim: usize, k: usize) -> ComplexPolynomial {
    let z = ComplexPolynomial::variable(dim, k);
    let one = ComplexPolynomial::constant(dim, c(1.0, 0.0));
    let zm1 = &z - &one;
    let zm1_sq = &zm1 * &zm1;
    match family {
        Family::G => {
            let base = (&one + &z).scale(c(0.5, 0.0));
            &base + &zm1_sq.scale(c(0.0, eps))
        }
        Family::F => {
            let base = (&(&ComplexPolynomial::constant(dim, c(3.0, 0.0)) + &z.scale(c(6.0, 0.0))) - &(&z * &z))
                .scale(c(0.125, 0.0));
            let cubic = &zm1_sq * &zm1;
            &(&base + &zm1_sq.scale(c(0.0, 2.0 * eps))) - &cubic.scale(c(0.0, eps))
        }
    }
}

/// `max |family_ε(e^{iθ})|` over `grid_n` equispaced angles.
pub fn family_sup(family: Family, eps: f64, grid_n: usize) -> f64 {
    let p = family_polynomial(family, eps, 1, 0);
    (0..grid_n)
        .map(|i| p.evaluate_angles(&[-PI + 2.0 * PI * i as f64 / grid_n as f64]).norm())
        .fold(0.0, f64::max)
}

fn check(family: Family, eps: f64) -> Result<(), ExampleError> {
    let sup = family_sup(family, eps, ADMISSIBILITY_GRID);
    if sup > 1.0 + ADMISSIBILITY_SLACK {
        Err(ExampleError::Inadmissible { param: eps, sup })
    } else {
        Ok(())
    }
}

/// Largest candidate `ε` such that it and every smaller candidate pass the
/// grid sup test at both `±ε`. Returns 0 when nothing positive passes.
pub fn admissible_epsilon(family: Family, grid_n: usize, eps_grid: &[f64]) -> f64 {
    assert!(grid_n >= ADMISSIBILITY_GRID, "grid_n must be at least {ADMISSIBILITY_GRID}");
    let mut cands: Vec<f64> = eps_grid.iter().map(|e| e.abs()).collect();
    cands.sort_by(f64::total_cmp);
    let mut best = 0.0;
    for e in cands {
        let ok = [e, -e]
            .iter()
            .all(|&x| family_sup(family, x, grid_n) <= 1.0 + ADMISSIBILITY_SLACK);
        if !ok {
            break;
        }
        best = e;
    }
    best
}

fn sym(components: Vec<ComplexPolynomial>) -> Symbol {
    Symbol::new(components).expect("library symbols are well formed")
}

fn parsed(exprs: &[&str]) -> Symbol {
    Symbol::from_expressions(exprs).expect("library symbols are well formed")
}

pub fn build_example(spec: &ExampleSpec) -> Result<Symbol, ExampleError> {
    let expected = spec.name.default_params().len();
    if spec.params.len() != expected {
        return Err(ExampleError::BadParams {
            name: spec.name,
            expected,
            found: spec.params.len(),
        });
    }
    let half = c(0.5, 0.0);
    Ok(match spec.name {
        ExampleName::Ex71 => {
            let eps = spec.params[0];
            check(Family::G, eps)?;
            let z12 = &ComplexPolynomial::variable(3, 0) * &ComplexPolynomial::variable(3, 1);
            let g = family_polynomial(Family::G, eps, 3, 2);
            let g0 = family_polynomial(Family::G, 0.0, 3, 2);
            sym(vec![
                (&z12 + &g).scale(half),
                (&z12 + &g0).scale(half),
                ComplexPolynomial::zero(3),
            ])
        }
        ExampleName::Ex73 => {
            for &p in &spec.params {
                check(Family::F, p)?;
            }
            let prod = |ps: [f64; 3]| {
                let mut acc = family_polynomial(Family::F, ps[0], 3, 0);
                for (k, &e) in ps.iter().enumerate().skip(1) {
                    acc = &acc * &family_polynomial(Family::F, e, 3, k);
                }
                acc
            };
            let (a, b, cc) = (spec.params[0], spec.params[1], spec.params[2]);
            sym(vec![prod([0.0; 3]), prod([a, b, cc]), ComplexPolynomial::zero(3)])
        }
        ExampleName::Averaging3 => parsed(&["(z1+z2+z3)/3", "(z1+z2+z3)/3", "0"]),
        ExampleName::TripleMonomial => parsed(&["z1*z2*z3", "z1*z2*z3", "0"]),
        ExampleName::Compact2Avg => parsed(&["(z1+z2)/2", "0"]),
        ExampleName::Compact2Monomial => parsed(&["z1*z2", "0"]),
        ExampleName::Compact3Pair => parsed(&["z1*z2", "z1/3 + 2*z2/3", "0"]),
        ExampleName::Compact3Avg => parsed(&["(z1+z2+z3)/3", "z1/4 + z2/2 + z3/4", "0"]),
        ExampleName::Identity => parsed(&["z1", "z2", "z3"]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in ExampleName::ALL {
            assert_eq!(n.as_str().parse::<ExampleName>().unwrap(), n);
        }
        assert!("ex99".parse::<ExampleName>().is_err());
    }

    #[test]
    fn family_members_at_zero() {
        assert!(family_sup(Family::F, 0.0, 4096) <= 1.0 + 1e-15);
        assert!(family_sup(Family::G, 0.0, 4096) <= 1.0 + 1e-15);
        let f = family_polynomial(Family::F, 0.0, 1, 0);
        assert!((f.evaluate(&[c(1.0, 0.0)]) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn admissible_range_of_the_quadratic_family() {
        let grid: Vec<f64> = (0..=40).map(|i| f64::from(i) * 0.0025).collect();
        let e = admissible_epsilon(Family::F, 4096, &grid);
        assert!(e >= 0.01 && e <= (3.0f64 / 512.0).sqrt(), "{e}");
        assert_eq!(admissible_epsilon(Family::F, 4096, &[0.0]), 0.0);
    }

    #[test]
    fn library_shapes() {
        let s = build_example(&ExampleSpec::new(ExampleName::Averaging3)).unwrap();
        assert_eq!(s.component(0), s.component(1));
        assert!(s.component(2).is_zero());
        let s = build_example(&ExampleSpec::new(ExampleName::Ex71)).unwrap();
        assert_eq!(s.component(0).coefficient(&[1, 1, 0]), c(0.5, 0.0));
        assert_eq!(s.component(1).coefficient(&[0, 0, 1]), c(0.25, 0.0));
        assert!((s.component(0).coefficient(&[0, 0, 2]) - c(0.0, 0.005)).norm() < 1e-18);
    }

    #[test]
    fn ex73_expansion_matches_factored_product() {
        let (a, b, cc) = (0.01, -0.01, 0.0);
        let s = build_example(&ExampleSpec::with_params(ExampleName::Ex73, vec![a, b, cc])).unwrap();
        let f = |e: f64, t: f64| family_polynomial(Family::F, e, 1, 0).evaluate_angles(&[t]);
        for i in 0..50 {
            let th = [0.1 * f64::from(i), -0.07 * f64::from(i), 0.3 + 0.05 * f64::from(i)];
            let direct = f(a, th[0]) * f(b, th[1]) * f(cc, th[2]);
            assert!((s.component(1).evaluate_angles(&th) - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            build_example(&ExampleSpec::with_params(ExampleName::Ex73, vec![0.01])),
            Err(ExampleError::BadParams { .. })
        ));
        assert!(matches!(
            build_example(&ExampleSpec::with_params(ExampleName::Ex73, vec![0.2, 0.0, 0.0])),
            Err(ExampleError::Inadmissible { .. })
        ));
    }
}
