use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::TorusGrid;
use super::parse::{parse_expression, ParseError};
use super::ComplexPolynomial;
use crate::par::Exec;

#[derive(Debug, Error)]
pub enum SymbolError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    UnsupportedDimension(usize),
    #[error("expected {expected} components, found {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error("component {component} has dimension {found}, expected {expected}")]
    ComponentDimension {
        component: usize,
        expected: usize,
        found: usize,
    },
    #[error("component {0} is a unimodular constant; its contact set is the whole torus with vanishing gradient")]
    UnimodularConstant(usize),
    #[error("component {component}: {source}")]
    Parse {
        component: usize,
        #[source]
        source: ParseError,
    },
    #[error("component {component}: exponent vector has length {found}, expected {expected}")]
    TermShape {
        component: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid symbol JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// A polynomial map `φ = (φ_1, …, φ_d)` of the polydisc `D^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbol {
    dim: usize,
    components: Vec<ComplexPolynomial>,
}

impl Symbol {
    pub fn new(components: Vec<ComplexPolynomial>) -> Result<Self, SymbolError> {
        let dim = components.len();
        if !(1..=3).contains(&dim) {
            return Err(SymbolError::UnsupportedDimension(dim));
        }
        for (j, p) in components.iter().enumerate() {
            if p.dim() != dim {
                return Err(SymbolError::ComponentDimension {
                    component: j + 1,
                    expected: dim,
                    found: p.dim(),
                });
            }
            if !p.is_zero() && p.is_constant() {
                let c = p.coefficient(&vec![0; dim]);
                if (c.norm() - 1.0).abs() <= 1e-12 {
                    return Err(SymbolError::UnimodularConstant(j + 1));
                }
            }
        }
        Ok(Self { dim, components })
    }

    /// Parse one expression per component.
    pub fn from_expressions(exprs: &[&str]) -> Result<Self, SymbolError> {
        let dim = exprs.len();
        if !(1..=3).contains(&dim) {
            return Err(SymbolError::UnsupportedDimension(dim));
        }
        let comps = exprs
            .iter()
            .enumerate()
            .map(|(j, e)| {
                parse_expression(e, dim).map_err(|source| SymbolError::Parse {
                    component: j + 1,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(comps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[ComplexPolynomial] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &ComplexPolynomial {
        &self.components[j]
    }

    pub fn evaluate(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.components.iter().map(|p| p.evaluate(z)).collect()
    }

    pub fn evaluate_angles(&self, theta: &[f64]) -> Vec<Complex64> {
        let z: Vec<Complex64> = theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        self.evaluate(&z)
    }

    /// `φ∘ρ` for the diagonal map `z ↦ (ρ_1 z_1, …)`.
    pub fn rotate_inputs(&self, rho: &[Complex64]) -> Self {
        Self {
            dim: self.dim,
            components: self.components.iter().map(|p| p.rotate_inputs(rho)).collect(),
        }
    }

    /// `τ∘φ` for unimodular output factors.
    pub fn rotate_outputs(&self, tau: &[Complex64]) -> Self {
        Self {
            dim: self.dim,
            components: self
                .components
                .iter()
                .zip(tau)
                .map(|(p, t)| p.scale(*t))
                .collect(),
        }
    }

    /// Relabel the input variables (`perm[k]` is the new index of `z_k`).
    pub fn permute_variables(&self, perm: &[usize]) -> Self {
        Self {
            dim: self.dim,
            components: self.components.iter().map(|p| p.permute_variables(perm)).collect(),
        }
    }

    /// Reorder the output components (`order[j]` is the old index placed at `j`).
    pub fn permute_components(&self, order: &[usize]) -> Self {
        Self {
            dim: self.dim,
            components: order.iter().map(|&j| self.components[j].clone()).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SymbolError> {
        let file: SymbolFile = serde_json::from_str(text)?;
        let dim = file.dimension;
        if !(1..=3).contains(&dim) {
            return Err(SymbolError::UnsupportedDimension(dim));
        }
        let mut comps = Vec::with_capacity(file.components.len());
        for (j, spec) in file.components.into_iter().enumerate() {
            let p = match spec {
                ComponentSpec::Expr { expr } => parse_expression(&expr, dim).map_err(|source| {
                    SymbolError::Parse {
                        component: j + 1,
                        source,
                    }
                })?,
                ComponentSpec::Terms { terms } => {
                    for t in &terms {
                        if t.exponents.len() != dim {
                            return Err(SymbolError::TermShape {
                                component: j + 1,
                                expected: dim,
                                found: t.exponents.len(),
                            });
                        }
                    }
                    ComplexPolynomial::from_terms(
                        dim,
                        terms
                            .into_iter()
                            .map(|t| (t.exponents, Complex64::new(t.coeff[0], t.coeff[1]))),
                    )
                }
            };
            comps.push(p);
        }
        if comps.len() != dim {
            return Err(SymbolError::ComponentCount {
                expected: dim,
                found: comps.len(),
            });
        }
        Self::new(comps)
    }

    /// Serialize in the `terms` form, which is exact.
    pub fn to_json(&self) -> serde_json::Value {
        let file = SymbolFile {
            dimension: self.dim,
            components: self
                .components
                .iter()
                .map(|p| ComponentSpec::Terms {
                    terms: p
                        .terms()
                        .map(|(e, c)| TermSpec {
                            exponents: e.clone(),
                            coeff: [c.re, c.im],
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_value(file).expect("symbol serialization is infallible")
    }
}

#[derive(Serialize, Deserialize)]
struct SymbolFile {
    dimension: usize,
    components: Vec<ComponentSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ComponentSpec {
    Expr { expr: String },
    Terms { terms: Vec<TermSpec> },
}

#[derive(Serialize, Deserialize)]
struct TermSpec {
    exponents: Vec<u32>,
    coeff: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentScreen {
    pub max_modulus: f64,
    /// Grid angles where the maximum was attained (first in grid order).
    pub argmax: Vec<f64>,
    pub pass: bool,
}

/// Outcome of the grid screen for `|φ_j| ≤ 1` on `T^d`. A polynomial attains
/// its sup over the closed polydisc on the distinguished boundary, so the
/// torus grid is the right place to look; the screen is advisory because
/// contact points sit exactly at modulus 1.
#[derive(Clone, Debug, Serialize)]
pub struct SelfMapReport {
    pub grid_n: usize,
    pub margin: f64,
    pub components: Vec<ComponentScreen>,
    pub pass: bool,
}

pub fn self_map_report(s: &Symbol, grid_n: usize, margin: f64, exec: Exec) -> SelfMapReport {
    assert!(grid_n >= 16, "grid_n must be at least 16");
    let components: Vec<ComponentScreen> = s
        .components()
        .iter()
        .map(|p| {
            let grid = TorusGrid::new(p, grid_n);
            let slab_len = grid.slab_len();
            let per_slab = exec.map(grid_n, |i1| {
                let slab = grid.slab(i1);
                let mut best = (f64::NEG_INFINITY, 0usize);
                for (j, v) in slab.iter().enumerate() {
                    let m = v.norm();
                    if m > best.0 {
                        best = (m, j);
                    }
                }
                (best.0, i1 * slab_len + best.1)
            });
            let (max_modulus, flat) = per_slab
                .into_iter()
                .fold((f64::NEG_INFINITY, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
            ComponentScreen {
                max_modulus,
                argmax: grid.angles(flat),
                pass: max_modulus <= 1.0 + margin,
            }
        })
        .collect();
    let pass = components.iter().all(|c| c.pass);
    SelfMapReport {
        grid_n,
        margin,
        components,
        pass,
    }
}
