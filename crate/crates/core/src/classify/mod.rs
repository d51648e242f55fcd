//! Boundedness and compactness verdicts.
//!
//! Boundedness at `d = 3` runs the pair test on every two-element subset of
//! every contact's index set, plus an invertibility check of `dφ(ξ)` where all
//! components touch the circle. At `d = 2` only the invertibility check
//! applies. Compactness is three-valued: certified failures of necessary
//! conditions give `NotCompact`, an order-2 nondegeneracy test at every
//! contact gives `Compact`, and anything in between is `Undetermined`.

mod compact;
mod pair;

pub use compact::{classify_compactness, compactness_from, CompactnessReport, CompactnessVerdict, OraclePolicy, Trigger, TriggerKind};
pub use pair::{analyze_pair, PairAnalysis, PairCase, Violation};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::contact::{find_contacts, julia_caratheodory, ContactConfig, ContactRecord, JuliaReport};
use crate::jets::JetError;
use crate::par::Exec;
use crate::polysym::Symbol;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("classification needs dimension 2 or 3 (got {0})")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Jet(#[from] JetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub tol_contact: f64,
    pub tol_sig: f64,
    pub tol_dep: f64,
    pub tol_jac: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_contact: 1e-10,
            tol_sig: 1e-8,
            tol_dep: 1e-7,
            tol_jac: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyConfig {
    pub tolerances: Tolerances,
    pub grid_n: usize,
    pub samples_per_component: usize,
    pub exec: Exec,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            grid_n: 64,
            samples_per_component: 8,
            exec: Exec::default(),
        }
    }
}

impl ClassifyConfig {
    pub fn contact_config(&self) -> ContactConfig {
        ContactConfig {
            grid_n: self.grid_n,
            tol_contact: self.tolerances.tol_contact,
            samples_per_component: self.samples_per_component,
            exec: self.exec,
            ..ContactConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundednessVerdict {
    Bounded,
    Unbounded,
    Invalid,
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobianCheck {
    pub det: [f64; 2],
    /// Product of the row norms of `dφ(ξ)` (Hadamard bound on `|det|`).
    pub scale: f64,
    pub ratio: f64,
    pub invertible: bool,
}

/// Complex Jacobian determinant of `φ` at the torus point `ξ`.
pub fn jacobian_check(s: &Symbol, xi: &[f64], tol_jac: f64) -> JacobianCheck {
    let d = s.dim();
    let z: Vec<Complex64> = xi.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
    let m: Vec<Vec<Complex64>> = (0..d)
        .map(|i| (0..d).map(|k| s.component(i).partial_derivative(k).evaluate(&z)).collect())
        .collect();
    let det = match d {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    };
    let scale: f64 = m
        .iter()
        .map(|row| row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
        .product();
    let ratio = if scale > 0.0 { det.norm() / scale } else { 0.0 };
    JacobianCheck {
        det: [det.re, det.im],
        scale,
        ratio,
        invertible: ratio > tol_jac,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContactEvidence {
    #[serde(flatten)]
    pub record: ContactRecord,
    pub julia: JuliaReport,
    pub jacobian: Option<JacobianCheck>,
    /// Case of the first violating pair, else of the first pair.
    pub case: Option<PairCase>,
    pub s: Option<usize>,
    pub r: Option<[usize; 2]>,
    pub pairs: Vec<PairAnalysis>,
    pub violation: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundednessReport {
    pub schema_version: &'static str,
    pub verdict: BoundednessVerdict,
    pub dimension: usize,
    pub grid_n: usize,
    pub tolerances: Tolerances,
    pub contacts: Vec<ContactEvidence>,
    pub fragile: bool,
    pub caveats: Vec<String>,
    pub divergences: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl BoundednessReport {
    fn invalid(dimension: usize, cfg: &ClassifyConfig, msg: String) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            verdict: BoundednessVerdict::Invalid,
            dimension,
            grid_n: cfg.grid_n,
            tolerances: cfg.tolerances,
            contacts: Vec::new(),
            fragile: false,
            caveats: Vec::new(),
            divergences: Vec::new(),
            diagnostics: vec![msg],
        }
    }

    /// All pair analyses in contact order.
    pub fn pairs(&self) -> impl Iterator<Item = &PairAnalysis> {
        self.contacts.iter().flat_map(|c| c.pairs.iter())
    }
}

pub const DIVERGENCE_RESIDUAL: &str = "residual form: taken as the quadratic part of κ2·Im ψ1 − κ1·Im ψ2 restricted to ker(Q1 + Q2). With κ1 ≠ κ2 this is not proportional to the variant that first divides each jet's quadratic coefficients by its own κ; the form used here is the one whose sign controls the preimage measure.";

pub const DIVERGENCE_S2_FLAT: &str = "s = 2 with a vanishing residual form: the single kernel direction of Q1 + Q2 carries no quadratic term of κ2·Im ψ1 − κ1·Im ψ2, so preimages of boxes of size (δ, δ) have measure of order δ^{3/2}, above the δ² budget. The verdict is Unbounded for every value of the perturbation parameter. Reading r off a direction outside ker(Q1 + Q2) would instead report a definite residual.";

fn caveats(cfg: &ClassifyConfig, dim: usize, any_positive_dim: bool) -> Vec<String> {
    let mut v = vec![format!(
        "contact scan on a {}^{} grid; contact components thinner than the grid spacing can be missed",
        cfg.grid_n, dim
    )];
    if any_positive_dim {
        v.push(format!(
            "positive-dimensional contact components are represented by up to {} samples each; the verdict is a conjunction over those samples",
            cfg.samples_per_component
        ));
    }
    v.push("the self-map property |φ_j| ≤ 1 is screened on a grid, not certified".into());
    v
}

pub fn classify_boundedness(s: &Symbol, cfg: &ClassifyConfig) -> BoundednessReport {
    if !(2..=3).contains(&s.dim()) {
        return BoundednessReport::invalid(s.dim(), cfg, ClassifyError::UnsupportedDimension(s.dim()).to_string());
    }
    let contacts = find_contacts(s, &cfg.contact_config());
    classify_boundedness_with(s, contacts, cfg)
}

/// Boundedness from an already computed contact list.
pub fn classify_boundedness_with(
    s: &Symbol,
    contacts: Vec<ContactRecord>,
    cfg: &ClassifyConfig,
) -> BoundednessReport {
    let d = s.dim();
    if !(2..=3).contains(&d) {
        return BoundednessReport::invalid(d, cfg, ClassifyError::UnsupportedDimension(d).to_string());
    }
    let tol = &cfg.tolerances;
    let mut evidence = Vec::with_capacity(contacts.len());
    let mut diagnostics = Vec::new();
    let mut divergences: Vec<String> = Vec::new();
    let mut fragile = false;
    let any_positive_dim = contacts.iter().any(|c| c.component_dim > 0);

    for rec in contacts {
        let julia = julia_caratheodory(s, &rec);
        if !julia.valid {
            diagnostics.push(format!(
                "Julia–Carathéodory check failed at ξ = {:?}: {}",
                rec.xi,
                julia.reason.clone().unwrap_or_default()
            ));
        }
        let jacobian = (rec.index_set.len() == d).then(|| jacobian_check(s, &rec.xi, tol.tol_jac));
        if let Some(j) = &jacobian {
            fragile |= j.ratio > 0.1 * tol.tol_jac && j.ratio < 10.0 * tol.tol_jac;
        }
        let mut pairs = Vec::new();
        if d == 3 && julia.valid {
            let idx = &rec.index_set;
            for a in 0..idx.len() {
                for b in (a + 1)..idx.len() {
                    match analyze_pair(s, &rec, [idx[a], idx[b]], tol) {
                        Ok(p) => pairs.push(p),
                        Err(e) => diagnostics.push(format!("pair ({}, {}) at ξ = {:?}: {e}", idx[a] + 1, idx[b] + 1, rec.xi)),
                    }
                }
            }
        }
        for p in &pairs {
            fragile |= p.fragile;
            if let Some([_, k2]) = p.kappa {
                if (k2 - 1.0).abs() > 1e-9 && !divergences.iter().any(|x| x == DIVERGENCE_RESIDUAL) {
                    divergences.push(DIVERGENCE_RESIDUAL.into());
                }
            }
            if p.s == Some(2)
                && p.r.as_ref().is_some_and(|r| r.pq() == (0, 0))
                && !divergences.iter().any(|x| x == DIVERGENCE_S2_FLAT)
            {
                divergences.push(DIVERGENCE_S2_FLAT.into());
            }
        }
        let headline = pairs.iter().find(|p| p.case.is_violation()).or(pairs.first());
        let violation = pairs.iter().any(|p| p.case.is_violation())
            || jacobian.as_ref().is_some_and(|j| !j.invertible);
        evidence.push(ContactEvidence {
            case: headline.map(|p| p.case),
            s: headline.and_then(|p| p.s),
            r: headline.and_then(|p| p.r.as_ref().map(|r| [r.p, r.q])),
            record: rec,
            julia,
            jacobian,
            pairs,
            violation,
        });
    }

    let verdict = if !diagnostics.is_empty() {
        BoundednessVerdict::Invalid
    } else if evidence.iter().any(|e| e.violation) {
        BoundednessVerdict::Unbounded
    } else {
        BoundednessVerdict::Bounded
    };
    BoundednessReport {
        schema_version: SCHEMA_VERSION,
        verdict,
        dimension: d,
        grid_n: cfg.grid_n,
        tolerances: *tol,
        contacts: evidence,
        fragile,
        caveats: caveats(cfg, d, any_positive_dim),
        divergences,
        diagnostics,
    }
}
