use serde::Serialize;

use super::{ClassifyError, Tolerances};
use crate::contact::ContactRecord;
use crate::jets::{real_strata, symbol_jet, RealStrata};
use crate::polysym::Symbol;
use crate::quadform::{
    kernel_basis_with_scale, restrict, signature_with_scale, Signature, SymmetricForm,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Violation {
    /// `s = 2` but the residual form is not a nonzero semidefinite 1×1 form.
    ResidualNotDefiniteS2 { p: usize, q: usize },
    /// `s = 1` but the residual form on the 2-dimensional kernel is not definite.
    ResidualNotDefiniteS1 { p: usize, q: usize },
}

/// Case of the pair test. `A` through `D` are the four admissible shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairCase {
    /// Gradients independent.
    A,
    /// Dependent gradients, `s = 3`.
    B,
    /// Dependent, `s = 2`, residual form nonzero.
    C,
    /// Dependent, `s = 1`, residual form definite.
    D,
    Violation(Violation),
}

impl PairCase {
    pub fn label(&self) -> &'static str {
        match self {
            PairCase::A => "a",
            PairCase::B => "b",
            PairCase::C => "c",
            PairCase::D => "d",
            PairCase::Violation(_) => "violation",
        }
    }

    pub fn is_violation(&self) -> bool {
        matches!(self, PairCase::Violation(_))
    }
}

impl Serialize for PairCase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

/// Everything computed for one contact and one pair `{i1, i2}` of its index set.
#[derive(Clone, Debug, Serialize)]
pub struct PairAnalysis {
    /// 0-based component indices.
    #[serde(serialize_with = "one_based")]
    pub pair: [usize; 2],
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    /// `‖ℓ1 × ℓ2‖ / (‖ℓ1‖‖ℓ2‖)`, the sine of the angle between the gradients.
    pub independence: f64,
    pub independent: bool,
    /// `tol_dep` plus the gradient drift over the contact's localization radius.
    pub dependence_tolerance: f64,
    /// Bound on how far the quadratic forms can move over the localization
    /// radius; it enters every signature threshold as an absolute floor.
    pub form_drift: f64,
    /// `(κ1, κ2)` with `κ1 = 1` and `ℓ2 ≈ κ2 ℓ1`; absent for independent pairs.
    pub kappa: Option<[f64; 2]>,
    /// `‖ℓ2 − κ2 ℓ1‖ / ‖ℓ1‖`.
    pub dependence_residual: Option<f64>,
    pub q1: SymmetricForm,
    pub q2: SymmetricForm,
    pub sum_signature: Option<Signature>,
    pub s: Option<usize>,
    pub kernel: Vec<Vec<f64>>,
    /// `κ2·A1 − κ1·A2`.
    pub d_form: Option<SymmetricForm>,
    /// The residual form restricted to `ker(Q1 + Q2)`.
    pub residual_form: Option<SymmetricForm>,
    pub r: Option<Signature>,
    pub case: PairCase,
    pub fragile: bool,
}

fn one_based<S: serde::Serializer>(p: &[usize; 2], s: S) -> Result<S::Ok, S::Error> {
    [p[0] + 1, p[1] + 1].serialize(s)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a ∧ b‖` through the Lagrange identity; no cancellation for near-parallel
/// vectors, unlike `‖a‖²‖b‖² − ⟨a,b⟩²`.
fn wedge_norm(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let m = a[i] * b[j] - a[j] * b[i];
            s += m * m;
        }
    }
    s.sqrt()
}

pub(crate) fn contact_strata(
    s: &Symbol,
    r: &ContactRecord,
    i: usize,
) -> Result<RealStrata, ClassifyError> {
    strata_and_cubic(s, r, i).map(|x| x.0)
}

fn strata_and_cubic(s: &Symbol, r: &ContactRecord, i: usize) -> Result<(RealStrata, f64), ClassifyError> {
    let eta = r
        .eta_of(i)
        .ok_or_else(|| ClassifyError::InvalidInput(format!("component {} is not in the contact's index set", i + 1)))?;
    let jet = symbol_jet(s.component(i), &r.xi, eta)?;
    Ok((real_strata(&jet), jet.cubic_size()))
}

/// The pair test at one contact. `pair` holds 0-based component indices that
/// both belong to `r.index_set`.
pub fn analyze_pair(
    s: &Symbol,
    r: &ContactRecord,
    pair: [usize; 2],
    tol: &Tolerances,
) -> Result<PairAnalysis, ClassifyError> {
    let (st1, c1) = strata_and_cubic(s, r, pair[0])?;
    let (st2, c2) = strata_and_cubic(s, r, pair[1])?;
    let (l1, l2) = (st1.im_grad.clone(), st2.im_grad.clone());
    let (n1, n2) = (norm(&l1), norm(&l2));
    if n1 <= 1e-10 || n2 <= 1e-10 {
        return Err(ClassifyError::InvalidInput(format!(
            "degenerate contact gradient for component {} at ξ = {:?}",
            if n1 <= 1e-10 { pair[0] + 1 } else { pair[1] + 1 },
            r.xi
        )));
    }
    let q1 = st1.q_form();
    let q2 = st2.q_form();
    let independence = wedge_norm(&l1, &l2) / (n1 * n2);
    // ξ is only known to within `r.localization`; the gradients and forms
    // move by at most these amounts over that distance.
    let rho = r.localization;
    let dependence_tolerance = tol.tol_dep + rho * (st1.im_hess.frobenius() / n1 + st2.im_hess.frobenius() / n2);
    let root_d = (s.dim() as f64).sqrt();
    let mut out = PairAnalysis {
        pair,
        l1,
        l2,
        independence,
        independent: independence > dependence_tolerance,
        dependence_tolerance,
        form_drift: 0.0,
        kappa: None,
        dependence_residual: None,
        q1,
        q2,
        sum_signature: None,
        s: None,
        kernel: Vec::new(),
        d_form: None,
        residual_form: None,
        r: None,
        case: PairCase::A,
        fragile: independence > 0.1 * dependence_tolerance && independence < 10.0 * dependence_tolerance,
    };
    if out.independent {
        return Ok(out);
    }

    let dot: f64 = out.l1.iter().zip(&out.l2).map(|(a, b)| a * b).sum();
    let k2 = dot / (n1 * n1);
    let resid: Vec<f64> = out.l2.iter().zip(&out.l1).map(|(b, a)| b - k2 * a).collect();
    out.kappa = Some([1.0, k2]);
    let drift = 3.0 * root_d * rho * (k2.abs().max(1.0) * c1 + c2);
    out.form_drift = drift;
    out.dependence_residual = Some(norm(&resid) / n1);

    let sum = q1.add(&q2);
    let sig = signature_with_scale(&sum, tol.tol_sig, drift / tol.tol_sig);
    if sig.q > 0 {
        return Err(ClassifyError::InvalidInput(format!(
            "Q1 + Q2 has {} negative eigenvalue(s) at ξ = {:?}; the contact forms of a self-map are semidefinite",
            sig.q, r.xi
        )));
    }
    if sig.p == 0 {
        return Err(ClassifyError::InvalidInput(format!(
            "Q1 + Q2 vanishes at ξ = {:?}",
            r.xi
        )));
    }
    let kernel = kernel_basis_with_scale(&sum, tol.tol_sig, drift / tol.tol_sig);
    let a1 = st1.a_form();
    let a2 = st2.a_form();
    let d_form = a1.scale(k2).sub(&a2);
    let residual_form = restrict(&d_form, &kernel).expect("kernel vectors match the form size");
    // D is a difference of O(1) forms; judge it against their size, not its own.
    let reference = q1
        .max_abs()
        .max(q2.max_abs())
        .max(a1.max_abs() * k2.abs())
        .max(a2.max_abs())
        .max(drift / tol.tol_sig);
    let rsig = signature_with_scale(&residual_form, tol.tol_sig, reference);
    let s_val = sig.p;
    let pq = rsig.pq();
    out.case = match s_val {
        3 => PairCase::B,
        2 if pq == (1, 0) || pq == (0, 1) => PairCase::C,
        2 => PairCase::Violation(Violation::ResidualNotDefiniteS2 { p: pq.0, q: pq.1 }),
        1 if pq == (2, 0) || pq == (0, 2) => PairCase::D,
        _ => PairCase::Violation(Violation::ResidualNotDefiniteS1 { p: pq.0, q: pq.1 }),
    };
    out.fragile |= sig.fragile || (s_val < 3 && rsig.fragile);
    out.sum_signature = Some(sig);
    out.s = Some(s_val);
    out.kernel = kernel;
    out.d_form = Some(d_form);
    out.residual_form = Some(residual_form);
    out.r = Some(rsig);
    Ok(out)
}
