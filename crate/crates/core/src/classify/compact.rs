use serde::{Serialize, Serializer};

use super::pair::contact_strata;
use super::{classify_boundedness, BoundednessReport, BoundednessVerdict, ClassifyConfig, ContactEvidence, SCHEMA_VERSION};
use crate::carleson::{ratio_trend, McConfig, RatioTrend};
use crate::polysym::Symbol;
use crate::quadform::signature;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OraclePolicy {
    #[default]
    Off,
    Advisory,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompactnessVerdict {
    Compact,
    NotCompact,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerKind {
    Unbounded,
    FullContact,
    DependentPair,
    VariableDrop,
    MonomialComponent,
    Order2Pass,
    Order2Fail,
}

impl TriggerKind {
    /// Kinds that certify a failed necessary condition.
    pub fn is_certified_failure(self) -> bool {
        !matches!(self, TriggerKind::Order2Pass | TriggerKind::Order2Fail)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trigger {
    pub kind: TriggerKind,
    /// Position in the boundedness report's contact list.
    pub contact: Option<usize>,
    #[serde(serialize_with = "one_based")]
    pub components: Vec<usize>,
    pub detail: String,
}

fn one_based<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|i| i + 1))
}

#[derive(Clone, Debug, Serialize)]
pub struct CompactnessReport {
    pub schema_version: &'static str,
    pub verdict: CompactnessVerdict,
    pub boundedness: BoundednessVerdict,
    pub triggers: Vec<Trigger>,
    pub oracle: Option<Vec<RatioTrend>>,
    pub fragile: bool,
    pub caveats: Vec<String>,
    pub diagnostics: Vec<String>,
}

fn order2(s: &Symbol, e: &ContactEvidence, cfg: &ClassifyConfig, fragile: &mut bool) -> Result<(bool, String), String> {
    let d = s.dim();
    let idx = &e.record.index_set;
    let mut sigs = Vec::with_capacity(idx.len());
    for &i in idx {
        let st = contact_strata(s, &e.record, i).map_err(|x| x.to_string())?;
        let sig = signature(&st.q_form(), cfg.tolerances.tol_sig);
        *fragile |= sig.fragile;
        sigs.push(sig.pq());
    }
    Ok(match (d, idx.len()) {
        (2, 1) => (sigs[0] == (2, 0), format!("Q has signature {:?}, needs (2, 0)", sigs[0])),
        (3, 1) => (
            sigs[0].0 >= 2 && sigs[0].1 == 0,
            format!("Q has signature {:?}, needs (2, 0) or (3, 0)", sigs[0]),
        ),
        (3, 2) => {
            let indep = e.pairs.first().is_some_and(|p| p.independent);
            (
                indep && sigs.iter().all(|&x| x == (3, 0)),
                format!("gradients independent: {indep}; Q signatures {sigs:?}, need (3, 0) each"),
            )
        }
        _ => (false, format!("no order-2 test for |I| = {} at d = {d}", idx.len())),
    })
}

fn necessary_triggers(s: &Symbol, pos: usize, e: &ContactEvidence) -> Vec<Trigger> {
    let d = s.dim();
    let idx = &e.record.index_set;
    let mut out = Vec::new();
    if idx.len() == d {
        out.push(Trigger {
            kind: TriggerKind::FullContact,
            contact: Some(pos),
            components: idx.clone(),
            detail: "every component is unimodular at this point".into(),
        });
        return out;
    }
    for p in e.pairs.iter().filter(|p| !p.independent) {
        out.push(Trigger {
            kind: TriggerKind::DependentPair,
            contact: Some(pos),
            components: p.pair.to_vec(),
            detail: format!("gradients dependent (sine of angle {:.3e})", p.independence),
        });
    }
    for k in 0..d {
        if idx.iter().all(|&i| !s.component(i).depends_on(k)) {
            out.push(Trigger {
                kind: TriggerKind::VariableDrop,
                contact: Some(pos),
                components: idx.clone(),
                detail: format!("no touching component depends on z{}", k + 1),
            });
        }
    }
    for &i in idx {
        if let Some((_, c)) = s.component(i).as_monomial() {
            if (c.norm() - 1.0).abs() <= 1e-12 {
                out.push(Trigger {
                    kind: TriggerKind::MonomialComponent,
                    contact: Some(pos),
                    components: vec![i],
                    detail: "component is a unimodular constant times a monomial".into(),
                });
            }
        }
    }
    out
}

pub fn classify_compactness(s: &Symbol, cfg: &ClassifyConfig, policy: OraclePolicy, mc: &McConfig) -> CompactnessReport {
    let b = classify_boundedness(s, cfg);
    compactness_from(s, &b, cfg, policy, mc)
}

/// Compactness from an existing boundedness report for the same symbol.
pub fn compactness_from(
    s: &Symbol,
    b: &BoundednessReport,
    cfg: &ClassifyConfig,
    policy: OraclePolicy,
    mc: &McConfig,
) -> CompactnessReport {
    let mut rep = CompactnessReport {
        schema_version: SCHEMA_VERSION,
        verdict: CompactnessVerdict::Undetermined,
        boundedness: b.verdict,
        triggers: Vec::new(),
        oracle: None,
        fragile: b.fragile,
        caveats: b.caveats.clone(),
        diagnostics: b.diagnostics.clone(),
    };
    match b.verdict {
        BoundednessVerdict::Invalid => return rep,
        BoundednessVerdict::Unbounded => {
            rep.verdict = CompactnessVerdict::NotCompact;
            rep.triggers.push(Trigger {
                kind: TriggerKind::Unbounded,
                contact: None,
                components: Vec::new(),
                detail: "the operator is not bounded".into(),
            });
            return rep;
        }
        BoundednessVerdict::Bounded => {}
    }

    let mut all_pass = true;
    let mut failing = Vec::new();
    for (pos, e) in b.contacts.iter().enumerate() {
        rep.triggers.extend(necessary_triggers(s, pos, e));
        if e.record.index_set.len() == s.dim() {
            all_pass = false;
            continue;
        }
        match order2(s, e, cfg, &mut rep.fragile) {
            Ok((pass, detail)) => {
                rep.triggers.push(Trigger {
                    kind: if pass { TriggerKind::Order2Pass } else { TriggerKind::Order2Fail },
                    contact: Some(pos),
                    components: e.record.index_set.clone(),
                    detail,
                });
                if !pass {
                    all_pass = false;
                    failing.push(pos);
                }
            }
            Err(msg) => {
                rep.diagnostics.push(msg);
                all_pass = false;
                failing.push(pos);
            }
        }
    }

    rep.verdict = if rep.triggers.iter().any(|t| t.kind.is_certified_failure()) {
        CompactnessVerdict::NotCompact
    } else if all_pass {
        CompactnessVerdict::Compact
    } else {
        CompactnessVerdict::Undetermined
    };

    if rep.verdict == CompactnessVerdict::Undetermined && policy == OraclePolicy::Advisory {
        let deltas = [1e-1, 1e-2, 1e-3];
        let trends = failing
            .iter()
            .map(|&pos| {
                let r = &b.contacts[pos].record;
                ratio_trend(s, r, &r.index_set, &deltas, mc)
            })
            .collect();
        rep.oracle = Some(trends);
        rep.caveats
            .push("oracle ratios are Monte-Carlo evidence and do not certify compactness".into());
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{build_example, ExampleName, ExampleSpec};

    fn run(name: ExampleName) -> CompactnessReport {
        let s = build_example(&ExampleSpec::new(name)).unwrap();
        classify_compactness(&s, &ClassifyConfig::default(), OraclePolicy::Off, &McConfig::default())
    }

    fn has(r: &CompactnessReport, k: TriggerKind) -> bool {
        r.triggers.iter().any(|t| t.kind == k)
    }

    #[test]
    fn bidisc_examples() {
        let r = run(ExampleName::Compact2Avg);
        assert_eq!(r.verdict, CompactnessVerdict::Compact, "{:#?}", r.triggers);
        let r = run(ExampleName::Compact2Monomial);
        assert_eq!(r.verdict, CompactnessVerdict::NotCompact);
        assert!(has(&r, TriggerKind::MonomialComponent));
    }

    #[test]
    fn tridisc_examples() {
        let r = run(ExampleName::Compact3Pair);
        assert_eq!(r.boundedness, BoundednessVerdict::Bounded);
        assert_eq!(r.verdict, CompactnessVerdict::NotCompact);
        assert!(has(&r, TriggerKind::VariableDrop));
        let r = run(ExampleName::Compact3Avg);
        assert_eq!(r.verdict, CompactnessVerdict::Compact, "{:#?}", r.triggers);
    }

    #[test]
    fn full_contact_and_unbounded() {
        let r = run(ExampleName::Identity);
        assert_eq!(r.verdict, CompactnessVerdict::NotCompact);
        assert!(has(&r, TriggerKind::FullContact));
        let r = run(ExampleName::TripleMonomial);
        assert_eq!(r.verdict, CompactnessVerdict::NotCompact);
        assert!(has(&r, TriggerKind::Unbounded));
    }

    #[test]
    fn no_contact_is_compact() {
        let s = Symbol::from_expressions(&["z1/2", "z2*z1/2"]).unwrap();
        let r = classify_compactness(&s, &ClassifyConfig::default(), OraclePolicy::Off, &McConfig::default());
        assert_eq!(r.verdict, CompactnessVerdict::Compact);
    }

    #[test]
    fn averaging_pair_is_not_compact() {
        let r = run(ExampleName::Averaging3);
        assert_eq!(r.verdict, CompactnessVerdict::NotCompact);
        assert!(has(&r, TriggerKind::DependentPair));
    }
}
