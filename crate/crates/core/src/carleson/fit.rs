use std::fmt::Write as _;

use serde::Serialize;

use super::{coverage_check, derive_seed, torus_measure, BoxSpec, CarlesonError, CoverageCheck, Importance, McConfig, MeasureEstimate};
use crate::contact::ContactRecord;
use crate::polysym::Symbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitHint {
    ConsistentBounded,
    BlowUp,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub deltas: Vec<f64>,
    pub estimates: Vec<MeasureEstimate>,
    /// Indices into `deltas` whose estimate cleared `mean > 5·stderr`.
    pub used: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub ci95: [f64; 2],
    pub budget_slope: usize,
    pub hint: FitHint,
    #[serde(serialize_with = "one_based")]
    pub constrained: Vec<usize>,
    pub anchor: Vec<f64>,
    pub coverage: Option<CoverageCheck>,
    pub flags: Vec<String>,
}

fn one_based<S: serde::Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|i| i + 1))
}

impl ScalingFit {
    /// `delta,measure,stderr,samples,budget,ratio`, one row per δ.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,measure,stderr,samples,budget,ratio\n");
        for (d, e) in self.deltas.iter().zip(&self.estimates) {
            let ratio = e.mean / d.powi(self.budget_slope as i32);
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{},{},{:e}",
                d, e.mean, e.stderr, e.samples, self.budget_slope, ratio
            );
        }
        out
    }
}

/// `count` geometrically spaced values from `start` to `end` inclusive.
pub fn geometric_grid(start: f64, end: f64, count: usize) -> Result<Vec<f64>, CarlesonError> {
    if !(start > 0.0 && end > 0.0) || count < 2 {
        return Err(CarlesonError::BadGrid(format!("need positive endpoints and at least 2 points, got {start}:{end}:{count}")));
    }
    let (a, b) = (start.ln(), end.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Parse `start:end:count`.
pub fn parse_delta_grid(text: &str) -> Result<Vec<f64>, CarlesonError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CarlesonError::BadGrid(format!("expected start:end:count, got `{text}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    geometric_grid(start, end, count)
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_stderr: f64,
}

/// Weighted least squares of `y` on `x` with weights `w = 1/var(y)`. The
/// slope error is inflated by the reduced χ² when the scatter exceeds the
/// stated errors.
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Line {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - xm) * (c - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let chi2: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (c - intercept - slope * a).powi(2))
        .sum();
    let dof = x.len().saturating_sub(2).max(1) as f64;
    let inflate = (chi2 / dof).max(1.0);
    Line {
        slope,
        intercept,
        slope_stderr: (inflate / sxx).sqrt(),
    }
}

/// Measures of boxes `(δ on constrained, unconstrained elsewhere)` centred at
/// `φ(anchor)` and the fitted log-log slope.
pub fn scaling_fit(
    s: &Symbol,
    anchor: &ContactRecord,
    constrained: &[usize],
    deltas: &[f64],
    cfg: &McConfig,
) -> Result<ScalingFit, CarlesonError> {
    if deltas.len() < 2 {
        return Err(CarlesonError::BadGrid("need at least two δ values".into()));
    }
    let mut flags = Vec::new();
    if deltas.len() < 5 {
        flags.push(format!("only {} δ values; at least 5 are recommended", deltas.len()));
    }
    if deltas.iter().any(|&d| !(1e-5..=1e-1).contains(&d)) {
        flags.push("δ grid leaves [1e-5, 1e-1]".into());
    }
    let boxes = deltas
        .iter()
        .map(|&d| BoxSpec::at_anchor(s, &anchor.xi, constrained, d))
        .collect::<Result<Vec<_>, _>>()?;
    let anchored = (cfg.importance != Importance::Plain).then_some(anchor);
    let estimates = boxes
        .iter()
        .enumerate()
        .map(|(i, bx)| {
            let c = McConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            torus_measure(s, bx, anchored, &c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let budget_slope = boxes[0].budget();

    let used: Vec<usize> = (0..deltas.len()).filter(|&i| estimates[i].is_significant(5.0)).collect();
    let (slope, intercept, slope_stderr, hint) = if used.len() < 3 {
        flags.push(format!("only {} estimate(s) clear mean > 5·stderr; no slope", used.len()));
        (f64::NAN, f64::NAN, f64::NAN, FitHint::Inconclusive)
    } else {
        let x: Vec<f64> = used.iter().map(|&i| deltas[i].ln()).collect();
        let y: Vec<f64> = used.iter().map(|&i| estimates[i].mean.ln()).collect();
        let w: Vec<f64> = used
            .iter()
            .map(|&i| (estimates[i].mean / estimates[i].stderr).powi(2))
            .collect();
        let line = weighted_line(&x, &y, &w);
        let b = budget_slope as f64;
        let hint = if line.slope + 2.0 * line.slope_stderr < b {
            FitHint::BlowUp
        } else if line.slope - 2.0 * line.slope_stderr >= b {
            FitHint::ConsistentBounded
        } else {
            FitHint::Inconclusive
        };
        (line.slope, line.intercept, line.slope_stderr, hint)
    };

    let coverage = if anchored.is_some() {
        let (imax, _) = deltas
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        let c = McConfig {
            seed: derive_seed(cfg.seed, imax as u64),
            ..cfg.clone()
        };
        let check = coverage_check(s, &boxes[imax], anchor, &c)?;
        if !check.consistent {
            flags.push(format!(
                "importance region disagrees with plain sampling at δ = {:e} (z = {:.1})",
                deltas[imax], check.z_score
            ));
        }
        Some(check)
    } else {
        None
    };

    Ok(ScalingFit {
        deltas: deltas.to_vec(),
        estimates,
        used,
        slope,
        intercept,
        slope_stderr,
        ci95: [slope - 1.96 * slope_stderr, slope + 1.96 * slope_stderr],
        budget_slope,
        hint,
        constrained: constrained.to_vec(),
        anchor: anchor.xi.clone(),
        coverage,
        flags,
    })
}

/// Ratios `σ(preimage)/∏δ` along a δ sequence; a ratio that does not decay
/// is evidence against compactness.
#[derive(Clone, Debug, Serialize)]
pub struct RatioTrend {
    pub anchor: Vec<f64>,
    #[serde(serialize_with = "one_based")]
    pub constrained: Vec<usize>,
    pub deltas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub ratio_stderrs: Vec<f64>,
    /// Each ratio is below the previous one by more than two combined
    /// standard errors.
    pub decreasing: bool,
    pub error: Option<String>,
}

pub fn ratio_trend(s: &Symbol, anchor: &ContactRecord, constrained: &[usize], deltas: &[f64], cfg: &McConfig) -> RatioTrend {
    let mut out = RatioTrend {
        anchor: anchor.xi.clone(),
        constrained: constrained.to_vec(),
        deltas: deltas.to_vec(),
        ratios: Vec::new(),
        ratio_stderrs: Vec::new(),
        decreasing: false,
        error: None,
    };
    for (i, &d) in deltas.iter().enumerate() {
        let est = BoxSpec::at_anchor(s, &anchor.xi, constrained, d).and_then(|bx| {
            let c = McConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            let a = (c.importance != Importance::Plain).then_some(anchor);
            torus_measure(s, &bx, a, &c).map(|e| (e, bx.volume_scale()))
        });
        match est {
            Ok((e, v)) => {
                out.ratios.push(e.mean / v);
                out.ratio_stderrs.push(e.stderr / v);
            }
            Err(e) => {
                out.error = Some(e.to_string());
                return out;
            }
        }
    }
    out.decreasing = out.ratios.windows(2).zip(out.ratio_stderrs.windows(2)).all(|(r, e)| {
        r[0] - r[1] > 2.0 * (e[0] * e[0] + e[1] * e[1]).sqrt()
    });
    out
}
