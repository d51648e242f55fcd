//! Planar sets with known area, used to check the sampler against
//! deterministic quadrature.

use rand::Rng;
use serde::Serialize;

use super::{count_hits, CarlesonError, McConfig, MeasureEstimate, Sampler, MIN_SAMPLES};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "set", rename_all = "lowercase")]
pub enum CalibrationSet {
    /// `|x| ≤ δ^{1/3}, |y| ≤ δ^{1/2}, |xy| ≤ δ`.
    Hyperbolic,
    /// `(x, y) ∈ [−δ^{1/3}, δ^{1/3}]², |a x² − b y²| ≤ δ`.
    Saddle { a: f64, b: f64 },
    /// `|x² + y² − a| < δ`.
    Annulus { a: f64 },
}

impl CalibrationSet {
    pub fn label(&self) -> &'static str {
        match self {
            CalibrationSet::Hyperbolic => "hyperbolic",
            CalibrationSet::Saddle { .. } => "saddle",
            CalibrationSet::Annulus { .. } => "annulus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Lower,
    Upper,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationResult {
    #[serde(flatten)]
    pub set: CalibrationSet,
    pub delta: f64,
    pub estimate: MeasureEstimate,
    /// Area by adaptive quadrature.
    pub reference: f64,
    pub bound: Option<(BoundKind, f64)>,
    pub bound_holds: Option<bool>,
    pub z_score: f64,
    /// `|mean − reference| ≤ 4·stderr`.
    pub consistent: bool,
}

/// `4δ(1 + ln(1/δ)/6)`.
pub fn hyperbolic_closed_form(delta: f64) -> f64 {
    4.0 * delta * (1.0 + (1.0 / delta).ln() / 6.0)
}

fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, whole: f64, fm: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, fa, m, fm, left, flm, 0.5 * tol, depth - 1) + simpson_step(f, m, fm, b, fb, right, frm, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, fa, b, fb, whole, fm, tol, max_depth)
}

/// Integrate over `[0, end]`, splitting at the interior `kinks`.
fn piecewise<F: Fn(f64) -> f64 + Copy>(f: F, end: f64, kinks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![0.0];
    pts.extend(kinks.iter().copied().filter(|&k| k > 0.0 && k < end));
    pts.push(end);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| adaptive_simpson(f, w[0], w[1], tol, 48)).sum()
}

fn sqrt_pos(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

fn reference(set: CalibrationSet, delta: f64) -> f64 {
    let tol = 1e-13 * delta;
    match set {
        CalibrationSet::Hyperbolic => {
            let (xm, ym) = (delta.cbrt(), delta.sqrt());
            // Four quadrants: 4 ∫_0^{ym} min(xm, δ/y) dy.
            4.0 * piecewise(move |y: f64| if y <= 0.0 { xm } else { xm.min(delta / y) }, ym, &[delta.powf(2.0 / 3.0)], tol)
        }
        CalibrationSet::Saddle { a, b } => {
            let xm = delta.cbrt();
            let y2 = xm * xm;
            let len = move |x: f64| {
                let hi = ((a * x * x + delta) / b).min(y2);
                let lo = ((a * x * x - delta) / b).max(0.0);
                if hi > lo {
                    sqrt_pos(hi) - sqrt_pos(lo)
                } else {
                    0.0
                }
            };
            let kinks = [
                sqrt_pos(delta / a),
                sqrt_pos((b * y2 - delta) / a),
                sqrt_pos((b * y2 + delta) / a),
            ];
            4.0 * piecewise(len, xm, &kinks, tol)
        }
        CalibrationSet::Annulus { a } => {
            let r = sqrt_pos(a + delta);
            let len = move |x: f64| sqrt_pos(a + delta - x * x) - sqrt_pos(a - delta - x * x);
            4.0 * piecewise(len, r, &[sqrt_pos(a - delta)], tol)
        }
    }
}

fn validate(set: CalibrationSet, delta: f64) -> Result<(), CarlesonError> {
    if !(delta > 0.0 && delta <= 0.1) {
        return Err(CarlesonError::BadCalibration(format!("δ = {delta} outside (0, 0.1]")));
    }
    if let CalibrationSet::Saddle { a, b } = set {
        if !(a > 0.0 && b > 0.0) {
            return Err(CarlesonError::BadCalibration(format!("saddle set needs a, b > 0 (got {a}, {b})")));
        }
    }
    Ok(())
}

/// Monte-Carlo area of the set next to its quadrature reference.
pub fn calibrate_set(set: CalibrationSet, delta: f64, cfg: &McConfig) -> Result<CalibrationResult, CarlesonError> {
    validate(set, delta)?;
    if cfg.samples < MIN_SAMPLES {
        return Err(CarlesonError::TooFewSamples {
            min: MIN_SAMPLES,
            got: cfg.samples,
        });
    }
    let (hx, hy) = match set {
        CalibrationSet::Hyperbolic => (delta.cbrt(), delta.sqrt()),
        CalibrationSet::Saddle { .. } => (delta.cbrt(), delta.cbrt()),
        CalibrationSet::Annulus { a } => {
            let r = (a.abs() + delta).sqrt();
            (r, r)
        }
    };
    let inside = move |x: f64, y: f64| match set {
        CalibrationSet::Hyperbolic => (x * y).abs() <= delta,
        CalibrationSet::Saddle { a, b } => (a * x * x - b * y * y).abs() <= delta,
        CalibrationSet::Annulus { a } => (x * x + y * y - a).abs() < delta,
    };
    let hits = count_hits(cfg.samples, cfg.seed, cfg.exec, || (), |_, rng| {
        let x = hx * (2.0 * rng.gen::<f64>() - 1.0);
        let y = hy * (2.0 * rng.gen::<f64>() - 1.0);
        inside(x, y)
    });
    let estimate = MeasureEstimate::from_hits(
        hits,
        cfg.samples,
        4.0 * hx * hy,
        Sampler::Planar {
            lo: [-hx, -hy],
            hi: [hx, hy],
        },
        cfg.seed,
    );
    let reference = reference(set, delta);
    let bound = match set {
        CalibrationSet::Hyperbolic => Some((BoundKind::Lower, (1.0 / delta).ln() * delta / 6.0)),
        CalibrationSet::Annulus { .. } => Some((BoundKind::Upper, 2.0 * std::f64::consts::PI * delta)),
        CalibrationSet::Saddle { .. } => None,
    };
    let bound_holds = bound.map(|(k, v)| match k {
        BoundKind::Lower => reference >= v,
        BoundKind::Upper => reference <= v * (1.0 + 1e-9),
    });
    let diff = (estimate.mean - reference).abs();
    let z_score = if estimate.stderr > 0.0 {
        diff / estimate.stderr
    } else if diff <= 1e-12 * reference.max(f64::MIN_POSITIVE) {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(CalibrationResult {
        set,
        delta,
        consistent: z_score <= 4.0,
        estimate,
        reference,
        bound,
        bound_holds,
        z_score,
    })
}
