//! Monte-Carlo measure of Carleson-box preimages.
//!
//! Samples are drawn in chunks of [`CHUNK`] from ChaCha8 streams keyed by
//! `(seed, chunk index)`. Each chunk returns an integer hit count and the
//! counts are summed in chunk order, so an estimate depends only on the seed,
//! the sample count and the sampling region, never on the thread count.
//!
//! Membership is tested against boxes `|φ_k − η_k| ≤ δ_k`. Windows (radial
//! shell times angular arc) are available for the weighted volumes; boxes and
//! windows are nested up to a constant factor, so scaling exponents agree.

mod calibrate;
mod fit;

pub use calibrate::{adaptive_simpson, calibrate_set, hyperbolic_closed_form, CalibrationResult, CalibrationSet};
pub use fit::{geometric_grid, parse_delta_grid, ratio_trend, scaling_fit, FitHint, RatioTrend, ScalingFit};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::contact::ContactRecord;
use crate::jets::{real_strata, symbol_jet, JetError};
use crate::par::Exec;
use crate::polysym::Symbol;
use crate::quadform::SymmetricForm;

/// Samples per RNG stream.
pub const CHUNK: usize = 1 << 16;

/// Radii at or above this value leave a component unconstrained.
pub const UNCONSTRAINED: f64 = 2.0;

#[derive(Debug, Error)]
pub enum CarlesonError {
    #[error("box has {found} entries, symbol dimension is {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("radius {0} outside (0, 2]")]
    BadRadius(f64),
    #[error("weight β = {0} outside (-1, 0]")]
    BadBeta(f64),
    #[error("importance sampling needs a contact anchor")]
    MissingAnchor,
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("bad δ grid: {0}")]
    BadGrid(String),
    #[error("calibration parameter: {0}")]
    BadCalibration(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// `S(η, δ̄)`: target angles of the centres and per-component radii.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxSpec {
    pub eta: Vec<f64>,
    pub delta: Vec<f64>,
}

impl BoxSpec {
    pub fn new(eta: Vec<f64>, delta: Vec<f64>) -> Result<Self, CarlesonError> {
        if eta.len() != delta.len() {
            return Err(CarlesonError::DimensionMismatch {
                expected: eta.len(),
                found: delta.len(),
            });
        }
        if let Some(&bad) = delta.iter().find(|&&x| !(x > 0.0 && x <= UNCONSTRAINED)) {
            return Err(CarlesonError::BadRadius(bad));
        }
        Ok(Self { eta, delta })
    }

    /// Box centred at `φ(anchor)` with radius `delta` on the `constrained`
    /// components (0-based) and unconstrained elsewhere.
    pub fn at_anchor(s: &Symbol, xi: &[f64], constrained: &[usize], delta: f64) -> Result<Self, CarlesonError> {
        let w = s.evaluate_angles(xi);
        let d = s.dim();
        let mut eta = vec![0.0; d];
        let mut radii = vec![UNCONSTRAINED; d];
        for &k in constrained {
            if k >= d {
                return Err(CarlesonError::DimensionMismatch { expected: d, found: k + 1 });
            }
            eta[k] = w[k].arg();
            radii[k] = delta;
        }
        Self::new(eta, radii)
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn is_constrained(&self, k: usize) -> bool {
        self.delta[k] < UNCONSTRAINED
    }

    /// Number of constrained components.
    pub fn budget(&self) -> usize {
        (0..self.dim()).filter(|&k| self.is_constrained(k)).count()
    }

    /// `∏ δ_k` over constrained components.
    pub fn volume_scale(&self) -> f64 {
        (0..self.dim()).filter(|&k| self.is_constrained(k)).map(|k| self.delta[k]).product()
    }

    pub fn contains(&self, w: &[Complex64]) -> bool {
        (0..self.dim()).all(|k| !self.is_constrained(k) || (w[k] - Complex64::from_polar(1.0, self.eta[k])).norm() <= self.delta[k])
    }
}

/// `W(η, ·)` with independent radial depth and angular half-width per
/// component. `radial ≥ 1` and `angular ≥ π` leave that part unconstrained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowSpec {
    pub eta: Vec<f64>,
    pub radial: Vec<f64>,
    pub angular: Vec<f64>,
}

impl WindowSpec {
    /// The window with the same radius in both directions.
    pub fn from_radii(eta: Vec<f64>, delta: Vec<f64>) -> Self {
        Self {
            eta,
            radial: delta.clone(),
            angular: delta,
        }
    }

    pub fn contains(&self, w: &[Complex64]) -> bool {
        (0..self.eta.len()).all(|k| {
            let r = w[k].norm();
            if r < 1.0 - self.radial[k] || r > 1.0 {
                return false;
            }
            self.angular[k] >= PI || wrap(w[k].arg() - self.eta[k]).abs() <= self.angular[k]
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    Box(BoxSpec),
    Window(WindowSpec),
}

impl Target {
    fn dim(&self) -> usize {
        match self {
            Target::Box(b) => b.dim(),
            Target::Window(w) => w.eta.len(),
        }
    }

    fn contains(&self, w: &[Complex64]) -> bool {
        match self {
            Target::Box(b) => b.contains(w),
            Target::Window(x) => x.contains(w),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Importance {
    /// Uniform on the whole torus.
    Plain,
    /// Half-widths from the local model `M = Σ ℓℓᵀ/δ² + Σ Q/δ` at the anchor.
    #[default]
    Auto,
    /// Half-width `c·δ_min^{1/3}` on every axis.
    CubeRoot { c: f64 },
    Explicit { half_widths: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub importance: Importance,
    pub exec: Exec,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0,
            importance: Importance::Auto,
            exec: Exec::default(),
        }
    }
}

pub const MIN_SAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sampler {
    Plain,
    ImportanceBox { center: Vec<f64>, half_widths: Vec<f64> },
    Radial { beta: f64 },
    Planar { lo: [f64; 2], hi: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub hits: u64,
    /// Measure of the sampling region (normalized on the torus).
    pub region_volume: f64,
    pub sampler: Sampler,
    pub seed: u64,
}

impl MeasureEstimate {
    fn from_hits(hits: u64, n: usize, volume: f64, sampler: Sampler, seed: u64) -> Self {
        let p = hits as f64 / n as f64;
        // Sample variance of a 0/1 variable: n/(n−1)·p(1−p).
        let var = if n > 1 { p * (1.0 - p) * n as f64 / (n as f64 - 1.0) } else { 0.0 };
        Self {
            mean: volume * p,
            stderr: volume * (var / n as f64).sqrt(),
            samples: n,
            hits,
            region_volume: volume,
            sampler,
            seed,
        }
    }

    /// Mean is at least `k` standard errors away from zero.
    pub fn is_significant(&self, k: f64) -> bool {
        self.mean > k * self.stderr
    }
}

pub(crate) fn wrap(t: f64) -> f64 {
    let r = (t + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Sum of per-chunk hit counts; chunk `c` draws from stream `c` of `seed`.
/// `init` builds per-chunk scratch space.
pub(crate) fn count_hits<S, I, F>(n: usize, seed: u64, exec: Exec, init: I, hit: F) -> u64
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut ChaCha8Rng) -> bool + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    exec.map(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let mut scratch = init();
        let m = CHUNK.min(n - c * CHUNK);
        (0..m).filter(|_| hit(&mut scratch, &mut rng)).count() as u64
    })
    .into_iter()
    .sum()
}

/// A component laid out for repeated evaluation: powers of each variable are
/// built once per point and shared by all terms.
struct Compiled {
    terms: Vec<([usize; 3], Complex64)>,
}

impl Compiled {
    fn new(p: &crate::polysym::ComplexPolynomial) -> Self {
        let terms = p
            .terms()
            .map(|(e, c)| {
                let mut a = [0usize; 3];
                for (k, &x) in e.iter().enumerate() {
                    a[k] = x as usize;
                }
                (a, *c)
            })
            .collect();
        Self { terms }
    }

    fn max_degree(&self) -> usize {
        self.terms.iter().flat_map(|(a, _)| a.iter().copied()).max().unwrap_or(0)
    }

    fn eval(&self, pows: &Powers) -> Complex64 {
        self.terms.iter().fold(Complex64::new(0.0, 0.0), |acc, (a, c)| {
            acc + c * pows.p[0][a[0]] * pows.p[1][a[1]] * pows.p[2][a[2]]
        })
    }
}

/// `z_k^m` for `m ≤ deg`; unused variables stay at `[1]`.
struct Powers {
    p: [Vec<Complex64>; 3],
}

impl Powers {
    fn new(deg: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self {
            p: [vec![one; deg + 1], vec![one; deg + 1], vec![one; deg + 1]],
        }
    }

    fn fill(&mut self, z: &[Complex64]) {
        for (k, &zk) in z.iter().enumerate() {
            let row = &mut self.p[k];
            for m in 1..row.len() {
                row[m] = row[m - 1] * zk;
            }
        }
    }
}

/// Independent seed for the `i`-th estimate of a sweep (splitmix64 finalizer).
pub fn derive_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_box(s: &Symbol, bx: &BoxSpec, n: usize) -> Result<(), CarlesonError> {
    if bx.dim() != s.dim() {
        return Err(CarlesonError::DimensionMismatch {
            expected: s.dim(),
            found: bx.dim(),
        });
    }
    if n < MIN_SAMPLES {
        return Err(CarlesonError::TooFewSamples { min: MIN_SAMPLES, got: n });
    }
    Ok(())
}

/// Half-widths of the importance box around `anchor`.
pub fn importance_half_widths(
    s: &Symbol,
    bx: &BoxSpec,
    anchor: &ContactRecord,
    importance: &Importance,
) -> Result<Vec<f64>, CarlesonError> {
    let d = s.dim();
    let dmin = (0..d)
        .filter(|&k| bx.is_constrained(k))
        .map(|k| bx.delta[k])
        .fold(UNCONSTRAINED, f64::min);
    let cube = |c: f64| (c * dmin.cbrt()).min(PI);
    Ok(match importance {
        Importance::Plain => vec![PI; d],
        Importance::CubeRoot { c } => vec![cube(*c); d],
        Importance::Explicit { half_widths } => {
            if half_widths.len() != d {
                return Err(CarlesonError::DimensionMismatch {
                    expected: d,
                    found: half_widths.len(),
                });
            }
            half_widths.iter().map(|h| h.min(PI)).collect()
        }
        Importance::Auto => {
            let mut m = SymmetricForm::zeros(d);
            let mut count = 0usize;
            for k in (0..d).filter(|&k| bx.is_constrained(k)) {
                let Some(eta) = anchor.eta_of(k) else { continue };
                let st = real_strata(&symbol_jet(s.component(k), &anchor.xi, eta)?);
                let dk = bx.delta[k];
                m = m
                    .add(&SymmetricForm::outer(&st.im_grad).scale(1.0 / (dk * dk)))
                    .add(&st.q_form().scale(1.0 / dk));
                count += 1;
            }
            if count == 0 {
                return Ok(vec![PI; d]);
            }
            let (vals, vecs) = m.eigen();
            let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let null_width = if anchor.component_dim > 0 { PI } else { cube(10.0) };
            (0..d)
                .map(|i| {
                    let mut acc = 0.0;
                    let mut touches_null = false;
                    for (lam, v) in vals.iter().zip(&vecs) {
                        if *lam <= 1e-9 * top {
                            touches_null |= v[i].abs() > 1e-6;
                        } else {
                            acc += v[i] * v[i] / lam;
                        }
                    }
                    if touches_null {
                        null_width
                    } else {
                        (2.0 * (2.0 * count as f64 * acc).sqrt()).min(PI)
                    }
                })
                .collect()
        }
    })
}

/// `σ_d` of `{θ : φ(e^{iθ}) ∈ S(η, δ̄)}`.
pub fn torus_measure(
    s: &Symbol,
    bx: &BoxSpec,
    anchor: Option<&ContactRecord>,
    cfg: &McConfig,
) -> Result<MeasureEstimate, CarlesonError> {
    check_box(s, bx, cfg.samples)?;
    let d = s.dim();
    let (center, half) = match (&cfg.importance, anchor) {
        (Importance::Plain, _) => (vec![0.0; d], vec![PI; d]),
        (_, None) => return Err(CarlesonError::MissingAnchor),
        (imp, Some(a)) => (a.xi.clone(), importance_half_widths(s, bx, a, imp)?),
    };
    let volume: f64 = half.iter().map(|h| h / PI).product();
    let plain = half.iter().all(|&h| h >= PI);
    let comps: Vec<Option<Compiled>> = (0..d)
        .map(|k| bx.is_constrained(k).then(|| Compiled::new(s.component(k))))
        .collect();
    let deg = comps.iter().flatten().map(Compiled::max_degree).max().unwrap_or(0);
    let hits = count_hits(cfg.samples, cfg.seed, cfg.exec, || Powers::new(deg), |pows, rng| {
        let mut z = [Complex64::new(0.0, 0.0); 3];
        for k in 0..d {
            let t = center[k] + half[k] * (2.0 * rng.gen::<f64>() - 1.0);
            z[k] = Complex64::from_polar(1.0, t);
        }
        pows.fill(&z[..d]);
        let mut w = [Complex64::new(0.0, 0.0); 3];
        for (k, c) in comps.iter().enumerate() {
            if let Some(c) = c {
                w[k] = c.eval(pows);
            }
        }
        bx.contains(&w[..d])
    });
    let sampler = if plain {
        Sampler::Plain
    } else {
        Sampler::ImportanceBox {
            center,
            half_widths: half,
        }
    };
    Ok(MeasureEstimate::from_hits(hits, cfg.samples, volume, sampler, cfg.seed))
}

/// `V_β` of the preimage of `target`. Always samples the whole polydisc.
pub fn weighted_volume(s: &Symbol, beta: f64, target: &Target, cfg: &McConfig) -> Result<MeasureEstimate, CarlesonError> {
    if !(beta > -1.0 && beta <= 0.0) {
        return Err(CarlesonError::BadBeta(beta));
    }
    let d = s.dim();
    if target.dim() != d {
        return Err(CarlesonError::DimensionMismatch {
            expected: d,
            found: target.dim(),
        });
    }
    if cfg.samples < MIN_SAMPLES {
        return Err(CarlesonError::TooFewSamples {
            min: MIN_SAMPLES,
            got: cfg.samples,
        });
    }
    let inv = 1.0 / (beta + 1.0);
    let comps: Vec<Compiled> = s.components().iter().map(Compiled::new).collect();
    let deg = comps.iter().map(Compiled::max_degree).max().unwrap_or(0);
    let hits = count_hits(cfg.samples, cfg.seed, cfg.exec, || Powers::new(deg), |pows, rng| {
        let mut z = [Complex64::new(0.0, 0.0); 3];
        for zk in z.iter_mut().take(d) {
            let u: f64 = rng.gen();
            let r = (1.0 - (1.0 - u).powf(inv)).sqrt();
            let t = PI * (2.0 * rng.gen::<f64>() - 1.0);
            *zk = Complex64::from_polar(r, t);
        }
        pows.fill(&z[..d]);
        let mut w = [Complex64::new(0.0, 0.0); 3];
        for (k, c) in comps.iter().enumerate() {
            w[k] = c.eval(pows);
        }
        target.contains(&w[..d])
    });
    Ok(MeasureEstimate::from_hits(hits, cfg.samples, 1.0, Sampler::Radial { beta }, cfg.seed))
}

/// An importance-sampled estimate next to a plain one for the same box.
#[derive(Clone, Debug, Serialize)]
pub struct CoverageCheck {
    pub importance: MeasureEstimate,
    pub plain: MeasureEstimate,
    /// `|difference|` in units of the combined standard error.
    pub z_score: f64,
    pub consistent: bool,
}

/// Compares the importance estimate with a plain run at the same box. A
/// region that misses part of the preimage shows up as a low importance mean.
pub fn coverage_check(
    s: &Symbol,
    bx: &BoxSpec,
    anchor: &ContactRecord,
    cfg: &McConfig,
) -> Result<CoverageCheck, CarlesonError> {
    let importance = torus_measure(s, bx, Some(anchor), cfg)?;
    let plain_cfg = McConfig {
        importance: Importance::Plain,
        seed: derive_seed(cfg.seed, u64::MAX - 1),
        ..cfg.clone()
    };
    let plain = torus_measure(s, bx, None, &plain_cfg)?;
    // Under the hypothesis that both runs estimate the same measure, the
    // plain run's variance follows from the importance mean; a plain run
    // with no hits is then not evidence of disagreement.
    let p = importance.mean.clamp(0.0, 1.0);
    let se = (importance.stderr.powi(2) + p * (1.0 - p) / plain.samples as f64).sqrt();
    let diff = (importance.mean - plain.mean).abs();
    let z_score = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(CoverageCheck {
        consistent: z_score <= 4.0,
        importance,
        plain,
        z_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, seed: u64) -> McConfig {
        McConfig {
            samples: n,
            seed,
            importance: Importance::Plain,
            exec: Exec::default(),
        }
    }

    #[test]
    fn unconstrained_box_is_everything() {
        let s = Symbol::from_expressions(&["(z1+z2+z3)/3", "z1*z2", "0"]).unwrap();
        let bx = BoxSpec::new(vec![0.0; 3], vec![2.0; 3]).unwrap();
        let m = torus_measure(&s, &bx, None, &cfg(20_000, 1)).unwrap();
        assert_eq!(m.mean, 1.0);
        assert_eq!(m.stderr, 0.0);
    }

    #[test]
    fn identity_box_matches_arcsine_formula() {
        let s = Symbol::from_expressions(&["z1", "z2", "z3"]).unwrap();
        let bx = BoxSpec::new(vec![0.0; 3], vec![0.1; 3]).unwrap();
        let cfg = McConfig {
            importance: Importance::CubeRoot { c: 1.0 },
            ..cfg(400_000, 3)
        };
        let anchor = ContactRecord::point(vec![0.0; 3], vec![0, 1, 2], &s);
        let m = torus_measure(&s, &bx, Some(&anchor), &cfg).unwrap();
        let truth = (2.0 * (0.05f64).asin() / PI).powi(3);
        assert!((m.mean - truth).abs() <= 4.0 * m.stderr, "{} vs {truth} ± {}", m.mean, m.stderr);
    }

    #[test]
    fn bidisc_monomial_slab() {
        let s = Symbol::from_expressions(&["z1*z2", "0"]).unwrap();
        let bx = BoxSpec::new(vec![0.0, 0.0], vec![0.01, 2.0]).unwrap();
        let m = torus_measure(&s, &bx, None, &cfg(1_000_000, 5)).unwrap();
        let truth = 2.0 * (0.005f64).asin() / PI;
        assert!((m.mean - truth).abs() <= 4.0 * m.stderr);
    }

    #[test]
    fn weighted_volume_closed_forms() {
        let s = Symbol::from_expressions(&["z1"]).unwrap();
        let all = Target::Box(BoxSpec::new(vec![0.0], vec![2.0]).unwrap());
        assert_eq!(weighted_volume(&s, 0.0, &all, &cfg(20_000, 0)).unwrap().mean, 1.0);

        let w = Target::Window(WindowSpec::from_radii(vec![0.0], vec![0.2]));
        let m = weighted_volume(&s, 0.0, &w, &cfg(2_000_000, 7)).unwrap();
        let truth = (1.0 - 0.64) * 0.4 / (2.0 * PI);
        assert!((m.mean - truth).abs() <= 4.0 * m.stderr, "{} vs {truth}", m.mean);

        let radial = Target::Window(WindowSpec {
            eta: vec![0.0],
            radial: vec![0.2],
            angular: vec![PI],
        });
        let m = weighted_volume(&s, -0.5, &radial, &cfg(400_000, 8)).unwrap();
        assert!((m.mean - 0.6).abs() <= 4.0 * m.stderr);
        assert!(weighted_volume(&s, -1.0, &radial, &cfg(20_000, 8)).is_err());
    }

    #[test]
    fn thread_count_does_not_change_estimates() {
        let s = Symbol::from_expressions(&["(z1+z2)/2", "z1*z2"]).unwrap();
        let bx = BoxSpec::new(vec![0.0, 0.0], vec![0.3, 0.5]).unwrap();
        let a = torus_measure(&s, &bx, None, &McConfig { exec: Exec::Sequential, ..cfg(300_000, 11) }).unwrap();
        let b = torus_measure(&s, &bx, None, &McConfig { exec: Exec::Parallel, ..cfg(300_000, 11) }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrap_is_centred() {
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(BoxSpec::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxSpec::new(vec![0.0], vec![2.5]).is_err());
        assert!(BoxSpec::new(vec![0.0, 0.0], vec![0.1]).is_err());
    }
}
