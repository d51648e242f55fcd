//! Checks shared by the invariance suite and the acceptance target.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use polycomp::carleson::McConfig;
use polycomp::classify::{
    classify_boundedness, compactness_from, BoundednessReport, ClassifyConfig, CompactnessVerdict, OraclePolicy,
};
use polycomp::contact::{julia_caratheodory, ContactRecord};
use polycomp::examples::{build_example, ExampleName, ExampleSpec};
use polycomp::jets::{local_jet, real_strata, symbol_jet};
use polycomp::polysym::{ComplexPolynomial, Symbol};
use polycomp::quadform::{signature, SymmetricForm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every library symbol, with both families at several parameters.
pub fn library() -> Vec<(String, Symbol)> {
    let mut out = Vec::new();
    for name in ExampleName::ALL {
        let specs = match name {
            ExampleName::Ex71 => vec![vec![0.0], vec![0.01], vec![-0.01]],
            ExampleName::Ex73 => vec![vec![0.01, 0.01, 0.01], vec![0.01, -0.01, 0.0], vec![0.01, 0.0, 0.0]],
            _ => vec![name.default_params()],
        };
        for p in specs {
            let s = build_example(&ExampleSpec::with_params(name, p.clone())).unwrap();
            out.push((format!("{name}{p:?}"), s));
        }
    }
    out
}

pub fn unimodular(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::from_polar(1.0, rng.gen_range(-PI..PI))).collect()
}

pub fn verdicts(s: &Symbol) -> (BoundednessReport, CompactnessVerdict) {
    let cfg = ClassifyConfig::default();
    let b = classify_boundedness(s, &cfg);
    let c = compactness_from(s, &b, &cfg, OraclePolicy::Off, &McConfig::default());
    (b, c.verdict)
}

/// `(s, r)` of violating contacts. Swapping the two components of a pair
/// negates the residual form, so `r` is compared up to order.
pub fn headline(b: &BoundednessReport) -> Vec<(Option<usize>, Option<[usize; 2]>)> {
    let mut v: Vec<_> = b
        .contacts
        .iter()
        .filter(|c| c.violation)
        .map(|c| {
            (c.s, c.r.map(|mut r| {
                r.sort_unstable();
                r
            }))
        })
        .collect();
    v.sort();
    v.dedup();
    v
}

/// Compare verdicts of every library symbol with those of its images under
/// coordinate permutation, component swap and `rotations` random input and
/// output rotations each.
pub fn symmetry_sweep(rotations: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for (label, s) in library() {
        let d = s.dim();
        let (base, comp) = verdicts(&s);
        let mut perm: Vec<usize> = (0..d).collect();
        perm.rotate_left(1);
        let mut swap: Vec<usize> = (0..d).collect();
        swap.swap(0, 1);
        let mut moved = vec![
            ("variable permutation", s.permute_variables(&perm)),
            ("component swap", s.permute_components(&swap)),
        ];
        for _ in 0..rotations {
            moved.push(("input rotation", s.rotate_inputs(&unimodular(&mut rng, d))));
            moved.push(("output rotation", s.rotate_outputs(&unimodular(&mut rng, d))));
        }
        for (what, t) in moved {
            let (b, c) = verdicts(&t);
            if b.verdict != base.verdict || c != comp || headline(&b) != headline(&base) {
                return Err(format!(
                    "{label}: {what} gives {:?}/{c:?}/{:?}, expected {:?}/{comp:?}/{:?}",
                    b.verdict,
                    headline(&b),
                    base.verdict,
                    headline(&base)
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// `Re ∇ψ_i = 0`, `Q_i ⪰ 0` and the Julia–Carathéodory condition at `r`.
pub fn check_contact(s: &Symbol, r: &ContactRecord) -> Result<(), String> {
    for (&i, &eta) in r.index_set.iter().zip(&r.eta) {
        let st = real_strata(&symbol_jet(s.component(i), &r.xi, eta).map_err(|e| e.to_string())?);
        let g = st.re_grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        if g > 1e-7 {
            return Err(format!("|Re grad| = {g:e} at {:?}", r.xi));
        }
        let sig = signature(&st.q_form(), 1e-8);
        if sig.q != 0 {
            return Err(format!("Q not PSD at {:?}: {:?}", r.xi, sig.eigenvalues));
        }
    }
    let jc = julia_caratheodory(s, r);
    if !jc.valid {
        return Err(format!("Julia–Carathéodory fails at {:?}: {:?}", r.xi, jc.reason));
    }
    Ok(())
}

/// Number of contacts checked across the library.
pub fn contact_sweep() -> Result<usize, String> {
    let mut n = 0;
    for (label, s) in library() {
        let b = classify_boundedness(&s, &ClassifyConfig::default());
        for c in &b.contacts {
            if c.record.residuals.iter().any(|&x| x.abs() > 1e-10) {
                return Err(format!("{label}: residuals {:?}", c.record.residuals));
            }
            check_contact(&s, &c.record).map_err(|e| format!("{label}: {e}"))?;
            n += 1;
        }
    }
    Ok(n)
}

fn random_form(rng: &mut ChaCha8Rng) -> SymmetricForm {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            m[i][j] = rng.gen_range(-2.0..2.0);
            m[j][i] = m[i][j];
        }
    }
    SymmetricForm::from_fn(3, |i, j| m[i][j])
}

fn det3(p: &[[f64; 3]; 3]) -> f64 {
    p[0][0] * (p[1][1] * p[2][2] - p[1][2] * p[2][1]) - p[0][1] * (p[1][0] * p[2][2] - p[1][2] * p[2][0])
        + p[0][2] * (p[1][0] * p[2][1] - p[1][1] * p[2][0])
}

/// `count` random congruences `PᵀMP` with well-separated eigenvalues of `M`
/// and `|det P| ≥ 0.5`; returns the number that preserved the signature.
pub fn congruence_sweep(count: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    while done < count {
        let m = random_form(&mut rng);
        let (ev, _) = m.eigen();
        let norm = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if ev.iter().any(|x| x.abs() <= 1e-3 * norm) {
            continue;
        }
        let mut p = [[0.0; 3]; 3];
        for row in p.iter_mut() {
            for x in row.iter_mut() {
                *x = rng.gen_range(-2.0..2.0);
            }
        }
        if det3(&p).abs() < 0.5 {
            continue;
        }
        let moved = SymmetricForm::from_fn(3, |i, j| {
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    acc += p[a][i] * m.get(a, b) * p[b][j];
                }
            }
            acc
        });
        let (x, y) = (signature(&m, 1e-8).pq(), signature(&moved, 1e-8).pq());
        if x != y {
            return Err(format!("signature {x:?} became {y:?}"));
        }
        done += 1;
    }
    Ok(done)
}

/// Smallest observed order of the jet remainder over `count` random cubic
/// polynomials in three variables.
pub fn jet_order_sweep(count: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut done = 0;
    while done < count {
        let terms: Vec<(Vec<u32>, Complex64)> = (0..rng.gen_range(1..7))
            .map(|_| {
                let e = (0..3).map(|_| rng.gen_range(0..=3)).collect();
                (e, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let p = ComplexPolynomial::from_terms(3, terms);
        let xi: Vec<f64> = (0..3).map(|_| rng.gen_range(-PI..PI)).collect();
        let dir: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let jet = local_jet(&p, &xi).map_err(|e| e.to_string())?;
        let err = |h: f64| {
            let th: Vec<f64> = dir.iter().map(|x| h * x / n).collect();
            let at: Vec<f64> = xi.iter().zip(&th).map(|(a, b)| a + b).collect();
            (p.evaluate_angles(&at) - jet.evaluate(&th)).norm()
        };
        let (e1, e2) = (err(0.04), err(0.02));
        if n < 0.1 || e1 <= 1e-10 {
            continue;
        }
        worst = worst.min((e1 / e2).log2());
        done += 1;
    }
    if worst < 3.5 {
        return Err(format!("remainder order {worst:.2}"));
    }
    Ok(worst)
}
