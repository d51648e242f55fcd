//! Boundary contact points: `ξ ∈ T^d` with `|φ_j(ξ)| = 1` for some `j`.
//!
//! The scan works in three passes. A tensor grid marks cells where every
//! component of a candidate index set `J` is within `near` of modulus 1;
//! connected groups of marked cells become clusters; a subsample of each
//! cluster is refined, which fixes both the maximal index set and the shape
//! of the contact component. Components of positive dimension are
//! represented by a handful of spread-out samples.

mod refine;

pub(crate) use refine::TermTable;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::Serialize;
use thiserror::Error;

use crate::dd::DoubleDouble;
use crate::par::Exec;
use crate::polysym::{Symbol, TorusGrid};
use crate::quadform::SymmetricForm;
use refine::{angles, localization_radius, refine, refine_two_stage, residual, unit_point};

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("component index {0} out of range")]
    BadComponent(usize),
    #[error("starting point has |φ_j| = {modulus:.6}, below the 0.9 needed for local refinement")]
    StartTooFar { modulus: f64 },
    #[error("refinement did not converge in {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        trajectory: Vec<Vec<f64>>,
    },
    #[error("refinement stalled at a local maximum with 1 − |φ_j| = {residual:.3e}")]
    BelowContact { theta: Vec<f64>, residual: f64 },
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub theta: Vec<f64>,
    pub residual: f64,
    pub flat: bool,
    pub iterations: usize,
}

/// Maximize `|φ_j(e^{iθ})|²` from `theta0` (`j` 0-based). The search runs in
/// `f64` and is then polished in double-double, which matters when `1 − |φ_j|`
/// vanishes to fourth order and the `f64` gradient is all round-off.
pub fn refine_contact(
    s: &Symbol,
    j: usize,
    theta0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<RefineOutcome, ContactError> {
    if j >= s.dim() {
        return Err(ContactError::BadComponent(j));
    }
    let p = s.component(j);
    let m = p.evaluate_angles(theta0).norm();
    if m < 0.9 {
        return Err(ContactError::StartTooFar { modulus: m });
    }
    let table = TermTable::new(p);
    let (theta, r) = refine_two_stage(&[&table], theta0, max_iter);
    if !r.converged {
        return Err(ContactError::NoConvergence {
            iterations: r.iterations,
            trajectory: r.trajectory,
        });
    }
    let res = residual(table.value(&unit_point::<DoubleDouble>(&theta)));
    if r.flat {
        if res > tol {
            return Err(ContactError::BelowContact { theta, residual: res });
        }
        // Flat objectives return the input untouched.
        return Ok(RefineOutcome {
            theta: theta0.to_vec(),
            residual: res,
            flat: true,
            iterations: 0,
        });
    }
    if res > tol {
        return Err(ContactError::BelowContact { theta, residual: res });
    }
    Ok(RefineOutcome {
        theta,
        residual: res,
        flat: false,
        iterations: r.iterations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContactRecord {
    /// Angles in `[−π, π)`.
    pub xi: Vec<f64>,
    /// Maximal index set, 0-based and sorted.
    pub index_set: Vec<usize>,
    /// `φ_i(ξ)/|φ_i(ξ)|` for `i` in `index_set`.
    pub eta: Vec<Complex64>,
    /// `1 − |φ_i(ξ)|` for `i` in `index_set`.
    pub residuals: Vec<f64>,
    /// Estimated dimension of the contact component this point samples.
    pub component_dim: usize,
    pub cluster: usize,
    /// The refinement objective was constant near the point.
    pub flat: bool,
    /// Bound on the distance to the true maximizer that `f64` coefficients
    /// leave undetermined, ignoring directions along the contact component.
    pub localization: f64,
}

impl ContactRecord {
    /// Record for a known point, with `eta` and residuals read off `φ(ξ)`.
    /// Not checked to be a contact.
    pub fn point(xi: Vec<f64>, mut index_set: Vec<usize>, s: &Symbol) -> Self {
        index_set.sort_unstable();
        index_set.dedup();
        let w = s.evaluate_angles(&xi);
        let eta = index_set.iter().map(|&i| w[i] / w[i].norm()).collect();
        let residuals = index_set.iter().map(|&i| 1.0 - w[i].norm()).collect();
        let tables: Vec<TermTable> = index_set.iter().map(|&i| TermTable::new(s.component(i))).collect();
        let refs: Vec<&TermTable> = tables.iter().collect();
        let localization = if refs.is_empty() { 0.0 } else { localization_radius(&refs, &xi, 0) };
        Self {
            xi,
            index_set,
            eta,
            residuals,
            component_dim: 0,
            cluster: 0,
            flat: false,
            localization,
        }
    }

    pub fn eta_of(&self, i: usize) -> Option<Complex64> {
        self.index_set.iter().position(|&k| k == i).map(|p| self.eta[p])
    }
}

impl Serialize for ContactRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ContactRecord", 8)?;
        st.serialize_field("xi", &self.xi)?;
        let one_based: Vec<usize> = self.index_set.iter().map(|i| i + 1).collect();
        st.serialize_field("I", &one_based)?;
        let eta: Vec<[f64; 2]> = self.eta.iter().map(|c| [c.re, c.im]).collect();
        st.serialize_field("eta", &eta)?;
        st.serialize_field("residuals", &self.residuals)?;
        st.serialize_field("component_dim", &self.component_dim)?;
        st.serialize_field("cluster", &self.cluster)?;
        st.serialize_field("flat", &self.flat)?;
        st.serialize_field("localization", &self.localization)?;
        st.end()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContactConfig {
    pub grid_n: usize,
    pub tol_contact: f64,
    /// Cells with `|φ_j| ≥ 1 − near` are near-hits.
    pub near: f64,
    pub samples_per_component: usize,
    pub max_refine_per_cluster: usize,
    pub max_iter: usize,
    pub exec: Exec,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            grid_n: 64,
            tol_contact: 1e-10,
            near: 0.01,
            samples_per_component: 8,
            max_refine_per_cluster: 192,
            max_iter: 60,
            exec: Exec::default(),
        }
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| wrap(x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so cluster roots do not depend on visit order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the marked cells, with wraparound and diagonal
/// adjacency. Each cluster is a sorted list of flat indices; clusters are
/// ordered by their smallest index.
fn grid_clusters(mask: &[bool], n: usize, dim: usize) -> Vec<Vec<usize>> {
    let cells: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if cells.len() == mask.len() {
        return vec![cells];
    }
    let mut pos = vec![usize::MAX; mask.len()];
    for (p, &c) in cells.iter().enumerate() {
        pos[c] = p;
    }
    let offsets: Vec<Vec<isize>> = (0..3usize.pow(dim as u32))
        .map(|mut code| {
            (0..dim)
                .map(|_| {
                    let o = (code % 3) as isize - 1;
                    code /= 3;
                    o
                })
                .collect()
        })
        // Half of the stencil suffices for an undirected union: keep offsets
        // whose first nonzero entry is positive.
        .filter(|o: &Vec<isize>| o.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0))
        .collect();
    let mut uf = UnionFind::new(cells.len());
    let mut idx = vec![0usize; dim];
    for (p, &c) in cells.iter().enumerate() {
        let mut rem = c;
        for k in (0..dim).rev() {
            idx[k] = rem % n;
            rem /= n;
        }
        for o in &offsets {
            let mut flat = 0;
            for k in 0..dim {
                let v = (idx[k] as isize + o[k]).rem_euclid(n as isize) as usize;
                flat = flat * n + v;
            }
            let q = pos[flat];
            if q != usize::MAX {
                uf.union(p, q);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for (p, &c) in cells.iter().enumerate() {
        let r = uf.find(p);
        groups.entry(r).or_default().push(c);
    }
    groups.into_values().collect()
}

fn flat_angles(flat: usize, n: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let mut rem = flat;
    for k in (0..dim).rev() {
        out[k] = crate::polysym::grid_angle(rem % n, n);
        rem /= n;
    }
    out
}

/// Number of principal directions along which the points spread more than
/// `spread`. Points are unwrapped around the first one; a 2% trim on each
/// end keeps a single sample sitting on the cut from adding a direction.
fn principal_dim(points: &[Vec<f64>], spread: f64) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let dim = points[0].len();
    let origin = &points[0];
    let rel: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(origin).map(|(a, b)| wrap(a - b)).collect())
        .collect();
    let m = rel.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|k| rel.iter().map(|p| p[k]).sum::<f64>() / m).collect();
    let cov = SymmetricForm::from_fn(dim, |i, j| {
        rel.iter().map(|p| (p[i] - mean[i]) * (p[j] - mean[j])).sum::<f64>() / m
    });
    let (_, vecs) = cov.eigen();
    let trim = rel.len() / 50;
    vecs.iter()
        .filter(|v| {
            let mut proj: Vec<f64> = rel
                .iter()
                .map(|p| p.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect();
            proj.sort_by(f64::total_cmp);
            proj[proj.len() - 1 - trim] - proj[trim] > spread
        })
        .count()
}

/// Farthest-point sampling on the torus, seeded at the lexicographically
/// lowest point.
fn spread_samples(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    if points.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut first = 0;
    for i in 1..points.len() {
        if lex_less(&points[i], &points[first]) {
            first = i;
        }
    }
    let mut chosen = vec![first];
    let mut dmin: Vec<f64> = points.iter().map(|p| torus_dist(p, &points[first])).collect();
    while chosen.len() < k.min(points.len()) {
        let mut best = None;
        for (i, &d) in dmin.iter().enumerate() {
            if d > 0.0 && best.is_none_or(|b: usize| d > dmin[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        chosen.push(b);
        for (i, p) in points.iter().enumerate() {
            dmin[i] = dmin[i].min(torus_dist(p, &points[b]));
        }
    }
    chosen
}

const LOOSE_CONTACT: f64 = 1e-6;

/// Scan `T^d` for contact points. Records come out in a deterministic order:
/// index sets by decreasing size, then clusters by grid position.
pub fn find_contacts(s: &Symbol, cfg: &ContactConfig) -> Vec<ContactRecord> {
    let dim = s.dim();
    let n = cfg.grid_n;
    let threshold = 1.0 - cfg.near;
    let tables: Vec<TermTable> = s.components().iter().map(TermTable::new).collect();

    let moduli: Vec<Vec<f64>> = s
        .components()
        .iter()
        .map(|p| {
            if p.is_zero() {
                return Vec::new();
            }
            let grid = TorusGrid::new(p, n);
            cfg.exec
                .map(n, |i1| grid.slab(i1).iter().map(|v| v.norm()).collect::<Vec<f64>>())
                .concat()
        })
        .collect();
    let touching: Vec<usize> = (0..dim)
        .filter(|&j| moduli[j].iter().any(|&m| m >= threshold))
        .collect();

    let mut subsets: Vec<Vec<usize>> = (1..(1usize << touching.len()))
        .map(|bits| {
            touching
                .iter()
                .enumerate()
                .filter(|(b, _)| bits & (1 << b) != 0)
                .map(|(_, &j)| j)
                .collect()
        })
        .collect();
    subsets.sort_by(|a: &Vec<usize>, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

    let mut records: Vec<ContactRecord> = Vec::new();
    let mut cluster_id = 0;
    for subset in &subsets {
        let mask: Vec<bool> = (0..n.pow(dim as u32))
            .map(|i| subset.iter().all(|&j| moduli[j][i] >= threshold))
            .collect();
        let sub_tables: Vec<&TermTable> = subset.iter().map(|&j| &tables[j]).collect();
        for cells in grid_clusters(&mask, n, dim) {
            let worst = |c: usize| subset.iter().map(|&j| moduli[j][c]).fold(f64::INFINITY, f64::min);
            let stride = cells.len().div_ceil(cfg.max_refine_per_cluster.max(1));
            let mut starts: Vec<usize> = cells.iter().step_by(stride).copied().collect();
            let peak = *cells
                .iter()
                .max_by(|&&a, &&b| worst(a).total_cmp(&worst(b)).then(b.cmp(&a)))
                .expect("clusters are nonempty");
            if !starts.contains(&peak) {
                starts.push(peak);
            }
            let refined: Vec<(Vec<f64>, bool, Vec<f64>)> = cfg.exec.map_slice(&starts, |&c| {
                let r = refine::<f64>(&sub_tables, unit_point(&flat_angles(c, n, dim)), cfg.max_iter);
                let theta = angles(&r.z);
                let res: Vec<f64> = tables
                    .iter()
                    .map(|t| residual(t.value(&unit_point::<f64>(&theta))))
                    .collect();
                (theta, r.flat, res)
            });
            // Keep points whose loose index set is exactly this subset; larger
            // sets were handled by their own, earlier pass.
            let kept: Vec<&(Vec<f64>, bool, Vec<f64>)> = refined
                .iter()
                .filter(|(_, _, res)| {
                    let loose: Vec<usize> = (0..dim).filter(|&i| res[i] <= LOOSE_CONTACT).collect();
                    loose == *subset
                })
                .collect();
            if kept.is_empty() {
                continue;
            }
            let points: Vec<Vec<f64>> = kept.iter().map(|k| k.0.clone()).collect();
            let component_dim = principal_dim(&points, 4.0 * PI / n as f64);
            let reps: Vec<usize> = if component_dim == 0 {
                let score = |i: usize| subset.iter().map(|&j| kept[i].2[j]).fold(f64::NEG_INFINITY, f64::max);
                let mut best = 0;
                for i in 1..kept.len() {
                    let (si, sb) = (score(i), score(best));
                    if si < sb || (si == sb && lex_less(&points[i], &points[best])) {
                        best = i;
                    }
                }
                vec![best]
            } else {
                spread_samples(&points, cfg.samples_per_component)
            };
            let polished: Vec<Option<ContactRecord>> = cfg.exec.map_slice(&reps, |&i| {
                let (theta, r) = refine_two_stage(&sub_tables, &points[i], cfg.max_iter);
                let theta = if r.flat { points[i].clone() } else { theta };
                let z = unit_point::<DoubleDouble>(&theta);
                let res: Vec<f64> = tables.iter().map(|t| residual(t.value(&z))).collect();
                let index_set: Vec<usize> = (0..dim).filter(|&k| res[k] <= cfg.tol_contact).collect();
                if index_set.is_empty() {
                    return None;
                }
                let eta = index_set
                    .iter()
                    .map(|&k| {
                        let v = s.component(k).evaluate_angles(&theta);
                        v / v.norm()
                    })
                    .collect();
                let own: Vec<&TermTable> = index_set.iter().map(|&k| &tables[k]).collect();
                let localization = if r.flat { 0.0 } else { localization_radius(&own, &theta, component_dim) };
                Some(ContactRecord {
                    localization,
                    xi: theta,
                    residuals: index_set.iter().map(|&k| res[k]).collect(),
                    index_set,
                    eta,
                    component_dim,
                    cluster: cluster_id,
                    flat: r.flat || kept[i].1,
                })
            });
            let mut any = false;
            for rec in polished.into_iter().flatten() {
                let dup = records.iter().any(|o| {
                    o.index_set == rec.index_set
                        && o.xi.iter().zip(&rec.xi).all(|(a, b)| wrap(a - b).abs() <= 1e-9)
                });
                if !dup {
                    records.push(rec);
                    any = true;
                }
            }
            if any {
                cluster_id += 1;
            }
        }
    }
    records
}

#[derive(Clone, Debug, Serialize)]
pub struct JuliaReport {
    /// `conj(η_i)·ξ_k·∂φ_i/∂z_k(ξ)`, one row per `i` in the index set.
    pub values: Vec<Vec<[f64; 2]>>,
    pub scale: f64,
    pub valid: bool,
    pub reason: Option<String>,
}

/// Rotation-normalized first derivatives at a contact. For a genuine
/// self-map they are real and nonnegative, and not all zero for a given `i`.
pub fn julia_caratheodory(s: &Symbol, r: &ContactRecord) -> JuliaReport {
    let z: Vec<Complex64> = r.xi.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
    let rows: Vec<Vec<Complex64>> = r
        .index_set
        .iter()
        .zip(&r.eta)
        .map(|(&i, eta)| {
            let p = s.component(i);
            (0..s.dim())
                .map(|k| eta.conj() * z[k] * p.partial_derivative(k).evaluate(&z))
                .collect()
        })
        .collect();
    let scale = rows
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.norm()))
        .max(1e-300);
    let tol = 1e-6 * scale;
    let mut reason = None;
    for (row, &i) in rows.iter().zip(&r.index_set) {
        for (k, v) in row.iter().enumerate() {
            if v.im.abs() > tol || v.re < -tol {
                reason = Some(format!(
                    "component {}: normalized derivative in z{} is {:.3e}{:+.3e}i, not real nonnegative",
                    i + 1,
                    k + 1,
                    v.re,
                    v.im
                ));
            }
        }
        if row.iter().all(|v| v.norm() <= tol) {
            reason = Some(format!("component {}: all normalized derivatives vanish", i + 1));
        }
    }
    JuliaReport {
        values: rows
            .iter()
            .map(|row| row.iter().map(|v| [v.re, v.im]).collect())
            .collect(),
        scale,
        valid: reason.is_none(),
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(e: &[&str]) -> Symbol {
        Symbol::from_expressions(e).unwrap()
    }

    #[test]
    fn refine_to_unique_maximum() {
        let s = sym(&["(1+z1)*(1+z2)*(1+z3)/8", "0", "0"]);
        let r = refine_contact(&s, 0, &[0.1, -0.05, 0.02], 1e-12, 50).unwrap();
        assert!(r.theta.iter().all(|t| t.abs() < 1e-10), "{:?}", r.theta);
        assert!(!r.flat);
    }

    #[test]
    fn averaging_refines_onto_the_diagonal() {
        let s = sym(&["(z1+z2+z3)/3", "(z1+z2+z3)/3", "0"]);
        let r = refine_contact(&s, 0, &[0.1, -0.05, 0.02], 1e-12, 50).unwrap();
        let t = &r.theta;
        assert!((t[0] - t[1]).abs() < 1e-10 && (t[1] - t[2]).abs() < 1e-10);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn refine_flat_and_far() {
        let s = sym(&["z1", "z2/2", "0"]);
        let r = refine_contact(&s, 0, &[0.4, 0.5, 0.6], 1e-12, 50).unwrap();
        assert!(r.flat);
        assert_eq!(r.theta, vec![0.4, 0.5, 0.6]);
        assert!(matches!(
            refine_contact(&s, 1, &[0.0; 3], 1e-12, 50),
            Err(ContactError::StartTooFar { .. })
        ));
    }

    #[test]
    fn no_contacts_for_contractions() {
        let s = sym(&["z1/2", "z2/2", "z3/2"]);
        assert!(find_contacts(&s, &ContactConfig::default()).is_empty());
    }

    #[test]
    fn averaging_contact_is_the_diagonal_curve() {
        let s = sym(&["(z1+z2+z3)/3", "(z1+z2+z3)/3", "0"]);
        let recs = find_contacts(&s, &ContactConfig::default());
        assert_eq!(recs.len(), 8);
        for r in &recs {
            assert_eq!(r.index_set, vec![0, 1]);
            assert_eq!(r.component_dim, 1);
            assert!((wrap(r.xi[0] - r.xi[1])).abs() < 1e-9 && (wrap(r.xi[1] - r.xi[2])).abs() < 1e-9);
        }
        assert!(recs.iter().any(|r| r.xi.iter().all(|t| t.abs() < 0.1)));
    }

    #[test]
    fn isolated_quartic_contact() {
        let f = "(3+6*z1-z1^2)*(3+6*z2-z2^2)*(3+6*z3-z3^2)/512";
        let s = sym(&[f, "0", "0"]);
        let recs = find_contacts(&s, &ContactConfig::default());
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.index_set, vec![0]);
        assert_eq!(r.component_dim, 0);
        assert!(r.xi.iter().all(|t| t.abs() < 1e-9), "{:?}", r.xi);
    }

    #[test]
    fn monomial_contact_fills_the_torus() {
        let s = sym(&["z1*z2", "0"]);
        let recs = find_contacts(&s, &ContactConfig::default());
        assert_eq!(recs.len(), 8);
        assert!(recs.iter().all(|r| r.component_dim == 2 && r.flat));
    }

    #[test]
    fn julia_values() {
        let s = sym(&["(z1+z2+z3)/3", "z1*z2", "0"]);
        let r = ContactRecord::point(vec![0.0; 3], vec![0, 1], &s);
        let j = julia_caratheodory(&s, &r);
        assert!(j.valid);
        for k in 0..3 {
            assert!((j.values[0][k][0] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(j.values[1], vec![[1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]);

        // (1+z1)/2 + 0.3i(z1−1) exceeds modulus 1 near z1 = 1.
        let bad = sym(&["(1+z1)/2 + 0.3i*(z1-1)", "0"]);
        let r = ContactRecord::point(vec![0.0; 2], vec![0], &bad);
        let j = julia_caratheodory(&bad, &r);
        assert!(!j.valid);
    }
}
