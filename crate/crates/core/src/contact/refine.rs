//! Ascent on `F(θ) = Σ_{j∈J} |φ_j(e^{iθ})|²`, generic over the working
//! precision. Points are carried as unit complex numbers and moved by
//! multiplication with `e^{is}`, so a double-double run keeps its extra bits
//! across iterations.

use num_complex::Complex64;

use crate::dd::{Cx, Real};
use crate::polysym::ComplexPolynomial;
use crate::quadform::SymmetricForm;

/// Terms of one component in a form that is cheap to evaluate at any
/// precision.
#[derive(Clone, Debug)]
pub(crate) struct TermTable {
    dim: usize,
    terms: Vec<([u32; 3], Complex64)>,
    /// `Σ|c|`, a bound for `|φ|` on the torus.
    abs_sum: f64,
    /// `Σ|c|·|α|`, a bound for the θ-gradient.
    grad_sum: f64,
}

impl TermTable {
    pub(crate) fn new(p: &ComplexPolynomial) -> Self {
        let mut terms = Vec::with_capacity(p.num_terms());
        let mut abs_sum = 0.0;
        let mut grad_sum = 0.0;
        for (e, c) in p.terms() {
            let mut a = [0u32; 3];
            a[..e.len()].copy_from_slice(e);
            abs_sum += c.norm();
            grad_sum += c.norm() * f64::from(e.iter().sum::<u32>());
            terms.push((a, *c));
        }
        Self {
            dim: p.dim(),
            terms,
            abs_sum,
            grad_sum,
        }
    }

    pub(crate) fn value<T: Real>(&self, z: &[Cx<T>]) -> Cx<T> {
        let mut acc = Cx::zero();
        for (a, c) in &self.terms {
            acc = acc + monomial(z, a, *c, self.dim);
        }
        acc
    }

    /// Value, θ-gradient and θ-Hessian. For `t = c·z^α`:
    /// `∂_k t = iα_k t`, `∂_k∂_l t = −α_kα_l t`.
    fn derivs<T: Real>(&self, z: &[Cx<T>]) -> (Cx<T>, [Cx<T>; 3], [[Cx<T>; 3]; 3]) {
        let mut v = Cx::zero();
        let mut g = [Cx::zero(); 3];
        let mut h = [[Cx::zero(); 3]; 3];
        for (a, c) in &self.terms {
            let t = monomial(z, a, *c, self.dim);
            v = v + t;
            for k in 0..self.dim {
                if a[k] == 0 {
                    continue;
                }
                g[k] = g[k] + t.mul_i_scalar(f64::from(a[k]));
                for l in 0..self.dim {
                    if a[l] > 0 {
                        h[k][l] = h[k][l] + t.scale(-f64::from(a[k] * a[l]));
                    }
                }
            }
        }
        (v, g, h)
    }
}

fn monomial<T: Real>(z: &[Cx<T>], a: &[u32; 3], c: Complex64, dim: usize) -> Cx<T> {
    let mut t = Cx::from_c64(c);
    for k in 0..dim {
        for _ in 0..a[k] {
            t = t * z[k];
        }
    }
    t
}

/// `Re(conj(a)·b)`.
fn re_dot<T: Real>(a: Cx<T>, b: Cx<T>) -> T {
    a.re * b.re + a.im * b.im
}

struct Eval<T> {
    f: T,
    grad: Vec<f64>,
    hess: SymmetricForm,
}

fn objective<T: Real>(tables: &[&TermTable], z: &[Cx<T>]) -> Eval<T> {
    let dim = z.len();
    let two = T::from_f64(2.0);
    let mut f = T::from_f64(0.0);
    let mut grad = vec![T::from_f64(0.0); dim];
    let mut hess = vec![vec![T::from_f64(0.0); dim]; dim];
    for t in tables {
        let (v, g, h) = t.derivs(z);
        f = f + v.norm_sqr();
        for k in 0..dim {
            grad[k] = grad[k] + two * re_dot(v, g[k]);
            for l in 0..dim {
                hess[k][l] = hess[k][l] + two * (re_dot(g[k], g[l]) + re_dot(v, h[k][l]));
            }
        }
    }
    Eval {
        f,
        grad: grad.into_iter().map(Real::to_f64).collect(),
        hess: SymmetricForm::from_fn(dim, |k, l| hess[k][l].to_f64()),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const MAX_STEP: f64 = 0.5;

/// Saddle-free Newton step: `Σ (v·g)/|λ| v` over the eigenpairs of `−H`
/// that are not numerically zero. Falls back to the gradient when the
/// Hessian carries no information.
fn ascent_step(g: &[f64], h: &SymmetricForm) -> Vec<f64> {
    let (vals, vecs) = h.scale(-1.0).eigen();
    let lmax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut s = vec![0.0; g.len()];
    if lmax > 0.0 {
        for (lam, v) in vals.iter().zip(&vecs) {
            if lam.abs() > 1e-10 * lmax {
                let c = v.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / lam.abs();
                for (sk, vk) in s.iter_mut().zip(v) {
                    *sk += c * vk;
                }
            }
        }
    }
    if norm(&s) == 0.0 {
        s = g.to_vec();
    }
    let n = norm(&s);
    if n > MAX_STEP {
        for x in &mut s {
            *x *= MAX_STEP / n;
        }
    }
    s
}

fn moved<T: Real>(z: &[Cx<T>], s: &[f64], mult: f64) -> Vec<Cx<T>> {
    z.iter().zip(s).map(|(zk, sk)| *zk * T::expi(mult * sk)).collect()
}

pub(crate) fn angles<T: Real>(z: &[Cx<T>]) -> Vec<f64> {
    z.iter()
        .map(|c| {
            let a = c.im.to_f64().atan2(c.re.to_f64());
            // Keep angles in [−π, π).
            if a >= std::f64::consts::PI {
                a - 2.0 * std::f64::consts::PI
            } else {
                a
            }
        })
        .collect()
}

pub(crate) fn unit_point<T: Real>(theta: &[f64]) -> Vec<Cx<T>> {
    theta
        .iter()
        .map(|t| {
            let (s, c) = t.sin_cos();
            T::unit(c, s)
        })
        .collect()
}

/// `1 − |v|`, formed as `(1 − |v|²)/(1 + |v|)` so the cancellation happens
/// in the working precision.
pub(crate) fn residual<T: Real>(v: Cx<T>) -> f64 {
    let n2 = v.norm_sqr();
    let d = (T::from_f64(1.0) - n2).to_f64();
    d / (1.0 + n2.to_f64().sqrt())
}

#[derive(Clone, Debug)]
pub(crate) struct Refined<T> {
    pub z: Vec<Cx<T>>,
    pub flat: bool,
    pub converged: bool,
    pub iterations: usize,
    pub trajectory: Vec<Vec<f64>>,
}

fn grad_scale(tables: &[&TermTable]) -> f64 {
    tables
        .iter()
        .map(|t| 2.0 * t.abs_sum * t.grad_sum)
        .sum::<f64>()
        .max(1.0)
}

pub(crate) fn refine<T: Real>(tables: &[&TermTable], z0: Vec<Cx<T>>, max_iter: usize) -> Refined<T> {
    let fscale: f64 = tables.iter().map(|t| t.abs_sum * t.abs_sum).sum::<f64>().max(1.0);
    let gscale = grad_scale(tables);
    let noise = 16.0 * T::EPS * fscale;
    let gtol = 8.0 * T::EPS * gscale;
    let step_tol = 64.0 * T::EPS;

    let mut z = z0;
    let mut cur = objective(tables, &z);
    let mut trajectory = vec![angles(&z)];
    if norm(&cur.grad) <= 1e-14 && cur.hess.max_abs() <= 1e-14 {
        return Refined {
            z,
            flat: true,
            converged: true,
            iterations: 0,
            trajectory,
        };
    }
    for it in 0..max_iter {
        let gn = norm(&cur.grad);
        if gn <= gtol {
            return Refined {
                z,
                flat: false,
                converged: true,
                iterations: it,
                trajectory,
            };
        }
        let s = ascent_step(&cur.grad, &cur.hess);
        if norm(&s) <= step_tol {
            return Refined {
                z,
                flat: false,
                converged: true,
                iterations: it,
                trajectory,
            };
        }
        // On a homogeneous quartic profile plain Newton only contracts by 2/3
        // per step; the multiplier 3 lands the maximum outright.
        let mut best: Option<(f64, Vec<Cx<T>>, Eval<T>)> = None;
        for mult in [1.0, 2.0, 3.0] {
            let zc = moved(&z, &s, mult);
            let e = objective(tables, &zc);
            let df = (e.f - cur.f).to_f64();
            let en = norm(&e.grad);
            if df >= -noise && (df > 0.0 || en < gn) && best.as_ref().is_none_or(|b| en < b.0) {
                best = Some((en, zc, e));
            }
        }
        if best.is_none() {
            let mut h = 0.5;
            for _ in 0..40 {
                let zc = moved(&z, &s, h);
                let e = objective(tables, &zc);
                let df = (e.f - cur.f).to_f64();
                let en = norm(&e.grad);
                if df >= -noise && (df > 0.0 || en < gn) {
                    best = Some((en, zc, e));
                    break;
                }
                h *= 0.5;
            }
        }
        match best {
            Some((_, zc, e)) => {
                z = zc;
                cur = e;
                trajectory.push(angles(&z));
            }
            None => {
                // Noise floor: no representable ascent left.
                return Refined {
                    z,
                    flat: false,
                    converged: true,
                    iterations: it,
                    trajectory,
                };
            }
        }
    }
    let converged = norm(&cur.grad) <= gtol;
    Refined {
        z,
        flat: false,
        converged,
        iterations: max_iter,
        trajectory,
    }
}

/// How far the maximizer of `F` can sit from `theta` given that the
/// coefficients are only known to `f64` precision. Along each principal
/// direction of the Hessian, steps double from `1e-16` until the drop in `F`
/// exceeds `noise·t`, the change a gradient error of size `noise` could
/// explain. That balance point is `O(noise/λ)` in a nondegenerate direction
/// and `O((noise/c)^{1/3})` in a quartic-flat one. The `skip` directions with
/// the smallest curvature are treated as tangent to a contact manifold and
/// ignored.
pub(crate) fn localization_radius(tables: &[&TermTable], theta: &[f64], skip: usize) -> f64 {
    use crate::dd::DoubleDouble;
    let z = unit_point::<DoubleDouble>(theta);
    let cur = objective(tables, &z);
    let noise = 8.0 * f64::EPSILON * grad_scale(tables);
    let (vals, vecs) = cur.hess.eigen();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()));
    let value = |zc: &[Cx<DoubleDouble>]| {
        tables
            .iter()
            .fold(DoubleDouble::from_f64(0.0), |acc, t| acc + t.value(zc).norm_sqr())
    };
    let mut rho: f64 = 0.0;
    for &i in order.iter().skip(skip) {
        for sign in [1.0, -1.0] {
            let mut t = 1e-16;
            while t < MAX_STEP {
                let drop = (cur.f - value(&moved(&z, &vecs[i], sign * t))).to_f64();
                if drop >= noise * t {
                    break;
                }
                t *= 2.0;
            }
            rho = rho.max(t.min(MAX_STEP));
        }
    }
    rho
}

/// Two-stage refinement: an `f64` run to get close, then a double-double run
/// to polish. Returns angles in `[−π, π)`.
pub(crate) fn refine_two_stage(
    tables: &[&TermTable],
    theta0: &[f64],
    max_iter: usize,
) -> (Vec<f64>, Refined<crate::dd::DoubleDouble>) {
    let coarse = refine::<f64>(tables, unit_point(theta0), max_iter);
    let mut fine = refine::<crate::dd::DoubleDouble>(tables, unit_point(&angles(&coarse.z)), max_iter);
    fine.flat |= coarse.flat;
    let mut trajectory = coarse.trajectory;
    trajectory.extend(fine.trajectory.iter().skip(1).cloned());
    fine.trajectory = trajectory;
    fine.iterations += coarse.iterations;
    (angles(&fine.z), fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble;
    use crate::polysym::parse_expression;

    fn table(expr: &str, dim: usize) -> TermTable {
        TermTable::new(&parse_expression(expr, dim).unwrap())
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let t = table("(0.3+0.1i)*z1^2*z2 - 0.2*z2*z3^3 + 0.4i*z1", 3);
        let th = [0.3, -0.4, 1.1];
        let z = unit_point::<f64>(&th);
        let (_, g, h) = t.derivs(&z);
        let eps = 1e-6;
        for k in 0..3 {
            let mut p = th;
            let mut m = th;
            p[k] += eps;
            m[k] -= eps;
            let vp = t.value(&unit_point::<f64>(&p)).to_c64();
            let vm = t.value(&unit_point::<f64>(&m)).to_c64();
            let fd = (vp - vm) / (2.0 * eps);
            assert!((fd - g[k].to_c64()).norm() < 1e-8);
            let (_, gp, _) = t.derivs(&unit_point::<f64>(&p));
            let (_, gm, _) = t.derivs(&unit_point::<f64>(&m));
            for l in 0..3 {
                let fd = (gp[l].to_c64() - gm[l].to_c64()) / (2.0 * eps);
                assert!((fd - h[k][l].to_c64()).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn quadratic_contact_converges_in_f64() {
        let t = table("(1+z1)*(1+z2)/4", 2);
        let r = refine::<f64>(&[&t], unit_point(&[0.3, -0.2]), 50);
        assert!(r.converged);
        let a = angles(&r.z);
        assert!(a[0].abs() < 1e-9 && a[1].abs() < 1e-9, "{a:?}");
    }

    #[test]
    fn quartic_contact_needs_double_double() {
        // F_0(z) = (3+6z−z²)/8 has 1 − |F_0|² ≈ (3/64)θ⁴ near z = 1.
        let t = table("(3+6*z1-z1^2)*(3+6*z2-z2^2)*(3+6*z3-z3^2)/512", 3);
        let (a, r) = refine_two_stage(&[&t], &[0.2, -0.15, 0.1], 60);
        assert!(r.converged);
        assert!(a.iter().all(|x| x.abs() < 1e-9), "{a:?}");
        let v = t.value(&unit_point::<DoubleDouble>(&a));
        assert!(residual(v) < 1e-30);
    }

    #[test]
    fn localization_reflects_flatness() {
        let quad = table("(1+z1)*(1+z2)/4", 2);
        assert!(localization_radius(&[&quad], &[0.0, 0.0], 0) < 1e-12);
        let quartic = table("(3+6*z1-z1^2)/8", 1);
        let r = localization_radius(&[&quartic], &[0.0], 0);
        assert!(r > 1e-6 && r < 1e-3, "{r}");
        // The line θ1 = −θ2 is a contact manifold of (1+z1*z2)/2.
        let line = table("(1+z1*z2)/2", 2);
        assert!(localization_radius(&[&line], &[0.3, -0.3], 1) < 1e-12);
    }

    #[test]
    fn flat_objective_short_circuits() {
        let t = table("z1", 3);
        let r = refine::<f64>(&[&t], unit_point(&[0.4, 0.5, 0.6]), 50);
        assert!(r.flat);
        assert!((angles(&r.z)[1] - 0.5).abs() < 1e-15);
    }
}
