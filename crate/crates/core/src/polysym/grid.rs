use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::ComplexPolynomial;

/// Angle of grid index `i` on an `n`-point circle grid: `-π + 2πi/n`.
/// Index `n/2` sits at angle 0 for even `n`.
pub fn grid_angle(i: usize, n: usize) -> f64 {
    -PI + 2.0 * PI * i as f64 / n as f64
}

/// Tensor-grid evaluator on `T^d` using sum factorization over the first
/// variable: the trailing `d-1` variables are folded into one table per
/// power of `z_1`, so a slab at fixed `i_1` costs `n^{d-1}` times the number
/// of distinct `z_1` powers.
///
/// Flat index of `(i_1, …, i_d)` is row-major with `i_1` slowest.
pub struct TorusGrid {
    dim: usize,
    n: usize,
    first_powers: Vec<u32>,
    // tables[k][j] = Σ_{terms with α_1 = first_powers[k]} c·Π_{l≥2} z_l^{α_l} at trailing index j
    tables: Vec<Vec<Complex64>>,
}

impl TorusGrid {
    pub fn new(p: &ComplexPolynomial, n: usize) -> Self {
        let dim = p.dim();
        let trailing = n.pow((dim - 1) as u32);
        // roots[m][i] = e^{i m θ_i}
        let max_deg = (0..dim).map(|k| p.degree_in(k)).max().unwrap_or(0) as usize;
        let roots: Vec<Vec<Complex64>> = (0..=max_deg)
            .map(|m| {
                (0..n)
                    .map(|i| Complex64::from_polar(1.0, m as f64 * grid_angle(i, n)))
                    .collect()
            })
            .collect();

        let mut grouped: BTreeMap<u32, Vec<Complex64>> = BTreeMap::new();
        for (e, c) in p.terms() {
            let table = grouped
                .entry(e[0])
                .or_insert_with(|| vec![Complex64::new(0.0, 0.0); trailing]);
            for (j, slot) in table.iter_mut().enumerate() {
                let mut t = *c;
                let mut rem = j;
                for k in (1..dim).rev() {
                    let ik = rem % n;
                    rem /= n;
                    t *= roots[e[k] as usize][ik];
                }
                *slot += t;
            }
        }
        let (first_powers, tables) = grouped.into_iter().unzip();
        Self {
            dim,
            n,
            first_powers,
            tables,
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slab_len(&self) -> usize {
        self.n.pow((self.dim - 1) as u32)
    }

    /// Values on the slab `i_1 = i1`.
    pub fn slab(&self, i1: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.slab_len()];
        let theta = grid_angle(i1, self.n);
        for (a, table) in self.first_powers.iter().zip(&self.tables) {
            let w = Complex64::from_polar(1.0, f64::from(*a) * theta);
            for (o, t) in out.iter_mut().zip(table) {
                *o += w * t;
            }
        }
        out
    }

    /// Angles of a flat grid index.
    pub fn angles(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        let mut rem = flat;
        for k in (0..self.dim).rev() {
            idx[k] = rem % self.n;
            rem /= self.n;
        }
        idx.into_iter().map(|i| grid_angle(i, self.n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysym::parse_expression;

    #[test]
    fn slab_values_match_direct_evaluation() {
        let p = parse_expression("(1+2i)*z1^2*z3 - z2*z3^3 + 0.5*z1 + 0.25", 3).unwrap();
        let n = 8;
        let g = TorusGrid::new(&p, n);
        for i1 in 0..n {
            let slab = g.slab(i1);
            for (j, v) in slab.iter().enumerate() {
                let flat = i1 * n * n + j;
                let direct = p.evaluate_angles(&g.angles(flat));
                assert!((v - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_angle_is_on_grid() {
        assert_eq!(grid_angle(32, 64), 0.0);
    }
}
