//! Double-double arithmetic and a minimal complex type generic over the
//! real scalar.
//!
//! Contact points where `1 - |φ_j|` vanishes to fourth order can only be
//! located to about 1e-5 in plain `f64`: the gradient of `|φ_j|²` is a
//! difference of O(1) terms that cancel down to O(θ³). Evaluating it in
//! double-double pushes the noise floor to ~1e-32 and the location error to
//! ~1e-10.

use std::ops::{Add, Mul, Neg, Sub};

/// Real scalar used by the refinement kernels.
pub(crate) trait Real:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    /// Unit round-off of the format.
    const EPS: f64;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    /// `e^{ix}` for a moderately small offset `x`.
    fn expi(x: f64) -> Cx<Self>;
    /// Project `(c, s)` onto the unit circle at this precision.
    fn unit(c: f64, s: f64) -> Cx<Self>;
}

impl Real for f64 {
    const EPS: f64 = f64::EPSILON;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn expi(x: f64) -> Cx<f64> {
        let (s, c) = x.sin_cos();
        Cx::new(c, s)
    }
    fn unit(c: f64, s: f64) -> Cx<f64> {
        let r = c.hypot(s);
        Cx::new(c / r, s / r)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub(crate) struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub(crate) const fn new(hi: f64) -> Self {
        Self { hi, lo: 0.0 }
    }

    fn recip_approx_div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * DoubleDouble::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * DoubleDouble::new(q2);
        let q3 = r.hi / b.hi;
        let (s, e) = quick_two_sum(q1, q2);
        DoubleDouble { hi: s, lo: e } + DoubleDouble::new(q3)
    }

    pub(crate) fn div(self, b: Self) -> Self {
        self.recip_approx_div(b)
    }

    pub(crate) fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::new(0.0);
        }
        let s = self.hi.sqrt();
        let (p, e) = two_prod(s, s);
        let resid = (self - DoubleDouble { hi: p, lo: e }).hi;
        let (hi, lo) = quick_two_sum(s, resid / (2.0 * s));
        DoubleDouble { hi, lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        DoubleDouble { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        DoubleDouble { hi, lo }
    }
}

impl Real for DoubleDouble {
    const EPS: f64 = 4.93e-32;
    fn from_f64(x: f64) -> Self {
        DoubleDouble::new(x)
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn expi(x: f64) -> Cx<Self> {
        // Power series; callers only pass offsets well below 1.
        let x_dd = DoubleDouble::new(x);
        let mut term = DoubleDouble::new(1.0);
        let mut re = DoubleDouble::new(0.0);
        let mut im = DoubleDouble::new(0.0);
        for n in 0..40u32 {
            match n % 4 {
                0 => re = re + term,
                1 => im = im + term,
                2 => re = re - term,
                _ => im = im - term,
            }
            term = (term * x_dd).div(DoubleDouble::new(f64::from(n + 1)));
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        Cx::new(re, im)
    }
    fn unit(c: f64, s: f64) -> Cx<Self> {
        let c = DoubleDouble::new(c);
        let s = DoubleDouble::new(s);
        let r = (c * c + s * s).sqrt();
        Cx::new(c.div(r), s.div(r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Cx<T> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Cx<T> {
    pub fn new(re: T, im: T) -> Self {
        Self { re, im }
    }

    pub fn from_c64(c: num_complex::Complex64) -> Self {
        Self::new(T::from_f64(c.re), T::from_f64(c.im))
    }

    pub fn zero() -> Self {
        Self::new(T::from_f64(0.0), T::from_f64(0.0))
    }

    pub fn norm_sqr(self) -> T {
        self.re * self.re + self.im * self.im
    }

    /// Multiply by `i·k` for a real integer factor `k`.
    pub fn mul_i_scalar(self, k: f64) -> Self {
        let k = T::from_f64(k);
        Self::new(-(self.im * k), self.re * k)
    }

    pub fn scale(self, k: f64) -> Self {
        let k = T::from_f64(k);
        Self::new(self.re * k, self.im * k)
    }

    #[cfg(test)]
    pub fn to_c64(self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

impl<T: Real> Add for Cx<T> {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        Self::new(self.re + b.re, self.im + b.im)
    }
}

impl<T: Real> Sub for Cx<T> {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        Self::new(self.re - b.re, self.im - b.im)
    }
}

impl<T: Real> Mul for Cx<T> {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        Self::new(
            self.re * b.re - self.im * b.im,
            self.re * b.im + self.im * b.re,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_bits_lost_in_f64() {
        let a = DoubleDouble::new(1.0) + DoubleDouble::new(1e-20);
        let b = a - DoubleDouble::new(1.0);
        assert!((b.to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn division_and_sqrt() {
        let two = DoubleDouble::new(2.0);
        let r = two.sqrt();
        let back = r * r - two;
        assert!(back.to_f64().abs() < 1e-30);
        let third = DoubleDouble::new(1.0).div(DoubleDouble::new(3.0));
        let err = third * DoubleDouble::new(3.0) - DoubleDouble::new(1.0);
        assert!(err.to_f64().abs() < 1e-31);
    }

    #[test]
    fn expi_matches_f64_and_is_unimodular() {
        for &x in &[0.0, 1e-9, 0.3, -0.7] {
            let e = DoubleDouble::expi(x);
            assert!((e.re.to_f64() - x.cos()).abs() < 1e-16);
            assert!((e.im.to_f64() - x.sin()).abs() < 1e-16);
            let m = e.norm_sqr() - DoubleDouble::new(1.0);
            assert!(m.to_f64().abs() < 1e-30);
        }
    }

    #[test]
    fn unit_projection_is_exact_at_dd_precision() {
        let (s, c) = 0.123_f64.sin_cos();
        let u = DoubleDouble::unit(c, s);
        let m = u.norm_sqr() - DoubleDouble::new(1.0);
        assert!(m.to_f64().abs() < 1e-30);
    }
}
