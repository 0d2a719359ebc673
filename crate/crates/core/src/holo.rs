//! Polynomials on the closed unit disk and the holomorphic data of a curve.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

pub const DEFAULT_DEGREE_CAP: usize = 512;
/// Slack allowed on `|z| <= 1` by [`HoloFunction::eval`].
pub const DOMAIN_SLACK: f64 = 1e-12;
/// Below this `min |phi|` a pair is treated as having a common zero.
pub const NU_MIN: f64 = 1e-9;
/// Largest accepted tail bound when truncating `exp(g)`.
pub const EXP_TAIL_LIMIT: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoloError {
    #[error("point {0} lies outside the closed unit disk")]
    Domain(Complex64),
    #[error("degree {degree} exceeds cap {cap}")]
    DegreeCap { degree: usize, cap: usize },
    #[error("pair is degenerate: min |phi| = {nu:e} on the verification grid")]
    Degenerate { nu: f64 },
    #[error("grid density {0} is below the minimum of 64")]
    GridTooCoarse(usize),
    #[error("exp truncation tail bound {tail:e} exceeds {limit:e}")]
    ExpTail { tail: f64, limit: f64 },
}

/// A polynomial `c_0 + c_1 z + ... + c_d z^d` with a hard degree cap.
#[derive(Clone, Debug, PartialEq)]
pub struct HoloFunction {
    coeffs: Vec<Complex64>,
    degree_cap: usize,
}

impl HoloFunction {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self, HoloError> {
        Self::with_cap(coeffs, DEFAULT_DEGREE_CAP)
    }

    pub fn with_cap(mut coeffs: Vec<Complex64>, degree_cap: usize) -> Result<Self, HoloError> {
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        if coeffs.len() > degree_cap + 1 {
            return Err(HoloError::DegreeCap { degree: coeffs.len() - 1, cap: degree_cap });
        }
        Ok(Self { coeffs, degree_cap })
    }

    /// Builds from real coefficients; convenient in tests and configs.
    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect()).expect("degree within cap")
    }

    pub fn constant(c: Complex64) -> Self {
        Self { coeffs: vec![c], degree_cap: DEFAULT_DEGREE_CAP }
    }

    pub fn zero() -> Self {
        Self::constant(Complex64::new(0.0, 0.0))
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    /// Length of the coefficient list minus one (trailing zeros included).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Drops trailing coefficients that are exactly zero.
    pub fn trimmed(mut self) -> Self {
        while self.coeffs.len() > 1 && self.coeffs.last() == Some(&Complex64::new(0.0, 0.0)) {
            self.coeffs.pop();
        }
        self
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, HoloError> {
        if z.norm() > 1.0 + DOMAIN_SLACK {
            return Err(HoloError::Domain(z));
        }
        Ok(self.eval_unchecked(z))
    }

    /// Horner evaluation without the domain check.
    pub fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let coeffs = if self.coeffs.len() <= 1 {
            vec![Complex64::new(0.0, 0.0)]
        } else {
            self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
        };
        Self { coeffs, degree_cap: self.degree_cap }
    }

    /// Antiderivative with constant term `c0`; fails if the degree would pass the cap.
    pub fn antiderivative(&self, c0: Complex64) -> Result<Self, HoloError> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(c0);
        coeffs.extend(self.coeffs.iter().enumerate().map(|(k, c)| c / (k + 1) as f64));
        Self::with_cap(coeffs, self.degree_cap)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect(), degree_cap: self.degree_cap }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        let coeffs = (0..n)
            .map(|k| *self.coeffs.get(k).unwrap_or(&zero) + *other.coeffs.get(k).unwrap_or(&zero))
            .collect();
        Self { coeffs, degree_cap: self.degree_cap.max(other.degree_cap) }.trimmed()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Product truncated at the cap; returns the l1 norm of the dropped coefficients,
    /// which bounds the truncation error on the closed disk.
    pub fn mul_truncated(&self, other: &Self) -> (Self, f64) {
        let cap = self.degree_cap.max(other.degree_cap);
        let full = self.coeffs.len() + other.coeffs.len() - 1;
        let mut out = vec![Complex64::new(0.0, 0.0); full];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        let dropped: f64 = out.iter().skip(cap + 1).map(|c| c.norm()).sum();
        out.truncate(cap + 1);
        (Self { coeffs: out, degree_cap: cap }, dropped)
    }

    /// Copy with degree cap `cap`, dropping higher coefficients; returns their l1 norm.
    pub fn truncated_to(&self, cap: usize) -> (Self, f64) {
        let dropped: f64 = self.coeffs.iter().skip(cap + 1).map(|c| c.norm()).sum();
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(cap + 1);
        (Self { coeffs, degree_cap: cap }, dropped)
    }

    /// Sum of coefficient moduli; an upper bound for `sup |f|` on the closed disk.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Largest coefficient modulus, used for coefficientwise comparisons.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Taylor coefficients of `exp(g)` up to degree `cap`, with a bound on the discarded tail.
///
/// Uses `n h_n = sum_k k g_k h_{n-k}`. The tail bound comes from the majorant
/// `exp(G)` with `G = sum |g_k| z^k`: `sum_{n>cap} |h_n| <= exp(G(1)) - sum_{n<=cap} C_n`.
pub fn exp_series(g: &HoloFunction, cap: usize) -> (HoloFunction, f64) {
    let gc = g.coeffs();
    let mut h = vec![Complex64::new(0.0, 0.0); cap + 1];
    let mut maj = vec![0.0f64; cap + 1];
    h[0] = gc[0].exp();
    maj[0] = gc[0].norm().exp();
    for n in 1..=cap {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut macc = 0.0;
        for k in 1..=n.min(gc.len() - 1) {
            acc += gc[k] * (k as f64) * h[n - k];
            macc += gc[k].norm() * (k as f64) * maj[n - k];
        }
        h[n] = acc / n as f64;
        maj[n] = macc / n as f64;
    }
    let total = g.l1_norm().exp();
    let partial: f64 = maj.iter().sum();
    // Relative rounding in `total` is kept in the bound so it never reports below noise.
    let tail = (total - partial).max(0.0) + total * 4.0 * f64::EPSILON * (cap as f64 + 1.0);
    let f = HoloFunction { coeffs: h, degree_cap: cap.max(g.degree_cap()) }.trimmed();
    (f, tail)
}

/// `exp(g)` truncated at the cap of `g`, rejected when the tail bound exceeds [`EXP_TAIL_LIMIT`].
pub fn exp_truncated(g: &HoloFunction) -> Result<(HoloFunction, f64), HoloError> {
    let (h, tail) = exp_series(g, g.degree_cap());
    if tail > EXP_TAIL_LIMIT {
        return Err(HoloError::ExpTail { tail, limit: EXP_TAIL_LIMIT });
    }
    Ok((h, tail))
}

impl Serialize for HoloFunction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HoloFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        let cap = DEFAULT_DEGREE_CAP.max(pairs.len().saturating_sub(1));
        HoloFunction::with_cap(pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect(), cap)
            .map_err(serde::de::Error::custom)
    }
}

/// Holomorphic data `(phi1, phi2)` of a Legendrian curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoloPair {
    pub phi1: HoloFunction,
    pub phi2: HoloFunction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub nu: f64,
    pub m: f64,
}

impl HoloPair {
    pub fn new(phi1: HoloFunction, phi2: HoloFunction) -> Self {
        Self { phi1, phi2 }
    }

    /// Pair with the given canonical one-forms: `phi1 = (theta+omega)/sqrt2`, `phi2 = (theta-omega)/(i sqrt2)`.
    pub fn from_forms(theta: &HoloFunction, omega: &HoloFunction) -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let phi1 = theta.add(omega).scale(s);
        let phi2 = theta.sub(omega).scale(s / I);
        Self { phi1, phi2 }
    }

    /// The initial data used by default runs: `(1, z/2)`.
    pub fn default_initial() -> Self {
        Self::new(HoloFunction::from_real(&[1.0]), HoloFunction::from_real(&[0.0, 0.5]))
    }

    pub fn degree(&self) -> usize {
        self.phi1.degree().max(self.phi2.degree())
    }

    pub fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        (self.phi1.eval_unchecked(z), self.phi2.eval_unchecked(z))
    }

    /// `omega = (phi1 - i phi2)/sqrt2` at `z`.
    pub fn omega(&self, z: Complex64) -> Complex64 {
        let (a, b) = self.eval(z);
        (a - I * b) * FRAC_1_SQRT_2
    }

    /// `theta = (phi1 + i phi2)/sqrt2` at `z`.
    pub fn theta(&self, z: Complex64) -> Complex64 {
        let (a, b) = self.eval(z);
        (a + I * b) * FRAC_1_SQRT_2
    }

    pub fn omega_fn(&self) -> HoloFunction {
        self.phi1.sub(&self.phi2.scale(I)).scale(Complex64::new(FRAC_1_SQRT_2, 0.0))
    }

    pub fn theta_fn(&self) -> HoloFunction {
        self.phi1.add(&self.phi2.scale(I)).scale(Complex64::new(FRAC_1_SQRT_2, 0.0))
    }

    /// `|phi(z)|`, the conformal factor of the induced metric.
    pub fn norm_at(&self, z: Complex64) -> f64 {
        let (a, b) = self.eval(z);
        (a.norm_sqr() + b.norm_sqr()).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { phi1: self.phi1.sub(&other.phi1), phi2: self.phi2.sub(&other.phi2) }
    }

    /// Largest coefficient modulus over both components.
    pub fn max_coeff(&self) -> f64 {
        self.phi1.max_coeff().max(self.phi2.max_coeff())
    }
}

pub fn evaluate(f: &HoloFunction, z: Complex64) -> Result<Complex64, HoloError> {
    f.eval(z)
}

pub fn derivative(f: &HoloFunction) -> HoloFunction {
    f.derivative()
}

/// Min and max of `|phi|` over a polar grid of `density` radii (0 to 1 inclusive)
/// and `4 density` angles.
pub fn norm_bounds(pair: &HoloPair, density: usize) -> Result<NormBounds, HoloError> {
    if density < 64 {
        return Err(HoloError::GridTooCoarse(density));
    }
    let angles = 4 * density;
    let mut nu = f64::INFINITY;
    let mut m: f64 = 0.0;
    for i in 0..density {
        let r = i as f64 / (density - 1) as f64;
        let na = if i == 0 { 1 } else { angles };
        for k in 0..na {
            let z = Complex64::from_polar(r, 2.0 * PI * k as f64 / angles as f64);
            let v = pair.norm_at(z);
            nu = nu.min(v);
            m = m.max(v);
        }
    }
    if !(nu >= NU_MIN) {
        return Err(HoloError::Degenerate { nu });
    }
    Ok(NormBounds { nu, m })
}

/// `M_phi(z) = (1/sqrt2) [[0, phi1 + i phi2], [phi1 - i phi2, 0]]`.
pub fn matrix_form(pair: &HoloPair, z: Complex64) -> Matrix2<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    Matrix2::new(zero, pair.theta(z), pair.omega(z), zero)
}

/// `((cos t) phi1 + (sin t) phi2, -(sin t) phi1 + (cos t) phi2)`.
pub fn rotate_pair(pair: &HoloPair, t: f64) -> HoloPair {
    let (s, c) = t.sin_cos();
    let c = Complex64::new(c, 0.0);
    let s = Complex64::new(s, 0.0);
    HoloPair {
        phi1: pair.phi1.scale(c).add(&pair.phi2.scale(s)),
        phi2: pair.phi2.scale(c).sub(&pair.phi1.scale(s)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluate_examples() {
        let one = HoloFunction::from_real(&[1.0]);
        assert_eq!(evaluate(&one, c(0.5, 0.5)).unwrap(), c(1.0, 0.0));
        let id = HoloFunction::from_real(&[0.0, 1.0]);
        assert_eq!(evaluate(&id, c(0.0, 0.3)).unwrap(), c(0.0, 0.3));
        // direct summation 1 + 2(0.5) + 3(0.25)
        let f = HoloFunction::from_real(&[1.0, 2.0, 3.0]);
        let direct = 1.0 + 2.0 * 0.5 + 3.0 * 0.25;
        assert_abs_diff_eq!(evaluate(&f, c(0.5, 0.0)).unwrap().re, direct, epsilon = 1e-15);
    }

    #[test]
    fn evaluate_rejects_outside() {
        let f = HoloFunction::from_real(&[1.0]);
        assert!(matches!(f.eval(c(1.0 + 1e-9, 0.0)), Err(HoloError::Domain(_))));
        assert!(f.eval(c(1.0 + 1e-13, 0.0)).is_ok());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(derivative(&HoloFunction::from_real(&[3.0])).coeffs(), &[c(0.0, 0.0)]);
        assert_eq!(derivative(&HoloFunction::from_real(&[0.0, 0.0, 1.0])).coeffs(), &[c(0.0, 0.0), c(2.0, 0.0)]);
        let f = HoloFunction::from_real(&[1.0, 1.0, 1.0, 1.0]);
        let h = 1e-6;
        let z = c(0.5, 0.0);
        let fd = (f.eval_unchecked(z + h) - f.eval_unchecked(z - h)) / (2.0 * h);
        let d = derivative(&f).eval(z).unwrap();
        assert_abs_diff_eq!(d.re, 2.75, epsilon = 1e-14);
        assert!((d - fd).norm() < 1e-5);
    }

    #[test]
    fn norm_bounds_examples() {
        let p = HoloPair::new(HoloFunction::from_real(&[2f64.sqrt()]), HoloFunction::zero());
        let b = norm_bounds(&p, 64).unwrap();
        assert_abs_diff_eq!(b.nu, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.m, 2f64.sqrt(), epsilon = 1e-15);
        // |phi|^2 = 1 + |z|^2
        let p = HoloPair::new(HoloFunction::from_real(&[1.0]), HoloFunction::from_real(&[0.0, 1.0]));
        let b = norm_bounds(&p, 64).unwrap();
        assert_abs_diff_eq!(b.nu, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.m, 2f64.sqrt(), epsilon = 1e-14);
        let z = HoloFunction::from_real(&[0.0, 1.0]);
        let p = HoloPair::new(z.clone(), z);
        assert!(matches!(norm_bounds(&p, 64), Err(HoloError::Degenerate { .. })));
        assert!(matches!(norm_bounds(&p, 10), Err(HoloError::GridTooCoarse(10))));
    }

    #[test]
    fn matrix_form_examples() {
        let s2 = 2f64.sqrt();
        let m = matrix_form(&HoloPair::new(HoloFunction::from_real(&[s2]), HoloFunction::zero()), c(0.3, 0.1));
        assert!((m - Matrix2::new(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.))).norm() < 1e-15);
        let p = HoloPair::new(HoloFunction::zero(), HoloFunction::constant(c(0.0, s2)));
        let m = matrix_form(&p, c(-0.2, 0.4));
        assert!((m - Matrix2::new(c(0., 0.), c(-1., 0.), c(1., 0.), c(0., 0.))).norm() < 1e-15);
        let p = HoloPair::new(HoloFunction::from_real(&[1.0]), HoloFunction::from_real(&[0.0, 1.0]));
        let m = matrix_form(&p, c(0.0, 0.0));
        let r = FRAC_1_SQRT_2;
        assert!((m - Matrix2::new(c(0., 0.), c(r, 0.), c(r, 0.), c(0., 0.))).norm() < 1e-15);
    }

    #[test]
    fn rotate_examples() {
        let p = HoloPair::new(HoloFunction::from_real(&[1.0, 2.0]), HoloFunction::from_real(&[0.0, 0.0, 3.0]));
        assert_eq!(rotate_pair(&p, 0.0), p);
        let q = rotate_pair(&p, PI / 2.0);
        for z in [c(0.1, 0.2), c(-0.5, 0.5)] {
            let (a, b) = q.eval(z);
            let (x, y) = p.eval(z);
            assert!((a - y).norm() < 1e-15 && (b + x).norm() < 1e-15);
        }
    }

    #[test]
    fn forms_round_trip() {
        let p = HoloPair::new(HoloFunction::from_real(&[1.0, 0.5]), HoloFunction::new(vec![c(0.0, 1.0), c(0.3, -0.2)]).unwrap());
        let q = HoloPair::from_forms(&p.theta_fn(), &p.omega_fn());
        assert!(p.sub(&q).max_coeff() < 1e-15);
        let z = c(0.2, -0.7);
        assert!((p.theta_fn().eval_unchecked(z) - p.theta(z)).norm() < 1e-15);
    }

    #[test]
    fn exp_matches_closed_form() {
        let g = HoloFunction::from_real(&[0.1, 0.5]);
        let (h, tail) = exp_truncated(&g).unwrap();
        assert!(tail < 1e-12);
        for z in [c(0.3, 0.4), c(-1.0, 0.0), c(0.0, 1.0)] {
            let exact = (c(0.1, 0.0) + z * 0.5).exp();
            assert!((h.eval_unchecked(z) - exact).norm() < 1e-13);
        }
        let big = HoloFunction::with_cap(vec![c(0.0, 0.0), c(30.0, 0.0)], 16).unwrap();
        assert!(matches!(exp_truncated(&big), Err(HoloError::ExpTail { .. })));
    }

    #[test]
    fn json_format() {
        let f = HoloFunction::new(vec![c(1.0, 0.0), c(0.0, -2.5)]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, "[[1.0,0.0],[0.0,-2.5]]");
        let g: HoloFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn mul_truncated_reports_drop() {
        let f = HoloFunction::with_cap(vec![c(1.0, 0.0), c(1.0, 0.0)], 1).unwrap();
        let (p, dropped) = f.mul_truncated(&f);
        assert_eq!(p.coeffs(), &[c(1.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(dropped, 1.0);
    }

    fn arb_poly() -> impl Strategy<Value = HoloFunction> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)
            .prop_map(|v| HoloFunction::new(v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
    }

    fn arb_point() -> impl Strategy<Value = Complex64> {
        (0.0f64..0.999, 0.0f64..(2.0 * PI)).prop_map(|(r, a)| Complex64::from_polar(r, a))
    }

    proptest! {
        #[test]
        fn rotation_preserves_norm_bounds(f in arb_poly(), g in arb_poly(), t in -4.0f64..4.0) {
            let p = HoloPair::new(f.add(&HoloFunction::from_real(&[3.0])), g);
            let b0 = norm_bounds(&p, 64).unwrap();
            let b1 = norm_bounds(&rotate_pair(&p, t), 64).unwrap();
            prop_assert!((b0.nu - b1.nu).abs() < 1e-12 && (b0.m - b1.m).abs() < 1e-12);
        }

        #[test]
        fn matrix_form_diagonal_is_zero(f in arb_poly(), g in arb_poly(), z in arb_point()) {
            let m = matrix_form(&HoloPair::new(f, g), z);
            prop_assert!(m[(0, 0)] == Complex64::new(0.0, 0.0) && m[(1, 1)] == Complex64::new(0.0, 0.0));
        }

        #[test]
        fn derivative_matches_central_difference(f in arb_poly(), z in arb_point()) {
            let h = 1e-6;
            let fd = (f.eval_unchecked(z + h) - f.eval_unchecked(z - h)) / (2.0 * h);
            prop_assert!((f.derivative().eval_unchecked(z) - fd).norm() < 1e-5);
        }

        #[test]
        fn forms_carry_the_metric(f in arb_poly(), g in arb_poly(), z in arb_point()) {
            let p = HoloPair::new(f, g);
            let lhs = p.omega(z).norm_sqr() + p.theta(z).norm_sqr();
            let rhs = p.norm_at(z).powi(2);
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs));
        }
    }
}
