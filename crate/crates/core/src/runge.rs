//! Rotation choice, zero-free bumps `h = exp(g)` and the modified pair of the Runge step.
//!
//! The bump is fitted by weighted least squares in the monomial basis and then
//! certified a posteriori on dense sample sets. Fits depend only on `N`, the degree and
//! the target value, so they are computed once for the ray at angle `0` and rotated.

use crate::holo::{exp_series, norm_bounds, rotate_pair, HoloError, HoloFunction, HoloPair, NormBounds};
use crate::labyrinth::{LabyrinthError, LabyrinthSpec, Region};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

/// Sample points per region used for certificates.
pub const CERT_SAMPLES: usize = 100_000;
/// Degrees tried, in order, by [`build_bump`].
pub const BUMP_DEGREES: [usize; 4] = [64, 128, 256, 512];
/// Truncation degree of the Taylor series of `exp(g)`.
pub const H_DEGREE_CAP: usize = 2048;
/// Coefficientwise tolerance of `u . (phi - phi~) = 0`.
pub const ORTHO_TOL: f64 = 1e-12;
/// Equispaced unit-circle points in the fit.
const FIT_CIRCLE: usize = 2048;
const FIT_SEGMENT: usize = 256;
const FIT_CONTOUR: usize = 512;
const FIT_INTERIOR: usize = 512;
/// Every `COARSE_STRIDE`-th sample is checked before the full set.
const COARSE_STRIDE: usize = 25;
/// `exp` argument clamp so that failing margins stay finite.
const EXP_CLAMP: f64 = 700.0;
const NORM_DENSITY: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RungeError {
    #[error(transparent)]
    Holo(#[from] HoloError),
    #[error(transparent)]
    Labyrinth(#[from] LabyrinthError),
    #[error("eps must be positive, got {0}")]
    BadEps(f64),
    #[error(
        "no rotation certifies on varpi_{j}: threshold {threshold:e}, min |phi| = ({min1:e}, {min2:e}), \
         rotated ({rot1:e}, {rot2:e})"
    )]
    Rotation { j: usize, threshold: f64, min1: f64, min2: f64, rot1: f64, rot2: f64 },
    #[error(
        "bump for j = {j} not certified up to degree {degree}; best degree {best_degree}, \
         margins omega {margin_omega:e}, off {margin_off:e}"
    )]
    Exhausted { j: usize, degree: usize, best_degree: usize, margin_omega: f64, margin_off: f64 },
}

/// Values and tolerances the bump must meet: `|h - on_omega| < tol_omega` on `omega_j`,
/// `|h - 1| < tol_off` off `varpi_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpTargets {
    pub on_omega: f64,
    pub tol_omega: f64,
    pub tol_off: f64,
}

impl BumpTargets {
    /// `2N^4` within `1/(2N^2)`, and `1` within `eps/(2N^2 m)`.
    pub fn standard(n: usize, eps: f64, m: f64) -> Self {
        let nf = n as f64;
        Self { on_omega: 2.0 * nf.powi(4), tol_omega: 0.5 / (nf * nf), tol_off: eps / (2.0 * nf * nf * m) }
    }
}

/// What [`modify_pair_with`] does when no bump certifies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BumpFallback {
    #[default]
    Fail,
    /// Use `h = 1`, leaving the pair unchanged; the certificate records the failure.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungeOptions {
    pub samples: usize,
    pub degrees: Vec<usize>,
    pub fallback: BumpFallback,
    /// Replaces `2N^4` as the value on `omega_j`; `Some(1.0)` requests the identity bump.
    pub omega_target: Option<f64>,
}

impl Default for RungeOptions {
    fn default() -> Self {
        Self { samples: CERT_SAMPLES, degrees: BUMP_DEGREES.to_vec(), fallback: BumpFallback::Fail, omega_target: None }
    }
}

/// Deterministic sample sets for one index `j`.
#[derive(Clone, Debug)]
pub struct RegionSamples {
    pub j: usize,
    pub omega: Vec<Complex64>,
    pub varpi: Vec<Complex64>,
    pub off: Vec<Complex64>,
}

impl RegionSamples {
    pub fn new(spec: &LabyrinthSpec, j: usize, count: usize) -> Result<Self, LabyrinthError> {
        Ok(Self {
            j,
            omega: spec.sample_region(Region::OmegaJ(j), count)?,
            varpi: spec.sample_region(Region::VarpiJ(j), count)?,
            off: spec.sample_region(Region::OutsideVarpiJ(j), count)?,
        })
    }
}

/// A certified bump. `h` is the truncated Taylor series of `exp(g)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub g: HoloFunction,
    pub h: HoloFunction,
    pub exp_tail: f64,
    pub targets: BumpTargets,
    pub margin_omega: f64,
    pub margin_off: f64,
}

impl Bump {
    pub fn identity(targets: BumpTargets) -> Self {
        Self {
            g: HoloFunction::zero(),
            h: HoloFunction::constant(Complex64::new(1.0, 0.0)),
            exp_tail: 0.0,
            targets,
            margin_omega: targets.tol_omega - (targets.on_omega - 1.0).abs(),
            margin_off: targets.tol_off,
        }
    }

    pub fn degree(&self) -> usize {
        self.g.degree()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungeCertificate {
    pub n: usize,
    pub j: usize,
    pub eps: f64,
    pub nu: f64,
    pub m: f64,
    pub t: f64,
    pub u: [f64; 2],
    /// `sup |phi~ - phi|` over the samples off `varpi_j`, plus the truncation mass.
    pub sup_dev_off: f64,
    pub min_on_omega: f64,
    pub min_on_varpi: f64,
    pub bump_degree: usize,
    pub c_empirical: f64,
    /// Largest coefficient of `u . (phi - phi~)`.
    pub orthogonality: f64,
    pub truncation: f64,
    pub nu_out: f64,
    pub samples_per_region: usize,
    pub bump_certified: bool,
    pub fallback_applied: bool,
    pub bump_margin_omega: f64,
    pub bump_margin_off: f64,
    pub g: HoloFunction,
}

impl RungeCertificate {
    /// Conclusion (a): `sup |phi~ - phi| < eps/(2N^2)` off `varpi_j`.
    pub fn margin_a(&self) -> f64 {
        self.eps / (2.0 * (self.n * self.n) as f64) - self.sup_dev_off
    }

    /// Conclusion (b) holds with a positive constant on the proof's scale `nu/2`, up to a factor 4.
    pub fn passes_b(&self) -> bool {
        self.c_empirical >= self.nu / 8.0
    }

    pub fn passes_c(&self) -> bool {
        self.orthogonality < ORTHO_TOL && self.u[0].abs() > 1.0 - 2.0 / self.n as f64
    }

    pub fn passes(&self) -> bool {
        self.bump_certified && self.margin_a() > 0.0 && self.passes_b() && self.passes_c() && self.nu_out > 0.0
    }
}

fn component_mins(pair: &HoloPair, pts: &[Complex64]) -> (f64, f64) {
    pts.iter().fold((f64::INFINITY, f64::INFINITY), |(a, b), &z| {
        let (p1, p2) = pair.eval(z);
        (a.min(p1.norm()), b.min(p2.norm()))
    })
}

/// Angle `t` with `sin t <= sqrt(2/N)` making both rotated components at least
/// `nu/(2 sqrt N)` on the given `varpi_j` samples.
pub fn choose_rotation_on(
    pair: &HoloPair,
    n: usize,
    j: usize,
    bounds: &NormBounds,
    varpi: &[Complex64],
) -> Result<f64, RungeError> {
    let threshold = bounds.nu / (2.0 * (n as f64).sqrt());
    let (min1, min2) = component_mins(pair, varpi);
    if min1 >= threshold && min2 >= threshold {
        return Ok(0.0);
    }
    // whichever component is small, the same angle works
    let t = (2.0 / n as f64).sqrt().min(1.0).asin();
    let (rot1, rot2) = component_mins(&rotate_pair(pair, t), varpi);
    if rot1 >= threshold && rot2 >= threshold {
        return Ok(t);
    }
    Err(RungeError::Rotation { j, threshold, min1, min2, rot1, rot2 })
}

pub fn choose_rotation(pair: &HoloPair, spec: &LabyrinthSpec, j: usize, bounds: &NormBounds) -> Result<f64, RungeError> {
    let varpi = spec.sample_region(Region::VarpiJ(j), CERT_SAMPLES)?;
    choose_rotation_on(pair, spec.n(), j, bounds, &varpi)
}

type FitKey = (usize, usize, u64);

fn fit_cache() -> &'static Mutex<HashMap<FitKey, Vec<Complex64>>> {
    static CACHE: OnceLock<Mutex<HashMap<FitKey, Vec<Complex64>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn halton(mut i: usize, b: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

fn powers(z: Complex64, d: usize, out: &mut [Complex64]) {
    let mut p = Complex64::new(1.0, 0.0);
    for slot in out.iter_mut().take(d + 1) {
        *slot = p;
        p *= z;
    }
}

/// Least-squares coefficients of `g` for the ray at angle `2 pi`, one vector per degree.
fn fit_canonical(spec: &LabyrinthSpec, degrees: &[usize], log_target: f64) -> Vec<Vec<Complex64>> {
    let n = spec.n();
    if log_target == 0.0 {
        return degrees.iter().map(|&d| vec![Complex64::new(0.0, 0.0); d + 1]).collect();
    }
    let dmax = *degrees.iter().max().unwrap_or(&0);
    let key = |d: usize| (n, d, log_target.to_bits());
    {
        let cache = fit_cache().lock().expect("fit cache");
        if degrees.iter().all(|&d| cache.contains_key(&key(d))) {
            return degrees.iter().map(|&d| cache[&key(d)].clone()).collect();
        }
    }
    let j0 = 2 * n;
    let delta = spec.band_halfwidth();
    let dim = dmax + 1;
    let mf = FIT_CIRCLE as f64;

    // (point, weight, target); the equispaced circle enters the Gram as FIT_CIRCLE * I
    let mut pts: Vec<(Complex64, f64, f64)> = Vec::new();
    for k in 0..FIT_CIRCLE {
        let z = Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / mf);
        if spec.dist_to_segment(z, j0) < delta {
            pts.push((z, -1.0, 0.0));
        }
    }
    let (a, b) = spec.segment(j0);
    for i in 0..FIT_SEGMENT {
        let t = i as f64 / (FIT_SEGMENT - 1) as f64;
        pts.push((a + (b - a) * t, mf / FIT_SEGMENT as f64, log_target));
    }
    let contour = spec.stadium_contour(j0, delta * (1.0 + 1e-6), FIT_CONTOUR);
    let wc = mf / contour.len().max(1) as f64;
    pts.extend(contour.into_iter().map(|z| (z, wc, 0.0)));
    let mut i = 0;
    let mut interior = 0;
    while interior < FIT_INTERIOR {
        i += 1;
        let z = Complex64::from_polar(halton(i, 2).sqrt(), 2.0 * PI * halton(i, 3));
        if spec.dist_to_segment(z, j0) >= delta {
            pts.push((z, 1.0, 0.0));
            interior += 1;
        }
    }

    let mut gram = vec![Complex64::new(0.0, 0.0); dim * dim];
    for k in 0..dim {
        gram[k * dim + k] = Complex64::new(mf, 0.0);
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    for &(z, w, t) in &pts {
        powers(z, dmax, &mut v);
        for k in 0..dim {
            let a = v[k].conj() * w;
            rhs[k] += a * t;
            let row = &mut gram[k * dim..(k + 1) * dim];
            for l in k..dim {
                row[l] += a * v[l];
            }
        }
    }
    for k in 0..dim {
        for l in 0..k {
            gram[k * dim + l] = gram[l * dim + k].conj();
        }
    }
    let full = DMatrix::from_row_slice(dim, dim, &gram);
    let mut out = Vec::with_capacity(degrees.len());
    let mut cache = fit_cache().lock().expect("fit cache");
    for &d in degrees {
        let coeffs = if let Some(c) = cache.get(&key(d)) {
            c.clone()
        } else {
            let block = full.view((0, 0), (d + 1, d + 1)).into_owned();
            let b = DVector::from_column_slice(&rhs[..d + 1]);
            let c: Vec<Complex64> = match block.cholesky() {
                Some(ch) => ch.solve(&b).iter().copied().collect(),
                None => vec![Complex64::new(0.0, 0.0); d + 1],
            };
            cache.insert(key(d), c.clone());
            c
        };
        out.push(coeffs);
    }
    out
}

fn rotated(coeffs: &[Complex64], angle: f64, cap: usize) -> HoloFunction {
    let c: Vec<Complex64> =
        coeffs.iter().enumerate().map(|(k, c)| c * Complex64::from_polar(1.0, -(k as f64) * angle)).collect();
    HoloFunction::with_cap(c, cap.max(coeffs.len().saturating_sub(1))).expect("cap covers degree").trimmed()
}

fn clamped_exp(w: Complex64) -> Complex64 {
    Complex64::new(w.re.min(EXP_CLAMP), w.im).exp()
}

/// `(tol_omega - sup |h - T|, tol_off - sup |h - 1|)` with `h` given pointwise.
fn margins<F: Fn(Complex64) -> Complex64>(
    h: F,
    targets: &BumpTargets,
    omega: &[Complex64],
    off: &[Complex64],
    stride: usize,
) -> (f64, f64) {
    let t = Complex64::new(targets.on_omega, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let so = omega.iter().step_by(stride).map(|&z| (h(z) - t).norm()).fold(0.0, f64::max);
    let sf = off.iter().step_by(stride).map(|&z| (h(z) - one).norm()).fold(0.0, f64::max);
    (targets.tol_omega - so, targets.tol_off - sf)
}

fn score(m: (f64, f64), targets: &BumpTargets) -> f64 {
    (m.0 / targets.tol_omega).min(m.1 / targets.tol_off)
}

/// Bump for `omega_j` with the standard targets.
pub fn build_bump(spec: &LabyrinthSpec, j: usize, eps: f64, m: f64) -> Result<Bump, RungeError> {
    let samples = RegionSamples::new(spec, j, CERT_SAMPLES)?;
    build_bump_on(spec, &samples, BumpTargets::standard(spec.n(), eps, m), &BUMP_DEGREES)
}

/// Fits and certifies `h = exp(g)` degree by degree; fails with the best margins seen.
pub fn build_bump_on(
    spec: &LabyrinthSpec,
    samples: &RegionSamples,
    targets: BumpTargets,
    degrees: &[usize],
) -> Result<Bump, RungeError> {
    let j = samples.j;
    if !(targets.tol_off > 0.0 && targets.tol_off.is_finite()) {
        return Err(RungeError::BadEps(targets.tol_off));
    }
    let log_target = targets.on_omega.ln();
    let fits = fit_canonical(spec, degrees, log_target);
    let angle = spec.ray_angle(j);
    let mut best: Option<(f64, usize, (f64, f64))> = None;
    let mut note = |score: f64, d: usize, m: (f64, f64)| {
        if best.map_or(true, |b| score > b.0) {
            best = Some((score, d, m));
        }
    };
    for (&d, coeffs) in degrees.iter().zip(&fits) {
        let g = rotated(coeffs, angle, d);
        let pointwise = |z: Complex64| clamped_exp(g.eval_unchecked(z));
        let coarse = margins(pointwise, &targets, &samples.omega, &samples.off, COARSE_STRIDE);
        if coarse.0 <= 0.0 || coarse.1 <= 0.0 {
            note(score(coarse, &targets), d, coarse);
            continue;
        }
        let fine = margins(pointwise, &targets, &samples.omega, &samples.off, 1);
        if fine.0 <= 0.0 || fine.1 <= 0.0 {
            note(score(fine, &targets), d, fine);
            continue;
        }
        let (h, tail) = exp_series(&g, H_DEGREE_CAP);
        let poly = margins(|z| h.eval_unchecked(z), &targets, &samples.omega, &samples.off, 1);
        let poly = (poly.0 - tail, poly.1 - tail);
        if poly.0 > 0.0 && poly.1 > 0.0 {
            return Ok(Bump { g, h, exp_tail: tail, targets, margin_omega: poly.0, margin_off: poly.1 });
        }
        note(score(poly, &targets), d, poly);
    }
    let (_, best_degree, (margin_omega, margin_off)) = best.unwrap_or((0.0, 0, (f64::NAN, f64::NAN)));
    Err(RungeError::Exhausted {
        j,
        degree: degrees.iter().copied().max().unwrap_or(0),
        best_degree,
        margin_omega,
        margin_off,
    })
}

/// [`modify_pair_with`] under default options.
pub fn modify_pair(
    pair: &HoloPair,
    spec: &LabyrinthSpec,
    j: usize,
    eps: f64,
) -> Result<(HoloPair, RungeCertificate), RungeError> {
    modify_pair_with(pair, spec, j, eps, &RungeOptions::default())
}

/// `phi~ = R_{-t}(phi^_1, h phi^_2)` with `phi^ = R_t phi`, written as
/// `phi~ = phi + (-sin t, cos t) D` with `D = (h - 1) phi^_2`.
pub fn modify_pair_with(
    pair: &HoloPair,
    spec: &LabyrinthSpec,
    j: usize,
    eps: f64,
    opts: &RungeOptions,
) -> Result<(HoloPair, RungeCertificate), RungeError> {
    if !(eps > 0.0) {
        return Err(RungeError::BadEps(eps));
    }
    let samples = RegionSamples::new(spec, j, opts.samples)?;
    modify_pair_on(pair, spec, &samples, eps, opts)
}

/// [`modify_pair_with`] on precomputed sample sets.
pub fn modify_pair_on(
    pair: &HoloPair,
    spec: &LabyrinthSpec,
    samples: &RegionSamples,
    eps: f64,
    opts: &RungeOptions,
) -> Result<(HoloPair, RungeCertificate), RungeError> {
    if !(eps > 0.0) {
        return Err(RungeError::BadEps(eps));
    }
    let j = samples.j;
    let n = spec.n();
    let nf = n as f64;
    let bounds = norm_bounds(pair, NORM_DENSITY)?;
    let samples_per_region = samples.omega.len().min(samples.varpi.len()).min(samples.off.len());
    let t = choose_rotation_on(pair, n, j, &bounds, &samples.varpi)?;
    let mut targets = BumpTargets::standard(n, eps, bounds.m);
    if let Some(v) = opts.omega_target {
        targets.on_omega = v;
    }
    let (bump, certified) = match build_bump_on(spec, samples, targets, &opts.degrees) {
        Ok(b) => (b, true),
        Err(RungeError::Exhausted { margin_omega, margin_off, .. }) if opts.fallback == BumpFallback::Identity => {
            let mut b = Bump::identity(targets);
            b.margin_omega = margin_omega;
            b.margin_off = margin_off;
            (b, false)
        }
        Err(e) => return Err(e),
    };
    let fallback_applied = !certified;
    let h = if certified { bump.h.clone() } else { HoloFunction::constant(Complex64::new(1.0, 0.0)) };

    let (s, c) = t.sin_cos();
    let hat = rotate_pair(pair, t);
    let hm1 = h.sub(&HoloFunction::constant(Complex64::new(1.0, 0.0)));
    let cap = pair.phi1.degree_cap().max(pair.phi2.degree_cap());
    let (d, dropped) = hm1.mul_truncated(&hat.phi2);
    let (d, dropped_cap) = d.truncated_to(cap);
    let truncation = dropped + dropped_cap;
    let new = HoloPair::new(
        pair.phi1.sub(&d.scale(Complex64::new(s, 0.0))),
        pair.phi2.add(&d.scale(Complex64::new(c, 0.0))),
    );

    let diff = pair.sub(&new);
    let orth = diff.phi1.scale(Complex64::new(c, 0.0)).add(&diff.phi2.scale(Complex64::new(s, 0.0)));
    let orthogonality = orth.max_coeff();
    let sup_dev_off = samples.off.iter().map(|&z| diff.norm_at(z)).fold(0.0, f64::max) + truncation;
    let min_of = |pts: &[Complex64]| pts.iter().map(|&z| new.norm_at(z)).fold(f64::INFINITY, f64::min) - truncation;
    let min_on_omega = min_of(&samples.omega);
    let min_on_varpi = min_of(&samples.varpi);
    let c_empirical = (min_on_omega / nf.powf(3.5)).min(min_on_varpi * nf.sqrt());
    let nu_out = norm_bounds(&new, NORM_DENSITY).map(|b| b.nu).unwrap_or(0.0);
    let cert = RungeCertificate {
        n,
        j,
        eps,
        nu: bounds.nu,
        m: bounds.m,
        t,
        u: [c, s],
        sup_dev_off,
        min_on_omega,
        min_on_varpi,
        bump_degree: if certified { bump.degree() } else { 0 },
        c_empirical,
        orthogonality,
        truncation,
        nu_out,
        samples_per_region,
        bump_certified: certified,
        fallback_applied,
        bump_margin_omega: bump.margin_omega,
        bump_margin_off: bump.margin_off,
        g: if certified { bump.g } else { HoloFunction::zero() },
    };
    Ok((new, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(n: usize) -> LabyrinthSpec {
        LabyrinthSpec::new(n).unwrap()
    }

    fn pair_from(a: &[f64], b: &[f64]) -> HoloPair {
        HoloPair::new(HoloFunction::from_real(a), HoloFunction::from_real(b))
    }

    #[test]
    fn rotation_zero_when_both_components_large() {
        let s = spec(8);
        let p = pair_from(&[1.0], &[1.0]);
        let b = norm_bounds(&p, 64).unwrap();
        assert_eq!(choose_rotation(&p, &s, 3, &b).unwrap(), 0.0);
    }

    #[test]
    fn rotation_for_one_vanishing_component() {
        for n in [4, 8, 10] {
            let s = spec(n);
            let p = pair_from(&[2f64.sqrt()], &[0.0]);
            let b = norm_bounds(&p, 64).unwrap();
            for j in [1, n, 2 * n] {
                let t = choose_rotation(&p, &s, j, &b).unwrap();
                assert!((t.sin() - (2.0 / n as f64).sqrt()).abs() < 1e-15);
            }
        }
        // second component large, first vanishing: no exchange needed
        let s = spec(8);
        let p = pair_from(&[0.0], &[1.0]);
        let b = norm_bounds(&p, 64).unwrap();
        let t = choose_rotation(&p, &s, 5, &b).unwrap();
        assert!((t.sin() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn standard_targets_for_n10() {
        let t = BumpTargets::standard(10, 0.1, 1.0);
        assert_eq!(t.on_omega, 2.0e4);
        assert!((t.tol_omega - 0.005).abs() < 1e-18);
        assert!((t.tol_off - 0.1 / 200.0).abs() < 1e-18);
    }

    #[test]
    fn identity_target_gives_identity_bump() {
        let s = spec(8);
        let samples = RegionSamples::new(&s, 2, 4000).unwrap();
        let targets = BumpTargets { on_omega: 1.0, tol_omega: 1.0 / 128.0, tol_off: 1e-3 };
        let b = build_bump_on(&s, &samples, targets, &BUMP_DEGREES).unwrap();
        assert_eq!(b.g.coeffs(), &[Complex64::new(0.0, 0.0)]);
        assert_eq!(b.h.coeffs(), &[Complex64::new(1.0, 0.0)]);
        assert!(b.margin_omega > 0.0 && b.margin_off > 0.0);
    }

    #[test]
    fn standard_bump_exhausts_with_finite_margins() {
        let s = spec(8);
        let samples = RegionSamples::new(&s, 1, 20_000).unwrap();
        let targets = BumpTargets::standard(8, 0.05, 1.2);
        match build_bump_on(&s, &samples, targets, &BUMP_DEGREES) {
            Err(RungeError::Exhausted { margin_omega, margin_off, best_degree, .. }) => {
                assert!(margin_omega.is_finite() && margin_off.is_finite());
                assert!(margin_omega <= 0.0 || margin_off <= 0.0);
                assert!(BUMP_DEGREES.contains(&best_degree));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    #[ignore = "no polynomial of degree <= 512 meets both bump inequalities at N = 8 (see bump_exhaustion)"]
    fn certified_bump_n8_j1() {
        let s = spec(8);
        let b = build_bump(&s, 1, 0.05, 1.2).unwrap();
        assert!(b.margin_omega > 0.0 && b.margin_off > 0.0);
    }

    #[test]
    fn rotated_fit_matches_direct_geometry() {
        // g_j(z) = g_{2N}(z e^{-i alpha_j}): the fit is equivariant under rotation.
        let s = spec(6);
        let fits = fit_canonical(&s, &[32], 2.0);
        let g0 = rotated(&fits[0], 0.0, 32);
        let a = s.ray_angle(4);
        let g4 = rotated(&fits[0], a, 32);
        for k in 0..20 {
            let z = Complex64::from_polar(0.3 + 0.03 * k as f64, 0.7 * k as f64);
            let lhs = g4.eval_unchecked(z);
            let rhs = g0.eval_unchecked(z * Complex64::from_polar(1.0, -a));
            assert!((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn fit_is_least_squares_stationary() {
        // a degree-0 fit is the weighted mean of the targets
        let s = spec(4);
        let fits = fit_canonical(&s, &[0], 1.0);
        let mf = FIT_CIRCLE as f64;
        let total = mf + mf + mf + FIT_INTERIOR as f64;
        let excluded = (0..FIT_CIRCLE)
            .filter(|&k| {
                let z = Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / mf);
                s.dist_to_segment(z, 8) < s.band_halfwidth()
            })
            .count() as f64;
        let expect = mf / (total - excluded);
        assert!((fits[0][0].re - expect).abs() < 1e-9, "{} vs {expect}", fits[0][0].re);
    }

    #[test]
    fn huge_eps_identity_branch_keeps_pair() {
        let s = spec(8);
        let p = HoloPair::default_initial();
        let opts = RungeOptions { samples: 4000, omega_target: Some(1.0), ..Default::default() };
        let (q, cert) = modify_pair_with(&p, &s, 3, 1e6, &opts).unwrap();
        assert_eq!(q, p);
        assert_eq!(cert.orthogonality, 0.0);
        assert!(cert.bump_certified && !cert.fallback_applied);
        assert!(cert.margin_a() > 0.0);
    }

    #[test]
    fn fallback_records_failure() {
        let s = spec(8);
        let p = HoloPair::default_initial();
        let opts = RungeOptions { samples: 8000, fallback: BumpFallback::Identity, ..Default::default() };
        let (q, cert) = modify_pair_with(&p, &s, 1, 0.05, &opts).unwrap();
        assert_eq!(q, p);
        assert!(!cert.bump_certified && cert.fallback_applied);
        assert!(cert.passes_c());
        assert!(!cert.passes_b());
        let json = serde_json::to_string(&cert).unwrap();
        let back: RungeCertificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cert);
        let strict = RungeOptions { samples: 8000, ..Default::default() };
        assert!(matches!(modify_pair_with(&p, &s, 1, 0.05, &strict), Err(RungeError::Exhausted { .. })));
    }

    #[test]
    fn explicit_bump_is_orthogonal_and_exact() {
        // apply a hand-made bump directly through the same algebra
        let p = pair_from(&[1.0, 0.2], &[0.3, 0.0, 0.5]);
        let t = (0.25f64).sqrt().asin();
        let h = HoloFunction::from_real(&[1.5, 0.25, -0.125]);
        let (s, c) = t.sin_cos();
        let hat = rotate_pair(&p, t);
        let (d, _) = h.sub(&HoloFunction::from_real(&[1.0])).mul_truncated(&hat.phi2);
        let new = HoloPair::new(p.phi1.sub(&d.scale(Complex64::new(s, 0.0))), p.phi2.add(&d.scale(Complex64::new(c, 0.0))));
        // compare with R_{-t}(phi^_1, h phi^_2)
        let (hp2, _) = h.mul_truncated(&hat.phi2);
        let direct = rotate_pair(&HoloPair::new(hat.phi1.clone(), hp2), -t);
        assert!(new.sub(&direct).max_coeff() < 1e-14);
        let diff = p.sub(&new);
        let orth = diff.phi1.scale(Complex64::new(c, 0.0)).add(&diff.phi2.scale(Complex64::new(s, 0.0)));
        assert!(orth.max_coeff() < ORTHO_TOL);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn rotation_respects_sine_bound(a in -2.0f64..2.0, b in -2.0f64..2.0, c1 in -0.3f64..0.3, n in 4usize..14, j in 1usize..8) {
            let p = pair_from(&[a, c1], &[b]);
            prop_assume!(norm_bounds(&p, 64).is_ok());
            let bounds = norm_bounds(&p, 64).unwrap();
            let s = spec(n);
            let j = 1 + (j - 1) % (2 * n);
            let varpi = s.sample_region(Region::VarpiJ(j), 2000).unwrap();
            if let Ok(t) = choose_rotation_on(&p, n, j, &bounds, &varpi) {
                prop_assert!(t.sin() <= (2.0 / n as f64).sqrt() + 1e-15);
                prop_assert!((0.0..PI / 2.0).contains(&t));
                let thr = bounds.nu / (2.0 * (n as f64).sqrt());
                let (m1, m2) = component_mins(&rotate_pair(&p, t), &varpi);
                prop_assert!(m1 >= thr && m2 >= thr);
            }
        }
    }
}
