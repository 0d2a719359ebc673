//! The inductive construction `L_0 -> L_1 -> ... -> L_2N` and its numerical checks.
//!
//! Each step normalises at `zeta_j`, applies the diagonal gauge `a`, modifies the data
//! with the Runge step, re-integrates from `zeta_j` and returns
//! `L_j = a* E~(0)^{-1} E~ a`. Constants of the distance estimates are fitted per run
//! and reported; they are never assumed.

use crate::contact::{
    inv2, legendrian_residual, matrix_norm, ContactError, IntegratorOptions, LegendrianCurve, Mat2, SL2Value,
};
use crate::geometry::{
    foot_on_x2_axis, geodesic_distance_field, h3_distance, h3_point, intrinsic_radius_richardson, pair_radius,
    DistanceField, GeometryError, RadiusEstimate,
};
use crate::holo::{HoloFunction, HoloPair};
use crate::labyrinth::{LabyrinthError, LabyrinthSpec};
use crate::runge::{modify_pair_on, BumpFallback, RegionSamples, RungeCertificate, RungeError, RungeOptions};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

/// Fitted constants below this are reported as this value.
pub const NOISE_FLOOR: f64 = 1e-9;
/// Tolerance of `L_j(0) = id`.
pub const CENTER_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum KeyLemmaError {
    #[error(transparent)]
    Runge(#[from] RungeError),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Labyrinth(#[from] LabyrinthError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("sweep aborted after {} completed steps: {source}", partial.steps.len())]
    Sweep { partial: Box<IterationReport>, source: Box<KeyLemmaError> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationParams {
    pub n: usize,
    pub eps: f64,
    pub s: f64,
    pub rho0: f64,
    pub tau: f64,
}

impl IterationParams {
    pub fn new(n: usize, eps: f64, s: f64, rho0: f64, tau: f64) -> Result<Self, KeyLemmaError> {
        if n < 4 {
            return Err(KeyLemmaError::Params(format!("N = {n} is below 4")));
        }
        if !(eps > 0.0) {
            return Err(KeyLemmaError::Params(format!("eps = {eps} must be positive")));
        }
        if !(s > 0.0 && s < 1.0 / 3.0) {
            return Err(KeyLemmaError::Params(format!("s = {s} must lie in (0, 1/3)")));
        }
        if !(tau > SQRT_2) {
            return Err(KeyLemmaError::Params(format!("tau = {tau} must exceed sqrt 2")));
        }
        Ok(Self { n, eps, s, rho0, tau })
    }

    /// Parameters for `initial`: `rho0` is its measured radius, `tau` its grid sup (at least
    /// slightly above `sqrt 2`).
    pub fn for_curve(
        initial: &LegendrianCurve,
        n: usize,
        eps: f64,
        s: f64,
        resolution: usize,
    ) -> Result<Self, KeyLemmaError> {
        let rho0 = pair_radius(&initial.pair, resolution)?;
        let tau = initial.max_norm().max(SQRT_2 * (1.0 + 1e-12));
        Self::new(n, eps, s, rho0, tau)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub runge: RungeOptions,
    pub integrator: IntegratorOptions,
    /// Base resolution `R` of the distance solver; radii use `R` and `2R`.
    pub resolution: usize,
    /// Equispaced rays for boundary points `p` (tip rays are added).
    pub p_rays: usize,
    /// Radius of every `L_j` at resolution `R` (monotonicity diagnostic).
    pub step_radius: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            runge: RungeOptions { fallback: BumpFallback::Identity, ..RungeOptions::default() },
            integrator: IntegratorOptions::default(),
            resolution: 64,
            p_rays: 64,
            step_radius: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeRotation {
    pub t: f64,
    pub a: SL2Value,
}

impl GaugeRotation {
    pub fn new(t: f64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let a = Mat2::new(Complex64::from_polar(1.0, t), zero, zero, Complex64::from_polar(1.0, -t));
        Self { t, a: SL2Value::new(a).expect("diagonal unitary") }
    }

    pub fn matrix(&self) -> &Mat2 {
        self.a.matrix()
    }
}

/// `E_0(z) = L(zeta)^{-1} L(z)`, with the same data and `E_0(zeta) = id`.
pub fn normalize_at(curve: &LegendrianCurve, zeta: Complex64) -> Result<LegendrianCurve, ContactError> {
    let lz = curve.eval(zeta)?;
    let inv = inv2(&lz);
    let samples: Vec<Mat2> = curve.samples.iter().map(|m| inv * m).collect();
    let k = matrix_norm(&inv);
    let err = curve.integration_error * k * (1.0 + k * curve.max_norm());
    Ok(LegendrianCurve::from_samples(curve.pair.clone(), zeta, SL2Value::identity(), curve.grid, samples, err))
}

/// `a = diag(e^{it}, e^{-it})` with `t = -arg(xi_1 + i xi_2)/2`, so that `a f a*` has a
/// real non-negative off-diagonal.
pub fn diagonal_gauge(f0_at_0: &Mat2) -> GaugeRotation {
    let b = f0_at_0[(0, 1)];
    if b.norm() == 0.0 {
        return GaugeRotation::new(0.0);
    }
    GaugeRotation::new(-b.arg() / 2.0)
}

/// Data of `a X a*` when `X` has data `pair`: `theta -> e^{2it} theta`, `omega -> e^{-2it} omega`.
pub fn gauge_data(pair: &HoloPair, t: f64) -> HoloPair {
    let theta = pair.theta_fn().scale(Complex64::from_polar(1.0, 2.0 * t));
    let omega = pair.omega_fn().scale(Complex64::from_polar(1.0, -2.0 * t));
    HoloPair::from_forms(&theta, &omega)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub j: usize,
    pub zeta: [f64; 2],
    pub gauge_t: f64,
    /// `|Im (a f_0(0) a*)_{12}|`.
    pub gauge_residual: f64,
    pub certificate: RungeCertificate,
    /// `sup |phi_j - phi_{j-1}|` over the samples off `varpi_j`.
    pub c2_sup: f64,
    pub c2_bound: f64,
    pub min_on_omega: f64,
    pub min_on_varpi: f64,
    /// `|L_j(0) - id|`.
    pub center_deviation: f64,
    pub legendrian_left: f64,
    pub det_drift: f64,
    pub sup_norm: f64,
    pub integration_error: f64,
    /// Largest relative gap between `L_j` from the recipe and a direct integration of its data from 0.
    pub recipe_vs_direct: f64,
    pub radius: Option<f64>,
}

/// One step `L_{j-1} -> L_j` with default options.
pub fn step(
    prev: &LegendrianCurve,
    j: usize,
    params: &IterationParams,
    spec: &LabyrinthSpec,
) -> Result<(LegendrianCurve, StepRecord), KeyLemmaError> {
    step_with(prev, j, params, spec, &SweepOptions::default())
}

pub fn step_with(
    prev: &LegendrianCurve,
    j: usize,
    params: &IterationParams,
    spec: &LabyrinthSpec,
    opts: &SweepOptions,
) -> Result<(LegendrianCurve, StepRecord), KeyLemmaError> {
    let n = spec.n();
    let zeta = spec.base_point(j)?;
    let dev0 = matrix_norm(&(prev.center() - Mat2::identity()));
    if prev.base_point.norm() > 0.0 && dev0 > CENTER_TOL {
        return Err(KeyLemmaError::Precondition(format!("L_(j-1)(0) differs from id by {dev0:e}")));
    }
    let e0 = normalize_at(prev, zeta)?;
    let e00 = *e0.center();
    let f00 = e00 * e00.adjoint();
    let gauge = diagonal_gauge(&f00);
    let a = *gauge.matrix();
    let ad = a.adjoint();
    let gauge_residual = (a * f00 * ad)[(0, 1)].im.abs();

    let phi_e = gauge_data(&prev.pair, gauge.t);
    let samples = RegionSamples::new(spec, j, opts.runge.samples)?;
    let (phi_t, certificate) = modify_pair_on(&phi_e, spec, &samples, params.eps, &opts.runge)?;

    let et = crate::contact::integrate_with(&phi_t, zeta, SL2Value::identity(), prev.grid, &opts.integrator)?;
    let et0_inv = inv2(et.center());
    let lj: Vec<Mat2> = et.samples.iter().map(|m| ad * et0_inv * m * a).collect();
    let pair_j = gauge_data(&phi_t, -gauge.t);
    let k = matrix_norm(&et0_inv);
    let err = et.integration_error * k * (1.0 + k * et.max_norm());
    let curve = LegendrianCurve::from_samples(pair_j.clone(), Complex64::new(0.0, 0.0), SL2Value::identity(), prev.grid, lj, err);

    let direct =
        crate::contact::integrate_with(&pair_j, Complex64::new(0.0, 0.0), SL2Value::identity(), prev.grid, &opts.integrator)?;
    let recipe_vs_direct = curve
        .samples
        .iter()
        .zip(&direct.samples)
        .map(|(x, y)| matrix_norm(&(x - y)) / matrix_norm(y))
        .fold(0.0, f64::max);

    let nf = n as f64;
    let c2_sup = samples.off.iter().map(|&z| pair_j.sub(&prev.pair).norm_at(z)).fold(0.0, f64::max);
    let min_of = |pts: &[Complex64]| pts.iter().map(|&z| pair_j.norm_at(z)).fold(f64::INFINITY, f64::min);
    let record = StepRecord {
        j,
        zeta: [zeta.re, zeta.im],
        gauge_t: gauge.t,
        gauge_residual,
        certificate,
        c2_sup,
        c2_bound: params.eps / (2.0 * nf * nf),
        min_on_omega: min_of(&samples.omega),
        min_on_varpi: min_of(&samples.varpi),
        center_deviation: matrix_norm(&(curve.center() - Mat2::identity())),
        legendrian_left: legendrian_residual(&curve).left,
        det_drift: curve.max_det_drift(),
        sup_norm: curve.max_norm(),
        integration_error: curve.integration_error,
        recipe_vs_direct,
        radius: if opts.step_radius { Some(pair_radius(&pair_j, opts.resolution)?) } else { None },
    };
    Ok((curve, record))
}

/// A measured quantity against a bound `main + c * unit`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub measured: f64,
    pub main: f64,
    pub unit: f64,
    /// Smallest constant making the bound hold, floored at [`NOISE_FLOOR`].
    pub c_fit: f64,
}

impl Estimate {
    pub fn new(measured: f64, main: f64, unit: f64) -> Self {
        Self { measured, main, unit, c_fit: ((measured - main) / unit).max(NOISE_FLOOR) }
    }

    pub fn margin(&self, c: f64) -> f64 {
        self.main + c * self.unit - self.measured
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepEstimates {
    pub j: usize,
    /// `sup dist_H3(l_j, l_{j-1})` off `varpi_j` against `c1 eps/(2N^2)`.
    pub safe_est: Estimate,
    /// `|L_{j-1}(zeta_j)|^2` against `max|L_0|^2 (1 + c10/N)`.
    pub lemma31a: Estimate,
    /// `dist_H3(l_{j-1}(zeta_j), l_j(zeta_j))` against `c11/N^2`.
    pub lemma31b: Estimate,
    /// Boundary point of the measured geodesic disc inside `varpi_j`, if any.
    pub p: Option<[f64; 2]>,
    /// `dist(p^, p)` against `s + c3/sqrt N`.
    pub s_est: Option<Estimate>,
    /// `dist(zeta_j, p)` against `s + c9/sqrt N`.
    pub boundary: Option<Estimate>,
    /// `dist_H3(o, q)` against `2s + c13/sqrt N`.
    pub lemma32: Option<Estimate>,
    /// `dist_H3(q, f~(p))` against `14 s^2 + c16/sqrt N`.
    pub lemma33: Option<Estimate>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    pub c1: f64,
    pub c10: f64,
    pub c11: f64,
    pub c3: Option<f64>,
    pub c9: Option<f64>,
    pub c13: Option<f64>,
    pub c16: Option<f64>,
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl FittedConstants {
    pub fn from_estimates(est: &[StepEstimates]) -> Self {
        let mut f = Self::default();
        for e in est {
            f.c1 = f.c1.max(e.safe_est.c_fit);
            f.c10 = f.c10.max(e.lemma31a.c_fit);
            f.c11 = f.c11.max(e.lemma31b.c_fit);
            f.c3 = max_opt(f.c3, e.s_est.map(|x| x.c_fit));
            f.c9 = max_opt(f.c9, e.boundary.map(|x| x.c_fit));
            f.c13 = max_opt(f.c13, e.lemma32.map(|x| x.c_fit));
            f.c16 = max_opt(f.c16, e.lemma33.map(|x| x.c_fit));
        }
        f
    }

    /// Componentwise maximum.
    pub fn max(&self, o: &Self) -> Self {
        Self {
            c1: self.c1.max(o.c1),
            c10: self.c10.max(o.c10),
            c11: self.c11.max(o.c11),
            c3: max_opt(self.c3, o.c3),
            c9: max_opt(self.c9, o.c9),
            c13: max_opt(self.c13, o.c13),
            c16: max_opt(self.c16, o.c16),
        }
    }

    /// Named pairs `(name, value)` for the constants present.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("c1", self.c1), ("c10", self.c10), ("c11", self.c11)];
        for (name, x) in [("c3", self.c3), ("c9", self.c9), ("c13", self.c13), ("c16", self.c16)] {
            if let Some(x) = x {
                v.push((name, x));
            }
        }
        v
    }

    /// Smallest margin of all step estimates when the bounds use these constants.
    pub fn min_margin(&self, est: &[StepEstimates]) -> f64 {
        let mut m = f64::INFINITY;
        for e in est {
            m = m.min(e.safe_est.margin(self.c1)).min(e.lemma31a.margin(self.c10)).min(e.lemma31b.margin(self.c11));
            for (x, c) in [(e.s_est, self.c3), (e.boundary, self.c9), (e.lemma32, self.c13), (e.lemma33, self.c16)] {
                if let (Some(x), Some(c)) = (x, c) {
                    m = m.min(x.margin(c));
                }
            }
        }
        m
    }
}

/// Quantities of the final curve shared by all step estimates.
pub struct EstimateContext {
    pub final_pair: HoloPair,
    pub field: DistanceField,
    /// Radius of the geodesic circle on which boundary points are taken.
    pub circle_radius: f64,
    /// Boundary points, tip rays first.
    pub points: Vec<Complex64>,
    pub max_l0: f64,
    pub resolution: usize,
}

/// First point along the ray at angle `alpha` where `field` reaches `r`, by bisection.
fn ray_crossing(field: &DistanceField, alpha: f64, r: f64) -> Complex64 {
    let dir = Complex64::from_polar(1.0, alpha);
    if field.value_at(dir) <= r {
        return dir;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if field.value_at(dir * mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    dir * hi
}

impl EstimateContext {
    pub fn new(
        initial: &LegendrianCurve,
        last: &LegendrianCurve,
        spec: &LabyrinthSpec,
        params: &IterationParams,
        final_radius: f64,
        resolution: usize,
        rays: usize,
    ) -> Result<Self, KeyLemmaError> {
        let pair = last.pair.clone();
        let field = geodesic_distance_field(|z| pair.norm_at(z), Complex64::new(0.0, 0.0), resolution)?;
        let circle_radius = (params.rho0 + params.s).min(final_radius);
        let n = spec.n();
        let mut points: Vec<Complex64> = (1..=2 * n).map(|j| ray_crossing(&field, spec.ray_angle(j), circle_radius)).collect();
        points.extend((0..rays).map(|k| ray_crossing(&field, 2.0 * PI * (k as f64 + 0.5) / rays as f64, circle_radius)));
        Ok(Self { final_pair: pair, field, circle_radius, points, max_l0: initial.max_norm(), resolution })
    }

    /// The boundary point on the tip ray of `j` when it lies in `varpi_j`.
    pub fn point_in_varpi(&self, spec: &LabyrinthSpec, j: usize) -> Option<Complex64> {
        let p = self.points[j - 1];
        (spec.dist_to_segment(p, j) < spec.band_halfwidth()).then_some(p)
    }
}

/// `p^`: where the computed geodesic from the origin to `p` first enters `varpi_j`.
fn entry_point(field: &DistanceField, spec: &LabyrinthSpec, j: usize, p: Complex64) -> Complex64 {
    let mut path = field.geodesic_to(p);
    path.push(p);
    let delta = spec.band_halfwidth();
    let inside = |z: Complex64| spec.dist_to_segment(z, j) < delta;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        if inside(a) {
            return a;
        }
        if inside(b) {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(a + (b - a) * mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return a + (b - a) * hi;
        }
    }
    p
}

/// Measured quantities of the distance estimates for the step `prev -> next`.
pub fn verify_step_estimates(
    prev: &LegendrianCurve,
    next: &LegendrianCurve,
    j: usize,
    spec: &LabyrinthSpec,
    params: &IterationParams,
    ctx: &EstimateContext,
) -> Result<StepEstimates, KeyLemmaError> {
    let n = spec.n();
    let nf = n as f64;
    let s = params.s;
    let delta = spec.band_halfwidth();
    let zeta = spec.base_point(j)?;

    let mut safe: f64 = 0.0;
    for (idx, z) in prev.grid.nodes() {
        if spec.dist_to_segment(z, j) >= delta {
            safe = safe.max(h3_distance(&h3_point(&next.samples[idx]), &h3_point(&prev.samples[idx])));
        }
    }
    let safe_est = Estimate::new(safe, 0.0, params.eps / (2.0 * nf * nf));

    let lprev = prev.eval(zeta)?;
    let lnext = next.eval(zeta)?;
    let m2 = ctx.max_l0 * ctx.max_l0;
    let lemma31a = Estimate::new(matrix_norm(&lprev).powi(2), m2, m2 / nf);
    let lemma31b = Estimate::new(h3_distance(&h3_point(&lprev), &h3_point(&lnext)), 0.0, 1.0 / (nf * nf));

    let mut out = StepEstimates {
        j,
        safe_est,
        lemma31a,
        lemma31b,
        p: None,
        s_est: None,
        boundary: None,
        lemma32: None,
        lemma33: None,
    };
    let Some(p) = ctx.point_in_varpi(spec, j) else {
        return Ok(out);
    };
    out.p = Some([p.re, p.im]);
    let unit = 1.0 / nf.sqrt();
    let phat = entry_point(&ctx.field, spec, j, p);
    let d_hat = (ctx.field.value_at(p) - ctx.field.value_at(phat)).max(0.0);
    out.s_est = Some(Estimate::new(d_hat, s, unit));

    let pair = &ctx.final_pair;
    let zfield = geodesic_distance_field(|z| pair.norm_at(z), zeta, ctx.resolution)?;
    out.boundary = Some(Estimate::new(zfield.value_at(p), s, unit));

    // E~ = a L_j(zeta)^{-1} L_j a*, with a recomputed from L_{j-1}
    let e00 = inv2(&lprev);
    let gauge = diagonal_gauge(&(e00 * e00.adjoint()));
    let a = *gauge.matrix();
    let etp = a * inv2(&lnext) * next.eval(p)? * a.adjoint();
    let foot = foot_on_x2_axis(&h3_point(&etp));
    out.lemma32 = Some(Estimate::new(foot.along, 2.0 * s, unit));
    out.lemma33 = Some(Estimate::new(foot.across, 14.0 * s * s, unit));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainLemmaMargins {
    /// `|Y(0) - id|`.
    pub identity: f64,
    /// `radius(Y) - (radius(X) + s)`.
    pub radius: f64,
    /// Richardson error of the two radii combined.
    pub radius_error: f64,
    /// `tau sqrt(1 + 32 s^2 + eps) - sup |Y|`.
    pub bound: f64,
    /// `eps - sup over D_{1-eps} of max(|Y - X|, |phi_Y - phi_X|)`.
    pub approximation: f64,
}

pub fn verify_main_lemma(
    x: &LegendrianCurve,
    y: &LegendrianCurve,
    params: &IterationParams,
    resolution: usize,
) -> Result<MainLemmaMargins, KeyLemmaError> {
    let (rx, _) = intrinsic_radius_richardson(&x.pair, resolution)?;
    let (ry, _) = intrinsic_radius_richardson(&y.pair, resolution)?;
    main_lemma_margins(x, y, params, &rx, &ry)
}

fn main_lemma_margins(
    x: &LegendrianCurve,
    y: &LegendrianCurve,
    params: &IterationParams,
    rx: &RadiusEstimate,
    ry: &RadiusEstimate,
) -> Result<MainLemmaMargins, KeyLemmaError> {
    if x.grid != y.grid {
        return Err(KeyLemmaError::Precondition("curves on different grids".into()));
    }
    let eps = params.eps;
    let mut gap: f64 = 0.0;
    for (idx, z) in x.grid.nodes() {
        if z.norm() < 1.0 - eps {
            let dm = matrix_norm(&(y.samples[idx] - x.samples[idx]));
            let dp = y.pair.sub(&x.pair).norm_at(z);
            gap = gap.max(dm).max(dp);
        }
    }
    Ok(MainLemmaMargins {
        identity: matrix_norm(&(y.center() - Mat2::identity())),
        radius: ry.radius - (rx.radius + params.s),
        radius_error: rx.richardson + ry.richardson,
        bound: params.tau * (1.0 + 32.0 * params.s * params.s + eps).sqrt() - y.max_norm(),
        approximation: eps - gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub params: IterationParams,
    pub steps: Vec<StepRecord>,
    pub estimates: Vec<StepEstimates>,
    pub initial_radius: Option<RadiusEstimate>,
    pub final_radius: Option<RadiusEstimate>,
    /// `radius(L_2N) - radius(L_0) - s`.
    pub radius_margin: Option<f64>,
    /// Combined Richardson error of the two radii.
    pub radius_delta: Option<f64>,
    pub circle_radius: Option<f64>,
    pub sup_initial: f64,
    pub sup_final: Option<f64>,
    /// `sup |L_2N|` over grid nodes inside the measured geodesic disc.
    pub sup_final_disc: Option<f64>,
    /// `sqrt N ((sup/max|L_0|)^2 - 1 - 32 s^2)`, the smallest admissible `b`.
    pub b_needed: Option<f64>,
    pub b_empirical: Option<f64>,
    /// `min_j min(min_omega / N^3.5, min_varpi sqrt N)`.
    pub c_empirical: Option<f64>,
    pub c2_holds: bool,
    pub all_bumps_certified: bool,
    pub fitted: Option<FittedConstants>,
    pub complete: bool,
}

impl IterationReport {
    fn new(params: IterationParams, sup_initial: f64) -> Self {
        Self {
            params,
            steps: Vec::new(),
            estimates: Vec::new(),
            initial_radius: None,
            final_radius: None,
            radius_margin: None,
            radius_delta: None,
            circle_radius: None,
            sup_initial,
            sup_final: None,
            sup_final_disc: None,
            b_needed: None,
            b_empirical: None,
            c_empirical: None,
            c2_holds: true,
            all_bumps_certified: true,
            fitted: None,
            complete: false,
        }
    }

    /// Every step's certificate passes (a), (b), (c).
    pub fn all_certificates_pass(&self) -> bool {
        self.complete && self.steps.iter().all(|s| s.certificate.passes())
    }
}

pub fn sweep(
    initial: &LegendrianCurve,
    params: &IterationParams,
) -> Result<(Vec<LegendrianCurve>, IterationReport), KeyLemmaError> {
    sweep_with(initial, params, &SweepOptions::default())
}

/// Runs `step` for `j = 1..2N` and fills the report; curves returned are `L_1..L_2N`.
pub fn sweep_with(
    initial: &LegendrianCurve,
    params: &IterationParams,
    opts: &SweepOptions,
) -> Result<(Vec<LegendrianCurve>, IterationReport), KeyLemmaError> {
    let spec = LabyrinthSpec::new(params.n)?;
    let n = params.n;
    let nf = n as f64;
    let mut report = IterationReport::new(*params, initial.max_norm());
    let dev0 = matrix_norm(&(initial.center() - Mat2::identity()));
    if dev0 > CENTER_TOL {
        return Err(KeyLemmaError::Precondition(format!("initial(0) differs from id by {dev0:e}")));
    }
    let (r0, _) = intrinsic_radius_richardson(&initial.pair, opts.resolution)?;
    if r0.radius + 3.0 * r0.richardson < params.rho0 {
        return Err(KeyLemmaError::Precondition(format!("radius {} is below rho0 = {}", r0.radius, params.rho0)));
    }
    report.initial_radius = Some(r0);

    let mut curves: Vec<LegendrianCurve> = Vec::with_capacity(2 * n);
    for j in 1..=2 * n {
        let prev = curves.last().unwrap_or(initial);
        match step_with(prev, j, params, &spec, opts) {
            Ok((c, rec)) => {
                report.c2_holds &= rec.c2_sup < rec.c2_bound;
                report.all_bumps_certified &= rec.certificate.bump_certified;
                report.steps.push(rec);
                curves.push(c);
            }
            Err(e) => return Err(KeyLemmaError::Sweep { partial: Box::new(report), source: Box::new(e) }),
        }
    }
    let last = curves.last().expect("2N >= 8 steps");
    let (r1, _) = intrinsic_radius_richardson(&last.pair, opts.resolution)?;
    report.final_radius = Some(r1);
    report.radius_margin = Some(r1.radius - r0.radius - params.s);
    report.radius_delta = Some(r0.richardson + r1.richardson);

    let ctx = EstimateContext::new(initial, last, &spec, params, r1.radius, opts.resolution, opts.p_rays)?;
    report.circle_radius = Some(ctx.circle_radius);
    for j in 1..=2 * n {
        let prev = if j == 1 { initial } else { &curves[j - 2] };
        report.estimates.push(verify_step_estimates(prev, &curves[j - 1], j, &spec, params, &ctx)?);
    }
    report.fitted = Some(FittedConstants::from_estimates(&report.estimates));

    let mut disc: f64 = 0.0;
    for (idx, z) in last.grid.nodes() {
        if ctx.field.value_at(z) <= ctx.circle_radius {
            disc = disc.max(matrix_norm(&last.samples[idx]));
        }
    }
    let ratio = disc / report.sup_initial;
    let b = nf.sqrt() * (ratio * ratio - 1.0 - 32.0 * params.s * params.s);
    report.sup_final = Some(last.max_norm());
    report.sup_final_disc = Some(disc);
    report.b_needed = Some(b);
    report.b_empirical = Some(b.max(NOISE_FLOOR));
    report.c_empirical = report
        .steps
        .iter()
        .map(|s| (s.min_on_omega / nf.powf(3.5)).min(s.min_on_varpi * nf.sqrt()))
        .reduce(f64::min);
    report.complete = true;
    Ok((curves, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub k: usize,
    pub eps: f64,
    pub s: f64,
    pub tau_in: f64,
    /// `tau_in sqrt(1 + 32 s^2 + eps)`.
    pub tau_out: f64,
    pub sup_norm: f64,
    /// Largest Poincare-ball radius of `L L*` over the grid.
    pub ball_radius: f64,
    /// `max |L^(k+1) - L^(k)|` over grid nodes with `|z| <= 1/2`.
    pub cauchy: f64,
    pub main: MainLemmaMargins,
    pub report: IterationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundsReport {
    pub rounds: Vec<RoundRecord>,
    pub below_composed: bool,
    pub ball_margin: f64,
}

/// Largest Poincare-ball radius of the flat front of `curve` over its grid.
pub fn ball_radius(curve: &LegendrianCurve) -> f64 {
    curve
        .samples
        .iter()
        .map(|m| {
            let b = h3_point(m).poincare_ball();
            (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Main-Lemma rounds with `eps_k = eps/2^k`, `s_k = s/2^k` at fixed `N`; each round is a sweep.
pub fn run_rounds(
    initial: &LegendrianCurve,
    params: &IterationParams,
    rounds: usize,
    opts: &SweepOptions,
) -> Result<(Vec<LegendrianCurve>, RoundsReport), KeyLemmaError> {
    if rounds == 0 {
        return Err(KeyLemmaError::Params("rounds must be at least 1".into()));
    }
    let mut cur = initial.clone();
    let mut tau = params.tau;
    let mut rho = params.rho0;
    let mut out = Vec::with_capacity(rounds);
    let mut records = Vec::with_capacity(rounds);
    for k in 0..rounds {
        let scale = 0.5f64.powi(k as i32);
        let p = IterationParams { n: params.n, eps: params.eps * scale, s: params.s * scale, rho0: rho, tau };
        let (curves, report) = sweep_with(&cur, &p, opts)?;
        let next = curves.into_iter().last().expect("non-empty sweep");
        let rx = report.initial_radius.expect("complete report");
        let ry = report.final_radius.expect("complete report");
        let main = main_lemma_margins(&cur, &next, &p, &rx, &ry)?;
        let mut cauchy: f64 = 0.0;
        for (idx, z) in cur.grid.nodes() {
            if z.norm() <= 0.5 {
                cauchy = cauchy.max(matrix_norm(&(next.samples[idx] - cur.samples[idx])));
            }
        }
        let tau_out = tau * (1.0 + 32.0 * p.s * p.s + p.eps).sqrt();
        records.push(RoundRecord {
            k,
            eps: p.eps,
            s: p.s,
            tau_in: tau,
            tau_out,
            sup_norm: next.max_norm(),
            ball_radius: ball_radius(&next),
            cauchy,
            main,
            report,
        });
        tau = tau_out;
        rho = ry.radius;
        cur = next.clone();
        out.push(next);
    }
    let below_composed = records.iter().all(|r| r.sup_norm <= r.tau_out);
    let ball_margin = 1.0 - records.iter().map(|r| r.ball_radius).fold(0.0, f64::max);
    Ok((out, RoundsReport { rounds: records, below_composed, ball_margin }))
}

/// Default initial curve: data `(1, z/2)`, `L(0) = id`, on `grid`.
pub fn default_initial_curve(grid: crate::contact::PolarGrid) -> Result<LegendrianCurve, ContactError> {
    crate::contact::integrate(&HoloPair::default_initial(), Complex64::new(0.0, 0.0), SL2Value::identity(), grid)
}

/// Helper for tests and configs: the constant pair `(a, b)`.
pub fn constant_pair(a: Complex64, b: Complex64) -> HoloPair {
    HoloPair::new(HoloFunction::constant(a), HoloFunction::constant(b))
}
