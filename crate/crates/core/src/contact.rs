//! SL(2,C) values, the Legendrian ODE `X' = X M_phi`, contact residuals and the
//! Darboux correspondence with C^3.

use crate::holo::{matrix_form, HoloError, HoloFunction, HoloPair};
use nalgebra::Matrix2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use thiserror::Error;

pub type Mat2 = Matrix2<Complex64>;

pub const DET_TOL: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 1e-12;
const SNAPSHOT_MAGIC: &str = "legendrian-curve";

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("determinant {det} is not 1 within {tol:e}")]
    NotSpecialLinear { det: Complex64, tol: f64 },
    #[error("step size underflow at z = {at} (h = {h:e})")]
    StepUnderflow { at: Complex64, h: f64 },
    #[error("tolerance not met after {steps} steps")]
    ToleranceNotMet { steps: usize },
    #[error("overflow guard: |Re z| = {0} > 300")]
    Overflow(f64),
    #[error("principal branch violated at m11 = {m11} (sup |log m11| so far {sup_log:.3})")]
    Branch { m11: Complex64, sup_log: f64 },
    #[error("value is not in the image of the Darboux map (mismatch {0:e})")]
    Consistency(f64),
    #[error("grid must have at least 2 radii and 4 angles")]
    BadGrid,
    #[error(transparent)]
    Holo(#[from] HoloError),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A 2x2 complex matrix with determinant 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SL2Value(Mat2);

impl SL2Value {
    pub fn new(m: Mat2) -> Result<Self, ContactError> {
        let det = m.determinant();
        if (det - 1.0).norm() > DET_TOL {
            return Err(ContactError::NotSpecialLinear { det, tol: DET_TOL });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Mat2::identity())
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Frobenius norm `sqrt(trace(A A*))`.
pub fn matrix_norm(a: &Mat2) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Inverse of a matrix with determinant close to 1 (adjugate over determinant).
pub fn inv2(a: &Mat2) -> Mat2 {
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    Mat2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det
}

fn max_abs(a: &Mat2) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Polar sampling grid: radii `i/(radii-1)` and angles `2 pi k / angles`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub radii: usize,
    pub angles: usize,
}

impl Default for PolarGrid {
    fn default() -> Self {
        Self { radii: 51, angles: 200 }
    }
}

impl PolarGrid {
    pub fn len(&self) -> usize {
        self.radii * self.angles
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radius(&self, i: usize) -> f64 {
        i as f64 / (self.radii - 1) as f64
    }

    pub fn angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.angles as f64
    }

    pub fn node(&self, i: usize, k: usize) -> Complex64 {
        Complex64::from_polar(self.radius(i), self.angle(k))
    }

    pub fn index(&self, i: usize, k: usize) -> usize {
        i * self.angles + k
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (0..self.radii).flat_map(move |i| (0..self.angles).map(move |k| (self.index(i, k), self.node(i, k))))
    }

    fn validate(&self) -> Result<(), ContactError> {
        if self.radii < 2 || self.angles < 4 {
            return Err(ContactError::BadGrid);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Local error tolerance per unit path length.
    pub tol: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Every `check_stride`-th spoke is re-integrated at `tol/32` for the error estimate.
    pub check_stride: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, h_min: 1e-12, max_steps: 2_000_000, check_stride: 4 }
    }
}

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const CS: [f64; 6] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0];

fn comb(ks: &[&Mat2], w: &[f64], h: f64) -> Mat2 {
    let mut acc = Mat2::zeros();
    for (k, &a) in ks.iter().zip(w) {
        if a != 0.0 {
            acc += *k * Complex64::new(a * h, 0.0);
        }
    }
    acc
}

/// Transports `y0` along the straight segment `z0 -> z1` by `y' = y M_phi dz`.
/// Returns the end value and the number of accepted steps.
pub fn transport(
    pair: &HoloPair,
    y0: Mat2,
    z0: Complex64,
    z1: Complex64,
    opts: &IntegratorOptions,
) -> Result<(Mat2, usize), ContactError> {
    let dz = z1 - z0;
    let len = dz.norm();
    if len == 0.0 {
        return Ok((y0, 0));
    }
    let f = |s: f64, y: &Mat2| -> Mat2 { y * matrix_form(pair, z0 + dz * s) * dz };
    let mut s = 0.0;
    let mut y = y0;
    let mut h = (0.02 / len).min(1.0);
    let mut k1 = f(0.0, &y);
    let mut steps = 0;
    let mut tries = 0;
    while s < 1.0 {
        tries += 1;
        if tries > opts.max_steps {
            return Err(ContactError::ToleranceNotMet { steps });
        }
        let last = s + h >= 1.0;
        if last {
            h = 1.0 - s;
        }
        let k2 = f(s + CS[1] * h, &(y + comb(&[&k1], &A2, h)));
        let k3 = f(s + CS[2] * h, &(y + comb(&[&k1, &k2], &A3, h)));
        let k4 = f(s + CS[3] * h, &(y + comb(&[&k1, &k2, &k3], &A4, h)));
        let k5 = f(s + CS[4] * h, &(y + comb(&[&k1, &k2, &k3, &k4], &A5, h)));
        let k6 = f(s + h, &(y + comb(&[&k1, &k2, &k3, &k4, &k5], &A6, h)));
        let y5 = y + comb(&[&k1, &k2, &k3, &k4, &k5, &k6], &B, h);
        let k7 = f(s + h, &y5);
        let err = comb(&[&k1, &k2, &k3, &k4, &k5, &k6, &k7], &E, h);
        let scale = opts.tol * h * len * max_abs(&y).max(1.0);
        let en = max_abs(&err) / scale;
        if en <= 1.0 {
            s = if last { 1.0 } else { s + h };
            y = y5;
            k1 = k7;
            steps += 1;
        }
        h *= if !en.is_finite() {
            0.2
        } else if en == 0.0 {
            5.0
        } else {
            (0.9 * en.powf(-0.25)).clamp(0.2, 5.0)
        };
        if h * len < opts.h_min && s < 1.0 {
            return Err(ContactError::StepUnderflow { at: z0 + dz * s, h: h * len });
        }
    }
    Ok((y, steps))
}

/// Grid-sampled solution of `X^{-1} X' = M_phi` with `X(base_point) = base_value`.
#[derive(Clone, Debug, PartialEq)]
pub struct LegendrianCurve {
    pub pair: HoloPair,
    pub base_point: Complex64,
    pub base_value: SL2Value,
    pub grid: PolarGrid,
    pub samples: Vec<Mat2>,
    pub integration_error: f64,
}

struct SpokeRun {
    samples: Vec<Mat2>,
    max_steps: usize,
}

fn integrate_spokes(
    pair: &HoloPair,
    base_point: Complex64,
    base_value: &Mat2,
    grid: &PolarGrid,
    opts: &IntegratorOptions,
    only: Option<usize>,
) -> Result<SpokeRun, ContactError> {
    let zero = Complex64::new(0.0, 0.0);
    let (center, mut max_steps) = transport(pair, *base_value, base_point, zero, opts)?;
    let mut samples = vec![Mat2::zeros(); grid.len()];
    let base_steps = max_steps;
    for k in 0..grid.angles {
        if let Some(stride) = only {
            if k % stride != 0 {
                continue;
            }
        }
        let mut y = center;
        let mut z = zero;
        let mut steps = base_steps;
        samples[grid.index(0, k)] = center;
        for i in 1..grid.radii {
            let zn = grid.node(i, k);
            let (yn, st) = transport(pair, y, z, zn, opts)?;
            steps += st;
            y = yn;
            z = zn;
            samples[grid.index(i, k)] = y;
        }
        max_steps = max_steps.max(steps);
    }
    Ok(SpokeRun { samples, max_steps })
}

/// Integrates the Legendrian ODE on a polar grid: base point to the centre, then out
/// along every spoke. The error estimate compares every `check_stride`-th spoke with a
/// run at `tol/32` and is floored by the accumulated rounding bound.
pub fn integrate(
    pair: &HoloPair,
    base_point: Complex64,
    base_value: SL2Value,
    grid: PolarGrid,
) -> Result<LegendrianCurve, ContactError> {
    integrate_with(pair, base_point, base_value, grid, &IntegratorOptions::default())
}

pub fn integrate_with(
    pair: &HoloPair,
    base_point: Complex64,
    base_value: SL2Value,
    grid: PolarGrid,
    opts: &IntegratorOptions,
) -> Result<LegendrianCurve, ContactError> {
    grid.validate()?;
    if base_point.norm() > 1.0 + crate::holo::DOMAIN_SLACK {
        return Err(HoloError::Domain(base_point).into());
    }
    let run = integrate_spokes(pair, base_point, base_value.matrix(), &grid, opts, None)?;
    let fine_opts = IntegratorOptions { tol: opts.tol / 32.0, ..*opts };
    let stride = opts.check_stride.max(1);
    let fine = integrate_spokes(pair, base_point, base_value.matrix(), &grid, &fine_opts, Some(stride))?;
    let mut diff: f64 = 0.0;
    let mut big: f64 = 1.0;
    for i in 0..grid.radii {
        for k in (0..grid.angles).step_by(stride) {
            let idx = grid.index(i, k);
            diff = diff.max(max_abs(&(run.samples[idx] - fine.samples[idx])));
        }
    }
    for m in &run.samples {
        big = big.max(matrix_norm(m));
    }
    let rounding = 8.0 * f64::EPSILON * run.max_steps.max(1) as f64 * big * big;
    Ok(LegendrianCurve {
        pair: pair.clone(),
        base_point,
        base_value,
        grid,
        samples: run.samples,
        integration_error: diff.max(rounding),
    })
}

impl LegendrianCurve {
    /// Builds a curve from precomputed samples (used by gauge and normalization steps).
    pub fn from_samples(
        pair: HoloPair,
        base_point: Complex64,
        base_value: SL2Value,
        grid: PolarGrid,
        samples: Vec<Mat2>,
        integration_error: f64,
    ) -> Self {
        assert_eq!(samples.len(), grid.len());
        Self { pair, base_point, base_value, grid, samples, integration_error }
    }

    pub fn value(&self, i: usize, k: usize) -> &Mat2 {
        &self.samples[self.grid.index(i, k)]
    }

    pub fn center(&self) -> &Mat2 {
        self.value(0, 0)
    }

    /// Largest `|X|` over the grid.
    pub fn max_norm(&self) -> f64 {
        self.samples.iter().map(matrix_norm).fold(0.0, f64::max)
    }

    pub fn max_det_drift(&self) -> f64 {
        self.samples.iter().map(|m| (m.determinant() - 1.0).norm()).fold(0.0, f64::max)
    }

    /// Grid node nearest to `z` (closed disk only).
    pub fn nearest_node(&self, z: Complex64) -> (usize, usize) {
        let g = &self.grid;
        let i = (z.norm().min(1.0) * (g.radii - 1) as f64).round() as usize;
        let k = ((z.arg().rem_euclid(2.0 * PI) / (2.0 * PI)) * g.angles as f64).round() as usize % g.angles;
        (i, k)
    }

    /// `X(z)` by transport from the nearest grid node.
    pub fn eval(&self, z: Complex64) -> Result<Mat2, ContactError> {
        if z.norm() > 1.0 + crate::holo::DOMAIN_SLACK {
            return Err(HoloError::Domain(z).into());
        }
        let (i, k) = self.nearest_node(z);
        let (y, _) = transport(&self.pair, *self.value(i, k), self.grid.node(i, k), z, &IntegratorOptions::default())?;
        Ok(y)
    }

    /// `X'(z) = X(z) M_phi(z)` at a grid node.
    pub fn derivative_at(&self, i: usize, k: usize) -> Mat2 {
        self.value(i, k) * matrix_form(&self.pair, self.grid.node(i, k))
    }

    /// Writes the JSON header line followed by the little-endian f64 payload.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<(), ContactError> {
        let header = SnapshotHeader {
            format: SNAPSHOT_MAGIC.to_string(),
            version: 1,
            pair: self.pair.clone(),
            base_point: [self.base_point.re, self.base_point.im],
            base_value: mat_to_array(self.base_value.matrix()),
            grid: self.grid,
            integration_error: self.integration_error,
            node_count: self.samples.len(),
        };
        let line = serde_json::to_string(&header).map_err(|e| ContactError::Format(e.to_string()))?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.samples.len() * 64);
        for m in &self.samples {
            // row-major entries m11, m12, m21, m22, each as re, im
            for z in [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]] {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, ContactError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| ContactError::Format("missing header".into()))?;
        let header: SnapshotHeader =
            serde_json::from_slice(&bytes[..nl]).map_err(|e| ContactError::Format(e.to_string()))?;
        if header.format != SNAPSHOT_MAGIC || header.version != 1 {
            return Err(ContactError::Format(format!("unknown format {} v{}", header.format, header.version)));
        }
        header.grid.validate()?;
        let payload = &bytes[nl + 1..];
        if header.node_count != header.grid.len() || payload.len() != header.node_count * 64 {
            return Err(ContactError::Format("payload size does not match grid".into()));
        }
        let samples = payload
            .chunks_exact(64)
            .map(|ch| {
                let f = |o: usize| f64::from_le_bytes(ch[o..o + 8].try_into().unwrap());
                Mat2::new(c(f(0), f(8)), c(f(16), f(24)), c(f(32), f(40)), c(f(48), f(56)))
            })
            .collect();
        // the base value is stored as written; validity is a verification concern
        let base_value = SL2Value(array_to_mat(&header.base_value));
        Ok(Self {
            pair: header.pair,
            base_point: c(header.base_point[0], header.base_point[1]),
            base_value,
            grid: header.grid,
            samples,
            integration_error: header.integration_error,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    format: String,
    version: u32,
    pair: HoloPair,
    base_point: [f64; 2],
    base_value: [[f64; 2]; 4],
    grid: PolarGrid,
    integration_error: f64,
    node_count: usize,
}

pub fn mat_to_array(m: &Mat2) -> [[f64; 2]; 4] {
    let e = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
    e.map(|z| [z.re, z.im])
}

pub fn array_to_mat(a: &[[f64; 2]; 4]) -> Mat2 {
    Mat2::new(c(a[0][0], a[0][1]), c(a[1][0], a[1][1]), c(a[2][0], a[2][1]), c(a[3][0], a[3][1]))
}

/// Contact residuals of an SL(2,C) curve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LegendrianResidual {
    /// sup of the norm of the diagonal part of `X^{-1} X'`.
    pub left: f64,
    /// sup of `|x11 dx22 - x12 dx21|` pulled back by the transpose of `X`; equals the
    /// (1,1) entry of `X^{-1} X'` up to sign.
    pub omega_sl: f64,
}

/// Norm of the diagonal part of `X^{-1} X'`.
pub fn left_diagonal_density(x: &Mat2, dx: &Mat2) -> f64 {
    let p = inv2(x) * dx;
    (p[(0, 0)].norm_sqr() + p[(1, 1)].norm_sqr()).sqrt()
}

/// `|x11 x22' - x12 x21'|`, the pullback density of the contact form of SL(2,C).
pub fn omega_sl_density(x: &Mat2, dx: &Mat2) -> f64 {
    (x[(0, 0)] * dx[(1, 1)] - x[(0, 1)] * dx[(1, 0)]).norm()
}

pub fn legendrian_residual(curve: &LegendrianCurve) -> LegendrianResidual {
    let mut r = LegendrianResidual::default();
    for i in 0..curve.grid.radii {
        for k in 0..curve.grid.angles {
            let x = curve.value(i, k);
            let dx = curve.derivative_at(i, k);
            r.left = r.left.max(left_diagonal_density(x, &dx));
            r.omega_sl = r.omega_sl.max(omega_sl_density(&x.transpose(), &dx.transpose()));
        }
    }
    r
}

/// Residuals of an arbitrary SL(2,C)-valued map given with its derivative.
pub fn sl2_map_residual<F: Fn(Complex64) -> (Mat2, Mat2)>(f: F, grid: &PolarGrid) -> LegendrianResidual {
    let mut r = LegendrianResidual::default();
    for (_, z) in grid.nodes() {
        let (x, dx) = f(z);
        r.left = r.left.max(left_diagonal_density(&x, &dx));
        r.omega_sl = r.omega_sl.max(omega_sl_density(&x, &dx));
    }
    r
}

/// Finite-difference cross-check of `X' = X M_phi`: the largest mismatch between a central
/// difference of `eval` and the analytic derivative, over every `stride`-th node of
/// radius below 1 - h.
pub fn fd_cross_check(curve: &LegendrianCurve, h: f64, stride: usize) -> Result<f64, ContactError> {
    let mut worst: f64 = 0.0;
    let g = curve.grid;
    for i in (1..g.radii - 1).step_by(stride.max(1)) {
        for k in (0..g.angles).step_by(stride.max(1)) {
            let z = g.node(i, k);
            if z.norm() + h > 1.0 {
                continue;
            }
            let fd = (curve.eval(z + h)? - curve.eval(z - h)?) / c(2.0 * h, 0.0);
            let an = curve.derivative_at(i, k);
            worst = worst.max(max_abs(&(fd - an)) / matrix_norm(curve.value(i, k)).max(1.0));
        }
    }
    Ok(worst)
}

/// The conformal factor `|phi(z)|` of the induced metric.
pub fn induced_metric_density(pair: &HoloPair, z: Complex64) -> f64 {
    pair.norm_at(z)
}

/// A curve in C^3 written as `(F, G, H)`, Legendrian when `dH = -F dG`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C3Curve {
    pub f: HoloFunction,
    pub g: HoloFunction,
    pub h: HoloFunction,
}

impl C3Curve {
    pub fn eval(&self, z: Complex64) -> [Complex64; 3] {
        [self.g.eval_unchecked(z), self.f.eval_unchecked(z), self.h.eval_unchecked(z)]
    }
}

/// sup over the default polar grid of `|H' + F G'|`.
pub fn contact_pullback_c3(curve: &C3Curve) -> f64 {
    contact_pullback_c3_on(curve, &PolarGrid::default())
}

pub fn contact_pullback_c3_on(curve: &C3Curve, grid: &PolarGrid) -> f64 {
    let dg = curve.g.derivative();
    let dh = curve.h.derivative();
    grid.nodes()
        .map(|(_, z)| (dh.eval_unchecked(z) + curve.f.eval_unchecked(z) * dg.eval_unchecked(z)).norm())
        .fold(0.0, f64::max)
}

/// `(x, y, z) -> [[e^{-z}, x e^{-z}], [y e^{z}, e^{z}(1 + xy)]]`.
pub fn darboux_map(p: [Complex64; 3]) -> Result<SL2Value, ContactError> {
    let [x, y, z] = p;
    if z.re.abs() > 300.0 {
        return Err(ContactError::Overflow(z.re.abs()));
    }
    let em = (-z).exp();
    let ep = z.exp();
    Ok(SL2Value(Mat2::new(em, x * em, y * ep, ep * (1.0 + x * y))))
}

/// Derivative of the Darboux map along a curve with velocity `(dx, dy, dz)`.
pub fn darboux_differential(p: [Complex64; 3], dp: [Complex64; 3]) -> Mat2 {
    let [x, y, z] = p;
    let [dx, dy, dz] = dp;
    let em = (-z).exp();
    let ep = z.exp();
    Mat2::new(
        -dz * em,
        (dx - x * dz) * em,
        (dy + y * dz) * ep,
        ep * (dz * (1.0 + x * y) + dx * y + x * dy),
    )
}

/// Local inverse of [`darboux_map`] on the principal branch of `log m11`.
pub fn darboux_inverse(a: &Mat2) -> Result<[Complex64; 3], ContactError> {
    let m11 = a[(0, 0)];
    if m11.norm() == 0.0 || (m11.im == 0.0 && m11.re <= 0.0) {
        return Err(ContactError::Branch { m11, sup_log: f64::INFINITY });
    }
    let z = -m11.ln();
    let x = a[(0, 1)] / m11;
    let y = a[(1, 0)] * m11;
    let mismatch = (a[(1, 1)] - z.exp() * (1.0 + x * y)).norm();
    if mismatch > 1e-9 * a[(1, 1)].norm().max(1.0) {
        return Err(ContactError::Consistency(mismatch));
    }
    Ok([x, y, z])
}

/// Number of circle samples used when refitting a curve to C^3.
pub const C3_FIT_SAMPLES: usize = 2048;

/// C^3 curve of a Legendrian SL(2,C) curve: the Darboux inverse of the transpose of `X`
/// on the unit circle, refit to polynomials.
///
/// On equispaced circle points the least-squares polynomial fit is the truncated discrete
/// Fourier transform, computed by FFT.
pub fn curve_c3_from_sl2(curve: &LegendrianCurve) -> Result<C3Curve, ContactError> {
    let mut sup_log: f64 = 0.0;
    // the whole disk must stay on the principal branch
    for m in &curve.samples {
        let m11 = m[(0, 0)];
        if m11.norm() == 0.0 || (m11.re < 0.0 && m11.im.abs() < 1e-12 * m11.norm()) {
            return Err(ContactError::Branch { m11, sup_log });
        }
        sup_log = sup_log.max(m11.ln().norm());
    }
    let n = C3_FIT_SAMPLES;
    let mut cols = vec![vec![Complex64::new(0.0, 0.0); n]; 3];
    for l in 0..n {
        let z = Complex64::from_polar(1.0, 2.0 * PI * l as f64 / n as f64);
        let x = curve.eval(z)?;
        let p = darboux_inverse(&x.transpose())?;
        for (col, v) in cols.iter_mut().zip(p) {
            col[l] = v;
        }
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let cap = crate::holo::DEFAULT_DEGREE_CAP.min(n / 2 - 1);
    let mut out = Vec::new();
    for mut col in cols {
        fft.process(&mut col);
        let coeffs: Vec<Complex64> = col[..=cap].iter().map(|v| v / n as f64).collect();
        let scale = coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let f = HoloFunction::new(coeffs)?;
        let keep = f.coeffs().iter().rposition(|v| v.norm() > 1e-18 * scale.max(1e-300)).unwrap_or(0);
        out.push(HoloFunction::new(f.coeffs()[..=keep].to_vec())?);
    }
    let h = out.pop().unwrap();
    let f = out.pop().unwrap();
    let g = out.pop().unwrap();
    Ok(C3Curve { f, g, h })
}
