//! Conformal distances on the disk and hyperbolic 3-space in the Hermitian model.

use crate::contact::{LegendrianCurve, Mat2};
use crate::holo::HoloPair;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use thiserror::Error;


#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("density is not positive and finite at {0}")]
    BadDensity(Complex64),
    #[error("node {0} unreachable from the source")]
    Disconnected(usize),
    #[error("resolution {0} too small (need >= 4)")]
    Resolution(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A point of R^4 with signature (-,+,+,+).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiPoint {
    pub x: [f64; 4],
}

impl MinkowskiPoint {
    pub const ORIGIN: Self = Self { x: [1.0, 0.0, 0.0, 0.0] };

    /// Reads `(x0, x1, x2, x3)` off `[[x0+x3, x1+i x2], [x1-i x2, x0-x3]]`.
    pub fn from_hermitian(m: &Mat2) -> Self {
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let b = m[(0, 1)];
        Self { x: [(a + d) / 2.0, b.re, b.im, (a - d) / 2.0] }
    }

    pub fn to_hermitian(&self) -> Mat2 {
        let [x0, x1, x2, x3] = self.x;
        Mat2::new(
            Complex64::new(x0 + x3, 0.0),
            Complex64::new(x1, x2),
            Complex64::new(x1, -x2),
            Complex64::new(x0 - x3, 0.0),
        )
    }

    pub fn inner(&self, o: &Self) -> f64 {
        -self.x[0] * o.x[0] + self.x[1] * o.x[1] + self.x[2] * o.x[2] + self.x[3] * o.x[3]
    }

    /// `(x1, x2, x3)/(1 + x0)`.
    pub fn poincare_ball(&self) -> [f64; 3] {
        let s = 1.0 + self.x[0];
        [self.x[1] / s, self.x[2] / s, self.x[3] / s]
    }
}

/// `a a*` as a point of H^3.
pub fn h3_point(a: &Mat2) -> MinkowskiPoint {
    MinkowskiPoint::from_hermitian(&(a * a.adjoint()))
}

/// `arccosh(-<p, q>)`, with `-<p,q>` clamped to `[1, inf)`.
///
/// Near the diagonal the equivalent `2 asinh(|p - q|/2)` is used, since arccosh loses
/// half the digits there.
pub fn h3_distance(p: &MinkowskiPoint, q: &MinkowskiPoint) -> f64 {
    // symmetric expression so that d(p,q) and d(q,p) agree bit for bit
    let v = -(p.inner(q) + q.inner(p)) / 2.0;
    if v < 1.5 {
        let d = MinkowskiPoint { x: [0, 1, 2, 3].map(|i| p.x[i] - q.x[i]) };
        let chord = d.inner(&d).max(0.0).sqrt();
        return 2.0 * (chord / 2.0).asinh();
    }
    v.max(1.0).acosh()
}

/// Distance from the origin to `a a*`, i.e. `arccosh(|a|^2/2)`.
pub fn h3_distance_from_origin(a: &Mat2) -> f64 {
    let n2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    (n2 / 2.0).max(1.0).acosh()
}

/// Foot of the perpendicular from `p` to the geodesic through the origin along the
/// x2-axis, `t -> (cosh t, 0, sinh t, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisFoot {
    pub q: MinkowskiPoint,
    /// `dist(o, q)`.
    pub along: f64,
    /// `dist(q, p)`.
    pub across: f64,
}

pub fn foot_on_x2_axis(p: &MinkowskiPoint) -> AxisFoot {
    let [x0, x1, x2, x3] = p.x;
    let t = (x2 / x0).clamp(-1.0, 1.0).atanh();
    let q = MinkowskiPoint { x: [t.cosh(), 0.0, t.sinh(), 0.0] };
    AxisFoot { q, along: t.abs(), across: (x1 * x1 + x3 * x3).sqrt().asinh() }
}

/// `|omega + conj(theta)|`: the length density of the flat front `L L*` along the real
/// direction. The front metric `|omega dz + conj(theta dz)|^2` is not conformal; see
/// [`front_metric_density_dir`].
pub fn front_metric_density(pair: &HoloPair, z: Complex64) -> f64 {
    front_metric_density_dir(pair, z, Complex64::new(1.0, 0.0))
}

/// Length density of the flat front in the unit direction `v`: `|omega v + conj(theta v)|`.
pub fn front_metric_density_dir(pair: &HoloPair, z: Complex64, v: Complex64) -> f64 {
    (pair.omega(z) * v + (pair.theta(z) * v).conj()).norm()
}

/// Length of the image of a polyline under the flat front, using the directional density.
pub fn front_path_length(pair: &HoloPair, path: &[Complex64], step: f64) -> f64 {
    let mut total = 0.0;
    for w in path.windows(2) {
        let d = w[1] - w[0];
        if d.norm() == 0.0 {
            continue;
        }
        let v = d / d.norm();
        total += path_length(|z| front_metric_density_dir(pair, z, v), w, step);
    }
    total
}

/// Trapezoidal length of a polyline, each edge subdivided to pieces no longer than `step`.
pub fn path_length<F: Fn(Complex64) -> f64>(density: F, path: &[Complex64], step: f64) -> f64 {
    let mut total = 0.0;
    for w in path.windows(2) {
        let d = w[1] - w[0];
        let n = ((d.norm() / step).ceil() as usize).max(1);
        let mut prev = density(w[0]);
        for i in 1..=n {
            let v = density(w[0] + d * (i as f64 / n as f64));
            total += 0.5 * (prev + v) * d.norm() / n as f64;
            prev = v;
        }
    }
    total
}

/// Geodesic distance from a source on the Cartesian grid `h (ix, iy)`, `h = 1/R`,
/// restricted to nodes in the closed unit disk.
#[derive(Clone, Debug)]
pub struct DistanceField {
    pub resolution: usize,
    pub source: Complex64,
    /// `(2R+1)^2` values, row-major in `iy`, `+inf` outside the disk.
    pub values: Vec<f64>,
    /// Density sampled at every node (including those outside the disk).
    pub density: Vec<f64>,
    pred: Vec<u32>,
}

/// Primitive stencil offsets with max-norm at most 3.
fn stencil() -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for dx in -3i32..=3 {
        for dy in -3i32..=3 {
            if (dx, dy) != (0, 0) && gcd(dx.unsigned_abs(), dy.unsigned_abs()) == 1 {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(PartialEq)]
struct Item(f64, u32);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

const NONE: u32 = u32::MAX;

impl DistanceField {
    fn side(&self) -> usize {
        2 * self.resolution + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn node(&self, idx: usize) -> Complex64 {
        let s = self.side();
        let r = self.resolution as f64;
        Complex64::new((idx % s) as f64 / r - 1.0, (idx / s) as f64 / r - 1.0)
    }

    fn index_of(&self, ix: i64, iy: i64) -> Option<usize> {
        let s = self.side() as i64;
        (ix >= 0 && iy >= 0 && ix < s && iy < s).then(|| (iy * s + ix) as usize)
    }

    fn density_interp(&self, z: Complex64) -> f64 {
        let r = self.resolution as f64;
        let fx = ((z.re + 1.0) * r).clamp(0.0, 2.0 * r);
        let fy = ((z.im + 1.0) * r).clamp(0.0, 2.0 * r);
        let ix = (fx.floor() as i64).min(2 * self.resolution as i64 - 1);
        let iy = (fy.floor() as i64).min(2 * self.resolution as i64 - 1);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let g = |a: i64, b: i64| self.density[self.index_of(a, b).unwrap()];
        (1.0 - tx) * (1.0 - ty) * g(ix, iy) + tx * (1.0 - ty) * g(ix + 1, iy) + (1.0 - tx) * ty * g(ix, iy + 1)
            + tx * ty * g(ix + 1, iy + 1)
    }

    /// Trapezoid integral of the interpolated density along a straight segment.
    fn segment_cost(&self, a: Complex64, b: Complex64) -> f64 {
        let len = (b - a).norm();
        let n = ((len / self.h()).ceil() as usize).max(1);
        let mut prev = self.density_interp(a);
        let mut acc = 0.0;
        for i in 1..=n {
            let v = self.density_interp(a + (b - a) * (i as f64 / n as f64));
            acc += 0.5 * (prev + v);
            prev = v;
        }
        acc * len / n as f64
    }

    /// Distance at an arbitrary point of the closed disk: best continuation from nodes
    /// within two cells by a straight segment.
    pub fn value_at(&self, z: Complex64) -> f64 {
        let r = self.resolution as f64;
        let cx = ((z.re + 1.0) * r).round() as i64;
        let cy = ((z.im + 1.0) * r).round() as i64;
        let mut best = f64::INFINITY;
        if (z - self.source).norm() <= 2.0 * self.h() {
            best = self.segment_cost(self.source, z);
        }
        for dy in -2..=2 {
            for dx in -2..=2 {
                if let Some(idx) = self.index_of(cx + dx, cy + dy) {
                    let v = self.values[idx];
                    if v.is_finite() {
                        let n = self.node(idx);
                        if (n - z).norm() < 1e-15 {
                            return v;
                        }
                        best = best.min(v + self.segment_cost(n, z));
                    }
                }
            }
        }
        best
    }

    /// Grid node nearest to `z` that lies in the disk.
    pub fn nearest_node(&self, z: Complex64) -> Option<usize> {
        let r = self.resolution as f64;
        let cx = ((z.re + 1.0) * r).round() as i64;
        let cy = ((z.im + 1.0) * r).round() as i64;
        let mut best = None;
        let mut bd = f64::INFINITY;
        for dy in -2..=2 {
            for dx in -2..=2 {
                if let Some(idx) = self.index_of(cx + dx, cy + dy) {
                    let d = (self.node(idx) - z).norm();
                    if self.values[idx].is_finite() && d < bd {
                        bd = d;
                        best = Some(idx);
                    }
                }
            }
        }
        best
    }

    /// Node path of the computed shortest path from the source to the node nearest `z`,
    /// ordered from the source.
    pub fn geodesic_to(&self, z: Complex64) -> Vec<Complex64> {
        let mut path = Vec::new();
        let mut cur = self.nearest_node(z).map(|i| i as u32).unwrap_or(NONE);
        while cur != NONE {
            path.push(self.node(cur as usize));
            cur = self.pred[cur as usize];
        }
        path.push(self.source);
        path.reverse();
        path
    }

    /// Minimum of the distance over `samples` equispaced points of the unit circle.
    pub fn boundary_min(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|k| self.value_at(Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / samples as f64)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Binary export: JSON header line, then `(2R+1)^2` little-endian f64 values.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), GeometryError> {
        let header = serde_json::json!({
            "format": "legendrian-distance-field",
            "version": 1,
            "resolution": self.resolution,
            "side": self.side(),
            "origin": [-1.0, -1.0],
            "spacing": self.h(),
            "source": [self.source.re, self.source.im],
            "layout": "row-major in y, +inf outside the closed disk",
        });
        writeln!(w, "{header}")?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }
}

/// Dijkstra on the `(2R+1)^2` grid over `[-1,1]^2` with a 32-neighbour stencil; nodes
/// outside the closed disk are not used. Edge weights integrate the bilinearly
/// interpolated density by the trapezoid rule.
pub fn geodesic_distance_field<F: Fn(Complex64) -> f64>(
    density: F,
    source: Complex64,
    resolution: usize,
) -> Result<DistanceField, GeometryError> {
    if resolution < 4 {
        return Err(GeometryError::Resolution(resolution));
    }
    let side = 2 * resolution + 1;
    let r = resolution as f64;
    let mut field = DistanceField {
        resolution,
        source,
        values: vec![f64::INFINITY; side * side],
        density: vec![0.0; side * side],
        pred: vec![NONE; side * side],
    };
    let inside: Vec<bool> = (0..side * side).map(|i| field.node(i).norm() <= 1.0 + 1e-12).collect();
    for i in 0..side * side {
        let z = field.node(i);
        let v = density(z);
        if !(v.is_finite() && v > 0.0) {
            if inside[i] {
                return Err(GeometryError::BadDensity(z));
            }
            // outside the disk only interpolation uses it; keep something harmless
            field.density[i] = 0.0;
        } else {
            field.density[i] = v;
        }
    }
    let stencil = stencil();
    // edge costs depend on position through the density, so they are computed on the fly
    let mut heap = BinaryHeap::new();
    let cx = ((source.re + 1.0) * r).round() as i64;
    let cy = ((source.im + 1.0) * r).round() as i64;
    for dy in -2..=2 {
        for dx in -2..=2 {
            if let Some(idx) = field.index_of(cx + dx, cy + dy) {
                if inside[idx] {
                    let d = field.segment_cost(source, field.node(idx));
                    if d < field.values[idx] {
                        field.values[idx] = d;
                        heap.push(Item(d, idx as u32));
                    }
                }
            }
        }
    }
    let mut done = vec![false; side * side];
    while let Some(Item(d, u)) = heap.pop() {
        let u = u as usize;
        if done[u] {
            continue;
        }
        done[u] = true;
        let (ux, uy) = ((u % side) as i64, (u / side) as i64);
        let zu = field.node(u);
        for &(dx, dy) in &stencil {
            let Some(v) = field.index_of(ux + dx as i64, uy + dy as i64) else { continue };
            if !inside[v] || done[v] {
                continue;
            }
            let nd = d + field.segment_cost(zu, field.node(v));
            if nd < field.values[v] {
                field.values[v] = nd;
                field.pred[v] = u as u32;
                heap.push(Item(nd, v as u32));
            }
        }
    }
    if let Some(i) = (0..side * side).find(|&i| inside[i] && !field.values[i].is_finite()) {
        return Err(GeometryError::Disconnected(i));
    }
    Ok(field)
}

/// Intrinsic radius with its two-resolution error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    /// Value at the finer resolution `2R`.
    pub radius: f64,
    /// `|r(R) - r(2R)|`.
    pub richardson: f64,
    pub resolution: usize,
}

/// Number of boundary samples used for a field of resolution `r`.
fn boundary_samples(r: usize) -> usize {
    8 * r
}

/// Minimum over boundary samples of the distance from the origin in `|phi|^2 |dz|^2`.
pub fn intrinsic_radius(curve: &LegendrianCurve, resolution: usize) -> Result<f64, GeometryError> {
    pair_radius(&curve.pair, resolution)
}

pub fn pair_radius(pair: &HoloPair, resolution: usize) -> Result<f64, GeometryError> {
    let f = geodesic_distance_field(|z| pair.norm_at(z), Complex64::new(0.0, 0.0), resolution)?;
    Ok(f.boundary_min(boundary_samples(resolution)))
}

/// Radius at resolutions `R` and `2R`; also returns the fine field.
pub fn intrinsic_radius_richardson(
    pair: &HoloPair,
    resolution: usize,
) -> Result<(RadiusEstimate, DistanceField), GeometryError> {
    let coarse = pair_radius(pair, resolution)?;
    let fine = geodesic_distance_field(|z| pair.norm_at(z), Complex64::new(0.0, 0.0), 2 * resolution)?;
    let r = fine.boundary_min(boundary_samples(2 * resolution));
    Ok((RadiusEstimate { radius: r, richardson: (coarse - r).abs(), resolution }, fine))
}
