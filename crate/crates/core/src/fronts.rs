//! Flat fronts `L L*` in H^3 and `L e3 L*` in de Sitter space, improper affine fronts
//! of C^3 curves, singular sets `|rho| = 1`, and mesh export.

use crate::contact::{contact_pullback_c3_on, C3Curve, ContactError, LegendrianCurve, Mat2, PolarGrid, RESIDUAL_TOL};
use crate::geometry::{geodesic_distance_field, GeometryError, MinkowskiPoint};
use crate::holo::{HoloError, HoloFunction, HoloPair};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use thiserror::Error;

/// Default tolerance on `||rho| - 1|` for singular flags.
pub const SINGULAR_TOL: f64 = 1e-3;
/// Tolerance of the model checks `det = 1`, `trace > 0`, `<x,x> = 1`.
pub const MODEL_TOL: f64 = 1e-8;
/// `|omega|` below this encodes `rho = infinity`.
pub const OMEGA_ZERO: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FrontError {
    #[error("model violation at vertex {index}: {what} = {value}")]
    Model { index: usize, what: &'static str, value: f64 },
    #[error("precondition violated: contact residual {0:e}")]
    Precondition(f64),
    #[error("grid resolution {0} is too small")]
    Resolution(usize),
    #[error("mesh format: {0}")]
    Format(String),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Holo(#[from] HoloError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrontTarget {
    H3PoincareBall,
    DeSitter,
    AffineR3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontMesh {
    pub target: FrontTarget,
    pub vertices: Vec<[f64; 3]>,
    /// The dropped `x0` coordinate of de Sitter vertices.
    pub x0: Option<Vec<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub singular: Vec<bool>,
}

/// Triangulation of a polar grid: a fan around the centre ring, two triangles per cell outside.
pub fn polar_triangles(grid: &PolarGrid) -> Vec<[u32; 3]> {
    let mut t = Vec::with_capacity(2 * grid.len());
    let na = grid.angles;
    for i in 0..grid.radii.saturating_sub(1) {
        for k in 0..na {
            let k1 = (k + 1) % na;
            let a = grid.index(i, k) as u32;
            let b = grid.index(i, k1) as u32;
            let c = grid.index(i + 1, k) as u32;
            let d = grid.index(i + 1, k1) as u32;
            if i > 0 {
                t.push([a, c, b]);
            }
            t.push([b, c, d]);
        }
    }
    t
}

impl FrontMesh {
    pub fn validate(&self) -> Result<(), FrontError> {
        let n = self.vertices.len();
        if self.singular.len() != n || self.x0.as_ref().is_some_and(|x| x.len() != n) {
            return Err(FrontError::Format("attribute length differs from vertex count".into()));
        }
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&v| v as usize >= n)) {
            return Err(FrontError::Format(format!("triangle {t:?} references a missing vertex")));
        }
        Ok(())
    }

    /// Largest distance of a vertex from the first one; zero for a one-point image.
    pub fn extent(&self) -> f64 {
        let Some(p) = self.vertices.first() else { return 0.0 };
        self.vertices
            .iter()
            .map(|v| ((v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2) + (v[2] - p[2]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn singular_count(&self) -> usize {
        self.singular.iter().filter(|&&s| s).count()
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<(), FrontError> {
        self.validate()?;
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    /// Binary little-endian PLY: double x y z (and x0), uchar singular, int vertex_indices.
    pub fn write_ply<W: Write>(&self, mut w: W) -> Result<(), FrontError> {
        self.validate()?;
        let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
        header.push_str(&format!("comment target {:?}\n", self.target));
        header.push_str(&format!("element vertex {}\n", self.vertices.len()));
        header.push_str("property double x\nproperty double y\nproperty double z\n");
        if self.x0.is_some() {
            header.push_str("property double x0\n");
        }
        header.push_str("property uchar singular\n");
        header.push_str(&format!("element face {}\n", self.triangles.len()));
        header.push_str("property list uchar int vertex_indices\nend_header\n");
        w.write_all(header.as_bytes())?;
        let mut buf = Vec::with_capacity(self.vertices.len() * 33 + self.triangles.len() * 13);
        for (i, v) in self.vertices.iter().enumerate() {
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            if let Some(x0) = &self.x0 {
                buf.extend_from_slice(&x0[i].to_le_bytes());
            }
            buf.push(self.singular[i] as u8);
        }
        for t in &self.triangles {
            buf.push(3);
            for &v in t {
                buf.extend_from_slice(&(v as i32).to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads the PLY layout written by [`FrontMesh::write_ply`].
    pub fn read_ply<R: BufRead>(mut r: R) -> Result<Self, FrontError> {
        let bad = |s: &str| FrontError::Format(s.to_string());
        let mut line = String::new();
        let mut next = |r: &mut R| -> Result<String, FrontError> {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(FrontError::Format("unexpected end of header".into()));
            }
            Ok(line.trim_end().to_string())
        };
        if next(&mut r)? != "ply" || next(&mut r)? != "format binary_little_endian 1.0" {
            return Err(bad("not a binary little-endian PLY"));
        }
        let (mut target, mut nv, mut nf, mut has_x0) = (None, 0usize, 0usize, false);
        loop {
            let l = next(&mut r)?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            match parts.as_slice() {
                ["end_header"] => break,
                ["comment", "target", t] => {
                    target = Some(match *t {
                        "H3PoincareBall" => FrontTarget::H3PoincareBall,
                        "DeSitter" => FrontTarget::DeSitter,
                        "AffineR3" => FrontTarget::AffineR3,
                        _ => return Err(bad("unknown target")),
                    })
                }
                ["element", "vertex", n] => nv = n.parse().map_err(|_| bad("vertex count"))?,
                ["element", "face", n] => nf = n.parse().map_err(|_| bad("face count"))?,
                ["property", "double", "x0"] => has_x0 = true,
                ["property", ..] => {}
                _ => return Err(bad(&format!("unexpected header line {l:?}"))),
            }
        }
        let target = target.ok_or_else(|| bad("missing target comment"))?;
        let f64_at = |b: &[u8], o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let stride = if has_x0 { 33 } else { 25 };
        let mut vb = vec![0u8; nv * stride];
        r.read_exact(&mut vb)?;
        let mut vertices = Vec::with_capacity(nv);
        let mut singular = Vec::with_capacity(nv);
        let mut x0 = has_x0.then(|| Vec::with_capacity(nv));
        for c in vb.chunks_exact(stride) {
            vertices.push([f64_at(c, 0), f64_at(c, 8), f64_at(c, 16)]);
            if let Some(x) = x0.as_mut() {
                x.push(f64_at(c, 24));
            }
            singular.push(c[stride - 1] != 0);
        }
        let mut fb = vec![0u8; nf * 13];
        r.read_exact(&mut fb)?;
        let mut triangles = Vec::with_capacity(nf);
        for c in fb.chunks_exact(13) {
            if c[0] != 3 {
                return Err(bad("non-triangular face"));
            }
            let idx = |o: usize| i32::from_le_bytes(c[o..o + 4].try_into().unwrap()) as u32;
            triangles.push([idx(1), idx(5), idx(9)]);
        }
        let mesh = Self { target, vertices, x0, triangles, singular };
        mesh.validate()?;
        Ok(mesh)
    }
}

/// Model-invariant statistics written next to an exported mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub target: FrontTarget,
    pub vertices: usize,
    pub triangles: usize,
    pub singular_vertices: usize,
    /// H^3: `max |det - 1|`; de Sitter: `max |<x,x> - 1|`; affine: gap between the two formulas.
    pub model_error: f64,
    /// H^3 only: largest Poincare-ball radius and `1 - radius`.
    pub ball_radius: Option<f64>,
    pub ball_margin: Option<f64>,
    pub extent: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Front {
    pub mesh: FrontMesh,
    pub stats: MeshStats,
}

impl Front {
    pub fn write_sidecar<W: Write>(&self, w: W) -> Result<(), FrontError> {
        serde_json::to_writer_pretty(w, &self.stats).map_err(|e| FrontError::Format(e.to_string()))
    }
}

/// `||rho| - 1| < tol` for `rho = theta/omega`, using `omega/theta` where `omega` vanishes.
pub fn is_singular(theta: Complex64, omega: Complex64, tol: f64) -> bool {
    if omega.norm() > OMEGA_ZERO {
        ((theta / omega).norm() - 1.0).abs() < tol
    } else if theta.norm() > OMEGA_ZERO {
        ((omega / theta).norm() - 1.0).abs() < tol
    } else {
        false
    }
}

fn curve_values(curve: &LegendrianCurve, grid: &PolarGrid) -> Result<Vec<Mat2>, FrontError> {
    if grid == &curve.grid {
        return Ok(curve.samples.clone());
    }
    if grid.radii < 2 || grid.angles < 4 {
        return Err(FrontError::Resolution(grid.radii.min(grid.angles)));
    }
    grid.nodes().map(|(_, z)| curve.eval(z).map_err(FrontError::from)).collect()
}

fn pair_flags(pair: &HoloPair, grid: &PolarGrid, tol: f64) -> Vec<bool> {
    grid.nodes().map(|(_, z)| is_singular(pair.theta(z), pair.omega(z), tol)).collect()
}

fn stats(mesh: &FrontMesh, model_error: f64, ball_radius: Option<f64>) -> MeshStats {
    MeshStats {
        target: mesh.target,
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        singular_vertices: mesh.singular_count(),
        model_error,
        ball_radius,
        ball_margin: ball_radius.map(|r| 1.0 - r),
        extent: mesh.extent(),
    }
}

/// `f = L L*` on `grid`, in the Poincare ball.
pub fn flat_front_h3(curve: &LegendrianCurve, grid: &PolarGrid, singular_tol: f64) -> Result<Front, FrontError> {
    let values = curve_values(curve, grid)?;
    let mut vertices = Vec::with_capacity(values.len());
    let (mut err, mut rmax): (f64, f64) = (0.0, 0.0);
    for (index, l) in values.iter().enumerate() {
        let f = l * l.adjoint();
        let det = (f[(0, 0)] * f[(1, 1)] - f[(0, 1)] * f[(1, 0)]).re;
        let trace = (f[(0, 0)] + f[(1, 1)]).re;
        if (det - 1.0).abs() > MODEL_TOL * trace.max(1.0).powi(2) {
            return Err(FrontError::Model { index, what: "det", value: det });
        }
        if trace <= 0.0 {
            return Err(FrontError::Model { index, what: "trace", value: trace });
        }
        err = err.max((det - 1.0).abs());
        let b = MinkowskiPoint::from_hermitian(&f).poincare_ball();
        rmax = rmax.max((b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt());
        vertices.push(b);
    }
    let mesh = FrontMesh {
        target: FrontTarget::H3PoincareBall,
        vertices,
        x0: None,
        triangles: polar_triangles(grid),
        singular: pair_flags(&curve.pair, grid, singular_tol),
    };
    let stats = stats(&mesh, err, Some(rmax));
    Ok(Front { mesh, stats })
}

/// `f = L e3 L*` on `grid`; vertices are `(x1, x2, x3)` and `x0` is kept as an attribute.
pub fn flat_front_desitter(curve: &LegendrianCurve, grid: &PolarGrid, singular_tol: f64) -> Result<Front, FrontError> {
    let values = curve_values(curve, grid)?;
    let e3 = Mat2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0));
    let mut vertices = Vec::with_capacity(values.len());
    let mut x0 = Vec::with_capacity(values.len());
    let mut err: f64 = 0.0;
    for (index, l) in values.iter().enumerate() {
        let p = MinkowskiPoint::from_hermitian(&(l * e3 * l.adjoint()));
        let q = p.inner(&p);
        let scale = p.x.iter().map(|v| v * v).sum::<f64>().max(1.0);
        if (q - 1.0).abs() > MODEL_TOL * scale {
            return Err(FrontError::Model { index, what: "<x,x>", value: q });
        }
        err = err.max((q - 1.0).abs());
        vertices.push([p.x[1], p.x[2], p.x[3]]);
        x0.push(p.x[0]);
    }
    let mesh = FrontMesh {
        target: FrontTarget::DeSitter,
        vertices,
        x0: Some(x0),
        triangles: polar_triangles(grid),
        singular: pair_flags(&curve.pair, grid, singular_tol),
    };
    let stats = stats(&mesh, err, None);
    Ok(Front { mesh, stats })
}

/// Improper affine front `(G + conj F, (|G|^2 - |F|^2)/2 + Re(G F + 2 H))` on `grid`.
///
/// The model error in the stats is the gap to the primitive form `Re(G F - 2 int F dG)`,
/// with the primitive normalised to `-H(0)` at the origin.
pub fn improper_affine_front(c3: &C3Curve, grid: &PolarGrid, singular_tol: f64) -> Result<Front, FrontError> {
    if grid.radii < 2 || grid.angles < 4 {
        return Err(FrontError::Resolution(grid.radii.min(grid.angles)));
    }
    let residual = contact_pullback_c3_on(c3, grid);
    let scale = 1.0 + c3.f.l1_norm() * c3.g.derivative().l1_norm();
    if residual > RESIDUAL_TOL * scale {
        return Err(FrontError::Precondition(residual));
    }
    let df = c3.f.derivative();
    let dg = c3.g.derivative();
    // room for the exact product and its primitive
    let f_wide = HoloFunction::with_cap(c3.f.coeffs().to_vec(), c3.f.degree() + dg.degree() + 1)?;
    let (fdg, _) = f_wide.mul_truncated(&dg);
    let prim = fdg.antiderivative(-c3.h.eval_unchecked(Complex64::new(0.0, 0.0)))?;
    let mut vertices = Vec::with_capacity(grid.len());
    let mut singular = Vec::with_capacity(grid.len());
    let mut gap: f64 = 0.0;
    for (_, z) in grid.nodes() {
        let f = c3.f.eval_unchecked(z);
        let g = c3.g.eval_unchecked(z);
        let h = c3.h.eval_unchecked(z);
        let base = 0.5 * (g.norm_sqr() - f.norm_sqr());
        let third = base + (g * f + 2.0 * h).re;
        let third_prim = base + (g * f - 2.0 * prim.eval_unchecked(z)).re;
        gap = gap.max((third - third_prim).abs());
        let x = g + f.conj();
        vertices.push([x.re, x.im, third]);
        singular.push(is_singular(dg.eval_unchecked(z), df.eval_unchecked(z), singular_tol));
    }
    let mesh = FrontMesh { target: FrontTarget::AffineR3, vertices, x0: None, triangles: polar_triangles(grid), singular };
    let stats = stats(&mesh, gap, None);
    Ok(Front { mesh, stats })
}

/// `(|F'|^2 + |G'|^2)^{1/2}`.
pub fn affine_metric_density(c3: &C3Curve, z: Complex64) -> f64 {
    let df = c3.f.derivative().eval_unchecked(z);
    let dg = c3.g.derivative().eval_unchecked(z);
    (df.norm_sqr() + dg.norm_sqr()).sqrt()
}

/// Largest ratio `ds_L^2 / dtau^2 = (|F'|^2 + (1 + |F|^2)|G'|^2) / (|F'|^2 + |G'|^2)` over `grid`.
pub fn affine_metric_constant(c3: &C3Curve, grid: &PolarGrid) -> f64 {
    let df = c3.f.derivative();
    let dg = c3.g.derivative();
    grid.nodes()
        .filter_map(|(_, z)| {
            let a = df.eval_unchecked(z).norm_sqr();
            let b = dg.eval_unchecked(z).norm_sqr();
            let f = c3.f.eval_unchecked(z).norm_sqr();
            (a + b > 0.0).then(|| (a + (1.0 + f) * b) / (a + b))
        })
        .fold(1.0, f64::max)
}

/// Intrinsic radius of `dtau` about the origin at solver resolution `resolution`.
pub fn affine_radius(c3: &C3Curve, resolution: usize) -> Result<f64, FrontError> {
    let df = c3.f.derivative();
    let dg = c3.g.derivative();
    let density = |z: Complex64| (df.eval_unchecked(z).norm_sqr() + dg.eval_unchecked(z).norm_sqr()).sqrt();
    let field = geodesic_distance_field(density, Complex64::new(0.0, 0.0), resolution)?;
    Ok(field.boundary_min(8 * resolution))
}

/// `rho = theta/omega` on the Cartesian grid `resolution x resolution` over `[-1, 1]^2`.
///
/// Nodes outside the closed disk hold NaN; `rho = infinity` is stored as `(inf, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RhoRatio {
    pub resolution: usize,
    pub values: Vec<Complex64>,
}

impl RhoRatio {
    pub fn node(&self, ix: usize, iy: usize) -> Complex64 {
        let h = 2.0 / (self.resolution - 1) as f64;
        Complex64::new(-1.0 + ix as f64 * h, -1.0 + iy as f64 * h)
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.resolution + ix]
    }

    pub fn cell(&self) -> f64 {
        2.0 / (self.resolution - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularSet {
    pub rho: RhoRatio,
    /// Polylines of `|theta| = |omega|`, each a list of points.
    pub contours: Vec<Vec<Complex64>>,
    /// Fraction of in-disk nodes with `||rho| - 1| < tol`.
    pub fraction: f64,
}

pub fn singular_set(pair: &HoloPair, resolution: usize, tol: f64) -> Result<SingularSet, FrontError> {
    if resolution < 3 {
        return Err(FrontError::Resolution(resolution));
    }
    let n = resolution;
    let mut rho = RhoRatio { resolution: n, values: Vec::with_capacity(n * n) };
    let mut level = vec![f64::NAN; n * n];
    let (mut inside, mut flagged) = (0usize, 0usize);
    for iy in 0..n {
        for ix in 0..n {
            let z = rho.node(ix, iy);
            if z.norm() > 1.0 + 1e-12 {
                rho.values.push(Complex64::new(f64::NAN, f64::NAN));
                continue;
            }
            let (th, om) = (pair.theta(z), pair.omega(z));
            rho.values.push(if om.norm() > OMEGA_ZERO { th / om } else { Complex64::new(f64::INFINITY, 0.0) });
            level[iy * n + ix] = th.norm_sqr() - om.norm_sqr();
            inside += 1;
            flagged += is_singular(th, om, tol) as usize;
        }
    }
    let contours = marching_squares(&level, n, |ix, iy| rho.node(ix, iy));
    Ok(SingularSet { rho, contours, fraction: flagged as f64 / inside.max(1) as f64 })
}

/// Edge key: `(ix, iy, 0)` for the horizontal edge to `ix + 1`, `(ix, iy, 1)` for the vertical edge to `iy + 1`.
type EdgeKey = (usize, usize, u8);

/// Zero level set of `f` (row-major, `n x n`) as chained polylines; cells with a NaN corner are skipped.
fn marching_squares<P: Fn(usize, usize) -> Complex64>(f: &[f64], n: usize, pos: P) -> Vec<Vec<Complex64>> {
    let at = |ix: usize, iy: usize| f[iy * n + ix];
    let point = |e: EdgeKey| -> Complex64 {
        let (ix, iy, d) = e;
        let (jx, jy) = if d == 0 { (ix + 1, iy) } else { (ix, iy + 1) };
        let (a, b) = (at(ix, iy), at(jx, jy));
        let t = if a == b { 0.5 } else { a / (a - b) };
        pos(ix, iy) + (pos(jx, jy) - pos(ix, iy)) * t
    };
    let mut segs: Vec<[EdgeKey; 2]> = Vec::new();
    for iy in 0..n - 1 {
        for ix in 0..n - 1 {
            let v = [at(ix, iy), at(ix + 1, iy), at(ix + 1, iy + 1), at(ix, iy + 1)];
            if v.iter().any(|x| x.is_nan()) {
                continue;
            }
            // edges: bottom, right, top, left
            let edges: [EdgeKey; 4] = [(ix, iy, 0), (ix + 1, iy, 1), (ix, iy + 1, 0), (ix, iy, 1)];
            let pos_at: Vec<bool> = v.iter().map(|&x| x > 0.0).collect();
            let crossing: Vec<usize> = (0..4).filter(|&e| pos_at[e] != pos_at[(e + 1) % 4]).collect();
            match crossing.len() {
                2 => segs.push([edges[crossing[0]], edges[crossing[1]]]),
                4 => {
                    let centre = v.iter().sum::<f64>() / 4.0;
                    if (centre > 0.0) == pos_at[0] {
                        segs.push([edges[0], edges[1]]);
                        segs.push([edges[2], edges[3]]);
                    } else {
                        segs.push([edges[3], edges[0]]);
                        segs.push([edges[1], edges[2]]);
                    }
                }
                _ => {}
            }
        }
    }
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (i, s) in segs.iter().enumerate() {
        for e in s {
            by_edge.entry(*e).or_default().push(i);
        }
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut chain: Vec<EdgeKey> = segs[start].to_vec();
        for forward in [true, false] {
            loop {
                let end = if forward { *chain.last().unwrap() } else { chain[0] };
                let Some(&next) = by_edge[&end].iter().find(|&&s| !used[s]) else { break };
                used[next] = true;
                let other = if segs[next][0] == end { segs[next][1] } else { segs[next][0] };
                if forward {
                    chain.push(other);
                } else {
                    chain.insert(0, other);
                }
            }
        }
        lines.push(chain.into_iter().map(point).collect());
    }
    lines
}
