//! Circles, rays and corridor sets of the labyrinth in the unit disk.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabyrinthError {
    #[error("N = {0} is below the minimum of 4")]
    NTooSmall(usize),
    #[error("index {index} outside {lo}..={hi}")]
    Range { index: usize, lo: usize, hi: usize },
    #[error("could not draw {wanted} points of {region:?} (found {found})")]
    EmptyRegion { region: Region, wanted: usize, found: usize },
}

/// Regions that can be sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    InnerDisk,
    Annulus,
    SigmaBand,
    OmegaSet,
    OmegaJ(usize),
    VarpiJ(usize),
    /// Closed complement of `varpi_j` in the closed disk.
    OutsideVarpiJ(usize),
}

/// Membership flags of a point. Structure flags (band, rays, `A`, `A~`, `Omega`)
/// are only reported on the closed annulus `1 - 2/N <= |z| <= 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionTag {
    pub inner_disk: bool,
    pub annulus: bool,
    pub sigma_band: bool,
    pub omega_set: bool,
    pub omega_j: Option<usize>,
    pub varpi_j: Option<usize>,
    pub in_a: bool,
    pub in_a_tilde: bool,
    pub near_l: bool,
    pub near_l_tilde: bool,
}

impl RegionTag {
    pub fn matches(&self, region: Region) -> bool {
        match region {
            Region::InnerDisk => self.inner_disk,
            Region::Annulus => self.annulus,
            Region::SigmaBand => self.sigma_band,
            Region::OmegaSet => self.omega_set,
            Region::OmegaJ(j) => self.omega_j == Some(j),
            Region::VarpiJ(j) => self.varpi_j == Some(j),
            Region::OutsideVarpiJ(j) => self.varpi_j != Some(j),
        }
    }

    /// The most specific region containing the point.
    pub fn primary(&self) -> Region {
        if let Some(j) = self.omega_j {
            Region::OmegaJ(j)
        } else if let Some(j) = self.varpi_j {
            Region::VarpiJ(j)
        } else if self.omega_set {
            Region::OmegaSet
        } else if self.sigma_band {
            Region::SigmaBand
        } else if self.annulus {
            Region::Annulus
        } else {
            Region::InnerDisk
        }
    }
}

/// A connected component of `Omega`: radial slot `k` (between `r_{k+1}` and `r_k`)
/// and angular sector `m` (between rays `m pi/N` and `(m+1) pi/N`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaComponent {
    pub k: usize,
    pub m: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabyrinthSpec {
    n: usize,
}

pub fn radius(n: usize, k: usize) -> Result<f64, LabyrinthError> {
    if k > 2 * n * n {
        return Err(LabyrinthError::Range { index: k, lo: 0, hi: 2 * n * n });
    }
    Ok(1.0 - k as f64 / (n * n * n) as f64)
}

/// Halton radical inverse in base `b`.
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

impl LabyrinthSpec {
    pub fn new(n: usize) -> Result<Self, LabyrinthError> {
        if n < 4 {
            return Err(LabyrinthError::NTooSmall(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn n3(&self) -> f64 {
        (self.n * self.n * self.n) as f64
    }

    pub fn num_circles(&self) -> usize {
        2 * self.n * self.n + 1
    }

    pub fn radius(&self, k: usize) -> Result<f64, LabyrinthError> {
        radius(self.n, k)
    }

    /// `1/(4 N^3)`.
    pub fn band_halfwidth(&self) -> f64 {
        0.25 / self.n3()
    }

    /// `1 - 2/N`.
    pub fn inner_annulus_radius(&self) -> f64 {
        1.0 - 2.0 / self.n as f64
    }

    pub fn ray_angle(&self, k: usize) -> f64 {
        k as f64 * PI / self.n as f64
    }

    fn check_j(&self, j: usize) -> Result<(), LabyrinthError> {
        if j == 0 || j > 2 * self.n {
            return Err(LabyrinthError::Range { index: j, lo: 1, hi: 2 * self.n });
        }
        Ok(())
    }

    /// `zeta_j = (1 - 2/N - 4/N^3) e^{i pi j/N}`.
    pub fn base_point(&self, j: usize) -> Result<Complex64, LabyrinthError> {
        self.check_j(j)?;
        let r = 1.0 - 2.0 / self.n as f64 - 4.0 / self.n3();
        Ok(Complex64::from_polar(r, self.ray_angle(j)))
    }

    /// Endpoints of the ray segment `l_{j pi/N}` across the closed annulus.
    pub fn segment(&self, j: usize) -> (Complex64, Complex64) {
        let a = self.ray_angle(j);
        (Complex64::from_polar(self.inner_annulus_radius(), a), Complex64::from_polar(1.0, a))
    }

    pub fn dist_to_segment(&self, z: Complex64, j: usize) -> f64 {
        let dir = Complex64::from_polar(1.0, self.ray_angle(j));
        let along = (z * dir.conj()).re;
        let t = along.clamp(self.inner_annulus_radius(), 1.0);
        (z - dir * t).norm()
    }

    /// Components of `Omega` meeting the ray `l_{j pi/N}`.
    ///
    /// A component in sector `m` spans angles `(m pi/N + w, (m+1) pi/N - w)` where `w` is the
    /// band halfwidth seen from the origin; widened by `w` this is `[m, m+1] pi/N`. The ray
    /// meets the component iff its angle lies strictly inside, i.e. iff `m < j < m + 1` modulo
    /// `2N`, which never holds. Tangency ties count as non-intersecting.
    pub fn omega_components(&self, j: usize) -> Vec<OmegaComponent> {
        let jj = j % (2 * self.n);
        let mut out = Vec::new();
        for m in 0..2 * self.n {
            // strict containment of an integer in (m, m+1)
            if m < jj && jj < m + 1 {
                out.extend((0..2 * self.n * self.n).map(|k| OmegaComponent { k, m }));
            }
        }
        out
    }

    /// Component of `Omega` containing `z`, if any.
    pub fn omega_component_of(&self, z: Complex64) -> Option<OmegaComponent> {
        let tag = self.classify(z);
        if !tag.omega_set {
            return None;
        }
        let u = (1.0 - z.norm()) * self.n3();
        let k = (u.ceil() as usize).saturating_sub(1);
        let m = (z.arg().rem_euclid(2.0 * PI) / (PI / self.n as f64)).floor() as usize % (2 * self.n);
        Some(OmegaComponent { k, m })
    }

    /// Distance from `z` to the nearest circle `S_{r_k}` and the index of that circle.
    pub fn nearest_circle(&self, z: Complex64) -> (f64, usize) {
        let r = z.norm();
        let u = (1.0 - r) * self.n3();
        let k = u.round().clamp(0.0, (2 * self.n * self.n) as f64) as usize;
        let rk = 1.0 - k as f64 / self.n3();
        ((r - rk).abs(), k)
    }

    /// Distance from `z` to the nearest ray of `L` or `L~` and the index of that ray.
    pub fn nearest_ray(&self, z: Complex64) -> (f64, usize) {
        let step = PI / self.n as f64;
        let a = z.arg().rem_euclid(2.0 * PI);
        let m = (a / step).round() as usize;
        let diff = (a - m as f64 * step).abs();
        (z.norm() * diff.sin(), m % (2 * self.n))
    }

    pub fn classify(&self, z: Complex64) -> RegionTag {
        let mut tag = RegionTag::default();
        let r = z.norm();
        let inner = self.inner_annulus_radius();
        let delta = self.band_halfwidth();
        if r < inner {
            tag.inner_disk = true;
        } else if r <= 1.0 {
            tag.annulus = true;
            let (dc, _) = self.nearest_circle(z);
            let (dr, m) = self.nearest_ray(z);
            tag.sigma_band = dc.min(dr) < delta;
            tag.near_l = dr < delta && m % 2 == 0;
            tag.near_l_tilde = dr < delta && m % 2 == 1;
            if r < 1.0 {
                let u = (1.0 - r) * self.n3();
                let k = (u.ceil() as usize).saturating_sub(1);
                if k < 2 * self.n * self.n {
                    tag.in_a = k % 2 == 0;
                    tag.in_a_tilde = k % 2 == 1;
                }
                tag.omega_set = !tag.sigma_band;
            }
        }
        if r >= inner - delta {
            let step = PI / self.n as f64;
            let a = z.arg().rem_euclid(2.0 * PI);
            let m = ((a / step).round() as usize) % (2 * self.n);
            let j = if m == 0 { 2 * self.n } else { m };
            let d = self.dist_to_segment(z, j);
            if d < delta {
                tag.varpi_j = Some(j);
                if d <= 1e-12 {
                    tag.omega_j = Some(j);
                }
            }
        }
        tag
    }

    /// Deterministic low-discrepancy points of a region, each re-checked with [`Self::classify`].
    pub fn sample_region(&self, region: Region, count: usize) -> Result<Vec<Complex64>, LabyrinthError> {
        if let Region::OmegaJ(j) | Region::VarpiJ(j) | Region::OutsideVarpiJ(j) = region {
            self.check_j(j)?;
        }
        let inner = self.inner_annulus_radius();
        let delta = self.band_halfwidth();
        let mut out = Vec::with_capacity(count);
        let accept = |z: Complex64, out: &mut Vec<Complex64>| {
            if out.len() < count && z.norm() <= 1.0 && self.classify(z).matches(region) {
                out.push(z);
            }
        };
        match region {
            Region::InnerDisk => {
                for i in 0..count {
                    let r = inner * (1.0 - 1e-12) * halton(i + 1, 2).sqrt();
                    accept(Complex64::from_polar(r, 2.0 * PI * halton(i + 1, 3)), &mut out);
                }
            }
            Region::Annulus | Region::SigmaBand | Region::OmegaSet => {
                let mut i = 0;
                while out.len() < count && i < 200 * count + 1000 {
                    i += 1;
                    let r2 = inner * inner + (1.0 - inner * inner) * halton(i, 2);
                    accept(Complex64::from_polar(r2.sqrt(), 2.0 * PI * halton(i, 3)), &mut out);
                }
            }
            Region::OmegaJ(j) => {
                let (a, b) = self.segment(j);
                for i in 0..count {
                    let t = if count == 1 { 0.5 } else { i as f64 / (count - 1) as f64 };
                    accept(a + (b - a) * t, &mut out);
                }
            }
            Region::VarpiJ(j) => {
                // a quarter on the stadium boundary, the rest inside
                let nb = count / 4;
                for z in self.stadium_contour(j, delta * (1.0 - 1e-9), nb) {
                    accept(z, &mut out);
                }
                let dir = Complex64::from_polar(1.0, self.ray_angle(j));
                let len = 1.0 - inner + 2.0 * delta;
                let mut i = 0;
                while out.len() < count && i < 50 * count + 1000 {
                    i += 1;
                    let t = inner - delta + len * halton(i, 2);
                    let w = delta * (2.0 * halton(i, 3) - 1.0);
                    accept(dir * Complex64::new(t, w), &mut out);
                }
            }
            Region::OutsideVarpiJ(j) => {
                // boundary-weighted: stadium contour, dense arc at the tip, the circle, interior
                let nb = (2 * count) / 5;
                for z in self.stadium_contour(j, delta * (1.0 + 1e-9), nb) {
                    accept(z, &mut out);
                }
                let alpha = self.ray_angle(j);
                let tip = count / 10;
                for i in 0..tip {
                    let off = 64.0 * delta * (i as f64 + 0.5) / tip as f64;
                    let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                    accept(Complex64::from_polar(1.0, alpha + s * (delta * 1.000001 + off)), &mut out);
                }
                let circ = count / 4;
                for i in 0..circ {
                    accept(Complex64::from_polar(1.0, alpha + 2.0 * PI * (i as f64 + 0.5) / circ as f64), &mut out);
                }
                let mut i = 0;
                while out.len() < count && i < 50 * count + 1000 {
                    i += 1;
                    let r = halton(i, 2).sqrt();
                    accept(Complex64::from_polar(r, 2.0 * PI * halton(i, 3)), &mut out);
                }
            }
        }
        if out.len() < count {
            return Err(LabyrinthError::EmptyRegion { region, wanted: count, found: out.len() });
        }
        Ok(out)
    }

    /// Points at distance `d` from segment `j`, equispaced in arc length, clipped to the closed disk.
    pub fn stadium_contour(&self, j: usize, d: f64, count: usize) -> Vec<Complex64> {
        let inner = self.inner_annulus_radius();
        let dir = Complex64::from_polar(1.0, self.ray_angle(j));
        let len = 1.0 - inner;
        let perim = 2.0 * len + 2.0 * PI * d;
        (0..count)
            .filter_map(|i| {
                let mut s = perim * (i as f64 + 0.5) / count as f64;
                let local = if s < len {
                    Complex64::new(inner + s, d)
                } else if {
                    s -= len;
                    s < PI * d
                } {
                    Complex64::new(1.0, 0.0) + Complex64::from_polar(d, PI / 2.0 - s / d)
                } else if {
                    s -= PI * d;
                    s < len
                } {
                    Complex64::new(1.0 - s, -d)
                } else {
                    s -= len;
                    Complex64::new(inner, 0.0) + Complex64::from_polar(d, -PI / 2.0 - s / d)
                };
                let z = dir * local;
                (z.norm() <= 1.0).then_some(z)
            })
            .collect()
    }

    /// Grayscale PGM (binary P5) of the region tags over `[-1,1]^2`.
    pub fn write_pgm<W: Write>(&self, size: usize, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{size} {size}\n255\n")?;
        let mut row = vec![0u8; size];
        for iy in 0..size {
            for (ix, px) in row.iter_mut().enumerate() {
                let x = -1.0 + 2.0 * (ix as f64 + 0.5) / size as f64;
                let y = 1.0 - 2.0 * (iy as f64 + 0.5) / size as f64;
                let z = Complex64::new(x, y);
                *px = if z.norm() > 1.0 { 0 } else { tag_code(&self.classify(z)) };
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

fn tag_code(tag: &RegionTag) -> u8 {
    match tag.primary() {
        Region::InnerDisk => 32,
        Region::Annulus => 64,
        Region::SigmaBand => 96,
        Region::OmegaSet => 160,
        Region::VarpiJ(_) | Region::OutsideVarpiJ(_) => 208,
        Region::OmegaJ(_) => 255,
    }
}
