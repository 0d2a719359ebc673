use crate::config::{MeshFormat, RunConfig, Tolerances};
use anyhow::{Context, Result};
use legendrian_core::contact::{
    curve_c3_from_sl2, fd_cross_check, integrate, integrate_with, legendrian_residual, matrix_norm, ContactError,
    IntegratorOptions, LegendrianCurve, Mat2, PolarGrid, SL2Value,
};
use legendrian_core::fronts::{flat_front_desitter, flat_front_h3, improper_affine_front, Front};
use legendrian_core::geometry::front_metric_density;
use legendrian_core::keylemma::{run_rounds, IterationParams, IterationReport, KeyLemmaError, RoundsReport};
use legendrian_core::labyrinth::LabyrinthSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Outcome of a command: success, or a check/certificate failure (exit code 1).
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Failed,
}

#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub params: IterationParams,
    /// Snapshot files: the initial curve, then the output of each round.
    pub curves: Vec<String>,
    pub rounds: RoundsReport,
    pub all_certificates_pass: bool,
    pub failures: Vec<String>,
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    error: String,
    config: &'a RunConfig,
    partial: Option<&'a IterationReport>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn write_snapshot(path: &Path, curve: &LegendrianCurve) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    curve.write_snapshot(&mut w)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<LegendrianCurve> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(LegendrianCurve::read_snapshot(BufReader::new(f))?)
}

fn certificate_failures(report: &IterationReport) -> Vec<String> {
    let mut out = Vec::new();
    for s in &report.steps {
        let c = &s.certificate;
        if !c.passes() {
            out.push(format!(
                "j={}: bump certified {}, (a) margin {:e}, (b) {} (c_emp {:e}, nu/8 {:e}), (c) {}",
                s.j,
                c.bump_certified,
                c.margin_a(),
                c.passes_b(),
                c.c_empirical,
                c.nu / 8.0,
                c.passes_c()
            ));
        }
    }
    out
}

pub fn construct(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let pair = cfg.initial.pair()?;
    let l0 = integrate(&pair, Complex64::new(0.0, 0.0), SL2Value::identity(), cfg.grid)?;
    let params = IterationParams::for_curve(&l0, cfg.n, cfg.eps, cfg.s, cfg.distance_resolution)?;
    let opts = cfg.sweep_options();
    write_snapshot(&out.join("L0.curve"), &l0)?;
    let (curves, rounds) = match run_rounds(&l0, &params, cfg.rounds, &opts) {
        Ok(r) => r,
        Err(e) => {
            let partial = match &e {
                KeyLemmaError::Sweep { partial, .. } => Some(partial.as_ref()),
                _ => None,
            };
            write_json(&out.join("failure.json"), &FailureRecord { error: e.to_string(), config: cfg, partial })?;
            eprintln!("construct failed: {e}");
            return Ok(Outcome::Failed);
        }
    };
    let mut names = vec!["L0.curve".to_string()];
    for (k, c) in curves.iter().enumerate() {
        let name = format!("round{}.curve", k + 1);
        write_snapshot(&out.join(&name), c)?;
        names.push(name);
    }
    let failures: Vec<String> = rounds.rounds.iter().flat_map(|r| certificate_failures(&r.report)).collect();
    let all_pass = failures.is_empty() && rounds.rounds.iter().all(|r| r.report.all_certificates_pass());
    let last = curves.last().expect("rounds >= 1");
    for &format in &cfg.formats {
        export_targets(last, &Target::ALL, format, None, &cfg.tolerances, out)?;
    }
    let manifest = Manifest {
        config: cfg.clone(),
        params,
        curves: names,
        rounds,
        all_certificates_pass: all_pass,
        failures,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    println!(
        "constructed {} round(s) of {} steps; certificates {}",
        cfg.rounds,
        2 * cfg.n,
        if all_pass { "pass" } else { "FAIL" }
    );
    Ok(if all_pass { Outcome::Ok } else { Outcome::Failed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    /// Passes when `value < limit`.
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), pass: value < limit, value, limit }
    }

    /// Passes when `value >= limit`.
    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), pass: value >= limit, value, limit }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub snapshot: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Invariants of a stored curve.
pub fn verify_curve(curve: &LegendrianCurve, tol: &Tolerances) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    checks.push(Check::below("det drift", curve.max_det_drift(), tol.det));
    let residual = legendrian_residual(curve);
    checks.push(Check::below("legendrian residual", residual.left, tol.legendrian));
    let bv = curve.base_value.matrix();
    let bv_det = (bv[(0, 0)] * bv[(1, 1)] - bv[(0, 1)] * bv[(1, 0)] - 1.0).norm();
    checks.push(Check::below("base value det", bv_det, tol.det));
    let fresh = match SL2Value::new(*bv) {
        Ok(b) => integrate_with(&curve.pair, curve.base_point, b, curve.grid, &IntegratorOptions::default()),
        Err(e) => Err(e),
    };
    let recipe = match fresh {
        Ok(f) => curve
            .samples
            .iter()
            .zip(&f.samples)
            .map(|(a, b)| matrix_norm(&(a - b)) / matrix_norm(b))
            .fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) }),
        Err(ContactError::NotSpecialLinear { .. }) => f64::INFINITY,
        Err(e) => return Err(e.into()),
    };
    checks.push(Check::below("samples match integration", recipe, tol.recipe));
    if curve.base_point.norm() == 0.0 {
        checks.push(Check::below("value at origin is id", matrix_norm(&(curve.center() - Mat2::identity())), tol.center));
    }
    let mut metric: f64 = 0.0;
    for (_, z) in curve.grid.nodes() {
        let l = front_metric_density(&curve.pair, z);
        let n = curve.pair.norm_at(z);
        metric = metric.max((l * l - 2.0 * n * n) / (n * n).max(1.0));
    }
    checks.push(Check::below("front metric at most twice induced", metric, 1e-12));
    let fd = fd_cross_check(curve, 1e-5, 5).unwrap_or(f64::INFINITY);
    checks.push(Check::below("finite-difference derivative", fd, 1e-6));
    Ok(checks)
}

/// Recorded construction results in a manifest.
pub fn verify_manifest(m: &Manifest) -> Vec<Check> {
    let mut checks = Vec::new();
    for r in &m.rounds.rounds {
        let rep = &r.report;
        let k = r.k + 1;
        let certified = rep.steps.iter().filter(|s| s.certificate.bump_certified).count();
        checks.push(Check::at_least(&format!("round {k}: bumps certified"), certified as f64, rep.steps.len() as f64));
        let a = rep.steps.iter().map(|s| s.certificate.margin_a()).fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least(&format!("round {k}: runge (a) margin"), a, f64::MIN_POSITIVE));
        let b = rep.steps.iter().map(|s| s.certificate.c_empirical - s.certificate.nu / 8.0).fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least(&format!("round {k}: runge (b) margin"), b, 0.0));
        let c = rep.steps.iter().all(|s| s.certificate.passes_c());
        checks.push(Check::at_least(&format!("round {k}: runge (c)"), c as u8 as f64, 1.0));
        let c1 = rep.steps.iter().map(|s| s.center_deviation).fold(0.0, f64::max);
        checks.push(Check::below(&format!("round {k}: C-1"), c1, m.config.tolerances.center));
        let c2 = rep.steps.iter().map(|s| s.c2_sup / s.c2_bound).fold(0.0, f64::max);
        checks.push(Check::below(&format!("round {k}: C-2 ratio"), c2, 1.0));
        let c3 = rep.c_empirical.unwrap_or(0.0);
        checks.push(Check::at_least(&format!("round {k}: C-3 c_emp"), c3, f64::MIN_POSITIVE));
        let c4 = rep.radius_margin.unwrap_or(f64::NEG_INFINITY) + rep.radius_delta.unwrap_or(0.0);
        checks.push(Check::at_least(&format!("round {k}: C-4 radius margin + delta"), c4, 0.0));
        let c5 = rep.b_needed.unwrap_or(f64::INFINITY);
        checks.push(Check::below(&format!("round {k}: C-5 b needed"), c5, f64::INFINITY));
        checks.push(Check::at_least(&format!("round {k}: main lemma bound margin"), r.main.bound, 0.0));
    }
    checks
}

pub fn verify(snapshot: &Path, manifest: Option<&Path>, tol: &Tolerances, out: Option<&Path>) -> Result<Outcome> {
    let curve = read_snapshot(snapshot)?;
    let mut checks = verify_curve(&curve, tol)?;
    if let Some(mp) = manifest {
        let text = std::fs::read_to_string(mp).with_context(|| format!("reading {}", mp.display()))?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", mp.display()))?;
        checks.extend(verify_manifest(&m));
    }
    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport { snapshot: snapshot.display().to_string(), checks, pass };
    for c in &report.checks {
        println!("{} {}: {:e} (limit {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("verify.json"), &report)?;
    }
    Ok(if pass { Outcome::Ok } else { Outcome::Failed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    H3,
    Desitter,
    Affine,
    All,
}

impl Target {
    const ALL: [Target; 3] = [Target::H3, Target::Desitter, Target::Affine];

    fn name(self) -> &'static str {
        match self {
            Self::H3 => "h3",
            Self::Desitter => "desitter",
            Self::Affine => "affine",
            Self::All => "all",
        }
    }
}

/// Smallest `|z|` of a grid node where `m11` leaves the principal branch of the logarithm.
fn branch_violation(curve: &LegendrianCurve) -> Option<f64> {
    curve
        .grid
        .nodes()
        .filter(|&(i, _)| {
            let m = curve.samples[i][(0, 0)];
            m.norm() == 0.0 || (m.re < 0.0 && m.im.abs() < 1e-12 * m.norm())
        })
        .map(|(_, z)| z.norm())
        .reduce(f64::min)
}

fn build_front(curve: &LegendrianCurve, target: Target, grid: &PolarGrid, tol: &Tolerances) -> Result<Front> {
    Ok(match target {
        Target::H3 => flat_front_h3(curve, grid, tol.singular)?,
        Target::Desitter => flat_front_desitter(curve, grid, tol.singular)?,
        Target::Affine => {
            if let Some(r) = branch_violation(curve) {
                anyhow::bail!("affine export needs the principal branch of log x11 on the disk; violated at |z| = {r}");
            }
            let c3 = curve_c3_from_sl2(curve).map_err(|e| match e {
                ContactError::Branch { m11, sup_log } => {
                    anyhow::anyhow!("principal branch violated (x11 = {m11}, sup |log x11| = {sup_log:.3}) on the unit circle")
                }
                e => e.into(),
            })?;
            improper_affine_front(&c3, grid, tol.singular)?
        }
        Target::All => unreachable!("expanded by the caller"),
    })
}

pub fn export_targets(
    curve: &LegendrianCurve,
    targets: &[Target],
    format: MeshFormat,
    grid: Option<PolarGrid>,
    tol: &Tolerances,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let grid = grid.unwrap_or(curve.grid);
    let mut written = Vec::new();
    for &t in targets {
        let front = build_front(curve, t, &grid, tol)?;
        if front.mesh.extent() < 1e-12 {
            anyhow::bail!("the {} front is a single point; export needs an immersed curve", t.name());
        }
        let path = out.join(format!("front_{}.{}", t.name(), format.extension()));
        let mut w = BufWriter::new(File::create(&path)?);
        match format {
            MeshFormat::Obj => front.mesh.write_obj(&mut w)?,
            MeshFormat::Ply => front.mesh.write_ply(&mut w)?,
        }
        w.flush()?;
        let side = out.join(format!("front_{}.json", t.name()));
        let mut s = BufWriter::new(File::create(&side)?);
        front.write_sidecar(&mut s)?;
        s.write_all(b"\n")?;
        written.push(path);
        written.push(side);
    }
    Ok(written)
}

pub fn export(
    snapshot: &Path,
    target: Target,
    format: MeshFormat,
    resolution: Option<usize>,
    tol: &Tolerances,
    out: &Path,
) -> Result<Outcome> {
    let curve = read_snapshot(snapshot)?;
    let grid = resolution.map(|r| PolarGrid { radii: r.max(2), angles: 4 * r.max(2) });
    let targets: Vec<Target> = if target == Target::All { Target::ALL.to_vec() } else { vec![target] };
    match export_targets(&curve, &targets, format, grid, tol, out) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(Outcome::Ok)
        }
        Err(e) => {
            eprintln!("export failed: {e:#}");
            Ok(Outcome::Failed)
        }
    }
}

pub fn labyrinth(n: usize, size: usize, out: &Path) -> Result<Outcome> {
    let spec = LabyrinthSpec::new(n)?;
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("labyrinth_n{n}.pgm"));
    let mut w = BufWriter::new(File::create(&path)?);
    spec.write_pgm(size, &mut w)?;
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(Outcome::Ok)
}
