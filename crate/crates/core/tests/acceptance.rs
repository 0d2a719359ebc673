//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Sweeps at N = 8, 10, 12 are run once and shared. Criteria about the growth produced by
//! the bumps (3 to 7) also require every bump of the sweeps involved to be certified; a sweep
//! that fell back to `h = 1` leaves the curve unchanged and cannot exercise them.

use legendrian_core::contact::{
    darboux_differential, darboux_inverse, darboux_map, integrate, legendrian_residual, matrix_norm, sl2_map_residual,
    curve_c3_from_sl2, LegendrianCurve, Mat2, PolarGrid, SL2Value,
};
use legendrian_core::fronts::{flat_front_desitter, flat_front_h3, improper_affine_front, singular_set, SINGULAR_TOL};
use legendrian_core::holo::{HoloFunction, HoloPair};
use legendrian_core::keylemma::{
    default_initial_curve, run_rounds, sweep_with, FittedConstants, IterationParams, IterationReport, SweepOptions,
};
use legendrian_core::runge::{CERT_SAMPLES, ORTHO_TOL};
use num_complex::Complex64;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const EPS: f64 = 0.05;
const S: f64 = 0.2;
/// Distance-solver base resolution for all sweeps.
const RESOLUTION: usize = 64;
const LEGENDRIAN_TOL: f64 = 1e-8;
const DET_TOL: f64 = 1e-9;
const RECIPE_TOL: f64 = 1e-8;
const RUNTIME_LIMIT: Duration = Duration::from_secs(600);
const ORACLE_TOL: f64 = 1e-10;
const C_EMP_FACTOR: f64 = 4.0;
const STABILITY_FACTOR: f64 = 3.0;
const MODEL_TOL: f64 = 1e-8;
const IA_TOL: f64 = 1e-9;
const SINGULAR_FRACTION: f64 = 0.05;
const DARBOUX_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-12;

struct Run {
    initial: LegendrianCurve,
    params: IterationParams,
    curves: Vec<LegendrianCurve>,
    report: IterationReport,
    elapsed: Duration,
}

fn initial() -> &'static LegendrianCurve {
    static L0: OnceLock<LegendrianCurve> = OnceLock::new();
    L0.get_or_init(|| default_initial_curve(PolarGrid::default()).expect("initial curve"))
}

fn sweep_at(n: usize) -> &'static Result<Run, String> {
    static RUNS: [OnceLock<Result<Run, String>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = match n {
        8 => &RUNS[0],
        10 => &RUNS[1],
        12 => &RUNS[2],
        _ => unreachable!(),
    };
    slot.get_or_init(|| {
        let l0 = initial();
        let t = Instant::now();
        let params = IterationParams::for_curve(l0, n, EPS, S, RESOLUTION).map_err(|e| e.to_string())?;
        let opts = SweepOptions { resolution: RESOLUTION, step_radius: false, ..SweepOptions::default() };
        let (curves, report) = sweep_with(l0, &params, &opts).map_err(|e| e.to_string())?;
        Ok(Run { initial: l0.clone(), params, curves, report, elapsed: t.elapsed() })
    })
}

type Verdict = (bool, String);

fn require_certified(runs: &[&Run]) -> Option<String> {
    let bad: Vec<String> = runs
        .iter()
        .filter(|r| !r.report.all_bumps_certified)
        .map(|r| {
            let n = r.report.steps.iter().filter(|s| !s.certificate.bump_certified).count();
            format!("N={}: {n}/{} bumps uncertified", r.params.n, r.report.steps.len())
        })
        .collect();
    (!bad.is_empty()).then(|| bad.join(", "))
}

fn criterion_1() -> Verdict {
    let run = match sweep_at(10) {
        Ok(r) => r,
        Err(e) => return (false, format!("sweep failed: {e}")),
    };
    let mut leg: f64 = 0.0;
    let mut det: f64 = 0.0;
    for c in &run.curves {
        leg = leg.max(legendrian_residual(c).left);
        det = det.max(c.max_det_drift());
    }
    let recipe = run.report.steps.iter().map(|s| s.recipe_vs_direct).fold(0.0, f64::max);
    let pass = run.curves.len() == 20 && leg < LEGENDRIAN_TOL && det < DET_TOL && recipe < RECIPE_TOL && run.elapsed < RUNTIME_LIMIT;
    let note = if run.report.all_bumps_certified { "" } else { "; bumps fell back to h = 1" };
    (
        pass,
        format!(
            "N=10, {} curves: residual {leg:.1e}, det drift {det:.1e}, recipe vs direct {recipe:.1e}, runtime {:.1}s{note}",
            run.curves.len(),
            run.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Verdict {
    let grid = PolarGrid::default();
    let z0 = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let cases: [(HoloPair, fn(Complex64) -> Mat2); 2] = [
        (
            HoloPair::new(HoloFunction::constant(Complex64::new(2f64.sqrt(), 0.0)), HoloFunction::zero()),
            |z| Mat2::new(z.cosh(), z.sinh(), z.sinh(), z.cosh()),
        ),
        (
            HoloPair::new(HoloFunction::constant(one), HoloFunction::constant(Complex64::new(0.0, -1.0))),
            |z| Mat2::new(Complex64::new(1.0, 0.0), z * 2f64.sqrt(), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (pair, exact) in &cases {
        let c = match integrate(pair, z0, SL2Value::identity(), grid) {
            Ok(c) => c,
            Err(e) => return (false, format!("integration failed: {e}")),
        };
        for (i, z) in grid.nodes() {
            let e = exact(z) - c.samples[i];
            worst = worst.max(e.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
    }
    (worst < ORACLE_TOL && grid.len() >= 10_000, format!("{} nodes, max error {worst:.1e}", grid.len()))
}

fn criterion_3() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [8, 10] {
        let run = match sweep_at(n) {
            Ok(r) => r,
            Err(e) => return (false, format!("N={n} sweep failed: {e}")),
        };
        let steps = &run.report.steps;
        let ok = steps
            .iter()
            .filter(|s| {
                let c = &s.certificate;
                c.passes() && c.samples_per_region >= CERT_SAMPLES && c.orthogonality < ORTHO_TOL && c.u[0].abs() > 1.0 - 2.0 / n as f64
            })
            .count();
        let certified = steps.iter().filter(|s| s.certificate.bump_certified).count();
        let worst_omega = steps.iter().map(|s| s.certificate.bump_margin_omega).fold(f64::INFINITY, f64::min);
        let worst_off = steps.iter().map(|s| s.certificate.bump_margin_off).fold(f64::INFINITY, f64::min);
        let ortho = steps.iter().map(|s| s.certificate.orthogonality).fold(0.0, f64::max);
        pass &= ok == 2 * n;
        parts.push(format!(
            "N={n}: {ok}/{} certify, bumps certified {certified}, worst bump margins omega {worst_omega:.3e} off {worst_off:.3e}, orthogonality {ortho:.1e}",
            2 * n
        ));
    }
    (pass, parts.join("; "))
}

fn c_emp_of(run: &Run) -> f64 {
    run.report.c_empirical.unwrap_or(0.0)
}

fn criterion_4() -> Verdict {
    let runs: Vec<&Run> = match [8, 10, 12].map(sweep_at) {
        [Ok(a), Ok(b), Ok(c)] => vec![a, b, c],
        _ => return (false, "a sweep failed".into()),
    };
    let c2 = runs.iter().all(|r| r.report.c2_holds);
    let cs: Vec<f64> = runs.iter().map(|r| c_emp_of(r)).collect();
    let ratio = cs[0].max(cs[2]) / cs[0].min(cs[2]);
    let mut pass = c2 && cs.iter().all(|&c| c > 0.0) && ratio <= C_EMP_FACTOR;
    let mut msg = format!(
        "C-2 holds {c2}; c_emp N=8 {:.3e}, N=10 {:.3e}, N=12 {:.3e}; N=8/N=12 ratio {ratio:.2}",
        cs[0], cs[1], cs[2]
    );
    if let Some(why) = require_certified(&runs) {
        pass = false;
        msg.push_str(&format!("; {why}"));
    }
    (pass, msg)
}

fn criterion_5() -> Verdict {
    let run = match sweep_at(10) {
        Ok(r) => r,
        Err(e) => return (false, format!("sweep failed: {e}")),
    };
    let (Some(r0), Some(r1), Some(delta)) = (run.report.initial_radius, run.report.final_radius, run.report.radius_delta) else {
        return (false, "radii missing".into());
    };
    let margin = r1.radius - (r0.radius + S - delta);
    let pass = margin >= 0.0 && delta < S / 5.0;
    (
        pass,
        format!(
            "N=10: radius L_0 {:.5}, L_2N {:.5}, required {:.5}, margin {margin:.4}, delta {delta:.1e} (limit {:.2})",
            r0.radius,
            r1.radius,
            r0.radius + S - delta,
            S / 5.0
        ),
    )
}

fn criterion_6() -> Verdict {
    let run = match sweep_at(10) {
        Ok(r) => r,
        Err(e) => return (false, format!("sweep failed: {e}")),
    };
    let n = run.params.n as f64;
    let sup = run.curves.last().map(|c| c.max_norm()).unwrap_or(f64::INFINITY);
    let b = run.report.b_empirical.unwrap_or(f64::INFINITY);
    let bound = run.report.sup_initial * (1.0 + 32.0 * S * S + b / n.sqrt()).sqrt();
    let first = b.is_finite() && sup <= bound;
    let opts = SweepOptions { resolution: RESOLUTION, step_radius: false, ..SweepOptions::default() };
    let l0 = &run.initial;
    let params = match IterationParams::for_curve(l0, 8, EPS, S, RESOLUTION) {
        Ok(p) => p,
        Err(e) => return (false, e.to_string()),
    };
    let (rounds, certified) = match run_rounds(l0, &params, 3, &opts) {
        Ok((_, r)) => {
            let cert = r.rounds.iter().all(|x| x.report.all_bumps_certified);
            (r, cert)
        }
        Err(e) => return (false, format!("rounds failed: {e}")),
    };
    let mut pass = first && rounds.below_composed && rounds.ball_margin > 0.0;
    let composed = rounds.rounds.last().map(|r| r.tau_out).unwrap_or(f64::NAN);
    let final_sup = rounds.rounds.last().map(|r| r.sup_norm).unwrap_or(f64::NAN);
    let mut msg = format!(
        "N=10 sup|L_2N| {sup:.4} <= {bound:.4} (b_emp {b:.2e}, b needed {:.3}); 3 rounds at N=8: sup {final_sup:.4} vs composed {composed:.4}, ball margin {:.4}",
        run.report.b_needed.unwrap_or(f64::NAN),
        rounds.ball_margin
    );
    if let Some(why) = require_certified(&[run]) {
        pass = false;
        msg.push_str(&format!("; {why}"));
    } else if !certified {
        pass = false;
        msg.push_str("; round bumps uncertified");
    }
    (pass, msg)
}

fn criterion_7() -> Verdict {
    let runs: Vec<&Run> = match [8, 10, 12].map(sweep_at) {
        [Ok(a), Ok(b), Ok(c)] => vec![a, b, c],
        _ => return (false, "a sweep failed".into()),
    };
    let fitted: Vec<FittedConstants> = runs.iter().map(|r| r.report.fitted.unwrap_or_default()).collect();
    let reference = fitted[0].max(&fitted[2]);
    let margin = reference.min_margin(&runs[1].report.estimates);
    let mut unstable = Vec::new();
    for ((name, a), (_, b)) in fitted[0].entries().into_iter().zip(fitted[2].entries()) {
        if a.max(b) / a.min(b) > STABILITY_FACTOR {
            unstable.push(format!("{name} {a:.2e}/{b:.2e}"));
        }
    }
    let present = fitted[0].entries().len() == 7 && fitted[2].entries().len() == 7;
    let mut pass = margin >= 0.0 && unstable.is_empty() && present;
    let listing: Vec<String> = reference.entries().iter().map(|(k, v)| format!("{k}={v:.2e}")).collect();
    let mut msg = format!("N=10 min margin {margin:.3e} with max(N=8, N=12) constants [{}]", listing.join(" "));
    if !present {
        msg.push_str("; some estimates had no boundary point in a corridor");
    }
    if !unstable.is_empty() {
        msg.push_str(&format!("; unstable: {}", unstable.join(", ")));
    }
    if let Some(why) = require_certified(&runs) {
        pass = false;
        msg.push_str(&format!("; {why}"));
    }
    (pass, msg)
}

fn criterion_8() -> Verdict {
    let run = match sweep_at(10) {
        Ok(r) => r,
        Err(e) => return (false, format!("sweep failed: {e}")),
    };
    let last = run.curves.last().expect("steps");
    let grid = last.grid;
    let mut msg = Vec::new();
    let mut pass = true;
    match flat_front_h3(last, &grid, SINGULAR_TOL) {
        Ok(f) => {
            pass &= f.stats.model_error < MODEL_TOL && f.stats.ball_radius.unwrap_or(1.0) < 1.0;
            msg.push(format!("H3 det error {:.1e}", f.stats.model_error));
        }
        Err(e) => {
            pass = false;
            msg.push(format!("H3 front: {e}"));
        }
    }
    match flat_front_desitter(last, &grid, SINGULAR_TOL) {
        Ok(f) => {
            pass &= f.stats.model_error < MODEL_TOL;
            msg.push(format!("de Sitter norm error {:.1e}", f.stats.model_error));
        }
        Err(e) => {
            pass = false;
            msg.push(format!("de Sitter front: {e}"));
        }
    }
    match curve_c3_from_sl2(last).map_err(|e| e.to_string()).and_then(|c3| {
        improper_affine_front(&c3, &grid, SINGULAR_TOL).map_err(|e| e.to_string())
    }) {
        Ok(f) => {
            pass &= f.stats.model_error < IA_TOL;
            msg.push(format!("affine forms gap {:.1e}", f.stats.model_error));
        }
        Err(e) => {
            pass = false;
            msg.push(format!("affine front: {e}"));
        }
    }
    let one_z = HoloPair::new(HoloFunction::constant(Complex64::new(1.0, 0.0)), HoloFunction::from_real(&[0.0, 1.0]));
    match singular_set(&one_z, 201, SINGULAR_TOL) {
        Ok(s) => {
            let cell = s.rho.cell();
            let pts: Vec<&Complex64> = s.contours.iter().flatten().collect();
            let off = pts.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            let lo = pts.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let ok = !pts.is_empty() && off <= cell && lo <= -1.0 + cell + 1e-12 && hi >= 1.0 - cell - 1e-12;
            pass &= ok;
            msg.push(format!("(1,z) contour off-axis {off:.1e}, ends {lo:.3}..{hi:.3} (cell {cell:.3})"));
        }
        Err(e) => {
            pass = false;
            msg.push(format!("singular set: {e}"));
        }
    }
    match singular_set(&last.pair, 201, SINGULAR_TOL) {
        Ok(s) => {
            pass &= s.fraction < SINGULAR_FRACTION;
            msg.push(format!("driver singular fraction {:.4}", s.fraction));
        }
        Err(e) => {
            pass = false;
            msg.push(format!("singular set: {e}"));
        }
    }
    (pass, msg.join(", "))
}

/// splitmix64 in [-1, 1).
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }

    fn complex(&mut self, scale: f64) -> Complex64 {
        Complex64::new(self.next(), self.next()) * scale
    }

    fn poly(&mut self, degree: usize, scale: f64) -> HoloFunction {
        HoloFunction::new((0..=degree).map(|_| self.complex(scale)).collect()).expect("small degree")
    }
}

fn criterion_9() -> Verdict {
    let mut rng = Rng(20240917);
    let grid = PolarGrid { radii: 21, angles: 64 };
    let mut residual: f64 = 0.0;
    for k in 0..20 {
        let f = rng.poly(1 + k % 4, 0.4);
        let g = rng.poly(1 + (k + 1) % 4, 0.4);
        let (fdg, _) = f.mul_truncated(&g.derivative());
        let h = match fdg.scale(Complex64::new(-1.0, 0.0)).antiderivative(rng.complex(0.2)) {
            Ok(h) => h,
            Err(e) => return (false, e.to_string()),
        };
        let (df, dg, dh) = (f.derivative(), g.derivative(), h.derivative());
        let r = sl2_map_residual(
            |z| {
                let p = [g.eval_unchecked(z), f.eval_unchecked(z), h.eval_unchecked(z)];
                let dp = [dg.eval_unchecked(z), df.eval_unchecked(z), dh.eval_unchecked(z)];
                (*darboux_map(p).expect("bounded").matrix(), darboux_differential(p, dp))
            },
            &grid,
        );
        let scale = 1.0 + f.l1_norm() * g.l1_norm();
        residual = residual.max(r.omega_sl / scale);
    }
    let mut trip: f64 = 0.0;
    for _ in 0..1000 {
        let p = [rng.complex(0.1), rng.complex(0.1), rng.complex(0.1)];
        let m = darboux_map(p).expect("small");
        match darboux_inverse(m.matrix()) {
            Ok(q) => {
                for (a, b) in p.iter().zip(&q) {
                    trip = trip.max((a - b).norm());
                }
            }
            Err(e) => return (false, e.to_string()),
        }
    }
    let id = matrix_norm(&(Mat2::identity() - darboux_map([Complex64::new(0.0, 0.0); 3]).unwrap().matrix()));
    (
        residual < DARBOUX_TOL && trip < ROUND_TRIP_TOL && id == 0.0,
        format!("20 curves, max relative residual {residual:.1e}; 1000 round trips near id, max error {trip:.1e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("legendrian exactness", criterion_1),
        ("integrator oracle", criterion_2),
        ("runge certificates", criterion_3),
        ("C-2/C-3 with a single c_emp", criterion_4),
        ("radius growth", criterion_5),
        ("boundedness", criterion_6),
        ("distance estimates", criterion_7),
        ("front invariants", criterion_8),
        ("darboux correspondence", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = f();
        failed += !pass as usize;
        println!("criterion {} {name}: {} ({detail})", k + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {}/9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
