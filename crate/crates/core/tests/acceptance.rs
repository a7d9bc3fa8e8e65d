//! Acceptance run: every criterion at its stated tolerance, one PASS/FAIL line
//! each. Exits 0 unless `ACCEPTANCE_STRICT=1` is set and something failed.

#[path = "support/oracle.rs"]
mod oracle;
#[path = "support/dense_basis.rs"]
mod dense_basis;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raydg::assembly::{self, AssemblyOptions, DgSpace, DirectKernels};
use raydg::driver::{self, ExperimentConfig, RunOutcome};
use raydg::marching::{self, InitialData, PlaneWave, StartScheme, StepOperator};
use raydg::offline::{self, PredefinedDirections};
use raydg::quadrature::{legendre_osc, legendre_values};
use raydg::reference::{self, ReferenceConfig, SpectralGrid};
use raydg::separation::{self, SeparationParams, SeparationVariant};
use raydg::tracker::{self, rk4_step, Ray, RayDynamics, Tolerance, TrackerSettings};
use raydg::{Medium, Mesh, Point, Result};

struct Runner {
    references: HashMap<String, (SpectralGrid, Option<f64>)>,
    verdicts: Vec<(String, bool)>,
}

impl Runner {
    fn verdict(&mut self, id: &str, pass: bool, summary: String) {
        println!("{} criterion {id}: {summary}", if pass { "PASS" } else { "FAIL" });
        self.verdicts.push((id.to_string(), pass));
    }

    /// Reference grids depend only on the medium, data, frequency and time, so
    /// rows sharing those reuse one solve.
    fn reference(&mut self, cfg: &ExperimentConfig) -> Result<(SpectralGrid, Option<f64>)> {
        let key = format!(
            "{}|{:?}|{}|{}|{:?}|{:?}|{}",
            cfg.problem.medium,
            cfg.initial,
            cfg.problem.omega.to_bits(),
            cfg.problem.t_final.to_bits(),
            cfg.reference.n,
            cfg.reference.dt,
            cfg.reference.self_check
        );
        if let Some(hit) = self.references.get(&key) {
            return Ok(hit.clone());
        }
        let got = driver::run_reference(cfg)?;
        self.references.insert(key, got.clone());
        Ok(got)
    }

    fn run(&mut self, cfg: &ExperimentConfig) -> Result<RunOutcome> {
        let t = Instant::now();
        let (grid, gap) = self.reference(cfg)?;
        let mut out = driver::run(cfg, Some(&grid))?;
        out.reference_self_gap = gap;
        let r = &out.row;
        println!(
            "    ω = {:.0}π, 1/h = {}: error {:.3}%, dof {}{}, cond {:.3e}{} ({:.1}s)",
            cfg.problem.omega / PI,
            r.inv_h,
            r.rel_l2_error_percent,
            r.dof_original,
            r.dof_pod.map(|d| format!(" → {d} (POD)")).unwrap_or_default(),
            r.cond_original,
            r.cond_pod.map(|c| format!(" → {c:.3e} (POD)")).unwrap_or_default(),
            t.elapsed().as_secs_f64()
        );
        for w in &out.warnings {
            println!("    warning: {w}");
        }
        Ok(out)
    }
}

fn within(value: f64, target: f64, band: f64) -> bool {
    (value - target).abs() <= band
}

fn example(id: u8, k: f64, n: usize) -> ExperimentConfig {
    driver::example_config(id, k * PI, n, None).expect("example configuration")
}

fn criterion_1(r: &mut Runner) -> Option<(f64, f64)> {
    let targets = [(10.0, 10, 16.856, 456.0), (20.0, 20, 14.339, 1844.0)];
    let mut errors = Vec::new();
    let mut pass = true;
    for (k, n, err, dof) in targets {
        let mut cfg = example(1, k, n);
        cfg.reference.self_check = k == 10.0;
        match r.run(&cfg) {
            Ok(out) => {
                let e = out.row.rel_l2_error_percent;
                let d = out.row.dof_original as f64;
                pass &= within(e, err, 5.0) && (d - dof).abs() <= 0.15 * dof;
                errors.push(e);
            }
            Err(e) => {
                println!("    ω = {k}π: {e}");
                pass = false;
            }
        }
    }
    r.verdict(
        "1",
        pass,
        format!("Example 1 errors {errors:.3?}% vs 16.856/14.339 ±5, dof within 15% of 456/1844"),
    );
    (errors.len() == 2).then(|| (errors[0], errors[1]))
}

fn criterion_2(r: &mut Runner, enriched: Option<(f64, f64)>) {
    let mut errors = Vec::new();
    for (k, n) in [(10.0, 100), (20.0, 200)] {
        match r.run(&driver::baseline_config(k * PI, n).unwrap()) {
            Ok(out) => errors.push(out.row.rel_l2_error_percent),
            Err(e) => println!("    baseline ω = {k}π: {e}"),
        }
    }
    let pass = match (errors.as_slice(), enriched) {
        ([e10, e20], Some((a, b))) => within(*e10, 20.11, 5.0) && e20 > e10 && b - a <= 3.0,
        _ => false,
    };
    r.verdict(
        "2",
        pass,
        format!(
            "baseline errors {errors:.3?}% (first 20.11 ±5, must increase); enriched change {:.3} points (≤ 3)",
            enriched.map(|(a, b)| b - a).unwrap_or(f64::NAN)
        ),
    );
}

fn criterion_3(r: &mut Runner) {
    let targets = [(10, 17.07), (20, 11.56), (40, 5.56)];
    let mut errors = Vec::new();
    let mut pass = true;
    let mut conds = (f64::NAN, f64::NAN);
    for (n, err) in targets {
        match r.run(&example(2, 10.0, n)) {
            Ok(out) => {
                pass &= within(out.row.rel_l2_error_percent, err, 4.0);
                errors.push(out.row.rel_l2_error_percent);
                if n == 10 {
                    conds = (out.row.cond_original, out.row.cond_pod.unwrap_or(f64::NAN));
                }
            }
            Err(e) => {
                println!("    1/h = {n}: {e}");
                pass = false;
            }
        }
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    pass &= ratios.len() == 2 && ratios.iter().all(|&q| q >= 1.4);
    let (orig, reduced) = conds;
    let orders = |v: f64, target: f64| (v / target).log10().abs() <= 2.0;
    pass &= reduced < 1e6 && orig > 1e7 && orders(reduced, 4.95e4) && orders(orig, 7.59e7);
    r.verdict(
        "3",
        pass,
        format!(
            "Example 2 errors {errors:.3?}% vs 17.07/11.56/5.56 ±4, ratios {ratios:.3?} (≥ 1.4), cond {orig:.3e} → {reduced:.3e} (> 1e7, < 1e6)"
        ),
    );
}

fn criterion_4(r: &mut Runner) {
    let mut errors = Vec::new();
    let mut max_phases = 0;
    let mut pass = true;
    for (k, n, err) in [(10.0, 10, 15.09), (20.0, 20, 11.54)] {
        match r.run(&example(3, k, n)) {
            Ok(out) => {
                pass &= within(out.row.rel_l2_error_percent, err, 5.0);
                errors.push(out.row.rel_l2_error_percent);
                max_phases = max_phases.max(out.phase_counts().into_iter().max().unwrap_or(0));
            }
            Err(e) => {
                println!("    ω = {k}π: {e}");
                pass = false;
            }
        }
    }
    pass &= max_phases <= 4;
    r.verdict(
        "4",
        pass,
        format!("Example 3 errors {errors:.3?}% vs 15.09/11.54 ±5, max phases per cell {max_phases} (≤ 4)"),
    );
}

fn criterion_5(r: &mut Runner) {
    let cfg = example(4, 10.0, 10);
    let (pass, summary) = match r.run(&cfg) {
        Ok(out) => {
            let e = out.row.rel_l2_error_percent;
            (within(e, 8.58, 4.0), format!("Example 4 error {e:.3}% vs 8.58 ±4"))
        }
        Err(e) => (false, format!("Example 4 did not complete: {e}")),
    };
    r.verdict("5", pass, summary);
    // diagnostic only: the same row with a larger penalty
    let mut stiffer = cfg;
    stiffer.problem.gamma = 20.0;
    match r.run(&stiffer) {
        Ok(out) => println!(
            "INFO criterion 5 (not gated): with gamma = 20 the error is {:.3}%",
            out.row.rel_l2_error_percent
        ),
        Err(e) => println!("INFO criterion 5 (not gated): gamma = 20 also failed: {e}"),
    }
}

fn hamiltonian_drift() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for m in [Medium::GaussianLens, Medium::Layered] {
        for d in [RayDynamics::Eikonal, RayDynamics::Normalized] {
            for _ in 0..50 {
                let x = [rng.random::<f64>(), rng.random::<f64>()];
                let a = rng.random_range(0.0..2.0 * PI);
                let mut ray = Ray::new(x, d.seed_direction(&m, x, [a.cos(), a.sin()]));
                let h0 = ray.hamiltonian(&m);
                for _ in 0..1000 {
                    ray = rk4_step(&m, &ray, 1e-3, d);
                    worst = worst.max((ray.hamiltonian(&m) - h0).abs() / h0);
                }
            }
        }
    }
    worst
}

/// Count of failed separation runs out of 10⁴.
fn separation_failures() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut failures = 0;
    for trial in 0..10_000 {
        let len = rng.random_range(0..60);
        let raw: Vec<Point> = (0..len).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let eps = rng.random_range(0.05..1.0);
        let centroid = trial % 2 == 0;
        let params = SeparationParams {
            epsilon: eps,
            defaults: if trial % 3 == 0 { vec![[1.0, 0.0]] } else { vec![] },
            variant: if centroid { SeparationVariant::Centroid } else { SeparationVariant::Representative },
        };
        let out = separation::separate(&raw, &params);
        let floor = if centroid { eps / 2.0 } else { eps };
        let ok = separation::check_separable(&out, floor) && separation::deviation(&out, &raw) <= eps * (1.0 + 1e-12);
        failures += usize::from(!ok);
    }
    failures
}

fn quadrature_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    (0..1000)
        .map(|_| {
            let k = rng.random_range(0..=20usize);
            let w = rng.random_range(-500.0..500.0);
            let want = oracle::adaptive(|x| legendre_values(k, x)[k] * C::from_polar(1.0, w * x), -1.0, 1.0, 1e-13);
            (legendre_osc(k, w) - want).norm()
        })
        .fold(0.0, f64::max)
}

fn hermitian_defect() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mesh = Mesh::new(6).unwrap();
    let dirs: Vec<Vec<Point>> = (0..mesh.n_cells())
        .map(|_| (0..rng.random_range(1..4)).map(|_| dense_basis::random_dir(&mut rng)).collect())
        .collect();
    let space = DgSpace::new(mesh, dirs, 10.0 * PI).unwrap();
    let sys = assembly::assemble(&space, &Medium::GaussianLens, &AssemblyOptions::default()).unwrap().system;
    let a = sys.stiffness.to_dense(&sys.layout);
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    (&a - a.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max) / scale
}

/// Relative energy drift over 10³ steps and the time-reversal round-trip error.
fn leapfrog_invariants() -> (f64, f64) {
    let dt = 1e-3;
    let space = DgSpace::uniform(Mesh::new(6).unwrap(), &[[1.0, 0.0], [0.6, 0.8]], 6.0 * PI).unwrap();
    let sys = assembly::assemble(&space, &Medium::Layered, &AssemblyOptions::default()).unwrap().system;
    let op = StepOperator::new(&sys).unwrap();
    assert!(marching::check_stability(&sys, &op, dt).sharp_ok());
    let data = InitialData::PlaneWaves(vec![PlaneWave::travelling([1.0, 0.0])]);
    let (u0, u1) = marching::project_initial(&space, &sys, None, &op, &data, dt, StartScheme::ForwardEuler).unwrap();
    let e0 = marching::energy(&sys, &u1.coeffs, &u0.coeffs, dt);
    let (mut prev, mut curr) = (u0.coeffs.clone(), u1.coeffs.clone());
    for _ in 0..1000 {
        op.leapfrog(&mut prev, &curr, dt);
        std::mem::swap(&mut prev, &mut curr);
    }
    let drift = (marching::energy(&sys, &curr, &prev, dt) - e0).abs() / e0;
    std::mem::swap(&mut prev, &mut curr);
    for _ in 0..1000 {
        op.leapfrog(&mut prev, &curr, dt);
        std::mem::swap(&mut prev, &mut curr);
    }
    let scale = u0.coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let back = curr.iter().zip(&u0.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
    (drift, back)
}

fn reference_plane_wave_error() -> f64 {
    let k: Point = [1.0, 1.0];
    let data = InitialData::PlaneWaves(vec![PlaneWave::travelling(k)]);
    let cfg = ReferenceConfig { n: 16, dt: 1e-4, t_final: 1.0 };
    let u = reference::reference_run(&Medium::Constant(1.0), &data, 2.0 * PI, &cfg).unwrap();
    let speed = k[0].hypot(k[1]);
    let exact = SpectralGrid::sample(16, 1.0, |x| C::from_polar(1.0, 2.0 * PI * (k[0] * x[0] + k[1] * x[1] - speed))).unwrap();
    u.relative_error_percent(&exact).unwrap() / 100.0
}

fn offline_equivalence() -> f64 {
    let mut cfg = driver::example_config(1, 4.0 * PI, 4, None).unwrap();
    cfg.problem.t_final = 0.1;
    cfg.solver.snapshots = 0;
    cfg.reference.n = Some(32);
    let store = driver::build_store(&cfg, 0.3).unwrap();
    let (grid, _) = driver::run_reference(&cfg).unwrap();
    let (online, _) = driver::run_online(&cfg, &store, Some(&grid)).unwrap();
    let medium = cfg.medium().unwrap();
    let opts = driver::assembly_options(&cfg);
    let params = online.space.kernel_params(opts.gamma, opts.weight_degree);
    let direct = driver::solve(&cfg, &medium, online.space.clone(), None, &DirectKernels(params), Some(&grid), vec![]).unwrap();
    online.coeffs.iter().zip(&direct.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Worst ratio of snap deviation to `ε + 3δ`, and count of `ε/2` separation failures, over 10³ trials.
fn snap_bounds() -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    let mut unseparated = 0;
    for trial in 0..1000 {
        let eps = rng.random_range(0.1..0.3);
        let delta = eps * rng.random_range(0.25..0.5);
        let pre = PredefinedDirections::polar(0.25, 1.75, delta).unwrap();
        let raw: Vec<Point> = (0..rng.random_range(1..40))
            .map(|_| {
                let (r, a) = (rng.random_range(0.9..1.1), rng.random_range(0.0..2.0 * PI));
                [r * f64::cos(a), r * f64::sin(a)]
            })
            .collect();
        let params = SeparationParams {
            epsilon: eps,
            defaults: if trial % 2 == 0 { vec![[1.0, 0.0]] } else { vec![] },
            variant: if trial % 3 == 0 { SeparationVariant::Representative } else { SeparationVariant::Centroid },
        };
        match offline::online_snap(std::slice::from_ref(&raw), &pre, &params) {
            Ok(s) => {
                worst = worst.max(separation::deviation(&s.sets[0], &raw) / (eps + 3.0 * delta));
                unseparated += usize::from(!separation::check_separable(&s.sets[0], eps / 2.0));
            }
            Err(_) => unseparated += 1,
        }
    }
    (worst, unseparated)
}

fn split_mismatches() -> usize {
    let mut mismatches = 0;
    for (m, axis, splits) in [(Medium::GaussianLens, 0, 3), (Medium::Layered, 0, 5), (Medium::GaussianLens, 1, 8)] {
        let mesh = Mesh::new(10).unwrap();
        let fronts: Vec<_> = [0.2, 0.5, 0.8]
            .iter()
            .map(|&b| tracker::close_front(tracker::level_line(&m, axis, b, 100, RayDynamics::Eikonal)))
            .collect();
        let mut settings = TrackerSettings {
            t_final: 0.5,
            dt: 1e-3,
            tol: Tolerance::default(),
            dynamics: RayDynamics::Eikonal,
            splits: 1,
        };
        let serial = tracker::construct_rays(&m, &mesh, &fronts, &settings).unwrap();
        settings.splits = splits;
        let split = tracker::construct_rays(&m, &mesh, &fronts, &settings).unwrap();
        mismatches += usize::from(split.capture != serial.capture);
    }
    mismatches
}

fn criterion_6(r: &mut Runner) {
    let drift = hamiltonian_drift();
    r.verdict("6a", drift <= 1e-8, format!("Hamiltonian drift {drift:.2e} (≤ 1e-8) over T = 1, dt = 1e-3, both media"));
    let fails = separation_failures();
    r.verdict("6b", fails == 0, format!("{fails} of 10⁴ separation runs violate separability or coverage"));
    let q = quadrature_error();
    r.verdict("6c", q <= 1e-10, format!("oscillatory quadrature error {q:.2e} (≤ 1e-10) over 10³ random (k, ω)"));
    let blocks = dense_basis::block_errors(4242, 24).worst();
    let herm = hermitian_defect();
    r.verdict(
        "6d",
        blocks <= 1e-9 && herm <= 1e-12,
        format!("assembly vs dense quadrature {blocks:.2e} (≤ 1e-9), Hermitian defect {herm:.2e} (≤ 1e-12)"),
    );
    let (drift, back) = leapfrog_invariants();
    r.verdict(
        "6e",
        drift <= 1e-10 && back <= 1e-8,
        format!("leapfrog energy drift {drift:.2e} per 10³ steps (≤ 1e-10), reversal {back:.2e} (≤ 1e-8)"),
    );
    let pw = reference_plane_wave_error();
    let gap = r.references.values().find_map(|(_, g)| *g);
    r.verdict(
        "6f",
        pw <= 1e-6 && gap.is_some_and(|g| g < 0.1),
        format!(
            "reference plane-wave error {pw:.2e} (≤ 1e-6), self-convergence gap {}% (< 0.1%)",
            gap.map(|g| format!("{g:.2e}")).unwrap_or_else(|| "n/a".into())
        ),
    );
    let eq = offline_equivalence();
    let (dev, unsep) = snap_bounds();
    r.verdict(
        "6g",
        eq <= 1e-12 && dev < 1.0 && unsep == 0,
        format!("offline/online field difference {eq:.2e} (≤ 1e-12), snap deviation {dev:.3} of ε+3δ, {unsep} unseparated"),
    );
    let mism = split_mismatches();
    r.verdict("6h", mism == 0, format!("{mism} split-front runs differ from the serial captures"));
}

fn main() {
    let start = Instant::now();
    let mut r = Runner { references: HashMap::new(), verdicts: Vec::new() };
    let enriched = criterion_1(&mut r);
    criterion_2(&mut r, enriched);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    let failed: Vec<&str> = r.verdicts.iter().filter(|(_, p)| !p).map(|(id, _)| id.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed{} ({:.0}s)",
        r.verdicts.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" [{}]", failed.join(", ")) },
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
