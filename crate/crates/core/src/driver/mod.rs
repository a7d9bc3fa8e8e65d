//! End-to-end experiments: ray construction, separation, assembly, optional
//! POD, time marching and comparison with the pseudospectral reference.

pub mod config;
pub mod output;

use std::time::Instant;

use crate::assembly::{self, pod, AssemblyOptions, CellWeights, DgSpace, DirectKernels, PairSource, C};
use crate::error::{Error, Result};
use crate::marching::{self, MarchConfig, StabilityReport, StepOperator};
use crate::medium::{Medium, Mesh, Point};
use crate::offline::{self, OfflineStore, PredefinedDirections, StoreMeta};
use crate::reference::{self, ReferenceConfig, SpectralGrid};
use crate::separation::{self, SeparationParams};
use crate::tracker::{self, RayConstruction, Tolerance, TrackerSettings};

pub use config::{parse_frequency, ExperimentConfig};

/// Largest tolerated amplification over `[0, T]` from an indefinite stiffness.
pub const INDEFINITE_GROWTH_LIMIT: f64 = 10.0;

/// One line of the results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub omega: f64,
    pub inv_h: usize,
    pub omega_h: f64,
    pub cond_original: f64,
    pub cond_pod: Option<f64>,
    pub dof_original: usize,
    pub dof_pod: Option<usize>,
    pub rel_l2_error_percent: f64,
    /// Seconds; kept out of the deterministic results table.
    pub wall_time: f64,
}

/// Seconds spent per stage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTimes {
    pub rays: f64,
    pub assembly: f64,
    pub pod: f64,
    pub marching: f64,
    pub reference: f64,
    pub comparison: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub row: ResultRow,
    pub space: DgSpace,
    /// Final field in the unreduced basis.
    pub coeffs: Vec<C>,
    /// Snapshots in the unreduced basis.
    pub snapshots: Vec<marching::WaveField>,
    pub dg_grid: SpectralGrid,
    pub reference: SpectralGrid,
    /// Relative gap (percent) between the reference and its refinement, if checked.
    pub reference_self_gap: Option<f64>,
    pub stability: StabilityReport,
    pub rays: Option<RayConstruction>,
    pub warnings: Vec<String>,
    pub times: StageTimes,
}

impl RunOutcome {
    pub fn phase_counts(&self) -> Vec<usize> {
        self.space.directions.iter().map(Vec::len).collect()
    }
}

fn travelling_wave(grad: Point) -> config::WaveConfig {
    config::WaveConfig {
        amplitude: [1.0, 0.0],
        velocity: [-1.0, 0.0],
        grad,
        offset: 0.0,
    }
}

/// Configuration of Examples 1–4 at frequency `omega` on an `n × n` mesh.
///
/// `pod` overrides the example's truncation threshold (`Some(None)` disables it).
pub fn example_config(id: u8, omega: f64, n: usize, pod: Option<Option<f64>>) -> Result<ExperimentConfig> {
    let mut rays = config::RaysConfig::default();
    let mut medium = "c1";
    let mut waves = vec![travelling_wave([1.0, 0.0])];
    let mut eta = None;
    let mut slice = 0.3;
    match id {
        1 => {}
        2 => eta = Some(1e-7),
        3 => {
            eta = Some(1e-7);
            waves.push(travelling_wave([0.0, 1.0]));
            rays.defaults = vec![[1.0, 0.0], [0.0, 1.0]];
            rays.fronts.push(config::FrontFamily { axis: 1, betas: config::default_betas() });
        }
        4 => {
            eta = Some(1e-7);
            medium = "c2";
            slice = 0.37;
        }
        _ => return Err(Error::config(format!("unknown example {id}; expected 1 to 4"))),
    }
    let cfg = ExperimentConfig {
        problem: config::ProblemConfig {
            medium: medium.into(),
            omega,
            n,
            t_final: 1.0,
            dt: None,
            gamma: 10.0,
        },
        initial: config::InitialConfig { waves },
        rays,
        solver: config::SolverConfig { pod: pod.unwrap_or(eta), ..Default::default() },
        reference: Default::default(),
        output: config::OutputConfig { slice_x2: slice },
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Plain bilinear IPDG on the Example 1 problem.
pub fn baseline_config(omega: f64, n: usize) -> Result<ExperimentConfig> {
    let mut cfg = example_config(1, omega, n, Some(None))?;
    cfg.solver.baseline = true;
    cfg.rays.enabled = false;
    Ok(cfg)
}

/// Reference resolution for a configuration, with overrides applied.
pub fn reference_config(cfg: &ExperimentConfig) -> ReferenceConfig {
    let mut r = ReferenceConfig::for_frequency(cfg.problem.omega, cfg.problem.t_final);
    if let Some(n) = cfg.reference.n {
        r.n = n;
        r.dt = ReferenceConfig::default_dt(n, r.t_final);
    }
    if let Some(dt) = cfg.reference.dt {
        r.dt = dt;
    }
    r
}

/// Runs the reference solver for a configuration; with `self_check`, also the
/// refined run, returning the relative gap in percent.
pub fn run_reference(cfg: &ExperimentConfig) -> Result<(SpectralGrid, Option<f64>)> {
    let medium = cfg.medium()?;
    let rc = reference_config(cfg);
    let data = cfg.initial.data();
    let grid = reference::reference_run(&medium, &data, cfg.problem.omega, &rc)?;
    let gap = if cfg.reference.self_check {
        let fine = reference::reference_run(&medium, &data, cfg.problem.omega, &rc.refined())?;
        // compare on the coarse grid points (every other fine point)
        let sub: Vec<C> = (0..rc.n)
            .flat_map(|j| {
                let fine = &fine;
                (0..rc.n).map(move |i| fine.values[2 * j * fine.n + 2 * i])
            })
            .collect();
        let sub = SpectralGrid::new(rc.n, fine.time, sub)?;
        Some(grid.relative_error_percent(&sub)?)
    } else {
        None
    };
    Ok((grid, gap))
}

/// Raw captured direction multisets, or `None` when the ray stage is off.
pub fn trace_phases(cfg: &ExperimentConfig, medium: &Medium, mesh: &Mesh) -> Result<Option<RayConstruction>> {
    let r = &cfg.rays;
    if cfg.solver.baseline || !r.enabled {
        return Ok(None);
    }
    let dynamics = r.dynamics.dynamics();
    let fronts: Vec<Vec<_>> = r
        .fronts
        .iter()
        .flat_map(|fam| {
            fam.betas.iter().map(move |&b| {
                tracker::close_front(tracker::level_line(medium, fam.axis, b, r.samples, dynamics))
            })
        })
        .collect();
    let settings = TrackerSettings {
        t_final: cfg.problem.t_final,
        dt: cfg.ray_dt(),
        tol: Tolerance::new(r.alpha_x, r.alpha_p)?,
        dynamics,
        splits: r.splits,
    };
    tracker::construct_rays(medium, mesh, &fronts, &settings).map(Some)
}

pub fn separation_params(cfg: &ExperimentConfig) -> SeparationParams {
    SeparationParams {
        epsilon: cfg.rays.epsilon,
        defaults: cfg.rays.defaults.clone(),
        variant: cfg.rays.variant.variant(),
    }
}

/// Per-cell direction sets from the separated captures (or the defaults).
pub fn direction_sets(cfg: &ExperimentConfig, mesh: &Mesh, rays: Option<&RayConstruction>) -> Vec<Vec<Point>> {
    if cfg.solver.baseline {
        return vec![vec![[0.0, 0.0]]; mesh.n_cells()];
    }
    match rays {
        Some(r) => separation::separate_all(&r.capture.sets, &separation_params(cfg)),
        None => vec![cfg.rays.defaults.clone(); mesh.n_cells()],
    }
}

/// Runs the whole pipeline with fresh kernels.
pub fn run(cfg: &ExperimentConfig, reference: Option<&SpectralGrid>) -> Result<RunOutcome> {
    let medium = cfg.medium()?;
    let mesh = Mesh::new(cfg.problem.n)?;
    let t = Instant::now();
    let rays = trace_phases(cfg, &medium, &mesh).map_err(|e| e.in_stage("ray construction"))?;
    let dirs = direction_sets(cfg, &mesh, rays.as_ref());
    let ray_time = t.elapsed().as_secs_f64();
    let space = DgSpace::new(mesh, dirs, cfg.problem.omega)?;
    let opts = assembly_options(cfg);
    let params = space.kernel_params(opts.gamma, opts.weight_degree);
    let mut out = solve(cfg, &medium, space, rays, &DirectKernels(params), reference, Vec::new())?;
    out.times.rays = ray_time;
    out.row.wall_time += ray_time;
    Ok(out)
}

/// Metadata an offline store must match to serve `cfg`.
pub fn store_meta(cfg: &ExperimentConfig) -> Result<StoreMeta> {
    let opts = assembly_options(cfg);
    Ok(StoreMeta {
        cells_per_side: cfg.problem.n,
        params: assembly::KernelParams {
            omega: cfg.problem.omega,
            h: cfg.h(),
            gamma: opts.gamma,
            weight_degree: opts.weight_degree,
        },
        medium_fingerprint: cfg.medium()?.fingerprint(),
    })
}

/// Offline stage: polar predefined directions over the medium's slowness annulus.
pub fn build_store(cfg: &ExperimentConfig, delta: f64) -> Result<OfflineStore> {
    let pre = PredefinedDirections::for_medium(&cfg.medium()?, delta)?;
    OfflineStore::build(store_meta(cfg)?, pre)
}

/// Bookkeeping of an online run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OnlineStats {
    pub fresh_blocks: usize,
    pub annulus_violations: usize,
}

/// Online stage: rays, snapping onto the store's directions, store-backed assembly.
pub fn run_online(
    cfg: &ExperimentConfig,
    store: &OfflineStore,
    reference: Option<&SpectralGrid>,
) -> Result<(RunOutcome, OnlineStats)> {
    if cfg.solver.baseline || !cfg.rays.enabled {
        return Err(Error::config("the online stage needs ray construction"));
    }
    store.meta.check(&store_meta(cfg)?)?;
    let medium = cfg.medium()?;
    let mesh = Mesh::new(cfg.problem.n)?;
    let t = Instant::now();
    let rays = trace_phases(cfg, &medium, &mesh).map_err(|e| e.in_stage("ray construction"))?;
    let raw = &rays.as_ref().expect("rays enabled").capture.sets;
    let snapped = offline::online_snap(raw, &store.pre, &separation_params(cfg)).map_err(|e| e.in_stage("snapping"))?;
    let ray_time = t.elapsed().as_secs_f64();
    let mut warnings = Vec::new();
    if snapped.annulus_violations > 0 {
        warnings.push(format!(
            "{} separated directions lie outside the annulus ({}, {}); their snap distance is unbounded",
            snapped.annulus_violations, store.pre.inner, store.pre.outer
        ));
    }
    let space = DgSpace::new(mesh, snapped.sets, cfg.problem.omega)?;
    let source = store.online(&cfg.rays.defaults);
    let mut out = solve(cfg, &medium, space, rays, &source, reference, warnings)?;
    out.times.rays = ray_time;
    out.row.wall_time += ray_time;
    let stats = OnlineStats {
        fresh_blocks: source.fresh_count(),
        annulus_violations: snapped.annulus_violations,
    };
    Ok((out, stats))
}

pub fn assembly_options(cfg: &ExperimentConfig) -> AssemblyOptions {
    AssemblyOptions {
        gamma: cfg.problem.gamma,
        weight_degree: cfg.solver.weight_degree,
        weight_tolerance: cfg.solver.weight_tolerance,
    }
}

/// Assembly through `source`, marching and error evaluation on a fixed space.
pub fn solve(
    cfg: &ExperimentConfig,
    medium: &Medium,
    space: DgSpace,
    rays: Option<RayConstruction>,
    source: &dyn PairSource,
    reference: Option<&SpectralGrid>,
    mut warnings: Vec<String>,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut times = StageTimes::default();
    let opts = assembly_options(cfg);
    let t = Instant::now();
    let weights = CellWeights::from_medium(medium, &space.mesh, opts.weight_degree, opts.weight_tolerance);
    if weights.flagged > 0 {
        warnings.push(format!(
            "{} cells exceed the weight expansion tolerance (max residual {:e})",
            weights.flagged, weights.max_residual
        ));
    }
    let params = space.kernel_params(opts.gamma, opts.weight_degree);
    let assembled = assembly::assemble_with(&space, &weights, params, source).map_err(|e| e.in_stage("assembly"))?;
    times.assembly = t.elapsed().as_secs_f64();
    let full = assembled.system;
    let cond_original = full.weighted_mass_condition();
    let dof_original = full.layout.n_dofs();

    let t = Instant::now();
    let (system, transform) = match cfg.solver.pod {
        Some(eta) => {
            let (s, tr) = pod::pod_truncate(&full, eta).map_err(|e| e.in_stage("POD"))?;
            (s, Some(tr))
        }
        None => (full, None),
    };
    let cond_pod = transform.as_ref().map(|_| system.weighted_mass_condition());
    let dof_pod = transform.as_ref().map(|_| system.layout.n_dofs());
    times.pod = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let dt = cfg.dt();
    let op = StepOperator::new(&system).map_err(|e| e.in_stage("time marching"))?;
    let stability = marching::check_stability(&system, &op, dt);
    if !stability.reliable() {
        warnings.push("stability estimate did not converge; reported values are best estimates".into());
    }
    if !stability.sharp_ok() {
        return Err(Error::config(format!(
            "time step {dt} violates the leapfrog bound (dt² λ_max = {:.3} > 4); use a smaller step",
            dt * dt * stability.lambda_max.value
        ))
        .in_stage("time marching"));
    }
    if !stability.definite() {
        let growth = stability.growth_over(cfg.problem.t_final);
        let msg = format!(
            "stiffness is indefinite on the enriched space (λ_min ≈ {:.3e}, growth e^(T√−λ_min) ≈ {growth:.3e}); \
             increase gamma or the POD threshold",
            stability.lambda_min.value
        );
        if growth > INDEFINITE_GROWTH_LIMIT {
            return Err(Error::config(msg).in_stage("time marching"));
        }
        warnings.push(msg);
    }
    if !stability.stated_ok() {
        warnings.push(format!(
            "dt ‖A‖₂ = {:.3e} ≥ 1; the sharp leapfrog bound holds (dt² λ_max = {:.3})",
            dt * stability.stiffness_norm.value,
            dt * dt * stability.lambda_max.value
        ));
    }
    let data = cfg.initial.data();
    let (u0, u1) = marching::project_initial(
        &space,
        &system,
        transform.as_ref(),
        &op,
        &data,
        dt,
        cfg.solver.start.scheme(),
    )
    .map_err(|e| e.in_stage("initial projection"))?;
    let march = MarchConfig {
        dt,
        t_final: cfg.problem.t_final,
        snapshots: cfg.solver.snapshots,
        start: cfg.solver.start.scheme(),
    };
    let result = marching::run(&march, &op, u0, u1).map_err(|e| e.in_stage("time marching"))?;
    let expand = |c: &[C]| match &transform {
        Some(tr) => tr.expand(c),
        None => c.to_vec(),
    };
    let coeffs = expand(&result.last.coeffs);
    let snapshots = result
        .snapshots
        .iter()
        .map(|s| marching::WaveField { coeffs: expand(&s.coeffs), time: s.time })
        .collect();
    times.marching = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (reference, reference_self_gap) = match reference {
        Some(r) => {
            let want = reference_config(cfg);
            if r.n != want.n || (r.time - cfg.problem.t_final).abs() > 1e-12 {
                return Err(Error::config("supplied reference grid does not match the configuration"));
            }
            (r.clone(), None)
        }
        None => run_reference(cfg).map_err(|e| e.in_stage("reference"))?,
    };
    times.reference = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let dg_grid = reference::sample_dg(&space, &coeffs, reference.n, reference.time)?;
    let err = dg_grid.relative_error_percent(&reference)?;
    times.comparison = t.elapsed().as_secs_f64();

    let h = space.mesh.h();
    let row = ResultRow {
        omega: cfg.problem.omega,
        inv_h: cfg.problem.n,
        omega_h: cfg.problem.omega * h,
        cond_original,
        cond_pod,
        dof_original,
        dof_pod,
        rel_l2_error_percent: err,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        config: cfg.clone(),
        row,
        space,
        coeffs,
        snapshots,
        dg_grid,
        reference,
        reference_self_gap,
        stability,
        rays,
        warnings,
        times,
    })
}
