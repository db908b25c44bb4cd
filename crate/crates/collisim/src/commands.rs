use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use collisim_core::lindblad::{
    collision_limit_check, quantum_jump_trajectory, tilted_lindblad_scgf, JumpOptions, LindbladModel, ScgfOptions,
    ScgfPoint, DENSE_SUPEROPERATOR_CAP,
};
use collisim_core::observables::{
    pxp_sector_prediction, stationary_values, time_integral_estimates, transient_series, SpaceTimeOffset,
};
use collisim_core::singlebody::{analytic_activity, analytic_correlation, detuning_phase_scan, SingleBodyParams};
use collisim_core::stats::DEFAULT_BATCHES;
use collisim_core::tilted::{s_scan, PhaseRow, TiltedOptions};
use collisim_core::trajectory::TrajectorySampler;
use collisim_core::{DensityMatrix, ModelParams, PureState};

use crate::cache::KrausCache;
use crate::checks::{self, CheckOutcome};
use crate::config::{Command, Manifest, RunConfig};
use crate::io::{csv_writer, num, write_trajectory_binary, write_trajectory_csv};
use crate::runner::{self, ordered_map, try_ordered_map};
use crate::RunError;

pub const C01: SpaceTimeOffset = SpaceTimeOffset { di: 0, dt_steps: 1 };

#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub unconverged: usize,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Debug)]
pub struct Report {
    pub manifest: Manifest,
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    /// A failed criterion or, under `strict`, an unconverged grid point.
    pub fn status(&self) -> Result<(), RunError> {
        let failed: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
        if !failed.is_empty() {
            return Err(RunError::Validation(failed));
        }
        if self.manifest.config.strict && self.manifest.unconverged > 0 {
            return Err(RunError::Convergence(self.manifest.unconverged));
        }
        Ok(())
    }
}

/// Runs one pipeline and writes `manifest.json` next to its outputs.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Report, RunError> {
    cfg.validate(command)?;
    let workers = cfg.resolved_workers();
    fs::create_dir_all(&cfg.output)?;
    let start = Instant::now();
    let out = cfg.output.as_path();
    let cache = KrausCache::new(cfg.cache.clone());
    let outcome = runner::pool(workers)?.install(|| match command {
        Command::Simulate => simulate(cfg, out, &cache),
        Command::Ensemble => ensemble(cfg, out, &cache),
        Command::PhaseDiagram => phase_diagram(cfg, out, &cache),
        Command::Lindblad => lindblad(cfg, out),
        Command::Singlebody => singlebody(cfg, out),
        Command::Validate => validate(cfg, out),
    })?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        config: cfg.clone(),
        seed: cfg.seed,
        workers,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs: outcome.outputs,
        unconverged: outcome.unconverged,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(Report { manifest, checks: outcome.checks })
}

fn rel(out: &Path, path: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).display().to_string()
}

fn subdir(out: &Path, name: &str) -> Result<PathBuf, RunError> {
    let dir = out.join(name);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn with_activity(offsets: &[SpaceTimeOffset]) -> Vec<SpaceTimeOffset> {
    let mut all = vec![SpaceTimeOffset::ACTIVITY];
    all.extend(offsets.iter().filter(|o| !o.is_activity()));
    all
}

fn label(o: &SpaceTimeOffset) -> String {
    if o.is_activity() {
        "activity".into()
    } else {
        o.label()
    }
}

fn simulate(cfg: &RunConfig, out: &Path, cache: &KrausCache) -> Result<Outcome, RunError> {
    let params = cfg.params()?;
    let kf = cache.get_or_build(&params)?;
    let sampler = TrajectorySampler::new(&kf);
    let psi0 = PureState::basis(kf.dim(), cfg.initial);
    let offsets = with_activity(&cfg.offsets());
    let dir = subdir(out, "trajectories")?;
    let indices: Vec<u64> = (0..cfg.trajectories as u64).collect();
    let per_trajectory = try_ordered_map(&indices, |&i| {
        let rec = sampler.sample(&psi0, cfg.steps, cfg.seed, i, cfg.occupations)?;
        let mut files = vec![dir.join(format!("traj_{i:04}.csv"))];
        write_trajectory_csv(&files[0], &rec)?;
        if cfg.binary {
            files.push(dir.join(format!("traj_{i:04}.bin")));
            write_trajectory_binary(&files[1], &rec)?;
        }
        let estimates = time_integral_estimates(&rec, &offsets, DEFAULT_BATCHES)?;
        let l = rec.sites() as f64;
        let mut ones = 0u64;
        let running: Vec<f64> = rec
            .outcomes
            .iter()
            .enumerate()
            .map(|(t, k)| {
                ones += k.count_ones() as u64;
                ones as f64 / (l * (t + 1) as f64)
            })
            .collect();
        Ok((files, estimates, running))
    })?;

    let mut outputs = Vec::new();
    let est_path = out.join("estimators.csv");
    let mut w = csv_writer(&est_path, "estimators", &["trajectory", "label", "estimator", "std_error"])?;
    for (i, (_, estimates, _)) in per_trajectory.iter().enumerate() {
        for (o, e) in estimates {
            w.write_record([i.to_string(), label(o), num(e.mean), num(e.std_error)])?;
        }
    }
    w.flush()?;
    let run_path = out.join("running_activity.csv");
    let mut w = csv_writer(&run_path, "running_activity", &["trajectory", "t", "activity"])?;
    for (i, (_, _, running)) in per_trajectory.iter().enumerate() {
        for (t, a) in running.iter().enumerate() {
            w.write_record([i.to_string(), (t + 1).to_string(), num(*a)])?;
        }
    }
    w.flush()?;
    for (files, _, _) in &per_trajectory {
        outputs.extend(files.iter().map(|f| rel(out, f)));
    }
    outputs.push(rel(out, &est_path));
    outputs.push(rel(out, &run_path));
    Ok(Outcome { outputs, ..Default::default() })
}

fn write_predictions(path: &Path, rows: &[(String, f64)]) -> Result<(), RunError> {
    let mut w = csv_writer(path, "predictions", &["label", "value"])?;
    for (k, v) in rows {
        w.write_record([k.clone(), num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

fn ensemble(cfg: &RunConfig, out: &Path, cache: &KrausCache) -> Result<Outcome, RunError> {
    let params = cfg.params()?;
    let kf = cache.get_or_build(&params)?;
    let offsets: Vec<SpaceTimeOffset> = cfg.offsets().into_iter().filter(|o| !o.is_activity()).collect();
    let series = transient_series(&kf, &DensityMatrix::basis_state(kf.dim(), cfg.initial), cfg.steps, &offsets)?;

    let a_path = out.join("activity.csv");
    let mut w = csv_writer(&a_path, "activity", &["t", "activity"])?;
    for (t, a) in series.times.iter().zip(&series.activity) {
        w.write_record([t.to_string(), num(*a)])?;
    }
    w.flush()?;
    let c_path = out.join("correlations.csv");
    let mut w = csv_writer(&c_path, "correlations", &["t", "di", "dt", "c"])?;
    for (o, values) in &series.correlations {
        for (j, c) in values.iter().enumerate() {
            let t = j + o.dt_steps + 1;
            w.write_record([t.to_string(), o.di.to_string(), o.dt_steps.to_string(), num(*c)])?;
        }
    }
    w.flush()?;
    let mut rows = Vec::new();
    let mixed = stationary_values(&kf, &DensityMatrix::maximally_mixed(kf.dim()), &offsets)?;
    rows.extend(mixed.into_iter().map(|(k, v)| (format!("mixed.{k}"), v)));
    let pxp = pxp_sector_prediction(&kf, &offsets)?;
    rows.extend(pxp.into_iter().map(|(k, v)| (format!("pxp.{k}"), v)));
    let p_path = out.join("predictions.csv");
    write_predictions(&p_path, &rows)?;
    Ok(Outcome { outputs: vec![rel(out, &a_path), rel(out, &c_path), rel(out, &p_path)], ..Default::default() })
}

/// Every `(V, s)` point at the given base parameters, row-major in `V`.
/// One Kraus family per `V`; the `s` scan inside a task is warm-started.
pub fn phase_diagram_rows(
    base: &ModelParams,
    v_values: &[f64],
    s_values: &[f64],
    cache: &KrausCache,
) -> Result<Vec<PhaseRow>, RunError> {
    let opts = TiltedOptions::default();
    let blocks = try_ordered_map(v_values, |&v| {
        let kf = cache.get_or_build(&base.with_v(v))?;
        Ok(s_scan(&kf, s_values, &[C01], &opts))
    })?;
    Ok(blocks.into_iter().flatten().collect())
}

pub fn write_phase_diagram(path: &Path, rows: &[PhaseRow]) -> Result<(), RunError> {
    let columns = ["V", "s", "activity", "c_0_1", "lambda", "iterations", "converged"];
    let mut w = csv_writer(path, "phase_diagram", &columns)?;
    for r in rows {
        let p = &r.point;
        w.write_record([
            num(r.v),
            num(p.s),
            num(p.activity),
            num(p.correlation(&C01).unwrap_or(f64::NAN)),
            num(p.lambda),
            p.iterations.to_string(),
            p.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn phase_diagram(cfg: &RunConfig, out: &Path, cache: &KrausCache) -> Result<Outcome, RunError> {
    let base = cfg.params_at(cfg.v.start, cfg.delta.start);
    let rows = phase_diagram_rows(&base, &cfg.v.values(), &cfg.s.values(), cache)?;
    let path = out.join("phase_diagram.csv");
    write_phase_diagram(&path, &rows)?;
    let unconverged = rows.iter().filter(|r| !r.point.converged).count();
    Ok(Outcome { outputs: vec![rel(out, &path)], unconverged, ..Default::default() })
}

pub fn scgf_scan(model: &LindbladModel, s_values: &[f64]) -> Vec<ScgfPoint> {
    let opts = ScgfOptions::default();
    ordered_map(s_values, |&s| tilted_lindblad_scgf(model, s, &opts))
}

fn lindblad(cfg: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    let params = cfg.params()?;
    let model = LindbladModel::new(&params)?;
    let mut opts = JumpOptions::for_model(&params);
    if cfg.occupations {
        opts.sample_stride = (0.1 / (params.omega.abs().max(1e-300) * opts.micro_dt)).round().max(1.0) as usize;
    }
    let psi0 = PureState::basis(model.dim(), cfg.initial);
    let dir = subdir(out, "events")?;
    let indices: Vec<u64> = (0..cfg.trajectories as u64).collect();
    let trajectories = try_ordered_map(&indices, |&i| {
        let traj = quantum_jump_trajectory(&model, &psi0, cfg.t_max, &opts, cfg.seed, i)?;
        let path = dir.join(format!("traj_{i:04}.csv"));
        let mut w = csv_writer(&path, "events", &["time", "site"])?;
        for e in &traj.events {
            w.write_record([num(e.time), e.site.to_string()])?;
        }
        w.flush()?;
        let mut files = vec![path];
        if cfg.occupations {
            let path = dir.join(format!("occupations_{i:04}.csv"));
            let mut w = csv_writer(&path, "jump_occupations", &["time", "site", "occupation"])?;
            for (j, t) in traj.sample_times.iter().enumerate() {
                for site in 0..traj.sites {
                    w.write_record([num(*t), site.to_string(), num(traj.occupations[j * traj.sites + site])])?;
                }
            }
            w.flush()?;
            files.push(path);
        }
        Ok((files, traj.events.len(), traj.rate()))
    })?;
    let mut outputs: Vec<String> = trajectories.iter().flat_map(|(f, _, _)| f.iter().map(|p| rel(out, p))).collect();

    let rates_path = out.join("rates.csv");
    let mut w = csv_writer(&rates_path, "rates", &["trajectory", "events", "rate"])?;
    for (i, (_, n, rate)) in trajectories.iter().enumerate() {
        w.write_record([i.to_string(), n.to_string(), num(*rate)])?;
    }
    w.flush()?;
    outputs.push(rel(out, &rates_path));

    let points = scgf_scan(&model, &cfg.s.values());
    let scgf_path = out.join("scgf.csv");
    let mut w = csv_writer(&scgf_path, "scgf", &["s", "theta", "activity", "converged"])?;
    for p in &points {
        w.write_record([num(p.s), num(p.theta), num(p.activity), p.converged.to_string()])?;
    }
    w.flush()?;
    outputs.push(rel(out, &scgf_path));

    if params.sites <= DENSE_SUPEROPERATOR_CAP {
        let dts: Vec<f64> = (0..5).map(|k| params.dt / (1u32 << k) as f64).collect();
        let report = collision_limit_check(&params, &dts)?;
        let path = out.join("collision_limit.csv");
        let mut w = csv_writer(&path, "collision_limit", &["dt", "distance", "ratio"])?;
        for r in &report.rows {
            w.write_record([num(r.dt), num(r.distance), num(r.ratio)])?;
        }
        w.flush()?;
        outputs.push(rel(out, &path));
    }
    let unconverged = points.iter().filter(|p| !p.converged).count();
    Ok(Outcome { outputs, unconverged, ..Default::default() })
}

fn singlebody(cfg: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    let v = cfg.v.single().unwrap_or(0.0);
    let base = ModelParams { sites: 1, ..cfg.params_at(v, 0.0) };
    let p = SingleBodyParams::from_model(&base);
    let rows = vec![
        ("a".to_string(), p.a),
        ("b".to_string(), p.b),
        ("c".to_string(), p.c()),
        ("closed_form.activity".to_string(), analytic_activity(&p)),
        ("closed_form.c_0_1".to_string(), analytic_correlation(&p)),
    ];
    let p_path = out.join("predictions.csv");
    write_predictions(&p_path, &rows)?;

    let opts = TiltedOptions::default();
    let s_values = cfg.s.values();
    let blocks =
        try_ordered_map(&cfg.delta.values(), |&d| Ok(detuning_phase_scan(&base, &[d], &s_values, &opts)?))?;
    let rows: Vec<_> = blocks.into_iter().flatten().collect();
    let d_path = out.join("detuning.csv");
    let mut w = csv_writer(&d_path, "detuning", &["delta", "s", "activity", "c_0_1", "lambda", "converged"])?;
    for r in &rows {
        w.write_record([num(r.delta), num(r.s), num(r.activity), num(r.c_0_1), num(r.lambda), r.converged.to_string()])?;
    }
    w.flush()?;
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    Ok(Outcome { outputs: vec![rel(out, &p_path), rel(out, &d_path)], unconverged, ..Default::default() })
}

fn validate(cfg: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    let results: Vec<CheckOutcome> = checks::suite(cfg.full, &cfg.only)?.iter().map(|c| c.run(cfg.seed)).collect();
    let path = out.join("validation.csv");
    let mut w = csv_writer(&path, "validation", &["criterion", "passed", "seconds", "detail"])?;
    for c in &results {
        w.write_record([c.name.to_string(), c.passed.to_string(), num(c.seconds), c.detail.clone()])?;
    }
    w.flush()?;
    Ok(Outcome { outputs: vec![rel(out, &path)], unconverged: 0, checks: results })
}
