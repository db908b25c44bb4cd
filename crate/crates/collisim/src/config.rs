use std::fs;
use std::path::{Path, PathBuf};

use collisim_core::observables::SpaceTimeOffset;
use collisim_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::RunError;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "COLLISIM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Ensemble,
    PhaseDiagram,
    Lindblad,
    Singlebody,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ensemble => "ensemble",
            Command::PhaseDiagram => "phase-diagram",
            Command::Lindblad => "lindblad",
            Command::Singlebody => "singlebody",
            Command::Validate => "validate",
        }
    }
}

/// Everything a run depends on. Energies in units of `Omega`, times in
/// units of `1/Omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sites: usize,
    pub omega: f64,
    /// Interaction strength; a range only for `phase-diagram`.
    pub v: Grid,
    pub gamma: f64,
    pub dt: f64,
    /// Static detuning; a range only for `singlebody`.
    pub delta: Grid,
    pub pbc: bool,
    /// Counting fields.
    pub s: Grid,
    /// Collisions per trajectory or transient length.
    pub steps: usize,
    pub trajectories: usize,
    pub seed: u64,
    /// Index of the computational basis state every run starts from.
    pub initial: usize,
    /// Duration of continuous-time jump trajectories.
    pub t_max: f64,
    /// Space-time offsets `[di, dt]` of the correlations reported.
    pub offsets: Vec<(i64, usize)>,
    pub occupations: bool,
    pub binary: bool,
    pub output: PathBuf,
    pub cache: Option<PathBuf>,
    pub workers: Option<usize>,
    pub strict: bool,
    /// `validate` also runs the figure-scale criteria.
    pub full: bool,
    /// `validate` restricted to these criteria.
    pub only: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ModelParams::reference(6);
        Self {
            sites: p.sites,
            omega: p.omega,
            v: Grid::point(p.v),
            gamma: p.gamma,
            dt: p.dt,
            delta: Grid::point(0.0),
            pbc: true,
            s: Grid::new(-0.5, 0.5, 41),
            steps: 2000,
            trajectories: 10,
            seed: 7,
            initial: 0,
            t_max: 100.0,
            offsets: vec![(0, 1), (1, 0)],
            occupations: true,
            binary: false,
            output: PathBuf::from("out"),
            cache: None,
            workers: None,
            strict: false,
            full: false,
            only: Vec::new(),
        }
    }
}

/// The part of a manifest that is read back to repeat a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
    pub unconverged: usize,
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`; a JSON manifest
    /// contributes its `config` object.
    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::Usage(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| RunError::Usage(format!("{}: {e}", path.display())))?;
            let value = value.get("config").cloned().unwrap_or(value);
            serde_json::from_value(value).map_err(|e| RunError::Usage(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| RunError::Usage(format!("{}: {e}", path.display())))
        }
    }

    pub fn params_at(&self, v: f64, delta: f64) -> ModelParams {
        ModelParams { sites: self.sites, omega: self.omega, v, gamma: self.gamma, dt: self.dt, delta, pbc: self.pbc }
    }

    /// Parameters of a run that needs a single `V` and `Delta`.
    pub fn params(&self) -> Result<ModelParams, RunError> {
        let v = self.v.single().ok_or_else(|| RunError::Usage("--V must be a single value here".into()))?;
        let delta = self.delta.single().ok_or_else(|| RunError::Usage("--delta must be a single value here".into()))?;
        Ok(self.params_at(v, delta))
    }

    pub fn offsets(&self) -> Vec<SpaceTimeOffset> {
        self.offsets.iter().map(|&(di, dt)| SpaceTimeOffset::new(di, dt)).collect()
    }

    /// Flag, then config file, then environment, then the machine.
    pub fn resolved_workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
            .filter(|&w| w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }

    pub fn validate(&self, command: Command) -> Result<(), RunError> {
        let usage = |m: String| Err(RunError::Usage(m));
        if command != Command::Validate {
            if let Err(e) = self.params_at(self.v.start, self.delta.start).validate() {
                return usage(e.to_string());
            }
            if self.initial >= 1usize << self.sites {
                return usage(format!("initial state {} outside 0..2^{}", self.initial, self.sites));
            }
        }
        for (name, x) in [("omega", self.omega), ("gamma", self.gamma), ("dt", self.dt), ("t-max", self.t_max)] {
            if !x.is_finite() {
                return usage(format!("{name} must be finite"));
            }
        }
        match command {
            Command::Simulate if self.steps == 0 || self.trajectories == 0 => {
                usage("simulate needs --T > 0 and --trajectories > 0".into())
            }
            Command::Simulate | Command::Ensemble => {
                if let Some(&(_, dt)) = self.offsets.iter().find(|o| o.1 >= self.steps) {
                    return usage(format!("offset time {dt} must be below --T {}", self.steps));
                }
                self.params().map(|_| ())
            }
            Command::Lindblad => {
                if self.t_max <= 0.0 {
                    return usage("--t-max must be positive".into());
                }
                self.params().map(|_| ())
            }
            Command::Singlebody => self.v.single().map(|_| ()).ok_or_else(|| RunError::Usage("--V must be a single value".into())),
            Command::PhaseDiagram => {
                if self.delta.single().is_none() {
                    return usage("--delta must be a single value here".into());
                }
                Ok(())
            }
            Command::Validate => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("sites = 4\nv = \"0:10:41\"\nseed = 3\n").unwrap();
        assert_eq!(cfg.sites, 4);
        assert_eq!(cfg.v.count, 41);
        assert_eq!(cfg.gamma, 3.0);
        assert_eq!(cfg.seed, 3);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig { v: Grid::new(0.0, 10.0, 41), cache: Some("c".into()), ..Default::default() };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn single_value_required() {
        let cfg = RunConfig { v: Grid::new(0.0, 1.0, 3), ..Default::default() };
        assert!(matches!(cfg.validate(Command::Simulate), Err(RunError::Usage(_))));
        assert!(cfg.validate(Command::PhaseDiagram).is_ok());
        let bad = RunConfig { offsets: vec![(0, 5)], steps: 5, ..Default::default() };
        assert!(bad.validate(Command::Ensemble).is_err());
        let big = RunConfig { sites: 9, ..Default::default() };
        assert!(big.validate(Command::Simulate).is_err());
    }
}
