//! Strict JSON run configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criticality::{ScanOptions, SweepAxis, SweepOptions};
use crate::eigen::EigenTolerances;
use crate::lattice::{BoundaryCondition, Chain, LadderParams};
use crate::observables::{FitOptions, RegionMap};
use crate::perturbation::MixingConvention;
use crate::{Error, Result};

/// Numerical thresholds that may be overridden per run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub eigen: EigenTolerances,
    pub fit: FitOptions,
    pub regions: RegionMap,
}

impl Tolerances {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.eigen;
        for (field, v) in [
            ("tolerances.eigen.residual", e.residual),
            ("tolerances.eigen.pairing", e.pairing),
            ("tolerances.eigen.ill_conditioned", e.ill_conditioned),
            ("tolerances.fit.noise_floor", self.fit.noise_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(field, format!("must be positive and finite, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.fit.window_floor) {
            return Err(Error::param("tolerances.fit.window_floor", "must lie in [0, 1)"));
        }
        if !(0.0..0.5).contains(&self.fit.edge_fraction) {
            return Err(Error::param("tolerances.fit.edge_fraction", "must lie in [0, 0.5)"));
        }
        if self.fit.min_points < 2 {
            return Err(Error::param("tolerances.fit.min_points", "need at least 2 points"));
        }
        if !(self.regions.threshold >= 0.0 && self.regions.threshold < 1.0) {
            return Err(Error::param("tolerances.regions.threshold", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Scalar used to colour spectrum points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorChannel {
    #[default]
    DeltaRho,
    Ipr,
    MeanPosition,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumTask {
    /// Subdirectory of the output directory for this task's files.
    #[serde(default)]
    pub dir: Option<String>,
    /// Overrides the run-level boundary condition.
    #[serde(default)]
    pub boundary: Option<BoundaryCondition>,
    #[serde(default = "yes")]
    pub plot: bool,
    #[serde(default)]
    pub color_by: ColorChannel,
    /// Draw the analytic periodic bands behind the points.
    #[serde(default = "yes")]
    pub pbc_curve: bool,
    /// Extra spectra drawn as small squares.
    #[serde(default)]
    pub overlay: Vec<BoundaryCondition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatesTask {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub boundary: Option<BoundaryCondition>,
    /// Also write left/right densities of the most polarized state.
    #[serde(default)]
    pub biorthogonal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitTask {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub boundary: Option<BoundaryCondition>,
    /// System sizes; the model's `n_cells` when empty.
    #[serde(default)]
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTask {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub boundary: Option<BoundaryCondition>,
    pub axes: Vec<SweepAxis>,
    #[serde(default)]
    pub options: SweepOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanTask {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub boundary: Option<BoundaryCondition>,
    #[serde(default)]
    pub options: ScanOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbTask {
    #[serde(default)]
    pub dir: Option<String>,
    /// Both chains when absent.
    #[serde(default)]
    pub chain: Option<Chain>,
    #[serde(default)]
    pub convention: MixingConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TaskSpec {
    Spectrum(SpectrumTask),
    States(StatesTask),
    Fit(FitTask),
    Sweep(SweepTask),
    Scan(ScanTask),
    Perturb(PerturbTask),
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Spectrum(_) => "spectrum",
            TaskSpec::States(_) => "states",
            TaskSpec::Fit(_) => "fit",
            TaskSpec::Sweep(_) => "sweep",
            TaskSpec::Scan(_) => "scan",
            TaskSpec::Perturb(_) => "perturb",
        }
    }

    pub fn dir(&self) -> Option<&str> {
        match self {
            TaskSpec::Spectrum(t) => t.dir.as_deref(),
            TaskSpec::States(t) => t.dir.as_deref(),
            TaskSpec::Fit(t) => t.dir.as_deref(),
            TaskSpec::Sweep(t) => t.dir.as_deref(),
            TaskSpec::Scan(t) => t.dir.as_deref(),
            TaskSpec::Perturb(t) => t.dir.as_deref(),
        }
    }

    /// File names the task may emit, relative to its directory.
    pub fn file_names(&self) -> Vec<&'static str> {
        match self {
            TaskSpec::Spectrum(t) if t.plot => vec!["spectrum.csv", "spectrum.svg"],
            TaskSpec::Spectrum(_) => vec!["spectrum.csv"],
            TaskSpec::States(t) if t.biorthogonal => vec!["profiles.csv", "biorthogonal.csv"],
            TaskSpec::States(_) => vec!["profiles.csv"],
            TaskSpec::Fit(_) => vec!["profiles.csv", "fits.csv"],
            TaskSpec::Sweep(_) => vec!["sweep.csv"],
            TaskSpec::Scan(_) => vec!["scan.csv", "scan.json", "scan.svg"],
            TaskSpec::Perturb(_) => vec!["perturbation.json"],
        }
    }

    /// Output paths relative to the run directory, `/`-separated.
    pub fn relative_paths(&self) -> Vec<String> {
        self.file_names()
            .into_iter()
            .map(|f| match self.dir() {
                Some(d) => format!("{}/{f}", d.trim_end_matches('/')),
                None => f.to_string(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: LadderParams,
    pub boundary: BoundaryCondition,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks every task block; nothing is computed.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.tolerances.validate()?;
        if self.workers == Some(0) {
            return Err(Error::param("workers", "must be a positive integer"));
        }
        let mut seen = BTreeSet::new();
        seen.insert(MANIFEST_NAME.to_string());
        for (i, task) in self.tasks.iter().enumerate() {
            self.validate_task(task)
                .map_err(|e| Error::Config(format!("task {i} ({}): {e}", task.kind())))?;
            for path in task.relative_paths() {
                if !seen.insert(path.clone()) {
                    return Err(Error::Config(format!(
                        "task {i} ({}) would overwrite `{path}`; give it a distinct `dir`",
                        task.kind()
                    )));
                }
            }
        }
        Ok(())
    }

    fn validate_task(&self, task: &TaskSpec) -> Result<()> {
        if let Some(dir) = task.dir() {
            let p = Path::new(dir);
            if dir.is_empty()
                || p.is_absolute()
                || p.components().any(|c| !matches!(c, std::path::Component::Normal(_)))
            {
                return Err(Error::param("dir", format!("`{dir}` must be a plain relative path")));
            }
        }
        match task {
            TaskSpec::Spectrum(_) | TaskSpec::States(_) => Ok(()),
            TaskSpec::Fit(t) => {
                if let Some(&n) = t.sizes.iter().find(|&&n| n < 2) {
                    return Err(Error::param("sizes", format!("need at least 2 unit cells, got {n}")));
                }
                Ok(())
            }
            TaskSpec::Sweep(t) => {
                if t.axes.is_empty() || t.axes.len() > 2 {
                    return Err(Error::param("axes", "one or two axes required"));
                }
                for axis in &t.axes {
                    axis.validate()?;
                }
                if t.axes.len() == 2 && t.axes[0].parameter == t.axes[1].parameter {
                    return Err(Error::param("axes", "the same parameter appears twice"));
                }
                Ok(())
            }
            TaskSpec::Scan(t) => t.options.validate(),
            TaskSpec::Perturb(_) => {
                for chain in Chain::BOTH {
                    crate::analytic::log_skin_ratio(&self.model, chain)?;
                }
                if self.model.v == 0.0 {
                    return Err(Error::param("v", "boundary mixing needs v != 0"));
                }
                Ok(())
            }
        }
    }

    /// Every path the run will create, relative to the output directory.
    pub fn planned_files(&self) -> Vec<String> {
        let mut files: Vec<String> = self.tasks.iter().flat_map(|t| t.relative_paths()).collect();
        files.push(MANIFEST_NAME.to_string());
        files
    }
}

/// Worker count: command-line flag, then `MLL_WORKERS`, then the config, then 1.
pub fn resolve_workers(flag: Option<usize>, env: Option<&str>, config: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return if n > 0 {
            Ok(n)
        } else {
            Err(Error::param("workers", "must be a positive integer"))
        };
    }
    if let Some(raw) = env {
        return match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("MLL_WORKERS must be a positive integer, got `{raw}`"))),
        };
    }
    Ok(config.unwrap_or(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "model": {"n_cells": 8, "t1": 0.75, "delta_a": 0.25, "delta_b": -0.25, "t0": 0.01, "v": 0.5},
        "boundary": "mbc",
        "output_dir": "out",
        "tasks": [TASKS]
    }"#;

    fn with_tasks(tasks: &str) -> String {
        BASE.replace("TASKS", tasks)
    }

    #[test]
    fn parses_every_task_kind() {
        let cfg = RunConfig::from_json(&with_tasks(
            r#"{"task": "spectrum", "overlay": ["obc"]},
               {"task": "states", "dir": "states", "biorthogonal": true},
               {"task": "fit", "dir": "fit", "sizes": [8, 10]},
               {"task": "sweep", "axes": [{"parameter": "v", "values": [0.5, 1.0]}]},
               {"task": "scan", "options": {"points": 12}},
               {"task": "perturb", "chain": "a", "convention": "single-v"}"#,
        ))
        .unwrap();
        assert_eq!(cfg.tasks.len(), 6);
        assert_eq!(cfg.boundary, BoundaryCondition::Moebius);
        assert_eq!(cfg.planned_files().len(), 12);
    }

    #[test]
    fn unknown_keys_rejected_everywhere() {
        let bad = [
            BASE.replace("\"boundary\"", "\"bondary\": \"obc\", \"boundary\""),
            BASE.replace("\"v\": 0.5", "\"v\": 0.5, \"V\": 0.5"),
            with_tasks(r#"{"task": "spectrum", "colour_by": "ipr"}"#),
            with_tasks(r#"{"task": "sweep", "axes": [{"parameter": "v", "values": [1.0], "step": 1}]}"#),
            with_tasks(r#"{"task": "scan", "options": {"pionts": 12}}"#),
            with_tasks(r#"{"task": "spectra"}"#),
            BASE.replace("\"output_dir\"", "\"tolerances\": {\"eigen\": {\"residuals\": 1}}, \"output_dir\""),
        ];
        for text in bad {
            assert!(RunConfig::from_json(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = RunConfig::from_json(&BASE.replace("\"n_cells\": 8", "\"n_cells\": 1").replace("TASKS", ""))
            .unwrap_err()
            .to_string();
        assert!(err.contains("n_cells"), "{err}");
        let err = RunConfig::from_json(&with_tasks(r#"{"task": "fit", "sizes": [1]}"#)).unwrap_err().to_string();
        assert!(err.contains("sizes"), "{err}");
        let err = RunConfig::from_json(&with_tasks(r#"{"task": "spectrum", "dir": "../x"}"#))
            .unwrap_err()
            .to_string();
        assert!(err.contains("dir"), "{err}");
    }

    #[test]
    fn colliding_outputs_rejected() {
        let err = RunConfig::from_json(&with_tasks(r#"{"task": "spectrum"}, {"task": "spectrum"}"#))
            .unwrap_err()
            .to_string();
        assert!(err.contains("overwrite"), "{err}");
        assert!(RunConfig::from_json(&with_tasks(r#"{"task": "spectrum"}, {"task": "spectrum", "dir": "b"}"#)).is_ok());
    }

    #[test]
    fn worker_precedence() {
        assert_eq!(resolve_workers(Some(3), Some("5"), Some(7)).unwrap(), 3);
        assert_eq!(resolve_workers(None, Some("5"), Some(7)).unwrap(), 5);
        assert_eq!(resolve_workers(None, None, Some(7)).unwrap(), 7);
        assert_eq!(resolve_workers(None, None, None).unwrap(), 1);
        assert!(resolve_workers(None, Some("zero"), None).is_err());
        assert!(resolve_workers(Some(0), None, None).is_err());
    }
}
