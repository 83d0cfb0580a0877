//! Configuration ingestion, run orchestration and file emission.
//!
//! A run reads a strict JSON [`RunConfig`], validates every task block, then
//! executes the tasks in declaration order. Task results are buffered and
//! written by a single writer; a `manifest.json` lists every emitted file
//! together with the full configuration and tool version. Timestamps only
//! ever appear in the manifest.

mod config;
pub mod csv;
mod run;
pub mod svg;

pub use config::{
    resolve_workers, ColorChannel, FitTask, PerturbTask, RunConfig, ScanTask, SpectrumTask, StatesTask, SweepTask,
    TaskSpec, Tolerances, MANIFEST_NAME,
};
pub use csv::{emit_spectrum_csv, SpectrumRecord};
pub use run::{
    list_files, manifest_discrepancies, most_polarized, params_title, perturb_summary, run, spectrum_records,
    sweep_csv, FileEntry, Manifest, RunOptions, RunReport, TaskReport, TOOL_NAME, VERSION,
};
pub use svg::emit_svg_scatter;
