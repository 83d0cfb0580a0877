//! Task execution and the run manifest.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ColorChannel, RunConfig, TaskSpec, Tolerances, MANIFEST_NAME};
use super::csv::{fits_csv, fmt_f64, fmt_opt, profiles_csv, spectrum_csv, write_file, FitRow, ProfileRow, SpectrumRecord};
use super::svg::{render_svg, Curve, Overlay, Palette, ScatterPlot, ScatterPoint};
use crate::analytic::bloch_bands;
use crate::criticality::{critical_t0_scan, sweep, with_workers, SweepParameter, SweepResult};
use crate::eigen::{self, eig_biorthogonal_with, eig_right_with};
use crate::lattice::{build_hamiltonian, BoundaryCondition, Chain, LadderParams};
use crate::observables::{
    biorthogonal_density, dynamic_range, fit_localization_length_with, polarization_group_profile,
    state_observables, PolarizationGroup,
};
use crate::perturbation::{
    mbc_first_order_state, mbc_mixing_amplitude_from, mixing_coefficient, obc_skin_ansatz, t0_first_order_element,
    t0_sensitivity_mbc, MixingConvention,
};
use crate::{observables, Error, Result};

pub const TOOL_NAME: &str = "mll";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Resolved worker count; the config value (or 1) when `None`.
    pub workers: Option<usize>,
    /// Unix time recorded in the manifest; the wall clock when `None`.
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    /// Index of the producing task; `None` for the manifest itself.
    pub task: Option<usize>,
    pub bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub index: usize,
    pub task: &'static str,
    pub status: &'static str,
    pub error: Option<String>,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub dropped_points: usize,
    pub summary: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub workers: usize,
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
    pub tasks: Vec<TaskReport>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub exit_code: i32,
}

/// Everything a task produced, held in memory until the single writer runs.
#[derive(Default)]
struct TaskOutput {
    files: Vec<(&'static str, Vec<u8>)>,
    warnings: Vec<String>,
    dropped_points: usize,
    summary: Value,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Removes the files a previous run listed in its manifest, then insists the
/// directory holds nothing else.
fn prepare_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = dir.join(MANIFEST_NAME);
    if manifest.is_file() {
        let text = std::fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let old: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: unreadable previous manifest: {e}", manifest.display())))?;
        if let Some(files) = old.get("files").and_then(Value::as_array) {
            for path in files.iter().filter_map(|f| f.get("path").and_then(Value::as_str)) {
                let p = Path::new(path);
                if p.is_absolute() || p.components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
                    continue;
                }
                let full = dir.join(p);
                if full.is_file() {
                    std::fs::remove_file(&full).map_err(|e| Error::io(&full, e))?;
                }
            }
        }
    }
    let leftovers = list_files(dir)?;
    if !leftovers.is_empty() {
        return Err(Error::Config(format!(
            "output directory {} is not empty (found `{}`)",
            dir.display(),
            leftovers[0]
        )));
    }
    Ok(())
}

/// All regular files below `dir`, relative and `/`-separated, sorted.
pub fn list_files(dir: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("walk stays below root");
                let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
                out.push(parts.join("/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    if dir.is_dir() {
        walk(dir, dir, &mut out)?;
    }
    out.sort();
    Ok(out)
}

/// Validate, execute every task in declaration order, write all outputs and
/// the manifest. Configuration problems are returned as errors before any
/// computation; task failures are recorded and give exit code 1.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    config.validate()?;
    let workers = opts.workers.or(config.workers).unwrap_or(1);
    if workers == 0 {
        return Err(Error::param("workers", "must be a positive integer"));
    }
    let started = opts.timestamp.unwrap_or_else(now_unix);
    let dir = config.output_dir.clone();
    prepare_output_dir(&dir)?;

    let outputs: Vec<Result<TaskOutput>> =
        with_workers(workers, || config.tasks.iter().map(|t| execute(config, t)).collect())?;

    let mut files = Vec::new();
    let mut reports = Vec::new();
    let mut exit_code = 0;
    for (index, (task, output)) in config.tasks.iter().zip(outputs).enumerate() {
        let mut report = TaskReport {
            index,
            task: task.kind(),
            status: "ok",
            error: None,
            files: Vec::new(),
            warnings: Vec::new(),
            dropped_points: 0,
            summary: Value::Null,
        };
        match output {
            Ok(out) => {
                let prefix = task.dir().map(|d| format!("{}/", d.trim_end_matches('/'))).unwrap_or_default();
                for (name, bytes) in out.files {
                    let rel = format!("{prefix}{name}");
                    write_file(&dir.join(&rel), &bytes)?;
                    files.push(FileEntry {
                        path: rel.clone(),
                        task: Some(index),
                        bytes: Some(bytes.len() as u64),
                    });
                    report.files.push(rel);
                }
                report.warnings = out.warnings;
                report.dropped_points = out.dropped_points;
                report.summary = out.summary;
            }
            Err(e) => {
                report.status = "failed";
                report.error = Some(e.to_string());
                exit_code = 1;
            }
        }
        reports.push(report);
    }
    files.push(FileEntry {
        path: MANIFEST_NAME.to_string(),
        task: None,
        bytes: None,
    });
    let manifest = Manifest {
        tool: TOOL_NAME,
        version: VERSION,
        started_unix: started,
        finished_unix: opts.timestamp.unwrap_or_else(now_unix),
        workers,
        config: config.clone(),
        files,
        tasks: reports,
        exit_code,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&dir.join(MANIFEST_NAME), text.as_bytes())?;
    Ok(RunReport {
        output_dir: dir,
        manifest,
        exit_code,
    })
}

/// Paths listed in the manifest that are missing on disk, and files on disk
/// the manifest does not list.
pub fn manifest_discrepancies(dir: &Path, manifest: &Manifest) -> Result<(Vec<String>, Vec<String>)> {
    let listed: BTreeSet<String> = manifest.files.iter().map(|f| f.path.clone()).collect();
    let on_disk: BTreeSet<String> = list_files(dir)?.into_iter().collect();
    Ok((
        listed.difference(&on_disk).cloned().collect(),
        on_disk.difference(&listed).cloned().collect(),
    ))
}

fn execute(config: &RunConfig, task: &TaskSpec) -> Result<TaskOutput> {
    let tol = &config.tolerances;
    let bc_or = |b: Option<BoundaryCondition>| b.unwrap_or(config.boundary);
    match task {
        TaskSpec::Spectrum(t) => spectrum_task(&config.model, bc_or(t.boundary), t, tol),
        TaskSpec::States(t) => states_task(&config.model, bc_or(t.boundary), t.biorthogonal, tol),
        TaskSpec::Fit(t) => {
            let sizes = if t.sizes.is_empty() { vec![config.model.n_cells] } else { t.sizes.clone() };
            fit_task(&config.model, bc_or(t.boundary), &sizes, tol)
        }
        TaskSpec::Sweep(t) => {
            let mut opts = t.options;
            opts.tolerances = tol.eigen;
            let res = sweep(&config.model, bc_or(t.boundary), &t.axes, &opts)?;
            Ok(TaskOutput {
                summary: json!({"cells": res.cells.len(), "failed_cells": res.failures()}),
                files: vec![("sweep.csv", sweep_csv(&res).into_bytes())],
                ..TaskOutput::default()
            })
        }
        TaskSpec::Scan(t) => scan_task(&config.model, bc_or(t.boundary), &t.options),
        TaskSpec::Perturb(t) => {
            let chains: Vec<Chain> = t.chain.map(|c| vec![c]).unwrap_or_else(|| Chain::BOTH.to_vec());
            let mut results = Vec::new();
            for chain in chains {
                results.push(perturb_summary(&config.model, chain, t.convention)?);
            }
            let doc = json!({"params": config.model, "convention": t.convention, "chains": results});
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            Ok(TaskOutput {
                summary: doc,
                files: vec![("perturbation.json", text.into_bytes())],
                ..TaskOutput::default()
            })
        }
    }
}

pub fn params_title(p: &LadderParams, bc: BoundaryCondition) -> String {
    format!(
        "N={} t1={} δa={} δb={} t0={} V={} {}",
        p.n_cells,
        p.t1,
        p.delta_a,
        p.delta_b,
        p.t0,
        p.v,
        bc.short_name().to_uppercase()
    )
}

/// Spectrum records of the right eigenvectors at `params`.
pub fn spectrum_records(params: &LadderParams, bc: BoundaryCondition, tol: &Tolerances) -> Result<Vec<SpectrumRecord>> {
    let h = build_hamiltonian(params, bc)?;
    let sys = eig_right_with(&h, &tol.eigen)?;
    Ok(state_observables(&sys, Some(&tol.regions))?
        .into_iter()
        .map(|o| SpectrumRecord {
            re_e: o.energy.re,
            im_e: o.energy.im,
            ipr: o.ipr,
            delta_rho: o.delta_rho,
            mean_position: o.mean_position,
            region: o.region.expect("regions requested"),
        })
        .collect())
}

fn spectrum_task(
    params: &LadderParams,
    bc: BoundaryCondition,
    task: &super::config::SpectrumTask,
    tol: &Tolerances,
) -> Result<TaskOutput> {
    let records = spectrum_records(params, bc, tol)?;
    let mut out = TaskOutput {
        summary: json!({
            "states": records.len(),
            "q": records.iter().map(|r| r.im_e.abs()).sum::<f64>(),
            "max_abs_im": records.iter().map(|r| r.im_e.abs()).fold(0.0, f64::max),
        }),
        ..TaskOutput::default()
    };
    out.files.push(("spectrum.csv", spectrum_csv(&records)?.into_bytes()));
    if task.plot {
        let mut plot = ScatterPlot::new(params_title(params, bc), "Re E", "Im E");
        let (label, palette, range) = match task.color_by {
            ColorChannel::DeltaRho => ("Δρ", Palette::Diverging, Some((-1.0, 1.0))),
            ColorChannel::Ipr => ("IPR", Palette::Sequential, None),
            ColorChannel::MeanPosition => ("⟨x⟩", Palette::Sequential, Some((1.0, params.n_cells as f64))),
        };
        plot.color_label = label.into();
        plot.palette = palette;
        plot.color_range = range;
        plot.points = records
            .iter()
            .map(|r| ScatterPoint {
                x: r.re_e,
                y: r.im_e,
                value: match task.color_by {
                    ColorChannel::DeltaRho => r.delta_rho,
                    ColorChannel::Ipr => r.ipr,
                    ColorChannel::MeanPosition => r.mean_position,
                },
            })
            .collect();
        for &other in &task.overlay {
            let e = eigen::eigenvalues(&build_hamiltonian(params, other)?)?;
            plot.overlays.push(Overlay {
                label: other.short_name().to_uppercase(),
                points: e.iter().map(|z| (z.re, z.im)).collect(),
            });
        }
        if task.pbc_curve {
            for (i, band) in bloch_bands(params, 400).iter().enumerate() {
                plot.curves.push(Curve {
                    label: format!("PBC band {}", i + 1),
                    points: band.iter().map(|z| (z.re, z.im)).collect(),
                });
            }
        }
        let (svg, stats) = render_svg(&plot);
        out.dropped_points = stats.dropped_non_finite;
        if stats.dropped_non_finite > 0 {
            out.warnings.push(format!("{} non-finite points dropped from spectrum.svg", stats.dropped_non_finite));
        }
        if stats.circles == 0 {
            out.warnings.push("spectrum.svg has no points".into());
        }
        out.files.push(("spectrum.svg", svg.into_bytes()));
    }
    Ok(out)
}

fn group_profile_rows(
    sys: &eigen::EigenSystem,
    n: usize,
    rows: &mut Vec<ProfileRow>,
    warnings: &mut Vec<String>,
) -> Result<Vec<(PolarizationGroup, Chain, observables::ChainProfile)>> {
    let mut profiles = Vec::new();
    for group in PolarizationGroup::BOTH {
        for chain in Chain::BOTH {
            match polarization_group_profile(sys, group, chain) {
                Ok(p) => {
                    rows.extend(p.amplitudes.iter().enumerate().map(|(i, &a)| ProfileRow {
                        chain,
                        x: i + 1,
                        amplitude: a,
                        group,
                        n_cells: n,
                    }));
                    profiles.push((group, chain, p));
                }
                Err(Error::Empty(_)) => warnings.push(format!("N={n}: group {group} is empty")),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(profiles)
}

fn states_task(params: &LadderParams, bc: BoundaryCondition, biorthogonal: bool, tol: &Tolerances) -> Result<TaskOutput> {
    let h = build_hamiltonian(params, bc)?;
    let mut out = TaskOutput::default();
    let mut rows = Vec::new();
    let sys = eig_right_with(&h, &tol.eigen)?;
    group_profile_rows(&sys, params.n_cells, &mut rows, &mut out.warnings)?;
    out.files.push(("profiles.csv", profiles_csv(&rows).into_bytes()));
    if biorthogonal {
        let sys = eig_biorthogonal_with(&h, &tol.eigen)?;
        let (j, rho) = most_polarized(&sys)?;
        let left = sys.left_vector(j).expect("biorthogonal system has left vectors");
        let d = biorthogonal_density(left, sys.right_vector(j))?;
        let dominant = if rho >= 0.0 { Chain::A } else { Chain::B };
        let mut csv = String::from("chain,x,biorthogonal,imaginary,right,left\n");
        for chain in Chain::BOTH {
            for (i, site) in chain.range(params.n_cells).enumerate() {
                let _ = writeln!(
                    csv,
                    "{chain},{},{},{},{},{}",
                    i + 1,
                    fmt_f64(d.biorthogonal[site]),
                    fmt_f64(d.imaginary[site]),
                    fmt_f64(d.right[site]),
                    fmt_f64(d.left[site])
                );
            }
        }
        out.summary = json!({
            "state_energy": [sys.eigenvalues[j].re, sys.eigenvalues[j].im],
            "delta_rho": rho,
            "dominant_chain": dominant,
            "biorthogonal_dynamic_range": dynamic_range(d.chain(&d.biorthogonal, dominant)),
            "right_dynamic_range": dynamic_range(d.chain(&d.right, dominant)),
            "biorthogonality_residual": sys.biorthogonality_residual,
        });
        out.files.push(("biorthogonal.csv", csv.into_bytes()));
    }
    Ok(out)
}

/// Index and `Δρ` of the state with the largest `|Δρ|` (first on ties).
pub fn most_polarized(sys: &eigen::EigenSystem) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..sys.len() {
        let rho = observables::delta_rho(sys.right_vector(j))?;
        if best.map_or(true, |(_, b)| rho.abs() > b.abs()) {
            best = Some((j, rho));
        }
    }
    best.ok_or(Error::Empty("spectrum"))
}

fn fit_task(params: &LadderParams, bc: BoundaryCondition, sizes: &[usize], tol: &Tolerances) -> Result<TaskOutput> {
    let per_size: Vec<Result<(Vec<ProfileRow>, Vec<FitRow>, Vec<String>)>> = sizes
        .par_iter()
        .map(|&n| {
            let p = params.with_n(n);
            let sys = eig_right_with(&build_hamiltonian(&p, bc)?, &tol.eigen)?;
            let mut rows = Vec::new();
            let mut warnings = Vec::new();
            let mut fits = Vec::new();
            for (group, chain, profile) in group_profile_rows(&sys, n, &mut rows, &mut warnings)? {
                match fit_localization_length_with(&profile, &tol.fit) {
                    Ok(outcome) => {
                        if outcome.fit().is_some_and(|f| f.low_confidence()) {
                            warnings.push(format!("N={n} {group} chain {chain}: low-confidence fit"));
                        }
                        fits.push(FitRow {
                            chain,
                            group,
                            n_cells: n,
                            outcome,
                        });
                    }
                    Err(e) => warnings.push(format!("N={n} {group} chain {chain}: {e}")),
                }
            }
            Ok((rows, fits, warnings))
        })
        .collect();
    let mut out = TaskOutput::default();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for r in per_size {
        let (r, f, w) = r?;
        rows.extend(r);
        fits.extend(f);
        out.warnings.extend(w);
    }
    out.summary = json!({"sizes": sizes, "fits": fits.len()});
    out.files.push(("profiles.csv", profiles_csv(&rows).into_bytes()));
    out.files.push(("fits.csv", fits_csv(&fits).into_bytes()));
    Ok(out)
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const PARAM_ORDER: [SweepParameter; 6] = [
    SweepParameter::NCells,
    SweepParameter::T1,
    SweepParameter::DeltaA,
    SweepParameter::DeltaB,
    SweepParameter::T0,
    SweepParameter::V,
];

fn param_value(p: &LadderParams, which: SweepParameter) -> String {
    match which {
        SweepParameter::NCells => p.n_cells.to_string(),
        SweepParameter::T1 => fmt_f64(p.t1),
        SweepParameter::DeltaA => fmt_f64(p.delta_a),
        SweepParameter::DeltaB => fmt_f64(p.delta_b),
        SweepParameter::T0 => fmt_f64(p.t0),
        SweepParameter::V => fmt_f64(p.v),
    }
}

/// Axis columns first, then the remaining parameters, then diagnostics.
pub fn sweep_csv(res: &SweepResult) -> String {
    let axes: Vec<SweepParameter> = res.axes.iter().map(|a| a.parameter).collect();
    let columns: Vec<SweepParameter> = axes
        .iter()
        .copied()
        .chain(PARAM_ORDER.iter().copied().filter(|p| !axes.contains(p)))
        .collect();
    let mut out = columns.iter().map(|c| c.name()).collect::<Vec<_>>().join(",");
    out.push_str(
        ",n_eigenvalues,min_re,max_re,max_abs_im,q,delta_q,dq_dt0,polarization_plus,polarization_minus,band_gap,real_gap,max_ipr,mean_ipr,error\n",
    );
    for cell in &res.cells {
        let mut fields: Vec<String> = columns.iter().map(|&c| param_value(&cell.params, c)).collect();
        match &cell.diagnostics {
            Some(d) => fields.extend([
                d.n_eigenvalues.to_string(),
                fmt_f64(d.min_re),
                fmt_f64(d.max_re),
                fmt_f64(d.max_abs_im),
                fmt_f64(d.q),
                fmt_opt(d.delta_q),
                fmt_opt(d.dq_dt0),
                fmt_opt(d.polarization_plus),
                fmt_opt(d.polarization_minus),
                fmt_opt(d.band_gap),
                fmt_f64(d.real_gap),
                fmt_opt(d.max_ipr),
                fmt_opt(d.mean_ipr),
                String::new(),
            ]),
            None => {
                fields.extend(std::iter::repeat(String::new()).take(13));
                fields.push(csv_text(cell.error.as_deref().unwrap_or("")));
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn scan_task(params: &LadderParams, bc: BoundaryCondition, opts: &crate::criticality::ScanOptions) -> Result<TaskOutput> {
    let scan = critical_t0_scan(params, bc, opts)?;
    let mut csv = String::from("t0,q,delta_q,log_slope\n");
    for i in 0..scan.t0.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_f64(scan.t0[i]),
            fmt_f64(scan.q[i]),
            fmt_f64(scan.delta_q[i]),
            fmt_f64(scan.log_slope[i])
        );
    }
    let summary = json!({
        "q_baseline": scan.q_baseline,
        "curve_baseline": scan.curve_baseline,
        "epsilon": scan.epsilon,
        "critical_t0": scan.critical_t0,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    let mut plot = ScatterPlot::new(params_title(params, bc), "log10 t0", "d log10|ΔQ| / d log10 t0");
    plot.color_label = "log10|ΔQ|".into();
    plot.points = scan
        .t0
        .iter()
        .zip(&scan.log_slope)
        .zip(&scan.delta_q)
        .map(|((t, s), dq)| ScatterPoint {
            x: t.log10(),
            y: *s,
            value: dq.abs().log10(),
        })
        .collect();
    let (svg, stats) = render_svg(&plot);
    let mut out = TaskOutput {
        summary,
        dropped_points: stats.dropped_non_finite,
        ..TaskOutput::default()
    };
    if stats.dropped_non_finite > 0 {
        out.warnings.push(format!("{} non-finite points dropped from scan.svg", stats.dropped_non_finite));
    }
    out.files.push(("scan.csv", csv.into_bytes()));
    out.files.push(("scan.json", text.into_bytes()));
    out.files.push(("scan.svg", svg.into_bytes()));
    Ok(out)
}

/// First-order boundary-mixing diagnostics for the ansatz on `chain`.
pub fn perturb_summary(params: &LadderParams, chain: Chain, convention: MixingConvention) -> Result<Value> {
    let ansatz = obc_skin_ansatz(params, chain)?;
    let amp = mbc_mixing_amplitude_from(params, chain)?;
    let coefficient = mixing_coefficient(params, chain, convention)?;
    let corrected = mbc_first_order_state(params, chain, convention)?;
    Ok(json!({
        "chain": chain,
        "log_skin_ratio": ansatz.log_ratio,
        "ansatz_t0_element": t0_first_order_element(ansatz.view(), params)?.norm(),
        "mixing_numeric": [amp.numeric.re, amp.numeric.im],
        "mixing_closed_form": [amp.closed_form.re, amp.closed_form.im],
        "mixing_relative_difference": amp.relative_difference(),
        "coefficient": [coefficient.re, coefficient.im],
        "corrected_delta_rho": observables::delta_rho(corrected.view())?,
        "t0_sensitivity": t0_sensitivity_mbc(params, chain, convention)?,
    }))
}
