//! Spectral criticality diagnostics and the parameter-sweep engine.
//!
//! The total imaginary magnitude `Q = Σ|Im E|` signals the real-to-complex
//! transition driven by the interchain coupling `t0`. Transition points show
//! up as jumps in the derivative of `ΔQ(t0) = Q(t0) - Q(0)`.
//!
//! Critical couplings of the Möbius ladder shrink roughly exponentially with
//! `N`, so a uniform `t0` mesh cannot resolve them beyond the smallest sizes.
//! [`critical_t0_scan`] therefore works on a log-spaced mesh and detects jumps
//! in the log-log slope `d log|ΔQ| / d log t0`, which sits near one in the
//! linear-response regime and spikes at each transition.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, EigenTolerances};
use crate::lattice::{build_hamiltonian, BoundaryCondition, LadderParams};
use crate::observables;
use crate::{Error, Result};

/// `Σ_j |Im E_j|`.
pub fn total_imag(eigenvalues: &[Complex64]) -> f64 {
    eigenvalues.iter().map(|e| e.im.abs()).sum()
}

/// `Q` of the ladder at `params`.
pub fn spectrum_q(params: &LadderParams, bc: BoundaryCondition) -> Result<f64> {
    let h = build_hamiltonian(params, bc)?;
    Ok(total_imag(&eigen::eigenvalues(&h)?))
}

/// `Q(t0)` for each grid value, evaluated in parallel on the current rayon pool.
pub fn q_curve(params: &LadderParams, bc: BoundaryCondition, t0_grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(t0_grid, "t0")?;
    t0_grid
        .par_iter()
        .map(|&t0| spectrum_q(&params.with_t0(t0), bc))
        .collect()
}

/// `ΔQ(t0) = Q(t0) - Q(0)`. The baseline is computed once; grid points at
/// `t0 = 0` are exactly zero.
pub fn delta_q(params: &LadderParams, bc: BoundaryCondition, t0_grid: &[f64]) -> Result<Vec<f64>> {
    let baseline = spectrum_q(&params.with_t0(0.0), bc)?;
    let q = q_curve(params, bc, t0_grid)?;
    Ok(subtract_baseline(t0_grid, &q, baseline))
}

fn subtract_baseline(grid: &[f64], q: &[f64], baseline: f64) -> Vec<f64> {
    grid.iter()
        .zip(q)
        .map(|(&t0, &q)| if t0 == 0.0 { 0.0 } else { q - baseline })
        .collect()
}

fn check_grid(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    if let Some(bad) = grid.iter().find(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{name} grid contains non-finite value {bad}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Spacing of a uniform grid with at least three points.
pub fn uniform_spacing(grid: &[f64]) -> Result<f64> {
    if grid.len() < 3 {
        return Err(Error::NonUniformGrid(format!("need at least 3 points, got {}", grid.len())));
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let scale = grid[0].abs().max(grid[grid.len() - 1].abs()).max(h.abs());
    for (i, w) in grid.windows(2).enumerate() {
        if !((w[1] - w[0]) - h).abs().le(&(1e-9 * scale)) {
            return Err(Error::NonUniformGrid(format!(
                "step {i} is {} but the mean step is {h}",
                w[1] - w[0]
            )));
        }
    }
    if !(h > 0.0) {
        return Err(Error::NonUniformGrid("grid must be strictly increasing".into()));
    }
    Ok(h)
}

/// Derivative of `values` sampled on a uniform `grid`: central differences
/// in the interior, one-sided at the ends.
pub fn finite_difference(grid: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let h = uniform_spacing(grid)?;
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    let n = values.len();
    Ok((0..n)
        .map(|i| match i {
            0 => (values[1] - values[0]) / h,
            i if i == n - 1 => (values[n - 1] - values[n - 2]) / h,
            i => (values[i + 1] - values[i - 1]) / (2.0 * h),
        })
        .collect())
}

/// `dQ/dt0` on a uniform grid.
pub fn dq_dt0(params: &LadderParams, bc: BoundaryCondition, t0_grid: &[f64]) -> Result<Vec<f64>> {
    uniform_spacing(t0_grid)?;
    finite_difference(t0_grid, &q_curve(params, bc, t0_grid)?)
}

/// Median of `values` (NaNs sort last).
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn first_quartile(curve: &[f64]) -> &[f64] {
    &curve[..(curve.len() / 4).max(1).min(curve.len())]
}

/// Baseline used by [`detect_critical_t0`]: the median of the first quarter
/// of the curve.
pub fn curve_baseline(curve: &[f64]) -> f64 {
    if curve.is_empty() {
        return f64::NAN;
    }
    median(first_quartile(curve))
}

/// Default jump threshold: five times the interquartile range of the first
/// quarter of the curve.
pub fn default_epsilon(curve: &[f64]) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    let mut head = first_quartile(curve).to_vec();
    head.sort_by(f64::total_cmp);
    5.0 * (quantile(&head, 0.75) - quantile(&head, 0.25))
}

/// Every grid value at which `curve` rises above `baseline + epsilon` after
/// having been at or below it.
pub fn detect_critical_t0(curve: &[f64], t0_grid: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    if curve.len() != t0_grid.len() {
        return Err(Error::DimensionMismatch {
            expected: t0_grid.len(),
            got: curve.len(),
        });
    }
    if curve.is_empty() {
        return Ok(Vec::new());
    }
    let threshold = curve_baseline(curve) + epsilon;
    let mut armed = false;
    let mut found = Vec::new();
    for (&c, &t0) in curve.iter().zip(t0_grid) {
        if c > threshold {
            if armed {
                found.push(t0);
            }
            armed = false;
        } else if c <= threshold {
            armed = true;
        }
    }
    Ok(found)
}

/// Settings of a log-spaced transition scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanOptions {
    pub log10_min: f64,
    pub log10_max: f64,
    pub points: usize,
    /// `|ΔQ|` is floored at `relative_floor * max(1, Q(0))` before taking logs.
    pub relative_floor: f64,
    /// Smallest admissible jump threshold in units of the log-log slope.
    pub min_epsilon: f64,
    /// Explicit threshold; overrides the IQR rule when set.
    pub epsilon: Option<f64>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            log10_min: -12.0,
            log10_max: -1.0,
            points: 111,
            relative_floor: 1e-13,
            min_epsilon: 1.0,
            epsilon: None,
        }
    }
}

impl ScanOptions {
    pub fn log10_grid(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| self.log10_min + (self.log10_max - self.log10_min) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 3 {
            return Err(Error::param("points", "a scan needs at least 3 points"));
        }
        if !(self.log10_min.is_finite() && self.log10_max.is_finite() && self.log10_min < self.log10_max) {
            return Err(Error::param("log10_min", "need finite log10_min < log10_max"));
        }
        if !(self.relative_floor > 0.0) {
            return Err(Error::param("relative_floor", "must be positive"));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(Error::param("epsilon", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalScan {
    pub t0: Vec<f64>,
    pub q: Vec<f64>,
    pub q_baseline: f64,
    pub delta_q: Vec<f64>,
    /// `d log10|ΔQ| / d log10 t0`.
    pub log_slope: Vec<f64>,
    pub curve_baseline: f64,
    pub epsilon: f64,
    pub critical_t0: Vec<f64>,
}

/// `d log10 max(|ΔQ|, floor) / d log10 t0` on a uniform log10 grid.
pub fn log_slope(log10_grid: &[f64], delta_q: &[f64], floor: f64) -> Result<Vec<f64>> {
    let logs: Vec<f64> = delta_q.iter().map(|d| d.abs().max(floor).log10()).collect();
    finite_difference(log10_grid, &logs)
}

/// Scan `t0` over a log-spaced mesh and report every transition.
pub fn critical_t0_scan(params: &LadderParams, bc: BoundaryCondition, opts: &ScanOptions) -> Result<CriticalScan> {
    opts.validate()?;
    params.validate()?;
    let log_grid = opts.log10_grid();
    let t0: Vec<f64> = log_grid.iter().map(|l| 10f64.powf(*l)).collect();
    let q_baseline = spectrum_q(&params.with_t0(0.0), bc)?;
    let q = q_curve(params, bc, &t0)?;
    let delta_q = subtract_baseline(&t0, &q, q_baseline);
    let floor = opts.relative_floor * q_baseline.max(1.0);
    let log_slope = log_slope(&log_grid, &delta_q, floor)?;
    let epsilon = opts
        .epsilon
        .unwrap_or_else(|| default_epsilon(&log_slope).max(opts.min_epsilon));
    let critical_t0 = detect_critical_t0(&log_slope, &t0, epsilon)?;
    Ok(CriticalScan {
        curve_baseline: curve_baseline(&log_slope),
        t0,
        q,
        q_baseline,
        delta_q,
        log_slope,
        epsilon,
        critical_t0,
    })
}

/// `(Δρ̄₊, Δρ̄₋)`: means over the states with `Δρ > 0` and `Δρ < 0`.
/// A side with no members is `None`.
pub fn band_polarization(delta_rhos: &[f64]) -> (Option<f64>, Option<f64>) {
    let mean = |pick: fn(f64) -> bool| {
        let (sum, count) = delta_rhos
            .iter()
            .filter(|&&d| pick(d))
            .fold((0.0, 0usize), |(s, c), &d| (s + d, c + 1));
        (count > 0).then(|| sum / count as f64)
    };
    (mean(|d| d > 0.0), mean(|d| d < 0.0))
}

fn clamped_gap(lower: impl Iterator<Item = f64>, upper: impl Iterator<Item = f64>) -> f64 {
    let max_lower = lower.fold(f64::NEG_INFINITY, f64::max);
    let min_upper = upper.fold(f64::INFINITY, f64::min);
    if max_lower.is_finite() && min_upper.is_finite() {
        (min_upper - max_lower).max(0.0)
    } else {
        0.0
    }
}

/// Real-energy gap with the spectrum split by the sign of `Re E`
/// (`Re E = 0` counts as positive).
pub fn real_gap(eigenvalues: &[Complex64]) -> f64 {
    clamped_gap(
        eigenvalues.iter().filter(|e| e.re < 0.0).map(|e| e.re),
        eigenvalues.iter().filter(|e| e.re >= 0.0).map(|e| e.re),
    )
}

/// Real-energy gap between the two polarization bands: `min Re E` over
/// `Δρ > 0` minus `max Re E` over `Δρ < 0`, clamped at zero.
///
/// A finite ladder always has level spacing around `Re E = 0`, so splitting
/// by energy sign reports a positive gap even where the bands overlap. The
/// band split is zero exactly where the bands interpenetrate.
pub fn band_gap(eigenvalues: &[Complex64], delta_rhos: &[f64]) -> f64 {
    let pairs = || eigenvalues.iter().zip(delta_rhos);
    clamped_gap(
        pairs().filter(|(_, &d)| d < 0.0).map(|(e, _)| e.re),
        pairs().filter(|(_, &d)| d > 0.0).map(|(e, _)| e.re),
    )
}

/// Parameters a sweep axis can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    NCells,
    T1,
    DeltaA,
    DeltaB,
    T0,
    V,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::NCells => "n_cells",
            SweepParameter::T1 => "t1",
            SweepParameter::DeltaA => "delta_a",
            SweepParameter::DeltaB => "delta_b",
            SweepParameter::T0 => "t0",
            SweepParameter::V => "v",
        }
    }

    pub fn apply(self, mut p: LadderParams, value: f64) -> LadderParams {
        match self {
            SweepParameter::NCells => p.n_cells = value as usize,
            SweepParameter::T1 => p.t1 = value,
            SweepParameter::DeltaA => p.delta_a = value,
            SweepParameter::DeltaB => p.delta_b = value,
            SweepParameter::T0 => p.t0 = value,
            SweepParameter::V => p.v = value,
        }
        p
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n_cells" | "n" => SweepParameter::NCells,
            "t1" => SweepParameter::T1,
            "delta_a" => SweepParameter::DeltaA,
            "delta_b" => SweepParameter::DeltaB,
            "t0" => SweepParameter::T0,
            "v" => SweepParameter::V,
            other => return Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(parameter: SweepParameter, values: Vec<f64>) -> Self {
        SweepAxis { parameter, values }
    }

    pub fn validate(&self) -> Result<()> {
        check_grid(&self.values, self.parameter.name())?;
        if self.parameter == SweepParameter::NCells
            && self.values.iter().any(|&v| v.fract() != 0.0 || v < 2.0)
        {
            return Err(Error::Config("n_cells grid must hold integers >= 2".into()));
        }
        Ok(())
    }
}

/// Which diagnostics each sweep cell evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    /// Right eigenvectors: enables polarization, band gap and IPR.
    pub states: bool,
    /// `ΔQ` against a `t0 = 0` baseline of the same cell.
    pub delta_q: bool,
    pub tolerances: EigenTolerances,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            states: true,
            delta_q: true,
            tolerances: EigenTolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDiagnostics {
    pub n_eigenvalues: usize,
    pub min_re: f64,
    pub max_re: f64,
    pub max_abs_im: f64,
    pub q: f64,
    pub delta_q: Option<f64>,
    /// Along the first axis when it is a uniform `t0` grid.
    pub dq_dt0: Option<f64>,
    pub polarization_plus: Option<f64>,
    pub polarization_minus: Option<f64>,
    /// Gap between the polarization bands, see [`band_gap`].
    pub band_gap: Option<f64>,
    /// Gap between the `Re E < 0` and `Re E ≥ 0` classes, see [`real_gap`].
    pub real_gap: f64,
    pub max_ipr: Option<f64>,
    pub mean_ipr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    /// Grid indices, row-major over the axes.
    pub index: Vec<usize>,
    pub params: LadderParams,
    pub boundary: BoundaryCondition,
    pub diagnostics: Option<CellDiagnostics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub base: LadderParams,
    pub boundary: BoundaryCondition,
    pub axes: Vec<SweepAxis>,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

fn cell_diagnostics(
    params: &LadderParams,
    bc: BoundaryCondition,
    opts: &SweepOptions,
    baseline: Option<f64>,
) -> Result<CellDiagnostics> {
    let h = build_hamiltonian(params, bc)?;
    let (eigenvalues, states) = if opts.states {
        let sys = eigen::eig_right_with(&h, &opts.tolerances)?;
        let obs = observables::state_observables(&sys, None)?;
        (sys.eigenvalues, Some(obs))
    } else {
        (eigen::eigenvalues(&h)?, None)
    };
    let q = total_imag(&eigenvalues);
    let mut d = CellDiagnostics {
        n_eigenvalues: eigenvalues.len(),
        min_re: eigenvalues.iter().map(|e| e.re).fold(f64::INFINITY, f64::min),
        max_re: eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max),
        max_abs_im: eigenvalues.iter().map(|e| e.im.abs()).fold(0.0, f64::max),
        q,
        delta_q: baseline.map(|b| if params.t0 == 0.0 { 0.0 } else { q - b }),
        dq_dt0: None,
        polarization_plus: None,
        polarization_minus: None,
        band_gap: None,
        real_gap: real_gap(&eigenvalues),
        max_ipr: None,
        mean_ipr: None,
    };
    if let Some(obs) = states {
        let rhos: Vec<f64> = obs.iter().map(|o| o.delta_rho).collect();
        (d.polarization_plus, d.polarization_minus) = band_polarization(&rhos);
        d.band_gap = Some(band_gap(&eigenvalues, &rhos));
        d.max_ipr = Some(obs.iter().map(|o| o.ipr).fold(0.0, f64::max));
        d.mean_ipr = Some(obs.iter().map(|o| o.ipr).sum::<f64>() / obs.len() as f64);
    }
    Ok(d)
}

/// Run `f` on a dedicated pool of `workers` threads (`0` = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Evaluate every grid point of `axes` (at most two) around `base`.
///
/// Cells run concurrently on the current rayon pool; the result is ordered
/// row-major over the axes regardless of completion order. A failing cell
/// records its error and never aborts the sweep.
pub fn sweep(
    base: &LadderParams,
    bc: BoundaryCondition,
    axes: &[SweepAxis],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::Config(format!("a sweep takes one or two axes, got {}", axes.len())));
    }
    for axis in axes {
        axis.validate()?;
    }
    if axes.len() == 2 && axes[0].parameter == axes[1].parameter {
        return Err(Error::Config(format!("axis `{}` given twice", axes[0].parameter)));
    }
    let shape: Vec<usize> = axes.iter().map(|a| a.values.len()).collect();
    let total: usize = shape.iter().product();
    let index_of = |flat: usize| -> Vec<usize> {
        let mut rest = flat;
        let mut idx = vec![0; shape.len()];
        for k in (0..shape.len()).rev() {
            idx[k] = rest % shape[k];
            rest /= shape[k];
        }
        idx
    };
    let params_of = |idx: &[usize]| {
        axes.iter()
            .zip(idx)
            .fold(*base, |p, (axis, &i)| axis.parameter.apply(p, axis.values[i]))
    };

    // One t0 = 0 reference per distinct remaining parameter set.
    let mut baselines: BTreeMap<String, Option<f64>> = BTreeMap::new();
    if opts.delta_q {
        for flat in 0..total {
            let p = params_of(&index_of(flat)).with_t0(0.0);
            baselines.entry(baseline_key(&p)).or_insert(None);
        }
        let keys: Vec<String> = baselines.keys().cloned().collect();
        let values: Vec<Option<f64>> = keys
            .par_iter()
            .map(|k| {
                let p: LadderParams = serde_json::from_str(k).ok()?;
                spectrum_q(&p, bc).ok()
            })
            .collect();
        for (k, v) in keys.into_iter().zip(values) {
            baselines.insert(k, v);
        }
    }

    let mut cells: Vec<SweepCell> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let index = index_of(flat);
            let params = params_of(&index);
            let baseline = if opts.delta_q {
                baselines.get(&baseline_key(&params.with_t0(0.0))).copied().flatten()
            } else {
                None
            };
            let outcome = params
                .validate()
                .and_then(|_| cell_diagnostics(&params, bc, opts, baseline));
            let (diagnostics, error) = match outcome {
                Ok(d) => (Some(d), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepCell {
                index,
                params,
                boundary: bc,
                diagnostics,
                error,
            }
        })
        .collect();

    if axes[0].parameter == SweepParameter::T0 && uniform_spacing(&axes[0].values).is_ok() {
        fill_derivative(&mut cells, &axes[0].values, shape.get(1).copied().unwrap_or(1));
    }

    Ok(SweepResult {
        base: *base,
        boundary: bc,
        axes: axes.to_vec(),
        cells,
    })
}

fn baseline_key(p: &LadderParams) -> String {
    serde_json::to_string(p).expect("parameters serialize")
}

fn fill_derivative(cells: &mut [SweepCell], t0: &[f64], stride: usize) {
    for col in 0..stride {
        let q: Option<Vec<f64>> = (0..t0.len())
            .map(|i| cells[i * stride + col].diagnostics.as_ref().map(|d| d.q))
            .collect();
        let Some(q) = q else { continue };
        if let Ok(dq) = finite_difference(t0, &q) {
            for (i, v) in dq.into_iter().enumerate() {
                if let Some(d) = cells[i * stride + col].diagnostics.as_mut() {
                    d.dq_dt0 = Some(v);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn total_imag_examples() {
        assert_eq!(total_imag(&[c(1.0, 0.0), c(-2.0, 0.0)]), 0.0);
        assert_eq!(total_imag(&[c(0.0, 1.0), c(0.0, -1.0)]), 2.0);
    }

    #[test]
    fn derivative_of_linear_and_constant() {
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let lin: Vec<f64> = grid.iter().map(|x| 3.0 * x + 1.0).collect();
        for d in finite_difference(&grid, &lin).unwrap() {
            assert!((d - 3.0).abs() < 1e-12);
        }
        assert!(finite_difference(&grid, &[2.0; 11]).unwrap().iter().all(|&d| d == 0.0));
        assert!(matches!(
            finite_difference(&[0.0, 0.1, 0.3], &[0.0; 3]),
            Err(Error::NonUniformGrid(_))
        ));
        assert!(finite_difference(&[0.0, 0.1], &[0.0; 2]).is_err());
    }

    #[test]
    fn detection_examples() {
        let grid: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert!(detect_critical_t0(&[0.0; 40], &grid, 0.1).unwrap().is_empty());
        let step: Vec<f64> = (0..40).map(|i| if i >= 10 { 1.0 } else { 0.0 }).collect();
        assert_eq!(detect_critical_t0(&step, &grid, 0.5).unwrap(), vec![10.0]);
        let two: Vec<f64> = (0..40).map(|i| if (10..15).contains(&i) || i >= 30 { 1.0 } else { 0.0 }).collect();
        assert_eq!(detect_critical_t0(&two, &grid, 0.5).unwrap(), vec![10.0, 30.0]);
        let smooth: Vec<f64> = grid.iter().map(|x| 1e-3 * x).collect();
        assert!(detect_critical_t0(&smooth, &grid, 0.5).unwrap().is_empty());
        assert!(detect_critical_t0(&step, &grid, 0.0).is_err());
    }

    #[test]
    fn quartile_statistics() {
        let curve = [1.0, 2.0, 3.0, 4.0, 100.0, 100.0, 100.0, 100.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(curve_baseline(&curve), 2.5);
        assert!((default_epsilon(&curve) - 5.0 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn polarization_examples() {
        assert_eq!(band_polarization(&[1.0, 1.0, 1.0]), (Some(1.0), None));
        assert_eq!(band_polarization(&[0.5, -0.5]), (Some(0.5), Some(-0.5)));
        assert_eq!(band_polarization(&[]), (None, None));
    }

    #[test]
    fn gap_examples() {
        assert_eq!(real_gap(&[c(-1.0, 0.0), c(1.0, 0.0)]), 2.0);
        let g = real_gap(&[c(-1.0, 0.0), c(-0.1, 0.0), c(0.05, 0.0), c(1.0, 0.0)]);
        assert!((g - 0.15).abs() < 1e-15);
        assert_eq!(real_gap(&[c(1.0, 0.0), c(2.0, 0.0)]), 0.0);
        let e = [c(-1.0, 0.0), c(0.2, 0.0), c(-0.2, 0.0), c(1.0, 0.0)];
        assert_eq!(band_gap(&e, &[-0.9, -0.9, 0.9, 0.9]), 0.0);
        assert!((band_gap(&e, &[-0.9, 0.9, -0.9, 0.9]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn delta_q_is_zero_at_origin() {
        let p = LadderParams::new(8, 0.75, 0.25, -0.1, 0.0, 0.5);
        let dq = delta_q(&p, BoundaryCondition::Moebius, &[0.0, 0.01, 0.02]).unwrap();
        assert_eq!(dq[0], 0.0);
    }

    #[test]
    fn single_point_sweep_matches_direct_computation() {
        let p = LadderParams::new(10, 0.75, 0.25, -0.25, 0.01, 0.5);
        let res = sweep(
            &p,
            BoundaryCondition::Moebius,
            &[SweepAxis::new(SweepParameter::V, vec![0.5])],
            &SweepOptions::default(),
        )
        .unwrap();
        let d = res.cells[0].diagnostics.as_ref().unwrap();
        assert_eq!(res.cells[0].params, p);
        assert_eq!(d.q, spectrum_q(&p, BoundaryCondition::Moebius).unwrap());
        let q0 = spectrum_q(&p.with_t0(0.0), BoundaryCondition::Moebius).unwrap();
        assert_eq!(d.delta_q, Some(d.q - q0));
    }

    #[test]
    fn sweep_is_row_major_and_isolates_failures() {
        let p = LadderParams::new(6, 0.75, 0.25, -0.25, 0.01, 0.5);
        let axes = [
            SweepAxis::new(SweepParameter::T1, vec![0.5, 0.6, 0.75]),
            SweepAxis::new(SweepParameter::T0, vec![-0.01, 0.0, 0.01]),
        ];
        let res = sweep(&p, BoundaryCondition::Open, &axes, &SweepOptions::default()).unwrap();
        assert_eq!(res.cells.len(), 9);
        assert_eq!(res.cells[5].index, vec![1, 2]);
        assert_eq!(res.cells[5].params.t1, 0.6);
        assert_eq!(res.cells[5].params.t0, 0.01);
        assert!(res.cells.iter().all(|c| c.error.is_some() == (c.params.t0 < 0.0)));
        assert_eq!(res.failures(), 3);
        assert_eq!(res.cells[4].diagnostics.as_ref().unwrap().delta_q, Some(0.0));
    }

    #[test]
    fn uniform_t0_axis_gets_a_derivative() {
        let p = LadderParams::new(6, 0.75, 0.25, -0.25, 0.0, 0.5);
        let axes = [SweepAxis::new(SweepParameter::T0, vec![0.0, 0.01, 0.02])];
        let res = sweep(&p, BoundaryCondition::Moebius, &axes, &SweepOptions::default()).unwrap();
        let q: Vec<f64> = res.cells.iter().map(|c| c.diagnostics.as_ref().unwrap().q).collect();
        let expect = finite_difference(&axes[0].values, &q).unwrap();
        for (c, e) in res.cells.iter().zip(expect) {
            assert_eq!(c.diagnostics.as_ref().unwrap().dq_dt0, Some(e));
        }
    }

    #[test]
    fn sweep_rejects_bad_axes() {
        let p = LadderParams::new(6, 0.75, 0.25, -0.25, 0.01, 0.5);
        let run = |axes: &[SweepAxis]| sweep(&p, BoundaryCondition::Open, axes, &SweepOptions::default());
        assert!(run(&[SweepAxis::new(SweepParameter::V, vec![1.0, 0.5])]).is_err());
        assert!(run(&[SweepAxis::new(SweepParameter::V, vec![f64::NAN])]).is_err());
        assert!(run(&[SweepAxis::new(SweepParameter::NCells, vec![4.5])]).is_err());
        assert!(run(&[]).is_err());
    }

    #[test]
    fn parameter_names_round_trip() {
        for p in [
            SweepParameter::NCells,
            SweepParameter::T1,
            SweepParameter::DeltaA,
            SweepParameter::DeltaB,
            SweepParameter::T0,
            SweepParameter::V,
        ] {
            assert_eq!(p.name().parse::<SweepParameter>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{}\"", p.name()));
        }
    }
}
