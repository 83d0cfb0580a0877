//! Plain CSV emission with round-trip-exact float formatting.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::observables::{FitOutcome, PolarizationGroup, Region};
use crate::lattice::Chain;
use crate::{Error, Result};

pub const SPECTRUM_HEADER: &str = "re_e,im_e,ipr,delta_rho,mean_position,region";
pub const PROFILES_HEADER: &str = "chain,x,amplitude,group,n_cells";
pub const FITS_HEADER: &str = "chain,group,n_cells,xi,amplitude,r_squared,side";

/// 17 significant digits in scientific notation; parses back bit-identically.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRecord {
    pub re_e: f64,
    pub im_e: f64,
    pub ipr: f64,
    pub delta_rho: f64,
    pub mean_position: f64,
    pub region: Region,
}

fn by_energy(a: &SpectrumRecord, b: &SpectrumRecord) -> Ordering {
    a.re_e.total_cmp(&b.re_e).then(a.im_e.total_cmp(&b.im_e))
}

pub fn spectrum_csv(records: &[SpectrumRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Empty("spectrum records"));
    }
    let mut sorted = records.to_vec();
    sorted.sort_by(by_energy);
    let mut out = String::with_capacity(128 * (sorted.len() + 1));
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for r in &sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.re_e),
            fmt_f64(r.im_e),
            fmt_f64(r.ipr),
            fmt_f64(r.delta_rho),
            fmt_f64(r.mean_position),
            r.region
        );
    }
    Ok(out)
}

/// Writes `records` sorted by `(re_e, im_e)`.
pub fn emit_spectrum_csv(path: &Path, records: &[SpectrumRecord]) -> Result<()> {
    write_file(path, spectrum_csv(records)?.as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub chain: Chain,
    pub x: usize,
    pub amplitude: f64,
    pub group: PolarizationGroup,
    pub n_cells: usize,
}

pub fn profiles_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from(PROFILES_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.chain, r.x, fmt_f64(r.amplitude), r.group, r.n_cells);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub chain: Chain,
    pub group: PolarizationGroup,
    pub n_cells: usize,
    /// A non-localized outcome leaves `xi`, `amplitude` and `r_squared` empty.
    pub outcome: FitOutcome,
}

pub fn fits_csv(rows: &[FitRow]) -> String {
    let mut out = String::from(FITS_HEADER);
    out.push('\n');
    for r in rows {
        let (xi, amp, r2, side) = match r.outcome {
            FitOutcome::Localized(f) => (Some(f.xi), Some(f.amplitude), Some(f.r_squared), f.side),
            FitOutcome::NotLocalized { side, .. } => (None, None, None, side),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.chain,
            r.group,
            r.n_cells,
            fmt_opt(xi),
            fmt_opt(amp),
            fmt_opt(r2),
            side
        );
    }
    out
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
