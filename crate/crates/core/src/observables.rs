//! Per-state and group-level localization diagnostics.
//!
//! States are `2N`-component vectors in the chain-major basis of
//! [`crate::lattice`]. Every per-state quantity requires a unit-norm input.

use std::fmt;

use ndarray::ArrayView1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenSystem;
use crate::lattice::Chain;
use crate::{Error, Result};

/// Allowed deviation of `‖ψ‖₂` from one.
pub const NORM_TOL: f64 = 1e-10;

fn check_normalized(state: ArrayView1<'_, Complex64>) -> Result<()> {
    if state.len() < 2 || state.len() % 2 != 0 {
        return Err(Error::DimensionMismatch {
            expected: 2 * (state.len() / 2).max(1),
            got: state.len(),
        });
    }
    let norm = state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// `Σ_s Σ_x |ψ_{s,x}|⁴`.
pub fn ipr(state: ArrayView1<'_, Complex64>) -> Result<f64> {
    check_normalized(state)?;
    Ok(state.iter().map(|z| z.norm_sqr().powi(2)).sum())
}

/// `(ρ_a, ρ_b)`: total weight on each chain.
pub fn chain_weights(state: ArrayView1<'_, Complex64>) -> Result<(f64, f64)> {
    check_normalized(state)?;
    let n = state.len() / 2;
    let rho = |chain: Chain| chain.range(n).map(|i| state[i].norm_sqr()).sum::<f64>();
    Ok((rho(Chain::A), rho(Chain::B)))
}

/// Single-chain density polarization `ρ_a - ρ_b`.
pub fn delta_rho(state: ArrayView1<'_, Complex64>) -> Result<f64> {
    chain_weights(state).map(|(a, b)| a - b)
}

/// `Σ_x x (|ψ_{a,x}|² + |ψ_{b,x}|²)` with `x ∈ [1, N]`.
pub fn mean_position(state: ArrayView1<'_, Complex64>) -> Result<f64> {
    check_normalized(state)?;
    let n = state.len() / 2;
    Ok((0..n)
        .map(|i| (i + 1) as f64 * (state[i].norm_sqr() + state[n + i].norm_sqr()))
        .sum())
}

/// `|ψ_{s,x}|` along one chain, rescaled so its maximum is exactly one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainProfile {
    pub chain: Chain,
    pub amplitudes: Vec<f64>,
}

impl ChainProfile {
    /// Rescales non-negative `amplitudes` by their maximum.
    pub fn from_amplitudes(chain: Chain, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Empty("chain profile"));
        }
        let max = amplitudes.iter().fold(0.0f64, |m, &a| m.max(a.abs()));
        if !(max > 1e-300) || !max.is_finite() {
            return Err(Error::EmptyChain {
                chain: chain.label(),
                max,
            });
        }
        let amplitudes = amplitudes.into_iter().map(|a| a.abs() / max).collect();
        Ok(ChainProfile { chain, amplitudes })
    }

    pub fn n_cells(&self) -> usize {
        self.amplitudes.len()
    }

    /// Position `x ∈ [1, N]` of the first maximum.
    pub fn peak_position(&self) -> usize {
        let mut best = 0;
        for (i, &a) in self.amplitudes.iter().enumerate() {
            if a > self.amplitudes[best] {
                best = i;
            }
        }
        best + 1
    }
}

pub fn chain_profile(state: ArrayView1<'_, Complex64>, chain: Chain) -> Result<ChainProfile> {
    check_normalized(state)?;
    let n = state.len() / 2;
    ChainProfile::from_amplitudes(chain, chain.range(n).map(|i| state[i].norm()).collect())
}

/// Pointwise mean of already-normalized profiles, rescaled to maximum one.
pub fn average_profiles(profiles: &[ChainProfile]) -> Result<ChainProfile> {
    let first = profiles.first().ok_or(Error::Empty("profile group"))?;
    let n = first.n_cells();
    let mut sum = vec![0.0; n];
    for p in profiles {
        if p.n_cells() != n || p.chain != first.chain {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.n_cells(),
            });
        }
        for (s, a) in sum.iter_mut().zip(&p.amplitudes) {
            *s += a;
        }
    }
    let count = profiles.len() as f64;
    ChainProfile::from_amplitudes(first.chain, sum.into_iter().map(|s| s / count).collect())
}

/// Normalizes each state's chain profile, averages pointwise, then rescales
/// the average so its maximum is one.
pub fn group_average_profile<'a, I>(states: I, chain: Chain) -> Result<ChainProfile>
where
    I: IntoIterator<Item = ArrayView1<'a, Complex64>>,
{
    let profiles = states
        .into_iter()
        .map(|s| chain_profile(s, chain))
        .collect::<Result<Vec<_>>>()?;
    average_profiles(&profiles)
}

/// Where a fitted profile is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitSide {
    /// Peak at the right end (`x = N`); the amplitude decays towards the left.
    LeftDecay,
    /// Peak at the left end (`x = 1`); the amplitude decays towards the right.
    RightDecay,
    /// Interior peak; distances are measured from the chain centre.
    Centered,
}

impl fmt::Display for FitSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitSide::LeftDecay => "left-decay",
            FitSide::RightDecay => "right-decay",
            FitSide::Centered => "centered",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalizationFit {
    /// Localization length in lattice units.
    pub xi: f64,
    pub amplitude: f64,
    /// Anchor of `|x - x0|`: the chain centre, or the peaked end for edge profiles.
    pub center_x0: f64,
    pub side: FitSide,
    pub r_squared: f64,
    pub points_used: usize,
}

impl LocalizationFit {
    pub fn low_confidence(&self) -> bool {
        self.r_squared < LOW_CONFIDENCE_R2
    }
}

pub const LOW_CONFIDENCE_R2: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FitOutcome {
    Localized(LocalizationFit),
    /// Log-amplitude does not decrease with distance (slope ≥ 0).
    NotLocalized { slope: f64, side: FitSide },
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&LocalizationFit> {
        match self {
            FitOutcome::Localized(f) => Some(f),
            FitOutcome::NotLocalized { .. } => None,
        }
    }

    pub fn xi(&self) -> Option<f64> {
        self.fit().map(|f| f.xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Amplitudes below this are treated as numerical noise.
    pub noise_floor: f64,
    /// The fit window runs outward from the anchor until the profile first
    /// drops below this fraction of its maximum.
    pub window_floor: f64,
    /// A peak within this fraction of the chain length from an end is treated
    /// as edge-localized.
    pub edge_fraction: f64,
    pub min_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            noise_floor: 1e-12,
            window_floor: 0.1,
            edge_fraction: 0.1,
            min_points: 4,
        }
    }
}

/// Log-linear least-squares fit of `|ψ̄_x| ≈ A exp(-|x - x0| / ξ)`.
pub fn fit_localization_length(profile: &ChainProfile) -> Result<FitOutcome> {
    fit_localization_length_with(profile, &FitOptions::default())
}

pub fn fit_localization_length_with(profile: &ChainProfile, opts: &FitOptions) -> Result<FitOutcome> {
    let n = profile.n_cells();
    let amps = &profile.amplitudes;
    let edge_cells = ((opts.edge_fraction * n as f64).ceil() as usize).max(1);
    let peak = profile.peak_position();
    let (anchor, side) = if peak <= edge_cells {
        (1.0, FitSide::RightDecay)
    } else if peak > n - edge_cells {
        (n as f64, FitSide::LeftDecay)
    } else {
        ((n as f64 + 1.0) / 2.0, FitSide::Centered)
    };

    let mut order: Vec<usize> = (0..n).filter(|&i| amps[i] >= opts.noise_floor).collect();
    if order.len() < opts.min_points {
        return Err(Error::InsufficientPoints {
            usable: order.len(),
            required: opts.min_points,
        });
    }
    let dist = |i: usize| ((i + 1) as f64 - anchor).abs();
    order.sort_by(|&i, &j| dist(i).total_cmp(&dist(j)).then(i.cmp(&j)));
    let below = order.iter().position(|&i| amps[i] < opts.window_floor).unwrap_or(order.len());
    order.truncate(below.max(opts.min_points));

    let pts: Vec<(f64, f64)> = order.iter().map(|&i| (dist(i), amps[i].ln())).collect();
    let m = pts.len() as f64;
    let mean_d = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sdd: f64 = pts.iter().map(|p| (p.0 - mean_d).powi(2)).sum();
    let sdy: f64 = pts.iter().map(|p| (p.0 - mean_d) * (p.1 - mean_y)).sum();
    let slope = if sdd > 0.0 { sdy / sdd } else { 0.0 };
    // Exact input can leave round-off of either sign on a flat profile.
    if slope >= -1e-13 {
        return Ok(FitOutcome::NotLocalized { slope, side });
    }
    let intercept = mean_y - slope * mean_d;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok(FitOutcome::Localized(LocalizationFit {
        xi: -1.0 / slope,
        amplitude: intercept.exp(),
        center_x0: anchor,
        side,
        r_squared,
        points_used: pts.len(),
    }))
}

/// Site-resolved densities of one left/right pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiorthogonalDensity {
    /// `Re(conj(l_x) r_x)` over all `2N` sites.
    pub biorthogonal: Vec<f64>,
    /// `Im(conj(l_x) r_x)`; sums to zero for a normalized pair.
    pub imaginary: Vec<f64>,
    /// `|r_x|²`.
    pub right: Vec<f64>,
    /// `|l_x|²`.
    pub left: Vec<f64>,
}

impl BiorthogonalDensity {
    pub fn n_cells(&self) -> usize {
        self.biorthogonal.len() / 2
    }

    pub fn chain<'a>(&self, values: &'a [f64], chain: Chain) -> &'a [f64] {
        &values[chain.range(self.n_cells())]
    }
}

/// Tolerance on `<l, r> = 1` for a valid pair.
pub const PAIR_TOL: f64 = 1e-8;

pub fn biorthogonal_density(
    left: ArrayView1<'_, Complex64>,
    right: ArrayView1<'_, Complex64>,
) -> Result<BiorthogonalDensity> {
    if left.len() != right.len() {
        return Err(Error::DimensionMismatch {
            expected: right.len(),
            got: left.len(),
        });
    }
    let overlap: Complex64 = left.iter().zip(right.iter()).map(|(l, r)| l.conj() * r).sum();
    if (overlap - 1.0).norm() > PAIR_TOL {
        return Err(Error::Unpaired { overlap });
    }
    let products: Vec<Complex64> = left.iter().zip(right.iter()).map(|(l, r)| l.conj() * r).collect();
    Ok(BiorthogonalDensity {
        biorthogonal: products.iter().map(|z| z.re).collect(),
        imaginary: products.iter().map(|z| z.im).collect(),
        right: right.iter().map(|z| z.norm_sqr()).collect(),
        left: left.iter().map(|z| z.norm_sqr()).collect(),
    })
}

/// `max / min` over strictly positive entries; `None` when there are none.
pub fn dynamic_range(values: &[f64]) -> Option<f64> {
    let positive = values.iter().copied().filter(|&v| v > 0.0);
    let (min, max) = positive.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (max > 0.0).then(|| max / min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    I,
    II,
    III,
    IV,
    V,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
            Region::V => "V",
        })
    }
}

/// Labels assigned to the four polarized quadrants of
/// `(sign Re E, sign Δρ)`. Weakly polarized states are always `III`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionMap {
    pub threshold: f64,
    pub negative_energy_chain_b: Region,
    pub negative_energy_chain_a: Region,
    pub positive_energy_chain_b: Region,
    pub positive_energy_chain_a: Region,
}

impl Default for RegionMap {
    fn default() -> Self {
        RegionMap {
            threshold: 0.2,
            negative_energy_chain_b: Region::I,
            negative_energy_chain_a: Region::II,
            positive_energy_chain_b: Region::IV,
            positive_energy_chain_a: Region::V,
        }
    }
}

/// `Re E = 0` counts as positive energy.
pub fn classify_region(energy: Complex64, delta_rho: f64, map: &RegionMap) -> Region {
    if delta_rho.abs() <= map.threshold {
        return Region::III;
    }
    match (energy.re < 0.0, delta_rho > 0.0) {
        (true, false) => map.negative_energy_chain_b,
        (true, true) => map.negative_energy_chain_a,
        (false, false) => map.positive_energy_chain_b,
        (false, true) => map.positive_energy_chain_a,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateObservables {
    pub energy: Complex64,
    pub ipr: f64,
    pub delta_rho: f64,
    pub mean_position: f64,
    pub region: Option<Region>,
}

/// Observables of every right eigenvector, in eigenvalue order.
pub fn state_observables(sys: &EigenSystem, regions: Option<&RegionMap>) -> Result<Vec<StateObservables>> {
    (0..sys.len())
        .map(|j| {
            let r = sys.right_vector(j);
            let energy = sys.eigenvalues[j];
            let delta_rho = delta_rho(r)?;
            Ok(StateObservables {
                energy,
                ipr: ipr(r)?,
                delta_rho,
                mean_position: mean_position(r)?,
                region: regions.map(|m| classify_region(energy, delta_rho, m)),
            })
        })
        .collect()
}

/// States grouped by the sign of their chain polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarizationGroup {
    /// `Δρ > 0`: mostly on chain a.
    Plus,
    /// `Δρ < 0`: mostly on chain b.
    Minus,
}

impl PolarizationGroup {
    pub const BOTH: [PolarizationGroup; 2] = [PolarizationGroup::Plus, PolarizationGroup::Minus];

    pub fn contains(self, delta_rho: f64) -> bool {
        match self {
            PolarizationGroup::Plus => delta_rho > 0.0,
            PolarizationGroup::Minus => delta_rho < 0.0,
        }
    }

    /// Chain carrying most of the weight of the group.
    pub fn dominant_chain(self) -> Chain {
        match self {
            PolarizationGroup::Plus => Chain::A,
            PolarizationGroup::Minus => Chain::B,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolarizationGroup::Plus => "plus",
            PolarizationGroup::Minus => "minus",
        }
    }
}

impl fmt::Display for PolarizationGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Indices of the right eigenvectors of `sys` in `group`.
pub fn group_members(sys: &EigenSystem, group: PolarizationGroup) -> Result<Vec<usize>> {
    let mut members = Vec::new();
    for j in 0..sys.len() {
        if group.contains(delta_rho(sys.right_vector(j))?) {
            members.push(j);
        }
    }
    Ok(members)
}

/// Group-average profile of `chain` over the states of `group`.
pub fn polarization_group_profile(sys: &EigenSystem, group: PolarizationGroup, chain: Chain) -> Result<ChainProfile> {
    let members = group_members(sys, group)?;
    group_average_profile(members.into_iter().map(|j| sys.right_vector(j)), chain)
}
