//! Skin-state ansatz and first-order boundary mixing.
//!
//! Under open boundaries and `t0 = 0` each chain is a Hatano–Nelson chain
//! whose states pile up at one end with amplitude `∝ r_s^x`. The ansatz keeps
//! only that envelope and drops the Bloch phase and oscillation, so it is not
//! an exact eigenstate. It is nevertheless enough to show the mechanism:
//!
//! * `H_t0` only couples opposite chains, so its first-order matrix element
//!   vanishes on any single-chain state;
//! * the Möbius boundary term mixes the two chains, and once a state carries
//!   weight on both, `<H_t0>` becomes nonzero at first order.
//!
//! Powers `r_s^N` overflow quickly, so everything goes through `ln r_s`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::log_skin_ratio;
use crate::lattice::{interchain_term, moebius_boundary_term, Chain, LadderParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzState {
    pub chain: Chain,
    pub n_cells: usize,
    /// `ln r_s`.
    pub log_ratio: f64,
    /// `ln C_s`, with `C_s = (Σ_x r_s^{2x})^{-1/2}`.
    pub log_norm: f64,
    /// `2N` components; zero off `chain`.
    pub components: Array1<Complex64>,
}

impl AnsatzState {
    /// `ln(C_s r_s^x)` for `x ∈ [1, N]`.
    pub fn log_amplitude(&self, x: usize) -> f64 {
        self.log_norm + x as f64 * self.log_ratio
    }

    pub fn view(&self) -> ArrayView1<'_, Complex64> {
        self.components.view()
    }
}

/// `ln Σ_{x=1}^{N} exp(2 x ln r)`, stable for either sign of `ln r`.
fn log_geometric_sum(log_ratio: f64, n: usize) -> f64 {
    let terms = (1..=n).map(|x| 2.0 * x as f64 * log_ratio);
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Normalized `C_s (r_s, r_s², …, r_s^N)` on `chain`, zero on the other chain.
pub fn obc_skin_ansatz(params: &LadderParams, chain: Chain) -> Result<AnsatzState> {
    params.validate()?;
    let n = params.n_cells;
    let log_ratio = log_skin_ratio(params, chain)?;
    let log_norm = -0.5 * log_geometric_sum(log_ratio, n);
    let mut components = Array1::zeros(2 * n);
    for (x, i) in (1..=n).zip(chain.range(n)) {
        components[i] = Complex64::new((log_norm + x as f64 * log_ratio).exp(), 0.0);
    }
    Ok(AnsatzState {
        chain,
        n_cells: n,
        log_ratio,
        log_norm,
        components,
    })
}

fn bilinear(left: ArrayView1<'_, Complex64>, op: &ndarray::Array2<Complex64>, right: ArrayView1<'_, Complex64>) -> Result<Complex64> {
    if left.len() != op.nrows() || right.len() != op.ncols() {
        return Err(Error::DimensionMismatch {
            expected: op.nrows(),
            got: left.len().max(right.len()),
        });
    }
    let image = op.dot(&right);
    Ok(left.iter().zip(image.iter()).map(|(l, v)| l.conj() * v).sum())
}

/// `<ψ|H_t0|ψ>` with the interchain coupling operator. Zero for any state
/// supported on a single chain.
pub fn t0_first_order_element(state: ArrayView1<'_, Complex64>, params: &LadderParams) -> Result<Complex64> {
    bilinear(state, &interchain_term(params)?, state)
}

/// Boundary mixing amplitude, evaluated two independent ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingAmplitude {
    /// Inner product with the explicit Möbius boundary matrix.
    pub numeric: Complex64,
    /// Closed form in `C_a, C_b, r_a, r_b`.
    pub closed_form: Complex64,
}

impl MixingAmplitude {
    pub fn relative_difference(&self) -> f64 {
        (self.numeric - self.closed_form).norm() / self.closed_form.norm().max(f64::MIN_POSITIVE)
    }
}

/// `<Φ_target|H_BC|Ψ_source>` between the two ansatz states, with `source`
/// the chain the state starts on.
///
/// Closed forms, with `ρ = C_a C_b`:
/// * source a: `ρ[(t1 - δa) r_a^N r_b + (t1 + δb) r_a r_b^N]`
/// * source b: `ρ[(t1 + δa) r_a^N r_b + (t1 - δb) r_a r_b^N]`
pub fn mbc_mixing_amplitude_from(params: &LadderParams, source: Chain) -> Result<MixingAmplitude> {
    let a = obc_skin_ansatz(params, Chain::A)?;
    let b = obc_skin_ansatz(params, Chain::B)?;
    let n = params.n_cells;
    let h_bc = moebius_boundary_term(params)?;
    let (target, state) = match source {
        Chain::A => (&b, &a),
        Chain::B => (&a, &b),
    };
    let numeric = bilinear(target.view(), &h_bc, state.view())?;

    let log_rho = a.log_norm + b.log_norm;
    let far_a = (log_rho + n as f64 * a.log_ratio + b.log_ratio).exp();
    let far_b = (log_rho + a.log_ratio + n as f64 * b.log_ratio).exp();
    let (t1, da, db) = (params.t1, params.delta_a, params.delta_b);
    let closed = match source {
        Chain::A => (t1 - da) * far_a + (t1 + db) * far_b,
        Chain::B => (t1 + da) * far_a + (t1 - db) * far_b,
    };
    Ok(MixingAmplitude {
        numeric,
        closed_form: Complex64::new(closed, 0.0),
    })
}

/// `<Φ_b|H_BC|Ψ_a>`.
pub fn mbc_mixing_amplitude(params: &LadderParams) -> Result<MixingAmplitude> {
    mbc_mixing_amplitude_from(params, Chain::A)
}

/// How the boundary amplitude `M` becomes the admixture coefficient.
///
/// The unperturbed energies are approximated as `±V`, so the denominator is
/// `E_source - E_target = ±2V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingConvention {
    /// `M / (±2V)`: one target state.
    #[default]
    PerState,
    /// `N M / (±2V)`: the `N` degenerate target states summed with equal weight.
    Summed,
    /// `N M / (±V)`: the summed coefficient with a single-`V` denominator.
    SingleV,
}

impl fmt::Display for MixingConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixingConvention::PerState => "per-state",
            MixingConvention::Summed => "summed",
            MixingConvention::SingleV => "single-v",
        })
    }
}

impl FromStr for MixingConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-state" => Ok(MixingConvention::PerState),
            "summed" => Ok(MixingConvention::Summed),
            "single-v" => Ok(MixingConvention::SingleV),
            other => Err(Error::Config(format!("unknown mixing convention `{other}`"))),
        }
    }
}

/// Admixture coefficient of the opposite-chain ansatz in the corrected state
/// that starts on `chain`.
pub fn mixing_coefficient(params: &LadderParams, chain: Chain, convention: MixingConvention) -> Result<Complex64> {
    if params.v == 0.0 {
        return Err(Error::param("v", "first-order mixing needs v != 0 (energy denominator)"));
    }
    let m = mbc_mixing_amplitude_from(params, chain)?.closed_form;
    // E_a ≈ +V, E_b ≈ -V.
    let gap = match chain {
        Chain::A => 2.0 * params.v,
        Chain::B => -2.0 * params.v,
    };
    let n = params.n_cells as f64;
    Ok(match convention {
        MixingConvention::PerState => m / gap,
        MixingConvention::Summed => n * m / gap,
        MixingConvention::SingleV => 2.0 * n * m / gap,
    })
}

/// Ansatz on `chain` plus its first-order boundary admixture, renormalized.
/// Independent of `t0`.
pub fn mbc_first_order_state(
    params: &LadderParams,
    chain: Chain,
    convention: MixingConvention,
) -> Result<Array1<Complex64>> {
    let c = mixing_coefficient(params, chain, convention)?;
    let own = obc_skin_ansatz(params, chain)?;
    let other = obc_skin_ansatz(params, chain.other())?;
    let mut state = &own.components + &other.components.mapv(|z| z * c);
    let norm = state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    state.mapv_inplace(|z| z / norm);
    Ok(state)
}

/// First-order part of `<H_t0>` for the ansatz on `chain` admixed with
/// `coefficient` times the opposite ansatz: `|2 Re(c <Ψ_s|H_t0|Ψ_other>)|`.
pub fn first_order_t0_expectation(params: &LadderParams, chain: Chain, coefficient: Complex64) -> Result<f64> {
    let own = obc_skin_ansatz(params, chain)?;
    let other = obc_skin_ansatz(params, chain.other())?;
    let cross = bilinear(own.view(), &interchain_term(params)?, other.view())?;
    Ok((2.0 * (coefficient * cross).re).abs())
}

/// First-order `t0` response of the corrected Möbius state on `chain`.
pub fn t0_sensitivity_mbc(params: &LadderParams, chain: Chain, convention: MixingConvention) -> Result<f64> {
    let c = mixing_coefficient(params, chain, convention)?;
    first_order_t0_expectation(params, chain, c)
}
