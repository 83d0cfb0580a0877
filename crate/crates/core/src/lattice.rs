//! Ladder parameters and dense Hamiltonian construction.
//!
//! Basis ordering is chain-major with chain `a` first: site `(a, x)` maps to
//! index `x - 1` and site `(b, x)` to `N + x - 1`, for `x ∈ [1, N]`. Entries
//! follow the second-quantized convention `H[row, col]` = amplitude of
//! `c†_row c_col`, so `H[(s, x+1), (s, x)] = t1 + delta_s` is the rightward hop.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One of the two legs of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chain {
    A,
    B,
}

impl Chain {
    pub const BOTH: [Chain; 2] = [Chain::A, Chain::B];

    pub fn other(self) -> Chain {
        match self {
            Chain::A => Chain::B,
            Chain::B => Chain::A,
        }
    }

    pub fn label(self) -> char {
        match self {
            Chain::A => 'a',
            Chain::B => 'b',
        }
    }

    /// Index range of this chain in the `2N` basis.
    pub fn range(self, n_cells: usize) -> std::ops::Range<usize> {
        match self {
            Chain::A => 0..n_cells,
            Chain::B => n_cells..2 * n_cells,
        }
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for Chain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Chain::A),
            "b" => Ok(Chain::B),
            other => Err(Error::param("chain", format!("expected `a` or `b`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryCondition {
    #[serde(rename = "obc")]
    Open,
    #[serde(rename = "pbc")]
    Periodic,
    #[serde(rename = "mbc")]
    Moebius,
}

impl BoundaryCondition {
    pub const ALL: [BoundaryCondition; 3] = [
        BoundaryCondition::Open,
        BoundaryCondition::Periodic,
        BoundaryCondition::Moebius,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            BoundaryCondition::Open => "obc",
            BoundaryCondition::Periodic => "pbc",
            BoundaryCondition::Moebius => "mbc",
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obc" | "open" => Ok(BoundaryCondition::Open),
            "pbc" | "periodic" => Ok(BoundaryCondition::Periodic),
            "mbc" | "moebius" | "mobius" => Ok(BoundaryCondition::Moebius),
            other => Err(Error::param(
                "boundary",
                format!("expected one of obc, pbc, mbc; got `{other}`"),
            )),
        }
    }
}

/// Full parameter tuple of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderParams {
    /// Number of unit cells `N`.
    pub n_cells: usize,
    /// Reciprocal part of the intrachain hopping.
    pub t1: f64,
    /// Non-reciprocity of chain a.
    pub delta_a: f64,
    /// Non-reciprocity of chain b.
    pub delta_b: f64,
    /// Interchain coupling.
    pub t0: f64,
    /// On-site detuning: `+v` on chain a, `-v` on chain b.
    pub v: f64,
}

impl LadderParams {
    pub fn new(n_cells: usize, t1: f64, delta_a: f64, delta_b: f64, t0: f64, v: f64) -> Self {
        LadderParams {
            n_cells,
            t1,
            delta_a,
            delta_b,
            t0,
            v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 2 {
            return Err(Error::param(
                "n_cells",
                format!("need at least 2 unit cells, got {}", self.n_cells),
            ));
        }
        for (field, value) in [
            ("t1", self.t1),
            ("delta_a", self.delta_a),
            ("delta_b", self.delta_b),
            ("t0", self.t0),
            ("v", self.v),
        ] {
            if !value.is_finite() {
                return Err(Error::param(field, format!("must be finite, got {value}")));
            }
        }
        if self.t0 < 0.0 {
            return Err(Error::param("t0", format!("must be non-negative, got {}", self.t0)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.n_cells
    }

    pub fn delta(&self, chain: Chain) -> f64 {
        match chain {
            Chain::A => self.delta_a,
            Chain::B => self.delta_b,
        }
    }

    /// On-site energy of `chain`.
    pub fn onsite(&self, chain: Chain) -> f64 {
        match chain {
            Chain::A => self.v,
            Chain::B => -self.v,
        }
    }

    /// Parameters of the ladder with the two chains relabelled:
    /// `delta_a ↔ delta_b` and `v → -v`.
    pub fn swapped(&self) -> Self {
        LadderParams {
            delta_a: self.delta_b,
            delta_b: self.delta_a,
            v: -self.v,
            ..*self
        }
    }

    pub fn with_n(self, n_cells: usize) -> Self {
        LadderParams { n_cells, ..self }
    }

    pub fn with_t0(self, t0: f64) -> Self {
        LadderParams { t0, ..self }
    }

    pub fn with_v(self, v: f64) -> Self {
        LadderParams { v, ..self }
    }

    pub fn with_delta_b(self, delta_b: f64) -> Self {
        LadderParams { delta_b, ..self }
    }
}

/// Dense `2N × 2N` Hamiltonian together with the inputs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    params: LadderParams,
    bc: BoundaryCondition,
    matrix: Array2<Complex64>,
}

impl Hamiltonian {
    pub fn params(&self) -> &LadderParams {
        &self.params
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cells(&self) -> usize {
        self.params.n_cells
    }

    pub fn get(&self, (c1, x1): (Chain, usize), (c2, x2): (Chain, usize)) -> Complex64 {
        let n = self.params.n_cells;
        self.matrix[[site_index(n, c1, x1), site_index(n, c2, x2)]]
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diag().iter().sum()
    }

    pub fn nonzeros(&self) -> usize {
        self.matrix.iter().filter(|z| **z != Complex64::new(0.0, 0.0)).count()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self) -> bool {
        let m = &self.matrix;
        let d = m.nrows();
        (0..d).all(|i| (0..d).all(|j| m[[i, j]] == m[[j, i]].conj()))
    }

    pub fn adjoint(&self) -> Array2<Complex64> {
        self.matrix.t().mapv(|z| z.conj())
    }
}

/// Index of site `(chain, x)` with `x ∈ [1, N]`.
pub fn site_index(n_cells: usize, chain: Chain, x: usize) -> usize {
    debug_assert!((1..=n_cells).contains(&x), "site {x} out of range 1..={n_cells}");
    match chain {
        Chain::A => x - 1,
        Chain::B => n_cells + x - 1,
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Open-chain part: intrachain hopping, interchain coupling and detuning.
fn bulk_matrix(p: &LadderParams) -> Array2<Complex64> {
    let n = p.n_cells;
    let mut h = Array2::zeros((2 * n, 2 * n));
    for chain in Chain::BOTH {
        let d = p.delta(chain);
        for x in 1..n {
            h[[site_index(n, chain, x + 1), site_index(n, chain, x)]] = c(p.t1 + d);
            h[[site_index(n, chain, x), site_index(n, chain, x + 1)]] = c(p.t1 - d);
        }
        for x in 1..=n {
            let i = site_index(n, chain, x);
            h[[i, i]] = c(p.onsite(chain));
        }
    }
    for x in 1..=n {
        let (ia, ib) = (site_index(n, Chain::A, x), site_index(n, Chain::B, x));
        h[[ia, ib]] = c(p.t0);
        h[[ib, ia]] = c(p.t0);
    }
    h
}

/// The four Möbius boundary terms on their own (`H_BC`).
pub fn moebius_boundary_term(p: &LadderParams) -> Result<Array2<Complex64>> {
    p.validate()?;
    let n = p.n_cells;
    let mut h = Array2::zeros((2 * n, 2 * n));
    add_moebius_terms(&mut h, p);
    Ok(h)
}

fn add_moebius_terms(h: &mut Array2<Complex64>, p: &LadderParams) {
    let n = p.n_cells;
    let idx = |chain, x| site_index(n, chain, x);
    h[[idx(Chain::B, 1), idx(Chain::A, n)]] += c(p.t1 - p.delta_a);
    h[[idx(Chain::A, 1), idx(Chain::B, n)]] += c(p.t1 - p.delta_b);
    h[[idx(Chain::A, n), idx(Chain::B, 1)]] += c(p.t1 + p.delta_a);
    h[[idx(Chain::B, n), idx(Chain::A, 1)]] += c(p.t1 + p.delta_b);
}

/// Interchain coupling operator `H_t0 = t0 Σ_x (a†_x b_x + b†_x a_x)` on its own.
pub fn interchain_term(p: &LadderParams) -> Result<Array2<Complex64>> {
    p.validate()?;
    let n = p.n_cells;
    let mut h = Array2::zeros((2 * n, 2 * n));
    for x in 1..=n {
        let (ia, ib) = (site_index(n, Chain::A, x), site_index(n, Chain::B, x));
        h[[ia, ib]] = c(p.t0);
        h[[ib, ia]] = c(p.t0);
    }
    Ok(h)
}

pub fn build_hamiltonian(params: &LadderParams, bc: BoundaryCondition) -> Result<Hamiltonian> {
    params.validate()?;
    let n = params.n_cells;
    let mut matrix = bulk_matrix(params);
    match bc {
        BoundaryCondition::Open => {}
        BoundaryCondition::Periodic => {
            for chain in Chain::BOTH {
                let d = params.delta(chain);
                let (first, last) = (site_index(n, chain, 1), site_index(n, chain, n));
                // The closing bond N -> 1 continues the bulk direction, so the
                // ring is translation invariant. N = 2 stacks it on the bulk bond.
                matrix[[first, last]] += c(params.t1 + d);
                matrix[[last, first]] += c(params.t1 - d);
            }
        }
        BoundaryCondition::Moebius => add_moebius_terms(&mut matrix, params),
    }
    Ok(Hamiltonian {
        params: *params,
        bc,
        matrix,
    })
}

/// True when both chains are reciprocal, in which case every boundary
/// condition yields a Hermitian matrix.
pub fn hermitian_limit_check(params: &LadderParams) -> bool {
    params.delta_a == 0.0 && params.delta_b == 0.0
}

/// Permutation exchanging the two chain blocks: `(a, x) ↔ (b, x)`.
pub fn chain_swap_permutation(n_cells: usize) -> Vec<usize> {
    (0..2 * n_cells).map(|i| (i + n_cells) % (2 * n_cells)).collect()
}
