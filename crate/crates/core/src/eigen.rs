//! Dense non-symmetric eigendecomposition.
//!
//! Backed by LAPACK `zgeev` through LAPACKE (system OpenBLAS, pinned to one
//! thread so repeated runs are bitwise identical). Left eigenvectors are
//! obtained by solving the adjoint problem `H† l = E* l` separately and pairing
//! its spectrum with the conjugated right spectrum.
//!
//! Hatano–Nelson blocks are strongly non-normal: eigenvalue condition numbers
//! grow like `r^N`, so reality checks are only meaningful at moderate `N`.

use std::cmp::Ordering;
use std::sync::Once;

use ndarray::{Array2, ArrayView1, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lattice::Hamiltonian;
use crate::{Error, Result};

const LAPACK_ROW_MAJOR: i32 = 101;

#[link(name = "lapacke")]
extern "C" {
    fn LAPACKE_zgeev(
        matrix_layout: i32,
        jobvl: u8,
        jobvr: u8,
        n: i32,
        a: *mut Complex64,
        lda: i32,
        w: *mut Complex64,
        vl: *mut Complex64,
        ldvl: i32,
        vr: *mut Complex64,
        ldvr: i32,
    ) -> i32;
}

#[link(name = "openblas")]
extern "C" {
    fn openblas_set_num_threads(num_threads: i32);
}

static SINGLE_THREADED: Once = Once::new();

fn pin_blas_threads() {
    // Safety: plain setter on the BLAS runtime, called once before any solve.
    SINGLE_THREADED.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// Tolerances used by the decompositions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenTolerances {
    /// Bound on `‖H r - E r‖ / ‖H‖_F` for every returned pair.
    pub residual: f64,
    /// Two candidate left eigenvalues closer than this are ambiguous.
    pub pairing: f64,
    /// `|<l, r>|` below this (unit vectors) marks a near-defective pair.
    pub ill_conditioned: f64,
}

impl Default for EigenTolerances {
    fn default() -> Self {
        EigenTolerances {
            residual: 1e-9,
            pairing: 1e-6,
            ill_conditioned: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// Column `j` is the unit-norm right eigenvector of `eigenvalues[j]`,
    /// phase-fixed so its largest-modulus component is real and positive.
    pub right: Array2<Complex64>,
    /// Column `j` is the left eigenvector paired with column `j` of `right`,
    /// scaled so `<l_j, r_j> = 1`.
    pub left: Option<Array2<Complex64>>,
    /// Largest `‖H r_j - E_j r_j‖ / ‖H‖_F`.
    pub max_residual: f64,
    /// `max_ij |<l_i, r_j> - δ_ij|` after normalization.
    pub biorthogonality_residual: Option<f64>,
    /// Smallest `|<l_j, r_j>|` of the unit-norm pairs before rescaling.
    pub min_pair_overlap: Option<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn right_vector(&self, j: usize) -> ArrayView1<'_, Complex64> {
        self.right.column(j)
    }

    pub fn left_vector(&self, j: usize) -> Option<ArrayView1<'_, Complex64>> {
        self.left.as_ref().map(|l| l.column(j))
    }
}

/// Canonical eigenvalue order: real part ascending, then imaginary part.
pub fn canonical_order(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

struct RawEig {
    values: Vec<Complex64>,
    /// Row-major `n × n`; column `j` is the eigenvector of `values[j]`.
    vectors: Option<Vec<Complex64>>,
}

fn zgeev(matrix: &Array2<Complex64>, vectors: bool) -> Result<RawEig> {
    pin_blas_threads();
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: matrix.ncols(),
        });
    }
    if let Some(bad) = matrix.iter().find(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Solver {
            dim: n,
            info: -5,
            context: format!(": non-finite entry {bad}"),
        });
    }
    if n == 0 {
        return Ok(RawEig {
            values: vec![],
            vectors: vectors.then(Vec::new),
        });
    }
    let mut a: Vec<Complex64> = matrix.as_standard_layout().iter().copied().collect();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    // LAPACKE's row-major path checks the leading dimensions even for
    // buffers it never touches, so they are sized as if referenced.
    let mut vl = vec![Complex64::new(0.0, 0.0); n];
    let mut vr = vec![Complex64::new(0.0, 0.0); if vectors { n * n } else { n }];
    let ni = n as i32;
    // Safety: a, w and vr have the sizes LAPACKE expects for row-major input
    // with leading dimension n; vl is never referenced with jobvl = 'N'.
    let info = unsafe {
        LAPACKE_zgeev(
            LAPACK_ROW_MAJOR,
            b'N',
            if vectors { b'V' } else { b'N' },
            ni,
            a.as_mut_ptr(),
            ni,
            w.as_mut_ptr(),
            vl.as_mut_ptr(),
            ni,
            vr.as_mut_ptr(),
            ni,
        )
    };
    if info != 0 {
        return Err(Error::Solver {
            dim: n,
            info,
            context: String::new(),
        });
    }
    Ok(RawEig {
        values: w,
        vectors: vectors.then_some(vr),
    })
}

fn with_context(err: Error, h: &Hamiltonian) -> Error {
    match err {
        Error::Solver { dim, info, context } => Error::Solver {
            dim,
            info,
            context: format!("{context} for {:?} under {}", h.params(), h.boundary()),
        },
        other => other,
    }
}

/// Eigenvalues only, in canonical order.
pub fn eigenvalues(h: &Hamiltonian) -> Result<Vec<Complex64>> {
    eigenvalues_of(h.matrix()).map_err(|e| with_context(e, h))
}

pub fn eigenvalues_of(matrix: &Array2<Complex64>) -> Result<Vec<Complex64>> {
    let mut values = zgeev(matrix, false)?.values;
    values.sort_by(canonical_order);
    Ok(values)
}

/// Sorted eigenpairs of an arbitrary square matrix with unit-norm,
/// phase-fixed vectors.
fn sorted_pairs(matrix: &Array2<Complex64>) -> Result<(Vec<Complex64>, Array2<Complex64>)> {
    let n = matrix.nrows();
    let raw = zgeev(matrix, true)?;
    let vr = raw.vectors.unwrap_or_default();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| canonical_order(&raw.values[i], &raw.values[j]));
    let values = order.iter().map(|&j| raw.values[j]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<Complex64> = (0..n).map(|i| vr[i * n + src]).collect();
        normalize_and_fix_phase(&mut col);
        vectors.column_mut(dst).assign(&ArrayView1::from(&col));
    }
    Ok((values, vectors))
}

/// Scale `v` to unit Euclidean norm with its largest-modulus component
/// (first one on ties) real and positive.
fn normalize_and_fix_phase(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    let phase = v[best].conj() / v[best].norm();
    let scale = phase / norm;
    for z in v.iter_mut() {
        *z *= scale;
    }
    v[best] = Complex64::new(v[best].norm(), 0.0);
}

fn max_residual(matrix: &Array2<Complex64>, values: &[Complex64], vectors: &Array2<Complex64>) -> f64 {
    let hn = matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let hv = matrix.dot(vectors);
    values
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            hv.column(j)
                .iter()
                .zip(vectors.column(j).iter())
                .map(|(a, b)| (a - e * b).norm_sqr())
                .sum::<f64>()
                .sqrt()
                / hn
        })
        .fold(0.0, f64::max)
}

/// Right eigenpairs of `h`.
pub fn eig_right(h: &Hamiltonian) -> Result<EigenSystem> {
    eig_right_with(h, &EigenTolerances::default())
}

pub fn eig_right_with(h: &Hamiltonian, tol: &EigenTolerances) -> Result<EigenSystem> {
    eig_right_matrix(h.matrix(), tol).map_err(|e| with_context(e, h))
}

/// [`eig_right_with`] on a bare matrix.
pub fn eig_right_matrix(matrix: &Array2<Complex64>, tol: &EigenTolerances) -> Result<EigenSystem> {
    let (eigenvalues, right) = sorted_pairs(matrix)?;
    let residual = max_residual(matrix, &eigenvalues, &right);
    if residual > tol.residual {
        return Err(Error::Solver {
            dim: matrix.nrows(),
            info: 0,
            context: format!(": relative residual {residual:e} exceeds {:e}", tol.residual),
        });
    }
    Ok(EigenSystem {
        eigenvalues,
        right,
        left: None,
        max_residual: residual,
        biorthogonality_residual: None,
        min_pair_overlap: None,
    })
}

/// Right and left eigenpairs of `h`, biorthogonally normalized.
pub fn eig_biorthogonal(h: &Hamiltonian) -> Result<EigenSystem> {
    eig_biorthogonal_with(h, &EigenTolerances::default())
}

pub fn eig_biorthogonal_with(h: &Hamiltonian, tol: &EigenTolerances) -> Result<EigenSystem> {
    eig_biorthogonal_matrix(h.matrix(), tol).map_err(|e| with_context(e, h))
}

/// [`eig_biorthogonal_with`] on a bare matrix.
pub fn eig_biorthogonal_matrix(matrix: &Array2<Complex64>, tol: &EigenTolerances) -> Result<EigenSystem> {
    let mut sys = eig_right_matrix(matrix, tol)?;
    let adjoint = matrix.t().mapv(|z| z.conj());
    let (adj_values, adj_vectors) = sorted_pairs(&adjoint)?;
    let (left, min_overlap) = pair_left_vectors(&sys.eigenvalues, &sys.right, &adj_values, &adj_vectors, tol)?;
    let overlaps = left.t().mapv(|z| z.conj()).dot(&sys.right);
    let n = sys.len();
    let mut resid: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            resid = resid.max((overlaps[[i, j]] - target).norm());
        }
    }
    sys.left = Some(left);
    sys.biorthogonality_residual = Some(resid);
    sys.min_pair_overlap = Some(min_overlap);
    Ok(sys)
}

/// Greedy nearest-distance matching of the right spectrum `E_j` against the
/// conjugated adjoint spectrum `μ_i*`, then rescaling so `<l_j, r_j> = 1`.
fn pair_left_vectors(
    values: &[Complex64],
    right: &Array2<Complex64>,
    adj_values: &[Complex64],
    adj_vectors: &Array2<Complex64>,
    tol: &EigenTolerances,
) -> Result<(Array2<Complex64>, f64)> {
    let n = values.len();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (j, e) in values.iter().enumerate() {
        for (i, mu) in adj_values.iter().enumerate() {
            candidates.push(((e - mu.conj()).norm(), j, i));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut right_taken = vec![false; n];
    let mut left_taken = vec![false; n];
    let mut partner = vec![usize::MAX; n];
    for &(_, j, i) in &candidates {
        if right_taken[j] || left_taken[i] {
            continue;
        }
        right_taken[j] = true;
        left_taken[i] = true;
        partner[j] = i;
    }

    let mut left = Array2::zeros((n, n));
    let mut min_overlap = f64::INFINITY;
    for j in 0..n {
        let i = partner[j];
        let r = right.column(j);
        let l = adj_vectors.column(i);
        let overlap: Complex64 = l.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum();
        if overlap.norm() < tol.ill_conditioned {
            return Err(Error::IllConditioned {
                energy: values[j],
                overlap: overlap.norm(),
            });
        }
        let target = adj_values[i].conj();
        if let Some(k) = (0..n).find(|&k| k != i && (adj_values[k].conj() - target).norm() < tol.pairing) {
            return Err(Error::PairingAmbiguity {
                target: values[j],
                first: target,
                second: adj_values[k].conj(),
                tol: tol.pairing,
            });
        }
        min_overlap = min_overlap.min(overlap.norm());
        let scale = overlap.conj().inv();
        left.column_mut(j).assign(&l.mapv(|z| z * scale));
    }
    Ok((left, if n == 0 { 0.0 } else { min_overlap }))
}

/// Squared moduli `|ψ_i|²` of column `j`.
pub fn densities(vectors: &Array2<Complex64>, j: usize) -> Vec<f64> {
    vectors.index_axis(Axis(1), j).iter().map(|z| z.norm_sqr()).collect()
}
