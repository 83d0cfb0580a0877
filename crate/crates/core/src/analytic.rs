//! Closed-form reference quantities.
//!
//! The periodic dispersion returned by [`bloch_energies`] uses the principal
//! square-root branch. Which root is labelled `+` is therefore not continuous
//! in `k`; compare against numerics as unordered pairs.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::lattice::{Chain, LadderParams};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochPoint {
    pub k: f64,
    pub e_plus: Complex64,
    pub e_minus: Complex64,
}

/// Diagonal element `f_s(k)` of the Bloch matrix.
pub fn bloch_diagonal(params: &LadderParams, chain: Chain, k: f64) -> Complex64 {
    let d = params.delta(chain);
    (params.t1 - d) * (I * k).exp() + (params.t1 + d) * (-I * k).exp() + params.onsite(chain)
}

pub fn bloch_matrix(params: &LadderParams, k: f64) -> [[Complex64; 2]; 2] {
    let t0 = Complex64::new(params.t0, 0.0);
    [
        [bloch_diagonal(params, Chain::A, k), t0],
        [t0, bloch_diagonal(params, Chain::B, k)],
    ]
}

/// Both periodic-boundary energies at momentum `k` from the closed form
/// `2 t1 cos k - i (δa + δb) sin k ± sqrt(-(δa-δb)²/2 + t0² + V² + (δa-δb) h(k)/2)`
/// with `h(k) = (δa - δb) cos 2k - 4 i V sin k`. The sign of the `V sin k`
/// term is the one that makes these the eigenvalues of [`bloch_matrix`].
pub fn bloch_energies(params: &LadderParams, k: f64) -> (Complex64, Complex64) {
    let LadderParams {
        t1,
        delta_a: da,
        delta_b: db,
        t0,
        v,
        ..
    } = *params;
    let dd = da - db;
    let h = dd * (2.0 * k).cos() - 4.0 * I * v * k.sin();
    let radicand = -0.5 * dd * dd + t0 * t0 + v * v + 0.5 * dd * h;
    let root = radicand.sqrt();
    let centre = 2.0 * t1 * k.cos() - I * (da + db) * k.sin();
    (centre + root, centre - root)
}

pub fn bloch_point(params: &LadderParams, k: f64) -> BlochPoint {
    let (e_plus, e_minus) = bloch_energies(params, k);
    BlochPoint { k, e_plus, e_minus }
}

/// Closed-form energies at the `N` allowed momenta `k = 2πm/N`: the spectrum
/// of the `N`-cell periodic ladder.
pub fn periodic_spectrum(params: &LadderParams) -> Vec<Complex64> {
    let n = params.n_cells;
    (0..n)
        .flat_map(|m| {
            let (p, q) = bloch_energies(params, 2.0 * PI * m as f64 / n as f64);
            [p, q]
        })
        .collect()
}

/// `samples` points of the periodic dispersion on a uniform `k` mesh over `[0, 2π)`.
pub fn bloch_curve(params: &LadderParams, samples: usize) -> Vec<BlochPoint> {
    (0..samples)
        .map(|i| bloch_point(params, 2.0 * PI * i as f64 / samples as f64))
        .collect()
}

/// The two periodic bands on `samples` uniform momenta, with the roots at
/// each `k` assigned to whichever band they continue most closely.
pub fn bloch_bands(params: &LadderParams, samples: usize) -> [Vec<Complex64>; 2] {
    let mut bands: [Vec<Complex64>; 2] = [Vec::with_capacity(samples), Vec::with_capacity(samples)];
    for point in bloch_curve(params, samples) {
        let (p, m) = (point.e_plus, point.e_minus);
        let swap = match (bands[0].last(), bands[1].last()) {
            (Some(&u), Some(&l)) => (u - m).norm() + (l - p).norm() < (u - p).norm() + (l - m).norm(),
            _ => false,
        };
        let (first, second) = if swap { (m, p) } else { (p, m) };
        bands[0].push(first);
        bands[1].push(second);
    }
    bands
}

/// Non-Bloch symbol functions `(g_a(β), g_b(β))`.
pub fn gbz_symbols(params: &LadderParams, beta: Complex64) -> Result<(Complex64, Complex64)> {
    if beta == Complex64::new(0.0, 0.0) {
        return Err(Error::param("beta", "symbol functions are singular at beta = 0"));
    }
    let g = |chain: Chain| {
        let d = params.delta(chain);
        (params.t1 - d) * beta + (params.t1 + d) / beta + params.onsite(chain)
    };
    Ok((g(Chain::A), g(Chain::B)))
}

/// Detuning above which the two bands are gapped in real energy:
/// `V* = sqrt(2 t1² - t0²)`.
pub fn gap_threshold(params: &LadderParams) -> Result<f64> {
    let scale = 2.0 * params.t1 * params.t1;
    let mut radicand = scale - params.t0 * params.t0;
    // Rounding in t0 = sqrt(2)·t1 must land on zero, not on an error.
    if radicand < 0.0 && radicand > -4.0 * f64::EPSILON * scale {
        radicand = 0.0;
    }
    if radicand < 0.0 {
        return Err(Error::param(
            "t0",
            format!("2 t1² - t0² = {radicand} is negative; no real gap threshold"),
        ));
    }
    Ok(radicand.sqrt())
}

/// Skin-decay ratio `r_s = sqrt((t1 + δ_s)/(t1 - δ_s))`.
pub fn skin_ratio(params: &LadderParams, chain: Chain) -> Result<f64> {
    log_skin_ratio(params, chain).map(f64::exp)
}

/// `ln r_s`, used wherever `r_s^N` would overflow.
pub fn log_skin_ratio(params: &LadderParams, chain: Chain) -> Result<f64> {
    let d = params.delta(chain);
    if !(d.abs() < params.t1) {
        return Err(Error::param(
            if chain == Chain::A { "delta_a" } else { "delta_b" },
            format!("|delta| = {} must be below t1 = {}", d.abs(), params.t1),
        ));
    }
    Ok(0.5 * ((params.t1 + d).ln() - (params.t1 - d).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opposite() -> LadderParams {
        LadderParams::new(80, 0.75, 0.25, -0.25, 0.01, 0.5)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn bloch_matrix_at_high_symmetry_points() {
        let m = bloch_matrix(&opposite(), 0.0);
        assert!(close(m[0][0], Complex64::new(2.0, 0.0), 1e-15));
        assert!(close(m[1][1], Complex64::new(1.0, 0.0), 1e-15));
        assert_eq!(m[0][1], Complex64::new(0.01, 0.0));
        let m = bloch_matrix(&opposite(), PI);
        assert!(close(m[0][0], Complex64::new(-1.0, 0.0), 1e-15));
        assert!(close(m[1][1], Complex64::new(-2.0, 0.0), 1e-15));
        let m = bloch_matrix(&opposite().with_t0(0.0), 1.234);
        assert_eq!(m[0][1], Complex64::new(0.0, 0.0));
        assert_eq!(m[1][0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn energies_at_zero_and_pi() {
        let (p, m) = bloch_energies(&opposite(), 0.0);
        assert!((p.re - 2.000_100).abs() < 5e-7 && p.im.abs() < 1e-15);
        assert!((m.re - 0.999_900).abs() < 5e-7 && m.im.abs() < 1e-15);
        let s = 0.2501_f64.sqrt();
        assert!(close(p, Complex64::new(1.5 + s, 0.0), 1e-14));
        let (p, m) = bloch_energies(&opposite(), PI);
        assert!(close(p, Complex64::new(-1.5 + s, 0.0), 1e-14));
        assert!(close(m, Complex64::new(-1.5 - s, 0.0), 1e-14));
    }

    /// Trace and determinant of the 2×2 Bloch matrix fix both roots.
    #[test]
    fn energies_diagonalize_the_bloch_matrix() {
        let params = [opposite(), LadderParams::new(8, 0.75, 0.15, -0.15, 0.01, 1.6), LadderParams::new(8, 1.1, 0.3, 0.05, 0.2, 0.7)];
        for p in params {
            for i in 0..64 {
                let k = 2.0 * PI * i as f64 / 64.0;
                let m = bloch_matrix(&p, k);
                let (e1, e2) = bloch_energies(&p, k);
                let tr = m[0][0] + m[1][1];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                assert!(close(e1 + e2, tr, 1e-12), "trace at k={k}");
                assert!(close(e1 * e2, det, 1e-12), "determinant at k={k}");
            }
        }
    }

    #[test]
    fn degenerate_identical_chains() {
        let p = LadderParams::new(10, 0.75, 0.2, 0.2, 0.0, 0.0);
        for k in [0.1, 1.0, 2.5, 4.0] {
            let (e1, e2) = bloch_energies(&p, k);
            let expect = Complex64::new(2.0 * 0.75 * k.cos(), -0.4 * k.sin());
            assert!(close(e1, expect, 1e-14) && close(e2, expect, 1e-14));
        }
    }

    #[test]
    fn symbols() {
        let p = opposite();
        for k in [0.0, 0.3, 2.0, 5.9] {
            let (ga, gb) = gbz_symbols(&p, (I * k).exp()).unwrap();
            assert!(close(ga, bloch_diagonal(&p, Chain::A, k), 1e-14));
            assert!(close(gb, bloch_diagonal(&p, Chain::B, k), 1e-14));
        }
        let (ga, _) = gbz_symbols(&p, Complex64::new(2f64.sqrt(), 0.0)).unwrap();
        assert!((ga.re - 1.914_214).abs() < 5e-7);
        let (ga, gb) = gbz_symbols(&p, Complex64::new(1.0, 0.0)).unwrap();
        assert!(close(ga, Complex64::new(2.0, 0.0), 1e-15));
        assert!(close(gb, Complex64::new(1.0, 0.0), 1e-15));
        assert!(gbz_symbols(&p, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn gap_threshold_values() {
        assert!((gap_threshold(&LadderParams::new(4, 0.75, 0.0, 0.0, 0.01, 0.0)).unwrap() - 1.060_613).abs() < 5e-7);
        assert!((gap_threshold(&LadderParams::new(4, 0.75, 0.0, 0.0, 0.0, 0.0)).unwrap() - 1.060_660).abs() < 5e-7);
        let p = LadderParams::new(4, 0.75, 0.0, 0.0, 2f64.sqrt() * 0.75, 0.0);
        assert!(gap_threshold(&p).unwrap() < 1e-7);
        assert!(gap_threshold(&LadderParams::new(4, 0.75, 0.0, 0.0, 1.2, 0.0)).is_err());
    }

    #[test]
    fn skin_ratios() {
        let p = opposite();
        assert!((skin_ratio(&p, Chain::A).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((skin_ratio(&p, Chain::B).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let recip = LadderParams::new(4, 0.75, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(skin_ratio(&recip, Chain::A).unwrap(), 1.0);
        let bad = LadderParams::new(4, 0.75, 0.75, 0.0, 0.0, 0.0);
        assert!(skin_ratio(&bad, Chain::A).is_err());
        assert!(skin_ratio(&bad.with_delta_b(-0.9), Chain::B).is_err());
    }

    #[test]
    fn periodic_spectrum_has_2n_points() {
        assert_eq!(periodic_spectrum(&opposite()).len(), 160);
        assert_eq!(bloch_curve(&opposite(), 400).len(), 400);
    }

    #[test]
    fn traced_bands_are_continuous() {
        let [upper, lower] = bloch_bands(&opposite(), 400);
        assert_eq!(upper.len(), 400);
        let step = |band: &[Complex64]| band.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
        assert!(step(&upper) < 0.05 && step(&lower) < 0.05);
    }
}
