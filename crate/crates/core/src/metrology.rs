//! Phase-estimation error analysis for the N-field fringe `S(θ) = cos(Nθ)/2^{N−1}`.
//!
//! Two variance expressions are carried side by side: the closed form quoted
//! for the scheme, `[cos(2Nθ) − sin²(Nθ)]/2^{2N−2}` ([`quoted_variance`]), and
//! the variance actually produced by the random-phase model
//! ([`derived_variance`]). The quoted form turns negative for some `θ` and does
//! not match the model; it is reproduced only at its own operating point
//! `θ* = π/(6N)`, where it yields `Δθ = 1/N`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::correlation::{n_field_analytic, n_field_scan_moments};
use crate::ensemble::{derive_seed, McConfig};
use crate::{Error, Result};

/// Central-difference step for numerical slopes, radians.
pub const SLOPE_STEP: f64 = 1e-4;

fn check_n(n: u32) -> Result<()> {
    if n == 0 {
        Err(Error::arg("number of fields/repetitions must be at least 1"))
    } else {
        Ok(())
    }
}

/// `1/√n`, the standard-quantum-limit baseline for `n` repetitions.
pub fn sql_phase_error(n_repetitions: u32) -> Result<f64> {
    check_n(n_repetitions)?;
    Ok(1.0 / f64::from(n_repetitions).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuotedVariance {
    pub value: f64,
    /// False when the expression is negative and so cannot be a variance.
    pub valid: bool,
}

/// `[cos(2nθ) − sin²(nθ)] / 2^{2n−2}`, evaluated verbatim.
pub fn quoted_variance(n: u32, theta: f64) -> QuotedVariance {
    let nt = f64::from(n) * theta;
    let value = ((2.0 * nt).cos() - nt.sin().powi(2)) / 4f64.powi(n as i32 - 1);
    QuotedVariance {
        value,
        valid: value >= 0.0,
    }
}

/// How the phase differences seen by the `N` analyzers are distributed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceModel {
    /// `λ_i` derived from independent field phases, so `Σλ_i ≡ 0`.
    Cyclic,
    /// All `λ_i` independent and uniform.
    Independent,
}

/// Single-trial variance of `∏ cos(θ + λ_i)`.
///
/// Cyclic: `2^{−N} − 2^{1−2N}` for every `θ` (zero for `N = 1`, where
/// `λ₁ ≡ 0`). Independent: the product has mean zero and variance `2^{−N}`.
pub fn derived_variance(n: u32, _theta: f64, model: VarianceModel) -> f64 {
    let n = n as i32;
    match model {
        VarianceModel::Cyclic => 2f64.powi(-n) - 2f64.powi(1 - 2 * n),
        VarianceModel::Independent => 2f64.powi(-n),
    }
}

/// `∂S/∂θ = −n·sin(nθ)/2^{n−1}`.
pub fn analytic_slope(n: u32, theta: f64) -> f64 {
    let nf = f64::from(n);
    -nf * (nf * theta).sin() / 2f64.powi(n as i32 - 1)
}

/// Central difference of the analytic mean with step [`SLOPE_STEP`].
pub fn numerical_slope(n: u32, theta: f64) -> f64 {
    let h = SLOPE_STEP;
    (n_field_analytic(theta + h, n, false) - n_field_analytic(theta - h, n, false)) / (2.0 * h)
}

/// The quoted error-propagation chain at its operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeisenbergPoint {
    pub n: u32,
    /// `π/(6n)`, where `sin(nθ) = 1/2`.
    pub theta_star: f64,
    pub variance: f64,
    pub slope: f64,
    /// `√variance / |slope|`.
    pub delta_theta: f64,
}

pub fn heisenberg_point(n: u32) -> Result<HeisenbergPoint> {
    check_n(n)?;
    let theta_star = PI / (6.0 * f64::from(n));
    let variance = quoted_variance(n, theta_star).value;
    let slope = analytic_slope(n, theta_star);
    Ok(HeisenbergPoint {
        n,
        theta_star,
        variance,
        slope,
        delta_theta: variance.sqrt() / slope.abs(),
    })
}

/// `Δθ` from the quoted variance at `θ* = π/(6n)`; equals `1/n`.
pub fn heisenberg_phase_error(n: u32) -> Result<f64> {
    Ok(heisenberg_point(n)?.delta_theta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetrologyResult {
    pub n_fields: u32,
    pub theta: f64,
    pub s_mean: f64,
    pub s_std_error: f64,
    /// Empirical single-trial variance of the N-field product.
    pub s_variance_mc: f64,
    pub s_variance_mc_std_error: f64,
    pub s_variance_quoted: f64,
    pub quoted_variance_valid: bool,
    /// [`derived_variance`] under the cyclic model.
    pub s_variance_derived: f64,
    /// Numerical `∂S/∂θ` of the analytic mean.
    pub slope: f64,
    pub delta_theta_sql: f64,
    /// `1/N` from [`heisenberg_phase_error`].
    pub delta_theta_heisenberg: f64,
    /// `√(quoted variance at θ)/|slope|`; NaN where the expression is negative.
    pub delta_theta_quoted: f64,
    /// `√(derived variance)/|slope|`.
    pub delta_theta_derived: f64,
    pub trials: u64,
}

/// Monte-Carlo N-field fringe statistics on a grid of `(n, θ)` cells.
///
/// Each `n` uses its own seed derived from `cfg.seed`; all `θ` for one `n`
/// share the same phase realizations.
pub fn phase_error_scan(n_range: &[u32], theta_grid: &[f64], cfg: &McConfig) -> Result<Vec<MetrologyResult>> {
    if n_range.is_empty() || theta_grid.is_empty() {
        return Err(Error::arg("metrology scan needs at least one n and one θ"));
    }
    if cfg.trials < 100 {
        return Err(Error::arg(format!("metrology scan needs at least 100 trials, got {}", cfg.trials)));
    }
    let mut rows = Vec::with_capacity(n_range.len() * theta_grid.len());
    for &n in n_range {
        check_n(n)?;
        let sub = cfg.with_seed(derive_seed(cfg.seed, u64::from(n)));
        let moments = n_field_scan_moments(n, theta_grid, &sub, false)?;
        let heisenberg = heisenberg_phase_error(n)?;
        let sql = sql_phase_error(n)?;
        for (&theta, m) in theta_grid.iter().zip(&moments) {
            let est = m.estimate()?;
            let quoted = quoted_variance(n, theta);
            let derived = derived_variance(n, theta, VarianceModel::Cyclic);
            let slope = numerical_slope(n, theta);
            let delta_theta_quoted = if quoted.valid {
                quoted.value.sqrt() / slope.abs()
            } else {
                f64::NAN
            };
            rows.push(MetrologyResult {
                n_fields: n,
                theta,
                s_mean: est.mean,
                s_std_error: est.std_error(),
                s_variance_mc: m.variance(),
                s_variance_mc_std_error: m.variance_std_error(),
                s_variance_quoted: quoted.value,
                quoted_variance_valid: quoted.valid,
                s_variance_derived: derived,
                slope,
                delta_theta_sql: sql,
                delta_theta_heisenberg: heisenberg,
                delta_theta_quoted,
                delta_theta_derived: derived.sqrt() / slope.abs(),
                trials: cfg.trials,
            });
        }
    }
    Ok(rows)
}

/// `points` equally spaced angles `2πk/points` covering one period.
pub fn uniform_theta_grid(points: usize) -> Vec<f64> {
    (0..points).map(|k| TAU * k as f64 / points as f64).collect()
}

/// Strongest Fourier component of samples taken on [`uniform_theta_grid`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeSpectrum {
    /// Harmonic index, cycles per `2π`.
    pub frequency: usize,
    /// Amplitude `a` of the matching `a·cos(fθ + ϕ)` term.
    pub amplitude: f64,
}

pub fn dominant_frequency(samples: &[f64]) -> Result<FringeSpectrum> {
    let m = samples.len();
    if m < 3 {
        return Err(Error::arg("need at least 3 samples for a spectrum"));
    }
    let mut best = FringeSpectrum {
        frequency: 0,
        amplitude: f64::NEG_INFINITY,
    };
    for f in 0..=m / 2 {
        let coeff: Complex64 = samples
            .iter()
            .enumerate()
            .map(|(k, &s)| s * Complex64::cis(-TAU * (f * k) as f64 / m as f64))
            .sum();
        let edge = f == 0 || 2 * f == m;
        let amplitude = coeff.norm() / m as f64 * if edge { 1.0 } else { 2.0 };
        if amplitude > best.amplitude {
            best = FringeSpectrum { frequency: f, amplitude };
        }
    }
    Ok(best)
}

/// Mean spacing between sign changes of a sampled curve (linear interpolation).
pub fn zero_spacing(thetas: &[f64], values: &[f64]) -> Option<f64> {
    let zeros: Vec<f64> = thetas
        .windows(2)
        .zip(values.windows(2))
        .filter(|(_, v)| v[0] == 0.0 || v[0].signum() != v[1].signum())
        .map(|(t, v)| {
            if v[0] == v[1] {
                t[0]
            } else {
                t[0] + (t[1] - t[0]) * v[0] / (v[0] - v[1])
            }
        })
        .collect();
    if zeros.len() < 2 {
        return None;
    }
    Some((zeros[zeros.len() - 1] - zeros[0]) / (zeros.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{fold_phase_trials, MomentAccumulator, PhaseDistribution};

    #[test]
    fn sql_baseline() {
        assert_eq!(sql_phase_error(1).unwrap(), 1.0);
        assert_eq!(sql_phase_error(4).unwrap(), 0.5);
        assert_eq!(sql_phase_error(100).unwrap(), 0.1);
        assert!(sql_phase_error(0).is_err());
    }

    #[test]
    fn quoted_variance_values() {
        assert_eq!(quoted_variance(1, 0.0), QuotedVariance { value: 1.0, valid: true });
        assert_eq!(quoted_variance(2, 0.0).value, 0.25);
        let neg = quoted_variance(2, PI / 4.0);
        assert!((neg.value + 0.5).abs() < 1e-15);
        assert!(!neg.valid);
    }

    #[test]
    fn derived_variance_values() {
        assert_eq!(derived_variance(2, 0.9, VarianceModel::Cyclic), 0.125);
        assert_eq!(derived_variance(1, 0.0, VarianceModel::Cyclic), 0.0);
        assert_eq!(derived_variance(3, 0.2, VarianceModel::Cyclic), 0.09375);
        assert_eq!(derived_variance(3, 0.2, VarianceModel::Independent), 0.125);
        let grid = uniform_theta_grid(50);
        let vals: Vec<f64> = grid.iter().map(|&t| derived_variance(5, t, VarianceModel::Cyclic)).collect();
        let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 1e-12);
    }

    // Brute-force quadrature of ((cos2θ + cos2λ)/2)² over uniform λ.
    #[test]
    fn two_field_variance_by_quadrature() {
        let theta: f64 = 0.37;
        let m = 20_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for k in 0..m {
            let lambda = TAU * (k as f64 + 0.5) / m as f64;
            let x = ((2.0 * theta).cos() + (2.0 * lambda).cos()) / 2.0;
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / m as f64;
        let var = s2 / m as f64 - mean * mean;
        assert!((mean - (2.0 * theta).cos() / 2.0).abs() < 1e-12);
        assert!((var - derived_variance(2, theta, VarianceModel::Cyclic)).abs() < 1e-12);
    }

    #[test]
    fn independent_model_matches_monte_carlo() {
        let cfg = McConfig::new(200_000, PhaseDistribution::ContinuousUniform, 8);
        for n in [2u32, 3] {
            let theta = 0.4;
            // treat n field phases as n independent λ's
            let acc = fold_phase_trials(
                n as usize,
                &cfg,
                MomentAccumulator::default,
                |acc, p| acc.push(p.global_phases.iter().map(|l| (theta + l).cos()).product()),
                |a, b| a.merge(&b),
            )
            .unwrap();
            let expected = derived_variance(n, theta, VarianceModel::Independent);
            assert!((acc.variance() - expected).abs() <= 3.0 * acc.variance_std_error(), "n={n}");
            assert!(acc.mean().abs() <= 4.0 * (acc.variance() / cfg.trials as f64).sqrt());
        }
    }

    #[test]
    fn heisenberg_reproduction() {
        assert!((heisenberg_phase_error(1).unwrap() - 1.0).abs() < 1e-12);
        assert!((heisenberg_phase_error(5).unwrap() - 0.2).abs() < 1e-12);
        for n in 1..=20 {
            let p = heisenberg_point(n).unwrap();
            let expected = (PI / 6.0).sin().powi(2) / 4f64.powi(n as i32 - 1);
            assert!((p.variance - expected).abs() < 1e-12 * expected.max(1e-300) + 1e-300);
            assert!((p.delta_theta * f64::from(n) - 1.0).abs() < 1e-12);
        }
        assert!(heisenberg_phase_error(0).is_err());
    }

    #[test]
    fn slope_matches_closed_form() {
        for n in 1..=8 {
            for theta in [0.0, 0.1, 0.77, 2.0, 5.5] {
                assert!((numerical_slope(n, theta) - analytic_slope(n, theta)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn spectrum_of_pure_cosine() {
        let grid = uniform_theta_grid(64);
        for n in 1..=8u32 {
            let samples: Vec<f64> = grid.iter().map(|&t| n_field_analytic(t, n, false)).collect();
            let spectrum = dominant_frequency(&samples).unwrap();
            assert_eq!(spectrum.frequency, n as usize);
            assert!((spectrum.amplitude - 2f64.powi(1 - n as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_spacing_is_half_period() {
        let grid = uniform_theta_grid(720);
        for n in 1..=6u32 {
            let vals: Vec<f64> = grid.iter().map(|&t| n_field_analytic(t, n, false)).collect();
            let spacing = zero_spacing(&grid, &vals).unwrap();
            assert!((spacing - PI / f64::from(n)).abs() < TAU / 720.0, "n={n}: {spacing}");
        }
    }

    #[test]
    fn scan_rejects_bad_input() {
        let cfg = McConfig::new(1000, PhaseDistribution::ContinuousUniform, 1);
        assert!(phase_error_scan(&[], &[0.1], &cfg).is_err());
        assert!(phase_error_scan(&[2], &[], &cfg).is_err());
        assert!(phase_error_scan(&[2], &[0.1], &McConfig { trials: 50, ..cfg }).is_err());
    }

    #[test]
    fn scan_two_fields() {
        let cfg = McConfig::new(100_000, PhaseDistribution::ContinuousUniform, 21);
        let rows = phase_error_scan(&[2], &[0.3], &cfg).unwrap();
        let r = &rows[0];
        assert!((r.s_mean - 0.6f64.cos() / 2.0).abs() <= 3.0 * r.s_std_error);
        assert!((r.s_variance_mc - r.s_variance_derived).abs() <= 3.0 * r.s_variance_mc_std_error);
        assert!((r.delta_theta_heisenberg - 0.5).abs() < 1e-12);
        assert_eq!(r.trials, 100_000);
    }
}
