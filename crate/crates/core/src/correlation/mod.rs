//! Correlation functions of analyzer intensity differences.
//!
//! Every Monte-Carlo estimator runs the full optical picture per trial: sample
//! the fields' global phases, build equal TE₀/TE₁ superpositions, apply the
//! coupler network, and read the analyzers.

mod chsh;
mod density;

use crate::ensemble::{
    fold_phase_trials, CorrelationEstimate, CovarianceAccumulator, McConfig, MomentAccumulator, TrialPhases,
};
use crate::optics::{
    analyzer_intensity_difference, apply_common_phase, chain_exchange, coupler_exchange_pair, AnalyzerSetting,
    ModeState,
};
use crate::{Error, Result};

pub use chsh::{
    chsh_sequence_average, chsh_value, optimize_chsh, search_lattice, ChshOptimum, ChshSettings, ChshVariant,
    LatticeOptimum, SequenceAverage, DEFAULT_GRID_STEP,
};
pub use density::{
    density_from_vector, ensemble_reduce_density, ensemble_reduce_product, inseparability_gap, partial_trace,
    product_state, DensityMatrix4, Matrix2, ReducedDensity, StateVector4, Subsystem,
};

/// How a correlation is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evaluation {
    /// Closed form; the estimate carries zero variance.
    Analytic,
    MonteCarlo(McConfig),
}

fn input_fields(phases: &TrialPhases) -> Vec<ModeState> {
    phases
        .global_phases
        .iter()
        .map(|&phi| ModeState::equal_superposition(phi))
        .collect()
}

/// The two coupler outputs for one trial.
pub(crate) fn two_field_outputs(phases: &TrialPhases) -> (ModeState, ModeState) {
    let a = ModeState::equal_superposition(phases.global_phases[0]);
    let b = ModeState::equal_superposition(phases.global_phases[1]);
    coupler_exchange_pair(&a, &b)
}

/// Outputs of the `N−1`-coupler chain; a single field passes through untouched.
pub(crate) fn chain_outputs(phases: &TrialPhases) -> Vec<ModeState> {
    let fields = input_fields(phases);
    if fields.len() < 2 {
        fields
    } else {
        chain_exchange(&fields).expect("chain of at least two fields")
    }
}

/// Normalized correlation `⟨AB⟩ / √(⟨A²⟩⟨B²⟩)` with `A`, `B` the analyzer
/// readings on the two coupler outputs.
///
/// The Monte-Carlo variance is the delta-method variance of the ratio, so
/// `std_error()` is the large-sample standard error of the estimate.
pub fn two_field_correlation(theta1: f64, theta2: f64, eval: &Evaluation) -> Result<CorrelationEstimate> {
    match eval {
        Evaluation::Analytic => Ok(CorrelationEstimate::exact((theta1 + theta2).cos())),
        Evaluation::MonteCarlo(cfg) => {
            cfg.validate()?;
            let (s1, s2) = (AnalyzerSetting::new(theta1), AnalyzerSetting::new(theta2));
            let acc = fold_phase_trials(
                2,
                cfg,
                CovarianceAccumulator::<3>::default,
                |acc, phases| {
                    let (a, b) = two_field_outputs(phases);
                    let x = analyzer_intensity_difference(&a, s1);
                    let y = analyzer_intensity_difference(&b, s2);
                    acc.push([x * y, x * x, y * y]);
                },
                |acc, other| acc.merge(&other),
            )?;
            normalized_ratio(&acc)
        }
    }
}

fn normalized_ratio(acc: &CovarianceAccumulator<3>) -> Result<CorrelationEstimate> {
    let [m_ab, m_aa, m_bb] = acc.mean();
    let denom = (m_aa * m_bb).sqrt();
    if !(denom > 0.0) {
        return Err(Error::Numerical("analyzer readings vanish identically".into()));
    }
    let r = m_ab / denom;
    let grad = [1.0 / denom, -r / (2.0 * m_aa), -r / (2.0 * m_bb)];
    let cov = acc.covariance();
    let mut var = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            var += grad[j] * cov[j][k] * grad[k];
        }
    }
    CorrelationEstimate::new(r, var.max(0.0), acc.count())
}

/// `⟨A(θ₁) B(θ₂) C(θ₃)⟩` over three fields joined by two couplers.
pub fn three_field_correlation(
    theta1: f64,
    theta2: f64,
    theta3: f64,
    eval: &Evaluation,
) -> Result<CorrelationEstimate> {
    match eval {
        Evaluation::Analytic => Ok(CorrelationEstimate::exact((theta1 + theta2 + theta3).cos() / 4.0)),
        Evaluation::MonteCarlo(cfg) => {
            let settings = [theta1, theta2, theta3].map(AnalyzerSetting::new);
            crate::ensemble::monte_carlo_average(
                |phases| {
                    chain_outputs(phases)
                        .iter()
                        .zip(settings)
                        .map(|(s, a)| analyzer_intensity_difference(s, a))
                        .product()
                },
                3,
                cfg,
            )
        }
    }
}

/// `cos(nθ)/2^{n−1}`, or `cos(nθ)` when `normalize` is set.
pub fn n_field_analytic(theta: f64, n: u32, normalize: bool) -> f64 {
    let s = (f64::from(n) * theta).cos();
    if normalize {
        s
    } else {
        s / 2f64.powi(n as i32 - 1)
    }
}

/// Product of the `n` analyzer readings after the coupler chain and a common
/// TE₁ phase `θ`.
pub fn n_field_correlation(theta: f64, n: u32, eval: &Evaluation, normalize: bool) -> Result<CorrelationEstimate> {
    let mut scan = n_field_scan(n, &[theta], eval, normalize)?;
    Ok(scan.remove(0))
}

/// [`n_field_correlation`] at many `θ`, reusing the same phase realizations
/// for every angle.
pub fn n_field_scan(n: u32, thetas: &[f64], eval: &Evaluation, normalize: bool) -> Result<Vec<CorrelationEstimate>> {
    match eval {
        Evaluation::Analytic => {
            if n == 0 {
                return Err(Error::arg("n must be at least 1"));
            }
            Ok(thetas
                .iter()
                .map(|&t| CorrelationEstimate::exact(n_field_analytic(t, n, normalize)))
                .collect())
        }
        Evaluation::MonteCarlo(cfg) => n_field_scan_moments(n, thetas, cfg, normalize)?
            .iter()
            .map(MomentAccumulator::estimate)
            .collect(),
    }
}

/// Per-angle moment accumulators of the N-field product (mean, variance and
/// the standard error of the variance).
pub fn n_field_scan_moments(
    n: u32,
    thetas: &[f64],
    cfg: &McConfig,
    normalize: bool,
) -> Result<Vec<MomentAccumulator>> {
    if n == 0 {
        return Err(Error::arg("n must be at least 1"));
    }
    cfg.validate()?;
    let scale = if normalize { 2f64.powi(n as i32 - 1) } else { 1.0 };
    let probe = AnalyzerSetting::new(0.0);
    fold_phase_trials(
        n as usize,
        cfg,
        || vec![MomentAccumulator::default(); thetas.len()],
        |acc, phases| {
            let out = chain_outputs(phases);
            for (slot, &theta) in acc.iter_mut().zip(thetas) {
                let product: f64 = apply_common_phase(&out, theta)
                    .iter()
                    .map(|s| analyzer_intensity_difference(s, probe))
                    .product();
                slot.push(scale * product);
            }
        },
        |acc, other| acc.iter_mut().zip(&other).for_each(|(a, b)| a.merge(b)),
    )
}

/// Monte-Carlo average of the pure post-coupler density matrix.
pub fn monte_carlo_density(cfg: &McConfig) -> Result<DensityMatrix4> {
    cfg.validate()?;
    let sum = fold_phase_trials(
        2,
        cfg,
        DensityMatrix4::zeros,
        |acc, phases| {
            let (a, b) = two_field_outputs(phases);
            acc.add_outer(&product_state(&a, &b));
        },
        |acc, other| acc.add_assign(&other),
    )?;
    Ok(sum.scaled(1.0 / cfg.trials as f64))
}
