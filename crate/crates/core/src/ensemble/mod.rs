//! Random-phase ensembles.
//!
//! Every field carries a global phase `φ` drawn from a [`PhaseDistribution`].
//! Couplers turn those into phase differences `λ_i = φ_{i+1} − φ_i` (cyclic),
//! which are what the correlation functions average over. Sampling is keyed by
//! `(master_seed, trial_index, field_index)` so results never depend on how
//! trials are scheduled across threads.

mod rng;
mod stats;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::{Error, Result};

pub use rng::{derive_seed, RngStreamKey, StreamFactory};
pub use stats::{fold_trials, CorrelationEstimate, CovarianceAccumulator, MomentAccumulator, CHUNK_TRIALS};

/// Reduce an angle into `[0, 2π)`.
///
/// This is the only place phases are reduced, so there is exactly one
/// convention for the branch cut.
pub fn wrap_phase(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid may round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest distance between two angles on the circle, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    d.min(TAU - d)
}

/// Law of a single field's global phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PhaseDistribution {
    /// Uniform on `[0, 2π)`.
    #[default]
    ContinuousUniform,
    /// Equally weighted support points `2πk/levels`, `0 ≤ k < levels`.
    DiscreteUniform { levels: u32 },
}

impl PhaseDistribution {
    pub fn discrete(levels: u32) -> Result<Self> {
        let dist = PhaseDistribution::DiscreteUniform { levels };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhaseDistribution::DiscreteUniform { levels: 0 } => {
                Err(Error::arg("discrete phase distribution needs at least one level"))
            }
            _ => Ok(()),
        }
    }

    /// Draw one phase in `[0, 2π)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PhaseDistribution::ContinuousUniform => wrap_phase(rng.gen::<f64>() * TAU),
            PhaseDistribution::DiscreteUniform { levels } => {
                let k = rng.gen_range(0..levels);
                TAU * f64::from(k) / f64::from(levels)
            }
        }
    }

    /// Exact harmonic moment `E[e^{imλ}]`.
    pub fn mean_exp(&self, harmonic: i64) -> Complex64 {
        let hit = match *self {
            PhaseDistribution::ContinuousUniform => harmonic == 0,
            PhaseDistribution::DiscreteUniform { levels } => {
                levels != 0 && harmonic.rem_euclid(i64::from(levels)) == 0
            }
        };
        if hit {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

/// `E[e^{imλ}]` under `dist`.
///
/// The difference of two independent draws from a uniform law on the circle
/// (or on the cyclic group of `G` points) has the same law, so the moment of a
/// phase difference equals the moment of a single phase.
pub fn ensemble_mean_exp(dist: PhaseDistribution, harmonic: i64) -> Complex64 {
    dist.mean_exp(harmonic)
}

/// One realization of the `N` global phases and their cyclic differences.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialPhases {
    pub global_phases: Vec<f64>,
    /// `λ_i = φ_{i+1} − φ_i`, with `λ_N = φ_1 − φ_N`, each in `[0, 2π)`.
    pub differences: Vec<f64>,
}

impl TrialPhases {
    pub fn from_global(global_phases: Vec<f64>) -> Self {
        let n = global_phases.len();
        let differences = (0..n)
            .map(|i| wrap_phase(global_phases[(i + 1) % n] - global_phases[i]))
            .collect();
        TrialPhases {
            global_phases,
            differences,
        }
    }

    pub fn n_fields(&self) -> usize {
        self.global_phases.len()
    }

    /// Sum of the differences reduced to `[0, 2π)`; zero up to rounding.
    pub fn difference_sum(&self) -> f64 {
        wrap_phase(self.differences.iter().sum())
    }
}

/// Draw `n_fields` independent phases for one trial.
///
/// Field `i` uses the stream `key.field_index + i`.
pub fn sample_trial_phases(
    n_fields: usize,
    dist: PhaseDistribution,
    key: RngStreamKey,
) -> Result<TrialPhases> {
    if n_fields == 0 {
        return Err(Error::arg("n_fields must be at least 1"));
    }
    dist.validate()?;
    let factory = StreamFactory::new(key.master_seed);
    Ok(sample_with_factory(&factory, n_fields, dist, key.trial_index, key.field_index))
}

pub(crate) fn sample_with_factory(
    factory: &StreamFactory,
    n_fields: usize,
    dist: PhaseDistribution,
    trial_index: u64,
    first_field: u32,
) -> TrialPhases {
    let phases = (0..n_fields)
        .map(|i| {
            let mut rng = factory.stream(trial_index, first_field + i as u32);
            dist.sample(&mut rng)
        })
        .collect();
    TrialPhases::from_global(phases)
}

/// Monte-Carlo run parameters shared by every ensemble average.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McConfig {
    pub trials: u64,
    pub dist: PhaseDistribution,
    pub seed: u64,
}

impl McConfig {
    pub fn new(trials: u64, dist: PhaseDistribution, seed: u64) -> Self {
        McConfig { trials, dist, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::arg(format!(
                "at least 2 trials are required, got {}",
                self.trials
            )));
        }
        self.dist.validate()
    }

    pub fn with_seed(self, seed: u64) -> Self {
        McConfig { seed, ..self }
    }
}

/// Fold over sampled trials with the deterministic chunked reduction of
/// [`fold_trials`]. `fold` sees each trial's phases exactly once.
pub fn fold_phase_trials<A, I, F, M>(
    n_fields: usize,
    cfg: &McConfig,
    init: I,
    fold: F,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &TrialPhases) + Sync,
    M: Fn(&mut A, A),
{
    if n_fields == 0 {
        return Err(Error::arg("n_fields must be at least 1"));
    }
    cfg.dist.validate()?;
    let factory = StreamFactory::new(cfg.seed);
    Ok(fold_trials(
        cfg.trials,
        init,
        |acc, t| {
            let phases = sample_with_factory(&factory, n_fields, cfg.dist, t, 0);
            fold(acc, &phases)
        },
        merge,
    ))
}

/// Mean, unbiased variance and standard error of `observable` over the ensemble.
pub fn monte_carlo_average<F>(observable: F, n_fields: usize, cfg: &McConfig) -> Result<CorrelationEstimate>
where
    F: Fn(&TrialPhases) -> f64 + Sync,
{
    cfg.validate()?;
    let acc = fold_phase_trials(
        n_fields,
        cfg,
        MomentAccumulator::default,
        |acc, phases| acc.push(observable(phases)),
        |acc, other| acc.merge(&other),
    )?;
    acc.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn key(trial: u64) -> RngStreamKey {
        RngStreamKey::new(7, trial, 0)
    }

    #[test]
    fn wrap_phase_canonical_range() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert_eq!(wrap_phase(TAU), 0.0);
        assert_eq!(wrap_phase(-1e-300), 0.0);
        assert_abs_diff_eq!(wrap_phase(-PI / 2.0), 1.5 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_phase(5.0 * PI), PI, epsilon = 1e-14);
    }

    #[test]
    fn three_fields_telescoping() {
        let p = sample_trial_phases(3, PhaseDistribution::ContinuousUniform, key(3)).unwrap();
        assert_eq!(p.global_phases.len(), 3);
        assert!(p.global_phases.iter().all(|&x| (0.0..TAU).contains(&x)));
        assert!(circular_distance(p.difference_sum(), 0.0) < 1e-12);
    }

    #[test]
    fn binary_discrete_support() {
        let dist = PhaseDistribution::discrete(2).unwrap();
        for t in 0..200 {
            let p = sample_trial_phases(2, dist, key(t)).unwrap();
            for &phi in &p.global_phases {
                assert!(phi == 0.0 || phi == PI, "{phi}");
            }
        }
    }

    #[test]
    fn single_field_has_zero_difference() {
        let p = sample_trial_phases(1, PhaseDistribution::ContinuousUniform, key(11)).unwrap();
        assert_eq!(p.differences, vec![0.0]);
    }

    #[test]
    fn argument_errors() {
        assert!(sample_trial_phases(0, PhaseDistribution::ContinuousUniform, key(0)).is_err());
        let bad = PhaseDistribution::DiscreteUniform { levels: 0 };
        assert!(sample_trial_phases(2, bad, key(0)).is_err());
        assert!(PhaseDistribution::discrete(0).is_err());
        let cfg = McConfig::new(1, PhaseDistribution::ContinuousUniform, 1);
        assert!(monte_carlo_average(|_| 1.0, 2, &cfg).is_err());
    }

    #[test]
    fn same_key_same_sample() {
        let dist = PhaseDistribution::ContinuousUniform;
        let a = sample_trial_phases(4, dist, RngStreamKey::new(99, 5, 2)).unwrap();
        let b = sample_trial_phases(4, dist, RngStreamKey::new(99, 5, 2)).unwrap();
        let c = sample_trial_phases(4, dist, RngStreamKey::new(99, 6, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn moments() {
        let c = PhaseDistribution::ContinuousUniform;
        assert_eq!(ensemble_mean_exp(c, 1), Complex64::new(0.0, 0.0));
        assert_eq!(ensemble_mean_exp(c, 0), Complex64::new(1.0, 0.0));
        let d4 = PhaseDistribution::discrete(4).unwrap();
        assert_eq!(ensemble_mean_exp(d4, 0), Complex64::new(1.0, 0.0));
        assert_eq!(ensemble_mean_exp(d4, 4), Complex64::new(1.0, 0.0));
        assert_eq!(ensemble_mean_exp(d4, -8), Complex64::new(1.0, 0.0));
        assert_eq!(ensemble_mean_exp(d4, 2), Complex64::new(0.0, 0.0));
    }

    // Finite-sum oracle for the discrete moments.
    #[test]
    fn discrete_moments_match_finite_sum() {
        for levels in 1..=9u32 {
            let dist = PhaseDistribution::discrete(levels).unwrap();
            for m in -10i64..=10 {
                let sum: Complex64 = (0..levels)
                    .map(|k| {
                        Complex64::from_polar(1.0, m as f64 * TAU * f64::from(k) / f64::from(levels))
                    })
                    .sum::<Complex64>()
                    / f64::from(levels);
                let exact = ensemble_mean_exp(dist, m);
                assert!((sum - exact).norm() < 1e-12, "G={levels} m={m}");
            }
        }
    }

    #[test]
    fn constant_observable() {
        let cfg = McConfig::new(1000, PhaseDistribution::ContinuousUniform, 3);
        let est = monte_carlo_average(|_| 1.0, 2, &cfg).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.variance, 0.0);
        assert_eq!(est.count, 1000);
    }

    #[test]
    fn cosine_observables() {
        let cfg = McConfig::new(100_000, PhaseDistribution::ContinuousUniform, 2024);
        let est = monte_carlo_average(|p| p.differences[0].cos(), 2, &cfg).unwrap();
        assert!(est.mean.abs() < 0.02, "{}", est.mean);
        let est = monte_carlo_average(|p| p.differences[0].cos().powi(2), 2, &cfg).unwrap();
        assert!((est.mean - 0.5).abs() < 0.01, "{}", est.mean);
    }

    #[test]
    fn first_harmonic_bound_for_both_laws() {
        let trials = 20_000u64;
        for dist in [
            PhaseDistribution::ContinuousUniform,
            PhaseDistribution::discrete(3).unwrap(),
            PhaseDistribution::discrete(8).unwrap(),
        ] {
            for seed in [1u64, 2, 3] {
                let cfg = McConfig::new(trials, dist, seed);
                let re = monte_carlo_average(|p| p.differences[0].cos(), 2, &cfg).unwrap();
                let im = monte_carlo_average(|p| p.differences[0].sin(), 2, &cfg).unwrap();
                let modulus = re.mean.hypot(im.mean);
                assert!(modulus <= 5.0 / (trials as f64).sqrt(), "{dist:?} seed {seed}: {modulus}");
            }
        }
    }

    #[test]
    fn independent_of_thread_count() {
        let cfg = McConfig::new(3 * CHUNK_TRIALS + 17, PhaseDistribution::ContinuousUniform, 77);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo_average(|p| (p.differences[0] + 0.3).cos(), 3, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
    }
}
