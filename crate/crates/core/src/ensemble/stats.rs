use rayon::prelude::*;

use crate::{Error, Result};

/// Trials per work unit. Chunk boundaries are fixed, so the floating-point
/// reduction order never depends on the thread count.
pub const CHUNK_TRIALS: u64 = 4096;

/// Parallel fold over trial indices `0..trials`.
///
/// Each fixed-size chunk is folded sequentially, and chunk results are merged
/// left to right in index order.
pub fn fold_trials<A, I, F, M>(trials: u64, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            let end = ((c + 1) * CHUNK_TRIALS).min(trials);
            for t in c * CHUNK_TRIALS..end {
                fold(&mut acc, t);
            }
            acc
        })
        .collect();
    let mut parts = parts.into_iter();
    let mut total = parts.next().unwrap_or_else(&init);
    for part in parts {
        merge(&mut total, part);
    }
    total
}

/// Streaming central moments up to fourth order, mergeable across chunks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MomentAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let mean = self.mean + d * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d2 * d * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * other.m3 - nb * self.m3) / n;
        *self = MomentAccumulator {
            count: self.count + other.count,
            mean,
            m2,
            m3,
            m4,
        };
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count as f64 - 1.0)).max(0.0)
    }

    /// Large-sample standard error of [`variance`](Self::variance):
    /// `sqrt((μ₄ − (n−3)/(n−1)·s⁴)/n)`.
    pub fn variance_std_error(&self) -> f64 {
        if self.count < 4 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let mu4 = self.m4 / n;
        let s2 = self.variance();
        ((mu4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n).max(0.0).sqrt()
    }

    pub fn estimate(&self) -> Result<CorrelationEstimate> {
        CorrelationEstimate::new(self.mean, self.variance(), self.count)
    }
}

/// Monte-Carlo summary: sample mean, unbiased per-trial variance, trial count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationEstimate {
    pub mean: f64,
    pub variance: f64,
    pub count: u64,
}

impl CorrelationEstimate {
    pub fn new(mean: f64, variance: f64, count: u64) -> Result<Self> {
        if count < 2 {
            return Err(Error::arg("an estimate needs at least 2 trials"));
        }
        if !(variance >= 0.0) {
            return Err(Error::arg(format!("variance must be non-negative, got {variance}")));
        }
        Ok(CorrelationEstimate {
            mean,
            variance,
            count,
        })
    }

    /// Closed-form value with no sampling noise.
    pub fn exact(mean: f64) -> Self {
        CorrelationEstimate {
            mean,
            variance: 0.0,
            count: u64::MAX,
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

/// Streaming mean vector and co-moment matrix of `K` jointly observed values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceAccumulator<const K: usize> {
    count: u64,
    mean: [f64; K],
    comoment: [[f64; K]; K],
}

impl<const K: usize> Default for CovarianceAccumulator<K> {
    fn default() -> Self {
        CovarianceAccumulator {
            count: 0,
            mean: [0.0; K],
            comoment: [[0.0; K]; K],
        }
    }
}

impl<const K: usize> CovarianceAccumulator<K> {
    pub fn push(&mut self, x: [f64; K]) {
        self.count += 1;
        let n = self.count as f64;
        let mut before = [0.0; K];
        for j in 0..K {
            before[j] = x[j] - self.mean[j];
            self.mean[j] += before[j] / n;
        }
        for j in 0..K {
            for k in 0..K {
                self.comoment[j][k] += before[j] * (x[k] - self.mean[k]);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let mut d = [0.0; K];
        for j in 0..K {
            d[j] = other.mean[j] - self.mean[j];
        }
        for j in 0..K {
            for k in 0..K {
                self.comoment[j][k] += other.comoment[j][k] + d[j] * d[k] * na * nb / n;
            }
            self.mean[j] += d[j] * nb / n;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> [f64; K] {
        self.mean
    }

    /// Unbiased sample covariance matrix.
    pub fn covariance(&self) -> [[f64; K]; K] {
        let mut cov = [[0.0; K]; K];
        if self.count < 2 {
            return cov;
        }
        let denom = self.count as f64 - 1.0;
        for j in 0..K {
            for k in 0..K {
                cov[j][k] = self.comoment[j][k] / denom;
            }
        }
        cov
    }
}
