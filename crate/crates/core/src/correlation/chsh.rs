use std::f64::consts::{PI, TAU};

use crate::ensemble::{derive_seed, fold_phase_trials, McConfig};
use crate::optics::{analyzer_intensity_difference, AnalyzerSetting};
use crate::{Error, Result};

use super::{two_field_correlation, two_field_outputs, Evaluation};

/// Angle lattice step used for the tabulated optima, `π/46`.
pub const DEFAULT_GRID_STEP: f64 = PI / 46.0;

const VIOLATION_TOL: f64 = 1e-9;

/// Sign/argument convention of the two-field correlation.
///
/// `Sum` is the coupler's native `cos(θ₁+θ₂)`. `Difference` corresponds to
/// reversing the second analyzer's modulator; the negated forms correspond to
/// swapping an analyzer's output ports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Hash)]
pub enum ChshVariant {
    #[default]
    Sum,
    Difference,
    NegSum,
    NegDifference,
}

impl ChshVariant {
    pub const ALL: [ChshVariant; 4] = [
        ChshVariant::Sum,
        ChshVariant::Difference,
        ChshVariant::NegSum,
        ChshVariant::NegDifference,
    ];

    fn sign(self) -> f64 {
        match self {
            ChshVariant::Sum | ChshVariant::Difference => 1.0,
            ChshVariant::NegSum | ChshVariant::NegDifference => -1.0,
        }
    }

    /// Multiplier applied to `θ₂` before it reaches the analyzer.
    fn theta2_factor(self) -> f64 {
        match self {
            ChshVariant::Sum | ChshVariant::NegSum => 1.0,
            ChshVariant::Difference | ChshVariant::NegDifference => -1.0,
        }
    }

    pub fn correlation(self, theta1: f64, theta2: f64) -> f64 {
        self.sign() * (theta1 + self.theta2_factor() * theta2).cos()
    }

    pub fn name(self) -> &'static str {
        match self {
            ChshVariant::Sum => "sum",
            ChshVariant::Difference => "difference",
            ChshVariant::NegSum => "neg-sum",
            ChshVariant::NegDifference => "neg-difference",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ChshVariant::ALL.into_iter().find(|v| v.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ChshSettings {
    pub theta1: f64,
    pub theta1p: f64,
    pub theta2: f64,
    pub theta2p: f64,
    pub variant: ChshVariant,
}

impl ChshSettings {
    /// `S(θ₁,θ₂) − S(θ₁,θ₂′) + S(θ₁′,θ₂′) + S(θ₁′,θ₂)` for a given `S`.
    pub fn combine<F: FnMut(f64, f64) -> f64>(&self, mut s: F) -> f64 {
        s(self.theta1, self.theta2) - s(self.theta1, self.theta2p)
            + s(self.theta1p, self.theta2p)
            + s(self.theta1p, self.theta2)
    }

    fn as_array(&self) -> [f64; 4] {
        [self.theta1, self.theta1p, self.theta2, self.theta2p]
    }

    fn from_array(x: [f64; 4], variant: ChshVariant) -> Self {
        ChshSettings {
            theta1: x[0],
            theta1p: x[1],
            theta2: x[2],
            theta2p: x[3],
            variant,
        }
    }
}

/// `|B|` for the given settings.
///
/// In Monte-Carlo mode all four correlations share one phase sample. Each
/// normalized correlation is then the cosine of the angle between two sample
/// vectors, so the estimate itself can never exceed `2√2`.
pub fn chsh_value(settings: &ChshSettings, eval: &Evaluation) -> Result<f64> {
    let v = settings.variant;
    match eval {
        Evaluation::Analytic => Ok(settings.combine(|a, b| v.correlation(a, b)).abs()),
        Evaluation::MonteCarlo(_) => {
            let mut err = None;
            let b = settings.combine(|a, b| {
                match two_field_correlation(a, v.theta2_factor() * b, eval) {
                    Ok(est) => v.sign() * est.mean,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(b.abs()),
            }
        }
    }
}

/// Best lattice point of `|B|` for a correlation table `s[i][j] = S(θᵢ, θⱼ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeOptimum {
    /// Lattice indices of `(θ₁, θ₁′, θ₂, θ₂′)`.
    pub indices: [usize; 4],
    pub b_abs: f64,
}

/// Exhaustive maximization of `|B|` over a square correlation table.
///
/// For fixed `(θ₂, θ₂′)` the `θ₁` and `θ₁′` terms separate, so the search is
/// `O(K³)` rather than `O(K⁴)`. Ties keep the first index found.
pub fn search_lattice(s: &[Vec<f64>]) -> LatticeOptimum {
    let k = s.len();
    let mut best = LatticeOptimum {
        indices: [0; 4],
        b_abs: f64::NEG_INFINITY,
    };
    for b in 0..k {
        for bp in 0..k {
            let (mut max1, mut min1, mut max2, mut min2) = (
                (f64::NEG_INFINITY, 0),
                (f64::INFINITY, 0),
                (f64::NEG_INFINITY, 0),
                (f64::INFINITY, 0),
            );
            for (a, row) in s.iter().enumerate() {
                let first = row[b] - row[bp];
                let second = row[bp] + row[b];
                if first > max1.0 {
                    max1 = (first, a);
                }
                if first < min1.0 {
                    min1 = (first, a);
                }
                if second > max2.0 {
                    max2 = (second, a);
                }
                if second < min2.0 {
                    min2 = (second, a);
                }
            }
            let up = max1.0 + max2.0;
            let down = -(min1.0 + min2.0);
            if up > best.b_abs {
                best = LatticeOptimum {
                    indices: [max1.1, max2.1, b, bp],
                    b_abs: up,
                };
            }
            if down > best.b_abs {
                best = LatticeOptimum {
                    indices: [min1.1, min2.1, b, bp],
                    b_abs: down,
                };
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshOptimum {
    pub settings: ChshSettings,
    /// Final `|B|` (after refinement when it ran).
    pub b_abs: f64,
    /// Best `|B|` on the angle lattice alone.
    pub lattice_b_abs: f64,
    pub violates: bool,
    pub refined: bool,
}

pub(crate) fn lattice_angles(grid_step: f64) -> Result<Vec<f64>> {
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::arg(format!("grid step must be positive, got {grid_step}")));
    }
    let k = (TAU / grid_step - 1e-9).ceil().max(1.0) as usize;
    Ok((0..k).map(|i| i as f64 * grid_step).collect())
}

/// Maximize `|B|` over the four angles.
///
/// The lattice `{k·grid_step}` is searched exhaustively. In analytic mode a
/// lattice optimum that already violates the bound is polished by a compass
/// search in continuous angles; a lattice without any violation is reported
/// as is. Monte-Carlo mode stays on the lattice and uses one phase sample of
/// `cfg.trials` realizations for the whole table.
pub fn optimize_chsh(variant: ChshVariant, grid_step: f64, eval: &Evaluation) -> Result<ChshOptimum> {
    let lattice = lattice_angles(grid_step)?;
    let table = match eval {
        Evaluation::Analytic => lattice
            .iter()
            .map(|&a| lattice.iter().map(|&b| variant.correlation(a, b)).collect())
            .collect::<Vec<Vec<f64>>>(),
        Evaluation::MonteCarlo(cfg) => monte_carlo_table(variant, &lattice, cfg)?,
    };
    let opt = search_lattice(&table);
    let [i1, i1p, i2, i2p] = opt.indices;
    let settings = ChshSettings::from_array([lattice[i1], lattice[i1p], lattice[i2], lattice[i2p]], variant);
    let mut result = ChshOptimum {
        settings,
        b_abs: opt.b_abs,
        lattice_b_abs: opt.b_abs,
        violates: opt.b_abs > 2.0 + VIOLATION_TOL,
        refined: false,
    };
    if matches!(eval, Evaluation::Analytic) && result.violates {
        let (settings, b_abs) = refine_analytic(settings, grid_step);
        result.settings = settings;
        result.b_abs = b_abs;
        result.refined = true;
    }
    Ok(result)
}

fn refine_analytic(start: ChshSettings, grid_step: f64) -> (ChshSettings, f64) {
    let variant = start.variant;
    let objective = |x: [f64; 4]| {
        ChshSettings::from_array(x, variant)
            .combine(|a, b| variant.correlation(a, b))
            .abs()
    };
    let mut x = start.as_array();
    let mut fx = objective(x);
    let mut step = grid_step / 2.0;
    while step > 1e-12 {
        let mut improved = false;
        for k in 0..4 {
            for dir in [1.0, -1.0] {
                let mut y = x;
                y[k] += dir * step;
                let fy = objective(y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    (ChshSettings::from_array(x, variant), fx)
}

/// Normalized Monte-Carlo correlation table over the lattice from one shared
/// phase sample.
fn monte_carlo_table(variant: ChshVariant, lattice: &[f64], cfg: &McConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let k = lattice.len();
    let first: Vec<AnalyzerSetting> = lattice.iter().map(|&t| AnalyzerSetting::new(t)).collect();
    let second: Vec<AnalyzerSetting> = lattice
        .iter()
        .map(|&t| AnalyzerSetting::new(variant.theta2_factor() * t))
        .collect();
    struct Sums {
        cross: Vec<f64>,
        aa: Vec<f64>,
        bb: Vec<f64>,
    }
    let sums = fold_phase_trials(
        2,
        cfg,
        || Sums {
            cross: vec![0.0; k * k],
            aa: vec![0.0; k],
            bb: vec![0.0; k],
        },
        |acc, phases| {
            let (a, b) = two_field_outputs(phases);
            let xa: Vec<f64> = first.iter().map(|&s| analyzer_intensity_difference(&a, s)).collect();
            let xb: Vec<f64> = second.iter().map(|&s| analyzer_intensity_difference(&b, s)).collect();
            for (i, &x) in xa.iter().enumerate() {
                acc.aa[i] += x * x;
                let row = &mut acc.cross[i * k..(i + 1) * k];
                for (c, &y) in row.iter_mut().zip(&xb) {
                    *c += x * y;
                }
            }
            for (j, &y) in xb.iter().enumerate() {
                acc.bb[j] += y * y;
            }
        },
        |acc, other| {
            acc.cross.iter_mut().zip(&other.cross).for_each(|(a, b)| *a += b);
            acc.aa.iter_mut().zip(&other.aa).for_each(|(a, b)| *a += b);
            acc.bb.iter_mut().zip(&other.bb).for_each(|(a, b)| *a += b);
        },
    )?;
    Ok((0..k)
        .map(|i| {
            (0..k)
                .map(|j| variant.sign() * sums.cross[i * k + j] / (sums.aa[i] * sums.bb[j]).sqrt())
                .collect()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceAverage {
    pub mean_b_abs: f64,
    pub std_error: f64,
    pub sequences: Vec<ChshOptimum>,
}

/// Average of the lattice-optimal `|B|` over independent phase sequences of
/// `cfg.trials` realizations each.
pub fn chsh_sequence_average(
    variant: ChshVariant,
    grid_step: f64,
    sequences: usize,
    cfg: &McConfig,
) -> Result<SequenceAverage> {
    if sequences < 2 {
        return Err(Error::arg("at least 2 sequences are required"));
    }
    let runs = (0..sequences)
        .map(|i| {
            let eval = Evaluation::MonteCarlo(cfg.with_seed(derive_seed(cfg.seed, i as u64)));
            optimize_chsh(variant, grid_step, &eval)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.b_abs).sum::<f64>() / n;
    let var = runs.iter().map(|r| (r.b_abs - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(SequenceAverage {
        mean_b_abs: mean,
        std_error: (var / n).sqrt(),
        sequences: runs,
    })
}
