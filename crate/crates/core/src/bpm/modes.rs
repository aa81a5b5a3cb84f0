use std::f64::consts::FRAC_PI_2;

use super::{BpmGrid, SlabGeometry, MIN_DECAY_LENGTHS};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// One guided TE mode of a symmetric slab, in closed form.
///
/// With `u = κd/2`, `w = γd/2` and `u² + w² = V²`, even modes satisfy
/// `u·sin u − w·cos u = 0` and odd modes `u·cos u + w·sin u = 0` (the
/// pole-free forms of `tan u = w/u` and `−cot u = w/u`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlabMode {
    pub order: usize,
    pub parity: Parity,
    pub n_eff: f64,
    /// Propagation constant, rad/m.
    pub beta: f64,
    /// Transverse wavenumber in the core, 1/m.
    pub kappa: f64,
    /// Cladding decay constant, 1/m.
    pub gamma: f64,
    /// Dispersion-relation residual at the solution.
    pub residual: f64,
    half_width: f64,
    /// Scale giving `∫ f² dx = 1`.
    amplitude: f64,
}

fn dispersion(parity: Parity, u: f64, v: f64) -> f64 {
    let w = (v * v - u * u).max(0.0).sqrt();
    match parity {
        Parity::Even => u * u.sin() - w * u.cos(),
        Parity::Odd => u * u.cos() + w * u.sin(),
    }
}

impl SlabMode {
    /// Unit-norm profile of a guide centred at `center`.
    ///
    /// Even modes peak positive at the centre; odd modes have their first
    /// (leftmost) lobe positive.
    pub fn eval(&self, x: f64, center: f64) -> f64 {
        let y = x - center;
        let a = self.half_width;
        let f = match self.parity {
            Parity::Even => {
                if y.abs() <= a {
                    (self.kappa * y).cos()
                } else {
                    (self.kappa * a).cos() * (-self.gamma * (y.abs() - a)).exp()
                }
            }
            Parity::Odd => {
                let s = if y.abs() <= a {
                    (self.kappa * y).sin()
                } else {
                    y.signum() * (self.kappa * a).sin() * (-self.gamma * (y.abs() - a)).exp()
                };
                -s
            }
        };
        self.amplitude * f
    }

    /// Sample on `grid` around `center`, rescaled to unit discrete norm.
    pub fn sample(&self, grid: &BpmGrid, center: f64) -> ModeProfile {
        let dx = grid.dx();
        let mut samples: Vec<f64> = grid.xs().iter().map(|&x| self.eval(x, center)).collect();
        let norm = (samples.iter().map(|s| s * s).sum::<f64>() * dx).sqrt();
        samples.iter_mut().for_each(|s| *s /= norm);
        ModeProfile {
            order: self.order,
            n_eff: self.n_eff,
            beta: self.beta,
            parity: self.parity,
            center,
            dx,
            samples,
        }
    }
}

/// All guided TE modes, fundamental first.
pub fn guided_modes(geom: &SlabGeometry) -> Result<Vec<SlabMode>> {
    let v = geom.v_number();
    let d = geom.core_width;
    let k0 = geom.k0();
    let mut modes = Vec::new();
    let mut order = 0usize;
    while (order as f64) * FRAC_PI_2 < v {
        let parity = if order.is_multiple_of(2) { Parity::Even } else { Parity::Odd };
        let mut lo = order as f64 * FRAC_PI_2;
        let mut hi = ((order + 1) as f64 * FRAC_PI_2).min(v);
        let f_lo = dispersion(parity, lo, v);
        let f_hi = dispersion(parity, hi, v);
        if f_lo == 0.0 || f_lo.signum() == f_hi.signum() {
            // root at the cutoff itself: not guided
            break;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = dispersion(parity, mid, v);
            if f_mid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = 0.5 * (lo + hi);
        let w = (v * v - u * u).max(0.0).sqrt();
        if w <= 0.0 {
            break;
        }
        let kappa = 2.0 * u / d;
        let gamma = 2.0 * w / d;
        let n_eff = (geom.n_core * geom.n_core - (kappa / k0).powi(2)).sqrt();
        let a = d / 2.0;
        let norm2 = match parity {
            Parity::Even => a + (2.0 * kappa * a).sin() / (2.0 * kappa) + (kappa * a).cos().powi(2) / gamma,
            Parity::Odd => a - (2.0 * kappa * a).sin() / (2.0 * kappa) + (kappa * a).sin().powi(2) / gamma,
        };
        modes.push(SlabMode {
            order,
            parity,
            n_eff,
            beta: k0 * n_eff,
            kappa,
            gamma,
            residual: dispersion(parity, u, v),
            half_width: a,
            amplitude: 1.0 / norm2.sqrt(),
        });
        order += 1;
    }
    if modes.is_empty() {
        return Err(Error::Numerical("no guided mode found".into()));
    }
    Ok(modes)
}

/// A guided mode sampled on a BPM grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeProfile {
    pub order: usize,
    pub n_eff: f64,
    pub beta: f64,
    pub parity: Parity,
    /// Guide centre, m.
    pub center: f64,
    /// Grid spacing the samples were taken with, m.
    pub dx: f64,
    /// Real samples with `Σ s² dx = 1`.
    pub samples: Vec<f64>,
}

/// Guided modes of a single slab centred at `x = 0`, sampled on `grid`.
///
/// Fails if the absorber-free part of the window does not reach five decay
/// lengths of the least confined mode beyond the core.
pub fn solve_slab_modes(geom: &SlabGeometry, grid: &BpmGrid) -> Result<Vec<ModeProfile>> {
    let modes = guided_modes(geom)?;
    let decay = modes.iter().map(|m| 1.0 / m.gamma).fold(0.0, f64::max);
    let needed = geom.core_width / 2.0 + MIN_DECAY_LENGTHS * decay;
    let (lo, hi) = grid.interior();
    if -lo < needed * (1.0 - 1e-9) || hi < needed * (1.0 - 1e-9) {
        return Err(Error::Numerical(format!(
            "transverse window interior [{lo:.3e}, {hi:.3e}] m is narrower than ±{needed:.3e} m"
        )));
    }
    Ok(modes.iter().map(|m| m.sample(grid, 0.0)).collect())
}
