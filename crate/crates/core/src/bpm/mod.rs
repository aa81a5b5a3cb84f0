//! Scalar TE beam propagation for weakly guiding slab waveguides.
//!
//! - [`modes`]: guided TE modes of a symmetric slab from its dispersion relation.
//! - [`propagate`]: paraxial Crank–Nicolson marching with an absorbing layer.
//! - [`coupler`]: coupled-mode design of a TE₁-exchanging directional coupler
//!   and its full BPM check.
//!
//! Fields are envelopes `E(x, z)` of `ψ = E·e^{iβ_ref z}` with
//! `β_ref = k₀·n_ref`, and a guided mode evolves as `e^{iβz}`.

pub mod coupler;
pub mod modes;
pub mod propagate;

use std::f64::consts::TAU;

use crate::{Error, Result};

pub use coupler::{
    arm_modes, arm_offset, coupler_grid, coupling_coefficient, design_coupler, propagate_coupler, simulate_fig1,
    CouplerDesign, Fig1Result, GapRange, Launch, ModalPowers, DEFAULT_CROSSTALK_THRESHOLD,
};
pub use modes::{guided_modes, solve_slab_modes, ModeProfile, Parity, SlabMode};
pub use propagate::{
    bpm_propagate, mode_overlap, total_power, CrankNicolson, IndexProfile, Propagation, MAX_PHASE_PER_STEP,
};

/// Symmetric slab cross-section at a fixed vacuum wavelength.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlabGeometry {
    pub n_core: f64,
    pub n_clad: f64,
    /// Full core width, m.
    pub core_width: f64,
    /// m.
    pub vacuum_wavelength: f64,
}

/// Relative index contrast above which the slab is no longer weakly guiding.
pub const WEAK_GUIDANCE_LIMIT: f64 = 0.05;

impl SlabGeometry {
    pub fn new(n_core: f64, n_clad: f64, core_width: f64, vacuum_wavelength: f64) -> Result<Self> {
        if !(n_clad > 0.0 && n_core > n_clad) {
            return Err(Error::arg(format!(
                "need n_core > n_clad > 0, got n_core = {n_core}, n_clad = {n_clad}"
            )));
        }
        if !(core_width > 0.0) || !(vacuum_wavelength > 0.0) {
            return Err(Error::arg("core width and wavelength must be positive"));
        }
        Ok(SlabGeometry {
            n_core,
            n_clad,
            core_width,
            vacuum_wavelength,
        })
    }

    /// Core width chosen so the slab has normalized frequency `v_number`.
    pub fn with_v_number(n_core: f64, n_clad: f64, vacuum_wavelength: f64, v_number: f64) -> Result<Self> {
        if !(v_number > 0.0) {
            return Err(Error::arg("V number must be positive"));
        }
        let probe = SlabGeometry::new(n_core, n_clad, 1.0, vacuum_wavelength)?;
        let width = 2.0 * v_number / (probe.k0() * probe.numerical_aperture());
        SlabGeometry::new(n_core, n_clad, width, vacuum_wavelength)
    }

    /// 1.55 µm light in a 1.46/1.45 glass slab with `V = 2.5` (TE₀ and TE₁ guided).
    pub fn telecom_default() -> Self {
        SlabGeometry::with_v_number(1.46, 1.45, 1.55e-6, 2.5).expect("valid default geometry")
    }

    /// Vacuum wavenumber `2π/λ`, rad/m.
    pub fn k0(&self) -> f64 {
        TAU / self.vacuum_wavelength
    }

    pub fn numerical_aperture(&self) -> f64 {
        (self.n_core * self.n_core - self.n_clad * self.n_clad).sqrt()
    }

    /// `V = (k₀d/2)·√(n_core² − n_clad²)`; mode `m` is guided for `V > mπ/2`.
    pub fn v_number(&self) -> f64 {
        0.5 * self.k0() * self.core_width * self.numerical_aperture()
    }

    /// Advisory text when the index contrast exceeds [`WEAK_GUIDANCE_LIMIT`].
    pub fn weak_guidance_advisory(&self) -> Option<String> {
        let contrast = (self.n_core - self.n_clad) / self.n_clad;
        (contrast > WEAK_GUIDANCE_LIMIT).then(|| {
            format!("index contrast {contrast:.3} exceeds {WEAK_GUIDANCE_LIMIT}; paraxial scalar results are approximate")
        })
    }
}

/// Imaginary-index absorbing layer at both window edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbsorbingBoundary {
    /// Layer thickness on each side, m.
    pub width: f64,
    /// Peak imaginary part added to `n²` at the window edge (quadratic ramp).
    pub strength: f64,
}

/// Default peak imaginary `n²` of the absorbing layer.
pub const DEFAULT_ABSORBER_STRENGTH: f64 = 0.02;

/// Minimum number of evanescent decay lengths between a core and the absorber.
pub const MIN_DECAY_LENGTHS: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpmGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    /// Longitudinal step, m.
    pub dz: f64,
    pub reference_index: f64,
    pub boundary: AbsorbingBoundary,
}

impl BpmGrid {
    pub fn new(
        x_min: f64,
        x_max: f64,
        nx: usize,
        dz: f64,
        reference_index: f64,
        boundary: AbsorbingBoundary,
    ) -> Result<Self> {
        if nx < 128 {
            return Err(Error::arg(format!("need at least 128 transverse points, got {nx}")));
        }
        if !(x_max > x_min) {
            return Err(Error::arg("empty transverse window"));
        }
        if !(dz > 0.0) {
            return Err(Error::arg("dz must be positive"));
        }
        if !(reference_index > 0.0) {
            return Err(Error::arg("reference index must be positive"));
        }
        if !(boundary.width >= 0.0) || 2.0 * boundary.width >= x_max - x_min || !(boundary.strength >= 0.0) {
            return Err(Error::arg("absorbing layer does not fit in the window"));
        }
        Ok(BpmGrid {
            x_min,
            x_max,
            nx,
            dz,
            reference_index,
            boundary,
        })
    }

    /// Symmetric window whose interior spans `±(structure_half_width +` 5 decay
    /// lengths of the least confined mode`)`; the absorbing layer occupies the
    /// outer 10% of each half. The reference index is the mean of the first
    /// two guided modes' effective indices (or the TE₀ index alone).
    pub fn covering(geom: &SlabGeometry, structure_half_width: f64, nx: usize, dz: f64) -> Result<Self> {
        let modes = guided_modes(geom)?;
        let decay = modes
            .iter()
            .map(|m| 1.0 / m.gamma)
            .fold(0.0, f64::max);
        let interior = structure_half_width + MIN_DECAY_LENGTHS * decay;
        let half = interior / 0.9;
        let n_ref = modes.iter().take(2).map(|m| m.n_eff).sum::<f64>() / modes.len().min(2) as f64;
        BpmGrid::new(
            -half,
            half,
            nx,
            dz,
            n_ref,
            AbsorbingBoundary {
                width: half - interior,
                strength: DEFAULT_ABSORBER_STRENGTH,
            },
        )
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Imaginary `n²` of the absorbing layer at `x`.
    pub fn absorption(&self, x: f64) -> f64 {
        let w = self.boundary.width;
        if w <= 0.0 {
            return 0.0;
        }
        let depth = (self.x_min + w - x).max(x - (self.x_max - w)).max(0.0);
        self.boundary.strength * (depth / w).powi(2)
    }

    /// Interval free of absorption.
    pub fn interior(&self) -> (f64, f64) {
        (self.x_min + self.boundary.width, self.x_max - self.boundary.width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telecom_default_has_two_modes() {
        let g = SlabGeometry::telecom_default();
        assert!((g.v_number() - 2.5).abs() < 1e-12);
        assert!(g.weak_guidance_advisory().is_none());
        assert_eq!(guided_modes(&g).unwrap().len(), 2);
    }

    #[test]
    fn geometry_validation() {
        assert!(SlabGeometry::new(1.45, 1.46, 1e-6, 1.55e-6).is_err());
        assert!(SlabGeometry::new(1.46, 0.0, 1e-6, 1.55e-6).is_err());
        assert!(SlabGeometry::new(1.46, 1.45, -1e-6, 1.55e-6).is_err());
        let strong = SlabGeometry::new(3.5, 1.45, 0.3e-6, 1.55e-6).unwrap();
        assert!(strong.weak_guidance_advisory().is_some());
    }

    #[test]
    fn grid_validation() {
        let b = AbsorbingBoundary { width: 1e-6, strength: 0.01 };
        assert!(BpmGrid::new(-1e-5, 1e-5, 64, 1e-6, 1.45, b).is_err());
        assert!(BpmGrid::new(-1e-5, 1e-5, 256, 0.0, 1.45, b).is_err());
        assert!(BpmGrid::new(1e-5, -1e-5, 256, 1e-6, 1.45, b).is_err());
        let g = BpmGrid::new(-1e-5, 1e-5, 256, 1e-6, 1.45, b).unwrap();
        assert_eq!(g.absorption(0.0), 0.0);
        assert!((g.absorption(1e-5) - 0.01).abs() < 1e-15);
        assert!((g.x(255) - 1e-5).abs() < 1e-18);
    }
}
