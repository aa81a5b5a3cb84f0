use num_complex::Complex64;

use super::{BpmGrid, ModeProfile, SlabGeometry};
use crate::{Error, Result};

/// Largest allowed `|n − n_ref|·k₀·dz` per step, rad.
pub const MAX_PHASE_PER_STEP: f64 = 0.5;

/// Complex `n²(x)` on the grid, absorbing layer included.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexProfile {
    pub n_squared: Vec<Complex64>,
}

impl IndexProfile {
    /// Identical slab cores centred at `centers`, cell-averaged so core edges
    /// need not fall on grid points.
    pub fn slabs(geom: &SlabGeometry, grid: &BpmGrid, centers: &[f64]) -> Self {
        let dx = grid.dx();
        let half = geom.core_width / 2.0;
        let core2 = geom.n_core * geom.n_core;
        let clad2 = geom.n_clad * geom.n_clad;
        let n_squared = grid
            .xs()
            .into_iter()
            .map(|x| {
                let fill: f64 = centers
                    .iter()
                    .map(|c| {
                        let lo = (x - dx / 2.0).max(c - half);
                        let hi = (x + dx / 2.0).min(c + half);
                        (hi - lo).max(0.0) / dx
                    })
                    .sum::<f64>()
                    .min(1.0);
                Complex64::new(clad2 + fill * (core2 - clad2), grid.absorption(x))
            })
            .collect();
        IndexProfile { n_squared }
    }

    pub fn len(&self) -> usize {
        self.n_squared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_squared.is_empty()
    }
}

/// Prefactored Crank–Nicolson stepper for a z-invariant index profile.
///
/// Marches `∂E/∂z = (i/2β_ref)[∂²E/∂x² + (k₀²n² − β_ref²)E]` with `E = 0`
/// outside the window.
#[derive(Clone, Debug)]
pub struct CrankNicolson {
    dz: f64,
    // explicit half-step: diagonal and off-diagonal
    rhs_diag: Vec<Complex64>,
    rhs_off: Complex64,
    // Thomas factors of the implicit half-step
    lhs_off: Complex64,
    upper: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl CrankNicolson {
    pub fn new(index: &IndexProfile, k0: f64, grid: &BpmGrid, dz: f64) -> Result<Self> {
        let nx = grid.nx;
        if index.len() != nx {
            return Err(Error::arg(format!(
                "index profile has {} points, grid has {nx}",
                index.len()
            )));
        }
        if !(dz > 0.0) {
            return Err(Error::arg("dz must be positive"));
        }
        let n_ref = grid.reference_index;
        let worst = index
            .n_squared
            .iter()
            .map(|n2| (n2.re.max(0.0).sqrt() - n_ref).abs())
            .fold(0.0, f64::max);
        if worst * k0 * dz > MAX_PHASE_PER_STEP {
            return Err(Error::Numerical(format!(
                "dz = {dz:.3e} m gives {:.3} rad per step (limit {MAX_PHASE_PER_STEP}); reduce dz",
                worst * k0 * dz
            )));
        }
        let beta = k0 * n_ref;
        let dx = grid.dx();
        let a = Complex64::new(0.0, dz / (4.0 * beta));
        let off = a / (dx * dx);
        let diag: Vec<Complex64> = index
            .n_squared
            .iter()
            .map(|n2| a * (k0 * k0 * n2 - beta * beta) - 2.0 * off)
            .collect();

        let one = Complex64::new(1.0, 0.0);
        let rhs_diag = diag.iter().map(|d| one + d).collect();
        let lhs_diag: Vec<Complex64> = diag.iter().map(|d| one - d).collect();
        let lhs_off = -off;
        let mut upper = vec![Complex64::new(0.0, 0.0); nx];
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); nx];
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..nx {
            let pivot = lhs_diag[i] - lhs_off * prev;
            inv_pivot[i] = one / pivot;
            upper[i] = lhs_off * inv_pivot[i];
            prev = upper[i];
        }
        Ok(CrankNicolson {
            dz,
            rhs_diag,
            rhs_off: off,
            lhs_off,
            upper,
            inv_pivot,
            scratch: vec![Complex64::new(0.0, 0.0); nx],
        })
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    /// Advance `field` by one step in place.
    pub fn step(&mut self, field: &mut [Complex64]) {
        let nx = field.len();
        let zero = Complex64::new(0.0, 0.0);
        let d = &mut self.scratch;
        let mut prev = zero;
        for i in 0..nx {
            let left = if i > 0 { field[i - 1] } else { zero };
            let right = if i + 1 < nx { field[i + 1] } else { zero };
            let rhs = self.rhs_diag[i] * field[i] + self.rhs_off * (left + right);
            d[i] = (rhs - self.lhs_off * prev) * self.inv_pivot[i];
            prev = d[i];
        }
        field[nx - 1] = d[nx - 1];
        for i in (0..nx - 1).rev() {
            field[i] = d[i] - self.upper[i] * field[i + 1];
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    pub field: Vec<Complex64>,
    /// `(z, field)` pairs, starting at `z = 0` and ending at the final plane.
    pub snapshots: Vec<(f64, Vec<Complex64>)>,
    /// Step actually used; `z_total` is split into equal steps no longer than `grid.dz`.
    pub dz: f64,
}

/// March `field` through `index` over `z_total`.
///
/// `snapshot_every = 0` disables snapshots.
pub fn bpm_propagate(
    field: &[Complex64],
    index: &IndexProfile,
    geom: &SlabGeometry,
    grid: &BpmGrid,
    z_total: f64,
    snapshot_every: usize,
) -> Result<Propagation> {
    if field.len() != grid.nx {
        return Err(Error::arg(format!("field has {} points, grid has {}", field.len(), grid.nx)));
    }
    if !(z_total > 0.0) {
        return Err(Error::arg("propagation length must be positive"));
    }
    if total_power(field, grid.dx()) == 0.0 {
        return Err(Error::arg("launch field is zero"));
    }
    let steps = (z_total / grid.dz - 1e-9).ceil().max(1.0) as usize;
    let dz = z_total / steps as f64;
    let mut stepper = CrankNicolson::new(index, geom.k0(), grid, dz)?;
    let mut e = field.to_vec();
    let mut snapshots = Vec::new();
    if snapshot_every > 0 {
        snapshots.push((0.0, e.clone()));
    }
    for s in 1..=steps {
        stepper.step(&mut e);
        if snapshot_every > 0 && (s % snapshot_every == 0 || s == steps) {
            snapshots.push((s as f64 * dz, e.clone()));
        }
    }
    Ok(Propagation { field: e, snapshots, dz })
}

/// Discrete projection `⟨mode, field⟩ = Σ f(x)·E(x)·dx`.
pub fn mode_overlap(field: &[Complex64], mode: &ModeProfile) -> Result<Complex64> {
    if field.len() != mode.samples.len() {
        return Err(Error::arg(format!(
            "field has {} points, mode has {}",
            field.len(),
            mode.samples.len()
        )));
    }
    let s: Complex64 = field.iter().zip(&mode.samples).map(|(e, f)| e * f).sum();
    Ok(s * mode.dx)
}

/// `Σ|E|²·dx`.
pub fn total_power(field: &[Complex64], dx: f64) -> f64 {
    field.iter().map(|e| e.norm_sqr()).sum::<f64>() * dx
}
