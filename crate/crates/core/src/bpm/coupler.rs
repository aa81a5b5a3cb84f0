use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{
    bpm_propagate, guided_modes, mode_overlap, total_power, BpmGrid, IndexProfile, ModeProfile, SlabGeometry,
    SlabMode,
};
use crate::{Error, Result};

/// Largest predicted TE₀ crosstalk for a design to count as feasible.
pub const DEFAULT_CROSSTALK_THRESHOLD: f64 = 0.01;

const QUADRATURE_INTERVALS: usize = 4000;

/// Edge-to-edge core separations to scan, m.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for GapRange {
    fn default() -> Self {
        GapRange {
            min: 3e-6,
            max: 9e-6,
            step: 0.5e-6,
        }
    }
}

impl GapRange {
    pub fn gaps(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max >= self.min && self.step > 0.0) {
            return Err(Error::arg(format!(
                "invalid gap range {}..{} step {}",
                self.min, self.max, self.step
            )));
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.min + i as f64 * self.step).collect())
    }
}

/// Core centre offset `±(d + gap)/2` of the two arms.
pub fn arm_offset(geom: &SlabGeometry, gap: f64) -> f64 {
    0.5 * (geom.core_width + gap)
}

/// Coupled-mode coefficient `κ = (k₀²/2β)∫_core A (n_core² − n_clad²) f_A f_B dx`
/// between identical guides, from the isolated-guide mode. Returns `|κ|`, 1/m.
pub fn coupling_coefficient(mode: &SlabMode, geom: &SlabGeometry, gap: f64) -> f64 {
    let s = arm_offset(geom, gap);
    let half = geom.core_width / 2.0;
    let (a, b) = (-s - half, -s + half);
    let h = (b - a) / QUADRATURE_INTERVALS as f64;
    let f = |x: f64| mode.eval(x, -s) * mode.eval(x, s);
    let mut sum = f(a) + f(b);
    for i in 1..QUADRATURE_INTERVALS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    let overlap = sum * h / 3.0;
    let k0 = geom.k0();
    let dn2 = geom.n_core * geom.n_core - geom.n_clad * geom.n_clad;
    (k0 * k0 / (2.0 * mode.beta) * dn2 * overlap).abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplerDesign {
    /// Edge-to-edge core separation, m.
    pub gap: f64,
    /// Coupling length `π/(2κ₁)`, m.
    pub length: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    /// Predicted `sin²(κ₁L)`.
    pub te1_transfer: f64,
    /// Predicted `sin²(κ₀L)`.
    pub te0_crosstalk: f64,
    pub feasible: bool,
}

/// Pick the gap minimizing predicted TE₀ crosstalk at full TE₁ transfer.
///
/// An infeasible best design is returned with `feasible = false`.
pub fn design_coupler(geom: &SlabGeometry, gaps: &GapRange, crosstalk_threshold: f64) -> Result<CouplerDesign> {
    let modes = guided_modes(geom)?;
    if modes.len() != 2 {
        return Err(Error::arg(format!(
            "coupler design needs a guide with exactly TE0 and TE1, this one guides {} modes (V = {:.3})",
            modes.len(),
            geom.v_number()
        )));
    }
    let candidates: Vec<CouplerDesign> = gaps
        .gaps()?
        .par_iter()
        .map(|&gap| {
            let kappa0 = coupling_coefficient(&modes[0], geom, gap);
            let kappa1 = coupling_coefficient(&modes[1], geom, gap);
            let length = FRAC_PI_2 / kappa1;
            let te0_crosstalk = (kappa0 * length).sin().powi(2);
            CouplerDesign {
                gap,
                length,
                kappa0,
                kappa1,
                te1_transfer: (kappa1 * length).sin().powi(2),
                te0_crosstalk,
                feasible: te0_crosstalk <= crosstalk_threshold,
            }
        })
        .collect();
    candidates
        .into_iter()
        .filter(|d| d.kappa1.is_finite() && d.kappa1 > 0.0)
        .min_by(|a, b| a.te0_crosstalk.total_cmp(&b.te0_crosstalk))
        .ok_or_else(|| Error::Numerical("no gap gives a finite coupling coefficient".into()))
}

/// Field launched into arm A.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Launch {
    /// `(TE₀ + TE₁)/√2`.
    #[default]
    Mixed,
    Te0,
    Te1,
}

impl Launch {
    fn amplitudes(self) -> (f64, f64) {
        match self {
            Launch::Mixed => (0.5f64.sqrt(), 0.5f64.sqrt()),
            Launch::Te0 => (1.0, 0.0),
            Launch::Te1 => (0.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Launch::Mixed => "mixed",
            Launch::Te0 => "te0",
            Launch::Te1 => "te1",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "mixed" => Some(Launch::Mixed),
            "te0" => Some(Launch::Te0),
            "te1" => Some(Launch::Te1),
            _ => None,
        }
    }
}

/// Powers projected on each arm's isolated-guide modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModalPowers {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub total: f64,
}

impl ModalPowers {
    /// Project `field` on `[A TE₀, A TE₁, B TE₀, B TE₁]` from [`arm_modes`].
    pub fn measure(field: &[Complex64], arms: &[ModeProfile; 4], dx: f64) -> Result<Self> {
        let p = |m: &ModeProfile| mode_overlap(field, m).map(|c| c.norm_sqr());
        Ok(ModalPowers {
            a0: p(&arms[0])?,
            a1: p(&arms[1])?,
            b0: p(&arms[2])?,
            b1: p(&arms[3])?,
            total: total_power(field, dx),
        })
    }

    /// TE₀ share of arm A's modal power.
    pub fn arm_a_purity(&self) -> f64 {
        self.a0 / (self.a0 + self.a1)
    }

    /// TE₁ share of arm B's modal power.
    pub fn arm_b_purity(&self) -> f64 {
        self.b1 / (self.b0 + self.b1)
    }

    pub fn arm_a(&self) -> f64 {
        self.a0 + self.a1
    }

    pub fn arm_b(&self) -> f64 {
        self.b0 + self.b1
    }
}

#[derive(Clone, Debug)]
pub struct Fig1Result {
    pub design: CouplerDesign,
    pub grid: BpmGrid,
    pub launch: Launch,
    /// Snapshot planes, m.
    pub z: Vec<f64>,
    pub powers: Vec<ModalPowers>,
    /// `|E|²` per snapshot.
    pub intensity: Vec<Vec<f64>>,
    /// Final TE₁ power in arm B over launched TE₁ power; `None` without TE₁ input.
    /// With a mixed launch this includes interference with the TE₀ share.
    pub te1_transfer: Option<f64>,
    /// Final TE₀ power in arm B over launched TE₀ power; `None` without TE₀ input.
    pub te0_crosstalk: Option<f64>,
    pub output: ModalPowers,
    /// Final field, for reciprocity checks.
    pub field: Vec<Complex64>,
}

/// Modes of both arms on `grid`: `[A TE₀, A TE₁, B TE₀, B TE₁]`.
pub fn arm_modes(geom: &SlabGeometry, grid: &BpmGrid, gap: f64) -> Result<[ModeProfile; 4]> {
    let modes = guided_modes(geom)?;
    if modes.len() < 2 {
        return Err(Error::arg("guide does not support TE1"));
    }
    let s = arm_offset(geom, gap);
    Ok([
        modes[0].sample(grid, -s),
        modes[1].sample(grid, -s),
        modes[0].sample(grid, s),
        modes[1].sample(grid, s),
    ])
}

/// Grid covering both arms of a design.
pub fn coupler_grid(geom: &SlabGeometry, design: &CouplerDesign, nx: usize, dz: f64) -> Result<BpmGrid> {
    BpmGrid::covering(geom, arm_offset(geom, design.gap) + geom.core_width / 2.0, nx, dz)
}

/// Propagate `field` through the two-arm coupler of `design` over its length.
pub fn propagate_coupler(
    field: &[Complex64],
    design: &CouplerDesign,
    geom: &SlabGeometry,
    grid: &BpmGrid,
    snapshot_every: usize,
) -> Result<super::Propagation> {
    let s = arm_offset(geom, design.gap);
    let index = IndexProfile::slabs(geom, grid, &[-s, s]);
    bpm_propagate(field, &index, geom, grid, design.length, snapshot_every)
}

/// Full BPM run of a designed coupler with `launch` in arm A.
///
/// `snapshots` is the approximate number of recorded planes after the launch.
pub fn simulate_fig1(
    design: &CouplerDesign,
    geom: &SlabGeometry,
    nx: usize,
    dz: f64,
    snapshots: usize,
    launch: Launch,
) -> Result<Fig1Result> {
    if !design.feasible {
        return Err(Error::Infeasible(format!(
            "design at gap {:.3e} m predicts TE0 crosstalk {:.4}; widen the gap range",
            design.gap, design.te0_crosstalk
        )));
    }
    let grid = coupler_grid(geom, design, nx, dz)?;
    let arms = arm_modes(geom, &grid, design.gap)?;
    let (c0, c1) = launch.amplitudes();
    let input: Vec<Complex64> = (0..grid.nx)
        .map(|i| Complex64::new(c0 * arms[0].samples[i] + c1 * arms[1].samples[i], 0.0))
        .collect();
    let steps = (design.length / grid.dz).ceil().max(1.0) as usize;
    let every = (steps / snapshots.max(1)).max(1);
    let run = propagate_coupler(&input, design, geom, &grid, every)?;
    let dx = grid.dx();
    let mut z = Vec::with_capacity(run.snapshots.len());
    let mut powers = Vec::with_capacity(run.snapshots.len());
    let mut intensity = Vec::with_capacity(run.snapshots.len());
    for (zi, f) in &run.snapshots {
        z.push(*zi);
        powers.push(ModalPowers::measure(f, &arms, dx)?);
        intensity.push(f.iter().map(|e| e.norm_sqr()).collect());
    }
    let start = ModalPowers::measure(&input, &arms, dx)?;
    let output = ModalPowers::measure(&run.field, &arms, dx)?;
    let ratio = |num: f64, den: f64| (den > 1e-12).then(|| num / den);
    Ok(Fig1Result {
        design: *design,
        grid,
        launch,
        z,
        powers,
        intensity,
        te1_transfer: ratio(output.b1, start.a1),
        te0_crosstalk: ratio(output.b0, start.a0),
        output,
        field: run.field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_range_enumerates_inclusive() {
        let g = GapRange::default().gaps().unwrap();
        assert_eq!(g.len(), 13);
        assert!((g[12] - 9e-6).abs() < 1e-15);
        assert!(GapRange { min: 1e-6, max: 0.5e-6, step: 1e-7 }.gaps().is_err());
    }

    // Frozen from an adaptive-quadrature oracle (tan/cot dispersion, brentq roots).
    const ORACLE: [(f64, [[f64; 3]; 2]); 4] = [
        (1.8, [[2146.013488105161, 379.21147302675246, 37.60222091928686], [1667.546564841835, 1115.438322863481, 652.5328046713732]]),
        (2.2, [[1480.8960045826855, 241.12855244900118, 21.439471514748362], [3416.9427243392824, 1440.5101604074712, 455.35959784308255]]),
        (2.5, [[1145.6209666550724, 178.59021649123062, 14.983500188181727], [3391.0429994264414, 1137.4432099279927, 265.0889490769164]]),
        (3.0, [[776.000196363088, 114.88675107187754, 8.998030008084706], [2728.9802967879723, 708.0332459974476, 117.16322517212521]]),
    ];

    #[test]
    fn coupling_coefficients_match_oracle() {
        for (v, table) in ORACLE {
            let geom = SlabGeometry::with_v_number(1.46, 1.45, 1.55e-6, v).unwrap();
            let modes = guided_modes(&geom).unwrap();
            for (m, row) in table.iter().enumerate() {
                for (gap, expected) in [2e-6, 5e-6, 9e-6].into_iter().zip(row) {
                    let got = coupling_coefficient(&modes[m], &geom, gap);
                    assert!((got / expected - 1.0).abs() < 1e-8, "V={v} m={m} gap={gap}: {got}");
                }
            }
        }
    }

    #[test]
    fn higher_mode_couples_more_strongly() {
        for (v, table) in ORACLE {
            for g in 0..3 {
                let (k0, k1) = (table[0][g], table[1][g]);
                if v >= 2.2 || g > 0 {
                    assert!(k1 > k0 && k0 > 0.0);
                }
            }
        }
        // close to TE1 cutoff with nearly touching cores the ordering flips
        let geom = SlabGeometry::with_v_number(1.46, 1.45, 1.55e-6, 1.8).unwrap();
        let modes = guided_modes(&geom).unwrap();
        assert!(coupling_coefficient(&modes[1], &geom, 2e-6) < coupling_coefficient(&modes[0], &geom, 2e-6));
    }

    // Closed form for the even mode: the tail of B is C·e^{-γ(s-x)} inside core A.
    #[test]
    fn even_overlap_matches_closed_form() {
        let geom = SlabGeometry::telecom_default();
        let m = guided_modes(&geom).unwrap()[0];
        let gap = 6e-6;
        let (d, a) = (geom.core_width, geom.core_width / 2.0);
        let (k, g) = (m.kappa, m.gamma);
        let norm2 = a + (k * d).sin() / (2.0 * k) + (k * a).cos().powi(2) / g;
        // ∫_{-a}^{a} cos(κu)·e^{γu} du, times the tail amplitude cos(κa)e^{-γ·gap}
        let i = ((g * a).exp() * (g * (k * a).cos() + k * (k * a).sin())
            - (-g * a).exp() * (g * (k * a).cos() - k * (k * a).sin()))
            / (g * g + k * k);
        let overlap = (k * a).cos() * (-g * (gap + a)).exp() * i / norm2;
        let k0 = geom.k0();
        let expected = k0 * k0 / (2.0 * m.beta) * (1.46f64.powi(2) - 1.45f64.powi(2)) * overlap;
        let got = coupling_coefficient(&m, &geom, gap);
        assert!((got / expected - 1.0).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn default_design_is_feasible() {
        let geom = SlabGeometry::telecom_default();
        let d = design_coupler(&geom, &GapRange::default(), DEFAULT_CROSSTALK_THRESHOLD).unwrap();
        assert!(d.feasible);
        assert!((d.te1_transfer - 1.0).abs() < 1e-12);
        assert!(d.kappa1 > d.kappa0);
        assert!(d.te0_crosstalk <= 0.01);
        assert!((d.length - FRAC_PI_2 / d.kappa1).abs() < 1e-15);
    }

    #[test]
    fn narrow_range_is_flagged_and_refused() {
        let geom = SlabGeometry::telecom_default();
        let range = GapRange { min: 2e-6, max: 3e-6, step: 0.5e-6 };
        let d = design_coupler(&geom, &range, DEFAULT_CROSSTALK_THRESHOLD).unwrap();
        assert!(!d.feasible);
        assert!(matches!(
            simulate_fig1(&d, &geom, 256, 5e-6, 4, Launch::Mixed),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn three_mode_guide_rejected() {
        let geom = SlabGeometry::with_v_number(1.46, 1.45, 1.55e-6, 3.5).unwrap();
        assert!(design_coupler(&geom, &GapRange::default(), 0.01).is_err());
    }

    #[test]
    fn time_reversed_run_returns_to_arm_a() {
        let geom = SlabGeometry::telecom_default();
        let d = design_coupler(&geom, &GapRange::default(), DEFAULT_CROSSTALK_THRESHOLD).unwrap();
        let fwd = simulate_fig1(&d, &geom, 512, 5e-6, 1, Launch::Mixed).unwrap();
        let back: Vec<Complex64> = fwd.field.iter().map(|c| c.conj()).collect();
        let ret = propagate_coupler(&back, &d, &geom, &fwd.grid, 0).unwrap();
        let ret: Vec<Complex64> = ret.field.iter().map(|c| c.conj()).collect();
        let arms = arm_modes(&geom, &fwd.grid, d.gap).unwrap();
        let p = ModalPowers::measure(&ret, &arms, fwd.grid.dx()).unwrap();
        assert!((p.a0 - 0.5).abs() < 1e-2 && (p.a1 - 0.5).abs() < 1e-2, "{p:?}");
        assert!(p.b0 < 1e-2 && p.b1 < 1e-2);
    }
}
