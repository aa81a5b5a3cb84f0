//! Dual-mode field states and the ideal linear optics acting on them.
//!
//! A field is `e^{iφ}(c0, c1)ᵀ` in the (TE₀, TE₁) basis. Propagation phases
//! `β·z` are folded into the stored amplitudes, so the mode analyzer is always
//! the bare operator `[[0, e^{iθ}], [e^{−iθ}, 0]]`.

use num_complex::Complex64;

use crate::{Error, Result};

const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeState {
    pub c0: Complex64,
    pub c1: Complex64,
    /// Random global phase `φ` of the field, radians.
    pub global_phase: f64,
}

impl ModeState {
    /// Build a state whose amplitudes already satisfy `|c0|² + |c1|² = 1`.
    pub fn new(c0: Complex64, c1: Complex64, global_phase: f64) -> Result<Self> {
        let state = ModeState {
            c0,
            c1,
            global_phase,
        };
        let p = state.power();
        if (p - 1.0).abs() > NORM_TOL {
            return Err(Error::arg(format!("mode amplitudes have power {p}, expected 1")));
        }
        Ok(state)
    }

    /// Rescale arbitrary amplitudes to unit power.
    pub fn normalized(c0: Complex64, c1: Complex64, global_phase: f64) -> Result<Self> {
        let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::arg("cannot normalize a zero or non-finite mode state"));
        }
        Ok(ModeState {
            c0: c0 / norm,
            c1: c1 / norm,
            global_phase,
        })
    }

    /// `(TE₀ + TE₁)/√2` with the given global phase.
    pub fn equal_superposition(global_phase: f64) -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        ModeState {
            c0: h,
            c1: h,
            global_phase,
        }
    }

    /// Amplitudes `(c0, c1)` after free propagation over `spec`.
    pub fn from_propagation(
        c0: Complex64,
        c1: Complex64,
        global_phase: f64,
        spec: &PropagationSpec,
    ) -> Result<Self> {
        Ok(propagate_free(&ModeState::new(c0, c1, global_phase)?, spec))
    }

    pub fn power(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    /// Full TE₀ amplitude including the global phase.
    pub fn te0(&self) -> Complex64 {
        self.c0 * Complex64::cis(self.global_phase)
    }

    /// Full TE₁ amplitude including the global phase.
    pub fn te1(&self) -> Complex64 {
        self.c1 * Complex64::cis(self.global_phase)
    }

    /// Same field with a shifted global phase.
    pub fn with_global_phase(&self, global_phase: f64) -> Self {
        ModeState {
            global_phase,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationSpec {
    /// TE₀ propagation constant, rad/m.
    pub beta0: f64,
    /// TE₁ propagation constant, rad/m.
    pub beta1: f64,
    /// Distance, m.
    pub z: f64,
}

impl PropagationSpec {
    pub fn new(beta0: f64, beta1: f64, z: f64) -> Result<Self> {
        if !(beta1 < beta0) {
            return Err(Error::arg("TE₁ must have a smaller propagation constant than TE₀"));
        }
        if !(z >= 0.0) {
            return Err(Error::arg("propagation distance must be non-negative"));
        }
        Ok(PropagationSpec { beta0, beta1, z })
    }

    pub fn delta_beta(&self) -> f64 {
        self.beta1 - self.beta0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyzerSetting {
    /// Analyzer phase modulator setting, radians.
    pub theta: f64,
}

impl AnalyzerSetting {
    pub fn new(theta: f64) -> Self {
        AnalyzerSetting { theta }
    }
}

pub fn propagate_free(state: &ModeState, spec: &PropagationSpec) -> ModeState {
    ModeState {
        c0: state.c0 * Complex64::cis(spec.beta0 * spec.z),
        c1: state.c1 * Complex64::cis(spec.beta1 * spec.z),
        global_phase: state.global_phase,
    }
}

/// `⟨ψ|Â(θ)|ψ⟩ = 2·Re(c0* c1 e^{iθ})`. The global phase drops out.
pub fn analyzer_intensity_difference(state: &ModeState, setting: AnalyzerSetting) -> f64 {
    2.0 * (state.c0.conj() * state.c1 * Complex64::cis(setting.theta)).re
}

/// Ideal directional coupler: the two fields swap their TE₁ components.
///
/// Output `a′` is `e^{iφ_a}(c0ᵃ, c1ᵇ e^{iλ})` and `b′` is
/// `e^{iφ_b}(c0ᵇ, c1ᵃ e^{−iλ})` with `λ = φ_b − φ_a`. TE₀ picks up no
/// insertion phase. Total power over both outputs is conserved; each output
/// is individually normalized only when `|c1ᵃ| = |c1ᵇ|`.
pub fn coupler_exchange_pair(a: &ModeState, b: &ModeState) -> (ModeState, ModeState) {
    let lambda = b.global_phase - a.global_phase;
    let a_out = ModeState {
        c0: a.c0,
        c1: b.c1 * Complex64::cis(lambda),
        global_phase: a.global_phase,
    };
    let b_out = ModeState {
        c0: b.c0,
        c1: a.c1 * Complex64::cis(-lambda),
        global_phase: b.global_phase,
    };
    (a_out, b_out)
}

/// `N − 1` couplers between neighbours `(1,2), (2,3), …, (N−1,N)`.
///
/// The cascade cyclically permutes the TE₁ components: output `i` carries the
/// TE₁ of input `i+1` with phase `e^{iλ_i}`, and output `N` carries TE₁ of
/// input 1 with `e^{iλ_N}`, `λ_N = φ_1 − φ_N`.
pub fn chain_exchange(states: &[ModeState]) -> Result<Vec<ModeState>> {
    if states.len() < 2 {
        return Err(Error::arg(format!(
            "a coupler chain needs at least 2 fields, got {}",
            states.len()
        )));
    }
    let mut out = states.to_vec();
    for i in 0..out.len() - 1 {
        let (a, b) = coupler_exchange_pair(&out[i], &out[i + 1]);
        out[i] = a;
        out[i + 1] = b;
    }
    Ok(out)
}

/// Common phase shift `θ` on every TE₁ component.
pub fn apply_common_phase(states: &[ModeState], theta: f64) -> Vec<ModeState> {
    let rot = Complex64::cis(theta);
    states
        .iter()
        .map(|s| ModeState {
            c1: s.c1 * rot,
            ..*s
        })
        .collect()
}
