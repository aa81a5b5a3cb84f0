use num_complex::Complex64;

use crate::ensemble::PhaseDistribution;
use crate::optics::ModeState;
use crate::{Error, Result};

const TOL: f64 = 1e-12;

pub type StateVector4 = [Complex64; 4];
pub type Matrix2 = [[Complex64; 2]; 2];

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Two-field density matrix in the basis `(00, 01, 10, 11)`, first index the
/// TE order of field `a`, second of field `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix4 {
    entries: [[Complex64; 4]; 4],
}

impl DensityMatrix4 {
    /// Validates Hermiticity, unit trace and non-negative diagonal.
    pub fn from_entries(entries: [[Complex64; 4]; 4]) -> Result<Self> {
        let rho = DensityMatrix4 { entries };
        for i in 0..4 {
            if entries[i][i].im.abs() > TOL || entries[i][i].re < -TOL {
                return Err(Error::arg(format!("diagonal entry {i} is not a non-negative real")));
            }
            for j in 0..4 {
                if (entries[i][j] - entries[j][i].conj()).norm() > TOL {
                    return Err(Error::arg(format!("matrix is not Hermitian at ({i}, {j})")));
                }
            }
        }
        let tr = rho.trace();
        if (tr - 1.0).norm() > TOL {
            return Err(Error::arg(format!("trace is {tr}, expected 1")));
        }
        Ok(rho)
    }

    pub fn entries(&self) -> &[[Complex64; 4]; 4] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row][col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..4).map(|i| self.entries[i][i]).sum()
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix4) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += (self.entries[i][j] - other.entries[i][j]).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn max_entry_difference(&self, other: &DensityMatrix4) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                m = m.max((self.entries[i][j] - other.entries[i][j]).norm());
            }
        }
        m
    }

    /// `ρ_a ⊗ ρ_b`.
    pub fn kron(a: &Matrix2, b: &Matrix2) -> DensityMatrix4 {
        let mut entries = [[zero(); 4]; 4];
        for ia in 0..2 {
            for ib in 0..2 {
                for ja in 0..2 {
                    for jb in 0..2 {
                        entries[2 * ia + ib][2 * ja + jb] = a[ia][ja] * b[ib][jb];
                    }
                }
            }
        }
        DensityMatrix4 { entries }
    }

    /// Fully phase-averaged matrix of two equal superpositions after the coupler:
    /// `1/4` on the diagonal and on the `(00,11)` corners, zero elsewhere.
    pub fn phase_averaged_reference() -> DensityMatrix4 {
        let q = Complex64::new(0.25, 0.0);
        let mut entries = [[zero(); 4]; 4];
        for i in 0..4 {
            entries[i][i] = q;
        }
        entries[0][3] = q;
        entries[3][0] = q;
        DensityMatrix4 { entries }
    }

    /// Pure Bell state `(|00⟩ + |11⟩)/√2`.
    pub fn bell_phi_plus() -> DensityMatrix4 {
        let h = Complex64::new(0.5, 0.0);
        let mut entries = [[zero(); 4]; 4];
        for &i in &[0, 3] {
            for &j in &[0, 3] {
                entries[i][j] = h;
            }
        }
        DensityMatrix4 { entries }
    }

    pub(crate) fn zeros() -> DensityMatrix4 {
        DensityMatrix4 {
            entries: [[zero(); 4]; 4],
        }
    }

    pub(crate) fn add_outer(&mut self, v: &StateVector4) {
        for i in 0..4 {
            for j in 0..4 {
                self.entries[i][j] += v[i] * v[j].conj();
            }
        }
    }

    pub(crate) fn add_assign(&mut self, other: &DensityMatrix4) {
        for i in 0..4 {
            for j in 0..4 {
                self.entries[i][j] += other.entries[i][j];
            }
        }
    }

    pub(crate) fn scaled(&self, factor: f64) -> DensityMatrix4 {
        let mut entries = self.entries;
        entries.iter_mut().flatten().for_each(|e| *e *= factor);
        DensityMatrix4 { entries }
    }

    /// Linear combination `Σ wᵢ ρᵢ` without re-validation.
    pub fn combine(terms: &[(f64, &DensityMatrix4)]) -> DensityMatrix4 {
        let mut out = DensityMatrix4::zeros();
        for (w, rho) in terms {
            out.add_assign(&rho.scaled(*w));
        }
        out
    }
}

/// Tensor product of two fields including their global phases, in the
/// `(00, 01, 10, 11)` basis.
pub fn product_state(a: &ModeState, b: &ModeState) -> StateVector4 {
    let (a0, a1, b0, b1) = (a.te0(), a.te1(), b.te0(), b.te1());
    [a0 * b0, a0 * b1, a1 * b0, a1 * b1]
}

/// `|v⟩⟨v|` for a unit vector.
pub fn density_from_vector(v: &StateVector4) -> Result<DensityMatrix4> {
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > TOL {
        return Err(Error::arg(format!("state vector has squared norm {norm}, expected 1")));
    }
    let mut rho = DensityMatrix4::zeros();
    rho.add_outer(v);
    Ok(rho)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedDensity {
    pub matrix: DensityMatrix4,
    /// True when both first and second harmonics of the phase law vanish, i.e.
    /// every `λ`-dependent entry averages out. False e.g. for two-level phases,
    /// where `e^{±2iλ} = 1` survives.
    pub fully_reduced: bool,
}

/// Exact ensemble average of the post-coupler density matrix of two fields
/// with mode coefficients `a = (c0ᵃ, c1ᵃ)` and `b = (c0ᵇ, c1ᵇ)`.
///
/// Entry `(i, j)` carries `e^{i(h_i − h_j)λ}` with `h = (0, −1, 1, 0)`, which
/// averages to the harmonic moment of the phase law.
pub fn ensemble_reduce_product(
    a: (Complex64, Complex64),
    b: (Complex64, Complex64),
    dist: PhaseDistribution,
) -> Result<ReducedDensity> {
    dist.validate()?;
    let weights = [a.0 * b.0, a.0 * a.1, b.1 * b.0, a.1 * b.1];
    let harmonics: [i64; 4] = [0, -1, 1, 0];
    let mut entries = [[zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            entries[i][j] = weights[i] * weights[j].conj() * dist.mean_exp(harmonics[i] - harmonics[j]);
        }
    }
    let fully_reduced = dist.mean_exp(1) == zero() && dist.mean_exp(2) == zero();
    Ok(ReducedDensity {
        matrix: DensityMatrix4::from_entries(entries)?,
        fully_reduced,
    })
}

/// Ensemble-reduced matrix for equal `1/√2` superpositions.
pub fn ensemble_reduce_density(dist: PhaseDistribution) -> Result<ReducedDensity> {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ensemble_reduce_product((h, h), (h, h), dist)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Reduced 2×2 matrix of the kept subsystem.
pub fn partial_trace(rho: &DensityMatrix4, keep: Subsystem) -> Matrix2 {
    let mut out = [[zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                out[i][j] += match keep {
                    Subsystem::A => rho.entries[2 * i + k][2 * j + k],
                    Subsystem::B => rho.entries[2 * k + i][2 * k + j],
                };
            }
        }
    }
    out
}

/// Frobenius distance between `ρ` and `Tr_b(ρ) ⊗ Tr_a(ρ)`.
pub fn inseparability_gap(rho: &DensityMatrix4) -> f64 {
    let rho_a = partial_trace(rho, Subsystem::A);
    let rho_b = partial_trace(rho, Subsystem::B);
    rho.frobenius_distance(&DensityMatrix4::kron(&rho_a, &rho_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::coupler_exchange_pair;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn post_coupler(phi_a: f64, phi_b: f64) -> StateVector4 {
        let (a, b) = coupler_exchange_pair(
            &ModeState::equal_superposition(phi_a),
            &ModeState::equal_superposition(phi_b),
        );
        product_state(&a, &b)
    }

    /// Closed-form pure-state matrix with entries `e^{±iλ}`, `e^{±2iλ}`, 1 over 4.
    fn closed_form(lambda: f64) -> [[Complex64; 4]; 4] {
        let e = |m: f64| Complex64::cis(m * lambda) / 4.0;
        [
            [e(0.0), e(1.0), e(-1.0), e(0.0)],
            [e(-1.0), e(0.0), e(-2.0), e(-1.0)],
            [e(1.0), e(2.0), e(0.0), e(1.0)],
            [e(0.0), e(1.0), e(-1.0), e(0.0)],
        ]
    }

    #[test]
    fn product_state_equal_phases() {
        let v = post_coupler(0.7, 0.7);
        let g = Complex64::cis(1.4);
        for x in v {
            assert!((x - g * 0.5).norm() < 1e-12);
        }
    }

    #[test]
    fn product_state_general_lambda() {
        let (pa, pb) = (0.2, 1.3);
        let lambda = pb - pa;
        let v = post_coupler(pa, pb);
        let g = Complex64::cis(pa + pb) * 0.5;
        let expected = [g, g * Complex64::cis(-lambda), g * Complex64::cis(lambda), g];
        for (x, y) in v.iter().zip(expected) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn product_of_pure_te0() {
        let te0 = ModeState::new(c(1.0, 0.0), c(0.0, 0.0), 0.0).unwrap();
        let v = product_state(&te0, &te0);
        assert_eq!(v, [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let rho = density_from_vector(&v).unwrap();
        let rb = partial_trace(&rho, Subsystem::B);
        assert_eq!(rb, [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
        assert!(inseparability_gap(&rho) < 1e-15);
    }

    #[test]
    fn pure_density_matches_closed_form() {
        for lambda in [0.0, PI / 3.0, 2.1, -0.4] {
            let rho = density_from_vector(&post_coupler(0.5, 0.5 + lambda)).unwrap();
            let expected = closed_form(lambda);
            for i in 0..4 {
                for j in 0..4 {
                    assert!((rho.get(i, j) - expected[i][j]).norm() < 1e-12, "λ={lambda} ({i},{j})");
                }
            }
            assert!((rho.trace() - 1.0).norm() < 1e-12);
        }
        let rho0 = density_from_vector(&post_coupler(1.0, 1.0)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho0.get(i, j) - 0.25).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn unnormalized_vector_rejected() {
        assert!(density_from_vector(&[c(1.0, 0.0); 4]).is_err());
    }

    #[test]
    fn continuous_and_four_level_reduce_fully() {
        let reference = DensityMatrix4::phase_averaged_reference();
        for dist in [PhaseDistribution::ContinuousUniform, PhaseDistribution::discrete(4).unwrap()] {
            let r = ensemble_reduce_density(dist).unwrap();
            assert!(r.fully_reduced);
            assert!(r.matrix.max_entry_difference(&reference) < 1e-15);
        }
    }

    #[test]
    fn two_level_phases_keep_second_harmonic() {
        let r = ensemble_reduce_density(PhaseDistribution::discrete(2).unwrap()).unwrap();
        assert!(!r.fully_reduced);
        // e^{±iλ} vanish, e^{±2iλ} = 1 survive
        assert!((r.matrix.get(1, 2) - 0.25).norm() < 1e-15);
        assert!((r.matrix.get(2, 1) - 0.25).norm() < 1e-15);
        assert!(r.matrix.get(0, 1).norm() < 1e-15);
        let r3 = ensemble_reduce_density(PhaseDistribution::discrete(3).unwrap()).unwrap();
        assert!(r3.fully_reduced);
    }

    #[test]
    fn reduced_matrix_partial_traces_and_gap() {
        let rho = DensityMatrix4::phase_averaged_reference();
        let half = [[c(0.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]];
        assert_eq!(partial_trace(&rho, Subsystem::A), half);
        assert_eq!(partial_trace(&rho, Subsystem::B), half);
        assert!((inseparability_gap(&rho) - 2f64.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_matrix_is_half_bell_plus_quarter_mixed() {
        let mut mixed = DensityMatrix4::zeros();
        mixed.entries[1][1] = c(1.0, 0.0);
        mixed.entries[2][2] = c(1.0, 0.0);
        let sum = DensityMatrix4::combine(&[(0.5, &DensityMatrix4::bell_phi_plus()), (0.25, &mixed)]);
        let reduced = ensemble_reduce_density(PhaseDistribution::ContinuousUniform).unwrap();
        assert!(sum.max_entry_difference(&reduced.matrix) < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let mut e = *DensityMatrix4::phase_averaged_reference().entries();
        e[0][1] = c(0.1, 0.1);
        assert!(DensityMatrix4::from_entries(e).is_err());
        let mut e = *DensityMatrix4::phase_averaged_reference().entries();
        e[0][0] = c(0.5, 0.0);
        assert!(DensityMatrix4::from_entries(e).is_err());
    }

    #[test]
    fn partial_trace_has_unit_trace() {
        for lambda in [0.3, 1.9, 4.4] {
            let rho = density_from_vector(&post_coupler(0.0, lambda)).unwrap();
            for keep in [Subsystem::A, Subsystem::B] {
                let m = partial_trace(&rho, keep);
                assert!((m[0][0] + m[1][1] - 1.0).norm() < 1e-12);
                assert!((m[0][1] - m[1][0].conj()).norm() < 1e-12);
            }
            // a single realization is a product state
            assert!(inseparability_gap(&rho) < 1e-12);
        }
    }
}
