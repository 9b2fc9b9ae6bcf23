//! Two-photon qudit states in the OAM basis.
//!
//! The joint basis is indexed row-major as `i * d + j` where `i` (`j`) labels
//! the signal (idler) mode and the OAM value of index `i` is `i - floor(d/2)`
//! (for qutrits: indices 0, 1, 2 are l = -1, 0, +1). States produced by the
//! engineering pipeline use the correlated labeling `|l>|l>`; the mirror
//! relabeling that flips the idler sign (an extra reflection in the idler
//! path) is available as [`PureState::flip_idler`] /
//! [`DensityMatrix::flip_idler`].

use alloc::vec::Vec;
#[allow(unused_imports)] // trait needed for float math in no_std builds
use num_traits::Float;

use num_complex::Complex64;

use crate::linalg::{hermitian_eigen, CMat};

/// Errors from state construction.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StateError {
    #[error("amplitude vector length {len} is not a square of the arm dimension")]
    BadLength { len: usize },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("density matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("density matrix trace {trace:.6} is not 1")]
    BadTrace { trace: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// OAM value carried by basis index `i` in dimension `d`.
pub fn oam_of_index(i: usize, d: usize) -> i32 {
    i as i32 - (d / 2) as i32
}

/// Basis index for OAM `l` in dimension `d`, if inside the window.
pub fn index_of_oam(l: i32, d: usize) -> Option<usize> {
    let i = l + (d / 2) as i32;
    (0 <= i && i < d as i32).then_some(i as usize)
}

/// Pure two-qudit state (unit norm, `arm_dim^2` amplitudes).
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    arm_dim: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Build from joint amplitudes (length must be a perfect square of the
    /// arm dimension); normalizes.
    pub fn new(amplitudes: Vec<Complex64>, arm_dim: usize) -> Result<Self, StateError> {
        if amplitudes.len() != arm_dim * arm_dim {
            return Err(StateError::BadLength {
                len: amplitudes.len(),
            });
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(StateError::ZeroNorm);
        }
        let scale = 1.0 / norm_sq.sqrt();
        Ok(Self {
            arm_dim,
            amplitudes: amplitudes.into_iter().map(|a| a * scale).collect(),
        })
    }

    /// Maximally entangled state `sum_k |kk> / sqrt(d)`.
    pub fn mes(arm_dim: usize) -> Self {
        let mut amps = alloc::vec![Complex64::new(0.0, 0.0); arm_dim * arm_dim];
        let c = Complex64::new(1.0 / (arm_dim as f64).sqrt(), 0.0);
        for k in 0..arm_dim {
            amps[k * arm_dim + k] = c;
        }
        Self {
            arm_dim,
            amplitudes: amps,
        }
    }

    /// Qutrit MES with relative phases on the charge-0 and charge-2 pairs:
    /// `(|-1,-1> + e^{i theta0} |00> + e^{i theta2} |11>) / sqrt(3)`.
    pub fn mes3_with_phases(theta0: f64, theta2: f64) -> Self {
        PureState::mes(3).with_pair_phases(theta0, theta2)
    }

    pub fn arm_dim(&self) -> usize {
        self.arm_dim
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn component(&self, i: usize, j: usize) -> Complex64 {
        self.amplitudes[i * self.arm_dim + j]
    }

    /// Mirror relabeling of the idler arm: `|l>_B -> |-l>_B`.
    pub fn flip_idler(&self) -> Self {
        let d = self.arm_dim;
        let mut amps = alloc::vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                amps[i * d + (d - 1 - j)] = self.component(i, j);
            }
        }
        Self {
            arm_dim: d,
            amplitudes: amps,
        }
    }

    /// Multiply each joint component by a phase set by the total charge
    /// `L = l_A + l_B`: `L = 0` picks up `e^{i theta0}`, `L = 2` picks up
    /// `e^{i theta2}`, `L = -2` is the phase reference. Matches the transfer
    /// of pump phases onto the down-converted pairs.
    pub fn with_pair_phases(&self, theta0: f64, theta2: f64) -> Self {
        let d = self.arm_dim;
        let mut amps = self.amplitudes.clone();
        for i in 0..d {
            for j in 0..d {
                let total = oam_of_index(i, d) + oam_of_index(j, d);
                let phase = match total {
                    0 => theta0,
                    2 => theta2,
                    _ => 0.0,
                };
                if phase != 0.0 {
                    amps[i * d + j] *= Complex64::from_polar(1.0, phase);
                }
            }
        }
        Self {
            arm_dim: d,
            amplitudes: amps,
        }
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &PureState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Density matrix on the two-qudit space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    arm_dim: usize,
    mat: CMat,
}

impl DensityMatrix {
    /// Wrap a matrix, checking Hermiticity and unit trace.
    pub fn new(mat: CMat, arm_dim: usize) -> Result<Self, StateError> {
        if mat.dim() != arm_dim * arm_dim {
            return Err(StateError::DimensionMismatch {
                left: mat.dim(),
                right: arm_dim * arm_dim,
            });
        }
        let defect = mat.hermiticity_defect();
        if defect > 1e-12 {
            return Err(StateError::NotHermitian { defect });
        }
        let trace = mat.trace().re;
        if (trace - 1.0).abs() > 1e-12 {
            return Err(StateError::BadTrace { trace });
        }
        Ok(Self { arm_dim, mat })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self {
            arm_dim: psi.arm_dim(),
            mat: CMat::outer(psi.amplitudes()),
        }
    }

    pub fn maximally_mixed(arm_dim: usize) -> Self {
        let dim = arm_dim * arm_dim;
        Self {
            arm_dim,
            mat: CMat::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0)),
        }
    }

    /// White-noise family `rho_v = v |psi><psi| + (1 - v) I / d^2`.
    pub fn white_noise(psi: &PureState, visibility: f64) -> Self {
        let pure = CMat::outer(psi.amplitudes());
        let dim = psi.arm_dim() * psi.arm_dim();
        let mixed = CMat::identity(dim).scale(Complex64::new((1.0 - visibility) / dim as f64, 0.0));
        Self {
            arm_dim: psi.arm_dim(),
            mat: pure.scale(Complex64::new(visibility, 0.0)).add(&mixed),
        }
    }

    pub fn arm_dim(&self) -> usize {
        self.arm_dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.mat.mul(&self.mat).trace().re
    }

    /// Smallest eigenvalue; a valid state has this >= 0 up to rounding.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.mat).eigenvalues[0]
    }

    pub fn flip_idler(&self) -> Self {
        let d = self.arm_dim;
        let dim = d * d;
        let flip = |k: usize| -> usize {
            let (i, j) = (k / d, k % d);
            i * d + (d - 1 - j)
        };
        let mat = CMat::from_fn(dim, |r, c| self.mat[(flip(r), flip(c))]);
        Self { arm_dim: d, mat }
    }

    /// Conjugate by the diagonal pair-phase unitary of
    /// [`PureState::with_pair_phases`].
    pub fn with_pair_phases(&self, theta0: f64, theta2: f64) -> Self {
        let d = self.arm_dim;
        let dim = d * d;
        let phase_of = |k: usize| -> Complex64 {
            let total = oam_of_index(k / d, d) + oam_of_index(k % d, d);
            match total {
                0 => Complex64::from_polar(1.0, theta0),
                2 => Complex64::from_polar(1.0, theta2),
                _ => Complex64::new(1.0, 0.0),
            }
        };
        let mat = CMat::from_fn(dim, |r, c| phase_of(r) * self.mat[(r, c)] * phase_of(c).conj());
        Self { arm_dim: d, mat }
    }
}

/// A pure or mixed two-qudit state; measurement-side code accepts either.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl State {
    pub fn arm_dim(&self) -> usize {
        match self {
            State::Pure(p) => p.arm_dim(),
            State::Mixed(m) => m.arm_dim(),
        }
    }

    pub fn flip_idler(&self) -> Self {
        match self {
            State::Pure(p) => State::Pure(p.flip_idler()),
            State::Mixed(m) => State::Mixed(m.flip_idler()),
        }
    }

    pub fn with_pair_phases(&self, theta0: f64, theta2: f64) -> Self {
        match self {
            State::Pure(p) => State::Pure(p.with_pair_phases(theta0, theta2)),
            State::Mixed(m) => State::Mixed(m.with_pair_phases(theta0, theta2)),
        }
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        match self {
            State::Pure(p) => DensityMatrix::from_pure(p),
            State::Mixed(m) => m.clone(),
        }
    }
}

impl From<PureState> for State {
    fn from(p: PureState) -> Self {
        State::Pure(p)
    }
}

impl From<DensityMatrix> for State {
    fn from(m: DensityMatrix) -> Self {
        State::Mixed(m)
    }
}
