//! Inverse pump design: find pump coefficients so that the down-converted
//! state restricted to a target OAM subspace is a chosen entangled state.
//!
//! OAM conservation decouples the problem. Each target pair `(l_s, l_i)` is
//! fed by exactly one pump charge `L = l_s + l_i`, so the solve is one scalar
//! division per pair: the pump magnitude comes from the pair's azimuthal
//! marginal under a unit pump (the quantity whose ratios the engineering
//! controls), and the pump phase from the fundamental-radial-mode amplitude
//! that single-mode-fiber collection actually projects onto.

use alloc::vec::Vec;
#[allow(unused_imports)] // trait needed for float math in no_std builds
use num_traits::Float;

use num_complex::Complex64;

use crate::qstate::{index_of_oam, PureState};
use crate::spectrum::{
    spectrum_for_pump, BiphotonAmplitudes, CrystalConfig, ModePair, ModeWindow, PumpSpec,
    QuadratureSettings, SpectrumError,
};

/// Desired state on an ordered list of signal/idler OAM pairs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetState {
    pairs: Vec<(i32, i32)>,
    coefficients: Vec<Complex64>,
}

impl TargetState {
    /// Pairs must be distinct and the coefficients must have nonzero total
    /// weight; coefficients are normalized.
    pub fn new(
        pairs: Vec<(i32, i32)>,
        coefficients: Vec<Complex64>,
    ) -> Result<Self, EngineeringError> {
        if pairs.len() != coefficients.len() || pairs.is_empty() {
            return Err(EngineeringError::InvalidTarget);
        }
        for (i, p) in pairs.iter().enumerate() {
            if pairs[i + 1..].contains(p) {
                return Err(EngineeringError::InvalidTarget);
            }
        }
        let norm_sq: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(EngineeringError::InvalidTarget);
        }
        let s = 1.0 / norm_sq.sqrt();
        Ok(Self {
            pairs,
            coefficients: coefficients.into_iter().map(|c| c * s).collect(),
        })
    }

    /// Uniform three-dimensional maximally entangled target on
    /// `(-1,-1), (0,0), (1,1)`.
    pub fn mes3() -> Self {
        let c = Complex64::new(1.0, 0.0);
        Self::new(
            alloc::vec![(-1, -1), (0, 0), (1, 1)],
            alloc::vec![c, c, c],
        )
        .expect("static target is valid")
    }

    pub fn pairs(&self) -> &[(i32, i32)] {
        &self.pairs
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }
}

/// Subspace state extracted from a spectrum: unit-norm coefficients over the
/// target pairs at `p_s = p_i = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceState {
    pairs: Vec<(i32, i32)>,
    coefficients: Vec<Complex64>,
}

impl SubspaceState {
    pub fn pairs(&self) -> &[(i32, i32)] {
        &self.pairs
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Rotate the global phase so the first component with nonnegligible
    /// magnitude is real and positive; phase comparisons use this gauge.
    pub fn phase_normalized(&self) -> Self {
        let reference = self
            .coefficients
            .iter()
            .find(|c| c.norm() > 1e-12)
            .copied()
            .unwrap_or(Complex64::new(1.0, 0.0));
        let phase = reference / reference.norm();
        Self {
            pairs: self.pairs.clone(),
            coefficients: self.coefficients.iter().map(|c| c / phase).collect(),
        }
    }

    /// Embed into the two-qutrit space with correlated labels. All pairs
    /// must have `|l| <= 1` on both arms.
    pub fn to_two_qutrit(&self) -> Result<PureState, EngineeringError> {
        let mut amps = alloc::vec![Complex64::new(0.0, 0.0); 9];
        for (&(ls, li), &c) in self.pairs.iter().zip(&self.coefficients) {
            let (i, j) = match (index_of_oam(ls, 3), index_of_oam(li, 3)) {
                (Some(i), Some(j)) => (i, j),
                _ => return Err(EngineeringError::PairOutsideQutrit { pair: (ls, li) }),
            };
            amps[i * 3 + j] = c;
        }
        PureState::new(amps, 3).map_err(|_| EngineeringError::InvalidTarget)
    }
}

/// Output of the pump solve.
#[derive(Debug, Clone)]
pub struct EngineeringResult {
    /// Solved pump superposition (unit power).
    pub pump: PumpSpec,
    /// Forward-modeled subspace state at fundamental-radial-mode collection.
    pub achieved: SubspaceState,
    /// Azimuthal-marginal magnitudes (square roots of the pair marginals,
    /// renormalized over the subspace); these match the target ratios
    /// exactly up to quadrature error.
    pub achieved_marginal_magnitudes: Vec<f64>,
    /// Probability outside the subspace at `p_s = p_i = 0` collection.
    pub leakage: f64,
    /// Probability outside the subspace counting every radial order.
    pub leakage_all_p: f64,
    /// The forward-modeled spectrum the quantities above were read from.
    pub spectrum: BiphotonAmplitudes,
}

/// Errors from the engineering module.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineeringError {
    #[error("target is empty, has duplicate pairs, mismatched lengths, or zero norm")]
    InvalidTarget,
    #[error("target pair ({},{}) requires pump charge {charge}, which is not available in the ansatz", pair.0, pair.1)]
    UnreachableTarget { pair: (i32, i32), charge: i32 },
    #[error("per-unit-pump amplitude at pair ({},{}) is below 1e-14; target unreachable at this geometry", pair.0, pair.1)]
    DegenerateCoupling { pair: (i32, i32) },
    #[error("pump term with charge {l} is missing")]
    MissingTerm { l: i32 },
    #[error("in-subspace probability below 1e-14")]
    ZeroSubspaceWeight,
    #[error("window l_max {l_max} too small; need at least 1 + max pump charge = {needed}")]
    WindowTooSmall { l_max: u32, needed: u32 },
    #[error("target pair ({},{}) lies outside the qutrit window", pair.0, pair.1)]
    PairOutsideQutrit { pair: (i32, i32) },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Solve for pump coefficients that realize `target` in its subspace, using
/// the ansatz of one pump charge per target pair (`L = l_s + l_i`).
///
/// Magnitudes are set from the per-unit-pump azimuthal marginals, phases
/// from the per-unit-pump `p = 0` amplitudes, so that after the forward
/// model both the pair marginals and the fundamental-mode phases match the
/// target.
pub fn solve_pump_for_target(
    target: &TargetState,
    crystal: &CrystalConfig,
    window: &ModeWindow,
    quad: &QuadratureSettings,
) -> Result<EngineeringResult, EngineeringError> {
    // ansatz charges; duplicates mean two pairs would share one knob
    let charges: Vec<i32> = target.pairs().iter().map(|&(ls, li)| ls + li).collect();
    for (i, &c) in charges.iter().enumerate() {
        if charges[i + 1..].contains(&c) {
            return Err(EngineeringError::UnreachableTarget {
                pair: target.pairs()[i],
                charge: c,
            });
        }
    }
    let needed = charges
        .iter()
        .map(|c| c.unsigned_abs())
        .chain(
            target
                .pairs()
                .iter()
                .flat_map(|&(a, b)| [a.unsigned_abs(), b.unsigned_abs()]),
        )
        .max()
        .unwrap_or(0);
    let needed = needed.max(1 + charges.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0) / 2);
    if window.l_max < needed {
        return Err(EngineeringError::WindowTooSmall {
            l_max: window.l_max,
            needed,
        });
    }

    let mut pump_terms: Vec<(i32, Complex64)> = Vec::new();
    for ((&pair, &t_k), &charge) in target
        .pairs()
        .iter()
        .zip(target.coefficients())
        .zip(&charges)
    {
        if t_k.norm() == 0.0 {
            continue;
        }
        let unit = spectrum_for_pump(&PumpSpec::single(charge), crystal, window, quad)?;
        let scale = unit.normalization();
        let marginal = unit
            .azimuthal_marginal()
            .get(&pair)
            .copied()
            .unwrap_or(0.0)
            * scale
            * scale;
        let p0 = unit.get(pair_p0(pair)) * scale;
        if marginal.sqrt() < 1e-14 || p0.norm() < 1e-14 {
            return Err(EngineeringError::DegenerateCoupling { pair });
        }
        let magnitude = t_k.norm() / marginal.sqrt();
        let phase = t_k.arg() - p0.arg();
        pump_terms.push((charge, Complex64::from_polar(magnitude, phase)));
    }
    let pump = PumpSpec::new(pump_terms)?;

    let spectrum = spectrum_for_pump(&pump, crystal, window, quad)?;
    let (achieved, leakage) = subspace_state(&spectrum, target)?;
    let marginal = spectrum.azimuthal_marginal();
    let sub_marginals: Vec<f64> = target
        .pairs()
        .iter()
        .map(|p| marginal.get(p).copied().unwrap_or(0.0))
        .collect();
    let sub_total: f64 = sub_marginals.iter().sum();
    let achieved_marginal_magnitudes = sub_marginals
        .iter()
        .map(|m| (m / sub_total).sqrt())
        .collect();
    let leakage_all_p = 1.0 - sub_total;
    Ok(EngineeringResult {
        pump,
        achieved,
        achieved_marginal_magnitudes,
        leakage,
        leakage_all_p,
        spectrum,
    })
}

fn pair_p0(pair: (i32, i32)) -> ModePair {
    ModePair::new(
        crate::lg::LGIndex::new(pair.0, 0),
        crate::lg::LGIndex::new(pair.1, 0),
    )
}

/// Multiply the charge-0 term by `e^{i theta0}` and the charge-2 term by
/// `e^{i theta2}`, keeping the charge -2 term as the phase reference. The
/// pump must contain all three charges.
pub fn apply_pump_phases(
    pump: &PumpSpec,
    theta0: f64,
    theta2: f64,
) -> Result<PumpSpec, EngineeringError> {
    for required in [-2, 0, 2] {
        if pump.coefficient(required).is_none() {
            return Err(EngineeringError::MissingTerm { l: required });
        }
    }
    let terms: Vec<(i32, Complex64)> = pump
        .terms()
        .iter()
        .map(|&(l, c)| {
            let phase = match l {
                0 => theta0,
                2 => theta2,
                _ => 0.0,
            };
            if phase == 0.0 {
                (l, c)
            } else {
                (l, c * Complex64::from_polar(1.0, phase))
            }
        })
        .collect();
    Ok(PumpSpec::from_normalized_terms(terms))
}

/// Extract the `p_s = p_i = 0` subspace state and its leakage from a
/// normalized spectrum: the unit-norm coefficient vector over the target
/// pairs, and `1 - (in-subspace fundamental-mode probability)`.
pub fn subspace_state(
    amps: &BiphotonAmplitudes,
    target: &TargetState,
) -> Result<(SubspaceState, f64), EngineeringError> {
    let raw: Vec<Complex64> = target
        .pairs()
        .iter()
        .map(|&pair| amps.get(pair_p0(pair)))
        .collect();
    let weight: f64 = raw.iter().map(|c| c.norm_sqr()).sum();
    if weight < 1e-14 {
        return Err(EngineeringError::ZeroSubspaceWeight);
    }
    let s = 1.0 / weight.sqrt();
    Ok((
        SubspaceState {
            pairs: target.pairs().to_vec(),
            coefficients: raw.into_iter().map(|c| c * s).collect(),
        },
        1.0 - weight,
    ))
}
