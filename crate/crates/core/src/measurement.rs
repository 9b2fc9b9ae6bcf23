//! Projective coincidence measurements on the two-qutrit state: phase-scan
//! interference curves, visibilities, Poisson count simulation and
//! least-squares recovery of offset phases.
//!
//! The analyzer pair used for the phase scans is
//! `|psi_A> = (|-1> + e^{i alpha}|0> + e^{i alpha}|1>)/sqrt(3)` and
//! `|psi_B> = (|-1> + e^{-i alpha}|0> + e^{-i alpha}|1>)/sqrt(3)`, written in
//! the apparatus labeling where the measured pairs are anti-correlated
//! (`|l>_A |-l>_B`); the extra mirror in the idler path that maps the
//! source's correlated labels onto those is applied inside
//! [`interference_curve`]. For the ideal maximally entangled state the curve
//! follows the closed form
//! `(3 + 2[cos(alpha - theta0) + cos(2 alpha - theta2) + cos(alpha + theta0 - theta2)]) / 27`,
//! which is re-derived symbolically in the test suite.

use alloc::vec::Vec;
#[allow(unused_imports)] // trait needed for float math in no_std builds
use num_traits::Float;

use core::f64::consts::TAU;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};

use crate::qstate::State;

/// Single-arm analyzer state over the OAM basis, unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSpec {
    coefficients: Vec<Complex64>,
}

impl ProjectorSpec {
    /// Normalizes; rejects the zero vector.
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self, MeasurementError> {
        let norm_sq: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(MeasurementError::ZeroProjector);
        }
        let s = 1.0 / norm_sq.sqrt();
        Ok(Self {
            coefficients: coefficients.into_iter().map(|c| c * s).collect(),
        })
    }

    /// Basis analyzer `|index>`.
    pub fn basis_state(index: usize, dim: usize) -> Self {
        let mut c = alloc::vec![Complex64::new(0.0, 0.0); dim];
        c[index] = Complex64::new(1.0, 0.0);
        Self { coefficients: c }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }
}

/// The phase-scan analyzer pair at parameter `alpha` (signal arm carries
/// `+alpha`, idler arm `-alpha`).
pub fn scan_projectors(alpha: f64) -> (ProjectorSpec, ProjectorSpec) {
    let one = Complex64::new(1.0, 0.0);
    let a = ProjectorSpec::new(alloc::vec![
        one,
        Complex64::from_polar(1.0, alpha),
        Complex64::from_polar(1.0, alpha),
    ])
    .expect("nonzero");
    let b = ProjectorSpec::new(alloc::vec![
        one,
        Complex64::from_polar(1.0, -alpha),
        Complex64::from_polar(1.0, -alpha),
    ])
    .expect("nonzero");
    (a, b)
}

/// Errors from the measurement module.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasurementError {
    #[error("projector has zero norm")]
    ZeroProjector,
    #[error("dimension mismatch: state arm {state} vs projectors {proj_a}/{proj_b}")]
    DimensionMismatch {
        state: usize,
        proj_a: usize,
        proj_b: usize,
    },
    #[error("{name} must be strictly positive")]
    NonPositive { name: &'static str },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("scan must span at least one period (2 pi), spans {span:.3}")]
    ScanSpanTooSmall { span: f64 },
    #[error("fit residual {rms:.3e} exceeds bound {bound:.3e}")]
    FitDiverged { rms: f64, bound: f64 },
}

/// Coincidence probability `|<psi_A|<psi_B| psi>|^2` (pure) or
/// `Tr[(Pi_A x Pi_B) rho]` (mixed); clamped into `[0, 1]` against rounding.
pub fn coincidence_probability(
    state: &State,
    proj_a: &ProjectorSpec,
    proj_b: &ProjectorSpec,
) -> Result<f64, MeasurementError> {
    let d = state.arm_dim();
    if proj_a.dim() != d || proj_b.dim() != d {
        return Err(MeasurementError::DimensionMismatch {
            state: d,
            proj_a: proj_a.dim(),
            proj_b: proj_b.dim(),
        });
    }
    let p = match state {
        State::Pure(psi) => {
            let mut amp = Complex64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    amp += proj_a.coefficients()[i].conj()
                        * proj_b.coefficients()[j].conj()
                        * psi.component(i, j);
                }
            }
            amp.norm_sqr()
        }
        State::Mixed(rho) => {
            let mut joint = alloc::vec![Complex64::new(0.0, 0.0); d * d];
            for i in 0..d {
                for j in 0..d {
                    joint[i * d + j] = proj_a.coefficients()[i] * proj_b.coefficients()[j];
                }
            }
            rho.matrix().quadratic_form(&joint)
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Which of the two transferred pump phases a scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PhaseScan {
    Theta0,
    Theta2,
}

/// Closed-form ideal-MES coincidence for the scan analyzers; normalization
/// carries the three `1/sqrt(3)` factors (two analyzers and the state).
pub fn ideal_mes_curve(alpha: f64, theta0: f64, theta2: f64) -> f64 {
    (3.0 + 2.0
        * ((alpha - theta0).cos()
            + (2.0 * alpha - theta2).cos()
            + (alpha + theta0 - theta2).cos()))
        / 27.0
}

/// Scan one transferred phase over `[0, 2 pi]` (inclusive endpoints) with
/// the other held at `fixed`, measuring through the scan analyzers at
/// `alpha`. The state is given in the source's correlated labels; the
/// apparatus mirror (idler sign flip) is applied before projection.
pub fn interference_curve(
    state: &State,
    alpha: f64,
    scan: PhaseScan,
    fixed: f64,
    samples: usize,
) -> Result<Vec<(f64, f64)>, MeasurementError> {
    if samples < 2 {
        return Err(MeasurementError::TooFewSamples {
            need: 2,
            got: samples,
        });
    }
    let (proj_a, proj_b) = scan_projectors(alpha);
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = TAU * k as f64 / (samples - 1) as f64;
        let (theta0, theta2) = match scan {
            PhaseScan::Theta0 => (t, fixed),
            PhaseScan::Theta2 => (fixed, t),
        };
        let measured = state.with_pair_phases(theta0, theta2).flip_idler();
        let p = coincidence_probability(&measured, &proj_a, &proj_b)?;
        out.push((t, p));
    }
    Ok(out)
}

/// `(max - min) / (max + min)` over the series values; zero for an all-zero
/// or empty series.
pub fn visibility(series: &[(f64, f64)]) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &(_, v) in series {
        min = min.min(v);
        max = max.max(v);
    }
    if series.is_empty() || max + min <= 0.0 {
        return 0.0;
    }
    (max - min) / (max + min)
}

/// One simulated coincidence measurement.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountRecord {
    /// Index of the projector pair / scan point in the caller's ordering.
    pub projector_pair: usize,
    pub probability: f64,
    pub counts: u64,
    pub integration_time: f64,
    pub rate_scale: f64,
}

/// Draw Poisson counts with mean `probability * rate_scale * integration_time`
/// for each probability, deterministically for a fixed seed.
pub fn simulate_counts(
    probabilities: &[f64],
    rate_scale: f64,
    integration_time: f64,
    seed: u64,
) -> Result<Vec<CountRecord>, MeasurementError> {
    if !(rate_scale > 0.0) {
        return Err(MeasurementError::NonPositive { name: "rate_scale" });
    }
    if !(integration_time > 0.0) {
        return Err(MeasurementError::NonPositive {
            name: "integration_time",
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(probabilities.len());
    for (k, &p) in probabilities.iter().enumerate() {
        let mean = p * rate_scale * integration_time;
        let counts = poisson_draw(mean, &mut rng);
        out.push(CountRecord {
            projector_pair: k,
            probability: p,
            counts,
            integration_time,
            rate_scale,
        });
    }
    Ok(out)
}

/// Poisson sample that tolerates a zero mean (always zero counts).
pub(crate) fn poisson_draw(mean: f64, rng: &mut ChaCha12Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    // rand_distr yields the count as an integer-valued f64
    let draw: f64 = dist.sample(rng);
    draw as u64
}

/// One phase-scan data set: analyzer parameter, which transferred phase the
/// scan varied, and the `(scan phase, value)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanCurve {
    pub alpha: f64,
    pub scan: PhaseScan,
    pub samples: Vec<(f64, f64)>,
}

/// Result of the offset-phase fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFit {
    /// Offset phases wrapped into `[0, 2 pi)`.
    pub theta0: f64,
    pub theta2: f64,
    /// Per-curve overall scale (absorbs rates, times and normalizations).
    pub amplitudes: Vec<f64>,
    pub rms_residual: f64,
    /// One-sigma uncertainties from the local quadratic model.
    pub theta0_std: f64,
    pub theta2_std: f64,
}

/// Noise model assumed when weighting the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitNoise {
    /// Equal variance on every sample; sigma estimated from the residuals.
    Uniform,
    /// Poisson counting noise: variance = max(value, 1).
    Poisson,
}

/// Fit settings; `max_rms_fraction` bounds the accepted RMS residual as a
/// fraction of the fitted amplitude span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub grid: usize,
    pub iterations: usize,
    pub max_rms_fraction: f64,
    pub noise: FitNoise,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            grid: 64,
            iterations: 60,
            max_rms_fraction: 0.25,
            noise: FitNoise::Uniform,
        }
    }
}

fn model_shape(alpha: f64, theta0: f64, theta2: f64) -> f64 {
    3.0 + 2.0
        * ((alpha - theta0).cos()
            + (2.0 * alpha - theta2).cos()
            + (alpha + theta0 - theta2).cos())
}

fn curve_model(curve: &ScanCurve, theta0: f64, theta2: f64, t: f64) -> f64 {
    match curve.scan {
        PhaseScan::Theta0 => model_shape(curve.alpha, theta0 + t, theta2),
        PhaseScan::Theta2 => model_shape(curve.alpha, theta0, theta2 + t),
    }
}

/// Least-squares fit of the interference model to one or more scans that
/// share the offset phases; each curve gets its own amplitude. The scanned
/// phase of a curve is `offset + t`, the other is held at its offset.
///
/// A single scan determines the phases only up to the exact reflection
/// `(theta0, theta2) -> (2 alpha - theta0, theta2 + alpha - theta0)`;
/// passing scans at two analyzer parameters (as the bench procedure does)
/// removes the ambiguity.
pub fn fit_offset_phases(
    curves: &[ScanCurve],
    settings: &FitSettings,
) -> Result<PhaseFit, MeasurementError> {
    if curves.is_empty() {
        return Err(MeasurementError::TooFewSamples { need: 1, got: 0 });
    }
    for curve in curves {
        if curve.samples.len() < 6 {
            return Err(MeasurementError::TooFewSamples {
                need: 6,
                got: curve.samples.len(),
            });
        }
        let span = curve
            .samples
            .iter()
            .map(|&(t, _)| t)
            .fold(f64::NEG_INFINITY, f64::max)
            - curve
                .samples
                .iter()
                .map(|&(t, _)| t)
                .fold(f64::INFINITY, f64::min);
        if span < TAU - 1e-9 {
            return Err(MeasurementError::ScanSpanTooSmall { span });
        }
    }
    // Basin selection runs unweighted; counting-noise weights are derived
    // from the fitted model afterwards (weights from observed counts misprice
    // near-zero bins and can promote mirror basins).
    let mut weights: Vec<Vec<f64>> = curves
        .iter()
        .map(|curve| alloc::vec![1.0; curve.samples.len()])
        .collect();
    let n_curves = curves.len();
    let dim = n_curves + 2; // per-curve amplitude + two phases

    // per-curve linear amplitude and the total weighted SSE at fixed phases
    let solve_amplitudes = |theta0: f64, theta2: f64, weights: &[Vec<f64>]| -> (Vec<f64>, f64) {
        let mut ks = Vec::with_capacity(n_curves);
        let mut sse = 0.0;
        for (curve, ws) in curves.iter().zip(weights) {
            let mut num = 0.0;
            let mut den = 0.0;
            for (&(t, y), &w) in curve.samples.iter().zip(ws) {
                let m = curve_model(curve, theta0, theta2, t);
                num += w * y * m;
                den += w * m * m;
            }
            let k = if den > 0.0 { num / den } else { 0.0 };
            for (&(t, y), &w) in curve.samples.iter().zip(ws) {
                let r = y - k * curve_model(curve, theta0, theta2, t);
                sse += w * r * r;
            }
            ks.push(k);
        }
        (ks, sse)
    };

    // coarse grid over the two phases
    let mut best = (f64::INFINITY, Vec::new(), 0.0, 0.0);
    for i in 0..settings.grid {
        let th0 = TAU * i as f64 / settings.grid as f64;
        for j in 0..settings.grid {
            let th2 = TAU * j as f64 / settings.grid as f64;
            let (ks, sse) = solve_amplitudes(th0, th2, &weights);
            if sse < best.0 {
                best = (sse, ks, th0, th2);
            }
        }
    }
    let (mut sse, mut ks, mut th0, mut th2) = best;

    let sse_at = |ks: &[f64], th0: f64, th2: f64, weights: &[Vec<f64>]| -> f64 {
        let mut acc = 0.0;
        for ((curve, ws), &k) in curves.iter().zip(weights).zip(ks) {
            for (&(t, y), &w) in curve.samples.iter().zip(ws) {
                let r = y - k * curve_model(curve, th0, th2, t);
                acc += w * r * r;
            }
        }
        acc
    };

    // Gauss-Newton on (amplitudes, theta0, theta2) with step backtracking
    let dtheta = 1e-6;
    let normal_equations = |ks: &[f64], th0: f64, th2: f64, weights: &[Vec<f64>]| -> (Vec<f64>, Vec<f64>) {
        let mut jtj = alloc::vec![0.0f64; dim * dim];
        let mut jtr = alloc::vec![0.0f64; dim];
        for (c, (curve, ws)) in curves.iter().zip(weights).enumerate() {
            let k = ks[c];
            for (&(t, y), &w) in curve.samples.iter().zip(ws) {
                let m = curve_model(curve, th0, th2, t);
                let d0 = (curve_model(curve, th0 + dtheta, th2, t)
                    - curve_model(curve, th0 - dtheta, th2, t))
                    / (2.0 * dtheta);
                let d2 = (curve_model(curve, th0, th2 + dtheta, t)
                    - curve_model(curve, th0, th2 - dtheta, t))
                    / (2.0 * dtheta);
                let mut jac = alloc::vec![0.0f64; dim];
                jac[c] = m;
                jac[dim - 2] = k * d0;
                jac[dim - 1] = k * d2;
                let r = y - k * m;
                for a in 0..dim {
                    if jac[a] == 0.0 {
                        continue;
                    }
                    jtr[a] += w * jac[a] * r;
                    for b in 0..dim {
                        jtj[a * dim + b] += w * jac[a] * jac[b];
                    }
                }
            }
        }
        (jtj, jtr)
    };
    let gauss_newton = |ks: &mut Vec<f64>,
                        th0: &mut f64,
                        th2: &mut f64,
                        sse: &mut f64,
                        weights: &[Vec<f64>]| {
        for _ in 0..settings.iterations {
            let (jtj, jtr) = normal_equations(ks, *th0, *th2, weights);
            let Some(step) = solve_dense(&jtj, &jtr, dim) else {
                break;
            };
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..20 {
                let cand_ks: Vec<f64> = ks
                    .iter()
                    .enumerate()
                    .map(|(c, &k)| k + scale * step[c])
                    .collect();
                let cand0 = *th0 + scale * step[dim - 2];
                let cand2 = *th2 + scale * step[dim - 1];
                let cand_sse = sse_at(&cand_ks, cand0, cand2, weights);
                if cand_sse.is_finite() && cand_sse <= *sse {
                    *ks = cand_ks;
                    *th0 = cand0;
                    *th2 = cand2;
                    *sse = cand_sse;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted || scale * (step[dim - 2].abs() + step[dim - 1].abs()) < 1e-14 {
                break;
            }
        }
    };
    gauss_newton(&mut ks, &mut th0, &mut th2, &mut sse, &weights);

    if settings.noise == FitNoise::Poisson {
        // reweight from the fitted model and polish locally
        weights = curves
            .iter()
            .enumerate()
            .map(|(c, curve)| {
                curve
                    .samples
                    .iter()
                    .map(|&(t, _)| 1.0 / (ks[c] * curve_model(curve, th0, th2, t)).max(1.0))
                    .collect()
            })
            .collect();
        sse = sse_at(&ks, th0, th2, &weights);
        gauss_newton(&mut ks, &mut th0, &mut th2, &mut sse, &weights);
    }

    let wsum: f64 = weights.iter().flatten().sum();
    let samples_total: usize = curves.iter().map(|c| c.samples.len()).sum();
    let rms = (sse / wsum).sqrt();
    let model_span = 8.0 * ks.iter().fold(0.0f64, |acc, k| acc.max(k.abs()));
    let bound = settings.max_rms_fraction * model_span.max(1e-300);
    if !rms.is_finite() || rms > bound {
        return Err(MeasurementError::FitDiverged { rms, bound });
    }

    // covariance of the phases from the weighted normal equations
    let (jtj, _) = normal_equations(&ks, th0, th2, &weights);
    let sigma_sq = match settings.noise {
        // unit-weight variance estimated from the residuals
        FitNoise::Uniform => sse / (samples_total as f64 - dim as f64).max(1.0),
        // Poisson weights already carry the absolute scale
        FitNoise::Poisson => 1.0,
    };
    let (s0, s2) = match invert_dense(&jtj, dim) {
        Some(cov) => (
            (sigma_sq * cov[(dim - 2) * dim + (dim - 2)]).max(0.0).sqrt(),
            (sigma_sq * cov[(dim - 1) * dim + (dim - 1)]).max(0.0).sqrt(),
        ),
        None => (f64::NAN, f64::NAN),
    };

    Ok(PhaseFit {
        theta0: crate::wrap_tau(th0),
        theta2: crate::wrap_tau(th2),
        amplitudes: ks,
        rms_residual: rms,
        theta0_std: s0,
        theta2_std: s2,
    })
}

/// Solve `A x = b` for small dense symmetric systems by Gaussian
/// elimination with partial pivoting.
fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i * n + col]
                .abs()
                .partial_cmp(&m[j * n + col].abs())
                .unwrap()
        })?;
        if m[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        let d = m[col * n + col];
        for row in (col + 1)..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = alloc::vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..n {
            acc -= m[row * n + k] * x[k];
        }
        x[row] = acc / m[row * n + row];
    }
    Some(x)
}

fn invert_dense(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = alloc::vec![0.0f64; n * n];
    for col in 0..n {
        let mut e = alloc::vec![0.0f64; n];
        e[col] = 1.0;
        let x = solve_dense(a, &e, n)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use crate::qstate::PureState;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mes_basis_projections() {
        let mes: State = PureState::mes(3).into();
        let p00 = coincidence_probability(
            &mes,
            &ProjectorSpec::basis_state(1, 3),
            &ProjectorSpec::basis_state(1, 3),
        )
        .unwrap();
        assert_abs_diff_eq!(p00, 1.0 / 3.0, epsilon = 1e-14);
        let p01 = coincidence_probability(
            &mes,
            &ProjectorSpec::basis_state(1, 3),
            &ProjectorSpec::basis_state(2, 3),
        )
        .unwrap();
        assert_abs_diff_eq!(p01, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn aligned_scan_projectors_give_max() {
        // alpha = theta0 = theta2 = 0: all three terms aligned, probability
        // 9 N^2 with N the product of the three 1/sqrt(3) factors -> 1/3
        let measured: State = PureState::mes(3).flip_idler().into();
        let (a, b) = scan_projectors(0.0);
        let p = coincidence_probability(&measured, &a, &b).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p, ideal_mes_curve(0.0, 0.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn dark_fringe_at_two_pi_thirds() {
        let curve_val = ideal_mes_curve(2.0 * PI / 3.0, 0.0, 0.0);
        assert!(curve_val.abs() < 1e-15);
        let measured: State = PureState::mes(3).flip_idler().into();
        let (a, b) = scan_projectors(2.0 * PI / 3.0);
        let p = coincidence_probability(&measured, &a, &b).unwrap();
        assert!(p < 1e-15);
    }

    #[test]
    fn curve_matches_closed_form() {
        let mes: State = PureState::mes(3).into();
        for &alpha in &[PI / 3.0, 2.0 * PI / 3.0, 0.7] {
            let series = interference_curve(&mes, alpha, PhaseScan::Theta2, 0.4, 41).unwrap();
            for &(t, p) in &series {
                assert_abs_diff_eq!(p, ideal_mes_curve(alpha, 0.4, t), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn visibility_cases() {
        assert_abs_diff_eq!(visibility(&[(0.0, 0.0), (1.0, 0.0)]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(visibility(&[(0.0, 2.0), (1.0, 2.0)]), 0.0, epsilon = 1e-15);
        let mes: State = PureState::mes(3).into();
        let series =
            interference_curve(&mes, 2.0 * PI / 3.0, PhaseScan::Theta2, 0.0, 201).unwrap();
        assert_abs_diff_eq!(visibility(&series), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn counts_deterministic_and_zero_safe() {
        let probs = [0.0, 0.1, 0.3];
        let a = simulate_counts(&probs, 45.0, 20.0, 7).unwrap();
        let b = simulate_counts(&probs, 45.0, 20.0, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].counts, 0);
        let c = simulate_counts(&probs, 45.0, 20.0, 8).unwrap();
        assert_ne!(a, c); // different seed, different draws
        assert!(simulate_counts(&probs, 0.0, 20.0, 7).is_err());
    }

    #[test]
    fn poisson_mean_sane() {
        // mean of many draws at p * r * t = 100 within 3 sigma
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let n = 10_000;
        let total: u64 = (0..n).map(|_| poisson_draw(100.0, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 100.0).abs() < 3.0 * 10.0 / (n as f64).sqrt());
    }

    #[test]
    fn fit_recovers_offsets_noiseless() {
        let theta0_true = 0.6;
        let state: State = PureState::mes3_with_phases(theta0_true, 0.0).into();
        let series1 = interference_curve(&state, PI / 3.0, PhaseScan::Theta2, 0.0, 60).unwrap();
        let series2 =
            interference_curve(&state, 2.0 * PI / 3.0, PhaseScan::Theta2, 0.0, 60).unwrap();
        let fit = fit_offset_phases(
            &[
                ScanCurve {
                    alpha: PI / 3.0,
                    scan: PhaseScan::Theta2,
                    samples: series1,
                },
                ScanCurve {
                    alpha: 2.0 * PI / 3.0,
                    scan: PhaseScan::Theta2,
                    samples: series2,
                },
            ],
            &FitSettings::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(fit.theta0, theta0_true, epsilon = 1e-6);
        assert!(fit.theta2.min(TAU - fit.theta2) < 1e-6);
        assert!(fit.rms_residual < 1e-10);
    }

    #[test]
    fn fit_zero_offsets() {
        let state: State = PureState::mes(3).into();
        let series = interference_curve(&state, PI / 3.0, PhaseScan::Theta0, 0.0, 48).unwrap();
        let fit = fit_offset_phases(
            &[ScanCurve {
                alpha: PI / 3.0,
                scan: PhaseScan::Theta0,
                samples: series,
            }],
            &FitSettings::default(),
        )
        .unwrap();
        assert!(fit.theta0.min(TAU - fit.theta0) < 1e-6);
        assert!(fit.theta2.min(TAU - fit.theta2) < 1e-6);
    }

    #[test]
    fn fit_rejects_short_input() {
        let short = ScanCurve {
            alpha: 1.0,
            scan: PhaseScan::Theta2,
            samples: alloc::vec![(0.0, 1.0), (1.0, 2.0), (2.0, 1.0)],
        };
        assert!(matches!(
            fit_offset_phases(&[short], &FitSettings::default()),
            Err(MeasurementError::TooFewSamples { .. })
        ));
        let narrow = ScanCurve {
            alpha: 1.0,
            scan: PhaseScan::Theta2,
            samples: (0..10).map(|k| (k as f64 * 0.1, 1.0)).collect(),
        };
        assert!(matches!(
            fit_offset_phases(&[narrow], &FitSettings::default()),
            Err(MeasurementError::ScanSpanTooSmall { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_detected() {
        let mes: State = PureState::mes(3).into();
        let p2 = ProjectorSpec::basis_state(0, 2);
        assert!(matches!(
            coincidence_probability(&mes, &p2, &p2),
            Err(MeasurementError::DimensionMismatch { .. })
        ));
    }
}
