//! d-outcome bipartite Bell test in the CGLMP form, with the angular
//! measurement-state family used for OAM analyzers.
//!
//! Outcome `v` of setting `a` on arm A projects onto
//! `(1/sqrt(d)) sum_l exp(i theta_A g(l)) |l>` with
//! `theta_A = (2 pi / d) (v + tau_a a / 2)`, and arm B uses
//! `theta_B = (2 pi / d) (-w + tau_b (-1)^b / 4)`; `g(l) = l + floor(d/2)`
//! maps the OAM labels onto `0..d-1`. The outcome comb of each setting is
//! Fourier-spaced (so the d outcome states are orthogonal and the POVM is
//! complete at every spacing), while `tau_a`, `tau_b` scale the half-step
//! offsets between the two settings of an arm — the quantity a fringe fit
//! on apparatus data actually pins down. At `tau_a = tau_b = 1` this is the
//! standard CGLMP arrangement, whose ideal-MES value for d = 3 is
//! `(12 + 8 sqrt(3)) / 9 = 2.872934...`, and 1 is also the optimum of the
//! family. The apparatus-fit preset uses `tau = 4.2 / 2 pi`.

use alloc::vec::Vec;
#[allow(unused_imports)] // trait needed for float math in no_std builds
use num_traits::Float;

use core::f64::consts::TAU;
use num_complex::Complex64;

use crate::measurement::{coincidence_probability, MeasurementError, ProjectorSpec};
use crate::qstate::State;

/// Dimension and analyzer-spacing parameters of one Bell experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BellSettings {
    pub d: usize,
    pub tau_a: f64,
    pub tau_b: f64,
}

impl BellSettings {
    pub fn new(d: usize, tau_a: f64, tau_b: f64) -> Result<Self, BellError> {
        if d < 2 || !(tau_a > 0.0) || !(tau_b > 0.0) {
            return Err(BellError::InvalidSettings { d, tau_a, tau_b });
        }
        Ok(Self { d, tau_a, tau_b })
    }

    /// Standard CGLMP spacing: the outcome states of each setting form a
    /// Fourier basis.
    pub fn standard(d: usize) -> Self {
        Self {
            d,
            tau_a: 1.0,
            tau_b: 1.0,
        }
    }

    /// Spacing fitted from the reference apparatus fringes, `4.2 / (2 pi)`
    /// on both arms.
    pub fn fitted_apparatus(d: usize) -> Self {
        let tau = 4.2 / TAU;
        Self {
            d,
            tau_a: tau,
            tau_b: tau,
        }
    }
}

/// Which photon a measurement state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    A,
    B,
}

/// Errors from the Bell module.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BellError {
    #[error("invalid Bell settings: d={d}, tau_a={tau_a}, tau_b={tau_b}")]
    InvalidSettings { d: usize, tau_a: f64, tau_b: f64 },
    #[error("outcome {outcome} out of range for d={d}")]
    OutcomeOutOfRange { outcome: usize, d: usize },
    #[error("setting index {setting} out of range (two settings per arm)")]
    SettingOutOfRange { setting: usize },
    #[error("block (a={a}, b={b}) has vanishing total coincidence")]
    ZeroBlock { a: usize, b: usize },
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

/// Analyzer phase for one arm, setting and outcome: Fourier-spaced outcome
/// comb, setting offset scaled by the arm's spacing parameter.
pub fn analyzer_phase(arm: Arm, setting: usize, outcome: usize, settings: &BellSettings) -> f64 {
    let d = settings.d as f64;
    match arm {
        Arm::A => TAU / d * (outcome as f64 + settings.tau_a * setting as f64 / 2.0),
        Arm::B => {
            let sign = if setting % 2 == 0 { 1.0 } else { -1.0 };
            TAU / d * (-(outcome as f64) + settings.tau_b * sign / 4.0)
        }
    }
}

/// Angular analyzer state `(1/sqrt(d)) sum_g exp(i theta g) |g>` at a free
/// phase `theta`.
pub fn angular_state(theta: f64, d: usize) -> ProjectorSpec {
    let coeffs: Vec<Complex64> = (0..d)
        .map(|g| Complex64::from_polar(1.0, theta * g as f64))
        .collect();
    ProjectorSpec::new(coeffs).expect("nonzero")
}

/// Measurement state for an arm/setting/outcome triple.
pub fn bell_measurement_state(
    arm: Arm,
    setting: usize,
    outcome: usize,
    settings: &BellSettings,
) -> Result<ProjectorSpec, BellError> {
    if setting > 1 {
        return Err(BellError::SettingOutOfRange { setting });
    }
    if outcome >= settings.d {
        return Err(BellError::OutcomeOutOfRange {
            outcome,
            d: settings.d,
        });
    }
    Ok(angular_state(
        analyzer_phase(arm, setting, outcome, settings),
        settings.d,
    ))
}

/// Normalized joint outcome probabilities, one block per setting pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    d: usize,
    /// `blocks[a][b]` is row-major `P[i][j]`, normalized to 1.
    blocks: [[Vec<f64>; 2]; 2],
}

impl ProbabilityTable {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, a: usize, b: usize, i: usize, j: usize) -> f64 {
        self.blocks[a][b][i * self.d + j]
    }

    pub fn block(&self, a: usize, b: usize) -> &[f64] {
        &self.blocks[a][b]
    }

    /// Build directly from raw coincidences (e.g. counts); each block is
    /// normalized by its total.
    pub fn from_raw(
        d: usize,
        raw: [[Vec<f64>; 2]; 2],
    ) -> Result<Self, BellError> {
        let mut blocks = raw;
        for a in 0..2 {
            for b in 0..2 {
                let total: f64 = blocks[a][b].iter().sum();
                if total < 1e-300 {
                    return Err(BellError::ZeroBlock { a, b });
                }
                for v in blocks[a][b].iter_mut() {
                    *v /= total;
                }
            }
        }
        Ok(Self { d, blocks })
    }

    /// Marginal of arm A's outcome `i` in block `(a, b)`.
    pub fn marginal_a(&self, a: usize, b: usize, i: usize) -> f64 {
        (0..self.d).map(|j| self.get(a, b, i, j)).sum()
    }

    /// Marginal of arm B's outcome `j` in block `(a, b)`.
    pub fn marginal_b(&self, a: usize, b: usize, j: usize) -> f64 {
        (0..self.d).map(|i| self.get(a, b, i, j)).sum()
    }
}

/// Coincidence probabilities for all four setting pairs, normalized per
/// block exactly as the counting estimator prescribes.
pub fn joint_probability_table(
    state: &State,
    settings: &BellSettings,
) -> Result<ProbabilityTable, BellError> {
    let d = settings.d;
    let mut blocks: [[Vec<f64>; 2]; 2] = [
        [alloc::vec![0.0; d * d], alloc::vec![0.0; d * d]],
        [alloc::vec![0.0; d * d], alloc::vec![0.0; d * d]],
    ];
    for a in 0..2 {
        for b in 0..2 {
            for i in 0..d {
                let proj_a = bell_measurement_state(Arm::A, a, i, settings)?;
                for j in 0..d {
                    let proj_b = bell_measurement_state(Arm::B, b, j, settings)?;
                    blocks[a][b][i * d + j] = coincidence_probability(state, &proj_a, &proj_b)?;
                }
            }
        }
    }
    ProbabilityTable::from_raw(d, blocks)
}

/// Probability that A's outcome equals B's outcome plus `k` (mod d) in
/// block `(a, b)`.
fn p_a_eq_b_plus(table: &ProbabilityTable, a: usize, b: usize, k: i64) -> f64 {
    let d = table.d() as i64;
    let shift = k.rem_euclid(d) as usize;
    (0..table.d())
        .map(|j| table.get(a, b, (j + shift) % table.d(), j))
        .sum()
}

/// Probability that B's outcome equals A's outcome plus `k` (mod d).
fn p_b_eq_a_plus(table: &ProbabilityTable, a: usize, b: usize, k: i64) -> f64 {
    let d = table.d() as i64;
    let shift = k.rem_euclid(d) as usize;
    (0..table.d())
        .map(|i| table.get(a, b, i, (i + shift) % table.d()))
        .sum()
}

/// The CGLMP quantity: signed, weighted sum of outcome-coincidence
/// probabilities over `k = 0 .. floor(d/2) - 1` with weights
/// `1 - 2k/(d-1)`. Local realism bounds it by 2.
pub fn cglmp_s(table: &ProbabilityTable) -> f64 {
    let d = table.d();
    let mut s = 0.0;
    for k in 0..(d / 2) {
        let k_i = k as i64;
        let weight = 1.0 - 2.0 * k as f64 / (d as f64 - 1.0);
        let plus = p_a_eq_b_plus(table, 0, 0, k_i)
            + p_b_eq_a_plus(table, 1, 0, k_i + 1)
            + p_a_eq_b_plus(table, 1, 1, k_i)
            + p_b_eq_a_plus(table, 0, 1, k_i);
        let minus = p_a_eq_b_plus(table, 0, 0, -k_i - 1)
            + p_b_eq_a_plus(table, 1, 0, -k_i)
            + p_a_eq_b_plus(table, 1, 1, -k_i - 1)
            + p_b_eq_a_plus(table, 0, 1, -k_i - 1);
        s += weight * (plus - minus);
    }
    s
}

/// Ideal-MES CGLMP value for d = 3 at standard settings,
/// `(12 + 8 sqrt(3)) / 9`.
pub fn cglmp_s3_ideal() -> f64 {
    (12.0 + 8.0 * 3.0f64.sqrt()) / 9.0
}

/// A continuous-angle coincidence surface plus the discrete sampling points
/// the four setting groups use.
#[derive(Debug, Clone)]
pub struct CoincidenceSurface {
    pub angles_a: Vec<f64>,
    pub angles_b: Vec<f64>,
    /// Row-major `values[ia * angles_b.len() + ib]`.
    pub values: Vec<f64>,
    pub samples: Vec<SurfaceSample>,
}

/// One of the discrete Bell sampling points on the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurfaceSample {
    pub a: usize,
    pub b: usize,
    pub outcome_a: usize,
    pub outcome_b: usize,
    pub angle_a: f64,
    pub angle_b: f64,
    pub probability: f64,
}

/// Coincidence probability over a grid of continuous analyzer angles
/// `(chi_A, chi_B)` in `[0, 2 pi)`, with per-arm phases `tau_a chi_A`,
/// `tau_b chi_B`; the surface is `2 pi / tau`-periodic along each axis. The
/// 36 discrete sampling points of the four setting groups (for d = 3) are
/// evaluated alongside.
pub fn coincidence_surface(
    state: &State,
    settings: &BellSettings,
    resolution: usize,
) -> Result<CoincidenceSurface, BellError> {
    let d = settings.d;
    let angles: Vec<f64> = (0..resolution.max(2))
        .map(|k| TAU * k as f64 / resolution.max(2) as f64)
        .collect();
    let mut values = Vec::with_capacity(angles.len() * angles.len());
    for &chi_a in &angles {
        let proj_a = angular_state(settings.tau_a * chi_a, d);
        for &chi_b in &angles {
            let proj_b = angular_state(settings.tau_b * chi_b, d);
            values.push(coincidence_probability(state, &proj_a, &proj_b)?);
        }
    }
    let mut samples = Vec::with_capacity(4 * d * d);
    for a in 0..2 {
        for b in 0..2 {
            for v in 0..d {
                for w in 0..d {
                    // commanded angle realizing this analyzer: tau * chi = phase
                    let chi_a = crate::wrap_tau(
                        analyzer_phase(Arm::A, a, v, settings) / settings.tau_a,
                    );
                    let chi_b = crate::wrap_tau(
                        analyzer_phase(Arm::B, b, w, settings) / settings.tau_b,
                    );
                    let proj_a = bell_measurement_state(Arm::A, a, v, settings)?;
                    let proj_b = bell_measurement_state(Arm::B, b, w, settings)?;
                    let probability = coincidence_probability(state, &proj_a, &proj_b)?;
                    samples.push(SurfaceSample {
                        a,
                        b,
                        outcome_a: v,
                        outcome_b: w,
                        angle_a: chi_a,
                        angle_b: chi_b,
                        probability,
                    });
                }
            }
        }
    }
    Ok(CoincidenceSurface {
        angles_a: angles.clone(),
        angles_b: angles,
        values,
        samples,
    })
}

/// Result of the deterministic settings search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedSettings {
    pub s_max: f64,
    pub settings: BellSettings,
}

/// Coarse grid over `(tau_a, tau_b)` refined by compass pattern search;
/// deterministic for fixed arguments.
pub fn optimize_settings(
    state: &State,
    d: usize,
    tau_bounds: (f64, f64),
    grid: usize,
) -> Result<OptimizedSettings, BellError> {
    let (lo, hi) = tau_bounds;
    if !(lo > 0.0) || !(hi > lo) || grid < 2 {
        return Err(BellError::InvalidSettings {
            d,
            tau_a: lo,
            tau_b: hi,
        });
    }
    let eval = |ta: f64, tb: f64| -> Result<f64, BellError> {
        let settings = BellSettings::new(d, ta, tb)?;
        Ok(cglmp_s(&joint_probability_table(state, &settings)?))
    };
    let mut best = (f64::NEG_INFINITY, lo, lo);
    for i in 0..grid {
        let ta = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        for j in 0..grid {
            let tb = lo + (hi - lo) * j as f64 / (grid - 1) as f64;
            let s = eval(ta, tb)?;
            if s > best.0 {
                best = (s, ta, tb);
            }
        }
    }
    let (mut s_best, mut ta, mut tb) = best;
    let mut step = (hi - lo) / (grid - 1) as f64;
    while step > 1e-10 {
        let mut improved = false;
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let ca = (ta + dx * step).clamp(lo, hi);
            let cb = (tb + dy * step).clamp(lo, hi);
            let s = eval(ca, cb)?;
            if s > s_best {
                s_best = s;
                ta = ca;
                tb = cb;
                improved = true;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Ok(OptimizedSettings {
        s_max: s_best,
        settings: BellSettings { d, tau_a: ta, tau_b: tb },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use crate::qstate::{DensityMatrix, PureState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn measurement_states_unit_norm() {
        let settings = BellSettings::fitted_apparatus(3);
        for arm in [Arm::A, Arm::B] {
            for setting in 0..2 {
                for outcome in 0..3 {
                    let s = bell_measurement_state(arm, setting, outcome, &settings).unwrap();
                    let n: f64 = s.coefficients().iter().map(|c| c.norm_sqr()).sum();
                    assert_abs_diff_eq!(n, 1.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn outcomes_are_fourier_orthogonal_at_any_spacing() {
        for settings in [BellSettings::standard(3), BellSettings::fitted_apparatus(3)] {
        for setting in 0..2 {
            for v in 0..3 {
                for v2 in 0..3 {
                    let sv = bell_measurement_state(Arm::A, setting, v, &settings).unwrap();
                    let sv2 = bell_measurement_state(Arm::A, setting, v2, &settings).unwrap();
                    let overlap: Complex64 = sv
                        .coefficients()
                        .iter()
                        .zip(sv2.coefficients())
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    let expected = if v == v2 { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(overlap.norm(), expected, epsilon = 1e-12);
                }
            }
        }
        }
    }

    #[test]
    fn overlap_depends_only_on_outcome_difference() {
        let settings = BellSettings::fitted_apparatus(3);
        let states: Vec<_> = (0..3)
            .map(|v| bell_measurement_state(Arm::A, 0, v, &settings).unwrap())
            .collect();
        let ov = |x: &ProjectorSpec, y: &ProjectorSpec| -> f64 {
            x.coefficients()
                .iter()
                .zip(y.coefficients())
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                .norm()
        };
        assert_abs_diff_eq!(ov(&states[0], &states[1]), ov(&states[1], &states[2]), epsilon = 1e-13);
    }

    #[test]
    fn maximally_mixed_gives_uniform_table_and_zero_s() {
        let rho: State = DensityMatrix::maximally_mixed(3).into();
        let table = joint_probability_table(&rho, &BellSettings::standard(3)).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..3 {
                    for j in 0..3 {
                        assert_abs_diff_eq!(table.get(a, b, i, j), 1.0 / 9.0, epsilon = 1e-13);
                    }
                }
            }
        }
        assert_abs_diff_eq!(cglmp_s(&table), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn product_state_table_factorizes() {
        // |0>|0> in the OAM labels: index 1 on each arm
        let mut amps = alloc::vec![Complex64::new(0.0, 0.0); 9];
        amps[1 * 3 + 1] = Complex64::new(1.0, 0.0);
        let psi: State = PureState::new(amps, 3).unwrap().into();
        let settings = BellSettings::standard(3);
        let table = joint_probability_table(&psi, &settings).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..3 {
                    for j in 0..3 {
                        let p = table.get(a, b, i, j);
                        let pa = table.marginal_a(a, b, i);
                        let pb = table.marginal_b(a, b, j);
                        assert_abs_diff_eq!(p, pa * pb, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn ideal_mes_hits_known_value_at_standard_settings() {
        let mes: State = PureState::mes(3).into();
        let table = joint_probability_table(&mes, &BellSettings::standard(3)).unwrap();
        let s = cglmp_s(&table);
        assert_abs_diff_eq!(s, cglmp_s3_ideal(), epsilon = 1e-12);
        assert_abs_diff_eq!(s, 2.8729340, epsilon = 1e-6);
    }

    #[test]
    fn mes_table_matches_analytic_distribution() {
        // P(v, w) = sin^2(pi x) / (d^3 sin^2(pi x / d)), x = v - w + c_ab
        let mes: State = PureState::mes(3).into();
        let table = joint_probability_table(&mes, &BellSettings::standard(3)).unwrap();
        let c = [[0.25, -0.25], [0.75, 0.25]];
        for a in 0..2 {
            for b in 0..2 {
                for v in 0..3 {
                    for w in 0..3 {
                        let x: f64 = v as f64 - w as f64 + c[a][b];
                        let analytic = if (x * PI).sin().abs() < 1e-12 {
                            1.0 / 3.0
                        } else {
                            (PI * x).sin().powi(2) / (27.0 * (PI * x / 3.0).sin().powi(2))
                        };
                        assert_abs_diff_eq!(table.get(a, b, v, w), analytic, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn no_signaling_at_any_spacing() {
        let mes: State = PureState::mes(3).into();
        for settings in [BellSettings::standard(3), BellSettings::fitted_apparatus(3)] {
        let table = joint_probability_table(&mes, &settings).unwrap();
        for a in 0..2 {
            for i in 0..3 {
                let m0 = table.marginal_a(a, 0, i);
                let m1 = table.marginal_a(a, 1, i);
                assert_abs_diff_eq!(m0, m1, epsilon = 1e-12);
            }
        }
        for b in 0..2 {
            for j in 0..3 {
                let m0 = table.marginal_b(0, b, j);
                let m1 = table.marginal_b(1, b, j);
                assert_abs_diff_eq!(m0, m1, epsilon = 1e-12);
            }
        }
        }
    }

    #[test]
    fn chsh_reduction_classical_bound() {
        // d = 2: every deterministic strategy stays at |S| <= 2
        let d = 2;
        let mut worst = f64::NEG_INFINITY;
        for a0 in 0..d {
            for a1 in 0..d {
                for b0 in 0..d {
                    for b1 in 0..d {
                        let strategy = [[a0, b0], [a0, b1], [a1, b0], [a1, b1]];
                        let mut blocks: [[alloc::vec::Vec<f64>; 2]; 2] = [
                            [alloc::vec![0.0; 4], alloc::vec![0.0; 4]],
                            [alloc::vec![0.0; 4], alloc::vec![0.0; 4]],
                        ];
                        for (idx, &[oa, ob]) in strategy.iter().enumerate() {
                            let (a, b) = (idx / 2, idx % 2);
                            blocks[a][b][oa * 2 + ob] = 1.0;
                        }
                        let table = ProbabilityTable::from_raw(2, blocks).unwrap();
                        worst = worst.max(cglmp_s(&table));
                    }
                }
            }
        }
        assert!(worst <= 2.0 + 1e-12);
        assert_abs_diff_eq!(worst, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn surface_periodicity_and_range() {
        let mes: State = PureState::mes(3).into();
        let settings = BellSettings::fitted_apparatus(3);
        let surface = coincidence_surface(&mes, &settings, 12).unwrap();
        assert!(surface.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(surface.samples.len(), 36);
        // periodicity 2 pi / tau along each axis
        let period = TAU / settings.tau_a;
        let probe = angular_state(settings.tau_a * 0.37, 3);
        let probe_shift = angular_state(settings.tau_a * (0.37 + period), 3);
        let pb = angular_state(settings.tau_b * 1.1, 3);
        let p1 = coincidence_probability(&mes, &probe, &pb).unwrap();
        let p2 = coincidence_probability(&mes, &probe_shift, &pb).unwrap();
        assert_abs_diff_eq!(p1, p2, epsilon = 1e-12);
    }

    #[test]
    fn optimizer_finds_standard_settings_for_mes() {
        let mes: State = PureState::mes(3).into();
        let opt = optimize_settings(&mes, 3, (0.5, 1.5), 11).unwrap();
        assert!(opt.s_max >= 2.87);
        assert_abs_diff_eq!(opt.s_max, cglmp_s3_ideal(), epsilon = 1e-3);
    }

    #[test]
    fn optimizer_flat_for_maximally_mixed() {
        let rho: State = DensityMatrix::maximally_mixed(3).into();
        let opt = optimize_settings(&rho, 3, (0.5, 1.5), 5).unwrap();
        assert_abs_diff_eq!(opt.s_max, 0.0, epsilon = 1e-9);
    }
}
