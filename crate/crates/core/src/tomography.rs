//! Two-qutrit state tomography from mutually unbiased bases (MUBs): count
//! simulation, linear inversion over the SU(3) generator basis, and
//! maximum-likelihood refinement with a triangular parameterization that
//! keeps the estimate positive semidefinite.
//!
//! For d = 3 the four MUBs are the computational basis plus the three
//! quadratic Fourier bases with phases `omega^{k j^2 + v j}`,
//! `omega = exp(2 pi i / 3)`. Product projectors from all four bases per arm
//! (144 total) are informationally complete; the 81-projector arrangement
//! with three bases per arm is kept as an option for parity with apparatus
//! practice, but its Gram matrix is rank deficient (49 of 81) and the linear
//! inversion then returns the flagged least-norm solution.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // trait needed for float math in no_std builds
use num_traits::Float;

use core::f64::consts::TAU;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::linalg::{hermitian_eigen, spectral_map, sym_solve_least_norm, CMat};
use crate::measurement::poisson_draw;
use crate::qstate::{DensityMatrix, StateError};

const ARM: usize = 3;
const DIM: usize = 9;
const PARAMS: usize = DIM * DIM;

/// Projector-set flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MubMode {
    /// 4 bases x 3 states per arm, 144 joint projectors, informationally
    /// complete.
    Full144,
    /// 3 bases x 3 states per arm, 81 joint projectors; rank deficient.
    Paper81,
}

/// One joint product projector `|psi_u>_A (x) |psi_v>_B`.
#[derive(Debug, Clone)]
pub struct JointProjector {
    pub id: usize,
    pub basis_a: usize,
    pub state_a: usize,
    pub basis_b: usize,
    pub state_b: usize,
    vector: Vec<Complex64>,
}

impl JointProjector {
    pub fn vector(&self) -> &[Complex64] {
        &self.vector
    }
}

/// Per-arm MUB states and the ordered joint projector list.
#[derive(Debug, Clone)]
pub struct MubSet {
    mode: MubMode,
    /// `arm_states[basis][state][component]`, identical for both arms.
    arm_states: Vec<Vec<Vec<Complex64>>>,
    joint: Vec<JointProjector>,
    /// Sum over projectors of `<psi|rho|psi>` for any unit-trace rho
    /// (number of complete basis pairs).
    completeness_constant: f64,
}

impl MubSet {
    pub fn mode(&self) -> MubMode {
        self.mode
    }

    pub fn arm_states(&self) -> &[Vec<Vec<Complex64>>] {
        &self.arm_states
    }

    pub fn projectors(&self) -> &[JointProjector] {
        &self.joint
    }

    pub fn len(&self) -> usize {
        self.joint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint.is_empty()
    }

    pub fn completeness_constant(&self) -> f64 {
        self.completeness_constant
    }

    /// Expected value `<psi_j|rho|psi_j>` for projector `j`.
    pub fn expectation(&self, j: usize, rho: &DensityMatrix) -> f64 {
        rho.matrix().quadratic_form(self.joint[j].vector())
    }
}

/// Build the qutrit MUB projector set. The per-arm bases are, in order:
/// computational, then the three Fourier-quadratic bases `k = 0, 1, 2`
/// (`Paper81` keeps only `k = 0, 1`).
pub fn build_mub_set(mode: MubMode) -> MubSet {
    let omega = Complex64::from_polar(1.0, TAU / 3.0);
    let mut arm_states: Vec<Vec<Vec<Complex64>>> = Vec::new();
    // computational
    arm_states.push(
        (0..ARM)
            .map(|v| {
                (0..ARM)
                    .map(|j| {
                        if j == v {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect(),
    );
    let fourier_count = match mode {
        MubMode::Full144 => 3,
        MubMode::Paper81 => 2,
    };
    let norm = 1.0 / (ARM as f64).sqrt();
    for k in 0..fourier_count {
        arm_states.push(
            (0..ARM)
                .map(|v| {
                    (0..ARM)
                        .map(|j| {
                            let exponent = ((k * j * j + v * j) % 3) as f64;
                            omega.powf(exponent) * norm
                        })
                        .collect()
                })
                .collect(),
        );
    }
    let mut joint = Vec::new();
    let mut id = 0;
    for (ba, states_a) in arm_states.iter().enumerate() {
        for (sa, va) in states_a.iter().enumerate() {
            for (bb, states_b) in arm_states.iter().enumerate() {
                for (sb, vb) in states_b.iter().enumerate() {
                    let mut vector = vec![Complex64::new(0.0, 0.0); DIM];
                    for i in 0..ARM {
                        for j in 0..ARM {
                            vector[i * ARM + j] = va[i] * vb[j];
                        }
                    }
                    joint.push(JointProjector {
                        id,
                        basis_a: ba,
                        state_a: sa,
                        basis_b: bb,
                        state_b: sb,
                        vector,
                    });
                    id += 1;
                }
            }
        }
    }
    let completeness_constant = (arm_states.len() * arm_states.len()) as f64;
    MubSet {
        mode,
        arm_states,
        joint,
        completeness_constant,
    }
}

/// Measured (or expected) counts per projector.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyCounts {
    pub records: Vec<TomoRecord>,
}

/// One projector's record; `counts` is kept as a float so noiseless
/// expected-count sets stay exact.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TomoRecord {
    pub projector_id: usize,
    pub counts: f64,
    pub integration_time: f64,
}

impl TomographyCounts {
    pub fn total(&self) -> f64 {
        self.records.iter().map(|r| r.counts).sum()
    }
}

/// Errors from the tomography module.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TomographyError {
    #[error("counts refer to projector id {id}, set has {len}")]
    BadProjectorId { id: usize, len: usize },
    #[error("counts must cover every projector exactly once ({got} records for {want} projectors)")]
    WrongRecordCount { got: usize, want: usize },
    #[error("all counts are zero")]
    DegenerateCounts,
    #[error("negative count {value} at projector {id}")]
    NegativeCount { id: usize, value: f64 },
    #[error("{name} must be strictly positive")]
    NonPositive { name: &'static str },
    #[error("maximum-likelihood search did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },
    #[error("bootstrap needs at least 100 resamples, got {got}")]
    TooFewResamples { got: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

/// Poisson-distributed counts with mean `rate * time * <psi_j|rho|psi_j>`,
/// deterministic per seed; projectors are drawn in id order.
pub fn simulate_tomography(
    rho: &DensityMatrix,
    mub: &MubSet,
    rate: f64,
    time: f64,
    seed: u64,
) -> Result<TomographyCounts, TomographyError> {
    if !(rate > 0.0) {
        return Err(TomographyError::NonPositive { name: "rate" });
    }
    if !(time > 0.0) {
        return Err(TomographyError::NonPositive { name: "time" });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let records = (0..mub.len())
        .map(|j| {
            let mean = rate * time * mub.expectation(j, rho);
            TomoRecord {
                projector_id: j,
                counts: poisson_draw(mean.max(0.0), &mut rng) as f64,
                integration_time: time,
            }
        })
        .collect();
    Ok(TomographyCounts { records })
}

/// Noiseless expected counts (float-valued) for round-trip work.
pub fn expected_tomography(
    rho: &DensityMatrix,
    mub: &MubSet,
    rate: f64,
    time: f64,
) -> TomographyCounts {
    let records = (0..mub.len())
        .map(|j| TomoRecord {
            projector_id: j,
            counts: rate * time * mub.expectation(j, rho),
            integration_time: time,
        })
        .collect();
    TomographyCounts { records }
}

fn counts_vector(counts: &TomographyCounts, mub: &MubSet) -> Result<Vec<f64>, TomographyError> {
    if counts.records.len() != mub.len() {
        return Err(TomographyError::WrongRecordCount {
            got: counts.records.len(),
            want: mub.len(),
        });
    }
    let mut n = vec![f64::NAN; mub.len()];
    for r in &counts.records {
        if r.projector_id >= mub.len() {
            return Err(TomographyError::BadProjectorId {
                id: r.projector_id,
                len: mub.len(),
            });
        }
        if r.counts < 0.0 || !r.counts.is_finite() {
            return Err(TomographyError::NegativeCount {
                id: r.projector_id,
                value: r.counts,
            });
        }
        n[r.projector_id] = r.counts;
    }
    if n.iter().any(|x| x.is_nan()) {
        return Err(TomographyError::WrongRecordCount {
            got: counts.records.len(),
            want: mub.len(),
        });
    }
    Ok(n)
}

/// The nine SU(3) generator matrices scaled so `Tr(g_a g_b) = 2 delta_ab`:
/// `sqrt(2/3) I` plus the eight Gell-Mann matrices.
pub fn operator_basis() -> Vec<CMat> {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let from_rows = |rows: [[Complex64; 3]; 3]| {
        CMat::from_fn(3, |r, c| rows[r][c])
    };
    let s3 = 1.0 / 3.0f64.sqrt();
    vec![
        CMat::identity(3).scale(Complex64::new((2.0f64 / 3.0).sqrt(), 0.0)),
        from_rows([[z, one, z], [one, z, z], [z, z, z]]),
        from_rows([[z, -i, z], [i, z, z], [z, z, z]]),
        from_rows([[one, z, z], [z, -one, z], [z, z, z]]),
        from_rows([[z, z, one], [z, z, z], [one, z, z]]),
        from_rows([[z, z, -i], [z, z, z], [i, z, z]]),
        from_rows([[z, z, z], [z, z, one], [z, one, z]]),
        from_rows([[z, z, z], [z, z, -i], [z, i, z]]),
        CMat::from_fn(3, |r, c| {
            if r != c {
                z
            } else if r < 2 {
                Complex64::new(s3, 0.0)
            } else {
                Complex64::new(-2.0 * s3, 0.0)
            }
        }),
    ]
}

/// Linear inversion output; `rho` is Hermitian and unit trace but may fail
/// positivity when the counts are noisy.
#[derive(Debug, Clone)]
pub struct LinearReconstruction {
    pub rho: DensityMatrix,
    /// Numerical rank of the projector Gram matrix (81 when complete).
    pub gram_rank: usize,
    /// False for rank-deficient projector sets (`Paper81`), where the
    /// returned matrix is the flagged least-norm solution.
    pub informationally_complete: bool,
}

/// Least-squares inversion of the projector expectations over the
/// `g_j (x) g_k` operator basis, with the trace renormalized to one.
pub fn linear_reconstruct(
    counts: &TomographyCounts,
    mub: &MubSet,
) -> Result<LinearReconstruction, TomographyError> {
    let n = counts_vector(counts, mub)?;
    if n.iter().all(|&x| x == 0.0) {
        return Err(TomographyError::DegenerateCounts);
    }
    let basis = operator_basis();
    let joint_basis: Vec<CMat> = (0..PARAMS)
        .map(|p| basis[p / DIM].kron(&basis[p % DIM]))
        .collect();
    // design matrix A[j][p] = <psi_j| g_p |psi_j>
    let m = mub.len();
    let mut design = vec![0.0f64; m * PARAMS];
    for (j, proj) in mub.projectors().iter().enumerate() {
        for (p, op) in joint_basis.iter().enumerate() {
            design[j * PARAMS + p] = op.quadratic_form(proj.vector());
        }
    }
    // normal equations G r = A^T n
    let mut gram = vec![0.0f64; PARAMS * PARAMS];
    let mut rhs = vec![0.0f64; PARAMS];
    for j in 0..m {
        let row = &design[j * PARAMS..(j + 1) * PARAMS];
        for a in 0..PARAMS {
            rhs[a] += row[a] * n[j];
            for b in a..PARAMS {
                gram[a * PARAMS + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..PARAMS {
        for b in 0..a {
            gram[a * PARAMS + b] = gram[b * PARAMS + a];
        }
    }
    let (coeffs, rank) = sym_solve_least_norm(&gram, PARAMS, &rhs, 1e-10);
    let mut raw = CMat::zeros(DIM);
    for (p, op) in joint_basis.iter().enumerate() {
        if coeffs[p] != 0.0 {
            raw = raw.add(&op.scale(Complex64::new(coeffs[p], 0.0)));
        }
    }
    let trace = raw.trace().re;
    if trace.abs() < 1e-300 {
        return Err(TomographyError::DegenerateCounts);
    }
    let rho = DensityMatrix::new(raw.scale(Complex64::new(1.0 / trace, 0.0)), ARM)?;
    Ok(LinearReconstruction {
        rho,
        gram_rank: rank,
        informationally_complete: rank == PARAMS,
    })
}

/// Options for the maximum-likelihood search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Relative likelihood decrease below which an iteration counts as
    /// stalled; five consecutive stalled iterations terminate the search.
    pub relative_tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            relative_tolerance: 1e-10,
        }
    }
}

/// Maximum-likelihood output.
#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub iterations: usize,
    pub likelihood: f64,
    pub gradient_norm: f64,
}

struct MleProblem {
    /// Projector vectors.
    psis: Vec<Vec<Complex64>>,
    counts: Vec<f64>,
    /// Total-rate estimate `sum n / completeness constant`.
    rate: f64,
}

impl MleProblem {
    /// Likelihood and gradient at the triangular parameter vector.
    /// Parameter layout: `t[0..9]` are the real diagonal entries of the
    /// lower-triangular T; the strictly-lower entries follow row-major as
    /// (re, im) pairs. The Wirtinger derivative is
    /// `dL/dTbar_ab = sum_j g_j (psibar_jb u_ja - p_j T_ab) / tr` with
    /// `u_j = T psi_j`, `g_j = dL/dp_j`.
    fn eval(&self, t: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let tmat = t_matrix(t);
        let trace: f64 = tmat.data().iter().map(|c| c.norm_sqr()).sum();
        let want_grad = grad.is_some();
        let mut likelihood = 0.0;
        let mut accum = CMat::zeros(DIM); // sum_j g_j |u_j><psi_j| / tr
        let mut t_coeff = 0.0; // sum_j g_j p_j / tr, multiplies T itself
        const FLOOR: f64 = 1e-12;
        for (psi, &n_j) in self.psis.iter().zip(&self.counts) {
            let u = tmat.mul_vec(psi);
            let usq: f64 = u.iter().map(|c| c.norm_sqr()).sum();
            let p = usq / trace;
            let diff = self.rate * p - n_j;
            // the floor guards only the denominator; dark projectors with a
            // perfect fit contribute exactly zero
            let denom = p.max(FLOOR);
            likelihood += diff * diff / (2.0 * self.rate * denom);
            if want_grad {
                let dl_dp = if p > FLOOR {
                    self.rate / 2.0 - n_j * n_j / (2.0 * self.rate * p * p)
                } else {
                    diff / FLOOR
                };
                let scale = dl_dp / trace;
                for a in 0..DIM {
                    let ua = u[a] * scale;
                    if ua != Complex64::new(0.0, 0.0) {
                        for b in 0..=a {
                            accum[(a, b)] += ua * psi[b].conj();
                        }
                    }
                }
                t_coeff += dl_dp * p / trace;
            }
        }
        if let Some(g) = grad {
            g.fill(0.0);
            for a in 0..DIM {
                let w = accum[(a, a)] - tmat[(a, a)] * t_coeff;
                g[a] = 2.0 * w.re;
                for b in 0..a {
                    let w = accum[(a, b)] - tmat[(a, b)] * t_coeff;
                    let base = off_diag_index(a, b);
                    g[base] = 2.0 * w.re;
                    g[base + 1] = 2.0 * w.im;
                }
            }
        }
        likelihood
    }
}

/// Index of the (re) slot for strictly-lower entry (a, b), a > b.
fn off_diag_index(a: usize, b: usize) -> usize {
    // entries (1,0), (2,0), (2,1), (3,0) ... row-major strict lower triangle
    let k = a * (a - 1) / 2 + b;
    DIM + 2 * k
}

fn t_matrix(t: &[f64]) -> CMat {
    let mut m = CMat::zeros(DIM);
    for a in 0..DIM {
        m[(a, a)] = Complex64::new(t[a], 0.0);
        for b in 0..a {
            let base = off_diag_index(a, b);
            m[(a, b)] = Complex64::new(t[base], t[base + 1]);
        }
    }
    m
}

fn params_from_t(tmat: &CMat) -> Vec<f64> {
    let mut t = vec![0.0f64; PARAMS];
    for a in 0..DIM {
        t[a] = tmat[(a, a)].re;
        for b in 0..a {
            let base = off_diag_index(a, b);
            t[base] = tmat[(a, b)].re;
            t[base + 1] = tmat[(a, b)].im;
        }
    }
    t
}

/// Lower-triangular T with `T^dagger T = rho` for PSD `rho` (eigenvalues
/// clipped at a small floor first so semidefinite inputs are accepted).
fn triangular_from_density(rho: &DensityMatrix) -> CMat {
    let floored = spectral_map(rho.matrix(), |l| l.max(1e-10));
    let trace = floored.trace().re;
    let m = floored.scale(Complex64::new(1.0 / trace, 0.0));
    // reversal trick: J chol(J m J) J is upper-triangular U with U U^dag = m,
    // so T = U^dagger is lower-triangular with T^dag T = m
    let dim = m.dim();
    let rev = CMat::from_fn(dim, |i, j| m[(dim - 1 - i, dim - 1 - j)]);
    let c = cholesky_lower(&rev);
    let u = CMat::from_fn(dim, |i, j| c[(dim - 1 - i, dim - 1 - j)]);
    u.adjoint()
}

/// Cholesky factor `L` (lower) with `L L^dagger = m` for Hermitian positive
/// definite `m`; tiny diagonal jitter absorbs rounding.
fn cholesky_lower(m: &CMat) -> CMat {
    let n = m.dim();
    let mut l = CMat::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)].conj();
            }
            if i == j {
                let d = sum.re.max(1e-300);
                l[(i, j)] = Complex64::new(d.sqrt(), 0.0);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    l
}

/// Minimize the count-weighted squared-residual likelihood over the
/// triangular parameterization `rho(t) = T^dagger T / Tr(T^dagger T)`,
/// starting from `init`. Quasi-Newton with backtracking; a derivative-free
/// compass search takes over if the line search stalls.
pub fn mle_reconstruct(
    counts: &TomographyCounts,
    mub: &MubSet,
    init: &DensityMatrix,
    options: &MleOptions,
) -> Result<MleResult, TomographyError> {
    let n = counts_vector(counts, mub)?;
    if n.iter().all(|&x| x == 0.0) {
        return Err(TomographyError::DegenerateCounts);
    }
    let total: f64 = n.iter().sum();
    let problem = MleProblem {
        psis: mub.projectors().iter().map(|p| p.vector().to_vec()).collect(),
        counts: n,
        rate: total / mub.completeness_constant(),
    };

    let mut x = params_from_t(&triangular_from_density(init));
    let mut grad = vec![0.0f64; PARAMS];
    let mut likelihood = problem.eval(&x, Some(&mut grad));

    // inverse-Hessian approximation
    let mut h: Vec<f64> = {
        let mut ident = vec![0.0f64; PARAMS * PARAMS];
        for i in 0..PARAMS {
            ident[i * PARAMS + i] = 1.0;
        }
        ident
    };
    let mut stalled = 0usize;
    let mut iterations = 0usize;
    while iterations < options.max_iterations {
        iterations += 1;
        // d = -H g
        let mut dir = vec![0.0f64; PARAMS];
        for i in 0..PARAMS {
            let mut acc = 0.0;
            for j in 0..PARAMS {
                acc += h[i * PARAMS + j] * grad[j];
            }
            dir[i] = -acc;
        }
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let mut step = 1.0;
        let mut improved = false;
        let mut x_new = x.clone();
        let mut l_new = likelihood;
        if slope < 0.0 {
            for _ in 0..50 {
                for i in 0..PARAMS {
                    x_new[i] = x[i] + step * dir[i];
                }
                l_new = problem.eval(&x_new, None);
                if l_new.is_finite() && l_new <= likelihood + 1e-4 * step * slope {
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if !improved {
            // compass fallback along coordinates
            let mut alpha = 1e-2 * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max));
            let mut moved = false;
            'outer: for _ in 0..60 {
                for i in 0..PARAMS {
                    for sgn in [1.0, -1.0] {
                        let mut cand = x.clone();
                        cand[i] += sgn * alpha;
                        let l_c = problem.eval(&cand, None);
                        if l_c < likelihood {
                            x_new = cand;
                            l_new = l_c;
                            moved = true;
                            break 'outer;
                        }
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    break;
                }
            }
            if !moved {
                // true stationary point for the search
                let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                let tmat = t_matrix(&x);
                let rho = density_from_t(&tmat)?;
                return Ok(MleResult {
                    rho,
                    iterations,
                    likelihood,
                    gradient_norm: gnorm,
                });
            }
        }

        let mut grad_new = vec![0.0f64; PARAMS];
        let l_eval = problem.eval(&x_new, Some(&mut grad_new));
        debug_assert!((l_eval - l_new).abs() <= 1e-9 * (1.0 + l_new.abs()));
        let rel_drop = (likelihood - l_new) / likelihood.abs().max(1e-300);
        // a noiseless fit drives L itself to zero, where the relative-drop
        // rule alone would never fire
        let essentially_perfect = l_new <= 1e-12 * problem.rate.max(1.0);
        if rel_drop < options.relative_tolerance || essentially_perfect {
            stalled += 1;
        } else {
            stalled = 0;
        }

        // BFGS update
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let rho_b = 1.0 / sy;
            // H = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let mut hy = vec![0.0f64; PARAMS];
            for i in 0..PARAMS {
                let mut acc = 0.0;
                for j in 0..PARAMS {
                    acc += h[i * PARAMS + j] * y[j];
                }
                hy[i] = acc;
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..PARAMS {
                for j in 0..PARAMS {
                    h[i * PARAMS + j] += -rho_b * (s[i] * hy[j] + hy[i] * s[j])
                        + rho_b * rho_b * yhy * s[i] * s[j]
                        + rho_b * s[i] * s[j];
                }
            }
        }

        x = x_new;
        grad = grad_new;
        likelihood = l_new;
        if stalled >= 5 {
            let tmat = t_matrix(&x);
            let rho = density_from_t(&tmat)?;
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            return Ok(MleResult {
                rho,
                iterations,
                likelihood,
                gradient_norm: gnorm,
            });
        }
    }
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    Err(TomographyError::NonConvergence {
        iterations,
        gradient_norm: gnorm,
    })
}

fn density_from_t(tmat: &CMat) -> Result<DensityMatrix, TomographyError> {
    let rho_raw = tmat.adjoint().mul(tmat);
    let trace = rho_raw.trace().re;
    Ok(DensityMatrix::new(
        rho_raw.scale(Complex64::new(1.0 / trace, 0.0)),
        ARM,
    )?)
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2` through the
/// Hermitian eigendecomposition; symmetric in its arguments and clamped to
/// `[0, 1]` against rounding.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let sqrt_rho = spectral_map(rho.matrix(), |l| l.max(0.0).sqrt());
    let inner = sqrt_rho.mul(sigma.matrix()).mul(&sqrt_rho);
    let eig = hermitian_eigen(&inner);
    // eigenvalues at rounding level get clipped; sqrt would amplify the
    // noise floor to ~1e-8 otherwise
    let floor = 1e-12
        * eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let traced: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > floor)
        .map(|l| l.sqrt())
        .sum();
    (traced * traced).clamp(0.0, 1.0)
}

/// Linear entropy `1 - Tr(rho^2)`.
pub fn linear_entropy(rho: &DensityMatrix) -> f64 {
    1.0 - rho.purity()
}

/// Bootstrap standard deviations under Poisson resampling of the counts.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub fidelity_std: f64,
    pub entropy_std: f64,
    /// Per-element deviation `sqrt(var(Re) + var(Im))`, row-major 9 x 9.
    pub element_std: Vec<f64>,
    pub resamples_used: usize,
    pub failures: usize,
}

/// Poisson-resample the counts, re-run the MLE per resample (initialized at
/// the base reconstruction) and report sample standard deviations of the
/// fidelity against `target`, the linear entropy, and each matrix element.
/// Deterministic per seed; failed resamples are counted and skipped.
pub fn bootstrap_errors(
    counts: &TomographyCounts,
    mub: &MubSet,
    target: &DensityMatrix,
    resamples: usize,
    seed: u64,
    options: &MleOptions,
) -> Result<BootstrapResult, TomographyError> {
    if resamples < 100 {
        return Err(TomographyError::TooFewResamples { got: resamples });
    }
    let n = counts_vector(counts, mub)?;
    let base_init = match linear_reconstruct(counts, mub) {
        Ok(lin) => lin.rho,
        Err(_) => DensityMatrix::maximally_mixed(ARM),
    };
    let base = mle_reconstruct(counts, mub, &base_init, options)?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut fids = Vec::with_capacity(resamples);
    let mut ents = Vec::with_capacity(resamples);
    let mut elem_re: Vec<Vec<f64>> = vec![Vec::with_capacity(resamples); DIM * DIM];
    let mut elem_im: Vec<Vec<f64>> = vec![Vec::with_capacity(resamples); DIM * DIM];
    let mut failures = 0usize;
    for _ in 0..resamples {
        let resampled = TomographyCounts {
            records: n
                .iter()
                .enumerate()
                .map(|(j, &mean)| TomoRecord {
                    projector_id: j,
                    counts: poisson_draw(mean, &mut rng) as f64,
                    integration_time: counts.records[j].integration_time,
                })
                .collect(),
        };
        match mle_reconstruct(&resampled, mub, &base.rho, options) {
            Ok(res) => {
                fids.push(fidelity(target, &res.rho));
                ents.push(linear_entropy(&res.rho));
                for (k, c) in res.rho.matrix().data().iter().enumerate() {
                    elem_re[k].push(c.re);
                    elem_im[k].push(c.im);
                }
            }
            Err(_) => failures += 1,
        }
    }
    let element_std = (0..DIM * DIM)
        .map(|k| (variance(&elem_re[k]) + variance(&elem_im[k])).sqrt())
        .collect();
    Ok(BootstrapResult {
        fidelity_std: variance(&fids).sqrt(),
        entropy_std: variance(&ents).sqrt(),
        element_std,
        resamples_used: fids.len(),
        failures,
    })
}

fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
