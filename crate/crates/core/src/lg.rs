//! Laguerre-Gauss (LG) beam modes in cylindrical coordinates.
//!
//! An LG mode is labelled by an azimuthal topological charge `l` (signed) and
//! a radial index `p >= 0`. The field carries the azimuthal phase `exp(il*phi)`,
//! a Gaussian envelope with the z-dependent waist `w(z) = w0*sqrt(1+(z/z_r)^2)`,
//! a wavefront-curvature phase and the Gouy phase `(|l|+2p+1)*atan(z/z_r)`,
//! and is normalized so that the transverse intensity integrates to one at
//! every propagation distance.

use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // trait needed for float math in no_std builds
use num_traits::Float;

/// Azimuthal/radial mode index of a Laguerre-Gauss mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LGIndex {
    /// Azimuthal topological charge.
    pub l: i32,
    /// Radial index.
    pub p: u32,
}

impl LGIndex {
    pub const fn new(l: i32, p: u32) -> Self {
        Self { l, p }
    }

    /// |l| as an unsigned integer.
    pub fn abs_l(&self) -> u32 {
        self.l.unsigned_abs()
    }
}

/// Waist and wavelength of a Gaussian beam; the Rayleigh distance is always
/// derived from these two so the three can never disagree.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeamGeometry {
    /// Beam waist at z = 0 (same length unit as all positions).
    pub waist: f64,
    /// Vacuum wavelength (same length unit).
    pub wavelength: f64,
}

impl BeamGeometry {
    /// Construct a geometry; both lengths must be strictly positive.
    pub fn new(waist: f64, wavelength: f64) -> Result<Self, LgError> {
        if !(waist > 0.0) {
            return Err(LgError::NonPositiveLength { name: "waist" });
        }
        if !(wavelength > 0.0) {
            return Err(LgError::NonPositiveLength { name: "wavelength" });
        }
        Ok(Self { waist, wavelength })
    }

    /// Rayleigh distance `z_r = pi * w0^2 / lambda`.
    pub fn rayleigh(&self) -> f64 {
        PI * self.waist * self.waist / self.wavelength
    }

    /// Wavenumber `k = 2 pi / lambda`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Beam radius `w(z) = w0 * sqrt(1 + (z/z_r)^2)`.
    pub fn waist_at(&self, z: f64) -> f64 {
        let zr = self.rayleigh();
        self.waist * (1.0 + (z / zr) * (z / zr)).sqrt()
    }

    /// Gouy angle `atan(z / z_r)`.
    pub fn gouy_angle(&self, z: f64) -> f64 {
        (z / self.rayleigh()).atan()
    }

    /// Curvature phase exponent `-k r^2 z / (2 (z^2 + z_r^2))`.
    pub fn curvature_phase(&self, r: f64, z: f64) -> f64 {
        let zr = self.rayleigh();
        -self.wavenumber() * r * r * z / (2.0 * (z * z + zr * zr))
    }
}

/// Errors from the LG mode helpers.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LgError {
    #[error("{name} must be strictly positive")]
    NonPositiveLength { name: &'static str },
    #[error("double factorial of {n} overflows")]
    DoubleFactorialOverflow { n: u64 },
}

/// Double factorial `n!! = n (n-2) (n-4) ...`, with `0!! = 1!! = 1`.
pub fn double_factorial(n: u64) -> Result<u128, LgError> {
    let mut acc: u128 = 1;
    let mut k = n as u128;
    while k > 1 {
        acc = acc
            .checked_mul(k)
            .ok_or(LgError::DoubleFactorialOverflow { n })?;
        k -= 2;
    }
    Ok(acc)
}

/// Natural log of `n!`. Exact table lookup below 21, log-domain sum above,
/// so large mode indices never overflow intermediate factorials.
pub fn ln_factorial(n: u64) -> f64 {
    if n <= 20 {
        factorial_f64(n).ln()
    } else {
        // lgamma(n+1) via direct summation; n stays small enough here that
        // the O(n) loop is irrelevant.
        let mut acc = factorial_f64(20).ln();
        let mut k = 21u64;
        while k <= n {
            acc += (k as f64).ln();
            k += 1;
        }
        acc
    }
}

/// `n!` as f64, exact for n <= 20.
pub fn factorial_f64(n: u64) -> f64 {
    const TABLE: [f64; 21] = [
        1.0,
        1.0,
        2.0,
        6.0,
        24.0,
        120.0,
        720.0,
        5040.0,
        40320.0,
        362880.0,
        3628800.0,
        39916800.0,
        479001600.0,
        6227020800.0,
        87178291200.0,
        1307674368000.0,
        20922789888000.0,
        355687428096000.0,
        6402373705728000.0,
        121645100408832000.0,
        2432902008176640000.0,
    ];
    if n <= 20 {
        TABLE[n as usize]
    } else {
        ln_factorial(n).exp()
    }
}

/// Generalized Laguerre polynomial `L_p^alpha(x)` by the stable three-term
/// recurrence `(k+1) L_{k+1} = (2k+1+alpha-x) L_k - (k+alpha) L_{k-1}`.
pub fn associated_laguerre(p: u32, alpha: u32, x: f64) -> f64 {
    let a = alpha as f64;
    if p == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0; // L_0
    let mut l = 1.0 + a - x; // L_1
    for k in 1..p {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * l - (kf + a) * lm1) / (kf + 1.0);
        lm1 = l;
        l = next;
    }
    l
}

/// Waist rescaling `w_L = w0 * 2^{-|L|} (2|L|+1)!! / |L|!` that equalizes the
/// bright-ring area of holograms across topological charges.
pub fn adjusted_waist(l: i32, w0: f64) -> f64 {
    let n = l.unsigned_abs() as u64;
    if n <= 15 {
        // exact in f64 for small charges
        let dfac = match double_factorial(2 * n + 1) {
            Ok(v) => v as f64,
            Err(_) => unreachable!(),
        };
        w0 * dfac / (libm::exp2(n as f64) * factorial_f64(n))
    } else {
        // (2n+1)!! = (2n+1)! / (2^n n!), assembled in log domain
        let ln = ln_factorial(2 * n + 1) - ln_factorial(n) * 2.0 - 2.0 * (n as f64) * core::f64::consts::LN_2;
        w0 * ln.exp()
    }
}

/// Complex LG field amplitude at cylindrical position `(r, phi, z)`.
///
/// Normalized so that `integral |LG|^2 r dr dphi = 1` at every `z`. The
/// phase convention matches a forward-propagating beam with the plane-wave
/// factor `exp(ikz)` dropped: azimuthal `l*phi`, curvature
/// `-k r^2 z / (2(z^2+z_r^2))`, Gouy `+(|l|+2p+1) atan(z/z_r)`.
pub fn lg_field(index: LGIndex, geom: &BeamGeometry, r: f64, phi: f64, z: f64) -> Complex64 {
    let envelope = lg_radial_envelope(index, geom, r, z);
    let phase = (index.l as f64) * phi
        + geom.curvature_phase(r, z)
        + ((index.abs_l() + 2 * index.p + 1) as f64) * geom.gouy_angle(z);
    envelope * Complex64::from_polar(1.0, phase)
}

/// Real radial envelope of the LG mode (everything except the azimuthal,
/// curvature and Gouy phases): normalization, ring factor, Gaussian and the
/// radial Laguerre polynomial.
pub fn lg_radial_envelope(index: LGIndex, geom: &BeamGeometry, r: f64, z: f64) -> f64 {
    let w = geom.waist_at(z);
    let al = index.abs_l();
    let norm = (2.0 / PI).sqrt()
        * (0.5 * (ln_factorial(index.p as u64) - ln_factorial((index.p + al) as u64))).exp();
    let x = 2.0 * r * r / (w * w);
    let ring = (core::f64::consts::SQRT_2 * r / w).powi(al as i32);
    norm / w * ring * (-r * r / (w * w)).exp() * associated_laguerre(index.p, al, x)
}

/// Same as [`lg_radial_envelope`] with the Gaussian factor `exp(-r^2/w^2)`
/// removed. Quadrature routines fold that factor into their weight function
/// analytically, which keeps large-node evaluations inside f64 range.
pub fn lg_radial_envelope_no_gauss(index: LGIndex, geom: &BeamGeometry, r: f64, z: f64) -> f64 {
    let w = geom.waist_at(z);
    let al = index.abs_l();
    let norm = (2.0 / PI).sqrt()
        * (0.5 * (ln_factorial(index.p as u64) - ln_factorial((index.p + al) as u64))).exp();
    let x = 2.0 * r * r / (w * w);
    let ring = (core::f64::consts::SQRT_2 * r / w).powi(al as i32);
    norm / w * ring * associated_laguerre(index.p, al, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn double_factorial_small() {
        assert_eq!(double_factorial(0).unwrap(), 1);
        assert_eq!(double_factorial(1).unwrap(), 1);
        assert_eq!(double_factorial(5).unwrap(), 15);
        assert_eq!(double_factorial(9).unwrap(), 945);
        assert_eq!(double_factorial(6).unwrap(), 48);
    }

    #[test]
    fn double_factorial_overflow_reported() {
        assert!(matches!(
            double_factorial(201),
            Err(LgError::DoubleFactorialOverflow { n: 201 })
        ));
    }

    #[test]
    fn laguerre_base_cases() {
        assert_eq!(associated_laguerre(0, 7, 123.4), 1.0);
        assert_abs_diff_eq!(associated_laguerre(1, 0, 2.0), -1.0, epsilon = 1e-15);
        // L_1^a(x) = 1 + a - x
        assert_abs_diff_eq!(associated_laguerre(1, 3, 0.5), 3.5, epsilon = 1e-15);
    }

    /// Direct series sum oracle: L_p^a(x) = sum_m (-1)^m C(p+a, p-m) x^m / m!.
    fn laguerre_series(p: u32, alpha: u32, x: f64) -> f64 {
        let mut acc = 0.0;
        for m in 0..=p {
            let binom = (ln_factorial((p + alpha) as u64)
                - ln_factorial((p - m) as u64)
                - ln_factorial((alpha + m) as u64))
            .exp();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * x.powi(m as i32) / factorial_f64(m as u64);
        }
        acc
    }

    #[test]
    fn laguerre_matches_series_oracle() {
        assert_abs_diff_eq!(
            associated_laguerre(3, 2, 0.7),
            laguerre_series(3, 2, 0.7),
            epsilon = 1e-12
        );
        // frozen from the series oracle
        assert_abs_diff_eq!(associated_laguerre(3, 2, 0.7), 4.167833333333333, epsilon = 1e-12);
        for p in 0..6 {
            for alpha in 0..4 {
                for &x in &[0.0, 0.3, 1.7, 4.2] {
                    assert_abs_diff_eq!(
                        associated_laguerre(p, alpha, x),
                        laguerre_series(p, alpha, x),
                        epsilon = 1e-10 * (1.0 + laguerre_series(p, alpha, x).abs())
                    );
                }
            }
        }
    }

    #[test]
    fn adjusted_waist_values() {
        assert_abs_diff_eq!(adjusted_waist(0, 2.5), 2.5, epsilon = 1e-15);
        // 2^{-1} * 3!! / 1! = 1.5
        assert_abs_diff_eq!(adjusted_waist(1, 1.0), 1.5, epsilon = 1e-15);
        // 2^{-2} * 5!! / 2! = 1.875
        assert_abs_diff_eq!(adjusted_waist(2, 1.0), 1.875, epsilon = 1e-15);
        assert_abs_diff_eq!(adjusted_waist(-2, 1.0), 1.875, epsilon = 1e-15);
        // log-domain branch continuous with the exact branch
        let exact15 = adjusted_waist(15, 1.0);
        let ln16 = adjusted_waist(16, 1.0);
        assert!(ln16 > exact15 && ln16 < 2.0 * exact15);
    }

    #[test]
    fn factorials() {
        assert_eq!(factorial_f64(20), 2432902008176640000.0);
        assert_relative_eq!(ln_factorial(25), 58.00360522298052, max_relative = 1e-14);
    }

    #[test]
    fn vortex_core_vanishes() {
        let geom = BeamGeometry::new(1.0, 0.5).unwrap();
        for &(l, p) in &[(1, 0), (-3, 2), (2, 1)] {
            let v = lg_field(LGIndex::new(l, p), &geom, 0.0, 0.3, 0.1);
            assert_eq!(v, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn azimuthal_phase_winding() {
        let geom = BeamGeometry::new(1.0, 0.5).unwrap();
        let idx = LGIndex::new(2, 0);
        let (phi1, phi2) = (0.3, 1.1);
        let a1 = lg_field(idx, &geom, 0.7, phi1, 0.0).arg();
        let a2 = lg_field(idx, &geom, 0.7, phi2, 0.0).arg();
        let diff = (a2 - a1).rem_euclid(2.0 * PI);
        assert_abs_diff_eq!(diff, (2.0 * (phi2 - phi1)).rem_euclid(2.0 * PI), epsilon = 1e-12);
    }

    #[test]
    fn geometry_rejects_nonpositive() {
        assert!(BeamGeometry::new(0.0, 1.0).is_err());
        assert!(BeamGeometry::new(1.0, -2.0).is_err());
    }
}
