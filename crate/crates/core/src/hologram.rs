//! Amplitude-encoded phase-only holograms for spatial light modulators.
//!
//! A target field `E(x, y)` is written onto a phase-only panel as
//! `Phi = M(A) * wrap(Arg(E) + Lambda)`, where `A = |E| / max|E|` is the
//! normalized amplitude, `Lambda` a blazed grating ramp that steers the
//! modulated light into the first diffraction order, and `M` in `[0, 1]` the
//! modulation depth solving the normalized-sinc diffraction-efficiency
//! relation `A = sinc(pi (M - 1))`. LG superposition fields get the
//! per-charge waist adjustment that equalizes ring areas across topological
//! charges. Quantization and the graymap byte encoding are bit-deterministic.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
#[allow(unused_imports)] // trait needed for float math in no_std builds
use num_traits::Float;

use core::f64::consts::TAU;
use num_complex::Complex64;

use crate::lg::{adjusted_waist, lg_field, BeamGeometry, LGIndex};

/// Phase-only SLM panel description.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlmPanel {
    pub width: usize,
    pub height: usize,
    /// Pixel pitch (meters per pixel).
    pub pitch: f64,
    /// Phase quantization depth (levels over one 2 pi wrap), 2..=256.
    pub phase_levels: u16,
}

impl SlmPanel {
    pub fn new(
        width: usize,
        height: usize,
        pitch: f64,
        phase_levels: u16,
    ) -> Result<Self, HologramError> {
        if width == 0 || height == 0 || !(pitch > 0.0) || phase_levels < 2 || phase_levels > 256 {
            return Err(HologramError::InvalidPanel {
                width,
                height,
                phase_levels,
            });
        }
        Ok(Self {
            width,
            height,
            pitch,
            phase_levels,
        })
    }

    /// Full-HD infrared SLM: 1920 x 1080, 8 um pitch, 256 levels.
    pub fn infrared_1080p() -> Self {
        Self {
            width: 1920,
            height: 1080,
            pitch: 8e-6,
            phase_levels: 256,
        }
    }
}

/// Blazed grating: a linear phase ramp of `2 pi` per `period_px` pixels
/// along the direction `angle` (radians from the x axis).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlazeSpec {
    pub period_px: f64,
    pub angle: f64,
}

impl Default for BlazeSpec {
    fn default() -> Self {
        Self {
            period_px: 8.0,
            angle: 0.0,
        }
    }
}

impl BlazeSpec {
    fn phase_at(&self, ix: usize, iy: usize) -> f64 {
        let along = ix as f64 * self.angle.cos() + iy as f64 * self.angle.sin();
        crate::wrap_tau(TAU * along / self.period_px)
    }
}

/// The target field written onto the panel.
#[derive(Debug, Clone, PartialEq)]
pub enum HologramField {
    /// Unit amplitude, zero phase everywhere (pure grating test pattern).
    Uniform,
    /// `sum_L C_L LG_{L, p=0}` at the waist plane, each term using
    /// `adjusted_waist(L, waist)`.
    LgSuperposition {
        terms: Vec<(i32, Complex64)>,
        waist: f64,
    },
}

/// Errors from hologram encoding.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HologramError {
    #[error("invalid panel: {width} x {height}, {phase_levels} levels (need nonzero dims, 2..=256 levels)")]
    InvalidPanel {
        width: usize,
        height: usize,
        phase_levels: u16,
    },
    #[error("blaze period must be strictly positive, got {period_px}")]
    InvalidBlaze { period_px: f64 },
    #[error("field vanishes on the whole panel")]
    ZeroField,
    #[error("field term list is empty")]
    EmptyField,
    #[error("amplitude {value} outside [0, 1]")]
    AmplitudeOutOfRange { value: f64 },
}

/// Rendered hologram: the continuous phase reference and its quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct HologramImage {
    width: usize,
    height: usize,
    phase_levels: u16,
    /// Continuous phase in `[0, 2 pi)`, row-major.
    continuous: Vec<f64>,
    /// `round(phase / 2 pi * levels) mod levels`, row-major.
    quantized: Vec<u8>,
}

impl HologramImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn phase_levels(&self) -> u16 {
        self.phase_levels
    }

    pub fn continuous(&self) -> &[f64] {
        &self.continuous
    }

    pub fn quantized(&self) -> &[u8] {
        &self.quantized
    }

    /// 8-bit binary portable graymap bytes; identical input produces
    /// identical bytes on every platform.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut header = String::new();
        let _ = write!(
            header,
            "P5\n{} {}\n{}\n",
            self.width,
            self.height,
            self.phase_levels - 1
        );
        let mut out = header.into_bytes();
        out.extend_from_slice(&self.quantized);
        out
    }
}

fn quantize(phase: f64, levels: u16) -> u8 {
    let scaled = phase / TAU * levels as f64;
    let rounded = libm::round(scaled) as u32;
    (rounded % levels as u32) as u8
}

/// Monotone lookup table for the inverse of the diffraction-efficiency
/// relation `A = sinc(pi (M - 1))`, with linear interpolation between 1024
/// knots (interpolation error below 1e-6).
#[derive(Debug, Clone)]
pub struct SincInverse {
    efficiencies: Vec<f64>,
}

/// `sin(x)/x` with the removable singularity filled.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Diffraction efficiency of modulation depth `M`.
pub fn modulation_efficiency(m: f64) -> f64 {
    sinc(core::f64::consts::PI * (m - 1.0))
}

impl SincInverse {
    pub const KNOTS: usize = 1024;

    pub fn new() -> Self {
        let efficiencies = (0..Self::KNOTS)
            .map(|k| modulation_efficiency(k as f64 / (Self::KNOTS - 1) as f64))
            .collect();
        Self { efficiencies }
    }

    /// Modulation depth `M` with `modulation_efficiency(M) = a`.
    pub fn invert(&self, a: f64) -> Result<f64, HologramError> {
        if !(0.0..=1.0).contains(&a) {
            return Err(HologramError::AmplitudeOutOfRange { value: a });
        }
        if a == 0.0 {
            return Ok(0.0);
        }
        if a == 1.0 {
            return Ok(1.0);
        }
        // binary search over the monotone table
        let e = &self.efficiencies;
        let mut lo = 0;
        let mut hi = Self::KNOTS - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if e[mid] <= a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (a - e[lo]) / (e[hi] - e[lo]);
        Ok((lo as f64 + t) / (Self::KNOTS - 1) as f64)
    }
}

impl Default for SincInverse {
    fn default() -> Self {
        Self::new()
    }
}

/// Convenience single-value inversion (builds a fresh table; encoders reuse
/// one table across pixels).
pub fn sinc_amplitude_inverse(a: f64) -> Result<f64, HologramError> {
    SincInverse::new().invert(a)
}

/// Evaluate the LG superposition on the panel's pixel grid at the waist
/// plane. Pixel `(ix, iy)` sits at physical position
/// `((ix - (w-1)/2) * pitch, (iy - (h-1)/2) * pitch)`; the grid is returned
/// row-major.
pub fn superposition_field_on_panel(
    terms: &[(i32, Complex64)],
    waist: f64,
    panel: &SlmPanel,
) -> Result<Vec<Complex64>, HologramError> {
    if terms.is_empty() {
        return Err(HologramError::EmptyField);
    }
    // wavelength only enters through z-dependence; the waist plane needs none
    let geoms: Vec<(Complex64, BeamGeometry, LGIndex)> = terms
        .iter()
        .map(|&(l, c)| {
            let geom = BeamGeometry {
                waist: adjusted_waist(l, waist),
                wavelength: 780e-9,
            };
            (c, geom, LGIndex::new(l, 0))
        })
        .collect();
    let cx = (panel.width as f64 - 1.0) / 2.0;
    let cy = (panel.height as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(panel.width * panel.height);
    for iy in 0..panel.height {
        for ix in 0..panel.width {
            let x = (ix as f64 - cx) * panel.pitch;
            let y = (iy as f64 - cy) * panel.pitch;
            let r = (x * x + y * y).sqrt();
            let phi = y.atan2(x);
            let mut e = Complex64::new(0.0, 0.0);
            for (c, geom, idx) in &geoms {
                e += c * lg_field(*idx, geom, r, phi, 0.0);
            }
            out.push(e);
        }
    }
    Ok(out)
}

/// Render the amplitude-encoded phase-only hologram of `field` with the
/// given blaze.
pub fn encode_hologram(
    field: &HologramField,
    panel: &SlmPanel,
    blaze: &BlazeSpec,
) -> Result<HologramImage, HologramError> {
    if !(blaze.period_px > 0.0) {
        return Err(HologramError::InvalidBlaze {
            period_px: blaze.period_px,
        });
    }
    let n = panel.width * panel.height;
    let (amplitudes, args): (Vec<f64>, Vec<f64>) = match field {
        HologramField::Uniform => (alloc::vec![1.0; n], alloc::vec![0.0; n]),
        HologramField::LgSuperposition { terms, waist } => {
            let grid = superposition_field_on_panel(terms, *waist, panel)?;
            let max = grid.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
            if max <= 0.0 {
                return Err(HologramError::ZeroField);
            }
            grid.iter().map(|e| (e.norm() / max, e.arg())).unzip()
        }
    };
    let inverse = SincInverse::new();
    let mut continuous = Vec::with_capacity(n);
    let mut quantized = Vec::with_capacity(n);
    for iy in 0..panel.height {
        for ix in 0..panel.width {
            let k = iy * panel.width + ix;
            let m = inverse.invert(amplitudes[k].min(1.0))?;
            let wrapped = crate::wrap_tau(args[k] + blaze.phase_at(ix, iy));
            let phase = m * wrapped;
            continuous.push(phase);
            quantized.push(quantize(phase, panel.phase_levels));
        }
    }
    Ok(HologramImage {
        width: panel.width,
        height: panel.height,
        phase_levels: panel.phase_levels,
        continuous,
        quantized,
    })
}
