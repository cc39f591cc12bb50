//! Initial-data families: generic stream-function data, the small-data
//! family, high-frequency large data and the `a`-scaled instability family.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{tensor_block_norms, vorticity_block_norms};
use crate::error::{Error, Result};
use crate::littlewood_paley::{build_partition, BesovSpec, DyadicPartition};
use crate::model::{vorticity, FlowState, StressField};
use crate::spectral::{derivative, Axis, Grid, ScalarField, SpectralScalar, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Stream,
    SmallFamily,
    RemarkLarge,
    ScaledFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialDataSpec {
    pub kind: DataKind,
    /// Overall multiplier. Unset means 1, or `1/N` for `remark_large`.
    pub amplitude: Option<f64>,
    pub n_freq: u32,
    pub a: f64,
    pub eps0: f64,
    pub seed: u64,
    /// Extra factor on the stress after rescaling (`small_family` only).
    pub tau_weight: f64,
}

impl Default for InitialDataSpec {
    fn default() -> Self {
        Self {
            kind: DataKind::SmallFamily,
            amplitude: None,
            n_freq: 3,
            a: 0.25,
            eps0: 0.01,
            seed: 0,
            tau_weight: 1.0,
        }
    }
}

impl InitialDataSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0) {
            return Err(Error::Invariant {
                invariant: "eps0 > 0",
                value: self.eps0,
            });
        }
        if self.n_freq < 1 {
            return Err(Error::Invariant {
                invariant: "n_freq ≥ 1",
                value: self.n_freq as f64,
            });
        }
        if self.kind == DataKind::ScaledFamily && !(self.a > 0.0 && self.a <= 1.0) {
            return Err(Error::Invariant {
                invariant: "0 < a ≤ 1",
                value: self.a,
            });
        }
        let amp = self.amplitude.unwrap_or(1.0);
        if !amp.is_finite() || !self.tau_weight.is_finite() {
            return Err(Error::Invariant {
                invariant: "finite amplitude",
                value: amp,
            });
        }
        Ok(())
    }

    /// Builds the state this record describes.
    pub fn build(&self, grid: Grid) -> Result<FlowState> {
        self.validate()?;
        match self.kind {
            DataKind::Stream => {
                let psi = stream_template(grid, self.seed)?.scale(self.amplitude.unwrap_or(1.0));
                FlowState::new(from_stream_function(&psi), StressField::zeros(grid), 0.0)
            }
            DataKind::SmallFamily => {
                let s = small_family(grid, self.eps0, self.seed)?;
                let tau = s.tau.scale(self.tau_weight);
                FlowState::new(s.u, tau, 0.0)
            }
            DataKind::RemarkLarge => {
                let n = self.n_freq;
                let amp = self.amplitude.unwrap_or(1.0 / n as f64);
                let tau = remark_large(grid, n, amp)?;
                let u = remark_velocity(grid, n)?;
                FlowState::new(u, tau, 0.0)
            }
            DataKind::ScaledFamily => scaled_family(grid, self.a, self.eps0),
        }
    }
}

/// `u = (d2 psi, -d1 psi)`.
pub fn from_stream_function(psi: &ScalarField) -> VectorField {
    let c = psi.to_spectral();
    VectorField::new(
        derivative(&c, Axis::X2, 1).to_field(),
        derivative(&c, Axis::X1, 1).to_field().scale(-1.0),
    )
    .expect("derivatives share the grid")
}

/// `exp(-|x - c|^2 / w^2)` summed over the nearest periodic images, so the
/// result is smooth across the wrap-around.
pub fn periodic_gaussian(grid: Grid, center: (f64, f64), width: f64) -> Result<ScalarField> {
    let l = grid.length();
    grid.from_fn(|x, y| {
        let mut s = 0.0;
        for p in -1..=1 {
            for q in -1..=1 {
                let dx = x - center.0 + p as f64 * l;
                let dy = y - center.1 + q as f64 * l;
                s += (-(dx * dx + dy * dy) / (width * width)).exp();
            }
        }
        s
    })
}

/// Envelope width of the localized families, in units of the torus side.
pub const ENVELOPE_FRACTION: f64 = 1.0 / 8.0;

fn center(grid: Grid) -> (f64, f64) {
    (0.5 * grid.length(), 0.5 * grid.length())
}

fn phases(seed: u64) -> [f64; 6] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI))
}

/// Gaussian-envelope stream function with one mildly modulated mode per axis.
pub fn stream_template(grid: Grid, seed: u64) -> Result<ScalarField> {
    let g = periodic_gaussian(grid, center(grid), ENVELOPE_FRACTION * grid.length())?;
    let th = phases(seed);
    let b = grid.base_wavenumber();
    let m = grid.from_fn(|x, y| 1.0 + 0.25 * (b * x + th[0]).cos() + 0.25 * (b * y + th[1]).sin())?;
    g.mul(&m)
}

fn stress_template(grid: Grid, seed: u64) -> Result<StressField> {
    let g = periodic_gaussian(grid, center(grid), ENVELOPE_FRACTION * grid.length())?;
    let th = phases(seed);
    let b = grid.base_wavenumber();
    let t11 = grid.from_fn(|x, _| 1.0 + 0.25 * (b * x + th[2]).cos())?;
    let t12 = grid.from_fn(|x, y| 0.5 * (b * (x + y) + th[3]).sin())?;
    let t22 = grid.from_fn(|_, y| 1.0 + 0.25 * (b * y + th[4]).cos())?;
    StressField::new(g.mul(&t11)?, g.mul(&t12)?, g.mul(&t22)?)
}

/// `||(u, tau)||_2 + ||w||_{B^0_{inf,1}} + ||tau||_{B^0_{inf,1}}`.
pub fn smallness_sum(state: &FlowState, part: &DyadicPartition) -> Result<f64> {
    let l2 = (state.u.l2_norm().powi(2) + state.tau.l2_norm().powi(2)).sqrt();
    let spec = BesovSpec::b0_inf_1();
    let w = spec.aggregate(&vorticity_block_norms(&vorticity(&state.u), spec.p, part)?);
    let t = spec.aggregate(&tensor_block_norms(&state.tau, spec.p, part)?);
    Ok(l2 + w + t)
}

/// Rescales `(u, tau)` so that [`smallness_sum`] equals `4 eps0`.
///
/// Every term is a norm, hence 1-homogeneous, so one multiplication lands on
/// the target up to round-off.
pub fn rescale_to_budget(u: VectorField, tau: StressField, eps0: f64) -> Result<FlowState> {
    if !(eps0 > 0.0) {
        return Err(Error::Invariant {
            invariant: "eps0 > 0",
            value: eps0,
        });
    }
    let part = build_partition(u.grid())?;
    let template = FlowState::new(u, tau, 0.0)?;
    let s = smallness_sum(&template, &part)?;
    if s == 0.0 || !s.is_finite() {
        return Err(Error::DegenerateTemplate);
    }
    let f = 4.0 * eps0 / s;
    FlowState::new(template.u.scale(f), template.tau.scale(f), 0.0)
}

/// Smooth localized data with smallness sum `4 eps0`; phases drawn from `seed`.
pub fn small_family(grid: Grid, eps0: f64, seed: u64) -> Result<FlowState> {
    let psi = stream_template(grid, seed)?;
    rescale_to_budget(from_stream_function(&psi), stress_template(grid, seed)?, eps0)
}

/// Compactly supported radial bump on the unit disc, equal to 1 at the centre.
pub fn unit_bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// Largest `N` whose bump (centre `2^N (1,1)`, radius 1) stays below Nyquist.
pub fn max_frequency_index(grid: &Grid) -> u32 {
    let nyq = grid.nyquist();
    let mut n = 0u32;
    while (2f64).powi(n as i32 + 1) * 2f64.sqrt() + 1.0 < nyq {
        n += 1;
    }
    n
}

/// Stress whose Fourier transform is the unit bump centred at `2^N (1,1)`,
/// realified with the mirrored bump at `-2^N (1,1)`, the same profile on all
/// three components, times `amplitude`.
pub fn remark_large(grid: Grid, n_freq: u32, amplitude: f64) -> Result<StressField> {
    let max = max_frequency_index(&grid);
    if n_freq > max {
        return Err(Error::FrequencyTooLarge {
            requested: n_freq,
            max,
        });
    }
    let c0 = (2f64).powi(n_freq as i32);
    let k = grid.wavenumbers();
    let n = grid.n();
    let coeffs = Array2::from_shape_fn((n, n), |(i, j)| {
        let plus = unit_bump(((k[i] - c0).powi(2) + (k[j] - c0).powi(2)).sqrt());
        let minus = unit_bump(((k[i] + c0).powi(2) + (k[j] + c0).powi(2)).sqrt());
        Complex64::new(0.5 * amplitude * (plus + minus), 0.0)
    });
    let f = SpectralScalar::new(grid, coeffs)?.to_field();
    StressField::new(f.clone(), f.clone(), f)
}

/// Divergence-free companion velocity for the large-data run: unit-`L^2`
/// Gaussian stream-function flow scaled by `1/N`.
pub fn remark_velocity(grid: Grid, n_freq: u32) -> Result<VectorField> {
    let u = from_stream_function(&stream_template(grid, 0)?);
    Ok(u.scale(1.0 / (u.l2_norm() * n_freq as f64)))
}

/// `||grad psi||_{L^2(R^2)}` for `psi(z) = z1 exp(-|z|^2)`, squared: `pi/2`.
const DIPOLE_NORM_SQ: f64 = PI / 2.0;

/// Dipole profile `phi = grad^perp (z1 exp(-|z|^2)) / sqrt(pi/2)` evaluated at
/// `z`; unit `L^2` norm on the plane and divergence-free.
pub fn dipole_profile(z1: f64, z2: f64) -> (f64, f64) {
    let e = (-(z1 * z1 + z2 * z2)).exp();
    let s = DIPOLE_NORM_SQ.sqrt();
    // d2 psi, -d1 psi
    ((-2.0 * z1 * z2 * e) / s, -((1.0 - 2.0 * z1 * z1) * e) / s)
}

/// Smallest `a L` accepted by [`scaled_family`].
pub const MIN_SCALED_LENGTH: f64 = 8.0;

/// `u0 = (eps0 a / 2) phi(a x)`, `tau0 = (eps0 a^3 / 2) phi_1(a x) I`, centred
/// on the torus and summed over the nearest periodic images.
pub fn scaled_family(grid: Grid, a: f64, eps0: f64) -> Result<FlowState> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Invariant {
            invariant: "0 < a ≤ 1",
            value: a,
        });
    }
    if !(eps0 > 0.0) {
        return Err(Error::Invariant {
            invariant: "eps0 > 0",
            value: eps0,
        });
    }
    let l = grid.length();
    if a * l < MIN_SCALED_LENGTH {
        return Err(Error::SupportOverflow {
            scaled_length: a * l,
            required: MIN_SCALED_LENGTH,
        });
    }
    let (cx, cy) = center(grid);
    let profile = |x: f64, y: f64| {
        let mut acc = (0.0, 0.0);
        for p in -1..=1 {
            for q in -1..=1 {
                let (v1, v2) = dipole_profile(
                    a * (x - cx + p as f64 * l),
                    a * (y - cy + q as f64 * l),
                );
                acc.0 += v1;
                acc.1 += v2;
            }
        }
        acc
    };
    let amp_u = 0.5 * eps0 * a;
    let amp_tau = 0.5 * eps0 * a.powi(3);
    let u1 = grid.from_fn(|x, y| amp_u * profile(x, y).0)?;
    let u2 = grid.from_fn(|x, y| amp_u * profile(x, y).1)?;
    let s = grid.from_fn(|x, y| amp_tau * profile(x, y).0)?;
    FlowState::projected(VectorField::new(u1, u2)?, StressField::isotropic(&s), 0.0)
}
