//! Periodic-torus discretization: grid samples, Fourier coefficients and the
//! spectral operators built on them.
//!
//! Coefficients are normalized so that coefficient zero is the mean of the
//! samples, i.e. `f(x) = sum_k c_k exp(i k.x)`. Array index `[i1, i2]` maps to
//! the point `(i1 L/n, i2 L/n)` and to the integer mode `(m(i1), m(i2))` with
//! `m(i) = i` below `n/2` and `i - n` from `n/2` on.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, Fft2};

/// Square periodic grid on `[0, L)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n must be even and at least 16, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "length must be positive, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// `2 pi / L`, the lattice spacing in wavenumber space.
    pub fn base_wavenumber(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest wavenumber magnitude along one axis, `(n/2) 2 pi / L`.
    pub fn nyquist(&self) -> f64 {
        (self.n / 2) as f64 * self.base_wavenumber()
    }

    /// Signed integer mode for an array index.
    pub fn mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Physical wavenumber for an array index.
    pub fn wavenumber(&self, i: usize) -> f64 {
        self.mode(i) as f64 * self.base_wavenumber()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }

    /// Wavenumbers with the Nyquist entry zeroed, as used by odd-order operators.
    pub(crate) fn odd_wavenumbers(&self) -> Vec<f64> {
        let mut k = self.wavenumbers();
        k[self.n / 2] = 0.0;
        k
    }

    /// `|k|^2` at every lattice point.
    pub fn k_squared(&self) -> Array2<f64> {
        let k = self.wavenumbers();
        Array2::from_shape_fn((self.n, self.n), |(i, j)| k[i] * k[i] + k[j] * k[j])
    }

    /// Cell area `(L/n)^2`, the equal quadrature weight.
    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    /// Sample coordinates `(x1, x2)` of index `[i, j]`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.spacing(), j as f64 * self.spacing())
    }

    pub(crate) fn fft(&self) -> Arc<Fft2> {
        fft::plan(self.n)
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: (self.n, self.length),
                right: (other.n, other.length),
            })
        }
    }

    /// Largest retained integer mode under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        // |m| <= (2/3)(n/2)
        (self.n as i64) / 3
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField {
            grid: *self,
            samples: Array2::zeros((self.n, self.n)),
        }
    }

    pub fn from_fn(&self, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        let samples = Array2::from_shape_fn((self.n, self.n), |(i, j)| {
            let (x, y) = self.point(i, j);
            f(x, y)
        });
        ScalarField::new(*self, samples)
    }
}

/// Lebesgue exponent used by norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

/// Real grid samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    samples: Array2<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, samples: Array2<f64>) -> Result<Self> {
        if samples.dim() != (grid.n, grid.n) {
            return Err(Error::InvalidGrid(format!(
                "sample array {:?} does not match n={}",
                samples.dim(),
                grid.n
            )));
        }
        if let Some(((i, j), &v)) = samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: (i, j),
                value: v,
            });
        }
        Ok(Self { grid, samples })
    }

    pub(crate) fn from_raw(grid: Grid, samples: Array2<f64>) -> Self {
        Self { grid, samples }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.samples.sum() / self.samples.len() as f64
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_raw(self.grid, self.samples.mapv(|v| v * factor))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_raw(self.grid, &self.samples + &other.samples))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_raw(self.grid, &self.samples - &other.samples))
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_raw(self.grid, &self.samples * &other.samples))
    }

    pub fn to_spectral(&self) -> SpectralScalar {
        forward_transform(self)
    }

    pub fn norm(&self, p: Exponent) -> f64 {
        lp_norm(self, p)
    }

    /// `int f g dx` by equal-weight quadrature.
    pub fn inner(&self, other: &Self) -> f64 {
        Zip::from(&self.samples)
            .and(&other.samples)
            .fold(0.0, |acc, &a, &b| acc + a * b)
            * self.grid.cell_area()
    }
}

/// Fourier coefficients of a field on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScalar {
    grid: Grid,
    coeffs: Array2<Complex64>,
}

impl SpectralScalar {
    pub fn new(grid: Grid, coeffs: Array2<Complex64>) -> Result<Self> {
        if coeffs.dim() != (grid.n, grid.n) {
            return Err(Error::InvalidGrid(format!(
                "coefficient array {:?} does not match n={}",
                coeffs.dim(),
                grid.n
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub(crate) fn from_raw(grid: Grid, coeffs: Array2<Complex64>) -> Self {
        Self { grid, coeffs }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, Array2::zeros((grid.n, grid.n)))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Array2<Complex64> {
        self.coeffs
    }

    /// Coefficient of the integer mode `(m1, m2)`.
    pub fn mode(&self, m1: i64, m2: i64) -> Complex64 {
        let n = self.grid.n as i64;
        self.coeffs[[m1.rem_euclid(n) as usize, m2.rem_euclid(n) as usize]]
    }

    pub fn to_field(&self) -> ScalarField {
        inverse_transform(self)
    }

    /// Largest `|c(k) - conj(c(-k))|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n;
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let m = self.coeffs[[(n - i) % n, (n - j) % n]].conj();
                worst = worst.max((self.coeffs[[i, j]] - m).norm());
            }
        }
        worst / scale
    }

    /// `sum |c_k|^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Multiply every coefficient by a real function of `(k1, k2)`.
    pub fn apply_multiplier(&self, m: impl Fn(f64, f64) -> f64) -> Self {
        let k = self.grid.wavenumbers();
        let mut out = self.coeffs.clone();
        for ((i, j), c) in out.indexed_iter_mut() {
            *c *= m(k[i], k[j]);
        }
        Self::from_raw(self.grid, out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_raw(self.grid, &self.coeffs + &other.coeffs))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_raw(self.grid, self.coeffs.mapv(|c| c * factor))
    }
}

/// Two-component velocity-like field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: [ScalarField; 2],
}

impl VectorField {
    pub fn new(u1: ScalarField, u2: ScalarField) -> Result<Self> {
        u1.grid.ensure_same(&u2.grid)?;
        Ok(Self {
            grid: u1.grid,
            components: [u1, u2],
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            components: [grid.zeros(), grid.zeros()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn u1(&self) -> &ScalarField {
        &self.components[0]
    }

    pub fn u2(&self) -> &ScalarField {
        &self.components[1]
    }

    pub fn components(&self) -> &[ScalarField; 2] {
        &self.components
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            components: [
                self.components[0].scale(factor),
                self.components[1].scale(factor),
            ],
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.components[0].sub(&other.components[0])?,
            self.components[1].sub(&other.components[1])?,
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.components[0].add(&other.components[0])?,
            self.components[1].add(&other.components[1])?,
        )
    }

    /// `(int |u|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let a = lp_norm(&self.components[0], Exponent::Two);
        let b = lp_norm(&self.components[1], Exponent::Two);
        a.hypot(b)
    }

    /// Max of the pointwise Euclidean magnitude.
    pub fn linf_norm(&self) -> f64 {
        Zip::from(&self.components[0].samples)
            .and(&self.components[1].samples)
            .fold(0.0f64, |m, &a, &b| m.max(a.hypot(b)))
    }

    /// `||div u||_{L^2}` computed spectrally.
    pub fn divergence_l2(&self) -> f64 {
        let d1 = derivative(&self.components[0].to_spectral(), Axis::X1, 1);
        let d2 = derivative(&self.components[1].to_spectral(), Axis::X2, 1);
        let div = d1.add(&d2).expect("components share a grid");
        (div.energy() * self.grid.area()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }
}

pub fn forward_transform(f: &ScalarField) -> SpectralScalar {
    SpectralScalar::from_raw(f.grid, f.grid.fft().analyze(&f.samples))
}

/// Real part of the synthesized samples.
pub fn inverse_transform(f: &SpectralScalar) -> ScalarField {
    ScalarField::from_raw(f.grid, f.grid.fft().synthesize(&f.coeffs))
}

/// Multiply by `(i k_axis)^order`. Odd orders drop the unpaired Nyquist mode
/// so that real fields stay real.
pub fn derivative(f: &SpectralScalar, axis: Axis, order: u32) -> SpectralScalar {
    assert!(order <= 4, "derivative order {order} exceeds 4");
    if order == 0 {
        return f.clone();
    }
    let grid = f.grid;
    let n = grid.n;
    let k = grid.wavenumbers();
    let factor = ik_power(order);
    let mut out = f.coeffs.clone();
    for ((i, j), c) in out.indexed_iter_mut() {
        let idx = match axis {
            Axis::X1 => i,
            Axis::X2 => j,
        };
        if order % 2 == 1 && idx == n / 2 {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        *c *= factor * k[idx].powi(order as i32);
    }
    SpectralScalar::from_raw(grid, out)
}

/// `i^order` as a complex number.
fn ik_power(order: u32) -> Complex64 {
    match order % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// In-place Leray projection of a coefficient pair.
pub(crate) fn project_coeffs(grid: &Grid, a: &mut Array2<Complex64>, b: &mut Array2<Complex64>) {
    // the Nyquist line has no signed wavenumber; treating it as zero keeps the
    // projector Hermitian and consistent with the spectral divergence
    let k = grid.odd_wavenumbers();
    let n = grid.n;
    let a = a.as_slice_mut().expect("standard layout");
    let b = b.as_slice_mut().expect("standard layout");
    for (i, (ra, rb)) in a.chunks_exact_mut(n).zip(b.chunks_exact_mut(n)).enumerate() {
        let k1 = k[i];
        for (j, (za, zb)) in ra.iter_mut().zip(rb.iter_mut()).enumerate() {
            let k2 = k[j];
            let k2sum = k1 * k1 + k2 * k2;
            if k2sum == 0.0 {
                continue;
            }
            let dot = *za * k1 + *zb * k2;
            *za -= dot * (k1 / k2sum);
            *zb -= dot * (k2 / k2sum);
        }
    }
}

/// Orthogonal projection onto divergence-free fields; the mean is kept.
pub fn leray_project(u: &VectorField) -> VectorField {
    let grid = u.grid;
    let fft = grid.fft();
    let (mut a, mut b) = fft.analyze_pair(&u.components[0].samples, &u.components[1].samples);
    project_coeffs(&grid, &mut a, &mut b);
    let (s1, s2) = fft.synthesize_pair(&a, &b);
    VectorField {
        grid,
        components: [ScalarField::from_raw(grid, s1), ScalarField::from_raw(grid, s2)],
    }
}

pub(crate) fn dealias_coeffs(grid: &Grid, c: &mut Array2<Complex64>) {
    let cut = grid.dealias_cutoff();
    let n = grid.n;
    let keep: Vec<bool> = (0..n).map(|i| grid.mode(i).abs() <= cut).collect();
    let zero = Complex64::new(0.0, 0.0);
    for (i, row) in c.as_slice_mut().expect("standard layout").chunks_exact_mut(n).enumerate() {
        if !keep[i] {
            row.fill(zero);
            continue;
        }
        for (z, &k) in row.iter_mut().zip(&keep) {
            if !k {
                *z = zero;
            }
        }
    }
}

/// 2/3-rule truncation: zero every mode with `max(|k1|,|k2|) > (2/3) k_nyquist`.
pub fn dealias(f: &SpectralScalar) -> SpectralScalar {
    let mut out = f.coeffs.clone();
    dealias_coeffs(&f.grid, &mut out);
    SpectralScalar::from_raw(f.grid, out)
}

/// Equal-weight quadrature for `p < inf`, max of `|f|` for `p = inf`.
pub fn lp_norm(f: &ScalarField, p: Exponent) -> f64 {
    let w = f.grid.cell_area();
    match p {
        Exponent::One => f.samples.iter().map(|v| v.abs()).sum::<f64>() * w,
        Exponent::Two => (f.samples.iter().map(|v| v * v).sum::<f64>() * w).sqrt(),
        Exponent::Infinity => f.samples.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// Absolute tolerance on the mean accepted by [`inverse_laplacian`].
pub const ZERO_MEAN_TOLERANCE: f64 = 1e-12;

/// `c(k) -> -c(k)/|k|^2`; rejects fields whose mean exceeds [`ZERO_MEAN_TOLERANCE`]
/// relative to the largest coefficient (absolute when that is below one).
pub fn inverse_laplacian(f: &SpectralScalar) -> Result<SpectralScalar> {
    let mean = f.coeffs[[0, 0]];
    let scale = f.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
    if mean.norm() > ZERO_MEAN_TOLERANCE * scale {
        return Err(Error::NonZeroMean { mean: mean.re });
    }
    let k2 = f.grid.k_squared();
    let mut out = f.coeffs.clone();
    Zip::from(&mut out).and(&k2).for_each(|c, &q| {
        *c = if q == 0.0 { Complex64::new(0.0, 0.0) } else { -*c / q };
    });
    Ok(SpectralScalar::from_raw(f.grid, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, l: f64) -> Grid {
        Grid::new(n, l).unwrap()
    }

    fn random_field(g: Grid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = Array2::from_shape_fn((g.n(), g.n()), |_| rng.random_range(-1.0..1.0));
        ScalarField::new(g, s).unwrap()
    }

    /// Trigonometric polynomial with modes up to `kmax` and random coefficients.
    fn band_limited(g: Grid, kmax: i64, seed: u64) -> (ScalarField, Vec<(i64, i64, f64, f64)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::new();
        for m1 in 0..=kmax {
            for m2 in -kmax..=kmax {
                if m1 == 0 && m2 <= 0 {
                    continue;
                }
                modes.push((m1, m2, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
        }
        let b = g.base_wavenumber();
        let f = g
            .from_fn(|x, y| {
                modes
                    .iter()
                    .map(|&(m1, m2, c, s)| {
                        let ph = b * (m1 as f64 * x + m2 as f64 * y);
                        c * ph.cos() + s * ph.sin()
                    })
                    .sum()
            })
            .unwrap();
        (f, modes)
    }

    #[test]
    fn grid_rejects_odd_or_small() {
        assert!(Grid::new(15, 1.0).is_err());
        assert!(Grid::new(8, 1.0).is_err());
        assert!(Grid::new(17, 1.0).is_err());
        assert!(Grid::new(16, 0.0).is_err());
        assert!(Grid::new(16, 1.0).is_ok());
    }

    #[test]
    fn non_finite_sample_is_named() {
        let g = grid(16, 1.0);
        let mut s = Array2::zeros((16, 16));
        s[[3, 7]] = f64::NAN;
        match ScalarField::new(g, s) {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, (3, 7)),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn constant_field_has_only_the_mean() {
        let g = grid(32, 2.0 * PI);
        let f = g.from_fn(|_, _| 2.5).unwrap();
        let c = forward_transform(&f);
        assert!((c.mode(0, 0).re - 2.5).abs() < 1e-14);
        let rest: f64 = c.coeffs().iter().skip(1).map(|c| c.norm()).sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn cosine_splits_into_two_half_weights() {
        let g = grid(32, 3.0);
        let b = g.base_wavenumber();
        let f = g.from_fn(|x, _| (b * x).cos()).unwrap();
        let c = forward_transform(&f);
        assert!((c.mode(1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((c.mode(-1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        let total: f64 = c.coeffs().iter().map(|c| c.norm()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_random_field() {
        let g = grid(64, 5.0);
        let f = random_field(g, 1);
        let back = inverse_transform(&forward_transform(&f));
        let err = lp_norm(&back.sub(&f).unwrap(), Exponent::Infinity);
        assert!(err < 1e-12 * lp_norm(&f, Exponent::Infinity), "err {err}");
        assert!(forward_transform(&f).hermitian_defect() < 1e-12);
    }

    #[test]
    fn paired_transforms_match_single() {
        let g = grid(32, 1.0);
        let a = random_field(g, 2);
        let b = random_field(g, 3);
        let fft = g.fft();
        let (ca, cb) = fft.analyze_pair(a.samples(), b.samples());
        let sa = forward_transform(&a);
        let sb = forward_transform(&b);
        let da = (&ca - sa.coeffs()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        let db = (&cb - sb.coeffs()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(da < 1e-15 && db < 1e-15, "{da} {db}");
        let (ra, rb) = fft.synthesize_pair(&ca, &cb);
        assert!((&ra - a.samples()).iter().all(|d| d.abs() < 1e-13));
        assert!((&rb - b.samples()).iter().all(|d| d.abs() < 1e-13));
    }

    #[test]
    fn derivative_of_sine() {
        let g = grid(32, 3.0);
        let b = g.base_wavenumber();
        let f = g.from_fn(|x, _| (b * x).sin()).unwrap();
        let d = derivative(&f.to_spectral(), Axis::X1, 1).to_field();
        let expected = g.from_fn(|x, _| b * (b * x).cos()).unwrap();
        assert!(lp_norm(&d.sub(&expected).unwrap(), Exponent::Infinity) < 1e-12);
        let id = derivative(&f.to_spectral(), Axis::X2, 0).to_field();
        assert!(lp_norm(&id.sub(&f).unwrap(), Exponent::Infinity) < 1e-14);
    }

    #[test]
    fn derivatives_exact_on_low_degree_polynomials() {
        let g = grid(48, 2.0 * PI);
        let (f, modes) = band_limited(g, 15, 4);
        let b = g.base_wavenumber();
        for order in 1..=4u32 {
            let d = derivative(&f.to_spectral(), Axis::X2, order).to_field();
            let exact = g
                .from_fn(|x, y| {
                    modes
                        .iter()
                        .map(|&(m1, m2, c, s)| {
                            let k = b * m2 as f64;
                            let ph = b * (m1 as f64 * x + m2 as f64 * y);
                            // d^order/dy^order of c cos + s sin
                            let (dc, ds) = match order % 4 {
                                1 => (-c * ph.sin(), s * ph.cos()),
                                2 => (-c * ph.cos(), -s * ph.sin()),
                                3 => (c * ph.sin(), -s * ph.cos()),
                                _ => (c * ph.cos(), s * ph.sin()),
                            };
                            k.powi(order as i32) * (dc + ds)
                        })
                        .sum()
                })
                .unwrap();
            let scale = lp_norm(&exact, Exponent::Infinity);
            let err = lp_norm(&d.sub(&exact).unwrap(), Exponent::Infinity);
            assert!(err < 1e-12 * scale, "order {order}: {err} vs {scale}");
        }
    }

    #[test]
    fn second_derivative_matches_centered_differences() {
        // Centered differences converge at second order toward the spectral value.
        let l = 2.0 * PI;
        let mut errs = Vec::new();
        for &n in &[32usize, 64, 128] {
            let g = grid(n, l);
            let (f, _) = band_limited(g, 3, 5);
            let spec = derivative(&f.to_spectral(), Axis::X1, 2).to_field();
            let h = g.spacing();
            let s = f.samples();
            let fd = Array2::from_shape_fn((n, n), |(i, j)| {
                (s[[(i + 1) % n, j]] - 2.0 * s[[i, j]] + s[[(i + n - 1) % n, j]]) / (h * h)
            });
            let err = (&fd - spec.samples()).iter().fold(0.0f64, |m, d| m.max(d.abs()));
            errs.push(err);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "observed order {order}, errs {errs:?}");
        }
    }

    #[test]
    fn leray_annihilates_gradient() {
        let g = grid(32, 2.0 * PI);
        let u = VectorField::new(g.from_fn(|x, _| x.sin()).unwrap(), g.zeros()).unwrap();
        let p = leray_project(&u);
        assert!(p.linf_norm() < 1e-14);
    }

    #[test]
    fn leray_fixes_perp_gradients_and_is_idempotent() {
        let g = grid(32, 4.0);
        let (psi, _) = band_limited(g, 6, 6);
        let ps = psi.to_spectral();
        let u = VectorField::new(
            derivative(&ps, Axis::X2, 1).to_field(),
            derivative(&ps, Axis::X1, 1).to_field().scale(-1.0),
        )
        .unwrap();
        let pu = leray_project(&u);
        assert!(pu.sub(&u).unwrap().linf_norm() < 1e-12 * u.linf_norm());

        let w = VectorField::new(random_field(g, 7), random_field(g, 8)).unwrap();
        let pw = leray_project(&w);
        let ppw = leray_project(&pw);
        assert!(ppw.sub(&pw).unwrap().l2_norm() < 1e-12 * pw.l2_norm());
        assert!(pw.divergence_l2() <= 1e-10 * pw.l2_norm() / g.length());
    }

    #[test]
    fn dealias_cases() {
        let g = grid(48, 2.0 * PI);
        let (f, _) = band_limited(g, 16, 9);
        let c = f.to_spectral();
        let d = dealias(&c);
        assert!((&d.coeffs - &c.coeffs).iter().all(|z| z.norm() < 1e-13));

        let top = g.from_fn(|x, _| (24.0 * x).cos()).unwrap();
        let dt = dealias(&top.to_spectral());
        assert!(dt.coeffs().iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn dealiased_product_matches_padded_product() {
        // Oracle: the exact product of two 2/3-band-limited fields, evaluated on
        // a grid with 3/2 padding (no aliasing), then restricted to retained modes.
        let n = 48;
        let g = grid(n, 2.0 * PI);
        let cut = g.dealias_cutoff();
        let (a, _) = band_limited(g, cut / 2, 10);
        let (b, _) = band_limited(g, cut / 2, 11);
        let prod = dealias(&a.mul(&b).unwrap().to_spectral());

        let big = grid(n * 3 / 2, 2.0 * PI);
        let pad = |f: &ScalarField| {
            let c = f.to_spectral();
            let mut out = SpectralScalar::zeros(big);
            for i in 0..n {
                for j in 0..n {
                    let (m1, m2) = (g.mode(i), g.mode(j));
                    let nb = big.n() as i64;
                    out.coeffs_mut()[[m1.rem_euclid(nb) as usize, m2.rem_euclid(nb) as usize]] =
                        c.coeffs()[[i, j]];
                }
            }
            out.to_field()
        };
        let exact = pad(&a).mul(&pad(&b)).unwrap().to_spectral();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (m1, m2) = (g.mode(i), g.mode(j));
                let want = if m1.abs() <= cut && m2.abs() <= cut {
                    exact.mode(m1, m2)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((prod.coeffs()[[i, j]] - want).norm());
            }
        }
        assert!(worst < 1e-10, "worst coefficient error {worst}");
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = grid(32, 2.0 * PI);
        let one = g.from_fn(|_, _| 1.0).unwrap();
        assert!((lp_norm(&one, Exponent::Two) - 2.0 * PI).abs() < 1e-12);
        assert!((lp_norm(&one, Exponent::One) - 4.0 * PI * PI).abs() < 1e-10);

        let g = grid(256, 3.0);
        let b = g.base_wavenumber();
        let s = g.from_fn(|x, _| (b * x).sin()).unwrap();
        assert!((lp_norm(&s, Exponent::Infinity) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn parseval_on_random_field() {
        let g = grid(64, 3.7);
        let f = random_field(g, 12);
        let grid_l2 = lp_norm(&f, Exponent::Two);
        let spec_l2 = (f.to_spectral().energy() * g.area()).sqrt();
        assert!((grid_l2 - spec_l2).abs() < 1e-10 * grid_l2);
    }

    #[test]
    fn inverse_laplacian_cases() {
        let g = grid(32, 3.0);
        let b = g.base_wavenumber();
        let f = g.from_fn(|x, _| -(b * x).sin() * b * b).unwrap();
        let u = inverse_laplacian(&f.to_spectral()).unwrap().to_field();
        let expected = g.from_fn(|x, _| (b * x).sin()).unwrap();
        assert!(lp_norm(&u.sub(&expected).unwrap(), Exponent::Infinity) < 1e-12);

        let z = inverse_laplacian(&SpectralScalar::zeros(g)).unwrap();
        assert!(z.coeffs().iter().all(|c| c.norm() == 0.0));

        let one = g.from_fn(|_, _| 0.3).unwrap();
        match inverse_laplacian(&one.to_spectral()) {
            Err(Error::NonZeroMean { mean }) => assert!((mean - 0.3).abs() < 1e-14),
            other => panic!("expected NonZeroMean, got {other:?}"),
        }
    }

    #[test]
    fn laplacian_undoes_inverse_laplacian() {
        let g = grid(32, 2.0);
        let f = random_field(g, 13);
        let zero_mean = g.from_fn(|_, _| -f.mean()).unwrap().add(&f).unwrap();
        let c = zero_mean.to_spectral();
        let inv = inverse_laplacian(&c).unwrap();
        let lap = derivative(&inv, Axis::X1, 2).add(&derivative(&inv, Axis::X2, 2)).unwrap();
        let back = lap.to_field();
        let (got, want) = (back, zero_mean);
        let err = lp_norm(&got.sub(&want).unwrap(), Exponent::Infinity);
        assert!(err < 1e-12 * lp_norm(&want, Exponent::Infinity).max(1.0), "err {err}");
    }
}
