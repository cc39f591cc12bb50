//! Oldroyd-B state and right-hand-side algebra.
//!
//! The system integrated is
//!
//! ```text
//! du/dt + (u.grad)u + grad p = mu1 div tau + nu Lap u,    div u = 0
//! dtau/dt + (u.grad)tau - eta Lap tau + mu2 tau + Q(grad u, tau) = a D(u)
//! Q = tau Omega - Omega tau + b (D tau + tau D)
//! ```
//!
//! with `(grad u)_{ij} = d_j u_i`, `D` its symmetric part and `Omega` its
//! skew part. Pressure never appears: the Leray projection removes it.

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    self, dealias_coeffs, derivative, leray_project, project_coeffs, Axis, Grid, ScalarField,
    SpectralScalar, VectorField,
};

/// Coefficients of the system. Defaults reproduce the reduced system
/// `nu = 0, eta = mu1 = mu2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Coefficient of the `a D(u)` forcing in the stress equation.
    pub a: f64,
    /// Weight of the symmetric part of `Q`, in `[-1, 1]`.
    pub b: f64,
    pub nu: f64,
    pub eta: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            nu: 0.0,
            eta: 1.0,
            mu1: 1.0,
            mu2: 1.0,
        }
    }
}

impl ModelParams {
    pub fn with_a(a: f64) -> Self {
        Self {
            a,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &'static str, f64); 6] = [
            ((-1.0..=1.0).contains(&self.b), "b ∈ [−1,1]", self.b),
            (self.a >= 0.0, "a ≥ 0", self.a),
            (self.nu >= 0.0, "nu ≥ 0", self.nu),
            (self.eta > 0.0, "eta > 0", self.eta),
            (self.mu2 > 0.0, "mu2 > 0", self.mu2),
            (self.mu1.is_finite(), "mu1 finite", self.mu1),
        ];
        for (ok, invariant, value) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::Invariant { invariant, value });
            }
        }
        Ok(())
    }
}

/// Symmetric 2x2 tensor field; only the upper triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    grid: Grid,
    t11: ScalarField,
    t12: ScalarField,
    t22: ScalarField,
}

impl StressField {
    pub fn new(t11: ScalarField, t12: ScalarField, t22: ScalarField) -> Result<Self> {
        t11.grid().ensure_same(t12.grid())?;
        t11.grid().ensure_same(t22.grid())?;
        for c in [&t11, &t12, &t22] {
            if !c.is_finite() {
                // re-run the checked constructor to get the offending index
                ScalarField::new(*c.grid(), c.samples().clone())?;
            }
        }
        Ok(Self {
            grid: *t11.grid(),
            t11,
            t12,
            t22,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            t11: grid.zeros(),
            t12: grid.zeros(),
            t22: grid.zeros(),
        }
    }

    /// `f I`.
    pub fn isotropic(f: &ScalarField) -> Self {
        Self {
            grid: *f.grid(),
            t11: f.clone(),
            t12: f.grid().zeros(),
            t22: f.clone(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn t11(&self) -> &ScalarField {
        &self.t11
    }

    pub fn t12(&self) -> &ScalarField {
        &self.t12
    }

    pub fn t22(&self) -> &ScalarField {
        &self.t22
    }

    pub fn components(&self) -> [&ScalarField; 3] {
        [&self.t11, &self.t12, &self.t22]
    }

    pub fn trace(&self) -> ScalarField {
        self.t11.add(&self.t22).expect("components share a grid")
    }

    pub fn scale(&self, f: f64) -> Self {
        Self {
            grid: self.grid,
            t11: self.t11.scale(f),
            t12: self.t12.scale(f),
            t22: self.t22.scale(f),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.t11.add(&other.t11)?,
            self.t12.add(&other.t12)?,
            self.t22.add(&other.t22)?,
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.t11.sub(&other.t11)?,
            self.t12.sub(&other.t12)?,
            self.t22.sub(&other.t22)?,
        )
    }

    /// Frobenius `L^2` norm, `(int t11^2 + 2 t12^2 + t22^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.t11.inner(&self.t11) + 2.0 * self.t12.inner(&self.t12) + self.t22.inner(&self.t22))
            .sqrt()
    }

    /// Max of the pointwise Frobenius norm.
    pub fn linf_norm(&self) -> f64 {
        Zip::from(self.t11.samples())
            .and(self.t12.samples())
            .and(self.t22.samples())
            .fold(0.0f64, |m, &a, &b, &c| m.max((a * a + 2.0 * b * b + c * c).sqrt()))
    }

    /// `int A : B`.
    pub fn contract(&self, other: &Self) -> f64 {
        self.t11.inner(&other.t11) + 2.0 * self.t12.inner(&other.t12) + self.t22.inner(&other.t22)
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    /// Component-wise spectral divergence `(d1 t11 + d2 t12, d1 t12 + d2 t22)`.
    pub fn divergence(&self) -> VectorField {
        let [a, b, c] = self.components().map(|f| f.to_spectral());
        let d1 = derivative(&a, Axis::X1, 1).add(&derivative(&b, Axis::X2, 1)).unwrap();
        let d2 = derivative(&b, Axis::X1, 1).add(&derivative(&c, Axis::X2, 1)).unwrap();
        VectorField::new(d1.to_field(), d2.to_field()).unwrap()
    }
}

/// Relative tolerance of the divergence-free invariant, per unit length.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-10;

/// Velocity, stress and time of one solution snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub u: VectorField,
    pub tau: StressField,
    pub time: f64,
}

impl FlowState {
    /// Checks the shared grid, finiteness and `div u = 0`.
    pub fn new(u: VectorField, tau: StressField, time: f64) -> Result<Self> {
        u.grid().ensure_same(tau.grid())?;
        if !u.is_finite() {
            for c in u.components() {
                ScalarField::new(*c.grid(), c.samples().clone())?;
            }
        }
        let div = u.divergence_l2();
        let bound = DIVERGENCE_TOLERANCE * u.l2_norm().max(f64::MIN_POSITIVE) / u.grid().length();
        if div > bound && div > 1e-14 {
            return Err(Error::Invariant {
                invariant: "div u = 0",
                value: div,
            });
        }
        Ok(Self { u, tau, time })
    }

    /// Leray-projects `u` before building the state.
    pub fn projected(u: VectorField, tau: StressField, time: f64) -> Result<Self> {
        Self::new(leray_project(&u), tau, time)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            u: VectorField::zeros(grid),
            tau: StressField::zeros(grid),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.tau.is_finite()
    }
}

/// `grad u` as `[[d1 u1, d2 u1], [d1 u2, d2 u2]]`.
pub fn velocity_gradient(u: &VectorField) -> [[ScalarField; 2]; 2] {
    let a = u.u1().to_spectral();
    let b = u.u2().to_spectral();
    let d = |f: &SpectralScalar, ax| derivative(f, ax, 1).to_field();
    [
        [d(&a, Axis::X1), d(&a, Axis::X2)],
        [d(&b, Axis::X1), d(&b, Axis::X2)],
    ]
}

/// Symmetric gradient `D(u) = (grad u + grad u^T)/2`.
pub fn deformation(u: &VectorField) -> StressField {
    let [[a11, a12], [a21, a22]] = velocity_gradient(u);
    let d12 = a12.add(&a21).unwrap().scale(0.5);
    StressField {
        grid: *u.grid(),
        t11: a11,
        t12: d12,
        t22: a22,
    }
}

/// `omega_12 = (d2 u1 - d1 u2)/2`; the full skew part is `[[0, w], [-w, 0]]`.
pub fn rotation(u: &VectorField) -> ScalarField {
    let [[_, a12], [a21, _]] = velocity_gradient(u);
    a12.sub(&a21).unwrap().scale(0.5)
}

/// `w = d1 u2 - d2 u1`.
pub fn vorticity(u: &VectorField) -> ScalarField {
    let a = u.u1().to_spectral();
    let b = u.u2().to_spectral();
    derivative(&b, Axis::X1, 1)
        .add(&derivative(&a, Axis::X2, 1).scale(-1.0))
        .unwrap()
        .to_field()
}

/// `Q` at one cell from the velocity gradient `g[i][j] = d_j u_i` and the
/// stress `(t11, t12, t22)`. Returns `(Q11, Q12, Q22)`.
#[inline]
pub fn q_cell(g: [[f64; 2]; 2], tau: [f64; 3], b: f64) -> [f64; 3] {
    let [t11, t12, t22] = tau;
    let w = 0.5 * (g[0][1] - g[1][0]);
    let d11 = g[0][0];
    let d22 = g[1][1];
    let d12 = 0.5 * (g[0][1] + g[1][0]);
    // tau Omega - Omega tau
    let c11 = -2.0 * w * t12;
    let c12 = w * (t11 - t22);
    let c22 = 2.0 * w * t12;
    // D tau + tau D
    let s11 = 2.0 * (d11 * t11 + d12 * t12);
    let s12 = (d11 + d22) * t12 + d12 * (t11 + t22);
    let s22 = 2.0 * (d12 * t12 + d22 * t22);
    [c11 + b * s11, c12 + b * s12, c22 + b * s22]
}

/// `Q(grad u, tau)` formed per cell in physical space, then dealiased.
pub fn q_bilinear(u: &VectorField, tau: &StressField, b: f64) -> Result<StressField> {
    u.grid().ensure_same(tau.grid())?;
    let grid = *u.grid();
    let g = velocity_gradient(u);
    let n = grid.n();
    let mut q = [
        Array2::<f64>::zeros((n, n)),
        Array2::<f64>::zeros((n, n)),
        Array2::<f64>::zeros((n, n)),
    ];
    for i in 0..n {
        for j in 0..n {
            let gc = [
                [g[0][0].samples()[[i, j]], g[0][1].samples()[[i, j]]],
                [g[1][0].samples()[[i, j]], g[1][1].samples()[[i, j]]],
            ];
            let tc = [
                tau.t11.samples()[[i, j]],
                tau.t12.samples()[[i, j]],
                tau.t22.samples()[[i, j]],
            ];
            let out = q_cell(gc, tc, b);
            for c in 0..3 {
                q[c][[i, j]] = out[c];
            }
        }
    }
    let [q11, q12, q22] = q.map(|s| {
        let c = ScalarField::from_raw(grid, s).to_spectral();
        spectral::dealias(&c).to_field()
    });
    Ok(StressField {
        grid,
        t11: q11,
        t12: q12,
        t22: q22,
    })
}

/// `P(-(u.grad)u + mu1 div tau + nu Lap u)`, advection dealiased.
pub fn velocity_rhs(state: &FlowState, params: &ModelParams) -> VectorField {
    let s = SpectralState::from_flow(state);
    let (rhs, _) = nonlinear_rhs(&s, params, true);
    let grid = *state.grid();
    let k2 = grid.k_squared();
    let mut u = [rhs.c[0].clone(), rhs.c[1].clone()];
    if params.nu != 0.0 {
        for (out, src) in u.iter_mut().zip(&s.c[..2]) {
            Zip::from(out).and(src).and(&k2).for_each(|o, &c, &q| *o -= c * (params.nu * q));
        }
    }
    let fft = grid.fft();
    let (a, b) = fft.synthesize_pair(&u[0], &u[1]);
    VectorField::new(ScalarField::from_raw(grid, a), ScalarField::from_raw(grid, b)).unwrap()
}

/// Non-stiff part of the stress equation, `-(u.grad)tau - Q + a D(u)`.
pub fn stress_rhs_nonlinear(state: &FlowState, params: &ModelParams) -> StressField {
    let s = SpectralState::from_flow(state);
    let (rhs, _) = nonlinear_rhs(&s, params, true);
    rhs.to_flow(0.0).tau
}

/// `|int div tau . u + int D(u) : tau| / (||tau||_2 ||grad u||_2 + eps)`.
pub fn energy_identity_residual(state: &FlowState) -> f64 {
    let div = state.tau.divergence();
    let lhs = div.u1().inner(state.u.u1()) + div.u2().inner(state.u.u2());
    let d = deformation(&state.u);
    let rhs = d.contract(&state.tau);
    let g = velocity_gradient(&state.u);
    let grad_norm = g
        .iter()
        .flatten()
        .map(|f| f.inner(f))
        .sum::<f64>()
        .sqrt();
    (lhs + rhs).abs() / (state.tau.l2_norm() * grad_norm + f64::EPSILON)
}

/// Coefficients of `(u1, u2, t11, t12, t22)`; the integrator's working state.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub(crate) grid: Grid,
    pub(crate) c: [Array2<Complex64>; 5],
}

impl SpectralState {
    pub fn zeros(grid: Grid) -> Self {
        let z = || Array2::zeros((grid.n(), grid.n()));
        Self {
            grid,
            c: [z(), z(), z(), z(), z()],
        }
    }

    pub fn from_flow(state: &FlowState) -> Self {
        let grid = *state.grid();
        let fft = grid.fft();
        let (u1, u2) = fft.analyze_pair(state.u.u1().samples(), state.u.u2().samples());
        let (t11, t12) = fft.analyze_pair(state.tau.t11.samples(), state.tau.t12.samples());
        let t22 = fft.analyze(state.tau.t22.samples());
        Self {
            grid,
            c: [u1, u2, t11, t12, t22],
        }
    }

    pub fn to_flow(&self, time: f64) -> FlowState {
        let grid = self.grid;
        let fft = grid.fft();
        let (u1, u2) = fft.synthesize_pair(&self.c[0], &self.c[1]);
        let (t11, t12) = fft.synthesize_pair(&self.c[2], &self.c[3]);
        let t22 = fft.synthesize(&self.c[4]);
        let f = |s| ScalarField::from_raw(grid, s);
        FlowState {
            u: VectorField::new(f(u1), f(u2)).unwrap(),
            tau: StressField {
                grid,
                t11: f(t11),
                t12: f(t12),
                t22: f(t22),
            },
            time,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|a| a.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Largest coefficient modulus over all components.
    pub fn max_coefficient(&self) -> f64 {
        self.c
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    pub(crate) fn project_and_dealias(&mut self, dealias: bool) {
        let [u1, u2, ..] = &mut self.c;
        project_coeffs(&self.grid, u1, u2);
        if dealias {
            for a in self.c.iter_mut() {
                dealias_coeffs(&self.grid, a);
            }
        }
    }

    pub fn component(&self, idx: usize) -> SpectralScalar {
        SpectralScalar::from_raw(self.grid, self.c[idx].clone())
    }
}

fn multiply_ik(c: &Array2<Complex64>, k: &[f64], axis: Axis, n: usize) -> Array2<Complex64> {
    // k has its Nyquist entry zeroed
    let mut out = c.clone();
    let rows = out.as_slice_mut().expect("standard layout");
    for (i, row) in rows.chunks_exact_mut(n).enumerate() {
        for (j, z) in row.iter_mut().enumerate() {
            let kk = match axis {
                Axis::X1 => k[i],
                Axis::X2 => k[j],
            };
            *z = Complex64::new(-z.im * kk, z.re * kk);
        }
    }
    out
}

/// Non-stiff right-hand side in coefficient space:
/// velocity `P(-(u.grad)u + mu1 div tau)`, stress `-(u.grad)tau - Q + a D(u)`.
/// Returns it together with `max |u|` over the grid.
pub(crate) fn nonlinear_rhs(
    s: &SpectralState,
    params: &ModelParams,
    dealias: bool,
) -> (SpectralState, f64) {
    let grid = s.grid;
    let n = grid.n();
    let k = grid.odd_wavenumbers();
    let fft = grid.fft();
    let d = |idx: usize, ax: Axis| multiply_ik(&s.c[idx], &k, ax, n);

    let u1x = d(0, Axis::X1);
    let u1y = d(0, Axis::X2);
    let u2x = d(1, Axis::X1);
    let u2y = d(1, Axis::X2);
    let t11x = d(2, Axis::X1);
    let t11y = d(2, Axis::X2);
    let t12x = d(3, Axis::X1);
    let t12y = d(3, Axis::X2);
    let t22x = d(4, Axis::X1);
    let t22y = d(4, Axis::X2);

    let (pu1, pu2) = fft.synthesize_pair(&s.c[0], &s.c[1]);
    let (p_u1x, p_u1y) = fft.synthesize_pair(&u1x, &u1y);
    let (p_u2x, p_u2y) = fft.synthesize_pair(&u2x, &u2y);
    let (p_t11, p_t12) = fft.synthesize_pair(&s.c[2], &s.c[3]);
    let (p_t22, p_t11x) = fft.synthesize_pair(&s.c[4], &t11x);
    let (p_t11y, p_t12x) = fft.synthesize_pair(&t11y, &t12x);
    let (p_t12y, p_t22x) = fft.synthesize_pair(&t12y, &t22x);
    let p_t22y = fft.synthesize(&t22y);

    let mut nu1 = Array2::<f64>::zeros((n, n));
    let mut nu2 = Array2::<f64>::zeros((n, n));
    let mut n11 = Array2::<f64>::zeros((n, n));
    let mut n12 = Array2::<f64>::zeros((n, n));
    let mut n22 = Array2::<f64>::zeros((n, n));
    let mut umax: f64 = 0.0;
    let b = params.b;
    fn get(a: &Array2<f64>) -> &[f64] {
        a.as_slice().expect("standard layout")
    }
    let (pu1, pu2) = (get(&pu1), get(&pu2));
    let (g00, g01, g10, g11) = (get(&p_u1x), get(&p_u1y), get(&p_u2x), get(&p_u2y));
    let (s_t11, s_t12, s_t22) = (get(&p_t11), get(&p_t12), get(&p_t22));
    let (s_t11x, s_t11y) = (get(&p_t11x), get(&p_t11y));
    let (s_t12x, s_t12y) = (get(&p_t12x), get(&p_t12y));
    let (s_t22x, s_t22y) = (get(&p_t22x), get(&p_t22y));
    let o1 = nu1.as_slice_mut().expect("standard layout");
    let o2 = nu2.as_slice_mut().expect("standard layout");
    let o11 = n11.as_slice_mut().expect("standard layout");
    let o12 = n12.as_slice_mut().expect("standard layout");
    let o22 = n22.as_slice_mut().expect("standard layout");
    for ix in 0..n * n {
        let (a, c) = (pu1[ix], pu2[ix]);
        umax = umax.max((a * a + c * c).sqrt());
        let g = [[g00[ix], g01[ix]], [g10[ix], g11[ix]]];
        o1[ix] = -(a * g[0][0] + c * g[0][1]);
        o2[ix] = -(a * g[1][0] + c * g[1][1]);
        let q = q_cell(g, [s_t11[ix], s_t12[ix], s_t22[ix]], b);
        o11[ix] = -(a * s_t11x[ix] + c * s_t11y[ix]) - q[0];
        o12[ix] = -(a * s_t12x[ix] + c * s_t12y[ix]) - q[1];
        o22[ix] = -(a * s_t22x[ix] + c * s_t22y[ix]) - q[2];
    }

    let (mut r_u1, mut r_u2) = fft.analyze_pair(&nu1, &nu2);
    let (mut r11, mut r12) = fft.analyze_pair(&n11, &n12);
    let mut r22 = fft.analyze(&n22);
    if dealias {
        for a in [&mut r_u1, &mut r_u2, &mut r11, &mut r12, &mut r22] {
            dealias_coeffs(&grid, a);
        }
    }

    // linear couplings, exact in coefficient space
    let mu1 = params.mu1;
    let alpha = params.a;
    Zip::from(&mut r_u1)
        .and(&t11x)
        .and(&t12y)
        .for_each(|r, &x, &y| *r += (x + y) * mu1);
    Zip::from(&mut r_u2)
        .and(&t12x)
        .and(&t22y)
        .for_each(|r, &x, &y| *r += (x + y) * mu1);
    project_coeffs(&grid, &mut r_u1, &mut r_u2);
    if alpha != 0.0 {
        Zip::from(&mut r11).and(&u1x).for_each(|r, &g| *r += g * alpha);
        Zip::from(&mut r22).and(&u2y).for_each(|r, &g| *r += g * alpha);
        Zip::from(&mut r12)
            .and(&u1y)
            .and(&u2x)
            .for_each(|r, &p, &q| *r += (p + q) * (0.5 * alpha));
    }

    (
        SpectralState {
            grid,
            c: [r_u1, r_u2, r11, r12, r22],
        },
        umax,
    )
}
