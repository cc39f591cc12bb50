//! Integrating-factor RK4 (Lawson) time stepping.
//!
//! The stiff linear parts `eta Lap - mu2` (stress) and `nu Lap` (velocity) are
//! propagated exactly by diagonal multipliers; everything else goes through
//! classical RK4 in the transformed variable.

use std::collections::VecDeque;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{nonlinear_rhs, FlowState, ModelParams, SpectralState};
use crate::spectral::{Grid, SpectralScalar};

/// Lower bound on `max |u|` used by the CFL rule.
pub const U_FLOOR: f64 = 1e-6;

/// Entries kept in the max-norm trace reported on blow-up.
const TRACE_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    /// Base (largest) step.
    pub dt: f64,
    /// Courant fraction in `(0, 1]`.
    pub cfl: f64,
    pub t_end: f64,
    /// Observation cadence in base steps.
    pub sample_every: usize,
    pub dealias: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            cfl: 0.5,
            t_end: 1.0,
            sample_every: 10,
            dealias: true,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &'static str, f64); 4] = [
            (self.dt > 0.0 && self.dt.is_finite(), "dt > 0", self.dt),
            (self.t_end > 0.0 && self.t_end.is_finite(), "t_end > 0", self.t_end),
            (self.cfl > 0.0 && self.cfl <= 1.0, "cfl ∈ (0,1]", self.cfl),
            (self.sample_every >= 1, "sample_every ≥ 1", self.sample_every as f64),
        ];
        for (ok, invariant, value) in checks {
            if !ok {
                return Err(Error::Invariant { invariant, value });
            }
        }
        Ok(())
    }

    /// Spacing of the observation times.
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_every as f64
    }
}

/// `cfl * (L/n) / max(||u||_inf, U_FLOOR)`.
pub fn cfl_dt(state: &FlowState, cfg: &StepperConfig) -> f64 {
    cfl_from_max(state.grid(), state.u.linf_norm(), cfg.cfl)
}

fn cfl_from_max(grid: &Grid, umax: f64, cfl: f64) -> f64 {
    cfl * grid.spacing() / umax.max(U_FLOOR)
}

/// `coeff(k) <- exp(-t (mu2 + eta |k|^2)) coeff(k)`.
pub fn semigroup_apply(f: &SpectralScalar, t: f64, eta: f64, mu2: f64) -> Result<SpectralScalar> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let grid = *f.grid();
    let k2 = grid.k_squared();
    let mut c = f.coeffs().clone();
    Zip::from(&mut c)
        .and(&k2)
        .for_each(|z, &q| *z *= (-t * (mu2 + eta * q)).exp());
    Ok(SpectralScalar::from_raw(grid, c))
}

/// Multiplier tables for one step size: half and full step, stress and velocity.
#[derive(Debug, Clone)]
pub struct IntegratingFactor {
    grid: Grid,
    eta: f64,
    mu2: f64,
    nu: f64,
    dt: f64,
    tau_half: Array2<f64>,
    tau_full: Array2<f64>,
    /// `None` when `nu = 0`.
    u_half: Option<Array2<f64>>,
    u_full: Option<Array2<f64>>,
}

impl IntegratingFactor {
    pub fn new(grid: Grid, params: &ModelParams, dt: f64) -> Self {
        let k2 = grid.k_squared();
        let table = |theta: f64, rate: &dyn Fn(f64) -> f64| k2.mapv(|q| (-theta * dt * rate(q)).exp());
        let tau_rate = |q: f64| params.mu2 + params.eta * q;
        let u_rate = |q: f64| params.nu * q;
        let (u_half, u_full) = if params.nu > 0.0 {
            (Some(table(0.5, &u_rate)), Some(table(1.0, &u_rate)))
        } else {
            (None, None)
        };
        Self {
            grid,
            eta: params.eta,
            mu2: params.mu2,
            nu: params.nu,
            dt,
            tau_half: table(0.5, &tau_rate),
            tau_full: table(1.0, &tau_rate),
            u_half,
            u_full,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn matches(&self, params: &ModelParams, dt: f64) -> bool {
        self.dt == dt && self.eta == params.eta && self.mu2 == params.mu2 && self.nu == params.nu
    }

    /// `exp(theta dt L)` at lattice index `(i, j)` for `theta` in {1/2, 1}.
    pub fn multiplier(&self, i: usize, j: usize, full: bool) -> f64 {
        if full {
            self.tau_full[[i, j]]
        } else {
            self.tau_half[[i, j]]
        }
    }

    fn apply(&self, s: &mut SpectralState, full: bool) {
        let (tau, u) = if full {
            (&self.tau_full, &self.u_full)
        } else {
            (&self.tau_half, &self.u_half)
        };
        for c in &mut s.c[2..] {
            Zip::from(c).and(tau).for_each(|z, &m| *z *= m);
        }
        if let Some(u) = u {
            for c in &mut s.c[..2] {
                Zip::from(c).and(u).for_each(|z, &m| *z *= m);
            }
        }
    }
}

/// `out = x + f * y`, componentwise over the five fields.
fn axpy(x: &SpectralState, f: f64, y: &SpectralState) -> SpectralState {
    let mut out = x.clone();
    for (o, yc) in out.c.iter_mut().zip(&y.c) {
        Zip::from(o).and(yc).for_each(|a, &b| *a += b * f);
    }
    out
}

fn scale_in_place(s: &mut SpectralState, f: f64) {
    for c in s.c.iter_mut() {
        c.mapv_inplace(|z| z * f);
    }
}

/// Integration in coefficient space with cached multipliers.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: ModelParams,
    cfg: StepperConfig,
    state: SpectralState,
    time: f64,
    steps: usize,
    factor: Option<IntegratingFactor>,
    trace: VecDeque<f64>,
}

impl Integrator {
    pub fn new(state: &FlowState, params: ModelParams, cfg: StepperConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let mut s = SpectralState::from_flow(state);
        s.project_and_dealias(cfg.dealias);
        Ok(Self {
            params,
            cfg,
            state: s,
            time: state.time,
            steps: 0,
            factor: None,
            trace: VecDeque::with_capacity(TRACE_LEN),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn spectral_state(&self) -> &SpectralState {
        &self.state
    }

    pub fn state(&self) -> FlowState {
        self.state.to_flow(self.time)
    }

    fn rhs(&self, s: &SpectralState) -> (SpectralState, f64) {
        nonlinear_rhs(s, &self.params, self.cfg.dealias)
    }

    fn factor_for(&mut self, dt: f64) -> &IntegratingFactor {
        let stale = !matches!(&self.factor, Some(f) if f.matches(&self.params, dt));
        if stale {
            self.factor = Some(IntegratingFactor::new(self.state.grid, &self.params, dt));
        }
        self.factor.as_ref().expect("factor just built")
    }

    /// One step of size `min(max_dt, cfg.dt, cfl_dt)`; returns the size taken.
    pub fn step(&mut self, max_dt: f64) -> Result<f64> {
        let (n0, umax) = self.rhs(&self.state);
        let dt = self
            .cfg
            .dt
            .min(max_dt)
            .min(cfl_from_max(&self.state.grid, umax, self.cfg.cfl));
        if self.trace.len() == TRACE_LEN {
            self.trace.pop_front();
        }
        self.trace.push_back(umax);
        self.factor_for(dt);
        let factor = self.factor.take().expect("factor cached");
        let v = &self.state;

        let mut a = n0;
        scale_in_place(&mut a, dt);

        let mut s2 = axpy(v, 0.5, &a);
        factor.apply(&mut s2, false);
        let (mut b, _) = self.rhs(&s2);
        scale_in_place(&mut b, dt);

        let mut ev = v.clone();
        factor.apply(&mut ev, false);
        let s3 = axpy(&ev, 0.5, &b);
        let (mut c, _) = self.rhs(&s3);
        scale_in_place(&mut c, dt);

        let mut e2v = v.clone();
        factor.apply(&mut e2v, true);
        let mut ec = c.clone();
        factor.apply(&mut ec, false);
        let s4 = axpy(&e2v, 1.0, &ec);
        let (mut d, _) = self.rhs(&s4);
        scale_in_place(&mut d, dt);

        // v' = E2 v + (E2 a + 2 E (b + c) + d) / 6
        let mut bc = axpy(&b, 1.0, &c);
        factor.apply(&mut bc, false);
        factor.apply(&mut a, true);
        let mut next = e2v;
        for idx in 0..5 {
            Zip::from(&mut next.c[idx])
                .and(&a.c[idx])
                .and(&bc.c[idx])
                .and(&d.c[idx])
                .for_each(|o, &p, &q, &r| *o += (p + q * 2.0 + r) / 6.0);
        }
        self.factor = Some(factor);
        next.project_and_dealias(self.cfg.dealias);

        self.steps += 1;
        self.time += dt;
        if !next.is_finite() {
            return Err(Error::BlowUp {
                step: self.steps,
                time: self.time,
                trace: self.trace.iter().copied().collect(),
            });
        }
        self.state = next;
        Ok(dt)
    }

    /// Steps to `t_end`, landing exactly on every multiple of
    /// `sample_every * dt` (measured from the start time) and on `t_end`,
    /// and calls `observer` at the start and at each of those times.
    pub fn advance_to<F>(&mut self, t_end: f64, mut observer: F) -> Result<FlowState>
    where
        F: FnMut(&FlowState) -> Result<()>,
    {
        if t_end < self.time {
            return Err(Error::NegativeTime(t_end - self.time));
        }
        let start = self.time;
        let interval = self.cfg.sample_interval();
        let observe = |s: &FlowState, obs: &mut F| {
            obs(s).map_err(|e| Error::Observer {
                time: s.time,
                message: e.to_string(),
            })
        };
        let first = self.state();
        observe(&first, &mut observer)?;
        let mut k = 1usize;
        while self.time < t_end {
            let target = (start + k as f64 * interval).min(t_end);
            // relative slack so that round-off never produces a sliver step
            let slack = 1e-9 * self.cfg.dt;
            while target - self.time > slack {
                self.step(target - self.time)?;
            }
            self.time = target;
            let s = self.state();
            observe(&s, &mut observer)?;
            k += 1;
        }
        Ok(self.state())
    }
}

/// One step from a physical state.
pub fn step(state: &FlowState, params: &ModelParams, cfg: &StepperConfig) -> Result<FlowState> {
    let mut it = Integrator::new(state, *params, *cfg)?;
    it.step(f64::INFINITY)?;
    Ok(it.state())
}

/// Integrates to `cfg.t_end`; see [`Integrator::advance_to`].
pub fn advance_to<F>(
    state: &FlowState,
    params: &ModelParams,
    cfg: &StepperConfig,
    observer: F,
) -> Result<FlowState>
where
    F: FnMut(&FlowState) -> Result<()>,
{
    let mut it = Integrator::new(state, *params, *cfg)?;
    it.advance_to(cfg.t_end, observer)
}
