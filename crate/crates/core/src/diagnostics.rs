//! Norm time series, bootstrap monitors and rate fits.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::littlewood_paley::{block_norms, BesovSpec, DyadicPartition};
use crate::model::{energy_identity_residual, velocity_gradient, vorticity, FlowState, StressField};
use crate::spectral::{derivative, Axis, Exponent, ScalarField, VectorField};

/// Column order of the series CSV after `t`.
pub const CHANNELS: [&str; 9] = [
    "l2_u",
    "l2_tau",
    "linf_tau",
    "h1_utau",
    "b0inf1_tau",
    "b0inf1_w",
    "linf_w",
    "int_b2inf1_tau",
    "energy_residual",
];

/// Literal written in every channel of a blown-up row.
pub const BLOWUP_TOKEN: &str = "blowup";

/// Default ratio `delta / eps0`.
pub const DELTA_PER_EPS0: f64 = 40.0;

/// Per-block `L^p` norms of the pointwise Frobenius magnitude of `tau`.
pub fn tensor_block_norms(tau: &StressField, p: Exponent, part: &DyadicPartition) -> Result<Vec<f64>> {
    let [a, b, c] = tau.components().map(|f| f.to_spectral());
    block_norms(&[(&a, 1.0), (&b, 2.0), (&c, 1.0)], p, part)
}

pub fn vorticity_block_norms(w: &ScalarField, p: Exponent, part: &DyadicPartition) -> Result<Vec<f64>> {
    block_norms(&[(&w.to_spectral(), 1.0)], p, part)
}

fn index_of(channel: &str) -> Result<usize> {
    CHANNELS
        .iter()
        .position(|c| *c == channel)
        .ok_or_else(|| Error::UnknownChannel(channel.to_string()))
}

/// Sampled channels; rows after a blow-up are absent, the blow-up row itself
/// is kept with `NaN` values and rendered as [`BLOWUP_TOKEN`].
/// Shortest round-trip text; scientific notation outside `[1e-4, 1e15)`.
fn push_number(out: &mut String, v: f64) {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        write!(out, "{v}").unwrap();
    } else {
        write!(out, "{v:e}").unwrap();
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    rows: Vec<[f64; 9]>,
    blowup: Option<usize>,
    last_b2: f64,
}

impl TimeSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Index of the blow-up row, if any.
    pub fn blowup_index(&self) -> Option<usize> {
        self.blowup
    }

    pub fn is_frozen(&self) -> bool {
        self.blowup.is_some()
    }

    pub fn channel(&self, name: &str) -> Result<Vec<f64>> {
        let idx = index_of(name)?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn row(&self, i: usize) -> Option<(f64, &[f64; 9])> {
        self.times.get(i).map(|t| (*t, &self.rows[i]))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::Invariant {
                    invariant: "sample times strictly increasing",
                    value: t,
                });
            }
        }
        Ok(())
    }

    /// Appends a precomputed row; used for synthetic series and replays.
    /// `int_b2inf1_tau` is taken as given.
    pub fn push_row(&mut self, t: f64, values: [f64; 9]) -> Result<()> {
        if self.is_frozen() {
            return Ok(());
        }
        self.check_time(t)?;
        self.times.push(t);
        self.rows.push(values);
        Ok(())
    }

    /// Series holding one channel, others zero.
    pub fn synthetic(channel: &str, times: &[f64], values: &[f64]) -> Result<Self> {
        let idx = index_of(channel)?;
        let mut s = Self::new();
        for (&t, &v) in times.iter().zip(values) {
            let mut row = [0.0; 9];
            row[idx] = v;
            s.push_row(t, row)?;
        }
        Ok(s)
    }

    /// Marks a blow-up at `t`; nothing is appended afterwards.
    pub fn mark_blowup(&mut self, t: f64) {
        if self.is_frozen() {
            return;
        }
        let t = match self.times.last() {
            Some(&last) if t <= last => f64::from_bits(last.to_bits() + 1),
            _ => t,
        };
        self.blowup = Some(self.times.len());
        self.times.push(t);
        self.rows.push([f64::NAN; 9]);
    }

    /// Appends every channel measured on `state`.
    pub fn record(&mut self, state: &FlowState, part: &DyadicPartition) -> Result<()> {
        state.grid().ensure_same(part.grid())?;
        if self.is_frozen() {
            return Ok(());
        }
        if !state.is_finite() {
            self.mark_blowup(state.time);
            return Ok(());
        }
        self.check_time(state.time)?;
        let m = measure(state, part)?;
        let integral = match (self.times.last(), self.rows.last()) {
            (Some(&t0), Some(prev)) => prev[7] + (state.time - t0) * self.last_b2,
            _ => 0.0,
        };
        self.last_b2 = m.b2inf1_tau;
        self.times.push(state.time);
        self.rows.push([
            m.l2_u,
            m.l2_tau,
            m.linf_tau,
            m.h1_utau,
            m.b0inf1_tau,
            m.b0inf1_w,
            m.linf_w,
            integral,
            m.energy_residual,
        ]);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for c in CHANNELS {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, (t, row)) in self.times.iter().zip(&self.rows).enumerate() {
            push_number(&mut out, *t);
            for v in row {
                out.push(',');
                if Some(i) == self.blowup {
                    out.push_str(BLOWUP_TOKEN);
                } else {
                    push_number(&mut out, *v);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses the output of [`TimeSeries::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Config("empty series".into()))?;
        let expected = std::iter::once("t").chain(CHANNELS).collect::<Vec<_>>().join(",");
        if header != expected {
            return Err(Error::Config(format!("unexpected series header {header:?}")));
        }
        let mut s = Self::new();
        for line in lines {
            let mut cells = line.split(',');
            let t: f64 = cells
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::Config(format!("bad row {line:?}")))?;
            let cells: Vec<&str> = cells.collect();
            if cells.len() != CHANNELS.len() {
                return Err(Error::Config(format!("bad row {line:?}")));
            }
            if cells.iter().all(|c| *c == BLOWUP_TOKEN) {
                s.mark_blowup(t);
                continue;
            }
            let mut row = [0.0; 9];
            for (r, c) in row.iter_mut().zip(&cells) {
                *r = c.parse().map_err(|_| Error::Config(format!("bad value {c:?}")))?;
            }
            s.push_row(t, row)?;
        }
        Ok(s)
    }
}

/// One row of measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measurements {
    pub l2_u: f64,
    pub l2_tau: f64,
    pub linf_tau: f64,
    pub h1_utau: f64,
    pub b0inf1_tau: f64,
    pub b2inf1_tau: f64,
    pub b0inf1_w: f64,
    pub linf_w: f64,
    pub energy_residual: f64,
}

pub fn measure(state: &FlowState, part: &DyadicPartition) -> Result<Measurements> {
    let u = &state.u;
    let tau = &state.tau;
    let w = vorticity(u);

    let grad_u: f64 = velocity_gradient(u).iter().flatten().map(|f| f.inner(f)).sum();
    let mut grad_tau = 0.0;
    for (f, weight) in tau.components().into_iter().zip([1.0, 2.0, 1.0]) {
        let c = f.to_spectral();
        for ax in [Axis::X1, Axis::X2] {
            let d = derivative(&c, ax, 1).to_field();
            grad_tau += weight * d.inner(&d);
        }
    }
    let l2_u = u.l2_norm();
    let l2_tau = tau.l2_norm();

    let blocks = tensor_block_norms(tau, Exponent::Infinity, part)?;
    let w_blocks = vorticity_block_norms(&w, Exponent::Infinity, part)?;
    Ok(Measurements {
        l2_u,
        l2_tau,
        linf_tau: tau.linf_norm(),
        h1_utau: (l2_u * l2_u + l2_tau * l2_tau + grad_u + grad_tau).sqrt(),
        b0inf1_tau: BesovSpec::b0_inf_1().aggregate(&blocks),
        b2inf1_tau: BesovSpec::b2_inf_1().aggregate(&blocks),
        b0inf1_w: BesovSpec::b0_inf_1().aggregate(&w_blocks),
        linf_w: w.norm(Exponent::Infinity),
        energy_residual: energy_identity_residual(state),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Exponential,
    PowerLaw,
    DoubleExponentialBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub template: Template,
    pub channel: String,
    pub rate: f64,
    pub scale: f64,
    pub window: (f64, f64),
    /// RMS of the log residuals.
    pub residual: f64,
    /// Envelope or consistency verdict where the template defines one.
    pub held: Option<bool>,
}

impl RateFit {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Points of `channel` with `t0 <= t <= t1`, required positive.
fn window_points(series: &TimeSeries, channel: &str, window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let values = series.channel(channel)?;
    let mut pts = Vec::new();
    for (i, (&t, &v)) in series.times().iter().zip(&values).enumerate() {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::NonPositive {
                channel: channel.to_string(),
                index: i,
                value: v,
            });
        }
        pts.push((t, v));
    }
    if pts.len() < 2 {
        return Err(Error::EmptyWindow(window.0, window.1));
    }
    Ok(pts)
}

/// Least-squares line; returns `(slope, intercept, rms residual)`.
fn line_fit(xy: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// `value ~ scale * exp(-rate t)` by least squares on `log value`.
pub fn fit_exponential(series: &TimeSeries, channel: &str, window: (f64, f64)) -> Result<RateFit> {
    let pts = window_points(series, channel, window)?;
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(t, v)| (t, v.ln())).collect();
    let (slope, intercept, residual) = line_fit(&logs);
    Ok(RateFit {
        template: Template::Exponential,
        channel: channel.to_string(),
        rate: -slope,
        scale: intercept.exp(),
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual,
        held: None,
    })
}

/// Default bound on `sup M(t) / M(t0)` for the power envelope.
pub const ENVELOPE_RATIO: f64 = 1.2;

/// Checks `value(t) <= C [a (1 + t)]^{-1/2}` through
/// `M(t) = value(t) [a (1 + t)]^{1/2}`: `scale = sup M / M(t0)` and the
/// envelope holds iff it is at most `envelope_ratio`. `rate` is the log-log
/// slope of the value against `1 + t`.
pub fn fit_power_envelope(
    series: &TimeSeries,
    channel: &str,
    a: f64,
    window: (f64, f64),
    envelope_ratio: f64,
) -> Result<RateFit> {
    if !(a > 0.0) {
        return Err(Error::Invariant {
            invariant: "a > 0",
            value: a,
        });
    }
    let pts = window_points(series, channel, window)?;
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(t, v)| ((1.0 + t).ln(), v.ln())).collect();
    let (slope, _, residual) = line_fit(&logs);
    let m: Vec<f64> = pts.iter().map(|&(t, v)| v * (a * (1.0 + t)).sqrt()).collect();
    let sup = m.iter().cloned().fold(f64::MIN, f64::max);
    let ratio = sup / m[0];
    Ok(RateFit {
        template: Template::PowerLaw,
        channel: channel.to_string(),
        rate: slope,
        scale: ratio,
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual,
        held: Some(ratio <= envelope_ratio),
    })
}

/// One-sided double-exponential monitor: `g = ln ln(e + value)` must not grow
/// faster in the second half of the window than in the first, where a
/// decreasing first half counts as slope 0 (slack 1e-9).
/// `rate` holds the second-half slope, `scale` the first-half slope.
pub fn double_exponential_monitor(series: &TimeSeries, channel: &str, window: (f64, f64)) -> Result<RateFit> {
    let values = series.channel(channel)?;
    let pts: Vec<(f64, f64)> = series
        .times()
        .iter()
        .zip(&values)
        .filter(|(t, v)| **t >= window.0 && **t <= window.1 && v.is_finite())
        .map(|(&t, &v)| (t, (std::f64::consts::E + v.max(0.0)).ln().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::EmptyWindow(window.0, window.1));
    }
    let mid = pts.len() / 2;
    let (s1, _, r1) = line_fit(&pts[..mid]);
    let (s2, _, r2) = line_fit(&pts[mid..]);
    Ok(RateFit {
        template: Template::DoubleExponentialBound,
        channel: channel.to_string(),
        rate: s2,
        scale: s1,
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual: r1.max(r2),
        held: Some(s2 <= s1.max(0.0) + 1e-9),
    })
}

/// Velocity and stress fields stored at sample times.
#[derive(Debug, Clone, Default)]
pub struct Snapshots {
    pub times: Vec<f64>,
    pub velocity: Vec<VectorField>,
    pub stress: Vec<StressField>,
}

impl Snapshots {
    pub fn push(&mut self, state: &FlowState) {
        self.times.push(state.time);
        self.velocity.push(state.u.clone());
        self.stress.push(state.tau.clone());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A single named quantity against time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ScalarSeries {
    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest value over samples with `t >= from`.
    pub fn inf_from(&self, from: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= from)
            .map(|(_, v)| *v)
            .reduce(f64::min)
    }
}

fn check_times(a: &Snapshots, b: &Snapshots) -> Result<()> {
    for (index, (l, r)) in a.times.iter().zip(&b.times).enumerate() {
        if l != r {
            return Err(Error::TimeGridMismatch {
                index,
                left: *l,
                right: *r,
            });
        }
    }
    if a.len() != b.len() {
        let index = a.len().min(b.len());
        let at = |s: &Snapshots| s.times.get(index).copied().unwrap_or(f64::NAN);
        return Err(Error::TimeGridMismatch {
            index,
            left: at(a),
            right: at(b),
        });
    }
    Ok(())
}

/// `||u_A(t) - u_B(t)||_{L^2}` at the shared sample times.
pub fn gap(a: &Snapshots, b: &Snapshots) -> Result<ScalarSeries> {
    check_times(a, b)?;
    let values = a
        .velocity
        .iter()
        .zip(&b.velocity)
        .map(|(x, y)| Ok(x.sub(y)?.l2_norm()))
        .collect::<Result<_>>()?;
    Ok(ScalarSeries {
        times: a.times.clone(),
        values,
    })
}

/// `||u_A - u_B||_{L^2} + ||tau_A - tau_B||_{L^2}` at the shared sample times.
pub fn combined_difference(a: &Snapshots, b: &Snapshots) -> Result<ScalarSeries> {
    check_times(a, b)?;
    let mut values = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let du = a.velocity[i].sub(&b.velocity[i])?.l2_norm();
        let dt = a.stress[i].sub(&b.stress[i])?.l2_norm();
        values.push(du + dt);
    }
    Ok(ScalarSeries {
        times: a.times.clone(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapMonitor {
    pub delta: f64,
    /// `sup_{s <= t} ||u(s)||_2 <= delta`.
    pub velocity: Vec<bool>,
    /// `sup_{s <= t} ||tau(s)||_{B^0_{inf,1}} + int_0^t ||tau||_{B^2_{inf,1}} <= delta`.
    pub stress: Vec<bool>,
    pub closed: bool,
    pub max_velocity: f64,
    pub max_stress: f64,
}

pub fn bootstrap_check(series: &TimeSeries, delta: f64) -> Result<BootstrapMonitor> {
    if !(delta > 0.0) {
        return Err(Error::Invariant {
            invariant: "delta > 0",
            value: delta,
        });
    }
    let l2 = series.channel("l2_u")?;
    let b0 = series.channel("b0inf1_tau")?;
    let int = series.channel("int_b2inf1_tau")?;
    let mut sup_u: f64 = 0.0;
    let mut sup_b0: f64 = 0.0;
    let mut max_stress: f64 = 0.0;
    let mut velocity = Vec::with_capacity(l2.len());
    let mut stress = Vec::with_capacity(l2.len());
    for i in 0..l2.len() {
        if Some(i) == series.blowup_index() {
            velocity.push(false);
            stress.push(false);
            continue;
        }
        sup_u = sup_u.max(l2[i]);
        sup_b0 = sup_b0.max(b0[i]);
        let q = sup_b0 + int[i];
        max_stress = max_stress.max(q);
        velocity.push(sup_u <= delta);
        stress.push(q <= delta);
    }
    let closed = velocity.iter().chain(&stress).all(|f| *f);
    Ok(BootstrapMonitor {
        delta,
        velocity,
        stress,
        closed,
        max_velocity: sup_u,
        max_stress,
    })
}
