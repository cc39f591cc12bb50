use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ScenarioConfig, ScenarioKind};
use super::report::{RunReport, Verdict};
use crate::diagnostics::{
    bootstrap_check, combined_difference, double_exponential_monitor, fit_exponential,
    fit_power_envelope, gap, tensor_block_norms, ScalarSeries, Snapshots, TimeSeries,
};
use crate::error::{Error, Result};
use crate::initial_data::{from_stream_function, remark_large};
use crate::integrator::{Integrator, StepperConfig};
use crate::littlewood_paley::{
    bernstein_check, block_semigroup_check, build_partition, paraproduct_split, BesovSpec, DyadicPartition,
};
use crate::model::{vorticity, FlowState, ModelParams, StressField};
use crate::spectral::{dealias, Exponent, Grid, ScalarField};

/// Result of one integration: its series, optional snapshots and the blow-up
/// time if the state stopped being finite.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub series: TimeSeries,
    pub snapshots: Snapshots,
    pub blowup: Option<f64>,
    pub steps: usize,
    pub final_state: Option<FlowState>,
}

/// Integrates `state` to `stepper.t_end`, recording every channel at each
/// sample time. A blow-up ends the run and is recorded, not returned.
pub fn run_single(
    state: &FlowState,
    params: ModelParams,
    stepper: StepperConfig,
    keep_snapshots: bool,
) -> Result<RunOutcome> {
    let part = build_partition(state.grid())?;
    let mut series = TimeSeries::new();
    let mut snapshots = Snapshots::default();
    let mut it = Integrator::new(state, params, stepper)?;
    let result = it.advance_to(stepper.t_end, |s| {
        series.record(s, &part)?;
        if keep_snapshots {
            snapshots.push(s);
        }
        Ok(())
    });
    match result {
        Ok(last) => Ok(RunOutcome {
            series,
            snapshots,
            blowup: None,
            steps: it.steps(),
            final_state: Some(last),
        }),
        Err(Error::BlowUp { time, .. }) => {
            series.mark_blowup(time);
            Ok(RunOutcome {
                series,
                snapshots,
                blowup: Some(time),
                steps: it.steps(),
                final_state: None,
            })
        }
        Err(e) => Err(e),
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = match cfg.scenario {
        ScenarioKind::EulerRegression => run_euler_regression(cfg),
        ScenarioKind::LpSelftest => run_lp_selftest(cfg),
        ScenarioKind::DecayA0 => run_decay_a0(cfg),
        ScenarioKind::DecayPositiveA => run_decay_positive_a(cfg),
        ScenarioKind::InstabilityGap => run_instability_gap(cfg),
        ScenarioKind::LocalConvergence => run_local_convergence(cfg),
    }?;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

fn span(s: &TimeSeries) -> (f64, f64) {
    let t = s.times();
    (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(0.0))
}

/// Pushes a blow-up verdict when `run` blew up; true if it did.
fn blew_up(report: &mut RunReport, claim: &str, run: &RunOutcome, file: &str) -> bool {
    match run.blowup {
        Some(t) => {
            report.verdicts.push(Verdict::blow_up(claim, t, file, span(&run.series)));
            true
        }
        None => {
            report.verdicts.push(Verdict::holds(claim, true, file, span(&run.series)));
            false
        }
    }
}

fn energy_verdict(report: &mut RunReport, claim: &str, run: &RunOutcome, file: &str) -> Result<()> {
    let r = run.series.channel("energy_residual")?;
    report
        .verdicts
        .push(Verdict::at_most(claim, max_of(&r), 1e-10, file, span(&run.series)));
    Ok(())
}

fn scalar_csv(name: &str, s: &ScalarSeries) -> String {
    let mut out = format!("t,{name}\n");
    for (t, v) in s.times.iter().zip(&s.values) {
        let _ = writeln!(out, "{t:.17e},{v:.17e}");
    }
    out
}

/// `psi = cos(b x) cos(b y) / b`, `b` the base wavenumber.
pub fn taylor_green(grid: Grid) -> Result<FlowState> {
    let b = grid.base_wavenumber();
    let psi = grid.from_fn(|x, y| (b * x).cos() * (b * y).cos() / b)?;
    FlowState::new(from_stream_function(&psi), StressField::zeros(grid), 0.0)
}

/// Horizon of the Taylor–Green steadiness check.
pub const TAYLOR_GREEN_HORIZON: f64 = 5.0;

pub fn run_euler_regression(cfg: &ScenarioConfig) -> Result<RunReport> {
    let grid = cfg.grid.build()?;
    let mut report = RunReport::new(cfg);
    let state = cfg.data.build(grid)?;
    let state = FlowState::new(state.u, StressField::zeros(grid), 0.0)?;

    let mut invariants = String::from("t,energy,enstrophy\n");
    let mut energy = Vec::new();
    let mut enstrophy = Vec::new();
    let part = build_partition(&grid)?;
    let mut series = TimeSeries::new();
    let mut it = Integrator::new(&state, cfg.params, cfg.stepper)?;
    let run = it.advance_to(cfg.stepper.t_end, |s| {
        series.record(s, &part)?;
        let e = s.u.l2_norm().powi(2);
        let z = vorticity(&s.u).norm(Exponent::Two).powi(2);
        let _ = writeln!(invariants, "{:.17e},{e:.17e},{z:.17e}", s.time);
        energy.push(e);
        enstrophy.push(z);
        Ok(())
    });
    let window = (0.0, cfg.stepper.t_end);
    match run {
        Err(Error::BlowUp { time, .. }) => {
            series.mark_blowup(time);
            report.verdicts.push(Verdict::blow_up("no_blowup", time, "series.csv", window));
        }
        Err(e) => return Err(e),
        Ok(_) => {
            let drift = |v: &[f64]| max_of(&v.iter().map(|x| (x / v[0] - 1.0).abs()).collect::<Vec<_>>());
            report
                .verdicts
                .push(Verdict::below("energy_drift", drift(&energy), 1e-8, "invariants.csv", window));
            report
                .verdicts
                .push(Verdict::below("enstrophy_drift", drift(&enstrophy), 1e-8, "invariants.csv", window));
        }
    }
    report.steps.push(("random_stream".into(), it.steps()));
    report.add_series("series.csv", series);
    report.add_table("invariants.csv", invariants);

    let tg = taylor_green(grid)?;
    let tg_cfg = StepperConfig {
        t_end: TAYLOR_GREEN_HORIZON,
        ..cfg.stepper
    };
    let mut deviation = ScalarSeries {
        times: Vec::new(),
        values: Vec::new(),
    };
    let norm0 = tg.u.l2_norm();
    let mut it = Integrator::new(&tg, cfg.params, tg_cfg)?;
    let window = (0.0, TAYLOR_GREEN_HORIZON);
    match it.advance_to(TAYLOR_GREEN_HORIZON, |s| {
        deviation.times.push(s.time);
        deviation.values.push(s.u.sub(&tg.u)?.l2_norm() / norm0);
        Ok(())
    }) {
        Err(Error::BlowUp { time, .. }) => {
            report
                .verdicts
                .push(Verdict::blow_up("taylor_green_steady", time, "taylor_green.csv", window))
        }
        Err(e) => return Err(e),
        Ok(_) => report.verdicts.push(Verdict::below(
            "taylor_green_steady",
            deviation.sup(),
            1e-6,
            "taylor_green.csv",
            window,
        )),
    }
    report.steps.push(("taylor_green".into(), it.steps()));
    report.add_table("taylor_green.csv", scalar_csv("relative_deviation", &deviation));
    Ok(report)
}

/// Number of random blocks sampled by the Bernstein suite.
pub const BERNSTEIN_SAMPLES: usize = 100;

/// Profile scale used to show the unity check detects corruption.
pub const FAULT_SCALE: f64 = 1.01;

fn random_band_limited(grid: Grid, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let n = grid.n();
    let noise = ndarray::Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
    Ok(dealias(&ScalarField::new(grid, noise)?.to_spectral()).to_field())
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Runs the Littlewood–Paley property suites on randomized fields.
pub fn lp_suites(grid: Grid, seed: u64) -> Result<Vec<SuiteResult>> {
    let part = build_partition(&grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut push = |suite, deviation: f64, tolerance: f64, passed: bool| {
        out.push(SuiteResult {
            suite,
            deviation,
            tolerance,
            passed,
        })
    };

    let unity = part.unity_defect();
    push("partition_of_unity", unity, 1e-12, unity <= 1e-12);

    let f = random_band_limited(grid, &mut rng)?;
    let mut sum = grid.zeros();
    for b in part.decompose(&f.to_spectral())? {
        sum = sum.add(&b)?;
    }
    let rec = sum.sub(&f)?.norm(Exponent::Two) / f.norm(Exponent::Two);
    push("reconstruction", rec, 1e-10, rec <= 1e-10);

    let mut worst: f64 = 1.0;
    let mut all = true;
    let mut drawn = 0;
    while drawn < BERNSTEIN_SAMPLES {
        let g = random_band_limited(grid, &mut rng)?;
        for j in 0..=part.j_max() {
            if drawn == BERNSTEIN_SAMPLES {
                break;
            }
            let rep = bernstein_check(&g, j, &part)?;
            if rep.vacuous {
                continue;
            }
            drawn += 1;
            worst = worst.max(rep.worst());
            all &= rep.holds();
        }
    }
    push("bernstein", worst, 8.0, all);

    let u = random_band_limited(grid, &mut rng)?;
    let v = random_band_limited(grid, &mut rng)?;
    let split = paraproduct_split(&u, &v, &part)?;
    let prod = u.mul(&v)?;
    let para = split.sum().sub(&prod)?.norm(Exponent::Infinity) / prod.norm(Exponent::Infinity);
    push("paraproduct", para, 1e-9, para <= 1e-9);

    let h = random_band_limited(grid, &mut rng)?;
    let mut ratio: f64 = 0.0;
    for j in 0..=part.j_max() {
        for t in [0.0, 1e-3, 1e-2, 0.1] {
            let rep = block_semigroup_check(&h, j, t, &part)?;
            if !rep.vacuous {
                ratio = ratio.max(rep.ratio);
            }
        }
    }
    push("semigroup", ratio, 1.0 + 1e-10, ratio <= 1.0 + 1e-10);

    let faulty = DyadicPartition::with_profile_scale(&grid, FAULT_SCALE)?.unity_defect();
    push("fault_injection_detected", faulty, 1e-12, faulty > 1e-12);
    Ok(out)
}

pub fn run_lp_selftest(cfg: &ScenarioConfig) -> Result<RunReport> {
    let grid = cfg.grid.build()?;
    let mut report = RunReport::new(cfg);
    let suites = lp_suites(grid, cfg.data.seed)?;
    let mut csv = String::from("suite,deviation,tolerance,passed\n");
    for s in &suites {
        let _ = writeln!(csv, "{},{:.17e},{:e},{}", s.suite, s.deviation, s.tolerance, s.passed);
        report.verdicts.push(Verdict {
            claim: s.suite.to_string(),
            outcome: if s.passed {
                super::report::Outcome::Pass
            } else {
                super::report::Outcome::Fail
            },
            measured: s.deviation,
            relation: if s.suite == "fault_injection_detected" { ">" } else { "<=" }.to_string(),
            bound: vec![s.tolerance],
            series: "lp_suites.csv".into(),
            window: (0.0, 0.0),
        });
    }
    report.add_table("lp_suites.csv", csv);
    Ok(report)
}

pub fn run_decay_a0(cfg: &ScenarioConfig) -> Result<RunReport> {
    let grid = cfg.grid.build()?;
    let mut report = RunReport::new(cfg);
    let state = cfg.data.build(grid)?;
    let run = run_single(&state, cfg.params, cfg.stepper, false)?;
    report.steps.push(("a0".into(), run.steps));
    let file = "series.csv";
    if !blew_up(&mut report, "no_blowup", &run, file) {
        let s = &run.series;
        let window = span(s);
        for ch in ["l2_tau", "linf_tau"] {
            let fit = fit_exponential(s, ch, window)?;
            report
                .verdicts
                .push(Verdict::at_least(&format!("{ch}_rate"), fit.rate, 1.0 / 72.0, file, window));
            report.fits.push(fit);
        }
        let l2 = s.channel("l2_tau")?;
        let ratio = max_of(
            &s.times()
                .iter()
                .zip(&l2)
                .map(|(t, v)| v / ((-0.75 * t).exp() * l2[0]))
                .collect::<Vec<_>>(),
        );
        report
            .verdicts
            .push(Verdict::at_most("l2_tau_pointwise", ratio, 1.05, file, window));
        let delta = cfg.thresholds.delta();
        let u = max_of(&s.channel("l2_u")?);
        report.verdicts.push(Verdict::at_most("l2_u_below_delta", u, delta, file, window));
        let boot = bootstrap_check(s, delta)?;
        report
            .verdicts
            .push(Verdict::holds("bootstrap_closed", boot.closed, file, window));
        energy_verdict(&mut report, "energy_identity", &run, file)?;
        report.fits.push(double_exponential_monitor(s, "b0inf1_w", window)?);
    }
    report.add_series(file, run.series);
    Ok(report)
}

pub fn run_decay_positive_a(cfg: &ScenarioConfig) -> Result<RunReport> {
    let grid = cfg.grid.build()?;
    let mut report = RunReport::new(cfg);
    let state = cfg.data.build(grid)?;
    let a = cfg.params.a;
    let control_params = ModelParams { a: 0.0, ..cfg.params };
    let (run, control) = rayon::join(
        || run_single(&state, cfg.params, cfg.stepper, false),
        || run_single(&state, control_params, cfg.stepper, false),
    );
    let (run, control) = (run?, control?);
    report.steps.push(("a".into(), run.steps));
    report.steps.push(("control".into(), control.steps));
    let (file, cfile) = ("series.csv", "series_control.csv");
    let window = (1.0, cfg.stepper.t_end);
    let ratio = cfg.thresholds.envelope_ratio;
    if !blew_up(&mut report, "no_blowup", &run, file) {
        let fit = fit_power_envelope(&run.series, "h1_utau", a, window, ratio)?;
        report
            .verdicts
            .push(Verdict::at_most("envelope_held", fit.scale, ratio, file, fit.window));
        report.fits.push(fit);
        let times = run.series.times();
        let l2 = run.series.channel("l2_u")?;
        let at = |t: f64| {
            times
                .iter()
                .position(|&s| s >= t)
                .map(|i| l2[i])
                .unwrap_or(f64::NAN)
        };
        let (u1, uend) = (at(1.0), l2[l2.len() - 1]);
        report
            .verdicts
            .push(Verdict::below("l2_u_decays", uend / u1, 1.0, file, window));
        energy_verdict(&mut report, "energy_identity", &run, file)?;
    }
    if !blew_up(&mut report, "control_no_blowup", &control, cfile) {
        let fit = fit_power_envelope(&control.series, "h1_utau", a, window, ratio)?;
        report.verdicts.push(Verdict::at_least(
            "control_envelope_violated",
            fit.scale,
            ratio,
            cfile,
            fit.window,
        ));
        report.fits.push(fit);
    }
    report.add_series(file, run.series);
    report.add_series(cfile, control.series);
    Ok(report)
}

pub fn run_instability_gap(cfg: &ScenarioConfig) -> Result<RunReport> {
    let grid = cfg.grid.build()?;
    let mut report = RunReport::new(cfg);
    let state = cfg.data.build(grid)?;
    let a = cfg.params.a;
    let zero_params = ModelParams { a: 0.0, ..cfg.params };
    let (run, zero) = rayon::join(
        || run_single(&state, cfg.params, cfg.stepper, true),
        || run_single(&state, zero_params, cfg.stepper, true),
    );
    let (run, zero) = (run?, zero?);
    report.steps.push(("a".into(), run.steps));
    report.steps.push(("a0".into(), zero.steps));
    let (file, zfile) = ("series.csv", "series_a0.csv");
    let u0 = state.u.l2_norm();
    let t_a = 1.0 / (a * a);
    let t_end = cfg.stepper.t_end;
    let ok_a = !blew_up(&mut report, "no_blowup", &run, file);
    let ok_0 = !blew_up(&mut report, "a0_no_blowup", &zero, zfile);
    if ok_0 {
        let m = zero
            .series
            .channel("l2_u")?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        report
            .verdicts
            .push(Verdict::at_least("a0_velocity_retained", m / u0, 0.5, zfile, (0.0, t_end)));
    }
    if ok_a && ok_0 {
        let g = gap(&run.snapshots, &zero.snapshots)?;
        let inf = g.inf_from(t_a).unwrap_or(f64::NAN);
        report.verdicts.push(Verdict::at_least(
            "gap_after_t_a",
            inf / u0,
            cfg.thresholds.gap_fraction,
            "gap.csv",
            (t_a, t_end),
        ));
        report.add_table("gap.csv", scalar_csv("gap", &g));
    }
    if ok_a {
        let l2 = run.series.channel("l2_u")?;
        report.verdicts.push(Verdict::below(
            "a_velocity_halved",
            l2[l2.len() - 1] / l2[0],
            0.5,
            file,
            (0.0, t_end),
        ));
        energy_verdict(&mut report, "energy_identity", &run, file)?;
    }
    report.add_series(file, run.series);
    report.add_series(zfile, zero.series);
    Ok(report)
}

/// Rungs of the `a`-ladder below `a0`.
pub const LADDER_RUNGS: usize = 4;

pub fn run_local_convergence(cfg: &ScenarioConfig) -> Result<RunReport> {
    let grid = cfg.grid.build()?;
    let mut report = RunReport::new(cfg);
    let state = cfg.data.build(grid)?;
    let a0 = cfg.params.a;
    let ladder: Vec<f64> = (0..=LADDER_RUNGS)
        .map(|k| if k == 0 { 0.0 } else { a0 / (2f64).powi(k as i32 - 1) })
        .collect();
    let runs: Vec<RunOutcome> = ladder
        .par_iter()
        .map(|&a| run_single(&state, ModelParams { a, ..cfg.params }, cfg.stepper, true))
        .collect::<Result<_>>()?;
    let file = |i: usize| {
        if i == 0 {
            "series.csv".to_string()
        } else {
            format!("series_rung{}.csv", i - 1)
        }
    };
    let mut any_blowup = false;
    for (i, r) in runs.iter().enumerate() {
        report.steps.push((format!("a={}", ladder[i]), r.steps));
        any_blowup |= blew_up(&mut report, &format!("no_blowup_a={}", ladder[i]), r, &file(i));
    }
    let window = (0.0, cfg.stepper.t_end);
    if !any_blowup {
        let mut table = String::from("a,D\n");
        let mut d = Vec::new();
        for i in 1..runs.len() {
            let v = combined_difference(&runs[0].snapshots, &runs[i].snapshots)?.sup();
            let _ = writeln!(table, "{:.17e},{v:.17e}", ladder[i]);
            d.push(v);
        }
        let decreasing = d.windows(2).all(|w| w[1] < w[0]);
        report
            .verdicts
            .push(Verdict::holds("d_strictly_decreasing", decreasing, "convergence.csv", window));
        for (k, w) in d.windows(2).enumerate() {
            report.verdicts.push(Verdict::within(
                &format!("ratio_rung{k}"),
                w[0] / w[1],
                1.6,
                2.4,
                "convergence.csv",
                window,
            ));
        }
        report.add_table("convergence.csv", table);
    }
    for (i, r) in runs.into_iter().enumerate() {
        report.add_series(&file(i), r.series);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemarkRow {
    pub n_freq: u32,
    pub amplitude: f64,
    pub b1_2_1: f64,
    pub b0_inf_1: f64,
    pub l2: f64,
}

/// Norms of the high-frequency stress data for each `N`, amplitude `1/N`.
pub fn remark_scaling(grid: Grid, n_freqs: &[u32]) -> Result<Vec<RemarkRow>> {
    let part = build_partition(&grid)?;
    n_freqs
        .iter()
        .map(|&n| {
            let amplitude = 1.0 / n as f64;
            let tau = remark_large(grid, n, amplitude)?;
            let agg = |spec: BesovSpec| -> Result<f64> {
                Ok(spec.aggregate(&tensor_block_norms(&tau, spec.p, &part)?))
            };
            Ok(RemarkRow {
                n_freq: n,
                amplitude,
                b1_2_1: agg(BesovSpec::b1_2_1())?,
                b0_inf_1: agg(BesovSpec::b0_inf_1())?,
                l2: tau.l2_norm(),
            })
        })
        .collect()
}
