//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use ndarray::Array2;
use oldroyd2d::experiments::{lp_suites, remark_scaling, run_scenario, run_single, RunReport, ScenarioConfig, ScenarioKind};
use oldroyd2d::initial_data::{stream_template, from_stream_function, DataKind, InitialDataSpec};
use oldroyd2d::model::energy_identity_residual;
use oldroyd2d::spectral::{dealias, leray_project};
use oldroyd2d::{
    advance_to, FlowState, Grid, ModelParams, ScalarField, StepperConfig, StressField,
    VectorField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report_line(l: &Line) {
    println!(
        "criterion {:>2} {:<28} {}  {}",
        l.id,
        l.name,
        if l.pass { "PASS" } else { "FAIL" },
        l.detail
    );
}

fn run(kind: ScenarioKind) -> RunReport {
    let cfg = ScenarioConfig::default_for(kind);
    run_scenario(&cfg).unwrap_or_else(|e| panic!("{kind}: {e}"))
}

/// Passes iff every named verdict exists and passes; lists measured values.
fn verdicts(r: &RunReport, claims: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in claims {
        match r.verdict(c) {
            Some(v) => {
                ok &= v.passed();
                parts.push(format!("{c}={:.4e}", v.measured));
            }
            None => {
                ok = false;
                parts.push(format!("{c}=missing"));
            }
        }
    }
    (ok, parts.join(" "))
}

fn timed(r: &RunReport, limit: f64, ok: bool, detail: String) -> (bool, String) {
    let t = r.wall_clock_seconds;
    (ok && t < limit, format!("{detail} wall={t:.1}s (<{limit}s)"))
}

fn max_residual(r: &RunReport, file: &str) -> f64 {
    r.series(file)
        .and_then(|s| s.channel("energy_residual").ok())
        .map(|v| v.into_iter().fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

fn random_state(grid: Grid, rng: &mut ChaCha8Rng) -> FlowState {
    let n = grid.n();
    let mut field = || {
        let s = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        dealias(&ScalarField::new(grid, s).unwrap().to_spectral()).to_field()
    };
    let u = leray_project(&VectorField::new(field(), field()).unwrap());
    let tau = StressField::new(field(), field(), field()).unwrap();
    FlowState::new(u, tau, 0.0).unwrap()
}

fn remark_criterion() -> (bool, String) {
    let start = Instant::now();
    let grid = Grid::new(256, 2.0 * PI).unwrap();
    let rows = remark_scaling(grid, &[3, 4, 5]).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for w in rows.windows(2) {
        let growth = w[1].b1_2_1 / w[0].b1_2_1;
        ok &= (1.5..=2.5).contains(&growth);
        detail.push_str(&format!("B1ratio{}->{}={growth:.15} ", w[0].n_freq, w[1].n_freq));
    }
    let small: Vec<f64> = rows.iter().map(|r| r.b0_inf_1 + r.l2).collect();
    let decreasing = small.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    let scaled: Vec<f64> = rows.iter().zip(&small).map(|(r, s)| s * r.n_freq as f64).collect();
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    ok &= spread <= 1.5;
    detail.push_str(&format!("B0+L2_decreasing={decreasing} N*(B0+L2) spread={spread:.4} "));

    let spec = InitialDataSpec {
        kind: DataKind::RemarkLarge,
        n_freq: 5,
        ..InitialDataSpec::default()
    };
    let state = spec.build(grid).unwrap();
    let stepper = StepperConfig {
        dt: 0.02,
        t_end: 10.0,
        sample_every: 25,
        ..StepperConfig::default()
    };
    let out = run_single(&state, ModelParams::default(), stepper, false).unwrap();
    ok &= out.blowup.is_none();
    let t = start.elapsed().as_secs_f64();
    ok &= t < 600.0;
    detail.push_str(&format!("N=5 run to t=10 blowup={:?} wall={t:.1}s (<600s)", out.blowup));
    (ok, detail)
}

/// Full-system state evolved at dt, dt/2, dt/4; returns the observed order.
fn richardson_order() -> f64 {
    let grid = Grid::new(32, 2.0 * PI).unwrap();
    let psi = stream_template(grid, 3).unwrap().scale(0.5);
    let u = from_stream_function(&psi);
    let tau = StressField::new(
        grid.from_fn(|x, y| 0.2 * (x + 2.0 * y).cos()).unwrap(),
        grid.from_fn(|x, y| 0.1 * (2.0 * x - y).sin()).unwrap(),
        grid.from_fn(|x, _| 0.3 * x.sin()).unwrap(),
    )
    .unwrap();
    let state = FlowState::new(u, tau, 0.0).unwrap();
    let params = ModelParams {
        b: 0.3,
        ..ModelParams::with_a(0.5)
    };
    let solve = |dt: f64| {
        let cfg = StepperConfig {
            dt,
            cfl: 1.0,
            t_end: 0.4,
            sample_every: 1000,
            dealias: true,
        };
        advance_to(&state, &params, &cfg, |_| Ok(())).unwrap()
    };
    let [a, b, c] = [0.04, 0.02, 0.01].map(solve);
    let diff = |x: &FlowState, y: &FlowState| {
        x.u.sub(&y.u).unwrap().l2_norm() + x.tau.sub(&y.tau).unwrap().l2_norm()
    };
    (diff(&a, &b) / diff(&b, &c)).log2()
}

/// `u = 0`, `tau = f I` with `f` a sum of modes: each mode decays exactly
/// like `exp(-(mu2 + eta |k|^2) t)`.
fn linear_exactness() -> f64 {
    let grid = Grid::new(32, 2.0 * PI).unwrap();
    let modes = [(1.0, 0.0, 0.7), (2.0, 3.0, -0.4), (5.0, 1.0, 0.25)];
    let params = ModelParams {
        eta: 0.7,
        mu2: 1.3,
        ..ModelParams::default()
    };
    let t_end = 0.5;
    let at = |t: f64| {
        grid.from_fn(|x, y| {
            modes
                .iter()
                .map(|&(k1, k2, c)| {
                    c * (-(params.mu2 + params.eta * (k1 * k1 + k2 * k2)) * t).exp() * (k1 * x + k2 * y).cos()
                })
                .sum()
        })
        .unwrap()
    };
    let state = FlowState::new(VectorField::zeros(grid), StressField::isotropic(&at(0.0)), 0.0).unwrap();
    let cfg = StepperConfig {
        dt: 0.05,
        t_end,
        ..StepperConfig::default()
    };
    let end = advance_to(&state, &params, &cfg, |_| Ok(())).unwrap();
    let want = StressField::isotropic(&at(t_end));
    end.tau.sub(&want).unwrap().linf_norm() + end.u.linf_norm()
}

fn main() {
    let mut lines = Vec::new();

    let lp_start = Instant::now();
    let lp = run(ScenarioKind::LpSelftest);
    let suites = lp_suites(Grid::new(32, 2.0 * PI).unwrap(), 11).unwrap();
    let (ok, d) = verdicts(
        &lp,
        &["partition_of_unity", "reconstruction", "paraproduct", "bernstein", "semigroup", "fault_injection_detected"],
    );
    let small_ok = suites.iter().all(|s| s.passed);
    let t = lp_start.elapsed().as_secs_f64();
    lines.push(Line {
        id: 7,
        name: "lp_toolkit",
        pass: ok && small_ok && t < 60.0,
        detail: format!("{d} n32_suites={small_ok} wall={t:.1}s (<60s)"),
    });
    report_line(lines.last().unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = Grid::new(64, 2.0 * PI).unwrap();
    let random_worst = (0..100)
        .map(|_| energy_identity_residual(&random_state(grid, &mut rng)))
        .fold(0.0, f64::max);

    let order = richardson_order();
    let exact = linear_exactness();
    lines.push(Line {
        id: 10,
        name: "integrator_convergence",
        pass: order >= 3.5 && exact <= 1e-12,
        detail: format!("order={order:.3} (>=3.5) linear_error={exact:.3e} (<=1e-12)"),
    });
    report_line(lines.last().unwrap());

    let lc = run(ScenarioKind::LocalConvergence);
    let (ok, d) = verdicts(&lc, &["d_strictly_decreasing", "ratio_rung0", "ratio_rung1", "ratio_rung2"]);
    let (pass, detail) = timed(&lc, 600.0, ok, d);
    lines.push(Line { id: 6, name: "local_continuity_in_a", pass, detail });
    report_line(lines.last().unwrap());

    let eu = run(ScenarioKind::EulerRegression);
    let (ok, d) = verdicts(&eu, &["energy_drift", "enstrophy_drift", "taylor_green_steady"]);
    let (pass, detail) = timed(&eu, 120.0, ok, d);
    lines.push(Line { id: 1, name: "euler_regression", pass, detail });
    report_line(lines.last().unwrap());

    let decay = run(ScenarioKind::DecayA0);
    let (ok, d) = verdicts(
        &decay,
        &["no_blowup", "l2_tau_rate", "linf_tau_rate", "l2_tau_pointwise", "l2_u_below_delta"],
    );
    let (pass, detail) = timed(&decay, 300.0, ok, d);
    lines.push(Line { id: 2, name: "stress_decay_a0", pass, detail });
    report_line(lines.last().unwrap());
    let (pass, detail) = verdicts(&decay, &["bootstrap_closed"]);
    lines.push(Line { id: 3, name: "bootstrap_closure", pass, detail });
    report_line(lines.last().unwrap());

    let env = run(ScenarioKind::DecayPositiveA);
    let (ok, d) = verdicts(&env, &["no_blowup", "envelope_held", "control_envelope_violated"]);
    let (pass, detail) = timed(&env, 600.0, ok, d);
    lines.push(Line { id: 4, name: "polynomial_envelope", pass, detail });
    report_line(lines.last().unwrap());

    let gap = run(ScenarioKind::InstabilityGap);
    let (ok, d) = verdicts(&gap, &["no_blowup", "a0_no_blowup", "a0_velocity_retained", "gap_after_t_a"]);
    let (pass, detail) = timed(&gap, 900.0, ok, d);
    lines.push(Line { id: 5, name: "instability_gap", pass, detail });
    report_line(lines.last().unwrap());

    let (pass, detail) = remark_criterion();
    lines.push(Line { id: 8, name: "large_data_scaling", pass, detail });
    report_line(lines.last().unwrap());

    let sampled = [
        max_residual(&decay, "series.csv"),
        max_residual(&env, "series.csv"),
        max_residual(&env, "series_control.csv"),
        max_residual(&gap, "series.csv"),
        max_residual(&gap, "series_a0.csv"),
    ];
    let sampled_worst = sampled.iter().cloned().fold(0.0, f64::max);
    let all_finite = sampled.iter().all(|v| v.is_finite());
    lines.push(Line {
        id: 9,
        name: "integration_by_parts",
        pass: random_worst <= 1e-10 && sampled_worst <= 1e-10 && all_finite,
        detail: format!("random_states={random_worst:.3e} sampled_runs={sampled_worst:.3e} (<=1e-10)"),
    });
    report_line(lines.last().unwrap());

    lines.sort_by_key(|l| l.id);
    let failed: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!("acceptance: {}/{} criteria pass", lines.len() - failed.len(), lines.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
