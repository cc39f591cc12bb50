use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostics::{DELTA_PER_EPS0, ENVELOPE_RATIO};
use crate::error::{Error, Result};
use crate::initial_data::{DataKind, InitialDataSpec, MIN_SCALED_LENGTH};
use crate::integrator::StepperConfig;
use crate::model::ModelParams;
use crate::spectral::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    EulerRegression,
    LpSelftest,
    DecayA0,
    DecayPositiveA,
    InstabilityGap,
    LocalConvergence,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::EulerRegression,
        ScenarioKind::LpSelftest,
        ScenarioKind::DecayA0,
        ScenarioKind::DecayPositiveA,
        ScenarioKind::InstabilityGap,
        ScenarioKind::LocalConvergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::EulerRegression => "euler_regression",
            ScenarioKind::LpSelftest => "lp_selftest",
            ScenarioKind::DecayA0 => "decay_a0",
            ScenarioKind::DecayPositiveA => "decay_positive_a",
            ScenarioKind::InstabilityGap => "instability_gap",
            ScenarioKind::LocalConvergence => "local_convergence",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.n, self.length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub eps0: f64,
    /// Defaults to `40 eps0` when absent.
    pub delta: Option<f64>,
    pub gap_fraction: f64,
    pub envelope_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            eps0: 0.01,
            delta: None,
            gap_fraction: 0.25,
            envelope_ratio: ENVELOPE_RATIO,
        }
    }
}

impl Thresholds {
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(DELTA_PER_EPS0 * self.eps0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub grid: GridConfig,
    pub params: ModelParams,
    pub data: InitialDataSpec,
    pub stepper: StepperConfig,
    pub thresholds: Thresholds,
    pub out_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Desk-scale defaults for each scenario.
    pub fn default_for(kind: ScenarioKind) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let base = Self {
            scenario: kind,
            grid: GridConfig { n: 256, length: two_pi },
            params: ModelParams::default(),
            data: InitialDataSpec::default(),
            stepper: StepperConfig::default(),
            thresholds: Thresholds::default(),
            out_dir: None,
        };
        match kind {
            ScenarioKind::EulerRegression => Self {
                data: InitialDataSpec {
                    kind: DataKind::Stream,
                    amplitude: Some(0.2),
                    ..InitialDataSpec::default()
                },
                stepper: StepperConfig {
                    dt: 0.02,
                    t_end: 10.0,
                    sample_every: 25,
                    ..StepperConfig::default()
                },
                ..base
            },
            ScenarioKind::LpSelftest => base,
            ScenarioKind::DecayA0 => Self {
                grid: GridConfig { n: 128, length: two_pi },
                stepper: StepperConfig {
                    dt: 0.01,
                    t_end: 30.0,
                    sample_every: 10,
                    ..StepperConfig::default()
                },
                ..base
            },
            ScenarioKind::DecayPositiveA => Self {
                grid: GridConfig { n: 128, length: two_pi },
                params: ModelParams::with_a(0.25),
                data: InitialDataSpec {
                    tau_weight: 0.25,
                    ..InitialDataSpec::default()
                },
                stepper: StepperConfig {
                    dt: 0.02,
                    t_end: 40.0,
                    sample_every: 10,
                    ..StepperConfig::default()
                },
                ..base
            },
            ScenarioKind::InstabilityGap => Self {
                grid: GridConfig { n: 128, length: 32.0 },
                params: ModelParams::with_a(0.25),
                data: InitialDataSpec {
                    kind: DataKind::ScaledFamily,
                    a: 0.25,
                    ..InitialDataSpec::default()
                },
                stepper: StepperConfig {
                    dt: 0.05,
                    t_end: 32.0,
                    sample_every: 4,
                    ..StepperConfig::default()
                },
                ..base
            },
            ScenarioKind::LocalConvergence => Self {
                grid: GridConfig { n: 64, length: two_pi },
                params: ModelParams::with_a(0.2),
                data: InitialDataSpec {
                    kind: DataKind::Stream,
                    amplitude: Some(1.0),
                    ..InitialDataSpec::default()
                },
                stepper: StepperConfig {
                    dt: 0.01,
                    t_end: 1.0,
                    sample_every: 5,
                    ..StepperConfig::default()
                },
                ..base
            },
        }
    }

    /// Parses a JSON document laid over the scenario defaults, then applies
    /// `key=value` overrides with dotted keys.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let user: Value = serde_json::from_str(text)?;
        let kind = scenario_of(&user)?;
        let mut doc = serde_json::to_value(Self::default_for(kind))?;
        merge(&mut doc, user);
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        // an override may switch the scenario; keep it but not its defaults
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, overrides)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.params.validate()?;
        self.data.validate()?;
        self.stepper.validate()?;
        let th = &self.thresholds;
        if !(th.eps0 > 0.0) {
            return Err(Error::Invariant { invariant: "eps0 > 0", value: th.eps0 });
        }
        if !(th.delta() > 0.0) {
            return Err(Error::Invariant { invariant: "delta > 0", value: th.delta() });
        }
        if !(th.gap_fraction > 0.0) {
            return Err(Error::Invariant { invariant: "gap_fraction > 0", value: th.gap_fraction });
        }
        if !(th.envelope_ratio >= 1.0) {
            return Err(Error::Invariant { invariant: "envelope_ratio ≥ 1", value: th.envelope_ratio });
        }
        let a = self.params.a;
        let need = |ok: bool, invariant: &'static str, value: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::Invariant { invariant, value })
            }
        };
        match self.scenario {
            ScenarioKind::EulerRegression => need(a == 0.0, "euler_regression requires a = 0", a),
            ScenarioKind::LpSelftest => Ok(()),
            ScenarioKind::DecayA0 => {
                need(a == 0.0, "decay_a0 requires a = 0", a)?;
                need(
                    self.data.kind == DataKind::SmallFamily,
                    "decay_a0 requires small_family data",
                    0.0,
                )
            }
            ScenarioKind::DecayPositiveA => need(a > 0.0, "decay_positive_a requires a > 0", a),
            ScenarioKind::InstabilityGap => {
                need(a > 0.0 && a <= 0.5, "instability_gap requires 0 < a ≤ 0.5", a)?;
                need(
                    self.data.kind == DataKind::ScaledFamily,
                    "instability_gap requires scaled_family data",
                    0.0,
                )?;
                need(
                    a * grid.length() >= MIN_SCALED_LENGTH,
                    "instability_gap requires a·L ≥ 8",
                    a * grid.length(),
                )
            }
            ScenarioKind::LocalConvergence => need(a > 0.0, "local_convergence requires a > 0", a),
        }
    }
}

fn scenario_of(doc: &Value) -> Result<ScenarioKind> {
    match doc.get("scenario") {
        Some(Value::String(s)) => s.parse(),
        Some(other) => Err(Error::Config(format!("scenario must be a string, got {other}"))),
        None => Err(Error::Config("missing field `scenario`".into())),
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; the value is read as JSON when it parses, else as a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override path {key:?} crosses a non-object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::Config(format!("empty override key in {spec:?}")))
}
