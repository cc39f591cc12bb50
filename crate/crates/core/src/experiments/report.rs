use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, ScenarioKind};
use crate::diagnostics::{RateFit, TimeSeries};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    BlowUp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claim: String,
    pub outcome: Outcome,
    pub measured: f64,
    /// `"<="`, `">="`, `"<"` or `"in"`.
    pub relation: String,
    pub bound: Vec<f64>,
    /// File the measurement is recomputable from.
    pub series: String,
    pub window: (f64, f64),
}

impl Verdict {
    fn new(claim: &str, ok: bool, measured: f64, relation: &str, bound: Vec<f64>, series: &str, window: (f64, f64)) -> Self {
        Self {
            claim: claim.to_string(),
            outcome: if ok && !measured.is_nan() { Outcome::Pass } else { Outcome::Fail },
            measured,
            relation: relation.to_string(),
            bound,
            series: series.to_string(),
            window,
        }
    }

    pub fn at_most(claim: &str, measured: f64, bound: f64, series: &str, window: (f64, f64)) -> Self {
        Self::new(claim, measured <= bound, measured, "<=", vec![bound], series, window)
    }

    pub fn below(claim: &str, measured: f64, bound: f64, series: &str, window: (f64, f64)) -> Self {
        Self::new(claim, measured < bound, measured, "<", vec![bound], series, window)
    }

    pub fn at_least(claim: &str, measured: f64, bound: f64, series: &str, window: (f64, f64)) -> Self {
        Self::new(claim, measured >= bound, measured, ">=", vec![bound], series, window)
    }

    pub fn within(claim: &str, measured: f64, lo: f64, hi: f64, series: &str, window: (f64, f64)) -> Self {
        Self::new(claim, measured >= lo && measured <= hi, measured, "in", vec![lo, hi], series, window)
    }

    /// Boolean claim recorded as measured 1 (true) or 0 (false).
    pub fn holds(claim: &str, ok: bool, series: &str, window: (f64, f64)) -> Self {
        Self::new(claim, ok, if ok { 1.0 } else { 0.0 }, "==", vec![1.0], series, window)
    }

    pub fn blow_up(claim: &str, time: f64, series: &str, window: (f64, f64)) -> Self {
        Self {
            claim: claim.to_string(),
            outcome: Outcome::BlowUp,
            measured: time,
            relation: "blowup_at".to_string(),
            bound: vec![],
            series: series.to_string(),
            window,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: ScenarioKind,
    pub config: ScenarioConfig,
    pub verdicts: Vec<Verdict>,
    pub fits: Vec<RateFit>,
    pub series_files: Vec<String>,
    pub steps: Vec<(String, usize)>,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub series: Vec<(String, TimeSeries)>,
    /// Extra CSV tables, `(file name, contents)`.
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

impl RunReport {
    pub fn new(config: &ScenarioConfig) -> Self {
        Self {
            scenario: config.scenario,
            config: config.clone(),
            verdicts: Vec::new(),
            fits: Vec::new(),
            series_files: Vec::new(),
            steps: Vec::new(),
            wall_clock_seconds: 0.0,
            series: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn add_series(&mut self, file: &str, series: TimeSeries) {
        self.series_files.push(file.to_string());
        self.series.push((file.to_string(), series));
    }

    pub fn add_table(&mut self, file: &str, contents: String) {
        self.series_files.push(file.to_string());
        self.tables.push((file.to_string(), contents));
    }

    pub fn series(&self, file: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|(f, _)| f == file).map(|(_, s)| s)
    }

    pub fn verdict(&self, claim: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.claim == claim)
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }

    pub fn any_blow_up(&self) -> bool {
        self.verdicts.iter().any(|v| v.outcome == Outcome::BlowUp)
    }

    /// Process exit code: 0 all pass, 2 any blow-up, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.any_blow_up() {
            2
        } else if self.all_passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json`, every series CSV and every extra table into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (file, s) in &self.series {
            s.write_csv(&dir.join(file))?;
        }
        for (file, contents) in &self.tables {
            std::fs::write(dir.join(file), contents)?;
        }
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        Ok(())
    }

    /// One line per verdict.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let tag = match v.outcome {
                Outcome::Pass => "PASS",
                Outcome::Fail => "FAIL",
                Outcome::BlowUp => "BLOWUP",
            };
            out.push_str(&format!(
                "{tag:6} {}: measured {:.6e} {} {:?}\n",
                v.claim, v.measured, v.relation, v.bound
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_relations() {
        assert!(Verdict::at_most("x", 1.0, 1.0, "s", (0.0, 1.0)).passed());
        assert!(!Verdict::below("x", 1.0, 1.0, "s", (0.0, 1.0)).passed());
        assert!(Verdict::within("x", 2.0, 1.6, 2.4, "s", (0.0, 1.0)).passed());
        assert!(!Verdict::at_least("x", f64::NAN, 0.0, "s", (0.0, 1.0)).passed());
        assert!(!Verdict::holds("x", false, "s", (0.0, 1.0)).passed());
    }

    #[test]
    fn exit_codes() {
        let cfg = ScenarioConfig::default_for(ScenarioKind::DecayA0);
        let mut r = RunReport::new(&cfg);
        assert_eq!(r.exit_code(), 0);
        r.verdicts.push(Verdict::at_most("a", 2.0, 1.0, "s", (0.0, 1.0)));
        assert_eq!(r.exit_code(), 1);
        r.verdicts.push(Verdict::blow_up("b", 3.0, "s", (0.0, 1.0)));
        assert_eq!(r.exit_code(), 2);
    }
}
