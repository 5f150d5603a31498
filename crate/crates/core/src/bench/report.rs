use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One (policy, task) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub policy: String,
    pub family: String,
    pub noise_mm: f64,
    pub episodes: usize,
    pub success_rate: f64,
    /// Insertion steps over successful episodes.
    pub steps_mean: Option<f64>,
    pub steps_std: Option<f64>,
    pub seconds_mean: Option<f64>,
}

/// Mean success per adaptation trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationCurve {
    pub label: String,
    pub trials: usize,
    pub repeats: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Environment steps consumed by one repeat.
    pub env_steps_per_repeat: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<ReportRow>,
    pub curves: Vec<AdaptationCurve>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Success rate and insertion statistics of a set of episode outcomes
/// `(success, insertion_steps, insertion_seconds)`.
pub fn summarize(
    policy: &str,
    family: &str,
    noise_mm: f64,
    outcomes: &[(bool, Option<usize>, Option<f64>)],
) -> ReportRow {
    let n = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.0).count();
    let steps: Vec<f64> = outcomes.iter().filter_map(|o| o.1.map(|s| s as f64)).collect();
    let secs: Vec<f64> = outcomes.iter().filter_map(|o| o.2).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let steps_mean = mean(&steps);
    let steps_std = steps_mean.map(|m| (steps.iter().map(|s| (s - m).powi(2)).sum::<f64>() / steps.len() as f64).sqrt());
    ReportRow {
        policy: policy.into(),
        family: family.into(),
        noise_mm,
        episodes: n,
        success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
        steps_mean,
        steps_std,
        seconds_mean: mean(&secs),
    }
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record([
            "policy",
            "family",
            "noise_mm",
            "episodes",
            "success_rate",
            "steps_mean",
            "steps_std",
            "seconds_mean",
        ])?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn curves_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "trial", "mean_success", "std_success", "repeats"])?;
        for c in &self.curves {
            for t in 0..c.trials {
                w.write_record([
                    c.label.clone(),
                    (t + 1).to_string(),
                    c.mean[t].to_string(),
                    c.std[t].to_string(),
                    c.repeats.to_string(),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn write(&self, path: &Path, format: ReportFormat) -> anyhow::Result<()> {
        let text = match format {
            ReportFormat::Csv => self.to_csv()?,
            ReportFormat::Json => self.to_json(),
        };
        let mut f = std::fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }
}
