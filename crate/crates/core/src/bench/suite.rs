use serde::{Deserialize, Serialize};

use crate::env::{EnvError, TaskFamily};

/// Goal-noise levels an evaluation task may use (mm).
pub const NOISE_LEVELS_MM: [f64; 3] = [0.0, 2.0, 3.0];

/// One evaluation cell: family, per-axis goal noise, perturbation draws and
/// episodes per draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteTask {
    pub family: String,
    pub noise_mm: f64,
    pub draws: usize,
    pub episodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSuite {
    pub name: String,
    pub tasks: Vec<SuiteTask>,
}

impl SuiteTask {
    pub fn family(&self) -> Result<TaskFamily, EnvError> {
        TaskFamily::by_name(&self.family)
    }

    pub fn noise(&self) -> f64 {
        self.noise_mm * 1e-3
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.family, self.noise_mm)
    }
}

impl EvalSuite {
    /// `plug0`, `plug2`, `plug3`, `gear0`, `gear2`, or `all` for the five together.
    pub fn named(name: &str, draws: usize, episodes: usize) -> Result<Self, EnvError> {
        let cell = |family: &str, noise_mm: f64| SuiteTask {
            family: family.into(),
            noise_mm,
            draws,
            episodes,
        };
        let tasks = match name {
            "plug0" => vec![cell("plug", 0.0)],
            "plug2" => vec![cell("plug", 2.0)],
            "plug3" => vec![cell("plug", 3.0)],
            "gear0" => vec![cell("gear", 0.0)],
            "gear2" => vec![cell("gear", 2.0)],
            "all" => vec![
                cell("plug", 0.0),
                cell("plug", 2.0),
                cell("plug", 3.0),
                cell("gear", 0.0),
                cell("gear", 2.0),
            ],
            other => {
                return Err(EnvError::Config(format!(
                    "unknown suite `{other}` (plug0, plug2, plug3, gear0, gear2, all)"
                )))
            }
        };
        let suite = Self {
            name: name.into(),
            tasks,
        };
        suite.validate()?;
        Ok(suite)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        for t in &self.tasks {
            t.family()?;
            if !NOISE_LEVELS_MM.contains(&t.noise_mm) {
                return Err(EnvError::Config(format!("noise {} mm not in {{0, 2, 3}}", t.noise_mm)));
            }
            if t.episodes == 0 || t.draws == 0 {
                return Err(EnvError::Config("draws and episodes must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn episodes(&self) -> usize {
        self.tasks.iter().map(|t| t.draws * t.episodes).sum()
    }
}
