//! `curves.csv`, `summary.json` and the resolved config.

use std::io::Write;
use std::path::Path;

use hybrid_rl::stats::Estimate;
use serde::{Deserialize, Serialize};

use crate::cache::hash_json;
use crate::config::ExperimentConfig;
use crate::suite::{ExperimentResult, SuiteResult};
use crate::CliError;

pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESOLVED_FILE: &str = "config.resolved.json";

/// Column order of `curves.csv`.
pub const CURVE_COLUMNS: [&str; 8] = [
    "experiment",
    "trial",
    "episode",
    "cumulative_regret",
    "instantaneous_gap",
    "final_gap",
    "concentrability_star",
    "eluder_sum",
];

/// One row per (experiment, trial, episode). Trial-level values repeat on
/// every row of the trial; absent values are empty fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub experiment: String,
    pub trial: usize,
    /// 1-based.
    pub episode: usize,
    pub cumulative_regret: f64,
    pub instantaneous_gap: f64,
    pub final_gap: Option<f64>,
    pub concentrability_star: Option<f64>,
    pub eluder_sum: f64,
}

pub fn write_curves<W: Write>(suite: &SuiteResult, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for exp in &suite.experiments {
        for t in &exp.trials {
            for (i, gap) in t.per_episode_gap.iter().enumerate() {
                w.serialize(CurveRow {
                    experiment: exp.plan.id.clone(),
                    trial: t.trial,
                    episode: i + 1,
                    cumulative_regret: t.cumulative_regret[i],
                    instantaneous_gap: *gap,
                    final_gap: t.final_gap,
                    concentrability_star: t.concentrability,
                    eluder_sum: t.cumulative_eluder[i],
                })?;
            }
        }
    }
    w.flush().map_err(|e| CliError::Runtime(format!("writing curves: {e}")))?;
    Ok(())
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

/// Summary episodes: 1, 2, 5, 10, 20, 50 and 100 percent of `n_online`,
/// rounded up, deduplicated.
pub fn checkpoint_episodes(n_online: usize) -> Vec<usize> {
    let mut out: Vec<usize> = [1, 2, 5, 10, 20, 50, 100].iter().map(|p| (p * n_online).div_ceil(100).max(1)).collect();
    out.dedup();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub episode: usize,
    pub cumulative_regret: Estimate,
    pub instantaneous_gap: Estimate,
    /// Per-trial values in trial order, for paired comparisons.
    pub regret_values: Vec<f64>,
    pub gap_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub id: String,
    pub behavior: Option<String>,
    pub n_offline: usize,
    pub trials: usize,
    pub checkpoints: Vec<CheckpointSummary>,
    pub final_regret: Estimate,
    pub final_gap: Option<Estimate>,
    pub final_gap_values: Option<Vec<f64>>,
    /// `C(pi* | rho)` over trials with a finite value.
    pub concentrability: Option<Estimate>,
    pub concentrability_infinite: usize,
    pub ratio_bound: Option<Estimate>,
    pub eluder_violations: usize,
    /// Share of trials whose final uncertainty covered the estimation error.
    pub coverage_rate: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Hash of the environment and oracle settings; summaries are comparable
    /// only when it matches.
    pub fingerprint: String,
    pub config: ExperimentConfig,
    pub experiments: Vec<ExperimentSummary>,
    pub passed: bool,
}

impl Summary {
    pub fn get(&self, id: &str) -> Option<&ExperimentSummary> {
        self.experiments.iter().find(|e| e.id == id)
    }
}

pub fn fingerprint(config: &ExperimentConfig) -> String {
    hash_json(&(&config.environment, &config.oracle))
}

fn finite_estimate(values: impl Iterator<Item = Option<f64>>) -> (Option<Estimate>, usize) {
    let values: Vec<f64> = values.flatten().collect();
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let infinite = values.len() - finite.len();
    ((!finite.is_empty()).then(|| Estimate::of(&finite)), infinite)
}

fn summarize_experiment(config: &ExperimentConfig, exp: &ExperimentResult) -> ExperimentSummary {
    let trials = &exp.trials;
    let checkpoints = checkpoint_episodes(config.n_online)
        .into_iter()
        .map(|episode| {
            let regret_values: Vec<f64> = trials.iter().map(|t| t.cumulative_regret[episode - 1]).collect();
            let gap_values: Vec<f64> = trials.iter().map(|t| t.per_episode_gap[episode - 1]).collect();
            CheckpointSummary {
                episode,
                cumulative_regret: Estimate::of(&regret_values),
                instantaneous_gap: Estimate::of(&gap_values),
                regret_values,
                gap_values,
            }
        })
        .collect();
    let final_gap_values: Option<Vec<f64>> = trials.iter().map(|t| t.final_gap).collect();
    let (concentrability, concentrability_infinite) = finite_estimate(trials.iter().map(|t| t.concentrability));
    let (ratio_bound, _) = finite_estimate(trials.iter().map(|t| t.ratio_bound));
    let eluder_violations = trials.iter().filter(|t| !t.eluder_ok()).count();
    let covered: Vec<bool> = trials.iter().filter_map(|t| t.covered).collect();
    let coverage_rate = (!covered.is_empty()).then(|| covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64);
    let passed = eluder_violations == 0 && coverage_rate.is_none_or(|r| r >= 1.0 - config.oracle.delta);
    ExperimentSummary {
        id: exp.plan.id.clone(),
        behavior: exp.plan.behavior.as_ref().map(|b| b.label.clone()),
        n_offline: exp.plan.n_offline,
        trials: trials.len(),
        checkpoints,
        final_regret: Estimate::of(&trials.iter().map(|t| t.total_regret()).collect::<Vec<_>>()),
        final_gap: final_gap_values.as_deref().filter(|v| !v.is_empty()).map(Estimate::of),
        final_gap_values,
        concentrability,
        concentrability_infinite,
        ratio_bound,
        eluder_violations,
        coverage_rate,
        passed,
    }
}

pub fn summarize(config: &ExperimentConfig, suite: &SuiteResult) -> Summary {
    let experiments: Vec<ExperimentSummary> = suite.experiments.iter().map(|e| summarize_experiment(config, e)).collect();
    Summary {
        fingerprint: fingerprint(config),
        config: config.clone(),
        passed: experiments.iter().all(|e| e.passed),
        experiments,
    }
}

pub fn read_summary(path: &Path) -> Result<Summary, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), error: e })?;
    parse_summary(&text).map_err(|e| CliError::Summary { path: path.to_path_buf(), message: e })
}

pub fn parse_summary(text: &str) -> Result<Summary, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

/// Writes the three output files into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, suite: &SuiteResult, summary: &Summary) -> Result<(), CliError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| CliError::Io { path: p, error: e }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let curves = dir.join(CURVES_FILE);
    let file = std::fs::File::create(&curves).map_err(io(&curves))?;
    write_curves(suite, std::io::BufWriter::new(file))?;
    let summary_path = dir.join(SUMMARY_FILE);
    std::fs::write(&summary_path, pretty(summary)).map_err(io(&summary_path))?;
    let resolved = dir.join(RESOLVED_FILE);
    std::fs::write(&resolved, pretty(config)).map_err(io(&resolved))?;
    Ok(())
}
