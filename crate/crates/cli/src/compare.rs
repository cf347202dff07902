//! Ratio tables across summaries and significance of orderings within one.

use std::fmt::Write as _;

use hybrid_rl::stats::{paired_ratio, Estimate};

use crate::output::{ExperimentSummary, Summary};
use crate::suite::BASELINE_ID;
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RatioRow {
    pub file: usize,
    pub experiment: String,
    /// Experiment of the first summary used as the denominator.
    pub reference: String,
    /// Checkpoint episode, or `None` for the final pessimistic gap.
    pub episode: Option<usize>,
    pub metric: &'static str,
    pub ratio: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ordering {
    pub file: usize,
    pub metric: &'static str,
    /// Experiments by ascending mean.
    pub ranked: Vec<(String, Estimate)>,
    /// `separated[i]`: intervals of entries `i` and `i + 1` are disjoint.
    pub separated: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub ratios: Vec<RatioRow>,
    pub orderings: Vec<Ordering>,
}

/// Matches every experiment of every summary against the first summary by
/// id, falling back to the first summary's baseline.
pub fn compare(summaries: &[Summary]) -> Result<Comparison, CliError> {
    if summaries.len() < 2 {
        return Err(CliError::Runtime("compare needs at least two summaries".into()));
    }
    let reference = &summaries[0];
    for (i, s) in summaries.iter().enumerate().skip(1) {
        if s.fingerprint != reference.fingerprint {
            return Err(CliError::Fingerprint { index: i, expected: reference.fingerprint.clone(), found: s.fingerprint.clone() });
        }
    }
    let mut ratios = Vec::new();
    for (file, s) in summaries.iter().enumerate() {
        for exp in &s.experiments {
            let Some(base) = reference.get(&exp.id).or_else(|| reference.get(BASELINE_ID)) else {
                continue;
            };
            ratios.extend(ratio_rows(file, exp, base));
        }
    }
    let orderings = summaries
        .iter()
        .enumerate()
        .flat_map(|(file, s)| {
            let gap = s.experiments.iter().filter_map(|e| Some((e.id.clone(), e.final_gap?))).collect();
            let regret = s.experiments.iter().map(|e| (e.id.clone(), e.final_regret)).collect();
            [ordering(file, "final_gap", gap), ordering(file, "final_regret", regret)]
        })
        .collect();
    Ok(Comparison { ratios, orderings })
}

fn ratio_rows(file: usize, exp: &ExperimentSummary, base: &ExperimentSummary) -> Vec<RatioRow> {
    let row = |episode, metric, ratio| RatioRow {
        file,
        experiment: exp.id.clone(),
        reference: base.id.clone(),
        episode,
        metric,
        ratio,
    };
    let mut rows = Vec::new();
    for cp in &exp.checkpoints {
        let Some(b) = base.checkpoints.iter().find(|b| b.episode == cp.episode) else {
            continue;
        };
        rows.push(row(Some(cp.episode), "regret", paired_ratio(&cp.regret_values, &b.regret_values)));
        rows.push(row(Some(cp.episode), "gap", paired_ratio(&cp.gap_values, &b.gap_values)));
    }
    if let (Some(a), Some(b)) = (&exp.final_gap_values, &base.final_gap_values) {
        rows.push(row(None, "final_gap", paired_ratio(a, b)));
    }
    rows
}

fn ordering(file: usize, metric: &'static str, mut ranked: Vec<(String, Estimate)>) -> Ordering {
    ranked.sort_by(|a, b| a.1.mean.total_cmp(&b.1.mean));
    let separated = ranked.windows(2).map(|w| w[0].1.separated_from(&w[1].1)).collect();
    Ordering { file, metric, ranked, separated }
}

fn interval(e: &Estimate) -> String {
    format!("{:.4} [{:.4}, {:.4}]", e.mean, e.ci_low, e.ci_high)
}

/// Plain-text rendering of a comparison.
pub fn render(c: &Comparison, names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "file\texperiment\treference\tepisode\tmetric\tratio [95% CI]");
    for r in &c.ratios {
        let episode = r.episode.map_or_else(|| "final".to_string(), |e| e.to_string());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            names[r.file],
            r.experiment,
            r.reference,
            episode,
            r.metric,
            interval(&r.ratio)
        );
    }
    for o in &c.orderings {
        let _ = writeln!(out, "\n{} {} (ascending; '<<' marks disjoint 95% intervals):", names[o.file], o.metric);
        let mut line = String::new();
        for (i, (id, e)) in o.ranked.iter().enumerate() {
            if i > 0 {
                line.push_str(if o.separated[i - 1] { " << " } else { " <= " });
            }
            let _ = write!(line, "{id} {:.4}", e.mean);
        }
        let _ = writeln!(out, "  {line}");
    }
    out
}
