//! Reading run directories back: integrity checks, curves and per-variant
//! summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use url::Url;

use crate::explorer::{normalize_url, ActionKind, CurvePoint, RunConfig, SessionMetrics, StepRecord, Variant};
use crate::model::ModelExchange;
use crate::prompt::PromptFlavor;
use crate::sim::FixtureManifest;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{0} is missing")]
    Missing(PathBuf),
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("no runs found under {0}")]
    NoRuns(PathBuf),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub trace: Vec<StepRecord>,
    pub exchanges: Vec<ModelExchange>,
    pub metrics: SessionMetrics,
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, ReportError> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_json(path, l, i + 1))
        .collect()
}

fn read(path: &Path) -> Result<String, ReportError> {
    if !path.exists() {
        return Err(ReportError::Missing(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str, line: usize) -> Result<T, ReportError> {
    serde_json::from_str(text).map_err(|e| ReportError::Malformed {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })
}

pub fn load_run(dir: &Path) -> Result<RunData, ReportError> {
    let config_path = dir.join("config.json");
    let metrics_path = dir.join("metrics.json");
    let config = parse_json(&config_path, &read(&config_path)?, 1)?;
    let metrics = parse_json(&metrics_path, &read(&metrics_path)?, 1)?;
    let trace = read_lines(&dir.join("trace.jsonl"))?;
    let exchanges_path = dir.join("exchanges.jsonl");
    let exchanges = if exchanges_path.exists() { read_lines(&exchanges_path)? } else { Vec::new() };
    Ok(RunData {
        dir: dir.to_path_buf(),
        config,
        trace,
        exchanges,
        metrics,
    })
}

/// Run directories at `root`: the directory itself if it holds a run,
/// otherwise its immediate children that do.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if root.join("metrics.json").exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    if !root.is_dir() {
        return Err(ReportError::Missing(root.to_path_buf()));
    }
    let mut runs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("metrics.json").exists())
        .collect();
    runs.sort();
    if runs.is_empty() {
        return Err(ReportError::NoRuns(root.to_path_buf()));
    }
    Ok(runs)
}

/// Distinct normalized URLs mentioned by the trace.
pub fn fold_states(trace: &[StepRecord]) -> BTreeSet<String> {
    trace
        .iter()
        .flat_map(|s| [normalize_url(&s.url_before), normalize_url(&s.url_after)])
        .collect()
}

pub fn curve_is_monotone(curve: &[CurvePoint]) -> bool {
    curve.windows(2).all(|w| {
        w[0].actions <= w[1].actions && w[0].states <= w[1].states && w[0].discovered <= w[1].discovered
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub folded_states: usize,
    pub recorded_states: usize,
    pub curve_monotone: bool,
    pub steps_contiguous: bool,
    pub actions_match: bool,
    /// Click steps whose interested elements are not all candidates.
    pub interested_outside_candidates: Vec<u64>,
    /// Typing steps without exactly one input prompt carrying their local
    /// context.
    pub unprompted_inputs: Vec<u64>,
}

impl Verification {
    pub fn ok(&self) -> bool {
        self.problems().is_empty()
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.folded_states != self.recorded_states {
            out.push(format!(
                "trace mentions {} distinct states, metrics record {}",
                self.folded_states, self.recorded_states
            ));
        }
        if !self.curve_monotone {
            out.push("coverage curve decreases".to_string());
        }
        if !self.steps_contiguous {
            out.push("step indices are not 0..n".to_string());
        }
        if !self.actions_match {
            out.push("actions_executed disagrees with the trace length".to_string());
        }
        if !self.interested_outside_candidates.is_empty() {
            out.push(format!(
                "interested elements outside the candidates at steps {:?}",
                self.interested_outside_candidates
            ));
        }
        if !self.unprompted_inputs.is_empty() {
            out.push(format!("typing without a matching input prompt at steps {:?}", self.unprompted_inputs));
        }
        out
    }
}

fn input_prompted(step: &StepRecord, exchanges: &[ModelExchange]) -> bool {
    let context = step.local_context.as_deref().unwrap_or("");
    let inputs: Vec<&ModelExchange> = step
        .model_exchange_refs
        .iter()
        .filter_map(|&i| exchanges.get(i))
        .filter(|e| e.flavor != PromptFlavor::ElementPrompt)
        .collect();
    inputs.len() == 1 && inputs[0].prompt.contains(context)
}

pub fn verify_run(run: &RunData) -> Verification {
    Verification {
        interested_outside_candidates: run
            .trace
            .iter()
            .filter(|s| s.action_kind == ActionKind::Click)
            .filter(|s| s.interested.iter().any(|k| !s.candidates.contains(k)))
            .map(|s| s.step_index)
            .collect(),
        unprompted_inputs: run
            .trace
            .iter()
            .filter(|s| s.action_kind == ActionKind::TypeText && !input_prompted(s, &run.exchanges))
            .map(|s| s.step_index)
            .collect(),
        folded_states: fold_states(&run.trace).len(),
        recorded_states: run.metrics.visited_states.len(),
        curve_monotone: curve_is_monotone(&run.metrics.curve),
        steps_contiguous: run.trace.iter().enumerate().all(|(i, s)| s.step_index == i as u64),
        actions_match: run.metrics.actions_executed == run.trace.len() as u64,
    }
}

pub fn curve_csv(metrics: &SessionMetrics) -> String {
    let mut out = String::from("actions,states,discovered\n");
    for p in &metrics.curve {
        let _ = writeln!(out, "{},{},{}", p.actions, p.states, p.discovered);
    }
    out
}

/// Fraction of the manifest's pages whose path was visited.
pub fn fixture_coverage(metrics: &SessionMetrics, manifest: &FixtureManifest) -> f64 {
    if manifest.pages.is_empty() {
        return 0.0;
    }
    let paths: BTreeSet<String> = metrics
        .visited_states
        .iter()
        .filter_map(|u| Url::parse(u).ok())
        .map(|u| {
            let p = u.path().trim_end_matches('/').to_string();
            if p.is_empty() { "/".to_string() } else { p }
        })
        .collect();
    let hit = manifest.pages.keys().filter(|p| paths.contains(p.as_str())).count();
    hit as f64 / manifest.pages.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub run: String,
    pub variant: Variant,
    pub seed: u64,
    pub actions: u64,
    pub states: usize,
    pub discovered: usize,
    pub failures: usize,
    pub wall_time_secs: f64,
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub variant: Variant,
    pub runs: usize,
    pub mean_states: f64,
    pub mean_discovered: f64,
    pub mean_failures: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<RunRow>,
    pub groups: Vec<GroupStats>,
    /// Relative gain in mean visited states of the full agent over each other
    /// variant.
    pub relative_gain: Vec<(Variant, f64)>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { 0.0 } else { sum / n as f64 }
}

pub fn summarize(runs: &[RunData]) -> Summary {
    let rows: Vec<RunRow> = runs
        .iter()
        .map(|r| {
            let coverage = r
                .config
                .notes
                .get("fixture")
                .and_then(|f| crate::sim::FixtureSite::builtin(f))
                .and_then(|s| s.manifest())
                .map(|m| fixture_coverage(&r.metrics, &m));
            RunRow {
                run: r.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                variant: r.config.variant,
                seed: r.config.rng_seed,
                actions: r.metrics.actions_executed,
                states: r.metrics.visited_states.len(),
                discovered: r.metrics.discovered_actions.len(),
                failures: r.metrics.failures.len(),
                wall_time_secs: r.metrics.wall_time_secs,
                coverage,
            }
        })
        .collect();
    let mut by_variant: BTreeMap<&str, Vec<&RunRow>> = BTreeMap::new();
    for row in &rows {
        by_variant.entry(row.variant.as_str()).or_default().push(row);
    }
    let groups: Vec<GroupStats> = by_variant
        .values()
        .map(|g| GroupStats {
            variant: g[0].variant,
            runs: g.len(),
            mean_states: mean(g.iter().map(|r| r.states as f64)),
            mean_discovered: mean(g.iter().map(|r| r.discovered as f64)),
            mean_failures: mean(g.iter().map(|r| r.failures as f64)),
        })
        .collect();
    let relative_gain = match groups.iter().find(|g| g.variant == Variant::Vetl) {
        Some(full) => groups
            .iter()
            .filter(|g| g.variant != Variant::Vetl && g.mean_states > 0.0)
            .map(|g| (g.variant, (full.mean_states - g.mean_states) / g.mean_states))
            .collect(),
        None => Vec::new(),
    };
    Summary {
        rows,
        groups,
        relative_gain,
    }
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,variant,seed,actions,states,discovered,failures,wall_time_secs,coverage\n");
        for r in &self.rows {
            let coverage = r.coverage.map(|c| format!("{c:.3}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.3},{}",
                r.run,
                r.variant.as_str(),
                r.seed,
                r.actions,
                r.states,
                r.discovered,
                r.failures,
                r.wall_time_secs,
                coverage
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>5} {:>12} {:>16} {:>14}", "variant", "runs", "mean states", "mean discovered", "mean failures");
        for g in &self.groups {
            let _ = writeln!(
                out,
                "{:<8} {:>5} {:>12.2} {:>16.2} {:>14.2}",
                g.variant.as_str(),
                g.runs,
                g.mean_states,
                g.mean_discovered,
                g.mean_failures
            );
        }
        for (v, gain) in &self.relative_gain {
            let _ = writeln!(out, "vetl vs {}: {:+.1}% states", v.as_str(), gain * 100.0);
        }
        out
    }
}
