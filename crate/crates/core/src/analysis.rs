//! Batch analysis of a directory of session logs.
//!
//! Layout: `.csv` logs directly under the directory form one task named
//! after the directory; each subdirectory holding logs is a task of its
//! own. A `bags.txt` next to a task's logs supplies its synonym bags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::logging::{read_log, replay, LogError, LogRecord};
use crate::metrics::{
    acceptance_rate, contribution_rate, format_min_sec, kruskal_wallis, mean_std, overlap_matrix, render_table,
    task_duration, time_stats, ElementSet, KruskalWallis, MetricsError, Rate, SynonymBags, TimeStats,
};
use crate::model::DomainModel;

pub const BAGS_FILE: &str = "bags.txt";
pub const DEFAULT_LIMIT: Duration = Duration::from_secs(600);

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error("{path}: {source}")]
    Metrics { path: PathBuf, source: MetricsError },
    #[error("{path}: {message}")]
    Bags { path: PathBuf, message: String },
    #[error("no logs found under {0}")]
    NoLogs(PathBuf),
}

fn io_err(path: &Path, e: std::io::Error) -> AnalysisError {
    AnalysisError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    #[default]
    Mode,
    Task,
}

impl GroupBy {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "mode" => Some(GroupBy::Mode),
            "task" => Some(GroupBy::Task),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub limit: Duration,
    pub group_by: GroupBy,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            limit: DEFAULT_LIMIT,
            group_by: GroupBy::Mode,
        }
    }
}

/// One parsed log together with its replayed final model.
#[derive(Debug, Clone)]
pub struct LoadedLog {
    pub path: PathBuf,
    pub task: String,
    pub mode: String,
    pub records: Vec<LogRecord>,
    pub final_model: DomainModel,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub logs: Vec<LoadedLog>,
    pub bags: BTreeMap<String, SynonymBags>,
}

/// Mode of the session when the task started, or of the first row.
pub fn initial_mode(records: &[LogRecord]) -> String {
    records
        .iter()
        .find(|r| r.operation == "task-start")
        .or(records.first())
        .map(|r| r.mode.clone())
        .unwrap_or_default()
}

pub fn load_log(path: &Path, task: &str) -> Result<LoadedLog, AnalysisError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let log_err = |source| AnalysisError::Log {
        path: path.to_path_buf(),
        source,
    };
    let records = read_log(&text).map_err(log_err)?;
    let final_model = replay(&records, task).map_err(log_err)?;
    Ok(LoadedLog {
        path: path.to_path_buf(),
        task: task.to_string(),
        mode: initial_mode(&records),
        records,
        final_model,
    })
}

fn csv_files(dir: &Path) -> Result<(Vec<PathBuf>, Vec<PathBuf>), AnalysisError> {
    let mut files = Vec::new();
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        } else if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
            files.push(path);
        }
    }
    files.sort();
    dirs.sort();
    Ok((files, dirs))
}

fn load_bags(path: &Path) -> Result<SynonymBags, AnalysisError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    SynonymBags::parse(&text).map_err(|message| AnalysisError::Bags {
        path: path.to_path_buf(),
        message,
    })
}

fn dir_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "task".to_string())
}

/// Loads every log under `root`. `bags` overrides per-task bag files.
pub fn load_dataset(root: &Path, bags: Option<&Path>) -> Result<Dataset, AnalysisError> {
    let override_bags = bags.map(load_bags).transpose()?;
    let mut data = Dataset::default();
    let root_abs = root.canonicalize().map_err(|e| io_err(root, e))?;
    let (files, dirs) = csv_files(&root_abs)?;
    let mut tasks = vec![(dir_name(&root_abs), root_abs.clone(), files)];
    for d in dirs {
        let (files, _) = csv_files(&d)?;
        if !files.is_empty() {
            tasks.push((dir_name(&d), d, files));
        }
    }
    for (task, dir, files) in tasks {
        if files.is_empty() {
            continue;
        }
        let bag_path = dir.join(BAGS_FILE);
        match &override_bags {
            Some(b) => {
                data.bags.insert(task.clone(), b.clone());
            }
            None if bag_path.is_file() => {
                data.bags.insert(task.clone(), load_bags(&bag_path)?);
            }
            None => {}
        }
        for f in files {
            data.logs.push(load_log(&f, &task)?);
        }
    }
    if data.logs.is_empty() {
        return Err(AnalysisError::NoLogs(root.to_path_buf()));
    }
    Ok(data)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LogSummary {
    pub file: String,
    pub task: String,
    pub mode: String,
    pub rows: usize,
    pub duration_secs: Option<f64>,
    pub acceptance: Rate,
    pub contribution: Rate,
    pub elements: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Spread {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (mean, std) = mean_std(values);
        Some(Spread {
            mean,
            std,
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GroupSummary {
    pub key: String,
    pub label: String,
    pub logs: usize,
    pub time: Option<TimeStats>,
    /// Over logs that were shown at least one suggestion.
    pub acceptance: Option<Spread>,
    /// Over logs whose final model is non-empty.
    pub contribution: Option<Spread>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PairTest {
    pub first: String,
    pub second: String,
    pub time: Option<KruskalWallis>,
    pub acceptance: Option<KruskalWallis>,
    pub contribution: Option<KruskalWallis>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlapRow {
    pub task: String,
    pub mode: String,
    pub models: usize,
    pub exact: Option<Spread>,
    pub bagged: Option<Spread>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub group_by: &'static str,
    pub limit_secs: f64,
    pub logs: Vec<LogSummary>,
    pub groups: Vec<GroupSummary>,
    /// Kruskal-Wallis across all groups with data.
    pub overall: PairTest,
    pub pairwise: Vec<PairTest>,
    pub overlap: Vec<OverlapRow>,
    pub notices: Vec<String>,
}

pub fn mode_label(token: &str) -> String {
    match token {
        "none" => "No assistance".to_string(),
        "request" => "On-Request".to_string(),
        "auto" => "Automatic".to_string(),
        "end" => "At-End".to_string(),
        other => other.to_string(),
    }
}

fn mode_rank(token: &str) -> usize {
    ["none", "request", "auto", "end"]
        .iter()
        .position(|m| *m == token)
        .unwrap_or(usize::MAX)
}

fn summarize(log: &LoadedLog, notices: &mut Vec<String>) -> Result<LogSummary, AnalysisError> {
    let file = log.path.display().to_string();
    let duration = match task_duration(&log.records) {
        Ok(d) => Some(d),
        Err(e) => {
            notices.push(format!("{file}: {e}; excluded from timing"));
            None
        }
    };
    let contribution = contribution_rate(&log.final_model, &log.records).map_err(|source| AnalysisError::Metrics {
        path: log.path.clone(),
        source,
    })?;
    Ok(LogSummary {
        file,
        task: log.task.clone(),
        mode: log.mode.clone(),
        rows: log.records.len(),
        duration_secs: duration.map(|d| d.as_secs_f64()),
        acceptance: acceptance_rate(&log.records),
        contribution,
        elements: log.final_model.element_count(),
    })
}

struct Samples {
    time: Vec<f64>,
    acceptance: Vec<f64>,
    contribution: Vec<f64>,
}

fn samples(logs: &[&LogSummary]) -> Samples {
    Samples {
        time: logs.iter().filter_map(|l| l.duration_secs).collect(),
        acceptance: logs
            .iter()
            .filter(|l| !l.acceptance.empty_denominator)
            .map(|l| l.acceptance.value)
            .collect(),
        contribution: logs
            .iter()
            .filter(|l| !l.contribution.empty_denominator)
            .map(|l| l.contribution.value)
            .collect(),
    }
}

fn kw(groups: Vec<&Vec<f64>>) -> Option<KruskalWallis> {
    let groups: Vec<Vec<f64>> = groups.into_iter().filter(|g| !g.is_empty()).cloned().collect();
    kruskal_wallis(&groups).ok()
}

/// Timing tests leave out at-end sessions, whose suggestions arrive
/// after the unassisted work; rate tests leave out unassisted ones.
fn timed(key: &str, by: GroupBy) -> bool {
    by == GroupBy::Task || key != "end"
}

fn rated(key: &str, by: GroupBy) -> bool {
    by == GroupBy::Task || key != "none"
}

pub fn analyze(data: &Dataset, options: &AnalysisOptions) -> Result<AnalysisReport, AnalysisError> {
    let mut notices = Vec::new();
    let mut logs = Vec::with_capacity(data.logs.len());
    for l in &data.logs {
        logs.push(summarize(l, &mut notices)?);
    }

    let key_of = |l: &LogSummary| match options.group_by {
        GroupBy::Mode => l.mode.clone(),
        GroupBy::Task => l.task.clone(),
    };
    let mut keys: Vec<String> = logs.iter().map(key_of).collect();
    keys.sort_by(|a, b| mode_rank(a).cmp(&mode_rank(b)).then_with(|| a.cmp(b)));
    keys.dedup();

    let mut groups = Vec::new();
    let mut group_samples = Vec::new();
    for key in &keys {
        let members: Vec<&LogSummary> = logs.iter().filter(|l| &key_of(l) == key).collect();
        let s = samples(&members);
        let durations: Vec<Duration> = s.time.iter().map(|t| Duration::from_secs_f64(*t)).collect();
        groups.push(GroupSummary {
            key: key.clone(),
            label: match options.group_by {
                GroupBy::Mode => mode_label(key),
                GroupBy::Task => key.clone(),
            },
            logs: members.len(),
            time: (!durations.is_empty()).then(|| time_stats(&durations, options.limit)),
            acceptance: Spread::of(&s.acceptance),
            contribution: Spread::of(&s.contribution),
        });
        group_samples.push(s);
    }

    let by = options.group_by;
    let overall = PairTest {
        first: "all".into(),
        second: "all".into(),
        time: kw(keys
            .iter()
            .zip(&group_samples)
            .filter(|(k, _)| timed(k, by))
            .map(|(_, s)| &s.time)
            .collect()),
        acceptance: kw(keys
            .iter()
            .zip(&group_samples)
            .filter(|(k, _)| rated(k, by))
            .map(|(_, s)| &s.acceptance)
            .collect()),
        contribution: kw(keys
            .iter()
            .zip(&group_samples)
            .filter(|(k, _)| rated(k, by))
            .map(|(_, s)| &s.contribution)
            .collect()),
    };
    let mut pairwise = Vec::new();
    for i in 0..keys.len() {
        for j in i + 1..keys.len() {
            let (a, b) = (&group_samples[i], &group_samples[j]);
            let (ka, kb) = (&keys[i], &keys[j]);
            let both = |f: fn(&str, GroupBy) -> bool| f(ka, by) && f(kb, by);
            pairwise.push(PairTest {
                first: ka.clone(),
                second: kb.clone(),
                time: both(timed).then(|| kw(vec![&a.time, &b.time])).flatten(),
                acceptance: both(rated).then(|| kw(vec![&a.acceptance, &b.acceptance])).flatten(),
                contribution: both(rated).then(|| kw(vec![&a.contribution, &b.contribution])).flatten(),
            });
        }
    }

    let overlap = overlap_rows(data, &mut notices);
    Ok(AnalysisReport {
        group_by: match by {
            GroupBy::Mode => "mode",
            GroupBy::Task => "task",
        },
        limit_secs: options.limit.as_secs_f64(),
        logs,
        groups,
        overall,
        pairwise,
        overlap,
        notices,
    })
}

fn overlap_rows(data: &Dataset, notices: &mut Vec<String>) -> Vec<OverlapRow> {
    let mut cells: BTreeMap<(String, usize, String), Vec<&LoadedLog>> = BTreeMap::new();
    for l in &data.logs {
        cells
            .entry((l.task.clone(), mode_rank(&l.mode), l.mode.clone()))
            .or_default()
            .push(l);
    }
    let mut rows = Vec::new();
    for ((task, _, mode), members) in cells {
        let sets: Vec<ElementSet> = members
            .iter()
            .map(|l| ElementSet::of(&l.final_model))
            .filter(|s| !s.is_empty())
            .collect();
        if sets.len() < members.len() {
            notices.push(format!(
                "{task}/{mode}: {} empty model(s) left out of overlap",
                members.len() - sets.len()
            ));
        }
        if sets.len() < 2 {
            notices.push(format!("{task}/{mode}: fewer than 2 models, overlap skipped"));
            continue;
        }
        let exact = overlap_matrix(&sets, None).ok();
        let bagged = data.bags.get(&task).and_then(|b| overlap_matrix(&sets, Some(b)).ok());
        let spread = |m: &crate::metrics::OverlapMatrix| Spread {
            mean: m.mean,
            std: m.std,
            n: m.pairs,
        };
        rows.push(OverlapRow {
            task,
            mode,
            models: sets.len(),
            exact: exact.as_ref().map(spread),
            matrix: bagged.as_ref().or(exact.as_ref()).map(|m| m.values.clone()).unwrap_or_default(),
            bagged: bagged.as_ref().map(spread),
        });
    }
    rows
}

fn spread_cell(s: Option<Spread>) -> String {
    match s {
        Some(s) => format!("{:.2} ({:.2})", s.mean, s.std),
        None => "-".to_string(),
    }
}

fn p_cell(k: Option<KruskalWallis>) -> String {
    k.map(|k| format!("{:.3}", k.p_value)).unwrap_or_else(|| "-".to_string())
}

/// Plain-text rendering of the report.
pub fn render_report(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let first = if report.group_by == "mode" { "Mode" } else { "Task" };
    let limit = format_min_sec(Duration::from_secs_f64(report.limit_secs));

    let rows: Vec<Vec<String>> = report
        .groups
        .iter()
        .map(|g| match &g.time {
            Some(t) => vec![
                g.label.clone(),
                format!("{} ({:.0})", format_min_sec(t.mean), t.std.as_secs_f64()),
                format!("{:.2}", t.completion_ratio),
            ],
            None => vec![g.label.clone(), "-".into(), "-".into()],
        })
        .collect();
    let ratio = format!("Completed within {limit}");
    let _ = writeln!(out, "Completion time");
    out.push_str(&render_table(&[first, "Mean time min:sec (std sec)", &ratio], &rows));

    let rated: Vec<Vec<String>> = report
        .groups
        .iter()
        .filter(|g| g.acceptance.is_some())
        .map(|g| vec![g.label.clone(), spread_cell(g.acceptance), spread_cell(g.contribution)])
        .collect();
    if !rated.is_empty() {
        let _ = writeln!(out, "\nSuggestion impact");
        out.push_str(&render_table(&[first, "Acceptance rate (std)", "Contribution rate (std)"], &rated));
    }

    let label = |key: &str| {
        report
            .groups
            .iter()
            .find(|g| g.key == key)
            .map(|g| g.label.clone())
            .unwrap_or_else(|| key.to_string())
    };
    let tests: Vec<Vec<String>> = report
        .pairwise
        .iter()
        .filter(|p| p.time.is_some() || p.acceptance.is_some() || p.contribution.is_some())
        .map(|p| {
            vec![
                format!("{} vs {}", label(&p.first), label(&p.second)),
                p_cell(p.time),
                p_cell(p.acceptance),
                p_cell(p.contribution),
            ]
        })
        .collect();
    if !tests.is_empty() {
        let _ = writeln!(out, "\nKruskal-Wallis p-values");
        out.push_str(&render_table(&["Pair", "Time", "Acceptance", "Contribution"], &tests));
    }

    if !report.overlap.is_empty() {
        let _ = writeln!(out, "\nModel similarity (overlap coefficient)");
        let mut last_task = "";
        let rows: Vec<Vec<String>> = report
            .overlap
            .iter()
            .map(|r| {
                let task = if r.task == last_task { String::new() } else { r.task.clone() };
                last_task = &r.task;
                vec![task, mode_label(&r.mode), spread_cell(r.exact), spread_cell(r.bagged)]
            })
            .collect();
        out.push_str(&render_table(&["Task", "Mode", "Exact match (std)", "Bagged match (std)"], &rows));
    }

    if !report.notices.is_empty() {
        let _ = writeln!(out, "\nNotices");
        for n in &report.notices {
            let _ = writeln!(out, "- {n}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logging::render_log;
    use chrono::NaiveDate;

    fn record(secs: u32, mode: &str, op: &str, model: &DomainModel) -> LogRecord {
        let ts = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(10, 0, 0).unwrap()
            + chrono::Duration::seconds(secs as i64);
        LogRecord::capture(ts, mode, op, model, 20)
    }

    fn write_log(dir: &Path, name: &str, mode: &str, classes: &[&str], secs: u32) {
        let mut m = DomainModel::new("T");
        let mut rows = vec![record(0, mode, "task-start", &m)];
        for (i, c) in classes.iter().enumerate() {
            m.add_class(c).unwrap();
            rows.push(record(10 * (i as u32 + 1), mode, "create-class", &m));
        }
        rows.push(record(secs, mode, "task-end", &m));
        std::fs::write(dir.join(name), render_log(&rows)).unwrap();
    }

    #[test]
    fn flat_directory_single_log() {
        let dir = std::env::temp_dir().join(format!("ma-analysis-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        write_log(&dir, "a.csv", "none", &["Bank"], 300);
        let data = load_dataset(&dir, None).unwrap();
        let report = analyze(&data, &AnalysisOptions::default()).unwrap();
        assert_eq!(report.groups.len(), 1);
        assert_eq!(report.groups[0].time.unwrap().completion_ratio, 1.0);
        assert!(report.overlap.is_empty());
        assert!(report.notices.iter().any(|n| n.contains("overlap skipped")));
        let text = render_report(&report);
        assert!(text.contains("05:00 (0)") && text.contains("1.00"), "{text}");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn task_directories_and_bags() {
        let dir = std::env::temp_dir().join(format!("ma-analysis-bags-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let task = dir.join("shop");
        std::fs::create_dir_all(&task).unwrap();
        write_log(&task, "a.csv", "auto", &["Seller", "Item"], 500);
        write_log(&task, "b.csv", "auto", &["Supplier", "Order"], 700);
        std::fs::write(task.join(BAGS_FILE), "Seller, Supplier\n").unwrap();
        let data = load_dataset(&dir, None).unwrap();
        let report = analyze(&data, &AnalysisOptions::default()).unwrap();
        let row = &report.overlap[0];
        assert_eq!((row.task.as_str(), row.models), ("shop", 2));
        assert_eq!(row.exact.unwrap().mean, 0.0);
        assert_eq!(row.bagged.unwrap().mean, 0.5);
        assert_eq!(report.groups[0].time.unwrap().completion_ratio, 0.5);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_directory_is_io_error() {
        assert!(matches!(
            load_dataset(Path::new("/nonexistent/logs"), None),
            Err(AnalysisError::Io { .. })
        ));
    }
}
