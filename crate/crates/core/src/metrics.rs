//! Session metrics: acceptance and contribution rates, overlap between
//! models, Kruskal-Wallis tests and completion times.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::checked_gamma_ur;
use thiserror::Error;

use crate::logging::{ElementId, LogRecord};
use crate::model::DomainModel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("empty element set")]
    EmptySet,
    #[error("need at least {0} models")]
    TooFewModels(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("log does not match the final model: {0}")]
    InconsistentLog(String),
    #[error("log has no {0} row")]
    MissingMarkers(&'static str),
}

/// A ratio that may have been computed over an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rate {
    pub value: f64,
    pub numerator: usize,
    pub denominator: usize,
    /// Set when the denominator was zero and `value` is a placeholder 0.
    pub empty_denominator: bool,
}

impl Rate {
    fn new(numerator: usize, denominator: usize) -> Self {
        if denominator == 0 {
            Rate {
                value: 0.0,
                numerator,
                denominator,
                empty_denominator: true,
            }
        } else {
            Rate {
                value: numerator as f64 / denominator as f64,
                numerator,
                denominator,
                empty_denominator: false,
            }
        }
    }
}

fn is_accept(op: &str) -> bool {
    op.starts_with("accept-") && !op.ends_with(":error")
}

/// Accepted suggestions over distinct suggested concepts seen in the log.
pub fn acceptance_rate(records: &[LogRecord]) -> Rate {
    let accepted = records.iter().filter(|r| is_accept(&r.operation)).count();
    let suggested: BTreeSet<ElementId> = records.iter().flat_map(|r| r.reco_elements()).collect();
    Rate::new(accepted, suggested.len())
}

fn model_elements(model: &DomainModel) -> BTreeSet<ElementId> {
    let mut out = BTreeSet::new();
    for c in model.classes() {
        out.insert(ElementId::Class(c.name.clone()));
        for a in &c.attributes {
            out.insert(ElementId::Attribute(c.name.clone(), a.name.clone()));
        }
    }
    for a in model.associations() {
        let (x, y, k) = a.identity();
        out.insert(ElementId::Edge(x, y, k));
    }
    out
}

/// Elements first added by an accept row, of the accepted kind only
/// (associations materialized alongside an accepted class are not counted).
pub fn accepted_elements(records: &[LogRecord]) -> BTreeSet<ElementId> {
    let mut out = BTreeSet::new();
    let mut previous: BTreeSet<ElementId> = BTreeSet::new();
    for r in records {
        let current = r.real_elements();
        if is_accept(&r.operation) {
            for e in current.difference(&previous) {
                let primary = match (r.operation.as_str(), e) {
                    ("accept-attribute", ElementId::Attribute(..)) => true,
                    ("accept-association", ElementId::Edge(..)) => true,
                    ("accept-attribute" | "accept-association", _) => false,
                    (_, ElementId::Class(_)) => true,
                    _ => false,
                };
                if primary {
                    out.insert(e.clone());
                }
            }
        }
        previous = current;
    }
    out
}

/// Share of the final model's elements that came from accepted
/// suggestions and survived to the end.
pub fn contribution_rate(final_model: &DomainModel, records: &[LogRecord]) -> Result<Rate, MetricsError> {
    let finals = model_elements(final_model);
    if let Some(last) = records.last() {
        let logged = last.real_elements();
        if logged != finals {
            let diff: Vec<String> = logged
                .symmetric_difference(&finals)
                .take(3)
                .map(|e| format!("{e:?}"))
                .collect();
            return Err(MetricsError::InconsistentLog(diff.join(", ")));
        }
    }
    let surviving = accepted_elements(records).intersection(&finals).count();
    Ok(Rate::new(surviving, final_model.element_count()))
}

/// Class names and `Class.attribute` identifiers of a model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSet(pub BTreeSet<String>);

impl ElementSet {
    pub fn of(model: &DomainModel) -> Self {
        let mut out = BTreeSet::new();
        for c in model.classes() {
            out.insert(c.name.clone());
            for a in &c.attributes {
                out.insert(format!("{}.{}", c.name, a.name));
            }
        }
        ElementSet(out)
    }

    pub fn from_names<I: IntoIterator<Item = S>, S: Into<String>>(names: I) -> Self {
        ElementSet(names.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Groups of names treated as the same concept. Matching is
/// case-insensitive; a name outside every bag is its own bag.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymBags {
    lookup: BTreeMap<String, usize>,
    bags: usize,
}

impl SynonymBags {
    /// One bag per line, names separated by commas. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut bags = SynonymBags::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let id = bags.bags;
            bags.bags += 1;
            for name in line.split(',').map(str::trim).filter(|n| !n.is_empty()) {
                let key = name.to_lowercase();
                if let Some(prev) = bags.lookup.insert(key, id) {
                    if prev != id {
                        return Err(format!("line {}: {name} is already in another bag", i + 1));
                    }
                }
            }
        }
        Ok(bags)
    }

    pub fn bag_count(&self) -> usize {
        self.bags
    }

    fn map_part(&self, part: &str) -> String {
        let key = part.to_lowercase();
        match self.lookup.get(&key) {
            Some(id) => format!("#{id}"),
            None => key,
        }
    }

    /// Bag identifier of an element; both halves of `Class.attr` map.
    pub fn bag_of(&self, element: &str) -> String {
        match element.split_once('.') {
            Some((c, a)) => format!("{}.{}", self.map_part(c), self.map_part(a)),
            None => self.map_part(element),
        }
    }

    pub fn map_set(&self, set: &ElementSet) -> BTreeSet<String> {
        set.0.iter().map(|e| self.bag_of(e)).collect()
    }
}

/// |A ∩ B| / min(|A|, |B|), on bag identifiers when `bags` is given.
pub fn overlap_coefficient(
    a: &ElementSet,
    b: &ElementSet,
    bags: Option<&SynonymBags>,
) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let (x, y) = match bags {
        Some(bags) => (bags.map_set(a), bags.map_set(b)),
        None => (a.0.clone(), b.0.clone()),
    };
    let common = x.intersection(&y).count();
    Ok(common as f64 / x.len().min(y.len()) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlapMatrix {
    pub values: Vec<Vec<f64>>,
    /// Mean over the n(n-1)/2 unordered pairs.
    pub mean: f64,
    /// Sample standard deviation over the same pairs.
    pub std: f64,
    pub pairs: usize,
}

pub fn overlap_matrix(
    models: &[ElementSet],
    bags: Option<&SynonymBags>,
) -> Result<OverlapMatrix, MetricsError> {
    let n = models.len();
    if n < 2 {
        return Err(MetricsError::TooFewModels(2));
    }
    let mut values = vec![vec![1.0; n]; n];
    let mut off = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let v = overlap_coefficient(&models[i], &models[j], bags)?;
            values[i][j] = v;
            values[j][i] = v;
            off.push(v);
        }
    }
    let (mean, std) = mean_std(&off);
    Ok(OverlapMatrix {
        values,
        mean,
        std,
        pairs: off.len(),
    })
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KruskalWallis {
    pub h: f64,
    pub p_value: f64,
    pub dof: usize,
}

/// Mid-ranks (1-based) of `values`, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// H statistic with tie correction; p from the chi-squared survival
/// function with k-1 degrees of freedom. All-equal observations give
/// H = 0 and p = 1.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis, MetricsError> {
    if groups.len() < 2 {
        return Err(MetricsError::DegenerateInput(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(MetricsError::DegenerateInput("empty group".into()));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    if pooled.iter().any(|v| v.is_nan()) {
        return Err(MetricsError::DegenerateInput("NaN observation".into()));
    }
    let dof = groups.len() - 1;
    let n = pooled.len() as f64;
    let ranks = average_ranks(&pooled);

    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let raw = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        let t = j as f64;
        ties += t * t * t - t;
        i += j;
    }
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(KruskalWallis {
            h: 0.0,
            p_value: 1.0,
            dof,
        });
    }
    let mut h = raw / correction;
    if h.abs() < 1e-12 {
        h = 0.0;
    }
    let h = h.max(0.0);
    if h == 0.0 {
        return Ok(KruskalWallis {
            h,
            p_value: 1.0,
            dof,
        });
    }
    let p_value = checked_gamma_ur(dof as f64 / 2.0, h / 2.0)
        .map_err(|e| MetricsError::DegenerateInput(e.to_string()))?
        .clamp(0.0, 1.0);
    Ok(KruskalWallis { h, p_value, dof })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimeStats {
    pub count: usize,
    pub mean: Duration,
    /// Sample standard deviation.
    pub std: Duration,
    /// Share of durations within the limit.
    pub completion_ratio: f64,
}

pub fn time_stats(durations: &[Duration], limit: Duration) -> TimeStats {
    let secs: Vec<f64> = durations.iter().map(Duration::as_secs_f64).collect();
    let (mean, std) = mean_std(&secs);
    let within = durations.iter().filter(|d| **d <= limit).count();
    TimeStats {
        count: durations.len(),
        mean: Duration::from_secs_f64(mean),
        std: Duration::from_secs_f64(std),
        completion_ratio: if durations.is_empty() {
            0.0
        } else {
            within as f64 / durations.len() as f64
        },
    }
}

/// Time from the first `task-start` row to the last `task-end` row.
pub fn task_duration(records: &[LogRecord]) -> Result<Duration, MetricsError> {
    let start = records
        .iter()
        .find(|r| r.operation == "task-start")
        .ok_or(MetricsError::MissingMarkers("task-start"))?;
    let end = records
        .iter()
        .rev()
        .find(|r| r.operation == "task-end")
        .ok_or(MetricsError::MissingMarkers("task-end"))?;
    (end.timestamp - start.timestamp)
        .to_std()
        .map_err(|_| MetricsError::InconsistentLog("task-end precedes task-start".into()))
}

/// `m:ss`, rounded to the nearest second, minutes zero-padded to two
/// digits.
pub fn format_min_sec(d: Duration) -> String {
    let total = d.as_secs_f64().round() as u64;
    format!("{:02}:{:02}", total / 60, total % 60)
}

/// Parses `m:ss` or plain seconds.
pub fn parse_min_sec(text: &str) -> Option<Duration> {
    match text.split_once(':') {
        Some((m, s)) => {
            let m: u64 = m.trim().parse().ok()?;
            let s: u64 = s.trim().parse().ok()?;
            (s < 60).then(|| Duration::from_secs(m * 60 + s))
        }
        None => text.trim().parse().ok().map(Duration::from_secs),
    }
}

/// Left-aligned first column, right-aligned others, with a rule under
/// the header.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, cell) in r.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<w$}", w = widths[i])
                } else {
                    format!("{c:>w$}", w = widths[i])
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> ElementSet {
        ElementSet::from_names(names.iter().copied())
    }

    #[test]
    fn overlap_examples() {
        assert!((overlap_coefficient(&set(&["a", "b", "c"]), &set(&["b", "c", "d"]), None).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(overlap_coefficient(&set(&["a"]), &set(&["a"]), None).unwrap(), 1.0);
        assert_eq!(overlap_coefficient(&set(&["a"]), &set(&["b"]), None).unwrap(), 0.0);
        assert_eq!(overlap_coefficient(&set(&[]), &set(&["b"]), None), Err(MetricsError::EmptySet));
        let bags = SynonymBags::parse("supplier, seller\n").unwrap();
        let v = overlap_coefficient(&set(&["supplier", "x"]), &set(&["seller", "y"]), Some(&bags)).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn bags_map_both_halves() {
        let bags = SynonymBags::parse("Client, Customer\nname, fullName").unwrap();
        assert_eq!(bags.bag_of("Client.fullName"), bags.bag_of("customer.name"));
        assert!(SynonymBags::parse("a, b\nb, c").is_err());
    }

    #[test]
    fn matrix_mean_over_pairs() {
        let models: Vec<ElementSet> = (0..10).map(|_| set(&["a", "b"])).collect();
        let m = overlap_matrix(&models, None).unwrap();
        assert_eq!((m.pairs, m.mean), (45, 1.0));
        let disjoint = [set(&["a"]), set(&["b"]), set(&["c"])];
        assert_eq!(overlap_matrix(&disjoint, None).unwrap().mean, 0.0);
    }

    #[test]
    fn kruskal_wallis_reference() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((r.h - 27.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.dof, 1);
        assert!((r.p_value - 0.049534613435626915).abs() < 1e-12);
        let eq = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!((eq.h, eq.p_value), (0.0, 1.0));
        let same = kruskal_wallis(&[vec![5.0, 5.0], vec![5.0]]).unwrap();
        assert_eq!((same.h, same.p_value), (0.0, 1.0));
        assert!(matches!(kruskal_wallis(&[vec![1.0]]), Err(MetricsError::DegenerateInput(_))));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), [1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn time_examples() {
        let d: Vec<Duration> = [600, 620, 646].iter().map(|s| Duration::from_secs(*s)).collect();
        let t = time_stats(&d, Duration::from_secs(600));
        assert_eq!(format_min_sec(t.mean), "10:22");
        assert!((t.completion_ratio - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(time_stats(&d[..1], Duration::from_secs(600)).completion_ratio, 1.0);
        assert_eq!(parse_min_sec("10:00"), Some(Duration::from_secs(600)));
        assert_eq!(parse_min_sec("1:75"), None);
    }

    #[test]
    fn empty_rates_are_flagged() {
        let r = acceptance_rate(&[]);
        assert!(r.empty_denominator);
        assert_eq!(r.value, 0.0);
        let c = contribution_rate(&DomainModel::new("P"), &[]).unwrap();
        assert!(c.empty_denominator);
    }

    #[test]
    fn table_alignment() {
        let t = render_table(&["Mode", "Rate"], &[vec!["Automatic".into(), "0.33".into()]]);
        assert_eq!(t, "Mode       Rate\n---------------\nAutomatic  0.33\n");
    }
}
