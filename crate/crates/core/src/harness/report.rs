//! Experiment reports and their text, CSV and JSON renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use crate::criteria::argmin_with_tiebreak;
use crate::error::{Error, Result};
use crate::models::TheoryRlct;
use crate::numeric::{mean, sample_std};

/// Value keys on which a lower number selects a candidate.
pub const SELECTION_KEYS: [&str; 5] = ["wbic", "waic", "bic", "aic", "evidence"];

const CSV_HEADER: &str = "repeat,candidate,label,dim,estimator,value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateInfo {
    pub label: String,
    pub dim: usize,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub theory: Option<TheoryRlct>,
}

/// Values for one (repeat, candidate) pair. `None` marks a failed estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub repeat: usize,
    pub candidate: usize,
    pub values: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub candidate: usize,
    pub estimator: String,
    pub count: usize,
    pub missing: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation over repeats.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCount {
    pub estimator: String,
    /// Times each candidate had the smallest value.
    pub counts: Vec<usize>,
    /// Repeats where some candidate's value was missing.
    pub undecided: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub repeat: usize,
    pub candidate: usize,
    pub estimator: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub crate_version: String,
    pub truth_seeds: Vec<u64>,
    pub dataset_seeds: Vec<u64>,
    pub data_fingerprints: Vec<String>,
    /// `cell_seeds[repeat][candidate]`.
    pub cell_seeds: Vec<Vec<u64>>,
}

/// Wall-clock seconds per estimator for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub repeat: usize,
    pub candidate: usize,
    pub seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    #[serde(default)]
    pub plan: Option<ExperimentPlan>,
    pub candidates: Vec<CandidateInfo>,
    pub repeats: usize,
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
    pub selection: Vec<SelectionCount>,
    #[serde(default)]
    pub failures: Vec<Failure>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
    #[serde(default)]
    pub timings: Vec<CellTiming>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Config(format!("unknown format {s:?}"))),
        }
    }
}

fn keys_in_order(cells: &[Cell]) -> Vec<String> {
    let mut keys: Vec<String> = Vec::new();
    for c in cells {
        for k in c.values.keys() {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
    }
    keys.sort();
    keys
}

fn value(cells: &[Cell], repeat: usize, candidate: usize, key: &str) -> Option<f64> {
    cells
        .iter()
        .find(|c| c.repeat == repeat && c.candidate == candidate)
        .and_then(|c| c.values.get(key).copied().flatten())
}

impl ExperimentReport {
    /// Builds a report and derives aggregates and selection counts from `cells`.
    pub fn assemble(
        plan: Option<ExperimentPlan>,
        candidates: Vec<CandidateInfo>,
        repeats: usize,
        cells: Vec<Cell>,
    ) -> Self {
        let mut report = ExperimentReport {
            plan,
            candidates,
            repeats,
            cells,
            aggregates: Vec::new(),
            selection: Vec::new(),
            failures: Vec::new(),
            provenance: None,
            timings: Vec::new(),
        };
        report.aggregates = report.compute_aggregates();
        report.selection = report.compute_selection();
        report
    }

    fn compute_aggregates(&self) -> Vec<Aggregate> {
        let keys = keys_in_order(&self.cells);
        let mut out = Vec::new();
        for candidate in 0..self.candidates.len() {
            for key in &keys {
                let mut missing = 0;
                let mut vals = Vec::new();
                for c in self.cells.iter().filter(|c| c.candidate == candidate) {
                    match c.values.get(key) {
                        Some(Some(v)) => vals.push(*v),
                        Some(None) => missing += 1,
                        None => {}
                    }
                }
                if vals.is_empty() && missing == 0 {
                    continue;
                }
                out.push(Aggregate {
                    candidate,
                    estimator: key.clone(),
                    count: vals.len(),
                    missing,
                    mean: (!vals.is_empty()).then(|| mean(&vals)),
                    std: (vals.len() >= 2).then(|| sample_std(&vals)),
                });
            }
        }
        out
    }

    fn compute_selection(&self) -> Vec<SelectionCount> {
        let keys = keys_in_order(&self.cells);
        let k = self.candidates.len();
        let mut out = Vec::new();
        if k < 2 {
            return out;
        }
        for key in SELECTION_KEYS.iter().filter(|s| keys.iter().any(|k| k == *s)) {
            let mut counts = vec![0; k];
            let mut undecided = 0;
            for r in 0..self.repeats {
                let vals: Option<Vec<(f64, usize)>> = (0..k)
                    .map(|c| value(&self.cells, r, c, key).map(|v| (v, self.candidates[c].dim)))
                    .collect();
                match vals.as_deref().and_then(argmin_with_tiebreak) {
                    Some(i) => counts[i] += 1,
                    None => undecided += 1,
                }
            }
            out.push(SelectionCount { estimator: key.to_string(), counts, undecided });
        }
        out
    }

    pub fn aggregate(&self, candidate: usize, estimator: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.candidate == candidate && a.estimator == estimator)
    }

    pub fn selection_counts(&self, estimator: &str) -> Option<&SelectionCount> {
        self.selection.iter().find(|s| s.estimator == estimator)
    }

    /// Values of `estimator` for `candidate`, one per repeat (`None` if missing).
    pub fn column(&self, candidate: usize, estimator: &str) -> Vec<Option<f64>> {
        (0..self.repeats)
            .map(|r| value(&self.cells, r, candidate, estimator))
            .collect()
    }

    pub fn render(&self, format: ReportFormat) -> Result<Vec<u8>> {
        Ok(match format {
            ReportFormat::Text => self.to_text().into_bytes(),
            ReportFormat::Csv => self.to_csv().into_bytes(),
            ReportFormat::Json => self.to_json()?.into_bytes(),
        })
    }

    /// Tidy rows `repeat,candidate,label,dim,estimator,value`; missing values are `NA`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let header: Vec<&str> = CSV_HEADER.split(',').collect();
        w.write_record(&header).expect("in-memory write");
        for c in &self.cells {
            let info = &self.candidates[c.candidate];
            for (k, v) in &c.values {
                let v = v.map_or_else(|| "NA".to_string(), |x| x.to_string());
                w.write_record([
                    c.repeat.to_string(),
                    c.candidate.to_string(),
                    info.label.clone(),
                    info.dim.to_string(),
                    k.clone(),
                    v,
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// Rebuilds a report from [`ExperimentReport::to_csv`] output. Plan,
    /// provenance and timings are not part of the CSV.
    pub fn from_csv(input: &[u8]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != CSV_HEADER {
            return Err(Error::Config(format!("report CSV header must be {CSV_HEADER}")));
        }
        let mut candidates: Vec<Option<CandidateInfo>> = Vec::new();
        let mut cells: Vec<Cell> = Vec::new();
        let mut repeats = 0;
        for (line, row) in rdr.records().enumerate() {
            let row = row?;
            let bad = |what: &str| Error::Config(format!("report CSV row {line}: bad {what}"));
            let repeat: usize = row[0].parse().map_err(|_| bad("repeat"))?;
            let candidate: usize = row[1].parse().map_err(|_| bad("candidate"))?;
            let dim: usize = row[3].parse().map_err(|_| bad("dim"))?;
            let v = match &row[5] {
                "NA" => None,
                s => Some(s.parse::<f64>().map_err(|_| bad("value"))?),
            };
            if candidates.len() <= candidate {
                candidates.resize(candidate + 1, None);
            }
            let info = CandidateInfo { label: row[2].to_string(), dim, model: None, theory: None };
            match &candidates[candidate] {
                Some(existing) if existing.label != info.label || existing.dim != dim => {
                    return Err(bad("candidate label"));
                }
                Some(_) => {}
                None => candidates[candidate] = Some(info),
            }
            repeats = repeats.max(repeat + 1);
            match cells.last_mut() {
                Some(c) if c.repeat == repeat && c.candidate == candidate => {
                    c.values.insert(row[4].to_string(), v);
                }
                _ => cells.push(Cell { repeat, candidate, values: BTreeMap::from([(row[4].to_string(), v)]) }),
            }
        }
        let candidates = candidates
            .into_iter()
            .map(|c| c.ok_or_else(|| Error::Config("report CSV skips a candidate index".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(None, candidates, repeats, cells))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses JSON and checks the stored aggregates and selection counts
    /// against a recomputation from the raw cells.
    pub fn from_json(input: &[u8]) -> Result<Self> {
        let report: ExperimentReport = serde_json::from_slice(input)?;
        if report.cells.iter().any(|c| c.candidate >= report.candidates.len() || c.repeat >= report.repeats) {
            return Err(Error::Contract("cell index out of range".into()));
        }
        let fresh = report.compute_aggregates();
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs())),
            _ => false,
        };
        let consistent = fresh.len() == report.aggregates.len()
            && fresh.iter().zip(&report.aggregates).all(|(f, s)| {
                f.candidate == s.candidate
                    && f.estimator == s.estimator
                    && f.count == s.count
                    && f.missing == s.missing
                    && close(f.mean, s.mean)
                    && close(f.std, s.std)
            });
        if !consistent || report.compute_selection() != report.selection {
            return Err(Error::Contract("stored aggregates disagree with raw values".into()));
        }
        Ok(report)
    }

    /// Rows `<estimator> Ave.` / `<estimator> Std.` against candidate columns.
    pub fn to_text(&self) -> String {
        let width = self
            .candidates
            .iter()
            .map(|c| c.label.chars().count())
            .max()
            .unwrap_or(0)
            .max(10)
            + 2;
        let keys = keys_in_order(&self.cells);
        let name_width = keys.iter().map(|k| display_name(k).chars().count()).max().unwrap_or(0).max(10) + 12;
        let mut out = String::new();
        let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())));
        let lpad = |s: &str, w: usize| format!("{}{s}", " ".repeat(w.saturating_sub(s.chars().count())));
        out.push_str(&pad("estimator", name_width));
        for c in &self.candidates {
            out.push_str(&lpad(&c.label, width));
        }
        out.push('\n');
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.2}"));
        for key in &keys {
            for (suffix, pick) in [("Ave.", 0), ("Std.", 1)] {
                let _ = write!(out, "{}", pad(&format!("{} {suffix}", display_name(key)), name_width));
                for i in 0..self.candidates.len() {
                    let a = self.aggregate(i, key);
                    let v = a.and_then(|a| if pick == 0 { a.mean } else { a.std });
                    out.push_str(&lpad(&fmt(v), width));
                }
                out.push('\n');
            }
        }
        for s in &self.selection {
            let _ = write!(out, "{}", pad(&format!("{} chosen", display_name(&s.estimator)), name_width));
            for n in &s.counts {
                out.push_str(&lpad(&n.to_string(), width));
            }
            out.push('\n');
        }
        if self.candidates.iter().any(|c| c.theory.is_some()) {
            for (name, pick) in [("Theory λ", 0), ("Theory m", 1)] {
                out.push_str(&pad(name, name_width));
                for c in &self.candidates {
                    let s = c.theory.map_or_else(
                        || "NA".to_string(),
                        |t| if pick == 0 { format!("{:.2}", t.lambda) } else { t.multiplicity.to_string() },
                    );
                    out.push_str(&lpad(&s, width));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn display_name(key: &str) -> String {
    match key {
        "wbic" => "WBIC".into(),
        "wbic_mcse" => "WBIC mcse".into(),
        "wbic1" => "WBIC₁".into(),
        "wbic2" => "WBIC₂".into(),
        "wbic2_min" => "WBIC₂ (min)".into(),
        "waic" => "WAIC".into(),
        "waic_t" => "WAIC T_n".into(),
        "waic_v" => "WAIC V_n".into(),
        "bic" => "BIC".into(),
        "aic" => "AIC".into(),
        "lambda" => "λ̂".into(),
        "lambda_se" => "λ̂ se".into(),
        "lambda_ess" => "λ̂ ESS".into(),
        "evidence" => "F".into(),
        "evidence_mcse" => "F mcse".into(),
        other => other.to_string(),
    }
}

/// Free-function form of [`ExperimentReport::render`].
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<Vec<u8>> {
    report.render(format)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info(label: &str, dim: usize) -> CandidateInfo {
        CandidateInfo { label: label.into(), dim, model: None, theory: None }
    }

    fn table2_report() -> ExperimentReport {
        // Published WBIC₂ averages for H = 1..6, two synthetic repeats each.
        let ave = [1111.0, 295.0, 0.0, 6.8, 12.2, 16.6];
        let mut cells = Vec::new();
        for r in 0..2 {
            for (c, a) in ave.iter().enumerate() {
                let jitter = if r == 0 { 0.5 } else { -0.5 };
                let wbic2 = if c == 2 { 0.0 } else { a + jitter };
                cells.push(Cell {
                    repeat: r,
                    candidate: c,
                    values: BTreeMap::from([("wbic".into(), Some(70.0 + wbic2)), ("wbic2".into(), Some(wbic2))]),
                });
            }
        }
        let cands = (1..=6).map(|h| info(&format!("H={h}"), 12 * h)).collect();
        ExperimentReport::assemble(None, cands, 2, cells)
    }

    #[test]
    fn text_has_table_rows() {
        let text = table2_report().to_text();
        assert!(text.contains("WBIC₂ Ave."));
        assert!(text.contains("WBIC₂ Std."));
        assert!(text.contains("WBIC chosen"));
        assert!(text.lines().next().unwrap().contains("H=6"));
        let row = text.lines().find(|l| l.starts_with("WBIC₂ Ave.")).unwrap();
        assert!(row.contains("6.80") && row.contains("16.60"));
    }

    #[test]
    fn selection_and_aggregates() {
        let r = table2_report();
        assert_eq!(r.selection_counts("wbic").unwrap().counts, vec![0, 0, 2, 0, 0, 0]);
        let a = r.aggregate(3, "wbic2").unwrap();
        assert!((a.mean.unwrap() - 6.8).abs() < 1e-12);
        assert!((a.std.unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = ExperimentReport::assemble(None, Vec::new(), 0, Vec::new());
        assert_eq!(r.to_csv(), format!("{CSV_HEADER}\n"));
        assert_eq!(r.to_text().lines().count(), 1);
        let back = ExperimentReport::from_csv(r.to_csv().as_bytes()).unwrap();
        assert_eq!(back.to_csv(), r.to_csv());
    }

    #[test]
    fn csv_json_csv_identical() {
        let mut r = table2_report();
        r.cells[4].values.insert("lambda".into(), None);
        r.cells[5].values.insert("lambda".into(), Some(0.1 + 0.2));
        let r = ExperimentReport::assemble(None, r.candidates, r.repeats, r.cells);
        let csv1 = r.to_csv();
        assert!(csv1.contains(",NA\n"));
        let from_csv = ExperimentReport::from_csv(csv1.as_bytes()).unwrap();
        let json = from_csv.to_json().unwrap();
        let back = ExperimentReport::from_json(json.as_bytes()).unwrap();
        assert_eq!(back.to_csv(), csv1);
        assert_eq!(back, from_csv);
    }

    #[test]
    fn tampered_aggregate_rejected() {
        let mut r = table2_report();
        r.aggregates[0].mean = r.aggregates[0].mean.map(|m| m + 1e-6);
        let json = r.to_json().unwrap();
        assert!(matches!(ExperimentReport::from_json(json.as_bytes()), Err(Error::Contract(_))));
    }

    #[test]
    fn missing_value_makes_repeat_undecided() {
        let mut r = table2_report();
        r.cells[0].values.insert("wbic".into(), None);
        let r = ExperimentReport::assemble(None, r.candidates, r.repeats, r.cells);
        let s = r.selection_counts("wbic").unwrap();
        assert_eq!((s.counts[2], s.undecided), (1, 1));
        assert_eq!(r.aggregate(0, "wbic").unwrap().missing, 1);
        assert!(r.to_text().contains("WBIC chosen"));
    }
}
