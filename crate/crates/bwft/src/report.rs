//! CSV emission and the model-by-strategy summary table.
//!
//! Run records serialize to line-oriented CSV with a fixed column order:
//! `strategy,unit,search_acc,final_acc,seed,epochs,wall_ms`. The summary
//! table has one row per model, one column per strategy, and footer rows
//! with the per-strategy variance and mean across models. Sample variance
//! (n − 1) is the default because it is the convention that reproduces the
//! reference results; population variance is available behind a flag.

use std::collections::BTreeMap;

use crate::engine::RunResult;
use crate::error::{Error, Result};

pub const RUNS_HEADER: &str = "strategy,unit,search_acc,final_acc,seed,epochs,wall_ms";

fn fmt_acc(v: Option<f32>) -> String {
    v.map(|a| format!("{a:.6}")).unwrap_or_default()
}

/// One CSV line per run, candidates in sweep order.
pub fn runs_to_csv(runs: &[&RunResult]) -> String {
    let mut out = String::from(RUNS_HEADER);
    out.push('\n');
    for run in runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            run.strategy,
            run.unit_names.join(";"),
            fmt_acc(run.search_accuracy),
            fmt_acc(run.final_accuracy),
            run.seed,
            run.epochs_run,
            run.wall_ms
        ));
    }
    out
}

/// A parsed row of a runs CSV; only the fields the summary needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub strategy: String,
    pub unit: String,
    pub search_acc: Option<f64>,
    pub final_acc: Option<f64>,
    pub seed: u64,
}

pub fn parse_runs_csv(text: &str) -> Result<Vec<RunRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RUNS_HEADER => {}
        other => {
            return Err(Error::config(format!(
                "bad runs CSV header: {other:?}, expected {RUNS_HEADER:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::config(format!(
                "runs CSV line {}: expected 7 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|e| Error::config(format!("runs CSV line {}: {e}", lineno + 2)))
            }
        };
        rows.push(RunRow {
            strategy: fields[0].to_string(),
            unit: fields[1].to_string(),
            search_acc: parse_opt(fields[2])?,
            final_acc: parse_opt(fields[3])?,
            seed: fields[4]
                .parse()
                .map_err(|e| Error::config(format!("runs CSV line {}: {e}", lineno + 2)))?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceConvention {
    /// Divide by n − 1 (the default; matches the reference table).
    Sample,
    /// Divide by n.
    Population,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Variance under the chosen convention; a single value has variance 0.
pub fn variance(values: &[f64], convention: VarianceConvention) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    match convention {
        VarianceConvention::Sample => ss / (n - 1) as f64,
        VarianceConvention::Population => ss / n as f64,
    }
}

/// Model-by-strategy accuracy table with variance/mean footer rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub models: Vec<String>,
    pub strategies: Vec<String>,
    /// `cells[row][col]`; `None` for missing combinations.
    pub cells: Vec<Vec<Option<f64>>>,
    pub convention: VarianceConvention,
}

impl SummaryTable {
    pub fn new(models: Vec<String>, strategies: Vec<String>, convention: VarianceConvention) -> SummaryTable {
        let cells = vec![vec![None; strategies.len()]; models.len()];
        SummaryTable { models, strategies, cells, convention }
    }

    pub fn set(&mut self, model: &str, strategy: &str, accuracy: f64) {
        let row = self.models.iter().position(|m| m == model).expect("known model");
        let col = self.strategies.iter().position(|s| s == strategy).expect("known strategy");
        self.cells[row][col] = Some(accuracy);
    }

    fn column(&self, col: usize) -> Vec<f64> {
        self.cells.iter().filter_map(|row| row[col]).collect()
    }

    pub fn column_mean(&self, strategy: &str) -> Option<f64> {
        let col = self.strategies.iter().position(|s| s == strategy)?;
        let values = self.column(col);
        if values.is_empty() {
            None
        } else {
            Some(mean(&values))
        }
    }

    pub fn column_variance(&self, strategy: &str) -> Option<f64> {
        let col = self.strategies.iter().position(|s| s == strategy)?;
        let values = self.column(col);
        if values.is_empty() {
            None
        } else {
            Some(variance(&values, self.convention))
        }
    }

    /// The strategy with the highest mean, with its variance and whether it
    /// also attains the lowest variance.
    pub fn best_strategy(&self) -> Option<(String, f64, f64, bool)> {
        let mut best: Option<(usize, f64)> = None;
        for (col, _) in self.strategies.iter().enumerate() {
            let values = self.column(col);
            if values.is_empty() {
                continue;
            }
            let m = mean(&values);
            if best.map_or(true, |(_, bm)| m > bm) {
                best = Some((col, m));
            }
        }
        let (col, m) = best?;
        let v = variance(&self.column(col), self.convention);
        let min_var = self
            .strategies
            .iter()
            .enumerate()
            .filter(|(c, _)| !self.column(*c).is_empty())
            .map(|(c, _)| variance(&self.column(c), self.convention))
            .fold(f64::INFINITY, f64::min);
        Some((self.strategies[col].clone(), m, v, v <= min_var))
    }

    /// Deterministic CSV: header, one row per model, then the variance and
    /// mean footer rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for s in &self.strategies {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for (model, row) in self.models.iter().zip(&self.cells) {
            out.push_str(model);
            for cell in row {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        for (label, f) in [
            ("variance", Self::column_variance as fn(&Self, &str) -> Option<f64>),
            ("mean", Self::column_mean as fn(&Self, &str) -> Option<f64>),
        ] {
            out.push_str(label);
            for s in &self.strategies {
                out.push(',');
                if let Some(v) = f(self, s) {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<SummaryTable> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::config("empty summary CSV"))?;
        let mut cols = header.split(',');
        if cols.next() != Some("model") {
            return Err(Error::config("summary CSV must start with a model column"));
        }
        let strategies: Vec<String> = cols.map(str::to_string).collect();
        let mut table = SummaryTable::new(Vec::new(), strategies, VarianceConvention::Sample);
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != table.strategies.len() + 1 {
                return Err(Error::config("summary CSV row width mismatch"));
            }
            if fields[0] == "variance" || fields[0] == "mean" {
                continue; // footers are derived, not stored
            }
            table.models.push(fields[0].to_string());
            let row: Result<Vec<Option<f64>>> = fields[1..]
                .iter()
                .map(|f| {
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse::<f64>().map(Some).map_err(|e| Error::config(e.to_string()))
                    }
                })
                .collect();
            table.cells.push(row?);
        }
        Ok(table)
    }
}

/// Tidy per-unit curve CSV: one row per (repeat, unit ordinal), plus a mean
/// row per ordinal when there are multiple repeats.
pub fn curve_to_csv(per_repeat: &[Vec<(usize, String, f32)>]) -> String {
    let mut out = String::from("ordinal,unit,repeat,accuracy\n");
    for (repeat, rows) in per_repeat.iter().enumerate() {
        for (ordinal, unit, acc) in rows {
            out.push_str(&format!("{ordinal},{unit},{repeat},{acc:.6}\n"));
        }
    }
    if per_repeat.len() > 1 {
        let mut sums: BTreeMap<usize, (String, f64, usize)> = BTreeMap::new();
        for rows in per_repeat {
            for (ordinal, unit, acc) in rows {
                let entry = sums.entry(*ordinal).or_insert_with(|| (unit.clone(), 0.0, 0));
                entry.1 += *acc as f64;
                entry.2 += 1;
            }
        }
        for (ordinal, (unit, sum, count)) in sums {
            out.push_str(&format!("{ordinal},{unit},mean,{:.6}\n", sum / count as f64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_population_variance_example() {
        let vals = [0.8, 0.9];
        assert!((mean(&vals) - 0.85).abs() < 1e-12);
        assert!((variance(&vals, VarianceConvention::Population) - 0.0025).abs() < 1e-12);
        assert!((variance(&vals, VarianceConvention::Sample) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn single_value_has_zero_variance() {
        assert_eq!(variance(&[0.7], VarianceConvention::Sample), 0.0);
        assert_eq!(variance(&[0.7], VarianceConvention::Population), 0.0);
    }

    #[test]
    fn summary_csv_shape_and_footers() {
        let mut t = SummaryTable::new(
            vec!["mini-vgg".into()],
            vec!["baseline1".into(), "bw".into()],
            VarianceConvention::Sample,
        );
        t.set("mini-vgg", "baseline1", 0.5);
        t.set("mini-vgg", "bw", 0.75);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "model,baseline1,bw");
        assert_eq!(lines[1], "mini-vgg,0.500000,0.750000");
        assert_eq!(lines[2], "variance,0.000000,0.000000");
        assert_eq!(lines[3], "mean,0.500000,0.750000");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn summary_round_trips_through_csv() {
        let mut t = SummaryTable::new(
            vec!["a".into(), "b".into()],
            vec!["s1".into(), "s2".into()],
            VarianceConvention::Sample,
        );
        t.set("a", "s1", 0.25);
        t.set("a", "s2", 0.5);
        t.set("b", "s1", 0.75);
        let parsed = SummaryTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(parsed.models, t.models);
        assert_eq!(parsed.strategies, t.strategies);
        assert_eq!(parsed.cells[0][0], Some(0.25));
        assert_eq!(parsed.cells[1][1], None);
    }

    #[test]
    fn best_strategy_reads_highest_mean() {
        let mut t = SummaryTable::new(
            vec!["a".into(), "b".into()],
            vec!["s1".into(), "s2".into()],
            VarianceConvention::Sample,
        );
        t.set("a", "s1", 0.9);
        t.set("b", "s1", 0.1);
        t.set("a", "s2", 0.6);
        t.set("b", "s2", 0.6);
        let (name, m, v, lowest_var) = t.best_strategy().unwrap();
        assert_eq!(name, "s2");
        assert!((m - 0.6).abs() < 1e-12);
        assert_eq!(v, 0.0);
        assert!(lowest_var);
    }

    #[test]
    fn runs_csv_round_trip() {
        use crate::engine::RunResult;
        let run = RunResult {
            strategy: "bw".into(),
            unit: vec![0, 1],
            unit_names: vec!["conv1".into(), "bn1".into()],
            search_accuracy: Some(0.53),
            final_accuracy: None,
            epochs_run: 15,
            lr_trace: vec![5e-5],
            seed: 7,
            wall_ms: 12,
            failed: false,
        };
        let final_run = RunResult {
            strategy: "bw".into(),
            unit: vec![0, 1],
            unit_names: vec!["conv1".into(), "bn1".into()],
            search_accuracy: Some(0.53),
            final_accuracy: Some(0.81),
            epochs_run: 15,
            lr_trace: vec![5e-5],
            seed: 9,
            wall_ms: 30,
            failed: false,
        };
        let csv = runs_to_csv(&[&run, &final_run]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RUNS_HEADER);
        assert_eq!(lines[1], "bw,conv1;bn1,0.530000,,7,15,12");
        let rows = parse_runs_csv(&csv).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].final_acc, None);
        assert!((rows[1].final_acc.unwrap() - 0.81).abs() < 1e-9);
        assert_eq!(rows[1].unit, "conv1;bn1");
    }

    #[test]
    fn parse_rejects_bad_header() {
        assert!(parse_runs_csv("nope\n").is_err());
    }

    #[test]
    fn curve_csv_includes_mean_rows_for_repeats() {
        let rep0 = vec![(0usize, "conv1".to_string(), 0.4f32), (1, "conv2".to_string(), 0.6)];
        let rep1 = vec![(0usize, "conv1".to_string(), 0.6f32), (1, "conv2".to_string(), 0.8)];
        let csv = curve_to_csv(&[rep0, rep1]);
        assert!(csv.contains("0,conv1,0,0.400000"));
        assert!(csv.contains("0,conv1,mean,0.500000"));
        assert!(csv.contains("1,conv2,mean,0.700000"));

        let single = curve_to_csv(&[vec![(0, "conv1".to_string(), 0.4)]]);
        assert!(!single.contains("mean"));
    }
}
