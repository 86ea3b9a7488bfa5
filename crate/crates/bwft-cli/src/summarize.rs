//! The `summarize` subcommand: aggregate runs CSVs into the summary table.

use std::collections::BTreeSet;
use std::path::Path;

use bwft::error::{Error, Result};
use bwft::report::{parse_runs_csv, SummaryTable, VarianceConvention};

/// Canonical column order; anything else follows alphabetically.
const STRATEGY_ORDER: [&str; 8] = [
    "baseline1", "baseline2", "lw", "bw", "bwt3", "bwt5", "bwsw", "random3",
];

fn strategy_rank(name: &str) -> (usize, String) {
    match STRATEGY_ORDER.iter().position(|s| *s == name) {
        Some(i) => (i, String::new()),
        None => (STRATEGY_ORDER.len(), name.to_string()),
    }
}

/// Builds the summary table from every `runs_<model>_<strategy>.csv` in
/// `dir`. A cell is the mean of the file's final-accuracy rows.
pub fn summarize_dir(dir: &Path, convention: VarianceConvention) -> Result<SummaryTable> {
    let mut entries: Vec<(String, String, Vec<f64>)> = Vec::new();
    let mut listing: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    listing.sort();

    for path in listing {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(stem) = name.strip_prefix("runs_").and_then(|s| s.strip_suffix(".csv")) else {
            continue;
        };
        let (model, strategy) = stem.rsplit_once('_').ok_or_else(|| {
            Error::config(format!("runs file {name:?} is not named runs_<model>_<strategy>.csv"))
        })?;
        let rows = parse_runs_csv(&std::fs::read_to_string(&path)?)?;
        let finals: Vec<f64> = rows.iter().filter_map(|r| r.final_acc).collect();
        if finals.is_empty() {
            return Err(Error::config(format!("runs file {name:?} has no final rows")));
        }
        entries.push((model.to_string(), strategy.to_string(), finals));
    }
    if entries.is_empty() {
        return Err(Error::config(format!("no runs_*.csv files in {}", dir.display())));
    }

    let models: Vec<String> = entries
        .iter()
        .map(|(m, _, _)| m.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut strategies: Vec<String> = entries
        .iter()
        .map(|(_, s, _)| s.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    strategies.sort_by_key(|s| strategy_rank(s));

    let mut table = SummaryTable::new(models, strategies, convention);
    for (model, strategy, finals) in entries {
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        table.set(&model, &strategy, mean);
    }
    Ok(table)
}

pub fn cmd_summarize(dir: &Path, convention: VarianceConvention, out: Option<&Path>) -> Result<()> {
    let table = summarize_dir(dir, convention)?;
    let csv = table.to_csv();
    match out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some((name, mean, var, lowest)) = table.best_strategy() {
        eprintln!(
            "best strategy: {name} (mean {mean:.6}, variance {var:.6}{})",
            if lowest { ", lowest variance" } else { "" }
        );
    }
    Ok(())
}
