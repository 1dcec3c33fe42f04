//! Collapses per-run history files into per-method summary tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

const HISTORY_HEADER: [&str; 5] = ["iter", "best_feasible", "objective", "feasible", "wall_time"];
const SUMMARY_HEADER: &str = "iter,n,mean,median,q1,q3,min,max,wall_time";

/// One run reduced to per-iteration state: the incumbent after iteration
/// `i` (None until a feasible point exists) and the synthetic wall time
/// spent up to that iteration.
#[derive(Debug, Clone)]
pub struct RunSeries {
    pub best: Vec<Option<f64>>,
    pub wall: Vec<f64>,
}

/// Parses a history CSV into a [`RunSeries`].
///
/// A history has one row per evaluation; the whole initial design is
/// iteration 0 and each subsequent iteration adds one row. Rows collapse to
/// the last entry per iteration index, so `best[i]` is the state after
/// iteration `i` completed.
pub fn parse_history(path: &Path) -> anyhow::Result<RunSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader.headers().context("missing header row")?.clone();
    if headers.iter().ne(HISTORY_HEADER) {
        bail!(
            "{}: unexpected header '{}', expected '{}'",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(","),
            HISTORY_HEADER.join(",")
        );
    }

    let mut series = RunSeries { best: Vec::new(), wall: Vec::new() };
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{} row {}", path.display(), row_idx + 1))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let iter: usize = field(0)
            .parse()
            .with_context(|| format!("{} row {}: bad iter", path.display(), row_idx + 1))?;
        let best = if field(1).is_empty() {
            None
        } else {
            Some(field(1).parse::<f64>().with_context(|| {
                format!("{} row {}: bad best_feasible", path.display(), row_idx + 1)
            })?)
        };
        let wall: f64 = field(4)
            .parse()
            .with_context(|| format!("{} row {}: bad wall_time", path.display(), row_idx + 1))?;

        if iter == series.best.len() {
            series.best.push(best);
            series.wall.push(wall);
        } else if iter + 1 == series.best.len() {
            *series.best.last_mut().expect("nonempty") = best;
            *series.wall.last_mut().expect("nonempty") = wall;
        } else {
            bail!(
                "{} row {}: iteration index {} out of order",
                path.display(),
                row_idx + 1,
                iter
            );
        }
    }
    if series.best.is_empty() {
        bail!("{} contains no data rows", path.display());
    }
    Ok(series)
}

/// Median with inclusive halves: both halves keep the middle element of an
/// odd-length list, so {1,2,3,4,5} gives q1=2, median=3, q3=4.
fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[derive(Debug, Clone, Copy)]
struct IterStats {
    n: usize,
    mean: Option<f64>,
    median: Option<f64>,
    q1: Option<f64>,
    q3: Option<f64>,
    min: Option<f64>,
    max: Option<f64>,
    wall: f64,
}

fn stats_at(runs: &[RunSeries], iter: usize) -> IterStats {
    // Mean accumulates in run order (sorted file names), which pins the
    // floating-point result independent of worker scheduling.
    let mut values: Vec<f64> = runs.iter().filter_map(|r| r.best[iter]).collect();
    let n = values.len();
    let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite incumbents"));
    let (median, q1, q3, min, max) = if n > 0 {
        let half = values.len();
        (
            Some(median_of(&values)),
            Some(median_of(&values[..(half + 1) / 2])),
            Some(median_of(&values[half / 2..])),
            Some(values[0]),
            Some(values[half - 1]),
        )
    } else {
        (None, None, None, None, None)
    };
    let wall = runs.iter().map(|r| r.wall[iter]).sum::<f64>() / runs.len() as f64;
    IterStats { n, mean, median, q1, q3, min, max, wall }
}

/// Renders the summary table for one method's runs.
pub fn summary_csv(runs: &[RunSeries]) -> anyhow::Result<String> {
    if runs.is_empty() {
        bail!("no runs to summarize");
    }
    let shortest = runs.iter().map(|r| r.best.len()).min().expect("nonempty");
    if runs.iter().any(|r| r.best.len() != shortest) {
        log::warn!(
            "runs have different iteration counts; truncating to the shortest ({} iterations)",
            shortest - 1
        );
    }

    let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for iter in 0..shortest {
        let s = stats_at(runs, iter);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            iter,
            s.n,
            cell(s.mean),
            cell(s.median),
            cell(s.q1),
            cell(s.q3),
            cell(s.min),
            cell(s.max),
            s.wall
        ));
    }
    Ok(out)
}

/// Splits `history_{method}_{run}.csv` into its method label and run index.
fn parse_history_name(file_name: &str) -> Option<(String, usize)> {
    let stem = file_name.strip_prefix("history_")?.strip_suffix(".csv")?;
    let (method, run) = stem.rsplit_once('_')?;
    let run: usize = run.parse().ok()?;
    if method.is_empty() {
        return None;
    }
    Some((method.to_string(), run))
}

/// Summarizes every history file in `dir`, writing one
/// `summary_{method}.csv` per method found. Returns the written paths.
pub fn summarize_dir(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut by_method: BTreeMap<String, Vec<(usize, PathBuf)>> = BTreeMap::new();
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?;
    for entry in entries {
        let entry = entry?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some((method, run)) = parse_history_name(name) {
            by_method.entry(method).or_default().push((run, entry.path()));
        }
    }
    if by_method.is_empty() {
        bail!("no history files (history_*.csv) found in {}", dir.display());
    }

    let mut written = Vec::new();
    for (method, mut files) in by_method {
        files.sort();
        let runs = files
            .iter()
            .map(|(_, path)| parse_history(path))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let table = summary_csv(&runs)?;
        let path = dir.join(format!("summary_{method}.csv"));
        std::fs::write(&path, table).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
