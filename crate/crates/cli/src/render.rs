//! CSV → SVG for the files written by `run` and `sweep`.

use std::path::{Path, PathBuf};

use alpi::analysis::{bar_chart, line_chart, Bar, Series};

use crate::error::{CliError, CliResult};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next()?.split(',').map(str::to_string).collect();
        let rows = lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        Some(Self { header, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn numbers(&self, name: &str, path: &Path) -> CliResult<Vec<f64>> {
        let idx = self
            .column(name)
            .ok_or_else(|| CliError::Config(format!("{}: no column `{name}`", path.display())))?;
        self.rows
            .iter()
            .map(|r| {
                r.get(idx)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| {
                        CliError::Config(format!("{}: non-numeric `{name}` entry", path.display()))
                    })
            })
            .collect()
    }

    fn strings(&self, idx: usize) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.get(idx).cloned().unwrap_or_default())
            .collect()
    }
}

pub struct RenderRequest {
    pub inputs: Vec<PathBuf>,
    pub x: String,
    pub y: String,
    pub title: Option<String>,
    pub linear: bool,
}

/// Chooses the chart from the first input's header.
pub fn render(req: &RenderRequest) -> CliResult<String> {
    let mut tables = Vec::with_capacity(req.inputs.len());
    for path in &req.inputs {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let table = Table::parse(&text)
            .ok_or_else(|| CliError::Config(format!("{}: empty CSV", path.display())))?;
        tables.push((path.as_path(), table));
    }
    let (first_path, first) = tables
        .first()
        .ok_or_else(|| CliError::Config("render needs at least one input".into()))?;
    let log_y = !req.linear;
    let title = |default: &str| req.title.clone().unwrap_or_else(|| default.to_string());

    if first.column("lower").is_some() && first.column("fraction").is_some() {
        let lower = first.numbers("lower", first_path)?;
        let upper = first.numbers("upper", first_path)?;
        let fraction = first.numbers("fraction", first_path)?;
        let bars = lower
            .iter()
            .zip(&upper)
            .zip(&fraction)
            .map(|((lo, hi), f)| Bar {
                label: format!("[{lo},{hi})"),
                value: *f,
                error: None,
            })
            .collect::<Vec<_>>();
        return Ok(bar_chart(
            &bars,
            &title("effective lookahead"),
            "fraction of states",
            false,
        ));
    }
    if let (Some(label), Some(_)) = (first.column("label"), first.column("total_queries_mean")) {
        let labels = first.strings(label);
        let mean = first.numbers("total_queries_mean", first_path)?;
        let std = first.numbers("total_queries_std", first_path)?;
        let bars = labels
            .into_iter()
            .zip(mean.iter().zip(&std))
            .map(|(label, (&value, &error))| Bar {
                label,
                value,
                error: Some(error),
            })
            .collect::<Vec<_>>();
        return Ok(bar_chart(
            &bars,
            &title("total simulator queries"),
            "queries",
            log_y,
        ));
    }
    if let (Some(label), Some(_)) = (first.column("label"), first.column("total_queries")) {
        let labels = first.strings(label);
        let totals = first.numbers("total_queries", first_path)?;
        let bars = labels
            .into_iter()
            .zip(totals)
            .map(|(label, value)| Bar {
                label,
                value,
                error: None,
            })
            .collect::<Vec<_>>();
        return Ok(bar_chart(
            &bars,
            &title("total simulator queries"),
            "queries",
            log_y,
        ));
    }

    let mut series = Vec::with_capacity(tables.len());
    for (path, table) in &tables {
        let xs = table.numbers(&req.x, path)?;
        let ys = table.numbers(&req.y, path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        series.push(Series {
            name,
            points: xs.into_iter().zip(ys).collect(),
        });
    }
    Ok(line_chart(&series, &title(&req.y), &req.x, &req.y, log_y))
}
