//! Per-cell metric records, deterministic aggregation, and report writers
//! (CSV per cell, JSON summary, optional SVG chart of metric vs rank).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KbmfError, Result};
use crate::io::atomic_write;

/// One evaluation cell: a metric value (or the error that prevented it) for a
/// (replication, fold, rank) configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub metric: String,
    pub replication: usize,
    pub fold: usize,
    pub rank: usize,
    pub value: Option<f64>,
    pub error: Option<String>,
}

impl CellRecord {
    pub fn ok(metric: impl Into<String>, replication: usize, fold: usize, rank: usize, value: f64) -> Self {
        Self {
            metric: metric.into(),
            replication,
            fold,
            rank,
            value: Some(value),
            error: None,
        }
    }

    pub fn failed(
        metric: impl Into<String>,
        replication: usize,
        fold: usize,
        rank: usize,
        error: impl Into<String>,
    ) -> Self {
        Self {
            metric: metric.into(),
            replication,
            fold,
            rank,
            value: None,
            error: Some(error.into()),
        }
    }
}

/// Aggregate over the cells of one (metric, rank) configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub metric: String,
    pub rank: usize,
    pub mean: f64,
    pub std: f64,
    pub cells: usize,
    pub failed_cells: usize,
}

/// A full evaluation report: the raw cells plus deterministic aggregation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<CellRecord>,
}

impl EvalReport {
    pub fn new(records: Vec<CellRecord>) -> Self {
        Self { records }
    }

    pub fn push(&mut self, record: CellRecord) {
        self.records.push(record);
    }

    /// Mean/std per (metric, rank), averaging scored cells in a fixed order
    /// (metric, rank, replication, fold) so aggregation is reproducible
    /// regardless of how the cells were produced.
    pub fn aggregate(&self) -> Vec<AggregateRecord> {
        let mut groups: BTreeMap<(String, usize), Vec<&CellRecord>> = BTreeMap::new();
        for record in &self.records {
            groups
                .entry((record.metric.clone(), record.rank))
                .or_default()
                .push(record);
        }
        let mut aggregates = Vec::with_capacity(groups.len());
        for ((metric, rank), mut cells) in groups {
            cells.sort_by_key(|c| (c.replication, c.fold));
            let values: Vec<f64> = cells.iter().filter_map(|c| c.value).collect();
            let failed = cells.len() - values.len();
            let mean = if values.is_empty() {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / values.len() as f64
            };
            let std = if values.len() > 1 {
                let var =
                    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64;
                var.sqrt()
            } else {
                0.0
            };
            aggregates.push(AggregateRecord {
                metric,
                rank,
                mean,
                std,
                cells: cells.len(),
                failed_cells: failed,
            });
        }
        aggregates
    }

    /// Mean over scored cells of one metric at one rank.
    pub fn mean_of(&self, metric: &str, rank: usize) -> Option<f64> {
        self.aggregate()
            .into_iter()
            .find(|a| a.metric == metric && a.rank == rank && a.cells > a.failed_cells)
            .map(|a| a.mean)
    }

    /// One row per cell. Error text is sanitized so the file stays one
    /// comma-separated record per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,replication,fold,rank,value,error\n");
        for r in &self.records {
            let value = r.value.map(|v| format!("{v}")).unwrap_or_default();
            let error = r
                .error
                .as_deref()
                .unwrap_or("")
                .replace(',', ";")
                .replace('\n', " ");
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.metric, r.replication, r.fold, r.rank, value, error
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(6, ',').collect();
            if fields.len() != 6 {
                return Err(KbmfError::Data(format!(
                    "report line {}: expected 6 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse_usize = |s: &str, what: &str| {
                s.parse::<usize>()
                    .map_err(|_| KbmfError::Data(format!("report line {}: bad {what} '{s}'", lineno + 1)))
            };
            let value = if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse::<f64>().map_err(|_| {
                    KbmfError::Data(format!("report line {}: bad value '{}'", lineno + 1, fields[4]))
                })?)
            };
            records.push(CellRecord {
                metric: fields[0].to_string(),
                replication: parse_usize(fields[1], "replication")?,
                fold: parse_usize(fields[2], "fold")?,
                rank: parse_usize(fields[3], "rank")?,
                value,
                error: if fields[5].is_empty() {
                    None
                } else {
                    Some(fields[5].to_string())
                },
            });
        }
        Ok(Self { records })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_csv().as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KbmfError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_csv(&text)
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.aggregate())
            .map_err(|e| KbmfError::Data(format!("summary serialization failed: {e}")))
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        let mut text = self.summary_json()?;
        text.push('\n');
        atomic_write(path, text.as_bytes())
    }

    /// A small line chart of aggregate mean vs rank, one polyline per metric.
    pub fn write_svg_chart(&self, path: &Path, title: &str) -> Result<()> {
        atomic_write(path, svg_chart(&self.aggregate(), title).as_bytes())
    }
}

const SVG_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn svg_chart(aggregates: &[AggregateRecord], title: &str) -> String {
    let (width, height, margin) = (640.0, 420.0, 60.0);
    let mut series: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    for a in aggregates {
        if a.mean.is_finite() {
            series.entry(&a.metric).or_default().push((a.rank, a.mean));
        }
    }
    let ranks: Vec<usize> = series.values().flatten().map(|(r, _)| *r).collect();
    let values: Vec<f64> = series.values().flatten().map(|(_, v)| *v).collect();
    let (rank_lo, rank_hi) = match (ranks.iter().min(), ranks.iter().max()) {
        (Some(&lo), Some(&hi)) if lo != hi => (lo as f64, hi as f64),
        (Some(&lo), _) => (lo as f64 - 0.5, lo as f64 + 0.5),
        _ => (0.0, 1.0),
    };
    let (mut val_lo, mut val_hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !val_lo.is_finite() || !val_hi.is_finite() {
        val_lo = 0.0;
        val_hi = 1.0;
    }
    if val_hi - val_lo < 1e-12 {
        val_lo -= 0.5;
        val_hi += 0.5;
    }
    let x = |rank: f64| margin + (rank - rank_lo) / (rank_hi - rank_lo) * (width - 2.0 * margin);
    let y = |v: f64| height - margin - (v - val_lo) / (val_hi - val_lo) * (height - 2.0 * margin);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>\n",
        width / 2.0
    );
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = margin,
        b = height - margin,
        r = width - margin,
        t = margin
    ));
    for tick in 0..=4 {
        let v = val_lo + (val_hi - val_lo) * tick as f64 / 4.0;
        let rank = rank_lo + (rank_hi - rank_lo) * tick as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{v:.3}</text>\n",
            margin - 6.0,
            y(v) + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{rank:.0}</text>\n",
            x(rank),
            height - margin + 16.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">rank</text>\n",
        width / 2.0,
        height - 14.0
    ));
    for (idx, (metric, mut points)) in series.into_iter().enumerate() {
        points.sort_by_key(|(r, _)| *r);
        let color = SVG_COLORS[idx % SVG_COLORS.len()];
        let path: Vec<String> = points.iter().map(|(r, v)| format!("{:.1},{:.1}", x(*r as f64), y(*v))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for (r, v) in &points {
            svg.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.6\" fill=\"{color}\"/>\n",
                x(*r as f64),
                y(*v)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{metric}</text>\n",
            width - margin + 6.0,
            margin + 16.0 * idx as f64
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
