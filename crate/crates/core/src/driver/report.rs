// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV tables, SVG figures and run manifests. Output is a pure function of
//! the results, so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::driver::{AblationRow, GridResult};
use crate::error::Result;
use crate::metrics::{csv_row, EvalResult, EVAL_CSV_HEADER};
use crate::toy::SpikeProfile;

/// Which metric a heatmap shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Acc,
    Bleu,
    AccBleu,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Acc, Metric::Bleu, Metric::AccBleu];

    pub fn name(self) -> &'static str {
        match self {
            Self::Acc => "acc",
            Self::Bleu => "bleu",
            Self::AccBleu => "acc_bleu",
        }
    }

    fn of(self, r: &EvalResult) -> f64 {
        match self {
            Self::Acc => r.acc,
            Self::Bleu => r.bleu,
            Self::AccBleu => r.acc_bleu,
        }
    }

    fn max(self) -> f64 {
        match self {
            Self::Acc => 1.0,
            Self::Bleu | Self::AccBleu => 100.0,
        }
    }
}

fn result_fields(r: &EvalResult) -> String {
    format!("{},{},{},{},{}", r.acc, r.bleu, r.acc_bleu, r.n_samples, r.n_success)
}

/// Seed-averaged grid, one row per cell and language plus an `overall`
/// row per cell. Skipped cells are listed with status `absent` and empty
/// metric fields.
pub fn grid_csv(grid: &GridResult) -> String {
    let mut out = String::from("lang,layer,alpha,status,acc,bleu,acc_bleu,n_samples,n_success\n");
    let mut row = |lang: &str, layer: usize, alpha: f64, r: Option<&EvalResult>| {
        let _ = match r {
            Some(r) => writeln!(out, "{lang},{layer},{alpha},ok,{}", result_fields(r)),
            None => writeln!(out, "{lang},{layer},{alpha},absent,,,,0,0"),
        };
    };
    for cell in &grid.cells {
        for (lang, r) in grid.languages.iter().zip(&cell.per_lang) {
            row(lang, cell.layer, cell.alpha, r.as_ref());
        }
        row("overall", cell.layer, cell.alpha, cell.overall.as_ref());
    }
    out
}

/// Per-seed grid results.
pub fn runs_csv(grid: &GridResult) -> String {
    let mut out = format!("{EVAL_CSV_HEADER}\n");
    for run in &grid.runs {
        out.push_str(&csv_row(&run.lang, run.layer, run.alpha, &run.result, run.seed));
        out.push('\n');
    }
    out
}

/// Ablation table. `column` names the varied quantity.
pub fn ablation_csv(column: &str, rows: &[AblationRow], with_recall: bool, with_degenerate: bool) -> String {
    let mut out = format!("{column},acc,bleu,acc_bleu");
    if with_recall {
        out.push_str(",planted_recall");
    }
    if with_degenerate {
        out.push_str(",degenerate");
    }
    out.push('\n');
    for row in rows {
        let r = &row.result;
        let _ = write!(out, "{},{},{},{}", row.value, r.acc, r.bleu, r.acc_bleu);
        if with_recall {
            match row.planted_recall {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        if with_degenerate {
            let _ = write!(out, ",{}", row.degenerate);
        }
        out.push('\n');
    }
    out
}

/// Color for absent cells; outside the value ramp.
pub const ABSENT_COLOR: &str = "#d9d9d9";

/// White to dark blue.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(255.0, 8.0),
        lerp(255.0, 48.0),
        lerp(255.0, 107.0)
    )
}

const CELL: usize = 36;
const MARGIN_LEFT: usize = 60;
const MARGIN_TOP: usize = 40;

/// Heatmap of the overall metric: layers on the y axis, alpha on the x
/// axis. Cells that were not evaluated use [`ABSENT_COLOR`].
pub fn heatmap_svg(grid: &GridResult, metric: Metric) -> String {
    let (cols, rows) = (grid.alphas.len(), grid.layers.len());
    let width = MARGIN_LEFT + cols * CELL + 20;
    let height = MARGIN_TOP + rows * CELL + 40;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"10\">\n"
    );
    let _ = writeln!(
        s,
        "<text x=\"{MARGIN_LEFT}\" y=\"20\" font-size=\"13\">{}</text>",
        metric.name()
    );
    for (r, &layer) in grid.layers.iter().enumerate() {
        let y = MARGIN_TOP + r * CELL;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{layer}</text>",
            MARGIN_LEFT - 6,
            y + CELL / 2 + 4
        );
        for (c, &alpha) in grid.alphas.iter().enumerate() {
            let x = MARGIN_LEFT + c * CELL;
            let value = grid
                .cell(layer, alpha)
                .and_then(|cell| cell.overall.as_ref())
                .map(|r| metric.of(r));
            let fill = value.map_or_else(|| ABSENT_COLOR.to_string(), |v| ramp(v / metric.max()));
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\" stroke=\"#ffffff\"><title>layer {layer}, alpha {alpha}: {}</title></rect>",
                value.map_or_else(|| "not evaluated".to_string(), |v| v.to_string())
            );
        }
    }
    let label_y = MARGIN_TOP + rows * CELL + 14;
    for (c, &alpha) in grid.alphas.iter().enumerate() {
        let x = MARGIN_LEFT + c * CELL + CELL / 2;
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{label_y}\" text-anchor=\"middle\">{alpha}</text>"
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">alpha</text>",
        MARGIN_LEFT + cols * CELL / 2,
        label_y + 16
    );
    s.push_str("</svg>\n");
    s
}

/// Bar chart of a spike profile with the `highlight` dimensions drawn in a
/// second color.
pub fn spike_svg(profile: &SpikeProfile, highlight: &[usize]) -> String {
    let d = profile.values.len();
    let bar = 6usize;
    let plot_h = 200.0;
    let width = 40 + d * bar + 20;
    let height = 260;
    let max = profile.values.iter().copied().fold(0.0f64, f64::max);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"10\">\n"
    );
    for (i, &v) in profile.values.iter().enumerate() {
        let h = if max > 0.0 { v / max * plot_h } else { 0.0 };
        let fill = if highlight.contains(&i) { "#c0392b" } else { "#4a6fa5" };
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{:.3}\" width=\"{}\" height=\"{h:.3}\" fill=\"{fill}\"><title>dim {i}: {v}</title></rect>",
            40 + i * bar,
            20.0 + plot_h - h,
            bar - 1
        );
    }
    let _ = writeln!(s, "<text x=\"40\" y=\"245\">dimension (0..{d})</text>");
    s.push_str("</svg>\n");
    s
}

/// A file read by a command, identified by content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl InputFile {
    pub fn hash(path: &Path) -> Result<Self> {
        let data = std::fs::read(path)?;
        let digest = Sha256::digest(&data);
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        Ok(Self {
            path: path.display().to_string(),
            bytes: data.len() as u64,
            sha256: hex,
        })
    }
}

/// Record of what produced an output directory. Contains no timestamps so
/// reruns are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub crate_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::CellResult;

    fn r(acc: f64) -> EvalResult {
        EvalResult {
            acc,
            bleu: 100.0 * acc,
            acc_bleu: 100.0 * acc * acc,
            n_samples: 2,
            n_success: (2.0 * acc) as usize,
        }
    }

    fn grid() -> GridResult {
        GridResult {
            layers: vec![1, 2],
            alphas: vec![0.5, 1.0],
            languages: vec!["toyB".into()],
            n_seeds: 1,
            cells: vec![
                CellResult {
                    layer: 1,
                    alpha: 0.5,
                    per_lang: vec![Some(r(0.0))],
                    overall: Some(r(0.0)),
                },
                CellResult {
                    layer: 1,
                    alpha: 1.0,
                    per_lang: vec![None],
                    overall: None,
                },
                CellResult {
                    layer: 2,
                    alpha: 0.5,
                    per_lang: vec![Some(r(1.0))],
                    overall: Some(r(1.0)),
                },
                CellResult {
                    layer: 2,
                    alpha: 1.0,
                    per_lang: vec![Some(r(0.5))],
                    overall: Some(r(0.5)),
                },
            ],
            runs: Vec::new(),
        }
    }

    #[test]
    fn grid_rows_mark_absent_cells() {
        let csv = grid_csv(&grid());
        assert_eq!(csv.lines().count(), 1 + 4 * 2);
        assert!(csv.contains("toyB,2,0.5,ok,1,100,100,2,2\n"));
        assert!(csv.contains("toyB,1,1,absent,,,,0,0\n"));
        assert!(csv.contains("overall,1,1,absent,,,,0,0\n"));
    }

    #[test]
    fn heatmap_marks_absent() {
        let svg = heatmap_svg(&grid(), Metric::Acc);
        assert_eq!(svg.matches(ABSENT_COLOR).count(), 1);
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains(&ramp(1.0)));
    }

    #[test]
    fn ramp_ends() {
        assert_eq!(ramp(0.0), "#ffffff");
        assert_eq!(ramp(1.0), "#08306b");
        assert_ne!(ramp(0.5), ABSENT_COLOR);
    }

    #[test]
    fn ablation_columns() {
        let rows = [AblationRow {
            value: 8.0,
            result: r(1.0),
            planted_recall: Some(1.0),
            degenerate: false,
            dimension_sets: vec![],
        }];
        assert_eq!(
            ablation_csv("k", &rows, true, false),
            "k,acc,bleu,acc_bleu,planted_recall\n8,1,100,100,1\n"
        );
        assert_eq!(
            ablation_csv("anchor_layer", &rows, false, true),
            "anchor_layer,acc,bleu,acc_bleu,degenerate\n8,1,100,100,false\n"
        );
    }
}
