use std::fs;
use std::path::{Path, PathBuf};

use super::MetricsReport;
use crate::{Error, Label, Result};

/// Paths written by [`write_report_artifacts`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportArtifacts {
    pub json: PathBuf,
    pub confusion_csv: PathBuf,
    pub heatmap: Option<PathBuf>,
}

pub fn confusion_csv(report: &MetricsReport) -> String {
    let mut out = String::from("true\\predicted");
    for l in Label::ALL {
        out.push(',');
        out.push_str(l.name());
    }
    out.push('\n');
    for t in Label::ALL {
        out.push_str(t.name());
        for p in Label::ALL {
            out.push_str(&format!(",{}", report.confusion[t.code()][p.code()]));
        }
        out.push('\n');
    }
    out
}

/// Standalone SVG heatmap of the confusion matrix, cells shaded by row share.
pub fn confusion_svg(report: &MetricsReport, title: &str) -> String {
    const CELL: usize = 72;
    const LEFT: usize = 150;
    const TOP: usize = 60;
    let n = Label::COUNT;
    let (w, h) = (LEFT + CELL * n + 20, TOP + CELL * n + 90);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        w / 2,
        escape(title)
    ));
    for t in Label::ALL {
        let row = &report.confusion[t.code()];
        let total: usize = row.iter().sum();
        let y = TOP + t.code() * CELL;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            LEFT - 8,
            y + CELL / 2 + 4,
            t.name()
        ));
        for p in Label::ALL {
            let count = row[p.code()];
            let share = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            // white to dark blue
            let shade = |lo: f64, hi: f64| (lo + (hi - lo) * share).round() as u8;
            let (r, g, b) = (shade(247.0, 8.0), shade(251.0, 48.0), shade(255.0, 107.0));
            let x = LEFT + p.code() * CELL;
            let ink = if share > 0.5 { "#fff" } else { "#000" };
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"#{r:02x}{g:02x}{b:02x}\" stroke=\"#ccc\"/>\n<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{ink}\">{count}</text>\n",
                x + CELL / 2,
                y + CELL / 2 + 4
            ));
        }
    }
    let base = TOP + n * CELL;
    for p in Label::ALL {
        let x = LEFT + p.code() * CELL + CELL / 2;
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"end\" transform=\"rotate(-35 {x} {})\">{}</text>\n",
            base + 16,
            base + 16,
            p.name()
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">predicted</text>\n</svg>\n",
        LEFT + CELL * n / 2,
        h - 8
    ));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write `<stem>.json`, `<stem>_confusion.csv` and optionally
/// `<stem>_confusion.svg` into `dir`.
pub fn write_report_artifacts(
    report: &MetricsReport,
    dir: &Path,
    stem: &str,
    heatmap: bool,
) -> Result<ReportArtifacts> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, report.to_json()).map_err(|e| Error::io(&json, e))?;
    let csv = dir.join(format!("{stem}_confusion.csv"));
    fs::write(&csv, confusion_csv(report)).map_err(|e| Error::io(&csv, e))?;
    let heatmap = if heatmap {
        let svg = dir.join(format!("{stem}_confusion.svg"));
        fs::write(&svg, confusion_svg(report, stem)).map_err(|e| Error::io(&svg, e))?;
        Some(svg)
    } else {
        None
    };
    Ok(ReportArtifacts {
        json,
        confusion_csv: csv,
        heatmap,
    })
}
