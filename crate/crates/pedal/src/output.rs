//! Report files: quality curves, checkpoint tables with relative gains,
//! prequential statistics and the full report as JSON.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use pedal_core::simulator::{ComparisonReport, CurvePoint, RunOutcome};
use pedal_core::{EvalStats, RunReport};

use crate::error::{Error, IoContext, Result};

pub const CURVE_HEADER: [&str; 3] = ["event_seq", "pct_post_edited", "mean_quality"];

pub const PREQUENTIAL_HEADER: [&str; 7] = ["Sub-corpus", "Samples", "MAE", "MSE", "Spearman ρ", "Pearson r", "Kendall τ"];

pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKPOINT_FILE: &str = "checkpoints.csv";
pub const PREQUENTIAL_FILE: &str = "prequential.csv";
pub const REPORT_FILE: &str = "report.json";
pub const JOURNAL_FILE: &str = "journal.log";
pub const SNAPSHOT_FILE: &str = "snapshot.txt";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const COMPARISON_SEEDS_FILE: &str = "comparison_seeds.csv";
pub const COMPARISON_TABLE_FILE: &str = "comparison.md";
pub const COMPARISON_JSON_FILE: &str = "comparison.json";
pub const COMPARISON_CURVES_FILE: &str = "comparison_curves.csv";

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

/// Column label of an effort percentage: `20%`, `12.5%`.
pub fn pct_label(p: f64) -> String {
    format!("{p}%")
}

pub fn write_curve<W: Write>(w: W, curve: &[CurvePoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CURVE_HEADER).map_err(csv_err)?;
    for p in curve {
        out.write_record([p.event.to_string(), fixed(p.pct_post_edited), fixed(p.quality)])
            .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_curve<R: Read>(r: R) -> Result<Vec<CurvePoint>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CURVE_HEADER) {
        return Err(Error::Format(format!("unexpected curve header {header:?}")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad number {:?} in curve", &rec[i])))
            };
            Ok(CurvePoint {
                event: rec[0]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad event number {:?}", &rec[0])))?,
                pct_post_edited: num(1)?,
                quality: num(2)?,
            })
        })
        .collect()
}

/// Single-run checkpoint table: one row, one column per checkpoint.
pub fn write_checkpoints<W: Write>(w: W, report: &RunReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["policy".to_string()];
    header.extend(report.checkpoints.iter().map(|c| pct_label(c.pct)));
    out.write_record(&header).map_err(csv_err)?;
    let mut row = vec![report.config.policy.name().to_string()];
    row.extend(report.checkpoints.iter().map(|c| opt(c.quality)));
    out.write_record(&row).map_err(csv_err)?;
    out.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Aligned comparison table: quality and Δ% against the baseline per
/// checkpoint.
pub fn write_comparison<W: Write>(w: W, cmp: &ComparisonReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["policy".to_string(), "seeds".to_string()];
    for &p in &cmp.checkpoints {
        header.push(pct_label(p));
        header.push(format!("Δ{}", pct_label(p)));
    }
    out.write_record(&header).map_err(csv_err)?;
    for row in &cmp.rows {
        let mut rec = vec![row.label.clone(), row.seeds.len().to_string()];
        for (q, d) in row.quality.iter().zip(&row.delta_pct) {
            rec.push(opt(*q));
            rec.push(opt(*d));
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Per-seed appendix of a comparison.
pub fn write_comparison_seeds<W: Write>(w: W, cmp: &ComparisonReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["policy".to_string(), "seed".to_string()];
    header.extend(cmp.checkpoints.iter().map(|&p| pct_label(p)));
    out.write_record(&header).map_err(csv_err)?;
    for row in &cmp.rows {
        for (seed, values) in row.seeds.iter().zip(&row.per_seed) {
            let mut rec = vec![row.policy.name().to_string(), seed.to_string()];
            rec.extend(values.iter().map(|v| opt(*v)));
            out.write_record(&rec).map_err(csv_err)?;
        }
    }
    out.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Comparison as a markdown table, two decimals, gains as signed percents.
pub fn comparison_markdown(cmp: &ComparisonReport) -> String {
    let mut header = vec![format!("corpus {}", cmp.corpus_fingerprint)];
    for &p in &cmp.checkpoints {
        header.push(pct_label(p));
        header.push("Δ".into());
    }
    let mut lines = vec![
        format!("| {} |", header.join(" | ")),
        format!("|{}", "---|".repeat(header.len())),
    ];
    for row in &cmp.rows {
        let mut cells = vec![row.label.clone()];
        for (q, d) in row.quality.iter().zip(&row.delta_pct) {
            cells.push(q.map_or("n/a".into(), |q| format!("{q:.2}")));
            cells.push(match d {
                None => "n/a".into(),
                Some(d) if format!("{d:.2}") == "0.00" || format!("{d:.2}") == "-0.00" => "0.00%".into(),
                Some(d) => format!("{d:+.2}%"),
            });
        }
        lines.push(format!("| {} |", cells.join(" | ")));
    }
    lines.push(String::new());
    lines.join("\n")
}

/// Prequential regression and ranking table, one row per labelled log.
pub fn write_prequential<W: Write>(w: W, rows: &[(String, Option<EvalStats>)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PREQUENTIAL_HEADER).map_err(csv_err)?;
    for (label, stats) in rows {
        let rec = match stats {
            Some(s) => vec![
                label.clone(),
                s.n.to_string(),
                fixed(s.mae),
                fixed(s.mse),
                opt(s.spearman_rho),
                opt(s.pearson_r),
                opt(s.kendall_tau),
            ],
            None => vec![label.clone(), "0".into(), String::new(), String::new(), String::new(), String::new(), String::new()],
        };
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Mean quality per event over several runs, one column per label. Runs of
/// different lengths leave trailing cells empty.
pub fn write_comparison_curves<W: Write>(w: W, corpus_size: usize, series: &[(String, Vec<CurvePoint>)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["event_seq".to_string(), "pct_post_edited".to_string()];
    header.extend(series.iter().map(|(l, _)| l.clone()));
    out.write_record(&header).map_err(csv_err)?;
    let len = series.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    for i in 0..len {
        let event = i as u64 + 1;
        let mut rec = vec![event.to_string(), fixed(100.0 * event as f64 / corpus_size as f64)];
        rec.extend(series.iter().map(|(_, c)| opt(c.get(i).map(|p| p.quality))));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Named `(pct post-edited, quality)` points.
pub type Series = (String, Vec<(f64, f64)>);

/// Reads a file written by [`write_comparison_curves`] (or a single
/// [`write_curve`] file) back into named `(pct, quality)` series.
pub fn read_series<R: Read>(r: R) -> Result<Vec<Series>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() < 3 || &header[0] != "event_seq" || &header[1] != "pct_post_edited" {
        return Err(Error::Format(format!("unexpected curve header {header:?}")));
    }
    let mut series: Vec<(String, Vec<(f64, f64)>)> = header.iter().skip(2).map(|h| (h.to_string(), Vec::new())).collect();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let pct: f64 = rec[1].parse().map_err(|_| Error::Format(format!("bad number {:?}", &rec[1])))?;
        for (k, (_, points)) in series.iter_mut().enumerate() {
            let cell = &rec[k + 2];
            if !cell.is_empty() {
                let q = cell.parse().map_err(|_| Error::Format(format!("bad number {cell:?}")))?;
                points.push((pct, q));
            }
        }
    }
    Ok(series)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, fs::File)> {
    let path = dir.join(name);
    let file = fs::File::create(&path).at(&path)?;
    Ok((path, file))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).at(&path)?;
    Ok(path)
}

pub fn report_json(report: &RunReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))
}

/// Writes every artifact of one run into `dir` and returns the paths.
pub fn emit_run(dir: &Path, label: &str, outcome: &RunOutcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).at(dir)?;
    let report = &outcome.report;
    let mut written = Vec::new();

    let (path, f) = create(dir, CURVE_FILE)?;
    write_curve(f, &report.curve)?;
    written.push(path);
    let (path, f) = create(dir, CHECKPOINT_FILE)?;
    write_checkpoints(f, report)?;
    written.push(path);
    let (path, f) = create(dir, PREQUENTIAL_FILE)?;
    write_prequential(f, &[(label.to_string(), report.prequential)])?;
    written.push(path);
    written.push(write_text(dir, REPORT_FILE, &(report_json(report)? + "\n"))?);

    let mut journal = pedal_core::journal::Journal::new();
    for e in &outcome.events {
        journal.append(e.clone())?;
    }
    written.push(write_text(dir, JOURNAL_FILE, &journal.to_text())?);
    written.push(write_text(dir, SNAPSHOT_FILE, &outcome.snapshot)?);
    Ok(written)
}

/// Writes the comparison table, its per-seed appendix, a markdown rendering,
/// the JSON form and the mean curves.
pub fn emit_comparison(
    dir: &Path,
    cmp: &ComparisonReport,
    curves: &[(String, Vec<CurvePoint>)],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).at(dir)?;
    let mut written = Vec::new();
    let (path, f) = create(dir, COMPARISON_FILE)?;
    write_comparison(f, cmp)?;
    written.push(path);
    let (path, f) = create(dir, COMPARISON_SEEDS_FILE)?;
    write_comparison_seeds(f, cmp)?;
    written.push(path);
    written.push(write_text(dir, COMPARISON_TABLE_FILE, &comparison_markdown(cmp))?);
    let json = serde_json::to_string_pretty(cmp).map_err(|e| Error::Format(e.to_string()))?;
    written.push(write_text(dir, COMPARISON_JSON_FILE, &(json + "\n"))?);
    let (path, f) = create(dir, COMPARISON_CURVES_FILE)?;
    write_comparison_curves(f, cmp.corpus_size, curves)?;
    written.push(path);
    Ok(written)
}

/// Pointwise mean of equally long curves.
pub fn mean_curve(curves: &[&[CurvePoint]]) -> Vec<CurvePoint> {
    let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| CurvePoint {
            event: curves[0][i].event,
            pct_post_edited: curves[0][i].pct_post_edited,
            quality: curves.iter().map(|c| c[i].quality).sum::<f64>() / curves.len() as f64,
        })
        .collect()
}
