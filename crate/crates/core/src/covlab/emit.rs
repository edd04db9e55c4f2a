//! CSV and SVG outputs of a sweep.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::svg::{heatmap_svg, line_plot_svg, HeatCell, Series};
use super::{RateTrace, RunRecord, SweepOutput};
use crate::error::{Error, Result};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `mean`, `min_mse` or `min_iterations`.
    pub row_type: String,
    pub ordering: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub runs: usize,
    pub terminated_runs: usize,
    pub mean_iterations: f64,
    pub mean_mse: f64,
}

pub fn write_records<W: std::io::Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Per-(ordering, weights) means over seeds, then for each ordering the rows
/// with the smallest mean MSE and the smallest mean iteration count.
/// Failed runs count in `runs` but not in the means.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(String, [f64; 3], Vec<&RunRecord>)> = Vec::new();
    for r in records {
        let key = [r.lambda1, r.lambda2, r.lambda3];
        match groups.last_mut() {
            Some((o, w, g)) if *o == r.ordering && *w == key => g.push(r),
            _ => {
                if let Some((_, _, g)) = groups.iter_mut().find(|(o, w, _)| *o == r.ordering && *w == key) {
                    g.push(r);
                } else {
                    groups.push((r.ordering.clone(), key, vec![r]));
                }
            }
        }
    }
    let means: Vec<SummaryRow> = groups
        .iter()
        .map(|(o, w, g)| {
            let ok: Vec<&&RunRecord> = g.iter().filter(|r| r.error.is_none()).collect();
            SummaryRow {
                row_type: "mean".into(),
                ordering: o.clone(),
                lambda1: w[0],
                lambda2: w[1],
                lambda3: w[2],
                runs: g.len(),
                terminated_runs: g.iter().filter(|r| r.terminated).count(),
                mean_iterations: mean(ok.iter().map(|r| r.iterations as f64)),
                mean_mse: mean(ok.iter().map(|r| r.mse)),
            }
        })
        .collect();
    let mut out = means.clone();
    let mut orderings: Vec<&String> = Vec::new();
    for m in &means {
        if !orderings.contains(&&m.ordering) {
            orderings.push(&m.ordering);
        }
    }
    for o in orderings {
        let rows: Vec<&SummaryRow> = means.iter().filter(|m| &m.ordering == o).collect();
        for (kind, key) in [
            ("min_mse", (|r: &SummaryRow| r.mean_mse) as fn(&SummaryRow) -> f64),
            ("min_iterations", |r: &SummaryRow| r.mean_iterations),
        ] {
            let mut best: Option<&SummaryRow> = None;
            for r in &rows {
                let v = key(r);
                if v.is_nan() {
                    continue;
                }
                if best.is_none_or(|b| v < key(b)) {
                    best = Some(r);
                }
            }
            if let Some(b) = best {
                let mut row = b.clone();
                row.row_type = kind.into();
                out.push(row);
            }
        }
    }
    out
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_summary<R: std::io::Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

fn file_tag(ordering: &str) -> String {
    ordering.replace(|c: char| !c.is_ascii_alphanumeric() && c != '-', "_")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `sweep.csv`, `summary.csv`, and per ordering `rate_<o>.svg` and
/// `heatmap_<o>.svg` into `out_dir`. Returns the written paths.
pub fn emit(output: &SweepOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if output.records.is_empty() {
        return Err(Error::invalid("no records to emit"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let mut buf = Vec::new();
    write_records(&output.records, &mut buf)?;
    let p = out_dir.join(SWEEP_FILE);
    write_file(&p, &buf)?;
    written.push(p);

    let summary = summarize(&output.records);
    let mut buf = Vec::new();
    write_summary(&summary, &mut buf)?;
    let p = out_dir.join(SUMMARY_FILE);
    write_file(&p, &buf)?;
    written.push(p);

    let mut traces: BTreeMap<&str, Vec<&RateTrace>> = BTreeMap::new();
    for t in &output.traces {
        traces.entry(t.ordering.as_str()).or_default().push(t);
    }
    let mut orderings: Vec<&str> = Vec::new();
    for r in &output.records {
        if !orderings.contains(&r.ordering.as_str()) {
            orderings.push(&r.ordering);
        }
    }
    for o in orderings {
        let series: Vec<Series> = traces
            .get(o)
            .map(|ts| {
                ts.iter()
                    .map(|t| Series {
                        label: format!("seed {}", t.seed),
                        points: t.points.iter().map(|&(k, v)| (k as f64, v)).collect(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        let svg = line_plot_svg(&format!("ordering {o}"), "k", "k·‖Res‖²∞,F", &series, true);
        let p = out_dir.join(format!("rate_{}.svg", file_tag(o)));
        write_file(&p, svg.as_bytes())?;
        written.push(p);

        let cells: Vec<HeatCell> = summary
            .iter()
            .filter(|r| r.row_type == "mean" && r.ordering == o)
            .map(|r| HeatCell { x: r.lambda1, y: r.lambda2, mse: r.mean_mse, iterations: r.mean_iterations })
            .collect();
        let svg = heatmap_svg(&format!("ordering {o}"), &cells);
        let p = out_dir.join(format!("heatmap_{}.svg", file_tag(o)));
        write_file(&p, svg.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ordering: &str, w: [f64; 3], seed: u64, iterations: usize, mse: f64) -> RunRecord {
        RunRecord {
            ordering: ordering.into(),
            lambda1: w[0],
            lambda2: w[1],
            lambda3: w[2],
            seed,
            step: 0.4,
            iterations,
            mse,
            mse_sample: 0.5,
            terminated: true,
            final_residual: 1e-7,
            certificate_residual: 1e-4,
            rate_passed: Some(true),
            error: None,
        }
    }

    #[test]
    fn records_roundtrip() {
        let mut rs =
            vec![rec("1-2-3-4", [0.2, 0.3, 0.5], 1, 10, 0.125), rec("1-2-3-4", [0.2, 0.3, 0.5], 2, 12, 1.0 / 3.0)];
        rs[1].error = Some("boom, with comma".into());
        rs[1].rate_passed = None;
        rs[1].mse = f64::INFINITY;
        let mut buf = Vec::new();
        write_records(&rs, &mut buf).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), rs);
    }

    #[test]
    fn summary_means_and_argmins() {
        let a = [0.2, 0.3, 0.5];
        let b = [0.5, 0.25, 0.25];
        let rs = vec![
            rec("1-2-3-4", a, 1, 10, 0.4),
            rec("1-2-3-4", a, 2, 20, 0.2),
            rec("1-2-3-4", b, 1, 5, 0.5),
            rec("1-2-3-4", b, 2, 7, 0.6),
        ];
        let s = summarize(&rs);
        assert_eq!(s.len(), 4);
        assert!((s[0].mean_iterations - 15.0).abs() < 1e-12 && (s[0].mean_mse - 0.3).abs() < 1e-12);
        assert_eq!(s[2].row_type, "min_mse");
        assert_eq!([s[2].lambda1, s[2].lambda2, s[2].lambda3], a);
        assert_eq!(s[3].row_type, "min_iterations");
        assert_eq!([s[3].lambda1, s[3].lambda2, s[3].lambda3], b);
    }
}
