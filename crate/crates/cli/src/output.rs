use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use wiretap_core::sim::{Estimate, PointStats, SweepResult, VERSION};

use crate::Curve;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Which series go into the plot table.
#[derive(Clone, Copy, Debug)]
pub enum PlotKind {
    Bob,
    Eve,
    BobEve,
    /// Secrecy proxy in bits per channel use (not dB).
    Secrecy,
}

#[derive(Serialize)]
struct Record {
    curve: String,
    axis: &'static str,
    axis_value: f64,
    scheme: String,
    trials: usize,
    outages: usize,
    invalid: usize,
    loaded: usize,
    extrapolated: bool,
    bob_mean_linear: f64,
    bob_mean_linear_stderr: f64,
    bob_ratio_of_expectations: f64,
    bob_ratio_of_expectations_stderr: f64,
    eve_mean_linear: Option<f64>,
    eve_mean_linear_stderr: Option<f64>,
    eve_ratio_of_expectations: Option<f64>,
    eve_ratio_of_expectations_stderr: Option<f64>,
    secrecy: Option<f64>,
    secrecy_stderr: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: String,
    command: Vec<String>,
    threads: usize,
    wall_time_s: f64,
    outputs: Vec<String>,
    curves: Vec<&'a Curve>,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn records(results: &[(Curve, SweepResult)]) -> Vec<Record> {
    let mut out = Vec::new();
    for (curve, r) in results {
        for (tag, series) in &r.series {
            for (i, p) in series.iter().enumerate() {
                out.push(Record {
                    curve: curve.label.clone(),
                    axis: r.axis.as_str(),
                    axis_value: r.axis_values[i],
                    scheme: tag.to_string(),
                    trials: p.trials,
                    outages: p.outages,
                    invalid: p.invalid,
                    loaded: p.loaded,
                    extrapolated: r.extrapolated[i],
                    bob_mean_linear: p.bob.mean_linear.mean,
                    bob_mean_linear_stderr: p.bob.mean_linear.stderr,
                    bob_ratio_of_expectations: p.bob.ratio_of_expectations.mean,
                    bob_ratio_of_expectations_stderr: p.bob.ratio_of_expectations.stderr,
                    eve_mean_linear: p.eve.map(|e| e.mean_linear.mean),
                    eve_mean_linear_stderr: p.eve.map(|e| e.mean_linear.stderr),
                    eve_ratio_of_expectations: p.eve.map(|e| e.ratio_of_expectations.mean),
                    eve_ratio_of_expectations_stderr: p.eve.map(|e| e.ratio_of_expectations.stderr),
                    secrecy: p.secrecy.map(|s| s.mean),
                    secrecy_stderr: p.secrecy.map(|s| s.stderr),
                });
            }
        }
    }
    out
}

fn write_results_csv(path: &Path, recs: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "curve",
        "axis",
        "axis_value",
        "scheme",
        "trials",
        "outages",
        "invalid",
        "loaded",
        "extrapolated",
        "bob_mean_linear",
        "bob_mean_linear_stderr",
        "bob_ratio_of_expectations",
        "bob_ratio_of_expectations_stderr",
        "eve_mean_linear",
        "eve_mean_linear_stderr",
        "eve_ratio_of_expectations",
        "eve_ratio_of_expectations_stderr",
        "secrecy",
        "secrecy_stderr",
    ])?;
    for r in recs {
        w.write_record([
            r.curve.clone(),
            r.axis.to_string(),
            num(r.axis_value),
            r.scheme.clone(),
            r.trials.to_string(),
            r.outages.to_string(),
            r.invalid.to_string(),
            r.loaded.to_string(),
            r.extrapolated.to_string(),
            num(r.bob_mean_linear),
            num(r.bob_mean_linear_stderr),
            num(r.bob_ratio_of_expectations),
            num(r.bob_ratio_of_expectations_stderr),
            opt(r.eve_mean_linear),
            opt(r.eve_mean_linear_stderr),
            opt(r.eve_ratio_of_expectations),
            opt(r.eve_ratio_of_expectations_stderr),
            opt(r.secrecy),
            opt(r.secrecy_stderr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn plot_rows(kind: PlotKind, scheme: &str, p: &PointStats, r: &SweepResult) -> Vec<(String, f64, f64)> {
    let avg = r.metadata.config.averaging;
    let db = |e: Estimate| (e.mean_db, e.stderr_db);
    let mut rows = Vec::new();
    let mut push = |suffix: &str, v: Option<(f64, f64)>| {
        if let Some((m, s)) = v {
            rows.push((format!("{scheme}{suffix}"), m, s));
        }
    };
    match kind {
        PlotKind::Bob => push("", Some(db(p.bob.get(avg)))),
        PlotKind::Eve => push("", p.eve.map(|e| db(e.get(avg)))),
        PlotKind::BobEve => {
            push(":bob", Some(db(p.bob.get(avg))));
            push(":eve", p.eve.map(|e| db(e.get(avg))));
        }
        PlotKind::Secrecy => push("", p.secrecy.map(|s| (s.mean, s.stderr))),
    }
    rows
}

fn write_plot(path: &Path, kind: PlotKind, results: &[(Curve, SweepResult)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["axis", "scheme", "mean_db", "stderr_db", "outage_fraction"])?;
    for (curve, r) in results {
        for (tag, series) in &r.series {
            let name = if curve.label.is_empty() { tag.to_string() } else { format!("{tag}@{}", curve.label) };
            for (i, p) in series.iter().enumerate() {
                let frac = if p.trials > 0 { p.outages as f64 / p.trials as f64 } else { 0.0 };
                for (label, m, s) in plot_rows(kind, &name, p, r) {
                    w.write_record([num(r.axis_values[i]), label, num(m), num(s), num(frac)])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the results file, the plot table and the manifest into `dir`.
pub fn write_bundle(
    dir: &Path,
    format: Format,
    plot_name: &str,
    kind: PlotKind,
    results: &[(Curve, SweepResult)],
    wall_time_s: f64,
    threads: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let recs = records(results);
    let results_path = match format {
        Format::Csv => {
            let p = dir.join("results.csv");
            write_results_csv(&p, &recs)?;
            p
        }
        Format::Json => {
            let p = dir.join("results.json");
            fs::write(&p, serde_json::to_string_pretty(&recs)?)?;
            p
        }
    };
    let plot_path = dir.join(plot_name);
    write_plot(&plot_path, kind, results)?;
    let manifest_path = dir.join("manifest.json");
    let outputs = [&results_path, &plot_path]
        .iter()
        .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let manifest = Manifest {
        tool: format!("wiretap {} ({VERSION})", env!("CARGO_PKG_VERSION")),
        command: std::env::args().collect(),
        threads,
        wall_time_s,
        outputs,
        curves: results.iter().map(|(c, _)| c).collect(),
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(vec![results_path, plot_path, manifest_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-300, 123456.789e200, -7.25e-5] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn db_conversion_round_trips() {
        let mut x = -100.0;
        while x <= 100.0 {
            let lin = wiretap_core::sim::db_to_linear(x);
            assert!((wiretap_core::sim::linear_to_db(lin) - x).abs() < 1e-12);
            x += 0.25;
        }
    }
}
