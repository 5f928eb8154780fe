//! Result emission: round-trippable rows CSV, JSON with schema version,
//! Markdown summary and the plot-ready long-format CSV.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExperimentResult, MuAccuracy, RunRow, Scenario};
use crate::error::{Error, Result};

/// Output formats for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overlap_sweep" => Ok(Scenario::OverlapSweep),
            "feature_skew_sweep" => Ok(Scenario::FeatureSkewSweep),
            "label_skew_sweep" => Ok(Scenario::LabelSkewSweep),
            "concept_shift_sweep" => Ok(Scenario::ConceptShiftSweep),
            "sample_size_study" => Ok(Scenario::SampleSizeStudy),
            "weight_divergence_study" => Ok(Scenario::WeightDivergenceStudy),
            "fedprox_mu_sweep" => Ok(Scenario::FedproxMuSweep),
            "wasserstein_comparison" => Ok(Scenario::WassersteinComparison),
            other => Err(Error::Config(format!("unknown scenario {other:?}"))),
        }
    }
}

const ROW_HEADER: [&str; 14] = [
    "scenario",
    "seed",
    "level",
    "s_tilde",
    "wasserstein",
    "local_accuracy",
    "fedavg_accuracy",
    "improvement_pct",
    "terminal_divergence",
    "fedprox",
    "best_mu",
    "s_tilde_subsampled",
    "s_tilde_full",
    "error",
];

fn opt_to_field(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn field_to_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| Error::BadFormat(format!("bad float {s:?}: {e}")))
}

fn fedprox_to_field(entries: &[MuAccuracy]) -> String {
    entries
        .iter()
        .map(|e| format!("{}:{}", e.mu, e.accuracy))
        .collect::<Vec<_>>()
        .join(";")
}

fn field_to_fedprox(s: &str) -> Result<Vec<MuAccuracy>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|pair| {
            let (mu, acc) = pair
                .split_once(':')
                .ok_or_else(|| Error::BadFormat(format!("bad fedprox entry {pair:?}")))?;
            Ok(MuAccuracy {
                mu: mu
                    .parse()
                    .map_err(|e| Error::BadFormat(format!("bad mu {mu:?}: {e}")))?,
                accuracy: acc
                    .parse()
                    .map_err(|e| Error::BadFormat(format!("bad accuracy {acc:?}: {e}")))?,
            })
        })
        .collect()
}

fn row_to_record(row: &RunRow) -> Vec<String> {
    vec![
        row.scenario.name().to_string(),
        row.seed.to_string(),
        format!("{}", row.level),
        opt_to_field(row.s_tilde),
        opt_to_field(row.wasserstein),
        opt_to_field(row.local_accuracy),
        opt_to_field(row.fedavg_accuracy),
        opt_to_field(row.improvement_pct),
        opt_to_field(row.terminal_divergence),
        fedprox_to_field(&row.fedprox),
        opt_to_field(row.best_mu),
        opt_to_field(row.s_tilde_subsampled),
        opt_to_field(row.s_tilde_full),
        row.error.clone().unwrap_or_default(),
    ]
}

fn record_to_row(record: &csv::StringRecord) -> Result<RunRow> {
    if record.len() != ROW_HEADER.len() {
        return Err(Error::BadFormat(format!(
            "row with {} fields, expected {}",
            record.len(),
            ROW_HEADER.len()
        )));
    }
    Ok(RunRow {
        scenario: record[0].parse()?,
        seed: record[1]
            .parse()
            .map_err(|e| Error::BadFormat(format!("bad seed {:?}: {e}", &record[1])))?,
        level: record[2]
            .parse()
            .map_err(|e| Error::BadFormat(format!("bad level {:?}: {e}", &record[2])))?,
        s_tilde: field_to_opt(&record[3])?,
        wasserstein: field_to_opt(&record[4])?,
        local_accuracy: field_to_opt(&record[5])?,
        fedavg_accuracy: field_to_opt(&record[6])?,
        improvement_pct: field_to_opt(&record[7])?,
        terminal_divergence: field_to_opt(&record[8])?,
        fedprox: field_to_fedprox(&record[9])?,
        best_mu: field_to_opt(&record[10])?,
        s_tilde_subsampled: field_to_opt(&record[11])?,
        s_tilde_full: field_to_opt(&record[12])?,
        error: if record[13].is_empty() {
            None
        } else {
            Some(record[13].to_string())
        },
    })
}

/// Append rows, writing the header when the file does not exist yet.
pub fn append_rows_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    let fresh = !path.exists();
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(ROW_HEADER)?;
    }
    for row in rows {
        w.write_record(row_to_record(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(ROW_HEADER.iter().copied()) {
        return Err(Error::BadFormat(format!(
            "{}: unexpected rows header",
            path.display()
        )));
    }
    r.records()
        .map(|rec| record_to_row(&rec?))
        .collect::<Result<Vec<_>>>()
}

/// Reload an experiment result from its rows CSV, recomputing aggregates.
pub fn result_from_rows_csv(path: &Path) -> Result<ExperimentResult> {
    let rows = read_rows_csv(path)?;
    let scenario = rows
        .first()
        .map(|r| r.scenario)
        .ok_or_else(|| Error::BadFormat(format!("{}: no rows", path.display())))?;
    Ok(ExperimentResult::from_rows(scenario, rows))
}

/// Long-format CSV with the figure axes: x = s_tilde, y = % improvement,
/// one series per algorithm.
fn write_plot_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "seed", "level", "s_tilde", "improvement_pct"])?;
    for row in &result.rows {
        if let (Some(s), Some(imp)) = (row.s_tilde, row.improvement_pct) {
            w.write_record([
                "fedavg".to_string(),
                row.seed.to_string(),
                format!("{}", row.level),
                format!("{s}"),
                format!("{imp}"),
            ])?;
        }
        if let (Some(s), Some(local)) = (row.s_tilde, row.local_accuracy) {
            if local > 0.0 {
                for entry in &row.fedprox {
                    let imp = 100.0 * (entry.accuracy - local) / local;
                    w.write_record([
                        format!("fedprox_mu={:.2e}", entry.mu),
                        row.seed.to_string(),
                        format!("{}", row.level),
                        format!("{s}"),
                        format!("{imp}"),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_markdown(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# Experiment report: {}\n\nschema version: {}\n\n",
        result.scenario.name(),
        result.schema_version
    ));
    out.push_str(&format!(
        "rows: {} ({} failed)\n\n",
        result.rows.len(),
        result.failed_rows()
    ));

    out.push_str("## Aggregates\n\n");
    let agg = &result.aggregates;
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    out.push_str(&format!(
        "- Spearman(s_tilde, improvement): {}\n",
        fmt_opt(agg.spearman_s_vs_improvement)
    ));
    out.push_str(&format!(
        "- Spearman(s_tilde, terminal divergence): {}\n",
        fmt_opt(agg.spearman_s_vs_divergence)
    ));
    out.push_str(&format!(
        "- Spearman(wasserstein, terminal divergence): {}\n",
        fmt_opt(agg.spearman_wasserstein_vs_divergence)
    ));
    out.push_str(&format!(
        "- Spearman(s_tilde, best mu): {}\n\n",
        fmt_opt(agg.spearman_s_vs_best_mu)
    ));

    out.push_str("## Threshold confusion\n\n");
    out.push_str("| band | improved | worsened |\n|---|---|---|\n");
    let c = &agg.confusion;
    out.push_str(&format!(
        "| beneficial (s <= 0.2) | {} | {} |\n",
        c.beneficial_improved, c.beneficial_worsened
    ));
    out.push_str(&format!(
        "| uncertain (0.2 < s < 0.3) | {} | {} |\n",
        c.uncertain_improved, c.uncertain_worsened
    ));
    out.push_str(&format!(
        "| detrimental (s >= 0.3) | {} | {} |\n\n",
        c.detrimental_improved, c.detrimental_worsened
    ));

    out.push_str("## Rows\n\n");
    out.push_str("| seed | level | s_tilde | improvement % | divergence | best mu |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for row in &result.rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            row.seed,
            row.level,
            fmt_opt(row.s_tilde),
            fmt_opt(row.improvement_pct),
            fmt_opt(row.terminal_divergence),
            fmt_opt(row.best_mu),
        ));
    }

    let mut f = File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Write the result in the requested format; returns the created paths.
pub fn emit_report(
    result: &ExperimentResult,
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() {
        return Err(Error::InvalidInput("refusing to emit an empty result".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut paths = Vec::new();
    match format {
        ReportFormat::Csv => {
            let rows_path = out_dir.join("rows.csv");
            if rows_path.exists() {
                std::fs::remove_file(&rows_path)?;
            }
            append_rows_csv(&rows_path, &result.rows)?;
            paths.push(rows_path);
            let plot_path = out_dir.join("plot_long.csv");
            write_plot_csv(result, &plot_path)?;
            paths.push(plot_path);
        }
        ReportFormat::Json => {
            let path = out_dir.join("result.json");
            let mut f = File::create(&path)?;
            f.write_all(serde_json::to_string_pretty(result)?.as_bytes())?;
            paths.push(path);
        }
        ReportFormat::Markdown => {
            let path = out_dir.join("report.md");
            write_markdown(result, &path)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_result() -> ExperimentResult {
        let mut row1 = RunRow::empty(Scenario::OverlapSweep, 3, 0.25);
        row1.s_tilde = Some(0.123456789012345);
        row1.wasserstein = Some(4.2);
        row1.local_accuracy = Some(0.9);
        row1.fedavg_accuracy = Some(0.95);
        row1.improvement_pct = Some(100.0 * (0.95 - 0.9) / 0.9);
        row1.terminal_divergence = Some(0.4);
        let mut row2 = RunRow::empty(Scenario::OverlapSweep, 3, 0.75);
        row2.s_tilde = Some(0.31);
        row2.improvement_pct = Some(-3.0);
        row2.local_accuracy = Some(0.8);
        row2.fedprox = vec![
            MuAccuracy { mu: 1e-6, accuracy: 0.91 },
            MuAccuracy { mu: 5.0, accuracy: 0.85 },
        ];
        row2.best_mu = Some(1e-6);
        let mut row3 = RunRow::empty(Scenario::OverlapSweep, 4, 0.25);
        row3.error = Some("synthetic failure, with a comma".into());
        ExperimentResult::from_rows(Scenario::OverlapSweep, vec![row1, row2, row3])
    }

    #[test]
    fn rows_csv_round_trips_exactly() {
        let result = sample_result();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&result, ReportFormat::Csv, dir.path()).unwrap();
        let back = result_from_rows_csv(&paths[0]).unwrap();
        assert_eq!(result, back);
    }

    #[test]
    fn json_contains_schema_version() {
        let result = sample_result();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&result, ReportFormat::Json, dir.path()).unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(
            value["schema_version"].as_str().unwrap(),
            env!("CARGO_PKG_VERSION")
        );
        let back: ExperimentResult = serde_json::from_str(&text).unwrap();
        assert_eq!(result, back);
    }

    #[test]
    fn markdown_contains_confusion_table() {
        let result = sample_result();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&result, ReportFormat::Markdown, dir.path()).unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(text.contains("Threshold confusion"));
        assert!(text.contains("| beneficial (s <= 0.2) |"));
        assert!(text.contains("| detrimental (s >= 0.3) |"));
    }

    #[test]
    fn plot_csv_has_figure_axes() {
        let result = sample_result();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&result, ReportFormat::Csv, dir.path()).unwrap();
        let text = std::fs::read_to_string(&paths[1]).unwrap();
        assert!(text.starts_with("series,seed,level,s_tilde,improvement_pct"));
        assert!(text.contains("fedavg"));
        assert!(text.contains("fedprox_mu="));
    }

    #[test]
    fn empty_result_refused() {
        let result = ExperimentResult::from_rows(Scenario::OverlapSweep, vec![]);
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&result, ReportFormat::Json, dir.path()).is_err());
    }
}
