//! Report files: `report.json` plus CSV tables, and a markdown rendering.
//!
//! | file                 | columns                                                     |
//! |----------------------|-------------------------------------------------------------|
//! | `losses.csv`         | `iteration,recipe,test_loss,fold,subset`                    |
//! | `summary.csv`        | `statistic,classic,pooled` (eight rows)                     |
//! | `feature_scores.csv` | `feature,classic,pooled,relevant_classic,relevant_pooled`   |
//! | `boxplot.csv`        | `recipe,min,q25,median,q75,max`                             |
//!
//! Numbers are written in Rust's shortest round-trip form, so identical
//! reports produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::ExperimentReport;
use crate::selection::Recipe;
use crate::stats::SummaryStats;

pub const REPORT_JSON: &str = "report.json";
pub const LOSSES_CSV: &str = "losses.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const FEATURE_SCORES_CSV: &str = "feature_scores.csv";
pub const BOXPLOT_CSV: &str = "boxplot.csv";
pub const REPORT_MD: &str = "report.md";

pub fn to_json(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Parses and validates a `report.json` document.
pub fn parse_report(bytes: &[u8]) -> Result<ExperimentReport> {
    let report: ExperimentReport = serde_json::from_slice(bytes)?;
    report.validate()?;
    Ok(report)
}

pub fn load_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_report(&bytes)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn losses_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("iteration,recipe,test_loss,fold,subset\n");
    for it in &report.iterations {
        for recipe in Recipe::BOTH {
            let c = it.choice(recipe);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                it.index,
                recipe,
                c.test_loss,
                c.fold,
                csv_field(&c.subset_names)
            );
        }
    }
    out
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("statistic,classic,pooled\n");
    let classic = report.summary.classic.values();
    let pooled = report.summary.pooled.values();
    for (i, label) in SummaryStats::LABELS.iter().enumerate() {
        let _ = writeln!(out, "{label},{},{}", classic[i], pooled[i]);
    }
    out
}

pub fn feature_scores_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("feature,classic,pooled,relevant_classic,relevant_pooled\n");
    for row in &report.feature_scores {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&row.name),
            row.classic,
            row.pooled,
            row.relevant_classic,
            row.relevant_pooled
        );
    }
    out
}

pub fn boxplot_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("recipe,min,q25,median,q75,max\n");
    for recipe in Recipe::BOTH {
        let s = report.summary.get(recipe);
        let _ = writeln!(
            out,
            "{recipe},{},{},{},{},{}",
            s.min, s.q25, s.median, s.q75, s.max
        );
    }
    out
}

/// Human-readable tables: test-loss summary, rank-sum comparison, subset
/// counts and feature scores.
pub fn markdown(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let cfg = &report.config;
    let _ = writeln!(out, "# Model selection report\n");
    let _ = writeln!(
        out,
        "{} iterations, {} folds, test fraction {}, subsets up to size {}, C = {}, seed {}.\n",
        cfg.iterations,
        cfg.folds,
        cfg.test_fraction,
        cfg.max_subset_size,
        cfg.train.box_constraint,
        cfg.master_seed
    );
    let _ = writeln!(out, "## Test loss\n");
    let _ = writeln!(out, "| Statistic | Classic | Pooled |");
    let _ = writeln!(out, "|---|---:|---:|");
    let names = [
        "Max",
        "75th quantile",
        "Median",
        "25th quantile",
        "Min",
        "Mean",
        "Interquartile range",
        "Standard deviation",
    ];
    let c = report.summary.classic.values();
    let p = report.summary.pooled.values();
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(out, "| {name} | {:.2} | {:.2} |", c[i], p[i]);
    }
    let u = &report.utest;
    let _ = writeln!(
        out,
        "\nMann-Whitney U = {}, z = {:.3}, p = {:.3} ({}).\n",
        u.u,
        u.z,
        u.p_two_sided,
        if u.significant {
            "significant"
        } else {
            "not significant"
        }
    );
    let _ = writeln!(
        out,
        "Unique selected subsets: classic {}, pooled {}.\n",
        report.unique_subset_counts.classic, report.unique_subset_counts.pooled
    );
    let _ = writeln!(out, "## Feature scores\n");
    let _ = writeln!(out, "| Feature | Classic | Pooled | All train |");
    let _ = writeln!(out, "|---|---:|---:|---:|");
    let mark = |v: f64, rel: bool| {
        if rel {
            format!("**{v:.2}**")
        } else {
            format!("{v:.2}")
        }
    };
    for row in &report.feature_scores {
        let _ = writeln!(
            out,
            "| {} | {} | {} | |",
            row.name,
            mark(row.classic, row.relevant_classic),
            mark(row.pooled, row.relevant_pooled)
        );
    }
    if report.flags.not_converged_cells + report.flags.degenerate_cells > 0 {
        let _ = writeln!(
            out,
            "\nWarning: {} loss-table cells hit the solver iteration cap, {} had a single-class training partition.",
            report.flags.not_converged_cells, report.flags.degenerate_cells
        );
    }
    out
}

/// `(file name, contents)` for every CSV table.
pub fn csv_tables(report: &ExperimentReport) -> Vec<(&'static str, String)> {
    vec![
        (LOSSES_CSV, losses_csv(report)),
        (SUMMARY_CSV, summary_csv(report)),
        (FEATURE_SCORES_CSV, feature_scores_csv(report)),
        (BOXPLOT_CSV, boxplot_csv(report)),
    ]
}

fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Writes `report.json` and the CSV tables into `dir`, creating it if
/// needed. Returns the written paths.
pub fn emit_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files = vec![(REPORT_JSON, to_json(report)?)];
    files.extend(csv_tables(report));
    write_all(dir.as_ref(), &files)
}

/// Writes the CSV tables and `report.md` for an existing report.
pub fn render_tables(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files = csv_tables(report);
    files.push((REPORT_MD, markdown(report)));
    write_all(dir.as_ref(), &files)
}

/// Names of every file [`emit_report`] or [`render_tables`] may write.
pub fn output_file_names() -> [&'static str; 6] {
    [
        REPORT_JSON,
        LOSSES_CSV,
        SUMMARY_CSV,
        FEATURE_SCORES_CSV,
        BOXPLOT_CSV,
        REPORT_MD,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a+b"), "a+b");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
    }

    #[test]
    fn garbage_json_is_rejected() {
        assert!(parse_report(b"{").is_err());
        assert!(parse_report(b"{}").is_err());
        assert!(parse_report(&[0xff, 0xfe]).is_err());
    }
}
