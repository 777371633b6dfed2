//! Delimited text files for plotting: hit rates, similarity CDFs and
//! learned weights.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::simulate::ExperimentReport;
use crate::stats::{ecdf, mean};
use crate::EvalError;

/// Paths written by [`write_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub runs: PathBuf,
    pub hit_rates: PathBuf,
    pub summary: PathBuf,
    pub similarity_cdf: PathBuf,
    pub weights: PathBuf,
}

fn uplift_cell(u: Option<f64>) -> String {
    u.map_or_else(|| "NA".into(), |u| format!("{u:.6}"))
}

pub fn hit_rate_table(reports: &[ExperimentReport]) -> String {
    let mut s = String::from("seed\tmethod\treviewed\ttp\tfp\ttp_fraction\tfp_fraction\n");
    for r in reports {
        for (method, reviewed, tp, fp) in [
            ("genetic", r.reviewed_genetic, r.tp_genetic, r.fp_genetic),
            ("baseline", r.reviewed_baseline, r.tp_baseline, r.fp_baseline),
        ] {
            let hits = (tp * reviewed as f64).round() as usize;
            let _ = writeln!(
                s,
                "{}\t{method}\t{reviewed}\t{hits}\t{}\t{tp:.6}\t{fp:.6}",
                r.seed,
                reviewed - hits
            );
        }
    }
    s
}

pub fn summary_table(reports: &[ExperimentReport]) -> String {
    let mut s = String::from("seed\tfeedback\thidden_found\thidden_total\ttrainings\tuplift\tks_statistic\tmean_positive\tmean_negative\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.seed,
            r.feedback_used,
            r.hidden_found,
            r.hidden_total,
            r.trainings.len(),
            uplift_cell(r.uplift),
            r.ks_statistic,
            mean(&r.positive_scores),
            mean(&r.negative_scores)
        );
    }
    s
}

pub fn cdf_table(reports: &[ExperimentReport]) -> String {
    let mut s = String::from("seed\tlabel\tscore\tcdf\n");
    let mut pooled: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let emit = |s: &mut String, seed: &str, label: &str, sample: &[f64]| {
        for (x, p) in ecdf(sample) {
            let _ = writeln!(s, "{seed}\t{label}\t{x:.9}\t{p:.6}");
        }
    };
    for r in reports {
        emit(&mut s, &r.seed.to_string(), "positive", &r.positive_scores);
        emit(&mut s, &r.seed.to_string(), "negative", &r.negative_scores);
        pooled[0].extend(&r.positive_scores);
        pooled[1].extend(&r.negative_scores);
    }
    emit(&mut s, "all", "positive", &pooled[0]);
    emit(&mut s, "all", "negative", &pooled[1]);
    s
}

/// One row per run plus a `mean` row, columns in metric-name order.
pub fn weight_table(reports: &[ExperimentReport]) -> String {
    let names: Vec<&String> = reports.first().map(|r| r.final_weights.keys().collect()).unwrap_or_default();
    let mut s = String::from("seed");
    for n in &names {
        let _ = write!(s, "\t{n}");
    }
    s.push('\n');
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for r in reports {
        let _ = write!(s, "{}", r.seed);
        for n in &names {
            let w = r.final_weights.get(*n).copied().unwrap_or(0.0);
            *sums.entry(n.as_str()).or_default() += w;
            let _ = write!(s, "\t{w:.9}");
        }
        s.push('\n');
    }
    if !reports.is_empty() {
        s.push_str("mean");
        for n in &names {
            let _ = write!(s, "\t{:.9}", sums[n.as_str()] / reports.len() as f64);
        }
        s.push('\n');
    }
    s
}

pub fn write_report(out_dir: &Path, reports: &[ExperimentReport]) -> Result<ReportFiles, EvalError> {
    fs::create_dir_all(out_dir).map_err(|source| EvalError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let files = ReportFiles {
        runs: out_dir.join("runs.json"),
        hit_rates: out_dir.join("hit_rates.tsv"),
        summary: out_dir.join("summary.tsv"),
        similarity_cdf: out_dir.join("similarity_cdf.tsv"),
        weights: out_dir.join("weights.tsv"),
    };
    let write = |path: &Path, text: String| {
        fs::write(path, text).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    write(&files.runs, serde_json::to_string_pretty(reports).expect("serialisable") + "\n")?;
    write(&files.hit_rates, hit_rate_table(reports))?;
    write(&files.summary, summary_table(reports))?;
    write(&files.similarity_cdf, cdf_table(reports))?;
    write(&files.weights, weight_table(reports))?;
    Ok(files)
}
