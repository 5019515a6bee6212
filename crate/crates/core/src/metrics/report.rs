//! Markdown tables and CSV files for a set of runs over one dataset.
//!
//! CSV schemas (`report.csv` unless noted):
//! - winobias, winocontrol: `model,method,pro,anti,delta,con,both_correct,con_excluded,parse_failures,items`
//! - bbq: `model,method,category,accuracy,parse_failures,items`
//! - alice, generic: `model,method,accuracy,parse_failures,items`
//! - winocontrol `heatmap.csv`: `model,method,l_level,q_level,accuracy,count`
//! - with a baseline, winocontrol `improvement.csv`:
//!   `model,method,baseline,l_level,q_level,improvement`
//! - with a baseline, `tokens.csv`:
//!   `model,method,mean_completion_tokens,accuracy,accuracy_delta,missing_counts`

use std::fmt::Write as _;

use crate::bench::{dataset_digest, BenchItem, Task};
use crate::eval::{EvalRecord, RunManifest};

use super::{
    accuracy, heatmap, improvement_grid, parse_failures, round1, token_cost, winobias_metrics,
    HeatmapGrid, MetricsError,
};

#[derive(Clone, Debug)]
pub struct ReportRun {
    /// Where the run came from, for error messages.
    pub source: String,
    pub manifest: RunManifest,
    pub records: Vec<EvalRecord>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub markdown: String,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

fn md_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut s = format!("| {} |\n", headers.join(" | "));
    let _ = writeln!(
        s,
        "|{}|",
        headers.iter().map(|_| "---").collect::<Vec<_>>().join("|")
    );
    for r in rows {
        let _ = writeln!(s, "| {} |", r.join(" | "));
    }
    s
}

fn pct(x: f64) -> String {
    format!("{:.1}", round1(x))
}

struct Csv(csv::Writer<Vec<u8>>);

impl Csv {
    fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Self(w)
    }

    fn row(&mut self, fields: Vec<String>) {
        self.0.write_record(&fields).expect("in-memory write");
    }

    fn finish(self) -> String {
        String::from_utf8(self.0.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Column order for BBQ categories: Age, Nationality, Religion, then the rest.
fn bbq_categories(items: &[BenchItem]) -> Vec<String> {
    let mut cats: Vec<String> = items
        .iter()
        .filter_map(|i| i.meta_str("category").map(String::from))
        .collect();
    cats.sort();
    cats.dedup();
    let rank = |c: &str| match c {
        "Age" => 0,
        "Nationality" => 1,
        "Religion" => 2,
        _ => 3,
    };
    cats.sort_by_key(|c| rank(c));
    cats
}

fn bbq_header(c: &str) -> String {
    match c {
        "Nationality" => "Nat.".into(),
        "Religion" => "Rel.".into(),
        other => other.into(),
    }
}

fn check_digest(run: &ReportRun, expected: &str) -> Result<(), MetricsError> {
    if run.manifest.dataset_digest != expected {
        return Err(MetricsError::DigestMismatch(format!(
            "run `{}` was made on dataset {}, but the items file has digest {expected}",
            run.source, run.manifest.dataset_digest
        )));
    }
    Ok(())
}

fn grid_md(title: &str, grid: &[[f64; 3]; 3]) -> String {
    let headers: Vec<String> = ["", "q0", "q1", "q2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = (0..3)
        .map(|l| {
            let mut r = vec![format!("L{l}")];
            r.extend(grid[l].iter().map(|&x| pct(x)));
            r
        })
        .collect();
    format!("{title}\n\n{}", md_table(&headers, &rows))
}

pub fn build_report(
    task: Task,
    items: &[BenchItem],
    runs: &[ReportRun],
    baseline: Option<&ReportRun>,
) -> Result<Report, MetricsError> {
    if items.is_empty() || runs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let digest = dataset_digest(items);
    for r in runs.iter().chain(baseline) {
        check_digest(r, &digest)?;
    }
    let label = |r: &ReportRun| vec![r.manifest.model.clone(), r.manifest.kind.to_string()];
    let mut report = Report::default();
    let n = items.len().to_string();

    match task {
        Task::Winobias | Task::Winocontrol => {
            let headers: Vec<String> = ["Model", "Method", "Pro", "Anti", "Delta", "Con"]
                .map(String::from)
                .to_vec();
            let mut csv = Csv::new(&[
                "model",
                "method",
                "pro",
                "anti",
                "delta",
                "con",
                "both_correct",
                "con_excluded",
                "parse_failures",
                "items",
            ]);
            let mut rows = Vec::new();
            for r in runs {
                let m = winobias_metrics(&r.records, items)?;
                let mut row = label(r);
                row.extend([pct(m.pro), pct(m.anti), pct(m.delta), pct(m.con)]);
                rows.push(row);
                let mut c = label(r);
                c.extend([
                    pct(m.pro),
                    pct(m.anti),
                    pct(m.delta),
                    pct(m.con),
                    pct(m.both_correct),
                    m.con_excluded.to_string(),
                    parse_failures(&r.records, items)?.to_string(),
                    n.clone(),
                ]);
                csv.row(c);
            }
            report.markdown = md_table(&headers, &rows);
            report.files.push(("report.csv".into(), csv.finish()));
        }
        Task::Bbq => {
            let cats = bbq_categories(items);
            let mut headers: Vec<String> = vec!["Model".into(), "Method".into()];
            headers.extend(cats.iter().map(|c| bbq_header(c)));
            let mut csv = Csv::new(&[
                "model",
                "method",
                "category",
                "accuracy",
                "parse_failures",
                "items",
            ]);
            let mut rows = Vec::new();
            for r in runs {
                let mut row = label(r);
                for c in &cats {
                    let subset: Vec<BenchItem> = items
                        .iter()
                        .filter(|i| i.meta_str("category") == Some(c))
                        .cloned()
                        .collect();
                    let acc = accuracy(&r.records, &subset)?;
                    row.push(pct(acc));
                    let mut line = label(r);
                    line.extend([
                        c.clone(),
                        pct(acc),
                        parse_failures(&r.records, &subset)?.to_string(),
                        subset.len().to_string(),
                    ]);
                    csv.row(line);
                }
                rows.push(row);
            }
            report.markdown = md_table(&headers, &rows);
            report.files.push(("report.csv".into(), csv.finish()));
        }
        Task::Alice | Task::Generic => {
            let headers: Vec<String> = ["Model", "Method", "Accuracy", "Parse failures"]
                .map(String::from)
                .to_vec();
            let mut csv = Csv::new(&["model", "method", "accuracy", "parse_failures", "items"]);
            let mut rows = Vec::new();
            for r in runs {
                let acc = accuracy(&r.records, items)?;
                let fails = parse_failures(&r.records, items)?.to_string();
                let mut row = label(r);
                row.extend([pct(acc), fails.clone()]);
                rows.push(row);
                let mut c = label(r);
                c.extend([pct(acc), fails, n.clone()]);
                csv.row(c);
            }
            report.markdown = md_table(&headers, &rows);
            report.files.push(("report.csv".into(), csv.finish()));
        }
    }

    if task == Task::Winocontrol {
        let mut csv = Csv::new(&["model", "method", "l_level", "q_level", "accuracy", "count"]);
        let base_grid: Option<HeatmapGrid> =
            baseline.map(|b| heatmap(&b.records, items)).transpose()?;
        let mut improvement = Csv::new(&[
            "model",
            "method",
            "baseline",
            "l_level",
            "q_level",
            "improvement",
        ]);
        for r in runs {
            let g = heatmap(&r.records, items)?;
            for l in 0..3 {
                for q in 0..3 {
                    let mut row = label(r);
                    row.extend([
                        l.to_string(),
                        q.to_string(),
                        pct(g.accuracy[l][q]),
                        g.counts[l][q].to_string(),
                    ]);
                    csv.row(row);
                }
            }
            let _ = write!(
                report.markdown,
                "\n{}",
                grid_md(
                    &format!(
                        "Accuracy by cell, {} / {}",
                        r.manifest.model, r.manifest.kind
                    ),
                    &g.accuracy
                )
            );
            if let (Some(bg), Some(b)) = (&base_grid, baseline) {
                let d = improvement_grid(&g, bg)?;
                for (l, cells) in d.iter().enumerate() {
                    for (q, &x) in cells.iter().enumerate() {
                        let mut row = label(r);
                        row.extend([
                            b.manifest.kind.to_string(),
                            l.to_string(),
                            q.to_string(),
                            pct(x),
                        ]);
                        improvement.row(row);
                    }
                }
                let _ = write!(
                    report.markdown,
                    "\n{}",
                    grid_md(
                        &format!(
                            "Improvement over {}, {} / {}",
                            b.manifest.kind, r.manifest.model, r.manifest.kind
                        ),
                        &d
                    )
                );
            }
        }
        report.files.push(("heatmap.csv".into(), csv.finish()));
        if baseline.is_some() {
            report
                .files
                .push(("improvement.csv".into(), improvement.finish()));
        }
    }

    if let Some(b) = baseline {
        let per_run: Vec<_> = runs
            .iter()
            .map(|r| (r.manifest.kind, r.records.clone()))
            .collect();
        let s = token_cost(&per_run, &b.records, items)?;
        let mut csv = Csv::new(&[
            "model",
            "method",
            "mean_completion_tokens",
            "accuracy",
            "accuracy_delta",
            "missing_counts",
        ]);
        for (r, row) in runs.iter().zip(&s.rows) {
            let mut c = label(r);
            c.extend([
                row.mean_completion_tokens
                    .map_or(String::new(), |m| format!("{m:.1}")),
                pct(row.accuracy),
                pct(row.accuracy_delta),
                row.missing_counts.to_string(),
            ]);
            csv.row(c);
        }
        report.files.push(("tokens.csv".into(), csv.finish()));
    }
    Ok(report)
}
