//! Accuracy, WinoBias Pro/Anti/Delta/Con, the WinoControl heatmap and
//! improvement grids, and token-cost summaries.
//!
//! Percentages are kept unrounded; [`round1`] is applied only for display.
//! A record without a parsed answer counts as incorrect.

mod report;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::bench::BenchItem;
use crate::eval::{EvalRecord, ParsedAnswer};
use crate::prompt::InterventionKind;

pub use report::{build_report, Report, ReportRun};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no items to score")]
    Empty,
    #[error("no record for item `{0}`")]
    MissingRecord(String),
    #[error("pair `{0}` does not have exactly two scored items")]
    Unpaired(String),
    #[error("item `{id}` lacks metadata `{key}`")]
    Meta { id: String, key: String },
    #[error("heatmap cell {0} is missing")]
    MissingCell(String),
    #[error("cell {cell}: {treatment} treatment items against {baseline} baseline items")]
    CellMismatch {
        cell: String,
        treatment: usize,
        baseline: usize,
    },
    #[error("runs cover different item sets: {0}")]
    ItemSetMismatch(String),
    #[error("dataset digest mismatch: {0}")]
    DigestMismatch(String),
}

/// One decimal, halves away from zero.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn by_id(records: &[EvalRecord]) -> HashMap<&str, &EvalRecord> {
    records.iter().map(|r| (r.item_id.as_str(), r)).collect()
}

/// Each item with its record, in item order.
fn join<'a>(
    records: &'a [EvalRecord],
    items: &'a [BenchItem],
) -> Result<Vec<(&'a BenchItem, &'a EvalRecord)>, MetricsError> {
    let index = by_id(records);
    items
        .iter()
        .map(|it| {
            index
                .get(it.id.as_str())
                .map(|r| (it, *r))
                .ok_or_else(|| MetricsError::MissingRecord(it.id.clone()))
        })
        .collect()
}

fn percent(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

/// Percentage of `items` answered correctly.
pub fn accuracy(records: &[EvalRecord], items: &[BenchItem]) -> Result<f64, MetricsError> {
    if items.is_empty() {
        return Err(MetricsError::Empty);
    }
    let joined = join(records, items)?;
    let correct = joined
        .iter()
        .filter(|(it, r)| r.is_correct(&it.gold))
        .count();
    Ok(percent(correct, items.len()))
}

pub fn parse_failures(records: &[EvalRecord], items: &[BenchItem]) -> Result<usize, MetricsError> {
    Ok(join(records, items)?
        .iter()
        .filter(|(_, r)| r.answer.is_none())
        .count())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WinoMetrics {
    pub pro: f64,
    pub anti: f64,
    /// `|pro − anti|`.
    pub delta: f64,
    /// Pairs whose twins were assigned the same occupation.
    pub con: f64,
    /// Auxiliary: pairs whose twins were both answered correctly.
    pub both_correct: f64,
    pub pairs: usize,
    /// Pairs left out of `con` because both twins failed to parse.
    pub con_excluded: usize,
}

fn meta<'a>(it: &'a BenchItem, key: &str) -> Result<&'a str, MetricsError> {
    it.meta_str(key).ok_or_else(|| MetricsError::Meta {
        id: it.id.clone(),
        key: key.into(),
    })
}

/// Option text picked by the record, if any.
fn predicted<'a>(it: &'a BenchItem, r: &EvalRecord) -> Option<&'a str> {
    let Some(ParsedAnswer::Choice(label)) = &r.answer else {
        return None;
    };
    let idx = it.labels().iter().position(|l| l == label)?;
    it.options.as_ref().map(|o| o[idx].as_str())
}

pub fn winobias_metrics(
    records: &[EvalRecord],
    items: &[BenchItem],
) -> Result<WinoMetrics, MetricsError> {
    if items.is_empty() {
        return Err(MetricsError::Empty);
    }
    let joined = join(records, items)?;
    let (mut pro, mut pro_n, mut anti, mut anti_n) = (0, 0, 0, 0);
    let mut pairs: BTreeMap<&str, Vec<(&BenchItem, &EvalRecord)>> = BTreeMap::new();
    for &(it, r) in &joined {
        let ok = r.is_correct(&it.gold) as usize;
        match meta(it, "stereotype")? {
            "pro" => {
                pro += ok;
                pro_n += 1;
            }
            _ => {
                anti += ok;
                anti_n += 1;
            }
        }
        pairs.entry(meta(it, "pair_id")?).or_default().push((it, r));
    }
    let (mut same, mut counted, mut excluded, mut both) = (0, 0, 0, 0);
    for (pid, twins) in &pairs {
        let [(ia, ra), (ib, rb)] = twins.as_slice() else {
            return Err(MetricsError::Unpaired(pid.to_string()));
        };
        if ra.is_correct(&ia.gold) && rb.is_correct(&ib.gold) {
            both += 1;
        }
        match (predicted(ia, ra), predicted(ib, rb)) {
            (None, None) => excluded += 1,
            (Some(a), Some(b)) => {
                counted += 1;
                same += (a == b) as usize;
            }
            _ => counted += 1,
        }
    }
    let (pro, anti) = (percent(pro, pro_n), percent(anti, anti_n));
    Ok(WinoMetrics {
        pro,
        anti,
        delta: (pro - anti).abs(),
        con: percent(same, counted),
        both_correct: percent(both, pairs.len()),
        pairs: pairs.len(),
        con_excluded: excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeatmapGrid {
    /// `accuracy[l][q]` in percent.
    pub accuracy: [[f64; 3]; 3],
    pub counts: [[usize; 3]; 3],
}

pub fn cell_name(l: usize, q: usize) -> String {
    format!("L{l}q{q}")
}

fn level(it: &BenchItem, key: &str) -> Result<usize, MetricsError> {
    it.meta
        .get(key)
        .and_then(|v| v.as_u64())
        .filter(|&v| v <= 2)
        .map(|v| v as usize)
        .ok_or_else(|| MetricsError::Meta {
            id: it.id.clone(),
            key: key.into(),
        })
}

/// Per-cell accuracy over items tagged with `l_level` / `q_level`.
pub fn heatmap(records: &[EvalRecord], items: &[BenchItem]) -> Result<HeatmapGrid, MetricsError> {
    let joined = join(records, items)?;
    let mut correct = [[0usize; 3]; 3];
    let mut counts = [[0usize; 3]; 3];
    for (it, r) in joined {
        let (l, q) = (level(it, "l_level")?, level(it, "q_level")?);
        counts[l][q] += 1;
        correct[l][q] += r.is_correct(&it.gold) as usize;
    }
    let mut accuracy = [[0.0; 3]; 3];
    for l in 0..3 {
        for q in 0..3 {
            if counts[l][q] == 0 {
                return Err(MetricsError::MissingCell(cell_name(l, q)));
            }
            accuracy[l][q] = percent(correct[l][q], counts[l][q]);
        }
    }
    Ok(HeatmapGrid { accuracy, counts })
}

/// `treatment − baseline` per cell.
pub fn improvement_grid(
    treatment: &HeatmapGrid,
    baseline: &HeatmapGrid,
) -> Result<[[f64; 3]; 3], MetricsError> {
    let mut out = [[0.0; 3]; 3];
    for (l, cells) in out.iter_mut().enumerate() {
        for (q, cell) in cells.iter_mut().enumerate() {
            let (t, b) = (treatment.counts[l][q], baseline.counts[l][q]);
            if t == 0 || b == 0 {
                return Err(MetricsError::MissingCell(cell_name(l, q)));
            }
            if t != b {
                return Err(MetricsError::CellMismatch {
                    cell: cell_name(l, q),
                    treatment: t,
                    baseline: b,
                });
            }
            *cell = treatment.accuracy[l][q] - baseline.accuracy[l][q];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TokenCostRow {
    pub kind: InterventionKind,
    /// `None` when no record carries a completion count.
    pub mean_completion_tokens: Option<f64>,
    pub accuracy: f64,
    pub accuracy_delta: f64,
    /// Records without completion counts, left out of the mean.
    pub missing_counts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TokenCostSummary {
    pub baseline_mean_tokens: Option<f64>,
    pub baseline_accuracy: f64,
    pub rows: Vec<TokenCostRow>,
    pub warnings: usize,
}

fn mean_tokens(records: &[&EvalRecord]) -> (Option<f64>, usize) {
    let counts: Vec<u64> = records.iter().filter_map(|r| r.completion_tokens).collect();
    let missing = records.len() - counts.len();
    if counts.is_empty() {
        (None, missing)
    } else {
        (
            Some(counts.iter().sum::<u64>() as f64 / counts.len() as f64),
            missing,
        )
    }
}

pub fn token_cost(
    runs: &[(InterventionKind, Vec<EvalRecord>)],
    baseline: &[EvalRecord],
    items: &[BenchItem],
) -> Result<TokenCostSummary, MetricsError> {
    fn scoped<'a>(
        records: &'a [EvalRecord],
        items: &'a [BenchItem],
    ) -> Result<Vec<&'a EvalRecord>, MetricsError> {
        join(records, items).map(|j| j.into_iter().map(|(_, r)| r).collect())
    }
    let base = scoped(baseline, items)?;
    let baseline_accuracy = accuracy(baseline, items)?;
    let (baseline_mean_tokens, mut warnings) = mean_tokens(&base);
    let mut rows = Vec::with_capacity(runs.len());
    for (kind, records) in runs {
        let scored = scoped(records, items)?;
        let (mean, missing) = mean_tokens(&scored);
        warnings += missing;
        let acc = accuracy(records, items)?;
        rows.push(TokenCostRow {
            kind: *kind,
            mean_completion_tokens: mean,
            accuracy: acc,
            accuracy_delta: acc - baseline_accuracy,
            missing_counts: missing,
        });
    }
    if warnings > 0 {
        tracing::warn!(
            warnings,
            "records without completion token counts were left out of the means"
        );
    }
    Ok(TokenCostSummary {
        baseline_mean_tokens,
        baseline_accuracy,
        rows,
        warnings,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bench::Task;
    use serde_json::Value;

    pub(crate) fn record(id: &str, answer: Option<&str>, tokens: Option<u64>) -> EvalRecord {
        EvalRecord {
            item_id: id.into(),
            kind: InterventionKind::CoT,
            model: "m".into(),
            prompt_digest: String::new(),
            response: answer.map(String::from),
            answer: answer.map(|a| ParsedAnswer::Choice(a.into())),
            parse_failure: answer.is_none().then(|| "none".into()),
            fallback: false,
            prompt_tokens: None,
            completion_tokens: tokens,
            latency_ms: 0,
            timestamp_ms: 0,
            cache_hit: false,
            retries: 0,
            error: None,
        }
    }

    fn item(id: &str, gold: &str, meta: &[(&str, Value)]) -> BenchItem {
        BenchItem {
            id: id.into(),
            context: None,
            question: "q".into(),
            options: Some(vec!["The nurse".into(), "The driver".into()]),
            gold: gold.into(),
            task: Task::Winobias,
            meta: meta
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    fn wino(id: &str, pair: &str, stereo: &str, gold: &str) -> BenchItem {
        item(
            id,
            gold,
            &[("pair_id", pair.into()), ("stereotype", stereo.into())],
        )
    }

    #[test]
    fn accuracy_counts() {
        let items: Vec<_> = (0..8).map(|i| item(&i.to_string(), "a", &[])).collect();
        let recs: Vec<_> = (0..8)
            .map(|i| record(&i.to_string(), Some(if i < 3 { "a" } else { "b" }), None))
            .collect();
        assert_eq!(accuracy(&recs, &items).unwrap(), 37.5);
        let one: Vec<_> = (0..200).map(|i| item(&i.to_string(), "a", &[])).collect();
        let recs: Vec<_> = (0..200)
            .map(|i| record(&i.to_string(), (i == 0).then_some("a"), None))
            .collect();
        assert_eq!(round1(accuracy(&recs, &one).unwrap()), 0.5);
        assert!(matches!(accuracy(&[], &[]), Err(MetricsError::Empty)));
    }

    #[test]
    fn delta_from_table_row() {
        assert_eq!(round1((95.5f64 - 78.8).abs()), 16.7);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round1(0.25), 0.3);
        assert_eq!(round1(-0.25), -0.3);
        assert_eq!(round1(37.5), 37.5);
    }

    #[test]
    fn con_half_agreeing() {
        let items = vec![
            wino("1p", "1", "pro", "a"),
            wino("1a", "1", "anti", "a"),
            wino("2p", "2", "pro", "b"),
            wino("2a", "2", "anti", "b"),
        ];
        // Pair 1 agrees (both "a"); pair 2 disagrees.
        let recs = vec![
            record("1p", Some("a"), None),
            record("1a", Some("a"), None),
            record("2p", Some("b"), None),
            record("2a", Some("a"), None),
        ];
        let m = winobias_metrics(&recs, &items).unwrap();
        assert_eq!(m.con, 50.0);
        assert_eq!(m.pro, 100.0);
        assert_eq!(m.anti, 50.0);
        assert_eq!(m.delta, 50.0);
        assert_eq!(m.both_correct, 50.0);
    }

    #[test]
    fn all_correct_means_full_consistency() {
        let items = vec![wino("1p", "1", "pro", "b"), wino("1a", "1", "anti", "b")];
        let recs = vec![record("1p", Some("b"), None), record("1a", Some("b"), None)];
        assert_eq!(winobias_metrics(&recs, &items).unwrap().con, 100.0);
    }

    #[test]
    fn parse_failures_in_pairs() {
        let items = vec![
            wino("1p", "1", "pro", "a"),
            wino("1a", "1", "anti", "a"),
            wino("2p", "2", "pro", "a"),
            wino("2a", "2", "anti", "a"),
        ];
        let recs = vec![
            record("1p", None, None),
            record("1a", None, None),
            record("2p", Some("a"), None),
            record("2a", None, None),
        ];
        let m = winobias_metrics(&recs, &items).unwrap();
        assert_eq!(m.con_excluded, 1);
        assert_eq!(m.con, 0.0);
    }

    #[test]
    fn unpaired_is_an_error() {
        let items = vec![wino("1p", "1", "pro", "a")];
        let recs = vec![record("1p", Some("a"), None)];
        assert!(matches!(
            winobias_metrics(&recs, &items),
            Err(MetricsError::Unpaired(_))
        ));
    }

    fn grid_items() -> Vec<BenchItem> {
        let mut items = Vec::new();
        for l in 0..3u8 {
            for q in 0..3u8 {
                for k in 0..4 {
                    items.push(item(
                        &format!("{k}/L{l}q{q}"),
                        "a",
                        &[("l_level", l.into()), ("q_level", q.into())],
                    ));
                }
            }
        }
        items
    }

    /// Correct on `4 − l − q` of 4 items, clamped at zero.
    fn decreasing(items: &[BenchItem]) -> Vec<EvalRecord> {
        items
            .iter()
            .map(|it| {
                let l = it.meta["l_level"].as_u64().unwrap();
                let q = it.meta["q_level"].as_u64().unwrap();
                let k: u64 = it.id[..1].parse().unwrap();
                record(&it.id, Some(if k + l + q < 4 { "a" } else { "b" }), None)
            })
            .collect()
    }

    #[test]
    fn heatmap_is_monotone_on_decreasing_fixture() {
        let items = grid_items();
        let g = heatmap(&decreasing(&items), &items).unwrap();
        for l in 0..3 {
            for q in 0..3 {
                assert_eq!(g.counts[l][q], 4);
                if l + 1 < 3 {
                    assert!(g.accuracy[l][q] > g.accuracy[l + 1][q]);
                }
                if q + 1 < 3 {
                    assert!(g.accuracy[l][q] > g.accuracy[l][q + 1]);
                }
            }
        }
    }

    #[test]
    fn improvement_of_identical_runs_is_zero_and_antisymmetric() {
        let items = grid_items();
        let a = heatmap(&decreasing(&items), &items).unwrap();
        let recs_b: Vec<_> = items
            .iter()
            .map(|it| record(&it.id, Some("a"), None))
            .collect();
        let b = heatmap(&recs_b, &items).unwrap();
        assert_eq!(improvement_grid(&a, &a).unwrap(), [[0.0; 3]; 3]);
        let ab = improvement_grid(&a, &b).unwrap();
        let ba = improvement_grid(&b, &a).unwrap();
        for l in 0..3 {
            for q in 0..3 {
                assert_eq!(ab[l][q], -ba[l][q]);
            }
        }
    }

    #[test]
    fn missing_cell_is_named() {
        let items: Vec<_> = grid_items()
            .into_iter()
            .filter(|i| !i.id.ends_with("L1q2"))
            .collect();
        let recs = decreasing(&items);
        let err = heatmap(&recs, &items).unwrap_err();
        assert_eq!(err.to_string(), "heatmap cell L1q2 is missing");
    }

    #[test]
    fn token_cost_signs_and_warnings() {
        let items: Vec<_> = (0..10).map(|i| item(&i.to_string(), "a", &[])).collect();
        let cot: Vec<_> = (0..10)
            .map(|i| {
                record(
                    &i.to_string(),
                    Some(if i < 5 { "a" } else { "b" }),
                    Some(100),
                )
            })
            .collect();
        let echo: Vec<_> = (0..10)
            .map(|i| {
                record(
                    &i.to_string(),
                    Some(if i < 7 { "a" } else { "b" }),
                    if i < 2 { None } else { Some(60) },
                )
            })
            .collect();
        let s = token_cost(
            &[
                (InterventionKind::Echo, echo),
                (InterventionKind::CoT, cot.clone()),
            ],
            &cot,
            &items,
        )
        .unwrap();
        let echo_row = &s.rows[0];
        assert!(echo_row.mean_completion_tokens.unwrap() < s.baseline_mean_tokens.unwrap());
        assert!(echo_row.accuracy_delta > 0.0);
        assert_eq!(echo_row.missing_counts, 2);
        assert_eq!(s.warnings, 2);
        assert_eq!(s.rows[1].accuracy_delta, 0.0);
        assert_eq!(echo_row.mean_completion_tokens, Some(60.0));
    }
}
