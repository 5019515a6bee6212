//! BBQ records in the upstream JSONL field layout:
//! `{example_id, category, context, question, ans0, ans1, ans2, label, ...}`.
//! Extra upstream fields are ignored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::item::check_unique;
use super::{jsonl_lines, option_label, read_text, BenchError, BenchItem, Task};

#[derive(Clone, Debug, Deserialize)]
pub struct BbqRecord {
    pub example_id: Value,
    pub category: String,
    pub context: String,
    pub question: String,
    pub ans0: String,
    pub ans1: String,
    pub ans2: String,
    pub label: usize,
    #[serde(default)]
    pub context_condition: Option<String>,
    #[serde(default)]
    pub question_polarity: Option<String>,
}

fn id_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn category_matches(category: &str, wanted: &[String]) -> bool {
    let norm = |s: &str| s.to_ascii_lowercase().replace(['_', ' '], "");
    wanted.is_empty() || wanted.iter().any(|w| norm(w) == norm(category))
}

/// Records of the requested categories (all when `bias_types` is empty),
/// as three-option items in source order.
pub fn load_bbq(path: &Path, bias_types: &[String]) -> Result<Vec<BenchItem>, BenchError> {
    let text = read_text(path)?;
    let mut items = Vec::new();
    for (line, l) in jsonl_lines(&text) {
        let r: BbqRecord = serde_json::from_str(l).map_err(|e| BenchError::Parse {
            line,
            why: e.to_string(),
        })?;
        if r.label > 2 {
            return Err(BenchError::Parse {
                line,
                why: format!("label {} is not 0, 1 or 2", r.label),
            });
        }
        if !category_matches(&r.category, bias_types) {
            continue;
        }
        let mut meta = BTreeMap::from([
            ("category".to_string(), Value::from(r.category.clone())),
            ("example_id".to_string(), r.example_id.clone()),
        ]);
        if let Some(c) = &r.context_condition {
            meta.insert("context_condition".into(), Value::from(c.clone()));
        }
        if let Some(p) = &r.question_polarity {
            meta.insert("question_polarity".into(), Value::from(p.clone()));
        }
        let item = BenchItem {
            id: format!("bbq-{}-{}", r.category, id_text(&r.example_id)),
            context: Some(r.context),
            question: r.question,
            options: Some(vec![r.ans0, r.ans1, r.ans2]),
            gold: option_label(r.label).to_string(),
            task: Task::Bbq,
            meta,
        };
        item.validate()?;
        items.push(item);
    }
    check_unique(&items)?;
    Ok(items)
}
