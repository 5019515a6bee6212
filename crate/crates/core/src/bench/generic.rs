//! External benchmarks in a minimal JSONL schema:
//! `{id, context?, question, options?: [..], answer, task?, meta?: {..}}`.
//!
//! With options, `answer` is an option label (`b`, `(b)`) or the option
//! text. Without options, an integer answer marks a numeric item and
//! anything else a free-text answer.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::item::check_unique;
use super::{jsonl_lines, option_label, read_text, BenchError, BenchItem, Task};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenericRecord {
    id: Value,
    #[serde(default)]
    context: Option<String>,
    question: String,
    #[serde(default)]
    options: Option<Vec<String>>,
    answer: Value,
    #[serde(default)]
    task: Option<String>,
    #[serde(default)]
    meta: BTreeMap<String, Value>,
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn choice_gold(answer: &str, options: &[String]) -> Option<String> {
    let a = answer.trim();
    let bare = a
        .trim_start_matches('(')
        .trim_end_matches(')')
        .to_ascii_lowercase();
    if bare.len() == 1 {
        let c = bare.as_bytes()[0];
        if c.is_ascii_lowercase() && ((c - b'a') as usize) < options.len() {
            return Some(bare);
        }
    }
    options
        .iter()
        .position(|o| o.trim() == a)
        .map(|i| option_label(i).to_string())
}

pub fn load_generic(path: &Path) -> Result<Vec<BenchItem>, BenchError> {
    let text = read_text(path)?;
    let mut items = Vec::new();
    for (line, l) in jsonl_lines(&text) {
        let bad = |why: String| BenchError::Parse { line, why };
        let r: GenericRecord = serde_json::from_str(l).map_err(|e| bad(e.to_string()))?;
        let id = text_of(&r.id).ok_or_else(|| bad("id must be a string or number".into()))?;
        let answer =
            text_of(&r.answer).ok_or_else(|| bad("answer must be a string or number".into()))?;
        let mut meta = r.meta;
        if let Some(t) = r.task {
            meta.insert("source_task".into(), Value::from(t));
        }
        let gold = match &r.options {
            Some(opts) => {
                if opts.len() < 2 {
                    return Err(bad(format!("{} options, need at least 2", opts.len())));
                }
                meta.insert("answer_format".into(), Value::from("choice"));
                choice_gold(&answer, opts)
                    .ok_or_else(|| bad(format!("answer `{answer}` matches no option")))?
            }
            None => {
                let format = if answer.trim().parse::<i64>().is_ok() {
                    "numeric"
                } else {
                    "text"
                };
                meta.entry("answer_format".into())
                    .or_insert_with(|| Value::from(format));
                answer.trim().to_string()
            }
        };
        let item = BenchItem {
            id,
            context: r.context,
            question: r.question,
            options: r.options,
            gold,
            task: Task::Generic,
            meta,
        };
        item.validate().map_err(|e| bad(e.to_string()))?;
        items.push(item);
    }
    check_unique(&items)?;
    Ok(items)
}
