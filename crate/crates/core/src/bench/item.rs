use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{jsonl_lines, read_text, BenchError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Winobias,
    Winocontrol,
    Bbq,
    Alice,
    Generic,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Winobias => "winobias",
            Task::Winocontrol => "winocontrol",
            Task::Bbq => "bbq",
            Task::Alice => "alice",
            Task::Generic => "generic",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "winobias" => Ok(Task::Winobias),
            "winocontrol" => Ok(Task::Winocontrol),
            "bbq" => Ok(Task::Bbq),
            "alice" => Ok(Task::Alice),
            "generic" => Ok(Task::Generic),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerFormat {
    Choice,
    Numeric,
    Text,
}

/// `0 → 'a'`, `1 → 'b'`, …
pub fn option_label(i: usize) -> char {
    (b'a' + i as u8) as char
}

/// A question with its gold answer. Options are stored without their
/// `(a)` labels; for choice items `gold` is the bare label letter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchItem {
    pub id: String,
    #[serde(default)]
    pub context: Option<String>,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    pub gold: String,
    pub task: Task,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

impl BenchItem {
    pub fn answer_format(&self) -> AnswerFormat {
        if self.options.is_some() {
            return AnswerFormat::Choice;
        }
        match self.meta.get("answer_format").and_then(Value::as_str) {
            Some("numeric") => AnswerFormat::Numeric,
            _ => AnswerFormat::Text,
        }
    }

    /// Option labels in order, `["a", "b", …]`; empty without options.
    pub fn labels(&self) -> Vec<String> {
        let n = self.options.as_ref().map_or(0, Vec::len);
        (0..n).map(|i| option_label(i).to_string()).collect()
    }

    pub fn meta_str(&self, key: &str) -> Option<&str> {
        self.meta.get(key).and_then(Value::as_str)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let invalid = |why: String| BenchError::Invalid {
            id: self.id.clone(),
            why,
        };
        if self.id.is_empty() {
            return Err(invalid("empty id".into()));
        }
        match self.answer_format() {
            AnswerFormat::Choice => {
                let n = self.options.as_ref().map_or(0, Vec::len);
                if !(2..=26).contains(&n) {
                    return Err(invalid(format!("{n} options")));
                }
                if !self.labels().contains(&self.gold) {
                    return Err(invalid(format!(
                        "gold `{}` is not an option label",
                        self.gold
                    )));
                }
            }
            AnswerFormat::Numeric => {
                if self.gold.trim().parse::<i64>().is_err() {
                    return Err(invalid(format!("gold `{}` is not an integer", self.gold)));
                }
            }
            AnswerFormat::Text => {
                if self.gold.trim().is_empty() {
                    return Err(invalid("empty gold answer".into()));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_unique(items: &[BenchItem]) -> Result<(), BenchError> {
    let mut seen = HashSet::new();
    for it in items {
        if !seen.insert(it.id.as_str()) {
            return Err(BenchError::DuplicateId(it.id.clone()));
        }
    }
    Ok(())
}

pub fn write_items<W: Write>(mut out: W, items: &[BenchItem]) -> std::io::Result<()> {
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_items(path: &Path) -> Result<Vec<BenchItem>, BenchError> {
    let text = read_text(path)?;
    let mut items = Vec::new();
    for (line, l) in jsonl_lines(&text) {
        let item: BenchItem = serde_json::from_str(l).map_err(|e| BenchError::Parse {
            line,
            why: e.to_string(),
        })?;
        item.validate()?;
        items.push(item);
    }
    check_unique(&items)?;
    Ok(items)
}

/// SHA-256 over the canonical JSONL serialization, hex encoded.
pub fn dataset_digest(items: &[BenchItem]) -> String {
    let mut h = Sha256::new();
    for it in items {
        h.update(serde_json::to_vec(it).expect("items serialize"));
        h.update(b"\n");
    }
    format!("{:x}", h.finalize())
}
