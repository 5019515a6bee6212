use std::collections::BTreeMap;

use serde_json::Value;

use super::{BenchItem, Task};

const QUESTION: &str = "How many sisters does Alice\u{2019}s brother have?";

#[derive(Clone, Copy, Debug, Default)]
pub struct AliceOptions {
    /// Singularize "1 brothers" / "1 sisters". Off by default: the sweep
    /// fills the templates mechanically.
    pub normalize_singular: bool,
}

fn count(n: u32, noun: &str, normalize: bool) -> String {
    if normalize && n == 1 {
        format!("1 {}", noun.trim_end_matches('s'))
    } else {
        format!("{n} {noun}")
    }
}

fn statement(template: u8, n: u32, m: u32, normalize: bool) -> String {
    let brothers = count(n, "brothers", normalize);
    let sisters = count(m, "sisters", normalize);
    match template {
        1 => format!("Alice has {brothers} and she also has {sisters}."),
        _ => format!("Alice has {sisters} and she also has {brothers}."),
    }
}

/// Both templates over `N, M ∈ 1..=10`; the answer is `M + 1`.
pub fn gen_alice_with(opts: AliceOptions) -> Vec<BenchItem> {
    let mut items = Vec::with_capacity(200);
    for template in [1u8, 2] {
        for n in 1..=10u32 {
            for m in 1..=10u32 {
                let meta = BTreeMap::from([
                    ("answer_format".to_string(), Value::from("numeric")),
                    ("template".to_string(), Value::from(template)),
                    ("N".to_string(), Value::from(n)),
                    ("M".to_string(), Value::from(m)),
                ]);
                items.push(BenchItem {
                    id: format!("alice-t{template}-n{n}-m{m}"),
                    context: None,
                    question: format!(
                        "{} {QUESTION}",
                        statement(template, n, m, opts.normalize_singular)
                    ),
                    options: None,
                    gold: (m + 1).to_string(),
                    task: Task::Alice,
                    meta,
                });
            }
        }
    }
    items
}

pub fn gen_alice() -> Vec<BenchItem> {
    gen_alice_with(AliceOptions::default())
}
