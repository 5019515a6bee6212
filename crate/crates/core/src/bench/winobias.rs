//! WinoBias coreference items in a flat JSONL form:
//!
//! ```json
//! {"id": "1-pro-she", "sentence": "...", "occupation_a": "manager",
//!  "occupation_b": "housekeeper", "pronoun": "she", "gold": "manager",
//!  "stereotype": "pro", "pair_id": "1", "wino_type": 1}
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::item::check_unique;
use super::{jsonl_lines, read_text, BenchError, BenchItem, Task};

pub const OCCUPATIONS: [&str; 40] = [
    "driver",
    "supervisor",
    "janitor",
    "cook",
    "mover",
    "laborer",
    "construction worker",
    "chief",
    "developer",
    "carpenter",
    "manager",
    "lawyer",
    "farmer",
    "salesperson",
    "physician",
    "guard",
    "analyst",
    "mechanic",
    "sheriff",
    "CEO",
    "attendant",
    "cashier",
    "teacher",
    "nurse",
    "assistant",
    "secretary",
    "auditor",
    "cleaner",
    "receptionist",
    "clerk",
    "counselor",
    "designer",
    "hairdresser",
    "writer",
    "housekeeper",
    "baker",
    "accountant",
    "editor",
    "librarian",
    "tailor",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pronoun {
    He,
    She,
}

impl Pronoun {
    pub fn as_str(self) -> &'static str {
        match self {
            Pronoun::He => "he",
            Pronoun::She => "she",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Pronoun::He => Pronoun::She,
            Pronoun::She => Pronoun::He,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stereotype {
    Pro,
    Anti,
}

impl Stereotype {
    pub fn as_str(self) -> &'static str {
        match self {
            Stereotype::Pro => "pro",
            Stereotype::Anti => "anti",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WinoItem {
    pub id: String,
    pub sentence: String,
    pub occupation_a: String,
    pub occupation_b: String,
    pub pronoun: Pronoun,
    pub gold: String,
    pub stereotype: Stereotype,
    pub pair_id: String,
    pub wino_type: u8,
}

impl WinoItem {
    /// The occupation that is not the referent.
    pub fn wrong(&self) -> &str {
        if self.gold == self.occupation_a {
            &self.occupation_b
        } else {
            &self.occupation_a
        }
    }

    pub fn gold_label(&self) -> &'static str {
        if self.gold == self.occupation_a {
            "a"
        } else {
            "b"
        }
    }

    pub fn question(&self) -> String {
        format!(
            "Who does \"{}\" refer to in the last sentence?",
            self.pronoun.as_str()
        )
    }

    pub fn options(&self) -> Vec<String> {
        vec![
            format!("The {}", self.occupation_a),
            format!("The {}", self.occupation_b),
        ]
    }

    pub(crate) fn meta(&self) -> BTreeMap<String, Value> {
        BTreeMap::from([
            ("pair_id".into(), Value::from(self.pair_id.clone())),
            ("stereotype".into(), Value::from(self.stereotype.as_str())),
            ("pronoun".into(), Value::from(self.pronoun.as_str())),
        ])
    }

    pub fn to_bench_item(&self) -> BenchItem {
        BenchItem {
            id: self.id.clone(),
            context: Some(self.sentence.clone()),
            question: self.question(),
            options: Some(self.options()),
            gold: self.gold_label().into(),
            task: Task::Winobias,
            meta: self.meta(),
        }
    }
}

fn canonical_occupation(name: &str) -> Option<&'static str> {
    OCCUPATIONS
        .iter()
        .copied()
        .find(|o| o.eq_ignore_ascii_case(name))
}

fn is_pronoun(word: &str) -> bool {
    matches!(
        word.to_ascii_lowercase().as_str(),
        "he" | "she" | "him" | "her" | "his" | "hers" | "himself" | "herself"
    )
}

/// Both sentences have the same words except for gendered pronouns.
fn pronoun_swapped(a: &str, b: &str) -> bool {
    let split = |s: &str| -> Vec<String> {
        s.split(|c: char| c.is_whitespace() || (c.is_ascii_punctuation() && c != '\'' && c != '-'))
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect()
    };
    let (wa, wb) = (split(a), split(b));
    wa.len() == wb.len()
        && wa
            .iter()
            .zip(&wb)
            .all(|(x, y)| x == y || (is_pronoun(x) && is_pronoun(y)))
}

fn check_pair(pair_id: &str, items: &[&WinoItem]) -> Result<(), BenchError> {
    let unpaired = |why: String| BenchError::Unpaired {
        pair_id: pair_id.to_string(),
        why,
    };
    let [x, y] = items else {
        return Err(unpaired(format!("{} items, expected 2", items.len())));
    };
    if x.pronoun == y.pronoun {
        return Err(unpaired("twins use the same pronoun".into()));
    }
    if x.stereotype == y.stereotype {
        return Err(unpaired("twins carry the same stereotype tag".into()));
    }
    if (&x.occupation_a, &x.occupation_b, &x.gold) != (&y.occupation_a, &y.occupation_b, &y.gold) {
        return Err(unpaired("twins disagree on occupations or gold".into()));
    }
    if x.wino_type != y.wino_type {
        return Err(unpaired("twins have different types".into()));
    }
    if !pronoun_swapped(&x.sentence, &y.sentence) {
        return Err(unpaired("sentences differ beyond the pronoun".into()));
    }
    Ok(())
}

/// Parse and validate WinoBias JSONL; `type1_only` drops type-2 items
/// before pairing is checked. Items keep file order.
pub fn parse_winobias(text: &str, type1_only: bool) -> Result<Vec<WinoItem>, BenchError> {
    let mut items = Vec::new();
    for (line, l) in jsonl_lines(text) {
        let mut it: WinoItem = serde_json::from_str(l).map_err(|e| BenchError::Parse {
            line,
            why: e.to_string(),
        })?;
        for occ in [&mut it.occupation_a, &mut it.occupation_b] {
            *occ = canonical_occupation(occ)
                .ok_or_else(|| BenchError::UnknownOccupation(occ.clone()))?
                .to_string();
        }
        if let Some(g) = canonical_occupation(&it.gold) {
            it.gold = g.to_string();
        }
        if it.gold != it.occupation_a && it.gold != it.occupation_b {
            return Err(BenchError::Invalid {
                id: it.id,
                why: "gold is neither occupation".into(),
            });
        }
        if it.occupation_a == it.occupation_b {
            return Err(BenchError::Invalid {
                id: it.id,
                why: "both entities share an occupation".into(),
            });
        }
        if !matches!(it.wino_type, 1 | 2) {
            return Err(BenchError::Parse {
                line,
                why: format!("wino_type {} is not 1 or 2", it.wino_type),
            });
        }
        if !type1_only || it.wino_type == 1 {
            items.push(it);
        }
    }
    let mut pairs: HashMap<&str, Vec<&WinoItem>> = HashMap::new();
    for it in &items {
        pairs.entry(it.pair_id.as_str()).or_default().push(it);
    }
    let mut ids: Vec<&&str> = pairs.keys().collect();
    ids.sort();
    for pid in ids {
        check_pair(pid, &pairs[*pid])?;
    }
    let bench: Vec<BenchItem> = items.iter().map(WinoItem::to_bench_item).collect();
    check_unique(&bench)?;
    Ok(items)
}

pub fn load_winobias(path: &Path, type1_only: bool) -> Result<Vec<WinoItem>, BenchError> {
    parse_winobias(&read_text(path)?, type1_only)
}
