//! The WinoControl grid: WinoBias type-1 pairs with helper and distractor
//! sentences inserted to vary how explicit the referent is.
//!
//! Every inserted sentence follows `The {occupation} ate one {fruit} because
//! {pronoun} likes it.` The L level sets the helper (0: the wrong occupation
//! with the opposite pronoun, 1: the gold occupation with the same pronoun,
//! 2: none); the q level adds 0, 2 or 4 distractors with one `he` and one
//! `she` per round, on occupations outside the item. Helpers and
//! distractors are shuffled together and placed before the sentence.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::winobias::{Pronoun, WinoItem, OCCUPATIONS};
use super::{BenchError, BenchItem, Task};

pub const FRUITS: [&str; 8] = [
    "apple", "banana", "pear", "peach", "orange", "grape", "mango", "plum",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ControlledItem {
    pub base: WinoItem,
    pub l_level: u8,
    pub q_level: u8,
    /// Inserted sentences in their final order.
    pub inserted: Vec<String>,
    pub context: String,
    pub seed: u64,
}

fn sentence(occupation: &str, fruit: &str, pronoun: Pronoun) -> String {
    format!(
        "The {occupation} ate one {fruit} because {} likes it.",
        pronoun.as_str()
    )
}

/// Per-pair randomness, shared by both twins so they differ only by pronoun.
fn pair_rng(seed: u64, pair_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(pair_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

enum Slot {
    Helper,
    Distractor(usize, Pronoun),
}

struct PairPlan {
    /// Sentence slots in final order.
    slots: Vec<Slot>,
    fruit_offset: usize,
}

fn plan(base: &WinoItem, l: u8, q: u8, seed: u64) -> Result<PairPlan, BenchError> {
    let mut rng = pair_rng(seed, &base.pair_id);
    let need = 2 * q as usize;
    let pool: Vec<usize> = (0..OCCUPATIONS.len())
        .filter(|&i| OCCUPATIONS[i] != base.occupation_a && OCCUPATIONS[i] != base.occupation_b)
        .collect();
    if pool.len() < need {
        return Err(BenchError::PoolExhausted {
            need,
            available: pool.len(),
        });
    }
    let chosen: Vec<usize> = pool.choose_multiple(&mut rng, need).copied().collect();
    let mut slots: Vec<Slot> = Vec::with_capacity(need + 1);
    if l < 2 {
        slots.push(Slot::Helper);
    }
    for (k, occ) in chosen.into_iter().enumerate() {
        let pronoun = if k % 2 == 0 {
            Pronoun::He
        } else {
            Pronoun::She
        };
        slots.push(Slot::Distractor(occ, pronoun));
    }
    slots.shuffle(&mut rng);
    Ok(PairPlan {
        slots,
        fruit_offset: rng.gen_range(0..FRUITS.len()),
    })
}

fn realize(base: &WinoItem, l: u8, q: u8, seed: u64, plan: &PairPlan) -> ControlledItem {
    let inserted: Vec<String> = plan
        .slots
        .iter()
        .enumerate()
        .map(|(k, slot)| {
            let fruit = FRUITS[(plan.fruit_offset + k) % FRUITS.len()];
            match slot {
                Slot::Helper if l == 0 => sentence(base.wrong(), fruit, base.pronoun.opposite()),
                Slot::Helper => sentence(&base.gold, fruit, base.pronoun),
                Slot::Distractor(occ, p) => sentence(OCCUPATIONS[*occ], fruit, *p),
            }
        })
        .collect();
    let context = if inserted.is_empty() {
        base.sentence.clone()
    } else {
        format!("{} {}", inserted.join(" "), base.sentence)
    };
    ControlledItem {
        base: base.clone(),
        l_level: l,
        q_level: q,
        inserted,
        context,
        seed,
    }
}

/// One grid cell. Items must be type-1 twins; both twins of every pair
/// share occupations, fruits and order, each with its own pronoun rules.
pub fn build_winocontrol(
    items: &[WinoItem],
    l_level: u8,
    q_level: u8,
    seed: u64,
) -> Result<Vec<ControlledItem>, BenchError> {
    for lvl in [l_level, q_level] {
        if lvl > 2 {
            return Err(BenchError::Level(lvl));
        }
    }
    if let Some(it) = items.iter().find(|it| it.wino_type != 1) {
        return Err(BenchError::Invalid {
            id: it.id.clone(),
            why: "WinoControl admits type-1 items only".into(),
        });
    }
    let mut plans: BTreeMap<&str, PairPlan> = BTreeMap::new();
    let mut out = Vec::with_capacity(items.len());
    for it in items {
        if !plans.contains_key(it.pair_id.as_str()) {
            plans.insert(&it.pair_id, plan(it, l_level, q_level, seed)?);
        }
        out.push(realize(
            it,
            l_level,
            q_level,
            seed,
            &plans[it.pair_id.as_str()],
        ));
    }
    Ok(out)
}

impl ControlledItem {
    pub fn cell_suffix(&self) -> String {
        format!("L{}q{}", self.l_level, self.q_level)
    }

    pub fn to_bench_item(&self) -> BenchItem {
        let cell = self.cell_suffix();
        let mut meta = self.base.meta();
        meta.insert(
            "pair_id".into(),
            Value::from(format!("{}/{cell}", self.base.pair_id)),
        );
        meta.insert(
            "base_pair_id".into(),
            Value::from(self.base.pair_id.clone()),
        );
        meta.insert("base_id".into(), Value::from(self.base.id.clone()));
        meta.insert("l_level".into(), Value::from(self.l_level));
        meta.insert("q_level".into(), Value::from(self.q_level));
        meta.insert("seed".into(), Value::from(self.seed));
        BenchItem {
            id: format!("{}/{cell}", self.base.id),
            context: Some(self.context.clone()),
            question: self.base.question(),
            options: Some(self.base.options()),
            gold: self.base.gold_label().into(),
            task: Task::Winocontrol,
            meta,
        }
    }
}
