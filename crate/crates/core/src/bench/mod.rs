//! Benchmark construction: WinoBias pairs and the WinoControl grid, the
//! Alice counting set, BBQ subsets, and a generic loader, all emitted as
//! [`BenchItem`] JSONL.

mod alice;
mod bbq;
mod generic;
mod item;
mod pilot;
mod winobias;
mod winocontrol;

pub use alice::{gen_alice, gen_alice_with, AliceOptions};
pub use bbq::{load_bbq, BbqRecord};
pub use generic::load_generic;
pub use item::{
    dataset_digest, option_label, read_items, write_items, AnswerFormat, BenchItem, Task,
};
pub use pilot::{pilot_sample, sample_pairs};
pub use winobias::{load_winobias, parse_winobias, Pronoun, Stereotype, WinoItem, OCCUPATIONS};
pub use winocontrol::{build_winocontrol, ControlledItem, FRUITS};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{path}: {why}")]
    Io { path: String, why: String },
    #[error("line {line}: {why}")]
    Parse { line: usize, why: String },
    #[error("unknown occupation `{0}`")]
    UnknownOccupation(String),
    #[error("pair `{pair_id}`: {why}")]
    Unpaired { pair_id: String, why: String },
    #[error("item `{id}`: {why}")]
    Invalid { id: String, why: String },
    #[error("duplicate item id `{0}`")]
    DuplicateId(String),
    #[error("level {0} is outside 0..=2")]
    Level(u8),
    #[error("occupation pool exhausted: need {need} distractors, {available} available")]
    PoolExhausted { need: usize, available: usize },
    #[error("cannot sample {n} of {available} items")]
    SampleTooLarge { n: usize, available: usize },
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        why: e.to_string(),
    })
}

/// Non-blank lines with their 1-based line numbers.
pub(crate) fn jsonl_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}
