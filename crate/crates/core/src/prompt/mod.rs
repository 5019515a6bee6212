//! Prompt interventions and the single-block prompt layout.
//!
//! ```text
//! Context:
//! \t{context}
//!
//! Question:
//! \t{question}
//!
//! Options:
//! \t(a) {option}
//!
//! {instruction}
//!
//! {answer-format line}
//! ```
//!
//! The LtM wording and the RaR + CoT composition are reconstructions, not
//! quoted instructions.

use serde::{Deserialize, Serialize};

use crate::bench::{option_label, AnswerFormat, BenchItem};

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("item `{0}`: choice format needs options")]
    MissingOptions(String),
    #[error("unknown intervention `{0}`")]
    UnknownKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionKind {
    Direct,
    #[serde(rename = "cot")]
    CoT,
    #[serde(rename = "rar")]
    RaR,
    #[serde(rename = "rar_cot")]
    RaRplusCoT,
    #[serde(rename = "ltm")]
    LtM,
    Echo,
    Expand,
    #[serde(rename = "lot1")]
    LoT1,
    #[serde(rename = "lot2")]
    LoT2,
    #[serde(rename = "lot_appendix")]
    LoTAppendix,
}

const COT: &str = "Let's think step by step.";
const COT_CLAUSE: &str = ", and then think step by step.";

impl InterventionKind {
    pub const ALL: [InterventionKind; 10] = [
        Self::Direct,
        Self::CoT,
        Self::RaR,
        Self::RaRplusCoT,
        Self::LtM,
        Self::Echo,
        Self::Expand,
        Self::LoT1,
        Self::LoT2,
        Self::LoTAppendix,
    ];

    pub fn instruction(self) -> &'static str {
        match self {
            Self::Direct => "Please give me the answer directly.",
            Self::CoT => COT,
            Self::RaR => "**Rephrase** and **expand** the question, and **respond**.",
            Self::RaRplusCoT => "**Rephrase** and **expand** the question, and **respond**, and then think step by step.",
            Self::LtM => "Let's break down this problem into subproblems and solve them one by one.",
            Self::Echo => "Let's **observe** and **echo** all the relevant information.",
            Self::Expand => "Let's **observe** and **expand** all the relevant information.",
            Self::LoT1 => "Please **expand** all the relevant information, and **echo** them based on the question",
            Self::LoT2 => "Please **observe**, **expand**, and **echo** all the relevant information based on the question",
            Self::LoTAppendix => {
                "Let's **observe**, **echo**, and **expand** all the relevant information, and then think step by step."
            }
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Self::Direct => "direct",
            Self::CoT => "cot",
            Self::RaR => "rar",
            Self::RaRplusCoT => "rar_cot",
            Self::LtM => "ltm",
            Self::Echo => "echo",
            Self::Expand => "expand",
            Self::LoT1 => "lot1",
            Self::LoT2 => "lot2",
            Self::LoTAppendix => "lot_appendix",
        }
    }

    /// Whether an optional step-by-step clause may be appended.
    pub fn accepts_cot_suffix(self) -> bool {
        matches!(
            self,
            Self::RaR | Self::LtM | Self::Echo | Self::Expand | Self::LoT1 | Self::LoT2
        )
    }
}

impl std::fmt::Display for InterventionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.slug())
    }
}

impl std::str::FromStr for InterventionKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.slug().eq_ignore_ascii_case(s))
            .ok_or_else(|| PromptError::UnknownKind(s.into()))
    }
}

/// Every intervention with its instruction, in fixed order.
pub fn catalogue() -> Vec<(InterventionKind, &'static str)> {
    InterventionKind::ALL
        .iter()
        .map(|&k| (k, k.instruction()))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Prefix Echo and Expand with "Think step by step.".
    pub think_prefix: bool,
    /// Fold ", and then think step by step." into kinds that accept it.
    pub cot_suffix: bool,
    /// Force an answer format instead of the item's own.
    pub format: Option<AnswerFormat>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub kind: InterventionKind,
    pub item_id: String,
    pub format: AnswerFormat,
}

fn instruction_line(kind: InterventionKind, opts: RenderOptions) -> String {
    let mut line = kind.instruction().to_string();
    if opts.cot_suffix && kind.accepts_cot_suffix() {
        line = format!("{}{COT_CLAUSE}", line.trim_end_matches('.'));
    }
    if opts.think_prefix && matches!(kind, InterventionKind::Echo | InterventionKind::Expand) {
        line = format!("Think step by step. {line}");
    }
    line
}

fn answer_line(format: AnswerFormat, n_options: usize) -> String {
    match format {
        AnswerFormat::Choice => {
            let labels: Vec<String> = (0..n_options)
                .map(|i| format!("({})", option_label(i)))
                .collect();
            format!(
                "At last, enclose your final choice, e.g., <choice>{}</choice>.",
                labels.join("/")
            )
        }
        AnswerFormat::Numeric => {
            "At last, enclose your final answer, e.g., <answer>5</answer>.".into()
        }
        AnswerFormat::Text => {
            "At last, enclose your final answer, e.g., <answer>your answer</answer>.".into()
        }
    }
}

fn indented(text: &str) -> String {
    text.lines()
        .map(|l| format!("\t{l}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render(item: &BenchItem, kind: InterventionKind) -> Result<RenderedPrompt, PromptError> {
    render_with(item, kind, RenderOptions::default())
}

pub fn render_with(
    item: &BenchItem,
    kind: InterventionKind,
    opts: RenderOptions,
) -> Result<RenderedPrompt, PromptError> {
    let format = opts.format.unwrap_or_else(|| item.answer_format());
    let options = item.options.as_deref().unwrap_or_default();
    if format == AnswerFormat::Choice && options.is_empty() {
        return Err(PromptError::MissingOptions(item.id.clone()));
    }
    let mut blocks = Vec::with_capacity(5);
    if let Some(ctx) = item.context.as_deref().filter(|c| !c.is_empty()) {
        blocks.push(format!("Context:\n{}", indented(ctx)));
    }
    blocks.push(format!("Question:\n{}", indented(&item.question)));
    if !options.is_empty() {
        let lines: Vec<String> = options
            .iter()
            .enumerate()
            .map(|(i, o)| format!("\t({}) {o}", option_label(i)))
            .collect();
        blocks.push(format!("Options:\n{}", lines.join("\n")));
    }
    blocks.push(instruction_line(kind, opts));
    blocks.push(answer_line(format, options.len()));
    Ok(RenderedPrompt {
        text: blocks.join("\n\n"),
        kind,
        item_id: item.id.clone(),
        format,
    })
}
