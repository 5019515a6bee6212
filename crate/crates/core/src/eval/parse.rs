//! Answer extraction from model responses.

use std::sync::LazyLock;

use regex::Regex;

static CHOICE_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)<choice>\s*\(?\s*([a-z])\s*\)?\s*</choice>").unwrap());
static LABEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\(([a-z])\)").unwrap());
static ANSWER_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<answer>(.*?)</answer>").unwrap());
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+").unwrap());

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parsed<T> {
    pub value: T,
    /// Found without the answer tag.
    pub fallback: bool,
}

fn last_line(text: &str) -> Option<&str> {
    text.lines().rev().map(str::trim).find(|l| !l.is_empty())
}

/// The label inside the last `<choice>(x)</choice>`, else the last `(x)` on
/// the final non-empty line. Labels are lowercase letters.
pub fn parse_choice(text: &str, labels: &[String]) -> Result<Parsed<String>, String> {
    if text.trim().is_empty() {
        return Err("empty response".into());
    }
    let valid = |c: &str| labels.iter().any(|l| l == c);
    if let Some(cap) = CHOICE_TAG.captures_iter(text).last() {
        let label = cap[1].to_ascii_lowercase();
        return if valid(&label) {
            Ok(Parsed {
                value: label,
                fallback: false,
            })
        } else {
            Err(format!("tagged choice ({label}) is not an option"))
        };
    }
    let line = last_line(text).unwrap_or_default();
    LABEL
        .captures_iter(line)
        .map(|c| c[1].to_ascii_lowercase())
        .filter(|l| valid(l))
        .last()
        .map(|value| Parsed {
            value,
            fallback: true,
        })
        .ok_or_else(|| "no <choice> tag and no option label on the last line".into())
}

/// The integer in the last `<answer>n</answer>`, else the last integer on
/// the final non-empty line.
pub fn parse_numeric(text: &str) -> Result<Parsed<i64>, String> {
    if text.trim().is_empty() {
        return Err("empty response".into());
    }
    if let Some(cap) = ANSWER_TAG.captures_iter(text).last() {
        let inner = cap[1].trim();
        return inner
            .parse::<i64>()
            .map(|value| Parsed {
                value,
                fallback: false,
            })
            .map_err(|_| format!("tagged answer `{inner}` is not an integer"));
    }
    let line = last_line(text).unwrap_or_default();
    INTEGER
        .find_iter(line)
        .last()
        .and_then(|m| m.as_str().parse().ok())
        .map(|value| Parsed {
            value,
            fallback: true,
        })
        .ok_or_else(|| "no <answer> tag and no integer on the last line".into())
}

/// The text in the last `<answer>…</answer>`, else the final non-empty line.
pub fn parse_text(text: &str) -> Result<Parsed<String>, String> {
    if let Some(cap) = ANSWER_TAG.captures_iter(text).last() {
        let inner = cap[1].trim();
        if !inner.is_empty() {
            return Ok(Parsed {
                value: inner.to_string(),
                fallback: false,
            });
        }
    }
    last_line(text)
        .map(|l| Parsed {
            value: l.to_string(),
            fallback: true,
        })
        .ok_or_else(|| "empty response".into())
}
