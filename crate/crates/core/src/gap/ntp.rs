//! Count-based next-token predictor over fixed-length token sequences.

use std::collections::{BTreeSet, HashMap};

use super::{Distribution, GapError};

/// Additively smoothed conditional frequencies `Pr(token | prefix)`.
///
/// The candidate alphabet at position `k` is the set of tokens observed at
/// position `k` anywhere in the corpus.
#[derive(Clone, Debug)]
pub struct TabularNtp {
    alpha: f64,
    len: usize,
    alphabets: Vec<Vec<String>>,
    counts: HashMap<Vec<String>, HashMap<String, u64>>,
    totals: HashMap<Vec<String>, u64>,
}

pub fn fit_tabular_ntp(corpus: &[Vec<String>], alpha: f64) -> Result<TabularNtp, GapError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(GapError::Ntp(format!(
            "smoothing {alpha} must be a finite nonnegative number"
        )));
    }
    let len = corpus
        .first()
        .map(Vec::len)
        .ok_or_else(|| GapError::Ntp("empty corpus".into()))?;
    let mut alphabets = vec![BTreeSet::new(); len];
    let mut counts: HashMap<Vec<String>, HashMap<String, u64>> = HashMap::new();
    let mut totals: HashMap<Vec<String>, u64> = HashMap::new();
    for (i, seq) in corpus.iter().enumerate() {
        if seq.len() != len {
            return Err(GapError::Ntp(format!(
                "sequence {i} has length {}, expected {len}",
                seq.len()
            )));
        }
        for k in 0..len {
            let prefix = &seq[..k];
            alphabets[k].insert(seq[k].clone());
            match counts.get_mut(prefix) {
                Some(row) => *row.entry(seq[k].clone()).or_default() += 1,
                None => {
                    counts.insert(prefix.to_vec(), HashMap::from([(seq[k].clone(), 1)]));
                }
            }
            match totals.get_mut(prefix) {
                Some(t) => *t += 1,
                None => {
                    totals.insert(prefix.to_vec(), 1);
                }
            }
        }
    }
    Ok(TabularNtp {
        alpha,
        len,
        alphabets: alphabets
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect(),
        counts,
        totals,
    })
}

impl TabularNtp {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sequence_len(&self) -> usize {
        self.len
    }

    /// Number of corpus sequences beginning with `prefix`.
    pub fn prefix_count(&self, prefix: &[&str]) -> u64 {
        let key: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
        self.totals.get(&key).copied().unwrap_or(0)
    }

    pub fn predict(&self, prefix: &[&str]) -> Result<Distribution, GapError> {
        let k = prefix.len();
        if k >= self.len {
            return Err(GapError::Ntp(format!(
                "prefix of length {k} leaves no token to predict"
            )));
        }
        let key: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
        let total = self.totals.get(&key).copied().unwrap_or(0);
        if total == 0 && self.alpha == 0.0 {
            return Err(GapError::UnseenPrefix(prefix.join(" ")));
        }
        let alphabet = &self.alphabets[k];
        let row = self.counts.get(&key);
        let denom = total as f64 + self.alpha * alphabet.len() as f64;
        let probs = alphabet
            .iter()
            .map(|t| {
                let c = row.and_then(|r| r.get(t)).copied().unwrap_or(0) as f64;
                (c + self.alpha) / denom
            })
            .collect();
        Distribution::new(alphabet.clone(), probs)
    }
}
