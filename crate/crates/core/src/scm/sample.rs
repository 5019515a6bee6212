//! Ancestral sampling of token corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::expression::{ExpressionScheme, TokenId};
use super::model::DiscreteScm;
use super::ScmError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledSequence {
    /// Kept for diagnostics; a language model only ever sees `tokens`.
    pub latent: Vec<usize>,
    pub ordering: usize,
    pub tokens: Vec<TokenId>,
}

/// Index drawn from unnormalized-but-summing-to-one weights.
fn draw<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` past the cumulative sum.
    last_positive
}

pub fn sample_corpus(
    scm: &DiscreteScm,
    scheme: &ExpressionScheme,
    n: usize,
    seed: u64,
) -> Result<Vec<SampledSequence>, ScmError> {
    if n == 0 {
        return Err(ScmError::Invalid("corpus size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = scm.len();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut latent = vec![0usize; d];
        for &v in scm.topological_order() {
            let row = scm.cpt(v).row(&latent);
            latent[v] = draw(&mut rng, row.iter().copied());
        }
        let ordering = draw(&mut rng, scheme.orderings().iter().map(|o| o.prob));
        let perm = &scheme.orderings()[ordering].perm;
        let mut tokens: Vec<TokenId> = Vec::with_capacity(d);
        for &v in perm {
            let row = scheme.emission_row(v, latent[v], tokens.last().copied());
            let k = draw(&mut rng, row.iter().map(|e| e.1));
            tokens.push(row[k].0);
        }
        out.push(SampledSequence {
            latent,
            ordering,
            tokens,
        });
    }
    Ok(out)
}

/// Token strings of each sampled sequence.
pub fn corpus_strings(scheme: &ExpressionScheme, corpus: &[SampledSequence]) -> Vec<Vec<String>> {
    corpus
        .iter()
        .map(|s| {
            s.tokens
                .iter()
                .map(|&t| scheme.token(t).to_string())
                .collect()
        })
        .collect()
}
