//! The two-premise question-answering SCM `C1 → A ← C2` and a random
//! generator over it.

use rand::Rng;

use super::expression::{EmissionMode, ExpressionScheme, Ordering, TokenWeight};
use super::model::{DiscreteScm, Variable};
use super::ScmError;

/// Which variables play the premise and conclusion roles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TwoPremise {
    pub c1: usize,
    pub c2: usize,
    pub a: usize,
}

impl Default for TwoPremise {
    fn default() -> Self {
        Self { c1: 0, c2: 1, a: 2 }
    }
}

impl TwoPremise {
    /// The graph must be exactly `c1 → a ← c2`.
    pub fn validate(&self, scm: &DiscreteScm) -> Result<(), ScmError> {
        let TwoPremise { c1, c2, a } = *self;
        let distinct = c1 != c2 && c1 != a && c2 != a;
        if scm.len() != 3 || !distinct || c1 >= 3 || c2 >= 3 || a >= 3 {
            return Err(ScmError::NotTwoPremise(
                "need three distinct variables C1, C2, A".into(),
            ));
        }
        let mut edges = scm.edges().to_vec();
        edges.sort_unstable();
        let mut want = vec![(c1, a), (c2, a)];
        want.sort_unstable();
        if edges != want {
            return Err(ScmError::NotTwoPremise(format!(
                "edges {:?} are not C1 → A ← C2",
                scm.edges()
            )));
        }
        Ok(())
    }

    /// Presentation order `(C1, C2, A)`: conclusion stated last.
    pub fn topological(&self) -> Vec<usize> {
        vec![self.c1, self.c2, self.a]
    }

    /// Presentation order `(C1, A, C2)`: conclusion stated before a premise.
    pub fn anti_topological(&self) -> Vec<usize> {
        vec![self.c1, self.a, self.c2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PremiseOrder {
    /// `(1,2,3)`.
    ConclusionLast,
    /// `(1,3,2)`.
    ConclusionEarly,
}

impl PremiseOrder {
    pub fn perm(self) -> Vec<usize> {
        let roles = TwoPremise::default();
        match self {
            Self::ConclusionLast => roles.topological(),
            Self::ConclusionEarly => roles.anti_topological(),
        }
    }
}

/// Inputs of [`build_example_two_premise`]. `a_given` rows are indexed by
/// `c1 * |C2| + c2`.
#[derive(Clone, Debug)]
pub struct TwoPremiseParams {
    pub c1_prior: Vec<f64>,
    pub c2_prior: Vec<f64>,
    pub a_given: Vec<Vec<f64>>,
    pub c1_expr: Vec<Vec<TokenWeight>>,
    pub c2_expr: Vec<Vec<TokenWeight>>,
    pub a_expr: Vec<Vec<TokenWeight>>,
    pub mode: EmissionMode,
    pub orderings: Vec<(PremiseOrder, f64)>,
}

/// Variables are `C1`, `C2`, `A` at indices 0, 1, 2.
pub fn build_example_two_premise(
    params: TwoPremiseParams,
) -> Result<(DiscreteScm, ExpressionScheme), ScmError> {
    let card_a = params.a_given.first().map_or(0, Vec::len);
    let scm = DiscreteScm::new(
        vec![
            Variable::new("C1", params.c1_prior.len()),
            Variable::new("C2", params.c2_prior.len()),
            Variable::new("A", card_a),
        ],
        vec![(0, 2), (1, 2)],
        vec![vec![params.c1_prior], vec![params.c2_prior], params.a_given],
    )?;
    let orderings = params
        .orderings
        .into_iter()
        .map(|(o, prob)| Ordering {
            perm: o.perm(),
            prob,
        })
        .collect();
    let scheme = ExpressionScheme::new(
        &scm,
        vec![params.c1_expr, params.c2_expr, params.a_expr],
        params.mode,
        orderings,
    )?;
    Ok((scm, scheme))
}

/// One token per value: `{prefix}{value}`.
pub fn singleton_tokens(prefix: &str, cardinality: usize) -> Vec<Vec<TokenWeight>> {
    (0..cardinality)
        .map(|x| vec![TokenWeight::new(format!("{prefix}{x}"), 1.0)])
        .collect()
}

/// `A = C1 XOR C2` with uniform binary premises and singleton tokens.
pub fn xor_params(orderings: Vec<(PremiseOrder, f64)>) -> TwoPremiseParams {
    TwoPremiseParams {
        c1_prior: vec![0.5, 0.5],
        c2_prior: vec![0.5, 0.5],
        a_given: vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ],
        c1_expr: singleton_tokens("c1_", 2),
        c2_expr: singleton_tokens("c2_", 2),
        a_expr: singleton_tokens("a_", 2),
        mode: EmissionMode::ContextFree,
        orderings,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RandomConfig {
    /// Cardinalities are drawn from `2..=max_card`.
    pub max_card: usize,
    /// Token pools per variable are drawn from `1..=max_alphabet`.
    pub max_alphabet: usize,
    /// `None` picks the emission mode at random.
    pub mode: Option<EmissionMode>,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self {
            max_card: 3,
            max_alphabet: 4,
            mode: None,
        }
    }
}

/// A random two-premise SCM whose expressions support both presentation orders.
///
/// In `prev_token` mode, C2 may condition on the C1 token or the A token and
/// A may condition on the C1 token or the C2 token; each variable owns its
/// token names, so the rows never collide.
#[derive(Clone, Debug)]
pub struct RandomTwoPremise {
    pub scm: DiscreteScm,
    pub expressions: Vec<Vec<Vec<TokenWeight>>>,
    pub mode: EmissionMode,
}

impl RandomTwoPremise {
    pub fn generate<R: Rng>(rng: &mut R, cfg: RandomConfig) -> Result<Self, ScmError> {
        let max_card = cfg.max_card.max(2);
        let max_alpha = cfg.max_alphabet.max(1);
        let cards: Vec<usize> = (0..3).map(|_| rng.gen_range(2..=max_card)).collect();
        let a_rows = (0..cards[0] * cards[1])
            .map(|_| random_row(rng, cards[2]))
            .collect();
        let scm = DiscreteScm::new(
            vec![
                Variable::new("C1", cards[0]),
                Variable::new("C2", cards[1]),
                Variable::new("A", cards[2]),
            ],
            vec![(0, 2), (1, 2)],
            vec![
                vec![random_row(rng, cards[0])],
                vec![random_row(rng, cards[1])],
                a_rows,
            ],
        )?;
        let mode = cfg.mode.unwrap_or_else(|| {
            if rng.gen_bool(0.5) {
                EmissionMode::PrevToken
            } else {
                EmissionMode::ContextFree
            }
        });

        let prefixes = ["c1_", "c2_", "a_"];
        let pools: Vec<Vec<String>> = (0..3)
            .map(|v| {
                let m = rng.gen_range(1..=max_alpha);
                (0..m).map(|j| format!("{}t{j}", prefixes[v])).collect()
            })
            .collect();
        let mut expressions: Vec<Vec<Vec<TokenWeight>>> = Vec::with_capacity(3);
        for v in 0..3 {
            let mut per_value = Vec::with_capacity(cards[v]);
            for _ in 0..cards[v] {
                let set = random_subset(rng, &pools[v]);
                let w = random_row(rng, set.len());
                let mut entries: Vec<TokenWeight> = set
                    .iter()
                    .zip(&w)
                    .map(|(t, &w)| TokenWeight::new(t.clone(), w))
                    .collect();
                if mode == EmissionMode::PrevToken {
                    // C1 always starts the sentence; C2 and A see a predecessor.
                    let conditioning: Vec<usize> = match v {
                        1 => vec![0, 2],
                        2 => vec![0, 1],
                        _ => vec![],
                    };
                    for u in conditioning {
                        for prev in &pools[u] {
                            if rng.gen_bool(0.5) {
                                let w = random_row(rng, set.len());
                                entries.extend(
                                    set.iter().zip(&w).map(|(t, &w)| {
                                        TokenWeight::after(t.clone(), w, prev.clone())
                                    }),
                                );
                            }
                        }
                    }
                }
                per_value.push(entries);
            }
            expressions.push(per_value);
        }
        Ok(Self {
            scm,
            expressions,
            mode,
        })
    }

    pub fn scheme(&self, order: PremiseOrder) -> Result<ExpressionScheme, ScmError> {
        ExpressionScheme::new(
            &self.scm,
            self.expressions.clone(),
            self.mode,
            vec![Ordering {
                perm: order.perm(),
                prob: 1.0,
            }],
        )
    }
}

/// Positive weights summing to one; sometimes sharpened toward a corner.
pub fn random_row<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let power = if rng.gen_bool(0.3) { 4 } else { 1 };
    let raw: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.02..1.0f64).powi(power))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn random_subset<R: Rng>(rng: &mut R, pool: &[String]) -> Vec<String> {
    let mut set: Vec<String> = pool.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
    if set.is_empty() {
        set.push(pool[rng.gen_range(0..pool.len())].clone());
    }
    set
}
