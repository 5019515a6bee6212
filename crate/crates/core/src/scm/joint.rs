//! Exact joint distribution over (latent assignment, ordering, token sequence).

use std::sync::Arc;

use super::expression::{ExpressionScheme, TokenId};
use super::model::{for_each_assignment, DiscreteScm};
use super::ScmError;

/// Default cap on the enumeration size bound.
pub const DEFAULT_BUDGET: usize = 10_000_000;

/// Tolerance on the total mass of an enumerated table.
pub const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct JointEntry {
    pub latent: Vec<usize>,
    /// Index into the scheme's orderings.
    pub ordering: usize,
    /// Tokens in slot order.
    pub tokens: Vec<TokenId>,
    pub prob: f64,
}

impl JointEntry {
    /// Token that expresses `var` in this entry.
    pub fn token_of(&self, var: usize, scheme: &ExpressionScheme) -> TokenId {
        let perm = &scheme.orderings()[self.ordering].perm;
        let slot = perm
            .iter()
            .position(|&v| v == var)
            .expect("perm covers every variable");
        self.tokens[slot]
    }

    pub fn slot_of(&self, var: usize, scheme: &ExpressionScheme) -> usize {
        scheme.orderings()[self.ordering]
            .perm
            .iter()
            .position(|&v| v == var)
            .expect("perm covers every variable")
    }
}

/// Zero-probability cells are not stored.
#[derive(Clone, Debug)]
pub struct JointTable {
    scm: Arc<DiscreteScm>,
    scheme: Arc<ExpressionScheme>,
    entries: Vec<JointEntry>,
}

impl JointTable {
    pub fn scm(&self) -> &DiscreteScm {
        &self.scm
    }

    pub fn scheme(&self) -> &ExpressionScheme {
        &self.scheme
    }

    pub fn entries(&self) -> &[JointEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.prob).sum()
    }

    /// Mass of every entry satisfying `pred`.
    pub fn mass_where(&self, mut pred: impl FnMut(&JointEntry) -> bool) -> f64 {
        self.entries
            .iter()
            .filter(|e| pred(e))
            .map(|e| e.prob)
            .sum()
    }

    /// Marginal over latent assignments, indexed in mixed-radix order
    /// (last variable fastest).
    pub fn latent_marginal(&self) -> Vec<f64> {
        let cards: Vec<usize> = self.scm.variables().iter().map(|v| v.cardinality).collect();
        let mut out = vec![0.0; self.scm.latent_configurations()];
        for e in &self.entries {
            let idx = e
                .latent
                .iter()
                .zip(&cards)
                .fold(0, |acc, (&x, &c)| acc * c + x);
            out[idx] += e.prob;
        }
        out
    }

    /// Tokens that occur at `slot` with positive probability, sorted by id.
    pub fn slot_support(&self, slot: usize) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = self
            .entries
            .iter()
            .filter_map(|e| e.tokens.get(slot).copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Tokens that express `var` with positive probability, sorted by id.
    pub fn var_support(&self, var: usize) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = self
            .entries
            .iter()
            .map(|e| e.token_of(var, &self.scheme))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Upper bound on the number of cells `enumerate_joint` would visit.
pub fn enumeration_size(scm: &DiscreteScm, scheme: &ExpressionScheme) -> usize {
    let mut n = scm
        .latent_configurations()
        .saturating_mul(scheme.orderings().len());
    for v in 0..scm.len() {
        n = n.saturating_mul(scheme.max_set_size(v).max(1));
    }
    n
}

pub fn enumerate_joint(
    scm: &DiscreteScm,
    scheme: &ExpressionScheme,
) -> Result<JointTable, ScmError> {
    enumerate_joint_with_budget(scm, scheme, DEFAULT_BUDGET)
}

/// `Pr(x, π, l) = Pr(x) · Pr(π) · Π_k Pr(l_k | X_{π(k)} = x_{π(k)}, context)`,
/// accumulated in log space.
pub fn enumerate_joint_with_budget(
    scm: &DiscreteScm,
    scheme: &ExpressionScheme,
    budget: usize,
) -> Result<JointTable, ScmError> {
    let needed = enumeration_size(scm, scheme);
    if needed > budget {
        return Err(ScmError::BudgetExceeded { needed, budget });
    }
    if scheme.orderings().iter().any(|o| o.perm.len() != scm.len()) {
        return Err(ScmError::Ordering(
            "ordering length does not match the SCM".into(),
        ));
    }

    let cards: Vec<usize> = scm.variables().iter().map(|v| v.cardinality).collect();
    let mut entries = Vec::new();
    let mut tokens = Vec::with_capacity(scm.len());
    for_each_assignment(&cards, |x| {
        let mut log_latent = 0.0;
        for &v in scm.topological_order() {
            let p = scm.cpt_prob(v, x[v], x);
            if p <= 0.0 {
                return;
            }
            log_latent += p.ln();
        }
        for (oi, ordering) in scheme.orderings().iter().enumerate() {
            if ordering.prob <= 0.0 {
                continue;
            }
            let base = log_latent + ordering.prob.ln();
            tokens.clear();
            expand_slots(
                scheme,
                &ordering.perm,
                x,
                oi,
                base,
                &mut tokens,
                &mut entries,
            );
        }
    });

    let table = JointTable {
        scm: Arc::new(scm.clone()),
        scheme: Arc::new(scheme.clone()),
        entries,
    };
    let mass = table.total_mass();
    debug_assert!((mass - 1.0).abs() <= MASS_TOLERANCE, "joint mass {mass}");
    Ok(table)
}

fn expand_slots(
    scheme: &ExpressionScheme,
    perm: &[usize],
    x: &[usize],
    ordering: usize,
    log_prob: f64,
    tokens: &mut Vec<TokenId>,
    out: &mut Vec<JointEntry>,
) {
    let slot = tokens.len();
    if slot == perm.len() {
        let prob = log_prob.exp();
        // Cells whose mass underflows are dropped with the exact zeros.
        if prob > 0.0 {
            out.push(JointEntry {
                latent: x.to_vec(),
                ordering,
                tokens: tokens.clone(),
                prob,
            });
        }
        return;
    }
    let var = perm[slot];
    let prev = tokens.last().copied();
    for &(t, w) in scheme.emission_row(var, x[var], prev) {
        if w <= 0.0 {
            continue;
        }
        tokens.push(t);
        expand_slots(scheme, perm, x, ordering, log_prob + w.ln(), tokens, out);
        tokens.pop();
    }
}
