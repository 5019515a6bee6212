//! Exact Bayes conditionals read off a [`JointTable`].

use super::expression::TokenId;
use super::joint::{JointEntry, JointTable};
use super::ScmError;
use crate::gap::Distribution;

#[derive(Clone, Debug, PartialEq)]
pub enum LatentConstraint {
    Equals {
        var: usize,
        value: usize,
    },
    /// Complement of a conjunction, e.g. `¬(C1 = c1* ∧ C2 = c2*)`.
    NotAll(Vec<(usize, usize)>),
}

impl LatentConstraint {
    fn holds(&self, latent: &[usize]) -> bool {
        match self {
            Self::Equals { var, value } => latent[*var] == *value,
            Self::NotAll(cells) => !cells.iter().all(|&(v, x)| latent[v] == x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Evidence {
    /// Token observed at a slot position.
    Slot {
        slot: usize,
        token: TokenId,
    },
    /// Token expressing a given variable, wherever its slot is.
    VarToken {
        var: usize,
        token: TokenId,
    },
    /// The tokens immediately preceding the slot of `var`, oldest first.
    PrefixBefore {
        var: usize,
        tokens: Vec<TokenId>,
    },
    Ordering(usize),
    Latent(LatentConstraint),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Latent(usize),
    Slot(usize),
    VarToken(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentQuery {
    pub target: Target,
    pub evidence: Vec<Evidence>,
}

impl LatentQuery {
    pub fn latent(var: usize) -> Self {
        Self {
            target: Target::Latent(var),
            evidence: Vec::new(),
        }
    }

    pub fn slot(slot: usize) -> Self {
        Self {
            target: Target::Slot(slot),
            evidence: Vec::new(),
        }
    }

    pub fn given(mut self, e: Evidence) -> Self {
        self.evidence.push(e);
        self
    }

    pub fn given_latent(self, var: usize, value: usize) -> Self {
        self.given(Evidence::Latent(LatentConstraint::Equals { var, value }))
    }

    pub fn validate(&self, table: &JointTable) -> Result<(), ScmError> {
        let d = table.scm().len();
        let bad = |what: String| Err(ScmError::InvalidQuery(what));
        match self.target {
            Target::Latent(v) | Target::VarToken(v) if v >= d => {
                return bad(format!("variable {v} does not exist"))
            }
            Target::Slot(s) if s >= d => return bad(format!("slot {s} does not exist")),
            _ => {}
        }
        let mut fixed: Vec<Option<usize>> = vec![None; d];
        let mut exclusions: Vec<&[(usize, usize)]> = Vec::new();
        for e in &self.evidence {
            match e {
                Evidence::Slot { slot, .. } if *slot >= d => {
                    return bad(format!("slot {slot} does not exist"))
                }
                Evidence::VarToken { var, .. } | Evidence::PrefixBefore { var, .. }
                    if *var >= d =>
                {
                    return bad(format!("variable {var} does not exist"))
                }
                Evidence::Ordering(o) if *o >= table.scheme().orderings().len() => {
                    return bad(format!("ordering {o} does not exist"))
                }
                Evidence::Latent(LatentConstraint::Equals { var, value }) => {
                    if *var >= d || *value >= table.scm().cardinality(*var) {
                        return bad(format!("latent cell ({var}, {value}) does not exist"));
                    }
                    match fixed[*var] {
                        Some(prev) if prev != *value => {
                            return Err(ScmError::Contradictory(format!(
                                "variable {var} constrained to both {prev} and {value}"
                            )))
                        }
                        _ => fixed[*var] = Some(*value),
                    }
                }
                Evidence::Latent(LatentConstraint::NotAll(cells)) => {
                    for &(var, value) in cells {
                        if var >= d || value >= table.scm().cardinality(var) {
                            return bad(format!("latent cell ({var}, {value}) does not exist"));
                        }
                    }
                    if cells.is_empty() {
                        return Err(ScmError::Contradictory(
                            "complement of the sure event".into(),
                        ));
                    }
                    exclusions.push(cells);
                }
                _ => {}
            }
        }
        for cells in exclusions {
            if cells.iter().all(|&(v, x)| fixed[v] == Some(x)) {
                return Err(ScmError::Contradictory(
                    "equality constraints fall inside an excluded cell".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Does `entry` satisfy every piece of evidence?
pub fn satisfies(table: &JointTable, entry: &JointEntry, evidence: &[Evidence]) -> bool {
    let scheme = table.scheme();
    evidence.iter().all(|e| match e {
        Evidence::Slot { slot, token } => entry.tokens[*slot] == *token,
        Evidence::VarToken { var, token } => entry.token_of(*var, scheme) == *token,
        Evidence::PrefixBefore { var, tokens } => {
            let slot = entry.slot_of(*var, scheme);
            slot >= tokens.len() && entry.tokens[slot - tokens.len()..slot] == tokens[..]
        }
        Evidence::Ordering(o) => entry.ordering == *o,
        Evidence::Latent(c) => c.holds(&entry.latent),
    })
}

/// Probability of the evidence event.
pub fn evidence_mass(table: &JointTable, evidence: &[Evidence]) -> f64 {
    table.mass_where(|e| satisfies(table, e, evidence))
}

/// Exact conditional distribution of the query target.
///
/// Latent targets are labelled by value index; token targets by token string,
/// over every token the target takes with positive prior probability.
pub fn conditional(table: &JointTable, query: &LatentQuery) -> Result<Distribution, ScmError> {
    query.validate(table)?;
    let scheme = table.scheme();
    let (labels, keys): (Vec<String>, Vec<u64>) = match query.target {
        Target::Latent(v) => (0..table.scm().cardinality(v))
            .map(|x| (x.to_string(), x as u64))
            .unzip(),
        Target::Slot(s) => table
            .slot_support(s)
            .into_iter()
            .map(|t| (scheme.token(t).to_string(), t as u64))
            .unzip(),
        Target::VarToken(v) => table
            .var_support(v)
            .into_iter()
            .map(|t| (scheme.token(t).to_string(), t as u64))
            .unzip(),
    };
    let mut mass = vec![0.0; labels.len()];
    let mut total = 0.0;
    for e in table.entries() {
        if !satisfies(table, e, &query.evidence) {
            continue;
        }
        let key = match query.target {
            Target::Latent(v) => e.latent[v] as u64,
            Target::Slot(s) => e.tokens[s] as u64,
            Target::VarToken(v) => e.token_of(v, scheme) as u64,
        };
        let idx = keys
            .iter()
            .position(|&k| k == key)
            .expect("support covers every entry");
        mass[idx] += e.prob;
        total += e.prob;
    }
    if total.is_nan() || total <= 0.0 {
        return Err(ScmError::Unconditionable);
    }
    for m in &mut mass {
        *m /= total;
    }
    Distribution::new(labels, mass).map_err(|e| ScmError::InvalidQuery(e.to_string()))
}
