//! Expression sets `L_{X=x}`, emission weights and token orderings.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::model::{check_row, DiscreteScm, ROW_TOLERANCE};
use super::ScmError;

pub type TokenId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmissionMode {
    /// `Pr(L_i | X_i = x)`.
    #[default]
    ContextFree,
    /// `Pr(L_i | X_i = x, preceding token)`, falling back to the default row.
    PrevToken,
}

/// One weighted token in an expression row, as written by users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenWeight {
    pub token: String,
    pub weight: f64,
    /// Preceding token this weight is conditioned on (`prev_token` mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<String>,
}

impl TokenWeight {
    pub fn new(token: impl Into<String>, weight: f64) -> Self {
        Self {
            token: token.into(),
            weight,
            after: None,
        }
    }

    pub fn after(token: impl Into<String>, weight: f64, prev: impl Into<String>) -> Self {
        Self {
            token: token.into(),
            weight,
            after: Some(prev.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ordering {
    pub perm: Vec<usize>,
    pub prob: f64,
}

type Row = Vec<(TokenId, f64)>;

#[derive(Clone, Debug)]
struct ValueExpression {
    default: Row,
    after: HashMap<TokenId, Row>,
}

#[derive(Clone, Debug)]
pub struct ExpressionScheme {
    alphabet: Vec<String>,
    lookup: HashMap<String, TokenId>,
    mode: EmissionMode,
    values: Vec<Vec<ValueExpression>>,
    orderings: Vec<Ordering>,
}

impl ExpressionScheme {
    /// `expressions[var][value]` lists the weighted tokens for `X_var = value`.
    /// Entries without `after` form the expression set and its default row;
    /// each distinct `after` token forms an additional conditioned row whose
    /// tokens must come from the expression set.
    pub fn new(
        scm: &DiscreteScm,
        expressions: Vec<Vec<Vec<TokenWeight>>>,
        mode: EmissionMode,
        orderings: Vec<Ordering>,
    ) -> Result<Self, ScmError> {
        let d = scm.len();
        if expressions.len() != d {
            return Err(ScmError::Expression(format!(
                "expected expressions for {d} variables, found {}",
                expressions.len()
            )));
        }
        let mut interner = Interner::default();

        let mut values = Vec::with_capacity(d);
        for (var, per_value) in expressions.into_iter().enumerate() {
            let name = &scm.variables()[var].name;
            if per_value.len() != scm.cardinality(var) {
                return Err(ScmError::Expression(format!(
                    "`{name}` has cardinality {} but {} expression sets",
                    scm.cardinality(var),
                    per_value.len()
                )));
            }
            let mut out = Vec::with_capacity(per_value.len());
            for (value, entries) in per_value.into_iter().enumerate() {
                let mut default = Row::new();
                let mut after: BTreeMap<String, Row> = BTreeMap::new();
                for e in &entries {
                    let id = interner.intern(&e.token);
                    match &e.after {
                        None => default.push((id, e.weight)),
                        Some(prev) => {
                            if mode == EmissionMode::ContextFree {
                                return Err(ScmError::Expression(format!(
                                    "`{name}={value}` has a conditioned row but the emission mode is context_free"
                                )));
                            }
                            after.entry(prev.clone()).or_default().push((id, e.weight))
                        }
                    }
                }
                if default.is_empty() {
                    return Err(ScmError::Expression(format!(
                        "`{name}={value}` has an empty expression set"
                    )));
                }
                check_tokens(&default, name, value)?;
                let set: HashSet<TokenId> = default.iter().map(|e| e.0).collect();
                let mut after_rows = HashMap::new();
                for (prev, row) in after {
                    check_tokens(&row, name, value)?;
                    if let Some(&(t, _)) = row.iter().find(|(t, _)| !set.contains(t)) {
                        return Err(ScmError::TokenOutsideExpression {
                            token: interner.alphabet[t as usize].clone(),
                            variable: name.clone(),
                            value,
                        });
                    }
                    let prev_id = interner.intern(&prev);
                    after_rows.insert(prev_id, row);
                }
                out.push(ValueExpression {
                    default,
                    after: after_rows,
                });
            }
            values.push(out);
        }

        validate_orderings(&orderings, d)?;
        Ok(Self {
            alphabet: interner.alphabet,
            lookup: interner.lookup,
            mode,
            values,
            orderings,
        })
    }

    /// Same expressions, different ordering distribution.
    pub fn with_orderings(&self, orderings: Vec<Ordering>) -> Result<Self, ScmError> {
        validate_orderings(&orderings, self.values.len())?;
        Ok(Self {
            orderings,
            ..self.clone()
        })
    }

    pub fn mode(&self) -> EmissionMode {
        self.mode
    }

    pub fn orderings(&self) -> &[Ordering] {
        &self.orderings
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.alphabet[id as usize]
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.lookup.get(token).copied()
    }

    pub fn resolve(&self, token: &str) -> Result<TokenId, ScmError> {
        self.token_id(token)
            .ok_or_else(|| ScmError::UnknownToken(token.to_string()))
    }

    /// Tokens of `L_{X_var = value}` with their default weights.
    pub fn expression_set(&self, var: usize, value: usize) -> &[(TokenId, f64)] {
        &self.values[var][value].default
    }

    /// Largest expression set of a variable across its values.
    pub fn max_set_size(&self, var: usize) -> usize {
        self.values[var]
            .iter()
            .map(|v| v.default.len())
            .max()
            .unwrap_or(0)
    }

    /// Emission row for `X_var = value` given the token in the previous slot.
    pub fn emission_row(
        &self,
        var: usize,
        value: usize,
        prev: Option<TokenId>,
    ) -> &[(TokenId, f64)] {
        let expr = &self.values[var][value];
        match (self.mode, prev) {
            (EmissionMode::PrevToken, Some(p)) => expr.after.get(&p).unwrap_or(&expr.default),
            _ => &expr.default,
        }
    }

    pub fn emission_weight(
        &self,
        var: usize,
        value: usize,
        prev: Option<TokenId>,
        token: TokenId,
    ) -> f64 {
        self.emission_row(var, value, prev)
            .iter()
            .find(|(t, _)| *t == token)
            .map_or(0.0, |(_, w)| *w)
    }

    /// Inverse of [`ExpressionScheme::new`]'s input, keyed by token strings.
    pub fn to_token_weights(&self) -> Vec<Vec<Vec<TokenWeight>>> {
        self.values
            .iter()
            .map(|per_value| {
                per_value
                    .iter()
                    .map(|expr| {
                        let mut out: Vec<TokenWeight> = expr
                            .default
                            .iter()
                            .map(|&(t, w)| TokenWeight::new(self.token(t), w))
                            .collect();
                        let mut prevs: Vec<_> = expr.after.keys().copied().collect();
                        prevs.sort_by(|a, b| self.token(*a).cmp(self.token(*b)));
                        for p in prevs {
                            for &(t, w) in &expr.after[&p] {
                                out.push(TokenWeight::after(self.token(t), w, self.token(p)));
                            }
                        }
                        out
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Default)]
struct Interner {
    alphabet: Vec<String>,
    lookup: HashMap<String, TokenId>,
}

impl Interner {
    fn intern(&mut self, t: &str) -> TokenId {
        if let Some(&id) = self.lookup.get(t) {
            return id;
        }
        let id = self.alphabet.len() as TokenId;
        self.alphabet.push(t.to_string());
        self.lookup.insert(t.to_string(), id);
        id
    }
}

fn check_tokens(row: &Row, variable: &str, value: usize) -> Result<(), ScmError> {
    let mut seen = HashSet::new();
    if row.iter().any(|(t, _)| !seen.insert(*t)) {
        return Err(ScmError::Expression(format!(
            "`{variable}={value}` lists a token twice in one row"
        )));
    }
    let weights: Vec<f64> = row.iter().map(|e| e.1).collect();
    check_row(&weights).map_err(|why| ScmError::Expression(format!("`{variable}={value}`: {why}")))
}

fn validate_orderings(orderings: &[Ordering], d: usize) -> Result<(), ScmError> {
    if orderings.is_empty() {
        return Err(ScmError::Ordering(
            "at least one ordering is required".into(),
        ));
    }
    let mut seen = HashSet::new();
    for o in orderings {
        let mut sorted = o.perm.clone();
        sorted.sort_unstable();
        if sorted != (0..d).collect::<Vec<_>>() {
            return Err(ScmError::Ordering(format!(
                "{:?} is not a permutation of 0..{d}",
                o.perm
            )));
        }
        if !seen.insert(o.perm.clone()) {
            return Err(ScmError::Ordering(format!("{:?} listed twice", o.perm)));
        }
        if !o.prob.is_finite() || o.prob < 0.0 {
            return Err(ScmError::Ordering(format!(
                "{:?} has probability {}",
                o.perm, o.prob
            )));
        }
    }
    let total: f64 = orderings.iter().map(|o| o.prob).sum();
    if (total - 1.0).abs() > ROW_TOLERANCE {
        return Err(ScmError::Ordering(format!(
            "ordering probabilities sum to {total}"
        )));
    }
    Ok(())
}

/// Uniform distribution over candidate permutations.
pub fn uniform_orderings(perms: Vec<Vec<usize>>) -> Vec<Ordering> {
    let p = 1.0 / perms.len().max(1) as f64;
    perms
        .into_iter()
        .map(|perm| Ordering { perm, prob: p })
        .collect()
}
