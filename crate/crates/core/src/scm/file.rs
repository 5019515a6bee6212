//! JSON specification files shared by the CLI and test fixtures.
//!
//! ```json
//! {
//!   "variables": [{"name": "C1", "cardinality": 2}, ...],
//!   "edges": [[0, 2], [1, 2]],
//!   "cpts": [[[0.5, 0.5]], [[0.2, 0.8]], [[1, 0], [1, 0], [1, 0], [0, 1]]],
//!   "expressions": {"C1": {"0": [{"token": "cold", "weight": 1.0}], ...}, ...},
//!   "orderings": [{"perm": [0, 2, 1], "prob": 1.0}],
//!   "emission_mode": "context_free"
//! }
//! ```
//!
//! Variables are referenced by 0-based index in `edges` and `orderings`.
//! `cpts[i]` holds one row per parent configuration; parents are taken in
//! ascending index order with the last parent varying fastest. Expression
//! keys may be variable names or indices. Ordering probabilities default to
//! uniform when every `prob` is omitted. Optional `roles` names the C1, C2
//! and A variables (default: indices 0, 1, 2) and optional `query` fixes the
//! `c1_star`, `c2_star`, `l1`, `l2` evidence used by theorem checks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::example::TwoPremise;
use super::expression::{EmissionMode, ExpressionScheme, Ordering, TokenWeight};
use super::model::{DiscreteScm, Variable};
use super::ScmError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarRef {
    Index(usize),
    Name(String),
}

impl VarRef {
    fn resolve(&self, variables: &[Variable]) -> Result<usize, ScmError> {
        match self {
            VarRef::Index(i) if *i < variables.len() => Ok(*i),
            VarRef::Name(n) => {
                if let Some(i) = variables.iter().position(|v| &v.name == n) {
                    return Ok(i);
                }
                match n.parse::<usize>() {
                    Ok(i) if i < variables.len() => Ok(i),
                    _ => Err(ScmError::Invalid(format!("unknown variable `{n}`"))),
                }
            }
            VarRef::Index(i) => Err(ScmError::Invalid(format!(
                "variable index {i} out of range"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingSpec {
    pub perm: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub c1: VarRef,
    pub c2: VarRef,
    pub a: VarRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub c1_star: usize,
    pub c2_star: usize,
    pub l1: String,
    pub l2: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmFile {
    pub variables: Vec<Variable>,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    pub cpts: Vec<Vec<Vec<f64>>>,
    pub expressions: BTreeMap<String, BTreeMap<String, Vec<TokenWeight>>>,
    pub orderings: Vec<OrderingSpec>,
    #[serde(default)]
    pub emission_mode: EmissionMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<RoleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QuerySpec>,
}

#[derive(Clone, Debug)]
pub struct LoadedScm {
    pub scm: DiscreteScm,
    pub scheme: ExpressionScheme,
    pub roles: TwoPremise,
    pub query: Option<QuerySpec>,
}

impl ScmFile {
    pub fn load(path: &Path) -> Result<LoadedScm, ScmError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScmError::File {
            path: path.display().to_string(),
            why: e.to_string(),
        })?;
        let file: ScmFile = serde_json::from_str(&text).map_err(|e| ScmError::File {
            path: path.display().to_string(),
            why: e.to_string(),
        })?;
        file.build().map_err(|e| ScmError::File {
            path: path.display().to_string(),
            why: e.to_string(),
        })
    }

    pub fn build(&self) -> Result<LoadedScm, ScmError> {
        let scm = DiscreteScm::new(
            self.variables.clone(),
            self.edges.iter().map(|e| (e[0], e[1])).collect(),
            self.cpts.clone(),
        )?;
        let mut expressions: Vec<Vec<Vec<TokenWeight>>> = scm
            .variables()
            .iter()
            .map(|v| vec![Vec::new(); v.cardinality])
            .collect();
        for (key, per_value) in &self.expressions {
            let var = VarRef::Name(key.clone()).resolve(scm.variables())?;
            for (value_key, entries) in per_value {
                let value: usize = value_key
                    .parse()
                    .ok()
                    .filter(|&x| x < scm.cardinality(var))
                    .ok_or_else(|| {
                        ScmError::Expression(format!("`{key}` has no value `{value_key}`"))
                    })?;
                expressions[var][value] = entries.clone();
            }
        }
        let given = self.orderings.iter().filter(|o| o.prob.is_some()).count();
        let orderings = if given == 0 {
            let p = 1.0 / self.orderings.len().max(1) as f64;
            self.orderings
                .iter()
                .map(|o| Ordering {
                    perm: o.perm.clone(),
                    prob: p,
                })
                .collect()
        } else if given == self.orderings.len() {
            self.orderings
                .iter()
                .map(|o| Ordering {
                    perm: o.perm.clone(),
                    prob: o.prob.unwrap_or_default(),
                })
                .collect()
        } else {
            return Err(ScmError::Ordering(
                "either every ordering carries a prob or none does".into(),
            ));
        };
        let scheme = ExpressionScheme::new(&scm, expressions, self.emission_mode, orderings)?;
        let roles = match &self.roles {
            None => TwoPremise::default(),
            Some(r) => TwoPremise {
                c1: r.c1.resolve(scm.variables())?,
                c2: r.c2.resolve(scm.variables())?,
                a: r.a.resolve(scm.variables())?,
            },
        };
        Ok(LoadedScm {
            scm,
            scheme,
            roles,
            query: self.query.clone(),
        })
    }

    pub fn from_model(scm: &DiscreteScm, scheme: &ExpressionScheme) -> Self {
        let weights = scheme.to_token_weights();
        let expressions = scm
            .variables()
            .iter()
            .zip(weights)
            .map(|(v, per_value)| {
                let inner = per_value
                    .into_iter()
                    .enumerate()
                    .map(|(x, entries)| (x.to_string(), entries))
                    .collect();
                (v.name.clone(), inner)
            })
            .collect();
        Self {
            variables: scm.variables().to_vec(),
            edges: scm.edges().iter().map(|&(p, c)| [p, c]).collect(),
            cpts: (0..scm.len()).map(|v| scm.cpt(v).rows().to_vec()).collect(),
            expressions,
            orderings: scheme
                .orderings()
                .iter()
                .map(|o| OrderingSpec {
                    perm: o.perm.clone(),
                    prob: Some(o.prob),
                })
                .collect(),
            emission_mode: scheme.mode(),
            roles: None,
            query: None,
        }
    }
}
