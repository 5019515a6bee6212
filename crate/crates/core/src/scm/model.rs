//! Discrete SCM over finite-valued latent variables, represented by the
//! conditional probability tables its structural assignments induce.

use serde::{Deserialize, Serialize};

use super::ScmError;

/// Tolerance for row normalization of CPTs and emission weights.
pub const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Self {
            name: name.into(),
            cardinality,
        }
    }
}

/// Conditional probability table `Pr(X_i | Pa(X_i))`.
///
/// Parents are kept in ascending variable-index order. Rows enumerate parent
/// configurations in row-major order, the last parent varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    parents: Vec<usize>,
    strides: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn row_index(&self, assignment: &[usize]) -> usize {
        self.parents
            .iter()
            .zip(&self.strides)
            .map(|(&p, &s)| assignment[p] * s)
            .sum()
    }

    /// Row of the table selected by the parent values inside a full assignment.
    pub fn row(&self, assignment: &[usize]) -> &[f64] {
        &self.rows[self.row_index(assignment)]
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteScm {
    variables: Vec<Variable>,
    edges: Vec<(usize, usize)>,
    cpts: Vec<Cpt>,
    topo_order: Vec<usize>,
}

impl DiscreteScm {
    /// Validates the graph and tables. `cpts[i]` lists the rows of variable
    /// `i` in parent-configuration order (see [`Cpt`]).
    pub fn new(
        variables: Vec<Variable>,
        edges: Vec<(usize, usize)>,
        cpts: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, ScmError> {
        let d = variables.len();
        if d == 0 {
            return Err(ScmError::Invalid(
                "an SCM needs at least one variable".into(),
            ));
        }
        for v in &variables {
            if v.cardinality < 2 {
                return Err(ScmError::Invalid(format!(
                    "variable `{}` has cardinality {}; at least 2 is required",
                    v.name, v.cardinality
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(p, c) in &edges {
            if p >= d || c >= d {
                return Err(ScmError::Invalid(format!(
                    "edge ({p}, {c}) references a missing variable"
                )));
            }
            if p == c {
                return Err(ScmError::Cyclic);
            }
            if !seen.insert((p, c)) {
                return Err(ScmError::Invalid(format!("duplicate edge ({p}, {c})")));
            }
        }
        let topo_order = topological_sort(d, &edges).ok_or(ScmError::Cyclic)?;
        if cpts.len() != d {
            return Err(ScmError::CptShape(format!(
                "expected {d} tables, found {}",
                cpts.len()
            )));
        }

        let mut tables = Vec::with_capacity(d);
        for (i, rows) in cpts.into_iter().enumerate() {
            let mut parents: Vec<usize> = edges.iter().filter(|e| e.1 == i).map(|e| e.0).collect();
            parents.sort_unstable();
            let mut strides = vec![1; parents.len()];
            for k in (0..parents.len().saturating_sub(1)).rev() {
                strides[k] = strides[k + 1] * variables[parents[k + 1]].cardinality;
            }
            let configs: usize = parents.iter().map(|&p| variables[p].cardinality).product();
            let name = &variables[i].name;
            if rows.len() != configs {
                return Err(ScmError::CptShape(format!(
                    "`{name}` has {} parent configurations but {} rows",
                    configs,
                    rows.len()
                )));
            }
            for (r, row) in rows.iter().enumerate() {
                if row.len() != variables[i].cardinality {
                    return Err(ScmError::CptShape(format!(
                        "`{name}` row {r} has {} entries, cardinality is {}",
                        row.len(),
                        variables[i].cardinality
                    )));
                }
                check_row(row).map_err(|why| ScmError::CptRow {
                    variable: name.clone(),
                    row: r,
                    why,
                })?;
            }
            tables.push(Cpt {
                parents,
                strides,
                rows,
            });
        }
        Ok(Self {
            variables,
            edges,
            cpts: tables,
            topo_order,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn cpt(&self, var: usize) -> &Cpt {
        &self.cpts[var]
    }

    pub fn parents(&self, var: usize) -> &[usize] {
        &self.cpts[var].parents
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.variables[var].cardinality
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// `Pr(X_var = value | parents as in assignment)`.
    pub fn cpt_prob(&self, var: usize, value: usize, assignment: &[usize]) -> f64 {
        self.cpts[var].row(assignment)[value]
    }

    /// Number of joint latent configurations.
    pub fn latent_configurations(&self) -> usize {
        self.variables.iter().map(|v| v.cardinality).product()
    }

    /// Chain-product probability of a full latent assignment.
    pub fn latent_prob(&self, assignment: &[usize]) -> f64 {
        self.topo_order
            .iter()
            .map(|&v| self.cpt_prob(v, assignment[v], assignment))
            .product()
    }

    /// Replace the table of `var`, keeping the graph.
    pub fn with_cpt(&self, var: usize, rows: Vec<Vec<f64>>) -> Result<Self, ScmError> {
        let mut cpts: Vec<Vec<Vec<f64>>> = self.cpts.iter().map(|c| c.rows.clone()).collect();
        cpts[var] = rows;
        Self::new(self.variables.clone(), self.edges.clone(), cpts)
    }
}

/// Iterate all latent assignments in mixed-radix order, last variable fastest.
pub(crate) fn for_each_assignment(cards: &[usize], mut f: impl FnMut(&[usize])) {
    let mut current = vec![0usize; cards.len()];
    loop {
        f(&current);
        let mut k = cards.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            current[k] += 1;
            if current[k] < cards[k] {
                break;
            }
            current[k] = 0;
        }
    }
}

pub(crate) fn check_row(row: &[f64]) -> Result<(), String> {
    if let Some(w) = row.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(format!("entry {w} is not a nonnegative number"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(format!("row sums to {sum}"));
    }
    Ok(())
}

fn topological_sort(d: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; d];
    for &(_, c) in edges {
        indegree[c] += 1;
    }
    // Smallest ready index first keeps the order deterministic.
    let mut ready: std::collections::BTreeSet<usize> =
        (0..d).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &(p, c) in edges {
            if p == v {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
    }
    (order.len() == d).then_some(order)
}
