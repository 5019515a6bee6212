//! How sharply a token (alone, or with its preceding context) identifies the
//! latent value it verbalizes.

use crate::scm::{conditional, evidence_mass, Evidence, JointTable, LatentQuery, TokenId};

use super::GapError;

fn score(
    joint: &JointTable,
    var: usize,
    value: usize,
    evidence: Vec<Evidence>,
) -> Result<f64, GapError> {
    if var >= joint.scm().len() || value >= joint.scm().cardinality(var) {
        return Err(GapError::Query(format!(
            "no value {value} of variable {var}"
        )));
    }
    let mass = evidence_mass(joint, &evidence);
    if mass.is_nan() || mass <= 0.0 {
        return Err(GapError::ZeroEvidence);
    }
    let post = conditional(
        joint,
        &LatentQuery {
            target: crate::scm::Target::Latent(var),
            evidence,
        },
    )?;
    Ok(post.prob(&value.to_string()).unwrap_or(0.0))
}

/// `Pr(X = x | L_X = token)`.
pub fn l_explicitness_score(
    joint: &JointTable,
    var: usize,
    value: usize,
    token: &str,
) -> Result<f64, GapError> {
    let token = joint.scheme().resolve(token)?;
    score(joint, var, value, vec![Evidence::VarToken { var, token }])
}

/// `Pr(X = x | q, L_X = token)` where `q` is the token sequence directly
/// before `L_X`. An empty prefix reduces to the L-score.
pub fn q_explicitness_score(
    joint: &JointTable,
    var: usize,
    value: usize,
    prefix: &[&str],
    token: &str,
) -> Result<f64, GapError> {
    let scheme = joint.scheme();
    let token = scheme.resolve(token)?;
    let mut evidence = vec![Evidence::VarToken { var, token }];
    if !prefix.is_empty() {
        let tokens = prefix
            .iter()
            .map(|t| scheme.resolve(t))
            .collect::<Result<Vec<TokenId>, _>>()?;
        evidence.push(Evidence::PrefixBefore { var, tokens });
    }
    score(joint, var, value, evidence)
}
