//! Decomposition of the conclusion posterior under imperfect understanding
//! of the premises, and the KL lower bound it implies.

use serde::Serialize;

use crate::scm::{
    conditional, evidence_mass, Evidence, JointTable, LatentConstraint, LatentQuery, TwoPremise,
};

use super::{kl_divergence, variational_distance, Distribution, GapError};

/// Evidence for a bound check: the true premise values and the tokens that
/// verbalized them.
#[derive(Clone, Debug, PartialEq)]
pub struct GapQuery {
    pub roles: TwoPremise,
    pub c1_star: usize,
    pub c2_star: usize,
    pub l1: String,
    pub l2: String,
}

/// `Ψ(A | L1, L2) = p · Pr(A | c1*, c2*) + (1 − p) · Ψ(A | complement, L1, L2)`
/// with every term read off the joint.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// `Ψ(c1*, c2* | L1, L2)`.
    pub p: f64,
    /// Enumerated `Ψ(A | L1, L2)`.
    pub lhs: Distribution,
    /// `p · truth + (1 − p) · complement`, aligned with `lhs`.
    pub rhs: Vec<f64>,
    /// `Pr(A | c1*, c2*)`.
    pub truth: Distribution,
    /// `Ψ(A | ¬(C1 = c1* ∧ C2 = c2*), L1, L2)`; `None` when the complement has no mass.
    pub complement: Option<Distribution>,
    pub max_abs_err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapReport {
    /// `D_KL(Pr(A | c1*, c2*) ‖ Ψ(A | L1, L2))` in nats.
    pub kl: f64,
    /// `(1 − p)² / 2 · V²`.
    pub pinsker_bound: f64,
    pub p_understood: f64,
    /// `V(Pr(A | c1*, c2*), Ψ(A | complement, L1, L2))`, unnormalized.
    pub v_distance: f64,
    pub slack: f64,
}

fn evidence(joint: &JointTable, q: &GapQuery) -> Result<Vec<Evidence>, GapError> {
    let scheme = joint.scheme();
    let scm = joint.scm();
    q.roles.validate(scm)?;
    if q.c1_star >= scm.cardinality(q.roles.c1) || q.c2_star >= scm.cardinality(q.roles.c2) {
        return Err(GapError::Query(format!(
            "premise values ({}, {}) out of range",
            q.c1_star, q.c2_star
        )));
    }
    Ok(vec![
        Evidence::VarToken {
            var: q.roles.c1,
            token: scheme.resolve(&q.l1)?,
        },
        Evidence::VarToken {
            var: q.roles.c2,
            token: scheme.resolve(&q.l2)?,
        },
    ])
}

/// Exact check of the mixture identity on an enumerated joint.
pub fn decomposition_check(joint: &JointTable, q: &GapQuery) -> Result<Decomposition, GapError> {
    let ev = evidence(joint, q)?;
    let total = evidence_mass(joint, &ev);
    if total.is_nan() || total <= 0.0 {
        return Err(GapError::ZeroEvidence);
    }
    let star = [(q.roles.c1, q.c1_star), (q.roles.c2, q.c2_star)];
    let mut with_star = ev.clone();
    with_star.extend(
        star.iter()
            .map(|&(var, value)| Evidence::Latent(LatentConstraint::Equals { var, value })),
    );
    let p = evidence_mass(joint, &with_star) / total;

    let lhs = conditional(
        joint,
        &LatentQuery {
            target: crate::scm::Target::Latent(q.roles.a),
            evidence: ev.clone(),
        },
    )?;

    let mut assignment = vec![0; 3];
    assignment[q.roles.c1] = q.c1_star;
    assignment[q.roles.c2] = q.c2_star;
    let truth = Distribution::indexed(joint.scm().cpt(q.roles.a).row(&assignment).to_vec())?;

    let mut comp_ev = ev;
    comp_ev.push(Evidence::Latent(LatentConstraint::NotAll(star.to_vec())));
    let complement = if evidence_mass(joint, &comp_ev) > 0.0 {
        Some(conditional(
            joint,
            &LatentQuery {
                target: crate::scm::Target::Latent(q.roles.a),
                evidence: comp_ev,
            },
        )?)
    } else if p < 1.0 {
        return Err(GapError::Query(format!(
            "complement has no mass but p = {p}"
        )));
    } else {
        None
    };

    let rhs: Vec<f64> = lhs
        .labels()
        .iter()
        .map(|l| {
            let t = truth.prob(l).unwrap_or(0.0);
            let c = complement.as_ref().and_then(|c| c.prob(l)).unwrap_or(0.0);
            p * t + (1.0 - p) * c
        })
        .collect();
    let max_abs_err = lhs
        .probs()
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Decomposition {
        p,
        lhs,
        rhs,
        truth,
        complement,
        max_abs_err,
    })
}

/// KL between the true conclusion distribution and the model posterior,
/// against `(1 − p)² / 2 · V²`.
pub fn theorem1_report(joint: &JointTable, q: &GapQuery) -> Result<GapReport, GapError> {
    let d = decomposition_check(joint, q)?;
    let kl = kl_divergence(&d.truth, &d.lhs)?;
    let v_distance = d
        .complement
        .as_ref()
        .map_or(0.0, |c| variational_distance(&d.truth, c));
    let pinsker_bound = if d.p >= 1.0 {
        0.0
    } else {
        (1.0 - d.p).powi(2) / 2.0 * v_distance * v_distance
    };
    Ok(GapReport {
        kl,
        pinsker_bound,
        p_understood: d.p,
        v_distance,
        slack: kl - pinsker_bound,
    })
}
