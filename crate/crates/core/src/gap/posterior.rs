//! Closed-form next-token posteriors of the two-premise model, computed
//! factor by factor from the CPTs and emission rows. The enumerated joint is
//! their independent check.

use crate::scm::{JointTable, TokenId, TwoPremise};

use super::{Distribution, GapError};

fn check_orderings(joint: &JointTable, want: &[usize], what: &str) -> Result<(), GapError> {
    for o in joint.scheme().orderings() {
        if o.prob > 0.0 && o.perm != want {
            return Err(GapError::Ordering(format!(
                "ordering {:?} is not the {what} order {want:?}",
                o.perm
            )));
        }
    }
    Ok(())
}

fn assignment(roles: TwoPremise, c1: usize, c2: usize, a: usize) -> [usize; 3] {
    let mut x = [0; 3];
    x[roles.c1] = c1;
    x[roles.c2] = c2;
    x[roles.a] = a;
    x
}

/// `Pr(C1 | L1 = l1)` by Bayes over the root prior.
fn premise_posterior(
    joint: &JointTable,
    var: usize,
    prev: Option<TokenId>,
    token: TokenId,
) -> Result<Vec<f64>, GapError> {
    let scm = joint.scm();
    let scheme = joint.scheme();
    let prior = scm.cpt(var).row(&[0; 3]);
    let mut post: Vec<f64> = (0..scm.cardinality(var))
        .map(|x| prior[x] * scheme.emission_weight(var, x, prev, token))
        .collect();
    let total: f64 = post.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(GapError::ZeroEvidence);
    }
    for p in &mut post {
        *p /= total;
    }
    Ok(post)
}

fn token_distribution(
    joint: &JointTable,
    slot: usize,
    mass: Vec<f64>,
) -> Result<Distribution, GapError> {
    let support = joint.slot_support(slot);
    let labels = support
        .iter()
        .map(|&t| joint.scheme().token(t).to_string())
        .collect();
    Distribution::new(labels, mass)
}

/// Right-hand side of the shortcut identity for conclusion-first text
/// `(C1, A, C2)`:
///
/// `Σ_{c1,c2,a} Pr(c1 | l1) · Pr(c2) · Pr(a | c1, c2) · Pr(L_A | a, l1)`.
///
/// The unseen premise enters only through its population marginal `Pr(C2)`.
pub fn shortcut_distribution(
    joint: &JointTable,
    roles: TwoPremise,
    l1: &str,
) -> Result<Distribution, GapError> {
    let scm = joint.scm();
    let scheme = joint.scheme();
    roles.validate(scm)?;
    check_orderings(joint, &roles.anti_topological(), "conclusion-first")?;
    let l1 = scheme.resolve(l1)?;
    let post_c1 = premise_posterior(joint, roles.c1, None, l1)?;
    let prior_c2 = scm.cpt(roles.c2).row(&[0; 3]).to_vec();

    let support = joint.slot_support(1);
    let mut mass = vec![0.0; support.len()];
    for (c1, &w1) in post_c1.iter().enumerate() {
        for (c2, &w2) in prior_c2.iter().enumerate() {
            for a in 0..scm.cardinality(roles.a) {
                let w = w1 * w2 * scm.cpt_prob(roles.a, a, &assignment(roles, c1, c2, a));
                if w == 0.0 {
                    continue;
                }
                for (k, &t) in support.iter().enumerate() {
                    mass[k] += w * scheme.emission_weight(roles.a, a, Some(l1), t);
                }
            }
        }
    }
    token_distribution(joint, 1, mass)
}

/// Posterior of the conclusion token when both premises come first,
/// `(C1, C2, A)`:
///
/// `Σ_{c1,c2} Pr(c1 | l1) · Pr(c2 | l1, l2) · Σ_a Pr(a | c1, c2) · Pr(L_A | a, l1, l2)`.
pub fn topological_posterior(
    joint: &JointTable,
    roles: TwoPremise,
    l1: &str,
    l2: &str,
) -> Result<Distribution, GapError> {
    let scm = joint.scm();
    let scheme = joint.scheme();
    roles.validate(scm)?;
    check_orderings(joint, &roles.topological(), "conclusion-last")?;
    let l1 = scheme.resolve(l1)?;
    let l2 = scheme.resolve(l2)?;
    let post_c1 = premise_posterior(joint, roles.c1, None, l1)?;
    let post_c2 = premise_posterior(joint, roles.c2, Some(l1), l2)?;

    let support = joint.slot_support(2);
    let mut mass = vec![0.0; support.len()];
    for (c1, &w1) in post_c1.iter().enumerate() {
        for (c2, &w2) in post_c2.iter().enumerate() {
            let w12 = w1 * w2;
            if w12 == 0.0 {
                continue;
            }
            for (k, &t) in support.iter().enumerate() {
                let inner: f64 = (0..scm.cardinality(roles.a))
                    .map(|a| {
                        scm.cpt_prob(roles.a, a, &assignment(roles, c1, c2, a))
                            * scheme.emission_weight(roles.a, a, Some(l2), t)
                    })
                    .sum();
                mass[k] += w12 * inner;
            }
        }
    }
    token_distribution(joint, 2, mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::{max_abs_diff, variational_distance};
    use crate::scm::{
        build_example_two_premise, conditional, enumerate_joint, singleton_tokens, EmissionMode,
        Evidence, LatentQuery, PremiseOrder, TokenWeight, TwoPremiseParams,
    };

    /// C1 → A ← C2 with ambiguous premise tokens and an A emission that
    /// depends on the preceding token.
    pub(crate) fn fixture(c2_prior: Vec<f64>, order: PremiseOrder) -> TwoPremiseParams {
        TwoPremiseParams {
            c1_prior: vec![0.3, 0.7],
            c2_prior,
            a_given: vec![
                vec![0.9, 0.1],
                vec![0.4, 0.6],
                vec![0.2, 0.8],
                vec![0.05, 0.95],
            ],
            c1_expr: vec![
                vec![TokenWeight::new("p", 0.8), TokenWeight::new("q", 0.2)],
                vec![TokenWeight::new("p", 0.25), TokenWeight::new("q", 0.75)],
            ],
            c2_expr: vec![
                vec![
                    TokenWeight::new("r", 0.6),
                    TokenWeight::new("s", 0.4),
                    TokenWeight::after("r", 0.9, "p"),
                    TokenWeight::after("s", 0.1, "p"),
                ],
                vec![TokenWeight::new("r", 0.3), TokenWeight::new("s", 0.7)],
            ],
            a_expr: vec![
                vec![
                    TokenWeight::new("y", 0.7),
                    TokenWeight::new("n", 0.3),
                    TokenWeight::after("y", 0.5, "p"),
                    TokenWeight::after("n", 0.5, "p"),
                    TokenWeight::after("y", 0.95, "r"),
                    TokenWeight::after("n", 0.05, "r"),
                ],
                vec![
                    TokenWeight::new("y", 0.1),
                    TokenWeight::new("n", 0.9),
                    TokenWeight::after("y", 0.35, "q"),
                    TokenWeight::after("n", 0.65, "q"),
                ],
            ],
            mode: EmissionMode::PrevToken,
            orderings: vec![(order, 1.0)],
        }
    }

    fn enumerated_shortcut(joint: &JointTable, l1: &str) -> Distribution {
        let t = joint.scheme().resolve(l1).unwrap();
        conditional(
            joint,
            &LatentQuery::slot(1).given(Evidence::Slot { slot: 0, token: t }),
        )
        .unwrap()
    }

    #[test]
    fn shortcut_matches_enumeration() {
        let (scm, scheme) =
            build_example_two_premise(fixture(vec![0.5, 0.5], PremiseOrder::ConclusionEarly))
                .unwrap();
        let joint = enumerate_joint(&scm, &scheme).unwrap();
        for l1 in ["p", "q"] {
            let closed = shortcut_distribution(&joint, TwoPremise::default(), l1).unwrap();
            let oracle = enumerated_shortcut(&joint, l1);
            assert!(
                max_abs_diff(&closed, &oracle) < 1e-12,
                "{closed:?} vs {oracle:?}"
            );
        }
    }

    #[test]
    fn shortcut_moves_with_the_unseen_premise_marginal() {
        let build = |prior| {
            let (scm, scheme) =
                build_example_two_premise(fixture(prior, PremiseOrder::ConclusionEarly)).unwrap();
            enumerate_joint(&scm, &scheme).unwrap()
        };
        let balanced = build(vec![0.5, 0.5]);
        let skewed = build(vec![0.9, 0.1]);
        let a = shortcut_distribution(&balanced, TwoPremise::default(), "p").unwrap();
        let b = shortcut_distribution(&skewed, TwoPremise::default(), "p").unwrap();
        assert!(max_abs_diff(&a, &b) > 1e-3);
        assert!(max_abs_diff(&b, &enumerated_shortcut(&skewed, "p")) < 1e-12);
    }

    #[test]
    fn degenerate_premise_makes_shortcut_exact() {
        // Pr(C2 = 0) = 1: the marginal is the point mass the full posterior uses.
        let mut p = fixture(vec![1.0, 0.0], PremiseOrder::ConclusionEarly);
        p.mode = EmissionMode::ContextFree;
        for rows in [&mut p.c2_expr, &mut p.a_expr] {
            for entries in rows.iter_mut() {
                entries.retain(|e| e.after.is_none());
            }
        }
        let (scm, anti) = build_example_two_premise(p).unwrap();
        let topo = anti
            .with_orderings(vec![crate::scm::Ordering {
                perm: vec![0, 1, 2],
                prob: 1.0,
            }])
            .unwrap();
        let anti_joint = enumerate_joint(&scm, &anti).unwrap();
        let topo_joint = enumerate_joint(&scm, &topo).unwrap();
        for l1 in ["p", "q"] {
            let short = shortcut_distribution(&anti_joint, TwoPremise::default(), l1).unwrap();
            for l2 in ["r", "s"] {
                let full =
                    topological_posterior(&topo_joint, TwoPremise::default(), l1, l2).unwrap();
                assert!(variational_distance(&short, &full) < 1e-12);
            }
        }
    }

    #[test]
    fn topological_matches_enumeration() {
        let (scm, scheme) =
            build_example_two_premise(fixture(vec![0.5, 0.5], PremiseOrder::ConclusionLast))
                .unwrap();
        let joint = enumerate_joint(&scm, &scheme).unwrap();
        for l1 in ["p", "q"] {
            for l2 in ["r", "s"] {
                let closed = topological_posterior(&joint, TwoPremise::default(), l1, l2).unwrap();
                let (t1, t2) = (scheme.resolve(l1).unwrap(), scheme.resolve(l2).unwrap());
                let oracle = conditional(
                    &joint,
                    &LatentQuery::slot(2)
                        .given(Evidence::Slot { slot: 0, token: t1 })
                        .given(Evidence::Slot { slot: 1, token: t2 }),
                )
                .unwrap();
                assert!(max_abs_diff(&closed, &oracle) < 1e-12);
            }
        }
    }

    #[test]
    fn unique_tokens_reduce_topological_posterior_to_the_cpt() {
        let mut p = fixture(vec![0.5, 0.5], PremiseOrder::ConclusionLast);
        p.mode = EmissionMode::ContextFree;
        p.c1_expr = singleton_tokens("c1_", 2);
        p.c2_expr = singleton_tokens("c2_", 2);
        p.a_expr = singleton_tokens("a_", 2);
        let a_given = p.a_given.clone();
        let (scm, scheme) = build_example_two_premise(p).unwrap();
        let joint = enumerate_joint(&scm, &scheme).unwrap();
        for c1 in 0..2 {
            for c2 in 0..2 {
                let post = topological_posterior(
                    &joint,
                    TwoPremise::default(),
                    &format!("c1_{c1}"),
                    &format!("c2_{c2}"),
                )
                .unwrap();
                let row = &a_given[c1 * 2 + c2];
                assert_eq!(post.prob("a_0"), Some(row[0]));
                assert_eq!(post.prob("a_1"), Some(row[1]));
            }
        }
    }

    #[test]
    fn shortcut_and_full_posterior_differ_when_l2_is_informative() {
        let (scm, topo) =
            build_example_two_premise(fixture(vec![0.5, 0.5], PremiseOrder::ConclusionLast))
                .unwrap();
        let anti = topo
            .with_orderings(vec![crate::scm::Ordering {
                perm: vec![0, 2, 1],
                prob: 1.0,
            }])
            .unwrap();
        let short = shortcut_distribution(
            &enumerate_joint(&scm, &anti).unwrap(),
            TwoPremise::default(),
            "q",
        )
        .unwrap();
        let full = topological_posterior(
            &enumerate_joint(&scm, &topo).unwrap(),
            TwoPremise::default(),
            "q",
            "s",
        )
        .unwrap();
        assert!(variational_distance(&short, &full) > 1e-3);
    }

    #[test]
    fn wrong_presentation_order_is_rejected() {
        let (scm, scheme) =
            build_example_two_premise(fixture(vec![0.5, 0.5], PremiseOrder::ConclusionLast))
                .unwrap();
        let joint = enumerate_joint(&scm, &scheme).unwrap();
        assert!(matches!(
            shortcut_distribution(&joint, TwoPremise::default(), "p"),
            Err(GapError::Ordering(_))
        ));
    }
}
