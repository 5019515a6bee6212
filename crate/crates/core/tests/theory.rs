use std::collections::BTreeMap;
use std::path::PathBuf;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use thoughtgap::gap::{
    demo_bias, run_fixture_trial, run_random_trial, run_random_trials, shortcut_distribution,
    theorem1_report, topological_posterior, variational_distance, GapQuery, TrialConfig,
    TrialStatus, IDENTITY_TOLERANCE, SLACK_TOLERANCE,
};
use thoughtgap::scm::{
    corpus_strings, enumerate_joint, evidence_mass, sample_corpus, EmissionMode, Evidence,
    OrderingSpec, ScmFile, TokenWeight, Variable,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

#[test]
fn random_trials_hold_the_bound_and_identities() {
    let outcomes = run_random_trials(7, 200, TrialConfig::default());
    for o in &outcomes {
        assert_eq!(
            o.status,
            TrialStatus::Pass,
            "seed {}: {:?}",
            o.seed,
            o.reason
        );
        let r = o.report.as_ref().unwrap();
        assert!(r.slack >= -SLACK_TOLERANCE);
        assert!(o.eq1_err.unwrap() < IDENTITY_TOLERANCE);
        assert!(o.topo_err.unwrap() < IDENTITY_TOLERANCE);
        assert!(o.decomposition_err.unwrap() < IDENTITY_TOLERANCE);
    }
}

#[test]
fn biased_fixture_separates_shortcut_from_topological() {
    let loaded = ScmFile::load(&fixture("biased_two_premise.json")).unwrap();
    let joint = enumerate_joint(&loaded.scm, &loaded.scheme).unwrap();
    let shortcut = shortcut_distribution(&joint, loaded.roles, "warm").unwrap();
    // Pr(A | C1 = 1) = 0.3 [0.7, 0.3] + 0.7 [0.1, 0.9]; "warm" pins C1 = 1.
    assert_abs_diff_eq!(shortcut.prob("stay").unwrap(), 0.28, epsilon = 1e-12);
    assert_abs_diff_eq!(shortcut.prob("go").unwrap(), 0.72, epsilon = 1e-12);
    let topo_scheme = loaded
        .scheme
        .with_orderings(vec![thoughtgap::scm::Ordering {
            perm: loaded.roles.topological(),
            prob: 1.0,
        }])
        .unwrap();
    let topo = enumerate_joint(&loaded.scm, &topo_scheme).unwrap();
    let posterior = topological_posterior(&topo, loaded.roles, "warm", "dry").unwrap();
    assert_abs_diff_eq!(posterior.prob("stay").unwrap(), 0.7, epsilon = 1e-12);
    assert!(variational_distance(&shortcut, &posterior) > 0.1);
}

#[test]
fn degenerate_second_premise_has_no_gap() {
    let loaded = ScmFile::load(&fixture("degenerate_c2.json")).unwrap();
    let d = demo_bias(&loaded, 1000, 7, 0.0).unwrap();
    assert!(d.mean_v_shortcut_topological < 1e-12);
    for p in &d.pairs {
        assert!(p.v_shortcut_topological < 1e-12);
    }
}

#[test]
fn near_zero_evidence_is_a_clean_skip() {
    let loaded = ScmFile::load(&fixture("pathological_evidence.json")).unwrap();
    let o = run_fixture_trial(&loaded, 1_000_000);
    assert_eq!(o.status, TrialStatus::Skip);
    assert!(o.reason.unwrap().contains("unconditionable evidence"));
}

#[test]
fn fitted_predictor_converges_to_the_shortcut() {
    let loaded = ScmFile::load(&fixture("biased_two_premise.json")).unwrap();
    let tv: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&n| demo_bias(&loaded, n, 7, 0.0).unwrap().max_tv_ntp_shortcut)
        .collect();
    assert!(tv[2] < 0.02, "{tv:?}");
    assert!(tv[2] < tv[0], "{tv:?}");
    let d = demo_bias(&loaded, 100_000, 7, 0.0).unwrap();
    assert!(d.mean_tv_ntp_topological > d.mean_tv_ntp_shortcut);
}

#[test]
fn joint_cells_factorize() {
    let loaded = ScmFile::load(&fixture("biased_two_premise.json")).unwrap();
    let joint = enumerate_joint(&loaded.scm, &loaded.scheme).unwrap();
    let scheme = joint.scheme();
    let mut total = 0.0;
    for e in joint.entries() {
        let perm = &scheme.orderings()[e.ordering].perm;
        let mut p = scheme.orderings()[e.ordering].prob * loaded.scm.latent_prob(&e.latent);
        for (slot, &var) in perm.iter().enumerate() {
            let prev = slot.checked_sub(1).map(|s| e.tokens[s]);
            p *= scheme.emission_weight(var, e.latent[var], prev, e.tokens[slot]);
        }
        assert_abs_diff_eq!(e.prob, p, epsilon = 1e-15);
        total += e.prob;
    }
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
}

#[test]
fn sampled_frequencies_stay_within_four_sigma() {
    let loaded = ScmFile::load(&fixture("biased_two_premise.json")).unwrap();
    let joint = enumerate_joint(&loaded.scm, &loaded.scheme).unwrap();
    let n = 20_000;
    let corpus = corpus_strings(
        &loaded.scheme,
        &sample_corpus(&loaded.scm, &loaded.scheme, n, 11).unwrap(),
    );
    for t in joint.slot_support(0) {
        let token = joint.scheme().token(t);
        let p = evidence_mass(&joint, &[Evidence::Slot { slot: 0, token: t }]);
        let freq = corpus.iter().filter(|s| s[0] == token).count() as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() <= 4.0 * sigma, "{token}: {freq} vs {p}");
    }
}

fn tw(token: &str, weight: f64) -> TokenWeight {
    TokenWeight {
        token: token.into(),
        weight,
        after: None,
    }
}

/// Binary two-premise file in premise-first order. `swap` exchanges the
/// value labels of C2 everywhere, including the query.
fn binary_file(p1: f64, p2: f64, a: [f64; 4], w: f64, v: f64, swap: bool) -> ScmFile {
    let c2_prior = if swap {
        vec![1.0 - p2, p2]
    } else {
        vec![p2, 1.0 - p2]
    };
    let a_rows: Vec<Vec<f64>> = (0..4)
        .map(|k| {
            let (c1, c2) = (k / 2, k % 2);
            let src = if swap { c1 * 2 + (1 - c2) } else { k };
            vec![a[src], 1.0 - a[src]]
        })
        .collect();
    let c2_rows = [vec![tw("u", 1.0)], vec![tw("v", v), tw("u", 1.0 - v)]];
    let (k0, k1) = if swap { ("1", "0") } else { ("0", "1") };
    let mut expressions = BTreeMap::new();
    expressions.insert(
        "C1".to_string(),
        BTreeMap::from([
            ("0".to_string(), vec![tw("x", w), tw("y", 1.0 - w)]),
            ("1".to_string(), vec![tw("y", 1.0)]),
        ]),
    );
    expressions.insert(
        "C2".to_string(),
        BTreeMap::from([
            (k0.to_string(), c2_rows[0].clone()),
            (k1.to_string(), c2_rows[1].clone()),
        ]),
    );
    expressions.insert(
        "A".to_string(),
        BTreeMap::from([
            ("0".to_string(), vec![tw("s", 0.7), tw("g", 0.3)]),
            ("1".to_string(), vec![tw("g", 1.0)]),
        ]),
    );
    ScmFile {
        variables: vec![
            Variable::new("C1", 2),
            Variable::new("C2", 2),
            Variable::new("A", 2),
        ],
        edges: vec![[0, 2], [1, 2]],
        cpts: vec![vec![vec![p1, 1.0 - p1]], vec![c2_prior], a_rows],
        expressions,
        orderings: vec![OrderingSpec {
            perm: vec![0, 1, 2],
            prob: Some(1.0),
        }],
        emission_mode: EmissionMode::ContextFree,
        roles: None,
        query: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn slack_is_never_negative(seed in any::<u64>()) {
        let o = run_random_trial(seed, TrialConfig::default());
        prop_assert_ne!(o.status, TrialStatus::Fail, "{:?}", o.reason);
        if let Some(r) = o.report {
            prop_assert!(r.slack >= -SLACK_TOLERANCE);
            prop_assert!(r.kl >= 0.0 && r.pinsker_bound >= 0.0);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r.p_understood));
        }
    }

    #[test]
    fn report_is_invariant_to_relabeling_a_premise(
        p1 in 0.05f64..0.95,
        p2 in 0.05f64..0.95,
        a in prop::array::uniform4(0.05f64..0.95),
        w in 0.05f64..0.95,
        v in 0.05f64..0.95,
        c2_star in 0usize..2,
    ) {
        let report = |swap: bool| {
            let loaded = binary_file(p1, p2, a, w, v, swap).build().unwrap();
            let joint = enumerate_joint(&loaded.scm, &loaded.scheme).unwrap();
            let q = GapQuery {
                roles: loaded.roles,
                c1_star: 0,
                c2_star: if swap { 1 - c2_star } else { c2_star },
                l1: "y".into(),
                l2: "u".into(),
            };
            theorem1_report(&joint, &q).unwrap()
        };
        let (x, y) = (report(false), report(true));
        prop_assert!((x.kl - y.kl).abs() < 1e-12);
        prop_assert!((x.pinsker_bound - y.pinsker_bound).abs() < 1e-12);
        prop_assert!((x.p_understood - y.p_understood).abs() < 1e-12);
        prop_assert!((x.v_distance - y.v_distance).abs() < 1e-12);
    }
}
