//! Fit a counting predictor to conclusion-first samples and compare it with
//! the shortcut distribution and with the premise-first posterior.

use serde::Serialize;

use crate::scm::{
    corpus_strings, enumerate_joint, evidence_mass, sample_corpus, Evidence, LoadedScm, Ordering,
};

use super::{
    fit_tabular_ntp, shortcut_distribution, topological_posterior, total_variation,
    variational_distance, Distribution, GapError,
};

#[derive(Clone, Debug, Serialize)]
pub struct DemoRow {
    pub l1: String,
    pub pr_l1: f64,
    pub shortcut: Distribution,
    /// `None` when the prefix never occurred and smoothing is off.
    pub ntp: Option<Distribution>,
    pub tv_ntp_shortcut: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoPair {
    pub l1: String,
    pub l2: String,
    /// `Pr(L1 = l1, L2 = l2)` in the premise-first presentation.
    pub pr: f64,
    pub topological: Distribution,
    pub v_shortcut_topological: f64,
    pub tv_ntp_topological: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BiasDemo {
    pub samples: usize,
    pub alpha: f64,
    pub rows: Vec<DemoRow>,
    pub pairs: Vec<DemoPair>,
    /// `E[V(shortcut, topological)]` over `(l1, l2)`.
    pub mean_v_shortcut_topological: f64,
    pub max_tv_ntp_shortcut: f64,
    /// `E[TV(ntp, shortcut)]` over `l1`.
    pub mean_tv_ntp_shortcut: f64,
    /// `E[TV(ntp, topological)]` over `(l1, l2)`.
    pub mean_tv_ntp_topological: f64,
}

/// The model file must present its tokens conclusion-first, `(C1, A, C2)`.
pub fn demo_bias(
    loaded: &LoadedScm,
    samples: usize,
    seed: u64,
    alpha: f64,
) -> Result<BiasDemo, GapError> {
    let roles = loaded.roles;
    let anti = enumerate_joint(&loaded.scm, &loaded.scheme)?;
    let topo_scheme = loaded.scheme.with_orderings(vec![Ordering {
        perm: roles.topological(),
        prob: 1.0,
    }])?;
    let topo = enumerate_joint(&loaded.scm, &topo_scheme)?;

    let corpus = sample_corpus(&loaded.scm, &loaded.scheme, samples, seed)?;
    let ntp = fit_tabular_ntp(&corpus_strings(&loaded.scheme, &corpus), alpha)?;
    let predict = |l1: &str| match ntp.predict(&[l1]) {
        Ok(d) => Ok(Some(d)),
        Err(GapError::UnseenPrefix(_)) => Ok(None),
        Err(e) => Err(e),
    };

    let mut rows: Vec<DemoRow> = Vec::new();
    let (mut mean_tv_s, mut max_tv_s) = (0.0, 0.0f64);
    for t in anti.slot_support(0) {
        let l1 = anti.scheme().token(t).to_string();
        let pr_l1 = evidence_mass(&anti, &[Evidence::Slot { slot: 0, token: t }]);
        let shortcut = shortcut_distribution(&anti, roles, &l1)?;
        let ntp_d = predict(&l1)?;
        let tv = ntp_d.as_ref().map(|d| total_variation(d, &shortcut));
        if let Some(tv) = tv {
            mean_tv_s += pr_l1 * tv;
            max_tv_s = max_tv_s.max(tv);
        }
        rows.push(DemoRow {
            l1,
            pr_l1,
            shortcut,
            ntp: ntp_d,
            tv_ntp_shortcut: tv,
        });
    }

    let mut pairs = Vec::new();
    let (mut mean_v, mut mean_tv_t) = (0.0, 0.0);
    for t1 in topo.slot_support(0) {
        for t2 in topo.slot_support(1) {
            let pr = evidence_mass(
                &topo,
                &[
                    Evidence::Slot { slot: 0, token: t1 },
                    Evidence::Slot { slot: 1, token: t2 },
                ],
            );
            if pr.is_nan() || pr <= 0.0 {
                continue;
            }
            let (l1, l2) = (
                topo.scheme().token(t1).to_string(),
                topo.scheme().token(t2).to_string(),
            );
            let topological = topological_posterior(&topo, roles, &l1, &l2)?;
            let row = rows
                .iter()
                .find(|r| r.l1 == l1)
                .ok_or_else(|| GapError::Query(format!("`{l1}` opens premise-first text only")))?;
            let v = variational_distance(&row.shortcut, &topological);
            let tv_t = row.ntp.as_ref().map(|d| total_variation(d, &topological));
            mean_v += pr * v;
            if let Some(tv) = tv_t {
                mean_tv_t += pr * tv;
            }
            pairs.push(DemoPair {
                l1,
                l2,
                pr,
                topological,
                v_shortcut_topological: v,
                tv_ntp_topological: tv_t,
            });
        }
    }
    Ok(BiasDemo {
        samples,
        alpha,
        rows,
        pairs,
        mean_v_shortcut_topological: mean_v,
        max_tv_ntp_shortcut: max_tv_s,
        mean_tv_ntp_shortcut: mean_tv_s,
        mean_tv_ntp_topological: mean_tv_t,
    })
}
