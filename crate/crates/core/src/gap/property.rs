//! Randomized checks of the KL bound and the closed-form identities.
//!
//! Trial `i` of a run seeded with `s` uses the generator seed `s + i`, so
//! any failing trial can be replayed on its own.

use std::fmt::Write as _;
use std::io::Write;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::scm::{
    conditional, enumerate_joint_with_budget, Evidence, JointTable, LatentQuery, LoadedScm,
    PremiseOrder, RandomConfig, RandomTwoPremise, TokenId, TwoPremise, DEFAULT_BUDGET,
};

use super::{
    decomposition_check, max_abs_diff, shortcut_distribution, theorem1_report,
    topological_posterior, GapError, GapQuery, GapReport,
};

/// Floor on `kl − bound` accepted as a pass.
pub const SLACK_TOLERANCE: f64 = 1e-12;
/// Largest entrywise disagreement accepted between two exact computations.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct TrialConfig {
    pub random: RandomConfig,
    pub budget: usize,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            random: RandomConfig::default(),
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Pass,
    Skip,
    Fail,
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub seed: u64,
    pub status: TrialStatus,
    pub report: Option<GapReport>,
    /// Why the trial was skipped or failed.
    pub reason: Option<String>,
    /// Shortcut closed form against enumeration, conclusion-first order.
    pub eq1_err: Option<f64>,
    /// Topological closed form against enumeration, conclusion-last order.
    pub topo_err: Option<f64>,
    pub decomposition_err: Option<f64>,
}

impl TrialOutcome {
    fn skipped(seed: u64, why: impl Into<String>) -> Self {
        Self {
            seed,
            status: TrialStatus::Skip,
            report: None,
            reason: Some(why.into()),
            eq1_err: None,
            topo_err: None,
            decomposition_err: None,
        }
    }

    fn failed(seed: u64, why: impl Into<String>) -> Self {
        Self {
            status: TrialStatus::Fail,
            ..Self::skipped(seed, why)
        }
    }

    fn judge(mut self) -> Self {
        let mut problems = Vec::new();
        if let Some(r) = &self.report {
            if r.slack.is_nan() || r.slack < -SLACK_TOLERANCE {
                problems.push(format!("slack {:e} below tolerance", r.slack));
            }
        }
        for (name, err) in [
            ("decomposition", self.decomposition_err),
            ("shortcut identity", self.eq1_err),
            ("topological identity", self.topo_err),
        ] {
            if let Some(e) = err {
                if e.is_nan() || e > IDENTITY_TOLERANCE {
                    problems.push(format!("{name} off by {e:e}"));
                }
            }
        }
        if problems.is_empty() {
            self.status = TrialStatus::Pass;
        } else {
            self.status = TrialStatus::Fail;
            self.reason = Some(problems.join("; "));
        }
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrialSummary {
    pub pass: usize,
    pub skip: usize,
    pub fail: usize,
    pub min_slack: Option<f64>,
}

impl TrialSummary {
    pub fn of(outcomes: &[TrialOutcome]) -> Self {
        let mut s = Self::default();
        for o in outcomes {
            match o.status {
                TrialStatus::Pass => s.pass += 1,
                TrialStatus::Skip => s.skip += 1,
                TrialStatus::Fail => s.fail += 1,
            }
            if let Some(r) = &o.report {
                s.min_slack = Some(s.min_slack.map_or(r.slack, |m: f64| m.min(r.slack)));
            }
        }
        s
    }
}

fn skip_or_fail(seed: u64, e: GapError) -> TrialOutcome {
    match e {
        GapError::ZeroEvidence => TrialOutcome::skipped(
            seed,
            "unconditionable evidence: the evidence has zero probability",
        ),
        GapError::InfiniteDivergence(_) => TrialOutcome::skipped(seed, e.to_string()),
        other => TrialOutcome::failed(seed, other.to_string()),
    }
}

fn draw<R: Rng>(rng: &mut R, row: &[(TokenId, f64)]) -> Option<TokenId> {
    let w = WeightedIndex::new(row.iter().map(|&(_, w)| w)).ok()?;
    Some(row[w.sample(rng)].0)
}

fn slot_evidence(tokens: &[TokenId]) -> Vec<Evidence> {
    tokens
        .iter()
        .enumerate()
        .map(|(slot, &token)| Evidence::Slot { slot, token })
        .collect()
}

fn eq1_error(joint: &JointTable, roles: TwoPremise, l1: TokenId) -> Result<f64, GapError> {
    let closed = shortcut_distribution(joint, roles, joint.scheme().token(l1))?;
    let oracle = conditional(
        joint,
        &LatentQuery {
            target: crate::scm::Target::Slot(1),
            evidence: slot_evidence(&[l1]),
        },
    )?;
    Ok(max_abs_diff(&closed, &oracle))
}

fn topo_error(
    joint: &JointTable,
    roles: TwoPremise,
    l1: TokenId,
    l2: TokenId,
) -> Result<f64, GapError> {
    let scheme = joint.scheme();
    let closed = topological_posterior(joint, roles, scheme.token(l1), scheme.token(l2))?;
    let oracle = conditional(
        joint,
        &LatentQuery {
            target: crate::scm::Target::Slot(2),
            evidence: slot_evidence(&[l1, l2]),
        },
    )?;
    Ok(max_abs_diff(&closed, &oracle))
}

fn random_trial(seed: u64, cfg: TrialConfig) -> Result<TrialOutcome, GapError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = RandomTwoPremise::generate(&mut rng, cfg.random)?;
    let roles = TwoPremise::default();
    // The premise-first presentation keeps A independent of the premise
    // tokens given the premises, which the decomposition relies on.
    let topo_scheme = inst.scheme(PremiseOrder::ConclusionLast)?;
    let anti_scheme = inst.scheme(PremiseOrder::ConclusionEarly)?;
    let topo = enumerate_joint_with_budget(&inst.scm, &topo_scheme, cfg.budget)?;
    let anti = enumerate_joint_with_budget(&inst.scm, &anti_scheme, cfg.budget)?;

    let c1_star = rng.gen_range(0..inst.scm.cardinality(roles.c1));
    let c2_star = rng.gen_range(0..inst.scm.cardinality(roles.c2));
    let Some(l1) = draw(&mut rng, topo_scheme.emission_row(roles.c1, c1_star, None)) else {
        return Ok(TrialOutcome::skipped(seed, "empty emission row"));
    };
    let Some(l2) = draw(
        &mut rng,
        topo_scheme.emission_row(roles.c2, c2_star, Some(l1)),
    ) else {
        return Ok(TrialOutcome::skipped(seed, "empty emission row"));
    };
    let query = GapQuery {
        roles,
        c1_star,
        c2_star,
        l1: topo_scheme.token(l1).to_string(),
        l2: topo_scheme.token(l2).to_string(),
    };
    let report = theorem1_report(&topo, &query)?;
    let decomposition = decomposition_check(&topo, &query)?;
    let outcome = TrialOutcome {
        seed,
        status: TrialStatus::Pass,
        report: Some(report),
        reason: None,
        eq1_err: Some(eq1_error(&anti, roles, l1)?),
        topo_err: Some(topo_error(&topo, roles, l1, l2)?),
        decomposition_err: Some(decomposition.max_abs_err),
    };
    Ok(outcome.judge())
}

/// One randomized trial: a fresh two-premise SCM, evidence drawn from the
/// premise values, and every exact identity checked alongside the bound.
pub fn run_random_trial(seed: u64, cfg: TrialConfig) -> TrialOutcome {
    random_trial(seed, cfg).unwrap_or_else(|e| skip_or_fail(seed, e))
}

pub fn run_random_trials(base_seed: u64, trials: usize, cfg: TrialConfig) -> Vec<TrialOutcome> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| run_random_trial(base_seed.wrapping_add(i), cfg))
        .collect()
}

fn fixture_trial(loaded: &LoadedScm, budget: usize) -> Result<TrialOutcome, GapError> {
    let spec = loaded
        .query
        .as_ref()
        .ok_or_else(|| GapError::Query("the SCM file has no `query` block".into()))?;
    let joint = enumerate_joint_with_budget(&loaded.scm, &loaded.scheme, budget)?;
    let query = GapQuery {
        roles: loaded.roles,
        c1_star: spec.c1_star,
        c2_star: spec.c2_star,
        l1: spec.l1.clone(),
        l2: spec.l2.clone(),
    };
    let report = theorem1_report(&joint, &query)?;
    let decomposition = decomposition_check(&joint, &query)?;
    let scheme = joint.scheme();
    let (l1, l2) = (scheme.resolve(&spec.l1)?, scheme.resolve(&spec.l2)?);
    let positive: Vec<&[usize]> = scheme
        .orderings()
        .iter()
        .filter(|o| o.prob > 0.0)
        .map(|o| o.perm.as_slice())
        .collect();
    let only = |perm: Vec<usize>| positive.iter().all(|p| *p == perm.as_slice());
    let eq1_err = if only(loaded.roles.anti_topological()) {
        match eq1_error(&joint, loaded.roles, l1) {
            Ok(e) => Some(e),
            Err(GapError::ZeroEvidence) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let topo_err = if only(loaded.roles.topological()) {
        match topo_error(&joint, loaded.roles, l1, l2) {
            Ok(e) => Some(e),
            Err(GapError::ZeroEvidence) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(TrialOutcome {
        seed: 0,
        status: TrialStatus::Pass,
        report: Some(report),
        reason: None,
        eq1_err,
        topo_err,
        decomposition_err: Some(decomposition.max_abs_err),
    }
    .judge())
}

/// The bound check on a model file's own `query` evidence.
pub fn run_fixture_trial(loaded: &LoadedScm, budget: usize) -> TrialOutcome {
    fixture_trial(loaded, budget).unwrap_or_else(|e| skip_or_fail(0, e))
}

#[derive(Serialize)]
struct CsvRow {
    seed: u64,
    kl: Option<f64>,
    bound: Option<f64>,
    slack: Option<f64>,
    p_understood: Option<f64>,
    v_distance: Option<f64>,
    status: TrialStatus,
}

/// One row per trial; KL, bound and slack in nats. Skipped trials leave the
/// numeric columns empty.
pub fn write_trials_csv<W: Write>(out: W, outcomes: &[TrialOutcome]) -> Result<(), GapError> {
    let mut w = csv::Writer::from_writer(out);
    for o in outcomes {
        let r = o.report.as_ref();
        w.serialize(CsvRow {
            seed: o.seed,
            kl: r.map(|r| r.kl),
            bound: r.map(|r| r.pinsker_bound),
            slack: r.map(|r| r.slack),
            p_understood: r.map(|r| r.p_understood),
            v_distance: r.map(|r| r.v_distance),
            status: o.status,
        })
        .map_err(|e| GapError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| GapError::Output(e.to_string()))
}

/// Fixed-width table with KL, bound and slack in bits.
pub fn trials_table(outcomes: &[TrialOutcome]) -> String {
    let bits = std::f64::consts::LN_2;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8}  {:>12}  {:>12}  {:>12}  {:>8}  {:>8}  status",
        "seed", "KL (bits)", "bound (bits)", "slack (bits)", "p", "V"
    );
    for o in outcomes {
        match &o.report {
            Some(r) => {
                let _ = write!(
                    s,
                    "{:>8}  {:>12.6}  {:>12.6}  {:>12.6}  {:>8.4}  {:>8.4}  ",
                    o.seed,
                    r.kl / bits,
                    r.pinsker_bound / bits,
                    r.slack / bits,
                    r.p_understood,
                    r.v_distance
                );
            }
            None => {
                let _ = write!(
                    s,
                    "{:>8}  {:>12}  {:>12}  {:>12}  {:>8}  {:>8}  ",
                    o.seed, "-", "-", "-", "-", "-"
                );
            }
        }
        let status = match o.status {
            TrialStatus::Pass => "pass",
            TrialStatus::Skip => "skip",
            TrialStatus::Fail => "FAIL",
        };
        let _ = match &o.reason {
            Some(why) => writeln!(s, "{status} ({why})"),
            None => writeln!(s, "{status}"),
        };
    }
    let sum = TrialSummary::of(outcomes);
    let _ = writeln!(
        s,
        "{} passed, {} skipped, {} failed",
        sum.pass, sum.skip, sum.fail
    );
    s
}
