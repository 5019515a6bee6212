use std::collections::HashSet;

use serde::Serialize;

use super::GapError;

/// Tolerance on the total mass of a [`Distribution`].
pub const DIST_TOLERANCE: f64 = 1e-10;

/// A finite distribution with ordered, unique support labels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self, GapError> {
        if labels.len() != probs.len() {
            return Err(GapError::Distribution(format!(
                "{} labels for {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(l) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(GapError::Distribution(format!("label `{l}` repeated")));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(GapError::Distribution(format!(
                "entry {p} is not a probability"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > DIST_TOLERANCE {
            return Err(GapError::Distribution(format!("mass {total} is not 1")));
        }
        Ok(Self { labels, probs })
    }

    /// Labels `"0"`, `"1"`, … for a probability vector.
    pub fn indexed(probs: Vec<f64>) -> Result<Self, GapError> {
        let labels = (0..probs.len()).map(|i| i.to_string()).collect();
        Self::new(labels, probs)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probs[i])
    }

    /// Both distributions over the union of their labels (missing labels get 0).
    pub fn align(&self, other: &Distribution) -> (Vec<String>, Vec<f64>, Vec<f64>) {
        let mut labels = self.labels.clone();
        for l in &other.labels {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
        let p = labels.iter().map(|l| self.prob(l).unwrap_or(0.0)).collect();
        let q = labels
            .iter()
            .map(|l| other.prob(l).unwrap_or(0.0))
            .collect();
        (labels, p, q)
    }
}

/// `D_KL(p ‖ q)` in nats.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64, GapError> {
    let (labels, p, q) = p.align(q);
    let mut kl = 0.0;
    for ((label, &pi), &qi) in labels.iter().zip(&p).zip(&q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(GapError::InfiniteDivergence(label.clone()));
        }
        kl += pi * (pi.ln() - qi.ln());
    }
    // Rounding can leave a tiny negative value for p ≈ q.
    Ok(kl.max(0.0))
}

/// `V(p, q) = Σ_x |p(x) − q(x)|`, in `[0, 2]`.
pub fn variational_distance(p: &Distribution, q: &Distribution) -> f64 {
    let (_, p, q) = p.align(q);
    p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum()
}

/// Total variation distance, `V / 2`.
pub fn total_variation(p: &Distribution, q: &Distribution) -> f64 {
    0.5 * variational_distance(p, q)
}

/// Largest entrywise gap over the label union.
pub fn max_abs_diff(p: &Distribution, q: &Distribution) -> f64 {
    let (_, p, q) = p.align(q);
    p.iter()
        .zip(&q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
