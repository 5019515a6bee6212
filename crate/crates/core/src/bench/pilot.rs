use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BenchError, BenchItem, WinoItem};

/// Uniform sample of `n` items without replacement, kept in source order.
pub fn pilot_sample(
    items: &[BenchItem],
    n: usize,
    seed: u64,
) -> Result<Vec<BenchItem>, BenchError> {
    if n > items.len() {
        return Err(BenchError::SampleTooLarge {
            n,
            available: items.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, items.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| items[i].clone()).collect())
}

/// Both twins of `n` pairs drawn uniformly without replacement, kept in
/// source order.
pub fn sample_pairs(items: &[WinoItem], n: usize, seed: u64) -> Result<Vec<WinoItem>, BenchError> {
    let mut ids: Vec<&str> = Vec::new();
    for it in items {
        if !ids.contains(&it.pair_id.as_str()) {
            ids.push(&it.pair_id);
        }
    }
    if n > ids.len() {
        return Err(BenchError::SampleTooLarge {
            n,
            available: ids.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: Vec<&str> = rand::seq::index::sample(&mut rng, ids.len(), n)
        .into_iter()
        .map(|i| ids[i])
        .collect();
    Ok(items
        .iter()
        .filter(|it| keep.contains(&it.pair_id.as_str()))
        .cloned()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::Task;
    use std::collections::{BTreeMap, HashSet};

    fn items(n: usize) -> Vec<BenchItem> {
        (0..n)
            .map(|i| BenchItem {
                id: format!("i{i}"),
                context: None,
                question: "q".into(),
                options: None,
                gold: "1".into(),
                task: Task::Generic,
                meta: BTreeMap::new(),
            })
            .collect()
    }

    #[test]
    fn full_sample_is_identity() {
        let all = items(30);
        assert_eq!(pilot_sample(&all, 30, 1).unwrap(), all);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let all = items(1000);
        let a = pilot_sample(&all, 200, 7).unwrap();
        let b = pilot_sample(&all, 200, 7).unwrap();
        let c = pilot_sample(&all, 200, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let ids: HashSet<_> = a.iter().map(|i| &i.id).collect();
        assert_eq!(ids.len(), 200);
    }

    #[test]
    fn oversize_request_fails() {
        assert!(pilot_sample(&items(3), 4, 0).is_err());
    }

    #[test]
    fn pair_sample_keeps_twins() {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/winobias_pairs.jsonl"
        ))
        .unwrap();
        let all = crate::bench::parse_winobias(&text, true).unwrap();
        let two = sample_pairs(&all, 2, 7).unwrap();
        assert_eq!(two.len(), 4);
        let pairs: HashSet<_> = two.iter().map(|i| &i.pair_id).collect();
        assert_eq!(pairs.len(), 2);
        assert_eq!(sample_pairs(&all, 4, 3).unwrap(), all);
        assert!(sample_pairs(&all, 5, 0).is_err());
    }
}
