//! Seeded N-way K-shot episode sampling.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{DataError, LabeledVector, VectorTable};

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    /// Class-major: `k_shot` supports per chosen class.
    pub supports: Vec<LabeledVector>,
    pub queries: Vec<LabeledVector>,
}

impl Episode {
    pub fn support_labels(&self) -> Vec<u32> {
        self.supports.iter().map(|s| s.label).collect()
    }
}

/// Draws `n_way` classes, then `k_shot` supports and `query_per_class` queries per class
/// without overlap. Same inputs and seed give the same episode.
pub fn sample_episode(
    table: &VectorTable,
    n_way: usize,
    k_shot: usize,
    query_per_class: usize,
    seed: u64,
) -> Result<Episode, DataError> {
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, r) in table.rows().iter().enumerate() {
        by_class.entry(r.label).or_default().push(i);
    }
    let min_members = k_shot + query_per_class;
    let mut eligible: Vec<u32> = by_class
        .iter()
        .filter(|(_, m)| m.len() >= min_members)
        .map(|(&l, _)| l)
        .collect();
    if n_way == 0 || k_shot == 0 || eligible.len() < n_way {
        return Err(DataError::InsufficientClasses {
            needed: n_way.max(1),
            eligible: eligible.len(),
            total_classes: by_class.len(),
            min_members: min_members.max(1),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    eligible.truncate(n_way);

    let mut supports = Vec::with_capacity(n_way * k_shot);
    let mut queries = Vec::with_capacity(n_way * query_per_class);
    for label in eligible {
        let mut members = by_class[&label].clone();
        members.shuffle(&mut rng);
        let rows = table.rows();
        supports.extend(members[..k_shot].iter().map(|&i| rows[i].clone()));
        queries.extend(members[k_shot..min_members].iter().map(|&i| rows[i].clone()));
    }
    Ok(Episode { supports, queries })
}
