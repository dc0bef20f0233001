//! Hyperparameter grids.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One point of a grid: parameter name → value.
pub type HyperParams = BTreeMap<String, f64>;

/// Named axes; expansion is the cartesian product in key order with the last
/// key varying fastest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperGrid(pub BTreeMap<String, Vec<f64>>);

impl HyperGrid {
    pub fn new() -> Self {
        HyperGrid::default()
    }

    pub fn axis(mut self, name: &str, values: &[f64]) -> Self {
        self.0.insert(name.to_string(), values.to_vec());
        self
    }

    /// Replaces an axis with a single value.
    pub fn pin(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), vec![value]);
    }

    pub fn len(&self) -> usize {
        self.0.values().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn expand(&self) -> Vec<HyperParams> {
        let mut out = vec![HyperParams::new()];
        for (name, values) in &self.0 {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.insert(name.clone(), v);
                        q
                    })
                })
                .collect();
        }
        if self.0.values().any(Vec::is_empty) {
            out.clear();
        }
        out
    }

    /// Up to `max` points chosen uniformly without replacement, kept in grid
    /// order.
    pub fn random_subset(&self, max: usize, seed: u64) -> Vec<HyperParams> {
        let all = self.expand();
        if all.len() <= max {
            return all;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, all.len(), max).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| all[i].clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_order() {
        let g = HyperGrid::new().axis("a", &[1.0, 2.0]).axis("b", &[10.0, 20.0, 30.0]);
        let pts = g.expand();
        assert_eq!(pts.len(), 6);
        assert_eq!(g.len(), 6);
        assert_eq!(pts[0]["a"], 1.0);
        assert_eq!(pts[1]["b"], 20.0);
        assert_eq!(pts[3]["a"], 2.0);
    }

    #[test]
    fn subset_is_seeded_and_ordered() {
        let g = HyperGrid::new().axis("a", &[1.0, 2.0, 3.0, 4.0]).axis("b", &[1.0, 2.0, 3.0]);
        let s1 = g.random_subset(5, 4);
        assert_eq!(s1, g.random_subset(5, 4));
        assert_eq!(s1.len(), 5);
        let all = g.expand();
        let pos: Vec<usize> = s1.iter().map(|p| all.iter().position(|q| q == p).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.random_subset(100, 0).len(), 12);
    }

    #[test]
    fn empty_axis_gives_empty_grid() {
        let g = HyperGrid::new().axis("a", &[]);
        assert!(g.expand().is_empty());
        assert!(g.is_empty());
    }
}
