use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TreeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Weighted class counts of the training samples that reached the leaf.
    Leaf { counts: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_classes: usize,
    pub n_features: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Candidate features drawn per split; `None` means all of them.
    pub features_per_split: Option<usize>,
}

pub(crate) fn check_xy(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize, TreeError> {
    if x.is_empty() {
        return Err(TreeError::Empty);
    }
    if x.len() != y.len() {
        return Err(TreeError::LengthMismatch { rows: x.len(), labels: y.len() });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(TreeError::NoFeatures);
    }
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(TreeError::FeatureMismatch { expected: d, found: row.len() });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(TreeError::BadLabel(bad));
    }
    Ok(d)
}

pub fn gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    w: &'a [f64],
    n_classes: usize,
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn class_counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += self.w[i];
        }
        c
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&idx);
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if depth >= self.params.max_depth || pure || idx.len() < 2 {
            return self.leaf(counts);
        }
        let Some(best) = self.best_split(&idx, &counts) else {
            return self.leaf(counts);
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[i][best.feature] <= best.threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: Vec::new() });
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[me] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        me
    }

    fn leaf(&mut self, counts: Vec<f64>) -> usize {
        self.nodes.push(Node::Leaf { counts });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, idx: &[usize], parent: &[f64]) -> Option<Best> {
        let d = self.x[0].len();
        let k = self.params.features_per_split.unwrap_or(d).clamp(1, d);
        let mut order: Vec<usize> = if k < d {
            sample(self.rng, d, d).into_vec()
        } else {
            (0..d).collect()
        };
        // Draw k candidates; fall back to the remaining features only when
        // none of the drawn ones can split the node.
        let (first, rest) = order.split_at_mut(k);
        first.sort_unstable();
        rest.sort_unstable();
        let parent_gini = gini(parent);
        self.scan(first, idx, parent, parent_gini)
            .or_else(|| self.scan(rest, idx, parent, parent_gini))
    }

    fn scan(&self, features: &[usize], idx: &[usize], parent: &[f64], parent_gini: f64) -> Option<Best> {
        let total: f64 = parent.iter().sum();
        let mut best: Option<Best> = None;
        let mut vals: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for &f in features {
            vals.clear();
            vals.extend(idx.iter().map(|&i| (self.x[i][f], i)));
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0.0; self.n_classes];
            let mut wl = 0.0;
            for k in 0..vals.len() - 1 {
                let (v, i) = vals[k];
                left[self.y[i]] += self.w[i];
                wl += self.w[i];
                let next = vals[k + 1].0;
                if next <= v {
                    continue;
                }
                let right: Vec<f64> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
                let wr = total - wl;
                let child = (wl * gini(&left) + wr * gini(&right)) / total;
                let gain = parent_gini - child;
                let threshold = v + (next - v) / 2.0;
                let better = match &best {
                    None => true,
                    Some(b) => gain > b.gain + 1e-12,
                };
                if better {
                    best = Some(Best { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}

/// Greedy CART on Gini impurity with optional sample weights.
pub fn fit_tree<R: Rng>(
    x: &[Vec<f64>],
    y: &[usize],
    weights: Option<&[f64]>,
    n_classes: usize,
    params: TreeParams,
    rng: &mut R,
) -> Result<DecisionTree, TreeError> {
    let d = check_xy(x, y, n_classes)?;
    let uniform;
    let w = match weights {
        Some(w) => {
            if w.len() != y.len() {
                return Err(TreeError::LengthMismatch { rows: y.len(), labels: w.len() });
            }
            w
        }
        None => {
            uniform = vec![1.0; y.len()];
            &uniform
        }
    };
    let mut b = Builder { x, y, w, n_classes, params, rng, nodes: Vec::new() };
    b.build((0..x.len()).collect(), 0);
    Ok(DecisionTree { nodes: b.nodes, n_classes, n_features: d, max_depth: params.max_depth })
}

impl DecisionTree {
    fn leaf_for(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Normalized leaf distribution for one row.
    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        let counts = self.leaf_for(row);
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return vec![1.0 / self.n_classes as f64; self.n_classes];
        }
        counts.iter().map(|c| c / total).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        crate::eval::argmax(&self.proba_row(row))
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, TreeError> {
        self.check_rows(x)?;
        Ok(x.iter().map(|r| self.proba_row(r)).collect())
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>, TreeError> {
        self.check_rows(x)?;
        Ok(x.iter().map(|r| self.predict_row(r)).collect())
    }

    pub(crate) fn check_rows(&self, x: &[Vec<f64>]) -> Result<(), TreeError> {
        match x.iter().find(|r| r.len() != self.n_features) {
            Some(r) => Err(TreeError::FeatureMismatch { expected: self.n_features, found: r.len() }),
            None => Ok(()),
        }
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all() -> TreeParams {
        TreeParams { max_depth: 10, features_per_split: None }
    }

    fn accuracy(t: &DecisionTree, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let p = t.predict(x).unwrap();
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn single_class_is_one_leaf() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let t = fit_tree(&x, &[1, 1, 1], None, 2, all(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.depth(), 0);
        assert_eq!(t.proba_row(&[5.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn threshold_stump() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..10).map(|i| usize::from(i >= 6)).collect();
        let t = fit_tree(&x, &y, None, 2, all(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(accuracy(&t, &x, &y), 1.0);
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 5.5),
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn xor_depth_two() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let params = TreeParams { max_depth: 2, features_per_split: None };
        let t = fit_tree(&x, &y, None, 2, params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(accuracy(&t, &x, &y), 1.0);
        // zero-gain tie at the root resolves to feature 0
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn weights_shift_leaf_distribution() {
        let x = vec![vec![0.0], vec![0.0], vec![0.0]];
        let t = fit_tree(&x, &[0, 1, 1], Some(&[4.0, 1.0, 1.0]), 2, all(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let p = t.proba_row(&[0.0]);
        assert!((p[0] - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(fit_tree(&[], &[], None, 2, all(), &mut rng), Err(TreeError::Empty));
        assert!(matches!(
            fit_tree(&[vec![1.0]], &[0, 1], None, 2, all(), &mut rng),
            Err(TreeError::LengthMismatch { .. })
        ));
        let t = fit_tree(&[vec![1.0], vec![2.0]], &[0, 1], None, 2, all(), &mut rng).unwrap();
        assert!(t.predict(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5.0, 0.0]), 0.0);
        assert_eq!(gini(&[1.0, 1.0]), 0.5);
        assert_eq!(gini(&[0.0, 0.0]), 0.0);
    }
}
