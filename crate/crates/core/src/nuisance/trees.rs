//! Deterministic gradient-boosted regression trees (squared error).
//!
//! Full-batch greedy CART with exact split search: no row or feature
//! subsampling, so training is a pure function of the data. Split ties
//! break toward the lowest feature index, then the lowest threshold,
//! which pins down the tree across runs and platforms.

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub depth: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoostedTrees {
    base: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
}

impl BoostedTrees {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut pred = self.base;
        for tree in &self.trees {
            pred += self.learning_rate * tree.predict(row);
        }
        pred
    }
}

/// Gains below this are treated as no improvement (guards against
/// splitting on pure floating-point residue).
const MIN_SPLIT_GAIN: f64 = 1e-12;

/// Training-set view: `value(i, f)` is feature `f` of local row `i`.
struct TrainSet<'a> {
    data: &'a [f64],
    n_features: usize,
    rows: &'a [usize],
}

impl TrainSet<'_> {
    fn value(&self, i: u32, f: usize) -> f64 {
        self.data[self.rows[i as usize] * self.n_features + f]
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn best_split(
    set: &TrainSet,
    sorted: &[Vec<u32>],
    residual: &[f64],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = sorted[0].len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = sorted[0].iter().map(|&i| residual[i as usize]).sum();
    let parent_score = total * total / n as f64;

    let mut best: Option<SplitChoice> = None;
    for (f, order) in sorted.iter().enumerate() {
        let mut left_sum = 0.0;
        for (pos, &idx) in order.iter().enumerate().take(n - 1) {
            left_sum += residual[idx as usize];
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf {
                continue;
            }
            if n_right < min_leaf {
                break;
            }
            let v = set.value(idx, f);
            let v_next = set.value(order[pos + 1], f);
            if v == v_next {
                continue;
            }
            let threshold = 0.5 * (v + v_next);
            // Midpoint can collapse onto an endpoint for adjacent floats;
            // such a split cannot be reproduced at prediction time.
            if threshold <= v || threshold >= v_next {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / n_right as f64
                - parent_score;
            if gain > MIN_SPLIT_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Train on the rows of `data` (row-major, `n_features` wide) listed in
/// `rows`, against targets `y` (indexed by original row id).
pub fn train(
    data: &[f64],
    n_features: usize,
    rows: &[usize],
    y: &[f64],
    params: TreeParams,
) -> BoostedTrees {
    assert!(n_features > 0 && !rows.is_empty());
    let set = TrainSet {
        data,
        n_features,
        rows,
    };
    let n = rows.len();

    // Per-feature sort orders are fixed across rounds (features don't move).
    let root_sorted: Vec<Vec<u32>> = (0..n_features)
        .map(|f| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| {
                set.value(a, f)
                    .partial_cmp(&set.value(b, f))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            order
        })
        .collect();

    let base = rows.iter().map(|&r| y[r]).sum::<f64>() / n as f64;
    let mut residual: Vec<f64> = rows.iter().map(|&r| y[r] - base).collect();
    let mut trees = Vec::with_capacity(params.rounds);

    for _round in 0..params.rounds {
        let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
        let mut queue: Vec<(usize, Vec<Vec<u32>>, usize)> =
            vec![(0, root_sorted.clone(), 0)];
        let mut leaf_rows: Vec<(usize, Vec<u32>)> = Vec::new();

        while let Some((slot, sorted, depth)) = queue.pop() {
            let choice = if depth < params.depth {
                best_split(&set, &sorted, &residual, params.min_leaf)
            } else {
                None
            };
            match choice {
                None => {
                    let members = sorted.into_iter().next().unwrap_or_default();
                    let sum: f64 = members.iter().map(|&i| residual[i as usize]).sum();
                    let value = if members.is_empty() {
                        0.0
                    } else {
                        sum / members.len() as f64
                    };
                    nodes[slot] = Node::Leaf { value };
                    leaf_rows.push((slot, members));
                }
                Some(choice) => {
                    let mut goes_left = vec![false; n];
                    for &i in &sorted[choice.feature] {
                        goes_left[i as usize] = set.value(i, choice.feature) <= choice.threshold;
                    }
                    let mut left_sorted = Vec::with_capacity(n_features);
                    let mut right_sorted = Vec::with_capacity(n_features);
                    for order in &sorted {
                        let (l, r): (Vec<u32>, Vec<u32>) =
                            order.iter().partition(|&&i| goes_left[i as usize]);
                        left_sorted.push(l);
                        right_sorted.push(r);
                    }
                    let left_slot = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    let right_slot = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[slot] = Node::Split {
                        feature: choice.feature,
                        threshold: choice.threshold,
                        left: left_slot,
                        right: right_slot,
                    };
                    queue.push((left_slot, left_sorted, depth + 1));
                    queue.push((right_slot, right_sorted, depth + 1));
                }
            }
        }

        for (slot, members) in leaf_rows {
            if let Node::Leaf { value } = nodes[slot] {
                for &i in &members {
                    residual[i as usize] -= params.learning_rate * value;
                }
            }
        }
        trees.push(Tree { nodes });
    }

    BoostedTrees {
        base,
        learning_rate: params.learning_rate,
        trees,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_predict(data: &[f64], f: usize, y: &[f64], params: TreeParams) -> Vec<f64> {
        let rows: Vec<usize> = (0..y.len()).collect();
        let model = train(data, f, &rows, y, params);
        rows.iter()
            .map(|&r| model.predict(&data[r * f..(r + 1) * f]))
            .collect()
    }

    #[test]
    fn constant_target_yields_constant_prediction() {
        let data: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = vec![0.5; 20];
        let preds = fit_predict(
            &data,
            1,
            &y,
            TreeParams {
                depth: 3,
                rounds: 10,
                learning_rate: 0.1,
                min_leaf: 2,
            },
        );
        for p in preds {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn step_function_is_learned_exactly() {
        // y = 1{x > 9.5}; one split recovers it.
        let data: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| if i > 9 { 1.0 } else { 0.0 }).collect();
        let preds = fit_predict(
            &data,
            1,
            &y,
            TreeParams {
                depth: 2,
                rounds: 200,
                learning_rate: 0.1,
                min_leaf: 1,
            },
        );
        for (i, p) in preds.iter().enumerate() {
            let want = if i > 9 { 1.0 } else { 0.0 };
            assert!((p - want).abs() < 1e-6, "row {i}: {p}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data: Vec<f64> = (0..60).map(|i| ((i * 7919) % 97) as f64 / 97.0).collect();
        let y: Vec<f64> = (0..30)
            .map(|i| (i as f64 * 0.37).sin() * 0.2 + 0.5)
            .collect();
        let params = TreeParams {
            depth: 3,
            rounds: 50,
            learning_rate: 0.1,
            min_leaf: 2,
        };
        let a = fit_predict(&data, 2, &y, params);
        let b = fit_predict(&data, 2, &y, params);
        assert_eq!(a, b);
    }

    #[test]
    fn min_leaf_is_respected() {
        // With min_leaf = 10 and 12 rows, no split is feasible: the model
        // can only predict the mean.
        let data: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..12).map(|i| if i > 5 { 1.0 } else { 0.0 }).collect();
        let preds = fit_predict(
            &data,
            1,
            &y,
            TreeParams {
                depth: 3,
                rounds: 25,
                learning_rate: 0.3,
                min_leaf: 10,
            },
        );
        for p in preds {
            assert!((p - 0.5).abs() < 1e-9);
        }
    }
}
