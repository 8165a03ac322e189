use super::Dataset;
use crate::error::Result;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Single-output CART regression tree. Splits maximize the reduction in
/// squared error; thresholds sit midway between adjacent distinct values.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: Vec<f64>,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    /// Number of samples (in the feature's sorted order) going left.
    n_left: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
    }

    fn best_split(&self, sorted: &[Vec<usize>]) -> Option<BestSplit> {
        let n = sorted[0].len();
        let total: f64 = sorted[0].iter().map(|&i| self.y[i]).sum();
        let mut best: Option<BestSplit> = None;

        for (f, order) in sorted.iter().enumerate() {
            let mut left_sum = 0.0;
            for pos in 0..n - 1 {
                let i = order[pos];
                left_sum += self.y[i];
                let n_left = pos + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf {
                    continue;
                }
                if n_right < self.min_leaf {
                    break;
                }
                let (a, b) = (self.x.get(i, f), self.x.get(order[pos + 1], f));
                if a == b {
                    continue;
                }
                let right_sum = total - left_sum;
                // SSE reduction, written in a cancellation-free form
                let diff = left_sum / n_left as f64 - right_sum / n_right as f64;
                let gain = (n_left * n_right) as f64 / n as f64 * diff * diff;
                if best.as_ref().is_none_or(|s| gain > s.gain) {
                    let mid = a + (b - a) / 2.0;
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        n_left,
                        // adjacent floats: the midpoint can round up to `b`
                        threshold: if mid < b { mid } else { a },
                    });
                }
            }
        }
        best.filter(|b| b.gain > 0.0)
    }

    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let idx = &sorted[0];
        let value = self.leaf_value(idx);
        let constant = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(value));
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf || constant {
            return id;
        }
        let Some(split) = self.best_split(&sorted) else {
            return id;
        };

        let mut goes_left = vec![false; self.x.rows()];
        for &i in &sorted[split.feature][..split.n_left] {
            goes_left[i] = true;
        }
        let (mut left, mut right) = (
            Vec::with_capacity(sorted.len()),
            Vec::with_capacity(sorted.len()),
        );
        for order in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| goes_left[i]);
            left.push(l);
            right.push(r);
        }
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }
}

impl RegressionTree {
    /// `presorted[f]` lists sample indices ordered by feature `f` (stable on index).
    fn fit_presorted(
        x: &Matrix,
        y: Vec<f64>,
        presorted: &[Vec<usize>],
        max_depth: usize,
        min_leaf: usize,
    ) -> Self {
        let mut b = Builder {
            x,
            y,
            max_depth,
            min_leaf,
            nodes: vec![],
        };
        b.grow(presorted.to_vec(), 0);
        Self { nodes: b.nodes }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Feature and threshold of the root split, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf(_) => None,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// One tree per output column, sharing the feature presort.
#[derive(Debug, Clone)]
pub struct TreeModel {
    trees: Vec<RegressionTree>,
}

impl TreeModel {
    pub fn fit(train: &Dataset, max_depth: usize, min_leaf: usize) -> Result<Self> {
        let x = &train.x;
        let presorted: Vec<Vec<usize>> = (0..x.cols())
            .map(|f| {
                let mut order: Vec<usize> = (0..x.rows()).collect();
                order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
                order
            })
            .collect();
        let presorted = if presorted.is_empty() {
            vec![(0..x.rows()).collect()]
        } else {
            presorted
        };
        let trees = (0..train.n_outputs())
            .map(|c| {
                let depth = if x.cols() == 0 { 0 } else { max_depth };
                RegressionTree::fit_presorted(x, train.y.column(c), &presorted, depth, min_leaf)
            })
            .collect();
        Ok(Self { trees })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.trees.len());
        for r in 0..x.rows() {
            let row = x.row(r);
            for (c, t) in self.trees.iter().enumerate() {
                out.set(r, c, t.predict_row(row));
            }
        }
        Ok(out)
    }
}
