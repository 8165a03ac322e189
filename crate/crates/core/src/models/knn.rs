use super::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Brute-force k-nearest-neighbour regressor over standardized features.
/// Equal distances resolve toward the lower training index.
#[derive(Debug, Clone)]
pub struct KnnModel {
    k: usize,
    scaler: Standardizer,
    x: Matrix,
    y: Matrix,
}

impl KnnModel {
    pub fn fit(train: &Dataset, k: usize) -> Result<Self> {
        if k == 0 || k > train.n_samples() {
            return Err(Error::InvalidRegressor(format!(
                "knn k = {k} with {} training samples",
                train.n_samples()
            )));
        }
        let scaler = Standardizer::fit(&train.x);
        Ok(Self {
            k,
            x: scaler.apply(&train.x),
            y: train.y.clone(),
            scaler,
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let (f, q) = (x.cols(), self.y.cols());
        let mut out = Matrix::zeros(x.rows(), q);
        let mut queries = vec![0.0; QUERY_BLOCK * f];
        // per query: k best so far, sorted by (distance, index)
        let mut best: Vec<Vec<(f64, usize)>> = (0..QUERY_BLOCK)
            .map(|_| Vec::with_capacity(self.k + 1))
            .collect();

        // Queries go in blocks so each training row is reused from cache.
        for first in (0..x.rows()).step_by(QUERY_BLOCK) {
            let m = QUERY_BLOCK.min(x.rows() - first);
            for j in 0..m {
                self.scaler
                    .apply_row(x.row(first + j), &mut queries[j * f..(j + 1) * f]);
                best[j].clear();
            }
            for (i, row) in self.x.iter_rows().enumerate() {
                for (query, best) in queries.chunks_exact(f).zip(best.iter_mut()).take(m) {
                    let bound = if best.len() == self.k {
                        best[self.k - 1].0
                    } else {
                        f64::INFINITY
                    };
                    // Rows arrive in index order, so an equal distance never displaces.
                    let Some(d) = distance_below(row, query, bound) else {
                        continue;
                    };
                    let at = best.partition_point(|b| b.0 <= d);
                    best.insert(at, (d, i));
                    best.truncate(self.k);
                }
            }
            for (j, best) in best.iter().enumerate().take(m) {
                let acc = out.row_mut(first + j);
                for &(_, i) in best {
                    for (a, v) in acc.iter_mut().zip(self.y.row(i)) {
                        *a += v;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= self.k as f64);
            }
        }
        Ok(out)
    }
}

const QUERY_BLOCK: usize = 32;
const LANES: usize = 4;
/// Lane chunks between early-exit checks.
const CHECK_EVERY: usize = 8;

/// Squared euclidean distance, or `None` once it provably reaches `bound`.
/// Partial sums of squares only grow (rounding is monotone too), so stopping
/// early never drops a row that would have qualified.
fn distance_below(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut acc = [0.0f64; LANES];
    let total = |acc: &[f64; LANES]| (acc[0] + acc[1]) + (acc[2] + acc[3]);
    let mut lanes_a = a.chunks_exact(LANES);
    let mut lanes_b = b.chunks_exact(LANES);
    for (k, (ca, cb)) in lanes_a.by_ref().zip(lanes_b.by_ref()).enumerate() {
        for l in 0..LANES {
            let t = ca[l] - cb[l];
            acc[l] += t * t;
        }
        if k % CHECK_EVERY == CHECK_EVERY - 1 && total(&acc) >= bound {
            return None;
        }
    }
    for (l, (x, y)) in lanes_a
        .remainder()
        .iter()
        .zip(lanes_b.remainder())
        .enumerate()
    {
        let t = x - y;
        acc[l] += t * t;
    }
    let d = total(&acc);
    (d < bound).then_some(d)
}
