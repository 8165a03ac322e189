use super::{Dataset, Standardizer};
use crate::error::Result;
use crate::linalg::{cholesky, cholesky_solve, Matrix};

/// Least squares with intercept and optional ridge penalty on the
/// (standardized) slopes. All outputs share one factorization.
#[derive(Debug, Clone)]
pub struct LinearModel {
    scaler: Standardizer,
    /// `(p + 1) x q`, row 0 is the intercept.
    coef: Matrix,
}

impl LinearModel {
    pub fn fit(train: &Dataset, ridge_lambda: f64) -> Result<Self> {
        let scaler = Standardizer::fit(&train.x);
        let xs = scaler.apply(&train.x);
        let (n, p, q) = (xs.rows(), xs.cols(), train.n_outputs());
        let dim = p + 1;

        let mut ata = vec![0.0; dim * dim];
        let mut aty = vec![0.0; dim * q];
        let mut a = vec![0.0; dim];
        for r in 0..n {
            a[0] = 1.0;
            a[1..].copy_from_slice(xs.row(r));
            for i in 0..dim {
                let ai = a[i];
                for j in i..dim {
                    ata[i * dim + j] += ai * a[j];
                }
                for (c, yv) in train.y.row(r).iter().enumerate() {
                    aty[i * q + c] += ai * yv;
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                ata[i * dim + j] = ata[j * dim + i];
            }
            if i > 0 {
                ata[i * dim + i] += ridge_lambda;
            }
        }

        let l = cholesky(&ata, dim)?;
        let mut coef = Matrix::zeros(dim, q);
        for c in 0..q {
            let rhs: Vec<f64> = (0..dim).map(|i| aty[i * q + c]).collect();
            for (i, v) in cholesky_solve(&l, dim, &rhs).into_iter().enumerate() {
                coef.set(i, c, v);
            }
        }
        Ok(Self { scaler, coef })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let q = self.coef.cols();
        let mut out = Matrix::zeros(x.rows(), q);
        let mut row = vec![0.0; x.cols()];
        for r in 0..x.rows() {
            self.scaler.apply_row(x.row(r), &mut row);
            let o = out.row_mut(r);
            o.copy_from_slice(self.coef.row(0));
            for (j, v) in row.iter().enumerate() {
                for (oc, w) in o.iter_mut().zip(self.coef.row(j + 1)) {
                    *oc += v * w;
                }
            }
        }
        Ok(out)
    }
}
