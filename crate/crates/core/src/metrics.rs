//! Regression metrics, run-wide error normalization and the composite score.

use crate::error::{Error, Result};

fn check(observed: &[f64], predicted: &[f64], min_len: usize) -> Result<()> {
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch(observed.len(), predicted.len()));
    }
    if observed.len() < min_len {
        return Err(Error::TooFewObservations {
            needed: min_len,
            got: observed.len(),
        });
    }
    Ok(())
}

fn sse(observed: &[f64], predicted: &[f64]) -> f64 {
    observed
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum()
}

/// Coefficient of determination. A constant observed vector scores 1 when
/// matched exactly and 0 otherwise.
pub fn r2(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check(observed, predicted, 2)?;
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let sst: f64 = observed.iter().map(|y| (y - mean) * (y - mean)).sum();
    let sse = sse(observed, predicted);
    if sst == 0.0 {
        return Ok(if sse == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - sse / sst)
}

pub fn rmse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check(observed, predicted, 1)?;
    Ok((sse(observed, predicted) / observed.len() as f64).sqrt())
}

/// RMSLE plus a flag telling whether any negative input was clamped to zero.
pub fn rmsle_with_flag(observed: &[f64], predicted: &[f64]) -> Result<(f64, bool)> {
    check(observed, predicted, 1)?;
    let mut clamped = false;
    let mut log1p = |v: f64| {
        if v < 0.0 {
            clamped = true;
            0.0
        } else {
            v.ln_1p()
        }
    };
    let mut sum = 0.0;
    for (y, p) in observed.iter().zip(predicted) {
        let d = log1p(*y) - log1p(*p);
        sum += d * d;
    }
    Ok(((sum / observed.len() as f64).sqrt(), clamped))
}

/// Negative values are clamped to zero before `ln(1 + x)`.
pub fn rmsle(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    let (v, clamped) = rmsle_with_flag(observed, predicted)?;
    if clamped {
        log::warn!("rmsle: negative values clamped to 0");
    }
    Ok(v)
}

pub fn mae(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    check(observed, predicted, 1)?;
    Ok(observed
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p).abs())
        .sum::<f64>()
        / observed.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricBundle {
    pub r2: f64,
    pub rmse: f64,
    pub rmsle: f64,
    pub mae: f64,
    pub n: usize,
    pub clamped_negatives: bool,
}

impl MetricBundle {
    pub fn compute(observed: &[f64], predicted: &[f64]) -> Result<Self> {
        let (rmsle, clamped_negatives) = rmsle_with_flag(observed, predicted)?;
        if clamped_negatives {
            log::warn!("rmsle: negative values clamped to 0");
        }
        Ok(Self {
            r2: r2(observed, predicted)?,
            rmse: rmse(observed, predicted)?,
            rmsle,
            mae: mae(observed, predicted)?,
            n: observed.len(),
            clamped_negatives,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 1.0 / 6.0,
            w3: 1.0 / 6.0,
            w4: 1.0 / 6.0,
        }
    }
}

impl ScoreWeights {
    pub fn new(w1: f64, w2: f64, w3: f64, w4: f64) -> Result<Self> {
        let w = Self { w1, w2, w3, w4 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w1, self.w2, self.w3, self.w4];
        if all.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidWeights(format!("{all:?} not all in [0, 1]")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedBundle {
    pub r2: f64,
    pub nrmse: f64,
    pub nrmsle: f64,
    pub nmae: f64,
}

fn normalize_one(value: f64, max: f64) -> f64 {
    if max == 0.0 {
        1.0
    } else {
        1.0 - value / max
    }
}

/// `1 - metric / max(metric)` per error metric over the whole list. A metric
/// whose maximum is zero normalizes to 1 everywhere. R² passes through.
pub fn normalize(bundles: &[MetricBundle]) -> Result<Vec<NormalizedBundle>> {
    if bundles.is_empty() {
        return Err(Error::EmptyList);
    }
    let max = |f: fn(&MetricBundle) -> f64| bundles.iter().map(f).fold(0.0, f64::max);
    let (max_rmse, max_rmsle, max_mae) = (max(|b| b.rmse), max(|b| b.rmsle), max(|b| b.mae));
    Ok(bundles
        .iter()
        .map(|b| NormalizedBundle {
            r2: b.r2,
            nrmse: normalize_one(b.rmse, max_rmse),
            nrmsle: normalize_one(b.rmsle, max_rmsle),
            nmae: normalize_one(b.mae, max_mae),
        })
        .collect())
}

/// `w1 * R² + (1 - w1) * (w2 * NRMSE + w3 * NRMSLE + w4 * NMAE)`.
///
/// With the default weights the error block contributes at most 0.25, so the
/// best attainable score is 0.75. The score is not clamped; negative R² gives
/// negative contributions.
pub fn composite_score(nb: &NormalizedBundle, w: &ScoreWeights) -> Result<f64> {
    w.validate()?;
    Ok(w.w1 * nb.r2 + (1.0 - w.w1) * (w.w2 * nb.nrmse + w.w3 * nb.nrmsle + w.w4 * nb.nmae))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn bundle(rmse: f64, rmsle: f64, mae: f64) -> MetricBundle {
        MetricBundle {
            r2: 0.5,
            rmse,
            rmsle,
            mae,
            n: 10,
            clamped_negatives: false,
        }
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r2(&[5.0, 5.0, 5.0], &[5.0, 5.0, 5.0]).unwrap(), 1.0);
        assert_eq!(r2(&[5.0, 5.0, 5.0], &[5.0, 5.0, 6.0]).unwrap(), 0.0);
        assert!(r2(&[1.0, 2.0], &[1.0]).is_err());
        assert!(r2(&[1.0], &[1.0]).is_err());
        assert!(r2(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() < 0.0);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0; 4], &[1.0; 4]).unwrap(), 1.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(close(
            rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            (12.5f64).sqrt()
        ));
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355).abs() < 1e-4);
        assert_eq!(
            rmse(&[], &[]),
            Err(Error::TooFewObservations { needed: 1, got: 0 })
        );
    }

    #[test]
    fn rmsle_examples() {
        assert_eq!(rmsle(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(rmsle(&[10.0, 20.0], &[10.0, 20.0]).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!(close(rmsle(&[e - 1.0], &[0.0]).unwrap(), 1.0));
        let (v, clamped) = rmsle_with_flag(&[-3.0], &[0.0]).unwrap();
        assert_eq!((v, clamped), (0.0, true));
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(mae(&[4.0], &[4.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0; 3], &[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(mae(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2)));
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&[bundle(2.0, 1.0, 1.0), bundle(4.0, 1.0, 1.0)]).unwrap();
        assert_eq!((n[0].nrmse, n[1].nrmse), (0.5, 0.0));

        let n = normalize(&[bundle(0.0, 0.0, 0.0), bundle(0.0, 0.0, 0.0)]).unwrap();
        assert!(n
            .iter()
            .all(|b| b.nrmse == 1.0 && b.nrmsle == 1.0 && b.nmae == 1.0));

        let n = normalize(&[bundle(3.0, 2.0, 1.0)]).unwrap();
        assert_eq!(
            (n[0].nrmse, n[0].nrmsle, n[0].nmae, n[0].r2),
            (0.0, 0.0, 0.0, 0.5)
        );

        assert_eq!(normalize(&[]), Err(Error::EmptyList));
    }

    #[test]
    fn composite_examples() {
        let w = ScoreWeights::default();
        let nb = NormalizedBundle {
            r2: 1.0,
            nrmse: 1.0,
            nrmsle: 1.0,
            nmae: 1.0,
        };
        assert!(close(composite_score(&nb, &w).unwrap(), 0.75));

        let w1 = ScoreWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let nb2 = NormalizedBundle {
            r2: 0.3,
            nrmse: 0.9,
            nrmsle: 0.1,
            nmae: 0.7,
        };
        assert_eq!(composite_score(&nb2, &w1).unwrap(), 0.3);

        let zero = NormalizedBundle {
            r2: 0.0,
            nrmse: 0.0,
            nrmsle: 0.0,
            nmae: 0.0,
        };
        assert_eq!(composite_score(&zero, &w).unwrap(), 0.0);

        let bad = ScoreWeights {
            w1: 0.5,
            w2: 0.5,
            w3: 0.5,
            w4: 0.0,
        };
        assert!(matches!(
            composite_score(&nb, &bad),
            Err(Error::InvalidWeights(_))
        ));
        assert!(ScoreWeights::new(-0.1, 0.5, 0.3, 0.3).is_err());
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..50).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..100.0, n),
                proptest::collection::vec(0.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn r2_translation_invariant((y, p) in pair(), c in -50.0f64..50.0) {
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let ps: Vec<f64> = p.iter().map(|v| v + c).collect();
            let a = r2(&y, &p).unwrap();
            let b = r2(&ys, &ps).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            prop_assert!(a <= 1.0);
        }

        #[test]
        fn rmse_mae_scale_equivariant((y, p) in pair(), a in -10.0f64..10.0, c in -50.0f64..50.0) {
            let scale = |v: &[f64], k: f64, s: f64| v.iter().map(|x| k * x + s).collect::<Vec<_>>();
            let base_rmse = rmse(&y, &p).unwrap();
            let base_mae = mae(&y, &p).unwrap();
            let tol = 1e-9 * (1.0 + base_rmse * a.abs());
            prop_assert!((rmse(&scale(&y, a, 0.0), &scale(&p, a, 0.0)).unwrap() - a.abs() * base_rmse).abs() <= tol);
            prop_assert!((mae(&scale(&y, a, 0.0), &scale(&p, a, 0.0)).unwrap() - a.abs() * base_mae).abs() <= tol);
            prop_assert!((rmse(&scale(&y, 1.0, c), &scale(&p, 1.0, c)).unwrap() - base_rmse).abs() <= 1e-9 * (1.0 + base_rmse));
            prop_assert!((mae(&scale(&y, 1.0, c), &scale(&p, 1.0, c)).unwrap() - base_mae).abs() <= 1e-9 * (1.0 + base_mae));
        }

        #[test]
        fn rmsle_is_rmse_of_log1p((y, p) in pair()) {
            let ly: Vec<f64> = y.iter().map(|v| v.ln_1p()).collect();
            let lp: Vec<f64> = p.iter().map(|v| v.ln_1p()).collect();
            prop_assert!((rmsle(&y, &p).unwrap() - rmse(&ly, &lp).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn normalize_inverts_order_and_ignores_scale(
            raw in proptest::collection::vec((0.0f64..10.0, 0.0f64..3.0, 0.0f64..10.0), 1..12),
            k in 0.01f64..100.0,
        ) {
            let b: Vec<MetricBundle> = raw.iter().map(|&(a, l, m)| bundle(a, l, m)).collect();
            let scaled: Vec<MetricBundle> = raw.iter().map(|&(a, l, m)| bundle(a * k, l * k, m * k)).collect();
            let n = normalize(&b).unwrap();
            let ns = normalize(&scaled).unwrap();
            for i in 0..b.len() {
                prop_assert!((0.0..=1.0).contains(&n[i].nrmse));
                prop_assert!((n[i].nrmse - ns[i].nrmse).abs() < 1e-12);
                prop_assert!((n[i].nmae - ns[i].nmae).abs() < 1e-12);
                for j in 0..b.len() {
                    if b[i].rmse < b[j].rmse {
                        prop_assert!(n[i].nrmse > n[j].nrmse);
                    }
                }
            }
        }

        #[test]
        fn composite_monotone(
            base in (-1.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
            bump in 0.0f64..0.5,
            field in 0usize..4,
            raw_w in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.01f64..1.0),
        ) {
            let s = raw_w.0 + raw_w.1 + raw_w.2 + raw_w.3;
            let w = ScoreWeights::new(raw_w.0 / s, raw_w.1 / s, raw_w.2 / s, 1.0 - (raw_w.0 + raw_w.1 + raw_w.2) / s).unwrap();
            let nb = NormalizedBundle { r2: base.0, nrmse: base.1, nrmsle: base.2, nmae: base.3 };
            let mut up = nb;
            match field {
                0 => up.r2 += bump,
                1 => up.nrmse += bump,
                2 => up.nrmsle += bump,
                _ => up.nmae += bump,
            }
            prop_assert!(composite_score(&up, &w).unwrap() >= composite_score(&nb, &w).unwrap());
        }
    }
}
