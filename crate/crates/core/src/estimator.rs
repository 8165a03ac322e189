//! Parameter estimation for horizons outside the explored set.
//!
//! Every estimator reads two curves from the optimal set, `h -> i(h)` and
//! `h -> r(h)`, and treats them independently.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::explorer::OptimalSet;
use crate::linalg::{lstsq_qr, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    LiE,
    Poly,
    ExpSmooth,
    Knn,
    None,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::LiE,
        EstimatorKind::Poly,
        EstimatorKind::ExpSmooth,
        EstimatorKind::Knn,
        EstimatorKind::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::LiE => "li_e",
            EstimatorKind::Poly => "poly",
            EstimatorKind::ExpSmooth => "exp_smooth",
            EstimatorKind::Knn => "knn",
            EstimatorKind::None => "none",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidEstimator(format!("unknown estimator '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub poly_degree: usize,
    pub alpha: f64,
    pub knn_k: usize,
    /// Minimum number of output samples per horizon.
    pub min_samples: u32,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::LiE,
            poly_degree: 3,
            alpha: 0.5,
            knn_k: 3,
            min_samples: 2,
        }
    }
}

impl EstimatorConfig {
    pub fn with_kind(kind: EstimatorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.poly_degree == 0 {
            return Err(Error::InvalidEstimator(
                "poly degree must be positive".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidEstimator(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidEstimator("knn k must be positive".into()));
        }
        if self.min_samples == 0 {
            return Err(Error::InvalidEstimator(
                "min samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Known optimum `(i, r)` at horizon `h`, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub h: f64,
    pub i: f64,
    pub r: f64,
}

impl Knot {
    pub fn new(h: f64, i: f64, r: f64) -> Self {
        Self { h, i, r }
    }
}

/// Knots sorted by strictly increasing horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Knots(Vec<Knot>);

impl Knots {
    pub fn new(mut knots: Vec<Knot>) -> Result<Self> {
        if knots
            .iter()
            .any(|k| !(k.h.is_finite() && k.i.is_finite() && k.r.is_finite()))
        {
            return Err(Error::InvalidEstimator("non-finite knot".into()));
        }
        knots.sort_by(|a, b| a.h.total_cmp(&b.h));
        if knots.windows(2).any(|w| w[0].h == w[1].h) {
            return Err(Error::InvalidEstimator("duplicate knot horizon".into()));
        }
        Ok(Self(knots))
    }

    pub fn from_optimal(phi: &OptimalSet) -> Self {
        // BTreeMap keys are already sorted and distinct
        Self(
            phi.entries
                .iter()
                .map(|(&h, e)| {
                    Knot::new(
                        h as f64,
                        e.config.input_length as f64,
                        e.config.sample_interval as f64,
                    )
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Knot] {
        &self.0
    }

    fn require(&self, needed: usize) -> Result<()> {
        if self.len() < needed {
            return Err(Error::InsufficientKnots {
                needed,
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// Raw (unconstrained) estimate in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawEstimate {
    pub i: f64,
    pub r: f64,
}

fn lerp(x0: f64, y0: f64, x1: f64, y1: f64, x: f64) -> f64 {
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Piecewise-linear through `(xs, ys)`; outside the hull either continue the
/// end segments or hold the end values.
fn piecewise(xs: &[f64], ys: &[f64], x: f64, extrapolate: bool) -> f64 {
    let n = xs.len();
    if n == 1 {
        return ys[0];
    }
    if let Some(j) = xs.iter().position(|&k| k == x) {
        return ys[j];
    }
    if x < xs[0] {
        return if extrapolate {
            lerp(xs[0], ys[0], xs[1], ys[1], x)
        } else {
            ys[0]
        };
    }
    if x > xs[n - 1] {
        return if extrapolate {
            lerp(xs[n - 2], ys[n - 2], xs[n - 1], ys[n - 1], x)
        } else {
            ys[n - 1]
        };
    }
    let j = xs.partition_point(|&k| k < x);
    lerp(xs[j - 1], ys[j - 1], xs[j], ys[j], x)
}

fn split(knots: &Knots) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = knots.as_slice();
    (
        k.iter().map(|k| k.h).collect(),
        k.iter().map(|k| k.i).collect(),
        k.iter().map(|k| k.r).collect(),
    )
}

/// Linear interpolation between bracketing knots, linear extrapolation from
/// the two nearest knots outside the explored range.
pub fn estimate_li_e(knots: &Knots, h_query: f64) -> Result<RawEstimate> {
    knots.require(2)?;
    let (h, i, r) = split(knots);
    Ok(RawEstimate {
        i: piecewise(&h, &i, h_query, true),
        r: piecewise(&h, &r, h_query, true),
    })
}

fn poly_fit_eval(z: &[f64], y: &[f64], degree: usize, zq: f64) -> Result<f64> {
    let a = Matrix::from_rows(
        &z.iter()
            .map(|&zv| (0..=degree).map(|p| zv.powi(p as i32)).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    )?;
    let coef = lstsq_qr(&a, y)?;
    // Horner
    Ok(coef.iter().rev().fold(0.0, |acc, c| acc * zq + c))
}

/// Least-squares polynomial of degree `min(degree, n - 1)` in horizon
/// coordinates rescaled to [-1, 1].
pub fn estimate_poly(knots: &Knots, h_query: f64, degree: usize) -> Result<RawEstimate> {
    knots.require(2)?;
    if degree == 0 {
        return Err(Error::InvalidEstimator(
            "poly degree must be positive".into(),
        ));
    }
    let (h, i, r) = split(knots);
    let (lo, hi) = (h[0], h[h.len() - 1]);
    let scale = |x: f64| 2.0 * (x - lo) / (hi - lo) - 1.0;
    let z: Vec<f64> = h.iter().map(|&x| scale(x)).collect();
    let d = degree.min(knots.len() - 1);
    let zq = scale(h_query);
    Ok(RawEstimate {
        i: poly_fit_eval(&z, &i, d, zq)?,
        r: poly_fit_eval(&z, &r, d, zq)?,
    })
}

/// Exponentially smoothed knot values, starting from the first knot.
pub fn smooth(values: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let s = match out.last() {
            None => v,
            Some(&prev) => alpha * v + (1.0 - alpha) * prev,
        };
        out.push(s);
    }
    out
}

/// Interpolates over the smoothed knots, holding the end values outside them.
pub fn estimate_exp_smooth(knots: &Knots, h_query: f64, alpha: f64) -> Result<RawEstimate> {
    knots.require(1)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidEstimator(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let (h, i, r) = split(knots);
    Ok(RawEstimate {
        i: piecewise(&h, &smooth(&i, alpha), h_query, false),
        r: piecewise(&h, &smooth(&r, alpha), h_query, false),
    })
}

/// Mean of the `k` knots nearest in horizon; equal distances go to the
/// smaller horizon.
pub fn estimate_knn(knots: &Knots, h_query: f64, k: usize) -> Result<RawEstimate> {
    if k == 0 {
        return Err(Error::InvalidEstimator("knn k must be positive".into()));
    }
    if k > knots.len() {
        return Err(Error::KTooLarge {
            k,
            available: knots.len(),
        });
    }
    let mut order: Vec<&Knot> = knots.as_slice().iter().collect();
    order.sort_by(|a, b| {
        (a.h - h_query)
            .abs()
            .total_cmp(&(b.h - h_query).abs())
            .then(a.h.total_cmp(&b.h))
    });
    let near = &order[..k];
    Ok(RawEstimate {
        i: near.iter().map(|k| k.i).sum::<f64>() / k as f64,
        r: near.iter().map(|k| k.r).sum::<f64>() / k as f64,
    })
}

/// Fixed baseline: three horizons of input sampled at a third of the horizon.
pub fn estimate_none(h_query: f64) -> RawEstimate {
    RawEstimate {
        i: 3.0 * h_query,
        r: h_query / 3.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub horizon: i64,
    pub input_length: i64,
    pub sample_interval: i64,
    pub raw_input_length: f64,
    pub raw_sample_interval: f64,
    pub kind: EstimatorKind,
}

impl Estimate {
    /// Horizon used for windowing: the largest multiple of the interval not
    /// exceeding the query. Equals the query whenever the query lies on the
    /// native grid.
    pub fn window_horizon(&self) -> i64 {
        self.horizon / self.sample_interval * self.sample_interval
    }
}

/// Enforces `i >= h` and at least `min_samples` output samples, then snaps
/// the interval to the native grid and the input length up to the interval.
///
/// The interval is the largest native-step multiple within the sample bound
/// that divides the horizon; if none divides it, the plain floor multiple is
/// used.
pub fn apply_constraints(
    raw: RawEstimate,
    h_query: i64,
    cfg: &EstimatorConfig,
    native_step: i64,
) -> Result<Estimate> {
    if !(raw.i.is_finite() && raw.r.is_finite()) {
        return Err(Error::InvalidEstimator("raw estimate is not finite".into()));
    }
    if h_query <= 0 || native_step <= 0 {
        return Err(Error::InvalidEstimator(
            "horizon and native step must be positive".into(),
        ));
    }
    let min_samples = cfg.min_samples.max(1) as i64;
    // largest whole number of native steps with h / r >= min_samples
    let max_steps = h_query / (min_samples * native_step);
    if max_steps < 1 {
        return Err(Error::InfeasibleHorizon {
            horizon: h_query,
            min_samples: min_samples as usize,
            step: native_step,
        });
    }
    let raw_steps = (raw.r / native_step as f64 + 1e-9).floor();
    let cap = if raw_steps < 1.0 {
        1
    } else if raw_steps >= max_steps as f64 {
        max_steps
    } else {
        raw_steps as i64
    };
    let steps = (1..=cap)
        .rev()
        .find(|s| h_query % (s * native_step) == 0)
        .unwrap_or(cap);
    let r = steps * native_step;

    let i_floor = raw.i.max(h_query as f64);
    let mut n_in = (i_floor / r as f64 - 1e-9).ceil() as i64;
    if n_in * r < h_query {
        n_in = (h_query + r - 1) / r;
    }
    Ok(Estimate {
        horizon: h_query,
        input_length: n_in * r,
        sample_interval: r,
        raw_input_length: raw.i,
        raw_sample_interval: raw.r,
        kind: cfg.kind,
    })
}

pub fn estimate_raw(knots: &Knots, h_query: f64, cfg: &EstimatorConfig) -> Result<RawEstimate> {
    cfg.validate()?;
    if knots.is_empty() {
        return Err(Error::InsufficientKnots { needed: 1, got: 0 });
    }
    match cfg.kind {
        EstimatorKind::LiE => estimate_li_e(knots, h_query),
        EstimatorKind::Poly => estimate_poly(knots, h_query, cfg.poly_degree),
        EstimatorKind::ExpSmooth => estimate_exp_smooth(knots, h_query, cfg.alpha),
        EstimatorKind::Knn => estimate_knn(knots, h_query, cfg.knn_k),
        EstimatorKind::None => Ok(estimate_none(h_query)),
    }
}

pub fn estimate(
    knots: &Knots,
    h_query: i64,
    cfg: &EstimatorConfig,
    native_step: i64,
) -> Result<Estimate> {
    let raw = estimate_raw(knots, h_query as f64, cfg)?;
    apply_constraints(raw, h_query, cfg, native_step)
}

/// Validation horizons, in minutes, used by default for estimation.
pub const DEFAULT_VALIDATION_HORIZONS_MIN: [i64; 17] = [
    8, 15, 30, 60, 100, 140, 180, 220, 260, 300, 340, 380, 420, 460, 500, 580, 620,
];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two() -> Knots {
        Knots::new(vec![
            Knot::new(10.0, 30.0, 5.0),
            Knot::new(20.0, 60.0, 10.0),
        ])
        .unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn li_e_examples() {
        let k = two();
        assert_eq!(
            estimate_li_e(&k, 15.0).unwrap(),
            RawEstimate { i: 45.0, r: 7.5 }
        );
        assert_eq!(
            estimate_li_e(&k, 10.0).unwrap(),
            RawEstimate { i: 30.0, r: 5.0 }
        );
        assert_eq!(
            estimate_li_e(&k, 25.0).unwrap(),
            RawEstimate { i: 75.0, r: 12.5 }
        );
        assert_eq!(
            estimate_li_e(&k, 5.0).unwrap(),
            RawEstimate { i: 15.0, r: 2.5 }
        );
        let one = Knots::new(vec![Knot::new(10.0, 30.0, 5.0)]).unwrap();
        assert_eq!(
            estimate_li_e(&one, 10.0),
            Err(Error::InsufficientKnots { needed: 2, got: 1 })
        );
    }

    #[test]
    fn poly_examples() {
        let k = two();
        for q in [3.0, 10.0, 15.0, 25.0, 100.0] {
            let p = estimate_poly(&k, q, 1).unwrap();
            let l = estimate_li_e(&k, q).unwrap();
            assert!((p.i - l.i).abs() < 1e-9 && (p.r - l.r).abs() < 1e-9);
        }
        let sq = Knots::new(
            [10.0, 20.0, 40.0]
                .iter()
                .map(|&h| Knot::new(h, h * h, h))
                .collect(),
        )
        .unwrap();
        let p = estimate_poly(&sq, 30.0, 2).unwrap();
        // direct solve of the 3x3 Vandermonde system in raw h
        let (a, b, c) = {
            let (y1, y2, y3) = (100.0, 400.0, 1600.0);
            let (x1, x2, x3): (f64, f64, f64) = (10.0, 20.0, 40.0);
            let l1 = y1 / ((x1 - x2) * (x1 - x3));
            let l2 = y2 / ((x2 - x1) * (x2 - x3));
            let l3 = y3 / ((x3 - x1) * (x3 - x2));
            (
                l1 + l2 + l3,
                -(l1 * (x2 + x3) + l2 * (x1 + x3) + l3 * (x1 + x2)),
                l1 * x2 * x3 + l2 * x1 * x3 + l3 * x1 * x2,
            )
        };
        let oracle = a * 900.0 + b * 30.0 + c;
        assert!(
            close(p.i, oracle, 1e-6) && close(p.i, 900.0, 1e-6),
            "{}",
            p.i
        );
        // degree larger than the knots allow is capped
        let p = estimate_poly(&sq, 30.0, 9).unwrap();
        assert!(close(p.i, 900.0, 1e-6));
    }

    #[test]
    fn exp_smooth_examples() {
        let k = two();
        let e = estimate_exp_smooth(&k, 20.0, 0.5).unwrap();
        assert_eq!(e.i, 45.0);
        assert_eq!(smooth(&[30.0, 60.0], 0.5), vec![30.0, 45.0]);
        // flat beyond the ends
        assert_eq!(estimate_exp_smooth(&k, 100.0, 0.5).unwrap().i, 45.0);
        assert_eq!(estimate_exp_smooth(&k, 1.0, 0.5).unwrap().i, 30.0);

        let one = Knots::new(vec![Knot::new(10.0, 30.0, 5.0)]).unwrap();
        for q in [1.0, 10.0, 500.0] {
            assert_eq!(
                estimate_exp_smooth(&one, q, 0.3).unwrap(),
                RawEstimate { i: 30.0, r: 5.0 }
            );
        }

        let k = Knots::new(
            (1..6)
                .map(|j| Knot::new(j as f64 * 10.0, (j * j) as f64 * 7.0 + 5.0, j as f64 * 3.0))
                .collect(),
        )
        .unwrap();
        for q in [12.0, 25.0, 33.0, 47.0] {
            let e = estimate_exp_smooth(&k, q, 0.999).unwrap();
            let l = estimate_li_e(&k, q).unwrap();
            assert!(close(e.i, l.i, 5e-3) && close(e.r, l.r, 5e-3));
        }
        assert!(estimate_exp_smooth(&k, 10.0, 1.0).is_err());
    }

    #[test]
    fn knn_examples() {
        let k = Knots::new(vec![
            Knot::new(10.0, 30.0, 5.0),
            Knot::new(20.0, 60.0, 10.0),
            Knot::new(40.0, 100.0, 20.0),
        ])
        .unwrap();
        assert_eq!(
            estimate_knn(&k, 20.0, 1).unwrap(),
            RawEstimate { i: 60.0, r: 10.0 }
        );
        assert_eq!(
            estimate_knn(&k, 15.0, 2).unwrap(),
            RawEstimate { i: 45.0, r: 7.5 }
        );
        // exact tie between 10 and 20 with k = 1 picks the smaller horizon
        assert_eq!(estimate_knn(&k, 15.0, 1).unwrap().i, 30.0);
        let all = estimate_knn(&k, 1000.0, 3).unwrap();
        assert_eq!(
            all,
            RawEstimate {
                i: 190.0 / 3.0,
                r: 35.0 / 3.0
            }
        );
        assert_eq!(
            estimate_knn(&k, 10.0, 4),
            Err(Error::KTooLarge { k: 4, available: 3 })
        );
    }

    #[test]
    fn constraint_examples() {
        let cfg = EstimatorConfig::default();
        let e = apply_constraints(RawEstimate { i: 12.0, r: 5.0 }, 20, &cfg, 1).unwrap();
        assert_eq!(e.input_length, 20);

        let cfg4 = EstimatorConfig {
            min_samples: 4,
            ..cfg
        };
        let e = apply_constraints(RawEstimate { i: 60.0, r: 15.0 }, 20, &cfg4, 1).unwrap();
        assert_eq!(e.sample_interval, 5);

        let e = apply_constraints(RawEstimate { i: 60.0, r: 5.0 }, 20, &cfg, 1).unwrap();
        assert_eq!((e.input_length, e.sample_interval), (60, 5));

        // interval snapped down to the native grid, input up to the interval
        let e = apply_constraints(RawEstimate { i: 100.0, r: 250.0 }, 1200, &cfg, 60).unwrap();
        assert_eq!((e.input_length, e.sample_interval), (1200, 240));
        let e = apply_constraints(
            RawEstimate {
                i: 1300.0,
                r: 250.0,
            },
            1200,
            &cfg,
            60,
        )
        .unwrap();
        assert_eq!(e.input_length, 1440);

        assert_eq!(
            apply_constraints(RawEstimate { i: 1.0, r: 1.0 }, 90, &cfg, 60),
            Err(Error::InfeasibleHorizon {
                horizon: 90,
                min_samples: 2,
                step: 60
            })
        );
        // negative extrapolated values still yield a feasible estimate
        let e = apply_constraints(RawEstimate { i: -50.0, r: -3.0 }, 600, &cfg, 60).unwrap();
        assert_eq!((e.input_length, e.sample_interval), (600, 60));
    }

    #[test]
    fn estimate_dispatch() {
        let none = EstimatorConfig::with_kind(EstimatorKind::None);
        let raw = estimate_raw(&two(), 30.0, &none).unwrap();
        assert_eq!(raw, RawEstimate { i: 90.0, r: 10.0 });

        let li = EstimatorConfig::with_kind(EstimatorKind::LiE);
        let e = estimate(&two(), 20, &li, 1).unwrap();
        assert_eq!((e.input_length, e.sample_interval), (60, 10));

        // nearest default-grid horizon to 8 min is 10 min
        let phi = Knots::new(
            [5i64, 10, 20, 40]
                .iter()
                .map(|&m| Knot::new((m * 60) as f64, (m * 180) as f64, (m * 20) as f64))
                .collect(),
        )
        .unwrap();
        let knn1 = EstimatorConfig {
            kind: EstimatorKind::Knn,
            knn_k: 1,
            ..EstimatorConfig::default()
        };
        let raw = estimate_raw(&phi, 480.0, &knn1).unwrap();
        assert_eq!(
            raw,
            RawEstimate {
                i: 1800.0,
                r: 200.0
            }
        );
    }

    #[test]
    fn kind_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.to_string().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("linear".parse::<EstimatorKind>().is_err());
    }

    fn arb_knots() -> impl Strategy<Value = Knots> {
        prop::collection::btree_set(1i64..500, 2..8).prop_flat_map(|hs| {
            let n = hs.len();
            (
                Just(hs),
                prop::collection::vec(1.0f64..5000.0, n),
                prop::collection::vec(1.0f64..500.0, n),
            )
                .prop_map(|(hs, is, rs)| {
                    Knots::new(
                        hs.into_iter()
                            .zip(is.into_iter().zip(rs))
                            .map(|(h, (i, r))| Knot::new(h as f64 * 60.0, i, r))
                            .collect(),
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn knot_exactness(k in arb_knots()) {
            for kn in k.as_slice() {
                let l = estimate_li_e(&k, kn.h).unwrap();
                prop_assert_eq!((l.i, l.r), (kn.i, kn.r));
                let n = estimate_knn(&k, kn.h, 1).unwrap();
                prop_assert_eq!((n.i, n.r), (kn.i, kn.r));
                let p = estimate_poly(&k, kn.h, k.len() - 1).unwrap();
                prop_assert!(close(p.i, kn.i, 1e-6) && close(p.r, kn.r, 1e-6));
            }
        }

        #[test]
        fn constraints_hold(k in arb_knots(), h in 2i64..50_000, kind in 0usize..5,
                            n_min in 1u32..6, step in prop::sample::select(vec![1i64, 10, 60])) {
            let cfg = EstimatorConfig {
                kind: EstimatorKind::ALL[kind],
                min_samples: n_min,
                knn_k: 1,
                ..EstimatorConfig::default()
            };
            match estimate(&k, h, &cfg, step) {
                Ok(e) => {
                    prop_assert!(e.input_length >= h);
                    prop_assert!(e.sample_interval > 0 && e.sample_interval % step == 0);
                    prop_assert!(h / e.sample_interval >= n_min as i64);
                    prop_assert_eq!(e.input_length % e.sample_interval, 0);
                    if h % step == 0 {
                        prop_assert_eq!(h % e.sample_interval, 0);
                    }
                }
                Err(err) => {
                    prop_assert!(h < step * n_min as i64, "unexpected {:?}", err);
                }
            }
        }

        #[test]
        fn li_e_bounded_on_monotone(hs in prop::collection::btree_set(1i64..1000, 2..8), q in 0.0f64..1.0) {
            let hs: Vec<i64> = hs.into_iter().collect();
            let k = Knots::new(hs.iter().map(|&h| Knot::new(h as f64, (h * h) as f64, 1.0)).collect()).unwrap();
            let lo = hs[0] as f64;
            let hi = *hs.last().unwrap() as f64;
            let x = lo + q * (hi - lo);
            let j = hs.partition_point(|&h| (h as f64) < x).max(1);
            let (a, b) = (k.as_slice()[j - 1].i, k.as_slice()[j].i);
            let v = estimate_li_e(&k, x).unwrap().i;
            prop_assert!(v >= a.min(b) - 1e-9 && v <= a.max(b) + 1e-9);
        }

        #[test]
        fn curves_are_independent(k in arb_knots(), bump in 1.0f64..100.0, q in 1.0f64..40_000.0) {
            let bumped = Knots::new(k.as_slice().iter().map(|kn| Knot::new(kn.h, kn.i, kn.r + bump)).collect()).unwrap();
            for kind in [EstimatorKind::LiE, EstimatorKind::Poly, EstimatorKind::ExpSmooth, EstimatorKind::Knn] {
                let cfg = EstimatorConfig::with_kind(kind);
                let cfg = EstimatorConfig { knn_k: cfg.knn_k.min(k.len()), ..cfg };
                let a = estimate_raw(&k, q, &cfg).unwrap();
                let b = estimate_raw(&bumped, q, &cfg).unwrap();
                prop_assert_eq!(a.i, b.i);
            }
        }
    }
}
