//! Sliding input/output windows over an [`AlignedFrame`] and the purged
//! chronological train/test split.

use std::io::Write;

use crate::error::{Error, Result};
use crate::ingest::{AlignedFrame, Instant};

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    /// Output horizon H in seconds.
    pub horizon: i64,
    /// Sampling interval R in seconds.
    pub sample_interval: i64,
    /// Input length I in seconds.
    pub input_length: i64,
    pub target_column: String,
    /// Anchor stride in decimated steps.
    pub stride_steps: usize,
}

impl WindowSpec {
    pub fn new(horizon: i64, sample_interval: i64, input_length: i64, target: &str) -> Self {
        Self {
            horizon,
            sample_interval,
            input_length,
            target_column: target.to_string(),
            stride_steps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.sample_interval;
        if r <= 0 || self.horizon <= 0 || self.input_length <= 0 {
            return Err(Error::InvalidWindow(
                "horizon, interval and input length must be positive".into(),
            ));
        }
        if self.horizon % r != 0 || self.input_length % r != 0 {
            return Err(Error::InvalidWindow(format!(
                "I={}s and H={}s must be multiples of R={}s",
                self.input_length, self.horizon, r
            )));
        }
        if self.stride_steps == 0 {
            return Err(Error::InvalidWindow("stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn input_steps(&self) -> usize {
        (self.input_length / self.sample_interval) as usize
    }

    pub fn output_steps(&self) -> usize {
        (self.horizon / self.sample_interval) as usize
    }
}

/// Input matrices are stored flattened time-major: step 0 all columns, step 1 all columns, ...
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub input_steps: usize,
    pub output_steps: usize,
    pub n_columns: usize,
    pub sample_interval: i64,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub anchor_times: Vec<Instant>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.anchor_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor_times.is_empty()
    }

    /// Grid time of the first input step of window `k`.
    pub fn input_start(&self, k: usize) -> Instant {
        self.anchor_times[k] - (self.input_steps as i64 - 1) * self.sample_interval
    }

    /// Grid time of the last output step of window `k`.
    pub fn output_end(&self, k: usize) -> Instant {
        self.anchor_times[k] + self.output_steps as i64 * self.sample_interval
    }

    fn empty_like(&self) -> Self {
        Self {
            input_steps: self.input_steps,
            output_steps: self.output_steps,
            n_columns: self.n_columns,
            sample_interval: self.sample_interval,
            inputs: vec![],
            outputs: vec![],
            anchor_times: vec![],
        }
    }

    fn push_from(&mut self, other: &WindowSet, k: usize) {
        self.inputs.push(other.inputs[k].clone());
        self.outputs.push(other.outputs[k].clone());
        self.anchor_times.push(other.anchor_times[k]);
    }

    /// Writes `anchor,input_start,output_end`, one row per window.
    pub fn write_debug_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["anchor", "input_start", "output_end"])?;
        for k in 0..self.len() {
            wr.write_record([
                self.anchor_times[k].to_string(),
                self.input_start(k).to_string(),
                self.output_end(k).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Number of windows for a series of `n_rows` decimated rows.
pub fn window_count(
    n_rows: usize,
    input_steps: usize,
    output_steps: usize,
    stride: usize,
) -> usize {
    if n_rows < input_steps + output_steps {
        0
    } else {
        (n_rows - input_steps - output_steps) / stride + 1
    }
}

/// Decimates the frame to `spec.sample_interval` by row skipping, then slides the
/// window. Inputs cover decimated rows `(t - I/R, t]` over all columns; outputs
/// cover `(t, t + H/R]` of the target column.
pub fn make_windows(frame: &AlignedFrame, spec: &WindowSpec) -> Result<WindowSet> {
    spec.validate()?;
    let step = frame.step;
    if spec.sample_interval % step != 0 {
        return Err(Error::IncompatibleInterval {
            interval: spec.sample_interval,
            step,
        });
    }
    let target = frame
        .column_index(&spec.target_column)
        .ok_or_else(|| Error::UnknownColumn(spec.target_column.clone()))?;

    let factor = (spec.sample_interval / step) as usize;
    let rows: Vec<usize> = (0..frame.n_rows()).step_by(factor).collect();
    let (n_in, n_out) = (spec.input_steps(), spec.output_steps());
    if rows.len() < n_in + n_out {
        return Err(Error::FrameTooShort {
            rows: rows.len(),
            needed: n_in + n_out,
        });
    }

    let n_cols = frame.n_cols();
    let target_values = &frame.columns[target].values;
    let mut set = WindowSet {
        input_steps: n_in,
        output_steps: n_out,
        n_columns: n_cols,
        sample_interval: spec.sample_interval,
        inputs: vec![],
        outputs: vec![],
        anchor_times: vec![],
    };
    let mut t = n_in - 1;
    while t + n_out < rows.len() {
        let mut x = Vec::with_capacity(n_in * n_cols);
        for &r in &rows[t + 1 - n_in..=t] {
            x.extend(frame.row(r));
        }
        let y = rows[t + 1..=t + n_out]
            .iter()
            .map(|&r| target_values[r])
            .collect();
        set.inputs.push(x);
        set.outputs.push(y);
        set.anchor_times.push(frame.grid[rows[t]]);
        t += spec.stride_steps;
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitWindows {
    pub train: WindowSet,
    pub test: WindowSet,
    pub split_fraction: f64,
}

/// First `ceil(fraction * n)` windows train, the rest test. With `purge`, test
/// windows whose input range touches any train output range are dropped.
pub fn split_chronological(
    windows: &WindowSet,
    fraction: f64,
    purge: bool,
) -> Result<SplitWindows> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidWindow(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    let n = windows.len();
    if n < 2 {
        return Err(Error::DegenerateSplit { train: n, test: 0 });
    }
    // the epsilon keeps 0.7 * 10 from rounding up to 8
    let n_train = ((fraction * n as f64 - 1e-9).ceil() as usize).min(n);

    let mut train = windows.empty_like();
    for k in 0..n_train {
        train.push_from(windows, k);
    }
    let last_train_output = (0..n_train).map(|k| windows.output_end(k)).max();

    let mut test = windows.empty_like();
    for k in n_train..n {
        if purge {
            if let Some(end) = last_train_output {
                if windows.input_start(k) <= end {
                    continue;
                }
            }
        }
        test.push_from(windows, k);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::DegenerateSplit {
            train: train.len(),
            test: test.len(),
        });
    }
    Ok(SplitWindows {
        train,
        test,
        split_fraction: fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Column;
    use proptest::prelude::*;

    fn ramp_frame(n: usize, step: i64) -> AlignedFrame {
        AlignedFrame::new(
            step,
            (0..n as i64).map(|k| k * step).collect(),
            vec![
                Column {
                    sensor_id: "y".into(),
                    measurement_type: "t".into(),
                    values: (0..n).map(|k| k as f64).collect(),
                },
                Column {
                    sensor_id: "z".into(),
                    measurement_type: "t".into(),
                    values: (0..n).map(|k| 100.0 + k as f64).collect(),
                },
            ],
        )
        .unwrap()
    }

    fn brute_count(n_rows: usize, n_in: usize, n_out: usize, stride: usize) -> usize {
        let mut count = 0;
        let mut t = n_in as isize - 1;
        while t >= 0 && (t as usize) + n_out < n_rows {
            count += 1;
            t += stride as isize;
        }
        count
    }

    #[test]
    fn window_counts() {
        let f = ramp_frame(10, 60);
        let w = make_windows(&f, &WindowSpec::new(120, 60, 180, "y")).unwrap();
        assert_eq!(w.len(), 6);

        let f = ramp_frame(5, 60);
        let w = make_windows(&f, &WindowSpec::new(120, 60, 180, "y")).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.inputs[0], vec![0.0, 100.0, 1.0, 101.0, 2.0, 102.0]);
        assert_eq!(w.outputs[0], vec![3.0, 4.0]);

        let f = ramp_frame(4, 60);
        assert_eq!(
            make_windows(&f, &WindowSpec::new(120, 60, 180, "y")),
            Err(Error::FrameTooShort { rows: 4, needed: 5 })
        );
    }

    #[test]
    fn decimation_and_anchor_times() {
        let f = ramp_frame(12, 60);
        let w = make_windows(&f, &WindowSpec::new(120, 120, 240, "y")).unwrap();
        // decimated rows: 0,2,4,6,8,10
        assert_eq!(w.len(), 4);
        assert_eq!(w.anchor_times, vec![120, 240, 360, 480]);
        assert_eq!(w.inputs[0], vec![0.0, 100.0, 2.0, 102.0]);
        assert_eq!(w.outputs[0], vec![4.0]);
        assert_eq!(w.input_start(0), 0);
        assert_eq!(w.output_end(0), 240);
    }

    #[test]
    fn interval_errors() {
        let f = ramp_frame(12, 60);
        assert!(matches!(
            make_windows(&f, &WindowSpec::new(90, 90, 90, "y")),
            Err(Error::IncompatibleInterval { .. })
        ));
        assert!(matches!(
            make_windows(&f, &WindowSpec::new(100, 60, 120, "y")),
            Err(Error::InvalidWindow(_))
        ));
        assert!(matches!(
            make_windows(&f, &WindowSpec::new(60, 60, 120, "nope")),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn split_counts_without_purge() {
        let f = ramp_frame(11, 60);
        let w = make_windows(&f, &WindowSpec::new(60, 60, 60, "y")).unwrap();
        assert_eq!(w.len(), 10);
        let s = split_chronological(&w, 0.8, false).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
    }

    #[test]
    fn split_purges_overlapping_test_windows() {
        let f = ramp_frame(30, 60);
        let w = make_windows(&f, &WindowSpec::new(120, 60, 180, "y")).unwrap();
        // 26 windows, anchors 2..=27; train 0..21 (anchors 2..22), last output ends at 24
        let s = split_chronological(&w, 0.8, true).unwrap();
        assert_eq!(s.train.len(), 21);
        let last_out = (0..s.train.len())
            .map(|k| s.train.output_end(k))
            .max()
            .unwrap();
        assert_eq!(last_out, 24 * 60);
        for k in 0..s.test.len() {
            assert!(s.test.input_start(k) > last_out);
        }
        // first surviving anchor a satisfies a - 2 > 24
        assert_eq!(s.test.anchor_times[0], 27 * 60);
        assert_eq!(s.test.len(), 1);
    }

    #[test]
    fn split_degenerate() {
        let f = ramp_frame(11, 60);
        let w = make_windows(&f, &WindowSpec::new(60, 60, 60, "y")).unwrap();
        assert!(matches!(
            split_chronological(&w, 0.99, true),
            Err(Error::DegenerateSplit { .. })
        ));
        assert!(split_chronological(&w, 1.0, false).is_err());
    }

    #[test]
    fn debug_dump() {
        let f = ramp_frame(5, 60);
        let w = make_windows(&f, &WindowSpec::new(60, 60, 120, "y")).unwrap();
        let mut buf = vec![];
        w.write_debug_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "anchor,input_start,output_end\n60,0,120\n120,60,180\n180,120,240\n"
        );
    }

    proptest! {
        #[test]
        fn count_formula_matches_enumeration(
            n_rows in 1usize..=20, n_in in 1usize..=5, n_out in 1usize..=5, stride in 1usize..=3
        ) {
            prop_assert_eq!(window_count(n_rows, n_in, n_out, stride), brute_count(n_rows, n_in, n_out, stride));
            let f = ramp_frame(n_rows, 60);
            let mut spec = WindowSpec::new(n_out as i64 * 60, 60, n_in as i64 * 60, "y");
            spec.stride_steps = stride;
            match make_windows(&f, &spec) {
                Ok(w) => {
                    prop_assert_eq!(w.len(), brute_count(n_rows, n_in, n_out, stride));
                    for k in 0..w.len() {
                        // ramp target: last input value of y is anchor index, outputs follow it
                        let anchor_idx = (w.anchor_times[k] / 60) as f64;
                        prop_assert_eq!(w.inputs[k][(n_in - 1) * 2], anchor_idx);
                        prop_assert_eq!(w.outputs[k][0], anchor_idx + 1.0);
                    }
                    prop_assert!(w.anchor_times.windows(2).all(|p| p[0] < p[1]));
                }
                Err(Error::FrameTooShort { .. }) => prop_assert!(n_rows < n_in + n_out),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }

        #[test]
        fn purged_split_has_no_leakage(
            n_rows in 10usize..60, n_in in 1usize..=5, n_out in 1usize..=4, frac in 0.3f64..0.9
        ) {
            let f = ramp_frame(n_rows, 60);
            let spec = WindowSpec::new(n_out as i64 * 60, 60, n_in as i64 * 60, "y");
            let w = make_windows(&f, &spec).unwrap();
            if let Ok(s) = split_chronological(&w, frac, true) {
                let max_train = (0..s.train.len()).map(|k| s.train.anchor_times[k] + spec.horizon).max().unwrap();
                let min_test = (0..s.test.len()).map(|k| s.test.anchor_times[k] - spec.input_length + spec.sample_interval).min().unwrap();
                prop_assert!(max_train <= min_test);
            }
        }
    }
}
