//! Frame sampling and sliding-window planning inside one segment.

use serde::{Deserialize, Serialize};

use crate::document::Segment;
use crate::residual::CaptionError;

const EPS: f64 = 1e-9;

/// Number of sample instants `start + k / rate_hz` strictly before `end`,
/// never less than one (the anchor frame).
pub fn sample_count(start_s: f64, end_s: f64, rate_hz: f64) -> usize {
    let span = (end_s - start_s) * rate_hz;
    if !(span > 0.0) || !span.is_finite() {
        return 1;
    }
    let at = |k: usize| start_s + k as f64 / rate_hz;
    let mut n = span.ceil() as usize;
    while n > 1 && at(n - 1) >= end_s - EPS {
        n -= 1;
    }
    while at(n) < end_s - EPS {
        n += 1;
    }
    n.max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub segment_index: usize,
    pub rate_hz: f64,
    pub sample_times: Vec<f64>,
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    /// Number of adjacent frame pairs.
    pub fn pair_count(&self) -> usize {
        self.len().saturating_sub(1)
    }
}

pub fn plan_samples(segment: &Segment, rate_hz: f64) -> SamplePlan {
    let n = sample_count(segment.start_s, segment.end_s, rate_hz);
    SamplePlan {
        segment_index: segment.index,
        rate_hz,
        sample_times: (0..n)
            .map(|k| segment.start_s + k as f64 / rate_hz)
            .collect(),
    }
}

/// Inclusive index range `[start, end]` into a segment's sample times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..=self.end).contains(&index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window_size: usize,
    pub overlap: usize,
    pub windows: Vec<Window>,
}

/// Splits `samples` frames into windows of at most `window_size` frames,
/// consecutive windows repeating exactly `overlap` boundary frames.
pub fn plan_windows(
    samples: usize,
    window_size: usize,
    overlap: usize,
) -> Result<WindowPlan, CaptionError> {
    if window_size < 2 || overlap < 1 || overlap >= window_size {
        return Err(CaptionError::Config(format!(
            "window size {window_size} / overlap {overlap}: need W >= 2 and 1 <= O < W"
        )));
    }
    let mut windows = Vec::new();
    if samples >= 2 {
        let mut start = 0;
        loop {
            let end = (start + window_size - 1).min(samples - 1);
            windows.push(Window { start, end });
            if end == samples - 1 {
                break;
            }
            start = end + 1 - overlap;
        }
    }
    Ok(WindowPlan {
        window_size,
        overlap,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::BoundaryKind;
    use proptest::prelude::*;

    fn seg(start: f64, end: f64) -> Segment {
        Segment {
            index: 0,
            start_s: start,
            end_s: end,
            boundary_kind: BoundaryKind::VideoStart,
        }
    }

    #[test]
    fn five_second_segment_samples_each_second() {
        assert_eq!(plan_samples(&seg(0.0, 5.0), 1.0).sample_times, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn webpage_scene_has_eighteen_samples() {
        let plan = plan_samples(&seg(3.0, 21.0), 1.0);
        assert_eq!(plan.len(), 18);
        assert_eq!(plan.sample_times[0], 3.0);
        assert_eq!(*plan.sample_times.last().unwrap(), 20.0);
    }

    #[test]
    fn sub_period_segment_keeps_anchor() {
        assert_eq!(plan_samples(&seg(0.0, 0.5), 1.0).sample_times, vec![0.0]);
    }

    #[test]
    fn window_examples() {
        assert_eq!(plan_windows(5, 8, 1).unwrap().windows, vec![Window { start: 0, end: 4 }]);
        assert_eq!(
            plan_windows(10, 8, 1).unwrap().windows,
            vec![Window { start: 0, end: 7 }, Window { start: 7, end: 9 }]
        );
        assert!(plan_windows(1, 8, 1).unwrap().windows.is_empty());
        assert!(plan_windows(0, 8, 1).unwrap().windows.is_empty());
    }

    #[test]
    fn invalid_window_config() {
        assert!(plan_windows(10, 1, 1).is_err());
        assert!(plan_windows(10, 4, 0).is_err());
        assert!(plan_windows(10, 4, 4).is_err());
    }

    proptest! {
        #[test]
        fn windows_cover_all_pairs_with_exact_overlap(n in 0usize..200, w in 2usize..12, o_seed in 0usize..100) {
            let o = 1 + o_seed % (w - 1);
            let plan = plan_windows(n, w, o).unwrap();
            if n < 2 {
                prop_assert!(plan.windows.is_empty());
            } else {
                prop_assert_eq!(plan.windows[0].start, 0);
                prop_assert_eq!(plan.windows.last().unwrap().end, n - 1);
                for win in &plan.windows {
                    prop_assert!(win.len() >= 2 && win.len() <= w);
                }
                for pair in plan.windows.windows(2) {
                    prop_assert_eq!(pair[0].end + 1 - pair[1].start, o);
                }
                for i in 0..n - 1 {
                    prop_assert!(plan.windows.iter().any(|win| win.contains(i) && win.contains(i + 1)));
                }
            }
        }

        #[test]
        fn samples_stay_inside_segment(start in 0u32..10_000, len in 1u32..200_000, rate_idx in 0usize..4) {
            let rate = [0.5, 1.0, 2.0, 4.0][rate_idx];
            let (s, e) = (start as f64 / 1000.0, (start + len) as f64 / 1000.0);
            let plan = plan_samples(&seg(s, e), rate);
            prop_assert!(!plan.is_empty());
            prop_assert_eq!(plan.sample_times[0], s);
            for t in &plan.sample_times[1..] {
                prop_assert!(*t < e);
            }
            let next = s + plan.len() as f64 / rate;
            prop_assert!(next >= e - 1e-9);
        }
    }
}
