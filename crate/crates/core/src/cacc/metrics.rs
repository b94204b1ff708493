//! Fluctuation metrics over trajectory logs.

use std::ops::Range;

use super::TrajectoryLog;

/// Sum of absolute tick-to-tick changes.
pub fn total_variation(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Maximal runs of ticks, longer than `min_len`, in which every log marks
/// a miss. Logs are compared tick by tick up to the shortest.
pub fn miss_windows(logs: &[&TrajectoryLog], min_len: usize) -> Vec<Range<usize>> {
    let n = logs.iter().map(|l| l.rows.len()).min().unwrap_or(0);
    let mut out = Vec::new();
    let mut start = None;
    for k in 0..=n {
        let miss = k < n && logs.iter().all(|l| l.rows[k].status == "miss");
        match (miss, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if k - s > min_len {
                    out.push(s..k);
                }
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Mean acceleration over `window`.
pub fn window_mean(log: &TrajectoryLog, window: Range<usize>) -> f64 {
    let n = window.len();
    if n == 0 {
        return 0.0;
    }
    log.rows[window].iter().map(|r| r.a).sum::<f64>() / n as f64
}
