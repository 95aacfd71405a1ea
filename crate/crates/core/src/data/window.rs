use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ingest::{AlignedRecording, SeizureAnnotation};
use super::sample::{Sample, NUM_CHANNELS};
use super::signal::grid_period_ms;
use crate::error::{Error, Result};

const MS_PER_MIN: f64 = 60_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowParams {
    pub common_rate_hz: f64,
    pub window_seconds: f64,
    pub stride_seconds: f64,
    pub preictal_horizon_minutes: f64,
    pub interictal_exclusion_minutes: f64,
    /// Span after onset treated as ictal.
    pub ictal_minutes: f64,
    pub postictal_buffer_minutes: f64,
    /// Windows with a larger fraction of missing samples in any channel are dropped.
    pub max_gap_fraction: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams {
            common_rate_hz: 4.0,
            window_seconds: 30.0,
            stride_seconds: 30.0,
            preictal_horizon_minutes: 60.0,
            interictal_exclusion_minutes: 240.0,
            ictal_minutes: 2.0,
            postictal_buffer_minutes: 60.0,
            max_gap_fraction: 0.1,
        }
    }
}

/// Window geometry in grid units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowGeometry {
    pub period_ms: i64,
    pub rows: usize,
    pub stride: usize,
}

fn whole_periods(seconds: f64, period_ms: i64, what: &str) -> Result<usize> {
    let ms = seconds * 1000.0;
    if !(ms > 0.0) || ms.fract() != 0.0 || (ms as i64) % period_ms != 0 {
        return Err(Error::Config(format!(
            "window: {what} of {seconds} s is not a whole number of {period_ms} ms grid steps"
        )));
    }
    Ok((ms as i64 / period_ms) as usize)
}

impl WindowParams {
    pub fn validate(&self) -> Result<WindowGeometry> {
        let period_ms = grid_period_ms(self.common_rate_hz)?;
        let rows = whole_periods(self.window_seconds, period_ms, "window_seconds")?;
        let stride = whole_periods(self.stride_seconds, period_ms, "stride_seconds")?;
        let checks = [
            (
                self.preictal_horizon_minutes > 0.0 && self.preictal_horizon_minutes <= 120.0,
                "preictal_horizon_minutes must be in (0, 120]",
            ),
            (
                self.interictal_exclusion_minutes >= 0.0,
                "interictal_exclusion_minutes must be >= 0",
            ),
            (self.ictal_minutes >= 0.0, "ictal_minutes must be >= 0"),
            (
                self.postictal_buffer_minutes >= 0.0,
                "postictal_buffer_minutes must be >= 0",
            ),
            (
                (0.0..1.0).contains(&self.max_gap_fraction),
                "max_gap_fraction must be in [0, 1)",
            ),
        ];
        if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(Error::Config(format!("window: {msg}")));
        }
        Ok(WindowGeometry {
            period_ms,
            rows,
            stride,
        })
    }

    /// `[rows, channels]` of every emitted window.
    pub fn window_shape(&self) -> Result<[usize; 2]> {
        Ok([self.validate()?.rows, NUM_CHANNELS])
    }
}

fn minutes_ms(m: f64) -> i64 {
    (m * MS_PER_MIN).round() as i64
}

fn overlaps(a0: i64, a1: i64, b0: i64, b1: i64) -> bool {
    a0 < b1 && b0 < a1
}

/// Linear interpolation over NaN runs; edge runs copy the nearest value.
fn fill_gaps(x: &mut [f64]) {
    let known: Vec<usize> = (0..x.len()).filter(|&i| !x[i].is_nan()).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return;
    };
    for i in 0..first {
        x[i] = x[first];
    }
    for i in last + 1..x.len() {
        x[i] = x[last];
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for i in a + 1..b {
            let f = (i - a) as f64 / (b - a) as f64;
            x[i] = x[a] + f * (x[b] - x[a]);
        }
    }
}

/// Label of a window spanning `[t0, t1)` ms: 1 if it lies inside some
/// seizure's pre-ictal horizon, 0 if it is beyond the interictal exclusion
/// distance of every onset, `None` if it touches an ictal span or post-ictal
/// buffer or qualifies as neither (or both).
pub fn classify_span(
    t0: i64,
    t1: i64,
    annotations: &[SeizureAnnotation],
    params: &WindowParams,
) -> Option<u8> {
    let after = minutes_ms(params.ictal_minutes + params.postictal_buffer_minutes);
    if annotations
        .iter()
        .any(|a| overlaps(t0, t1, a.onset_time_ms, a.onset_time_ms + after))
    {
        return None;
    }
    let preictal = annotations.iter().any(|a| {
        let h = minutes_ms(a.horizon_minutes.unwrap_or(params.preictal_horizon_minutes));
        t0 >= a.onset_time_ms - h && t1 <= a.onset_time_ms
    });
    let x = minutes_ms(params.interictal_exclusion_minutes);
    let interictal = annotations
        .iter()
        .all(|a| t1 <= a.onset_time_ms - x || t0 >= a.onset_time_ms + x);
    match (preictal, interictal) {
        (true, false) => Some(1),
        (false, true) => Some(0),
        _ => None,
    }
}

/// Cuts labeled windows from an aligned recording.
///
/// Pre-ictal windows are anchored backward from each onset; interictal
/// windows are anchored forward from the start of each stretch lying beyond
/// the exclusion distance of every onset. Each candidate is then labeled by
/// [`classify_span`]. Windows crossing a segment boundary or missing more
/// than `max_gap_fraction` of any channel are dropped; remaining gaps are
/// interpolated.
pub fn label_windows(rec: &AlignedRecording, params: &WindowParams) -> Result<Vec<Sample>> {
    let geo = params.validate()?;
    if geo.period_ms != rec.period_ms {
        return Err(Error::Contract(format!(
            "recording grid is {} ms but windowing expects {} ms",
            rec.period_ms, geo.period_ms
        )));
    }
    let (p, t_rows, stride) = (geo.period_ms, geo.rows, geo.stride);
    let span_ms = t_rows as i64 * p;
    let len = rec.len();
    let start = rec.start_time_ms;
    let end = rec.time_ms(len);
    // Grid index of the first point at or after `t`.
    let ceil_idx = |t: i64| (t - start).div_euclid(p) + i64::from((t - start).rem_euclid(p) != 0);

    let mut candidates: BTreeSet<usize> = BTreeSet::new();
    for a in &rec.annotations {
        let horizon = minutes_ms(a.horizon_minutes.unwrap_or(params.preictal_horizon_minutes));
        let k_max = (a.onset_time_ms - start).div_euclid(p) - t_rows as i64;
        let k_min = ceil_idx(a.onset_time_ms - horizon).max(0);
        let mut k = k_max;
        while k >= k_min {
            candidates.insert(k as usize);
            k -= stride as i64;
        }
    }
    let exclusion = minutes_ms(params.interictal_exclusion_minutes);
    let mut excluded: Vec<(i64, i64)> = rec
        .annotations
        .iter()
        .map(|a| (a.onset_time_ms - exclusion, a.onset_time_ms + exclusion))
        .collect();
    excluded.sort_unstable();
    let mut zones = Vec::new();
    let mut cursor = start;
    for (a, b) in excluded {
        if a > cursor {
            zones.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    if cursor < end {
        zones.push((cursor, end));
    }
    for (a, b) in zones {
        let mut k = ceil_idx(a).max(0);
        while start + k * p + span_ms <= b {
            candidates.insert(k as usize);
            k += stride as i64;
        }
    }

    let mut samples = Vec::new();
    let max_missing = (params.max_gap_fraction * t_rows as f64).floor() as usize;
    'windows: for k in candidates {
        if k + t_rows > len {
            continue;
        }
        let t0 = rec.time_ms(k);
        let Some(label) = classify_span(t0, t0 + span_ms, &rec.annotations, params) else {
            continue;
        };
        let segment = rec.segment_of(k);
        if rec.segment_of(k + t_rows - 1) != segment {
            continue;
        }
        let mut columns = Vec::with_capacity(NUM_CHANNELS);
        for ch in &rec.channels {
            let mut col = ch[k..k + t_rows].to_vec();
            if col.iter().filter(|v| v.is_nan()).count() > max_missing {
                continue 'windows;
            }
            fill_gaps(&mut col);
            columns.push(col);
        }
        let mut window = Vec::with_capacity(t_rows * NUM_CHANNELS);
        for r in 0..t_rows {
            window.extend(columns.iter().map(|c| c[r]));
        }
        samples.push(Sample {
            window,
            label,
            patient_id: rec.patient_id.clone(),
            window_start_ms: t0,
            source_segment_id: segment as u32,
        });
    }
    if samples.is_empty() {
        return Err(Error::DegenerateData(format!(
            "patient {}: no admissible windows",
            rec.patient_id
        )));
    }
    Ok(samples)
}
