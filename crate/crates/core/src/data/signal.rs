use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physiological channels a recording may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "BVP")]
    Bvp,
    #[serde(rename = "EDA")]
    Eda,
    #[serde(rename = "HR")]
    Hr,
    #[serde(rename = "TEMP")]
    Temp,
    #[serde(rename = "ACC_X")]
    AccX,
    #[serde(rename = "ACC_Y")]
    AccY,
    #[serde(rename = "ACC_Z")]
    AccZ,
    #[serde(rename = "ACC_MAG")]
    AccMag,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::Bvp,
        Channel::Eda,
        Channel::Hr,
        Channel::Temp,
        Channel::AccX,
        Channel::AccY,
        Channel::AccZ,
        Channel::AccMag,
    ];

    /// Model input order.
    pub const SAMPLE_ORDER: [Channel; 5] = [
        Channel::Bvp,
        Channel::Eda,
        Channel::Hr,
        Channel::AccMag,
        Channel::Temp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Bvp => "BVP",
            Channel::Eda => "EDA",
            Channel::Hr => "HR",
            Channel::Temp => "TEMP",
            Channel::AccX => "ACC_X",
            Channel::AccY => "ACC_Y",
            Channel::AccZ => "ACC_Z",
            Channel::AccMag => "ACC_MAG",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown channel {s:?}")))
    }
}

/// One uniformly sampled, contiguous stretch of a single channel. NaN marks
/// a missing sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSeries {
    pub patient_id: String,
    pub channel: Channel,
    pub start_time_ms: i64,
    pub sample_rate: f64,
    pub values: Vec<f64>,
}

impl ChannelSeries {
    pub fn time_ms(&self, i: usize) -> f64 {
        self.start_time_ms as f64 + i as f64 * 1000.0 / self.sample_rate
    }

    /// Timestamp just past the last sample.
    pub fn end_time_ms(&self) -> f64 {
        self.time_ms(self.values.len())
    }
}

/// Elementwise `√(x² + y² + z²)`.
pub fn acc_magnitude(x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() != z.len() {
        return Err(Error::Dimension(format!(
            "acc_magnitude: axis lengths {}, {}, {}",
            x.len(),
            y.len(),
            z.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
        .collect())
}

/// Type-7 quantile (linear interpolation between closest order statistics)
/// of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median / interquartile-range scaler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustScaler {
    pub median: f64,
    pub iqr: f64,
    /// Set when the IQR is zero; values are then only centered.
    pub degenerate: bool,
}

impl RobustScaler {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::Contract(format!(
                "robust scaling needs at least 4 values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(
                "robust scaling input contains non-finite values".into(),
            ));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = quantile_sorted(&sorted, 0.5);
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        Ok(RobustScaler {
            median,
            iqr,
            degenerate: iqr == 0.0,
        })
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.degenerate {
            v - self.median
        } else {
            (v - self.median) / self.iqr
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustScaled {
    pub values: Vec<f64>,
    pub scaler: RobustScaler,
}

/// `(x − median) / IQR` fitted on `values` itself.
pub fn robust_scale(values: &[f64]) -> Result<RobustScaled> {
    let scaler = RobustScaler::fit(values)?;
    if scaler.degenerate {
        log::warn!("robust_scale: zero interquartile range, centering only");
    }
    Ok(RobustScaled {
        values: values.iter().map(|&v| scaler.apply(v)).collect(),
        scaler,
    })
}

/// Grid period in whole milliseconds for a target rate.
pub fn grid_period_ms(rate: f64) -> Result<i64> {
    let period = 1000.0 / rate;
    if !(rate > 0.0) || !rate.is_finite() || period.fract() != 0.0 {
        return Err(Error::Config(format!(
            "sample rate {rate} Hz does not give a whole-millisecond period"
        )));
    }
    Ok(period as i64)
}

/// Resamples onto the absolute grid `k · 1000/target_rate` ms covering the
/// series. Upsampling interpolates linearly; downsampling takes the mean of
/// the source samples within half a target period of each grid point, with
/// samples exactly on the window edge counted at half weight.
/// Missing (NaN) samples propagate through interpolation and are skipped by
/// the block mean.
pub fn resample(series: &ChannelSeries, target_rate: f64) -> Result<ChannelSeries> {
    if series.values.len() < 2 {
        return Err(Error::Contract(format!(
            "cannot resample {} series with {} samples",
            series.channel,
            series.values.len()
        )));
    }
    let period = grid_period_ms(target_rate)? as f64;
    let src_period = 1000.0 / series.sample_rate;
    let first = series.start_time_ms as f64;
    let last = series.time_ms(series.values.len() - 1);
    let k0 = (first / period).ceil() as i64;
    let k1 = (last / period).floor() as i64;
    if k1 < k0 {
        return Err(Error::Contract(format!(
            "{} series is shorter than one target period",
            series.channel
        )));
    }
    let n = series.values.len();
    let pos = |t: f64| (t - first) / src_period;
    let values: Vec<f64> = (k0..=k1)
        .map(|k| {
            let t = k as f64 * period;
            if series.sample_rate > target_rate {
                let lo = pos(t - period / 2.0).ceil().max(0.0) as usize;
                let hi = pos(t + period / 2.0).floor();
                if hi < 0.0 {
                    return f64::NAN;
                }
                let hi = (hi as usize).min(n - 1);
                let (mut sum, mut weight) = (0.0, 0.0);
                for i in lo..=hi {
                    let v = series.values[i];
                    if v.is_nan() {
                        continue;
                    }
                    let edge = ((series.time_ms(i) - t).abs() - period / 2.0).abs() < 1e-9;
                    let w = if edge { 0.5 } else { 1.0 };
                    sum += w * v;
                    weight += w;
                }
                if weight == 0.0 {
                    f64::NAN
                } else {
                    sum / weight
                }
            } else {
                let x = pos(t);
                let i = (x.floor() as usize).min(n - 2);
                let frac = x - i as f64;
                let (a, b) = (series.values[i], series.values[i + 1]);
                if frac == 0.0 {
                    a
                } else {
                    a + frac * (b - a)
                }
            }
        })
        .collect();
    Ok(ChannelSeries {
        patient_id: series.patient_id.clone(),
        channel: series.channel,
        start_time_ms: k0 * period as i64,
        sample_rate: target_rate,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(rate: f64, values: Vec<f64>) -> ChannelSeries {
        ChannelSeries {
            patient_id: "p".into(),
            channel: Channel::Eda,
            start_time_ms: 0,
            sample_rate: rate,
            values,
        }
    }

    #[test]
    fn magnitude_of_345() {
        assert_eq!(acc_magnitude(&[3.0, 0.0], &[4.0, 0.0], &[0.0, 0.0]).unwrap(), vec![5.0, 0.0]);
        assert!(matches!(
            acc_magnitude(&[1.0], &[1.0, 2.0], &[1.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn robust_scale_worked_example() {
        let r = robust_scale(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(r.scaler.median, 3.0);
        assert_eq!(r.scaler.iqr, 2.0);
        assert_eq!(r.values, vec![-1.0, -0.5, 0.0, 0.5, 48.5]);
    }

    #[test]
    fn robust_scale_constant_is_degenerate() {
        let r = robust_scale(&[7.0; 4]).unwrap();
        assert!(r.scaler.degenerate);
        assert_eq!(r.values, vec![0.0; 4]);
        assert!(matches!(robust_scale(&[1.0, 2.0, 3.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn ramp_upsampled_is_exact() {
        let s = series(1.0, (0..10).map(f64::from).collect());
        let r = resample(&s, 2.0).unwrap();
        let want: Vec<f64> = (0..19).map(|i| i as f64 * 0.5).collect();
        assert_eq!(r.values, want);
        assert_eq!(r.start_time_ms, 0);
    }

    #[test]
    fn constant_stays_constant() {
        for rate in [1.0, 4.0, 8.0, 64.0] {
            let s = series(rate, vec![3.5; 200]);
            let r = resample(&s, 4.0).unwrap();
            assert!(r.values.iter().all(|&v| v == 3.5), "rate {rate}");
        }
    }

    #[test]
    fn downsample_is_block_mean() {
        let s = series(8.0, (0..16).map(f64::from).collect());
        let r = resample(&s, 4.0).unwrap();
        // Grid at 0, 250, ... ms; each point averages samples within ±125 ms.
        assert_eq!(r.values[0], 1.0 / 3.0);
        assert_eq!(r.values[1], 2.0);
        assert_eq!(r.values[2], 4.0);
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            resample(&series(4.0, vec![1.0]), 4.0),
            Err(Error::Contract(_))
        ));
        assert!(grid_period_ms(3.0).is_err());
        assert_eq!(grid_period_ms(4.0).unwrap(), 250);
    }
}
