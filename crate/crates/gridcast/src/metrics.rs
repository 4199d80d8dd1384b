//! Forecast evaluation metrics.
//!
//! Aggregate errors over paired observations:
//!
//! `RMSE = √(Σ(obs−pred)²/n)`, `MAE = Σ|obs−pred|/n`,
//! `SMAPE = (100/n)·Σ |pred−obs| / ((|obs|+|pred|)/2)` — a 0/0 term counts
//! as 0, so SMAPE stays within [0, 200].
//!
//! Frame-wise image-quality metrics compare forecast tensors slice by slice:
//! MSE, NRMSE (RMSE over the slice's target dynamic range by default), PSNR
//! against the global target range, and SSIM with a uniform window (default
//! 7×7, sample covariance, stabilizers `C₁=(0.01·L)²`, `C₂=(0.03·L)²` on the
//! global target range L).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::DenseTensor;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: obs {obs} vs pred {pred}")]
    LengthMismatch { obs: usize, pred: usize },
    #[error("need at least one observation")]
    Empty,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("need (M, N, K) forecast tensors, got {0:?}")]
    BadShape(Vec<usize>),
    #[error("field {0}×{1} too small for SSIM (minimum 3×3)")]
    TooSmallForSsim(usize, usize),
}

pub fn rmse(obs: &[f64], pred: &[f64]) -> Result<f64, MetricsError> {
    check_pair(obs, pred)?;
    let sum_sq: f64 = obs
        .iter()
        .zip(pred)
        .map(|(o, p)| (o - p) * (o - p))
        .sum();
    Ok((sum_sq / obs.len() as f64).sqrt())
}

pub fn mae(obs: &[f64], pred: &[f64]) -> Result<f64, MetricsError> {
    check_pair(obs, pred)?;
    let sum_abs: f64 = obs.iter().zip(pred).map(|(o, p)| (o - p).abs()).sum();
    Ok(sum_abs / obs.len() as f64)
}

/// Symmetric mean absolute percentage error, in percent.
pub fn smape(obs: &[f64], pred: &[f64]) -> Result<f64, MetricsError> {
    check_pair(obs, pred)?;
    let sum: f64 = obs
        .iter()
        .zip(pred)
        .map(|(o, p)| {
            let denom = (o.abs() + p.abs()) / 2.0;
            if denom == 0.0 {
                0.0
            } else {
                (p - o).abs() / denom
            }
        })
        .sum();
    Ok(100.0 * sum / obs.len() as f64)
}

fn check_pair(obs: &[f64], pred: &[f64]) -> Result<(), MetricsError> {
    if obs.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            obs: obs.len(),
            pred: pred.len(),
        });
    }
    if obs.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Normalizer for NRMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NrmseNormalization {
    /// Per-slice target max − min.
    #[default]
    Range,
    /// Per-slice target mean (absolute value).
    Mean,
    /// Per-slice target standard deviation.
    Std,
}

#[derive(Debug, Clone)]
pub struct FramewiseOptions {
    pub nrmse: NrmseNormalization,
    /// Odd SSIM window edge; clamped down to the field if needed.
    pub ssim_window: usize,
}

impl Default for FramewiseOptions {
    fn default() -> Self {
        Self {
            nrmse: NrmseNormalization::Range,
            ssim_window: 7,
        }
    }
}

/// Per-step metric arrays for a `(M, N, K)` forecast against its target.
/// `None` entries mark undefined values: NRMSE on a flat slice, PSNR on an
/// exact match (serialized as JSON null).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramewiseReport {
    pub mse: Vec<f64>,
    pub nrmse: Vec<Option<f64>>,
    pub psnr: Vec<Option<f64>>,
    pub ssim: Vec<f64>,
}

pub fn framewise(
    pred: &DenseTensor,
    target: &DenseTensor,
    opts: &FramewiseOptions,
) -> Result<FramewiseReport, MetricsError> {
    if pred.shape() != target.shape() {
        return Err(MetricsError::ShapeMismatch(
            pred.shape().to_vec(),
            target.shape().to_vec(),
        ));
    }
    if pred.order() != 3 {
        return Err(MetricsError::BadShape(pred.shape().to_vec()));
    }
    let steps = pred.shape()[2];
    let global_range = {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in target.data() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    };

    let mut report = FramewiseReport {
        mse: Vec::with_capacity(steps),
        nrmse: Vec::with_capacity(steps),
        psnr: Vec::with_capacity(steps),
        ssim: Vec::with_capacity(steps),
    };
    for t in 0..steps {
        let p = pred.last_mode_slice(t);
        let y = target.last_mode_slice(t);
        let n = p.len() as f64;
        let mse: f64 = p
            .data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        report.mse.push(mse);

        let normalizer = match opts.nrmse {
            NrmseNormalization::Range => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &v in y.data() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                hi - lo
            }
            NrmseNormalization::Mean => {
                (y.data().iter().sum::<f64>() / n).abs()
            }
            NrmseNormalization::Std => {
                let mean = y.data().iter().sum::<f64>() / n;
                (y.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
            }
        };
        report.nrmse.push(if normalizer > 0.0 {
            Some(mse.sqrt() / normalizer)
        } else {
            None
        });

        report.psnr.push(if mse > 0.0 && global_range > 0.0 {
            Some(10.0 * (global_range * global_range / mse).log10())
        } else {
            None
        });

        report
            .ssim
            .push(ssim_uniform(&p, &y, global_range, opts.ssim_window)?);
    }
    Ok(report)
}

/// Mean SSIM over all fully-interior windows (uniform filter, sample
/// covariance).
pub fn ssim_uniform(
    a: &DenseTensor,
    b: &DenseTensor,
    data_range: f64,
    window: usize,
) -> Result<f64, MetricsError> {
    let (m, n) = (a.shape()[0], a.shape()[1]);
    if m < 3 || n < 3 {
        return Err(MetricsError::TooSmallForSsim(m, n));
    }
    let mut w = window.min(m).min(n);
    if w % 2 == 0 {
        w -= 1;
    }
    let w = w.max(3);
    let count = (w * w) as f64;
    // Sample (unbiased) covariance normalization.
    let cov_norm = count / (count - 1.0);
    let c1 = (0.01 * data_range).powi(2);
    let c2 = (0.03 * data_range).powi(2);

    let mut total = 0.0;
    let mut windows = 0usize;
    for i0 in 0..=(m - w) {
        for j0 in 0..=(n - w) {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in i0..i0 + w {
                for j in j0..j0 + w {
                    let (x, y) = (a.get(&[i, j]), b.get(&[i, j]));
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let (ua, ub) = (sa / count, sb / count);
            let vaa = cov_norm * (saa / count - ua * ua);
            let vbb = cov_norm * (sbb / count - ub * ub);
            let vab = cov_norm * (sab / count - ua * ub);
            let numerator = (2.0 * ua * ub + c1) * (2.0 * vab + c2);
            let denominator = (ua * ua + ub * ub + c1) * (vaa + vbb + c2);
            total += numerator / denominator;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// Table-style aggregation: metrics computed per grid-point series, then
/// averaged over locations.
pub fn per_location_mean(
    obs: &DenseTensor,
    pred: &DenseTensor,
) -> Result<(f64, f64, f64), MetricsError> {
    if obs.shape() != pred.shape() {
        return Err(MetricsError::ShapeMismatch(
            obs.shape().to_vec(),
            pred.shape().to_vec(),
        ));
    }
    if obs.order() != 3 {
        return Err(MetricsError::BadShape(obs.shape().to_vec()));
    }
    let (m, n, t) = (obs.shape()[0], obs.shape()[1], obs.shape()[2]);
    let (mut rmse_sum, mut mae_sum, mut smape_sum) = (0.0, 0.0, 0.0);
    for i in 0..m {
        for j in 0..n {
            let o: Vec<f64> = (0..t).map(|k| obs.get(&[i, j, k])).collect();
            let p: Vec<f64> = (0..t).map(|k| pred.get(&[i, j, k])).collect();
            rmse_sum += rmse(&o, &p)?;
            mae_sum += mae(&o, &p)?;
            smape_sum += smape(&o, &p)?;
        }
    }
    let locations = (m * n) as f64;
    Ok((
        rmse_sum / locations,
        mae_sum / locations,
        smape_sum / locations,
    ))
}

/// Aggregate report with optional frame-wise arrays; serializes with fixed
/// field names, infinities appearing as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    /// Percent, within [0, 200].
    pub smape: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub framewise: Option<FramewiseReport>,
}

impl MetricsReport {
    /// Flat aggregate over all paired elements of two equal-shape tensors,
    /// with frame-wise arrays when the tensors are (M, N, K) stacks.
    pub fn evaluate(
        pred: &DenseTensor,
        target: &DenseTensor,
        opts: &FramewiseOptions,
    ) -> Result<Self, MetricsError> {
        if pred.shape() != target.shape() {
            return Err(MetricsError::ShapeMismatch(
                pred.shape().to_vec(),
                target.shape().to_vec(),
            ));
        }
        let frames = if pred.order() == 3 {
            Some(framewise(pred, target, opts)?)
        } else {
            None
        };
        Ok(Self {
            rmse: rmse(target.data(), pred.data())?,
            mae: mae(target.data(), pred.data())?,
            smape: smape(target.data(), pred.data())?,
            framewise: frames,
        })
    }
}
