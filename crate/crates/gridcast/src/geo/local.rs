//! Per-cluster local forecasting.
//!
//! Each cluster center gets a small autoregressive model fit on the
//! cluster's centered (member-mean) time series; predictions are then made
//! at every grid point by applying its cluster's model to that point's own
//! recent history.

use ndarray::{Array1, Array2};
use ndarray_linalg::LeastSquaresSvd;
use serde::{Deserialize, Serialize};

use super::{ClusterPlan, GeoError};
use crate::ingest::FieldSeries;
use crate::tensor::DenseTensor;

/// Mean time series per cluster: entry `(c, t)` averages all grid points
/// assigned to centroid `c` at time step `t`.
pub fn centered_series(
    series: &FieldSeries,
    plan: &ClusterPlan,
) -> Result<Array2<f64>, GeoError> {
    let (m, n) = (series.grid.n_lat(), series.grid.n_lon());
    if plan.assignment.dim() != (m, n) {
        return Err(GeoError::PlanMismatch {
            expected: plan.assignment.dim(),
            actual: (m, n),
        });
    }
    let t_len = series.dates.len();
    let mut sums = Array2::zeros((plan.k, t_len));
    let mut counts = vec![0usize; plan.k];
    for i in 0..m {
        for j in 0..n {
            let c = plan.assignment[[i, j]];
            counts[c] += 1;
            for t in 0..t_len {
                sums[[c, t]] += series.values.get(&[i, j, t]);
            }
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(GeoError::EmptyCluster(c));
        }
        let scale = 1.0 / count as f64;
        sums.row_mut(c).mapv_inplace(|v| v * scale);
    }
    Ok(sums)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ArStrategy {
    /// One model; multi-step forecasts feed predictions back as inputs.
    #[default]
    Recursive,
    /// One model per horizon step, each predicting directly from observed lags.
    Direct,
}

/// Autoregressive model of order `p` with intercept.
///
/// Falls back to persistence (last value carried forward) when the training
/// window cannot support the regression; `is_persistence` reports that.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalArModel {
    /// Coefficient vectors `[intercept, a₁ … a_p]`, where `aᵢ` multiplies the
    /// i-th most recent value: one vector (recursive) or `h` (direct).
    coefficients: Vec<Vec<f64>>,
    pub lookback: usize,
    pub horizon: usize,
    pub strategy: ArStrategy,
    pub is_persistence: bool,
}

/// Ordinary least squares on lagged values.
///
/// A window with fewer equations than unknowns, or a degenerate design
/// matrix, triggers the documented persistence fallback rather than an error.
pub fn fit_local_ar(
    series: &[f64],
    lookback: usize,
    horizon: usize,
    strategy: ArStrategy,
) -> Result<LocalArModel, GeoError> {
    if lookback == 0 {
        return Err(GeoError::ZeroLookback);
    }
    if series.len() <= lookback {
        return Err(GeoError::InsufficientHistory {
            len: series.len(),
            lookback,
        });
    }
    let persistence = |reason_rows: usize| LocalArModel {
        coefficients: vec![],
        lookback,
        horizon,
        strategy,
        is_persistence: reason_rows < usize::MAX,
    };

    let fit_one = |lead: usize| -> Option<Vec<f64>> {
        // Predict x_{t+lead} from x_{t-1} … x_{t-p}.
        let rows = series.len().checked_sub(lookback + lead)?;
        if rows < lookback + 1 {
            return None;
        }
        let mut design = Array2::zeros((rows, lookback + 1));
        let mut target = Array1::zeros(rows);
        for r in 0..rows {
            let t = lookback + r;
            design[[r, 0]] = 1.0;
            for lag in 1..=lookback {
                design[[r, lag]] = series[t - lag];
            }
            target[r] = series[t + lead];
        }
        let solution = design.least_squares(&target).ok()?.solution;
        if solution.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(solution.to_vec())
    };

    let leads: Vec<usize> = match strategy {
        ArStrategy::Recursive => vec![0],
        ArStrategy::Direct => (0..horizon.max(1)).collect(),
    };
    let mut coefficients = Vec::with_capacity(leads.len());
    for lead in leads {
        match fit_one(lead) {
            Some(c) => coefficients.push(c),
            None => return Ok(persistence(0)),
        }
    }
    Ok(LocalArModel {
        coefficients,
        lookback,
        horizon,
        strategy,
        is_persistence: false,
    })
}

impl LocalArModel {
    /// Forecasts `horizon` steps from the end of `history` (most recent last).
    pub fn forecast(&self, history: &[f64]) -> Result<Vec<f64>, GeoError> {
        if history.len() < self.lookback {
            return Err(GeoError::InsufficientHistory {
                len: history.len(),
                lookback: self.lookback,
            });
        }
        if self.is_persistence {
            let last = *history.last().expect("lookback >= 1");
            return Ok(vec![last; self.horizon]);
        }
        let mut out = Vec::with_capacity(self.horizon);
        match self.strategy {
            ArStrategy::Recursive => {
                let mut window: Vec<f64> =
                    history[history.len() - self.lookback..].to_vec();
                let coef = &self.coefficients[0];
                for _ in 0..self.horizon {
                    let mut value = coef[0];
                    for lag in 1..=self.lookback {
                        value += coef[lag] * window[window.len() - lag];
                    }
                    out.push(value);
                    window.push(value);
                }
            }
            ArStrategy::Direct => {
                for coef in &self.coefficients {
                    let mut value = coef[0];
                    for lag in 1..=self.lookback {
                        value += coef[lag] * history[history.len() - lag];
                    }
                    out.push(value);
                }
                out.truncate(self.horizon);
            }
        }
        Ok(out)
    }
}

/// Forecasts every grid point with its cluster's model applied to that
/// point's own history; the result continues the input calendar.
pub fn local_forecast(
    series: &FieldSeries,
    plan: &ClusterPlan,
    models: &[LocalArModel],
    horizon: usize,
) -> Result<FieldSeries, GeoError> {
    if plan.assignment.dim() != (series.grid.n_lat(), series.grid.n_lon()) {
        return Err(GeoError::PlanMismatch {
            expected: plan.assignment.dim(),
            actual: (series.grid.n_lat(), series.grid.n_lon()),
        });
    }
    local_forecast_assigned(series, &plan.assignment, models, horizon)
}

/// As [`local_forecast`] with an explicit assignment array (also used by the
/// latitude-weighted sampling path).
pub fn local_forecast_assigned(
    series: &FieldSeries,
    assignment: &Array2<usize>,
    models: &[LocalArModel],
    horizon: usize,
) -> Result<FieldSeries, GeoError> {
    let (m, n) = (series.grid.n_lat(), series.grid.n_lon());
    let t_len = series.dates.len();
    let mut values = DenseTensor::zeros(vec![m, n, horizon])
        .map_err(|e| GeoError::InvalidGrid(e.to_string()))?;
    for i in 0..m {
        for j in 0..n {
            let model = &models[assignment[[i, j]]];
            let history: Vec<f64> = (0..t_len).map(|t| series.values.get(&[i, j, t])).collect();
            let mut forecast = model.forecast(&history)?;
            forecast.truncate(horizon);
            for (t, v) in forecast.into_iter().enumerate() {
                values.set(&[i, j, t], v);
            }
        }
    }
    let dates = FieldSeries::continuation_dates(series, horizon);
    FieldSeries::new(
        series.grid.clone(),
        dates,
        values,
        series.variable.clone(),
    )
    .map_err(|e| GeoError::InvalidGrid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{cluster_haversine_kmeans, GeoGrid};
    use crate::ingest::FieldSeries;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_series(values: DenseTensor) -> FieldSeries {
        let m = values.shape()[0];
        let n = values.shape()[1];
        let t = values.shape()[2];
        let lats: Vec<f64> = (0..m).map(|i| i as f64).collect();
        let lons: Vec<f64> = (0..n).map(|j| j as f64).collect();
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..t)
            .map(|d| start + chrono::Days::new(d as u64))
            .collect();
        FieldSeries::new(GeoGrid::new(lats, lons).unwrap(), dates, values, "t".into()).unwrap()
    }

    #[test]
    fn centered_series_single_cluster_is_global_mean() {
        let mut values = DenseTensor::zeros(vec![2, 2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        values.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-4.0..4.0));
        let series = toy_series(values);
        let plan = cluster_haversine_kmeans(&series.grid, 1, 0, 10).unwrap();
        let centered = centered_series(&series, &plan).unwrap();
        for t in 0..3 {
            let mut mean = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    mean += series.values.get(&[i, j, t]);
                }
            }
            mean /= 4.0;
            assert!((centered[[0, t]] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn centered_series_matches_loop_oracle() {
        let mut values = DenseTensor::zeros(vec![4, 4, 10]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        values.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let series = toy_series(values);
        let plan = cluster_haversine_kmeans(&series.grid, 2, 1, 50).unwrap();
        let centered = centered_series(&series, &plan).unwrap();
        for c in 0..2 {
            for t in 0..10 {
                let mut sum = 0.0;
                let mut count = 0usize;
                for i in 0..4 {
                    for j in 0..4 {
                        if plan.assignment[[i, j]] == c {
                            sum += series.values.get(&[i, j, t]);
                            count += 1;
                        }
                    }
                }
                assert!((centered[[c, t]] - sum / count as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_member_series_average_to_themselves() {
        let mut values = DenseTensor::zeros(vec![2, 1, 4]).unwrap();
        for t in 0..4 {
            values.set(&[0, 0, t], t as f64);
            values.set(&[1, 0, t], t as f64);
        }
        let series = toy_series(values);
        let plan = cluster_haversine_kmeans(&series.grid, 1, 0, 10).unwrap();
        let centered = centered_series(&series, &plan).unwrap();
        for t in 0..4 {
            assert_eq!(centered[[0, t]], t as f64);
        }
    }

    #[test]
    fn constant_series_fit_forecasts_constant() {
        let data = vec![3.25; 20];
        let model = fit_local_ar(&data, 2, 4, ArStrategy::Recursive).unwrap();
        let forecast = model.forecast(&data).unwrap();
        for v in forecast {
            assert!((v - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn scalar_decay_coefficient_recovered() {
        let mut data = vec![1.0];
        for t in 1..40 {
            data.push(0.9 * data[t - 1]);
        }
        let model = fit_local_ar(&data, 1, 3, ArStrategy::Recursive).unwrap();
        assert!(!model.is_persistence);
        assert!((model.coefficients[0][1] - 0.9).abs() < 1e-10);
        assert!(model.coefficients[0][0].abs() < 1e-10);
    }

    #[test]
    fn tiny_window_falls_back_to_persistence() {
        // Four points with lookback 3: one usable regression row.
        let data = vec![1.0, 2.0, 3.0, 4.0];
        let model = fit_local_ar(&data, 3, 5, ArStrategy::Recursive).unwrap();
        assert!(model.is_persistence);
        let forecast = model.forecast(&data).unwrap();
        assert_eq!(forecast, vec![4.0; 5]);
    }

    #[test]
    fn insufficient_history_is_an_error() {
        assert!(matches!(
            fit_local_ar(&[1.0, 2.0], 2, 3, ArStrategy::Recursive),
            Err(GeoError::InsufficientHistory { .. })
        ));
        assert!(matches!(
            fit_local_ar(&[1.0, 2.0, 3.0], 0, 3, ArStrategy::Recursive),
            Err(GeoError::ZeroLookback)
        ));
    }

    #[test]
    fn direct_strategy_predicts_decay_closed_form() {
        let mut data = vec![2.0];
        for t in 1..60 {
            data.push(0.8 * data[t - 1]);
        }
        let model = fit_local_ar(&data, 1, 3, ArStrategy::Direct).unwrap();
        let forecast = model.forecast(&data).unwrap();
        let last = *data.last().unwrap();
        for (step, v) in forecast.iter().enumerate() {
            let expected = last * 0.8f64.powi(step as i32 + 1);
            assert!((v - expected).abs() < 1e-9, "step {step}: {v} vs {expected}");
        }
    }

    #[test]
    fn local_forecast_covers_grid_and_continues_calendar() {
        let mut values = DenseTensor::zeros(vec![3, 2, 15]).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                for t in 0..15 {
                    let base = (i * 2 + j) as f64;
                    values.set(&[i, j, t], base + 0.95f64.powi(t as i32));
                }
            }
        }
        let series = toy_series(values);
        let plan = cluster_haversine_kmeans(&series.grid, 2, 3, 50).unwrap();
        let centered = centered_series(&series, &plan).unwrap();
        let models: Vec<LocalArModel> = (0..plan.k)
            .map(|c| {
                fit_local_ar(centered.row(c).as_slice().unwrap(), 3, 4, ArStrategy::Recursive)
                    .unwrap()
            })
            .collect();
        let forecast = local_forecast(&series, &plan, &models, 4).unwrap();
        assert_eq!(forecast.values.shape(), &[3, 2, 4]);
        assert!(forecast.values.is_finite());
        assert_eq!(
            forecast.dates[0],
            *series.dates.last().unwrap() + chrono::Days::new(1)
        );
        assert_eq!(forecast.dates.len(), 4);
    }
}
