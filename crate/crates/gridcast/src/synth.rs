//! Deterministic synthetic field generators for tests, benchmarks and CLI
//! smoke runs.

use chrono::{Days, NaiveDate};
use ndarray::{Array1, Array2};
use ndarray_linalg::Eig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geo::GeoGrid;
use crate::ingest::FieldSeries;
use crate::tensor::DenseTensor;

fn synthetic_grid(m: usize, n: usize) -> GeoGrid {
    let lats: Vec<f64> = (0..m).map(|i| 30.0 + 0.5 * i as f64).collect();
    let lons: Vec<f64> = (0..n).map(|j| 4.0 + 0.5 * j as f64).collect();
    GeoGrid::new(lats, lons).expect("synthetic axes are valid")
}

fn synthetic_dates(t_len: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2015, 10, 30).expect("valid date");
    (0..t_len as u64).map(|d| start + Days::new(d)).collect()
}

/// Field series driven by an exactly linear evolution: a seeded random
/// stable operator acts on the vectorized field each day. Spectral models
/// recover it to machine precision, which makes it the smoke fixture for
/// fit→forecast pipelines.
pub fn linear_fixture(m: usize, n: usize, t_len: usize, seed: u64) -> FieldSeries {
    assert!(t_len >= 2, "need at least two time steps");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = m * n;
    let mut op: Array2<f64> = Array2::from_shape_fn((dim, dim), |_| rng.gen_range(-1.0..1.0));
    let (eigs, _) = op.eig().expect("random matrix eigendecomposition");
    let radius = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max);
    op.mapv_inplace(|v| v * 0.98 / radius);

    let mut state = Array1::from_shape_fn(dim, |_| rng.gen_range(5.0..25.0));
    let mut slices = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        slices.push(
            DenseTensor::from_colex(vec![m, n], state.to_vec()).expect("state length matches"),
        );
        state = op.dot(&state);
    }
    let values = DenseTensor::stack_last_mode(&slices).expect("slices share shape");
    FieldSeries::new(synthetic_grid(m, n), synthetic_dates(t_len), values, "SYNTH_LINEAR".into())
        .expect("synthetic series is valid")
}

/// Parameters of the traveling-modes field; the defaults are the bundled
/// benchmark configuration.
#[derive(Debug, Clone)]
pub struct TravelingModesSpec {
    /// Mean level and south–north gradient of the static background.
    pub base_level: f64,
    pub lat_gradient: f64,
    /// Seasonal oscillation: amplitude, period in days, per-row phase drift.
    pub seasonal_amplitude: f64,
    pub seasonal_period: f64,
    pub seasonal_phase_drift: f64,
    /// Two decaying traveling waves: (amplitude, decay per step, spatial
    /// frequencies along lat/lon, temporal period in days).
    pub modes: [(f64, f64, f64, f64, f64); 2],
    /// Standard deviation of the seeded measurement texture.
    pub noise_sigma: f64,
}

impl Default for TravelingModesSpec {
    fn default() -> Self {
        Self {
            base_level: 15.0,
            lat_gradient: -10.0,
            seasonal_amplitude: 8.0,
            seasonal_period: 365.25,
            seasonal_phase_drift: 0.6,
            modes: [
                (5.0, 0.9995, 0.9, 0.6, 19.0),
                (3.0, 0.999, 0.5, -1.1, 41.0),
            ],
            noise_sigma: 0.35,
        }
    }
}

/// Synthetic benchmark field: a latitude gradient plus a seasonal cycle and
/// two slowly decaying traveling waves, with a small seeded measurement
/// texture so forecast errors settle at a stable floor instead of machine
/// noise.
pub fn traveling_modes_fixture(
    m: usize,
    n: usize,
    t_len: usize,
    seed: u64,
    spec: &TravelingModesSpec,
) -> FieldSeries {
    assert!(m >= 2 && n >= 2 && t_len >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let mut values = DenseTensor::zeros(vec![m, n, t_len]).expect("valid shape");
    for i in 0..m {
        let row = i as f64 / (m - 1) as f64;
        for j in 0..n {
            let col = j as f64 / (n - 1) as f64;
            for t in 0..t_len {
                let day = t as f64;
                let mut v = spec.base_level + spec.lat_gradient * row;
                v += spec.seasonal_amplitude
                    * (tau * day / spec.seasonal_period - spec.seasonal_phase_drift * row).cos();
                for &(amp, decay, f_lat, f_lon, period) in &spec.modes {
                    v += amp
                        * decay.powf(day)
                        * (tau * (f_lat * row + f_lon * col) - tau * day / period).cos();
                }
                v += spec.noise_sigma * standard_normal(&mut rng);
                values.set(&[i, j, t], v);
            }
        }
    }
    FieldSeries::new(
        synthetic_grid(m, n),
        synthetic_dates(t_len),
        values,
        "SYNTH_TRAVELING".into(),
    )
    .expect("synthetic series is valid")
}

/// Box–Muller draw; keeps the generator free of extra distribution deps.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
