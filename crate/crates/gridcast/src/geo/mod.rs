//! Geospatial model placement: great-circle distance, latitude-weighted
//! sampling of training locations, haversine k-means and local
//! autoregressive forecasting at cluster centers.

mod kmeans;
mod local;

pub use kmeans::{cluster_haversine_kmeans, ClusterPlan};
pub use local::{
    centered_series, fit_local_ar, local_forecast, local_forecast_assigned, ArStrategy,
    LocalArModel,
};

use ndarray::Array2;
use thiserror::Error;

/// Earth radius used throughout, in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6367.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("requested {requested} locations from a grid of {available}")]
    TooManyLocations { requested: usize, available: usize },
    #[error("latitude weight must be >= 1, got {0}")]
    BadLatWeight(f64),
    #[error("cluster count {k} exceeds grid size {size}")]
    TooManyClusters { k: usize, size: usize },
    #[error("cluster {0} has no assigned grid points")]
    EmptyCluster(usize),
    #[error("plan covers a {expected:?} grid but the series is {actual:?}")]
    PlanMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("series of length {len} is too short for lookback {lookback}")]
    InsufficientHistory { len: usize, lookback: usize },
    #[error("lookback must be >= 1")]
    ZeroLookback,
}

/// Regular latitude/longitude grid, both axes strictly ascending.
///
/// Latitudes are degrees in [−90, 90]; longitudes are degrees in [−180, 360)
/// and are kept as given (no wrap-around normalization — the haversine
/// formula is periodic in the longitude difference).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeoGrid {
    lats: Vec<f64>,
    lons: Vec<f64>,
}

impl GeoGrid {
    pub fn new(lats: Vec<f64>, lons: Vec<f64>) -> Result<Self, GeoError> {
        if lats.is_empty() || lons.is_empty() {
            return Err(GeoError::InvalidGrid("empty axis".into()));
        }
        if lats.iter().any(|&v| !(-90.0..=90.0).contains(&v)) {
            return Err(GeoError::InvalidGrid(format!(
                "latitude outside [-90, 90]: {lats:?}"
            )));
        }
        if lons.iter().any(|&v| !(-180.0..360.0).contains(&v)) {
            return Err(GeoError::InvalidGrid(format!(
                "longitude outside [-180, 360): {lons:?}"
            )));
        }
        if lats.windows(2).any(|w| w[0] >= w[1]) || lons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GeoError::InvalidGrid(
                "axes must be strictly ascending".into(),
            ));
        }
        Ok(Self { lats, lons })
    }

    /// Uniform grid over an inclusive bounding box with the given step.
    pub fn regular(
        lat_range: (f64, f64),
        lon_range: (f64, f64),
        step: f64,
    ) -> Result<Self, GeoError> {
        if step <= 0.0 {
            return Err(GeoError::InvalidGrid(format!("non-positive step {step}")));
        }
        let axis = |lo: f64, hi: f64| -> Vec<f64> {
            let count = ((hi - lo) / step + 0.5).floor() as usize + 1;
            (0..count).map(|i| lo + step * i as f64).collect()
        };
        Self::new(axis(lat_range.0, lat_range.1), axis(lon_range.0, lon_range.1))
    }

    pub fn lats(&self) -> &[f64] {
        &self.lats
    }

    pub fn lons(&self) -> &[f64] {
        &self.lons
    }

    pub fn n_lat(&self) -> usize {
        self.lats.len()
    }

    pub fn n_lon(&self) -> usize {
        self.lons.len()
    }

    pub fn len(&self) -> usize {
        self.lats.len() * self.lons.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, lat_index: usize, lon_index: usize) -> (f64, f64) {
        (self.lats[lat_index], self.lons[lon_index])
    }
}

/// Great-circle distance in kilometres between two (lat°, lon°) points.
///
/// `d = 2r·arcsin √(sin²(Δφ/2) + cos φ₁ cos φ₂ sin²(Δλ/2))` with r = 6367 km.
pub fn haversine(p: (f64, f64), q: (f64, f64)) -> f64 {
    let (phi1, phi2) = (p.0.to_radians(), q.0.to_radians());
    let d_phi = (q.0 - p.0).to_radians();
    let d_lambda = (q.1 - p.1).to_radians();
    let a = (d_phi / 2.0).sin().powi(2)
        + phi1.cos() * phi2.cos() * (d_lambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// A selected grid point with its coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLocation {
    pub lat_index: usize,
    pub lon_index: usize,
    pub lat: f64,
    pub lon: f64,
}

/// Samples training locations on a sub-lattice that is denser along the
/// latitude axis, where the temperature gradient dominates.
///
/// The lattice spans roughly `lat_weight`× more distinct latitude rows than
/// longitude columns; surplus lattice points beyond `n_models` are dropped
/// pseudo-randomly but deterministically for a given seed.
pub fn sample_latitude_weighted(
    grid: &GeoGrid,
    n_models: usize,
    lat_weight: f64,
    seed: u64,
) -> Result<Vec<GridLocation>, GeoError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if lat_weight < 1.0 {
        return Err(GeoError::BadLatWeight(lat_weight));
    }
    if n_models == 0 || n_models > grid.len() {
        return Err(GeoError::TooManyLocations {
            requested: n_models,
            available: grid.len(),
        });
    }
    let (m, n) = (grid.n_lat(), grid.n_lon());
    // Aim for n_rows ≈ lat_weight · n_cols with n_rows·n_cols ≥ n_models.
    let mut n_rows = ((n_models as f64 * lat_weight).sqrt().ceil() as usize).clamp(1, m);
    let mut n_cols = n_models.div_ceil(n_rows).clamp(1, n);
    while n_rows * n_cols < n_models {
        if n_rows < m {
            n_rows += 1;
        } else if n_cols < n {
            n_cols += 1;
        } else {
            break;
        }
    }

    let spread = |count: usize, extent: usize| -> Vec<usize> {
        if count >= extent {
            (0..extent).collect()
        } else {
            (0..count)
                .map(|i| i * (extent - 1) / (count - 1).max(1))
                .collect()
        }
    };
    let rows = spread(n_rows, m);
    let cols = spread(n_cols, n);
    let mut lattice: Vec<GridLocation> = rows
        .iter()
        .flat_map(|&i| {
            cols.iter().map(move |&j| {
                let (lat, lon) = (i, j);
                (lat, lon)
            })
        })
        .map(|(i, j)| {
            let (lat, lon) = grid.point(i, j);
            GridLocation {
                lat_index: i,
                lon_index: j,
                lat,
                lon,
            }
        })
        .collect();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    lattice.shuffle(&mut rng);
    lattice.truncate(n_models);
    lattice.sort_by_key(|loc| (loc.lat_index, loc.lon_index));
    Ok(lattice)
}

/// Assigns every grid point to the location minimizing the latitude-weighted
/// degree distance `√((w·Δlat)² + Δlon²)`; ties go to the lowest index.
pub fn assign_weighted(
    grid: &GeoGrid,
    locations: &[GridLocation],
    lat_weight: f64,
) -> Result<Array2<usize>, GeoError> {
    if locations.is_empty() {
        return Err(GeoError::TooManyLocations {
            requested: 0,
            available: grid.len(),
        });
    }
    if lat_weight < 1.0 {
        return Err(GeoError::BadLatWeight(lat_weight));
    }
    let mut assignment = Array2::zeros((grid.n_lat(), grid.n_lon()));
    for i in 0..grid.n_lat() {
        for j in 0..grid.n_lon() {
            let (lat, lon) = grid.point(i, j);
            let mut best = (f64::INFINITY, 0usize);
            for (c, loc) in locations.iter().enumerate() {
                let d = (lat_weight * (lat - loc.lat)).powi(2) + (lon - loc.lon).powi(2);
                if d < best.0 {
                    best = (d, c);
                }
            }
            assignment[[i, j]] = best.1;
        }
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_validation() {
        assert!(GeoGrid::new(vec![30.0, 30.5], vec![4.0, 4.5]).is_ok());
        assert!(GeoGrid::new(vec![30.5, 30.0], vec![4.0]).is_err());
        assert!(GeoGrid::new(vec![95.0], vec![4.0]).is_err());
        assert!(GeoGrid::new(vec![30.0], vec![360.0]).is_err());
        assert!(GeoGrid::new(vec![], vec![4.0]).is_err());
    }

    #[test]
    fn regular_grid_50_by_94() {
        let grid = GeoGrid::regular((30.0, 54.5), (4.0, 50.5), 0.5).unwrap();
        assert_eq!(grid.n_lat(), 50);
        assert_eq!(grid.n_lon(), 94);
    }

    #[test]
    fn haversine_closed_forms() {
        assert_eq!(haversine((12.3, 45.6), (12.3, 45.6)), 0.0);
        let antipodal = haversine((0.0, 0.0), (0.0, 180.0));
        assert!((antipodal - PI * EARTH_RADIUS_KM).abs() < 1e-9);
        let quarter = haversine((0.0, 0.0), (0.0, 90.0));
        assert!((quarter - PI * EARTH_RADIUS_KM / 2.0).abs() < 1e-9);
    }

    #[test]
    fn haversine_symmetry_and_bound() {
        let pts = [(30.0, 4.0), (54.5, 51.5), (-10.0, 120.0), (80.0, -170.0)];
        for &p in &pts {
            for &q in &pts {
                let d = haversine(p, q);
                assert!(d >= 0.0);
                assert!(d <= PI * EARTH_RADIUS_KM + 1e-9);
                assert!((d - haversine(q, p)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exhaustive_sampling_selects_every_point() {
        let grid = GeoGrid::regular((0.0, 1.5), (10.0, 11.0), 0.5).unwrap();
        let samples = sample_latitude_weighted(&grid, grid.len(), 2.0, 1).unwrap();
        assert_eq!(samples.len(), grid.len());
        let distinct: std::collections::BTreeSet<_> = samples
            .iter()
            .map(|l| (l.lat_index, l.lon_index))
            .collect();
        assert_eq!(distinct.len(), grid.len());
    }

    #[test]
    fn two_by_two_grid_unweighted() {
        let grid = GeoGrid::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let samples = sample_latitude_weighted(&grid, 4, 1.0, 7).unwrap();
        assert_eq!(samples.len(), 4);
    }

    #[test]
    fn paper_grid_sampling_favors_latitude() {
        let grid = GeoGrid::regular((30.0, 54.5), (4.0, 51.5), 0.5).unwrap();
        let samples = sample_latitude_weighted(&grid, 70, 3.0, 42).unwrap();
        assert_eq!(samples.len(), 70);
        let lat_rows: std::collections::BTreeSet<_> =
            samples.iter().map(|l| l.lat_index).collect();
        let lon_cols: std::collections::BTreeSet<_> =
            samples.iter().map(|l| l.lon_index).collect();
        assert!(
            lat_rows.len() >= lon_cols.len(),
            "{} lat rows vs {} lon cols",
            lat_rows.len(),
            lon_cols.len()
        );
        // Determinism per seed.
        let again = sample_latitude_weighted(&grid, 70, 3.0, 42).unwrap();
        assert_eq!(samples, again);
    }

    #[test]
    fn sampling_bounds_checked() {
        let grid = GeoGrid::new(vec![0.0, 1.0], vec![0.0]).unwrap();
        assert!(matches!(
            sample_latitude_weighted(&grid, 3, 1.0, 0),
            Err(GeoError::TooManyLocations { .. })
        ));
        assert!(matches!(
            sample_latitude_weighted(&grid, 1, 0.5, 0),
            Err(GeoError::BadLatWeight(_))
        ));
    }

    #[test]
    fn weighted_assignment_prefers_latitude_proximity() {
        let grid = GeoGrid::regular((0.0, 4.0), (0.0, 4.0), 1.0).unwrap();
        let locations = vec![
            GridLocation {
                lat_index: 0,
                lon_index: 4,
                lat: 0.0,
                lon: 4.0,
            },
            GridLocation {
                lat_index: 4,
                lon_index: 0,
                lat: 4.0,
                lon: 0.0,
            },
        ];
        let assignment = assign_weighted(&grid, &locations, 3.0).unwrap();
        // Same latitude as location 0 but same longitude as location 1: the
        // latitude weight must dominate.
        assert_eq!(assignment[[0, 0]], 0);
        assert_eq!(assignment[[4, 4]], 1);
    }
}
