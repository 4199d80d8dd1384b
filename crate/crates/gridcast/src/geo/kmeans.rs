//! Haversine k-means over a latitude/longitude grid.
//!
//! Lloyd-style iteration under great-circle distance: nearest-centroid
//! assignment (ties to the lowest centroid index), then a spherical-mean
//! centroid update — members are averaged as 3-D unit vectors and projected
//! back to (lat, lon), which avoids longitude wrap-around artifacts. A
//! candidate centroid is only accepted if it strictly lowers its cluster's
//! summed distance, so the reported inertia is non-increasing and the loop
//! terminates at an assignment fixed point. Clusters that lose all members
//! are reseeded with the point farthest from its assigned centroid.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{haversine, GeoError, GeoGrid};

/// Centroid locations and the per-gridpoint nearest-centroid assignment.
#[derive(Debug, Clone)]
pub struct ClusterPlan {
    /// (lat°, lon°) per centroid.
    pub centroids: Vec<(f64, f64)>,
    /// Centroid index per grid point, `n_lat × n_lon`.
    pub assignment: Array2<usize>,
    /// Sum of haversine distances (km) from each point to its centroid.
    pub inertia: f64,
    pub k: usize,
    pub seed: u64,
}

/// JSON wire form: assignment flattened row-major.
#[derive(Serialize, Deserialize)]
struct ClusterPlanFile {
    centroids: Vec<(f64, f64)>,
    assignment: Vec<usize>,
    rows: usize,
    cols: usize,
    inertia: f64,
    k: usize,
    seed: u64,
}

impl ClusterPlan {
    pub fn to_json(&self) -> String {
        let file = ClusterPlanFile {
            centroids: self.centroids.clone(),
            assignment: self.assignment.iter().copied().collect(),
            rows: self.assignment.nrows(),
            cols: self.assignment.ncols(),
            inertia: self.inertia,
            k: self.k,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&file).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GeoError> {
        let file: ClusterPlanFile = serde_json::from_str(text)
            .map_err(|e| GeoError::InvalidGrid(format!("cluster plan JSON: {e}")))?;
        if file.assignment.len() != file.rows * file.cols {
            return Err(GeoError::InvalidGrid(
                "assignment length disagrees with dimensions".into(),
            ));
        }
        if file.centroids.len() != file.k {
            return Err(GeoError::InvalidGrid(
                "centroid count disagrees with k".into(),
            ));
        }
        let assignment =
            Array2::from_shape_vec((file.rows, file.cols), file.assignment)
                .map_err(|e| GeoError::InvalidGrid(e.to_string()))?;
        Ok(Self {
            centroids: file.centroids,
            assignment,
            inertia: file.inertia,
            k: file.k,
            seed: file.seed,
        })
    }
}

pub fn cluster_haversine_kmeans(
    grid: &GeoGrid,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterPlan, GeoError> {
    let size = grid.len();
    if k == 0 || k > size {
        return Err(GeoError::TooManyClusters { k, size });
    }
    let points: Vec<(f64, f64)> = (0..grid.n_lat())
        .flat_map(|i| (0..grid.n_lon()).map(move |j| (i, j)))
        .map(|(i, j)| grid.point(i, j))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeding(&points, k, &mut rng);

    let mut assignment = vec![0usize; size];
    let mut previous: Option<Vec<usize>> = None;
    for _ in 0..max_iters.max(1) {
        assign_nearest(&points, &centroids, &mut assignment);
        reseed_empty_clusters(&points, &mut centroids, &mut assignment);
        if previous.as_deref() == Some(assignment.as_slice()) {
            break;
        }
        previous = Some(assignment.clone());

        // Guarded update: keep the old centroid unless the spherical mean
        // strictly improves the cluster's summed distance.
        for c in 0..k {
            let members: Vec<(f64, f64)> = points
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(&p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            let candidate = spherical_mean(&members);
            let current_cost: f64 = members.iter().map(|&p| haversine(p, centroids[c])).sum();
            let candidate_cost: f64 = members.iter().map(|&p| haversine(p, candidate)).sum();
            if candidate_cost < current_cost {
                centroids[c] = candidate;
            }
        }
    }
    // Final assignment so the nearest-centroid invariant holds exactly.
    assign_nearest(&points, &centroids, &mut assignment);
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(&p, &a)| haversine(p, centroids[a]))
        .sum();

    let assignment = Array2::from_shape_vec((grid.n_lat(), grid.n_lon()), assignment)
        .expect("assignment covers the grid");
    Ok(ClusterPlan {
        centroids,
        assignment,
        inertia,
        k,
        seed,
    })
}

/// k-means++-style seeding: subsequent centroids are drawn with probability
/// proportional to squared distance from the nearest one already chosen.
fn plus_plus_seeding(points: &[(f64, f64)], k: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);
    let mut dist_sq: Vec<f64> = points
        .iter()
        .map(|&p| haversine(p, centroids[0]).powi(2))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist_sq.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a centroid; any pick works.
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &d) in dist_sq.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        };
        centroids.push(points[next]);
        for (i, &p) in points.iter().enumerate() {
            dist_sq[i] = dist_sq[i].min(haversine(p, points[next]).powi(2));
        }
    }
    centroids
}

fn assign_nearest(points: &[(f64, f64)], centroids: &[(f64, f64)], out: &mut [usize]) {
    for (slot, &p) in out.iter_mut().zip(points) {
        let mut best = (f64::INFINITY, 0usize);
        for (c, &centroid) in centroids.iter().enumerate() {
            let d = haversine(p, centroid);
            if d < best.0 {
                best = (d, c);
            }
        }
        *slot = best.1;
    }
}

/// Gives any empty cluster the grid point currently farthest from its own
/// centroid, then reassigns.
fn reseed_empty_clusters(
    points: &[(f64, f64)],
    centroids: &mut [(f64, f64)],
    assignment: &mut [usize],
) {
    loop {
        let mut counts = vec![0usize; centroids.len()];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let farthest = points
            .iter()
            .zip(assignment.iter())
            .enumerate()
            .max_by(|(_, (p, a)), (_, (q, b))| {
                let da = haversine(**p, centroids[**a]);
                let db = haversine(**q, centroids[**b]);
                da.partial_cmp(&db).unwrap()
            })
            .map(|(i, _)| i)
            .expect("grid is non-empty");
        centroids[empty] = points[farthest];
        assign_nearest(points, centroids, assignment);
    }
}

/// Mean of members as 3-D unit vectors, renormalized back to (lat°, lon°).
fn spherical_mean(members: &[(f64, f64)]) -> (f64, f64) {
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for &(lat, lon) in members {
        let (phi, lambda) = (lat.to_radians(), lon.to_radians());
        x += phi.cos() * lambda.cos();
        y += phi.cos() * lambda.sin();
        z += phi.sin();
    }
    let norm = (x * x + y * y + z * z).sqrt();
    if norm == 0.0 {
        // Degenerate antipodal balance; fall back to the first member.
        return members[0];
    }
    let lat = (z / norm).asin().to_degrees();
    let lon = y.atan2(x).to_degrees();
    (lat, lon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cluster_per_point_has_zero_inertia() {
        let grid = GeoGrid::new(vec![0.0, 1.0], vec![10.0, 11.0]).unwrap();
        let plan = cluster_haversine_kmeans(&grid, 4, 3, 50).unwrap();
        assert_eq!(plan.k, 4);
        assert!(plan.inertia < 1e-9, "inertia {}", plan.inertia);
        let mut seen: Vec<usize> = plan.assignment.iter().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_cluster_centroid_inside_bounding_region() {
        let grid = GeoGrid::regular((40.0, 44.0), (10.0, 16.0), 1.0).unwrap();
        let plan = cluster_haversine_kmeans(&grid, 1, 9, 50).unwrap();
        assert!(plan.assignment.iter().all(|&a| a == 0));
        let (lat, lon) = plan.centroids[0];
        assert!((40.0..=44.0).contains(&lat));
        assert!((10.0..=16.0).contains(&lon));
    }

    #[test]
    fn two_separated_blobs_split_exactly() {
        // Two 3×3 blobs ~2000 km apart along the latitude axis.
        let mut lats: Vec<f64> = vec![0.0, 0.5, 1.0];
        lats.extend([18.0, 18.5, 19.0]);
        let grid = GeoGrid::new(lats, vec![10.0, 10.5, 11.0]).unwrap();
        let plan = cluster_haversine_kmeans(&grid, 2, 11, 100).unwrap();
        let south = plan.assignment[[0, 0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(plan.assignment[[i, j]], south);
                assert_eq!(plan.assignment[[i + 3, j]], 1 - south);
            }
        }
        // Brute-force nearest-centroid fixed point.
        for i in 0..grid.n_lat() {
            for j in 0..grid.n_lon() {
                let p = grid.point(i, j);
                let nearest = (0..2)
                    .min_by(|&a, &b| {
                        haversine(p, plan.centroids[a])
                            .partial_cmp(&haversine(p, plan.centroids[b]))
                            .unwrap()
                    })
                    .unwrap();
                assert_eq!(plan.assignment[[i, j]], nearest);
            }
        }
    }

    #[test]
    fn cluster_count_validated() {
        let grid = GeoGrid::new(vec![0.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            cluster_haversine_kmeans(&grid, 3, 0, 10),
            Err(GeoError::TooManyClusters { k: 3, size: 2 })
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let grid = GeoGrid::regular((30.0, 36.0), (4.0, 12.0), 1.0).unwrap();
        let a = cluster_haversine_kmeans(&grid, 5, 77, 100).unwrap();
        let b = cluster_haversine_kmeans(&grid, 5, 77, 100).unwrap();
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.assignment, b.assignment);
        let c = cluster_haversine_kmeans(&grid, 5, 78, 100).unwrap();
        // Different seed may legitimately coincide, but the plan must be valid.
        assert_eq!(c.centroids.len(), 5);
    }

    #[test]
    fn json_round_trip() {
        let grid = GeoGrid::regular((0.0, 3.0), (0.0, 2.0), 1.0).unwrap();
        let plan = cluster_haversine_kmeans(&grid, 3, 5, 60).unwrap();
        let restored = ClusterPlan::from_json(&plan.to_json()).unwrap();
        assert_eq!(restored.centroids, plan.centroids);
        assert_eq!(restored.assignment, plan.assignment);
        assert_eq!(restored.k, plan.k);
        assert_eq!(restored.seed, plan.seed);
    }
}
