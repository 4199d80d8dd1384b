//! Exact dynamic mode decomposition on snapshot matrices.
//!
//! Given snapshots `z₀ … z_{m-1}` assumed to follow `z_{k+1} = A z_k`, the
//! shifted matrices `X = [z₀ … z_{m-2}]`, `Y = [z₁ … z_{m-1}]` determine the
//! best-fit operator `A = Y X†`. Instead of forming `A`, the rank-p reduced
//! operator `Ã = Uᵀ Y V Σ⁻¹` (from the truncated SVD `X ≈ U Σ Vᵀ`) is
//! eigendecomposed, and the exact DMD modes `φⱼ = (1/λⱼ) Y V Σ⁻¹ wⱼ` carry
//! the spectrum back to state space. Reconstruction and forecasting follow
//! `z_k = Φ Λᵏ Φ† z₀`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{Eig, JobSvd, LeastSquaresSvd, SVDDC};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DmdError {
    #[error("need at least 2 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error("rank {requested} outside 1..={max}")]
    RankOutOfRange { requested: usize, max: usize },
    #[error("snapshot matrix is numerically zero; dynamics undefined")]
    ZeroData,
    #[error("state dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("steps must be >= 1")]
    ZeroSteps,
    #[error("linear algebra kernel failed: {0}")]
    Linalg(String),
}

/// Shifted snapshot matrices sharing one underlying series.
#[derive(Debug, Clone)]
pub struct SnapshotPair {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub dt: f64,
}

/// Splits an `n × m` series into the shifted pair `X = [z₀ … z_{m-2}]`,
/// `Y = [z₁ … z_{m-1}]`.
pub fn build_snapshot_pair(series: &ArrayView2<f64>, dt: f64) -> Result<SnapshotPair, DmdError> {
    let m = series.ncols();
    if m < 2 {
        return Err(DmdError::TooFewSnapshots(m));
    }
    Ok(SnapshotPair {
        x: series.slice(s![.., ..m - 1]).to_owned(),
        y: series.slice(s![.., 1..]).to_owned(),
        dt,
    })
}

/// Fitted DMD spectrum: modes in columns, eigenvalues sorted by descending
/// magnitude (ties by descending real, then imaginary, part).
#[derive(Debug, Clone)]
pub struct DmdModel {
    pub modes: Array2<Complex64>,
    pub eigenvalues: Array1<Complex64>,
    /// Achieved rank; below the requested rank when trailing singular values
    /// of `X` fell under `1e-12 · σ_max` and were truncated.
    pub rank: usize,
    pub dt: f64,
}

/// Relative singular-value floor under which `X` is treated as rank-deficient.
const SV_FLOOR: f64 = 1e-12;

pub fn dmd_fit(pair: &SnapshotPair, rank: usize) -> Result<DmdModel, DmdError> {
    let n = pair.x.nrows();
    let m1 = pair.x.ncols();
    let max_rank = n.min(m1);
    if rank == 0 || rank > max_rank {
        return Err(DmdError::RankOutOfRange {
            requested: rank,
            max: max_rank,
        });
    }

    let (u, sigma, vt) = pair
        .x
        .svddc(JobSvd::Some)
        .map_err(|e| DmdError::Linalg(format!("SVD of X: {e}")))?;
    let (u, vt) = (u.expect("requested U"), vt.expect("requested VT"));
    if sigma[0] == 0.0 {
        return Err(DmdError::ZeroData);
    }
    let achieved = sigma
        .iter()
        .take(rank)
        .take_while(|&&s| s >= SV_FLOOR * sigma[0])
        .count();

    let u_r = u.slice(s![.., ..achieved]);
    let vt_r = vt.slice(s![..achieved, ..]);
    // B = Y V Σ⁻¹, shared by the reduced operator and the exact modes.
    let mut b = pair.y.dot(&vt_r.t());
    for (j, mut col) in b.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v / sigma[j]);
    }
    let reduced = u_r.t().dot(&b);

    let (eigvals, eigvecs) = reduced
        .eig()
        .map_err(|e| DmdError::Linalg(format!("eigendecomposition: {e}")))?;
    let order = sort_order(&eigvals);

    let spectral_radius = eigvals.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let b_c = b.mapv(|v| Complex64::new(v, 0.0));
    let u_c = u_r.mapv(|v| Complex64::new(v, 0.0));
    let mut modes = Array2::zeros((n, achieved));
    let mut eigenvalues = Array1::zeros(achieved);
    for (out_j, &src_j) in order.iter().enumerate() {
        let lambda = eigvals[src_j];
        eigenvalues[out_j] = lambda;
        let w = eigvecs.column(src_j);
        // Exact mode; a vanishing eigenvalue falls back to the projected
        // mode U·w, where the exact formula degenerates.
        let col = if lambda.norm() > SV_FLOOR * spectral_radius {
            b_c.dot(&w).mapv(|v| v / lambda)
        } else {
            u_c.dot(&w)
        };
        modes.column_mut(out_j).assign(&col);
    }

    Ok(DmdModel {
        modes,
        eigenvalues,
        rank: achieved,
        dt: pair.dt,
    })
}

fn sort_order(eigvals: &Array1<Complex64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eigvals.len()).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (eigvals[a], eigvals[b]);
        lb.norm()
            .partial_cmp(&la.norm())
            .unwrap()
            .then(lb.re.partial_cmp(&la.re).unwrap())
            .then(lb.im.partial_cmp(&la.im).unwrap())
    });
    order
}

/// Forecast produced by iterating the fitted spectrum from an initial state.
#[derive(Debug, Clone)]
pub struct DmdForecast {
    /// One column per step `t = 1…k`: the real part of `Φ Λᵗ Φ† z₀`.
    pub values: Array2<f64>,
    /// `‖imaginary part‖_F / ‖real part‖_F` over the whole forecast; small
    /// for models fit on real data.
    pub imag_residual: f64,
}

pub fn dmd_forecast(
    model: &DmdModel,
    z0: &ArrayView1<f64>,
    steps: usize,
) -> Result<DmdForecast, DmdError> {
    if steps == 0 {
        return Err(DmdError::ZeroSteps);
    }
    let n = model.modes.nrows();
    if z0.len() != n {
        return Err(DmdError::DimensionMismatch {
            expected: n,
            actual: z0.len(),
        });
    }
    let amplitudes = fit_amplitudes(&model.modes, z0)?;

    let p = model.eigenvalues.len();
    let mut values = Array2::zeros((n, steps));
    let mut lambda_t: Array1<Complex64> = Array1::ones(p);
    let (mut re_sq, mut im_sq) = (0.0, 0.0);
    for t in 0..steps {
        for j in 0..p {
            lambda_t[j] *= model.eigenvalues[j];
        }
        let scaled = &amplitudes * &lambda_t;
        let state = model.modes.dot(&scaled);
        for (i, v) in state.iter().enumerate() {
            values[[i, t]] = v.re;
            re_sq += v.re * v.re;
            im_sq += v.im * v.im;
        }
    }
    let imag_residual = if re_sq > 0.0 {
        (im_sq / re_sq).sqrt()
    } else {
        im_sq.sqrt()
    };
    Ok(DmdForecast {
        values,
        imag_residual,
    })
}

/// Least-squares amplitudes `b = Φ† z₀`.
pub(crate) fn fit_amplitudes(
    modes: &Array2<Complex64>,
    z0: &ArrayView1<f64>,
) -> Result<Array1<Complex64>, DmdError> {
    let rhs = z0.mapv(|v| Complex64::new(v, 0.0));
    let sol = modes
        .least_squares(&rhs)
        .map_err(|e| DmdError::Linalg(format!("amplitude least squares: {e}")))?;
    Ok(sol.solution)
}
