//! Tensor-train DMD: spectral forecasting of whole fields without ever
//! materializing the `∏n_l × ∏n_l` evolution operator.
//!
//! Snapshot histories are stored as (d+1)-way tensors `X̲, Y̲` whose last mode
//! indexes time. TT-decomposing `X̲` yields `X = M Σ N` on its last-mode
//! matricization — `M` is the (left-orthogonal) unfolding of the first d
//! cores, `Σ` the singular values carried by the final bond and `N` the
//! row-orthonormal temporal factor — so that `X† = Nᵀ Σ⁻¹ Mᵀ`. With
//! `Y = P Q` from the decomposition of `Y̲`, the reduced operator is
//!
//! `Ã = Mᵀ·P · Q·Nᵀ·Σ⁻¹`
//!
//! where `MᵀP` comes from the polynomial-cost core-chain contraction. Its
//! eigenpairs `(λⱼ, wⱼ)` give the vectorized modes
//! `φⱼ = (1/λⱼ)·PQ·NᵀΣ⁻¹·wⱼ`, assembled here directly in tensor form by
//! appending `Q·NᵀΣ⁻¹·W·Λ⁻¹` as a new final core on `Y̲`'s spatial chain.
//! Forecasts evolve least-squares amplitudes as `exp(ωⱼ·t·dt)` with
//! `ωⱼ = log(λⱼ)/dt`.

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{Eig, JobSvd, LeastSquaresSvd, SVDDC};
use num_complex::Complex64;
use thiserror::Error;

use crate::ingest::FieldSeries;
use crate::tensor::{
    self, ComplexTensor, DenseTensor, TensorError, TtOptions,
};

#[derive(Debug, Error)]
pub enum TtDmdError {
    #[error("need at least 2 time slices, got {0}")]
    TooFewSlices(usize),
    #[error("snapshot tensors must share shape: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("rank must be >= 1")]
    ZeroRank,
    #[error("all singular values truncated; data is numerically zero")]
    RankCollapse,
    #[error("all eigenvalues below the magnitude floor; empty model")]
    EmptyModel,
    #[error("initial field shape {actual:?} does not match model extents {expected:?}")]
    FieldMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("steps must be >= 1")]
    ZeroSteps,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("linear algebra kernel failed: {0}")]
    Linalg(String),
}

/// Shifted snapshot tensors `X̲, Y̲ ∈ ℝ^{n₁×…×n_d×m}` built from one series.
#[derive(Debug, Clone)]
pub struct TtSnapshotTensors {
    pub x: DenseTensor,
    pub y: DenseTensor,
    pub dt: f64,
}

impl TtSnapshotTensors {
    /// Splits an `(n₁, …, n_d, T)` series tensor along its last mode into
    /// `X̲` (slices `0…T-2`) and `Y̲` (slices `1…T-1`).
    pub fn from_series_tensor(series: &DenseTensor, dt: f64) -> Result<Self, TtDmdError> {
        let d = series.order();
        let t_len = series.shape()[d - 1];
        if d < 2 || t_len < 2 {
            return Err(TtDmdError::TooFewSlices(if d < 2 { 1 } else { t_len }));
        }
        let slices: Vec<DenseTensor> = (0..t_len).map(|k| series.last_mode_slice(k)).collect();
        let x = DenseTensor::stack_last_mode(&slices[..t_len - 1])?;
        let y = DenseTensor::stack_last_mode(&slices[1..])?;
        Ok(Self { x, y, dt })
    }
}

/// Shifted snapshot tensors from a gridded field series.
pub fn build_tt_snapshot_tensors(
    series: &FieldSeries,
    dt: f64,
) -> Result<TtSnapshotTensors, TtDmdError> {
    TtSnapshotTensors::from_series_tensor(&series.values, dt)
}

/// Rank selection for the final TT bond entering `Σ`.
#[derive(Debug, Clone, Copy)]
pub enum RankSpec {
    /// Keep the smallest rank covering this fraction of singular-value
    /// energy (squared).
    EnergyFraction(f64),
    /// Hard cap, also applied to interior TT bonds.
    Fixed(usize),
}

impl Default for RankSpec {
    fn default() -> Self {
        RankSpec::EnergyFraction(0.9999)
    }
}

/// Contraction products retained from fitting; enough to re-derive the
/// vectorized-mode formula and to fit amplitudes without refitting.
#[derive(Debug, Clone)]
pub struct TtDmdFactors {
    /// `MᵀP` after the Σ-side rotation, `p × s_d`.
    pub m_t_p: Array2<f64>,
    /// `Q·Nᵀ·Σ⁻¹`, `s_d × p`.
    pub q_nt_sigma_inv: Array2<f64>,
    /// Retained singular values of the last-mode matricization of `X̲`.
    pub sigma: Array1<f64>,
    /// Dense unfolding of `Y̲`'s spatial cores (`∏n_l × s_d`).
    pub y_chain: Array2<f64>,
    /// Kept eigenvectors of the reduced operator, ordered like `eigenvalues`.
    pub eigvecs: Array2<Complex64>,
}

/// Fitted TT-DMD spectrum over a d-way spatial domain.
#[derive(Debug, Clone)]
pub struct TtDmdModel {
    /// `Φ̲ ∈ ℂ^{n₁×…×n_d×p}`; slice `[..., j]` vectorizes to mode `φⱼ`.
    pub mode_tensor: ComplexTensor,
    pub eigenvalues: Array1<Complex64>,
    /// Continuous-time exponents `ωⱼ = log(λⱼ)/dt`, principal branch.
    pub omega: Array1<Complex64>,
    /// Effective final TT rank `r_d` after singular-value truncation.
    pub rank: usize,
    pub dt: f64,
    /// Absent on models restored from disk.
    pub factors: Option<TtDmdFactors>,
}

const SV_FLOOR: f64 = 1e-12;
/// Eigenvalues under this relative magnitude are dropped before logarithms.
const EIG_FLOOR: f64 = 1e-12;

pub fn ttdmd_fit(t: &TtSnapshotTensors, rank: RankSpec) -> Result<TtDmdModel, TtDmdError> {
    if t.x.shape() != t.y.shape() {
        return Err(TtDmdError::ShapeMismatch(
            t.x.shape().to_vec(),
            t.y.shape().to_vec(),
        ));
    }
    let order = t.x.order();
    let m = t.x.shape()[order - 1];
    if m < 1 || order < 2 {
        return Err(TtDmdError::TooFewSlices(m));
    }
    let d = order - 1;

    let opts = match rank {
        RankSpec::Fixed(r) => {
            if r == 0 {
                return Err(TtDmdError::ZeroRank);
            }
            TtOptions::with_uniform_cap(r)
        }
        RankSpec::EnergyFraction(f) => {
            if !(0.0..=1.0).contains(&f) || f == 0.0 {
                return Err(TtDmdError::ZeroRank);
            }
            TtOptions::default()
        }
    };
    let tt_x = tensor::tt_decompose(&t.x, &opts)?;
    let tt_y = tensor::tt_decompose(&t.y, &opts)?;

    // Split the temporal core of X̲ into Σ·N; its singular values are those
    // of the full last-mode matricization because the spatial chain is
    // left-orthogonal.
    let x_last = &tt_x.cores()[d];
    let r_d = x_last.dim().0;
    let c = x_last
        .to_owned()
        .into_shape_with_order((r_d, m))
        .expect("final bond is 1");
    let (uc, sigma, vt) = c
        .svddc(JobSvd::Some)
        .map_err(|e| TtDmdError::Linalg(format!("SVD of temporal core: {e}")))?;
    let (uc, vt) = (uc.expect("requested U"), vt.expect("requested VT"));
    if sigma.len() == 0 || sigma[0] == 0.0 {
        return Err(TtDmdError::RankCollapse);
    }
    let nonzero = sigma
        .iter()
        .take_while(|&&s| s >= SV_FLOOR * sigma[0])
        .count();
    let p = match rank {
        RankSpec::Fixed(r) => r.min(nonzero),
        RankSpec::EnergyFraction(f) => {
            let total: f64 = sigma.iter().map(|s| s * s).sum();
            let mut acc = 0.0;
            let mut keep = nonzero;
            for (i, s) in sigma.iter().take(nonzero).enumerate() {
                acc += s * s;
                if acc >= f * total {
                    keep = i + 1;
                    break;
                }
            }
            keep
        }
    };
    let sigma = sigma.slice(s![..p]).to_owned();
    let n_temporal = vt.slice(s![..p, ..]).to_owned();
    let uc_p = uc.slice(s![.., ..p]);

    // Ã = Mᵀ·P · Q·Nᵀ·Σ⁻¹ with MᵀP from the core-chain sweep.
    let m_t_p_raw = tensor::contract_chain(&tt_x.cores()[..d], &tt_y.cores()[..d]);
    let m_t_p = uc_p.t().dot(&m_t_p_raw);

    let y_last = &tt_y.cores()[d];
    let s_d = y_last.dim().0;
    let q = y_last
        .to_owned()
        .into_shape_with_order((s_d, m))
        .expect("final bond is 1");
    let mut q_nt_sigma_inv = q.dot(&n_temporal.t());
    for (j, mut col) in q_nt_sigma_inv.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v / sigma[j]);
    }

    let reduced = m_t_p.dot(&q_nt_sigma_inv);
    let (eigvals, eigvecs) = reduced
        .eig()
        .map_err(|e| TtDmdError::Linalg(format!("eigendecomposition: {e}")))?;

    // Order by descending magnitude, drop near-zero eigenvalues (their modes
    // and logarithms are undefined).
    let radius = eigvals.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let mut order_idx: Vec<usize> = (0..eigvals.len()).collect();
    order_idx.sort_by(|&a, &b| {
        let (la, lb) = (eigvals[a], eigvals[b]);
        lb.norm()
            .partial_cmp(&la.norm())
            .unwrap()
            .then(lb.re.partial_cmp(&la.re).unwrap())
            .then(lb.im.partial_cmp(&la.im).unwrap())
    });
    order_idx.retain(|&j| eigvals[j].norm() > EIG_FLOOR * radius && eigvals[j].norm() > 0.0);
    if order_idx.is_empty() {
        return Err(TtDmdError::EmptyModel);
    }

    let kept = order_idx.len();
    let mut eigenvalues = Array1::zeros(kept);
    let mut w = Array2::zeros((p, kept));
    for (out_j, &src_j) in order_idx.iter().enumerate() {
        eigenvalues[out_j] = eigvals[src_j];
        w.column_mut(out_j).assign(&eigvecs.column(src_j));
    }

    // New final core Q·NᵀΣ⁻¹·W·Λ⁻¹ turns Y̲'s spatial chain into the mode
    // tensor; cost stays polynomial in the bond dimensions.
    let g_c = q_nt_sigma_inv.mapv(|v| Complex64::new(v, 0.0));
    let mut last_core_mat = g_c.dot(&w);
    for (j, mut col) in last_core_mat.axis_iter_mut(Axis(1)).enumerate() {
        let lam = eigenvalues[j];
        col.mapv_inplace(|v| v / lam);
    }
    let mut mode_cores: Vec<ndarray::Array3<Complex64>> = tt_y.cores()[..d]
        .iter()
        .map(|core| core.mapv(|v| Complex64::new(v, 0.0)))
        .collect();
    mode_cores.push(
        last_core_mat
            .clone()
            .insert_axis(Axis(2))
            .into_dimensionality()
            .expect("s_d × kept × 1"),
    );
    let unfolded = tensor::chain_unfold(&mode_cores);
    let mut shape = t.x.shape()[..d].to_vec();
    shape.push(kept);
    let mode_tensor = ComplexTensor::from_colex(shape, unfolded.column(0).to_vec())?;

    let omega = eigenvalues.mapv(|l| l.ln() / t.dt);
    let y_chain = tensor::chain_unfold(&tt_y.cores()[..d]);

    Ok(TtDmdModel {
        mode_tensor,
        eigenvalues,
        omega,
        rank: p,
        dt: t.dt,
        factors: Some(TtDmdFactors {
            m_t_p,
            q_nt_sigma_inv,
            sigma,
            y_chain,
            eigvecs: w,
        }),
    })
}

/// Forecast of a 2-D field; slices are `t = 1…k` continuations of `x0`.
#[derive(Debug, Clone)]
pub struct TtDmdForecast {
    pub values: DenseTensor,
    /// `‖imaginary part‖_F / ‖real part‖_F` over all slices.
    pub imag_residual: f64,
}

pub fn ttdmd_forecast(
    model: &TtDmdModel,
    x0: &DenseTensor,
    steps: usize,
) -> Result<TtDmdForecast, TtDmdError> {
    if steps == 0 {
        return Err(TtDmdError::ZeroSteps);
    }
    let d = model.mode_tensor.order() - 1;
    let spatial = &model.mode_tensor.shape()[..d];
    if x0.shape() != spatial {
        return Err(TtDmdError::FieldMismatch {
            expected: spatial.to_vec(),
            actual: x0.shape().to_vec(),
        });
    }
    if model.eigenvalues.is_empty() {
        return Err(TtDmdError::EmptyModel);
    }

    // Φ as a (∏n × p) matrix of vectorized modes.
    let phi = model
        .mode_tensor
        .matricize(d)
        .expect("mode tensor has order d+1 >= 2")
        .matrix;
    let rhs = x0.vectorize().mapv(|v| Complex64::new(v, 0.0));
    let amplitudes = phi
        .least_squares(&rhs)
        .map_err(|e| TtDmdError::Linalg(format!("amplitude least squares: {e}")))?
        .solution;

    let p = model.eigenvalues.len();
    let mut lambda_t: Array1<Complex64> = Array1::ones(p);
    let mut slices = Vec::with_capacity(steps);
    let (mut re_sq, mut im_sq) = (0.0, 0.0);
    for _ in 0..steps {
        for j in 0..p {
            lambda_t[j] *= model.eigenvalues[j];
        }
        let state = phi.dot(&(&amplitudes * &lambda_t));
        for v in state.iter() {
            re_sq += v.re * v.re;
            im_sq += v.im * v.im;
        }
        let real: Vec<f64> = state.iter().map(|v| v.re).collect();
        slices.push(DenseTensor::from_colex(spatial.to_vec(), real)?);
    }
    let values = DenseTensor::stack_last_mode(&slices)?;
    let imag_residual = if re_sq > 0.0 {
        (im_sq / re_sq).sqrt()
    } else {
        im_sq.sqrt()
    };
    Ok(TtDmdForecast {
        values,
        imag_residual,
    })
}

/// Model persistence: versioned little-endian binary container.
///
/// ```text
/// magic  b"GCTD"   version u8 = 1
/// dt f64, rank u64, p u64, order u64 (d+1), extents u64 × order
/// eigenvalues (re, im) f64 × p
/// mode tensor (re, im) f64 × ∏extents, colexicographic order
/// ```
pub mod io {
    use super::*;
    use std::fs::File;
    use std::io::{BufReader, BufWriter, Read, Write};
    use std::path::Path;

    pub const MAGIC: [u8; 4] = *b"GCTD";
    pub const VERSION: u8 = 1;

    #[derive(Debug, Error)]
    pub enum ModelIoError {
        #[error("io: {0}")]
        Io(#[from] std::io::Error),
        #[error("bad magic bytes; not a TT-DMD model file")]
        BadMagic,
        #[error("unsupported model file version {0}")]
        UnsupportedVersion(u8),
        #[error("corrupt model file: {0}")]
        Corrupt(String),
        #[error(transparent)]
        Tensor(#[from] TensorError),
    }

    pub fn write_model<W: Write>(mut w: W, model: &TtDmdModel) -> Result<(), ModelIoError> {
        w.write_all(&MAGIC)?;
        w.write_all(&[VERSION])?;
        w.write_all(&model.dt.to_le_bytes())?;
        w.write_all(&(model.rank as u64).to_le_bytes())?;
        w.write_all(&(model.eigenvalues.len() as u64).to_le_bytes())?;
        let shape = model.mode_tensor.shape();
        w.write_all(&(shape.len() as u64).to_le_bytes())?;
        for &n in shape {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for lam in model.eigenvalues.iter() {
            w.write_all(&lam.re.to_le_bytes())?;
            w.write_all(&lam.im.to_le_bytes())?;
        }
        for v in model.mode_tensor.vectorize().iter() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_model<R: Read>(mut r: R) -> Result<TtDmdModel, ModelIoError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(ModelIoError::BadMagic);
        }
        let mut version = [0u8; 1];
        r.read_exact(&mut version)?;
        if version[0] != VERSION {
            return Err(ModelIoError::UnsupportedVersion(version[0]));
        }
        let dt = f64::from_le_bytes(read_bytes(&mut r)?);
        let rank = u64::from_le_bytes(read_bytes(&mut r)?) as usize;
        let p = u64::from_le_bytes(read_bytes(&mut r)?) as usize;
        let order = u64::from_le_bytes(read_bytes(&mut r)?) as usize;
        if order < 2 || order > 64 {
            return Err(ModelIoError::Corrupt(format!("implausible order {order}")));
        }
        let mut shape = Vec::with_capacity(order);
        for _ in 0..order {
            shape.push(u64::from_le_bytes(read_bytes(&mut r)?) as usize);
        }
        if shape.last() != Some(&p) {
            return Err(ModelIoError::Corrupt(
                "mode count disagrees with tensor extents".into(),
            ));
        }
        let mut eigenvalues = Array1::zeros(p);
        for j in 0..p {
            let re = f64::from_le_bytes(read_bytes(&mut r)?);
            let im = f64::from_le_bytes(read_bytes(&mut r)?);
            eigenvalues[j] = Complex64::new(re, im);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let re = f64::from_le_bytes(read_bytes(&mut r)?);
            let im = f64::from_le_bytes(read_bytes(&mut r)?);
            data.push(Complex64::new(re, im));
        }
        let mode_tensor = ComplexTensor::from_colex(shape, data)?;
        let omega = eigenvalues.mapv(|l: Complex64| l.ln() / dt);
        Ok(TtDmdModel {
            mode_tensor,
            eigenvalues,
            omega,
            rank,
            dt,
            factors: None,
        })
    }

    pub fn save_model(path: &Path, model: &TtDmdModel) -> Result<(), ModelIoError> {
        let mut w = BufWriter::new(File::create(path)?);
        write_model(&mut w, model)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_model(path: &Path) -> Result<TtDmdModel, ModelIoError> {
        read_model(BufReader::new(File::open(path)?))
    }

    fn read_bytes<R: Read>(r: &mut R) -> Result<[u8; 8], ModelIoError> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn decaying_rank_one_series(steps: usize) -> DenseTensor {
        let field = DenseTensor::new(
            vec![2, 3],
            vec![1.0, -0.5, 2.0, 0.7, 1.3, -1.1],
        )
        .unwrap();
        let slices: Vec<DenseTensor> = (0..steps)
            .map(|t| {
                let mut s = field.clone();
                let scale = 0.8f64.powi(t as i32);
                s.data_mut().iter_mut().for_each(|v| *v *= scale);
                s
            })
            .collect();
        DenseTensor::stack_last_mode(&slices).unwrap()
    }

    #[test]
    fn snapshot_tensors_are_shifted() {
        let series = DenseTensor::new(vec![2, 2, 3], (0..12).map(f64::from).collect()).unwrap();
        let t = TtSnapshotTensors::from_series_tensor(&series, 1.0).unwrap();
        assert_eq!(t.x.shape(), &[2, 2, 2]);
        assert_eq!(t.y.shape(), &[2, 2, 2]);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(t.x.get(&[i, j, 0]), series.get(&[i, j, 0]));
                assert_eq!(t.x.get(&[i, j, 1]), series.get(&[i, j, 1]));
                assert_eq!(t.y.get(&[i, j, 0]), series.get(&[i, j, 1]));
                assert_eq!(t.y.get(&[i, j, 1]), series.get(&[i, j, 2]));
            }
        }
    }

    #[test]
    fn constant_field_gives_equal_tensors_and_unit_eigenvalue() {
        let slices: Vec<DenseTensor> =
            (0..5).map(|_| DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).collect();
        let series = DenseTensor::stack_last_mode(&slices).unwrap();
        let t = TtSnapshotTensors::from_series_tensor(&series, 1.0).unwrap();
        assert_eq!(t.x, t.y);
        let model = ttdmd_fit(&t, RankSpec::Fixed(4)).unwrap();
        let has_unit = model
            .eigenvalues
            .iter()
            .any(|l| (l - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert!(has_unit);
    }

    #[test]
    fn paper_scale_shapes() {
        let series = DenseTensor::zeros(vec![50, 94, 4]).unwrap();
        let mut series = series;
        series.data_mut()[0] = 1.0;
        let t = TtSnapshotTensors::from_series_tensor(&series, 1.0).unwrap();
        assert_eq!(t.x.shape(), &[50, 94, 3]);
        assert_eq!(t.y.shape(), &[50, 94, 3]);
    }

    #[test]
    fn rank_one_decay_recovered() {
        let series = decaying_rank_one_series(20);
        let t = TtSnapshotTensors::from_series_tensor(&series, 1.0).unwrap();
        let model = ttdmd_fit(&t, RankSpec::Fixed(6)).unwrap();
        // Data has rank 1; the σ floor collapses the model to one mode.
        assert_eq!(model.rank, 1);
        assert!((model.eigenvalues[0] - Complex64::new(0.8, 0.0)).norm() < 1e-8);
        assert!((model.omega[0].re - 0.8f64.ln()).abs() < 1e-8);

        let x0 = series.last_mode_slice(0);
        let fc = ttdmd_forecast(&model, &x0, 4).unwrap();
        for step in 1..=4 {
            let scale = 0.8f64.powi(step as i32);
            let slice = fc.values.last_mode_slice(step - 1);
            for i in 0..2 {
                for j in 0..3 {
                    let expected = scale * x0.get(&[i, j]);
                    assert!((slice.get(&[i, j]) - expected).abs() < 1e-8);
                }
            }
        }
        assert!(fc.imag_residual < 1e-6);
    }

    #[test]
    fn steady_mode_forecast_is_constant() {
        let field = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let slices: Vec<DenseTensor> = (0..6).map(|_| field.clone()).collect();
        let series = DenseTensor::stack_last_mode(&slices).unwrap();
        let t = TtSnapshotTensors::from_series_tensor(&series, 1.0).unwrap();
        let model = ttdmd_fit(&t, RankSpec::default()).unwrap();
        let fc = ttdmd_forecast(&model, &field, 3).unwrap();
        for step in 0..3 {
            let slice = fc.values.last_mode_slice(step);
            for (a, b) in slice.data().iter().zip(field.data()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matches_dense_dmd_on_random_linear_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n1, n2, m) = (3, 4, 25);
        let n = n1 * n2;
        let mut a = Array2::zeros((n, n));
        a.mapv_inplace(|_: f64| rng.gen_range(-1.0..1.0));
        let (eigs, _) = a.eig().unwrap();
        let radius = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max);
        a.mapv_inplace(|v| v * 0.9 / radius);

        // Evolve a vectorized field and fold each state back to (n1, n2).
        let mut z = Array1::from_iter((0..n).map(|_| rng.gen_range(-1.0..1.0)));
        let mut slices = Vec::with_capacity(m);
        for _ in 0..m {
            slices.push(DenseTensor::from_colex(vec![n1, n2], z.to_vec()).unwrap());
            z = a.dot(&z);
        }
        let series = DenseTensor::stack_last_mode(&slices).unwrap();

        let t = TtSnapshotTensors::from_series_tensor(&series, 1.0).unwrap();
        let tt_model = ttdmd_fit(&t, RankSpec::Fixed(n)).unwrap();

        let flat = series.matricize(2).unwrap().matrix;
        let pair = dmd::build_snapshot_pair(&flat.view(), 1.0).unwrap();
        let dense_model = dmd::dmd_fit(&pair, n.min(m - 1)).unwrap();

        assert_eq!(tt_model.eigenvalues.len(), dense_model.eigenvalues.len());
        for (a_ev, b_ev) in tt_model
            .eigenvalues
            .iter()
            .zip(dense_model.eigenvalues.iter())
        {
            assert!((a_ev - b_ev).norm() < 1e-8, "{a_ev} vs {b_ev}");
        }

        let x0 = series.last_mode_slice(m - 1);
        let steps = 10;
        let tt_fc = ttdmd_forecast(&tt_model, &x0, steps).unwrap();
        let dense_fc =
            dmd::dmd_forecast(&dense_model, &x0.vectorize().view(), steps).unwrap();
        let mut diff_sq = 0.0;
        let mut norm_sq = 0.0;
        for step in 0..steps {
            let slice = tt_fc.values.last_mode_slice(step);
            let v = slice.vectorize();
            for i in 0..n {
                let d = v[i] - dense_fc.values[[i, step]];
                diff_sq += d * d;
                norm_sq += dense_fc.values[[i, step]].powi(2);
            }
        }
        assert!((diff_sq / norm_sq).sqrt() < 1e-8);
    }

    #[test]
    fn mode_tensor_agrees_with_vectorized_mode_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let slices: Vec<DenseTensor> = {
            let mut field = DenseTensor::zeros(vec![3, 3]).unwrap();
            field
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-1.0..1.0));
            let mut out = Vec::new();
            let mut current = field;
            for _ in 0..12 {
                out.push(current.clone());
                // Mildly mixing update keeps the data full rank.
                let mut next = DenseTensor::zeros(vec![3, 3]).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        let rolled = current.get(&[(i + 1) % 3, j]) * 0.4
                            + current.get(&[i, (j + 2) % 3]) * 0.3
                            + current.get(&[i, j]) * 0.2;
                        next.set(&[i, j], rolled);
                    }
                }
                current = next;
            }
            out
        };
        let series = DenseTensor::stack_last_mode(&slices).unwrap();
        let t = TtSnapshotTensors::from_series_tensor(&series, 0.5).unwrap();
        let model = ttdmd_fit(&t, RankSpec::Fixed(9)).unwrap();
        let factors = model.factors.as_ref().unwrap();

        let phi_mat = model.mode_tensor.matricize(2).unwrap().matrix;
        let y_chain_c = factors.y_chain.mapv(|v| Complex64::new(v, 0.0));
        let g_c = factors.q_nt_sigma_inv.mapv(|v| Complex64::new(v, 0.0));
        for j in 0..model.eigenvalues.len() {
            let w_j = factors.eigvecs.column(j);
            let phi_j = y_chain_c.dot(&g_c.dot(&w_j)).mapv(|v| v / model.eigenvalues[j]);
            for i in 0..phi_j.len() {
                assert!((phi_mat[[i, j]] - phi_j[i]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn dead_dynamics_yield_empty_model_error() {
        let field = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, -1.0, 0.5]).unwrap();
        let zero = DenseTensor::zeros(vec![2, 2]).unwrap();
        let series =
            DenseTensor::stack_last_mode(&[field, zero.clone(), zero.clone(), zero]).unwrap();
        let t = TtSnapshotTensors::from_series_tensor(&series, 1.0).unwrap();
        assert!(matches!(
            ttdmd_fit(&t, RankSpec::Fixed(4)),
            Err(TtDmdError::EmptyModel)
        ));
    }

    #[test]
    fn forecast_shape_mismatch_rejected() {
        let series = decaying_rank_one_series(10);
        let t = TtSnapshotTensors::from_series_tensor(&series, 1.0).unwrap();
        let model = ttdmd_fit(&t, RankSpec::Fixed(2)).unwrap();
        let wrong = DenseTensor::zeros(vec![3, 2]).unwrap();
        assert!(matches!(
            ttdmd_forecast(&model, &wrong, 2),
            Err(TtDmdError::FieldMismatch { .. })
        ));
    }

    #[test]
    fn model_round_trips_through_binary_format() {
        let series = decaying_rank_one_series(15);
        let t = TtSnapshotTensors::from_series_tensor(&series, 2.0).unwrap();
        let model = ttdmd_fit(&t, RankSpec::Fixed(3)).unwrap();
        let mut buf = Vec::new();
        io::write_model(&mut buf, &model).unwrap();
        let restored = io::read_model(buf.as_slice()).unwrap();
        assert_eq!(restored.rank, model.rank);
        assert_eq!(restored.dt, model.dt);
        assert_eq!(restored.eigenvalues, model.eigenvalues);
        assert_eq!(restored.mode_tensor, model.mode_tensor);
        assert!(restored.factors.is_none());

        // A restored model forecasts identically.
        let x0 = series.last_mode_slice(14);
        let a = ttdmd_forecast(&model, &x0, 3).unwrap();
        let b = ttdmd_forecast(&restored, &x0, 3).unwrap();
        assert_eq!(a.values, b.values);
    }
}
