//! Tensor-train decomposition and the core operations downstream models need.
//!
//! A d-way tensor `T ∈ ℝ^{n₁×…×n_d}` is factored into a chain of 3-way cores
//! `G_l ∈ ℝ^{r_{l-1}×n_l×r_l}` with `r₀ = r_d = 1`, so that
//!
//! `T(i₁,…,i_d) = G₁[:,i₁,:] · G₂[:,i₂,:] · … · G_d[:,i_d,:]`.
//!
//! [`tt_decompose`] runs TT-SVD: sequential SVDs of the colexicographic
//! unfoldings, truncating each step so the total reconstruction error stays
//! below `rel_tol · ‖T‖_F` when no rank cap binds. Cores produced from the
//! left SVD factors are left-orthogonal: the `(r_{l-1}·n_l) × r_l` unfolding
//! of each non-final core has orthonormal columns.

use ndarray::{s, Array2, Array3, ShapeBuilder};
use ndarray_linalg::{JobSvd, SVDDC, QR};

use super::{DenseTensor, TensorError};

/// Chain of 3-way cores representing a tensor in TT format.
#[derive(Debug, Clone)]
pub struct TensorTrain {
    cores: Vec<Array3<f64>>,
}

impl TensorTrain {
    /// Validates the core chain: boundary ranks 1, adjacent bond dimensions
    /// matching, no empty extents.
    pub fn new(cores: Vec<Array3<f64>>) -> Result<Self, TensorError> {
        if cores.is_empty() {
            return Err(TensorError::InvalidTrain("no cores".into()));
        }
        if cores[0].dim().0 != 1 {
            return Err(TensorError::InvalidTrain(format!(
                "first core has left rank {}, expected 1",
                cores[0].dim().0
            )));
        }
        if cores[cores.len() - 1].dim().2 != 1 {
            return Err(TensorError::InvalidTrain(format!(
                "last core has right rank {}, expected 1",
                cores[cores.len() - 1].dim().2
            )));
        }
        for (l, pair) in cores.windows(2).enumerate() {
            if pair[0].dim().2 != pair[1].dim().0 {
                return Err(TensorError::InvalidTrain(format!(
                    "bond mismatch between cores {} and {}: {} vs {}",
                    l,
                    l + 1,
                    pair[0].dim().2,
                    pair[1].dim().0
                )));
            }
        }
        if cores.iter().any(|c| c.dim().1 == 0) {
            return Err(TensorError::InvalidTrain("empty mode extent".into()));
        }
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[Array3<f64>] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    /// Bond dimensions `r₀ ..= r_d` (length d+1).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![self.cores[0].dim().0];
        r.extend(self.cores.iter().map(|c| c.dim().2));
        r
    }

    pub fn mode_extents(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim().1).collect()
    }
}

/// Rank limit applied during TT-SVD truncation.
#[derive(Debug, Clone, Default)]
pub enum RankCap {
    #[default]
    Unlimited,
    /// Same cap on every bond.
    Uniform(usize),
    /// One cap per interior bond `r₁ … r_{d-1}` (length d−1).
    PerBond(Vec<usize>),
}

impl RankCap {
    fn bond(&self, l: usize, order: usize) -> Result<Option<usize>, TensorError> {
        match self {
            RankCap::Unlimited => Ok(None),
            RankCap::Uniform(c) => {
                if *c == 0 {
                    return Err(TensorError::InvalidRankCap("cap must be >= 1".into()));
                }
                Ok(Some(*c))
            }
            RankCap::PerBond(caps) => {
                if caps.len() != order - 1 {
                    return Err(TensorError::InvalidRankCap(format!(
                        "expected {} caps for an order-{} tensor, got {}",
                        order - 1,
                        order,
                        caps.len()
                    )));
                }
                if caps.iter().any(|&c| c == 0) {
                    return Err(TensorError::InvalidRankCap("cap must be >= 1".into()));
                }
                Ok(Some(caps[l]))
            }
        }
    }
}

/// TT-SVD controls.
#[derive(Debug, Clone)]
pub struct TtOptions {
    /// Relative truncation tolerance; reconstruction error is kept below
    /// `rel_tol · ‖T‖_F` when no cap binds.
    pub rel_tol: f64,
    pub rank_cap: RankCap,
}

impl Default for TtOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            rank_cap: RankCap::Unlimited,
        }
    }
}

impl TtOptions {
    pub fn exact() -> Self {
        Self {
            rel_tol: 0.0,
            ..Self::default()
        }
    }

    pub fn with_uniform_cap(cap: usize) -> Self {
        Self {
            rank_cap: RankCap::Uniform(cap),
            ..Self::default()
        }
    }
}

/// TT-SVD: decomposes a dense tensor into TT format.
///
/// Truncation at each unfolding keeps a singular value if it is at least
/// `rel_tol · σ_max` of that unfolding, or if dropping it would push the
/// accumulated tail energy past the global `rel_tol · ‖T‖_F` budget; the
/// rank cap then applies on top. Non-finite inputs are rejected eagerly
/// because NaN silently poisons the SVD chain.
pub fn tt_decompose(t: &DenseTensor, opts: &TtOptions) -> Result<TensorTrain, TensorError> {
    if !t.is_finite() {
        return Err(TensorError::NonFinite);
    }
    if opts.rel_tol < 0.0 {
        return Err(TensorError::InvalidRankCap(
            "rel_tol must be non-negative".into(),
        ));
    }
    let d = t.order();
    let shape = t.shape().to_vec();
    if d == 1 {
        let core = Array3::from_shape_vec((1, shape[0], 1), t.data().to_vec())
            .expect("length checked by construction");
        return TensorTrain::new(vec![core]);
    }

    // Column-major flat buffer; TT-SVD regroups it for free at each step.
    let mut buf: Vec<f64> = t.vectorize().to_vec();
    let norm = t.frobenius_norm();
    let step_budget_sq = if opts.rel_tol > 0.0 {
        (opts.rel_tol * norm).powi(2) / (d - 1) as f64
    } else {
        0.0
    };

    let mut cores = Vec::with_capacity(d);
    let mut r_prev = 1usize;
    for l in 0..d - 1 {
        let n_l = shape[l];
        let rows = r_prev * n_l;
        let cols = buf.len() / rows;
        let a = Array2::from_shape_vec((rows, cols).f(), buf)
            .map_err(|e| TensorError::Linalg(e.to_string()))?;
        let (u, sigma, vt) = a
            .svddc(JobSvd::Some)
            .map_err(|e| TensorError::Linalg(format!("SVD at mode {l}: {e}")))?;
        let (u, vt) = (u.expect("requested U"), vt.expect("requested VT"));

        let r = truncation_rank(sigma.as_slice().unwrap(), opts.rel_tol, step_budget_sq)
            .min(opts.rank_cap.bond(l, d)?.unwrap_or(usize::MAX));

        let mut core = Array3::zeros((r_prev, n_l, r));
        for b in 0..r {
            for i in 0..n_l {
                for a_idx in 0..r_prev {
                    core[[a_idx, i, b]] = u[[a_idx + r_prev * i, b]];
                }
            }
        }
        cores.push(core);

        // Next buffer = Σ·Vᵀ flattened column-major; its rows regroup to
        // (r · n_{l+1}) at the next step without data movement.
        let mut next = Vec::with_capacity(r * cols);
        for j in 0..cols {
            for i in 0..r {
                next.push(sigma[i] * vt[[i, j]]);
            }
        }
        buf = next;
        r_prev = r;
    }

    let n_d = shape[d - 1];
    let mut last = Array3::zeros((r_prev, n_d, 1));
    for i in 0..n_d {
        for a_idx in 0..r_prev {
            last[[a_idx, i, 0]] = buf[a_idx + r_prev * i];
        }
    }
    cores.push(last);
    TensorTrain::new(cores)
}

/// Kept rank under the combined pointwise / tail-energy rule (at least 1).
fn truncation_rank(sigma: &[f64], rel_tol: f64, step_budget_sq: f64) -> usize {
    let k = sigma.len();
    if k == 0 {
        return 1;
    }
    let smax = sigma[0];
    if smax == 0.0 {
        return 1;
    }
    let threshold = rel_tol * smax;
    let r_point = sigma.iter().take_while(|&&s| s >= threshold).count();
    // Smallest r whose discarded tail energy fits the per-step budget.
    let mut tail = 0.0;
    let mut r_energy = k;
    for i in (0..k).rev() {
        tail += sigma[i] * sigma[i];
        if tail > step_budget_sq {
            break;
        }
        r_energy = i;
    }
    r_point.max(r_energy).clamp(1, k)
}

/// Contracts a TT back into a dense tensor.
pub fn tt_reconstruct(tt: &TensorTrain) -> DenseTensor {
    let extents = tt.mode_extents();
    let acc = chain_unfold(tt.cores());
    debug_assert_eq!(acc.ncols(), 1);
    DenseTensor::from_colex(extents, acc.column(0).to_vec())
        .expect("chain unfolding yields consistent length")
}

/// Dense unfolding of a leading core chain: the `(∏ n_l) × r_last` matrix
/// whose rows are colexicographic over the chain's mode indices.
pub(crate) fn chain_unfold<T: ndarray::LinalgScalar>(cores: &[Array3<T>]) -> Array2<T> {
    let (_, n0, r0) = cores[0].dim();
    let mut acc = Array2::zeros((n0, r0));
    for i in 0..n0 {
        for b in 0..r0 {
            acc[[i, b]] = cores[0][[0, i, b]];
        }
    }
    for core in &cores[1..] {
        let (r_in, n, r_out) = core.dim();
        debug_assert_eq!(acc.ncols(), r_in);
        let p = acc.nrows();
        let mut next = Array2::zeros((p * n, r_out));
        for i in 0..n {
            let slice = core.slice(s![.., i, ..]);
            let block = acc.dot(&slice);
            next.slice_mut(s![p * i..p * (i + 1), ..]).assign(&block);
        }
        acc = next;
    }
    acc
}

/// `MᵀP` sweep over two equal-extent core chains; see [`tt_contract_pair`].
pub(crate) fn contract_chain(x: &[Array3<f64>], y: &[Array3<f64>]) -> Array2<f64> {
    let mut phi = Array2::from_elem((1, 1), 1.0);
    for (xc, yc) in x.iter().zip(y) {
        debug_assert_eq!(xc.dim().1, yc.dim().1);
        let n = xc.dim().1;
        let mut next = Array2::zeros((xc.dim().2, yc.dim().2));
        for i in 0..n {
            let xs = xc.slice(s![.., i, ..]);
            let ys = yc.slice(s![.., i, ..]);
            next = next + xs.t().dot(&phi).dot(&ys);
        }
        phi = next;
    }
    phi
}

/// Re-expresses a train with left-orthogonal non-final cores via a QR sweep.
/// The represented tensor is unchanged up to roundoff.
pub fn left_orthogonalize(tt: &TensorTrain) -> Result<TensorTrain, TensorError> {
    let mut cores = tt.cores().to_vec();
    let d = cores.len();
    for l in 0..d.saturating_sub(1) {
        let (r_in, n, r_out) = cores[l].dim();
        let mut mat = Array2::zeros((r_in * n, r_out));
        for b in 0..r_out {
            for i in 0..n {
                for a in 0..r_in {
                    mat[[a + r_in * i, b]] = cores[l][[a, i, b]];
                }
            }
        }
        let (q, r) = mat
            .qr()
            .map_err(|e| TensorError::Linalg(format!("QR at core {l}: {e}")))?;
        let k = q.ncols();
        let mut new_core = Array3::zeros((r_in, n, k));
        for b in 0..k {
            for i in 0..n {
                for a in 0..r_in {
                    new_core[[a, i, b]] = q[[a + r_in * i, b]];
                }
            }
        }
        cores[l] = new_core;

        let (next_in, next_n, next_out) = cores[l + 1].dim();
        debug_assert_eq!(next_in, r_out);
        let next_mat = cores[l + 1]
            .to_owned()
            .into_shape_with_order((next_in, next_n * next_out))
            .expect("standard layout reshape");
        let absorbed = r.dot(&next_mat);
        cores[l + 1] = absorbed
            .into_shape_with_order((k, next_n, next_out))
            .expect("dimensions agree by construction");
    }
    TensorTrain::new(cores)
}

/// Contracts the leading `n_modes` cores of two trains over their shared
/// mode indices, producing the `r_{n_modes}^x × r_{n_modes}^y` matrix
///
/// `(MᵀP)_{a,b} = Σ_{i₁…i_k} M[(i₁…i_k), a] · P[(i₁…i_k), b]`
///
/// without ever materializing the `∏ n_l`-row unfoldings. Cost is polynomial
/// in the bond dimensions and mode sizes.
pub fn tt_contract_pair(
    x: &TensorTrain,
    y: &TensorTrain,
    n_modes: usize,
) -> Result<Array2<f64>, TensorError> {
    if n_modes == 0 || n_modes > x.order() || n_modes > y.order() {
        return Err(TensorError::InvalidTrain(format!(
            "cannot contract {} leading modes of trains with orders {} and {}",
            n_modes,
            x.order(),
            y.order()
        )));
    }
    let ex = &x.mode_extents()[..n_modes];
    let ey = &y.mode_extents()[..n_modes];
    if ex != ey {
        return Err(TensorError::ModeMismatch(ex.to_vec(), ey.to_vec()));
    }
    Ok(contract_chain(&x.cores()[..n_modes], &y.cores()[..n_modes]))
}
