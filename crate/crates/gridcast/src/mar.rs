//! First-order matrix autoregression `X_t = A X_{t-1} Bᵀ + E_t`, fit by
//! alternating least squares.
//!
//! Each sweep solves the two closed-form subproblems of
//! `min ½ Σ_t ‖X_t − A X_{t-1} Bᵀ‖²_F` exactly:
//!
//! `A ← (Σ X_t B X_{t-1}ᵀ)(Σ X_{t-1} BᵀB X_{t-1}ᵀ)⁻¹`
//! `B ← (Σ X_tᵀ A X_{t-1})(Σ X_{t-1}ᵀ AᵀA X_{t-1})⁻¹`
//!
//! so the recorded loss history is non-increasing. The Gram systems are
//! solved through a Cholesky factorization rather than explicit inverses; an
//! optional ridge term keeps them positive definite on rank-deficient
//! fields. `A` and `B` are only identifiable up to a reciprocal scaling
//! `(cA, B/c)` — predictions are invariant to it.

use ndarray::{Array1, Array2};
use ndarray_linalg::{FactorizeC, SolveC, UPLO};
use thiserror::Error;

use crate::tensor::DenseTensor;

#[derive(Debug, Error)]
pub enum MarError {
    #[error("need a (M, N, T) series tensor, got shape {0:?}")]
    BadShape(Vec<usize>),
    #[error("need at least 2 time steps, got {0}")]
    TooFewSteps(usize),
    #[error("singular Gram matrix in the {side} update at sweep {iteration}; consider the ridge option")]
    SingularGram { side: &'static str, iteration: usize },
    #[error("field shape {actual:?} does not match model ({m}, {n})")]
    FieldMismatch {
        actual: Vec<usize>,
        m: usize,
        n: usize,
    },
    #[error("steps must be >= 1")]
    ZeroSteps,
    #[error("series contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarInit {
    /// Identity coefficient matrices; the loss is well defined at sweep 0.
    Identity,
    /// Seeded standard-normal entries scaled by 1/√dim.
    Random { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct MarOptions {
    pub max_iters: usize,
    /// Stop when the relative loss change over one sweep drops below this.
    pub rel_tol: f64,
    pub init: MarInit,
    /// Ridge term added to each Gram matrix before factorization.
    pub ridge: f64,
}

impl Default for MarOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-10,
            init: MarInit::Identity,
            ridge: 0.0,
        }
    }
}

/// Fitted MAR(1) coefficients with per-sweep objective values.
#[derive(Debug, Clone)]
pub struct MarModel {
    /// Row-space coefficients, `M × M`.
    pub a: Array2<f64>,
    /// Column-space coefficients, `N × N`.
    pub b: Array2<f64>,
    /// Objective after each full sweep, starting with the initial matrices.
    pub loss_history: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Residual energy below this fraction of the data energy counts as the
/// numerical floor (machine-precision residuals squared).
const LOSS_FLOOR_FRACTION: f64 = 1e-28;

/// Loss of the all-zero model, `½ Σ_{t≥2} ‖X_t‖²_F`; the scale the floor is
/// measured against.
fn data_scale(slices: &[Array2<f64>]) -> f64 {
    0.5 * slices[1..]
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
}

pub fn mar_fit_als(series: &DenseTensor, opts: &MarOptions) -> Result<MarModel, MarError> {
    let slices = series_slices(series)?;
    let (m, n) = (slices[0].nrows(), slices[0].ncols());

    let (a, b) = match opts.init {
        MarInit::Identity => (Array2::eye(m), Array2::eye(n)),
        MarInit::Random { seed } => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut fill = |dim: usize| {
                let scale = 1.0 / (dim as f64).sqrt();
                Array2::from_shape_fn((dim, dim), |_| rng.gen_range(-1.0..1.0) * scale)
            };
            (fill(m), fill(n))
        }
    };
    let floor = LOSS_FLOOR_FRACTION * data_scale(&slices);
    sweep_from(a, b, &slices, opts, floor)
}

/// ALS is only guaranteed to reach a stationary point; identity init stalls
/// on some noiseless instances. This explores identity plus seeded random
/// starts for a few hundred sweeps each, then polishes the best two
/// candidates with the full iteration budget and returns the lowest-loss
/// model.
pub fn mar_fit_multi_start(
    series: &DenseTensor,
    opts: &MarOptions,
    random_restarts: usize,
) -> Result<MarModel, MarError> {
    let slices = series_slices(series)?;
    let floor = LOSS_FLOOR_FRACTION * data_scale(&slices);
    let explore_opts = MarOptions {
        max_iters: opts.max_iters.min(150),
        ..opts.clone()
    };
    let mut inits = vec![MarInit::Identity];
    inits.extend((1..=random_restarts as u64).map(|seed| MarInit::Random { seed }));

    let mut candidates = Vec::with_capacity(inits.len());
    for init in inits {
        let model = mar_fit_als(
            series,
            &MarOptions {
                init,
                ..explore_opts.clone()
            },
        )?;
        let floored = model.converged && model.final_loss() <= floor;
        candidates.push(model);
        if floored {
            break;
        }
    }
    candidates.sort_by(|x, y| {
        let (lx, ly) = (x.final_loss(), y.final_loss());
        lx.partial_cmp(&ly).expect("losses are finite")
    });
    candidates.truncate(2);

    let mut best: Option<MarModel> = None;
    for candidate in candidates {
        let polished = if candidate.converged && candidate.final_loss() <= floor {
            candidate
        } else {
            let mut continued = sweep_from(
                candidate.a.clone(),
                candidate.b.clone(),
                &slices,
                opts,
                floor,
            )?;
            let mut history = candidate.loss_history.clone();
            history.pop();
            history.extend(continued.loss_history.iter().copied());
            continued.iterations_run += candidate.iterations_run;
            continued.loss_history = history;
            continued
        };
        let better = best
            .as_ref()
            .map(|b| polished.final_loss() < b.final_loss())
            .unwrap_or(true);
        if better {
            best = Some(polished);
        }
        if best
            .as_ref()
            .is_some_and(|b| b.converged && b.final_loss() <= floor)
        {
            break;
        }
    }
    Ok(best.expect("at least one candidate"))
}

impl MarModel {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history is never empty")
    }
}

fn sweep_from(
    mut a: Array2<f64>,
    mut b: Array2<f64>,
    slices: &[Array2<f64>],
    opts: &MarOptions,
    floor: f64,
) -> Result<MarModel, MarError> {
    let mut loss_history = vec![objective(&a, &b, slices)];
    let mut converged = loss_history[0] == 0.0;
    let mut iterations_run = 0;
    if !converged {
        for sweep in 1..=opts.max_iters {
            let (before_a, before_b) = (a.clone(), b.clone());
            a = solve_a(&b, slices, opts.ridge).ok_or(MarError::SingularGram {
                side: "A",
                iteration: sweep,
            })?;
            b = solve_b(&a, slices, opts.ridge).ok_or(MarError::SingularGram {
                side: "B",
                iteration: sweep,
            })?;
            let mut loss = objective(&a, &b, slices);
            let previous = *loss_history.last().expect("non-empty");

            // Safeguarded Aitken extrapolation along the sweep direction:
            // the ALS tail contracts linearly, so jumping by ρ/(1−ρ) of the
            // last step often removes it. Only accepted when the objective
            // actually drops, keeping the recorded history monotone.
            if sweep >= 2 && previous > 0.0 && loss > floor {
                let ratio = loss / previous;
                if ratio > 0.25 && ratio < 1.0 {
                    let rho = ratio.sqrt();
                    let gain = (rho / (1.0 - rho)).min(1e8);
                    let cand_a = &a + &((&a - &before_a) * gain);
                    let cand_b = &b + &((&b - &before_b) * gain);
                    let cand_loss = objective(&cand_a, &cand_b, slices);
                    if cand_loss.is_finite() && cand_loss < loss {
                        a = cand_a;
                        b = cand_b;
                        loss = cand_loss;
                    }
                }
            }

            loss_history.push(loss);
            iterations_run = sweep;
            if previous == 0.0
                || loss <= floor
                || (previous - loss).abs() <= opts.rel_tol * previous.max(f64::MIN_POSITIVE)
            {
                converged = true;
                break;
            }
        }
    }

    Ok(MarModel {
        a,
        b,
        loss_history,
        iterations_run,
        converged,
    })
}

/// `½ Σ_{t=2}^{T} ‖X_t − A X_{t-1} Bᵀ‖²_F` for an existing model.
pub fn mar_loss(model: &MarModel, series: &DenseTensor) -> Result<f64, MarError> {
    let slices = series_slices(series)?;
    Ok(objective(&model.a, &model.b, &slices))
}

/// Recursive multi-step prediction: slice 1 is `A·x_last·Bᵀ`, each further
/// slice applies the model to the previous one.
pub fn mar_predict(
    model: &MarModel,
    x_last: &DenseTensor,
    steps: usize,
) -> Result<DenseTensor, MarError> {
    if steps == 0 {
        return Err(MarError::ZeroSteps);
    }
    let (m, n) = (model.a.nrows(), model.b.nrows());
    if x_last.shape() != [m, n] {
        return Err(MarError::FieldMismatch {
            actual: x_last.shape().to_vec(),
            m,
            n,
        });
    }
    let mut current = to_matrix(x_last);
    let mut slices = Vec::with_capacity(steps);
    for _ in 0..steps {
        current = model.a.dot(&current).dot(&model.b.t());
        slices.push(from_matrix(&current));
    }
    Ok(DenseTensor::stack_last_mode(&slices).expect("slices share shape"))
}

fn series_slices(series: &DenseTensor) -> Result<Vec<Array2<f64>>, MarError> {
    if series.order() != 3 {
        return Err(MarError::BadShape(series.shape().to_vec()));
    }
    if !series.is_finite() {
        return Err(MarError::NonFinite);
    }
    let t_len = series.shape()[2];
    if t_len < 2 {
        return Err(MarError::TooFewSteps(t_len));
    }
    Ok((0..t_len)
        .map(|t| to_matrix(&series.last_mode_slice(t)))
        .collect())
}

fn to_matrix(field: &DenseTensor) -> Array2<f64> {
    Array2::from_shape_vec(
        (field.shape()[0], field.shape()[1]),
        field.data().to_vec(),
    )
    .expect("row-major layout")
}

fn from_matrix(m: &Array2<f64>) -> DenseTensor {
    DenseTensor::new(
        vec![m.nrows(), m.ncols()],
        m.iter().copied().collect(),
    )
    .expect("matrix is dense")
}

fn objective(a: &Array2<f64>, b: &Array2<f64>, slices: &[Array2<f64>]) -> f64 {
    let mut total = 0.0;
    for t in 1..slices.len() {
        let residual = &slices[t] - &a.dot(&slices[t - 1]).dot(&b.t());
        total += residual.iter().map(|v| v * v).sum::<f64>();
    }
    0.5 * total
}

fn solve_a(b: &Array2<f64>, slices: &[Array2<f64>], ridge: f64) -> Option<Array2<f64>> {
    let m = slices[0].nrows();
    let mut cross = Array2::zeros((m, m));
    let mut gram = Array2::zeros((m, m));
    for t in 1..slices.len() {
        let prev_b = slices[t - 1].dot(&b.t());
        cross = cross + slices[t].dot(&prev_b.t());
        gram = gram + prev_b.dot(&prev_b.t());
    }
    solve_transposed(&gram, &cross, ridge)
}

fn solve_b(a: &Array2<f64>, slices: &[Array2<f64>], ridge: f64) -> Option<Array2<f64>> {
    let n = slices[0].ncols();
    let mut cross = Array2::zeros((n, n));
    let mut gram = Array2::zeros((n, n));
    for t in 1..slices.len() {
        let a_prev = a.dot(&slices[t - 1]);
        cross = cross + slices[t].t().dot(&a_prev);
        gram = gram + a_prev.t().dot(&a_prev);
    }
    solve_transposed(&gram, &cross, ridge)
}

/// Solves `Z·G = C` for `Z` with `G` symmetric positive definite, i.e.
/// `G·Zᵀ = Cᵀ` column by column through one Cholesky factorization.
fn solve_transposed(gram: &Array2<f64>, cross: &Array2<f64>, ridge: f64) -> Option<Array2<f64>> {
    let dim = gram.nrows();
    let mut regularized = gram.clone();
    if ridge > 0.0 {
        for i in 0..dim {
            regularized[[i, i]] += ridge;
        }
    }
    let factor = regularized.factorizec(UPLO::Lower).ok()?;
    let mut out = Array2::zeros((cross.nrows(), dim));
    for row in 0..cross.nrows() {
        let rhs: Array1<f64> = cross.row(row).to_owned();
        let solution = factor.solvec(&rhs).ok()?;
        if solution.iter().any(|v| !v.is_finite()) {
            return None;
        }
        out.row_mut(row).assign(&solution);
    }
    Some(out)
}

/// Model persistence: `magic b"GCMR", version u8 = 1, M u64, N u64`, then
/// `A` and `B` as row-major little-endian f64.
pub mod io {
    use super::*;
    use std::fs::File;
    use std::io::{BufReader, BufWriter, Read, Write};
    use std::path::Path;

    pub const MAGIC: [u8; 4] = *b"GCMR";
    pub const VERSION: u8 = 1;

    #[derive(Debug, Error)]
    pub enum MarIoError {
        #[error("io: {0}")]
        Io(#[from] std::io::Error),
        #[error("bad magic bytes; not a MAR model file")]
        BadMagic,
        #[error("unsupported MAR model version {0}")]
        UnsupportedVersion(u8),
        #[error("corrupt MAR model file: {0}")]
        Corrupt(String),
    }

    pub fn write_model<W: Write>(mut w: W, model: &MarModel) -> Result<(), MarIoError> {
        w.write_all(&MAGIC)?;
        w.write_all(&[VERSION])?;
        w.write_all(&(model.a.nrows() as u64).to_le_bytes())?;
        w.write_all(&(model.b.nrows() as u64).to_le_bytes())?;
        for &v in model.a.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in model.b.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_model<R: Read>(mut r: R) -> Result<MarModel, MarIoError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(MarIoError::BadMagic);
        }
        let mut version = [0u8; 1];
        r.read_exact(&mut version)?;
        if version[0] != VERSION {
            return Err(MarIoError::UnsupportedVersion(version[0]));
        }
        let m = read_u64(&mut r)? as usize;
        let n = read_u64(&mut r)? as usize;
        if m == 0 || n == 0 || m > (1 << 20) || n > (1 << 20) {
            return Err(MarIoError::Corrupt(format!("implausible dims {m}×{n}")));
        }
        let a = read_matrix(&mut r, m)?;
        let b = read_matrix(&mut r, n)?;
        Ok(MarModel {
            a,
            b,
            loss_history: vec![],
            iterations_run: 0,
            converged: false,
        })
    }

    pub fn save_model(path: &Path, model: &MarModel) -> Result<(), MarIoError> {
        let mut w = BufWriter::new(File::create(path)?);
        write_model(&mut w, model)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_model(path: &Path) -> Result<MarModel, MarIoError> {
        read_model(BufReader::new(File::open(path)?))
    }

    fn read_u64<R: Read>(r: &mut R) -> Result<u64, MarIoError> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        Ok(u64::from_le_bytes(buf))
    }

    fn read_matrix<R: Read>(r: &mut R, dim: usize) -> Result<Array2<f64>, MarIoError> {
        let mut data = Vec::with_capacity(dim * dim);
        let mut buf = [0u8; 8];
        for _ in 0..dim * dim {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        Array2::from_shape_vec((dim, dim), data).map_err(|e| MarIoError::Corrupt(e.to_string()))
    }
}
