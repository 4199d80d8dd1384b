//! Dense tensor container and the linearization conventions shared by the
//! whole crate.
//!
//! A [`Tensor`] is a d-way array (`d ≥ 1`) stored row-major. Flattened views
//! of it — [`Tensor::vectorize`], [`Tensor::matricize`] and the binary file
//! format in [`io`] — order multi-indices colexicographically (first index
//! fastest): `pos(i₁, …, i_d) = i₁ + n₁·(i₂ + n₂·(…))`. Matricization at
//! split `k` linearizes `(i₁…i_k)` into the row index and `(i_{k+1}…i_d)`
//! into the column index, each with that same order, so vectorization is
//! matricization with an empty column group.

mod train;

pub mod io;

pub use train::{
    left_orthogonalize, tt_contract_pair, tt_decompose, tt_reconstruct, RankCap, TensorTrain,
    TtOptions,
};

pub(crate) use train::{chain_unfold, contract_chain};

use ndarray::{Array1, Array2, ArrayD};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("data length {actual} does not match shape product {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid shape {0:?}: extents must all be >= 1 and order >= 1")]
    InvalidShape(Vec<usize>),
    #[error("split index {split} out of range 1..={max} for order-{order} tensor")]
    SplitOutOfRange {
        split: usize,
        max: usize,
        order: usize,
    },
    #[error("tensor contains non-finite values")]
    NonFinite,
    #[error("invalid tensor-train: {0}")]
    InvalidTrain(String),
    #[error("invalid rank cap: {0}")]
    InvalidRankCap(String),
    #[error("mode extents differ: {0:?} vs {1:?}")]
    ModeMismatch(Vec<usize>, Vec<usize>),
    #[error("linear algebra kernel failed: {0}")]
    Linalg(String),
}

/// Dense d-way array with row-major storage.
///
/// Immutable by convention after construction; all operations in this crate
/// take it by reference and return fresh values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// Real-valued tensor, the workhorse element type.
pub type DenseTensor = Tensor<f64>;

/// Complex-valued tensor; used for DMD mode tensors.
pub type ComplexTensor = Tensor<Complex64>;

impl<T: Copy + Default> Tensor<T> {
    /// Builds a tensor from a shape and row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, TensorError> {
        if shape.is_empty() || shape.iter().any(|&n| n == 0) {
            return Err(TensorError::InvalidShape(shape));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self, TensorError> {
        let len: usize = shape.iter().product();
        Self::new(shape, vec![T::default(); len])
    }

    /// Builds a tensor from data in the colexicographic (first-index-fastest)
    /// order, the inverse of [`Tensor::vectorize`].
    pub fn from_colex(shape: Vec<usize>, colex: Vec<T>) -> Result<Self, TensorError> {
        let mut t = Self::zeros(shape)?;
        if colex.len() != t.data.len() {
            return Err(TensorError::LengthMismatch {
                expected: t.data.len(),
                actual: colex.len(),
            });
        }
        for (row_pos, value) in ColexToRowMajor::new(&t.shape).zip(colex) {
            t.data[row_pos] = value;
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of modes d.
    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major backing data.
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.row_major_pos(index)]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let pos = self.row_major_pos(index);
        self.data[pos] = value;
    }

    fn row_major_pos(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut pos = 0;
        for (i, n) in index.iter().zip(&self.shape) {
            debug_assert!(i < n);
            pos = pos * n + i;
        }
        pos
    }

    /// Flattens into the global colexicographic order.
    pub fn vectorize(&self) -> Array1<T> {
        let mut out = vec![T::default(); self.data.len()];
        for (colex_pos, row_pos) in ColexToRowMajor::new(&self.shape).enumerate() {
            out[colex_pos] = self.data[row_pos];
        }
        Array1::from_vec(out)
    }

    /// Unfolds into a `(n₁⋯n_k) × (n_{k+1}⋯n_d)` matrix at split `k`
    /// (`1 ≤ k ≤ d−1`), both axes in colexicographic order.
    pub fn matricize(&self, split: usize) -> Result<SplitMatricization<T>, TensorError> {
        let d = self.order();
        if split == 0 || split >= d {
            return Err(TensorError::SplitOutOfRange {
                split,
                max: d.saturating_sub(1),
                order: d,
            });
        }
        let rows: usize = self.shape[..split].iter().product();
        let cols: usize = self.shape[split..].iter().product();
        let mut matrix = Array2::default((rows, cols));
        // Colex order over the full index tuple walks the row index fastest.
        for (flat, row_pos) in ColexToRowMajor::new(&self.shape).enumerate() {
            matrix[(flat % rows, flat / rows)] = self.data[row_pos];
        }
        Ok(SplitMatricization {
            matrix,
            split_index: split,
            original_shape: self.shape.clone(),
        })
    }

    /// Slice with the last mode fixed at `index`, e.g. one time step of a
    /// `(M, N, T)` series.
    pub fn last_mode_slice(&self, index: usize) -> Tensor<T> {
        let d = self.order();
        assert!(d >= 2, "slicing requires order >= 2");
        assert!(index < self.shape[d - 1]);
        let inner_shape = self.shape[..d - 1].to_vec();
        let inner_len: usize = inner_shape.iter().product();
        let mut data = vec![T::default(); inner_len];
        let last = self.shape[d - 1];
        for (i, out) in data.iter_mut().enumerate() {
            *out = self.data[i * last + index];
        }
        Tensor {
            shape: inner_shape,
            data,
        }
    }

    /// Stacks order-(d−1) slices along a new trailing mode.
    pub fn stack_last_mode(slices: &[Tensor<T>]) -> Result<Tensor<T>, TensorError> {
        let first = slices
            .first()
            .ok_or_else(|| TensorError::InvalidShape(vec![]))?;
        let inner = first.shape.clone();
        for s in slices {
            if s.shape != inner {
                return Err(TensorError::ModeMismatch(inner, s.shape.clone()));
            }
        }
        let mut shape = inner;
        shape.push(slices.len());
        let mut t = Tensor::zeros(shape)?;
        let k = slices.len();
        for (j, s) in slices.iter().enumerate() {
            for (i, &v) in s.data.iter().enumerate() {
                t.data[i * k + j] = v;
            }
        }
        Ok(t)
    }
}

impl DenseTensor {
    pub fn from_array(a: &ArrayD<f64>) -> Result<Self, TensorError> {
        let standard = a.as_standard_layout();
        Self::new(a.shape().to_vec(), standard.iter().copied().collect())
    }

    pub fn to_array(&self) -> ArrayD<f64> {
        ArrayD::from_shape_vec(self.shape.clone(), self.data.clone())
            .expect("shape/data consistency is a construction invariant")
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl ComplexTensor {
    /// Real part, elementwise.
    pub fn real(&self) -> DenseTensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|c| c.re).collect(),
        }
    }

    /// Frobenius norm of the imaginary part.
    pub fn imag_norm(&self) -> f64 {
        self.data.iter().map(|c| c.im * c.im).sum::<f64>().sqrt()
    }
}

/// A tensor unfolded at one split, retaining what is needed to fold back.
#[derive(Debug, Clone)]
pub struct SplitMatricization<T> {
    pub matrix: Array2<T>,
    pub split_index: usize,
    pub original_shape: Vec<usize>,
}

impl<T: Copy + Default> SplitMatricization<T> {
    /// Inverse of [`Tensor::matricize`]; bit-exact round trip.
    pub fn fold(&self) -> Tensor<T> {
        let rows = self.matrix.nrows();
        let mut colex = Vec::with_capacity(self.matrix.len());
        for flat in 0..self.matrix.len() {
            colex.push(self.matrix[(flat % rows, flat / rows)]);
        }
        Tensor::from_colex(self.original_shape.clone(), colex)
            .expect("matricization retains a valid shape")
    }
}

/// Walks all multi-indices of `shape` in colexicographic order, yielding the
/// row-major offset of each.
struct ColexToRowMajor {
    row_strides: Vec<usize>,
    shape: Vec<usize>,
    index: Vec<usize>,
    remaining: usize,
}

impl ColexToRowMajor {
    fn new(shape: &[usize]) -> Self {
        let mut row_strides = vec![1usize; shape.len()];
        for l in (0..shape.len().saturating_sub(1)).rev() {
            row_strides[l] = row_strides[l + 1] * shape[l + 1];
        }
        Self {
            row_strides,
            shape: shape.to_vec(),
            index: vec![0; shape.len()],
            remaining: shape.iter().product(),
        }
    }
}

impl Iterator for ColexToRowMajor {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let pos = self
            .index
            .iter()
            .zip(&self.row_strides)
            .map(|(i, s)| i * s)
            .sum();
        // Colex increment: bump the first index, carrying rightward.
        for l in 0..self.shape.len() {
            self.index[l] += 1;
            if self.index[l] < self.shape[l] {
                break;
            }
            self.index[l] = 0;
        }
        Some(pos)
    }
}
