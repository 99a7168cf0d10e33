//! Minimal dense-array numerical backend with reverse-mode gradients.
//!
//! Everything is 2D and row-major. A [`Graph`] records one forward pass;
//! [`Graph::backward`] walks the tape in reverse and returns gradients for
//! every input that asked for them. Models run in `f32` for speed and in
//! `f64` for gradient checking; [`Scalar`] abstracts the two.

mod checkpoint;
pub mod gradcheck;
mod graph;
mod ops;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use graph::{Graph, Var};
pub use optim::{AdamW, OptimizerConfig};

use thiserror::Error;

/// Floating-point element type of the backend.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialOrd
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    const DTYPE: &'static str;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn maximum(self, o: Self) -> Self;
    fn is_finite(self) -> bool;
    fn write_le(self, out: &mut Vec<u8>);
    fn size_of() -> usize;
    fn read_le(bytes: &[u8]) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty, $name:literal) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            const DTYPE: &'static str = $name;
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn exp(self) -> Self {
                self.exp()
            }
            fn ln(self) -> Self {
                self.ln()
            }
            fn sqrt(self) -> Self {
                self.sqrt()
            }
            fn abs(self) -> Self {
                self.abs()
            }
            fn maximum(self, o: Self) -> Self {
                self.max(o)
            }
            fn is_finite(self) -> bool {
                self.is_finite()
            }
            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn size_of() -> usize {
                std::mem::size_of::<$t>()
            }
            fn read_le(bytes: &[u8]) -> Self {
                let mut buf = [0u8; std::mem::size_of::<$t>()];
                buf.copy_from_slice(&bytes[..std::mem::size_of::<$t>()]);
                <$t>::from_le_bytes(buf)
            }
        }
    };
}

impl_scalar!(f32, "f32");
impl_scalar!(f64, "f64");

/// Additive mask value standing in for negative infinity.
pub const NEG_LARGE: f64 = -1e9;

/// Dense row-major 2D array.
#[derive(Debug, Clone, PartialEq)]
pub struct Array<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Array<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::ZERO; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "shape mismatch in from_vec");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(T::from_f64(f(i, j)));
            }
        }
        Self { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_vec(1, 1, vec![T::from_f64(v)])
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on non-scalar array");
        self.data[0].to_f64()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T + Sync) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Convert elementwise through f64.
    pub fn cast<U: Scalar>(&self) -> Array<U> {
        Array {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

/// `C = op(A) . op(B)` with optional transposes; the workhorse kernel.
pub fn matmul<T: Scalar>(a: &Array<T>, b: &Array<T>, ta: bool, tb: bool) -> Array<T> {
    use rayon::prelude::*;
    let (m, ka) = if ta {
        (a.cols, a.rows)
    } else {
        (a.rows, a.cols)
    };
    let (kb, n) = if tb {
        (b.cols, b.rows)
    } else {
        (b.rows, b.cols)
    };
    assert_eq!(
        ka,
        kb,
        "matmul inner dimension mismatch: {:?} x {:?} (ta={ta}, tb={tb})",
        a.shape(),
        b.shape()
    );
    let k = ka;
    let mut out = Array::zeros(m, n);
    let work = m * n * k;
    let body = |i: usize, out_row: &mut [T]| match (ta, tb) {
        (false, false) => {
            let a_row = a.row(i);
            for (p, &av) in a_row.iter().enumerate() {
                let b_row = b.row(p);
                for (o, &bv) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += av * bv;
                }
            }
        }
        (false, true) => {
            let a_row = a.row(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                let b_row = b.row(j);
                let mut acc = T::ZERO;
                for (&av, &bv) in a_row.iter().zip(b_row.iter()) {
                    acc += av * bv;
                }
                *o = acc;
            }
        }
        (true, false) => {
            for p in 0..k {
                let av = a.get(p, i);
                let b_row = b.row(p);
                for (o, &bv) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += av * bv;
                }
            }
        }
        (true, true) => {
            for (j, o) in out_row.iter_mut().enumerate() {
                let mut acc = T::ZERO;
                for p in 0..k {
                    acc += a.get(p, i) * b.get(j, p);
                }
                *o = acc;
            }
        }
    };
    if work >= 1 << 15 {
        out.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| body(i, row));
    } else {
        for i in 0..m {
            let row = &mut out.data[i * n..(i + 1) * n];
            body(i, row);
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0:?} vs {1:?} in {2}")]
    Shape((usize, usize), (usize, usize), &'static str),
    #[error("non-finite gradient in parameter {0:?}; step rejected")]
    NonFiniteGrad(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_naive_all_transpose_combinations() {
        let a = Array::<f64>::from_fn(3, 4, |i, j| (i * 7 + j) as f64 * 0.25 - 1.0);
        let b = Array::<f64>::from_fn(4, 2, |i, j| (i * 3 + j) as f64 * 0.5 - 2.0);
        let c = matmul(&a, &b, false, false);
        for i in 0..3 {
            for j in 0..2 {
                let want: f64 = (0..4).map(|p| a.get(i, p) * b.get(p, j)).sum();
                assert!((c.get(i, j) - want).abs() < 1e-12);
            }
        }
        let bt = Array::<f64>::from_fn(2, 4, |i, j| b.get(j, i));
        let c2 = matmul(&a, &bt, false, true);
        assert_eq!(c, c2);
        let at = Array::<f64>::from_fn(4, 3, |i, j| a.get(j, i));
        let c3 = matmul(&at, &b, true, false);
        assert_eq!(c, c3);
        let c4 = matmul(&at, &bt, true, true);
        assert_eq!(c, c4);
    }

    #[test]
    fn repeated_parallel_matmul_is_bitwise_stable() {
        let a = Array::<f32>::from_fn(96, 96, |i, j| ((i * 31 + j * 17) % 13) as f64 * 0.1 - 0.6);
        let b = Array::<f32>::from_fn(96, 96, |i, j| ((i * 5 + j * 29) % 11) as f64 * 0.2 - 1.0);
        let first = matmul(&a, &b, false, false);
        let again = matmul(&a, &b, false, false);
        assert_eq!(first.data, again.data);
    }

    #[test]
    fn cast_round_trips_f32_values() {
        let a = Array::<f32>::from_fn(2, 2, |i, j| (i + j) as f64 * 0.5);
        let b: Array<f64> = a.cast();
        let c: Array<f32> = b.cast();
        assert_eq!(a, c);
    }
}
