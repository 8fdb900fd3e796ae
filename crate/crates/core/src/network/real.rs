//! Scalar abstraction so the same network code runs in `f32` (training,
//! inference) and `f64` (gradient checking).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Sub};

pub trait Real:
    Copy
    + Send
    + Sync
    + Debug
    + Default
    + PartialOrd
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + 'static
{
    const ZERO: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `C = A·B + beta·C` for row/column-strided matrices. `beta` is 0 or 1.
    ///
    /// # Safety
    /// The pointers and strides must describe valid, non-overlapping
    /// `m x k`, `k x n` and `m x n` matrices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    const ZERO: Self = 0.0;

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Storage order of a matrix operand held in a flat slice.
#[derive(Clone, Copy)]
pub(crate) enum Order {
    /// Stored row-major with the given logical shape.
    RowMajor,
    /// Logical transpose of a row-major buffer.
    Transposed,
}

/// `C (m x n) = op(A) (m x k) · op(B) (k x n) [+ C]`, all buffers row-major
/// underneath.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_order: Order,
    b: &[T],
    b_order: Order,
    c: &mut [T],
    accumulate: bool,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = match a_order {
        Order::RowMajor => (k as isize, 1),
        Order::Transposed => (1, m as isize),
    };
    let (rsb, csb) = match b_order {
        Order::RowMajor => (n as isize, 1),
        Order::Transposed => (1, k as isize),
    };
    let beta = if accumulate { T::from_f64(1.0) } else { T::ZERO };
    // SAFETY: lengths checked above; strides describe in-bounds row-major
    // (or transposed row-major) layouts of exactly those shapes.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_orders() {
        // A = [[1,2,3],[4,5,6]], B = [[1,0],[0,1],[1,1]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0f64; 4];
        gemm(2, 3, 2, &a, Order::RowMajor, &b, Order::RowMajor, &mut c, false);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);

        // Aᵀ·A with A stored as 2x3: result 3x3.
        let mut c = [0.0f64; 9];
        gemm(3, 2, 3, &a, Order::Transposed, &a, Order::RowMajor, &mut c, false);
        assert_eq!(c, [17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);

        // A·Bᵀ where B holds a 2x3 matrix: A (2x3) · (2x3)ᵀ.
        let mut c = [1.0f64; 4];
        gemm(2, 3, 2, &a, Order::RowMajor, &a, Order::Transposed, &mut c, true);
        assert_eq!(c, [15.0, 33.0, 33.0, 78.0]);
    }
}
