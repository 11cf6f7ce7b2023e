//! Dense kernels shared by contraction and network evaluation.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;

/// `out[i, j] = Σ_s a[i, s] · b[s, j]`, skipping zero entries of `a`.
pub(crate) fn matmul<S: Scalar>(a: &[S], b: &[S], rows: usize, inner: usize, cols: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), rows * inner);
    debug_assert_eq!(b.len(), inner * cols);
    let mut out = vec![S::zero(); rows * cols];
    for i in 0..rows {
        let row = &mut out[i * cols..(i + 1) * cols];
        for s in 0..inner {
            let x = &a[i * inner + s];
            if x.is_zero() {
                continue;
            }
            let brow = &b[s * cols..(s + 1) * cols];
            for (o, y) in row.iter_mut().zip(brow) {
                o.add_product(x, y);
            }
        }
    }
    out
}

/// Transpose of a `rows × cols` row-major matrix.
pub(crate) fn transpose<S: Scalar>(a: &[S], rows: usize, cols: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(a.len());
    for j in 0..cols {
        for i in 0..rows {
            out.push(a[i * cols + j].clone());
        }
    }
    out
}

/// Reorders tensor axes: output axis `t` is input axis `perm[t]`.
pub(crate) fn permute_axes<S: Scalar>(data: &[S], m: usize, perm: &[usize]) -> Vec<S> {
    let order = perm.len();
    if perm.iter().enumerate().all(|(t, &a)| t == a) {
        return data.to_vec();
    }
    let mut in_stride = vec![1usize; order];
    for a in (0..order.saturating_sub(1)).rev() {
        in_stride[a] = in_stride[a + 1] * m;
    }
    let strides: Vec<usize> = perm.iter().map(|&a| in_stride[a]).collect();
    let mut digits = vec![0usize; order];
    let mut offset = 0usize;
    let mut out = Vec::with_capacity(data.len());
    for _ in 0..data.len() {
        out.push(data[offset].clone());
        // odometer increment over output digits
        for t in (0..order).rev() {
            digits[t] += 1;
            offset += strides[t];
            if digits[t] < m {
                break;
            }
            offset -= strides[t] * m;
            digits[t] = 0;
        }
    }
    out
}
