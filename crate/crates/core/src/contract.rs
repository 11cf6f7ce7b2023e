//! Classical and free contractions of grid kernels.
//!
//! Slot conventions:
//! - classical `f ⊗_r g` integrates the last `r` slots of `f` against the
//!   last `r` slots of `g`, in the same order;
//! - free `f ⌢^r g` integrates the last `r` slots of `f` against the first
//!   `r` slots of `g` read backwards, so `g(s_r, …, s_1, t…)`.
//!
//! Both accept arbitrary (not necessarily symmetric) kernels.

use crate::budget::checked_entries;
use crate::error::{Error, Result};
use crate::index::reversal_table;
use crate::kernel::GridKernel;
use crate::scalar::Scalar;
use crate::tensor::{matmul, transpose};

fn check<S: Scalar>(f: &GridKernel<S>, g: &GridKernel<S>, r: usize) -> Result<()> {
    if f.resolution() != g.resolution() {
        return Err(Error::ResolutionMismatch {
            left: f.resolution(),
            right: g.resolution(),
        });
    }
    if r > f.order().min(g.order()) {
        return Err(Error::ContractionRange {
            r,
            p: f.order(),
            q: g.order(),
        });
    }
    Ok(())
}

/// `f ⊗_r g`, of order `p + q - 2r`.
pub fn contract_classical<S: Scalar>(f: &GridKernel<S>, g: &GridKernel<S>, r: usize) -> Result<GridKernel<S>> {
    check(f, g, r)?;
    let m = f.resolution();
    let order = f.order() + g.order() - 2 * r;
    checked_entries(m, order)?;
    let inner = m.pow(r as u32);
    let rows = m.pow((f.order() - r) as u32);
    let cols = m.pow((g.order() - r) as u32);
    // g viewed as (cols × inner); contracting on its trailing slots needs its transpose
    let gt = transpose(g.coeffs(), cols, inner);
    let mut out = matmul(f.coeffs(), &gt, rows, inner, cols);
    scale_by_cells(&mut out, m, r);
    Ok(GridKernel::from_parts(order, m, out))
}

/// Symmetrization of `f ⊗_r g`.
pub fn contract_classical_sym<S: Scalar>(
    f: &GridKernel<S>,
    g: &GridKernel<S>,
    r: usize,
) -> Result<GridKernel<S>> {
    Ok(contract_classical(f, g, r)?.symmetrize())
}

/// `f ⌢^r g`, of order `p + q - 2r`.
pub fn contract_free<S: Scalar>(f: &GridKernel<S>, g: &GridKernel<S>, r: usize) -> Result<GridKernel<S>> {
    check(f, g, r)?;
    let m = f.resolution();
    let order = f.order() + g.order() - 2 * r;
    checked_entries(m, order)?;
    let inner = m.pow(r as u32);
    let rows = m.pow((f.order() - r) as u32);
    let cols = m.pow((g.order() - r) as u32);
    let out = if r < 2 {
        matmul(f.coeffs(), g.coeffs(), rows, inner, cols)
    } else {
        // reorder g's leading block so row s of the matrix is g[rev(s), ·]
        let rev = reversal_table(m, r, inner);
        let gc = g.coeffs();
        let mut reordered = alloc::vec::Vec::with_capacity(gc.len());
        for &s in &rev {
            reordered.extend_from_slice(&gc[s * cols..(s + 1) * cols]);
        }
        matmul(f.coeffs(), &reordered, rows, inner, cols)
    };
    let mut out = out;
    scale_by_cells(&mut out, m, r);
    Ok(GridKernel::from_parts(order, m, out))
}

fn scale_by_cells<S: Scalar>(data: &mut [S], m: usize, r: usize) {
    if r == 0 || m == 1 {
        return;
    }
    let w = S::cell_measure(m, r);
    for x in data.iter_mut() {
        if !x.is_zero() {
            *x *= w.clone();
        }
    }
}

/// Tensor product `f ⊗ g`.
pub fn tensor_product<S: Scalar>(f: &GridKernel<S>, g: &GridKernel<S>) -> Result<GridKernel<S>> {
    contract_classical(f, g, 0)
}
