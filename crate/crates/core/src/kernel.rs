//! Step-function kernels on `[0,1]^p`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigUint;

use crate::budget::checked_entries;
use crate::error::{Error, Result};
use crate::index::{decode, encode, has_repeat, reversal_table};
use crate::scalar::{apply_scale, Scalar};

/// Which calculus a kernel is integrated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// Multiple Wiener-Itô integrals against Brownian motion.
    Classical,
    /// Multiple Wigner integrals against free Brownian motion.
    Free,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Classical => "classical",
            Model::Free => "free",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Model::Classical),
            "free" => Ok(Model::Free),
            other => Err(Error::InvalidParameter(alloc::format!("unknown model {other:?}"))),
        }
    }
}

/// A function on `[0,1]^p` that is constant on each cell of the uniform
/// `m × … × m` grid.
///
/// Coefficients are stored row-major over index tuples `(i_1, …, i_p)`, the
/// first index most significant. Order 0 is a single constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GridKernel<S> {
    order: usize,
    resolution: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> GridKernel<S> {
    pub fn new(order: usize, resolution: usize, coeffs: Vec<S>) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter("resolution must be at least 1".into()));
        }
        let expected = checked_entries(resolution, order)?;
        if coeffs.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(GridKernel {
            order,
            resolution,
            coeffs,
        })
    }

    /// Builds a kernel from a function of the 0-based cell index tuple.
    pub fn from_fn(order: usize, resolution: usize, mut f: impl FnMut(&[usize]) -> S) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter("resolution must be at least 1".into()));
        }
        let len = checked_entries(resolution, order)?;
        let mut digits = vec![0; order];
        let coeffs = (0..len)
            .map(|flat| {
                decode(flat, resolution, &mut digits);
                f(&digits)
            })
            .collect();
        GridKernel::new(order, resolution, coeffs)
    }

    pub fn constant(order: usize, resolution: usize, value: S) -> Result<Self> {
        GridKernel::from_fn(order, resolution, |_| value.clone())
    }

    pub fn ones(order: usize, resolution: usize) -> Result<Self> {
        GridKernel::constant(order, resolution, S::one())
    }

    pub fn zeros(order: usize, resolution: usize) -> Result<Self> {
        GridKernel::constant(order, resolution, S::zero())
    }

    /// Order-0 kernel.
    pub fn scalar(value: S, resolution: usize) -> Self {
        GridKernel {
            order: 0,
            resolution: resolution.max(1),
            coeffs: vec![value],
        }
    }

    /// Skips validation; callers guarantee `coeffs.len() == m^order`.
    pub(crate) fn from_parts(order: usize, resolution: usize, coeffs: Vec<S>) -> Self {
        debug_assert_eq!(coeffs.len(), resolution.pow(order as u32));
        GridKernel {
            order,
            resolution,
            coeffs,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient at a 0-based index tuple.
    pub fn get(&self, index: &[usize]) -> Option<&S> {
        if index.len() != self.order || index.iter().any(|&i| i >= self.resolution) {
            return None;
        }
        self.coeffs.get(encode(index, self.resolution))
    }

    /// The constant value of an order-0 kernel.
    pub fn value(&self) -> Option<&S> {
        (self.order == 0).then(|| &self.coeffs[0])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> GridKernel<T> {
        GridKernel {
            order: self.order,
            resolution: self.resolution,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn to_f64(&self) -> GridKernel<f64> {
        self.map(|c| c.to_f64())
    }

    pub fn scale(&self, c: &S) -> Self {
        GridKernel {
            order: self.order,
            resolution: self.resolution,
            coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect(),
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.resolution != other.resolution {
            return Err(Error::ResolutionMismatch {
                left: self.resolution,
                right: other.resolution,
            });
        }
        if self.order != other.order {
            return Err(Error::OrderMismatch {
                left: self.order,
                right: other.order,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(GridKernel {
            order: self.order,
            resolution: self.resolution,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub(crate) fn add_assign_scaled(&mut self, other: &Self, c: &S) {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a.add_product(b, c);
        }
    }

    /// `⟨f, g⟩ = m^{-p} Σ_I a_I b_I`.
    pub fn l2_inner(&self, other: &Self) -> Result<S> {
        self.check_same_shape(other)?;
        let mut acc = S::zero();
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            acc.add_product(a, b);
        }
        Ok(acc * S::cell_measure(self.resolution, self.order))
    }

    pub fn norm_sq(&self) -> S {
        let mut acc = S::zero();
        for a in &self.coeffs {
            acc.add_product(a, a);
        }
        acc * S::cell_measure(self.resolution, self.order)
    }

    /// Average over all argument permutations.
    ///
    /// Each output cell is the mean of its permutation orbit; orbits are
    /// found by sorting index tuples, so the cost is `O(m^p · p log p)`.
    pub fn symmetrize(&self) -> Self {
        if self.order < 2 {
            return self.clone();
        }
        let m = self.resolution;
        let len = self.coeffs.len();
        let mut digits = vec![0; self.order];
        let mut canon = Vec::with_capacity(len);
        let mut sums = vec![S::zero(); len];
        let mut counts = vec![0u32; len];
        for (flat, a) in self.coeffs.iter().enumerate() {
            decode(flat, m, &mut digits);
            digits.sort_unstable();
            let key = encode(&digits, m);
            sums[key] += a.clone();
            counts[key] += 1;
            canon.push(key);
        }
        let coeffs = canon
            .iter()
            .map(|&key| sums[key].clone() / S::from_usize(counts[key] as usize))
            .collect();
        GridKernel::from_parts(self.order, m, coeffs)
    }

    /// Mirror adjoint `f*(t_1, …, t_p) = f(t_p, …, t_1)`.
    pub fn adjoint(&self) -> Self {
        if self.order < 2 {
            return self.clone();
        }
        let rev = reversal_table(self.resolution, self.order, self.coeffs.len());
        let coeffs = rev.iter().map(|&j| self.coeffs[j].clone()).collect();
        GridKernel::from_parts(self.order, self.resolution, coeffs)
    }

    pub fn is_symmetric(&self) -> bool {
        self.order < 2 || self.symmetrize() == *self
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        self.order < 2 || self.adjoint() == *self
    }

    /// True when every cell with a repeated index carries coefficient 0.
    pub fn is_off_diagonal(&self) -> bool {
        let mut digits = vec![0; self.order];
        self.coeffs.iter().enumerate().all(|(flat, a)| {
            decode(flat, self.resolution, &mut digits);
            !has_repeat(&digits) || a.is_zero()
        })
    }

    /// The kernel with every diagonal-touching cell set to zero.
    pub fn off_diagonal_part(&self) -> Self {
        let mut digits = vec![0; self.order];
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(flat, a)| {
                decode(flat, self.resolution, &mut digits);
                if has_repeat(&digits) {
                    S::zero()
                } else {
                    a.clone()
                }
            })
            .collect();
        GridKernel::from_parts(self.order, self.resolution, coeffs)
    }

    /// Same function on a grid `factor` times finer.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParameter("refinement factor must be at least 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let m = self.resolution;
        let fine = m
            .checked_mul(factor)
            .ok_or_else(|| Error::InvalidParameter("resolution overflow".to_string()))?;
        GridKernel::from_fn(self.order, fine, |idx| {
            let coarse = idx.iter().fold(0, |acc, &i| acc * m + i / factor);
            self.coeffs[coarse].clone()
        })
    }
}

/// A kernel multiplied by `sqrt(scale_sq)`.
///
/// Normalizing a rational kernel to unit variance usually needs an
/// irrational factor. Keeping the squared factor separately lets every
/// even-degree quantity (variances, fourth moments, contraction norms)
/// stay exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledKernel<S> {
    pub kernel: GridKernel<S>,
    pub scale_sq: S,
}

impl<S: Scalar> ScaledKernel<S> {
    pub fn new(kernel: GridKernel<S>, scale_sq: S) -> Self {
        ScaledKernel { kernel, scale_sq }
    }

    /// Value of a degree-`degree` homogeneous quantity, given its value on
    /// the unscaled kernel.
    pub fn rescale(&self, base: S, degree: usize) -> Result<S> {
        apply_scale(base, &self.scale_sq, degree)
            .ok_or(Error::Irrational("odd-degree quantity of a kernel with irrational scale"))
    }

    /// The scaled kernel as a plain kernel, when the scale is representable.
    pub fn materialize(&self) -> Result<GridKernel<S>> {
        if self.scale_sq.is_one() {
            return Ok(self.kernel.clone());
        }
        let c = self
            .scale_sq
            .sqrt_exact()
            .ok_or(Error::Irrational("scale factor is not a perfect square"))?;
        Ok(self.kernel.scale(&c))
    }

    pub fn norm_sq(&self) -> S {
        self.kernel.norm_sq() * self.scale_sq.clone()
    }

    /// `E[F²]` of the represented integral: `p!‖f̃‖²` classically, `⟨f, f*⟩` freely.
    pub fn variance(&self, model: Model) -> S {
        variance(&self.kernel, model) * self.scale_sq.clone()
    }

    pub fn is_normalized(&self, model: Model) -> bool {
        let sym_ok = match model {
            Model::Classical => self.kernel.is_symmetric(),
            Model::Free => self.kernel.is_mirror_symmetric(),
        };
        sym_ok && self.variance(model).approx_eq(&S::one())
    }
}

impl<S: Scalar> From<GridKernel<S>> for ScaledKernel<S> {
    fn from(kernel: GridKernel<S>) -> Self {
        ScaledKernel {
            kernel,
            scale_sq: S::one(),
        }
    }
}

pub(crate) fn factorial<S: Scalar>(n: usize) -> S {
    let f = (1..=n).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(i));
    S::from_biguint(&f)
}

fn variance<S: Scalar>(f: &GridKernel<S>, model: Model) -> S {
    match model {
        Model::Classical => factorial::<S>(f.order()) * f.symmetrize().norm_sq(),
        Model::Free => f
            .l2_inner(&f.adjoint())
            .expect("adjoint has the same shape"),
    }
}

/// Scales a kernel to unit variance.
///
/// Classically the result is `c·f̃` with `p!‖c·f̃‖² = 1`; in the free model it
/// is `c·f` with `⟨c·f, (c·f)*⟩ = 1`. The factor is kept squared.
pub fn normalize_variance<S: Scalar>(f: &GridKernel<S>, model: Model) -> Result<ScaledKernel<S>> {
    if f.is_zero() {
        return Err(Error::ZeroKernel);
    }
    let base = match model {
        Model::Classical => f.symmetrize(),
        Model::Free => f.clone(),
    };
    let v = variance(&base, model);
    if v <= S::zero() {
        return Err(match model {
            Model::Classical => Error::ZeroKernel,
            Model::Free => Error::NonPositiveVariance,
        });
    }
    Ok(ScaledKernel::new(base, S::one() / v))
}
