//! Finite chaos expansions `Σ_q I_q(g_q)` and their products.

use alloc::collections::BTreeMap;

use crate::contract::{contract_classical, contract_free};
use crate::error::{Error, Result};
use crate::kernel::{factorial, GridKernel, Model};
use crate::scalar::Scalar;

/// A finite sum of multiple integrals of distinct orders, in one model and at
/// one grid resolution.
///
/// Classical components are stored symmetrized (`I_p(f) = I_p(f̃)`); free
/// components are stored verbatim because the free calculus is sensitive to
/// argument order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosExpansion<S> {
    model: Model,
    resolution: usize,
    components: BTreeMap<usize, GridKernel<S>>,
}

impl<S: Scalar> ChaosExpansion<S> {
    pub fn zero(model: Model, resolution: usize) -> Self {
        ChaosExpansion {
            model,
            resolution,
            components: BTreeMap::new(),
        }
    }

    pub fn from_kernel(f: &GridKernel<S>, model: Model) -> Self {
        let mut out = ChaosExpansion::zero(model, f.resolution());
        out.accumulate(f.clone(), &S::one());
        out
    }

    pub fn constant(value: S, model: Model, resolution: usize) -> Self {
        ChaosExpansion::from_kernel(&GridKernel::scalar(value, resolution), model)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn component(&self, order: usize) -> Option<&GridKernel<S>> {
        self.components.get(&order)
    }

    pub fn orders(&self) -> impl Iterator<Item = usize> + '_ {
        self.components.keys().copied()
    }

    pub fn max_order(&self) -> usize {
        self.components.keys().next_back().copied().unwrap_or(0)
    }

    /// Adds `c · I_q(f)`; zero components are dropped.
    fn accumulate(&mut self, f: GridKernel<S>, c: &S) {
        let f = match self.model {
            Model::Classical => f.symmetrize(),
            Model::Free => f,
        };
        let order = f.order();
        match self.components.get_mut(&order) {
            Some(slot) => slot.add_assign_scaled(&f, c),
            None => {
                let f = if c.is_one() { f } else { f.scale(c) };
                self.components.insert(order, f);
            }
        }
        if self.components[&order].is_zero() {
            self.components.remove(&order);
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.model != other.model {
            return Err(Error::ModelMismatch);
        }
        if self.resolution != other.resolution {
            return Err(Error::ResolutionMismatch {
                left: self.resolution,
                right: other.resolution,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for f in other.components.values() {
            out.accumulate(f.clone(), &S::one());
        }
        Ok(out)
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = ChaosExpansion::zero(self.model, self.resolution);
        for f in self.components.values() {
            out.accumulate(f.clone(), c);
        }
        out
    }

    /// Product by the classical or free product formula, extended
    /// bilinearly over components.
    ///
    /// Classical: `I_p(f) I_q(g) = Σ_r r! C(p,r) C(q,r) I_{p+q-2r}(f ⊗̃_r g)`.
    /// Free: `I_p(f) I_q(g) = Σ_r I_{p+q-2r}(f ⌢^r g)`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = ChaosExpansion::zero(self.model, self.resolution);
        for (&p, f) in &self.components {
            for (&q, g) in &other.components {
                for r in 0..=p.min(q) {
                    let (term, coeff) = match self.model {
                        Model::Classical => (contract_classical(f, g, r)?, product_coefficient::<S>(p, q, r)),
                        Model::Free => (contract_free(f, g, r)?, S::one()),
                    };
                    out.accumulate(term, &coeff);
                }
            }
        }
        Ok(out)
    }

    /// `E[F]`: the order-0 component.
    pub fn expectation(&self) -> S {
        self.components
            .get(&0)
            .map(|f| f.coeffs()[0].clone())
            .unwrap_or_else(S::zero)
    }

    /// `E[F G]` without forming the product: only the fully contracted
    /// (`r = p = q`) terms of the product formula have order 0.
    pub fn expectation_of_product(&self, other: &Self) -> Result<S> {
        self.check_compatible(other)?;
        let mut acc = S::zero();
        for (&p, f) in &self.components {
            let Some(g) = other.components.get(&p) else {
                continue;
            };
            let term = match self.model {
                Model::Classical => factorial::<S>(p) * f.l2_inner(g)?,
                Model::Free => f.l2_inner(&g.adjoint())?,
            };
            acc += term;
        }
        Ok(acc)
    }
}

/// `r! C(p,r) C(q,r)`.
pub fn product_coefficient<S: Scalar>(p: usize, q: usize, r: usize) -> S {
    let c = crate::combinatorics::factorial(r)
        * crate::combinatorics::binomial(p, r)
        * crate::combinatorics::binomial(q, r);
    S::from_biguint(&c)
}

/// `E[I_p(f)^k]` by repeated application of the product formula,
/// folding left to right: `((F·F)·F)…`.
pub fn moment_via_expansion<S: Scalar>(f: &GridKernel<S>, k: usize, model: Model) -> Result<S> {
    if k == 0 {
        return Err(Error::InvalidParameter("moment order k must be at least 1".into()));
    }
    if model == Model::Free && !f.is_mirror_symmetric() {
        return Err(Error::NotMirrorSymmetric);
    }
    let base = ChaosExpansion::from_kernel(f, model);
    if k == 1 {
        return Ok(base.expectation());
    }
    let mut acc = base.clone();
    for _ in 2..k {
        acc = acc.multiply(&base)?;
    }
    acc.expectation_of_product(&base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use alloc::vec;

    fn q(n: i64, d: u64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn kq(p: usize, m: usize, c: &[i64]) -> GridKernel<Rational> {
        GridKernel::new(p, m, c.iter().map(|&x| q(x, 1)).collect()).unwrap()
    }

    #[test]
    fn from_kernel_examples() {
        let pair = kq(2, 2, &[0, 1, 1, 0]);
        let c = ChaosExpansion::from_kernel(&pair, Model::Classical);
        assert_eq!(c.component(2), Some(&pair));
        let s = ChaosExpansion::from_kernel(&kq(0, 1, &[3]), Model::Classical);
        assert_eq!(s.expectation(), q(3, 1));
        let asym = ChaosExpansion::from_kernel(&kq(2, 2, &[0, 1, 0, 0]), Model::Classical);
        assert_eq!(
            asym.component(2).unwrap(),
            &GridKernel::new(2, 2, vec![q(0, 1), q(1, 2), q(1, 2), q(0, 1)]).unwrap()
        );
        let free = ChaosExpansion::from_kernel(&kq(2, 2, &[0, 1, 0, 0]), Model::Free);
        assert_eq!(free.component(2).unwrap(), &kq(2, 2, &[0, 1, 0, 0]));
    }

    #[test]
    fn square_of_brownian_endpoint() {
        for model in [Model::Classical, Model::Free] {
            let b = ChaosExpansion::from_kernel(&kq(1, 1, &[1]), model);
            let sq = b.multiply(&b).unwrap();
            assert_eq!(sq.component(2), Some(&kq(2, 1, &[1])));
            assert_eq!(sq.expectation(), q(1, 1));
            assert_eq!(sq.orders().count(), 2);
        }
    }

    #[test]
    fn isometries() {
        let f = GridKernel::from_fn(2, 2, |i| q((3 * i[0] + i[1]) as i64 - 1, 1)).unwrap();
        let g = GridKernel::from_fn(2, 2, |i| q((i[0] * i[1]) as i64 + 2, 1)).unwrap();
        let h = kq(1, 2, &[1, 2]);
        let (ff, gg, hh) = (
            ChaosExpansion::from_kernel(&f, Model::Classical),
            ChaosExpansion::from_kernel(&g, Model::Classical),
            ChaosExpansion::from_kernel(&h, Model::Classical),
        );
        let want = q(2, 1) * f.symmetrize().l2_inner(&g.symmetrize()).unwrap();
        assert_eq!(ff.multiply(&gg).unwrap().expectation(), want);
        assert_eq!(ff.multiply(&hh).unwrap().expectation(), q(0, 1));

        let (ff, gg, hh) = (
            ChaosExpansion::from_kernel(&f, Model::Free),
            ChaosExpansion::from_kernel(&g, Model::Free),
            ChaosExpansion::from_kernel(&h, Model::Free),
        );
        assert_eq!(ff.multiply(&gg).unwrap().expectation(), f.l2_inner(&g.adjoint()).unwrap());
        assert_eq!(ff.multiply(&hh).unwrap().expectation(), q(0, 1));
        assert_eq!(ff.expectation_of_product(&gg).unwrap(), ff.multiply(&gg).unwrap().expectation());
    }

    #[test]
    fn mismatches() {
        let a = ChaosExpansion::from_kernel(&kq(1, 1, &[1]), Model::Classical);
        let b = ChaosExpansion::from_kernel(&kq(1, 1, &[1]), Model::Free);
        let c = ChaosExpansion::from_kernel(&kq(1, 2, &[1, 1]), Model::Classical);
        assert_eq!(a.multiply(&b).unwrap_err(), Error::ModelMismatch);
        assert!(matches!(a.multiply(&c), Err(Error::ResolutionMismatch { .. })));
    }

    #[test]
    fn moments_of_endpoints() {
        let one = kq(1, 1, &[1]);
        assert_eq!(moment_via_expansion(&one, 4, Model::Classical).unwrap(), q(3, 1));
        assert_eq!(moment_via_expansion(&one, 4, Model::Free).unwrap(), q(2, 1));
        assert_eq!(moment_via_expansion(&kq(2, 1, &[1]), 4, Model::Free).unwrap(), q(3, 1));
        assert_eq!(moment_via_expansion(&one, 1, Model::Free).unwrap(), q(0, 1));
        assert_eq!(
            moment_via_expansion(&kq(2, 2, &[0, 1, 0, 0]), 2, Model::Free).unwrap_err(),
            Error::NotMirrorSymmetric
        );
    }

    #[test]
    fn budget_error_names_the_order() {
        let f = GridKernel::<f64>::ones(2, 40).unwrap();
        match moment_via_expansion(&f, 6, Model::Classical) {
            Err(Error::BudgetExceeded { order, resolution, .. }) => {
                assert_eq!(resolution, 40);
                assert!(order >= 5);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
