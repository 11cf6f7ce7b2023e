//! Named kernel families used by the convergence experiments.

use alloc::format;
use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel::{normalize_variance, GridKernel, Model, ScaledKernel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `p = 2`, `m = 2n`, equal mass on the cells `(2i-1, 2i)` and `(2i, 2i-1)`,
    /// normalized for the model. Classically `F_n = n^{-1/2} Σ ξ_{2i-1} ξ_{2i}`.
    PairClt,
    /// The constant `1` on `[0,1]^p` at `m = 1`, not normalized.
    ConstantHermite,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::PairClt => "pair_clt",
            Family::ConstantHermite => "constant_hermite",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pair_clt" => Ok(Family::PairClt),
            "constant_hermite" => Ok(Family::ConstantHermite),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }
}

/// Builds a family member. `param` is `n` for `pair_clt` and `p` for
/// `constant_hermite`.
pub fn family_kernel<S: Scalar>(family: Family, param: usize, model: Model) -> Result<ScaledKernel<S>> {
    if param == 0 {
        return Err(Error::InvalidParameter(
            "family parameter must be positive".to_string(),
        ));
    }
    match family {
        Family::PairClt => {
            let raw = GridKernel::from_fn(2, 2 * param, |i| {
                if i[0] / 2 == i[1] / 2 && i[0] != i[1] {
                    S::one()
                } else {
                    S::zero()
                }
            })?;
            normalize_variance(&raw, model)
        }
        Family::ConstantHermite => Ok(GridKernel::ones(param, 1)?.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: u64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn pair_clt_shape() {
        for n in 1..=5usize {
            let f = family_kernel::<Rational>(Family::PairClt, n, Model::Classical).unwrap();
            assert_eq!(f.kernel.resolution(), 2 * n);
            assert_eq!(f.scale_sq, q(n as i64, 1));
            assert!(f.kernel.is_symmetric() && f.kernel.is_off_diagonal());
            assert!(f.is_normalized(Model::Classical));
            let nz = f.kernel.coeffs().iter().filter(|c| !num_traits::Zero::is_zero(*c)).count();
            assert_eq!(nz, 2 * n);
            let g = family_kernel::<Rational>(Family::PairClt, n, Model::Free).unwrap();
            assert_eq!(g.scale_sq, q(2 * n as i64, 1));
            assert!(g.is_normalized(Model::Free));
        }
        let one = family_kernel::<Rational>(Family::PairClt, 1, Model::Classical).unwrap();
        assert_eq!(one.kernel, GridKernel::new(2, 2, [0, 1, 1, 0].map(|x| q(x, 1)).to_vec()).unwrap());
    }

    #[test]
    fn constant_hermite() {
        let f = family_kernel::<Rational>(Family::ConstantHermite, 2, Model::Free).unwrap();
        assert_eq!(f.kernel, GridKernel::ones(2, 1).unwrap());
        assert_eq!(f.scale_sq, q(1, 1));
    }

    #[test]
    fn parse_and_errors() {
        assert_eq!("pair_clt".parse::<Family>().unwrap(), Family::PairClt);
        assert!("nope".parse::<Family>().is_err());
        assert!(family_kernel::<f64>(Family::PairClt, 0, Model::Free).is_err());
    }
}
