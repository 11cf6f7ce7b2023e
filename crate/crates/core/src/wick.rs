//! Moments of classical multiple integrals by brute-force Gaussian algebra.
//!
//! With `ξ_i = √m · B(cell i)` the cell increments are i.i.d. standard
//! normals and a step kernel integrates to
//! `I_p(f) = m^{-p/2} Σ_I a_I ∏_i H_{k_i(I)}(ξ_i)`, where `k_i(I)` counts the
//! occurrences of cell `i` in the index tuple `I` and `H_n` is the
//! probabilists' Hermite polynomial. The polynomial is expanded in
//! monomials, raised to the `k`-th power, and integrated with
//! `E[ξ^n] = (n-1)!!`. No contraction code is involved.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::kernel::GridKernel;
use crate::scalar::{apply_scale, Scalar};

/// Largest number of Gaussian variables (grid resolution) accepted.
pub const MAX_VARIABLES: usize = 12;
/// Largest total degree `k·p` accepted.
pub const MAX_DEGREE: usize = 24;
/// Largest number of monomials in any intermediate power.
pub const MAX_TERMS: usize = 200_000;
/// Largest number of monomial pairs visited when taking the expectation.
pub const MAX_PAIRS: u64 = 50_000_000;

type Monomial = Vec<u8>;
type Poly<S> = BTreeMap<Monomial, S>;

/// Coefficients of `H_n`, lowest degree first.
fn hermite(n: usize) -> Vec<BigInt> {
    let mut prev = vec![BigInt::from(1)];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![BigInt::from(0), BigInt::from(1)];
    for j in 1..n {
        // H_{j+1} = x H_j - j H_{j-1}
        let mut next = vec![BigInt::from(0); j + 2];
        for (d, c) in cur.iter().enumerate() {
            next[d + 1] += c;
        }
        for (d, c) in prev.iter().enumerate() {
            next[d] -= c * BigInt::from(j);
        }
        prev = cur;
        cur = next;
    }
    cur
}

fn to_scalar<S: Scalar>(x: &BigInt) -> S {
    let (sign, mag) = x.clone().into_parts();
    let v = S::from_biguint(&mag);
    if sign == num_bigint::Sign::Minus {
        S::zero() - v
    } else {
        v
    }
}

fn add_term<S: Scalar>(poly: &mut Poly<S>, mono: Monomial, c: S) {
    if c.is_zero() {
        return;
    }
    let slot = poly.entry(mono.clone()).or_insert_with(S::zero);
    *slot += c;
    if slot.is_zero() {
        poly.remove(&mono);
    }
}

/// `m^{p/2} I_p(f)` as a polynomial in `ξ_1, …, ξ_m`.
fn chaos_polynomial<S: Scalar>(f: &GridKernel<S>) -> Poly<S> {
    let (p, m) = (f.order(), f.resolution());
    // Σ a_I over index tuples sharing the same multiplicity vector
    let mut by_mult: BTreeMap<Vec<u8>, S> = BTreeMap::new();
    let mut digits = vec![0usize; p];
    for (flat, a) in f.coeffs().iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let mut rest = flat;
        for d in digits.iter_mut().rev() {
            *d = rest % m;
            rest /= m;
        }
        let mut mult = vec![0u8; m];
        for &d in &digits {
            mult[d] += 1;
        }
        *by_mult.entry(mult).or_insert_with(S::zero) += a.clone();
    }
    let tables: Vec<Vec<S>> = (0..=p).map(|n| hermite(n).iter().map(to_scalar).collect()).collect();
    let mut poly = Poly::new();
    for (mult, a) in by_mult {
        if a.is_zero() {
            continue;
        }
        // expand ∏_i H_{k_i}(ξ_i) as a product of univariate polynomials
        let mut partial: Vec<(Monomial, S)> = vec![(vec![0u8; m], a)];
        for (i, &k) in mult.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let h = &tables[k as usize];
            let mut next = Vec::with_capacity(partial.len() * h.len());
            for (mono, c) in &partial {
                for (d, hc) in h.iter().enumerate() {
                    if hc.is_zero() {
                        continue;
                    }
                    let mut mono = mono.clone();
                    mono[i] = d as u8;
                    next.push((mono, c.clone() * hc.clone()));
                }
            }
            partial = next;
        }
        for (mono, c) in partial {
            add_term(&mut poly, mono, c);
        }
    }
    poly
}

fn multiply<S: Scalar>(a: &Poly<S>, b: &Poly<S>) -> Result<Poly<S>> {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let mono: Monomial = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
            let mut c = ca.clone();
            c *= cb.clone();
            add_term(&mut out, mono, c);
        }
        if out.len() > MAX_TERMS {
            return Err(Error::OracleCap(format!("more than {MAX_TERMS} monomials")));
        }
    }
    Ok(out)
}

fn power<S: Scalar>(p: &Poly<S>, e: usize, vars: usize) -> Result<Poly<S>> {
    let mut acc = Poly::new();
    acc.insert(vec![0u8; vars], S::one());
    for _ in 0..e {
        acc = multiply(&acc, p)?;
    }
    Ok(acc)
}

fn parity(mono: &Monomial) -> u32 {
    mono.iter()
        .enumerate()
        .fold(0, |acc, (i, &e)| acc | (u32::from(e & 1) << i))
}

/// `E[∏ ξ_i^{n_i}] = ∏ (n_i - 1)!!` (all exponents even).
fn gaussian_expectation<S: Scalar>(a: &Monomial, b: &Monomial, double_fact: &[S]) -> S {
    let mut acc = S::one();
    for (x, y) in a.iter().zip(b) {
        let n = (x + y) as usize;
        if n > 0 {
            acc *= double_fact[n].clone();
        }
    }
    acc
}

/// `E[I_p(f)^k]` for the classical integral of `f`, computed from the
/// Gaussian polynomial representation.
///
/// `f` need not be symmetric. Fails with [`Error::OracleCap`] when `m`, `kp`
/// or the size of an intermediate power exceeds the oracle's limits.
pub fn wick_oracle_moment<S: Scalar>(f: &GridKernel<S>, k: usize) -> Result<S> {
    let (p, m) = (f.order(), f.resolution());
    if m > MAX_VARIABLES {
        return Err(Error::OracleCap(format!("{m} variables exceed {MAX_VARIABLES}")));
    }
    if k * p > MAX_DEGREE {
        return Err(Error::OracleCap(format!("degree {} exceeds {MAX_DEGREE}", k * p)));
    }
    if k == 0 {
        return Ok(S::one());
    }
    let poly = chaos_polynomial(f);
    let left = power(&poly, k.div_ceil(2), m)?;
    let right = power(&poly, k / 2, m)?;

    let mut double_fact = vec![S::zero(); k * p + 1];
    double_fact[0] = S::one();
    for n in (2..=k * p).step_by(2) {
        double_fact[n] = double_fact[n - 2].clone() * S::from_usize(n - 1);
    }

    let mut by_parity: BTreeMap<u32, Vec<(&Monomial, &S)>> = BTreeMap::new();
    for (mono, c) in &right {
        by_parity.entry(parity(mono)).or_default().push((mono, c));
    }
    let pairs: u64 = left
        .keys()
        .map(|mono| by_parity.get(&parity(mono)).map_or(0, |v| v.len() as u64))
        .sum();
    if pairs > MAX_PAIRS {
        return Err(Error::OracleCap(format!("{pairs} monomial pairs exceed {MAX_PAIRS}")));
    }
    let mut base = S::zero();
    for (ma, ca) in &left {
        let Some(matching) = by_parity.get(&parity(ma)) else {
            continue;
        };
        for (mb, cb) in matching {
            let mut c = ca.clone();
            c *= (*cb).clone();
            base.add_product(&c, &gaussian_expectation(ma, mb, &double_fact));
        }
    }
    let scale_sq = S::one() / S::from_usize(m).powi(p);
    apply_scale(base, &scale_sq, k).ok_or(Error::Irrational("odd moment with irrational grid scale"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: u64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn hermite_table() {
        let h4: Vec<i64> = hermite(4).iter().map(|c| i64::try_from(c).unwrap()).collect();
        assert_eq!(h4, vec![3, 0, -6, 0, 1]);
        assert_eq!(hermite(0), vec![BigInt::from(1)]);
    }

    #[test]
    fn examples() {
        let c2 = GridKernel::<Rational>::ones(2, 1).unwrap();
        assert_eq!(wick_oracle_moment(&c2, 4).unwrap(), q(60, 1));
        let c1 = GridKernel::<Rational>::ones(1, 1).unwrap();
        let want = [1, 0, 1, 0, 3, 0, 15, 0, 105];
        for (k, w) in want.iter().enumerate() {
            assert_eq!(wick_oracle_moment(&c1, k).unwrap(), q(*w, 1), "k={k}");
        }
        let pair = GridKernel::new(2, 2, [0, 1, 1, 0].map(|x| q(x, 1)).to_vec()).unwrap();
        assert_eq!(wick_oracle_moment(&pair, 4).unwrap(), q(9, 1));
        assert_eq!(wick_oracle_moment(&pair, 2).unwrap(), q(1, 1));
    }

    #[test]
    fn asymmetric_input_matches_symmetrization() {
        let f = GridKernel::new(2, 2, [0, 2, 0, 1].map(|x| q(x, 1)).to_vec()).unwrap();
        for k in 1..=4 {
            assert_eq!(
                wick_oracle_moment(&f, k).unwrap(),
                wick_oracle_moment(&f.symmetrize(), k).unwrap()
            );
        }
    }

    #[test]
    fn caps() {
        let f = GridKernel::<Rational>::ones(1, 13).unwrap();
        assert!(matches!(wick_oracle_moment(&f, 2), Err(Error::OracleCap(_))));
        let g = GridKernel::<Rational>::ones(5, 1).unwrap();
        assert!(matches!(wick_oracle_moment(&g, 6), Err(Error::OracleCap(_))));
    }
}
