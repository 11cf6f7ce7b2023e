//! Contraction index sets `A_k ⊇ B_k = C_k ∪ E_k`, their coefficients, and
//! the Catalan / Dyck-path identities they satisfy.
//!
//! A tuple `(r_1, …, r_{k-1})` describes the left-to-right iterated
//! contraction `f ⋆_{r_1} f ⋆_{r_2} … ⋆_{r_{k-1}} f`. Before step `j` the
//! running tensor has order `jp - 2(r_1 + … + r_{j-1})`, which bounds `r_j`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TupleClass {
    /// Every admissible contraction sequence.
    A,
    /// Sequences ending in a scalar: `2 Σ r_j = kp`.
    B,
    /// `B` with every `r_j ∈ {0, p}`.
    C,
    /// `B` minus `C`.
    E,
}

impl TupleClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TupleClass::A => "A",
            TupleClass::B => "B",
            TupleClass::C => "C",
            TupleClass::E => "E",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A" | "a" => Some(TupleClass::A),
            "B" | "b" => Some(TupleClass::B),
            "C" | "c" => Some(TupleClass::C),
            "E" | "e" => Some(TupleClass::E),
            _ => None,
        }
    }
}

impl fmt::Display for TupleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validated member of `A_k`, `B_k`, `C_k` or `E_k` for fixed `(p, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContractionTuple {
    p: usize,
    k: usize,
    r: Vec<usize>,
    class: TupleClass,
}

impl ContractionTuple {
    /// Checks membership in `class` and builds the tuple.
    pub fn new(p: usize, k: usize, r: Vec<usize>, class: TupleClass) -> Result<Self> {
        check_params(p, k)?;
        if r.len() != k - 1 {
            return Err(Error::InvalidParameter(format!(
                "tuple has length {}, expected k-1 = {}",
                r.len(),
                k - 1
            )));
        }
        let finest = classify(p, k, &r).ok_or(Error::WrongClass { expected: "A" })?;
        let ok = match class {
            TupleClass::A => true,
            TupleClass::B => matches!(finest, TupleClass::C | TupleClass::E),
            TupleClass::C | TupleClass::E => finest == class,
        };
        if !ok {
            return Err(Error::WrongClass { expected: class.as_str() });
        }
        Ok(ContractionTuple { p, k, r, class })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> &[usize] {
        &self.r
    }

    pub fn class(&self) -> TupleClass {
        self.class
    }

    /// The most specific class the tuple belongs to (`C`, `E` or `A`).
    pub fn finest_class(&self) -> TupleClass {
        classify(self.p, self.k, &self.r).expect("validated at construction")
    }

    /// Order of the running tensor before each step: `jp - 2(r_1 + … + r_{j-1})`.
    pub fn running_orders(&self) -> Vec<usize> {
        running_orders(self.p, &self.r)
    }

    /// Order of the fully iterated contraction.
    pub fn final_order(&self) -> usize {
        self.k * self.p - 2 * self.r.iter().sum::<usize>()
    }
}

impl fmt::Display for ContractionTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, r) in self.r.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str(")")
    }
}

fn check_params(p: usize, k: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be at least 1".into()));
    }
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    Ok(())
}

fn running_orders(p: usize, r: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(r.len());
    let mut order = p;
    for &rj in r {
        out.push(order);
        order = order + p - 2 * rj;
    }
    out
}

/// Finest class of `r`, or `None` if it is not in `A_k`.
fn classify(p: usize, k: usize, r: &[usize]) -> Option<TupleClass> {
    if r.len() + 1 != k {
        return None;
    }
    let mut order = p;
    for &rj in r {
        if rj > p || rj > order {
            return None;
        }
        order = order + p - 2 * rj;
    }
    if order != 0 {
        return Some(TupleClass::A);
    }
    if r.iter().all(|&x| x == 0 || x == p) {
        Some(TupleClass::C)
    } else {
        Some(TupleClass::E)
    }
}

/// All members of a class, duplicate-free, in lexicographic order.
///
/// Depth-first with pruning: a running order above `(steps left) · p` can no
/// longer be reduced to zero, so such branches are cut for `B`, `C`, `E`.
pub fn enumerate(p: usize, k: usize, class: TupleClass) -> Result<Vec<ContractionTuple>> {
    check_params(p, k)?;
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(k - 1);
    dfs(p, k, class, p, &mut prefix, &mut out);
    Ok(out)
}

fn dfs(p: usize, k: usize, class: TupleClass, order: usize, prefix: &mut Vec<usize>, out: &mut Vec<ContractionTuple>) {
    let depth = prefix.len();
    if depth == k - 1 {
        let keep = match class {
            TupleClass::A => true,
            TupleClass::B => order == 0,
            TupleClass::C => order == 0 && prefix.iter().all(|&x| x == 0 || x == p),
            TupleClass::E => order == 0 && prefix.iter().any(|&x| x != 0 && x != p),
        };
        if keep {
            out.push(ContractionTuple {
                p,
                k,
                r: prefix.clone(),
                class,
            });
        }
        return;
    }
    let steps_after = k - 2 - depth;
    for r in 0..=p.min(order) {
        if class == TupleClass::C && r != 0 && r != p {
            continue;
        }
        let next = order + p - 2 * r;
        if class != TupleClass::A && next > steps_after * p {
            continue;
        }
        prefix.push(r);
        dfs(p, k, class, next, prefix, out);
        prefix.pop();
    }
}

pub fn count_c(p: usize, k: usize) -> Result<usize> {
    Ok(enumerate(p, k, TupleClass::C)?.len())
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `Cat_n = C(2n, n) / (n + 1)`.
pub fn catalan(n: usize) -> BigUint {
    binomial(2 * n, n) / BigUint::from(n + 1)
}

/// `E[N(0,1)^k]`: `(k-1)!!` for even `k`, else 0.
pub fn gaussian_moment(k: usize) -> BigUint {
    if k % 2 == 1 {
        return BigUint::zero();
    }
    (1..k).step_by(2).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// `E[S^k]` for a standard semicircular `S`: `Cat_{k/2}` for even `k`, else 0.
pub fn semicircle_moment(k: usize) -> BigUint {
    if k % 2 == 1 {
        return BigUint::zero();
    }
    catalan(k / 2)
}

/// Step signs `s_j = 1 - 2 r_j / p` of a class-`C` tuple.
pub fn dyck_steps(t: &ContractionTuple) -> Result<Vec<i8>> {
    if t.finest_class() != TupleClass::C {
        return Err(Error::WrongClass { expected: "C" });
    }
    Ok(t.r.iter().map(|&r| if r == 0 { 1 } else { -1 }).collect())
}

/// Checks the Dyck-path conditions on the step signs of a class-`C` tuple.
pub fn dyck_check(t: &ContractionTuple) -> Result<bool> {
    Ok(dyck_condition(&dyck_steps(t)?))
}

/// Nonnegative partial sums `1 + s_1 + … + s_j ≥ 0` for `j ≤ k-2`, total `0`.
pub fn dyck_condition(s: &[i8]) -> bool {
    let mut height: i64 = 1;
    for (j, &step) in s.iter().enumerate() {
        height += step as i64;
        if j + 1 < s.len() && height < 0 {
            return false;
        }
    }
    !s.is_empty() && height == 0
}

/// The stronger-looking form: `1 + s_1 + … + s_j ≥ (1 - s_{j+1}) / 2` for
/// `j ≤ k-2`, total `0`.
pub fn contraction_condition(s: &[i8]) -> bool {
    let mut height: i64 = 1;
    for (j, &step) in s.iter().enumerate() {
        height += step as i64;
        if j + 1 < s.len() {
            let next = s[j + 1] as i64;
            if 2 * height < 1 - next {
                return false;
            }
        }
    }
    !s.is_empty() && height == 0
}

/// Number of `±1` step sequences of length `k - 1` satisfying [`dyck_condition`].
pub fn count_dyck_sequences(k: usize) -> usize {
    let len = k.saturating_sub(1);
    let mut s = vec![0i8; len];
    (0u64..1 << len)
        .filter(|mask| {
            for (j, slot) in s.iter_mut().enumerate() {
                *slot = if mask >> j & 1 == 1 { -1 } else { 1 };
            }
            dyck_condition(&s)
        })
        .count()
}

/// `∏_j r_j! C(p, r_j) C(jp - 2(r_1+…+r_{j-1}), r_j)`, the classical product
/// formula weight of an iterated contraction.
pub fn classical_coeff(t: &ContractionTuple) -> BigUint {
    t.running_orders()
        .iter()
        .zip(&t.r)
        .fold(BigUint::one(), |acc, (&o, &r)| {
            acc * factorial(r) * binomial(t.p, r) * binomial(o, r)
        })
}

/// `∏_j r_j! C(jp - 2(r_1+…+r_{j-1}), r_j)`: the classical weight without the
/// `C(p, r_j)` factors, which equal one on class `C`.
fn reduced_coeff(t: &ContractionTuple) -> BigUint {
    t.running_orders()
        .iter()
        .zip(&t.r)
        .fold(BigUint::one(), |acc, (&o, &r)| acc * factorial(r) * binomial(o, r))
}

/// `∏_j C(j - 2(r_1+…+r_{j-1})/p, r_j/p)` for a class-`C` tuple.
pub fn limit_weight(t: &ContractionTuple) -> Result<BigUint> {
    if t.finest_class() != TupleClass::C {
        return Err(Error::WrongClass { expected: "C" });
    }
    Ok(t.running_orders()
        .iter()
        .zip(&t.r)
        .fold(BigUint::one(), |acc, (&o, &r)| acc * binomial(o / t.p, r / t.p)))
}

/// Limit of the symmetrized iterated contraction over a class-`C` tuple for
/// a sequence of unit-variance kernels with vanishing middle contractions.
pub fn limit_value(t: &ContractionTuple) -> Result<Rational> {
    let w = limit_weight(t)?;
    let d = reduced_coeff(t);
    Ok(Rational::new(w.into(), d.into()))
}

/// `gcd`-reduced ratio helper kept for callers holding integer weights.
pub fn ratio(num: &BigUint, den: &BigUint) -> Rational {
    let g = num.gcd(den);
    Rational::new((num / &g).into(), (den / &g).into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs(v: &[ContractionTuple]) -> Vec<Vec<usize>> {
        v.iter().map(|t| t.r().to_vec()).collect()
    }

    #[test]
    fn c4_for_p2() {
        let c = enumerate(2, 4, TupleClass::C).unwrap();
        assert_eq!(rs(&c), vec![vec![0, 2, 2], vec![2, 0, 2]]);
        // (2,2,0) violates r_2 ≤ 2p - 2r_1 = 0
        assert!(ContractionTuple::new(2, 4, vec![2, 2, 0], TupleClass::A).is_err());
    }

    #[test]
    fn small_sets() {
        assert_eq!(rs(&enumerate(1, 2, TupleClass::B).unwrap()), vec![vec![1]]);
        for p in 1..5 {
            for k in [3, 5, 7] {
                assert!(enumerate(p, k, TupleClass::C).unwrap().is_empty());
            }
        }
        // free third moments can be nonzero: B_3 is not empty for p = 2
        assert_eq!(rs(&enumerate(2, 3, TupleClass::B).unwrap()), vec![vec![1, 2]]);
        let b4 = enumerate(2, 4, TupleClass::B).unwrap();
        assert_eq!(rs(&b4), vec![vec![0, 2, 2], vec![1, 1, 2], vec![2, 0, 2]]);
        assert!(enumerate(0, 3, TupleClass::A).is_err());
        assert!(enumerate(2, 1, TupleClass::A).is_err());
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for p in 1..=3 {
            for k in 2..=6 {
                let mut brute: Vec<Vec<usize>> = Vec::new();
                let total = (p + 1usize).pow((k - 1) as u32);
                for mut code in 0..total {
                    let mut r = vec![0; k - 1];
                    for slot in r.iter_mut() {
                        *slot = code % (p + 1);
                        code /= p + 1;
                    }
                    brute.push(r);
                }
                brute.sort();
                for class in [TupleClass::A, TupleClass::B, TupleClass::C, TupleClass::E] {
                    let want: Vec<Vec<usize>> = brute
                        .iter()
                        .filter(|r| ContractionTuple::new(p, k, r.to_vec(), class).is_ok())
                        .cloned()
                        .collect();
                    assert_eq!(rs(&enumerate(p, k, class).unwrap()), want, "p={p} k={k} {class}");
                }
            }
        }
    }

    #[test]
    fn catalan_and_counts() {
        assert_eq!(catalan(0), BigUint::from(1u32));
        for p in 2..=5 {
            assert_eq!(count_c(p, 4).unwrap(), 2);
            assert_eq!(count_c(p, 6).unwrap(), 5);
        }
        assert_eq!(semicircle_moment(8), BigUint::from(14u32));
        assert_eq!(gaussian_moment(6), BigUint::from(15u32));
        assert_eq!(gaussian_moment(7), BigUint::zero());
        assert_eq!(semicircle_moment(7), BigUint::zero());
        assert_eq!(gaussian_moment(0), BigUint::one());
    }

    #[test]
    fn dyck_examples() {
        let t = ContractionTuple::new(2, 4, vec![0, 2, 2], TupleClass::C).unwrap();
        assert_eq!(dyck_steps(&t).unwrap(), vec![1, -1, -1]);
        assert!(dyck_check(&t).unwrap());
        let e = ContractionTuple::new(2, 4, vec![1, 1, 2], TupleClass::E).unwrap();
        assert!(matches!(dyck_check(&e), Err(Error::WrongClass { .. })));
    }

    #[test]
    fn coefficients() {
        let t = ContractionTuple::new(1, 2, vec![1], TupleClass::B).unwrap();
        assert_eq!(classical_coeff(&t), BigUint::from(1u32));
        let t = ContractionTuple::new(2, 4, vec![0, 2, 2], TupleClass::C).unwrap();
        assert_eq!(classical_coeff(&t), BigUint::from(24u32));
        let z = ContractionTuple::new(3, 4, vec![0, 0, 0], TupleClass::A).unwrap();
        assert_eq!(classical_coeff(&z), BigUint::from(1u32));
    }

    #[test]
    fn limit_weights() {
        let a = ContractionTuple::new(2, 4, vec![0, 2, 2], TupleClass::C).unwrap();
        let b = ContractionTuple::new(2, 4, vec![2, 0, 2], TupleClass::C).unwrap();
        assert_eq!(limit_weight(&a).unwrap(), BigUint::from(2u32));
        assert_eq!(limit_weight(&b).unwrap(), BigUint::from(1u32));
        assert_eq!(limit_value(&a).unwrap(), Rational::new(1.into(), 12.into()));
        assert_eq!(limit_value(&b).unwrap(), Rational::new(1.into(), 4.into()));
    }

    #[test]
    fn condition_forms_agree_small() {
        for k in 2..=8 {
            let len = k - 1;
            for mask in 0u32..1 << len {
                let s: Vec<i8> = (0..len).map(|j| if mask >> j & 1 == 1 { -1 } else { 1 }).collect();
                assert_eq!(dyck_condition(&s), contraction_condition(&s));
            }
        }
    }
}
