//! Closed-form moments as sums over `B_k`, the fourth-moment identities, and
//! the diagnostics behind the fourth-moment criterion.
//!
//! `E[I_p(f)^k]` is a sum over `B_k` of iterated contractions `f ⋆_{r_1} f
//! ⋆_{r_2} … f`, each of order 0. Two evaluation strategies exist:
//!
//! - prefix tree: tuples are visited in lexicographic order and the dense
//!   intermediate for each shared prefix `(r_1, …, r_j)` is computed once;
//! - network: each tuple is evaluated as a tensor network (see
//!   [`crate::network`]), which never materializes the high-order
//!   intermediates and so scales to fine grids.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigUint;

use crate::budget::checked_entries;
use crate::combinatorics::{
    binomial, classical_coeff, enumerate, factorial, gaussian_moment, semicircle_moment, ContractionTuple, TupleClass,
};
use crate::contract::{contract_classical, contract_classical_sym, contract_free};
use crate::error::{Error, Result};
use crate::family::{family_kernel, Family};
use crate::kernel::{GridKernel, Model, ScaledKernel};
use crate::network;
use crate::scalar::Scalar;

/// How the iterated contractions of a `B_k` sum are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluation {
    /// Prefix tree when its largest intermediate fits the entry budget,
    /// network otherwise.
    #[default]
    Auto,
    PrefixTree,
    Network,
}

impl Evaluation {
    pub fn as_str(self) -> &'static str {
        match self {
            Evaluation::Auto => "auto",
            Evaluation::PrefixTree => "prefix-tree",
            Evaluation::Network => "network",
        }
    }
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Evaluation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Evaluation::Auto),
            "prefix-tree" | "prefix" => Ok(Evaluation::PrefixTree),
            "network" => Ok(Evaluation::Network),
            other => Err(Error::InvalidParameter(alloc::format!("unknown evaluation '{other}'"))),
        }
    }
}

/// One summand of a `B_k` expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleTerm<S> {
    pub tuple: ContractionTuple,
    /// The iterated (symmetrized, in the classical model) contraction.
    pub contraction: S,
    /// `1` in the free model, the product-formula weight classically.
    pub coefficient: BigUint,
    /// `coefficient · contraction`.
    pub term: S,
}

fn largest_intermediate(tuples: &[ContractionTuple]) -> usize {
    tuples
        .iter()
        .flat_map(|t| t.running_orders())
        .max()
        .unwrap_or(0)
}

fn resolve(eval: Evaluation, resolution: usize, tuples: &[ContractionTuple]) -> Evaluation {
    match eval {
        Evaluation::Auto => {
            if checked_entries(resolution, largest_intermediate(tuples)).is_ok() {
                Evaluation::PrefixTree
            } else {
                Evaluation::Network
            }
        }
        other => other,
    }
}

/// Depth-first walk of the trie of lexicographically sorted tuples, keeping
/// one dense intermediate per depth.
fn prefix_tree<S: Scalar>(
    f: &GridKernel<S>,
    tuples: &[ContractionTuple],
    step: impl Fn(&GridKernel<S>, &GridKernel<S>, usize) -> Result<GridKernel<S>>,
) -> Result<Vec<S>> {
    let mut stack: Vec<GridKernel<S>> = alloc::vec![f.clone()];
    let mut prev: &[usize] = &[];
    let mut out = Vec::with_capacity(tuples.len());
    for t in tuples {
        let r = t.r();
        let shared = r.iter().zip(prev).take_while(|(a, b)| a == b).count();
        stack.truncate(shared + 1);
        for &rj in &r[shared..] {
            let next = step(stack.last().expect("root is never popped"), f, rj)?;
            stack.push(next);
        }
        let value = stack.last().and_then(|g| g.value()).expect("B_k tuples end at order 0");
        out.push(value.clone());
        prev = r;
    }
    Ok(out)
}

/// Summands of `E[I_p(f)^k]` in the free model, in lexicographic tuple order.
pub fn free_terms<S: Scalar>(f: &GridKernel<S>, k: usize, eval: Evaluation) -> Result<Vec<TupleTerm<S>>> {
    if !f.is_mirror_symmetric() {
        return Err(Error::NotMirrorSymmetric);
    }
    let tuples = tuples_for(f, k)?;
    let values = match resolve(eval, f.resolution(), &tuples) {
        Evaluation::Network => tuples
            .iter()
            .map(|t| network::free_value(f, t))
            .collect::<Result<Vec<_>>>()?,
        _ => prefix_tree(f, &tuples, contract_free)?,
    };
    Ok(tuples
        .into_iter()
        .zip(values)
        .map(|(tuple, contraction)| TupleTerm {
            tuple,
            term: contraction.clone(),
            contraction,
            coefficient: BigUint::from(1u32),
        })
        .collect())
}

/// Summands of `E[I_p(f)^k]` in the classical model; `f` is symmetrized first.
pub fn classical_terms<S: Scalar>(f: &GridKernel<S>, k: usize, eval: Evaluation) -> Result<Vec<TupleTerm<S>>> {
    let f = f.symmetrize();
    let tuples = tuples_for(&f, k)?;
    let values = match resolve(eval, f.resolution(), &tuples) {
        Evaluation::Network => {
            let mut memo = network::ComponentMemo::new();
            tuples
                .iter()
                .map(|t| network::classical_value_memo(&f, t, &mut memo))
                .collect::<Result<Vec<_>>>()?
        }
        _ => prefix_tree(&f, &tuples, contract_classical_sym)?,
    };
    Ok(tuples
        .into_iter()
        .zip(values)
        .map(|(tuple, contraction)| {
            let coefficient = classical_coeff(&tuple);
            let term = S::from_biguint(&coefficient) * contraction.clone();
            TupleTerm {
                tuple,
                contraction,
                coefficient,
                term,
            }
        })
        .collect())
}

fn tuples_for<S: Scalar>(f: &GridKernel<S>, k: usize) -> Result<Vec<ContractionTuple>> {
    if f.order() == 0 {
        return Err(Error::InvalidParameter("moment formulas need order p ≥ 1".into()));
    }
    enumerate(f.order(), k, TupleClass::B)
}

fn sum_terms<S: Scalar>(terms: &[TupleTerm<S>]) -> S {
    terms.iter().fold(S::zero(), |acc, t| acc + t.term.clone())
}

pub fn free_moment<S: Scalar>(f: &GridKernel<S>, k: usize) -> Result<S> {
    free_moment_with(f, k, Evaluation::Auto)
}

pub fn free_moment_with<S: Scalar>(f: &GridKernel<S>, k: usize, eval: Evaluation) -> Result<S> {
    Ok(sum_terms(&free_terms(f, k, eval)?))
}

pub fn classical_moment<S: Scalar>(f: &GridKernel<S>, k: usize) -> Result<S> {
    classical_moment_with(f, k, Evaluation::Auto)
}

pub fn classical_moment_with<S: Scalar>(f: &GridKernel<S>, k: usize, eval: Evaluation) -> Result<S> {
    Ok(sum_terms(&classical_terms(f, k, eval)?))
}

/// `E[F^k]` for `F` the integral of a scaled kernel.
pub fn scaled_moment<S: Scalar>(f: &ScaledKernel<S>, k: usize, model: Model, eval: Evaluation) -> Result<S> {
    let base = match model {
        Model::Classical => classical_moment_with(&f.kernel, k, eval)?,
        Model::Free => free_moment_with(&f.kernel, k, eval)?,
    };
    f.rescale(base, k)
}

/// `E[S^k]` of the limit law: standard Gaussian or standard semicircular.
pub fn target_moment<S: Scalar>(model: Model, k: usize) -> S {
    match model {
        Model::Classical => S::from_biguint(&gaussian_moment(k)),
        Model::Free => S::from_biguint(&semicircle_moment(k)),
    }
}

/// `2‖f‖⁴ + Σ_{r=1}^{p-1} ‖f ⌢^r f‖²`, the free fourth moment of a
/// mirror-symmetric kernel without any normalization.
pub fn free_fourth_identity<S: Scalar>(f: &GridKernel<S>) -> Result<S> {
    if !f.is_mirror_symmetric() {
        return Err(Error::NotMirrorSymmetric);
    }
    let n = f.norm_sq();
    let mut acc = S::from_usize(2) * n.clone() * n;
    for r in 1..f.order() {
        acc += contract_free(f, f, r)?.norm_sq();
    }
    Ok(acc)
}

fn require_normalized<S: Scalar>(f: &ScaledKernel<S>, model: Model) -> Result<()> {
    let sym_ok = match model {
        Model::Classical => f.kernel.is_symmetric(),
        Model::Free => f.kernel.is_mirror_symmetric(),
    };
    if !sym_ok {
        return Err(match model {
            Model::Classical => Error::NotSymmetric,
            Model::Free => Error::NotMirrorSymmetric,
        });
    }
    if !f.is_normalized(model) {
        return Err(Error::NotNormalized);
    }
    Ok(())
}

/// `3 + Σ_{r=1}^{p-1} C(p,r)² [(p!)² ‖f⊗_r f‖² + (r!)² C(p,r)² (2p-2r)! ‖f⊗̃_r f‖²]`
/// for a symmetric kernel of unit variance.
pub fn classical_fourth_identity<S: Scalar>(f: &ScaledKernel<S>) -> Result<S> {
    require_normalized(f, Model::Classical)?;
    let p = f.kernel.order();
    let s2 = f.scale_sq.clone() * f.scale_sq.clone();
    let pf = S::from_biguint(&factorial(p));
    let mut acc = S::from_usize(3);
    for r in 1..p {
        let plain = contract_classical(&f.kernel, &f.kernel, r)?;
        let sym = plain.symmetrize();
        let c = S::from_biguint(&binomial(p, r));
        let rf = S::from_biguint(&factorial(r));
        let tail = S::from_biguint(&factorial(2 * p - 2 * r));
        let inner = pf.clone() * pf.clone() * plain.norm_sq()
            + rf.clone() * rf * c.clone() * c.clone() * tail * sym.norm_sq();
        acc += c.clone() * c * inner * s2.clone();
    }
    Ok(acc)
}

/// Both sides of `(2p)! ‖f ⊗̃ f‖² = 2 (p!)² ‖f‖⁴ + (p!)² Σ_{r=1}^{p-1} C(p,r)² ‖f ⊗_r f‖²`
/// for a symmetric kernel. Under unit variance the first right-hand term is `2`.
pub fn beauty_formula_sides<S: Scalar>(f: &ScaledKernel<S>) -> Result<(S, S)> {
    if !f.kernel.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let p = f.kernel.order();
    let s2 = f.scale_sq.clone() * f.scale_sq.clone();
    let pf = S::from_biguint(&factorial(p));
    let lhs = S::from_biguint(&factorial(2 * p)) * contract_classical_sym(&f.kernel, &f.kernel, 0)?.norm_sq() * s2.clone();
    let n = f.norm_sq();
    let mut sum = S::zero();
    for r in 1..p {
        let c = S::from_biguint(&binomial(p, r));
        sum += c.clone() * c * contract_classical(&f.kernel, &f.kernel, r)?.norm_sq();
    }
    let rhs = S::from_usize(2) * pf.clone() * pf.clone() * n.clone() * n + pf.clone() * pf * sum * s2;
    Ok((lhs, rhs))
}

/// Squared contraction norms for `r = 1..p-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionProfile<S> {
    pub model: Model,
    /// `‖f ⊗_r f‖²` classically, `‖f ⌢^r f‖²` freely.
    pub norms: Vec<S>,
    /// `‖f ⊗̃_r f‖²` (classical model only).
    pub symmetrized: Option<Vec<S>>,
}

/// Contraction norms of the scaled kernel; classically of its symmetrization.
pub fn contraction_profile<S: Scalar>(f: &ScaledKernel<S>, model: Model) -> Result<ContractionProfile<S>> {
    let s2 = f.scale_sq.clone() * f.scale_sq.clone();
    let p = f.kernel.order();
    match model {
        Model::Classical => {
            let g = f.kernel.symmetrize();
            let mut norms = Vec::new();
            let mut symmetrized = Vec::new();
            for r in 1..p {
                let c = contract_classical(&g, &g, r)?;
                symmetrized.push(c.symmetrize().norm_sq() * s2.clone());
                norms.push(c.norm_sq() * s2.clone());
            }
            Ok(ContractionProfile {
                model,
                norms,
                symmetrized: Some(symmetrized),
            })
        }
        Model::Free => {
            let norms = (1..p)
                .map(|r| Ok(contract_free(&f.kernel, &f.kernel, r)?.norm_sq() * s2.clone()))
                .collect::<Result<Vec<_>>>()?;
            Ok(ContractionProfile {
                model,
                norms,
                symmetrized: None,
            })
        }
    }
}

/// `E[F⁴] - 3` classically, `E[F⁴] - 2` freely, for a unit-variance kernel.
pub fn fourth_moment_gap<S: Scalar>(f: &ScaledKernel<S>, model: Model) -> Result<S> {
    require_normalized(f, model)?;
    Ok(scaled_moment(f, 4, model, Evaluation::Auto)? - target_moment::<S>(model, 4))
}

/// Which computation produced a moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MomentPath {
    /// Sum over `B_k` of iterated contractions.
    Formula,
    /// Repeated product formula on chaos expansions.
    Expansion,
    /// Gaussian polynomial expansion with Wick pairings.
    Oracle,
    /// Monte Carlo.
    Simulation,
}

impl MomentPath {
    pub fn as_str(self) -> &'static str {
        match self {
            MomentPath::Formula => "formula",
            MomentPath::Expansion => "expansion",
            MomentPath::Oracle => "oracle",
            MomentPath::Simulation => "simulation",
        }
    }
}

impl fmt::Display for MomentPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MomentPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(MomentPath::Formula),
            "expansion" => Ok(MomentPath::Expansion),
            "oracle" => Ok(MomentPath::Oracle),
            "simulation" => Ok(MomentPath::Simulation),
            other => Err(Error::InvalidParameter(alloc::format!("unknown path '{other}'"))),
        }
    }
}

/// A moment value with its provenance. A standard error is carried exactly
/// when the value comes from simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport<S> {
    k: usize,
    value: S,
    path: MomentPath,
    stderr: Option<f64>,
    target: Option<S>,
}

impl<S: Scalar> MomentReport<S> {
    /// A deterministic value. Panics if `path` is [`MomentPath::Simulation`].
    pub fn exact(k: usize, value: S, path: MomentPath, target: Option<S>) -> Self {
        assert!(path != MomentPath::Simulation, "simulated reports need a standard error");
        MomentReport {
            k,
            value,
            path,
            stderr: None,
            target,
        }
    }

    pub fn simulated(k: usize, value: S, stderr: f64, target: Option<S>) -> Self {
        MomentReport {
            k,
            value,
            path: MomentPath::Simulation,
            stderr: Some(stderr),
            target,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn value(&self) -> &S {
        &self.value
    }

    pub fn path(&self) -> MomentPath {
        self.path
    }

    pub fn stderr(&self) -> Option<f64> {
        self.stderr
    }

    pub fn target(&self) -> Option<&S> {
        self.target.as_ref()
    }

    pub fn with_target(mut self, target: S) -> Self {
        self.target = Some(target);
        self
    }

    /// `(value - target) / stderr` for simulated reports with a target.
    pub fn z_score(&self) -> Option<f64> {
        let t = self.target.as_ref()?.to_f64();
        let se = self.stderr?;
        Some((self.value.to_f64() - t) / se)
    }
}

/// One `(n, k)` cell of a convergence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow<S> {
    pub n: usize,
    pub k: usize,
    pub moment: S,
    pub target: S,
    /// Fourth-moment gap of the `n`-th kernel (repeated on each of its rows).
    pub gap: S,
    /// Sum of the `C_k` summands.
    pub c_sum: S,
    /// Sum of the `E_k` summands.
    pub e_sum: S,
    /// Squared contraction norms of the `n`-th kernel, `r = 1..p-1`.
    pub profile: Vec<S>,
    /// The `C_k` summands, rescaled to the normalized kernel.
    pub c_terms: Vec<TupleTerm<S>>,
}

/// Moments `k = 2..=k_max` of each family member with their `C_k` / `E_k`
/// split, target, fourth-moment gap and contraction profile.
pub fn convergence_report<S: Scalar>(
    family: Family,
    n_list: &[usize],
    k_max: usize,
    model: Model,
) -> Result<Vec<ConvergenceRow<S>>> {
    convergence_report_with(family, n_list, k_max, model, Evaluation::Auto)
}

type MomentSplit<S> = (usize, S, S, S, Vec<TupleTerm<S>>);

pub fn convergence_report_with<S: Scalar>(
    family: Family,
    n_list: &[usize],
    k_max: usize,
    model: Model,
    eval: Evaluation,
) -> Result<Vec<ConvergenceRow<S>>> {
    if k_max < 2 {
        return Err(Error::InvalidParameter("k_max must be at least 2".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let f = family_kernel::<S>(family, n, model)?;
        let kernel = match model {
            Model::Classical => f.kernel.symmetrize(),
            Model::Free => f.kernel.clone(),
        };
        let profile = contraction_profile(&f, model)?;
        let profile = profile.symmetrized.unwrap_or(profile.norms);
        // (k, moment, C sum, E sum, C summands)
        let mut per_k: Vec<MomentSplit<S>> = Vec::new();
        let mut fourth = None;
        for k in 2..=k_max.max(4) {
            let terms = match model {
                Model::Classical => classical_terms(&kernel, k, eval)?,
                Model::Free => free_terms(&kernel, k, eval)?,
            };
            let mut c_sum = S::zero();
            let mut e_sum = S::zero();
            let mut c_terms = Vec::new();
            for t in terms {
                let term = f.rescale(t.term.clone(), k)?;
                if t.tuple.finest_class() == TupleClass::C {
                    c_sum += term.clone();
                    c_terms.push(TupleTerm {
                        contraction: f.rescale(t.contraction.clone(), k)?,
                        term,
                        tuple: t.tuple,
                        coefficient: t.coefficient,
                    });
                } else {
                    e_sum += term;
                }
            }
            let moment = c_sum.clone() + e_sum.clone();
            if k == 4 {
                fourth = Some(moment.clone());
            }
            if k <= k_max {
                per_k.push((k, moment, c_sum, e_sum, c_terms));
            }
        }
        let gap = fourth.expect("k = 4 always evaluated") - target_moment::<S>(model, 4);
        for (k, moment, c_sum, e_sum, c_terms) in per_k {
            rows.push(ConvergenceRow {
                n,
                k,
                moment,
                target: target_moment(model, k),
                gap: gap.clone(),
                c_sum,
                e_sum,
                profile: profile.clone(),
                c_terms,
            });
        }
    }
    Ok(rows)
}

/// Relative distance to a target, measured against `max(|target|, 1)` so
/// that vanishing targets (odd moments) are handled.
pub fn relative_error<S: Scalar>(value: &S, target: &S) -> f64 {
    let t = target.to_f64();
    (value.to_f64() - t).abs() / t.abs().max(1.0)
}
