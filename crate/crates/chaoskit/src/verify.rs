//! The invariant suite behind `chaoskit verify`.
//!
//! Each check is named, fast, and self-contained. A check whose computation
//! errors counts as a failure and reports the error as its detail.

use std::path::Path;

use chaoskit_core::combinatorics::{
    contraction_condition, count_c, dyck_condition, enumerate, gaussian_moment, limit_weight, semicircle_moment,
};
use chaoskit_core::moments::{beauty_formula_sides, classical_moment_with, free_moment_with, scaled_moment};
use chaoskit_core::{
    classical_fourth_identity, classical_moment, family_kernel, fourth_moment_gap, free_fourth_identity, free_moment,
    moment_via_expansion, normalize_variance, wick_oracle_moment, Evaluation, Family, GridKernel, Model,
    NumericMode, Rational, Scalar, ScaledKernel, TupleClass,
};
use num_bigint::BigUint;

use crate::io::{self, value_to_scalar, IoError, KernelDoc};

/// Relative tolerance of the exact-versus-binary64 comparison.
pub const DUAL_MODE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<Option<String>, String>;

fn check(name: &str, f: impl FnOnce() -> Outcome) -> Check {
    let (passed, detail) = match f() {
        Ok(None) => (true, String::new()),
        Ok(Some(d)) => (true, d),
        Err(e) => (false, e),
    };
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn q(n: i64, d: u64) -> Rational {
    Rational::from_ratio(n, d)
}

fn kernel(p: usize, m: usize, c: &[i64]) -> GridKernel<Rational> {
    GridKernel::new(p, m, c.iter().map(|&x| q(x, 1)).collect()).expect("fixture shapes are valid")
}

/// Named kernels shared by the checks.
fn fixtures() -> Vec<(&'static str, GridKernel<Rational>, usize)> {
    vec![
        ("pair", kernel(2, 2, &[0, 1, 1, 0]), 6),
        ("ones(2,1)", kernel(2, 1, &[1]), 6),
        ("ones(1,1)", kernel(1, 1, &[1]), 8),
        ("sym3x3", kernel(2, 3, &[1, -2, 0, -2, 3, 1, 0, 1, -1]), 4),
        ("order3", kernel(3, 2, &[1, 0, 0, 2, 0, 2, 2, -1]).symmetrize(), 4),
    ]
}

fn mirror(f: &GridKernel<Rational>) -> GridKernel<Rational> {
    f.add(&f.adjoint()).expect("same shape").scale(&q(1, 2))
}

fn catalan_identity() -> Outcome {
    for p in 1..=5 {
        for k in 2..=10 {
            let got = BigUint::from(count_c(p, k).map_err(|e| e.to_string())?);
            ensure(got == semicircle_moment(k), || format!("p={p} k={k}: |C_k| = {got}"))?;
        }
    }
    Ok(None)
}

fn gaussian_identity() -> Outcome {
    for p in 2..=4 {
        for k in [4usize, 6, 8] {
            let tuples = enumerate(p, k, TupleClass::C).map_err(|e| e.to_string())?;
            let mut sum = BigUint::from(0u32);
            for t in &tuples {
                sum += limit_weight(t).map_err(|e| e.to_string())?;
            }
            ensure(sum == gaussian_moment(k), || format!("p={p} k={k}: weights sum to {sum}"))?;
        }
    }
    Ok(None)
}

fn dyck_equivalence() -> Outcome {
    for k in 2..=12usize {
        let len = k - 1;
        let mut s = vec![0i8; len];
        let mut count = 0;
        for mask in 0u64..1 << len {
            for (j, slot) in s.iter_mut().enumerate() {
                *slot = if mask >> j & 1 == 1 { -1 } else { 1 };
            }
            let (a, b) = (dyck_condition(&s), contraction_condition(&s));
            ensure(a == b, || format!("k={k}: conditions disagree on {s:?}"))?;
            count += usize::from(a);
        }
        let want = count_c(2, k).map_err(|e| e.to_string())?;
        ensure(count == want, || format!("k={k}: {count} sequences, |C_k| = {want}"))?;
    }
    Ok(None)
}

fn classical_paths() -> Outcome {
    for (name, f, kmax) in fixtures() {
        let f = f.symmetrize();
        for k in 2..=kmax {
            let a = classical_moment(&f, k).map_err(|e| e.to_string())?;
            let b = moment_via_expansion(&f, k, Model::Classical).map_err(|e| e.to_string())?;
            let c = wick_oracle_moment(&f, k).map_err(|e| e.to_string())?;
            ensure(a == b && b == c, || format!("{name} k={k}: formula {a}, expansion {b}, oracle {c}"))?;
        }
    }
    Ok(None)
}

fn free_paths() -> Outcome {
    for (name, f, kmax) in fixtures() {
        let f = mirror(&f);
        for k in 2..=kmax.min(6) {
            let a = free_moment(&f, k).map_err(|e| e.to_string())?;
            let b = moment_via_expansion(&f, k, Model::Free).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{name} k={k}: formula {a}, expansion {b}"))?;
        }
    }
    Ok(None)
}

fn known_values() -> Outcome {
    let e = |r: chaoskit_core::Result<Rational>| r.map_err(|e| e.to_string());
    let cases = [
        ("pair classical k=4", e(classical_moment(&kernel(2, 2, &[0, 1, 1, 0]), 4))?, q(9, 1)),
        ("ones(2,1) classical k=4", e(classical_moment(&kernel(2, 1, &[1]), 4))?, q(60, 1)),
        ("ones(2,1) free k=4", e(free_moment(&kernel(2, 1, &[1]), 4))?, q(3, 1)),
        ("ones(1,1) classical k=8", e(classical_moment(&kernel(1, 1, &[1]), 8))?, q(105, 1)),
        ("ones(1,1) free k=6", e(free_moment(&kernel(1, 1, &[1]), 6))?, q(5, 1)),
    ];
    for (name, got, want) in cases {
        ensure(got == want, || format!("{name}: {got}, expected {want}"))?;
    }
    Ok(None)
}

fn fourth_identities() -> Outcome {
    for (name, f, _) in fixtures() {
        let n = normalize_variance(&f.symmetrize(), Model::Classical).map_err(|e| e.to_string())?;
        let m4 = scaled_moment(&n, 4, Model::Classical, Evaluation::Auto).map_err(|e| e.to_string())?;
        let id = classical_fourth_identity(&n).map_err(|e| e.to_string())?;
        ensure(m4 == id, || format!("{name} classical: moment {m4}, identity {id}"))?;
        let (l, r) = beauty_formula_sides(&n).map_err(|e| e.to_string())?;
        ensure(l == r, || format!("{name}: beauty formula {l} vs {r}"))?;
        let g = mirror(&f);
        let m4 = free_moment(&g, 4).map_err(|e| e.to_string())?;
        let id = free_fourth_identity(&g).map_err(|e| e.to_string())?;
        ensure(m4 == id, || format!("{name} free: moment {m4}, identity {id}"))?;
    }
    Ok(None)
}

fn dual_mode() -> Outcome {
    let mut worst = 0.0f64;
    for (name, f, kmax) in fixtures() {
        for model in [Model::Classical, Model::Free] {
            let f = match model {
                Model::Classical => f.symmetrize(),
                Model::Free => mirror(&f),
            };
            let g = f.to_f64();
            for k in 2..=kmax.min(6) {
                let (exact, float) = match model {
                    Model::Classical => (classical_moment(&f, k), classical_moment(&g, k)),
                    Model::Free => (free_moment(&f, k), free_moment(&g, k)),
                };
                let exact = exact.map_err(|e| e.to_string())?.to_f64();
                let float = float.map_err(|e| e.to_string())?;
                let rel = (exact - float).abs() / exact.abs().max(1.0);
                worst = worst.max(rel);
                ensure(rel <= DUAL_MODE_TOLERANCE, || {
                    format!("{name} {model} k={k}: exact {exact}, float {float}")
                })?;
            }
        }
    }
    Ok(Some(format!("max relative difference {worst:e}")))
}

fn strategies_agree() -> Outcome {
    for model in [Model::Classical, Model::Free] {
        let f = family_kernel::<Rational>(Family::PairClt, 2, model).map_err(|e| e.to_string())?;
        for k in [4usize, 6] {
            let (a, b) = match model {
                Model::Classical => (
                    classical_moment_with(&f.kernel, k, Evaluation::PrefixTree),
                    classical_moment_with(&f.kernel, k, Evaluation::Network),
                ),
                Model::Free => (
                    free_moment_with(&f.kernel, k, Evaluation::PrefixTree),
                    free_moment_with(&f.kernel, k, Evaluation::Network),
                ),
            };
            let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
            ensure(a == b, || format!("{model} k={k}: prefix tree {a}, network {b}"))?;
        }
    }
    Ok(None)
}

fn gap_decreases() -> Outcome {
    for model in [Model::Classical, Model::Free] {
        let mut prev: Option<Rational> = None;
        for n in [1usize, 2, 4] {
            let f = family_kernel::<Rational>(Family::PairClt, n, model).map_err(|e| e.to_string())?;
            let gap = fourth_moment_gap(&f, model).map_err(|e| e.to_string())?;
            ensure(gap > q(0, 1), || format!("{model} n={n}: gap {gap}"))?;
            if let Some(p) = &prev {
                ensure(&gap < p, || format!("{model} n={n}: gap {gap} not below {p}"))?;
            }
            prev = Some(gap);
        }
    }
    Ok(None)
}

/// The built-in invariants, in a fixed order.
pub fn builtin_suite() -> Vec<Check> {
    vec![
        check("catalan_identity", catalan_identity),
        check("gaussian_moment_identity", gaussian_identity),
        check("dyck_equivalence", dyck_equivalence),
        check("classical_three_paths", classical_paths),
        check("free_two_paths", free_paths),
        check("known_values", known_values),
        check("fourth_moment_identities", fourth_identities),
        check("dual_mode_agreement", dual_mode),
        check("evaluation_strategies_agree", strategies_agree),
        check("pair_clt_gap_decreases", gap_decreases),
    ]
}

/// Checks every expectation recorded in a fixture file. The checks are
/// named `fixture:<file stem>:<invariant>`.
pub fn fixture_checks(path: &Path, mode: Option<NumericMode>) -> Vec<Check> {
    let stem = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    let prefix = format!("fixture:{stem}");
    let doc = match io::read_kernel(path) {
        Ok(d) => d,
        Err(e) => {
            return vec![Check {
                name: format!("{prefix}:load"),
                passed: false,
                detail: e.to_string(),
            }]
        }
    };
    match mode.unwrap_or(doc.kernel.mode()) {
        NumericMode::Exact => fixture_checks_in::<Rational>(&prefix, &doc),
        NumericMode::Float => fixture_checks_in::<f64>(&prefix, &doc),
    }
}

fn fixture_checks_in<S: Scalar>(prefix: &str, doc: &KernelDoc) -> Vec<Check> {
    let name = |what: &str| format!("{prefix}:{what}");
    let f: GridKernel<S> = match doc.kernel.to_scalar() {
        Ok(f) => f,
        Err(e) => {
            return vec![Check {
                name: name("load"),
                passed: false,
                detail: e.to_string(),
            }]
        }
    };
    let Some(expect) = &doc.expect else {
        return vec![Check {
            name: name("expectations"),
            passed: false,
            detail: "fixture has no \"expect\" object".into(),
        }];
    };
    let mut out = Vec::new();
    let flags = [
        ("symmetric", expect.symmetric, f.is_symmetric()),
        ("mirror_symmetric", expect.mirror_symmetric, f.is_mirror_symmetric()),
        ("off_diagonal", expect.off_diagonal, f.is_off_diagonal()),
    ];
    for (what, want, got) in flags {
        if let Some(want) = want {
            out.push(check(&name(what), || {
                ensure(want == got, || format!("expected {want}, found {got}")).map(|_| None)
            }));
        }
    }
    let sk = ScaledKernel::new(f, S::one());
    for (k, want) in &expect.moments {
        out.push(check(&name(&format!("moment_k{k}")), || {
            let k: usize = k.parse().map_err(|_| format!("moment key '{k}' is not an integer"))?;
            let want: S = value_to_scalar(want).map_err(|e: IoError| e.to_string())?;
            let got = scaled_moment(&sk, k, doc.model, Evaluation::Auto).map_err(|e| e.to_string())?;
            ensure(got.approx_eq(&want), || format!("{} moment {k}: {got}, expected {want}", doc.model))?;
            Ok(None)
        }));
    }
    out
}
