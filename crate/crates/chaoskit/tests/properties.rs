use chaoskit::io::{kernel_to_json, parse_kernel, AnyKernel};
use chaoskit::simulate::{mc_classical_moment, mean_and_stderr, pairwise_sum, ClassicalSampler, SampleConfig};
use chaoskit_core::{classical_moment, GridKernel, Model, Rational, Scalar};
use proptest::prelude::*;

fn float_kernel(p: usize, m: usize) -> impl Strategy<Value = GridKernel<f64>> {
    prop::collection::vec(-3.0f64..3.0, m.pow(p as u32)).prop_map(move |c| GridKernel::new(p, m, c).unwrap())
}

fn exact_kernel() -> impl Strategy<Value = GridKernel<Rational>> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(p, m)| {
        prop::collection::vec((-50i64..=50, 1u64..=20), m.pow(p as u32)).prop_map(move |c| {
            GridKernel::new(p, m, c.into_iter().map(|(n, d)| Rational::from_ratio(n, d)).collect()).unwrap()
        })
    })
}

/// `m^{-p/2} Σ_I a_I ∏_j ξ_{i_j}` evaluated directly.
fn product_of_increments(f: &GridKernel<f64>, xi: &[f64]) -> f64 {
    let (p, m) = (f.order(), f.resolution());
    let mut total = 0.0;
    for (flat, a) in f.coeffs().iter().enumerate() {
        let mut rest = flat;
        let mut prod = *a;
        for _ in 0..p {
            prod *= xi[rest % m];
            rest /= m;
        }
        total += prod;
    }
    total * (m as f64).powf(-(p as f64) / 2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn off_diagonal_sampler_is_a_plain_product_sum(
        f in (1usize..=3, 2usize..=4).prop_flat_map(|(p, m)| float_kernel(p, m)),
        xi in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let f = f.off_diagonal_part();
        let xi = &xi[..f.resolution()];
        let got = ClassicalSampler::new(&f).evaluate(xi);
        let want = product_of_increments(&f, xi);
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn exact_kernel_files_round_trip(f in exact_kernel(), free in any::<bool>()) {
        let model = if free { Model::Free } else { Model::Classical };
        let doc = parse_kernel(&kernel_to_json(model, &f)).unwrap();
        prop_assert_eq!(doc.model, model);
        prop_assert_eq!(doc.kernel, AnyKernel::Exact(f));
    }

    #[test]
    fn float_kernel_files_round_trip(f in (1usize..=3, 1usize..=3).prop_flat_map(|(p, m)| float_kernel(p, m))) {
        let doc = parse_kernel(&kernel_to_json(Model::Classical, &f)).unwrap();
        let back: GridKernel<f64> = doc.kernel.to_scalar().unwrap();
        prop_assert_eq!(back.coeffs().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                        f.coeffs().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        // binary64 coefficients become the rationals they encode
        let exact: GridKernel<Rational> = doc.kernel.to_scalar().unwrap();
        prop_assert!(exact.coeffs().iter().zip(f.coeffs()).all(|(r, x)| r.to_f64() == *x));
    }

    #[test]
    fn pairwise_sum_is_exact_on_small_integers(xs in prop::collection::vec(-1000i32..1000, 0..300)) {
        let fs: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        prop_assert_eq!(pairwise_sum(&fs), xs.iter().map(|&x| x as i64).sum::<i64>() as f64);
    }

    #[test]
    fn stderr_scales_with_spread(xs in prop::collection::vec(-10.0f64..10.0, 2..100), c in 0.5f64..4.0) {
        let (m1, s1) = mean_and_stderr(&xs);
        let scaled: Vec<f64> = xs.iter().map(|x| c * x + 1.0).collect();
        let (m2, s2) = mean_and_stderr(&scaled);
        prop_assert!((m2 - (c * m1 + 1.0)).abs() < 1e-9);
        prop_assert!((s2 - c * s1).abs() < 1e-9 * (1.0 + s1));
    }
}

#[test]
fn classical_estimates_are_unbiased_across_seed_batches() {
    let f = GridKernel::new(2, 3, vec![0.0, 1.0, -0.5, 1.0, 0.0, 2.0, -0.5, 2.0, 0.0]).unwrap();
    let exact = f.map(|x| Rational::from_float(*x).unwrap());
    let batches = 20;
    for k in [2usize, 3, 4] {
        let target = classical_moment(&exact, k).unwrap().to_f64();
        let within = (0..batches)
            .filter(|&b| {
                let cfg = SampleConfig::new(1000 + b, 20_000, 2).unwrap();
                let r = mc_classical_moment(&f, k, &cfg).with_target(target);
                r.z_score().unwrap().abs() <= 4.0
            })
            .count();
        assert!(within * 100 >= 95 * batches as usize, "k={k}: {within}/{batches} batches within 4 se");
    }
}
