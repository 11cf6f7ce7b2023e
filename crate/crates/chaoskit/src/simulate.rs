//! Monte Carlo checks: exact-in-law sampling of classical multiple integrals
//! of step kernels, and a GUE matrix model for Wigner integrals.
//!
//! Each sample `i` draws from its own `ChaCha8` stream seeded with
//! `splitmix64(seed ⊕ splitmix64(i))`, so estimates do not depend on the
//! thread count. Per-sample values are collected in index order and reduced
//! by pairwise summation.

use std::collections::BTreeMap;

use chaoskit_core::{Error, GridKernel, MomentReport, Result};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Name of the sampling generator, recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 per sample, seed = splitmix64(seed ^ splitmix64(index))";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// GUE matrix dimension `N` (free model only).
    pub matrix_dim: usize,
}

impl SampleConfig {
    pub fn new(seed: u64, n_samples: usize, matrix_dim: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
        }
        if matrix_dim < 2 {
            return Err(Error::InvalidParameter("matrix dimension must be at least 2".into()));
        }
        Ok(SampleConfig {
            seed,
            n_samples,
            matrix_dim,
        })
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and its standard error `sd / √n`.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Probabilists' Hermite values `H_0(x), …, H_n(x)`.
fn hermite_values(x: f64, n: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if n >= 1 {
        out[1] = x;
    }
    for j in 1..n {
        out[j + 1] = x * out[j] - j as f64 * out[j - 1];
    }
}

/// `I_p(f) = m^{-p/2} Σ_I a_I ∏_i H_{k_i(I)}(ξ_i)` as a list of
/// `(coefficient, [(cell, multiplicity)])`, with index tuples sharing a
/// multiplicity pattern merged.
pub struct ClassicalSampler {
    m: usize,
    p: usize,
    terms: Vec<(f64, Vec<(usize, usize)>)>,
}

impl ClassicalSampler {
    pub fn new(f: &GridKernel<f64>) -> Self {
        let (p, m) = (f.order(), f.resolution());
        let mut merged: BTreeMap<Vec<(usize, usize)>, f64> = BTreeMap::new();
        let mut digits = vec![0usize; p];
        for (flat, &a) in f.coeffs().iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let mut rest = flat;
            for d in digits.iter_mut().rev() {
                *d = rest % m;
                rest /= m;
            }
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for &d in &digits {
                *counts.entry(d).or_insert(0) += 1;
            }
            *merged.entry(counts.into_iter().collect()).or_insert(0.0) += a;
        }
        let norm = (m as f64).powf(-(p as f64) / 2.0);
        let terms = merged
            .into_iter()
            .filter(|(_, a)| *a != 0.0)
            .map(|(pattern, a)| (a * norm, pattern))
            .collect();
        ClassicalSampler { m, p, terms }
    }

    /// One draw of `I_p(f)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let xi: Vec<f64> = (0..self.m).map(|_| rng.sample(StandardNormal)).collect();
        self.evaluate(&xi)
    }

    /// `I_p(f)` at given cell variables `ξ_i = √m · B(cell i)`.
    pub fn evaluate(&self, xi: &[f64]) -> f64 {
        let width = self.p + 1;
        let mut h = vec![0.0; self.m * width];
        for (i, &x) in xi.iter().enumerate() {
            hermite_values(x, self.p, &mut h[i * width..(i + 1) * width]);
        }
        let values: Vec<f64> = self
            .terms
            .iter()
            .map(|(c, pattern)| pattern.iter().fold(*c, |acc, &(i, k)| acc * h[i * width + k]))
            .collect();
        pairwise_sum(&values)
    }
}

/// One draw of `I_p(f)` for the classical integral of `f`.
pub fn sample_classical<R: Rng + ?Sized>(f: &GridKernel<f64>, rng: &mut R) -> f64 {
    ClassicalSampler::new(f).sample(rng)
}

/// Empirical `E[I_p(f)^k]` over `cfg.n_samples` draws.
pub fn mc_classical_moment(f: &GridKernel<f64>, k: usize, cfg: &SampleConfig) -> MomentReport<f64> {
    let sampler = ClassicalSampler::new(f);
    let powers: Vec<f64> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, i);
            sampler.sample(&mut rng).powi(k as i32)
        })
        .collect();
    let (mean, se) = mean_and_stderr(&powers);
    MomentReport::simulated(k, mean, se, None)
}

/// An `N × N` GUE matrix with `E[|G_xy|²] = σ²`: real `N(0, σ²)` diagonal,
/// complex off-diagonal entries with independent `N(0, σ²/2)` parts.
pub fn sample_gue<R: Rng + ?Sized>(n: usize, sigma_sq: f64, rng: &mut R) -> Array2<Complex64> {
    let sd_diag = sigma_sq.sqrt();
    let sd_off = (sigma_sq / 2.0).sqrt();
    let mut g = Array2::<Complex64>::zeros((n, n));
    for x in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        g[(x, x)] = Complex64::new(sd_diag * d, 0.0);
        for y in x + 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(sd_off * re, sd_off * im);
            g[(x, y)] = z;
            g[(y, x)] = z.conj();
        }
    }
    g
}

fn check_moment_order(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("moment order must be at least 1".into()));
    }
    Ok(())
}

fn check_free_input(f: &GridKernel<f64>) -> Result<()> {
    if !f.is_mirror_symmetric() {
        return Err(Error::NotMirrorSymmetric);
    }
    if !f.is_off_diagonal() {
        return Err(Error::DiagonalSupport);
    }
    Ok(())
}

/// `F_N = Σ_I a_I G_{i_1} ⋯ G_{i_p}` over the nonzero cells, built by a
/// right-nested recursion so each distinct prefix costs one product.
pub fn assemble_free_matrix(f: &GridKernel<f64>, gs: &[Array2<Complex64>]) -> Array2<Complex64> {
    let n = gs[0].nrows();
    tail_sum(f.coeffs(), f.order(), f.resolution(), gs, n).unwrap_or_else(|| Array2::zeros((n, n)))
}

/// `Σ_J b_J G_{j_1} ⋯ G_{j_q}` for the order-`q` coefficient block `b`,
/// or `None` when the block vanishes.
fn tail_sum(b: &[f64], q: usize, m: usize, gs: &[Array2<Complex64>], n: usize) -> Option<Array2<Complex64>> {
    if b.iter().all(|&x| x == 0.0) {
        return None;
    }
    if q == 0 {
        return Some(Array2::eye(n) * Complex64::new(b[0], 0.0));
    }
    let block = m.pow(q as u32 - 1);
    let mut acc = Array2::<Complex64>::zeros((n, n));
    for i in 0..m {
        let sub = &b[i * block..(i + 1) * block];
        if q == 1 {
            if sub[0] != 0.0 {
                acc.scaled_add(Complex64::new(sub[0], 0.0), &gs[i]);
            }
        } else if let Some(rest) = tail_sum(sub, q - 1, m, gs, n) {
            acc = acc + gs[i].dot(&rest);
        }
    }
    Some(acc)
}

/// Largest `|F - F*|` entry relative to the largest `|F|` entry.
pub fn hermitian_defect(a: &Array2<Complex64>) -> f64 {
    let scale = a.iter().fold(0.0f64, |s, z| s.max(z.norm()));
    let mut worst = 0.0f64;
    for ((x, y), z) in a.indexed_iter() {
        worst = worst.max((z - a[(y, x)].conj()).norm());
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Imaginary parts of normalized traces must stay below this fraction of
/// the summed entry magnitudes.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Normalized traces `(1/N) tr(F^j)`, `j = 1..=k`, of one matrix-model
/// realization of the Wigner integral of `f`.
///
/// Each increment is an independent GUE matrix with `E[(1/N) tr G²] = 1/m`.
/// `f` must be mirror symmetric and vanish on every cell with a repeated
/// index; refine and drop the diagonal cells first if needed.
pub fn sample_free_gue<R: Rng + ?Sized>(f: &GridKernel<f64>, k: usize, dim: usize, rng: &mut R) -> Result<Vec<f64>> {
    free_draw(f, k, dim, rng, false).map(|(t, _)| t)
}

/// [`sample_free_gue`] together with the [`control_traces`] of the same
/// increments.
pub fn sample_free_gue_with_controls<R: Rng + ?Sized>(
    f: &GridKernel<f64>,
    k: usize,
    dim: usize,
    rng: &mut R,
) -> Result<FreeDraw> {
    free_draw(f, k, dim, rng, true)
}

fn free_draw<R: Rng + ?Sized>(
    f: &GridKernel<f64>,
    k: usize,
    dim: usize,
    rng: &mut R,
    controls: bool,
) -> Result<FreeDraw> {
    check_free_input(f)?;
    let m = f.resolution();
    let sigma_sq = 1.0 / (m as f64 * dim as f64);
    let gs: Vec<_> = (0..m).map(|_| sample_gue(dim, sigma_sq, rng)).collect();
    let raw = assemble_free_matrix(f, &gs);
    // exact Hermitian symmetrization removes rounding asymmetry between
    // G_a G_b and its mirror term G_b G_a
    let fm = (&raw + &raw.t().mapv(|z| z.conj())) * Complex64::new(0.5, 0.0);
    let traces = normalized_traces(&fm, k)?;
    let c = if controls { control_traces(&gs, sigma_sq) } else { Vec::new() };
    Ok((traces, c))
}

/// Normalized traces of `F` and `(value, exact mean)` control pairs.
pub type FreeDraw = (Vec<f64>, Vec<(f64, f64)>);

/// Largest resolution for which the degree-4 controls are formed.
pub const MAX_CONTROL_RESOLUTION: usize = 4;

/// `(1/N) Σ_xy X_xy Y_yx`.
fn trace_of_product(x: &Array2<Complex64>, y: &Array2<Complex64>) -> f64 {
    let n = x.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (x[(i, j)] * y[(j, i)]).re;
        }
    }
    acc / n as f64
}

/// Short-word traces of GUE increments paired with their exact means at
/// finite `N`: `(1/N) tr(G_a G_b)` for `a ≤ b`, and for `a < b` both
/// `(1/N) tr(G_a G_b G_b G_a) = (1/N) ‖G_a G_b‖²` and
/// `(1/N) tr(G_a G_b G_a G_b)`. The degree-4 words are skipped above
/// [`MAX_CONTROL_RESOLUTION`].
///
/// With `E[G_xy G_zw] = σ² δ_xw δ_yz`, `E (1/N) tr(G_a G_b G_c G_d)` is
/// `σ⁴ (N² (δ_ab δ_cd + δ_ad δ_bc) + δ_ac δ_bd)`.
pub fn control_traces(gs: &[Array2<Complex64>], sigma_sq: f64) -> Vec<(f64, f64)> {
    let m = gs.len();
    let n = gs[0].nrows() as f64;
    let s2 = sigma_sq * sigma_sq;
    let mut out = Vec::new();
    for a in 0..m {
        for b in a..m {
            let mean = if a == b { n * sigma_sq } else { 0.0 };
            out.push((trace_of_product(&gs[a], &gs[b]), mean));
        }
    }
    if m > MAX_CONTROL_RESOLUTION {
        return out;
    }
    for a in 0..m {
        for b in a + 1..m {
            let p = gs[a].dot(&gs[b]);
            let frob = p.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
            out.push((frob, s2 * n * n));
            out.push((trace_of_product(&p, &p), s2));
        }
    }
    out
}

/// Regression-adjusted mean `ȳ - β·(c̄ - μ)` with `β` the least-squares
/// fit of `y` on the centred controls, and the standard error from the
/// residual variance. Falls back to the plain mean when the fit is
/// degenerate.
pub fn control_variate_mean(y: &[f64], controls: &[Vec<f64>], means: &[f64]) -> (f64, f64) {
    let d = y.len();
    let q = means.len();
    if q == 0 || d <= q + 1 {
        return mean_and_stderr(y);
    }
    let (ybar, _) = mean_and_stderr(y);
    let cbar: Vec<f64> = (0..q)
        .map(|j| pairwise_sum(&controls.iter().map(|c| c[j]).collect::<Vec<_>>()) / d as f64)
        .collect();
    let x = DMatrix::from_fn(d, q, |i, j| controls[i][j] - cbar[j]);
    let yc = DVector::from_fn(d, |i, _| y[i] - ybar);
    let Some(beta) = (x.transpose() * &x).lu().solve(&(x.transpose() * &yc)) else {
        return mean_and_stderr(y);
    };
    let shift: f64 = (0..q).map(|j| beta[j] * (cbar[j] - means[j])).sum();
    let resid = &yc - &x * &beta;
    let sq: Vec<f64> = resid.iter().map(|r| r * r).collect();
    let var = pairwise_sum(&sq) / (d - q - 1) as f64;
    (ybar - shift, (var / d as f64).sqrt())
}

/// `(1/N) tr(A^j)` for `j = 1..=k` of a Hermitian `A`, using
/// `tr(A^a A^b) = Σ A^a_xy conj(A^b_xy)`.
pub fn normalized_traces(a: &Array2<Complex64>, k: usize) -> Result<Vec<f64>> {
    let n = a.nrows() as f64;
    let half = k.div_ceil(2);
    let mut powers = vec![Array2::eye(a.nrows()), a.clone()];
    for j in 2..=half {
        let next = powers[j - 1].dot(a);
        powers.push(next);
    }
    let mut out = Vec::with_capacity(k);
    for j in 1..=k {
        let (x, y) = (j.div_ceil(2), j / 2);
        let mut re = 0.0;
        let mut im = 0.0;
        let mut scale = 0.0;
        for (u, v) in powers[x].iter().zip(powers[y].iter()) {
            let z = u * v.conj();
            re += z.re;
            im += z.im;
            scale += u.norm() * v.norm();
        }
        if im.abs() > IMAGINARY_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter(format!(
                "trace of power {j} has imaginary part {im:e} (scale {scale:e})"
            )));
        }
        out.push(re / n);
    }
    Ok(out)
}

/// Average of `(1/N) tr(F_N^k)` over `cfg.n_samples` independent draws.
pub fn mc_free_moment(f: &GridKernel<f64>, k: usize, cfg: &SampleConfig) -> Result<MomentReport<f64>> {
    check_moment_order(k)?;
    check_free_input(f)?;
    let draws: Vec<f64> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, i);
            sample_free_gue(f, k, cfg.matrix_dim, &mut rng).map(|t| t[k - 1])
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_stderr(&draws);
    Ok(MomentReport::simulated(k, mean, se, None))
}

/// [`mc_free_moment`] with the [`control_traces`] as control variates.
///
/// The controls have exactly known means at every `N`, so the estimator
/// targets the same finite-`N` expectation with a much smaller standard
/// error.
pub fn mc_free_moment_controlled(f: &GridKernel<f64>, k: usize, cfg: &SampleConfig) -> Result<MomentReport<f64>> {
    check_moment_order(k)?;
    check_free_input(f)?;
    let draws: Vec<(f64, Vec<(f64, f64)>)> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, i);
            sample_free_gue_with_controls(f, k, cfg.matrix_dim, &mut rng).map(|(t, c)| (t[k - 1], c))
        })
        .collect::<Result<_>>()?;
    let y: Vec<f64> = draws.iter().map(|(v, _)| *v).collect();
    let means: Vec<f64> = draws[0].1.iter().map(|(_, mu)| *mu).collect();
    let controls: Vec<Vec<f64>> = draws.iter().map(|(_, c)| c.iter().map(|(v, _)| *v).collect()).collect();
    let (mean, se) = control_variate_mean(&y, &controls, &means);
    Ok(MomentReport::simulated(k, mean, se, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(c: f64) -> GridKernel<f64> {
        GridKernel::new(2, 2, vec![0.0, c, c, 0.0]).unwrap()
    }

    #[test]
    fn hermite_rule_degenerates_off_diagonal() {
        let s = ClassicalSampler::new(&pair(1.0));
        let xi = [0.7, -1.3];
        // 2 · (1/2) ξ_1 ξ_2
        assert!((s.evaluate(&xi) - 0.7 * -1.3).abs() < 1e-12);
        let c2 = ClassicalSampler::new(&GridKernel::ones(2, 1).unwrap());
        assert!((c2.evaluate(&[1.5]) - (1.5 * 1.5 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn seeding_is_thread_independent() {
        let cfg = SampleConfig::new(7, 2000, 2).unwrap();
        let f = pair(1.0);
        let a = mc_classical_moment(&f, 4, &cfg);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| mc_classical_moment(&f, 4, &cfg));
        assert_eq!(a.value().to_bits(), b.value().to_bits());
    }

    #[test]
    fn gue_normalization() {
        let mut rng = sample_rng(1, 0);
        let n = 60;
        let g = sample_gue(n, 1.0 / (3.0 * n as f64), &mut rng);
        assert_eq!(hermitian_defect(&g), 0.0);
        let tr = normalized_traces(&g, 2).unwrap();
        assert!((tr[1] - 1.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn assembled_matrix_is_hermitian() {
        let f = pair(2f64.sqrt());
        let mut rng = sample_rng(3, 0);
        let gs: Vec<_> = (0..2).map(|_| sample_gue(40, 1.0 / 80.0, &mut rng)).collect();
        let a = assemble_free_matrix(&f, &gs);
        assert!(hermitian_defect(&a) < 1e-12);
        let direct = (gs[0].dot(&gs[1]) + gs[1].dot(&gs[0])) * Complex64::new(2f64.sqrt(), 0.0);
        assert!((&a - &direct).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn free_input_checks() {
        let mut rng = sample_rng(0, 0);
        let asym = GridKernel::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(sample_free_gue(&asym, 2, 4, &mut rng).unwrap_err(), Error::NotMirrorSymmetric);
        let diag = GridKernel::<f64>::ones(2, 1).unwrap();
        assert_eq!(sample_free_gue(&diag, 2, 4, &mut rng).unwrap_err(), Error::DiagonalSupport);
    }

    #[test]
    fn control_means_are_exact() {
        // average each control over many small draws
        let (n, m, draws) = (6usize, 2usize, 20_000u64);
        let sigma_sq = 1.0 / (m * n) as f64;
        let mut sums = Vec::new();
        let mut means = Vec::new();
        for i in 0..draws {
            let mut rng = sample_rng(11, i);
            let gs: Vec<_> = (0..m).map(|_| sample_gue(n, sigma_sq, &mut rng)).collect();
            let c = control_traces(&gs, sigma_sq);
            sums.resize(c.len(), 0.0);
            means = c.iter().map(|(_, mu)| *mu).collect();
            for (s, (v, _)) in sums.iter_mut().zip(&c) {
                *s += v;
            }
        }
        assert_eq!(means.len(), 5);
        for (s, mu) in sums.iter().zip(&means) {
            let avg = s / draws as f64;
            assert!((avg - mu).abs() < 0.01 * mu.abs().max(0.05), "{avg} vs {mu}");
        }
    }

    #[test]
    fn controlled_estimate_tightens_the_plain_one() {
        let f = pair(2f64.sqrt());
        let cfg = SampleConfig::new(5, 400, 30).unwrap();
        let plain = mc_free_moment(&f, 4, &cfg).unwrap();
        let cv = mc_free_moment_controlled(&f, 4, &cfg).unwrap();
        assert!(cv.stderr().unwrap() < plain.stderr().unwrap() / 2.0);
        assert!((cv.value() - plain.value()).abs() < 4.0 * plain.stderr().unwrap());
    }

    #[test]
    fn control_variates_recover_a_known_mean() {
        // y = 2 + 3c + noise with E[c] = 1: the adjusted mean removes the c noise
        let mut rng = sample_rng(9, 0);
        let cs: Vec<f64> = (0..500).map(|_| 1.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = cs.iter().map(|c| 2.0 + 3.0 * c + 1e-3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let controls: Vec<Vec<f64>> = cs.iter().map(|&c| vec![c]).collect();
        let (est, se) = control_variate_mean(&y, &controls, &[1.0]);
        assert!((est - 5.0).abs() < 5e-4, "{est}");
        assert!(se < 1e-4);
        assert_eq!(control_variate_mean(&y, &[], &[]), mean_and_stderr(&y));
    }

    #[test]
    fn zero_order_is_rejected() {
        let cfg = SampleConfig::new(0, 2, 4).unwrap();
        assert!(matches!(mc_free_moment(&pair(1.0), 0, &cfg), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
