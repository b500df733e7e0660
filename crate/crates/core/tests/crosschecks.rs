//! Monte Carlo cross-validation of the two-point pair integrals.
//!
//! The deterministic path reduces ∬ pair(F(σ), F(σ′)) b(σ·σ′) dσ dσ′ to a
//! three-variable weighted quadrature. This test recomputes the same
//! integrals on S² by direct sampling — cos-latitudes are uniform on
//! [−1, 1] there, so the sampler needs no rejection step — and requires
//! agreement to a relative 1e-3.

use bsphere_core::function::SphereFunction;
use bsphere_core::kernels::{KernelSpec, KernelVariant, TabulatedKernel};
use bsphere_core::sphere::Dimension;
use bsphere_core::verifier::pair_double_integral;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;

const SAMPLES: usize = 6_000_000;
const CHUNK: usize = 250_000;

fn dim3() -> Dimension {
    Dimension::new(3).unwrap()
}

fn constant_kernel() -> KernelSpec {
    KernelSpec::new(dim3(), KernelVariant::Constant { value: 1.0 }).unwrap()
}

/// Cubic-spline tabulation of 1 + 0.2c + 0.3P₂(c); a not-a-knot spline
/// reproduces polynomials of degree ≤ 3 exactly, so the kernel is smooth
/// and its pointwise values match the polynomial to machine precision.
fn blend_kernel() -> KernelSpec {
    let nodes: Vec<f64> = (0..9)
        .map(|i| -0.999_999_999 + i as f64 * 0.249_999_999_75)
        .collect();
    let values: Vec<f64> = nodes
        .iter()
        .map(|&c| 1.0 + 0.2 * c + 0.3 * (1.5 * c * c - 0.5))
        .collect();
    KernelSpec::new(
        dim3(),
        KernelVariant::Tabulated(TabulatedKernel::new(nodes, values, 0.0, 0.0).unwrap()),
    )
    .unwrap()
}

/// Even positive test profile F = exp(0.4 P₂ − 0.25 P₄), band-limited.
fn test_function() -> SphereFunction {
    let p2 = |c: f64| 1.5 * c * c - 0.5;
    let p4 = |c: f64| (35.0 * c.powi(4) - 30.0 * c * c + 3.0) / 8.0;
    let coeffs = bsphere_core::function::project_zonal(dim3(), 24, 96, |c| {
        (0.4 * p2(c) - 0.25 * p4(c)).exp()
    })
    .unwrap();
    SphereFunction::zonal_spectral(dim3(), coeffs, true).unwrap()
}

/// Monte Carlo estimate of ∬ pair(F(σ), F(σ′)) b(σ·σ′) dσ dσ′ over S²×S²
/// together with the standard error of the mean (both carry the (4π)²
/// measure factor).
fn monte_carlo<P: Fn(f64, f64) -> f64>(
    k: &KernelSpec,
    f: &SphereFunction,
    pair: P,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut z1 = vec![0.0f64; CHUNK];
    let mut z2 = vec![0.0f64; CHUNK];
    let mut phase = vec![0.0f64; CHUNK];
    let mut done = 0usize;
    while done < SAMPLES {
        let n = CHUNK.min(SAMPLES - done);
        for i in 0..n {
            z1[i] = rng.gen_range(-1.0..1.0);
            z2[i] = rng.gen_range(-1.0..1.0);
            phase[i] = rng.gen_range(0.0..2.0 * PI);
        }
        let f1 = f.eval_at_nodes(&z1[..n]).unwrap();
        let f2 = f.eval_at_nodes(&z2[..n]).unwrap();
        for i in 0..n {
            let s = ((1.0 - z1[i] * z1[i]) * (1.0 - z2[i] * z2[i])).max(0.0);
            let c = (z1[i] * z2[i] + s.sqrt() * phase[i].cos()).clamp(-1.0, 1.0);
            let x = pair(f1[i], f2[i]) * k.eval(c).unwrap();
            sum += x;
            sum_sq += x * x;
        }
        done += n;
    }
    let n = SAMPLES as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let measure = (4.0 * PI) * (4.0 * PI);
    (measure * mean, measure * (var / n).sqrt())
}

fn check(k: &KernelSpec, pair: impl Fn(f64, f64) -> f64 + Copy, seed: u64, label: &str) {
    let f = test_function();
    let exact = pair_double_integral(k, &f, pair).unwrap();
    let (mc, se) = monte_carlo(k, &f, pair, seed);
    let rel = (mc - exact).abs() / exact.abs();
    println!("{label}: quadrature {exact:.8}, monte carlo {mc:.8} (se {se:.2e}), rel {rel:.2e}");
    assert!(
        rel <= 1e-3,
        "{label}: quadrature {exact} vs monte carlo {mc} (rel {rel:.3e}, se {se:.3e})"
    );
    // The sampling error itself must be small enough for the comparison to
    // carry weight at the 1e-3 scale.
    assert!(se <= 1e-3 * exact.abs(), "{label}: standard error too large");
}

#[test]
fn pair_integral_matches_sampling_constant_kernel() {
    let k = constant_kernel();
    check(&k, |a, b| (a - b) * (a - b), 0x5eed_0001, "constant, squared difference");
    check(
        &k,
        |a, b| (a - b) * (a - b) / (a + b),
        0x5eed_0002,
        "constant, log-Sobolev pair",
    );
}

#[test]
fn pair_integral_matches_sampling_blend_kernel() {
    let k = blend_kernel();
    check(&k, |a, b| (a - b) * (a - b), 0x5eed_0003, "blend, squared difference");
    check(
        &k,
        |a, b| (a - b) * (a - b) / (a + b),
        0x5eed_0004,
        "blend, log-Sobolev pair",
    );
}
