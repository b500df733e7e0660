//! Sphere geometry: surface measures, zonal integral reduction, and the
//! tangent-plane maps entering the curvature computation.
//!
//! Every integral of a zonal function over S^{d-1} reduces to a weighted
//! integral on [-1, 1]:
//!
//! ```text
//! ∫_{S^{d-1}} g(e·σ') dσ' = |S^{d-2}| ∫_{-1}^{1} g(c) (1-c²)^{(d-3)/2} dc,
//! ```
//!
//! and all zonal computations in the crate fix the axis e = e₁.

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use statrs::function::gamma::ln_gamma;

/// Absolute tolerance for unit-norm and tangency checks. Inputs are
/// constructed, not measured, so the tolerance is tight.
pub const GEOMETRY_TOL: f64 = 1e-12;

/// Ambient dimension d of ℝ^d; the sphere is S^{d-1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dimension(u32);

impl Dimension {
    /// Requires d ≥ 2 (the sphere must have positive dimension).
    pub fn new(d: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(format!("d must be >= 2, got {d}")));
        }
        Ok(Self(d))
    }

    /// The ambient dimension.
    pub fn get(self) -> u32 {
        self.0
    }

    /// d as f64, for formulas.
    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }

    /// Exponent (d-3)/2 of the zonal measure factor (1-c²)^{(d-3)/2}.
    pub fn measure_exponent(self) -> f64 {
        (self.as_f64() - 3.0) / 2.0
    }
}

/// Surface area |S^{d-1}| = 2 π^{d/2} / Γ(d/2) of the unit sphere in ℝ^d.
///
/// Accepts d ≥ 1 (d = 1 gives |S^0| = 2, needed as the prefactor of zonal
/// integrals at d = 2).
pub fn surface_area(d: u32) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidDimension(format!(
            "surface area needs d >= 1, got {d}"
        )));
    }
    let half = f64::from(d) / 2.0;
    Ok(2.0 * (half * std::f64::consts::PI.ln() - ln_gamma(half)).exp())
}

/// Integrates the zonal function g over S^{d-1} using a rule whose exponents
/// already absorb the measure factor and any endpoint singularity of g.
///
/// The closure receives the *smooth* factor of g: the caller guarantees that
/// g(c) · (1-c²)^{(d-3)/2} = smooth(c) · (1-c)^{α}(1+c)^{β} with (α, β) the
/// rule's exponents. The result is |S^{d-2}| · ∑ w_j smooth(c_j), which is
/// independent of the axis by rotation invariance.
pub fn zonal_integral<F: Fn(f64) -> f64>(
    smooth: F,
    d: Dimension,
    rule: &QuadratureRule,
) -> Result<f64> {
    if !(rule.alpha_exp() > -1.0) || !(rule.beta_exp() > -1.0) {
        return Err(Error::DivergentIntegral(format!(
            "zonal integrand has non-integrable exponents ({}, {})",
            rule.alpha_exp(),
            rule.beta_exp()
        )));
    }
    Ok(surface_area(d.get() - 1)? * rule.integrate(smooth))
}

/// A tangent vector `dir` at the base point `base` on S^{d-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: Vec<f64>,
    dir: Vec<f64>,
}

impl TangentVector {
    /// Validates |base| = 1 and base·dir = 0 within [`GEOMETRY_TOL`].
    pub fn new(base: Vec<f64>, dir: Vec<f64>) -> Result<Self> {
        if base.len() != dir.len() || base.len() < 2 {
            return Err(Error::InvalidInput(
                "base and dir must share a dimension >= 2".into(),
            ));
        }
        let norm = norm(&base);
        if (norm - 1.0).abs() > GEOMETRY_TOL {
            return Err(Error::InvalidInput(format!(
                "base point has norm {norm}, expected 1"
            )));
        }
        let proj = dot(&base, &dir);
        if proj.abs() > GEOMETRY_TOL {
            return Err(Error::NotTangent(format!(
                "base·dir = {proj:e} exceeds tolerance {GEOMETRY_TOL:e}"
            )));
        }
        Ok(Self { base, dir })
    }

    /// The base point on the sphere.
    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// The tangent direction.
    pub fn dir(&self) -> &[f64] {
        &self.dir
    }
}

/// M_{σ',σ}(x) = (σ'·σ) x − (σ·x) σ', mapping tangent vectors at σ' to
/// tangent vectors at σ. It rotates the span(σ, σ') plane and scales the
/// orthogonal complement by σ'·σ.
pub fn tangent_map(sigma: &[f64], x: &TangentVector) -> Result<TangentVector> {
    let sigma_p = x.base();
    if sigma.len() != sigma_p.len() {
        return Err(Error::InvalidInput("dimension mismatch in tangent_map".into()));
    }
    let norm_s = norm(sigma);
    if (norm_s - 1.0).abs() > GEOMETRY_TOL {
        return Err(Error::InvalidInput(format!(
            "sigma has norm {norm_s}, expected 1"
        )));
    }
    let cos_angle = dot(sigma_p, sigma);
    let along = dot(sigma, x.dir());
    let mapped: Vec<f64> = x
        .dir()
        .iter()
        .zip(sigma_p.iter())
        .map(|(&xi, &spi)| cos_angle * xi - along * spi)
        .collect();
    // The image is tangent at sigma by construction; re-project the rounding
    // residue so downstream tangency checks never trip on accumulated error.
    let residue = dot(sigma, &mapped);
    let projected: Vec<f64> = mapped
        .iter()
        .zip(sigma.iter())
        .map(|(&mi, &si)| mi - residue * si)
        .collect();
    TangentVector::new(sigma.to_vec(), projected)
}

/// 1 − |M_{σ,σ'}(e)|² for a unit tangent e at σ; lies in [0, 1].
///
/// Vanishes when σ' = ±σ and when e lies in span(σ, σ'); equals 1 − (σ·σ')²
/// when e is orthogonal to that span.
pub fn contraction_deficit(sigma: &[f64], sigma_p: &[f64], e: &TangentVector) -> Result<f64> {
    if e.base() != sigma {
        return Err(Error::InvalidInput(
            "contraction_deficit expects e tangent at sigma".into(),
        ));
    }
    let e_norm = norm(e.dir());
    if (e_norm - 1.0).abs() > GEOMETRY_TOL {
        return Err(Error::InvalidInput(format!(
            "direction has norm {e_norm}, expected 1"
        )));
    }
    let norm_sp = norm(sigma_p);
    if (norm_sp - 1.0).abs() > GEOMETRY_TOL {
        return Err(Error::InvalidInput(format!(
            "sigma' has norm {norm_sp}, expected 1"
        )));
    }
    // M_{σ,σ'}(e) = (σ·σ') e − (σ'·e) σ; |M e|² = (σ·σ')² + ((σ'·e)²)(1 − 2(σ·σ'))...
    // computed directly from the definition to avoid sign slips.
    let cos_angle = dot(sigma, sigma_p);
    let along = dot(sigma_p, e.dir());
    let mut sq = 0.0;
    for (&ei, &si) in e.dir().iter().zip(sigma_p.iter()) {
        let v = cos_angle * ei - along * si;
        sq += v * v;
    }
    Ok((1.0 - sq).clamp(0.0, 1.0))
}

/// Euclidean dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Rescales to unit length; errors on the zero vector.
pub fn normalize(a: &[f64]) -> Result<Vec<f64>> {
    let n = norm(a);
    if n == 0.0 {
        return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
    }
    Ok(a.iter().map(|&x| x / n).collect())
}

/// Product quadrature on S² (d = 3): Gauss-Legendre in cos θ crossed with a
/// uniform trapezoid in the azimuth. Exact for smooth integrands once both
/// resolutions are adequate; used to validate zonal reductions and for the
/// full-sphere integrals of the gradient-identity check.
#[derive(Debug, Clone)]
pub struct SphereProductRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl SphereProductRule {
    /// `n_polar` Gauss nodes in cos θ, `n_azimuth` equal steps in φ.
    pub fn new(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_azimuth == 0 {
            return Err(Error::InvalidInput("need at least one azimuth node".into()));
        }
        let polar = QuadratureRule::gauss_jacobi(n_polar, 0.0, 0.0)?;
        let dphi = 2.0 * std::f64::consts::PI / n_azimuth as f64;
        let mut points = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        for (&c, &wc) in polar.nodes().iter().zip(polar.weights()) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for j in 0..n_azimuth {
                let phi = dphi * j as f64;
                points.push([s * phi.cos(), s * phi.sin(), c]);
                weights.push(wc * dphi);
            }
        }
        Ok(Self { points, weights })
    }

    /// Quadrature points on S².
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Integrates f over S².
    pub fn integrate<F: Fn(&[f64; 3]) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(self.weights.iter())
            .map(|(p, &w)| w * f(p))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn rule_for_measure(d: Dimension, order: usize) -> QuadratureRule {
        QuadratureRule::gauss_jacobi(order, d.measure_exponent(), d.measure_exponent())
            .unwrap()
    }

    #[test]
    fn surface_areas_match_closed_forms() {
        assert!((surface_area(1).unwrap() - 2.0).abs() < 1e-14);
        assert!((surface_area(2).unwrap() - 2.0 * PI).abs() < 1e-13);
        assert!((surface_area(3).unwrap() - 4.0 * PI).abs() < 1e-13);
        assert!((surface_area(4).unwrap() - 2.0 * PI * PI).abs() < 1e-13);
        assert!(matches!(surface_area(0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn zonal_examples() {
        let d3 = Dimension::new(3).unwrap();
        let rule = rule_for_measure(d3, 64);
        // g ≡ 1 integrates to the full measure 4π.
        let total = zonal_integral(|_| 1.0, d3, &rule).unwrap();
        assert!((total - 4.0 * PI).abs() < 1e-12);
        // g(c) = 1-c² gives |S^1| ∫ (1-c²) dc = 2π · 4/3.
        let levy = zonal_integral(|c| 1.0 - c * c, d3, &rule).unwrap();
        assert!((levy - 8.0 * PI / 3.0).abs() < 1e-12);
        // Odd integrand vanishes.
        for d_raw in 2u32..=6 {
            let d = Dimension::new(d_raw).unwrap();
            let rule = rule_for_measure(d, 64);
            let odd = zonal_integral(|c| c, d, &rule).unwrap();
            assert!(odd.abs() < 1e-12, "d={d_raw}: {odd}");
        }
    }

    #[test]
    fn zonal_integral_matches_product_quadrature_under_rotation() {
        // Axis independence at d = 3: integrate g(e·σ') with a rotated axis
        // via the full product rule and compare to the [-1,1] reduction.
        let d3 = Dimension::new(3).unwrap();
        let g = |c: f64| (1.0 - c * c) * (0.7 + 0.3 * c * c) + 0.1 * c.cos();
        let rule = rule_for_measure(d3, 128);
        let reduced = zonal_integral(|c| g(c), d3, &rule).unwrap();

        let product = SphereProductRule::new(96, 192).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..4 {
            let axis = normalize(&[
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ])
            .unwrap();
            let direct = product.integrate(|p| g(dot(p, &axis)));
            assert!(
                (direct - reduced).abs() <= 1e-8 * reduced.abs(),
                "axis {axis:?}: {direct} vs {reduced}"
            );
        }
    }

    #[test]
    fn tangent_map_identity_and_antipode() {
        let sigma = vec![0.0, 0.0, 1.0];
        let x = TangentVector::new(sigma.clone(), vec![0.3, -0.4, 0.0]).unwrap();
        // σ' = σ: the map is the identity.
        let same = tangent_map(&sigma, &x).unwrap();
        for (a, b) in same.dir().iter().zip(x.dir()) {
            assert!((a - b).abs() < 1e-14);
        }
        // σ' = -σ: the map is -Id on the tangent space.
        let anti = TangentVector::new(vec![0.0, 0.0, -1.0], vec![0.3, -0.4, 0.0]).unwrap();
        let flipped = tangent_map(&sigma, &anti).unwrap();
        for (a, b) in flipped.dir().iter().zip(anti.dir()) {
            assert!((a + b).abs() < 1e-14);
        }
    }

    #[test]
    fn tangent_map_output_is_tangent() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let d = rng.gen_range(2usize..6);
            let sigma = random_unit(&mut rng, d);
            let sigma_p = random_unit(&mut rng, d);
            let x = random_tangent(&mut rng, &sigma_p);
            let mapped = tangent_map(&sigma, &x).unwrap();
            assert!(dot(mapped.base(), mapped.dir()).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_tangent_input() {
        let base = vec![1.0, 0.0, 0.0];
        assert!(matches!(
            TangentVector::new(base, vec![0.5, 0.1, 0.0]),
            Err(Error::NotTangent(_))
        ));
    }

    #[test]
    fn contraction_deficit_examples() {
        let sigma = vec![1.0, 0.0, 0.0];
        let e_plane = TangentVector::new(sigma.clone(), vec![0.0, 1.0, 0.0]).unwrap();
        // σ' = ±σ: the map is ±Id, deficit 0.
        assert!(contraction_deficit(&sigma, &sigma, &e_plane).unwrap() < 1e-14);
        let minus: Vec<f64> = sigma.iter().map(|&v| -v).collect();
        assert!(contraction_deficit(&sigma, &minus, &e_plane).unwrap() < 1e-14);
        // σ' ⊥ σ with e in span(σ, σ'): the plane rotates isometrically.
        let sigma_p = vec![0.0, 1.0, 0.0];
        assert!(contraction_deficit(&sigma, &sigma_p, &e_plane).unwrap() < 1e-14);
        // e orthogonal to the span: the map scales by σ·σ' = 0, deficit 1.
        let e_perp = TangentVector::new(sigma.clone(), vec![0.0, 0.0, 1.0]).unwrap();
        let deficit = contraction_deficit(&sigma, &sigma_p, &e_perp).unwrap();
        assert!((deficit - 1.0).abs() < 1e-14);
    }

    fn random_unit(rng: &mut StdRng, d: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if norm(&v) > 1e-3 {
                return normalize(&v).unwrap();
            }
        }
    }

    fn random_tangent(rng: &mut StdRng, base: &[f64]) -> TangentVector {
        loop {
            let v: Vec<f64> = (0..base.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let along = dot(base, &v);
            let t: Vec<f64> = v
                .iter()
                .zip(base.iter())
                .map(|(&vi, &bi)| vi - along * bi)
                .collect();
            if norm(&t) > 1e-3 {
                return TangentVector::new(base.to_vec(), t).unwrap();
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// Adjoint identity x·M_{σ',σ}(y) = M_{σ,σ'}(x)·y on random data.
        #[test]
        fn adjoint_identity(seed in 0u64..5000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let d = rng.gen_range(2usize..6);
            let sigma = random_unit(&mut rng, d);
            let sigma_p = random_unit(&mut rng, d);
            let x = random_tangent(&mut rng, &sigma);
            let y = random_tangent(&mut rng, &sigma_p);
            let m_y = tangent_map(&sigma, &y).unwrap();
            let m_x = tangent_map(&sigma_p, &x).unwrap();
            let lhs = dot(x.dir(), m_y.dir());
            let rhs = dot(m_x.dir(), y.dir());
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        /// The deficit always lies in [0, 1].
        #[test]
        fn deficit_in_unit_interval(seed in 0u64..5000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let d = rng.gen_range(2usize..6);
            let sigma = random_unit(&mut rng, d);
            let sigma_p = random_unit(&mut rng, d);
            let e = random_tangent(&mut rng, &sigma);
            let unit_e = TangentVector::new(
                sigma.clone(),
                normalize(e.dir()).unwrap(),
            ).unwrap();
            let deficit = contraction_deficit(&sigma, &sigma_p, &unit_e).unwrap();
            prop_assert!((0.0..=1.0).contains(&deficit));
        }
    }
}
