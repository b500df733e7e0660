//! Functions on the sphere in the two working representations — uniform
//! circle grids for d = 2 and zonal spectral coefficients for d ≥ 3 — with
//! the discrete operators built on them: the jump operator 𝓑, the
//! Laplace-Beltrami operator Δ, the carré du champ Γ_Δ, the mixed iterated
//! form Γ²_{𝓑,Δ}, and the Fisher information.
//!
//! A zonal function is stored as coefficients a_0..a_L of
//! F(σ) = Σ a_ℓ P_ℓ(e₁·σ); a circle function as samples at N uniform
//! angles. Operators act diagonally in the respective mode basis;
//! pointwise nonlinearities (products, quotients, logarithms) are formed at
//! quadrature nodes and projected back with exactness beyond the product
//! band.

use crate::error::{Error, Result};
use crate::gegenbauer::{eigenspace_dim, laplace_eigenvalue, PolyFamily};
use crate::kernels::KernelSpectrum;
use crate::quadrature::{adaptive_jacobi_integral, QuadratureRule};
use crate::sphere::{surface_area, Dimension};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Antipodal-symmetry tolerance for validating even functions.
const EVEN_TOL: f64 = 1e-12;

/// A mode carrying relatively less than this is treated as numerical noise
/// when its multiplier is infinite (divergent odd eigenvalues on nominally
/// even data).
const MODE_NOISE_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "repr", rename_all = "snake_case")]
enum Repr {
    /// Values at θ_i = 2πi/N, i = 0..N-1, N even.
    CircleGrid { values: Vec<f64> },
    /// Coefficients a_0..a_L in the zonal basis P_ℓ(e₁·σ).
    ZonalSpectral { coeffs: Vec<f64> },
}

/// A function on S^{d-1}: circle samples (d = 2) or zonal coefficients
/// (d ≥ 3), tagged with the evenness promise F(−σ) = F(σ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereFunction {
    d: u32,
    #[serde(flatten)]
    repr: Repr,
    even: bool,
}

impl SphereFunction {
    /// Circle-grid function from samples at N uniform angles (N even ≥ 8).
    /// With `even` set, antipodal samples must agree within 1e-12.
    pub fn circle_grid(values: Vec<f64>, even: bool) -> Result<Self> {
        let n = values.len();
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "circle grid needs an even number of samples >= 8, got {n}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("grid values must be finite".into()));
        }
        if even {
            let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..n / 2 {
                if (values[i] - values[i + n / 2]).abs() > EVEN_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "function declared even but antipodal samples differ at angle \
                         index {i}"
                    )));
                }
            }
        }
        Ok(Self { d: 2, repr: Repr::CircleGrid { values }, even })
    }

    /// Zonal function from coefficients a_0..a_L, d ≥ 3. With `even` set,
    /// odd-degree coefficients must vanish.
    pub fn zonal_spectral(d: Dimension, coeffs: Vec<f64>, even: bool) -> Result<Self> {
        if d.get() < 3 {
            return Err(Error::InvalidDimension(
                "zonal spectral representation is for d >= 3; use the circle grid".into(),
            ));
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("need at least the constant mode".into()));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        if even {
            let scale = coeffs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (l, a) in coeffs.iter().enumerate() {
                if l % 2 == 1 && a.abs() > EVEN_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "function declared even but degree-{l} coefficient is {a}"
                    )));
                }
            }
        }
        Ok(Self { d: d.get(), repr: Repr::ZonalSpectral { coeffs }, even })
    }

    pub fn dimension(&self) -> Dimension {
        Dimension::new(self.d).expect("constructed with a valid dimension")
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    /// Highest representable degree: L for zonal data, the Nyquist mode N/2
    /// for grids.
    pub fn band_limit(&self) -> usize {
        match &self.repr {
            Repr::CircleGrid { values } => values.len() / 2,
            Repr::ZonalSpectral { coeffs } => coeffs.len() - 1,
        }
    }

    /// Grid samples (circle representation only).
    pub fn grid_values(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::CircleGrid { values } => Some(values),
            Repr::ZonalSpectral { .. } => None,
        }
    }

    /// Zonal coefficients (spectral representation only).
    pub fn zonal_coeffs(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::ZonalSpectral { coeffs } => Some(coeffs),
            Repr::CircleGrid { .. } => None,
        }
    }

    /// Values of a zonal function at the given cosines.
    pub fn eval_at_nodes(&self, nodes: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self
            .zonal_coeffs()
            .ok_or_else(|| Error::InvalidInput("pointwise cosine evaluation is zonal-only".into()))?;
        let l_max = coeffs.len() - 1;
        let family = PolyFamily::new(self.dimension(), l_max);
        nodes
            .iter()
            .map(|&c| {
                let p = family.eval_all(l_max, c)?;
                Ok(coeffs.iter().zip(&p).map(|(a, v)| a * v).sum())
            })
            .collect()
    }

    /// d/dc values of a zonal function at the given cosines.
    pub fn derivative_at_nodes(&self, nodes: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self
            .zonal_coeffs()
            .ok_or_else(|| Error::InvalidInput("cosine derivatives are zonal-only".into()))?;
        let l_max = coeffs.len() - 1;
        let family = PolyFamily::new(self.dimension(), l_max);
        nodes
            .iter()
            .map(|&c| {
                let (_, dp) = family.eval_all_with_derivative(l_max, c)?;
                Ok(coeffs.iter().zip(&dp).map(|(a, v)| a * v).sum())
            })
            .collect()
    }

    /// Smallest sampled value: grid samples, or dense cosine sampling plus
    /// the endpoints for zonal data.
    pub fn min_value(&self) -> Result<f64> {
        match &self.repr {
            Repr::CircleGrid { values } => {
                Ok(values.iter().fold(f64::INFINITY, |m, v| m.min(*v)))
            }
            Repr::ZonalSpectral { coeffs } => {
                let n = (8 * coeffs.len()).max(256);
                let mut nodes: Vec<f64> = (0..=n)
                    .map(|i| -1.0 + 2.0 * i as f64 / n as f64)
                    .collect();
                nodes[0] = -1.0;
                *nodes.last_mut().unwrap() = 1.0;
                let vals = self.eval_at_nodes(&nodes)?;
                Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
            }
        }
    }

    /// ∫ F dσ. Only the constant mode carries mass.
    pub fn integral(&self) -> Result<f64> {
        match &self.repr {
            Repr::CircleGrid { values } => {
                let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
                Ok(2.0 * std::f64::consts::PI * mean)
            }
            Repr::ZonalSpectral { coeffs } => Ok(coeffs[0] * surface_area(self.d)?),
        }
    }

    /// Applies a diagonal mode multiplier m(k). Infinite multipliers are
    /// tolerated only on modes carrying relative noise (≤ 1e-10), which are
    /// zeroed; a genuine mode under an infinite multiplier is an error —
    /// the operator diverges on it.
    pub fn mode_map<M: Fn(usize) -> f64>(&self, m: M) -> Result<SphereFunction> {
        match &self.repr {
            Repr::ZonalSpectral { coeffs } => {
                let scale = coeffs.iter().fold(1e-300f64, |s, v| s.max(v.abs()));
                let mut out = Vec::with_capacity(coeffs.len());
                for (l, &a) in coeffs.iter().enumerate() {
                    let mult = m(l);
                    if mult.is_finite() {
                        out.push(mult * a);
                    } else if a.abs() <= MODE_NOISE_REL * scale {
                        out.push(0.0);
                    } else {
                        return Err(Error::DivergentIntegral(format!(
                            "mode {l} carries weight {a} but its multiplier diverges"
                        )));
                    }
                }
                Ok(SphereFunction { d: self.d, repr: Repr::ZonalSpectral { coeffs: out }, even: self.even })
            }
            Repr::CircleGrid { values } => {
                let n = values.len();
                let mut buf: Vec<Complex<f64>> =
                    values.iter().map(|&v| Complex::new(v, 0.0)).collect();
                fft_in_place(&mut buf, false);
                let scale = buf.iter().fold(1e-300f64, |s, z| s.max(z.norm()));
                for k in 0..=n / 2 {
                    let mult = m(k);
                    let indices: &[usize] = if k == 0 || k == n / 2 {
                        &[if k == 0 { 0 } else { n / 2 }]
                    } else {
                        &[k, n - k]
                    };
                    for &i in indices {
                        if mult.is_finite() {
                            buf[i] *= mult;
                        } else if buf[i].norm() <= MODE_NOISE_REL * scale {
                            buf[i] = Complex::new(0.0, 0.0);
                        } else {
                            return Err(Error::DivergentIntegral(format!(
                                "circle mode {k} carries weight but its multiplier diverges"
                            )));
                        }
                    }
                }
                fft_in_place(&mut buf, true);
                let values = buf.iter().map(|z| z.re / n as f64).collect();
                Ok(SphereFunction { d: self.d, repr: Repr::CircleGrid { values }, even: self.even })
            }
        }
    }

    /// Trigonometric series of a circle function, for evaluation at angles
    /// off the grid.
    pub fn circle_series(&self) -> Result<CircleSeries> {
        let values = self
            .grid_values()
            .ok_or_else(|| Error::InvalidInput("circle series needs the grid representation".into()))?;
        let n = values.len();
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft_in_place(&mut buf, false);
        let nf = n as f64;
        let mut cos_coeffs = vec![0.0; n / 2 + 1];
        let mut sin_coeffs = vec![0.0; n / 2 + 1];
        cos_coeffs[0] = buf[0].re / nf;
        for k in 1..n / 2 {
            cos_coeffs[k] = 2.0 * buf[k].re / nf;
            sin_coeffs[k] = -2.0 * buf[k].im / nf;
        }
        cos_coeffs[n / 2] = buf[n / 2].re / nf;
        Ok(CircleSeries { cos_coeffs, sin_coeffs })
    }
}

/// F(θ) = Σ_k a_k cos kθ + b_k sin kθ, the interpolating band-limited form
/// of a circle-grid function.
#[derive(Debug, Clone)]
pub struct CircleSeries {
    cos_coeffs: Vec<f64>,
    sin_coeffs: Vec<f64>,
}

impl CircleSeries {
    pub fn eval(&self, theta: f64) -> f64 {
        // Incremental rotation instead of per-mode sin/cos; the drift is
        // O(k·ε), far below the quadrature tolerances downstream.
        let (s1, c1) = theta.sin_cos();
        let (mut ck, mut sk) = (1.0f64, 0.0f64);
        let mut sum = self.cos_coeffs[0];
        for k in 1..self.cos_coeffs.len() {
            let cn = ck * c1 - sk * s1;
            let sn = sk * c1 + ck * s1;
            ck = cn;
            sk = sn;
            sum += self.cos_coeffs[k] * ck + self.sin_coeffs[k] * sk;
        }
        sum
    }

    /// Coefficient of cos kθ (0 beyond the stored band).
    pub fn cos_coefficient(&self, k: usize) -> f64 {
        self.cos_coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Coefficient of sin kθ (0 beyond the stored band).
    pub fn sin_coefficient(&self, k: usize) -> f64 {
        self.sin_coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Largest mode index with a coefficient above `rel` times the scale.
    pub fn effective_band(&self, rel: f64) -> usize {
        let scale = self
            .cos_coeffs
            .iter()
            .chain(&self.sin_coeffs)
            .fold(1e-300f64, |m, v| m.max(v.abs()));
        (0..self.cos_coeffs.len())
            .rev()
            .find(|&k| {
                self.cos_coeffs[k].abs() > rel * scale || self.sin_coeffs[k].abs() > rel * scale
            })
            .unwrap_or(0)
    }
}

fn fft_in_place(buf: &mut [Complex<f64>], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// Projects a smooth zonal profile f(c) onto coefficients a_0..a_L of
/// Σ a_ℓ P_ℓ: a_ℓ = N(d,ℓ)/|S^{d-1}| · |S^{d-2}| ∫ f P_ℓ (1-c²)^{(d-3)/2} dc.
/// `order` must give exactness beyond twice the band of f when f is
/// polynomial; callers with non-polynomial f choose the order from their
/// own accuracy needs.
pub fn project_zonal<F: Fn(f64) -> f64>(
    d: Dimension,
    l_max: usize,
    order: usize,
    f: F,
) -> Result<Vec<f64>> {
    let me = d.measure_exponent();
    let rule = QuadratureRule::gauss_jacobi(order.max(l_max + 2), me, me)?;
    let family = PolyFamily::new(d, l_max);
    let sphere = surface_area(d.get())?;
    let band = surface_area(d.get() - 1)?;
    let mut acc = vec![0.0f64; l_max + 1];
    for (&c, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fv = w * f(c);
        let p = family.eval_all(l_max, c)?;
        for l in 0..=l_max {
            acc[l] += fv * p[l];
        }
    }
    for (l, a) in acc.iter_mut().enumerate() {
        *a *= eigenspace_dim(d, l) as f64 / sphere * band;
    }
    Ok(acc)
}

/// The jump operator 𝓑 acting mode-wise: a_ℓ → −λ̃_ℓ a_ℓ. Mass (the
/// constant mode) is annihilated; divergent odd eigenvalues are legal only
/// on even data.
pub fn apply_b(spec: &KernelSpectrum, f: &SphereFunction) -> Result<SphereFunction> {
    if spec.dimension() != f.dimension() {
        return Err(Error::InvalidInput(
            "spectrum and function must share a dimension".into(),
        ));
    }
    if f.band_limit() > spec.l_max() {
        return Err(Error::BandLimitExceeded(format!(
            "function band {} exceeds spectrum degree cap {}",
            f.band_limit(),
            spec.l_max()
        )));
    }
    f.mode_map(|l| -spec.value(l))
}

/// The Laplace-Beltrami operator: a_ℓ → −ℓ(ℓ+d−2) a_ℓ.
pub fn apply_laplacian(f: &SphereFunction) -> Result<SphereFunction> {
    let d = f.dimension();
    f.mode_map(|l| -laplace_eigenvalue(d, l))
}

/// Γ_Δ(F,G) = ∇_σF·∇_σG: (1−c²) f′(c) g′(c) for zonal data, F′G′ on the
/// circle. The result is exact for grids and projected at full product
/// band for zonal data.
pub fn gamma_delta(f: &SphereFunction, g: &SphereFunction) -> Result<SphereFunction> {
    match (&f.repr, &g.repr) {
        (Repr::CircleGrid { .. }, Repr::CircleGrid { .. }) => {
            if f.grid_values().map(<[f64]>::len) != g.grid_values().map(<[f64]>::len) {
                return Err(Error::InvalidInput("grid sizes differ".into()));
            }
            let fp = grid_derivative(f)?;
            let gp = grid_derivative(g)?;
            let values: Vec<f64> = fp.iter().zip(&gp).map(|(a, b)| a * b).collect();
            Ok(SphereFunction { d: 2, repr: Repr::CircleGrid { values }, even: f.even && g.even })
        }
        (Repr::ZonalSpectral { coeffs: ca }, Repr::ZonalSpectral { coeffs: cb }) => {
            if f.d != g.d {
                return Err(Error::InvalidInput("dimension mismatch".into()));
            }
            let band = (ca.len() - 1) + (cb.len() - 1);
            let d = f.dimension();
            let order = 2 * band + 8;
            let rule = QuadratureRule::gauss_jacobi(order, d.measure_exponent(), d.measure_exponent())?;
            let fp = f.derivative_at_nodes(rule.nodes())?;
            let gp = g.derivative_at_nodes(rule.nodes())?;
            let vals: Vec<f64> = rule
                .nodes()
                .iter()
                .zip(fp.iter().zip(&gp))
                .map(|(&c, (a, b))| (1.0 - c * c) * a * b)
                .collect();
            let coeffs = project_values(d, band, &rule, &vals)?;
            Ok(SphereFunction {
                d: f.d,
                repr: Repr::ZonalSpectral { coeffs },
                even: f.even && g.even,
            })
        }
        _ => Err(Error::InvalidInput("mixed representations".into())),
    }
}

/// Projection of values sampled at the nodes of `rule` (measure already in
/// the rule's weights) onto zonal coefficients through degree `l_max`.
fn project_values(
    d: Dimension,
    l_max: usize,
    rule: &QuadratureRule,
    values: &[f64],
) -> Result<Vec<f64>> {
    let family = PolyFamily::new(d, l_max);
    let sphere = surface_area(d.get())?;
    let band = surface_area(d.get() - 1)?;
    let mut acc = vec![0.0f64; l_max + 1];
    for ((&c, &w), &v) in rule.nodes().iter().zip(rule.weights()).zip(values) {
        let p = family.eval_all(l_max, c)?;
        let wv = w * v;
        for l in 0..=l_max {
            acc[l] += wv * p[l];
        }
    }
    for (l, a) in acc.iter_mut().enumerate() {
        *a *= eigenspace_dim(d, l) as f64 / sphere * band;
    }
    Ok(acc)
}

/// Angular derivative of a circle-grid function, by the spectral
/// multiplier ik (Nyquist mode dropped, as standard for real data).
fn grid_derivative(f: &SphereFunction) -> Result<Vec<f64>> {
    let values = f
        .grid_values()
        .ok_or_else(|| Error::InvalidInput("grid derivative needs grid data".into()))?;
    let n = values.len();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    for k in 0..n {
        let freq = if k <= n / 2 { k as isize } else { k as isize - n as isize };
        if k == n / 2 {
            buf[k] = Complex::new(0.0, 0.0);
        } else {
            buf[k] *= Complex::new(0.0, freq as f64);
        }
    }
    fft_in_place(&mut buf, true);
    Ok(buf.iter().map(|z| z.re / n as f64).collect())
}

/// Γ²_{𝓑,Δ}(F,G) = ½( 𝓑 Γ_Δ(F,G) − Γ_Δ(𝓑F, G) − Γ_Δ(F, 𝓑G) ).
pub fn gamma2_mixed(
    spec: &KernelSpectrum,
    f: &SphereFunction,
    g: &SphereFunction,
) -> Result<SphereFunction> {
    let gam = gamma_delta(f, g)?;
    let term1 = apply_b(spec, &gam)?;
    let bf = apply_b(spec, f)?;
    let bg = apply_b(spec, g)?;
    let term2 = gamma_delta(&bf, g)?;
    let term3 = gamma_delta(f, &bg)?;
    lin_combine(&[(0.5, &term1), (-0.5, &term2), (-0.5, &term3)])
}

/// Σ c_i F_i for functions sharing one representation shape.
pub fn lin_combine(terms: &[(f64, &SphereFunction)]) -> Result<SphereFunction> {
    let (_, first) = terms
        .first()
        .ok_or_else(|| Error::InvalidInput("empty combination".into()))?;
    match &first.repr {
        Repr::CircleGrid { values } => {
            let n = values.len();
            let mut out = vec![0.0f64; n];
            let mut even = true;
            for (coef, f) in terms {
                let vals = f
                    .grid_values()
                    .ok_or_else(|| Error::InvalidInput("mixed representations".into()))?;
                if vals.len() != n {
                    return Err(Error::InvalidInput("grid sizes differ".into()));
                }
                for (o, v) in out.iter_mut().zip(vals) {
                    *o += coef * v;
                }
                even &= f.even;
            }
            Ok(SphereFunction { d: 2, repr: Repr::CircleGrid { values: out }, even })
        }
        Repr::ZonalSpectral { .. } => {
            let d = first.d;
            let len = terms
                .iter()
                .map(|(_, f)| f.zonal_coeffs().map_or(0, <[f64]>::len))
                .max()
                .unwrap();
            let mut out = vec![0.0f64; len];
            let mut even = true;
            for (coef, f) in terms {
                let coeffs = f
                    .zonal_coeffs()
                    .ok_or_else(|| Error::InvalidInput("mixed representations".into()))?;
                if f.d != d {
                    return Err(Error::InvalidInput("dimension mismatch".into()));
                }
                for (o, v) in out.iter_mut().zip(coeffs) {
                    *o += coef * v;
                }
                even &= f.even;
            }
            Ok(SphereFunction { d, repr: Repr::ZonalSpectral { coeffs: out }, even })
        }
    }
}

/// Fisher information I(F) = ∫ |∇_σ log F|² F dσ
/// = |S^{d-2}| ∫ (1-c²) (f′/f)² f (1-c²)^{(d-3)/2} dc for zonal data.
pub fn fisher(f: &SphereFunction) -> Result<f64> {
    let min = f.min_value()?;
    if min <= 0.0 {
        return Err(Error::NonPositive(format!(
            "Fisher information needs a positive function; min sample {min}"
        )));
    }
    match &f.repr {
        Repr::CircleGrid { values } => {
            let n = values.len();
            let deriv = grid_derivative(f)?;
            let sum: f64 = values
                .iter()
                .zip(&deriv)
                .map(|(v, dv)| dv * dv / v)
                .sum();
            Ok(2.0 * std::f64::consts::PI * sum / n as f64)
        }
        Repr::ZonalSpectral { coeffs } => {
            let d = f.dimension();
            let me = d.measure_exponent();
            let start = (2 * (coeffs.len() - 1) + 16).max(64);
            // Weight (1-c²)^{me+1} absorbs the gradient's metric factor.
            let (value, _) = adaptive_jacobi_integral(me + 1.0, me + 1.0, start, 1e-11, |c| {
                let fv = eval_zonal_scalar(f, c);
                let dv = eval_zonal_derivative_scalar(f, c);
                dv * dv / fv
            })?;
            Ok(surface_area(d.get() - 1)? * value)
        }
    }
}

fn eval_zonal_scalar(f: &SphereFunction, c: f64) -> f64 {
    f.eval_at_nodes(&[c]).map(|v| v[0]).unwrap_or(f64::NAN)
}

fn eval_zonal_derivative_scalar(f: &SphereFunction, c: f64) -> f64 {
    f.derivative_at_nodes(&[c]).map(|v| v[0]).unwrap_or(f64::NAN)
}

/// Entropy diagnostic ∫ F log F dσ.
pub fn entropy(f: &SphereFunction) -> Result<f64> {
    let min = f.min_value()?;
    if min <= 0.0 {
        return Err(Error::NonPositive(format!(
            "entropy needs a positive function; min sample {min}"
        )));
    }
    match &f.repr {
        Repr::CircleGrid { values } => {
            let n = values.len();
            let sum: f64 = values.iter().map(|v| v * v.ln()).sum();
            Ok(2.0 * std::f64::consts::PI * sum / n as f64)
        }
        Repr::ZonalSpectral { coeffs } => {
            // Integrate the pointwise-nonnegative part F ln F − F + 1
            // (quadratic near equilibrium, so no cancellation starves the
            // relative-agreement loop) and restore ∫(F−1) exactly from the
            // mean mode.
            let d = f.dimension();
            let me = d.measure_exponent();
            let start = (2 * (coeffs.len() - 1) + 16).max(64);
            let (value, _) = adaptive_jacobi_integral(me, me, start, 1e-11, |c| {
                let fv = eval_zonal_scalar(f, c);
                fv.mul_add(fv.ln(), 1.0 - fv)
            })?;
            let sphere = surface_area(d.get())?;
            Ok(surface_area(d.get() - 1)? * value + (coeffs[0] - 1.0) * sphere)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelSpec, KernelVariant};
    use std::f64::consts::PI;

    fn dim(d: u32) -> Dimension {
        Dimension::new(d).unwrap()
    }

    fn grid_from<F: Fn(f64) -> f64>(n: usize, even: bool, f: F) -> SphereFunction {
        let values = (0..n)
            .map(|i| f(2.0 * PI * i as f64 / n as f64))
            .collect();
        SphereFunction::circle_grid(values, even).unwrap()
    }

    fn constant_spectrum(d: u32, l: usize) -> KernelSpectrum {
        KernelSpec::new(dim(d), KernelVariant::Constant { value: 1.0 })
            .unwrap()
            .btilde_spectrum(l)
            .unwrap()
    }

    #[test]
    fn constructors_validate() {
        assert!(SphereFunction::circle_grid(vec![1.0; 7], false).is_err());
        assert!(SphereFunction::circle_grid(vec![1.0; 6], false).is_err());
        // cos θ is odd under the antipodal map: the even flag must reject it.
        let vals: Vec<f64> = (0..16).map(|i| (2.0 * PI * i as f64 / 16.0).cos()).collect();
        assert!(SphereFunction::circle_grid(vals.clone(), true).is_err());
        assert!(SphereFunction::circle_grid(vals, false).is_ok());
        // Odd zonal coefficient under the even flag.
        assert!(SphereFunction::zonal_spectral(dim(3), vec![1.0, 0.5, 0.2], true).is_err());
        assert!(SphereFunction::zonal_spectral(dim(3), vec![1.0, 0.0, 0.2], true).is_ok());
        assert!(SphereFunction::zonal_spectral(dim(2), vec![1.0], false).is_err());
    }

    #[test]
    fn integral_and_band() {
        let f = SphereFunction::zonal_spectral(dim(3), vec![2.0, 0.0, 0.7], true).unwrap();
        assert!((f.integral().unwrap() - 2.0 * 4.0 * PI).abs() < 1e-12);
        assert_eq!(f.band_limit(), 2);
        let g = grid_from(32, false, |t| 1.5 + 0.3 * (2.0 * t).cos());
        assert!((g.integral().unwrap() - 1.5 * 2.0 * PI).abs() < 1e-12);
        assert_eq!(g.band_limit(), 16);
    }

    #[test]
    fn projection_recovers_coefficients() {
        let d = dim(3);
        let family = PolyFamily::new(d, 4);
        let coeffs = project_zonal(d, 4, 16, |c| {
            1.0 + 0.5 * family.eval(2, c).unwrap() - 0.25 * family.eval(4, c).unwrap()
        })
        .unwrap();
        let expected = [1.0, 0.0, 0.5, 0.0, -0.25];
        for (a, e) in coeffs.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{coeffs:?}");
        }
    }

    #[test]
    fn laplacian_examples() {
        // d=2: cos 2θ → −4 cos 2θ.
        let f = grid_from(32, true, |t| (2.0 * t).cos());
        let lap = apply_laplacian(&f).unwrap();
        for (v, t) in lap.grid_values().unwrap().iter().zip(0..32) {
            let theta = 2.0 * PI * t as f64 / 32.0;
            assert!((v - (-4.0) * (2.0 * theta).cos()).abs() < 1e-10);
        }
        // d=3: P_2 → −6 P_2.
        let f = SphereFunction::zonal_spectral(dim(3), vec![0.0, 0.0, 1.0], true).unwrap();
        let lap = apply_laplacian(&f).unwrap();
        assert_eq!(lap.zonal_coeffs().unwrap(), &[0.0, 0.0, -6.0]);
        // Constants are annihilated.
        let c = SphereFunction::zonal_spectral(dim(4), vec![3.0], true).unwrap();
        assert_eq!(apply_laplacian(&c).unwrap().zonal_coeffs().unwrap(), &[0.0]);
    }

    #[test]
    fn jump_operator_examples() {
        let spec = constant_spectrum(3, 8);
        // P_2 mode: −λ̃_2 = −4π.
        let f = SphereFunction::zonal_spectral(dim(3), vec![0.0, 0.0, 1.0], true).unwrap();
        let bf = apply_b(&spec, &f).unwrap();
        let coeffs = bf.zonal_coeffs().unwrap();
        assert!((coeffs[2] + 4.0 * PI).abs() < 1e-10);
        // Constants are annihilated, and mass is conserved for any input.
        let g = SphereFunction::zonal_spectral(dim(3), vec![1.3, 0.0, 0.4, 0.0, 0.1], true)
            .unwrap();
        let bg = apply_b(&spec, &g).unwrap();
        assert_eq!(bg.zonal_coeffs().unwrap()[0], 0.0);
        assert!(bg.integral().unwrap().abs() < 1e-12);
        // Band overflow is rejected.
        let wide = SphereFunction::zonal_spectral(dim(3), vec![0.0; 12], false).unwrap();
        assert!(matches!(
            apply_b(&spec, &wide),
            Err(Error::BandLimitExceeded(_))
        ));
    }

    #[test]
    fn operators_commute() {
        let spec = constant_spectrum(3, 10);
        let f = SphereFunction::zonal_spectral(
            dim(3),
            vec![1.0, 0.0, 0.3, 0.0, -0.2, 0.0, 0.05, 0.0, 0.0, 0.0, 0.02],
            true,
        )
        .unwrap();
        let ab = apply_laplacian(&apply_b(&spec, &f).unwrap()).unwrap();
        let ba = apply_b(&spec, &apply_laplacian(&f).unwrap()).unwrap();
        for (x, y) in ab
            .zonal_coeffs()
            .unwrap()
            .iter()
            .zip(ba.zonal_coeffs().unwrap())
        {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn infinite_odd_multipliers() {
        // Power-law spectra have divergent odd eigenvalues; even data maps
        // cleanly, genuine odd data must error.
        let spec = KernelSpec::new(dim(3), KernelVariant::PowerLaw { s: 0.5, gamma: -1.0 })
            .unwrap()
            .btilde_spectrum(6)
            .unwrap();
        let even = SphereFunction::zonal_spectral(dim(3), vec![1.0, 0.0, 0.5], true).unwrap();
        assert!(apply_b(&spec, &even).is_ok());
        let odd = SphereFunction::zonal_spectral(dim(3), vec![1.0, 0.5, 0.0], false).unwrap();
        assert!(matches!(
            apply_b(&spec, &odd),
            Err(Error::DivergentIntegral(_))
        ));
    }

    #[test]
    fn gamma_delta_examples() {
        // d=2: F = G = cos θ gives sin²θ.
        let f = grid_from(64, false, |t| t.cos());
        let gam = gamma_delta(&f, &f).unwrap();
        for (i, v) in gam.grid_values().unwrap().iter().enumerate() {
            let theta = 2.0 * PI * i as f64 / 64.0;
            assert!((v - theta.sin().powi(2)).abs() < 1e-10);
        }
        // d=3: F = G = P_1 = c gives 1 − c².
        let f = SphereFunction::zonal_spectral(dim(3), vec![0.0, 1.0], false).unwrap();
        let gam = gamma_delta(&f, &f).unwrap();
        let nodes = [-0.9, -0.3, 0.0, 0.4, 0.99];
        let vals = gam.eval_at_nodes(&nodes).unwrap();
        for (&c, v) in nodes.iter().zip(vals) {
            assert!((v - (1.0 - c * c)).abs() < 1e-12);
        }
        // Constant second argument kills the form.
        let cst = SphereFunction::zonal_spectral(dim(3), vec![2.0], true).unwrap();
        let z = gamma_delta(&f, &cst).unwrap();
        for a in z.zonal_coeffs().unwrap() {
            assert!(a.abs() < 1e-14);
        }
    }

    #[test]
    fn gamma2_symmetric_and_zero_on_constants() {
        let spec = constant_spectrum(3, 16);
        let f = SphereFunction::zonal_spectral(dim(3), vec![1.0, 0.0, 0.4, 0.0, -0.1], true)
            .unwrap();
        let g = SphereFunction::zonal_spectral(dim(3), vec![0.5, 0.0, -0.2, 0.0, 0.3], true)
            .unwrap();
        let fg = gamma2_mixed(&spec, &f, &g).unwrap();
        let gf = gamma2_mixed(&spec, &g, &f).unwrap();
        let nodes: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let a = fg.eval_at_nodes(&nodes).unwrap();
        let b = gf.eval_at_nodes(&nodes).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        let cst = SphereFunction::zonal_spectral(dim(3), vec![2.0], true).unwrap();
        let z = gamma2_mixed(&spec, &f, &cst).unwrap();
        for v in z.eval_at_nodes(&nodes).unwrap() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn gamma2_curvature_instance() {
        // ∫ Γ²(F,F) dσ ≥ C_K ∫ Γ(F,F) dσ for F = P_2, constant kernel d=3,
        // C_K = 2π/3.
        let spec = constant_spectrum(3, 8);
        let f = SphereFunction::zonal_spectral(dim(3), vec![0.0, 0.0, 1.0], true).unwrap();
        let g2 = gamma2_mixed(&spec, &f, &f).unwrap();
        let gd = gamma_delta(&f, &f).unwrap();
        let lhs = g2.integral().unwrap();
        let rhs = 2.0 * PI / 3.0 * gd.integral().unwrap();
        assert!(lhs >= rhs * (1.0 - 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn fisher_examples() {
        // Constants carry no information.
        let c = SphereFunction::zonal_spectral(dim(3), vec![2.0], true).unwrap();
        assert!(fisher(&c).unwrap().abs() < 1e-14);
        // d=2, F = exp(ε cos 2θ): I = 4πε² + O(ε⁴).
        let eps = 1e-3;
        let f = grid_from(128, true, |t| (eps * (2.0 * t).cos()).exp());
        let val = fisher(&f).unwrap();
        assert!((val - 4.0 * PI * eps * eps).abs() < 1e-10, "{val}");
        // Scaling: I(cF) = c·I(F).
        let f2 = grid_from(128, true, |t| 3.0 * (eps * (2.0 * t).cos()).exp());
        assert!((fisher(&f2).unwrap() - 3.0 * val).abs() < 1e-12);
        // Positivity enforced.
        let neg = SphereFunction::zonal_spectral(dim(3), vec![0.1, 0.0, 1.0], true).unwrap();
        assert!(matches!(fisher(&neg), Err(Error::NonPositive(_))));
    }

    #[test]
    fn fisher_zonal_small_mode() {
        // Same linearization on the sphere: F = 1 + ε P_2 at d=3:
        // I ≈ ε² ∫ (1-c²) P_2′² dσ = ε² λ_2 ‖P_2‖² = ε²·6·4π/5.
        let eps = 1e-4;
        let f = SphereFunction::zonal_spectral(dim(3), vec![1.0, 0.0, eps], true).unwrap();
        let val = fisher(&f).unwrap();
        let expected = eps * eps * 6.0 * 4.0 * PI / 5.0;
        // The cubic cross term −ε³∫P₂|∇P₂|² contributes ~0.14ε relative.
        assert!(
            (val - expected).abs() < 0.5 * eps * expected,
            "{val} vs {expected}"
        );
    }

    #[test]
    fn entropy_example() {
        let c = 2.5f64;
        let f = SphereFunction::zonal_spectral(dim(3), vec![c], true).unwrap();
        let expected = 4.0 * PI * c * c.ln();
        assert!((entropy(&f).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn circle_series_interpolates() {
        let f = grid_from(64, false, |t| 1.0 + 0.3 * (3.0 * t).sin() - 0.2 * (5.0 * t).cos());
        let series = f.circle_series().unwrap();
        // Reproduces the samples…
        for (i, v) in f.grid_values().unwrap().iter().enumerate() {
            let theta = 2.0 * PI * i as f64 / 64.0;
            assert!((series.eval(theta) - v).abs() < 1e-12);
        }
        // …and the underlying band-limited function off the grid.
        for &theta in &[0.123f64, 1.77, 4.56] {
            let expected = 1.0 + 0.3 * (3.0 * theta).sin() - 0.2 * (5.0 * theta).cos();
            assert!((series.eval(theta) - expected).abs() < 1e-12);
        }
        assert_eq!(series.effective_band(1e-9), 5);
    }

    #[test]
    fn serialization_round_trip() {
        let f = SphereFunction::zonal_spectral(dim(3), vec![1.0, 0.0, 0.25], true).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: SphereFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }
}
