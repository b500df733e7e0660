//! Collision-kernel representations b(c) on [-1, 1], their Lévy moments,
//! Funk-Hecke spectra, symmetrized comparison, and subordinated kernels
//! built from the heat kernel.
//!
//! Closed-form kernels are stored as a decomposition
//! b(c) = (1-c)^p (1+c)^m φ(c) with φ smooth, so that every integral can
//! hand its endpoint exponents to a Gauss-Jacobi rule and evaluate only the
//! smooth factor at the nodes. The spectrum integrand additionally deflates
//! the factor 1 − P_ℓ(c), which vanishes to first order at c = 1 (and, for
//! even ℓ, at c = -1): exactly that cancellation is what keeps the integral
//! finite for strongly singular kernels, and evaluating it by subtraction
//! would lose every digit where the weight concentrates.

use crate::error::{Error, Result};
use crate::gegenbauer::{
    heat_kernel_profile, heat_truncation_level, laplace_eigenvalue, PolyFamily,
};
use crate::quadrature::{adaptive_jacobi_integral, QuadratureRule};
use crate::sphere::{surface_area, Dimension};
use serde::{Deserialize, Serialize};

/// Relative agreement demanded between successive quadrature orders.
const SPECTRUM_REL_TOL: f64 = 1e-10;

/// Relative mass below which the tail of a subordination weight is cut off.
const WEIGHT_TAIL_REL: f64 = 1e-14;

/// Series truncation cap for heat-kernel evaluations inside subordination.
const HEAT_SERIES_CAP: usize = 1200;

/// Time-mixing weight ω : (0, ∞) → [0, ∞) defining a subordinated kernel
/// b_ω(c) = ∫ u_t(c) ω(t) dt. The invariant ∫ ω(t) min(t, 1) dt < ∞ keeps
/// the subordinated kernel admissible; all three variants below enforce it
/// structurally (bounded near t = 0 or supported away from it).
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    /// ω = height on [t_min, t_max], zero elsewhere.
    ConstantOnInterval { height: f64, t_min: f64, t_max: f64 },
    /// ω(t) = scale · e^{-rate t}.
    Exponential { rate: f64, scale: f64 },
    /// Piecewise-linear interpolation through (times, values), zero outside.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::ConstantOnInterval { height, t_min, t_max } => {
                if !(*height >= 0.0) || !height.is_finite() {
                    return Err(Error::InvalidInput("weight height must be >= 0".into()));
                }
                if !(*t_min > 0.0) || !(*t_max > *t_min) || !t_max.is_finite() {
                    return Err(Error::InvalidInput(
                        "weight interval needs 0 < t_min < t_max < inf".into(),
                    ));
                }
            }
            WeightSpec::Exponential { rate, scale } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(Error::InvalidInput("weight rate must be > 0".into()));
                }
                if !(*scale >= 0.0) || !scale.is_finite() {
                    return Err(Error::InvalidInput("weight scale must be >= 0".into()));
                }
            }
            WeightSpec::Tabulated { times, values } => {
                if times.len() != values.len() || times.len() < 2 {
                    return Err(Error::InvalidInput(
                        "tabulated weight needs matching times/values, length >= 2".into(),
                    ));
                }
                if !(times[0] > 0.0) {
                    return Err(Error::InvalidInput(
                        "tabulated weight times must start above 0".into(),
                    ));
                }
                for pair in times.windows(2) {
                    if !(pair[0] < pair[1]) {
                        return Err(Error::InvalidInput(
                            "tabulated weight times must increase strictly".into(),
                        ));
                    }
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidInput(
                        "tabulated weight values must be finite and >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Pointwise value ω(t).
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            WeightSpec::ConstantOnInterval { height, t_min, t_max } => {
                if t >= *t_min && t <= *t_max {
                    *height
                } else {
                    0.0
                }
            }
            WeightSpec::Exponential { rate, scale } => {
                if t > 0.0 {
                    scale * (-rate * t).exp()
                } else {
                    0.0
                }
            }
            WeightSpec::Tabulated { times, values } => {
                if t < times[0] || t > *times.last().unwrap() {
                    return 0.0;
                }
                let idx = match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
                    Ok(i) => return values[i],
                    Err(i) => i,
                };
                let (t0, t1) = (times[idx - 1], times[idx]);
                let (v0, v1) = (values[idx - 1], values[idx]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// ∫ ω(t) dt.
    pub fn total_mass(&self) -> f64 {
        match self {
            WeightSpec::ConstantOnInterval { height, t_min, t_max } => {
                height * (t_max - t_min)
            }
            WeightSpec::Exponential { rate, scale } => scale / rate,
            WeightSpec::Tabulated { times, values } => times
                .windows(2)
                .zip(values.windows(2))
                .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
                .sum(),
        }
    }

    /// Smallest time carrying any weight mass (1e-10 stands in for the
    /// exponential variant's unbounded-below support).
    pub fn support_min(&self) -> f64 {
        match self {
            WeightSpec::ConstantOnInterval { t_min, .. } => *t_min,
            WeightSpec::Exponential { .. } => 1e-10,
            WeightSpec::Tabulated { times, .. } => times[0],
        }
    }

    /// Integrates ω(t) g(t) dt for smooth g, ignoring t below `t_floor`
    /// (callers pass the point below which their g is provably negligible).
    ///
    /// The domain splits at t = 1: the lower part is integrated in log time
    /// (ω may concentrate near 0), the upper part up to a cutoff beyond
    /// which the remaining ω-mass is below [`WEIGHT_TAIL_REL`] of the total.
    pub fn integrate<F: Fn(f64) -> f64>(&self, t_floor: f64, g: F) -> Result<f64> {
        self.validate()?;
        match self {
            WeightSpec::ConstantOnInterval { height, t_min, t_max } => {
                if *height == 0.0 {
                    return Ok(0.0);
                }
                let lo = t_floor.max(*t_min);
                if lo >= *t_max {
                    return Ok(0.0);
                }
                let h = *height;
                log_split_integral(lo, *t_max, |t| h * g(t))
            }
            WeightSpec::Exponential { rate, scale } => {
                if *scale == 0.0 {
                    return Ok(0.0);
                }
                // e^{-rate t} tail below WEIGHT_TAIL_REL of the total mass.
                let hi = -WEIGHT_TAIL_REL.ln() / rate;
                let lo = t_floor.max(1e-10);
                if lo >= hi {
                    return Ok(0.0);
                }
                let (rate, scale) = (*rate, *scale);
                log_split_integral(lo, hi, |t| scale * (-rate * t).exp() * g(t))
            }
            WeightSpec::Tabulated { times, .. } => {
                // Piecewise-linear ω has kinks at the sample times, so each
                // segment gets its own fixed Gauss rule.
                let rule = QuadratureRule::gauss_jacobi(24, 0.0, 0.0)?;
                let mut total = 0.0;
                for i in 0..times.len() - 1 {
                    let (t0, t1) = (times[i].max(t_floor), times[i + 1]);
                    if t0 >= t1 {
                        continue;
                    }
                    let half = 0.5 * (t1 - t0);
                    let mid = 0.5 * (t1 + t0);
                    total += half
                        * rule.integrate(|x| {
                            let t = mid + half * x;
                            self.eval(t) * g(t)
                        });
                }
                Ok(total)
            }
        }
    }
}

/// ∫_{lo}^{hi} f(t) dt with the (0, 1] part done in log time.
fn log_split_integral<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> Result<f64> {
    let mut total = 0.0;
    let split = hi.min(1.0);
    if lo < split {
        total += adaptive_interval_integral(lo.ln(), split.ln(), |u| {
            let t = u.exp();
            t * f(t)
        })?;
    }
    if hi > 1.0 {
        let lo2 = lo.max(1.0);
        total += adaptive_interval_integral(lo2.ln(), hi.ln(), |u| {
            let t = u.exp();
            t * f(t)
        })?;
    }
    Ok(total)
}

/// Adaptive Gauss-Legendre on [a, b], doubling until successive orders agree.
pub(crate) fn adaptive_interval_integral<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let eval = |order: usize| -> Result<f64> {
        let rule = QuadratureRule::gauss_jacobi(order, 0.0, 0.0)?;
        Ok(half * rule.integrate(|x| f(mid + half * x)))
    };
    let mut order = 64;
    let mut prev = eval(order)?;
    while order < 4096 {
        order *= 2;
        let next = eval(order)?;
        let scale = prev.abs().max(next.abs()).max(1e-300);
        if (next - prev).abs() <= 1e-12 * scale {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged(
        "time integral did not settle by order 4096".into(),
    ))
}

/// Nodes and weights integrating f(c) (1-c)^α (1+c)^β dc over [-1, 1],
/// split at the given interior breakpoints. Without breakpoints this is one
/// Gauss-Jacobi rule; with them, the endpoint segments get mapped
/// Gauss-Jacobi rules carrying their singular factor and interior segments
/// get Gauss-Legendre with the now-smooth measure folded into the weights.
pub(crate) fn jacobi_nodes_split(
    order: usize,
    alpha: f64,
    beta: f64,
    breaks: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if breaks.is_empty() {
        let rule = QuadratureRule::gauss_jacobi(order, alpha, beta)?;
        return Ok((rule.nodes().to_vec(), rule.weights().to_vec()));
    }
    let first = breaks[0];
    let last = *breaks.last().unwrap();
    let legendre = QuadratureRule::gauss_jacobi(order, 0.0, 0.0)?;
    let left = QuadratureRule::gauss_jacobi(order, 0.0, beta)?;
    let right = QuadratureRule::gauss_jacobi(order, alpha, 0.0)?;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();

    // [-1, first]: (1+c) = h(1+x) keeps the left singularity in the rule.
    let h = 0.5 * (first + 1.0);
    for (&x, &w) in left.nodes().iter().zip(left.weights()) {
        let c = -1.0 + h * (1.0 + x);
        nodes.push(c);
        weights.push(w * h.powf(beta + 1.0) * (1.0 - c).powf(alpha));
    }
    for seg in breaks.windows(2) {
        let half = 0.5 * (seg[1] - seg[0]);
        let mid = 0.5 * (seg[1] + seg[0]);
        for (&x, &w) in legendre.nodes().iter().zip(legendre.weights()) {
            let c = mid + half * x;
            nodes.push(c);
            weights.push(w * half * (1.0 - c).powf(alpha) * (1.0 + c).powf(beta));
        }
    }
    // [last, 1]: (1-c) = h(1-x).
    let h = 0.5 * (1.0 - last);
    for (&x, &w) in right.nodes().iter().zip(right.weights()) {
        let c = 1.0 - h * (1.0 - x);
        nodes.push(c);
        weights.push(w * h.powf(alpha + 1.0) * (1.0 + c).powf(beta));
    }
    Ok((nodes, weights))
}

/// Collision kernel on [-1, 1] in dimension d.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    d: Dimension,
    variant: KernelVariant,
}

/// The representation variants. `PowerLaw` takes the asymptotic form as an
/// exact equality b(c) = (1-c²)^{-(d-1+2s)/2}; comparison handles other
/// representatives of the same class.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelVariant {
    /// b(c) = 2^{d-3} (1-c)^{(3-d)/2}; constant in dimension 3.
    HardSphere,
    /// b(c) = (1-c²)^{-(d-1+2s)/2}; γ records the associated velocity
    /// exponent α(r) = r^γ and plays no role in the kernel values.
    PowerLaw { s: f64, gamma: f64 },
    /// b ≡ value > 0.
    Constant { value: f64 },
    /// b_ω(c) = ∫ u_t(c) ω(t) dt.
    Subordinated { weight: WeightSpec },
    /// b(c) = (1-c)^{exp_plus} (1+c)^{exp_minus} · S(c) with S the
    /// not-a-knot cubic spline through (nodes, values ≥ 0), clamped to its
    /// end nodes outside their span.
    Tabulated(TabulatedKernel),
}

/// Sampled smooth factor of a kernel plus declared endpoint exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    nodes: Vec<f64>,
    values: Vec<f64>,
    exp_plus: f64,
    exp_minus: f64,
    /// Spline second derivatives, filled at construction.
    second: Vec<f64>,
}

impl TabulatedKernel {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, exp_plus: f64, exp_minus: f64) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 4 {
            return Err(Error::InvalidInput(
                "tabulated kernel needs matching nodes/values, length >= 4".into(),
            ));
        }
        if nodes[0] <= -1.0 || *nodes.last().unwrap() >= 1.0 {
            return Err(Error::InvalidInput(
                "tabulated kernel nodes must lie inside (-1, 1)".into(),
            ));
        }
        for pair in nodes.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::InvalidInput(
                    "tabulated kernel nodes must increase strictly".into(),
                ));
            }
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "tabulated kernel values must be finite and >= 0".into(),
            ));
        }
        if !exp_plus.is_finite() || !exp_minus.is_finite() {
            return Err(Error::InvalidInput(
                "tabulated kernel exponents must be finite".into(),
            ));
        }
        let second = not_a_knot_second_derivatives(&nodes, &values);
        Ok(Self { nodes, values, exp_plus, exp_minus, second })
    }

    /// Spline value, clamped to the end nodes beyond their span.
    pub fn smooth_value(&self, c: f64) -> f64 {
        let n = self.nodes.len();
        let c = c.clamp(self.nodes[0], self.nodes[n - 1]);
        let idx = match self
            .nodes
            .binary_search_by(|x| x.partial_cmp(&c).unwrap())
        {
            Ok(i) => return self.values[i],
            Err(i) => i.clamp(1, n - 1),
        };
        let (x0, x1) = (self.nodes[idx - 1], self.nodes[idx]);
        let h = x1 - x0;
        let a = (x1 - c) / h;
        let b = (c - x0) / h;
        a * self.values[idx - 1]
            + b * self.values[idx]
            + ((a * a * a - a) * self.second[idx - 1] + (b * b * b - b) * self.second[idx])
                * h
                * h
                / 6.0
    }
}

/// Second derivatives of the cubic spline with not-a-knot boundary
/// conditions (third derivative continuous across the first and last
/// interior nodes), solved by dense Gaussian elimination on the small
/// almost-tridiagonal system. Not-a-knot reproduces cubics exactly, which a
/// natural spline would spoil near the ends.
fn not_a_knot_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut a = vec![vec![0.0f64; n]; n];
    let mut rhs = vec![0.0f64; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        a[i][i - 1] = h0 / 6.0;
        a[i][i] = (h0 + h1) / 3.0;
        a[i][i + 1] = h1 / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    // Not-a-knot: m''' continuous at x[1] and x[n-2].
    let h0 = x[1] - x[0];
    let h1 = x[2] - x[1];
    a[0][0] = h1;
    a[0][1] = -(h0 + h1);
    a[0][2] = h0;
    let hm1 = x[n - 1] - x[n - 2];
    let hm2 = x[n - 2] - x[n - 3];
    a[n - 1][n - 3] = hm1;
    a[n - 1][n - 2] = -(hm1 + hm2);
    a[n - 1][n - 1] = hm2;

    // Gaussian elimination with partial pivoting; n is small (user samples).
    let mut order: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[order[i]][col]
                    .abs()
                    .partial_cmp(&a[order[j]][col].abs())
                    .unwrap()
            })
            .unwrap();
        order.swap(col, pivot);
        let p = order[col];
        for &r in order.iter().skip(col + 1) {
            let factor = a[r][col] / a[p][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[r][k] -= factor * a[p][k];
            }
            rhs[r] -= factor * rhs[p];
        }
    }
    let mut out = vec![0.0f64; n];
    for col in (0..n).rev() {
        let p = order[col];
        let mut v = rhs[p];
        for k in col + 1..n {
            v -= a[p][k] * out[k];
        }
        out[col] = v / a[p][col];
    }
    out
}

/// Endpoint behavior of a closed-form kernel: b(c) = (1-c)^p (1+c)^m φ(c).
#[derive(Debug, Clone, Copy)]
pub struct EndpointData {
    /// Exponent of (1-c).
    pub p: f64,
    /// Exponent of (1+c).
    pub m: f64,
    /// Smooth factor at c = 1.
    pub phi_plus: f64,
    /// Smooth factor at c = -1.
    pub phi_minus: f64,
}

impl KernelSpec {
    pub fn new(d: Dimension, variant: KernelVariant) -> Result<Self> {
        match &variant {
            KernelVariant::HardSphere => {}
            KernelVariant::PowerLaw { s, gamma } => {
                if !(*s > 0.0) || !s.is_finite() {
                    return Err(Error::OutOfRange(format!(
                        "power-law exponent s must be > 0, got {s}"
                    )));
                }
                if !gamma.is_finite() {
                    return Err(Error::OutOfRange("power-law gamma must be finite".into()));
                }
            }
            KernelVariant::Constant { value } => {
                if !(*value > 0.0) || !value.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "constant kernel value must be > 0, got {value}"
                    )));
                }
            }
            KernelVariant::Subordinated { weight } => weight.validate()?,
            KernelVariant::Tabulated(_) => {}
        }
        Ok(Self { d, variant })
    }

    pub fn dimension(&self) -> Dimension {
        self.d
    }

    pub fn variant(&self) -> &KernelVariant {
        &self.variant
    }

    /// Endpoint decomposition for every variant except Subordinated, whose
    /// endpoint behavior depends on the weight's mass near t = 0.
    pub fn endpoint_data(&self) -> Option<EndpointData> {
        let df = self.d.as_f64();
        match &self.variant {
            KernelVariant::HardSphere => {
                let scale = (2.0f64).powf(df - 3.0);
                Some(EndpointData { p: (3.0 - df) / 2.0, m: 0.0, phi_plus: scale, phi_minus: scale })
            }
            KernelVariant::PowerLaw { s, .. } => {
                let e = -(df - 1.0 + 2.0 * s) / 2.0;
                Some(EndpointData { p: e, m: e, phi_plus: 1.0, phi_minus: 1.0 })
            }
            KernelVariant::Constant { value } => Some(EndpointData {
                p: 0.0,
                m: 0.0,
                phi_plus: *value,
                phi_minus: *value,
            }),
            KernelVariant::Subordinated { .. } => None,
            KernelVariant::Tabulated(t) => Some(EndpointData {
                p: t.exp_plus,
                m: t.exp_minus,
                phi_plus: t.smooth_value(1.0),
                phi_minus: t.smooth_value(-1.0),
            }),
        }
    }

    /// Smooth factor φ(c) in b = (1-c)^p (1+c)^m φ. Only meaningful for
    /// variants with endpoint data.
    pub(crate) fn smooth_factor(&self, c: f64) -> f64 {
        match &self.variant {
            KernelVariant::HardSphere => (2.0f64).powf(self.d.as_f64() - 3.0),
            KernelVariant::PowerLaw { .. } => 1.0,
            KernelVariant::Constant { value } => *value,
            KernelVariant::Subordinated { .. } => unreachable!("no closed decomposition"),
            KernelVariant::Tabulated(t) => t.smooth_value(c),
        }
    }

    /// Pointwise value b(c); +∞ is returned where a singular variant
    /// diverges at an endpoint.
    pub fn eval(&self, c: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&c) {
            return Err(Error::DomainError(c));
        }
        match &self.variant {
            KernelVariant::Subordinated { weight } => subordinated_profile(weight, self.d, c),
            _ => {
                let e = self.endpoint_data().expect("closed variant");
                Ok((1.0 - c).powf(e.p) * (1.0 + c).powf(e.m) * self.smooth_factor(c))
            }
        }
    }

    /// b(c) + b(-c), the symmetrization entering kernel comparison.
    pub fn symmetrized(&self, c: f64) -> Result<f64> {
        Ok(self.eval(c)? + self.eval(-c)?)
    }

    /// Lévy moment ∫_{S^{d-1}} (1 − (e·σ')²) b(e·σ') dσ'. Finiteness is the
    /// admissibility condition for the jump operator.
    pub fn levy_moment(&self) -> Result<f64> {
        match &self.variant {
            KernelVariant::Subordinated { weight } => {
                // 1 − P_2 = d(1-c²)/(d-1) turns the moment into a multiple
                // of the ℓ = 2 eigenvalue, available as a time integral.
                let d = self.d.as_f64();
                let lam2 = laplace_eigenvalue(self.d, 2);
                let tilde2 =
                    weight.integrate(0.0, |t| -(-lam2 * t).exp_m1())?;
                Ok((d - 1.0) / d * tilde2)
            }
            _ => {
                let e = self.endpoint_data().expect("closed variant");
                let me = self.d.measure_exponent();
                let alpha = 1.0 + e.p + me;
                let beta = 1.0 + e.m + me;
                if alpha <= -1.0 || beta <= -1.0 {
                    return Err(Error::DivergentIntegral(format!(
                        "Lévy moment diverges: combined exponents ({alpha}, {beta})"
                    )));
                }
                let (value, _) = adaptive_jacobi_integral(alpha, beta, 64, SPECTRUM_REL_TOL, |c| {
                    self.smooth_factor(c)
                })?;
                Ok(surface_area(self.d.get() - 1)? * value)
            }
        }
    }

    /// Funk-Hecke eigenvalues λ̃_ℓ = ∫ (1 − P_ℓ(e₁·σ')) b(e₁·σ') dσ' for
    /// ℓ = 0..L.
    ///
    /// Odd-degree eigenvalues are +∞ when b is too singular at c = -1 (all
    /// power-law kernels): the operator is then defined only on even
    /// functions, which carry no odd modes. Divergence at even degrees means
    /// the kernel itself is inadmissible and raises `DivergentIntegral`.
    pub fn btilde_spectrum(&self, l_max: usize) -> Result<KernelSpectrum> {
        if l_max < 2 {
            return Err(Error::InvalidInput("spectrum needs L >= 2".into()));
        }
        let values = match &self.variant {
            KernelVariant::Subordinated { weight } => {
                let mut values = Vec::with_capacity(l_max + 1);
                values.push(0.0);
                for l in 1..=l_max {
                    let lam = laplace_eigenvalue(self.d, l);
                    values.push(weight.integrate(0.0, |t| -(-lam * t).exp_m1())?);
                }
                values
            }
            _ => self.spectrum_closed(l_max)?,
        };
        KernelSpectrum::new(self.d, values)
    }

    /// Interior breakpoints where the smooth factor loses derivatives; the
    /// spectrum quadrature splits there. Only splines have any.
    pub(crate) fn smooth_factor_breaks(&self) -> &[f64] {
        match &self.variant {
            KernelVariant::Tabulated(t) => &t.nodes,
            _ => &[],
        }
    }

    /// Parity-split quadrature for closed-form kernels.
    fn spectrum_closed(&self, l_max: usize) -> Result<Vec<f64>> {
        let e = self.endpoint_data().expect("closed variant");
        let me = self.d.measure_exponent();
        let prefactor = surface_area(self.d.get() - 1)?;
        let family = PolyFamily::new(self.d, l_max);

        // Even degrees: (1−P_ℓ) = (1-c²) E_ℓ(c) absorbs one factor at each
        // endpoint. Divergence here is fatal.
        let alpha_even = 1.0 + e.p + me;
        let beta_even = 1.0 + e.m + me;
        if alpha_even <= -1.0 || beta_even <= -1.0 {
            return Err(Error::DivergentIntegral(format!(
                "even-degree spectrum diverges: exponents ({alpha_even}, {beta_even})"
            )));
        }
        let even = self.spectrum_parity(&family, l_max, alpha_even, beta_even, true)?;

        // Odd degrees: only (1-c) is deflated; 1 − P_ℓ(-1) = 2 at the other
        // endpoint, so too much singularity at c = -1 pushes λ̃ to +∞.
        let alpha_odd = 1.0 + e.p + me;
        let beta_odd = e.m + me;
        let odd = if alpha_odd <= -1.0 || beta_odd <= -1.0 {
            None
        } else {
            Some(self.spectrum_parity(&family, l_max, alpha_odd, beta_odd, false)?)
        };

        let mut values = Vec::with_capacity(l_max + 1);
        for l in 0..=l_max {
            if l % 2 == 0 {
                values.push(if l == 0 { 0.0 } else { prefactor * even[l] });
            } else {
                values.push(match &odd {
                    Some(v) => prefactor * v[l],
                    None => f64::INFINITY,
                });
            }
        }
        Ok(values)
    }

    /// Adaptive vector quadrature of the deflated integrands of one parity:
    /// all degrees share the recurrence sweep at each node.
    fn spectrum_parity(
        &self,
        family: &PolyFamily,
        l_max: usize,
        alpha: f64,
        beta: f64,
        even: bool,
    ) -> Result<Vec<f64>> {
        let breaks = self.smooth_factor_breaks();
        let eval_order = |order: usize| -> Result<Vec<f64>> {
            let (nodes, weights) = jacobi_nodes_split(order, alpha, beta, breaks)?;
            let mut acc = vec![0.0f64; l_max + 1];
            for (&c, &w) in nodes.iter().zip(&weights) {
                let phi = w * self.smooth_factor(c);
                let deflated = if even {
                    family.eval_deflated_even(l_max, c)?
                } else {
                    family.eval_deflated(l_max, c)?
                };
                let start = if even { 2 } else { 1 };
                for l in (start..=l_max).step_by(2) {
                    acc[l] += phi * deflated[l];
                }
            }
            Ok(acc)
        };
        let mut order = if breaks.is_empty() {
            256.max(l_max / 2 + 2)
        } else {
            // Per-segment rules: exactness beyond degree l_max + 3 from the
            // start, so the first doubling already certifies.
            l_max / 2 + 8
        };
        let mut prev = eval_order(order)?;
        loop {
            if order >= 8192 {
                return Err(Error::QuadratureNotConverged(format!(
                    "spectrum quadrature did not settle by order {order}"
                )));
            }
            order *= 2;
            let next = eval_order(order)?;
            let scale = next
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs()))
                .max(1e-300);
            let ok = prev
                .iter()
                .zip(next.iter())
                .all(|(&a, &b)| (a - b).abs() <= SPECTRUM_REL_TOL * b.abs().max(1e-6 * scale));
            if ok {
                return Ok(next);
            }
            prev = next;
        }
    }

    /// True when the kernel is continuously differentiable on all of
    /// [-1, 1]; the gradient-identity check requires it.
    pub fn is_smooth(&self) -> bool {
        match &self.variant {
            KernelVariant::Constant { .. } => true,
            KernelVariant::HardSphere => self.d.get() == 3,
            KernelVariant::Tabulated(t) => t.exp_plus == 0.0 && t.exp_minus == 0.0,
            _ => false,
        }
    }
}

/// Funk-Hecke eigenvalues λ̃_0..λ̃_L of the jump operator, with the
/// quadrature metadata needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpectrum {
    d: Dimension,
    values: Vec<f64>,
}

impl KernelSpectrum {
    pub fn new(d: Dimension, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidInput("spectrum needs L >= 2".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "λ̃_0 must vanish, got {}",
                values[0]
            )));
        }
        if values.iter().any(|v| *v < 0.0 || v.is_nan()) {
            return Err(Error::InvalidInput(
                "eigenvalues must be nonnegative".into(),
            ));
        }
        Ok(Self { d, values })
    }

    pub fn dimension(&self) -> Dimension {
        self.d
    }

    /// Highest degree stored.
    pub fn l_max(&self) -> usize {
        self.values.len() - 1
    }

    /// λ̃_ℓ; +∞ marks odd degrees of kernels singular at c = -1.
    pub fn value(&self, l: usize) -> f64 {
        self.values[l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Comparison constants: c0 ≤ [b(c)+b(-c)]/[b0(c)+b0(-c)] ≤ C0 on [-1, 1],
/// both finite and positive, so that Λ_b ≥ (c0/C0) Λ_{b0}.
pub fn compare_kernels(k: &KernelSpec, k0: &KernelSpec, grid: usize) -> Result<(f64, f64)> {
    if k.dimension() != k0.dimension() {
        return Err(Error::InvalidInput(
            "compared kernels must share a dimension".into(),
        ));
    }
    let grid = grid.max(17);

    // Endpoint ratio from the closed decompositions when both have one.
    // The symmetrized kernel is even, so c = 1 covers both endpoints.
    let endpoint = match (k.endpoint_data(), k0.endpoint_data()) {
        (Some(a), Some(b)) => {
            let (ea, ca) = symmetrized_leading(&a);
            let (eb, cb) = symmetrized_leading(&b);
            if ea < eb {
                return Err(Error::UnboundedRatio(
                    "numerator kernel is more singular at the endpoints; sup ratio diverges"
                        .into(),
                ));
            }
            if ea > eb {
                return Err(Error::UnboundedRatio(
                    "denominator kernel is more singular at the endpoints; inf ratio vanishes"
                        .into(),
                ));
            }
            Some(ca / cb)
        }
        _ => None,
    };

    let ratio_at = |c: f64| -> Result<f64> {
        let denom = k0.symmetrized(c)?;
        let numer = k.symmetrized(c)?;
        if denom <= 0.0 || !denom.is_finite() || !numer.is_finite() {
            return Err(Error::UnboundedRatio(format!(
                "symmetrized ratio degenerate at c = {c}: {numer} / {denom}"
            )));
        }
        Ok(numer / denom)
    };

    let extremes = |n: usize| -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 1..n - 1 {
            let c = (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            let r = ratio_at(c)?;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        match endpoint {
            Some(r) => {
                lo = lo.min(r);
                hi = hi.max(r);
            }
            None => {
                // No closed endpoint algebra (subordinated kernel): probe
                // just inside the boundary instead.
                let r = ratio_at(1.0 - 1e-9)?;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        Ok((lo, hi))
    };

    let mut n = grid;
    let (mut c0, mut big_c0) = extremes(n)?;
    loop {
        if n >= 65537 {
            return Err(Error::QuadratureNotConverged(
                "comparison extremes did not settle on refinement".into(),
            ));
        }
        n = 2 * (n - 1) + 1;
        let (lo, hi) = extremes(n)?;
        let settled = (lo - c0).abs() <= 1e-8 * c0.abs().max(1.0)
            && (hi - big_c0).abs() <= 1e-8 * big_c0.abs().max(1.0);
        c0 = lo;
        big_c0 = hi;
        if settled {
            break;
        }
    }
    if !(c0 > 0.0) || !big_c0.is_finite() {
        return Err(Error::UnboundedRatio(format!(
            "comparison produced degenerate bounds ({c0}, {big_c0})"
        )));
    }
    Ok((c0, big_c0))
}

/// Leading endpoint exponent and coefficient of b(c) + b(-c) at c = 1.
fn symmetrized_leading(e: &EndpointData) -> (f64, f64) {
    // b(c) ~ (1-c)^p 2^m φ(1); b(-c) ~ (1-c)^m 2^p φ(-1).
    let from_direct = (2.0f64).powf(e.m) * e.phi_plus;
    let from_mirror = (2.0f64).powf(e.p) * e.phi_minus;
    if (e.p - e.m).abs() < 1e-12 {
        (e.p, from_direct + from_mirror)
    } else if e.p < e.m {
        (e.p, from_direct)
    } else {
        (e.m, from_mirror)
    }
}

/// Subordinated kernel value b_ω(c) = ∫ u_t(c) ω(t) dt.
///
/// Contributions from t below θ²/160 (θ the geodesic angle to the nearest
/// pole) are under e^{-40} of the heat kernel's scale and are skipped; on
/// the circle the small-time values use the Gaussian image-sum form, which
/// stays exact where the spectral series would need thousands of modes.
pub fn subordinated_profile(weight: &WeightSpec, d: Dimension, c: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::DomainError(c));
    }
    let theta = c.clamp(-1.0, 1.0).acos();
    let near = theta.min(std::f64::consts::PI - theta);
    let t_floor = near * near / 160.0;
    // Off the circle there is no closed small-time form, only the spectral
    // series, whose reach is bounded by the truncation cap. Refuse weights
    // with mass at unresolvable times rather than summing a divergent
    // truncation.
    if d.get() >= 3 {
        let earliest = weight.support_min().max(t_floor);
        heat_truncation_level(d, earliest, HEAT_SERIES_CAP).map_err(|_| {
            Error::TruncationError(format!(
                "weight carries mass at t ≈ {earliest:.3e}, below the spectral \
                 heat series' reach at this angle for d = {}; use a weight \
                 supported at larger times or dimension 2",
                d.get()
            ))
        })?;
    }
    weight.integrate(t_floor, |t| heat_value(d, t, c))
}

/// u_t(c) by the best representation for (d, t).
fn heat_value(d: Dimension, t: f64, c: f64) -> f64 {
    if d.get() == 2 && t < 0.3 {
        return circle_heat_theta(t, c.acos());
    }
    let l = match heat_truncation_level(d, t, HEAT_SERIES_CAP) {
        Ok(l) => l,
        // Tiny times only arise under an integrand floor that makes the
        // contribution negligible; saturate the cap rather than abort.
        Err(_) => HEAT_SERIES_CAP,
    };
    heat_kernel_profile(d, t, c, l).unwrap_or(0.0)
}

/// Circle heat kernel as a wrapped Gaussian: (4πt)^{-1/2} Σ_n e^{-(θ+2πn)²/4t}.
/// Five images bound the error by e^{-(3π)²/(4t)}, far below the working
/// precision for t < 0.3.
fn circle_heat_theta(t: f64, theta: f64) -> f64 {
    let norm = 1.0 / (4.0 * std::f64::consts::PI * t).sqrt();
    let mut sum = 0.0;
    for n in -2i32..=2 {
        let shift = theta + 2.0 * std::f64::consts::PI * f64::from(n);
        sum += (-shift * shift / (4.0 * t)).exp();
    }
    norm * sum
}

/// (γ, s) of the inverse-power-law model with exponent q:
/// 2s = (d-1)/(q-1) and γ = 1 − 4s. Requires q > d−1 and q ≥ (d+1)/2, which
/// is exactly the admissibility range of the resulting kernel.
pub fn power_law_params(q: f64, d: Dimension) -> Result<(f64, f64)> {
    let df = d.as_f64();
    if !(q > df - 1.0) || !(q >= (df + 1.0) / 2.0) {
        return Err(Error::OutOfRange(format!(
            "inverse-power exponent q = {q} outside (max(d-1, (d+1)/2 -), ∞) at d = {}",
            d.get()
        )));
    }
    let s = (df - 1.0) / (2.0 * (q - 1.0));
    Ok((1.0 - 4.0 * s, s))
}

// --- JSON wire format --------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelWire {
    d: u32,
    variant: String,
    params: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerLawParams {
    s: f64,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    value: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubordinatedParams {
    weight: WeightWire,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedParams {
    nodes: Vec<f64>,
    values: Vec<f64>,
    exp_plus: f64,
    exp_minus: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightWire {
    variant: String,
    params: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalWeightParams {
    height: f64,
    t_min: f64,
    t_max: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExponentialWeightParams {
    rate: f64,
    scale: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedWeightParams {
    times: Vec<f64>,
    values: Vec<f64>,
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("plain numeric structs always serialize")
}

impl WeightSpec {
    pub fn to_json(&self) -> serde_json::Value {
        let (variant, params) = match self {
            WeightSpec::ConstantOnInterval { height, t_min, t_max } => (
                "constant_on_interval",
                to_value(&IntervalWeightParams {
                    height: *height,
                    t_min: *t_min,
                    t_max: *t_max,
                }),
            ),
            WeightSpec::Exponential { rate, scale } => (
                "exponential",
                to_value(&ExponentialWeightParams { rate: *rate, scale: *scale }),
            ),
            WeightSpec::Tabulated { times, values } => (
                "tabulated",
                to_value(&TabulatedWeightParams {
                    times: times.clone(),
                    values: values.clone(),
                }),
            ),
        };
        to_value(&WeightWire { variant: variant.into(), params })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let wire: WeightWire = serde_json::from_value(v.clone())
            .map_err(|e| Error::InvalidInput(format!("weight: {e}")))?;
        let parse = |e: serde_json::Error| Error::InvalidInput(format!("weight params: {e}"));
        let spec = match wire.variant.as_str() {
            "constant_on_interval" => {
                let p: IntervalWeightParams =
                    serde_json::from_value(wire.params).map_err(parse)?;
                WeightSpec::ConstantOnInterval {
                    height: p.height,
                    t_min: p.t_min,
                    t_max: p.t_max,
                }
            }
            "exponential" => {
                let p: ExponentialWeightParams =
                    serde_json::from_value(wire.params).map_err(parse)?;
                WeightSpec::Exponential { rate: p.rate, scale: p.scale }
            }
            "tabulated" => {
                let p: TabulatedWeightParams =
                    serde_json::from_value(wire.params).map_err(parse)?;
                WeightSpec::Tabulated { times: p.times, values: p.values }
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown weight variant '{other}'"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl KernelSpec {
    /// Canonical JSON form {"d": .., "variant": .., "params": {..}}; the
    /// config format consumed by the command-line front end, and the input
    /// of the spectrum cache fingerprint.
    pub fn to_json(&self) -> serde_json::Value {
        let (variant, params) = match &self.variant {
            KernelVariant::HardSphere => ("hard_sphere", serde_json::json!({})),
            KernelVariant::PowerLaw { s, gamma } => (
                "power_law",
                to_value(&PowerLawParams { s: *s, gamma: *gamma }),
            ),
            KernelVariant::Constant { value } => {
                ("constant", to_value(&ConstantParams { value: *value }))
            }
            KernelVariant::Subordinated { weight } => (
                "subordinated",
                serde_json::json!({ "weight": weight.to_json() }),
            ),
            KernelVariant::Tabulated(t) => (
                "tabulated",
                to_value(&TabulatedParams {
                    nodes: t.nodes.clone(),
                    values: t.values.clone(),
                    exp_plus: t.exp_plus,
                    exp_minus: t.exp_minus,
                }),
            ),
        };
        to_value(&KernelWire { d: self.d.get(), variant: variant.into(), params })
    }

    /// Compact canonical serialization: stable across runs, used as the
    /// cache fingerprint input.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("kernel JSON always serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let wire: KernelWire = serde_json::from_value(v.clone())
            .map_err(|e| Error::InvalidInput(format!("kernel: {e}")))?;
        let d = Dimension::new(wire.d)?;
        let parse = |e: serde_json::Error| Error::InvalidInput(format!("kernel params: {e}"));
        let variant = match wire.variant.as_str() {
            "hard_sphere" => {
                if wire.params != serde_json::json!({}) {
                    return Err(Error::InvalidInput(
                        "hard_sphere takes no parameters".into(),
                    ));
                }
                KernelVariant::HardSphere
            }
            "power_law" => {
                let p: PowerLawParams = serde_json::from_value(wire.params).map_err(parse)?;
                KernelVariant::PowerLaw { s: p.s, gamma: p.gamma }
            }
            "constant" => {
                let p: ConstantParams = serde_json::from_value(wire.params).map_err(parse)?;
                KernelVariant::Constant { value: p.value }
            }
            "subordinated" => {
                let p: SubordinatedParams =
                    serde_json::from_value(wire.params).map_err(parse)?;
                KernelVariant::Subordinated {
                    weight: WeightSpec::from_json(&to_value(&p.weight))?,
                }
            }
            "tabulated" => {
                let p: TabulatedParams = serde_json::from_value(wire.params).map_err(parse)?;
                KernelVariant::Tabulated(TabulatedKernel::new(
                    p.nodes, p.values, p.exp_plus, p.exp_minus,
                )?)
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown kernel variant '{other}'"
                )))
            }
        };
        KernelSpec::new(d, variant)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("kernel: {e}")))?;
        Self::from_json(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dim(d: u32) -> Dimension {
        Dimension::new(d).unwrap()
    }

    fn hard_sphere(d: u32) -> KernelSpec {
        KernelSpec::new(dim(d), KernelVariant::HardSphere).unwrap()
    }

    fn power_law(d: u32, s: f64) -> KernelSpec {
        KernelSpec::new(dim(d), KernelVariant::PowerLaw { s, gamma: 1.0 - 4.0 * s }).unwrap()
    }

    fn constant(d: u32, value: f64) -> KernelSpec {
        KernelSpec::new(dim(d), KernelVariant::Constant { value }).unwrap()
    }

    #[test]
    fn eval_examples() {
        // Hard spheres are constant in dimension 3.
        for &c in &[-0.99f64, 0.0, 0.37, 0.999] {
            assert!((hard_sphere(3).eval(c).unwrap() - 1.0).abs() < 1e-15);
        }
        // d=2: (1/2)(1-c)^{1/2} at c = -1 is √2/2.
        let hs2 = hard_sphere(2);
        assert!((hs2.eval(-1.0).unwrap() - 0.5 * 2.0f64.sqrt()).abs() < 1e-15);
        assert!(hs2.eval(1.0).unwrap().abs() < 1e-15);
        // Power law at c = 0 is 1, and diverges at the endpoints.
        let pl = power_law(3, 0.5);
        assert!((pl.eval(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(pl.eval(1.0).unwrap().is_infinite());
        assert!(pl.eval(-1.0).unwrap().is_infinite());
    }

    #[test]
    fn power_law_params_table() {
        let (gamma, s) = power_law_params(5.0, dim(3)).unwrap();
        assert!((s - 0.25).abs() < 1e-15 && gamma.abs() < 1e-15);
        let (gamma, s) = power_law_params(7.0 / 3.0, dim(3)).unwrap();
        assert!((s - 0.75).abs() < 1e-14 && (gamma + 2.0).abs() < 1e-13);
        // q → 2⁺ at d = 3 pushes s → 1, γ → -3.
        let (gamma, s) = power_law_params(2.0 + 1e-9, dim(3)).unwrap();
        assert!((s - 1.0).abs() < 1e-8 && (gamma + 3.0).abs() < 1e-7);
        assert!(matches!(
            power_law_params(2.0, dim(3)),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn levy_moments_closed_forms() {
        assert!((constant(3, 1.0).levy_moment().unwrap() - 8.0 * PI / 3.0).abs() < 1e-10);
        assert!((hard_sphere(3).levy_moment().unwrap() - 8.0 * PI / 3.0).abs() < 1e-10);
        // Power law d=3, s=1/2: 2π ∫ (1-c²)^{-1/2} dc = 2π².
        let val = power_law(3, 0.5).levy_moment().unwrap();
        assert!((val - 2.0 * PI * PI).abs() < 1e-9, "{val}");
        // Hard sphere d=2: ∫ (1-c)(1+c)^{1/2} dc = 16√2/15.
        let val = hard_sphere(2).levy_moment().unwrap();
        assert!((val - 16.0 * 2.0f64.sqrt() / 15.0).abs() < 1e-12, "{val}");
    }

    #[test]
    fn levy_moment_diverges_at_s_one() {
        let k = KernelSpec::new(
            dim(3),
            KernelVariant::PowerLaw { s: 1.0, gamma: -3.0 },
        )
        .unwrap();
        assert!(matches!(k.levy_moment(), Err(Error::DivergentIntegral(_))));
        assert!(matches!(
            k.btilde_spectrum(8),
            Err(Error::DivergentIntegral(_))
        ));
        // Just below 1 the moment is finite (and large).
        assert!(power_law(3, 0.98).levy_moment().unwrap().is_finite());
    }

    #[test]
    fn symmetrized_examples() {
        let c_half = constant(3, 0.5);
        assert!((c_half.symmetrized(0.3).unwrap() - 1.0).abs() < 1e-15);
        let hs2 = hard_sphere(2);
        assert!((hs2.symmetrized(0.0).unwrap() - 1.0).abs() < 1e-15);
        // Endpoints: (1/2)√2 = 1/√2 at both ends of the range [1/√2, 1].
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((hs2.symmetrized(1.0).unwrap() - inv_sqrt2).abs() < 1e-15);
        assert!((hs2.symmetrized(-1.0).unwrap() - inv_sqrt2).abs() < 1e-15);
    }

    #[test]
    fn constant_spectrum_is_flat() {
        let spec = constant(3, 1.0).btilde_spectrum(20).unwrap();
        assert_eq!(spec.value(0), 0.0);
        for l in 1..=20 {
            assert!(
                (spec.value(l) - 4.0 * PI).abs() < 1e-10,
                "l={l}: {}",
                spec.value(l)
            );
        }
    }

    #[test]
    fn power_law_even_spectrum_matches_gamma_closed_form() {
        // At d=3, 1-P_2 = (3/2)(1-c²), so λ̃_2 = 3π^{3/2} Γ(1-s)/Γ(3/2-s).
        use statrs::function::gamma::gamma;
        for &s in &[0.3f64, 0.5, 0.7] {
            let spec = power_law(3, s).btilde_spectrum(6).unwrap();
            let expected = 3.0 * PI.powf(1.5) * gamma(1.0 - s) / gamma(1.5 - s);
            assert!(
                (spec.value(2) - expected).abs() < 1e-8 * expected,
                "s={s}: {} vs {expected}",
                spec.value(2)
            );
            // Odd modes diverge: the kernel is singular at c = -1.
            assert!(spec.value(1).is_infinite());
            assert!(spec.value(3).is_infinite());
            assert!(spec.value(4).is_finite());
        }
    }

    #[test]
    fn hard_sphere_circle_spectrum_closed_form() {
        // d=2: λ̃_k = ∫ (1 - cos kθ) dθ weighted by (1/2)√(1-c): the
        // classical evaluation gives 8√2 k²/(4k²-1).
        let spec = hard_sphere(2).btilde_spectrum(12).unwrap();
        for k in 1..=12usize {
            let kf = k as f64;
            let expected = 8.0 * 2.0f64.sqrt() * kf * kf / (4.0 * kf * kf - 1.0);
            assert!(
                (spec.value(k) - expected).abs() < 1e-10 * expected,
                "k={k}: {} vs {expected}",
                spec.value(k)
            );
        }
    }

    #[test]
    fn compare_kernels_examples() {
        let hs2 = hard_sphere(2);
        let half = constant(2, 0.5);
        // Identical kernels give (1, 1).
        let (c0, c1) = compare_kernels(&hs2, &hs2, 257).unwrap();
        assert!((c0 - 1.0).abs() < 1e-12 && (c1 - 1.0).abs() < 1e-12);
        // Hard sphere vs constant(1/2): extremes of (1/2)(√(1-c)+√(1+c)).
        let (c0, c1) = compare_kernels(&hs2, &half, 257).unwrap();
        assert!((c0 - 1.0 / 2.0f64.sqrt()).abs() < 1e-9, "{c0}");
        assert!((c1 - 1.0).abs() < 1e-9, "{c1}");
        // Constant vs constant: the ratio is constant.
        let (c0, c1) = compare_kernels(&constant(3, 3.0), &constant(3, 2.0), 65).unwrap();
        assert!((c0 - 1.5).abs() < 1e-12 && (c1 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn compare_kernels_reciprocal_bounds() {
        let pairs = [
            (hard_sphere(2), constant(2, 0.5)),
            (power_law(3, 0.4), power_law(3, 0.4)),
            (hard_sphere(3), constant(3, 2.0)),
        ];
        for (a, b) in pairs {
            let (c0, _) = compare_kernels(&a, &b, 257).unwrap();
            let (_, c1_rev) = compare_kernels(&b, &a, 257).unwrap();
            assert!(
                c0 * c1_rev >= 1.0 - 1e-10,
                "reciprocal failed: {c0} * {c1_rev}"
            );
        }
    }

    #[test]
    fn compare_kernels_unbounded_ratio_detected() {
        // Power law against constant: the power law diverges at c = ±1.
        assert!(matches!(
            compare_kernels(&power_law(3, 0.5), &constant(3, 1.0), 257),
            Err(Error::UnboundedRatio(_))
        ));
        assert!(matches!(
            compare_kernels(&constant(3, 1.0), &power_law(3, 0.5), 257),
            Err(Error::UnboundedRatio(_))
        ));
    }

    #[test]
    fn subordinated_spectrum_closed_form() {
        // Exponential weight: λ̃_ℓ = scale · λ_ℓ / (rate (rate + λ_ℓ)).
        let w = WeightSpec::Exponential { rate: 1.5, scale: 2.0 };
        let k = KernelSpec::new(dim(3), KernelVariant::Subordinated { weight: w }).unwrap();
        let spec = k.btilde_spectrum(8).unwrap();
        for l in 1..=8usize {
            let lam = laplace_eigenvalue(dim(3), l);
            let expected = 2.0 * lam / (1.5 * (1.5 + lam));
            assert!(
                (spec.value(l) - expected).abs() < 1e-10 * expected,
                "l={l}: {} vs {expected}",
                spec.value(l)
            );
        }
    }

    #[test]
    fn subordinated_profile_flat_for_late_weight() {
        // Weight far from t = 0: u_t is uniform, so b_ω ≈ mass/|S^{d-1}|.
        // The slowest mode decays like e^{-2t}; beyond t = 16 its share is
        // under 1e-13, far inside the 1e-10 tolerance.
        let w = WeightSpec::ConstantOnInterval { height: 2.0, t_min: 16.0, t_max: 18.0 };
        let mass = w.total_mass();
        let uniform = mass / surface_area(3).unwrap();
        for &c in &[-0.9f64, 0.0, 0.95] {
            let v = subordinated_profile(&w, dim(3), c).unwrap();
            assert!((v - uniform).abs() < 1e-10 * uniform, "c={c}: {v} vs {uniform}");
        }
        // Zero weight: zero kernel.
        let z = WeightSpec::ConstantOnInterval { height: 0.0, t_min: 0.5, t_max: 1.0 };
        assert_eq!(subordinated_profile(&z, dim(3), 0.3).unwrap(), 0.0);
    }

    #[test]
    fn subordinated_profile_consistent_with_spectrum() {
        // Direct quadrature of (1 - P_ℓ) against the profile reproduces the
        // time-integral eigenvalues.
        let w = WeightSpec::ConstantOnInterval { height: 1.0, t_min: 0.2, t_max: 1.5 };
        let d = dim(3);
        let k = KernelSpec::new(d, KernelVariant::Subordinated { weight: w.clone() }).unwrap();
        let spec = k.btilde_spectrum(4).unwrap();
        let family = PolyFamily::new(d, 4);
        let rule = QuadratureRule::gauss_jacobi(128, 0.0, 0.0).unwrap();
        for l in [2usize, 4] {
            let direct = surface_area(2).unwrap()
                * rule.integrate(|c| {
                    let p = family.eval_all(4, c).unwrap();
                    (1.0 - p[l]) * subordinated_profile(&w, d, c).unwrap()
                });
            assert!(
                (direct - spec.value(l)).abs() < 1e-6 * spec.value(l),
                "l={l}: {direct} vs {}",
                spec.value(l)
            );
        }
    }

    #[test]
    fn circle_theta_matches_series() {
        // Overlap window where both representations are accurate.
        for &t in &[0.12f64, 0.2, 0.29] {
            for &c in &[-0.9f64, 0.1, 0.98] {
                let series = heat_kernel_profile(dim(2), t, c, 600).unwrap();
                let theta = circle_heat_theta(t, c.acos());
                assert!(
                    (series - theta).abs() < 1e-12 * series.abs().max(1.0),
                    "t={t} c={c}: {series} vs {theta}"
                );
            }
        }
    }

    #[test]
    fn tabulated_kernel_reproduces_smooth_blend() {
        // Sample 1 + 0.5 P_2 (a quadratic); not-a-knot splines restore
        // polynomials up to cubic exactly.
        let family = PolyFamily::new(dim(3), 2);
        let nodes: Vec<f64> = (0..200).map(|i| -0.995 + 0.01 * i as f64).collect();
        let values: Vec<f64> = nodes
            .iter()
            .map(|&c| 1.0 + 0.5 * family.eval(2, c).unwrap())
            .collect();
        let k = KernelSpec::new(
            dim(3),
            KernelVariant::Tabulated(TabulatedKernel::new(nodes, values, 0.0, 0.0).unwrap()),
        )
        .unwrap();
        for &c in &[-0.97f64, -0.4, 0.0, 0.55, 0.99] {
            let expected = 1.0 + 0.5 * family.eval(2, c).unwrap();
            assert!(
                (k.eval(c).unwrap() - expected).abs() < 1e-12,
                "c={c}: {} vs {expected}",
                k.eval(c).unwrap()
            );
        }
        assert!(k.is_smooth());
        // λ̃_2 = ∫ (1-P_2) (1+0.5 P_2): the P_2² term contributes
        // -0.5·|S²|/5, the rest 4π.
        let spec = k.btilde_spectrum(4).unwrap();
        let expected = 4.0 * PI - 0.5 * 4.0 * PI / 5.0;
        assert!(
            (spec.value(2) - expected).abs() < 1e-6 * expected,
            "{} vs {expected}",
            spec.value(2)
        );
    }

    #[test]
    fn json_round_trip() {
        let kernels = [
            hard_sphere(2),
            power_law(3, 0.5),
            constant(4, 2.5),
            KernelSpec::new(
                dim(2),
                KernelVariant::Subordinated {
                    weight: WeightSpec::Exponential { rate: 1.0, scale: 1.0 },
                },
            )
            .unwrap(),
        ];
        for k in kernels {
            let text = k.canonical_json();
            let back = KernelSpec::from_json_str(&text).unwrap();
            assert_eq!(back.canonical_json(), text);
        }
        // Unknown fields and variants are rejected.
        assert!(KernelSpec::from_json_str(
            r#"{"d":3,"variant":"hard_sphere","params":{},"extra":1}"#
        )
        .is_err());
        assert!(KernelSpec::from_json_str(r#"{"d":3,"variant":"soft_sphere","params":{}}"#)
            .is_err());
        assert!(KernelSpec::from_json_str(
            r#"{"d":3,"variant":"power_law","params":{"s":0.5,"gamma":0.0,"x":1}}"#
        )
        .is_err());
    }

    #[test]
    fn weight_validation() {
        assert!(WeightSpec::ConstantOnInterval { height: 1.0, t_min: 0.0, t_max: 1.0 }
            .validate()
            .is_err());
        assert!(WeightSpec::Exponential { rate: 0.0, scale: 1.0 }.validate().is_err());
        assert!(WeightSpec::Tabulated { times: vec![0.5, 0.4], values: vec![1.0, 1.0] }
            .validate()
            .is_err());
        assert!(WeightSpec::Tabulated {
            times: vec![0.1, 0.4, 1.0],
            values: vec![1.0, 2.0, 0.5]
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn weight_integrals() {
        // Exponential: ∫ scale e^{-rate t}(1-e^{-λt}) dt = scale λ/(rate(rate+λ)).
        let w = WeightSpec::Exponential { rate: 2.0, scale: 3.0 };
        let lam = 7.0;
        let got = w.integrate(0.0, |t| -(-lam * t).exp_m1()).unwrap();
        let expected = 3.0 * lam / (2.0 * (2.0 + lam));
        assert!((got - expected).abs() < 1e-10 * expected, "{got} vs {expected}");
        // Interval weight against a polynomial.
        let w = WeightSpec::ConstantOnInterval { height: 2.0, t_min: 0.5, t_max: 2.0 };
        let got = w.integrate(0.0, |t| t * t).unwrap();
        let expected = 2.0 * (2.0f64.powi(3) - 0.5f64.powi(3)) / 3.0;
        assert!((got - expected).abs() < 1e-12 * expected);
        // Tabulated triangle: ω linear 0→1 on [1,2], 1→0 on [2,3]; ∫ω = 1.
        let w = WeightSpec::Tabulated {
            times: vec![1.0, 2.0, 3.0],
            values: vec![0.0, 1.0, 0.0],
        };
        let got = w.integrate(0.0, |_| 1.0).unwrap();
        assert!((got - 1.0).abs() < 1e-12);
        assert!((w.total_mass() - 1.0).abs() < 1e-12);
    }
}
