//! Legendre/Gegenbauer polynomials P_ℓ^{(d)} normalized to P_ℓ(1) = 1,
//! Laplace-Beltrami eigendata, eigenspace dimensions, and the zonal heat
//! kernel on S^{d-1}.
//!
//! The three-term recurrence
//!
//! ```text
//! P_{ℓ+1}(c) = [(2ℓ+d-2) c P_ℓ(c) − ℓ P_{ℓ-1}(c)] / (ℓ+d-2),   P_0 = 1, P_1 = c,
//! ```
//!
//! specializes to Chebyshev polynomials cos(ℓθ) at d = 2 and to classical
//! Legendre polynomials at d = 3. Besides direct evaluation the module
//! exposes the deflated quantities (1-P_ℓ)/(1-c) and (1-P_ℓ)/(1-c²), which
//! have their own recurrences: the difference 1-P_ℓ(c) vanishes like 1-c at
//! the right endpoint, and computing it by subtraction there loses every
//! significant digit exactly where singular kernel weights concentrate.

use crate::error::{Error, Result};
use crate::sphere::{surface_area, Dimension};

/// Slack accepted on |c| ≤ 1 before declaring a domain error; inputs this
/// close to the boundary are clamped.
const DOMAIN_SLACK: f64 = 1e-12;

/// Relative tail bound for the heat-kernel truncation: the first omitted
/// term must be below this times the series head.
pub const HEAT_TAIL_REL: f64 = 1e-16;

/// Minimum truncation level for the heat kernel, whatever the time.
pub const HEAT_MIN_L: usize = 8;

/// Recurrence coefficients for P_ℓ^{(d)}, cached up to a maximum degree.
#[derive(Debug, Clone)]
pub struct PolyFamily {
    d: Dimension,
    /// a[ℓ] = (2ℓ+d-2)/(ℓ+d-2), so P_{ℓ+1} = a[ℓ] c P_ℓ − b[ℓ] P_{ℓ-1}.
    a: Vec<f64>,
    /// b[ℓ] = ℓ/(ℓ+d-2); note a[ℓ] − b[ℓ] = 1, which is what makes
    /// P_ℓ(1) = 1 exact in floating point.
    b: Vec<f64>,
}

impl PolyFamily {
    pub fn new(d: Dimension, l_max: usize) -> Self {
        let df = d.as_f64();
        let mut a = Vec::with_capacity(l_max + 1);
        let mut b = Vec::with_capacity(l_max + 1);
        for l in 0..=l_max {
            let lf = l as f64;
            a.push((2.0 * lf + df - 2.0) / (lf + df - 2.0));
            b.push(lf / (lf + df - 2.0));
        }
        Self { d, a, b }
    }

    pub fn dimension(&self) -> Dimension {
        self.d
    }

    /// Highest degree the cached coefficients support.
    pub fn l_max(&self) -> usize {
        self.a.len() - 1
    }

    fn check_domain(c: f64) -> Result<f64> {
        if c.abs() > 1.0 + DOMAIN_SLACK || !c.is_finite() {
            return Err(Error::DomainError(c));
        }
        Ok(c.clamp(-1.0, 1.0))
    }

    fn ensure_degree(&self, l: usize) -> Result<()> {
        if l > self.l_max() {
            return Err(Error::InvalidInput(format!(
                "degree {l} exceeds cached maximum {}",
                self.l_max()
            )));
        }
        Ok(())
    }

    /// P_ℓ^{(d)}(c); exact at the endpoints, where it returns (±1)^ℓ.
    pub fn eval(&self, l: usize, c: f64) -> Result<f64> {
        self.ensure_degree(l)?;
        let c = Self::check_domain(c)?;
        if c == 1.0 {
            return Ok(1.0);
        }
        if c == -1.0 {
            return Ok(if l % 2 == 0 { 1.0 } else { -1.0 });
        }
        let mut prev = 1.0f64;
        if l == 0 {
            return Ok(prev);
        }
        let mut curr = c;
        for k in 1..l {
            let next = self.a[k] * c * curr - self.b[k] * prev;
            prev = curr;
            curr = next;
        }
        Ok(curr)
    }

    /// All of P_0(c)..P_{l}(c) in one sweep.
    pub fn eval_all(&self, l: usize, c: f64) -> Result<Vec<f64>> {
        self.ensure_degree(l)?;
        let c = Self::check_domain(c)?;
        let mut out = Vec::with_capacity(l + 1);
        out.push(1.0);
        if l == 0 {
            return Ok(out);
        }
        out.push(c);
        for k in 1..l {
            let next = self.a[k] * c * out[k] - self.b[k] * out[k - 1];
            out.push(next);
        }
        Ok(out)
    }

    /// All of P'_0(c)..P'_{l}(c), by differentiating the recurrence:
    /// P'_{ℓ+1} = a_ℓ (P_ℓ + c P'_ℓ) − b_ℓ P'_{ℓ-1}.
    pub fn eval_all_with_derivative(&self, l: usize, c: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.ensure_degree(l)?;
        let c = Self::check_domain(c)?;
        let mut p = Vec::with_capacity(l + 1);
        let mut dp = Vec::with_capacity(l + 1);
        p.push(1.0);
        dp.push(0.0);
        if l == 0 {
            return Ok((p, dp));
        }
        p.push(c);
        dp.push(1.0);
        for k in 1..l {
            p.push(self.a[k] * c * p[k] - self.b[k] * p[k - 1]);
            dp.push(self.a[k] * (p[k] + c * dp[k]) - self.b[k] * dp[k - 1]);
        }
        Ok((p, dp))
    }

    /// Deflated values D_ℓ(c) = (1 − P_ℓ(c))/(1 − c) for ℓ = 0..l, by the
    /// recurrence D_{ℓ+1} = a_ℓ (1 + c D_ℓ) − b_ℓ D_{ℓ-1}, D_0 = 0, D_1 = 1.
    /// Stable throughout [-1, 1]; D_ℓ(1) = P'_ℓ(1) = λ_ℓ/2... × 2/(d-1) is
    /// finite, so no cancellation occurs at c = 1.
    pub fn eval_deflated(&self, l: usize, c: f64) -> Result<Vec<f64>> {
        self.ensure_degree(l)?;
        let c = Self::check_domain(c)?;
        let mut out = Vec::with_capacity(l + 1);
        out.push(0.0);
        if l == 0 {
            return Ok(out);
        }
        out.push(1.0);
        for k in 1..l {
            let next = self.a[k] * (1.0 + c * out[k]) - self.b[k] * out[k - 1];
            out.push(next);
        }
        Ok(out)
    }

    /// Doubly deflated values E_ℓ(c) = (1 − P_ℓ(c))/(1 − c²) for even ℓ only
    /// (odd entries are filled with NaN). Uses evenness: for c < 0,
    /// E_ℓ(c) = D_ℓ(−c)/(1 − c), dodging the cancellation at both endpoints.
    pub fn eval_deflated_even(&self, l: usize, c: f64) -> Result<Vec<f64>> {
        let c = Self::check_domain(c)?;
        let d_vals = self.eval_deflated(l, c.abs())?;
        let mut out = vec![f64::NAN; l + 1];
        for (k, slot) in out.iter_mut().enumerate().step_by(2) {
            // (1−P_ℓ)(c) = D_ℓ(|c|)(1−|c|) for even ℓ; divide by (1−c²).
            *slot = d_vals[k] / (1.0 + c.abs());
        }
        Ok(out)
    }
}

/// Laplace-Beltrami eigenvalue λ_ℓ = ℓ(ℓ+d-2) on S^{d-1}.
pub fn laplace_eigenvalue(d: Dimension, l: usize) -> f64 {
    let lf = l as f64;
    lf * (lf + d.as_f64() - 2.0)
}

/// Dimension N(d, ℓ) of the space of degree-ℓ spherical harmonics:
/// N(d, 0) = 1 and N(d, ℓ) = C(ℓ+d-2, ℓ) + C(ℓ+d-3, ℓ-1) for ℓ ≥ 1.
pub fn eigenspace_dim(d: Dimension, l: usize) -> u128 {
    if l == 0 {
        return 1;
    }
    let dd = d.get() as usize;
    binomial(l + dd - 2, dd - 2) + binomial(l + dd - 3, dd - 2)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut result: u128 = 1;
    for i in 1..=k {
        result = result * (n - k + i) as u128 / i as u128;
    }
    result
}

/// Eigendata for one degree: eigenvalue and eigenspace dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenData {
    pub l: usize,
    pub lambda: f64,
    pub dim: u128,
}

impl EigenData {
    pub fn new(d: Dimension, l: usize) -> Self {
        Self { l, lambda: laplace_eigenvalue(d, l), dim: eigenspace_dim(d, l) }
    }
}

/// Smallest truncation level L ≥ [`HEAT_MIN_L`] whose first omitted term
/// N(d, L+1) e^{−λ_{L+1} t} falls below [`HEAT_TAIL_REL`] times the series
/// head, capped at `l_cap`.
pub fn heat_truncation_level(d: Dimension, t: f64, l_cap: usize) -> Result<usize> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("heat kernel needs t > 0, got {t}")));
    }
    let mut head = 0.0f64;
    let mut l = 0usize;
    loop {
        head += eigenspace_dim(d, l) as f64 * (-laplace_eigenvalue(d, l) * t).exp();
        let next_term =
            eigenspace_dim(d, l + 1) as f64 * (-laplace_eigenvalue(d, l + 1) * t).exp();
        if l + 1 >= HEAT_MIN_L && next_term < HEAT_TAIL_REL * head {
            return Ok((l + 1).max(HEAT_MIN_L));
        }
        if l >= l_cap {
            return Err(Error::TruncationError(format!(
                "heat-kernel tail bound not met by L = {l_cap} at t = {t}"
            )));
        }
        l += 1;
    }
}

/// Zonal heat kernel u_t(c) = |S^{d-1}|^{-1} ∑_{ℓ≤L} N(d,ℓ) e^{−λ_ℓ t} P_ℓ(c),
/// truncated at L. Fails with `TruncationError` when L does not meet the
/// tail bound. Convolving u_t against a zonal profile multiplies its
/// coefficients by e^{−λ_ℓ t}.
pub fn heat_kernel_profile(d: Dimension, t: f64, c: f64, l: usize) -> Result<f64> {
    let needed = heat_truncation_level(d, t, l)?;
    if needed > l {
        return Err(Error::TruncationError(format!(
            "heat kernel at t = {t} needs L >= {needed}, got {l}"
        )));
    }
    let family = PolyFamily::new(d, l);
    let polys = family.eval_all(l, c)?;
    let mut sum = 0.0f64;
    for (k, &p) in polys.iter().enumerate() {
        sum += eigenspace_dim(d, k) as f64 * (-laplace_eigenvalue(d, k) * t).exp() * p;
    }
    Ok(sum / surface_area(d.get())?)
}

/// Coefficient view of u_t: the multiplier applied to the degree-ℓ
/// coefficient of a zonal profile under convolution with the heat kernel.
pub fn heat_multiplier(d: Dimension, t: f64, l: usize) -> f64 {
    (-laplace_eigenvalue(d, l) * t).exp()
}

/// Outcome of scanning the deflated Legendre inequality
/// (1 − P_{2ℓ})/λ_{2ℓ} ≤ (1 − P_2)/λ_2 on a uniform grid.
#[derive(Debug, Clone)]
pub struct LegendreInequalityReport {
    pub d: u32,
    pub l_max: usize,
    pub grid_size: usize,
    /// Largest value of (1−P_{2ℓ})/λ_{2ℓ} − (1−P_2)/λ_2 encountered;
    /// nonpositive up to rounding when the inequality holds.
    pub max_violation: f64,
    /// (ℓ, c) attaining the maximum.
    pub argmax: (usize, f64),
}

/// Evaluates the violation of the even-degree Legendre inequality on a
/// uniform c-grid for ℓ = 1..l_max, where degree 2ℓ is compared with degree
/// 2. Both sides are computed through the deflated recurrence, so the
/// difference is resolved to machine precision even at c = ±1.
pub fn legendre_inequality_check(
    d: Dimension,
    l_max: usize,
    grid_size: usize,
) -> Result<LegendreInequalityReport> {
    if l_max < 1 || grid_size < 3 {
        return Err(Error::InvalidInput(
            "legendre check needs l_max >= 1 and grid_size >= 3".into(),
        ));
    }
    let family = PolyFamily::new(d, 2 * l_max);
    let lambda_2 = laplace_eigenvalue(d, 2);
    let mut max_violation = f64::NEG_INFINITY;
    let mut argmax = (1usize, -1.0f64);
    for i in 0..grid_size {
        let c = -1.0 + 2.0 * i as f64 / (grid_size - 1) as f64;
        let e_vals = family.eval_deflated_even(2 * l_max, c)?;
        // Common factor (1−c²) ≥ 0 preserves the inequality's sign, so the
        // violation is measured on the deflated values scaled back.
        let one_minus_c2 = 1.0 - c * c;
        let head = e_vals[2] / lambda_2;
        for l in 1..=l_max {
            let violation = one_minus_c2 * (e_vals[2 * l] / laplace_eigenvalue(d, 2 * l) - head);
            if violation > max_violation {
                max_violation = violation;
                argmax = (l, c);
            }
        }
    }
    Ok(LegendreInequalityReport {
        d: d.get(),
        l_max,
        grid_size,
        max_violation,
        argmax,
    })
}
