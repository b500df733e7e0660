//! Assembly of the explicit constants behind the log-Sobolev bound: the
//! curvature constant C_K, the Poincaré-type constant C_P (zonal, spectral,
//! and subordination forms), the sphere constant Λ_Δ, the resulting lower
//! bound Λ_b, and the Fisher-monotonicity criterion sup r|α′|/(2α) ≤ √Λ_b.

use crate::error::{Error, Result};
use crate::gegenbauer::{laplace_eigenvalue, legendre_inequality_check};
use crate::kernels::{compare_kernels, KernelSpec, KernelSpectrum, KernelVariant, WeightSpec};
use crate::sphere::Dimension;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Pointwise tolerance accepted when certifying the spectral sup by the
/// deflated Legendre inequality.
const TAIL_CERT_TOL: f64 = 1e-10;

/// Λ_Δ = d + 3 − 1/(d−1): the curvature constant of the sphere Laplacian
/// entering the heat-flow decay rate. Strictly larger than d for d ≥ 2.
pub fn lambda_delta(d: Dimension) -> f64 {
    let df = d.as_f64();
    df + 3.0 - 1.0 / (df - 1.0)
}

/// Curvature constant C_K = (d−2)/(2(d−1)) · Lévy moment. The underlying
/// pointwise Γ² bound needs d ≥ 3; at d = 2 the prefactor vanishes and the
/// route gives nothing, reported as `DimensionTooSmall`.
pub fn ck_curvature(k: &KernelSpec) -> Result<f64> {
    let d = k.dimension();
    if d.get() < 3 {
        return Err(Error::DimensionTooSmall(
            "curvature constant needs dimension >= 3".into(),
        ));
    }
    let df = d.as_f64();
    Ok((df - 2.0) / (2.0 * (df - 1.0)) * k.levy_moment()?)
}

/// Poincaré constant by the zonal route: C_P = Lévy moment / (d−1).
pub fn cp_zonal(k: &KernelSpec) -> Result<f64> {
    Ok(k.levy_moment()? / (k.dimension().as_f64() - 1.0))
}

/// Poincaré constant by the spectral route: C_P = 2 sup over even ℓ ≥ 2 of
/// λ̃_ℓ/λ_ℓ.
///
/// The stored spectrum only reaches its finite degree cap, so the sup is
/// certified against the tail: the running sup must already be attained at
/// ℓ = 2, and the pointwise domination (1−P_{2ℓ})/λ_{2ℓ} ≤ (1−P_2)/λ_2 —
/// which forces every ratio below the ℓ = 2 one — must verify numerically
/// over the stored range. Otherwise `TailNotCertified` is raised rather
/// than silently truncating a sup.
pub fn cp_spectral(spec: &KernelSpectrum) -> Result<f64> {
    let d = spec.dimension();
    if spec.l_max() < 4 {
        return Err(Error::TailNotCertified(
            "spectrum too short to certify the spectral sup (need degree 4)".into(),
        ));
    }
    let ratio2 = spec.value(2) / laplace_eigenvalue(d, 2);
    let mut best = ratio2;
    for l in (4..=spec.l_max()).step_by(2) {
        let ratio = spec.value(l) / laplace_eigenvalue(d, l);
        // Exact proportionality ties at one ulp; only a genuine excess over
        // the degree-2 ratio defeats the certificate.
        if ratio > ratio2 * (1.0 + 1e-12) {
            return Err(Error::TailNotCertified(format!(
                "eigenvalue ratio at degree {l} exceeds the degree-2 ratio \
                 ({ratio} > {ratio2})"
            )));
        }
        best = best.max(ratio);
    }
    let cert = legendre_inequality_check(d, spec.l_max(), 1001)?;
    if cert.max_violation > TAIL_CERT_TOL {
        return Err(Error::TailNotCertified(format!(
            "deflated Legendre domination violated by {:.3e}",
            cert.max_violation
        )));
    }
    Ok(2.0 * best)
}

/// Subordination-route curvature constant:
/// C_K = ∫ ω(t) (1 − e^{−2Λ_Δ t})/2 dt.
pub fn ck_subordinated(w: &WeightSpec, d: Dimension) -> Result<f64> {
    let two_lam = 2.0 * lambda_delta(d);
    w.integrate(0.0, |t| -(-two_lam * t).exp_m1() / 2.0)
}

/// Subordination-route Poincaré constant:
/// C_P = ∫ ω(t) (1 − e^{−2d t})/d dt.
pub fn cp_subordinated(w: &WeightSpec, d: Dimension) -> Result<f64> {
    let df = d.as_f64();
    let two_d = 2.0 * df;
    w.integrate(0.0, |t| -(-two_d * t).exp_m1() / df)
}

/// Velocity-scaling profile α(r) whose log-derivative feeds the
/// monotonicity criterion.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSpec {
    /// α(r) = r^γ; the log-derivative is constant.
    Power { gamma: f64 },
    /// Samples (r, α(r), α′(r)); the sup is taken over a supplied range.
    Tabulated {
        radii: Vec<f64>,
        alpha: Vec<f64>,
        alpha_prime: Vec<f64>,
    },
}

impl AlphaSpec {
    fn describe(&self) -> String {
        match self {
            AlphaSpec::Power { gamma } => format!("power(gamma={gamma})"),
            AlphaSpec::Tabulated { radii, .. } => {
                format!("tabulated({} samples)", radii.len())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AlphaSpec::Power { gamma } => {
                if !gamma.is_finite() {
                    return Err(Error::InvalidInput("alpha exponent must be finite".into()));
                }
            }
            AlphaSpec::Tabulated { radii, alpha, alpha_prime } => {
                if radii.len() != alpha.len() || radii.len() != alpha_prime.len() {
                    return Err(Error::InvalidInput(
                        "alpha samples must have matching lengths".into(),
                    ));
                }
                if radii.len() < 2 {
                    return Err(Error::InvalidInput("alpha needs at least 2 samples".into()));
                }
                if !(radii[0] > 0.0) {
                    return Err(Error::InvalidInput("alpha radii must be positive".into()));
                }
                for pair in radii.windows(2) {
                    if !(pair[0] < pair[1]) {
                        return Err(Error::InvalidInput(
                            "alpha radii must increase strictly".into(),
                        ));
                    }
                }
                if alpha.iter().any(|a| !(*a > 0.0)) {
                    return Err(Error::InvalidInput("alpha values must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Verdict of the monotonicity criterion for one α against one Λ.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CriterionReport {
    /// Human-readable description of the α model tested.
    pub alpha: String,
    /// sup over the range of r|α′(r)|/(2α(r)).
    pub sup_quantity: f64,
    /// sup_quantity ≤ √Λ_b.
    pub passes: bool,
}

/// Evaluates the Fisher-monotonicity criterion sup r|α′|/(2α) ≤ √lambda_b.
///
/// For the power model the sup is the exact constant |γ|/2; a boundary tie
/// passes. Tabulated profiles take the sup over their samples intersected
/// with `r_range` (the whole sample range when absent), sharpened by the
/// vertex of the parabola through each interior sample triple.
pub fn criterion_check(
    alpha: &AlphaSpec,
    lambda_b: f64,
    r_range: Option<(f64, f64)>,
) -> Result<CriterionReport> {
    alpha.validate()?;
    if !(lambda_b >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "criterion needs lambda_b >= 0, got {lambda_b}"
        )));
    }
    let sup = match alpha {
        AlphaSpec::Power { gamma } => gamma.abs() / 2.0,
        AlphaSpec::Tabulated { radii, alpha, alpha_prime } => {
            let (lo, hi) = r_range.unwrap_or((radii[0], *radii.last().unwrap()));
            if !(lo < hi) {
                return Err(Error::InvalidInput("empty radius range".into()));
            }
            let q: Vec<(f64, f64)> = radii
                .iter()
                .zip(alpha.iter().zip(alpha_prime.iter()))
                .filter(|(r, _)| **r >= lo && **r <= hi)
                .map(|(r, (a, ap))| (*r, r * ap.abs() / (2.0 * a)))
                .collect();
            if q.is_empty() {
                return Err(Error::InvalidInput(
                    "no alpha samples inside the radius range".into(),
                ));
            }
            let mut sup = q.iter().fold(0.0f64, |m, (_, v)| m.max(*v));
            for w in q.windows(3) {
                if let Some(v) = parabola_vertex_value(w[0], w[1], w[2]) {
                    sup = sup.max(v);
                }
            }
            sup
        }
    };
    Ok(CriterionReport {
        alpha: alpha.describe(),
        sup_quantity: sup,
        passes: sup <= lambda_b.sqrt(),
    })
}

/// Value at the vertex of the parabola through three samples, when the
/// vertex lies strictly between the outer abscissae and above the middle
/// sample (a local interior maximum the grid may have clipped).
fn parabola_vertex_value(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<f64> {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curv = (d1 - d0) / (x2 - x0);
    if !(curv < 0.0) {
        return None;
    }
    // Newton-form derivative zero.
    let xv = 0.5 * (x0 + x1 - d0 / curv);
    if xv <= x0 || xv >= x2 {
        return None;
    }
    let yv = y0 + d0 * (xv - x0) + curv * (xv - x0) * (xv - x1);
    (yv > y1).then_some(yv)
}

/// Options steering [`assemble_lambda`].
#[derive(Debug, Clone)]
pub struct AssembleOptions {
    /// Degree cap of the computed spectrum (spectral C_P certificate range).
    pub spectrum_l: usize,
    /// Reference kernel with a known bound, enabling the comparison route.
    pub reference: Option<(KernelSpec, f64)>,
    /// Initial grid for the comparison extremes.
    pub comparison_grid: usize,
    /// Velocity-scaling model for the criterion; defaults to the model the
    /// kernel variant stands for (hard spheres γ = 1, power laws their own
    /// γ, Maxwell-type γ = 0 otherwise).
    pub alpha: Option<AlphaSpec>,
    /// Radius range for tabulated α profiles.
    pub r_range: Option<(f64, f64)>,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            spectrum_l: 40,
            reference: None,
            comparison_grid: 4097,
            alpha: None,
            r_range: None,
        }
    }
}

/// Everything the analysis of one kernel produces: constants by route, the
/// assembled lower bound, and the criterion verdict.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConstantsReport {
    pub d: u32,
    /// Canonical kernel serialization; doubles as the kernel's identity.
    pub kernel: serde_json::Value,
    pub c_k_curvature: Option<f64>,
    pub c_k_subordinated: Option<f64>,
    pub c_p_zonal: f64,
    pub c_p_spectral: f64,
    pub c_p_subordinated: Option<f64>,
    pub lambda_delta: f64,
    /// Lower bound per applicable route.
    pub lambda_b_routes: BTreeMap<String, f64>,
    /// Best (largest) of the route bounds.
    pub lambda_b: f64,
    pub criterion: CriterionReport,
}

fn default_alpha(k: &KernelSpec) -> AlphaSpec {
    match k.variant() {
        KernelVariant::HardSphere => AlphaSpec::Power { gamma: 1.0 },
        KernelVariant::PowerLaw { gamma, .. } => AlphaSpec::Power { gamma: *gamma },
        _ => AlphaSpec::Power { gamma: 0.0 },
    }
}

/// Computes every applicable lower-bound route for Λ_b and assembles the
/// report:
///
/// * curvature (d ≥ 3): 2 C_K / C_P with the zonal C_P — the Lévy moment
///   cancels, so the value is d − 2;
/// * subordination (subordinated kernels, any d ≥ 2): 2 C_K^ω / C_P^ω from
///   the time-integral constants;
/// * comparison (reference kernel with known bound supplied):
///   (c0/C0) · Λ_ref from the symmetrized-ratio extremes.
///
/// With no applicable route the bound does not exist and
/// `NoRouteApplicable` is raised.
pub fn assemble_lambda(k: &KernelSpec, options: &AssembleOptions) -> Result<ConstantsReport> {
    let spectrum = k.btilde_spectrum(options.spectrum_l)?;
    assemble_lambda_with_spectrum(k, &spectrum, options)
}

/// [`assemble_lambda`] with an externally supplied spectrum (for example
/// one loaded from a cache). The spectrum must belong to `k`.
pub fn assemble_lambda_with_spectrum(
    k: &KernelSpec,
    spectrum: &KernelSpectrum,
    options: &AssembleOptions,
) -> Result<ConstantsReport> {
    let d = k.dimension();
    if spectrum.dimension() != d {
        return Err(Error::InvalidInput(
            "spectrum and kernel must share a dimension".into(),
        ));
    }
    let c_p_zonal = cp_zonal(k)?;
    let c_p_spectral = cp_spectral(spectrum)?;

    let c_k_curvature = if d.get() >= 3 { Some(ck_curvature(k)?) } else { None };
    let (c_k_subordinated, c_p_subordinated) = match k.variant() {
        KernelVariant::Subordinated { weight } => (
            Some(ck_subordinated(weight, d)?),
            Some(cp_subordinated(weight, d)?),
        ),
        _ => (None, None),
    };

    let mut routes = BTreeMap::new();
    if let Some(ck) = c_k_curvature {
        routes.insert("curvature".to_string(), 2.0 * ck / c_p_zonal);
    }
    if let (Some(ck), Some(cp)) = (c_k_subordinated, c_p_subordinated) {
        if cp > 0.0 {
            routes.insert("subordination".to_string(), 2.0 * ck / cp);
        }
    }
    if let Some((reference, lambda_ref)) = &options.reference {
        let (c0, big_c0) = compare_kernels(k, reference, options.comparison_grid)?;
        routes.insert("comparison".to_string(), c0 / big_c0 * lambda_ref);
    }

    let lambda_b = routes.values().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    if routes.is_empty() {
        return Err(Error::NoRouteApplicable(format!(
            "no lower-bound route applies at d = {} for this kernel; supply a \
             reference kernel or a subordination weight",
            d.get()
        )));
    }

    let alpha = options.alpha.clone().unwrap_or_else(|| default_alpha(k));
    let criterion = criterion_check(&alpha, lambda_b, options.r_range)?;

    Ok(ConstantsReport {
        d: d.get(),
        kernel: k.to_json(),
        c_k_curvature,
        c_k_subordinated,
        c_p_zonal,
        c_p_spectral,
        c_p_subordinated,
        lambda_delta: lambda_delta(d),
        lambda_b_routes: routes,
        lambda_b,
        criterion,
    })
}
