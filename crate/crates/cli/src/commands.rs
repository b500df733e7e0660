//! Subcommand implementations. Every command returns the process exit code
//! on success of the orchestration itself; hard errors bubble up as
//! [`CliError`] and are mapped to exit codes in `main`.
//!
//! Exit code conventions: 0 success (and criterion pass where one is
//! configured), 2 configuration error, 3 divergent kernel / no applicable
//! route, 4 check failure.

use crate::cache::{CacheStatus, SpectrumCache};
use crate::config::{derive_seed, JobConfig, LegendreBlock, VerifySection};
use crate::{CliError, OutputCtx};
use bsphere_core::constants::{
    assemble_lambda_with_spectrum, ck_curvature, cp_spectral, AssembleOptions, ConstantsReport,
};
use bsphere_core::flow::{evolve, fisher_decay_check, DecayReport, FlowRun, Generator};
use bsphere_core::function::fisher;
use bsphere_core::gegenbauer::legendre_inequality_check;
use bsphere_core::kernels::{compare_kernels, KernelSpec, KernelSpectrum};
use bsphere_core::sphere::Dimension;
use bsphere_core::verifier::{
    empirical_lambda, gamma2_log_integral, gateaux_identity_check, hardy_sides,
    sample_function, villani_gradient_check, AxisZonal, SamplerSpec,
};
use serde_json::{json, Value};

const LOGSOB_SLACK: f64 = 1e-6;
const HARDY_MARGIN_REL: f64 = 1e-9;
const GAMMA2_SLACK_REL: f64 = 1e-6;
const GATEAUX_TOL: f64 = 1e-5;
const VILLANI_TOL: f64 = 1e-4;
const LEGENDRE_TOL: f64 = 1e-12;
const COMPARISON_GRID: usize = 4097;

fn cache_note(out: &OutputCtx, status: CacheStatus, kernel: &KernelSpec, l: usize) {
    let word = match status {
        CacheStatus::Disabled => return,
        CacheStatus::Hit => "hit",
        CacheStatus::Miss => "stored",
    };
    out.note(&format!(
        "spectrum cache {word}: {}",
        SpectrumCache::fingerprint(kernel, l)
    ));
}

fn assemble_options(cfg: &JobConfig) -> Result<AssembleOptions, CliError> {
    let mut options =
        AssembleOptions { spectrum_l: cfg.spectrum_l, comparison_grid: COMPARISON_GRID, ..Default::default() };
    if let Some(section) = &cfg.analyze {
        if let Some(r) = &section.reference {
            let rk = KernelSpec::from_json(&r.kernel)
                .map_err(|e| CliError::Config(format!("reference kernel: {e}")))?;
            options.reference = Some((rk, r.lambda));
        }
        if let Some(c) = &section.criterion {
            options.alpha = Some(c.alpha.to_spec());
            options.r_range = c.r_range;
        }
    }
    Ok(options)
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

pub fn cmd_analyze(
    cfg: &JobConfig,
    out: &OutputCtx,
    cache: &SpectrumCache,
) -> Result<u8, CliError> {
    let kernel = cfg.kernel()?;
    let (spectrum, status) = cache.spectrum(&kernel, cfg.spectrum_l)?;
    cache_note(out, status, &kernel, cfg.spectrum_l);
    let options = assemble_options(cfg)?;
    let report: ConstantsReport = assemble_lambda_with_spectrum(&kernel, &spectrum, &options)?;

    let doc = json!({
        "format": 1,
        "command": "analyze",
        "seed": cfg.seed,
        "report": report,
    });
    out.emit("analyze", &doc)?;

    let routes: Vec<String> = report
        .lambda_b_routes
        .iter()
        .map(|(name, v)| format!("{name} {v:.6}"))
        .collect();
    out.note(&format!(
        "lambda_b = {:.6} (routes: {}); criterion sup {:.4} -> {}",
        report.lambda_b,
        routes.join(", "),
        report.criterion.sup_quantity,
        if report.criterion.passes { "pass" } else { "fail" }
    ));

    let criterion_configured =
        cfg.analyze.as_ref().is_some_and(|a| a.criterion.is_some());
    Ok(if criterion_configured && !report.criterion.passes { 4 } else { 0 })
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

pub fn cmd_compare(cfg: &JobConfig, out: &OutputCtx) -> Result<u8, CliError> {
    let kernel = cfg.kernel()?;
    let reference = cfg
        .analyze
        .as_ref()
        .and_then(|a| a.reference.as_ref())
        .ok_or_else(|| {
            CliError::Config("compare needs an analyze.reference block in the config".into())
        })?;
    let rk = KernelSpec::from_json(&reference.kernel)
        .map_err(|e| CliError::Config(format!("reference kernel: {e}")))?;
    let (ratio_min, ratio_max) = compare_kernels(&kernel, &rk, COMPARISON_GRID)?;
    let bound = ratio_min / ratio_max * reference.lambda;

    let doc = json!({
        "format": 1,
        "command": "compare",
        "kernel": kernel.to_json(),
        "reference": rk.to_json(),
        "lambda_reference": reference.lambda,
        "ratio_min": ratio_min,
        "ratio_max": ratio_max,
        "lambda_bound": bound,
    });
    out.emit("compare", &doc)?;
    out.note(&format!(
        "symmetrized ratio in [{ratio_min:.9}, {ratio_max:.9}]; transported bound {bound:.9}"
    ));
    Ok(0)
}

// ---------------------------------------------------------------------------
// legendre-check
// ---------------------------------------------------------------------------

pub fn cmd_legendre(cfg: Option<&JobConfig>, out: &OutputCtx) -> Result<u8, CliError> {
    let block: LegendreBlock = cfg
        .and_then(|c| c.verify.as_ref())
        .and_then(|v| v.legendre.clone())
        .unwrap_or_default();
    let mut entries = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for d in block.d_min..=block.d_max {
        let rep = legendre_inequality_check(Dimension::new(d)?, block.l_max, block.grid)?;
        worst = worst.max(rep.max_violation);
        entries.push(json!({
            "d": d,
            "max_violation": rep.max_violation,
            "argmax_degree": 2 * rep.argmax.0,
            "argmax_c": rep.argmax.1,
        }));
    }
    let passed = worst <= LEGENDRE_TOL;
    let doc = json!({
        "format": 1,
        "command": "legendre-check",
        "l_max": block.l_max,
        "grid": block.grid,
        "tolerance": LEGENDRE_TOL,
        "entries": entries,
        "max_violation": worst,
        "passed": passed,
    });
    out.emit("legendre", &doc)?;
    out.note(&format!(
        "even-degree Legendre inequality d = {}..{}, degree <= {}: max violation {worst:.3e} -> {}",
        block.d_min,
        block.d_max,
        2 * block.l_max,
        if passed { "pass" } else { "FAIL" }
    ));
    Ok(if passed { 0 } else { 4 })
}

// ---------------------------------------------------------------------------
// flow
// ---------------------------------------------------------------------------

pub fn cmd_flow(cfg: &JobConfig, out: &OutputCtx, cache: &SpectrumCache) -> Result<u8, CliError> {
    let section = cfg
        .flow
        .clone()
        .ok_or_else(|| CliError::Config("flow needs a \"flow\" section in the config".into()))?;
    // The kernel fixes the sphere dimension; heat runs use only that.
    let kernel = cfg.kernel()?;
    let d = kernel.dimension();

    let sampler = SamplerSpec {
        seed: derive_seed(cfg.seed, "flow-initial"),
        bandwidth: section.initial_bandwidth,
        amplitude: section.initial_amplitude,
    };
    let f0 = sample_function(d, &sampler, section.initial_index)?;

    // Jump generators need eigenvalues through the initial datum's band;
    // grow the spectrum degree geometrically until the flow fits.
    let is_heat = section.generator == "heat";
    let mut degree = cfg.spectrum_l;
    let run: FlowRun = loop {
        let generator = if is_heat {
            Generator::Heat
        } else {
            let (spectrum, status) = cache.spectrum(&kernel, degree)?;
            cache_note(out, status, &kernel, degree);
            Generator::Jump(spectrum)
        };
        match evolve(&generator, &f0, &section.times) {
            Ok(run) => break run,
            Err(bsphere_core::Error::BandLimitExceeded(_)) if !is_heat && degree < 4096 => {
                let next = (2 * degree).min(4096);
                out.note(&format!(
                    "spectrum degree {degree} too low for the initial datum; retrying at {next}"
                ));
                degree = next;
            }
            Err(e) => return Err(e.into()),
        }
    };

    let mut series = vec![fisher(&run.initial)?];
    series.extend_from_slice(&run.fisher_series);
    let slack = section.slack * series[0].max(1.0);
    let monotone = series.windows(2).all(|w| w[1] <= w[0] + slack);

    let decay: Option<DecayReport> = match section.decay_tol {
        Some(tol) if is_heat => Some(fisher_decay_check(&run, tol)?),
        _ => None,
    };
    let decay_ok = decay.as_ref().map(DecayReport::passed).unwrap_or(true);
    let passed = monotone && decay_ok;

    let mut csv = String::from("t,fisher,mass,entropy\n");
    for (i, t) in run.times.iter().enumerate() {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            t, run.fisher_series[i], run.mass_series[i], run.entropy_series[i]
        ));
    }
    out.emit_named("flow.csv", csv.as_bytes())?;

    let doc = json!({
        "format": 1,
        "command": "flow",
        "seed": cfg.seed,
        "slack": section.slack,
        "initial_fisher": series[0],
        "monotone": monotone,
        "decay": decay,
        "passed": passed,
        "run": run,
    });
    out.emit("flow", &doc)?;
    out.note(&format!(
        "fisher {} from {:.6e} to {:.6e}{} -> {}",
        if monotone { "non-increasing" } else { "INCREASED" },
        series[0],
        series.last().expect("series nonempty"),
        match &decay {
            Some(rep) if rep.passed() => "; decay envelope holds".to_string(),
            Some(rep) => format!("; decay envelope violated {} times", rep.violations.len()),
            None => String::new(),
        },
        if passed { "pass" } else { "FAIL" }
    ));
    Ok(if passed { 0 } else { 4 })
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct CheckOutcome {
    name: &'static str,
    passed: bool,
    detail: String,
    numbers: Value,
}

pub fn cmd_verify(cfg: &JobConfig, out: &OutputCtx, cache: &SpectrumCache) -> Result<u8, CliError> {
    let kernel = cfg.kernel()?;
    let d = kernel.dimension();
    let section: VerifySection = cfg.verify.clone().unwrap_or_default();

    let mut applicable: Vec<&'static str> = vec!["logsob", "hardy"];
    if d.get() >= 3 {
        applicable.push("gamma2");
    }
    applicable.push("gateaux");
    if d.get() == 3 && kernel.is_smooth() {
        applicable.push("villani");
    }
    applicable.push("legendre");

    let selected: Vec<String> = match &section.checks {
        Some(names) => {
            for name in names {
                if !applicable.contains(&name.as_str()) {
                    return Err(CliError::Config(format!(
                        "check '{name}' does not apply to this kernel at d = {} \
                         (needs d >= 3 for gamma2, d = 3 and a smooth kernel for villani)",
                        d.get()
                    )));
                }
            }
            names.clone()
        }
        None => applicable.iter().map(|s| s.to_string()).collect(),
    };
    let selected_set: Vec<&str> = selected.iter().map(String::as_str).collect();

    // The spectrum feeds every spectral check. A corrupted cache entry is
    // itself a detected fault, reported as a failed check; a spectrum
    // degree too low for the sampled functions grows geometrically until
    // the checks fit (the growth path is a deterministic function of the
    // config, so reports stay reproducible).
    let mut degree = cfg.spectrum_l;
    let (outcomes, degree_used) = loop {
        let spectrum = match cache.spectrum(&kernel, degree) {
            Ok((spectrum, status)) => {
                cache_note(out, status, &kernel, degree);
                spectrum
            }
            Err(CliError::Cache(detail)) => {
                let outcome = CheckOutcome {
                    name: "hardy",
                    passed: false,
                    detail: format!("spectrum rejected: {detail}"),
                    numbers: json!({}),
                };
                return finish_verify(cfg, out, &selected, vec![outcome], degree);
            }
            Err(other) => return Err(other),
        };
        match run_checks(cfg, &kernel, &spectrum, &section, &selected_set) {
            Ok(outcomes) => break (outcomes, degree),
            Err(CliError::Core(bsphere_core::Error::BandLimitExceeded(_))) if degree < 4096 => {
                let next = (2 * degree).min(4096);
                out.note(&format!(
                    "spectrum degree {degree} too low for the sampled functions; retrying at {next}"
                ));
                degree = next;
            }
            Err(other) => return Err(other),
        }
    };
    finish_verify(cfg, out, &selected, outcomes, degree_used)
}

fn run_checks(
    cfg: &JobConfig,
    kernel: &KernelSpec,
    spectrum: &KernelSpectrum,
    section: &VerifySection,
    selected: &[&str],
) -> Result<Vec<CheckOutcome>, CliError> {
    let d = kernel.dimension();
    let mut outcomes: Vec<CheckOutcome> = Vec::new();
    for name in ["logsob", "hardy", "gamma2", "gateaux", "villani", "legendre"] {
        if !selected.contains(&name) {
            continue;
        }
        let outcome = match name {
            "logsob" => check_logsob(cfg, kernel, spectrum, section)?,
            "hardy" => check_hardy(cfg, d, spectrum, section)?,
            "gamma2" => check_gamma2(cfg, kernel, spectrum, section)?,
            "gateaux" => check_gateaux(cfg, d, spectrum, section)?,
            "villani" => check_villani(cfg, kernel, section)?,
            "legendre" => check_legendre(section)?,
            _ => unreachable!(),
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn finish_verify(
    cfg: &JobConfig,
    out: &OutputCtx,
    selected: &[String],
    outcomes: Vec<CheckOutcome>,
    spectrum_degree: usize,
) -> Result<u8, CliError> {
    let passed = outcomes.iter().all(|c| c.passed);
    let checks: Vec<Value> = outcomes
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "passed": c.passed,
                "detail": c.detail,
                "numbers": c.numbers,
            })
        })
        .collect();
    let doc = json!({
        "format": 1,
        "command": "verify",
        "seed": cfg.seed,
        "kernel": cfg.kernel.clone(),
        "spectrum_l": spectrum_degree,
        "selected": selected,
        "checks": checks,
        "passed": passed,
    });
    out.emit("verify", &doc)?;
    for c in &outcomes {
        out.note(&format!(
            "check {:<8} {} — {}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.detail
        ));
    }
    Ok(if passed { 0 } else { 4 })
}

fn sampler_for(cfg: &JobConfig, section: &VerifySection, label: &str) -> SamplerSpec {
    SamplerSpec {
        seed: derive_seed(cfg.seed, label),
        bandwidth: section.bandwidth,
        amplitude: section.amplitude,
    }
}

fn check_logsob(
    cfg: &JobConfig,
    kernel: &KernelSpec,
    spectrum: &KernelSpectrum,
    section: &VerifySection,
) -> Result<CheckOutcome, CliError> {
    let options = assemble_options(cfg)?;
    let constants = assemble_lambda_with_spectrum(kernel, spectrum, &options)?;
    let sampler = sampler_for(cfg, section, "verify-logsob");
    let min_ratio = empirical_lambda(spectrum, kernel, &sampler, section.samples)?;
    let passed = min_ratio + LOGSOB_SLACK >= constants.lambda_b;
    Ok(CheckOutcome {
        name: "logsob",
        passed,
        detail: format!(
            "min ratio {min_ratio:.6} over {} samples vs assembled bound {:.6}",
            section.samples, constants.lambda_b
        ),
        numbers: json!({
            "min_ratio": min_ratio,
            "lambda_bound": constants.lambda_b,
            "samples": section.samples,
        }),
    })
}

fn check_hardy(
    cfg: &JobConfig,
    d: Dimension,
    spectrum: &KernelSpectrum,
    section: &VerifySection,
) -> Result<CheckOutcome, CliError> {
    let certificate = cp_spectral(spectrum);
    let sampler = sampler_for(cfg, section, "verify-hardy");
    let mut min_margin = f64::INFINITY;
    let mut worst_scale = 0.0f64;
    for i in 0..section.samples as u64 {
        let f = sample_function(d, &sampler, i)?;
        let rep = hardy_sides(spectrum, &f)?;
        let scale = rep.lhs.abs().max(rep.bound_used * rep.rhs).max(1e-300);
        if rep.margin / scale < min_margin {
            min_margin = rep.margin / scale;
            worst_scale = scale;
        }
    }
    let margins_ok = min_margin >= -HARDY_MARGIN_REL;
    let (cert_ok, cert_detail, cp) = match &certificate {
        Ok(cp) => (true, format!("spectral C_P {cp:.6}"), Some(*cp)),
        Err(e) => (false, format!("spectral certificate: {e}"), None),
    };
    Ok(CheckOutcome {
        name: "hardy",
        passed: margins_ok && cert_ok,
        detail: format!(
            "{cert_detail}; min relative margin {min_margin:.3e} (scale {worst_scale:.3e})"
        ),
        numbers: json!({
            "cp_spectral": cp,
            "min_relative_margin": min_margin,
            "samples": section.samples,
        }),
    })
}

fn check_gamma2(
    cfg: &JobConfig,
    kernel: &KernelSpec,
    spectrum: &KernelSpectrum,
    section: &VerifySection,
) -> Result<CheckOutcome, CliError> {
    let ck = ck_curvature(kernel)?;
    let sampler = sampler_for(cfg, section, "verify-gamma2");
    let mut min_quotient = f64::INFINITY;
    for i in 0..section.samples as u64 {
        let f = sample_function(kernel.dimension(), &sampler, i)?;
        let numerator = gamma2_log_integral(spectrum, &f)?;
        let information = fisher(&f)?;
        if information <= 1e-14 {
            continue;
        }
        min_quotient = min_quotient.min(numerator / information);
    }
    let passed = min_quotient >= ck * (1.0 - GAMMA2_SLACK_REL);
    Ok(CheckOutcome {
        name: "gamma2",
        passed,
        detail: format!(
            "min curvature quotient {min_quotient:.6} vs C_K {ck:.6} over {} samples",
            section.samples
        ),
        numbers: json!({
            "min_quotient": min_quotient,
            "c_k": ck,
            "samples": section.samples,
        }),
    })
}

fn check_gateaux(
    cfg: &JobConfig,
    d: Dimension,
    spectrum: &KernelSpectrum,
    section: &VerifySection,
) -> Result<CheckOutcome, CliError> {
    let sampler = sampler_for(cfg, section, "verify-gateaux");
    let mut worst = 0.0f64;
    for i in 0..section.samples as u64 {
        let f = sample_function(d, &sampler, i)?;
        let rep = gateaux_identity_check(spectrum, &f, section.gateaux_dt)?;
        worst = worst.max(rep.rel_error);
    }
    let passed = worst <= GATEAUX_TOL;
    Ok(CheckOutcome {
        name: "gateaux",
        passed,
        detail: format!(
            "worst relative error {worst:.3e} at dt = {:.1e} over {} samples",
            section.gateaux_dt, section.samples
        ),
        numbers: json!({
            "worst_rel_error": worst,
            "dt": section.gateaux_dt,
            "samples": section.samples,
        }),
    })
}

/// Unit floats in [0, 1) derived from the task seed by counter hashing.
fn seeded_floats(seed: u64, count: usize) -> Vec<f64> {
    use sha2::{Digest, Sha256};
    let mut values = Vec::with_capacity(count);
    let mut counter = 0u64;
    while values.len() < count {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(b"bsphere-villani-floats");
        h.update(counter.to_le_bytes());
        let digest = h.finalize();
        for chunk in digest.chunks_exact(8) {
            if values.len() == count {
                break;
            }
            let raw = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            values.push((raw >> 11) as f64 / (1u64 << 53) as f64);
        }
        counter += 1;
    }
    values
}

fn unit_vector(raw: &[f64]) -> [f64; 3] {
    let v = [2.0 * raw[0] - 1.0, 2.0 * raw[1] - 1.0, 2.0 * raw[2] - 1.0];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm < 1e-3 {
        return [0.0, 0.0, 1.0];
    }
    [v[0] / norm, v[1] / norm, v[2] / norm]
}

fn check_villani(
    cfg: &JobConfig,
    kernel: &KernelSpec,
    section: &VerifySection,
) -> Result<CheckOutcome, CliError> {
    let seed = derive_seed(cfg.seed, "verify-villani");
    let raw = seeded_floats(seed, 10);
    let axis = unit_vector(&raw[0..3]);
    let mut sigma = unit_vector(&raw[3..6]);
    let dot = axis[0] * sigma[0] + axis[1] * sigma[1] + axis[2] * sigma[2];
    if dot.abs() > 0.99 {
        // Nearly parallel draws make the tangential derivative degenerate;
        // fall back to a vector orthogonal to the axis.
        let alt = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let cross = [
            axis[1] * alt[2] - axis[2] * alt[1],
            axis[2] * alt[0] - axis[0] * alt[2],
            axis[0] * alt[1] - axis[1] * alt[0],
        ];
        sigma = unit_vector(&[0.5 * (cross[0] + 1.0), 0.5 * (cross[1] + 1.0), 0.5 * (cross[2] + 1.0)]);
    }
    let g = AxisZonal {
        axis,
        coeffs: vec![0.0, raw[6] - 0.5, raw[7] - 0.5, 0.5 * (raw[8] - 0.5)],
    };
    let rep = villani_gradient_check(kernel, &g, sigma, section.villani_step)?;
    let passed = rep.rel_error <= VILLANI_TOL;
    Ok(CheckOutcome {
        name: "villani",
        passed,
        detail: format!(
            "gradient-exchange relative error {:.3e} at h = {:.1e}",
            rep.rel_error, rep.h
        ),
        numbers: json!({
            "derivative_fd": rep.derivative_fd,
            "gradient_integral": rep.gradient_integral,
            "rel_error": rep.rel_error,
            "h": rep.h,
        }),
    })
}

fn check_legendre(section: &VerifySection) -> Result<CheckOutcome, CliError> {
    let block = section.legendre.clone().unwrap_or_default();
    let mut worst = f64::NEG_INFINITY;
    for d in block.d_min..=block.d_max {
        let rep = legendre_inequality_check(Dimension::new(d)?, block.l_max, block.grid)?;
        worst = worst.max(rep.max_violation);
    }
    let passed = worst <= LEGENDRE_TOL;
    Ok(CheckOutcome {
        name: "legendre",
        passed,
        detail: format!(
            "max violation {worst:.3e} for d = {}..{}, degree <= {}",
            block.d_min,
            block.d_max,
            2 * block.l_max
        ),
        numbers: json!({
            "max_violation": worst,
            "d_min": block.d_min,
            "d_max": block.d_max,
            "l_max": block.l_max,
            "grid": block.grid,
        }),
    })
}
