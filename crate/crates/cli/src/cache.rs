//! Persistent spectrum cache.
//!
//! Keyed by a SHA-256 fingerprint of the canonical JSON
//! `{"d": .., "kernel": .., "l": .., "order": 0}` (keys sorted; "order" 0
//! denotes the library-managed adaptive quadrature). Entries are JSON files
//! holding the key alongside the eigenvalues, so a hit can be verified
//! against the exact request rather than trusted on the hash alone.
//! Infinite eigenvalues (odd degrees of endpoint-singular kernels) are
//! stored as the string "inf"; finite ones round-trip bit-identically.

use crate::CliError;
use bsphere_core::kernels::{KernelSpec, KernelSpectrum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const CACHE_ENV_VAR: &str = "BSPHERE_CACHE_DIR";
const CACHE_FORMAT: u64 = 1;

#[derive(Debug, Clone, Default)]
pub struct SpectrumCache {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
}

impl SpectrumCache {
    /// Cache rooted at `dir`; `None` disables caching entirely.
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    /// Cache configured from the environment variable.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(CACHE_ENV_VAR).filter(|v| !v.is_empty()).map(PathBuf::from))
    }

    fn key(kernel: &KernelSpec, l: usize) -> Value {
        json!({
            "d": kernel.dimension().get(),
            "kernel": kernel.to_json(),
            "l": l,
            "order": 0,
        })
    }

    pub fn fingerprint(kernel: &KernelSpec, l: usize) -> String {
        let canonical =
            serde_json::to_string(&Self::key(kernel, l)).expect("cache key always serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn entry_path(&self, kernel: &KernelSpec, l: usize) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.json", Self::fingerprint(kernel, l))))
    }

    /// Returns the spectrum for (kernel, l), loading it from the cache when
    /// present and storing it after computation otherwise. A present but
    /// unusable entry is an error — it is evidence of corruption, never
    /// silently recomputed over.
    pub fn spectrum(
        &self,
        kernel: &KernelSpec,
        l: usize,
    ) -> Result<(KernelSpectrum, CacheStatus), CliError> {
        let Some(path) = self.entry_path(kernel, l) else {
            let spec = kernel.btilde_spectrum(l)?;
            return Ok((spec, CacheStatus::Disabled));
        };
        if path.exists() {
            let spec = load_entry(&path, &Self::key(kernel, l), kernel, l)?;
            return Ok((spec, CacheStatus::Hit));
        }
        let spec = kernel.btilde_spectrum(l)?;
        store_entry(&path, &Self::key(kernel, l), &spec)?;
        Ok((spec, CacheStatus::Miss))
    }
}

fn cache_err(path: &Path, detail: impl std::fmt::Display) -> CliError {
    CliError::Cache(format!("cache entry {}: {detail}", path.display()))
}

fn load_entry(
    path: &Path,
    expected_key: &Value,
    kernel: &KernelSpec,
    l: usize,
) -> Result<KernelSpectrum, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| cache_err(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| cache_err(path, e))?;
    if doc.get("format").and_then(Value::as_u64) != Some(CACHE_FORMAT) {
        return Err(cache_err(path, "unsupported cache format"));
    }
    if doc.get("key") != Some(expected_key) {
        return Err(cache_err(path, "key mismatch (hash collision or stale entry)"));
    }
    let values = doc
        .get("values")
        .and_then(Value::as_array)
        .ok_or_else(|| cache_err(path, "missing values array"))?;
    if values.len() != l + 1 {
        return Err(cache_err(
            path,
            format!("expected {} eigenvalues, found {}", l + 1, values.len()),
        ));
    }
    let mut decoded = Vec::with_capacity(values.len());
    for v in values {
        decoded.push(decode_eigenvalue(v).ok_or_else(|| {
            cache_err(path, format!("unreadable eigenvalue entry {v}"))
        })?);
    }
    KernelSpectrum::new(kernel.dimension(), decoded)
        .map_err(|e| cache_err(path, format!("stored spectrum rejected: {e}")))
}

fn store_entry(path: &Path, key: &Value, spec: &KernelSpectrum) -> Result<(), CliError> {
    let doc = json!({
        "format": CACHE_FORMAT,
        "key": key,
        "values": spec.values().iter().map(encode_eigenvalue).collect::<Vec<_>>(),
    });
    let dir = path.parent().expect("cache entries live inside the cache directory");
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Cache(format!("cannot create cache dir {}: {e}", dir.display())))?;
    let body = format!("{}\n", serde_json::to_string_pretty(&doc).expect("cache JSON serializes"));
    crate::write_atomic(path, body.as_bytes())
        .map_err(|e| CliError::Cache(format!("cannot write {}: {e}", path.display())))
}

fn encode_eigenvalue(v: &f64) -> Value {
    if v.is_infinite() {
        Value::String("inf".into())
    } else {
        json!(v)
    }
}

fn decode_eigenvalue(v: &Value) -> Option<f64> {
    match v {
        Value::String(s) if s == "inf" => Some(f64::INFINITY),
        Value::Number(n) => n.as_f64(),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bsphere_core::kernels::KernelSpec;

    fn hard_sphere(d: u32) -> KernelSpec {
        KernelSpec::from_json(&serde_json::json!({
            "d": d, "variant": "hard_sphere", "params": {}
        }))
        .unwrap()
    }

    fn power_law() -> KernelSpec {
        KernelSpec::from_json(&serde_json::json!({
            "d": 3, "variant": "power_law", "params": {"s": 0.25, "gamma": 0.0}
        }))
        .unwrap()
    }

    #[test]
    fn fingerprints_are_stable_and_input_sensitive() {
        let k = hard_sphere(3);
        let a = SpectrumCache::fingerprint(&k, 8);
        assert_eq!(a, SpectrumCache::fingerprint(&k, 8));
        assert_ne!(a, SpectrumCache::fingerprint(&k, 9));
        assert_ne!(a, SpectrumCache::fingerprint(&hard_sphere(4), 8));
        assert_eq!(a.len(), 64);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn disabled_cache_computes_directly() {
        let cache = SpectrumCache::new(None);
        let (spectrum, status) = cache.spectrum(&hard_sphere(3), 6).unwrap();
        assert_eq!(status, CacheStatus::Disabled);
        assert_eq!(spectrum.l_max(), 6);
    }

    #[test]
    fn store_and_hit_round_trip_including_infinite_eigenvalues() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SpectrumCache::new(Some(dir.path().to_path_buf()));
        let k = power_law();

        let (cold, status) = cache.spectrum(&k, 6).unwrap();
        assert_eq!(status, CacheStatus::Miss);
        assert!(cold.value(1).is_infinite(), "odd modes diverge for this kernel");

        let (warm, status) = cache.spectrum(&k, 6).unwrap();
        assert_eq!(status, CacheStatus::Hit);
        for l in 0..=6 {
            let (a, b) = (cold.value(l), warm.value(l));
            assert!(a == b || (a.is_infinite() && b.is_infinite()), "degree {l}: {a} vs {b}");
            if a.is_finite() {
                assert_eq!(a.to_bits(), b.to_bits(), "degree {l} not bit-identical");
            }
        }
    }

    #[test]
    fn tampered_entry_is_an_error_not_a_recompute() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SpectrumCache::new(Some(dir.path().to_path_buf()));
        let k = hard_sphere(3);
        cache.spectrum(&k, 6).unwrap();

        let entry = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
        let mut doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&entry).unwrap()).unwrap();
        let v = doc["values"][2].as_f64().unwrap();
        doc["values"][2] = serde_json::json!(-v);
        std::fs::write(&entry, serde_json::to_string(&doc).unwrap()).unwrap();

        match cache.spectrum(&k, 6) {
            Err(CliError::Cache(msg)) => assert!(msg.contains("rejected"), "{msg}"),
            other => panic!("tampered entry must fail loudly, got {other:?}"),
        }
    }
}
