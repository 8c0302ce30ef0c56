//! Report formatting: full-precision CSV rows with per-row checksums and the
//! machine-readable column schema emitted next to every sweep.

use serde_json::json;

use crate::collect::RunMetrics;
use crate::config::SweepConfig;

/// Full double precision (17 significant digits), locale-free.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

/// FNV-1a 64-bit hash, used as the row checksum.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Column names of `rows.csv` for a given config (flow count and smoothness
/// windows are config-dependent).
pub fn csv_columns(cfg: &SweepConfig) -> Vec<String> {
    let n = cfg.lambda_star.len();
    let mut cols: Vec<String> = [
        "fixture",
        "epsilon",
        "replication",
        "seed",
        "horizon",
        "burn_in",
        "thin",
        "n_samples",
        "y_mean_norm",
        "y_mean_norm_se",
        "gqstar_p50",
        "h_p50",
        "ks_limit",
        "ks_limit_se",
        "energy_limit",
        "face_off_fraction",
        "tie_fraction",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for w in &cfg.estimators.smoothness_windows {
        cols.push(format!("gap_w{w}"));
    }
    for i in 0..n {
        cols.push(format!("u_mean_{}", i + 1));
        cols.push(format!("u_se_{}", i + 1));
    }
    cols.push("drift_tail_mean".into());
    cols.push("drift_tail_se".into());
    cols.push("stability_ratio".into());
    cols.push("runtime_s".into());
    cols.push("checksum".into());
    cols
}

/// The deterministic fields of one row, in column order, excluding the
/// trailing runtime and checksum.
pub fn row_fields(fixture: &str, cfg: &SweepConfig, m: &RunMetrics) -> Vec<String> {
    let mut f = vec![
        fixture.to_string(),
        fmt_f64(m.epsilon),
        m.replication.to_string(),
        m.seed.to_string(),
        m.horizon.to_string(),
        m.burn_in.to_string(),
        m.thin.to_string(),
        m.n_samples.to_string(),
        fmt_f64(m.y_mean_norm),
        fmt_f64(m.y_mean_norm_se),
        fmt_f64(m.gq_star_norm.q50),
        fmt_f64(m.h_distance.q50),
        fmt_f64(m.ks_vs_limit.as_ref().map_or(f64::NAN, |k| k.max)),
        fmt_f64(m.ks_vs_limit.as_ref().map_or(f64::NAN, |k| k.se)),
        fmt_f64(m.energy_vs_limit.unwrap_or(f64::NAN)),
        fmt_f64(m.face_off_fraction),
        fmt_f64(m.tie_fraction),
    ];
    for g in &m.smoothness {
        f.push(fmt_f64(g.max));
    }
    for w in &m.wasted {
        f.push(fmt_f64(w.mean));
        f.push(fmt_f64(w.se));
    }
    f.push(fmt_f64(m.drift_tail.mean_increment));
    f.push(fmt_f64(m.drift_tail.se));
    f.push(fmt_f64(
        m.stability_ratios.last().copied().unwrap_or(f64::NAN),
    ));
    debug_assert_eq!(f.len() + 2, csv_columns(cfg).len());
    f
}

/// Complete CSV line: deterministic fields, runtime, checksum over the
/// deterministic fields only (so reruns are byte-identical modulo runtime).
pub fn render_row(fixture: &str, cfg: &SweepConfig, m: &RunMetrics) -> String {
    let fields = row_fields(fixture, cfg, m);
    let joined = fields.join(",");
    let checksum = fnv1a64(joined.as_bytes());
    format!("{joined},{},{checksum:016x}", fmt_f64(m.runtime_s))
}

/// Verifies a CSV line's checksum; returns the deterministic fields on
/// success.
pub fn verify_row(line: &str) -> Option<Vec<String>> {
    let parts: Vec<&str> = line.split(',').collect();
    if parts.len() < 3 {
        return None;
    }
    let checksum = u64::from_str_radix(parts[parts.len() - 1], 16).ok()?;
    let deterministic = &parts[..parts.len() - 2];
    let joined = deterministic.join(",");
    if fnv1a64(joined.as_bytes()) == checksum {
        Some(deterministic.iter().map(|s| s.to_string()).collect())
    } else {
        None
    }
}

/// Machine-readable schema for `rows.csv`.
pub fn schema_json(cfg: &SweepConfig) -> serde_json::Value {
    let descriptions = |name: &str| -> String {
        match name {
            "fixture" => "config name".into(),
            "epsilon" => "distance of the load point from the boundary along nu'".into(),
            "replication" => "replication index (0-based)".into(),
            "seed" => "derived per-task seed".into(),
            "horizon" => "simulated slots".into(),
            "burn_in" => "slots discarded before sampling".into(),
            "thin" => "sampling stride after burn-in".into(),
            "n_samples" => "stationary samples retained".into(),
            "y_mean_norm" => "mean norm of the queue-differential samples".into(),
            "y_mean_norm_se" => "batch-means standard error of y_mean_norm".into(),
            "gqstar_p50" => "median norm of the cone projection of gamma*Q".into(),
            "h_p50" => "median distance of the cone projection from the cone's relative boundary".into(),
            "ks_limit" => "projected two-sample KS distance to the limit-chain samples".into(),
            "ks_limit_se" => "conservative standard error of ks_limit".into(),
            "energy_limit" => "energy distance to the limit-chain samples (strided subsample)".into(),
            "face_off_fraction" => "fraction of slots whose decision mean is off the outer face".into(),
            "tie_fraction" => "fraction of slots with a non-unique argmax".into(),
            "drift_tail_mean" => "mean one-step increment of ||sqrt(gamma) Q|| above its 90th percentile".into(),
            "drift_tail_se" => "standard error of drift_tail_mean".into(),
            "stability_ratio" => "ratio of the last two dyadic window means of ||Q||".into(),
            "runtime_s" => "wall-clock seconds (excluded from the checksum)".into(),
            "checksum" => "fnv1a-64 over the deterministic fields, hex".into(),
            other => {
                if let Some(w) = other.strip_prefix("gap_w") {
                    format!("max over flows of the zero-service probability for windows of {w} slots")
                } else if other.starts_with("u_mean_") {
                    "time-average wasted service for the flow".into()
                } else if other.starts_with("u_se_") {
                    "batch-means standard error of the wasted-service mean".into()
                } else {
                    String::new()
                }
            }
        }
    };
    let cols: Vec<serde_json::Value> = csv_columns(cfg)
        .iter()
        .map(|c| json!({"name": c, "description": descriptions(c)}))
        .collect();
    json!({
        "file": "rows.csv",
        "notes": "floats carry 17 significant digits; decision indices are 0-based",
        "columns": cols,
    })
}
