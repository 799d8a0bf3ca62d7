//! Statistical layer: drift variance, validation scaling, Wilson and
//! bootstrap intervals, Pearson correlation, tiering and deployment
//! recommendations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::canonical::Digest;

/// Reference variance the scaling factor is normalized against.
pub const SIGMA2_REF: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("value out of range: {0}")]
    Range(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub fn drift_rate(dec_det: f64) -> f64 {
    1.0 - dec_det
}

/// Population variance (divides by the number of configurations).
pub fn drift_variance(deltas: &[f64]) -> Result<f64, StatsError> {
    if deltas.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if deltas.iter().all(|d| *d == deltas[0]) {
        return Ok(0.0);
    }
    let n = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    Ok(deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n)
}

/// φ = 1 + σ²_drift / σ²_ref.
pub fn scaling_factor(sigma2_drift: f64) -> f64 {
    1.0 + sigma2_drift / SIGMA2_REF
}

/// ⌈(σ_drift/ε)² · φ⌉, never below one.
pub fn validation_sample_size(sigma_drift: f64, epsilon: f64, phi: f64) -> Result<u64, StatsError> {
    if !(epsilon > 0.0) {
        return Err(StatsError::Range(format!("epsilon must be positive, got {epsilon}")));
    }
    let raw = (sigma_drift / epsilon).powi(2) * phi;
    // Guard against representation noise such as 16·3.7 = 59.2000…01.
    let snapped = (raw * 1e9).round() / 1e9;
    Ok((snapped.ceil() as u64).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Two-sided standard-normal quantile for a confidence level.
pub fn z_for_confidence(confidence: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// Wilson score interval without continuity correction, clamped to [0, 1].
pub fn wilson_interval(successes: u64, n: u64, confidence: f64) -> Result<Interval, StatsError> {
    if n == 0 || successes > n {
        return Err(StatsError::Range(format!("{successes}/{n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::Range(format!("confidence {confidence}")));
    }
    let z = z_for_confidence(confidence);
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let mut lo = (centre - half).max(0.0);
    let mut hi = (centre + half).min(1.0);
    // Endpoints are exact at the boundaries.
    if successes == 0 {
        lo = 0.0;
    }
    if successes == n {
        hi = 1.0;
    }
    Ok(Interval { lo, hi })
}

/// Seed for resample `index`, so resamples can be drawn in any order.
fn resample_seed(seed: u64, index: u64) -> u64 {
    let mut buf = [0u8; 16];
    buf[..8].copy_from_slice(&seed.to_be_bytes());
    buf[8..].copy_from_slice(&index.to_be_bytes());
    Digest::of(&buf).prefix_u64()
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap interval of `statistic` over with-replacement resamples.
pub fn bootstrap_ci<F>(
    values: &[f64],
    statistic: F,
    resamples: usize,
    seed: u64,
    confidence: f64,
) -> Result<Interval, StatsError>
where
    F: Fn(&[f64]) -> f64,
{
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if resamples < 100 {
        return Err(StatsError::Range(format!("resamples must be ≥ 100, got {resamples}")));
    }
    let mut stats = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; values.len()];
    for i in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(resample_seed(seed, i as u64));
        for slot in buf.iter_mut() {
            *slot = values[rng.random_range(0..values.len())];
        }
        stats.push(statistic(&buf));
    }
    stats.sort_by(f64::total_cmp);
    let alpha = 1.0 - confidence;
    Ok(Interval {
        lo: quantile_sorted(&stats, alpha / 2.0),
        hi: quantile_sorted(&stats, 1.0 - alpha / 2.0),
    })
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::Range(format!("length mismatch {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(StatsError::Range("need at least three pairs".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Tier1,
    Tier2,
    Tier3,
    /// API-served configuration below the Tier 1 bar.
    Frontier,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Tier1 => "Tier1",
            Tier::Tier2 => "Tier2",
            Tier::Tier3 => "Tier3",
            Tier::Frontier => "Frontier",
        }
    }
}

pub const TIER1_MIN: f64 = 0.95;
pub const TIER2_MIN: f64 = 0.50;

/// Tier by case-level decision determinism. The band between Tier 3's
/// ceiling (0.20) and Tier 2's floor (0.50) goes to Tier 3, and (0.90, 0.95)
/// stays in Tier 2.
pub fn classify_tier(case_level_dec_det: f64) -> Tier {
    if case_level_dec_det >= TIER1_MIN {
        Tier::Tier1
    } else if case_level_dec_det >= TIER2_MIN {
        Tier::Tier2
    } else {
        Tier::Tier3
    }
}

/// As [`classify_tier`], flagging API-served configurations that miss Tier 1
/// (but are not Tier 3) as frontier-class.
pub fn classify_with_provenance(case_level_dec_det: f64, api_provenance: bool) -> Tier {
    match classify_tier(case_level_dec_det) {
        Tier::Tier2 if api_provenance => Tier::Frontier,
        t => t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationKind {
    DeployStandard,
    DeployGuardrails,
    HitlRequired,
    SandboxOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub kind: RecommendationKind,
    pub tier: Tier,
    /// Share of trajectories routed to human review.
    pub audit_sample_fraction: f64,
    pub slo: &'static str,
    pub validation: &'static str,
}

pub fn recommend_deployment(tier: Tier, hitl_available: bool) -> Recommendation {
    match tier {
        Tier::Tier1 => Recommendation {
            kind: RecommendationKind::DeployStandard,
            tier,
            audit_sample_fraction: 0.05,
            slo: "100% trajectory determinism at T=0.0",
            validation: "standard sample sizes (phi = 1.0x)",
        },
        Tier::Tier2 => Recommendation {
            kind: RecommendationKind::DeployGuardrails,
            tier,
            audit_sample_fraction: 0.20,
            slo: "95% trajectory determinism; schema-constrained tools only",
            validation: "increased samples (phi = 1.8x)",
        },
        Tier::Frontier if hitl_available => Recommendation {
            kind: RecommendationKind::HitlRequired,
            tier,
            audit_sample_fraction: 1.0,
            slo: "not applicable; human approval of every decision",
            validation: "per-decision validation",
        },
        Tier::Frontier | Tier::Tier3 => Recommendation {
            kind: RecommendationKind::SandboxOnly,
            tier,
            audit_sample_fraction: 1.0,
            slo: "do not deploy for compliance-critical tasks",
            validation: "not viable (phi = 3.7x makes validation impractical)",
        },
    }
}
