//! Structured experiment results.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Statistics for one scale index `n` (or, for the fractional-diffusion
/// experiments, one checked grid time).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerNStat {
    pub n: u64,
    /// KS distance of the ensemble against its reference law, when one is
    /// declared for the experiment.
    pub ks: Option<f64>,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    /// KS distance of the scaled counting process against `E(t)`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ks_counting: Option<f64>,
    /// Physical time of this entry, for time-indexed experiments.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    /// Residual of the identity this entry checks.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual: Option<f64>,
}

impl PerNStat {
    pub fn new(n: u64, ks: Option<f64>, mean: f64, variance: f64, se: f64) -> Self {
        Self {
            n,
            ks,
            mean,
            variance,
            se,
            ks_counting: None,
            t: None,
            residual: None,
        }
    }
}

/// Raw ensemble values of one scale index, kept only on request.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RawSamples {
    pub n: u64,
    pub values: Vec<f64>,
}

/// A reproducible experiment result: fully determined by its parameters
/// and seed, serializable, byte-stable across reruns and thread counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub per_n: Vec<PerNStat>,
    /// Named scalar diagnostics (empirical bounds, trend flags, ratios).
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub summary: BTreeMap<String, f64>,
    pub pass: bool,
    /// Raw per-`n` ensembles; populated only when the caller asked to keep
    /// them, and never part of the JSON document.
    #[serde(skip)]
    pub raw_samples: Vec<RawSamples>,
}

impl ExperimentReport {
    /// Canonical JSON rendering: pretty-printed, sorted object keys,
    /// trailing newline, LF line endings.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
