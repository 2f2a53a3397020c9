//! Experiment configuration: a single flat JSON document, with `key=value`
//! command-line overrides applied by field name before validation.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Flat experiment description. Unknown fields are rejected at parse time;
/// fields irrelevant to the chosen experiment are rejected at validation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_grid_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_samples: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

/// Experiment names, alphabetized; the `list` subcommand prints these.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    (
        "counting_bound",
        "boundedness of E[N(nt)/n^beta] across scale decades and its t^beta scaling",
    ),
    (
        "exponential",
        "stochastic exponential of the subdiffusive walk against exp{B(E_t) - E_t/2}",
    ),
    (
        "fracdiff_msd",
        "particle-tracked mean squared displacement and its log-log slope (~ beta)",
    ),
    (
        "fracdiff_pde",
        "Caputo-derivative check of the second moment of the time-fractional forward equation",
    ),
    (
        "germano",
        "self-integral of the scaled compound Poisson walk against the (B_t^2 - t)/2 law",
    ),
    (
        "theorem1",
        "integrals driven by the deterministic-wait stable-jump walk against stable Levy limits",
    ),
    (
        "theorem2",
        "integrals driven by the beta-stable-wait walk against time-changed Brownian limits",
    ),
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Load a config file and fold in overrides. `seed` and `out` flags win
/// over both the file and `key=value` overrides.
pub fn load(
    path: &Path,
    overrides: &[String],
    seed_flag: Option<u64>,
    out_flag: Option<&str>,
) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read config {}: {e}", path.display())))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| err(format!("config {} is not valid JSON: {e}", path.display())))?;
    let map = doc
        .as_object_mut()
        .ok_or_else(|| err("config must be a JSON object"))?;

    for pair in overrides {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| err(format!("override {pair:?} is not of the form key=value")))?;
        // Values parse as JSON when they can (numbers, arrays, booleans)
        // and fall back to bare strings.
        let parsed = serde_json::from_str::<serde_json::Value>(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        map.insert(key.to_string(), parsed);
    }
    if let Some(seed) = seed_flag {
        map.insert("seed".into(), serde_json::json!(seed));
    }
    if let Some(out) = out_flag {
        map.insert("out_dir".into(), serde_json::json!(out));
    }

    let config: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| err(format!("invalid config: {e}")))?;
    validate(&config)?;
    Ok(config)
}

/// Check every provided field against the target experiment before any
/// sampling happens: ranges, required combinations, and relevance.
pub fn validate(config: &ExperimentConfig) -> Result<(), ConfigError> {
    let relevant: &[&str] = match config.experiment.as_str() {
        "theorem1" => &[
            "alpha",
            "integrand",
            "t",
            "n_values",
            "replicates",
            "ref_grid_steps",
            "ks_tol",
            "dump_samples",
        ],
        "theorem2" => &[
            "beta",
            "integrand",
            "t",
            "n_values",
            "replicates",
            "ref_grid_steps",
            "op_step",
            "ks_tol",
            "dump_samples",
        ],
        "germano" => &["t", "n_values", "replicates", "ks_tol", "dump_samples"],
        "counting_bound" => &["beta", "t", "n_values", "replicates", "dump_samples"],
        "exponential" => &[
            "beta",
            "t",
            "n_values",
            "replicates",
            "op_step",
            "ks_tol",
            "dump_samples",
        ],
        "fracdiff_msd" => &[
            "beta",
            "times",
            "replicates",
            "op_step",
            "slope_tol",
            "bins",
            "diffusion",
        ],
        "fracdiff_pde" => &[
            "beta",
            "times",
            "replicates",
            "op_step",
            "grid_cells",
            "residual_tol",
            "diffusion",
        ],
        other => {
            return Err(err(format!(
                "unknown experiment {other:?}; run `ctrwlab list` for the catalogue"
            )))
        }
    };

    let provided: &[(&str, bool)] = &[
        ("alpha", config.alpha.is_some()),
        ("beta", config.beta.is_some()),
        ("t", config.t.is_some()),
        ("n_values", config.n_values.is_some()),
        ("replicates", config.replicates.is_some()),
        ("integrand", config.integrand.is_some()),
        ("times", config.times.is_some()),
        ("op_step", config.op_step.is_some()),
        ("bins", config.bins.is_some()),
        ("grid_cells", config.grid_cells.is_some()),
        ("ref_grid_steps", config.ref_grid_steps.is_some()),
        ("ks_tol", config.ks_tol.is_some()),
        ("slope_tol", config.slope_tol.is_some()),
        ("residual_tol", config.residual_tol.is_some()),
        ("diffusion", config.diffusion.is_some()),
        ("dump_samples", config.dump_samples.is_some()),
    ];
    for (name, present) in provided {
        if *present && !relevant.contains(name) {
            return Err(err(format!(
                "field {name:?} does not apply to experiment {:?}",
                config.experiment
            )));
        }
    }

    if let Some(alpha) = config.alpha {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(err(format!("alpha must lie in (1, 2], got {alpha}")));
        }
    }
    if let Some(beta) = config.beta {
        let upper_closed = config.experiment == "counting_bound";
        let ok = beta > 0.0
            && if upper_closed {
                beta <= 1.0
            } else {
                beta < 1.0
            };
        if !ok {
            return Err(err(format!(
                "beta out of range for {}: got {beta}",
                config.experiment
            )));
        }
    }
    if let Some(t) = config.t {
        if !(t > 0.0 && t.is_finite()) {
            return Err(err(format!("t must be positive, got {t}")));
        }
    }
    if let Some(ns) = &config.n_values {
        if ns.is_empty() || ns.contains(&0) {
            return Err(err("n_values must be nonempty positive integers"));
        }
    }
    if let Some(r) = config.replicates {
        if r == 0 {
            return Err(err("replicates must be at least 1"));
        }
    }
    if let Some(kind) = &config.integrand {
        kind.parse::<ctrwlab::lab::ExperimentIntegrand>()
            .map_err(|e| err(e.to_string()))?;
    }
    if let Some(times) = &config.times {
        let mut prev = 0.0;
        for &t in times {
            if !(t > prev && t.is_finite()) {
                return Err(err(format!(
                    "times must be strictly increasing and positive, saw {t}"
                )));
            }
            prev = t;
        }
    }
    if let Some(op) = config.op_step {
        if !(op > 0.0 && op.is_finite()) {
            return Err(err(format!("op_step must be positive, got {op}")));
        }
    }
    for (name, value) in [
        ("ks_tol", config.ks_tol),
        ("slope_tol", config.slope_tol),
        ("residual_tol", config.residual_tol),
    ] {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(err(format!("{name} must be positive, got {v}")));
            }
        }
    }
    if let Some(d) = config.diffusion {
        if !d.is_finite() {
            return Err(err(format!("diffusion must be finite, got {d}")));
        }
    }
    if let Some(bins) = config.bins {
        if bins == 0 {
            return Err(err("bins must be at least 1"));
        }
    }
    if let Some(cells) = config.grid_cells {
        if cells < 8 {
            return Err(err("grid_cells must be at least 8"));
        }
    }
    if let Some(steps) = config.ref_grid_steps {
        if steps < 2 {
            return Err(err("ref_grid_steps must be at least 2"));
        }
    }
    Ok(())
}
