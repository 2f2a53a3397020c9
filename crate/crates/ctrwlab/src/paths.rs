//! CTRW sample paths as cadlag step functions.
//!
//! A walk is a sequence of jumps `xi_i` separated by waiting times `tau_i`.
//! With `T(n) = tau_1 + ... + tau_n` the time of the n-th jump and
//! `N(t) = max{n >= 0 : T(n) <= t}` the number of jumps by time `t`, the
//! path value is the sum of the jumps up to `t`:
//!
//! ```text
//! X(t) = S(N(t)) = sum_{i <= N(t)} xi_i
//! ```
//!
//! Evaluation is right-continuous: a jump is included exactly at its jump
//! time. Three scaled families are provided:
//!
//! * `StableJumpsUnitWaits`: jumps `xi_k / n^(1/alpha)` at deterministic
//!   times `k/n`, for mean-zero jumps attracted to an alpha-stable law,
//!   alpha in (1, 2].
//! * `Subdiffusive`: jumps `xi_i / (c n^(beta/2))` at times `T(k)/n` with
//!   strictly beta-stable waits, beta in (0, 1), and jump variance `c^2`.
//! * `CompoundPoisson`: exponential waits at rate `lambda`, jumps
//!   `xi_i / sqrt(n)`, observed on the accelerated clock `nt`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kahan::Kahan;
use crate::stable_rng::{
    draw_exponential, draw_normal, draw_one_sided, draw_rademacher, RngStream,
};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::io::{self, Write};

/// Mean-zero jump-size laws used by the scaled families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum JumpLaw {
    /// +1/-1 with probability 1/2; variance 1.
    Rademacher,
    /// Standard normal; variance 1.
    Normal,
    /// `epsilon * U^(-1/alpha)` with Rademacher sign: symmetric with tail
    /// `P(|xi| > x) = x^(-alpha)` for `x >= 1`, attracted to the symmetric
    /// alpha-stable law for alpha < 2.
    SymmetrizedPareto { alpha: f64 },
    /// Point mass at the given value (mean zero only when the value is 0).
    Degenerate { value: f64 },
}

impl JumpLaw {
    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Degenerate { value } => *value,
            _ => 0.0,
        }
    }

    /// Standard deviation; infinite for Pareto tails with alpha <= 2.
    pub fn std_dev(&self) -> f64 {
        match self {
            JumpLaw::Rademacher | JumpLaw::Normal => 1.0,
            JumpLaw::SymmetrizedPareto { .. } => f64::INFINITY,
            JumpLaw::Degenerate { value } => value.abs(),
        }
    }

    /// Tail index of the domain of attraction this law belongs to.
    pub fn attraction_index(&self) -> f64 {
        match self {
            JumpLaw::SymmetrizedPareto { alpha } => *alpha,
            _ => 2.0,
        }
    }

    /// Scale of the stable limit of `n^(-1/alpha) * S(n)` under this law.
    ///
    /// Finite-variance laws fall under the normal limit with
    /// `sigma = c / sqrt(2)` (so the alpha = 2 stable with that scale has
    /// variance `c^2`). The symmetrized Pareto tail constant is matched
    /// through `C_alpha = (1 - alpha) / (Gamma(2 - alpha) cos(pi alpha / 2))`,
    /// giving `sigma = C_alpha^(-1/alpha)`.
    pub fn limit_stable_scale(&self) -> f64 {
        match self {
            JumpLaw::Rademacher | JumpLaw::Normal => 1.0 / 2f64.sqrt(),
            JumpLaw::Degenerate { value } => value.abs() / 2f64.sqrt(),
            JumpLaw::SymmetrizedPareto { alpha } => {
                let a = *alpha;
                let c_alpha = (1.0 - a) / (gamma(2.0 - a) * (PI * a / 2.0).cos());
                c_alpha.powf(-1.0 / a)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let JumpLaw::SymmetrizedPareto { alpha } = self {
            if !(*alpha > 0.0 && *alpha < 2.0) {
                return Err(Error::Parameter(format!(
                    "symmetrized Pareto tail index must lie in (0, 2), got {alpha}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::Rademacher => draw_rademacher(rng),
            JumpLaw::Normal => draw_normal(rng),
            JumpLaw::SymmetrizedPareto { alpha } => {
                let sign = draw_rademacher(rng);
                let u: f64 = loop {
                    let u: f64 = rng.gen();
                    if u > 0.0 {
                        break u;
                    }
                };
                sign * u.powf(-1.0 / alpha)
            }
            JumpLaw::Degenerate { value } => *value,
        }
    }
}

/// A cadlag step path: ordered jump times with jump sizes, valid on
/// `[0, horizon]`.
///
/// Immutable after construction; evaluation never mutates. Prefix sums are
/// precomputed with compensated accumulation so `X(t)`, `S(n)`, and the
/// left limits at jump times are all consistent reads of the same array.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpPath {
    jump_times: Vec<f64>,
    jump_sizes: Vec<f64>,
    /// prefix[i] = xi_1 + ... + xi_i, prefix[0] = 0.
    prefix: Vec<f64>,
    horizon: f64,
}

impl JumpPath {
    /// Build a path from absolute jump times.
    pub fn new(jump_times: Vec<f64>, jump_sizes: Vec<f64>, horizon: f64) -> Result<Self> {
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::Shape(format!(
                "{} jump times vs {} jump sizes",
                jump_times.len(),
                jump_sizes.len()
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let mut prev = 0.0f64;
        for &t in &jump_times {
            if t.is_nan() || t < prev {
                return Err(Error::Shape(format!(
                    "jump times must be nondecreasing and nonnegative (saw {t} after {prev})"
                )));
            }
            prev = t;
        }
        if let Some(&last) = jump_times.last() {
            if last > horizon {
                return Err(Error::Shape(format!(
                    "jump time {last} exceeds horizon {horizon}"
                )));
            }
        }
        let mut prefix = Vec::with_capacity(jump_sizes.len() + 1);
        prefix.push(0.0);
        let mut acc = Kahan::new();
        for &s in &jump_sizes {
            acc.add(s);
            prefix.push(acc.value());
        }
        Ok(Self {
            jump_times,
            jump_sizes,
            prefix,
            horizon,
        })
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_sizes(&self) -> &[f64] {
        &self.jump_sizes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Total number of jumps on `[0, horizon]`.
    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            return Err(Error::Domain(format!(
                "time {t} outside the path's validity interval [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `N(t)`: the number of jumps at or before `t`.
    pub fn count_jumps(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        Ok(self.jump_times.partition_point(|&u| u <= t))
    }

    /// `X(t)`: right-continuous evaluation, including any jump exactly at `t`.
    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(self.prefix[self.count_jumps(t)?])
    }

    /// `X(t-)`: left limit, excluding all jumps at clock time `t`.
    pub fn value_before(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.prefix[self.jump_times.partition_point(|&u| u < t)])
    }

    /// `S(n)`: position after the first `n` jumps.
    pub fn partial_sum(&self, n: usize) -> f64 {
        self.prefix[n.min(self.len())]
    }

    /// Path value just before the i-th stored jump (0-based), in storage
    /// order: a later coincident jump sees the earlier one.
    pub(crate) fn prefix_value(&self, i: usize) -> f64 {
        self.prefix[i]
    }

    /// CSV dump with columns `(jump_time, jump_size)`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "jump_time,jump_size")?;
        for (t, s) in self.jump_times.iter().zip(&self.jump_sizes) {
            writeln!(w, "{t},{s}")?;
        }
        Ok(())
    }
}

/// Build a CTRW path from waiting times and jumps (the raw, unscaled walk).
///
/// Jump times are the partial sums `T(n) = tau_1 + ... + tau_n`; any jump
/// whose time exceeds `horizon` is discarded. Zero waits are permitted and
/// keep coincident jumps as separate entries in sequence order.
pub fn build_ctrw(waits: &[f64], jumps: &[f64], horizon: f64) -> Result<JumpPath> {
    if waits.len() != jumps.len() {
        return Err(Error::Shape(format!(
            "{} waits vs {} jumps",
            waits.len(),
            jumps.len()
        )));
    }
    let mut times = Vec::new();
    let mut sizes = Vec::new();
    let mut clock = Kahan::new();
    for (&w, &x) in waits.iter().zip(jumps) {
        if w.is_nan() || w < 0.0 {
            return Err(Error::Domain(format!("negative waiting time {w}")));
        }
        clock.add(w);
        let t = clock.value();
        if t > horizon {
            break;
        }
        times.push(t);
        sizes.push(x);
    }
    JumpPath::new(times, sizes, horizon)
}

/// `N(t)` of a path; the operation form of [`JumpPath::count_jumps`].
pub fn count_jumps(path: &JumpPath, t: f64) -> Result<usize> {
    path.count_jumps(t)
}

/// The scaled CTRW families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CtrwFamily {
    /// Deterministic waits `1/n`; jumps `xi_k / n^(1/alpha)` at times `k/n`.
    StableJumpsUnitWaits { alpha: f64, jumps: JumpLaw },
    /// Strictly beta-stable waits; jumps `xi_i / (c n^(beta/2))` at `T(k)/n`.
    Subdiffusive { beta: f64, jumps: JumpLaw },
    /// Exponential(rate) waits; jumps `xi_i / sqrt(n)` on the clock `nt`.
    CompoundPoisson { rate: f64, jumps: JumpLaw },
}

impl CtrwFamily {
    pub fn jump_law(&self) -> JumpLaw {
        match self {
            CtrwFamily::StableJumpsUnitWaits { jumps, .. }
            | CtrwFamily::Subdiffusive { jumps, .. }
            | CtrwFamily::CompoundPoisson { jumps, .. } => *jumps,
        }
    }
}

/// A scaled-family descriptor: family, scale index `n`, and horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtrwSpec {
    pub family: CtrwFamily,
    pub n: u64,
    pub horizon: f64,
}

impl CtrwSpec {
    pub fn new(family: CtrwFamily, n: u64, horizon: f64) -> Result<Self> {
        let spec = Self { family, n, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("scale index n must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Parameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        match self.family {
            CtrwFamily::StableJumpsUnitWaits { alpha, jumps } => {
                jumps.validate()?;
                if !(alpha > 1.0 && alpha <= 2.0) {
                    return Err(Error::Parameter(format!(
                        "stable-jump family needs alpha in (1, 2], got {alpha}"
                    )));
                }
                let idx = jumps.attraction_index();
                if (idx - alpha).abs() > 1e-12 {
                    return Err(Error::Parameter(format!(
                        "jump law is attracted to index {idx}, family scales by alpha = {alpha}"
                    )));
                }
            }
            CtrwFamily::Subdiffusive { beta, jumps } => {
                jumps.validate()?;
                crate::stable_rng::check_beta(beta)?;
                if !jumps.std_dev().is_finite() {
                    return Err(Error::Parameter(
                        "subdiffusive family needs a finite-variance jump law".into(),
                    ));
                }
            }
            CtrwFamily::CompoundPoisson { rate, jumps } => {
                jumps.validate()?;
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "Poisson rate must be positive, got {rate}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sample one path of a scaled CTRW family.
///
/// Waits and jumps come from disjoint substreams of `stream`, realizing the
/// independence of the two sequences. Waits are generated lazily until the
/// running jump time passes the horizon.
pub fn sample_scaled_ctrw(spec: &CtrwSpec, stream: RngStream) -> Result<JumpPath> {
    spec.validate()?;
    let n = spec.n as f64;
    let horizon = spec.horizon;
    let mut wait_rng = stream.substream(0).rng();
    let mut jump_rng = stream.substream(1).rng();

    match spec.family {
        CtrwFamily::StableJumpsUnitWaits { alpha, jumps } => {
            let scale = n.powf(1.0 / alpha);
            let mut times = Vec::new();
            let mut sizes = Vec::new();
            let mut k = 1u64;
            loop {
                let t = k as f64 / n;
                if t > horizon {
                    break;
                }
                times.push(t);
                sizes.push(jumps.draw(&mut jump_rng) / scale);
                k += 1;
            }
            JumpPath::new(times, sizes, horizon)
        }
        CtrwFamily::Subdiffusive { beta, jumps } => {
            // Jump times T(k)/n, i.e. raw waits divided by n.
            let c = normalizing_sigma(jumps);
            let scale = c * n.powf(beta / 2.0);
            let mut times = Vec::new();
            let mut sizes = Vec::new();
            let mut clock = Kahan::new();
            loop {
                clock.add(draw_one_sided(beta, &mut wait_rng) / n);
                let t = clock.value();
                if t > horizon {
                    break;
                }
                times.push(t);
                sizes.push(jumps.draw(&mut jump_rng) / scale);
            }
            JumpPath::new(times, sizes, horizon)
        }
        CtrwFamily::CompoundPoisson { rate, jumps } => {
            let scale = n.sqrt();
            let mut times = Vec::new();
            let mut sizes = Vec::new();
            let mut clock = Kahan::new();
            loop {
                clock.add(draw_exponential(rate, &mut wait_rng) / n);
                let t = clock.value();
                if t > horizon {
                    break;
                }
                times.push(t);
                sizes.push(jumps.draw(&mut jump_rng) / scale);
            }
            JumpPath::new(times, sizes, horizon)
        }
    }
}

/// Normalization used in the subdiffusive family; degenerate-zero jumps
/// leave the path identically zero rather than dividing by zero.
fn normalizing_sigma(law: JumpLaw) -> f64 {
    let c = law.std_dev();
    if c == 0.0 {
        1.0
    } else {
        c
    }
}

/// Per-time sample mean of `X^n(t)` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MartingalePoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
}

/// Monte Carlo diagnostic of the martingale property of a mean-zero CTRW.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleDiagnostic {
    pub points: Vec<MartingalePoint>,
    /// Sample covariance of `X(t_1)` with `X(t_last) - X(t_1)`.
    pub increment_covariance: f64,
    pub increment_covariance_se: f64,
}

/// Estimate `E[X^n(t)]` on a time grid plus the covariance of
/// nonoverlapping increments. Requires a mean-zero jump law.
pub fn martingale_diagnostic(
    spec: &CtrwSpec,
    times: &[f64],
    replicates: usize,
    stream: RngStream,
) -> Result<MartingaleDiagnostic> {
    spec.validate()?;
    if spec.family.jump_law().mean() != 0.0 {
        return Err(Error::Precondition(
            "martingale diagnostic requires a mean-zero jump law".into(),
        ));
    }
    if times.is_empty() || replicates == 0 {
        return Err(Error::Parameter(
            "need at least one time point and one replicate".into(),
        ));
    }
    let mut prev = 0.0;
    for &t in times {
        if !(t > 0.0 && t <= spec.horizon && t >= prev) {
            return Err(Error::Domain(format!(
                "diagnostic times must increase within (0, {}], got {t}",
                spec.horizon
            )));
        }
        prev = t;
    }

    let values = crate::lab::par_collect(replicates, |r| {
        let path = sample_scaled_ctrw(spec, stream.substream(r)).expect("validated spec");
        times
            .iter()
            .map(|&t| path.value(t).expect("t within horizon"))
            .collect::<Vec<f64>>()
    });

    let m = replicates as f64;
    let mut points = Vec::with_capacity(times.len());
    for (j, &t) in times.iter().enumerate() {
        let mean = values.iter().map(|row| row[j]).sum::<f64>() / m;
        let var = if replicates > 1 {
            values
                .iter()
                .map(|row| (row[j] - mean).powi(2))
                .sum::<f64>()
                / (m - 1.0)
        } else {
            0.0
        };
        points.push(MartingalePoint {
            t,
            mean,
            se: (var / m).sqrt(),
        });
    }

    let (cov, cov_se) = if times.len() >= 2 && replicates > 1 {
        let last = times.len() - 1;
        let a_bar = points[0].mean;
        let b_bar = points[last].mean - a_bar;
        let products: Vec<f64> = values
            .iter()
            .map(|row| (row[0] - a_bar) * ((row[last] - row[0]) - b_bar))
            .collect();
        let cov = products.iter().sum::<f64>() / (m - 1.0);
        let p_mean = products.iter().sum::<f64>() / m;
        let p_var = products.iter().map(|p| (p - p_mean).powi(2)).sum::<f64>() / (m - 1.0);
        (cov, (p_var / m).sqrt())
    } else {
        (0.0, 0.0)
    };

    Ok(MartingaleDiagnostic {
        points,
        increment_covariance: cov,
        increment_covariance_se: cov_se,
    })
}
