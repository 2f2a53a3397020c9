//! Monte Carlo convergence laboratory.
//!
//! Ensembles of pathwise functionals are compared against their limit laws
//! through empirical CDFs and Kolmogorov-Smirnov distances. Each named
//! experiment fixes an evaluation time, sweeps the scale index `n`, and
//! reports per-`n` statistics together with pass/fail flags against its
//! declared tolerances.
//!
//! Replicates fan out over a worker pool with per-replicate substreams and
//! are gathered in replicate-index order, so a report depends only on its
//! configuration and seed, never on scheduling.

mod empirical;
mod experiments;
mod report;

pub use empirical::{ks_distance, EmpiricalDistribution, KsReference};
pub use experiments::{
    check_counting_bound, derived_ks_tolerance, run_exponential_experiment, run_germano_experiment,
    run_theorem1_experiment, run_theorem2_experiment, ExperimentIntegrand, ExperimentOpts,
};
pub use report::{ExperimentReport, PerNStat, RawSamples};

use rayon::prelude::*;

/// Map replicate indices to values in parallel, gathered in index order.
pub(crate) fn par_collect<T, F>(replicates: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..replicates as u64)
        .into_par_iter()
        .map(f)
        .collect::<Vec<T>>()
}

/// Sample mean, variance (0 for a single replicate), and standard error.
pub(crate) fn summarize(samples: &[f64]) -> (f64, f64, f64) {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let variance = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (mean, variance, (variance / m).sqrt())
}
