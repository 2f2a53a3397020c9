//! Dispatch a validated config to the library and write artifacts.
//!
//! All file writes go through a write-then-rename so an interrupted run
//! never leaves a truncated report behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use ctrwlab::fracdiff::{
    estimate_density, msd_curve, sample_positions, verify_fractional_moment_equation,
    MomentCheckOpts, SdeCoeffs,
};
use ctrwlab::lab::{
    check_counting_bound, run_exponential_experiment, run_germano_experiment,
    run_theorem1_experiment, run_theorem2_experiment, ExperimentIntegrand, ExperimentOpts,
    ExperimentReport, PerNStat,
};
use ctrwlab::RngStream;

use crate::config::ExperimentConfig;

/// Error classes the process exit code distinguishes.
#[derive(Debug)]
pub enum RunError {
    /// Numeric failure during simulation (exit 3).
    Numeric(String),
    /// Anything else surfacing from the library (exit 2).
    Invalid(String),
}

impl From<ctrwlab::Error> for RunError {
    fn from(e: ctrwlab::Error) -> Self {
        match e {
            ctrwlab::Error::Numeric(msg) => RunError::Numeric(msg),
            other => RunError::Invalid(other.to_string()),
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Numeric(m) => write!(f, "numeric error: {m}"),
            RunError::Invalid(m) => write!(f, "{m}"),
        }
    }
}

fn write_atomic(dir: &Path, name: &str, content: &str) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Invalid(format!("writing {name}: {e}"));
    fs::create_dir_all(dir).map_err(io)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(content.as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, dir.join(name)).map_err(io)?;
    Ok(())
}

fn dump_raw_samples(report: &ExperimentReport, dir: &Path) -> Result<(), RunError> {
    for raw in &report.raw_samples {
        let mut csv = String::with_capacity(raw.values.len() * 12 + 8);
        csv.push_str("value\n");
        for v in &raw.values {
            csv.push_str(&format!("{v}\n"));
        }
        write_atomic(dir, &format!("samples_n{}.csv", raw.n), &csv)?;
    }
    Ok(())
}

/// Execute the experiment, write its artifacts into `out_dir`, and return
/// whether the declared tolerance checks passed.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<bool, RunError> {
    let stream = RngStream::named(config.seed, &config.experiment);
    let opts = ExperimentOpts {
        ks_tol: config.ks_tol,
        ref_grid_steps: config.ref_grid_steps.unwrap_or(2048),
        op_step: config.op_step,
        keep_raw_samples: config.dump_samples.unwrap_or(false),
    };
    let replicates = config.replicates.unwrap_or(10_000);
    let t = config.t.unwrap_or(1.0);

    let report = match config.experiment.as_str() {
        "theorem1" => {
            let integrand: ExperimentIntegrand = config
                .integrand
                .as_deref()
                .unwrap_or("path")
                .parse()
                .map_err(|e: ctrwlab::Error| RunError::Invalid(e.to_string()))?;
            let n_values = config.n_values.clone().unwrap_or_else(|| vec![8, 64, 512]);
            run_theorem1_experiment(
                config.alpha.unwrap_or(2.0),
                integrand,
                &n_values,
                t,
                replicates,
                stream,
                &opts,
            )?
        }
        "theorem2" => {
            let integrand: ExperimentIntegrand = config
                .integrand
                .as_deref()
                .unwrap_or("unit")
                .parse()
                .map_err(|e: ctrwlab::Error| RunError::Invalid(e.to_string()))?;
            let n_values = config
                .n_values
                .clone()
                .unwrap_or_else(|| vec![10, 100, 1000]);
            run_theorem2_experiment(
                config.beta.unwrap_or(0.5),
                integrand,
                &n_values,
                t,
                replicates,
                stream,
                &opts,
            )?
        }
        "germano" => {
            let n_values = config
                .n_values
                .clone()
                .unwrap_or_else(|| vec![10, 100, 1000]);
            run_germano_experiment(&n_values, t, replicates, stream, &opts)?
        }
        "counting_bound" => {
            let n_values = config
                .n_values
                .clone()
                .unwrap_or_else(|| vec![10, 100, 1000]);
            check_counting_bound(
                config.beta.unwrap_or(0.5),
                t,
                &n_values,
                config.replicates.unwrap_or(100_000),
                stream,
                &opts,
            )?
        }
        "exponential" => {
            let n_values = config
                .n_values
                .clone()
                .unwrap_or_else(|| vec![32, 100, 1000]);
            run_exponential_experiment(
                config.beta.unwrap_or(0.5),
                &n_values,
                t,
                replicates,
                stream,
                &opts,
            )?
        }
        "fracdiff_msd" => run_msd(config, stream, out_dir)?,
        "fracdiff_pde" => {
            let report = verify_fractional_moment_equation(
                config.beta.unwrap_or(0.5),
                &config.times.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]),
                config.replicates.unwrap_or(100_000),
                stream,
                &MomentCheckOpts {
                    grid_cells: config.grid_cells.unwrap_or(2048),
                    residual_tol: config.residual_tol.unwrap_or(0.1),
                    diffusion: config.diffusion.unwrap_or(1.0),
                    op_step: config.op_step,
                },
            )?;
            write_atomic(out_dir, "msd.csv", &msd_csv_from_report(&report))?;
            report
        }
        other => return Err(RunError::Invalid(format!("unknown experiment {other:?}"))),
    };

    if config.dump_samples.unwrap_or(false) {
        dump_raw_samples(&report, out_dir)?;
    }
    write_atomic(out_dir, "report.json", &report.to_json_string())?;
    Ok(report.pass)
}

fn msd_csv_from_report(report: &ExperimentReport) -> String {
    let mut csv = String::from("t,msd,se\n");
    for stat in &report.per_n {
        if let Some(t) = stat.t {
            csv.push_str(&format!("{t},{},{}\n", stat.mean, stat.se));
        }
    }
    csv
}

fn run_msd(
    config: &ExperimentConfig,
    stream: RngStream,
    out_dir: &Path,
) -> Result<ExperimentReport, RunError> {
    let beta = config.beta.unwrap_or(0.5);
    let times = config
        .times
        .clone()
        .unwrap_or_else(|| (-4..=4).map(|k| 2f64.powi(k)).collect());
    let replicates = config.replicates.unwrap_or(100_000);
    let slope_tol = config.slope_tol.unwrap_or(0.05);
    let level = config.diffusion.unwrap_or(1.0);
    let zero = |_: f64| 0.0;
    let constant = move |_: f64| level;
    let coeffs = SdeCoeffs {
        drift: &zero,
        diffusion: &constant,
        x0: 0.0,
        beta,
    };
    let curve = msd_curve(&coeffs, &times, replicates, config.op_step, stream)?;

    let mut per_n = Vec::with_capacity(curve.points.len());
    for (k, p) in curve.points.iter().enumerate() {
        let mut stat = PerNStat::new(
            k as u64 + 1,
            None,
            p.msd,
            p.se * p.se * replicates as f64,
            p.se,
        );
        stat.t = Some(p.t);
        per_n.push(stat);
    }
    let mut summary = std::collections::BTreeMap::new();
    summary.insert("slope_expected".into(), beta);
    summary.insert("slope_tol".into(), slope_tol);
    let pass = match curve.slope {
        Some(slope) => {
            summary.insert("slope".into(), slope);
            summary.insert("slope_err".into(), (slope - beta).abs());
            (slope - beta).abs() <= slope_tol
        }
        None => false,
    };

    if let Some(bins) = config.bins {
        let t_last = *times.last().expect("validated nonempty");
        let positions = sample_positions(
            &coeffs,
            t_last,
            replicates,
            config.op_step,
            stream.substream(u64::MAX),
        )?;
        let density = estimate_density(&positions, bins)?;
        let mut csv = String::new();
        let mut buf = Vec::new();
        density
            .write_csv(&mut buf)
            .map_err(|e| RunError::Invalid(format!("density csv: {e}")))?;
        csv.push_str(std::str::from_utf8(&buf).expect("csv is utf-8"));
        write_atomic(out_dir, "density.csv", &csv)?;
    }

    let mut msd_csv = Vec::new();
    curve
        .write_csv(&mut msd_csv)
        .map_err(|e| RunError::Invalid(format!("msd csv: {e}")))?;
    write_atomic(
        out_dir,
        "msd.csv",
        std::str::from_utf8(&msd_csv).expect("csv is utf-8"),
    )?;

    Ok(ExperimentReport {
        experiment: "fracdiff_msd".into(),
        params: serde_json::json!({
            "beta": beta,
            "times": times,
            "replicates": replicates,
            "slope_tol": slope_tol,
            "diffusion": level,
            "stream_id": stream.stream_id,
        }),
        seed: stream.seed,
        per_n,
        summary,
        pass,
        raw_samples: Vec::new(),
    })
}
