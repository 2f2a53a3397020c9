//! Reference samplers for the CTRW scaling limits.
//!
//! * Brownian motion `B(t)` by Gaussian increments.
//! * Alpha-stable Levy motion `A(t)`: independent stationary increments,
//!   the increment over `dt` distributed `S_alpha(dt^(1/alpha) sigma, gamma, 0)`.
//! * The inverse `E(t)` of a beta-stable subordinator, simulated by
//!   stepping the subordinator in operational time and inverting.
//! * Time-changed Brownian motion `B(E_t)` by subordination: conditionally
//!   on `E`, Gaussian increments of variance `dE`.
//!
//! All grid processes start at 0 at time 0; inverse-subordinator and
//! time-change paths are nondecreasing in the appropriate sense and are
//! exactly constant over intervals where `E` is flat.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stable_rng::{draw_normal, draw_one_sided, draw_stable, RngStream, StableParams};
use std::io::{self, Write};

/// A process sampled on a deterministic, strictly increasing time grid
/// starting at 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl GridPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} times vs {} values",
                times.len(),
                values.len()
            )));
        }
        check_grid(&times)?;
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Value at the final grid time.
    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("grid is nonempty")
    }

    /// CSV dump with columns `(time, value)`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Shape("time grid must be nonempty".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::Shape(format!(
            "time grid must start at 0, got {}",
            grid[0]
        )));
    }
    for w in grid.windows(2) {
        if w[1].is_nan() || w[1] <= w[0] {
            return Err(Error::Shape(format!(
                "time grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Standard Brownian motion on the grid: independent Gaussian increments
/// with variance equal to the grid spacing.
pub fn sample_brownian(grid: &[f64], stream: RngStream) -> Result<GridPath> {
    check_grid(grid)?;
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        let prev = *values.last().unwrap();
        values.push(prev + dt.sqrt() * draw_normal(&mut rng));
    }
    GridPath::new(grid.to_vec(), values)
}

/// Alpha-stable Levy motion for `alpha` in (1, 2]: the increment over `dt`
/// is `S_alpha(dt^(1/alpha) * scale, skewness, 0)`.
pub fn sample_stable_levy(
    params: &StableParams,
    grid: &[f64],
    stream: RngStream,
) -> Result<GridPath> {
    params.validate()?;
    if params.alpha <= 1.0 {
        return Err(Error::Parameter(format!(
            "stable Levy sampler needs alpha in (1, 2], got {}",
            params.alpha
        )));
    }
    check_grid(grid)?;
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        let step = StableParams {
            alpha: params.alpha,
            skewness: params.skewness,
            scale: dt.powf(1.0 / params.alpha) * params.scale,
        };
        let prev = *values.last().unwrap();
        values.push(prev + draw_stable(&step, &mut rng));
    }
    GridPath::new(grid.to_vec(), values)
}

/// Default operational-time step: `horizon^beta * 1e-3`, i.e. roughly a
/// thousand operational steps per unit of expected `E` range.
pub fn default_op_step(beta: f64, horizon: f64) -> f64 {
    horizon.powf(beta) * 1e-3
}

fn check_op_step(op_step: f64) -> Result<()> {
    if op_step > 0.0 && op_step.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "op_step must be positive, got {op_step}"
        )))
    }
}

/// The inverse `E(t) = inf{x >= 0 : T(x) > t}` of a beta-stable
/// subordinator, at operational-time resolution `op_step`.
///
/// The subordinator is stepped by increments `op_step^(1/beta) * tau` with
/// `tau` one-sided beta-stable; `E(t)` is read off as `op_step` times the
/// number of completed steps with `T <= t`, which breaks discretization
/// ties toward the smaller operational time and pins `E(0) = 0`.
pub fn sample_inverse_subordinator(
    beta: f64,
    grid: &[f64],
    op_step: f64,
    stream: RngStream,
) -> Result<GridPath> {
    crate::stable_rng::check_beta(beta)?;
    check_op_step(op_step)?;
    check_grid(grid)?;
    let mut rng = stream.rng();
    let scale = op_step.powf(1.0 / beta);
    let mut values = Vec::with_capacity(grid.len());
    let mut steps = 0u64;
    // next_t is T(steps + 1), the first subordinator level not yet passed.
    let mut next_t = scale * draw_one_sided(beta, &mut rng);
    for &t in grid {
        while next_t <= t {
            steps += 1;
            next_t += scale * draw_one_sided(beta, &mut rng);
        }
        values.push(steps as f64 * op_step);
    }
    GridPath::new(grid.to_vec(), values)
}

/// Time-changed Brownian motion `B(E_t)` by subordination: sample `E` on
/// the grid, then draw Gaussian increments of variance `dE` between
/// consecutive grid points. Exactly constant wherever `dE = 0`.
pub fn sample_time_changed_bm(
    beta: f64,
    grid: &[f64],
    op_step: f64,
    stream: RngStream,
) -> Result<GridPath> {
    let e = sample_inverse_subordinator(beta, grid, op_step, stream.substream(0))?;
    let mut rng = stream.substream(1).rng();
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    for w in e.values().windows(2) {
        let de = w[1] - w[0];
        let prev = *values.last().unwrap();
        if de == 0.0 {
            values.push(prev);
        } else {
            values.push(prev + de.sqrt() * draw_normal(&mut rng));
        }
    }
    GridPath::new(grid.to_vec(), values)
}

/// Marginal draw of `(E_t, B(E_t))` at a single time `t > 0`.
pub(crate) fn draw_time_changed_pair(
    beta: f64,
    t: f64,
    op_step: f64,
    stream: RngStream,
) -> Result<(f64, f64)> {
    let e =
        sample_inverse_subordinator(beta, &[0.0, t], op_step, stream.substream(0))?.last_value();
    let mut rng = stream.substream(1).rng();
    let w = e.sqrt() * draw_normal(&mut rng);
    Ok((e, w))
}

/// Closed form of the Brownian self-integral: given `B(t) = b_t`,
/// `int_0^t B dB = (b_t^2 - t) / 2`.
pub fn closed_form_bm_self_integral(b_t: f64, t: f64) -> f64 {
    (b_t * b_t - t) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erf;
    use statrs::function::gamma::gamma;

    fn linspace(t: f64, steps: usize) -> Vec<f64> {
        (0..=steps).map(|i| t * i as f64 / steps as f64).collect()
    }

    fn mean_and_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn ks_vs_cdf(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / m).max((i + 1) as f64 / m - f)
            })
            .fold(0.0, f64::max)
    }

    fn two_sample_ks(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (m, n) = (a.len() as f64, b.len() as f64);
        let mut d = 0.0f64;
        for &v in a.iter().chain(b.iter()) {
            let fa = a.partition_point(|&x| x <= v) as f64 / m;
            let fb = b.partition_point(|&x| x <= v) as f64 / n;
            d = d.max((fa - fb).abs());
        }
        d
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let p = GridPath::new(vec![0.0, 0.5], vec![0.0, 1.25]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,value\n0,0\n0.5,1.25\n"
        );
    }

    #[test]
    fn trivial_grids() {
        let b = sample_brownian(&[0.0], RngStream::new(1, 0)).unwrap();
        assert_eq!(b.values(), &[0.0]);
        let a = sample_stable_levy(
            &StableParams::symmetric(1.5, 1.0).unwrap(),
            &[0.0],
            RngStream::new(1, 1),
        )
        .unwrap();
        assert_eq!(a.values(), &[0.0]);
        assert!(sample_brownian(&[0.0, 1.0, 0.5], RngStream::new(1, 2)).is_err());
        assert!(sample_brownian(&[0.5, 1.0], RngStream::new(1, 3)).is_err());
    }

    #[test]
    fn brownian_variance_and_independence() {
        let stream = RngStream::new(2, 0);
        let grid = [0.0, 0.5, 1.0];
        let n = 10_000;
        let mut b1 = Vec::with_capacity(n);
        let mut inc1 = Vec::with_capacity(n);
        let mut inc2 = Vec::with_capacity(n);
        for r in 0..n {
            let p = sample_brownian(&grid, stream.substream(r as u64)).unwrap();
            b1.push(p.values()[2]);
            inc1.push(p.values()[1]);
            inc2.push(p.values()[2] - p.values()[1]);
        }
        let (_, var) = mean_and_var(&b1);
        assert!((var - 1.0).abs() < 0.05, "Var B(1) = {var}");

        let (m1, v1) = mean_and_var(&inc1);
        let (m2, v2) = mean_and_var(&inc2);
        let cov = inc1
            .iter()
            .zip(&inc2)
            .map(|(a, b)| (a - m1) * (b - m2))
            .sum::<f64>()
            / (n as f64 - 1.0);
        let corr = cov / (v1 * v2).sqrt();
        let se = 1.0 / (n as f64).sqrt();
        assert!(corr.abs() < 4.0 * se, "corr {corr}");
    }

    #[test]
    fn stable_levy_alpha_two_reduces_to_scaled_brownian() {
        // At alpha = 2, scale sigma, A(1) is normal with variance 2 sigma^2.
        let params = StableParams::symmetric(2.0, 1.0 / 2f64.sqrt()).unwrap();
        let stream = RngStream::new(3, 0);
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let mut endpoints: Vec<f64> = (0..100_000)
            .map(|r| {
                sample_stable_levy(&params, &grid, stream.substream(r))
                    .unwrap()
                    .last_value()
            })
            .collect();
        let d = ks_vs_cdf(&mut endpoints, |x| 0.5 * (1.0 + erf(x / 2f64.sqrt())));
        assert!(d < 0.015, "KS {d}");
    }

    #[test]
    fn stable_levy_self_similarity() {
        let params = StableParams::symmetric(1.5, 1.0).unwrap();
        let stream = RngStream::new(4, 0);
        let reps = 100_000u64;
        let mut at_two: Vec<f64> = (0..reps)
            .map(|r| {
                sample_stable_levy(&params, &[0.0, 1.0, 2.0], stream.substream(r))
                    .unwrap()
                    .last_value()
                    / 2f64.powf(1.0 / 1.5)
            })
            .collect();
        let mut at_one: Vec<f64> = (0..reps)
            .map(|r| {
                sample_stable_levy(&params, &[0.0, 1.0], stream.substream(reps + r))
                    .unwrap()
                    .last_value()
            })
            .collect();
        let d = two_sample_ks(&mut at_two, &mut at_one);
        assert!(d < 0.015, "KS {d}");
    }

    #[test]
    fn inverse_subordinator_basics() {
        let e = sample_inverse_subordinator(0.5, &linspace(1.0, 64), 1e-3, RngStream::new(5, 0))
            .unwrap();
        assert_eq!(e.values()[0], 0.0);
        assert!(e.values().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn inverse_subordinator_mean_matches_gamma_oracle() {
        // E[E(1)] at beta = 1/2 is 1/Gamma(1.5); the sampler must land
        // within 2% and halving op_step must move the estimate by less than
        // one Monte Carlo standard error. The refinement check couples the
        // two resolutions through one skeleton: subsampling every second
        // step of the op/2 subordinator is in law the op-step subordinator.
        let beta = 0.5;
        let reps = 100_000u64;
        let op = default_op_step(beta, 1.0);
        let fine_scale = (op / 2.0).powf(1.0 / beta);
        let stream = RngStream::new(6, 0);

        let mut coarse = Vec::with_capacity(reps as usize);
        let mut fine = Vec::with_capacity(reps as usize);
        for r in 0..reps {
            let mut rng = stream.substream(r).rng();
            let mut t_sub = 0.0f64;
            let mut j = 0u64;
            let (mut n_fine, mut n_coarse) = (0u64, 0u64);
            loop {
                t_sub += fine_scale * crate::stable_rng::draw_one_sided(beta, &mut rng);
                j += 1;
                if t_sub > 1.0 {
                    break;
                }
                n_fine += 1;
                if j.is_multiple_of(2) {
                    n_coarse += 1;
                }
            }
            fine.push(n_fine as f64 * op / 2.0);
            coarse.push(n_coarse as f64 * op);
        }

        let oracle = 1.0 / gamma(1.5);
        let (coarse_mean, var) = mean_and_var(&coarse);
        let se = (var / reps as f64).sqrt();
        let (fine_mean, _) = mean_and_var(&fine);
        assert!(
            (coarse_mean - oracle).abs() < 0.02 * oracle,
            "mean {coarse_mean} vs {oracle}"
        );
        assert!(
            (fine_mean - coarse_mean).abs() < se,
            "refinement moved {coarse_mean} -> {fine_mean}, se {se}"
        );
    }

    #[test]
    fn time_change_is_flat_where_e_is_flat() {
        let grid = linspace(1.0, 256);
        for r in 0..20 {
            let stream = RngStream::new(7, r);
            let e = sample_inverse_subordinator(0.5, &grid, 1e-2, stream.substream(0)).unwrap();
            let w = sample_time_changed_bm(0.5, &grid, 1e-2, stream).unwrap();
            assert_eq!(w.values()[0], 0.0);
            for k in 0..grid.len() - 1 {
                if e.values()[k + 1] == e.values()[k] {
                    assert_eq!(w.values()[k + 1], w.values()[k]);
                }
            }
        }
    }

    #[test]
    fn time_change_variance_matches_mean_time_change() {
        let beta = 0.5;
        let op = default_op_step(beta, 1.0);
        let stream = RngStream::new(8, 0);
        let reps = 100_000u64;
        let mut es = Vec::with_capacity(reps as usize);
        let mut ws = Vec::with_capacity(reps as usize);
        for r in 0..reps {
            let (e, w) = draw_time_changed_pair(beta, 1.0, op, stream.substream(r)).unwrap();
            es.push(e);
            ws.push(w);
        }
        let mean_e = es.iter().sum::<f64>() / reps as f64;
        let (_, var_w) = mean_and_var(&ws);
        assert!(
            (var_w - mean_e).abs() < 0.03 * mean_e,
            "Var B(E_1) = {var_w}, E[E_1] = {mean_e}"
        );
    }

    #[test]
    fn closed_form_self_integral() {
        assert_eq!(closed_form_bm_self_integral(0.0, 1.0), -0.5);
        assert_eq!(closed_form_bm_self_integral(0.0, 0.0), 0.0);

        // Left-point Riemann sum of B dB along a fine path agrees with the
        // closed form evaluated at the endpoint.
        let grid = linspace(1.0, 100_000);
        let p = sample_brownian(&grid, RngStream::new(9, 0)).unwrap();
        let mut riemann = 0.0;
        for w in p.values().windows(2) {
            riemann += w[0] * (w[1] - w[0]);
        }
        let closed = closed_form_bm_self_integral(p.last_value(), 1.0);
        assert!((riemann - closed).abs() < 0.02, "{riemann} vs {closed}");
    }

    #[test]
    fn transformed_normal_matches_chi_square_law() {
        // (B_1^2 - 1)/2 has CDF erf(sqrt(x + 1/2)) for x >= -1/2.
        let stream = RngStream::new(10, 0);
        let mut xs: Vec<f64> = (0..100_000)
            .map(|r| {
                let b = sample_brownian(&[0.0, 1.0], stream.substream(r))
                    .unwrap()
                    .last_value();
                closed_form_bm_self_integral(b, 1.0)
            })
            .collect();
        let d = ks_vs_cdf(&mut xs, |x| {
            if 2.0 * x + 1.0 <= 0.0 {
                0.0
            } else {
                erf((x + 0.5).sqrt())
            }
        });
        assert!(d < 0.01, "KS {d}");
    }
}
