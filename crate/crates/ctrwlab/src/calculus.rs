//! Pathwise stochastic calculus for step paths.
//!
//! For a step path `X` with jumps `xi_i` at times `T_i`, the integral of a
//! cadlag integrand against `X` is the finite sum
//!
//! ```text
//! int_0^t H(s-) dX(s) = sum_{i <= N(t)} H(T_i-) xi_i
//! ```
//!
//! Quadratic variation is the sum of squared jumps, and the stochastic
//! exponential of `X` (the solution of `Z = 1 + int Z- dX`) reduces for a
//! pure-jump path to the product of `1 + xi_i`.
//!
//! All sums run in jump-index order with compensated accumulation, so the
//! results are deterministic regardless of caller-side parallelism.

use crate::error::{Error, Result};
use crate::kahan::Kahan;
use crate::paths::JumpPath;

/// Integrand of a pathwise integral, evaluated at left limits of jump times.
pub enum Integrand<'a> {
    /// A deterministic function of time, defined on `[0, horizon]`; its
    /// left limit at a jump time is its value there.
    Deterministic(&'a (dyn Fn(f64) -> f64 + Sync)),
    /// The integrated path itself: `H(T_i-)` is the prefix sum before the
    /// i-th jump, so of two coincident jumps the second sees the first.
    PathItself,
    /// A functional of the whole path; the callback receives the jump time
    /// and is responsible for left-limit evaluation (e.g. via
    /// [`JumpPath::value_before`]).
    PathFunctional(&'a (dyn Fn(&JumpPath, f64) -> f64 + Sync)),
}

fn check_time(path: &JumpPath, t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 || t > path.horizon() {
        return Err(Error::Domain(format!(
            "time {t} outside [0, {}]",
            path.horizon()
        )));
    }
    Ok(())
}

/// `int_0^t H(s-) dX(s)` as the exact finite sum over jumps up to `t`.
pub fn integrate(h: &Integrand<'_>, path: &JumpPath, t: f64) -> Result<f64> {
    check_time(path, t)?;
    let n = path.count_jumps(t)?;
    let times = path.jump_times();
    let sizes = path.jump_sizes();
    let mut acc = Kahan::new();
    for i in 0..n {
        let left = match h {
            Integrand::Deterministic(f) => f(times[i]),
            Integrand::PathItself => path.prefix_value(i),
            Integrand::PathFunctional(g) => g(path, times[i]),
        };
        acc.add(left * sizes[i]);
    }
    Ok(acc.value())
}

/// `[X, X]_t`: the sum of squared jump sizes up to `t`.
pub fn quadratic_variation(path: &JumpPath, t: f64) -> Result<f64> {
    check_time(path, t)?;
    let n = path.count_jumps(t)?;
    let mut acc = Kahan::new();
    for &s in &path.jump_sizes()[..n] {
        acc.add(s * s);
    }
    Ok(acc.value())
}

/// The stochastic exponential of `X` at `t`:
///
/// ```text
/// exp{X_t - [X,X]_t / 2} prod_{T_i <= t} (1 + xi_i) exp{-xi_i + xi_i^2 / 2}
/// ```
///
/// Evaluated in log space; a nonpositive factor `1 + xi_i <= 0` switches to
/// the exact signed product, which the formula telescopes to for pure-jump
/// paths.
pub fn stochastic_exponential(path: &JumpPath, t: f64) -> Result<f64> {
    check_time(path, t)?;
    let n = path.count_jumps(t)?;
    let sizes = &path.jump_sizes()[..n];
    if sizes.iter().any(|&s| 1.0 + s <= 0.0) {
        let mut prod = 1.0;
        for &s in sizes {
            prod *= 1.0 + s;
        }
        return Ok(prod);
    }
    let mut log_acc = Kahan::new();
    log_acc.add(path.value(t)?);
    log_acc.add(-0.5 * quadratic_variation(path, t)?);
    for &s in sizes {
        log_acc.add(s.ln_1p() - s + 0.5 * s * s);
    }
    Ok(log_acc.value().exp())
}

/// Residual of the pure-jump integration-by-parts identity
/// `X(t)^2 = 2 int_0^t X(s-) dX(s) + [X, X]_t`; near zero for every path.
pub fn integration_by_parts_check(path: &JumpPath, t: f64) -> Result<f64> {
    let x = path.value(t)?;
    let ssi = integrate(&Integrand::PathItself, path, t)?;
    let qv = quadratic_variation(path, t)?;
    Ok(x * x - 2.0 * ssi - qv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{build_ctrw, sample_scaled_ctrw, CtrwFamily, CtrwSpec, JumpLaw};
    use crate::stable_rng::RngStream;
    use proptest::prelude::*;

    fn demo_path() -> JumpPath {
        build_ctrw(&[0.5, 0.5], &[1.0, -2.0], 2.0).unwrap()
    }

    #[test]
    fn unit_integrand_gives_path_value() {
        let p = demo_path();
        let one = |_: f64| 1.0;
        for t in [0.0, 0.3, 0.5, 0.9, 1.0, 2.0] {
            assert_eq!(
                integrate(&Integrand::Deterministic(&one), &p, t).unwrap(),
                p.value(t).unwrap()
            );
        }
    }

    #[test]
    fn time_integrand_example() {
        let p = demo_path();
        let id = |s: f64| s;
        let v = integrate(&Integrand::Deterministic(&id), &p, 1.2).unwrap();
        assert!((v - (0.5 * 1.0 + 1.0 * (-2.0))).abs() < 1e-15);
    }

    #[test]
    fn self_integral_uses_left_limits() {
        let p = build_ctrw(&[0.5, 0.5], &[1.0, 1.0], 2.0).unwrap();
        let v = integrate(&Integrand::PathItself, &p, 1.5).unwrap();
        assert_eq!(v, 1.0); // 0*1 + 1*1
    }

    #[test]
    fn functional_integrand_sees_left_limit() {
        let p = build_ctrw(&[0.5, 0.5], &[1.0, 1.0], 2.0).unwrap();
        let g = |path: &JumpPath, t: f64| path.value_before(t).unwrap();
        let v = integrate(&Integrand::PathFunctional(&g), &p, 1.5).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn quadratic_variation_examples() {
        let p = demo_path();
        assert_eq!(quadratic_variation(&p, 1.0).unwrap(), 5.0);
        assert_eq!(quadratic_variation(&p, 0.2).unwrap(), 0.0);
        let empty = build_ctrw(&[], &[], 1.0).unwrap();
        assert_eq!(quadratic_variation(&empty, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn exponential_examples() {
        let empty = build_ctrw(&[], &[], 1.0).unwrap();
        assert_eq!(stochastic_exponential(&empty, 1.0).unwrap(), 1.0);

        let p = build_ctrw(&[0.5], &[1.0], 1.0).unwrap();
        let v = stochastic_exponential(&p, 1.0).unwrap();
        assert!((v - 2.0).abs() < 2.0 * 1e-10);

        // A -1 jump absorbs the exponential at 0.
        let q = build_ctrw(&[0.25, 0.25], &[1.0, -1.0], 1.0).unwrap();
        assert_eq!(stochastic_exponential(&q, 0.4).unwrap(), 2.0);
        assert_eq!(stochastic_exponential(&q, 0.5).unwrap(), 0.0);
        assert_eq!(stochastic_exponential(&q, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn parts_identity_exact_on_integer_paths() {
        // Integer jumps keep every term exactly representable, so the
        // identity holds with residual exactly zero.
        let p = build_ctrw(&[0.5, 0.5, 0.5], &[1.0, -2.0, 3.0], 2.0).unwrap();
        for t in [0.0, 0.5, 1.0, 1.5, 2.0] {
            assert_eq!(integration_by_parts_check(&p, t).unwrap(), 0.0);
        }
        let empty = build_ctrw(&[], &[], 1.0).unwrap();
        assert_eq!(integration_by_parts_check(&empty, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn parts_identity_on_random_subdiffusive_paths() {
        let stream = RngStream::new(21, 0);
        let spec = CtrwSpec::new(
            CtrwFamily::Subdiffusive {
                beta: 0.5,
                jumps: JumpLaw::Normal,
            },
            200,
            1.0,
        )
        .unwrap();
        let mut worst = 0.0f64;
        for r in 0..1_000 {
            let p = sample_scaled_ctrw(&spec, stream.substream(r)).unwrap();
            let x = p.value(1.0).unwrap();
            let res = integration_by_parts_check(&p, 1.0).unwrap();
            worst = worst.max(res.abs() / (1.0 + x * x));
        }
        assert!(worst < 1e-10, "worst relative residual {worst}");
    }

    #[test]
    fn exponential_matches_plain_product() {
        let stream = RngStream::new(22, 0);
        let spec = CtrwSpec::new(
            CtrwFamily::Subdiffusive {
                beta: 0.5,
                jumps: JumpLaw::Rademacher,
            },
            1_000,
            1.0,
        )
        .unwrap();
        for r in 0..50 {
            let p = sample_scaled_ctrw(&spec, stream.substream(r)).unwrap();
            let v = stochastic_exponential(&p, 1.0).unwrap();
            let mut prod = 1.0;
            for &s in p.jump_sizes() {
                prod *= 1.0 + s;
            }
            assert!(
                (v - prod).abs() <= 1e-10 * prod.abs().max(1e-300),
                "exp {v} vs product {prod}"
            );
        }
    }

    #[test]
    fn rejects_out_of_range_times() {
        let p = demo_path();
        assert!(integrate(&Integrand::PathItself, &p, 2.1).is_err());
        assert!(quadratic_variation(&p, -0.1).is_err());
        assert!(stochastic_exponential(&p, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn integral_is_linear_and_additive(
            jumps in prop::collection::vec(-5.0f64..5.0, 0..40),
            waits in prop::collection::vec(0.0f64..0.2, 0..40),
            split in 0.0f64..3.0,
        ) {
            let k = jumps.len().min(waits.len());
            let p = build_ctrw(&waits[..k], &jumps[..k], 3.0).unwrap();

            let f = |s: f64| 2.0 * s - 1.0;
            let g = |s: f64| s * s;
            let combo = move |s: f64| 3.0 * f(s) - 0.5 * g(s);
            let lhs = integrate(&Integrand::Deterministic(&combo), &p, 3.0).unwrap();
            let rhs = 3.0 * integrate(&Integrand::Deterministic(&f), &p, 3.0).unwrap()
                - 0.5 * integrate(&Integrand::Deterministic(&g), &p, 3.0).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));

            // Additivity over [0, split] and (split, 3].
            let whole = integrate(&Integrand::Deterministic(&f), &p, 3.0).unwrap();
            let head = integrate(&Integrand::Deterministic(&f), &p, split).unwrap();
            let tail: f64 = p
                .jump_times()
                .iter()
                .zip(p.jump_sizes())
                .filter(|(&t, _)| t > split)
                .map(|(&t, &s)| f(t) * s)
                .sum();
            prop_assert!((whole - (head + tail)).abs() <= 1e-12 * (1.0 + whole.abs()));
        }

        #[test]
        fn quadratic_variation_is_monotone(
            jumps in prop::collection::vec(-5.0f64..5.0, 0..40),
            waits in prop::collection::vec(0.0f64..0.2, 0..40),
        ) {
            let k = jumps.len().min(waits.len());
            let p = build_ctrw(&waits[..k], &jumps[..k], 3.0).unwrap();
            let mut prev = 0.0;
            for i in 0..=30 {
                let t = 3.0 * i as f64 / 30.0;
                let qv = quadratic_variation(&p, t).unwrap();
                prop_assert!(qv >= prev);
                prev = qv;
            }
        }

        #[test]
        fn parts_residual_is_tiny(
            jumps in prop::collection::vec(-5.0f64..5.0, 0..40),
            waits in prop::collection::vec(0.0f64..0.2, 0..40),
        ) {
            let k = jumps.len().min(waits.len());
            let p = build_ctrw(&waits[..k], &jumps[..k], 3.0).unwrap();
            let x = p.value(3.0).unwrap();
            let res = integration_by_parts_check(&p, 3.0).unwrap();
            prop_assert!(res.abs() <= 1e-10 * (1.0 + x * x));
        }
    }
}
