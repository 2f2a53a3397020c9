//! Empirical distributions and Kolmogorov-Smirnov distances.

use crate::error::{Error, Result};

/// A sorted Monte Carlo sample with ECDF evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Sort and wrap a sample. Empty samples and NaNs are rejected.
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::Numeric("sample contains NaN".into()));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("no NaN after check"));
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `ECDF(x)`: fraction of samples `<= x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }

    /// Sup distance to an analytic CDF, evaluated on both sides of every
    /// ECDF jump.
    pub fn ks_against_cdf(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let m = self.samples.len() as f64;
        self.samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / m).max((i + 1) as f64 / m - f)
            })
            .fold(0.0, f64::max)
    }

    /// Two-sample sup distance, evaluated at the jump points of both samples.
    pub fn ks_two_sample(&self, other: &EmpiricalDistribution) -> f64 {
        self.samples
            .iter()
            .chain(other.samples.iter())
            .map(|&v| (self.ecdf(v) - other.ecdf(v)).abs())
            .fold(0.0, f64::max)
    }
}

/// Reference side of a KS comparison.
pub enum KsReference<'a> {
    /// An analytic CDF.
    Cdf(&'a (dyn Fn(f64) -> f64 + Sync)),
    /// A second empirical sample.
    Sample(&'a EmpiricalDistribution),
}

/// Sup distance between an empirical distribution and a reference law.
pub fn ks_distance(emp: &EmpiricalDistribution, reference: KsReference<'_>) -> f64 {
    match reference {
        KsReference::Cdf(f) => emp.ks_against_cdf(f),
        KsReference::Sample(other) => emp.ks_two_sample(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    #[test]
    fn single_sample_against_uniform() {
        let e = EmpiricalDistribution::new(vec![0.5]).unwrap();
        assert_eq!(ks_distance(&e, KsReference::Cdf(&uniform)), 0.5);
    }

    #[test]
    fn two_point_sample_against_uniform() {
        let e = EmpiricalDistribution::new(vec![0.25, 0.75]).unwrap();
        assert!((ks_distance(&e, KsReference::Cdf(&uniform)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = EmpiricalDistribution::new(vec![3.0, 1.0, 2.0]).unwrap();
        let b = EmpiricalDistribution::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ks_distance(&a, KsReference::Sample(&b)), 0.0);
    }

    #[test]
    fn rejects_empty_sample() {
        assert!(matches!(
            EmpiricalDistribution::new(vec![]),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn known_two_sample_value() {
        let a = EmpiricalDistribution::new(vec![1.0, 1.0, 4.0, 4.0]).unwrap();
        let b = EmpiricalDistribution::new(vec![1.0, 1.0, 1.0, 4.0]).unwrap();
        assert!((a.ks_two_sample(&b) - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ks_lies_in_unit_interval(
            xs in prop::collection::vec(-100.0f64..100.0, 1..200),
            ys in prop::collection::vec(-100.0f64..100.0, 1..200),
        ) {
            let a = EmpiricalDistribution::new(xs).unwrap();
            let b = EmpiricalDistribution::new(ys).unwrap();
            let d2 = a.ks_two_sample(&b);
            prop_assert!((0.0..=1.0).contains(&d2));
            prop_assert!((d2 - b.ks_two_sample(&a)).abs() < 1e-15);
            let d1 = a.ks_against_cdf(|x| 0.5 * (1.0 + (x / 50.0).tanh()));
            prop_assert!((0.0..=1.0).contains(&d1));
            prop_assert_eq!(a.ks_two_sample(&a), 0.0);
        }

        #[test]
        fn ecdf_is_a_cdf(xs in prop::collection::vec(-10.0f64..10.0, 1..100)) {
            let e = EmpiricalDistribution::new(xs).unwrap();
            prop_assert_eq!(e.ecdf(f64::INFINITY), 1.0);
            prop_assert_eq!(e.ecdf(f64::NEG_INFINITY), 0.0);
            let mut prev = 0.0;
            for i in -20..=20 {
                let v = e.ecdf(i as f64 / 2.0);
                prop_assert!(v >= prev);
                prev = v;
            }
        }
    }
}
