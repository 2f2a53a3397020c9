//! Compensated (Neumaier) accumulation.
//!
//! All pathwise sums in this crate are accumulated in a fixed index order
//! with a running compensation term, so results do not depend on how work
//! was scheduled across threads.

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
        let mut acc = Kahan::new();
        for x in xs {
            acc.add(x);
        }
        acc.value()
    }

    #[test]
    fn recovers_cancellation() {
        // Naive summation loses the 1.0 here; compensation keeps it.
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(sum(xs.iter().copied()), 1.0);
    }

    #[test]
    fn identical_addends_match_single_rounding() {
        let c = 0.1f64;
        let k = 1_000_000u32;
        let s = sum(std::iter::repeat_n(c, k as usize));
        assert_eq!(s, f64::from(k) * c);
    }
}
