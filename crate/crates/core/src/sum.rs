//! Compensated (Kahan-Babuska-Neumaier) summation.
//!
//! Tail values are differences of nearly equal quantities, so the head sums
//! are accumulated with a running compensation term instead of naive `+=`.

/// Neumaier accumulator. The represented value is `sum + compensation`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// `total - self`, applying the compensation after the leading subtraction
    /// so the cancellation does not swallow it.
    #[inline]
    pub fn subtract_from(&self, total: f64) -> f64 {
        (total - self.sum) - self.comp
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = Accumulator::new();
    for x in iter {
        acc.add(x);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        // 1 + 1e-16 * 1e4 naive loses the small terms entirely
        let mut acc = Accumulator::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        let exact = 1.0 + 1e-12;
        assert!((acc.value() - exact).abs() < 1e-27);
    }

    #[test]
    fn subtract_from_keeps_compensation() {
        let mut acc = Accumulator::new();
        for k in 0..1000 {
            acc.add((-(k as f64)).exp());
        }
        let total = (1.0f64 - (-1.0f64).exp()).recip();
        let tail = acc.subtract_from(total);
        // geometric remainder e^{-1000}/(1-e^{-1}) underflows; result ~ 0
        assert!(tail.abs() < 1e-13);
    }
}
