use std::ops::RangeInclusive;

/// Exponents `i` with `lo <= base^i <= hi`.
///
/// The range is empty when `lo > hi` or either bound is not positive.
pub fn threshold_grid(lo: f64, hi: f64, base: f64) -> RangeInclusive<i32> {
    #[allow(clippy::reversed_empty_ranges)]
    if !(lo > 0.0 && hi >= lo && base > 1.0 && hi.is_finite()) {
        return 1..=0;
    }
    (level_at_least(lo, base))..=(level_at_most(hi, base))
}

/// Smallest `i` with `base^i >= x`.
pub(crate) fn level_at_least(x: f64, base: f64) -> i32 {
    let mut i = (x.ln() / base.ln()).ceil() as i32;
    while base.powi(i - 1) >= x {
        i -= 1;
    }
    while base.powi(i) < x {
        i += 1;
    }
    i
}

/// Largest `i` with `base^i <= x`.
pub(crate) fn level_at_most(x: f64, base: f64) -> i32 {
    let mut i = (x.ln() / base.ln()).floor() as i32;
    while base.powi(i + 1) <= x {
        i += 1;
    }
    while base.powi(i) > x {
        i -= 1;
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_of_two_between_m_and_2km() {
        // m = 1, K = 4, base 2
        let levels: Vec<f64> = threshold_grid(1.0, 8.0, 2.0).map(|i| 2f64.powi(i)).collect();
        assert_eq!(levels, vec![1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn bounds_are_inclusive_and_tight() {
        let base: f64 = 1.1;
        for &(lo, hi) in &[(0.37, 5.2), (1e-3, 1e-1), (2.0, 2.0000001), (1.1, 1.21)] {
            let r = threshold_grid(lo, hi, base);
            for i in r.clone() {
                let v = base.powi(i);
                assert!(v >= lo && v <= hi);
            }
            if !r.is_empty() {
                assert!(base.powi(*r.start() - 1) < lo);
                assert!(base.powi(*r.end() + 1) > hi);
            }
        }
        assert!(threshold_grid(0.0, 1.0, 2.0).is_empty());
        assert!(threshold_grid(3.0, 1.0, 2.0).is_empty());
    }
}
