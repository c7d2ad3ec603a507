use serde::{Deserialize, Serialize};

/// A closed interval [lo, hi] on the real line.
///
/// Degenerate intervals (lo == hi) are permitted; construction only checks
/// lo <= hi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    /// Interval spanned by two endpoints in either order.
    pub fn spanning(a: f64, b: f64) -> Self {
        if a <= b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_strict(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    /// Strict interior containment with a symmetric tolerance pad.
    pub fn contains_with_margin(&self, x: f64, margin: f64) -> bool {
        self.lo + margin < x && x < self.hi - margin
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then(|| Interval { lo, hi })
    }

    /// True iff `other` lies inside `self` with strict inequality on both ends.
    pub fn encloses_strictly(&self, other: &Interval) -> bool {
        self.lo < other.lo && other.hi < self.hi
    }

    /// True iff `other` lies inside `self`, endpoint contact allowed up to `tol`.
    pub fn encloses(&self, other: &Interval, tol: f64) -> bool {
        self.lo - tol <= other.lo && other.hi <= self.hi + tol
    }

    pub fn dist_to(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    /// Ball notation: the interval of radius r around x.
    pub fn ball(x: f64, r: f64) -> Self {
        assert!(r >= 0.0);
        Interval {
            lo: x - r,
            hi: x + r,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_predicates() {
        let i = Interval::new(-1.0, 1.0);
        assert!(i.contains(1.0));
        assert!(!i.contains_strict(1.0));
        assert!(i.contains_with_margin(0.99, 1e-3));
        assert!(!i.contains_with_margin(0.9999, 1e-3));
        assert_eq!(i.len(), 2.0);
        assert_eq!(i.dist_to(1.5), 0.5);
        assert_eq!(i.dist_to(0.0), 0.0);
    }

    #[test]
    fn spanning_orders_endpoints() {
        let i = Interval::spanning(0.7, -0.2);
        assert_eq!(i.lo, -0.2);
        assert_eq!(i.hi, 0.7);
    }

    #[test]
    fn intersection_and_enclosure() {
        let a = Interval::new(0.0, 1.0);
        let b = Interval::new(0.5, 2.0);
        let c = a.intersection(&b).unwrap();
        assert_eq!((c.lo, c.hi), (0.5, 1.0));
        assert!(Interval::new(-1.0, 1.0).encloses_strictly(&Interval::new(-0.5, 0.5)));
        assert!(!Interval::new(-1.0, 1.0).encloses_strictly(&Interval::new(-1.0, 0.5)));
    }
}
