//! Repellers: the maximal forward-invariant set K inside a union of domain
//! components, possibly with forward-orbit exclusion holes, plus the singular
//! set S'(f, K) where the restricted map fails to be open.

use crate::error::Result;
use crate::interval::Interval;
use crate::map::{CritKind, MultimodalMap};
use serde::{Deserialize, Serialize};

/// Tolerance used for exact hole/component rejection tests, relative to the
/// domain scale. Holes are open, so strict containment by this margin rejects.
pub const MEMBER_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    InK,
    NotInK,
    UnknownAtHorizon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Repeller {
    /// Convex hulls of K per component (the set Î_K).
    pub components: Vec<Interval>,
    /// Open forward-orbit exclusion zones.
    pub holes: Vec<Interval>,
    /// Forward-check depth for point membership.
    pub horizon: u32,
    /// True when the components cover the full map domain with no holes and
    /// the domain maps into itself, so K is the whole domain (established at
    /// construction).
    pub full: bool,
}

impl Repeller {
    pub fn full_domain(map: &MultimodalMap) -> Self {
        let invariant = map.domain.iter().all(|c| {
            let n = 257;
            (0..=n).all(|i| {
                let x = c.lo + c.len() * i as f64 / n as f64;
                let y = map.f(x);
                map.domain.iter().any(|d| d.contains(y))
            })
        });
        Repeller {
            components: map.domain.clone(),
            holes: Vec::new(),
            horizon: 64,
            full: invariant,
        }
    }

    pub fn with_holes(components: Vec<Interval>, holes: Vec<Interval>, horizon: u32) -> Self {
        Repeller {
            components,
            holes,
            horizon,
            full: false,
        }
    }

    /// x lies in Î_K \ holes (hole interiors rejected with the exactness
    /// margin; component membership allowed up to the same margin).
    pub fn point_admissible(&self, x: f64) -> bool {
        let in_comp = self
            .components
            .iter()
            .any(|c| c.lo - MEMBER_TOL <= x && x <= c.hi + MEMBER_TOL);
        if !in_comp {
            return false;
        }
        !self
            .holes
            .iter()
            .any(|h| h.contains_with_margin(x, MEMBER_TOL))
    }

    /// Three-valued membership by forward iteration up to the horizon.
    ///
    /// `NotInK` is exact: some iterate leaves the components or enters a hole
    /// interior. `InK` is returned only when exactness applies: for full
    /// repellers staying in the (invariant) domain decides membership
    /// immediately. Otherwise the verdict is `UnknownAtHorizon`.
    pub fn membership(&self, map: &MultimodalMap, x: f64) -> Membership {
        if !self.point_admissible(x) {
            return Membership::NotInK;
        }
        if self.full {
            return Membership::InK;
        }
        let mut cur = x;
        for _ in 0..self.horizon {
            cur = map.f(cur);
            if !self.point_admissible(cur) {
                return Membership::NotInK;
            }
        }
        Membership::UnknownAtHorizon
    }

    /// Exactness certificate for a full periodic orbit: every point of the
    /// cycle is admissible, so the whole (infinite) forward orbit is, and the
    /// orbit lies in K by maximality.
    pub fn certify_periodic_orbit(&self, points: &[f64]) -> Membership {
        if points.iter().all(|&p| self.point_admissible(p)) {
            Membership::InK
        } else {
            Membership::NotInK
        }
    }

    pub fn span(&self) -> Interval {
        Interval::new(
            self.components.first().unwrap().lo,
            self.components.last().unwrap().hi,
        )
    }

    /// Distance from x to Î_K \ holes.
    pub fn dist_to_admissible(&self, x: f64) -> f64 {
        let dc = self
            .components
            .iter()
            .map(|c| c.dist_to(x))
            .fold(f64::INFINITY, f64::min);
        if dc > 0.0 {
            return dc;
        }
        match self.holes.iter().find(|h| h.contains_strict(x)) {
            Some(h) => (x - h.lo).min(h.hi - x),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularSet {
    pub crit: Vec<f64>,
    /// Points where f restricted to K fails to be open.
    pub no_points: Vec<f64>,
    /// crit ∪ no_points, ordered.
    pub all: Vec<f64>,
}

/// Builds S'(f, K) = Crit(f) ∪ NO(f, K).
///
/// The openness test at an endpoint e of Î_K is exact for the registry
/// repellers: e fails to be open iff K accumulates on e from one side only
/// while f(e) is accumulated by K from both sides. For a full-interval
/// repeller, an endpoint that maps to a one-sided endpoint (itself or the
/// other endpoint) is open; for a Markov repeller with holes, hole endpoints
/// map onto turning points interior to the convex hull of K, which are
/// two-sided limits of K, so they are NO points.
pub fn singular_set(map: &MultimodalMap, repeller: &Repeller) -> SingularSet {
    let crit: Vec<f64> = map
        .critical
        .iter()
        .filter(|c| repeller.point_admissible(c.x))
        .map(|c| c.x)
        .collect();

    let mut no_points = Vec::new();
    let hull = repeller.span();
    let mut endpoints: Vec<f64> = Vec::new();
    for c in &repeller.components {
        endpoints.push(c.lo);
        endpoints.push(c.hi);
    }
    for &e in &endpoints {
        let image = map.f(e);
        // e is accumulated by K from one side only (it is a boundary point of
        // the hull or of a hole). Openness holds iff the image is also a
        // one-sided limit point approached from the matching side.
        let image_two_sided = hull.contains_strict(image)
            && !endpoints.iter().any(|&b| (b - image).abs() < 1e-12)
            && repeller.point_admissible(image);
        if image_two_sided {
            no_points.push(e);
        }
    }
    // turning points can fail openness only when their image is two-sided
    // while the fold collapses a neighbourhood to one side; for turning
    // points interior to Î_K the image of any small neighbourhood is a
    // one-sided interval at the critical value, so openness fails iff the
    // critical value is a two-sided limit of K. For the registry maps the
    // critical values are endpoint fixed points, which are one-sided.
    for c in &map.critical {
        if c.kind != CritKind::Turning || !repeller.point_admissible(c.x) {
            continue;
        }
        let v = map.f(c.x);
        let v_two_sided = hull.contains_strict(v)
            && repeller.point_admissible(v)
            && !endpoints.iter().any(|&b| (b - v).abs() < 1e-12);
        // the fold side: f near c covers one side of v only; if K clusters on
        // the other side of v as well, small images are not open in K.
        if v_two_sided && !no_points.iter().any(|&p| (p - c.x).abs() < 1e-12) {
            no_points.push(c.x);
        }
    }
    no_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    no_points.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut all = crit.clone();
    all.extend_from_slice(&no_points);
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    SingularSet {
        crit,
        no_points,
        all,
    }
}

/// Checks that no point of the singular set is periodic up to `max_period`.
pub fn singular_set_no_periodic(
    map: &MultimodalMap,
    sset: &SingularSet,
    max_period: u32,
) -> Result<bool> {
    for &s in &sset.all {
        let mut cur = s;
        for _ in 0..max_period {
            cur = map.f(cur);
            if (cur - s).abs() < 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::MapExpr;

    fn cheb3() -> MultimodalMap {
        MultimodalMap::new(
            "cheb3",
            MapExpr::Chebyshev3,
            vec![Interval::new(-1.0, 1.0)],
            1e-6,
        )
    }

    #[test]
    fn full_repeller_membership() {
        let m = cheb3();
        let r = Repeller::full_domain(&m);
        assert!(r.full);
        assert_eq!(r.membership(&m, 0.3), Membership::InK);
        assert_eq!(r.membership(&m, 1.5), Membership::NotInK);
    }

    #[test]
    fn cheb3_singular_set_is_critical_only() {
        let m = cheb3();
        let r = Repeller::full_domain(&m);
        let s = singular_set(&m, &r);
        assert_eq!(s.crit, vec![-0.5, 0.5]);
        assert!(s.no_points.is_empty(), "{:?}", s.no_points);
        assert!(singular_set_no_periodic(&m, &s, 12).unwrap());
    }

    #[test]
    fn logistic_singular_set() {
        let m = MultimodalMap::new(
            "logistic4",
            MapExpr::Logistic { lambda: 4.0 },
            vec![Interval::new(0.0, 1.0)],
            1e-6,
        );
        let r = Repeller::full_domain(&m);
        let s = singular_set(&m, &r);
        assert_eq!(s.crit, vec![0.5]);
        assert!(s.no_points.is_empty());
    }

    #[test]
    fn crit_free_map_has_crit_empty() {
        // monotone cubic: no interior critical points on [0, 1]
        let m = MultimodalMap::new(
            "mono",
            MapExpr::Polynomial {
                coeffs: vec![0.0, 1.0, 0.0, 0.5],
            },
            vec![Interval::new(0.0, 1.0)],
            1e-6,
        );
        let r = Repeller::full_domain(&m);
        let s = singular_set(&m, &r);
        assert!(s.crit.is_empty());
        assert_eq!(s.all.len(), s.no_points.len());
    }
}
