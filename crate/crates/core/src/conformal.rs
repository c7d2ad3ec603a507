//! Conformal-measure construction by weighted backward-orbit sums and the
//! conformality-defect diagnostics, including the relaxed inequalities at
//! points where the restricted map is not open.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::MultimodalMap;
use crate::numerics::Kahan;
use crate::orbit::preimage_tree;
use crate::repeller::Repeller;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomicMeasure {
    /// (point, weight), sorted by point; weights sum to 1.
    pub atoms: Vec<(f64, f64)>,
    pub total_before_normalisation: f64,
    pub t: f64,
    pub lambda: f64,
    pub depth: u32,
    pub base_point: f64,
    /// Derivative-zero branches excluded from the sums.
    pub skipped_branches: usize,
}

impl AtomicMeasure {
    /// Mass of the open interval (lo, hi).
    pub fn mass_of(&self, iv: &Interval) -> f64 {
        let start = self.atoms.partition_point(|&(x, _)| x <= iv.lo);
        let mut acc = Kahan::default();
        for &(x, w) in &self.atoms[start..] {
            if x >= iv.hi {
                break;
            }
            acc.add(w);
        }
        acc.value()
    }

    /// Mass of the single atom at x, if any.
    pub fn atom_at(&self, x: f64, tol: f64) -> f64 {
        let start = self.atoms.partition_point(|&(a, _)| a < x - tol);
        let mut acc = 0.0;
        for &(a, w) in &self.atoms[start..] {
            if a > x + tol {
                break;
            }
            acc += w;
        }
        acc
    }

    /// CDF evaluated at x (mass of (-inf, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        let end = self.atoms.partition_point(|&(a, _)| a <= x);
        let mut acc = Kahan::default();
        for &(_, w) in &self.atoms[..end] {
            acc.add(w);
        }
        acc.value()
    }

    /// Sup distance between the atomic CDF and a continuous reference,
    /// checking both sides of every jump.
    pub fn sup_cdf_distance<F: Fn(f64) -> f64>(&self, reference: F) -> f64 {
        let mut acc = 0.0f64;
        let mut worst = 0.0f64;
        for &(x, w) in &self.atoms {
            let r = reference(x);
            worst = worst.max((acc - r).abs());
            acc += w;
            worst = worst.max((acc - r).abs());
        }
        worst
    }
}

/// Weighted backward-orbit measure: atoms at all K-preimages of z0 up to
/// depth k_max, with weights phi_k lambda^{-k} |(f^k)'|^{-t}, normalised.
///
/// phi_k = 1 throughout (the simplest member of the allowed slowly-varying
/// family). Branches through derivative-zero points are excluded for t > 0
/// (their weight is infinite) and carry zero weight for t < 0.
pub fn patterson_sullivan(
    map: &MultimodalMap,
    repeller: &Repeller,
    z0: f64,
    t: f64,
    lambda: f64,
    k_max: u32,
) -> Result<AtomicMeasure> {
    if lambda <= 0.0 {
        return Err(Error::PsDivergent { lambda });
    }
    let tree = preimage_tree(map, repeller, z0, k_max)?;
    let log_lambda = lambda.ln();
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    let mut skipped = 0usize;
    let mut total = Kahan::default();
    for (k, level) in tree.levels.iter().enumerate() {
        for node in level {
            let w = if node.tangency_on_path {
                if t > 0.0 {
                    skipped += 1;
                    continue;
                } else if t == 0.0 {
                    (-(k as f64) * log_lambda).exp()
                } else {
                    continue; // zero weight
                }
            } else {
                (-(k as f64) * log_lambda - t * node.log_abs_deriv).exp()
            };
            if !w.is_finite() {
                return Err(Error::PsDivergent { lambda });
            }
            atoms.push((node.point, w));
            total.add(w);
        }
    }
    let total = total.value();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::PsDivergent { lambda });
    }
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for a in &mut atoms {
        a.1 /= total;
    }
    Ok(AtomicMeasure {
        atoms,
        total_before_normalisation: total,
        t,
        lambda,
        depth: k_max,
        base_point: z0,
        skipped_branches: skipped,
    })
}

/// Max over test intervals A of |mu(f(A)) - Σ_{x in A} lambda |f'(x)|^t w(x)|.
///
/// Every test interval must lie inside a single lap and avoid the singular
/// set, so f is injective on it.
pub fn conformality_defect(
    map: &MultimodalMap,
    measure: &AtomicMeasure,
    t: f64,
    lambda: f64,
    test_intervals: &[Interval],
    singular: &[f64],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for iv in test_intervals {
        let inside_lap = map
            .laps
            .iter()
            .any(|l| l.span.lo <= iv.lo && iv.hi <= l.span.hi);
        if !inside_lap || singular.iter().any(|&s| iv.contains(s)) {
            return Err(Error::IntervalNotInjective {
                lo: iv.lo,
                hi: iv.hi,
            });
        }
        let image = Interval::spanning(map.f(iv.lo), map.f(iv.hi));
        let lhs = measure.mass_of(&image);
        let start = measure.atoms.partition_point(|&(x, _)| x <= iv.lo);
        let mut rhs = Kahan::default();
        for &(x, w) in &measure.atoms[start..] {
            if x >= iv.hi {
                break;
            }
            rhs.add(lambda * map.df(x).abs().powf(t) * w);
        }
        worst = worst.max((lhs - rhs.value()).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StarDefect {
    pub point: f64,
    /// mu(f(x)) - lambda |f'(x)|^t mu(x); nonnegative when the one-sided
    /// inequality holds (positive slack is permitted).
    pub lower_slack: f64,
    /// Σ_{z in f^{-1}(f(x))} lambda |f'(z)|^t mu(z) - mu(f(x)).
    pub upper_slack: f64,
    /// An atom sits at a derivative-zero point with t < 0 (infinite mass
    /// would be forced).
    pub invalid_atom: bool,
}

/// Checks the relaxed one-sided conformality inequalities on atom masses at
/// the points where f restricted to K is not open.
pub fn star_defect_at_no_points(
    map: &MultimodalMap,
    measure: &AtomicMeasure,
    t: f64,
    lambda: f64,
    no_points: &[f64],
) -> Vec<StarDefect> {
    let tol = 1e-11;
    no_points
        .iter()
        .map(|&x| {
            let mx = measure.atom_at(x, tol);
            let fx = map.f(x);
            let mfx = measure.atom_at(fx, tol);
            let dx = map.df(x).abs();
            let invalid_atom = t < 0.0 && dx < 1e-12 && mx > 0.0;
            let lower_slack = mfx - lambda * dx.powf(t) * mx;
            let mut upper = 0.0;
            for pre in map.branch_preimages(fx) {
                let dz = map.df(pre.x).abs();
                let mz = measure.atom_at(pre.x, tol);
                if dz < 1e-12 && t < 0.0 {
                    continue; // excluded degenerate term
                }
                upper += lambda * dz.powf(t) * mz;
            }
            StarDefect {
                point: x,
                lower_slack,
                upper_slack: upper - mfx,
                invalid_atom,
            }
        })
        .collect()
}

/// Geometric lambda schedule around a pressure estimate: the defect-minimal
/// lambda over exp(P)·(1 + 2^-j), j = 0..8.
pub fn best_lambda_scan(
    map: &MultimodalMap,
    repeller: &Repeller,
    z0: f64,
    t: f64,
    p_estimate: f64,
    k_max: u32,
    test_intervals: &[Interval],
    singular: &[f64],
) -> Result<(f64, f64)> {
    let mut best = (f64::NAN, f64::INFINITY);
    for j in 0..=8 {
        let lambda = p_estimate.exp() * (1.0 + 2f64.powi(-j));
        let mu = patterson_sullivan(map, repeller, z0, t, lambda, k_max)?;
        let defect = conformality_defect(map, &mu, t, lambda, test_intervals, singular)?;
        if defect < best.1 {
            best = (lambda, defect);
        }
    }
    Ok(best)
}

/// Deterministic lap-interior test intervals, sized a few percent of their
/// lap so the image mass of the truncation frontier stays visible but small.
pub fn lap_interior_test_intervals(
    map: &MultimodalMap,
    count: usize,
    seed: u64,
) -> Vec<Interval> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let li = rng.gen_range(0..map.laps.len());
        let span = map.laps[li].span;
        let len = span.len();
        let a = span.lo + len * rng.gen_range(0.15..0.75);
        let b = a + len * rng.gen_range(0.02..0.05);
        if b < span.hi - 0.05 * len {
            out.push(Interval::new(a, b));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use crate::repeller::singular_set;

    #[test]
    fn k_max_zero_is_dirac() {
        let sys = registry::cheb3();
        let mu = patterson_sullivan(&sys.map, &sys.repeller, 0.3, 1.0, 1.001, 0).unwrap();
        assert_eq!(mu.atoms.len(), 1);
        assert_eq!(mu.atoms[0], (0.3, 1.0));
    }

    #[test]
    fn mass_normalised_and_nonnegative() {
        let sys = registry::cheb3();
        let mu = patterson_sullivan(&sys.map, &sys.repeller, 0.3, 1.0, 1.001, 8).unwrap();
        let total: f64 = mu.atoms.iter().map(|a| a.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(mu.atoms.iter().all(|a| a.1 >= 0.0));
        // atom count: sum of 3^k
        let expect: usize = (0..=8).map(|k| 3usize.pow(k)).sum();
        assert_eq!(mu.atoms.len(), expect);
    }

    #[test]
    fn t0_measure_approximates_max_entropy() {
        // counting weights, lambda slightly above 3: the measure of maximal
        // entropy for cheb3 is the arcsine law
        let sys = registry::cheb3();
        let mu = patterson_sullivan(&sys.map, &sys.repeller, 0.3, 0.0, 3.01, 10).unwrap();
        let arcsine = |x: f64| 1.0 - x.clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
        let d = mu.sup_cdf_distance(arcsine);
        assert!(d < 0.08, "sup-CDF distance {d}");
    }

    #[test]
    fn t1_measure_approximates_lebesgue() {
        // the (1,1)-conformal measure for the full cubic is normalised
        // Lebesgue; the finite-depth surrogate is close in CDF
        let sys = registry::cheb3();
        let mu = patterson_sullivan(&sys.map, &sys.repeller, 0.3, 1.0, 1.001, 12).unwrap();
        let lebesgue = |x: f64| (x.clamp(-1.0, 1.0) + 1.0) / 2.0;
        let d = mu.sup_cdf_distance(lebesgue);
        assert!(d < 0.08, "sup-CDF distance {d}");
    }

    #[test]
    fn defect_small_on_cheb3_t1() {
        let sys = registry::cheb3();
        let sset = singular_set(&sys.map, &sys.repeller);
        let mu = patterson_sullivan(&sys.map, &sys.repeller, 0.3, 1.0, 1.001, 12).unwrap();
        let ivs = lap_interior_test_intervals(&sys.map, 20, 7);
        let d = conformality_defect(&sys.map, &mu, 1.0, 1.001, &ivs, &sset.all).unwrap();
        assert!(d <= 1e-2, "defect {d}");
    }

    #[test]
    fn defect_rejects_interval_over_turning_point() {
        let sys = registry::cheb3();
        let sset = singular_set(&sys.map, &sys.repeller);
        let mu = patterson_sullivan(&sys.map, &sys.repeller, 0.3, 1.0, 1.001, 4).unwrap();
        let bad = [Interval::new(0.4, 0.6)];
        assert!(matches!(
            conformality_defect(&sys.map, &mu, 1.0, 1.001, &bad, &sset.all),
            Err(Error::IntervalNotInjective { .. })
        ));
    }

    #[test]
    fn dirac_at_fixed_point_has_zero_defect_away_from_it() {
        let sys = registry::cheb3();
        let mu = AtomicMeasure {
            atoms: vec![(1.0, 1.0)],
            total_before_normalisation: 1.0,
            t: 1.0,
            lambda: 1.0,
            depth: 0,
            base_point: 1.0,
            skipped_branches: 0,
        };
        let ivs = [Interval::new(0.0, 0.1)];
        let sset = singular_set(&sys.map, &sys.repeller);
        let d = conformality_defect(&sys.map, &mu, 1.0, 1.0, &ivs, &sset.all).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn star_defect_synthetic_atom() {
        // an atom at f(x) only: the lower inequality holds with strict slack
        let sys = registry::notwi();
        let sset = singular_set(&sys.map, &sys.repeller);
        assert!(!sset.no_points.is_empty());
        let x = sset.no_points[0];
        let fx = sys.map.f(x);
        let mu = AtomicMeasure {
            atoms: vec![(fx, 1.0)],
            total_before_normalisation: 1.0,
            t: 1.0,
            lambda: 1.0,
            depth: 0,
            base_point: fx,
            skipped_branches: 0,
        };
        let reports = star_defect_at_no_points(&sys.map, &mu, 1.0, 1.0, &sset.no_points);
        let rep = reports.iter().find(|r| r.point == x).unwrap();
        assert!(rep.lower_slack > 0.0);
        assert!(!rep.invalid_atom);
    }

    #[test]
    fn star_defect_flags_negative_t_critical_atom() {
        let sys = registry::cheb3();
        let mu = AtomicMeasure {
            atoms: vec![(0.5, 1.0)],
            total_before_normalisation: 1.0,
            t: -1.0,
            lambda: 1.0,
            depth: 0,
            base_point: 0.5,
            skipped_branches: 0,
        };
        let reports = star_defect_at_no_points(&sys.map, &mu, -1.0, 1.0, &[0.5]);
        assert!(reports[0].invalid_atom);
    }

    #[test]
    fn ps_measure_star_slacks_vanish_on_notwi() {
        // the depth-10 measure has no atoms at the images of the NO points,
        // so the slack pair is (mass at image, -mass at image) ~ small
        let sys = registry::notwi();
        let sset = singular_set(&sys.map, &sys.repeller);
        let mu = patterson_sullivan(&sys.map, &sys.repeller, 1.0, 1.0, 1.05, 10).unwrap();
        for rep in star_defect_at_no_points(&sys.map, &mu, 1.0, 1.05, &sset.no_points) {
            assert!(rep.lower_slack.abs() < 0.05, "{:?}", rep);
            assert!(!rep.invalid_atom);
        }
    }
}
