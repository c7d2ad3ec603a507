//! Nice sets and couples around the restricted singular set, the canonical
//! induced (first-good-time) map over them, its two-variable pressure, and
//! the projection of induced equilibrium weights back to the original system.
//!
//! A nice set V is a union of open intervals, one per singular point, whose
//! boundary never returns into V. Endpoints are drawn from the backward
//! orbit of an anchor periodic orbit, so the forward orbit of every endpoint
//! is known exactly as a finite chain followed by the anchor cycle; the
//! verification walks that chain instead of iterating forward (forward
//! iteration would drift off the chain at the expansion rate and the scan
//! would be meaningless after ~30 steps).

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::MultimodalMap;
use crate::numerics::{left_eigenvector, power_iteration};
use crate::orbit::{periodic_points, OrbitKind};
use crate::registry::System;
use crate::repeller::{Membership, SingularSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NiceComponent {
    /// The singular point enclosed by this component.
    pub center: f64,
    pub interval: Interval,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NiceSet {
    pub components: Vec<NiceComponent>,
    pub verification_horizon: u32,
    /// Min distance of the forward orbits of the boundary to the set;
    /// positive means the no-return property held for every step checked.
    pub boundary_return_residual: f64,
}

impl NiceSet {
    pub fn component_of(&self, x: f64) -> Option<usize> {
        self.components
            .iter()
            .position(|c| c.interval.contains_strict(x))
    }

    pub fn contains(&self, x: f64) -> bool {
        self.component_of(x).is_some()
    }

    pub fn dist_to(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.interval.dist_to(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_diameter(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.interval.len())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NiceCouple {
    pub outer: NiceSet,
    pub inner: NiceSet,
    /// Smallest one-sided gap between inner and outer, relative to the inner
    /// component length.
    pub epsilon_scale: f64,
}

/// Backward-orbit pool of an anchor periodic orbit, with parent links: the
/// forward orbit of any pool point is its stored chain followed by the
/// anchor cycle.
struct AnchorPool {
    cycle_len: usize,
    points: Vec<f64>,
    parents: Vec<usize>,
}

impl AnchorPool {
    fn build(map: &MultimodalMap, cycle: &[f64], depth: u32, budget: usize) -> Self {
        let mut points: Vec<f64> = cycle.to_vec();
        let mut parents: Vec<usize> = (0..cycle.len()).map(|i| (i + 1) % cycle.len()).collect();
        let mut frontier: Vec<usize> = (0..points.len()).collect();
        for _ in 0..depth {
            let mut next = Vec::new();
            for &pi in &frontier {
                for pre in map.branch_preimages(points[pi]) {
                    points.push(pre.x);
                    parents.push(pi);
                    next.push(points.len() - 1);
                }
            }
            frontier = next;
            if points.len() > budget {
                break;
            }
        }
        AnchorPool {
            cycle_len: cycle.len(),
            points,
            parents,
        }
    }

    /// Forward orbit of pool point `idx` (inclusive), `steps` entries.
    fn forward_orbit(&self, idx: usize, steps: u32) -> Vec<f64> {
        let mut out = Vec::with_capacity(steps as usize);
        let mut cur = idx;
        while (out.len() as u32) < steps {
            out.push(self.points[cur]);
            if cur < self.cycle_len {
                let mut c = cur;
                while (out.len() as u32) < steps {
                    c = (c + 1) % self.cycle_len;
                    out.push(self.points[c]);
                }
                break;
            }
            cur = self.parents[cur];
        }
        out
    }

    /// Nearest pool points strictly left and right of x.
    fn flanks(&self, x: f64) -> (Option<usize>, Option<usize>) {
        let mut left: Option<usize> = None;
        let mut right: Option<usize> = None;
        for (i, &p) in self.points.iter().enumerate() {
            if p < x && left.map_or(true, |l| p > self.points[l]) {
                left = Some(i);
            }
            if p > x && right.map_or(true, |r| p < self.points[r]) {
                right = Some(i);
            }
        }
        (left, right)
    }
}

/// Picks an anchor periodic orbit whose points stay away from the forward
/// orbits of the singular set; indifferent orbits are never used.
fn anchor_orbit(sys: &System, sset: &SingularSet, budget: u64) -> Result<Vec<f64>> {
    let mut post_singular: Vec<f64> = Vec::new();
    for &s in &sset.all {
        let mut cur = sys.map.f(s);
        for _ in 0..24 {
            post_singular.push(cur);
            cur = sys.map.f(cur);
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for n in 1..=4u32 {
        for orb in periodic_points(&sys.map, &sys.repeller, n, budget)? {
            if orb.in_k == Membership::NotInK
                || orb.period != n
                || orb.kind == OrbitKind::Indifferent
            {
                continue;
            }
            let margin = orb
                .points
                .iter()
                .map(|&p| {
                    post_singular
                        .iter()
                        .chain(sset.all.iter())
                        .map(|&q| (p - q).abs())
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::INFINITY, f64::min);
            if margin > 1e-3 && best.as_ref().map_or(true, |(m, _)| margin > *m) {
                best = Some((margin, orb.points.clone()));
            }
        }
    }
    best.map(|(_, pts)| pts).ok_or(Error::NoSuitableOrbit)
}

/// Builds a nice set with per-side radii at most `radius_target` where the
/// backward-orbit pool allows it, deepening the pool until it does.
pub fn build_nice_set(
    sys: &System,
    sset: &SingularSet,
    radius_target: f64,
    horizon: u32,
    budget: u64,
) -> Result<NiceSet> {
    let anchor = anchor_orbit(sys, sset, budget)?;
    let mut last = Error::NoSuitableOrbit;
    for depth in 4..=10u32 {
        let pool = AnchorPool::build(&sys.map, &anchor, depth, 2_000_000);
        match assemble_nice(sset, &pool, radius_target, horizon) {
            Ok(set) => return Ok(set),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn assemble_nice(
    sset: &SingularSet,
    pool: &AnchorPool,
    radius_target: f64,
    horizon: u32,
) -> Result<NiceSet> {
    let mut components = Vec::new();
    let mut flank_idx = Vec::new();
    for &c in &sset.all {
        let (l, r) = pool.flanks(c);
        let (l, r) = (
            l.ok_or(Error::NoSuitableOrbit)?,
            r.ok_or(Error::NoSuitableOrbit)?,
        );
        let (a, b) = (pool.points[l], pool.points[r]);
        if (c - a) > radius_target || (b - c) > radius_target {
            return Err(Error::VerificationFailed {
                residual: (c - a).max(b - c),
                horizon: 0,
            });
        }
        components.push(NiceComponent {
            center: c,
            interval: Interval::new(a, b),
        });
        flank_idx.push((l, r));
    }
    let set = NiceSet {
        components,
        verification_horizon: horizon,
        boundary_return_residual: f64::INFINITY,
    };
    let residual = verify_no_return(pool, &flank_idx, horizon, |x| set.dist_to(x));
    if residual <= 0.0 {
        return Err(Error::VerificationFailed { residual, horizon });
    }
    Ok(NiceSet {
        boundary_return_residual: residual,
        ..set
    })
}

/// Min distance of the forward orbits of all flank points to the set over
/// `horizon` steps. The orbit beyond the stored chain cycles on the anchor,
/// so once the horizon exceeds the chain length the scan covers all time.
fn verify_no_return<F: Fn(f64) -> f64>(
    pool: &AnchorPool,
    flanks: &[(usize, usize)],
    horizon: u32,
    dist: F,
) -> f64 {
    let mut residual = f64::INFINITY;
    for &(l, r) in flanks {
        for idx in [l, r] {
            for &q in pool.forward_orbit(idx, horizon).iter().skip(1) {
                residual = residual.min(dist(q));
            }
        }
    }
    residual
}

/// Builds a nice couple: outer components from a shallower pool cut, inner
/// from a deeper one, with closure(V) strictly inside the outer set and the
/// couple condition (inner boundary orbits avoid the outer set) verified
/// along the known chains.
pub fn build_nice_couple(
    sys: &System,
    sset: &SingularSet,
    radius_target: f64,
    horizon: u32,
    budget: u64,
) -> Result<NiceCouple> {
    let anchor = anchor_orbit(sys, sset, budget)?;
    let mut last = Error::NoSuitableOrbit;
    for outer_depth in 3..=9u32 {
        let outer_pool = AnchorPool::build(&sys.map, &anchor, outer_depth, 2_000_000);
        let outer = match assemble_nice(sset, &outer_pool, radius_target, horizon) {
            Ok(set) => set,
            Err(e) => {
                last = e;
                continue;
            }
        };
        for extra in 1..=3u32 {
            let inner_pool = AnchorPool::build(&sys.map, &anchor, outer_depth + extra, 4_000_000);
            let mut inner_flanks = Vec::new();
            let mut components = Vec::new();
            let mut nested = true;
            for (k, &c) in sset.all.iter().enumerate() {
                let (Some(l), Some(r)) = inner_pool.flanks(c) else {
                    nested = false;
                    break;
                };
                let (a, b) = (inner_pool.points[l], inner_pool.points[r]);
                let out_iv = outer.components[k].interval;
                if !(out_iv.lo < a && b < out_iv.hi) {
                    nested = false;
                    break;
                }
                components.push(NiceComponent {
                    center: c,
                    interval: Interval::new(a, b),
                });
                inner_flanks.push((l, r));
            }
            if !nested {
                continue;
            }
            let residual = {
                let outer_ref = &outer;
                verify_no_return(&inner_pool, &inner_flanks, horizon, |x| outer_ref.dist_to(x))
            };
            if residual <= 0.0 {
                last = Error::VerificationFailed { residual, horizon };
                continue;
            }
            let inner = NiceSet {
                components,
                verification_horizon: horizon,
                boundary_return_residual: residual,
            };
            let mut eps: f64 = f64::INFINITY;
            for (ic, oc) in inner.components.iter().zip(&outer.components) {
                let gl = ic.interval.lo - oc.interval.lo;
                let gr = oc.interval.hi - ic.interval.hi;
                eps = eps.min(gl.min(gr) / ic.interval.len());
            }
            return Ok(NiceCouple {
                outer,
                inner,
                epsilon_scale: eps,
            });
        }
    }
    Err(last)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedBranch {
    /// Domain component W inside the inner set.
    pub domain: Interval,
    /// The least good time on W.
    pub return_time: u32,
    /// Index of the singular point whose inner component contains W.
    pub source: usize,
    /// Index of the component onto which f^m maps W.
    pub target: usize,
    pub sup_abs_phi_prime: f64,
    pub inf_abs_phi_prime: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedSystem {
    pub couple: NiceCouple,
    pub branches: Vec<InducedBranch>,
    pub depth_cap: u32,
    /// Σ of inner pull-back diameters still unresolved at the cap.
    pub truncation_mass_bound: f64,
    /// Same, relative to the total inner-set length.
    pub truncation_fraction: f64,
    pub groups: usize,
}

/// Enumerates the canonical induced map by BFS over diffeomorphic pull-back
/// chains of the outer components. A chain dies when its component meets the
/// singular set (no deeper time along it can be good) and emits a branch the
/// first time its inner pull-back lands inside the inner set.
pub fn enumerate_branches(
    sys: &System,
    sset: &SingularSet,
    couple: &NiceCouple,
    depth_cap: u32,
    budget: u64,
) -> Result<InducedSystem> {
    let map = &sys.map;
    let groups = couple.inner.components.len();
    let mut branches: Vec<InducedBranch> = Vec::new();
    let mut frontier_mass = 0.0f64;
    let mut nodes = 0u64;
    for target in 0..groups {
        let outer0 = couple.outer.components[target].interval;
        let inner0 = couple.inner.components[target].interval;
        let mut frontier: Vec<(Interval, Interval)> = vec![(outer0, inner0)];
        for m in 1..=depth_cap {
            let mut next = Vec::new();
            for (oc, ic) in &frontier {
                for (li, lap) in map.laps.iter().enumerate() {
                    let img = lap.image(&map.expr);
                    // full single-branch coverage; clipped chains can never
                    // carry a good time
                    if !(img.lo <= oc.lo + 1e-12 && oc.hi <= img.hi + 1e-12) {
                        continue;
                    }
                    let o2 = Interval::spanning(
                        map.invert_monotone(li, oc.lo),
                        map.invert_monotone(li, oc.hi),
                    );
                    if sset.all.iter().any(|&s| o2.contains(s)) {
                        continue;
                    }
                    if !meets_repeller(sys, &o2) {
                        continue;
                    }
                    let i2 = Interval::spanning(
                        map.invert_monotone(li, ic.lo),
                        map.invert_monotone(li, ic.hi),
                    );
                    nodes += 1;
                    if nodes > budget {
                        return Err(Error::BranchBudgetExceeded { nodes });
                    }
                    if let Some(src) = couple.inner.component_of(i2.midpoint()) {
                        let (sup, inf) = phi_prime_bounds(map, &i2, m);
                        branches.push(InducedBranch {
                            domain: i2,
                            return_time: m,
                            source: src,
                            target,
                            sup_abs_phi_prime: sup,
                            inf_abs_phi_prime: inf,
                        });
                    } else {
                        next.push((o2, i2));
                    }
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        frontier_mass += frontier.iter().map(|(_, ic)| ic.len()).sum::<f64>();
    }
    let total_inner: f64 = couple
        .inner
        .components
        .iter()
        .map(|c| c.interval.len())
        .sum();
    branches.sort_by(|a, b| {
        a.domain
            .lo
            .partial_cmp(&b.domain.lo)
            .unwrap()
            .then(a.return_time.cmp(&b.return_time))
    });
    Ok(InducedSystem {
        couple: couple.clone(),
        branches,
        depth_cap,
        truncation_mass_bound: frontier_mass,
        truncation_fraction: frontier_mass / total_inner,
        groups,
    })
}

fn meets_repeller(sys: &System, iv: &Interval) -> bool {
    if !sys.repeller.components.iter().any(|c| c.intersects(iv)) {
        return false;
    }
    !sys
        .repeller
        .holes
        .iter()
        .any(|h| h.lo <= iv.lo && iv.hi <= h.hi)
}

/// Bounds of |phi'_W| = 1/|(f^m)'| over the branch domain, by dense sampling.
fn phi_prime_bounds(map: &MultimodalMap, w: &Interval, m: u32) -> (f64, f64) {
    let nsamp = 24;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=nsamp {
        let x = w.lo + w.len() * i as f64 / nsamp as f64;
        let d = map.log_deriv_along(x, m);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    ((-lo).exp(), (-hi).exp())
}

/// Grouped weight matrix: entry [target][source] sums branch weights
/// |phi'|^t e^{-p m} over branches from that source component landing on
/// that target. Word admissibility is exactly this grouping.
fn grouped_matrix(system: &InducedSystem, t: f64, p: f64, upper: bool) -> Vec<Vec<f64>> {
    let g = system.groups;
    let mut m = vec![vec![0.0; g]; g];
    for br in &system.branches {
        // |phi'|^t is monotone in |phi'|: pick the end matching the bound
        let phi = if upper == (t >= 0.0) {
            br.sup_abs_phi_prime
        } else {
            br.inf_abs_phi_prime
        };
        let w = (t * phi.ln() - p * br.return_time as f64).exp();
        m[br.target][br.source] += w;
    }
    m
}

/// Bracket on the induced pressure at (t, p): log spectral radii of the
/// grouped matrices with inf- and sup-derivative weights.
pub fn induced_pressure(system: &InducedSystem, t: f64, p: f64) -> Result<(f64, f64)> {
    if system.branches.is_empty() {
        return Err(Error::Divergent { t, p });
    }
    let msup = grouped_matrix(system, t, p, true);
    let minf = grouped_matrix(system, t, p, false);
    if msup.iter().flatten().any(|&v| !v.is_finite()) {
        return Err(Error::Divergent { t, p });
    }
    let (rho_hi, _) = power_iteration(&msup, 1e-13, 50_000);
    let (rho_lo, _) = power_iteration(&minf, 1e-13, 50_000);
    Ok((rho_lo.ln(), rho_hi.ln()))
}

/// Root p(t) of the upper induced-pressure bracket, by bisection to `tol`;
/// strict monotonicity in p is asserted along the way.
pub fn solve_p(system: &InducedSystem, t: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-4.0f64, 4.0f64);
    let val = |p: f64| induced_pressure(system, t, p).map(|(_, h)| h);
    let vlo = val(lo)?;
    let vhi = val(hi)?;
    if !(vlo > 0.0 && vhi < 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut prev = vlo;
    let mut prev_p = lo;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let v = val(mid)?;
        if mid > prev_p {
            assert!(v < prev, "induced pressure must decrease in p");
        }
        prev = v;
        prev_p = mid;
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let n = self.masses.len();
        (0..=n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / n as f64)
            .collect()
    }

    /// Sup distance between the histogram CDF and a reference CDF at the bin
    /// edges.
    pub fn sup_cdf_distance<F: Fn(f64) -> f64>(&self, reference: F) -> f64 {
        let cdf = self.cdf();
        let edges = self.bin_edges();
        let mut worst = 0.0f64;
        for (i, &c) in cdf.iter().enumerate() {
            let r_hi = reference(edges[i + 1]);
            let r_lo = reference(edges[i]);
            let c_prev = if i == 0 { 0.0 } else { cdf[i - 1] };
            worst = worst.max((c - r_hi).abs()).max((c_prev - r_lo).abs());
        }
        worst
    }
}

/// Projects the induced Gibbs weights back to the original system.
///
/// Branch mass is the stationary letter weight of the grouped matrix
/// (left/right Perron vectors); within each branch the mass is distributed
/// over sampled points with the conformal Jacobian weight, and every point
/// deposits its mass at each forward image before the return time.
pub fn equilibrium_projection(
    system: &InducedSystem,
    map: &MultimodalMap,
    t: f64,
    p: f64,
    bins: usize,
) -> Result<Histogram> {
    if system.branches.is_empty() {
        return Err(Error::Divergent { t, p });
    }
    let msup = grouped_matrix(system, t, p, true);
    let (rho, right) = power_iteration(&msup, 1e-13, 50_000);
    let left = left_eigenvector(&msup, 1e-13, 50_000);
    if rho <= 0.0 {
        return Err(Error::Divergent { t, p });
    }
    let span = map.domain_span();
    let mut masses = vec![0.0f64; bins];
    let nsamp = 8usize;
    for br in &system.branches {
        let w_mid = 0.5 * (br.sup_abs_phi_prime + br.inf_abs_phi_prime);
        let gibbs = left[br.source] * (t * w_mid.ln() - p * br.return_time as f64).exp()
            * right[br.target];
        if gibbs <= 0.0 {
            continue;
        }
        // sample points inside the branch; uniform-in-target sampling means
        // Jacobian weights |(f^m)'(x)| on the domain side
        let mut pts = Vec::with_capacity(nsamp);
        let mut wts = Vec::with_capacity(nsamp);
        for k in 0..nsamp {
            let x = br.domain.lo + br.domain.len() * (k as f64 + 0.5) / nsamp as f64;
            let jac = map.log_deriv_along(x, br.return_time).exp();
            pts.push(x);
            wts.push(jac);
        }
        let wsum: f64 = wts.iter().sum();
        for (x0, wk) in pts.iter().zip(&wts) {
            let mass = gibbs * wk / wsum;
            let mut x = *x0;
            for _ in 0..br.return_time {
                let b = (((x - span.lo) / span.len()) * bins as f64).floor() as i64;
                let b = b.clamp(0, bins as i64 - 1) as usize;
                masses[b] += mass;
                x = map.f(x);
            }
        }
    }
    let total: f64 = masses.iter().sum();
    if total <= 0.0 {
        return Err(Error::Divergent { t, p });
    }
    for m in &mut masses {
        *m /= total;
    }
    Ok(Histogram {
        lo: span.lo,
        hi: span.hi,
        masses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use crate::repeller::singular_set;

    const BUDGET: u64 = 50_000_000;

    #[test]
    fn nice_set_cheb3_small_radius() {
        let sys = registry::cheb3();
        let sset = singular_set(&sys.map, &sys.repeller);
        let set = build_nice_set(&sys, &sset, 0.05, 200, BUDGET).unwrap();
        assert_eq!(set.components.len(), 2);
        for c in &set.components {
            assert!(c.interval.contains_strict(c.center));
            assert!(c.interval.len() <= 0.1);
        }
        assert!(
            set.boundary_return_residual > 0.0,
            "residual {}",
            set.boundary_return_residual
        );
    }

    #[test]
    fn nice_couple_cheb3() {
        let sys = registry::cheb3();
        let sset = singular_set(&sys.map, &sys.repeller);
        let couple = build_nice_couple(&sys, &sset, 0.05, 200, BUDGET).unwrap();
        for (ic, oc) in couple
            .inner
            .components
            .iter()
            .zip(&couple.outer.components)
        {
            assert!(oc.interval.encloses_strictly(&ic.interval));
        }
        assert!(couple.epsilon_scale > 0.0);
        assert!(couple.inner.boundary_return_residual > 0.0);
    }

    #[test]
    fn shrinking_radius_shrinks_couple() {
        let sys = registry::cheb3();
        let sset = singular_set(&sys.map, &sys.repeller);
        let big = build_nice_couple(&sys, &sset, 0.1, 200, BUDGET).unwrap();
        let small = build_nice_couple(&sys, &sset, 0.03, 200, BUDGET).unwrap();
        assert!(small.inner.max_diameter() <= big.inner.max_diameter() + 1e-12);
        assert!(small.epsilon_scale > 0.0);
    }

    #[test]
    fn branches_map_onto_targets() {
        let sys = registry::cheb3();
        let sset = singular_set(&sys.map, &sys.repeller);
        let couple = build_nice_couple(&sys, &sset, 0.05, 200, BUDGET).unwrap();
        let system = enumerate_branches(&sys, &sset, &couple, 8, BUDGET).unwrap();
        assert!(!system.branches.is_empty());
        for br in system.branches.iter().take(200) {
            // f^m maps the branch domain onto the inner target component
            let a = sys.map.iterate(br.domain.lo, br.return_time);
            let b = sys.map.iterate(br.domain.hi, br.return_time);
            let img = Interval::spanning(a, b);
            let target = couple.inner.components[br.target].interval;
            assert!(
                (img.lo - target.lo).abs() < 1e-6 && (img.hi - target.hi).abs() < 1e-6,
                "branch m={} img=({:.8},{:.8}) target=({:.8},{:.8})",
                br.return_time,
                img.lo,
                img.hi,
                target.lo,
                target.hi
            );
            // domain sits inside its source component
            let src = couple.inner.components[br.source].interval;
            assert!(src.encloses(&br.domain, 1e-9));
            assert!(br.inf_abs_phi_prime <= br.sup_abs_phi_prime);
        }
        // branch domains are pairwise disjoint
        for w in system.branches.windows(2) {
            assert!(w[1].domain.lo >= w[0].domain.hi - 1e-12);
        }
    }

    #[test]
    fn branch_counts_grow_geometrically() {
        let sys = registry::cheb3();
        let sset = singular_set(&sys.map, &sys.repeller);
        let couple = build_nice_couple(&sys, &sset, 0.05, 200, BUDGET).unwrap();
        let system = enumerate_branches(&sys, &sset, &couple, 10, BUDGET).unwrap();
        let mut by_m = std::collections::BTreeMap::new();
        for br in &system.branches {
            *by_m.entry(br.return_time).or_insert(0usize) += 1;
        }
        let counts: Vec<usize> = by_m.values().copied().collect();
        // later levels dominate
        assert!(counts.last().unwrap() > counts.first().unwrap());
    }

    #[test]
    fn toy_single_branch_closed_forms() {
        // one branch, m = 2, |phi'| = 1/4: P(t=1, p=0) = log(1/4) and the
        // p-root at t=1 is -(1/2) log 4 = -log 2
        let couple = NiceCouple {
            outer: NiceSet {
                components: vec![NiceComponent {
                    center: 0.0,
                    interval: Interval::new(-1.0, 1.0),
                }],
                verification_horizon: 0,
                boundary_return_residual: 1.0,
            },
            inner: NiceSet {
                components: vec![NiceComponent {
                    center: 0.0,
                    interval: Interval::new(-0.5, 0.5),
                }],
                verification_horizon: 0,
                boundary_return_residual: 1.0,
            },
            epsilon_scale: 0.5,
        };
        let system = InducedSystem {
            couple,
            branches: vec![InducedBranch {
                domain: Interval::new(-0.1, 0.1),
                return_time: 2,
                source: 0,
                target: 0,
                sup_abs_phi_prime: 0.25,
                inf_abs_phi_prime: 0.25,
            }],
            depth_cap: 2,
            truncation_mass_bound: 0.0,
            truncation_fraction: 0.0,
            groups: 1,
        };
        let (lo, hi) = induced_pressure(&system, 1.0, 0.0).unwrap();
        assert!((lo - 0.25f64.ln()).abs() < 1e-12);
        assert!((hi - 0.25f64.ln()).abs() < 1e-12);
        let root = solve_p(&system, 1.0, 1e-10).unwrap();
        assert!((root + 2f64.ln()).abs() < 1e-8, "{root}");
        // p -> +inf damps both brackets monotonically
        let (l1, h1) = induced_pressure(&system, 1.0, 1.0).unwrap();
        let (l2, h2) = induced_pressure(&system, 1.0, 3.0).unwrap();
        assert!(h2 < h1 && l2 < l1);
    }

    #[test]
    fn bracket_strictly_decreasing_in_p() {
        let sys = registry::cheb3();
        let sset = singular_set(&sys.map, &sys.repeller);
        let couple = build_nice_couple(&sys, &sset, 0.05, 200, BUDGET).unwrap();
        let system = enumerate_branches(&sys, &sset, &couple, 8, BUDGET).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..6 {
            let p = -0.5 + 0.25 * i as f64;
            let (_, hi) = induced_pressure(&system, 1.0, p).unwrap();
            assert!(hi < prev, "hi({p}) = {hi} not below {prev}");
            prev = hi;
        }
    }

    #[test]
    fn deeper_cap_only_adds_branches() {
        let sys = registry::cheb3();
        let sset = singular_set(&sys.map, &sys.repeller);
        let couple = build_nice_couple(&sys, &sset, 0.1, 200, BUDGET).unwrap();
        let s6 = enumerate_branches(&sys, &sset, &couple, 6, BUDGET).unwrap();
        let s9 = enumerate_branches(&sys, &sset, &couple, 9, BUDGET).unwrap();
        assert!(s9.branches.len() > s6.branches.len());
        let (lo6, hi6) = induced_pressure(&s6, 1.0, 0.0).unwrap();
        let (lo9, hi9) = induced_pressure(&s9, 1.0, 0.0).unwrap();
        assert!(lo9 >= lo6 - 1e-12 && hi9 >= hi6 - 1e-12);
        assert!(s9.truncation_fraction < s6.truncation_fraction);
    }
}
