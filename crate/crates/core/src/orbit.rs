//! Backward-orbit machinery: preimage trees with accumulated derivatives,
//! interval pull-backs, periodic-orbit enumeration per itinerary cylinder,
//! and the critical-avoidance / weak-isolation diagnostics.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::MultimodalMap;
use crate::registry::System;
use crate::repeller::{Membership, Repeller};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default cylinder budget for periodic-orbit enumeration.
pub const CYLINDER_BUDGET: u64 = 43_046_721; // 3^16

/// Residual tolerance for polished periodic points.
pub const PERIODIC_RESIDUAL: f64 = 1e-10;

/// Relative indifference band on |multiplier|^(1/period).
pub const INDIFFERENT_BAND: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct PreimageNode {
    pub point: f64,
    pub depth: u32,
    /// Σ log |f'| over the forward path from this node to the root.
    pub log_abs_deriv: f64,
    /// Index of the parent in the previous level, usize::MAX at the root.
    pub parent: usize,
    /// A derivative-zero point occurs on the path (tangency branch).
    pub tangency_on_path: bool,
}

/// Backward orbit tree of a base point, level by level.
#[derive(Debug, Clone)]
pub struct PreimageTree {
    pub root: f64,
    pub levels: Vec<Vec<PreimageNode>>,
}

impl PreimageTree {
    pub fn leaves(&self) -> &[PreimageNode] {
        self.levels.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn depth(&self) -> u32 {
        (self.levels.len() as u32).saturating_sub(1)
    }
}

/// All x with f^n(x) = z and x in K, with accumulated log-derivatives.
///
/// Membership pruning is exact along branches: every intermediate point of a
/// kept branch lies in Î_K \ holes, and the forward orbit of a node consists
/// precisely of its ancestors followed by the certified base point, so kept
/// nodes are in K by maximality.
pub fn preimage_tree(
    map: &MultimodalMap,
    repeller: &Repeller,
    z: f64,
    n: u32,
) -> Result<PreimageTree> {
    // the caller certifies z in K (periodic certificate or backward descent);
    // admissibility of the point itself is all that can be checked here
    if !repeller.point_admissible(z) {
        return Err(Error::EmptyTree { z, depth: n });
    }
    let mut levels = Vec::with_capacity(n as usize + 1);
    levels.push(vec![PreimageNode {
        point: z,
        depth: 0,
        log_abs_deriv: 0.0,
        parent: usize::MAX,
        tangency_on_path: false,
    }]);
    for depth in 1..=n {
        let prev = levels.last().unwrap();
        let expand = |(pi, node): (usize, &PreimageNode)| -> Vec<PreimageNode> {
            map.branch_preimages(node.point)
                .into_iter()
                .filter(|p| repeller.point_admissible(p.x))
                .map(|p| {
                    let d = map.df(p.x).abs();
                    PreimageNode {
                        point: p.x,
                        depth,
                        log_abs_deriv: node.log_abs_deriv
                            + if p.tangency { f64::NEG_INFINITY } else { d.ln() },
                        parent: pi,
                        tangency_on_path: node.tangency_on_path || p.tangency,
                    }
                })
                .collect()
        };
        // parallel over parents, merged in fixed parent order
        let next: Vec<PreimageNode> = if prev.len() >= 64 {
            prev.par_iter()
                .enumerate()
                .map(expand)
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        } else {
            prev.iter().enumerate().flat_map(expand).collect()
        };
        if next.is_empty() {
            return Err(Error::EmptyTree { z, depth });
        }
        levels.push(next);
    }
    Ok(PreimageTree { root: z, levels })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PullBack {
    pub interval: Interval,
    pub order: u32,
    pub meets_k: bool,
    /// f^order restricted to the interval is injective.
    pub is_diffeo: bool,
    pub contains_singular: bool,
}

/// Components of f^{-n}(T) that meet K, built lap-by-lap from endpoint
/// preimages with critical-point insertions; components sharing an endpoint
/// are merged (they join across a turning point).
pub fn pull_back_components(
    map: &MultimodalMap,
    repeller: &Repeller,
    target: Interval,
    n: u32,
    singular: &[f64],
) -> Vec<PullBack> {
    let mut current = vec![PullBack {
        interval: target,
        order: 0,
        meets_k: true,
        is_diffeo: true,
        contains_singular: singular.iter().any(|&s| target.contains(s)),
    }];
    for order in 1..=n {
        let mut pieces: Vec<(Interval, bool)> = Vec::new(); // (interval, parent_diffeo)
        for pb in &current {
            for (li, lap) in map.laps.iter().enumerate() {
                let img = lap.image(&map.expr);
                let Some(hit) = img.intersection(&pb.interval) else {
                    continue;
                };
                if hit.len() == 0.0 && hit.lo != img.lo && hit.lo != img.hi {
                    continue;
                }
                let a = map.invert_monotone(li, hit.lo);
                let b = map.invert_monotone(li, hit.hi);
                pieces.push((Interval::spanning(a, b), pb.is_diffeo));
            }
        }
        pieces.sort_by(|x, y| x.0.lo.partial_cmp(&y.0.lo).unwrap());
        // merge pieces sharing an endpoint (turning-point joins)
        let mut merged: Vec<(Interval, bool, bool)> = Vec::new(); // (iv, diffeo, joined)
        for (iv, pd) in pieces {
            if let Some(last) = merged.last_mut() {
                if iv.lo - last.0.hi < 1e-12 {
                    last.0 = Interval::new(last.0.lo, last.0.hi.max(iv.hi));
                    last.1 = false; // folded across a critical point
                    last.2 = true;
                    continue;
                }
            }
            merged.push((iv, pd, false));
        }
        current = merged
            .into_iter()
            .map(|(iv, diffeo, _)| {
                let contains_singular = singular.iter().any(|&s| iv.contains(s));
                let meets_k = interval_meets_repeller(repeller, &iv);
                PullBack {
                    interval: iv,
                    order,
                    meets_k,
                    is_diffeo: diffeo && !contains_singular,
                    contains_singular,
                }
            })
            .filter(|pb| pb.meets_k)
            .collect();
        if current.is_empty() {
            break;
        }
    }
    current
}

fn interval_meets_repeller(repeller: &Repeller, iv: &Interval) -> bool {
    // cheap exclusion: the interval must meet some component and not sit
    // inside a single hole
    if !repeller.components.iter().any(|c| c.intersects(iv)) {
        return false;
    }
    !repeller
        .holes
        .iter()
        .any(|h| h.lo <= iv.lo && iv.hi <= h.hi && h.encloses_strictly(iv))
}

impl MultimodalMap {
    /// Inverse of the monotone lap `li` at y, clamped to the lap span.
    pub fn invert_monotone(&self, li: usize, y: f64) -> f64 {
        let lap = self.laps[li];
        let img = lap.image(&self.expr);
        let y = y.clamp(img.lo, img.hi);
        let (mut a, mut b) = (lap.span.lo, lap.span.hi);
        let ga = self.f(a) - y;
        if ga == 0.0 {
            return a;
        }
        if (self.f(b) - y) == 0.0 {
            return b;
        }
        while b - a > crate::map::ROOT_BRACKET_WIDTH {
            let m = 0.5 * (a + b);
            let gm = self.f(m) - y;
            if gm == 0.0 {
                return m;
            }
            if ga * gm < 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitKind {
    HyperbolicRepelling,
    Indifferent,
    Attracting,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// One period of the orbit, starting at the lexicographically minimal
    /// point.
    pub points: Vec<f64>,
    pub period: u32,
    /// (f^period)' at the representative point.
    pub multiplier: f64,
    /// (1/period) log |multiplier|.
    pub chi: f64,
    pub kind: OrbitKind,
    pub in_k: Membership,
}

/// The sub-cylinder of `cyl` (a monotone cylinder of depth `depth`) whose
/// next iterate lands in `lap`: { x in cyl : f^depth(x) in lap }, found by
/// bisecting the composed monotone branch against the lap endpoints.
fn refine_cylinder(map: &MultimodalMap, cyl: &Interval, depth: u32, lap: Interval) -> Interval {
    let g = |x: f64| map.iterate(x, depth);
    let (ga, gb) = (g(cyl.lo), g(cyl.hi));
    let (lo_img, hi_img) = if ga <= gb { (ga, gb) } else { (gb, ga) };
    let lo = lap.lo.max(lo_img);
    let hi = lap.hi.min(hi_img);
    if lo >= hi {
        return Interval::new(cyl.lo, cyl.lo); // empty marker
    }
    let rising = ga <= gb;
    // exact endpoint snaps keep boundary orbits (fixed endpoints) on the
    // cylinder boundary through arbitrarily deep refinement
    let x_at = |y: f64| -> f64 {
        if y == ga {
            return cyl.lo;
        }
        if y == gb {
            return cyl.hi;
        }
        let (mut a, mut b) = (cyl.lo, cyl.hi);
        while b - a > crate::map::ROOT_BRACKET_WIDTH {
            let m = 0.5 * (a + b);
            if (g(m) < y) == rising {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let (xa, xb) = if rising {
        (x_at(lo), x_at(hi))
    } else {
        (x_at(hi), x_at(lo))
    };
    Interval::spanning(xa, xb)
}

fn solve_fixed_in_cylinder(map: &MultimodalMap, cyl: &Interval, n: u32) -> Option<f64> {
    if cyl.len() <= 0.0 {
        return None;
    }
    let h = |x: f64| map.iterate(x, n) - x;
    let (ha, hb) = (h(cyl.lo), h(cyl.hi));
    if ha == 0.0 {
        return Some(cyl.lo);
    }
    if hb == 0.0 {
        return Some(cyl.hi);
    }
    if ha * hb > 0.0 {
        return None;
    }
    let mut root = crate::numerics::bisect_root(h, cyl.lo, cyl.hi, 1e-14);
    // Newton polish on f^n(x) - x
    let dn = {
        let mut d = 1.0;
        let mut cur = root;
        for _ in 0..n {
            d *= map.df(cur);
            cur = map.f(cur);
        }
        d - 1.0
    };
    if dn.abs() > 1e-9 {
        let polished = root - h(root) / dn;
        if cyl.contains(polished) {
            root = polished;
        }
    }
    // the reachable residual scales with the iterate's derivative (float
    // noise of f^n is amplified by the remaining expansion along the orbit)
    let tol = PERIODIC_RESIDUAL.max(512.0 * f64::EPSILON * dn.abs());
    (h(root).abs() <= tol).then_some(root)
}

fn consolidate_orbits(
    map: &MultimodalMap,
    repeller: &Repeller,
    roots: Vec<f64>,
    n: u32,
) -> Result<Vec<PeriodicOrbit>> {
    // group roots into orbits by walking the root list: the successor of a
    // root is the nearest unused root to its image. The minimal period is
    // then validated independently by divisor residuals, so a mis-grouped
    // walk (possible inside sub-resolution root clusters) cannot mislabel an
    // orbit.
    let mut used = vec![false; roots.len()];
    let nearest_unused = |used: &[bool], y: f64, start: usize| -> Option<usize> {
        let idx = roots.partition_point(|&r| r < y);
        let mut best: Option<usize> = None;
        let mut best_d = f64::INFINITY;
        let lo = idx.saturating_sub(8);
        let hi = (idx + 8).min(roots.len());
        for j in lo..hi {
            let d = (roots[j] - y).abs();
            if d < best_d && (!used[j] || j == start) {
                best = Some(j);
                best_d = d;
            }
        }
        best.filter(|_| best_d < 1e-7)
    };
    let divisors: Vec<u32> = (1..=n).filter(|d| n % d == 0).collect();
    let mut orbits = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut cur = i;
        let mut walked = 1u32;
        for _ in 1..n {
            let y = map.f(roots[cur]);
            match nearest_unused(&used, y, i) {
                Some(j) if j == i => break,
                Some(j) => {
                    used[j] = true;
                    walked += 1;
                    cur = j;
                }
                None => break,
            }
        }
        // minimal period by divisor residuals at the starting root
        let start = roots[i];
        let period = divisors
            .iter()
            .copied()
            .find(|&d| (map.iterate(start, d) - start).abs() <= 1e-9)
            .unwrap_or(walked.max(1));
        let mut pts = Vec::with_capacity(period as usize);
        let mut p = start;
        for _ in 0..period {
            pts.push(p);
            p = map.f(p);
        }
        // representative = lexicographically minimal point
        let min_idx = pts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        pts.rotate_left(min_idx);
        let mut multiplier = 1.0;
        for &p in &pts {
            multiplier *= map.df(p);
        }
        let chi = multiplier.abs().ln() / period as f64;
        let rate = multiplier.abs().powf(1.0 / period as f64);
        let kind = if (rate - 1.0).abs() <= INDIFFERENT_BAND {
            OrbitKind::Indifferent
        } else if rate > 1.0 {
            OrbitKind::HyperbolicRepelling
        } else {
            OrbitKind::Attracting
        };
        let in_k = repeller.certify_periodic_orbit(&pts);
        orbits.push(PeriodicOrbit {
            points: pts,
            period,
            multiplier,
            chi,
            kind,
            in_k,
        });
    }
    orbits.sort_by(|a, b| a.points[0].partial_cmp(&b.points[0]).unwrap());
    Ok(orbits)
}

/// Solutions of f^n(x) = x, one per admissible lap-itinerary cylinder;
/// cylinders are refined depth-first with interval pruning, so only realised
/// words are expanded. Returns the sorted root list (bit-identical
/// duplicates removed).
pub fn fixed_point_roots(map: &MultimodalMap, n: u32, budget: u64) -> Result<Vec<f64>> {
    let lap_count = map.laps.len() as u64;
    let requested = lap_count.checked_pow(n).unwrap_or(u64::MAX);
    if requested > budget {
        return Err(Error::CylinderBudgetExceeded {
            requested,
            cap: budget,
        });
    }
    let laps: Vec<Interval> = map.laps.iter().map(|l| l.span).collect();
    // parallel over the two leading letters, deterministic merge in word order
    let mut seeds: Vec<(u32, Interval)> = Vec::new();
    if n == 1 {
        seeds.extend(laps.iter().map(|&l| (1, l)));
    } else {
        for &first in laps.iter() {
            for &lap in &laps {
                let sub = refine_cylinder(map, &first, 1, lap);
                if sub.len() > 0.0 {
                    seeds.push((2, sub));
                }
            }
        }
    }
    let found: Vec<Vec<f64>> = seeds
        .into_par_iter()
        .map(|seed| {
            let mut out = Vec::new();
            let mut stack: Vec<(u32, Interval)> = vec![seed];
            while let Some((depth, cyl)) = stack.pop() {
                if cyl.len() <= 1e-15 && depth < n {
                    continue;
                }
                if depth == n {
                    if let Some(x) = solve_fixed_in_cylinder(map, &cyl, n) {
                        out.push(x);
                    }
                    continue;
                }
                for &lap in &laps {
                    let sub = refine_cylinder(map, &cyl, depth, lap);
                    if sub.len() > 0.0 {
                        stack.push((depth + 1, sub));
                    }
                }
            }
            out
        })
        .collect();
    let mut roots = Vec::new();
    for v in found {
        roots.extend(v);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup();
    Ok(roots)
}

/// One element of Fix(f^n), with the derivative of the full n-fold iterate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterateFixedPoint {
    pub x: f64,
    /// log |(f^n)'(x)|.
    pub log_deriv: f64,
    pub in_k: Membership,
}

/// Fix(f^n) with per-point iterate derivatives, for the periodic pressure
/// sums. No orbit assembly happens here, so the census is exact even inside
/// the compressed root clusters near turning-point images.
pub fn iterate_fixed_points(
    map: &MultimodalMap,
    repeller: &Repeller,
    n: u32,
    budget: u64,
) -> Result<Vec<IterateFixedPoint>> {
    let roots = fixed_point_roots(map, n, budget)?;
    Ok(roots
        .into_iter()
        .map(|x| {
            let mut cur = x;
            let mut acc = 0.0;
            let mut inside = repeller.point_admissible(x);
            for _ in 0..n {
                acc += map.df(cur).abs().ln();
                cur = map.f(cur);
                inside = inside && repeller.point_admissible(cur);
            }
            IterateFixedPoint {
                x,
                log_deriv: acc,
                in_k: if inside {
                    Membership::InK
                } else {
                    Membership::NotInK
                },
            }
        })
        .collect())
}

/// All periodic orbits of period dividing n, consolidated to minimal period
/// with the lexicographically minimal point as representative.
pub fn periodic_points(
    map: &MultimodalMap,
    repeller: &Repeller,
    n: u32,
    budget: u64,
) -> Result<Vec<PeriodicOrbit>> {
    let roots = fixed_point_roots(map, n, budget)?;
    consolidate_orbits(map, repeller, roots, n)
}

/// Critical-avoidance statistic: max over critical points of
/// (1/n) Σ' −log|f^j(x) − c|, omitting the single closest-approach index.
pub fn rule_ii_check(
    map: &MultimodalMap,
    _repeller: &Repeller,
    x: f64,
    n: u32,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for c in &map.critical {
        let mut cur = x;
        let mut sum = crate::numerics::Kahan::default();
        let mut closest = f64::INFINITY;
        for step in 0..n {
            let d = (cur - c.x).abs();
            if d == 0.0 {
                return Err(Error::OrbitHitsCritical { x, step: step as usize });
            }
            let term = -d.ln();
            sum.add(term);
            if d < closest {
                closest = d;
            }
            cur = map.f(cur);
        }
        // omit the closest-approach index
        let total = sum.value() + closest.ln();
        worst = worst.max(total / n as f64);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakIsolationReport {
    pub n_max: u32,
    pub margin: f64,
    /// Orbits inside the margin-neighbourhood of Î_K \ holes that are not
    /// in K. Empty means (wi) holds up to n_max.
    pub violations: Vec<PeriodicOrbit>,
    pub orbits_checked: usize,
}

/// Enumerates periodic orbits of the ambient map up to period n_max and lists
/// those lying within `margin` of Î_K \ holes but not in K.
pub fn weak_isolation_check(
    sys: &System,
    n_max: u32,
    margin: f64,
    budget: u64,
) -> Result<WeakIsolationReport> {
    let ambient = Repeller::full_domain(&sys.map);
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for n in 1..=n_max {
        let orbits = periodic_points(&sys.map, &ambient, n, budget)?;
        for orb in orbits {
            if orb.period != n {
                continue; // counted at its minimal period
            }
            checked += 1;
            let near = orb
                .points
                .iter()
                .all(|&p| sys.repeller.dist_to_admissible(p) <= margin);
            let in_k = sys.repeller.certify_periodic_orbit(&orb.points);
            if near && in_k == Membership::NotInK {
                violations.push(orb);
            }
        }
    }
    Ok(WeakIsolationReport {
        n_max,
        margin,
        violations,
        orbits_checked: checked,
    })
}
