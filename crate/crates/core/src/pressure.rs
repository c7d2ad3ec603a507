//! Pressure estimators: backward-tree sums, periodic-orbit sums, weighted
//! Markov (subshift) brackets, Lyapunov-exponent bounds, phase points and the
//! Bowen root.
//!
//! Finite-depth sums carry systematic 1/n-scale biases (with an extra log n
//! factor exactly at the condensation kink), so the headline value of each
//! estimator is the Aitken acceleration of the three deepest successive
//! quotients log Σ_n − log Σ_{n−1}; the raw fixed-depth value and a scatter
//! bracket are reported alongside.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::MultimodalMap;
use crate::numerics::{aitken, log_sum_exp, power_iteration, Kahan};
use crate::orbit::{
    iterate_fixed_points, periodic_points, preimage_tree, IterateFixedPoint, OrbitKind,
    PreimageTree,
};
use crate::repeller::{Membership, Repeller};
use crate::symbolic::TransitionMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    /// Accelerated headline value.
    pub value: f64,
    /// Raw fixed-depth value (1/n) log Σ_n.
    pub raw: f64,
    /// Scatter bracket; always contains `value`.
    pub lo: f64,
    pub hi: f64,
    pub depth: u32,
    /// Derivative-zero branches excluded from the sums (t > 0 only).
    pub skipped_branches: usize,
}

fn estimate_from_logsums(logsums: &[f64], depth: u32, skipped: usize) -> Estimate {
    let n = logsums.len();
    assert!(n >= 4, "need at least 4 depths for the quotient acceleration");
    let q = |k: usize| logsums[k] - logsums[k - 1];
    let (q2, q1, q0) = (q(n - 3), q(n - 2), q(n - 1));
    let value = aitken(q2, q1, q0);
    let raw = logsums[n - 1] / depth as f64;
    let mut lo = value.min(q0).min(q1);
    let mut hi = value.max(q0).max(q1);
    if !lo.is_finite() || !hi.is_finite() {
        lo = value;
        hi = value;
    }
    Estimate {
        value,
        raw,
        lo,
        hi,
        depth,
        skipped_branches: skipped,
    }
}

/// log Σ_{x ∈ f^{-k}(z) ∩ K} |(f^k)'(x)|^{-t} for every level k of the tree.
///
/// Branches through an exact critical preimage have |(f^k)'| = 0: they are
/// excluded (weight +∞) for t > 0, contribute weight 0 for t < 0 and count 1
/// at t = 0. The number of exclusions is returned.
pub fn tree_level_log_sums(tree: &PreimageTree, t: f64) -> (Vec<f64>, usize) {
    let mut out = Vec::with_capacity(tree.levels.len());
    let mut skipped = 0usize;
    for level in &tree.levels {
        let weights: Vec<f64> = level
            .iter()
            .filter_map(|node| {
                if node.tangency_on_path {
                    if t > 0.0 {
                        skipped += 1;
                        None
                    } else if t == 0.0 {
                        Some(0.0)
                    } else {
                        None // weight zero, drop from the log-sum
                    }
                } else {
                    Some(-t * node.log_abs_deriv)
                }
            })
            .collect();
        out.push(log_sum_exp(&weights));
    }
    (out, skipped)
}

/// Tree pressure at base point z: growth rate of the weighted backward sums.
pub fn tree_pressure(
    map: &MultimodalMap,
    repeller: &Repeller,
    z: f64,
    t: f64,
    n: u32,
) -> Result<Estimate> {
    assert!(n >= 4, "tree pressure needs depth >= 4");
    let tree = preimage_tree(map, repeller, z, n)?;
    Ok(tree_pressure_from_tree(&tree, t))
}

/// Same, reusing an already-built tree (one tree serves a whole t-grid).
pub fn tree_pressure_from_tree(tree: &PreimageTree, t: f64) -> Estimate {
    let (logsums, skipped) = tree_level_log_sums(tree, t);
    estimate_from_logsums(&logsums, tree.depth(), skipped)
}

/// Σ over Fix(f^k) ∩ K of |(f^k)'|^{-t} for k = n-3..n, accelerated.
///
/// Indifferent points are included as-is; points certified outside K are
/// dropped. The sums run directly over the per-cylinder roots of f^k = id,
/// with no orbit assembly in between.
pub fn periodic_pressure(
    map: &MultimodalMap,
    repeller: &Repeller,
    t: f64,
    n: u32,
    budget: u64,
) -> Result<Estimate> {
    assert!(n >= 4, "periodic pressure needs n >= 4");
    let depths: Vec<u32> = (n - 3..=n).collect();
    let point_sets: Vec<Vec<IterateFixedPoint>> = depths
        .iter()
        .map(|&k| iterate_fixed_points(map, repeller, k, budget))
        .collect::<Result<_>>()?;
    let logsums: Vec<f64> = point_sets
        .iter()
        .map(|points| periodic_log_sum(points, t))
        .collect();
    Ok(estimate_from_logsums(&logsums, n, 0))
}

/// log Σ over Fix(f^n) ∩ K of |(f^n)'|^{-t}.
pub fn periodic_log_sum(points: &[IterateFixedPoint], t: f64) -> f64 {
    let weights: Vec<f64> = points
        .iter()
        .filter(|p| p.in_k != Membership::NotInK)
        .map(|p| -t * p.log_deriv)
        .collect();
    log_sum_exp(&weights)
}

/// log spectral radius of a 0/1 transition matrix with per-transition
/// weights; with sup- and inf-derivative weights this brackets the pressure
/// of the subshift factor.
pub fn markov_pressure(matrix: &TransitionMatrix, weights: &[Vec<f64>]) -> f64 {
    let n = matrix.size;
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if matrix.entries[i][j] == 1 {
                m[i][j] = weights[i][j];
            }
        }
    }
    let (rho, _) = power_iteration(&m, 1e-14, 200_000);
    rho.ln()
}

/// Builds sup/inf weights exp(∓ t log|f'|) over the transition source cells
/// and returns the (lo, hi) bracket of the weighted spectral radii.
pub fn markov_pressure_bracket(
    map: &MultimodalMap,
    matrix: &TransitionMatrix,
    t: f64,
) -> (f64, f64) {
    let n = matrix.size;
    let mut wsup = vec![vec![0.0; n]; n];
    let mut winf = vec![vec![0.0; n]; n];
    for (i, cell) in matrix.symbol_meanings.iter().enumerate() {
        let (lo_d, hi_d) = log_deriv_range(map, cell);
        // weight |f'|^{-t}: sup weight uses the endpoint maximising -t log|f'|
        let w_hi = (-t * if t >= 0.0 { lo_d } else { hi_d }).exp();
        let w_lo = (-t * if t >= 0.0 { hi_d } else { lo_d }).exp();
        for j in 0..n {
            wsup[i][j] = w_hi;
            winf[i][j] = w_lo;
        }
    }
    let hi = markov_pressure(matrix, &wsup);
    let lo = markov_pressure(matrix, &winf);
    (lo, hi)
}

/// Range of log |f'| over an interval, by dense sampling.
fn log_deriv_range(map: &MultimodalMap, cell: &Interval) -> (f64, f64) {
    let n = 64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=n {
        let x = cell.lo + cell.len() * i as f64 / n as f64;
        let d = map.df(x).abs();
        if d > 0.0 {
            lo = lo.min(d.ln());
            hi = hi.max(d.ln());
        }
    }
    (lo, hi)
}

/// Refined subshift: admissible words of length `depth` over a single-lap
/// Markov partition, with cylinder intervals for weighting.
///
/// Cylinders whose closure touches a critical point are dropped: the
/// surviving subshift describes an expanding (hyperbolic) sub-repeller, on
/// which log |f'| has bounded oscillation per state so the sup/inf weight
/// bracket is meaningful. The exclusion deficit vanishes under refinement.
pub fn refine_partition(
    map: &MultimodalMap,
    matrix: &TransitionMatrix,
    depth: u32,
) -> TransitionMatrix {
    assert!(depth >= 1);
    let base = matrix.size;
    let crit: Vec<f64> = map.critical.iter().map(|c| c.x).collect();
    let touches_crit =
        |iv: &Interval| crit.iter().any(|&c| iv.dist_to(c) < 1e-12);
    let mut words: Vec<(Vec<usize>, Interval)> = (0..base)
        .map(|s| (vec![s], matrix.symbol_meanings[s]))
        .collect();
    for _ in 1..depth {
        let mut next = Vec::new();
        for (w, _) in &words {
            let last = *w.last().unwrap();
            for s in 0..base {
                if matrix.entries[last][s] == 0 {
                    continue;
                }
                let target = cylinder_backward(map, matrix, w, matrix.symbol_meanings[s]);
                if target.len() > 1e-14 {
                    let mut w2 = w.clone();
                    w2.push(s);
                    next.push((w2, target));
                }
            }
        }
        words = next;
    }
    words.retain(|(_, iv)| !touches_crit(iv));
    let size = words.len();
    let mut entries = vec![vec![0u8; size]; size];
    for (i, (wi, _)) in words.iter().enumerate() {
        for (j, (wj, _)) in words.iter().enumerate() {
            if wi[1..] == wj[..wj.len() - 1]
                && matrix.entries[wi[wi.len() - 1]][wj[wj.len() - 1]] == 1
            {
                entries[i][j] = 1;
            }
        }
    }
    TransitionMatrix {
        size,
        entries,
        symbol_meanings: words.into_iter().map(|(_, iv)| iv).collect(),
        residual: matrix.residual,
    }
}

/// Interval of points in the word's first cell whose next `len(word)-1`
/// iterates follow the word, finished by landing in `tail`.
fn cylinder_backward(
    map: &MultimodalMap,
    matrix: &TransitionMatrix,
    word: &[usize],
    tail: Interval,
) -> Interval {
    let mut target = tail;
    for &s in word.iter().rev() {
        let cell = matrix.symbol_meanings[s];
        // invert the monotone branch on the (single-lap) cell
        let li = map
            .laps
            .iter()
            .position(|l| l.span.lo <= cell.midpoint() && cell.midpoint() <= l.span.hi)
            .expect("partition cell inside a lap");
        let img = map.laps[li].image(&map.expr);
        let Some(hit) = img.intersection(&target) else {
            return Interval::new(cell.lo, cell.lo);
        };
        let a = map.invert_monotone(li, hit.lo);
        let b = map.invert_monotone(li, hit.hi);
        let pre = Interval::spanning(a, b);
        target = match pre.intersection(&cell) {
            Some(iv) => iv,
            None => return Interval::new(cell.lo, cell.lo),
        };
    }
    target
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChiBounds {
    pub chi_inf: f64,
    pub chi_sup: f64,
    pub method_tags: Vec<String>,
}

/// Lyapunov-exponent bounds from the periodic census, a derivative grid and
/// the backward tree.
pub fn chi_bounds(
    map: &MultimodalMap,
    repeller: &Repeller,
    n: u32,
    budget: u64,
) -> Result<ChiBounds> {
    let mut tags = Vec::new();
    let nper = n.min(10);
    let points = iterate_fixed_points(map, repeller, nper, budget)?;
    let mut chi_lo = f64::INFINITY;
    let mut chi_hi = f64::NEG_INFINITY;
    for p in &points {
        if p.in_k == Membership::NotInK {
            continue;
        }
        let chi = p.log_deriv / nper as f64;
        if chi <= 0.0 {
            continue;
        }
        chi_lo = chi_lo.min(chi);
        chi_hi = chi_hi.max(chi);
    }
    tags.push("periodic".to_string());

    // sup-derivative grid refinement of chi_sup
    let grid_n = 4096;
    let mut sup_rate = f64::NEG_INFINITY;
    for comp in &repeller.components {
        for i in 0..=grid_n {
            let x = comp.lo + comp.len() * i as f64 / grid_n as f64;
            let mut cur = x;
            let mut acc = 0.0;
            let mut ok = true;
            for _ in 0..n {
                acc += map.df(cur).abs().ln();
                cur = map.f(cur);
                if !repeller.point_admissible(cur) {
                    ok = false;
                    break;
                }
            }
            if ok {
                sup_rate = sup_rate.max(acc / n as f64);
            }
        }
    }
    if sup_rate > chi_hi {
        chi_hi = sup_rate;
        tags.push("sup-derivative".to_string());
    }

    // backward-minimum refinement of chi_inf: the level-to-level increment of
    // min log |(f^k)'| over the tree estimates the limit rate without the
    // O(1/n) offset of the raw quotient
    if let Some(z) = default_base_points(map, repeller, 1, budget)?.first().copied() {
        let depth = n.min(12).max(6);
        let tree = preimage_tree(map, repeller, z, depth)?;
        let mins: Vec<f64> = tree
            .levels
            .iter()
            .map(|level| {
                level
                    .iter()
                    .filter(|l| !l.tangency_on_path)
                    .map(|l| l.log_abs_deriv)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let k = mins.len();
        let back_min =
            (mins[k - 1] - mins[k - 4]) / 3.0;
        if back_min < chi_lo {
            chi_lo = back_min;
            tags.push("backward-min".to_string());
        }
    }
    Ok(ChiBounds {
        chi_inf: chi_lo.max(0.0),
        chi_sup: chi_hi,
        method_tags: tags,
    })
}

/// Safe/expanding base-point candidates: certified-in-K hyperbolic repelling
/// periodic points whose forward orbit keeps a margin from the singular set
/// and from the domain boundary. The certificate is empirical and flagged as
/// such in reports.
pub fn default_base_points(
    map: &MultimodalMap,
    repeller: &Repeller,
    count: usize,
    budget: u64,
) -> Result<Vec<f64>> {
    let sset = crate::repeller::singular_set(map, repeller);
    let mut post_singular: Vec<f64> = Vec::new();
    for &s in &sset.all {
        let mut cur = map.f(s);
        for _ in 0..16 {
            post_singular.push(cur);
            cur = map.f(cur);
        }
    }
    let span = repeller.span();
    let mut scored: Vec<(f64, f64)> = Vec::new(); // (margin, point)
    for n in 2..=6u32 {
        for orb in periodic_points(map, repeller, n, budget)? {
            if orb.kind != OrbitKind::HyperbolicRepelling
                || orb.in_k == Membership::NotInK
                || orb.period != n
            {
                continue;
            }
            let mut margin = f64::INFINITY;
            for &p in &orb.points {
                margin = margin.min((p - span.lo).abs().min((span.hi - p).abs()));
                for &s in &sset.all {
                    margin = margin.min((p - s).abs());
                }
                for &q in &post_singular {
                    margin = margin.min((p - q).abs());
                }
            }
            if margin > 1e-3 {
                scored.push((margin, orb.points[0]));
            }
        }
        if scored.len() >= count * 3 {
            break;
        }
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    scored.dedup_by(|a, b| (a.1 - b.1).abs() < 1e-9);
    if scored.is_empty() {
        return Err(Error::NoSuitableOrbit);
    }
    Ok(scored.into_iter().take(count).map(|(_, p)| p).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PressureSample {
    pub t: f64,
    pub p_tree: Option<f64>,
    pub p_tree_raw: Option<f64>,
    pub p_per: Option<f64>,
    pub p_markov_lo: Option<f64>,
    pub p_markov_hi: Option<f64>,
    pub p_induced: Option<f64>,
    pub depth_used: u32,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Methods {
    pub tree: bool,
    pub periodic: bool,
    pub markov: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PressureCurve {
    pub samples: Vec<PressureSample>,
    pub base_point: Option<f64>,
    /// Max spread of the tree value across alternative base points.
    pub base_point_sensitivity: Option<f64>,
    pub expanding_certificate: String,
}

/// Evaluates the requested estimators over a t-grid at a common depth.
/// The backward tree is built once and reused across the grid; base-point
/// sensitivity is the max spread over 5 candidate base points at the middle
/// of the grid.
pub fn pressure_curve(
    map: &MultimodalMap,
    repeller: &Repeller,
    t_grid: &[f64],
    methods: Methods,
    depth: u32,
    budget: u64,
) -> Result<PressureCurve> {
    assert!(!t_grid.is_empty(), "grid must be non-empty");
    let mut samples: Vec<PressureSample> = t_grid
        .iter()
        .map(|&t| PressureSample {
            t,
            p_tree: None,
            p_tree_raw: None,
            p_per: None,
            p_markov_lo: None,
            p_markov_hi: None,
            p_induced: None,
            depth_used: depth,
            bracket_lo: f64::NAN,
            bracket_hi: f64::NAN,
        })
        .collect();

    let mut base_point = None;
    let mut sensitivity = None;
    if methods.tree {
        let candidates = default_base_points(map, repeller, 5, budget)?;
        let z = candidates[0];
        base_point = Some(z);
        let tree = preimage_tree(map, repeller, z, depth)?;
        let results: Vec<Estimate> = t_grid
            .par_iter()
            .map(|&t| tree_pressure_from_tree(&tree, t))
            .collect();
        for (s, e) in samples.iter_mut().zip(&results) {
            s.p_tree = Some(e.value);
            s.p_tree_raw = Some(e.raw);
            s.bracket_lo = e.lo;
            s.bracket_hi = e.hi;
        }
        // sensitivity across base points at a middle t
        let t_mid = t_grid[t_grid.len() / 2];
        let mut spread_lo = f64::INFINITY;
        let mut spread_hi = f64::NEG_INFINITY;
        for &zc in &candidates {
            let sens_depth = depth.min(10);
            let tree_c = preimage_tree(map, repeller, zc, sens_depth)?;
            let v = tree_pressure_from_tree(&tree_c, t_mid).value;
            spread_lo = spread_lo.min(v);
            spread_hi = spread_hi.max(v);
        }
        sensitivity = Some(spread_hi - spread_lo);
    }
    if methods.periodic {
        let depths: Vec<u32> = (depth - 3..=depth).collect();
        let point_sets: Vec<Vec<IterateFixedPoint>> = depths
            .iter()
            .map(|&k| iterate_fixed_points(map, repeller, k, budget))
            .collect::<Result<_>>()?;
        let results: Vec<Estimate> = t_grid
            .par_iter()
            .map(|&t| {
                let logsums: Vec<f64> = point_sets
                    .iter()
                    .map(|points| periodic_log_sum(points, t))
                    .collect();
                estimate_from_logsums(&logsums, depth, 0)
            })
            .collect();
        for (s, e) in samples.iter_mut().zip(&results) {
            s.p_per = Some(e.value);
            if s.bracket_lo.is_nan() {
                s.bracket_lo = e.lo;
                s.bracket_hi = e.hi;
            } else {
                s.bracket_lo = s.bracket_lo.min(e.lo);
                s.bracket_hi = s.bracket_hi.max(e.hi);
            }
        }
    }
    if methods.markov {
        let partition = crate::symbolic::default_partition(map, repeller);
        let base = crate::symbolic::transition_matrix(map, repeller, &partition)?;
        let refined = refine_partition(map, &base, 6);
        for (s, &t) in samples.iter_mut().zip(t_grid) {
            let (lo, hi) = markov_pressure_bracket(map, &refined, t);
            s.p_markov_lo = Some(lo);
            s.p_markov_hi = Some(hi);
        }
    }
    Ok(PressureCurve {
        samples,
        base_point,
        base_point_sensitivity: sensitivity,
        expanding_certificate: "empirical".to_string(),
    })
}

/// Positivity tolerance for phase-point detection, matching the estimator
/// noise floor at the condensation kink.
pub const PHASE_TOL: f64 = 0.02;

/// Condensation and freezing points from a sampled curve: t_- is where
/// P(t) + t χ_sup first exceeds the tolerance (linear crossing on the grid),
/// t_+ the analogue with χ_inf. ±∞ when no crossing lies in range.
pub fn phase_points(curve: &[PressureSample], chi: &ChiBounds) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter_map(|s| s.p_tree.map(|p| (s.t, p)))
        .collect();
    if pts.is_empty() {
        return Err(Error::GridTooCoarse);
    }
    let g_minus: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(t, p)| (t, p + t * chi.chi_sup))
        .collect();
    let flips = count_flips(&g_minus, PHASE_TOL);
    if flips > 1 {
        return Err(Error::GridTooCoarse);
    }
    let t_minus = match g_minus.iter().position(|&(_, g)| g > PHASE_TOL) {
        None => f64::INFINITY, // never positive: condensation beyond range
        Some(0) => f64::NEG_INFINITY,
        Some(i) => {
            let (t0, g0) = g_minus[i - 1];
            let (t1, g1) = g_minus[i];
            t0 + (PHASE_TOL - g0) / (g1 - g0) * (t1 - t0)
        }
    };
    let g_plus: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(t, p)| (t, p + t * chi.chi_inf))
        .collect();
    let t_plus = match g_plus.iter().rposition(|&(_, g)| g > PHASE_TOL) {
        None => f64::NEG_INFINITY,
        Some(i) if i == g_plus.len() - 1 => f64::INFINITY,
        Some(i) => {
            let (t0, g0) = g_plus[i];
            let (t1, g1) = g_plus[i + 1];
            t0 + (PHASE_TOL - g0) / (g1 - g0) * (t1 - t0)
        }
    };
    Ok((t_minus, t_plus))
}

fn count_flips(g: &[(f64, f64)], tol: f64) -> usize {
    let mut flips = 0;
    for w in g.windows(2) {
        if (w[0].1 > tol) != (w[1].1 > tol) {
            flips += 1;
        }
    }
    flips
}

/// First zero of the monotone interpolant of the tree-pressure column,
/// refined by bisection on the linear interpolant to 1e-4.
pub fn bowen_root(curve: &[PressureSample]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter_map(|s| s.p_tree.map(|p| (s.t, p)))
        .collect();
    for w in pts.windows(2) {
        let (t0, p0) = w[0];
        let (t1, p1) = w[1];
        if p0 > 0.0 && p1 <= 0.0 {
            let interp = |t: f64| p0 + (p1 - p0) * (t - t0) / (t1 - t0);
            return Ok(crate::numerics::bisect_root(interp, t0, t1, 1e-4));
        }
    }
    Err(Error::NoZeroInRange)
}

/// Raw fixed-depth tree pressure over a t-grid: exactly convex and
/// non-increasing in t (finite log-sum-exp), used by the property suite.
pub fn raw_tree_curve(tree: &PreimageTree, t_grid: &[f64]) -> Vec<f64> {
    t_grid
        .iter()
        .map(|&t| {
            let (logsums, _) = tree_level_log_sums(tree, t);
            logsums.last().unwrap() / tree.depth() as f64
        })
        .collect()
}

/// Deterministic partition-sum check value: Σ over the deepest level with
/// compensated accumulation, for bit-reproducibility tests.
pub fn deterministic_partition_sum(tree: &PreimageTree, t: f64) -> f64 {
    let mut acc = Kahan::default();
    for node in tree.leaves() {
        if !node.tangency_on_path {
            acc.add((-t * node.log_abs_deriv).exp());
        }
    }
    acc.value()
}
