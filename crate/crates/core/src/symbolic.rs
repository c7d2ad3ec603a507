//! Itinerary coding, Markov transition structure, spectral entropy,
//! transitivity flags and exceptional-set detection.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::MultimodalMap;
use crate::numerics::power_iteration;
use crate::repeller::{Membership, Repeller};
use serde::{Deserialize, Serialize};

/// Markov endpoint-matching tolerance, relative to the domain scale.
pub const MARKOV_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Itinerary {
    pub symbols: Vec<u8>,
    /// Orbit hit a partition boundary; symbols truncated there.
    pub boundary_hit: bool,
}

/// Symbols of the forward orbit relative to the ordered cut set (critical
/// points plus declared partition points).
pub fn itinerary(map: &MultimodalMap, cuts: &[f64], x: f64, n: u32) -> Itinerary {
    let mut symbols = Vec::with_capacity(n as usize);
    let mut cur = x;
    for _ in 0..n {
        if cuts.iter().any(|&c| (cur - c).abs() < 1e-12) {
            return Itinerary {
                symbols,
                boundary_hit: true,
            };
        }
        let sym = cuts.iter().filter(|&&c| cur > c).count() as u8;
        symbols.push(sym);
        cur = map.f(cur);
    }
    Itinerary {
        symbols,
        boundary_hit: false,
    }
}

/// Default cut set of a map: its critical points.
pub fn critical_cuts(map: &MultimodalMap) -> Vec<f64> {
    map.critical.iter().map(|c| c.x).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub size: usize,
    /// entries[i][j] = 1 iff f(cylinder_i) covers cylinder_j.
    pub entries: Vec<Vec<u8>>,
    pub symbol_meanings: Vec<Interval>,
    /// Worst endpoint-matching residual observed during Markov verification.
    pub residual: f64,
}

impl TransitionMatrix {
    pub fn dense(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|&e| e as f64).collect())
            .collect()
    }

    /// Number of admissible words of the given length ending at `end`.
    pub fn admissible_words_into(&self, len: u32, end: usize) -> u64 {
        let mut counts = vec![0u64; self.size];
        counts[end] = 1;
        for _ in 1..len {
            let mut next = vec![0u64; self.size];
            for (i, row) in self.entries.iter().enumerate() {
                for (j, &e) in row.iter().enumerate() {
                    if e == 1 {
                        next[i] += counts[j];
                    }
                }
            }
            counts = next;
        }
        counts.iter().sum()
    }
}

/// Builds the 0/1 transition matrix of a partition, verifying the Markov
/// property: each hole-clipped component of a cell must map onto a union of
/// cells, endpoints matching partition points within tolerance.
pub fn transition_matrix(
    map: &MultimodalMap,
    repeller: &Repeller,
    partition: &[Interval],
) -> Result<TransitionMatrix> {
    let scale = map.domain_span().len();
    let tol = MARKOV_TOL * scale;
    let mut points: Vec<f64> = Vec::new();
    for cell in partition {
        points.push(cell.lo);
        points.push(cell.hi);
    }
    for h in &repeller.holes {
        points.push(h.lo);
        points.push(h.hi);
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|a, b| (*a - *b).abs() < tol);

    let size = partition.len();
    let mut entries = vec![vec![0u8; size]; size];
    let mut residual = 0.0f64;
    for (i, cell) in partition.iter().enumerate() {
        for piece in clip_cell(cell, &repeller.holes) {
            let ia = map.f(piece.lo);
            let ib = map.f(piece.hi);
            let img = Interval::spanning(ia, ib);
            for e in [img.lo, img.hi] {
                let r = points
                    .iter()
                    .map(|&p| (p - e).abs())
                    .fold(f64::INFINITY, f64::min);
                residual = residual.max(r);
                if r > tol {
                    return Err(Error::NotMarkov {
                        cylinder: i,
                        residual: r,
                    });
                }
            }
            for (j, cj) in partition.iter().enumerate() {
                // covered up to endpoint identification
                if img.lo <= cj.lo + tol && cj.hi - tol <= img.hi {
                    entries[i][j] = 1;
                }
            }
        }
    }
    Ok(TransitionMatrix {
        size,
        entries,
        symbol_meanings: partition.to_vec(),
        residual,
    })
}

fn clip_cell(cell: &Interval, holes: &[Interval]) -> Vec<Interval> {
    let mut pieces = vec![*cell];
    for h in holes {
        let mut next = Vec::new();
        for p in pieces {
            match p.intersection(h) {
                Some(cut) if cut.len() > 0.0 => {
                    if cut.lo - p.lo > 1e-14 {
                        next.push(Interval::new(p.lo, cut.lo));
                    }
                    if p.hi - cut.hi > 1e-14 {
                        next.push(Interval::new(cut.hi, p.hi));
                    }
                }
                _ => next.push(p),
            }
        }
        pieces = next;
    }
    pieces
}

/// Partition of the repeller by its critical cut set.
pub fn default_partition(map: &MultimodalMap, repeller: &Repeller) -> Vec<Interval> {
    let span = repeller.span();
    let mut cuts = vec![span.lo];
    for c in critical_cuts(map) {
        if span.contains_strict(c) {
            cuts.push(c);
        }
    }
    cuts.push(span.hi);
    cuts.windows(2)
        .map(|w| Interval::new(w[0], w[1]))
        .collect()
}

/// log of the spectral radius, by power iteration to tolerance 1e-12.
pub fn spectral_entropy(matrix: &TransitionMatrix) -> f64 {
    let (rho, _) = power_iteration(&matrix.dense(), 1e-15, 100_000);
    rho.ln()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransitivityFlags {
    pub irreducible: bool,
    pub primitive: bool,
}

/// Irreducibility via reachability closure; primitivity via the Wielandt
/// power bound n^2 - 2n + 2.
pub fn transitivity_flags(matrix: &TransitionMatrix) -> TransitivityFlags {
    let n = matrix.size;
    if n == 0 {
        return TransitivityFlags {
            irreducible: false,
            primitive: false,
        };
    }
    // boolean reachability closure
    let mut reach = matrix.entries.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] == 1 && reach[k][j] == 1 {
                    reach[i][j] = 1;
                }
            }
        }
    }
    let irreducible = (0..n).all(|i| (0..n).all(|j| reach[i][j] == 1));
    let wielandt = n * n - 2 * n + 2;
    let mut power = matrix.entries.clone();
    for _ in 1..wielandt {
        let mut next = vec![vec![0u8; n]; n];
        for i in 0..n {
            for j in 0..n {
                if power[i][j] == 0 {
                    continue;
                }
                for (l, &e) in matrix.entries[j].iter().enumerate() {
                    if e == 1 {
                        next[i][l] = 1;
                    }
                }
            }
        }
        power = next;
    }
    let primitive = irreducible && (0..n).all(|i| (0..n).all(|j| power[i][j] == 1));
    TransitivityFlags {
        irreducible,
        primitive,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExceptionalVerdict {
    WeaklyExceptional,
    NotExceptional,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExceptionalCandidate {
    pub point: f64,
    pub regular_backward_orbit: Vec<f64>,
    pub verdict: ExceptionalVerdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExceptionalReport {
    pub sigma: Vec<f64>,
    pub candidates: Vec<ExceptionalCandidate>,
    /// Union of forward-invariant weakly-exceptional closures.
    pub e_max: Vec<f64>,
}

/// Size beyond which a regular backward orbit is declared not exceptional.
pub const EXCEPTIONAL_BLOWUP: usize = 100;

/// Breadth-first regular backward expansion of each seed: preimages not
/// passing through Σ. A seed is weakly exceptional when the closure
/// stabilises (two consecutive depths add nothing) while staying finite.
pub fn exceptional_scan(
    map: &MultimodalMap,
    repeller: &Repeller,
    sigma: &[f64],
    seeds: &[f64],
    depth: u32,
) -> ExceptionalReport {
    let mut candidates = Vec::new();
    for &seed in seeds {
        let (orbit, verdict) = regular_backward_closure(map, repeller, sigma, seed, depth);
        candidates.push(ExceptionalCandidate {
            point: seed,
            regular_backward_orbit: orbit,
            verdict,
        });
    }
    // forward-invariant closure of the weakly exceptional candidates
    let mut e_max: Vec<f64> = Vec::new();
    for cand in &candidates {
        if cand.verdict != ExceptionalVerdict::WeaklyExceptional {
            continue;
        }
        let mut pool = cand.regular_backward_orbit.clone();
        let mut idx = 0;
        while idx < pool.len() && pool.len() <= EXCEPTIONAL_BLOWUP {
            let y = map.f(pool[idx]);
            if repeller.point_admissible(y) && !pool.iter().any(|&p| (p - y).abs() < 1e-9) {
                let (orbit, v) = regular_backward_closure(map, repeller, sigma, y, depth);
                if v == ExceptionalVerdict::WeaklyExceptional {
                    for o in orbit {
                        if !pool.iter().any(|&p| (p - o).abs() < 1e-9) {
                            pool.push(o);
                        }
                    }
                } else {
                    pool.clear();
                    break;
                }
            }
            idx += 1;
        }
        for p in pool {
            if !e_max.iter().any(|&q| (q - p).abs() < 1e-9) {
                e_max.push(p);
            }
        }
    }
    e_max.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ExceptionalReport {
        sigma: sigma.to_vec(),
        candidates,
        e_max,
    }
}

fn regular_backward_closure(
    map: &MultimodalMap,
    repeller: &Repeller,
    sigma: &[f64],
    seed: f64,
    depth: u32,
) -> (Vec<f64>, ExceptionalVerdict) {
    let near_sigma = |x: f64| sigma.iter().any(|&s| (s - x).abs() < 1e-9);
    let mut closure = vec![seed];
    let mut frontier = vec![seed];
    let mut stable_for = 0u32;
    for _ in 0..depth {
        let mut next = Vec::new();
        for &y in &frontier {
            for p in map.branch_preimages(y) {
                if near_sigma(p.x) {
                    continue;
                }
                if repeller.membership(map, p.x) == Membership::NotInK {
                    continue;
                }
                if !closure.iter().any(|&q| (q - p.x).abs() < 1e-9) {
                    closure.push(p.x);
                    next.push(p.x);
                }
            }
        }
        if closure.len() > EXCEPTIONAL_BLOWUP {
            return (closure, ExceptionalVerdict::NotExceptional);
        }
        if next.is_empty() {
            stable_for += 1;
            if stable_for >= 2 {
                closure.sort_by(|a, b| a.partial_cmp(b).unwrap());
                return (closure, ExceptionalVerdict::WeaklyExceptional);
            }
        } else {
            stable_for = 0;
        }
        frontier = next;
    }
    closure.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let verdict = if stable_for >= 2 {
        ExceptionalVerdict::WeaklyExceptional
    } else {
        ExceptionalVerdict::Inconclusive
    };
    (closure, verdict)
}

/// Forward orbits of the critical values, the default seed set.
pub fn default_exceptional_seeds(map: &MultimodalMap, depth: u32) -> Vec<f64> {
    let mut seeds = Vec::new();
    for c in &map.critical {
        let mut cur = map.f(c.x);
        for _ in 0..depth.min(8) {
            if !seeds.iter().any(|&s: &f64| (s - cur).abs() < 1e-9) {
                seeds.push(cur);
            }
            cur = map.f(cur);
        }
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    #[test]
    fn itinerary_fixed_points() {
        let sys = registry::cheb3();
        let cuts = critical_cuts(&sys.map);
        let it = itinerary(&sys.map, &cuts, 1.0, 5);
        assert_eq!(it.symbols, vec![2, 2, 2, 2, 2]);
        assert!(!it.boundary_hit);
        let it = itinerary(&sys.map, &cuts, -1.0, 5);
        assert_eq!(it.symbols, vec![0, 0, 0, 0, 0]);
    }

    #[test]
    fn itinerary_matches_tripling_digits() {
        // f(cos θ) = cos 3θ; the symbol of cos θ is determined by which third
        // of [0, π] the angle lies in
        let sys = registry::cheb3();
        let cuts = critical_cuts(&sys.map);
        let theta = 2.0 * std::f64::consts::PI / 13.0;
        let x = theta.cos();
        let it = itinerary(&sys.map, &cuts, x, 3);
        let mut th = theta;
        let mut expect = Vec::new();
        for _ in 0..3 {
            let sym = if th < std::f64::consts::PI / 3.0 {
                2
            } else if th < 2.0 * std::f64::consts::PI / 3.0 {
                1
            } else {
                0
            };
            expect.push(sym);
            th = (3.0 * th) % (2.0 * std::f64::consts::PI);
            if th > std::f64::consts::PI {
                th = 2.0 * std::f64::consts::PI - th;
            }
        }
        assert_eq!(it.symbols, expect);
    }

    #[test]
    fn full_map_matrices_are_all_ones() {
        let sys = registry::cheb3();
        let part = default_partition(&sys.map, &sys.repeller);
        let m = transition_matrix(&sys.map, &sys.repeller, &part).unwrap();
        assert_eq!(m.size, 3);
        assert!(m.entries.iter().flatten().all(|&e| e == 1));
        assert!((spectral_entropy(&m) - 3f64.ln()).abs() < 1e-12);

        let sysl = registry::logistic(4.0);
        let part = default_partition(&sysl.map, &sysl.repeller);
        let m = transition_matrix(&sysl.map, &sysl.repeller, &part).unwrap();
        assert_eq!(m.size, 2);
        assert!(m.entries.iter().flatten().all(|&e| e == 1));
        assert!((spectral_entropy(&m) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn notwi_matrix_and_entropy() {
        let sys = registry::notwi();
        let part = default_partition(&sys.map, &sys.repeller);
        let m = transition_matrix(&sys.map, &sys.repeller, &part).unwrap();
        assert_eq!(m.size, 3);
        for i in 0..3 {
            for j in 0..3 {
                let expect = u8::from(!(i == 1 && j == 1));
                assert_eq!(m.entries[i][j], expect, "entry ({i},{j})");
            }
        }
        let h = spectral_entropy(&m);
        let expect = (1.0 + 3f64.sqrt()).ln();
        assert!((h - expect).abs() < 1e-9, "{h} vs {expect}");
    }

    #[test]
    fn golden_mean_entropy() {
        let m = TransitionMatrix {
            size: 2,
            entries: vec![vec![1, 1], vec![1, 0]],
            symbol_meanings: vec![Interval::new(0.0, 0.5), Interval::new(0.5, 1.0)],
            residual: 0.0,
        };
        let golden = (0.5 * (1.0 + 5f64.sqrt())).ln();
        assert!((spectral_entropy(&m) - golden).abs() < 1e-12);
    }

    #[test]
    fn transitivity_examples() {
        let sys = registry::notwi();
        let part = default_partition(&sys.map, &sys.repeller);
        let m = transition_matrix(&sys.map, &sys.repeller, &part).unwrap();
        let fl = transitivity_flags(&m);
        assert!(fl.irreducible && fl.primitive);

        let identity = TransitionMatrix {
            size: 2,
            entries: vec![vec![1, 0], vec![0, 1]],
            symbol_meanings: vec![Interval::new(0.0, 0.5), Interval::new(0.5, 1.0)],
            residual: 0.0,
        };
        assert!(!transitivity_flags(&identity).irreducible);

        let swap = TransitionMatrix {
            size: 2,
            entries: vec![vec![0, 1], vec![1, 0]],
            symbol_meanings: vec![Interval::new(0.0, 0.5), Interval::new(0.5, 1.0)],
            residual: 0.0,
        };
        let fl = transitivity_flags(&swap);
        assert!(fl.irreducible && !fl.primitive);
    }

    #[test]
    fn exceptional_logistic_critical_value() {
        let sys = registry::logistic(4.0);
        // S(f, K) = Crit ∪ ∂Î = {1/2} ∪ {0, 1}
        let sigma = [0.0, 0.5, 1.0];
        let report = exceptional_scan(&sys.map, &sys.repeller, &sigma, &[1.0], 8);
        let cand = &report.candidates[0];
        assert_eq!(cand.verdict, ExceptionalVerdict::WeaklyExceptional);
        assert_eq!(cand.regular_backward_orbit, vec![1.0]);
    }

    #[test]
    fn exceptional_cheb3_boundary_pair() {
        let sys = registry::cheb3();
        let sigma = [-0.5, 0.5]; // S'
        let report = exceptional_scan(&sys.map, &sys.repeller, &sigma, &[1.0, -1.0], 8);
        for cand in &report.candidates {
            assert_eq!(cand.verdict, ExceptionalVerdict::WeaklyExceptional);
            assert_eq!(cand.regular_backward_orbit.len(), 1);
        }
        assert_eq!(report.e_max.len(), 2);
        assert!((report.e_max[0] + 1.0).abs() < 1e-12);
        assert!((report.e_max[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exceptional_generic_seed_blows_up() {
        let sys = registry::cheb3();
        let sigma = [-0.5, 0.5];
        let report = exceptional_scan(&sys.map, &sys.repeller, &sigma, &[0.3], 6);
        assert_eq!(
            report.candidates[0].verdict,
            ExceptionalVerdict::NotExceptional
        );
    }

    #[test]
    fn word_counts_match_tree_counts_on_notwi() {
        let sys = registry::notwi();
        let part = default_partition(&sys.map, &sys.repeller);
        let m = transition_matrix(&sys.map, &sys.repeller, &part).unwrap();
        // interior period-2 orbit with itinerary (0 2)^∞: start in symbol 0
        let orbits =
            crate::orbit::periodic_points(&sys.map, &sys.repeller, 2, 1_000_000).unwrap();
        let target = orbits
            .iter()
            .find(|o| {
                o.period == 2
                    && o.in_k == Membership::InK
                    && o.points[0] < -0.5
                    && o.points.iter().all(|&p| (p.abs() - 0.5).abs() > 0.05)
            })
            .expect("interior period-2 orbit");
        let z = target.points[0];
        let sym = if z < -0.5 { 0 } else if z < 0.5 { 1 } else { 2 };
        for n in 1..=6u32 {
            let tree = crate::orbit::preimage_tree(&sys.map, &sys.repeller, z, n).unwrap();
            let words = m.admissible_words_into(n + 1, sym);
            assert_eq!(
                tree.leaves().len() as u64,
                words,
                "depth {n}: tree vs admissible words"
            );
        }
    }
}
