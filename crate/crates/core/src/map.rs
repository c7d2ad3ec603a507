//! Piecewise-monotone smooth interval maps: evaluation, analytic derivatives,
//! lap structure and branch-wise preimages.
//!
//! Expressions are restricted to polynomials and a few named closed forms so
//! that first and second derivatives are exact; no finite differences are used
//! anywhere downstream.

use crate::error::{Error, Result};
use crate::interval::Interval;
use serde::{Deserialize, Serialize};

/// Width to which preimage brackets are bisected before the Newton polish.
pub const ROOT_BRACKET_WIDTH: f64 = 1e-13;

/// Tolerance used to decide that a preimage coincides with a critical point
/// (tangency at a critical value: double root reported once, flagged).
pub const TANGENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MapExpr {
    /// 4x^3 - 3x, the cubic with full branches on [-1, 1].
    Chebyshev3,
    /// lambda * x * (1 - x) on [0, 1].
    Logistic { lambda: f64 },
    /// Coefficients in increasing degree order.
    Polynomial { coeffs: Vec<f64> },
}

impl MapExpr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MapExpr::Chebyshev3 => 4.0 * x * x * x - 3.0 * x,
            MapExpr::Logistic { lambda } => lambda * x * (1.0 - x),
            MapExpr::Polynomial { coeffs } => horner(coeffs, x),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            MapExpr::Chebyshev3 => 12.0 * x * x - 3.0,
            MapExpr::Logistic { lambda } => lambda * (1.0 - 2.0 * x),
            MapExpr::Polynomial { coeffs } => horner(&differentiate(coeffs), x),
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            MapExpr::Chebyshev3 => 24.0 * x,
            MapExpr::Logistic { lambda } => -2.0 * lambda,
            MapExpr::Polynomial { coeffs } => horner(&differentiate(&differentiate(coeffs)), x),
        }
    }

    /// Real roots of f' inside `span`, by sign scanning plus bisection.
    fn critical_points_in(&self, span: &Interval) -> Vec<f64> {
        match self {
            MapExpr::Chebyshev3 => [-0.5, 0.5]
                .iter()
                .copied()
                .filter(|c| span.contains(*c))
                .collect(),
            MapExpr::Logistic { .. } => [0.5]
                .iter()
                .copied()
                .filter(|c| span.contains(*c))
                .collect(),
            MapExpr::Polynomial { .. } => {
                let mut out = Vec::new();
                let n = 4096;
                let step = span.len() / n as f64;
                let mut prev_x = span.lo;
                let mut prev_v = self.d1(prev_x);
                for i in 1..=n {
                    let x = span.lo + i as f64 * step;
                    let v = self.d1(x);
                    if prev_v == 0.0 {
                        out.push(prev_x);
                    } else if prev_v * v < 0.0 {
                        out.push(bisect(|u| self.d1(u), prev_x, x, ROOT_BRACKET_WIDTH));
                    }
                    prev_x = x;
                    prev_v = v;
                }
                if self.d1(span.hi) == 0.0 {
                    out.push(span.hi);
                }
                out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
                out
            }
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect()
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, width: f64) -> f64 {
    let fa = f(a);
    debug_assert!(fa * f(b) <= 0.0);
    while b - a > width {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CritKind {
    Turning,
    Inflection,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub kind: CritKind,
}

/// A maximal monotone branch of the map.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Lap {
    pub span: Interval,
    /// Sign of f' on the lap interior.
    pub rising: bool,
}

impl Lap {
    /// Image interval of the lap, endpoints ordered.
    pub fn image(&self, expr: &MapExpr) -> Interval {
        Interval::spanning(expr.eval(self.span.lo), expr.eval(self.span.hi))
    }
}

/// One branch-wise preimage of a point.
#[derive(Debug, Clone, Copy)]
pub struct Preimage {
    pub x: f64,
    pub lap: usize,
    /// Double root at a critical value (derivative zero at the preimage).
    pub tangency: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultimodalMap {
    pub name: String,
    pub expr: MapExpr,
    /// Ordered domain components.
    pub domain: Vec<Interval>,
    pub laps: Vec<Lap>,
    pub critical: Vec<CriticalPoint>,
    /// sup |f'| over a neighbourhood of the domain.
    pub lipschitz: f64,
    /// Half-width of the declared neighbourhood U beyond the domain.
    pub pad: f64,
}

impl MultimodalMap {
    /// Builds the lap decomposition of `expr` over the given domain components.
    pub fn new(name: &str, expr: MapExpr, domain: Vec<Interval>, pad: f64) -> Self {
        assert!(!domain.is_empty());
        let mut laps = Vec::new();
        let mut critical = Vec::new();
        for comp in &domain {
            let mut cuts = vec![comp.lo];
            for c in expr.critical_points_in(comp) {
                if c > comp.lo + 1e-14 && c < comp.hi - 1e-14 {
                    cuts.push(c);
                    let kind = if expr.d2(c).abs() > 1e-9 {
                        CritKind::Turning
                    } else {
                        CritKind::Inflection
                    };
                    critical.push(CriticalPoint { x: c, kind });
                }
            }
            cuts.push(comp.hi);
            for w in cuts.windows(2) {
                let span = Interval::new(w[0], w[1]);
                let rising = expr.d1(span.midpoint()) > 0.0;
                laps.push(Lap { span, rising });
            }
        }
        let lipschitz = {
            let mut sup: f64 = 0.0;
            for lap in &laps {
                let n = 512;
                for i in 0..=n {
                    let x = lap.span.lo + lap.span.len() * i as f64 / n as f64;
                    sup = sup.max(expr.d1(x).abs());
                }
            }
            sup * 1.05
        };
        MultimodalMap {
            name: name.to_string(),
            expr,
            domain,
            laps,
            critical,
            lipschitz,
            pad,
        }
    }

    pub fn domain_span(&self) -> Interval {
        Interval::new(
            self.domain.first().unwrap().lo,
            self.domain.last().unwrap().hi,
        )
    }

    fn in_neighbourhood(&self, x: f64) -> bool {
        self.domain.iter().any(|c| c.dist_to(x) <= self.pad)
    }

    /// f(x); errors if x leaves the declared neighbourhood of the domain.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !self.in_neighbourhood(x) {
            return Err(Error::OutOfDomain { x });
        }
        Ok(self.expr.eval(x))
    }

    /// Exact analytic derivative of the declared expression, order 1 or 2.
    pub fn derivative(&self, x: f64, order: u8) -> Result<f64> {
        if !self.in_neighbourhood(x) {
            return Err(Error::OutOfDomain { x });
        }
        Ok(match order {
            1 => self.expr.d1(x),
            2 => self.expr.d2(x),
            _ => panic!("derivative order must be 1 or 2"),
        })
    }

    /// Unchecked evaluation, for hot loops on points already known to lie in U.
    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }

    #[inline]
    pub fn df(&self, x: f64) -> f64 {
        self.expr.d1(x)
    }

    /// log |(f^n)'(x)| accumulated along the forward orbit of x.
    pub fn log_deriv_along(&self, x: f64, n: u32) -> f64 {
        let mut acc = 0.0;
        let mut cur = x;
        for _ in 0..n {
            acc += self.df(cur).abs().ln();
            cur = self.f(cur);
        }
        acc
    }

    pub fn iterate(&self, x: f64, n: u32) -> f64 {
        let mut cur = x;
        for _ in 0..n {
            cur = self.f(cur);
        }
        cur
    }

    /// All solutions of f(x) = y, one per lap whose image contains y.
    ///
    /// Monotone bracketed bisection to width `ROOT_BRACKET_WIDTH`, then one
    /// safeguarded Newton step. Ties at lap boundaries are assigned to the
    /// left lap. A double root at a critical value is reported once with the
    /// tangency flag set.
    pub fn branch_preimages(&self, y: f64) -> Vec<Preimage> {
        let mut out: Vec<Preimage> = Vec::new();
        for (li, lap) in self.laps.iter().enumerate() {
            let img = lap.image(&self.expr);
            if y < img.lo || y > img.hi {
                continue;
            }
            let root = self.invert_on_lap(lap, y);
            let tangency = self.df(root).abs() < TANGENCY_TOL
                || self
                    .critical
                    .iter()
                    .any(|c| (c.x - root).abs() < TANGENCY_TOL);
            // a tangency straddles two laps; keep the first copy only
            if let Some(prev) = out.last() {
                if (prev.x - root).abs() < 10.0 * TANGENCY_TOL {
                    continue;
                }
            }
            out.push(Preimage {
                x: root,
                lap: li,
                tangency,
            });
        }
        out
    }

    fn invert_on_lap(&self, lap: &Lap, y: f64) -> f64 {
        let (mut a, mut b) = (lap.span.lo, lap.span.hi);
        // g(x) = f(x) - y is monotone on the lap
        let ga = self.f(a) - y;
        if ga == 0.0 {
            return a;
        }
        if self.f(b) - y == 0.0 {
            return b;
        }
        while b - a > ROOT_BRACKET_WIDTH {
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
        let mut x = 0.5 * (a + b);
        // one safeguarded Newton polish
        let d = self.df(x);
        if d.abs() > 1e-8 {
            let step = (self.f(x) - y) / d;
            let polished = x - step;
            if polished >= lap.span.lo && polished <= lap.span.hi && step.abs() < 2.0 * (b - a) {
                x = polished;
            }
        }
        x
    }

    /// Degree count implied by the lap structure: number of laps whose image
    /// contains y in its interior.
    pub fn degree_at(&self, y: f64) -> usize {
        self.laps
            .iter()
            .filter(|l| {
                let img = l.image(&self.expr);
                img.contains_strict(y)
            })
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cheb3() -> MultimodalMap {
        MultimodalMap::new(
            "cheb3",
            MapExpr::Chebyshev3,
            vec![Interval::new(-1.0, 1.0)],
            1e-6,
        )
    }

    fn logistic4() -> MultimodalMap {
        MultimodalMap::new(
            "logistic4",
            MapExpr::Logistic { lambda: 4.0 },
            vec![Interval::new(0.0, 1.0)],
            1e-6,
        )
    }

    #[test]
    fn evaluate_examples() {
        let m = cheb3();
        assert_eq!(m.evaluate(1.0).unwrap(), 1.0);
        assert_eq!(m.evaluate(-0.5).unwrap(), 1.0);
        let l = logistic4();
        assert_eq!(l.evaluate(0.5).unwrap(), 1.0);
        assert!(m.evaluate(2.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let m = cheb3();
        assert_eq!(m.derivative(1.0, 1).unwrap(), 9.0);
        assert_eq!(m.derivative(0.5, 1).unwrap(), 0.0);
        let l = logistic4();
        assert_eq!(l.derivative(0.0, 1).unwrap(), 4.0);
    }

    #[test]
    fn lap_structure() {
        let m = cheb3();
        assert_eq!(m.laps.len(), 3);
        assert!(m.laps[0].rising && !m.laps[1].rising && m.laps[2].rising);
        assert_eq!(m.critical.len(), 2);
        assert!(m.critical.iter().all(|c| c.kind == CritKind::Turning));
        let l = logistic4();
        assert_eq!(l.laps.len(), 2);
    }

    #[test]
    fn preimages_of_one_on_cheb3() {
        // 4x^3 - 3x - 1 = (x - 1)(2x + 1)^2
        let m = cheb3();
        let pre = m.branch_preimages(1.0);
        assert_eq!(pre.len(), 2);
        let tang: Vec<_> = pre.iter().filter(|p| p.tangency).collect();
        assert_eq!(tang.len(), 1);
        assert!((tang[0].x + 0.5).abs() < 1e-9);
        let plain: Vec<_> = pre.iter().filter(|p| !p.tangency).collect();
        assert!((plain[0].x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn preimages_of_zero_on_cheb3() {
        // 4x^3 - 3x = x(4x^2 - 3)
        let m = cheb3();
        let pre = m.branch_preimages(0.0);
        assert_eq!(pre.len(), 3);
        let half = 3f64.sqrt() / 2.0;
        let expected = [-half, 0.0, half];
        for (p, e) in pre.iter().zip(expected) {
            assert!((p.x - e).abs() < 1e-12, "{} vs {}", p.x, e);
            assert!(!p.tangency);
        }
    }

    #[test]
    fn preimages_quadratic_logistic() {
        // 4x(1-x) = 3/4 at x = 1/4 and 3/4
        let l = logistic4();
        let pre = l.branch_preimages(0.75);
        assert_eq!(pre.len(), 2);
        assert!((pre[0].x - 0.25).abs() < 1e-12);
        assert!((pre[1].x - 0.75).abs() < 1e-12);
    }

    #[test]
    fn preimage_residuals_and_degree_count() {
        let m = cheb3();
        let l = logistic4();
        let mut k = 0u32;
        for i in 0..1000 {
            let y = -0.999 + 1.998 * (i as f64 + 0.5) / 1000.0;
            let pre = m.branch_preimages(y);
            if pre.iter().all(|p| !p.tangency) {
                assert_eq!(pre.len(), 3, "cheb3 degree at y={y}");
            }
            for p in &pre {
                assert!((m.f(p.x) - y).abs() < 10.0 * f64::EPSILON.sqrt());
            }
            let yl = (i as f64 + 0.5) / 1000.0 * 0.998;
            let prel = l.branch_preimages(yl);
            assert_eq!(prel.len(), 2);
            for p in &prel {
                assert!((l.f(p.x) - yl).abs() < 1e-10);
            }
            k += 1;
        }
        assert_eq!(k, 1000);
    }

    #[test]
    fn polynomial_expression_matches_closed_form() {
        // cheb3 as a raw polynomial
        let p = MultimodalMap::new(
            "poly",
            MapExpr::Polynomial {
                coeffs: vec![0.0, -3.0, 0.0, 4.0],
            },
            vec![Interval::new(-1.0, 1.0)],
            1e-6,
        );
        let m = cheb3();
        assert_eq!(p.laps.len(), 3);
        for i in 0..100 {
            let x = -1.0 + 2.0 * i as f64 / 99.0;
            assert!((p.f(x) - m.f(x)).abs() < 1e-12);
            assert!((p.df(x) - m.df(x)).abs() < 1e-9);
        }
    }
}
