//! Small numerical kernels shared across modules: compensated summation,
//! log-sum-exp, power iteration, extrapolation, line fitting.

/// Neumaier-compensated accumulator; deterministic for a fixed input order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// log(Σ exp(w_i)) accumulated in deterministic order.
pub fn log_sum_exp(weights: &[f64]) -> f64 {
    if weights.is_empty() {
        return f64::NEG_INFINITY;
    }
    let m = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let mut acc = Kahan::default();
    for &w in weights {
        acc.add((w - m).exp());
    }
    m + acc.value().ln()
}

/// Dense power iteration; returns (spectral radius, right eigenvector).
/// The matrix must be non-negative. Tolerance is on successive Rayleigh
/// quotients.
pub fn power_iteration(matrix: &[Vec<f64>], tol: f64, max_iter: usize) -> (f64, Vec<f64>) {
    let n = matrix.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = 0.0f64;
    for _ in 0..max_iter {
        let mut w = vec![0.0; n];
        for (i, row) in matrix.iter().enumerate() {
            let mut acc = Kahan::default();
            for (j, &m) in row.iter().enumerate() {
                acc.add(m * v[j]);
            }
            w[i] = acc.value();
        }
        let norm: f64 = w.iter().map(|x| x.abs()).sum();
        if norm == 0.0 {
            return (0.0, w);
        }
        for x in &mut w {
            *x /= norm;
        }
        let new_lambda = norm;
        let done = (new_lambda - lambda).abs() <= tol * new_lambda.max(1.0);
        v = w;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    (lambda, v)
}

/// Left eigenvector (of the transpose) via power iteration.
pub fn left_eigenvector(matrix: &[Vec<f64>], tol: f64, max_iter: usize) -> Vec<f64> {
    let n = matrix.len();
    let mut t = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            t[j][i] = matrix[i][j];
        }
    }
    power_iteration(&t, tol, max_iter).1
}

/// Aitken Δ² acceleration of the last three terms of a sequence.
/// Falls back to the last term when the second difference is numerically
/// degenerate.
pub fn aitken(s0: f64, s1: f64, s2: f64) -> f64 {
    let d1 = s2 - s1;
    let d0 = s1 - s0;
    let dd = d1 - d0;
    if dd.abs() < 1e-12 * (s2.abs().max(1.0)) {
        return s2;
    }
    s2 - d1 * d1 / dd
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    (slope, my - slope * mx)
}

/// Bisection for a monotone-crossing predicate: finds x in [lo, hi] where
/// `f` changes sign, assuming f(lo) and f(hi) have opposite signs.
pub fn bisect_root<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_cancellation() {
        let mut k = Kahan::default();
        k.add(1.0);
        for _ in 0..1000 {
            k.add(1e-17);
        }
        assert!(k.value() > 1.0);
    }

    #[test]
    fn lse_matches_direct() {
        let w = [0.0f64, (2.0f64).ln(), (3.0f64).ln()];
        assert!((log_sum_exp(&w) - 6.0f64.ln()).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn power_iteration_rank_one() {
        let m = vec![vec![1.0; 3]; 3];
        let (rho, _) = power_iteration(&m, 1e-14, 500);
        assert!((rho - 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_fibonacci() {
        let m = vec![vec![1.0, 1.0], vec![1.0, 0.0]];
        let (rho, _) = power_iteration(&m, 1e-14, 2000);
        let golden = 0.5 * (1.0 + 5f64.sqrt());
        assert!((rho - golden).abs() < 1e-12);
    }

    #[test]
    fn aitken_geometric() {
        // s_n = 1 + 0.5^n converges to 1
        let s = |n: i32| 1.0 + 0.5f64.powi(n);
        let a = aitken(s(5), s(6), s(7));
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let (s, b) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }
}
