//! Deterministic CSV and versioned JSON emission. Numbers are formatted with
//! the shortest round-trip representation, so identical inputs produce
//! identical bytes.

use crate::conformal::AtomicMeasure;
use crate::inducing::{Histogram, InducedSystem};
use crate::pressure::{ChiBounds, PressureCurve};
use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema_version: &'static str,
    pub kind: &'static str,
    pub map: String,
    pub seed: u64,
    pub payload: T,
}

pub fn json_report<T: Serialize>(
    kind: &'static str,
    map: &str,
    seed: u64,
    payload: T,
) -> String {
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        kind,
        map: map.to_string(),
        seed,
        payload,
    };
    let mut out = serde_json::to_string_pretty(&envelope).expect("report serialisation");
    out.push('\n');
    out
}

fn fmt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        Some(x) if x.is_infinite() && x > 0.0 => "inf".to_string(),
        Some(x) if x.is_infinite() => "-inf".to_string(),
        _ => String::new(),
    }
}

/// Pressure-curve CSV: one row per grid point, fixed column order, absent
/// methods as empty fields.
pub fn pressure_csv(curve: &PressureCurve, chi: Option<&ChiBounds>) -> String {
    let mut out = String::from(
        "t,p_tree,p_per,p_markov_lo,p_markov_hi,p_induced,chi_inf,chi_sup,depth\n",
    );
    for s in &curve.samples {
        let chi_inf = chi.map(|c| c.chi_inf);
        let chi_sup = chi.map(|c| c.chi_sup);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.t,
            fmt(s.p_tree),
            fmt(s.p_per),
            fmt(s.p_markov_lo),
            fmt(s.p_markov_hi),
            fmt(s.p_induced),
            fmt(chi_inf),
            fmt(chi_sup),
            s.depth_used,
        ));
    }
    out
}

/// Atomic measure as (point, weight) rows.
pub fn measure_csv(measure: &AtomicMeasure) -> String {
    let mut out = String::from("point,weight\n");
    for &(x, w) in &measure.atoms {
        out.push_str(&format!("{x},{w}\n"));
    }
    out
}

/// CDF samples of an atomic measure on a uniform grid.
pub fn measure_cdf_csv(measure: &AtomicMeasure, lo: f64, hi: f64, n: usize) -> String {
    let mut out = String::from("x,cdf\n");
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        out.push_str(&format!("{x},{}\n", measure.cdf(x)));
    }
    out
}

/// Histogram CDF rows (bin upper edge, cumulative mass).
pub fn histogram_csv(hist: &Histogram) -> String {
    let mut out = String::from("bin_hi,cdf\n");
    let edges = hist.bin_edges();
    for (i, c) in hist.cdf().iter().enumerate() {
        out.push_str(&format!("{},{}\n", edges[i + 1], c));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct InducedSummary {
    pub branch_count: usize,
    pub depth_cap: u32,
    pub truncation_mass_bound: f64,
    pub truncation_fraction: f64,
    pub epsilon_scale: f64,
    pub inner_components: Vec<(f64, f64, f64)>,
    pub outer_components: Vec<(f64, f64, f64)>,
    pub boundary_return_residual: f64,
    pub branches: Vec<(f64, f64, u32, usize, usize, f64, f64)>,
}

/// Flattened induced-system summary (couple endpoints plus the branch table
/// W / m_W / source / target / derivative bounds).
pub fn induced_summary(system: &InducedSystem) -> InducedSummary {
    InducedSummary {
        branch_count: system.branches.len(),
        depth_cap: system.depth_cap,
        epsilon_scale: system.couple.epsilon_scale,
        truncation_mass_bound: system.truncation_mass_bound,
        truncation_fraction: system.truncation_fraction,
        inner_components: system
            .couple
            .inner
            .components
            .iter()
            .map(|c| (c.center, c.interval.lo, c.interval.hi))
            .collect(),
        outer_components: system
            .couple
            .outer
            .components
            .iter()
            .map(|c| (c.center, c.interval.lo, c.interval.hi))
            .collect(),
        boundary_return_residual: system.couple.inner.boundary_return_residual,
        branches: system
            .branches
            .iter()
            .map(|b| {
                (
                    b.domain.lo,
                    b.domain.hi,
                    b.return_time,
                    b.source,
                    b.target,
                    b.sup_abs_phi_prime,
                    b.inf_abs_phi_prime,
                )
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::{Methods, PressureSample};

    #[test]
    fn csv_deterministic_and_well_formed() {
        let curve = PressureCurve {
            samples: vec![PressureSample {
                t: 0.5,
                p_tree: Some(0.5493),
                p_tree_raw: Some(0.52),
                p_per: None,
                p_markov_lo: None,
                p_markov_hi: None,
                p_induced: None,
                depth_used: 12,
                bracket_lo: 0.54,
                bracket_hi: 0.56,
            }],
            base_point: Some(0.3),
            base_point_sensitivity: Some(0.001),
            expanding_certificate: "empirical".into(),
        };
        let a = pressure_csv(&curve, None);
        let b = pressure_csv(&curve, None);
        assert_eq!(a, b);
        assert!(a.starts_with("t,p_tree,p_per,"));
        let row = a.lines().nth(1).unwrap();
        assert_eq!(row.split(',').count(), 9);
        assert!(row.contains("0.5493"));
        // absent fields are empty, not zero
        assert!(row.contains(",,"));
        let _ = Methods::default();
    }

    #[test]
    fn json_envelope_versioned() {
        let s = json_report("coding", "notwi", 7, serde_json::json!({"entropy": 1.005}));
        assert!(s.contains("\"schema_version\": \"1\""));
        assert!(s.contains("\"kind\": \"coding\""));
        assert!(s.ends_with('\n'));
    }
}
