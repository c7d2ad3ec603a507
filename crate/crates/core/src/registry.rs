//! Built-in map registry and the config schema used by the CLI.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::map::{MapExpr, MultimodalMap};
use crate::repeller::Repeller;
use serde::{Deserialize, Serialize};

/// A map together with the repeller it is studied on.
#[derive(Debug, Clone)]
pub struct System {
    pub map: MultimodalMap,
    pub repeller: Repeller,
}

pub fn cheb3() -> System {
    let map = MultimodalMap::new(
        "cheb3",
        MapExpr::Chebyshev3,
        vec![Interval::new(-1.0, 1.0)],
        1e-6,
    );
    let repeller = Repeller::full_domain(&map);
    System { map, repeller }
}

pub fn logistic(lambda: f64) -> System {
    let name = if lambda == 4.0 {
        "logistic4".to_string()
    } else {
        format!("logistic{lambda}")
    };
    let map = MultimodalMap::new(
        &name,
        MapExpr::Logistic { lambda },
        vec![Interval::new(0.0, 1.0)],
        1e-6,
    );
    let repeller = Repeller::full_domain(&map);
    System { map, repeller }
}

/// cheb3 restricted to the complement of the hole T, the open interval of
/// points whose itinerary starts with the block 11. The endpoints of T are
/// the middle-lap preimages of the two critical points: f maps them onto
/// +1/2 and -1/2 respectively, so the forward orbit of ∂T is
/// {±1/2, ∓1, ...}, disjoint from the closure of T.
pub fn notwi() -> System {
    let base = cheb3();
    let map = base.map;
    // middle-lap preimages of the critical points: the solutions of
    // f(x) = ±1/2 inside (-1/2, 1/2); closed forms cos(5π/9), cos(4π/9)
    let left = map
        .branch_preimages(0.5)
        .into_iter()
        .find(|p| p.lap == 1 && !p.tangency)
        .expect("middle-lap preimage of +1/2");
    let right = map
        .branch_preimages(-0.5)
        .into_iter()
        .find(|p| p.lap == 1 && !p.tangency)
        .expect("middle-lap preimage of -1/2");
    let hole = Interval::new(left.x, right.x);
    let components = vec![
        Interval::new(-1.0, hole.lo),
        Interval::new(hole.hi, 1.0),
    ];
    let map = MultimodalMap {
        name: "notwi".to_string(),
        ..map
    };
    let repeller = Repeller::with_holes(components, vec![hole], 64);
    System { map, repeller }
}

pub fn by_name(name: &str) -> Result<System> {
    match name {
        "cheb3" => Ok(cheb3()),
        "logistic4" => Ok(logistic(4.0)),
        "notwi" => Ok(notwi()),
        other => {
            if let Some(rest) = other.strip_prefix("logistic:") {
                let lambda: f64 = rest
                    .parse()
                    .map_err(|_| Error::Config(format!("bad logistic parameter `{rest}`")))?;
                if !(0.0..=4.0).contains(&lambda) {
                    return Err(Error::Config(format!(
                        "logistic parameter {lambda} outside (0, 4]"
                    )));
                }
                Ok(logistic(lambda))
            } else {
                Err(Error::Config(format!("unknown map `{other}`")))
            }
        }
    }
}

/// On-disk description of a map entry, mirroring the built-in registry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapConfig {
    pub name: String,
    /// "cheb3", "logistic", or "polynomial".
    pub expression: String,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub coefficients: Option<Vec<f64>>,
    /// Pairs [lo, hi].
    pub domain: Vec<[f64; 2]>,
    #[serde(default)]
    pub holes: Vec<[f64; 2]>,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default)]
    pub lipschitz_bound: Option<f64>,
}

fn default_horizon() -> u32 {
    64
}

impl MapConfig {
    pub fn build(&self) -> Result<System> {
        let expr = match self.expression.as_str() {
            "cheb3" => MapExpr::Chebyshev3,
            "logistic" => MapExpr::Logistic {
                lambda: self
                    .lambda
                    .ok_or_else(|| Error::Config("logistic needs `lambda`".into()))?,
            },
            "polynomial" => MapExpr::Polynomial {
                coeffs: self
                    .coefficients
                    .clone()
                    .ok_or_else(|| Error::Config("polynomial needs `coefficients`".into()))?,
            },
            other => return Err(Error::Config(format!("unknown expression tag `{other}`"))),
        };
        if self.domain.is_empty() {
            return Err(Error::Config("domain must be non-empty".into()));
        }
        let domain: Vec<Interval> = self
            .domain
            .iter()
            .map(|[lo, hi]| {
                if lo >= hi {
                    Err(Error::Config(format!("bad domain interval [{lo}, {hi}]")))
                } else {
                    Ok(Interval::new(*lo, *hi))
                }
            })
            .collect::<Result<_>>()?;
        let mut map = MultimodalMap::new(&self.name, expr, domain, 1e-6);
        if let Some(l) = self.lipschitz_bound {
            map.lipschitz = l;
        }
        let holes: Vec<Interval> = self
            .holes
            .iter()
            .map(|[lo, hi]| Interval::new(*lo, *hi))
            .collect();
        let repeller = if holes.is_empty() {
            let mut r = Repeller::full_domain(&map);
            r.horizon = self.horizon;
            r
        } else {
            Repeller::with_holes(map.domain.clone(), holes, self.horizon)
        };
        Ok(System { map, repeller })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repeller::Membership;

    #[test]
    fn notwi_hole_endpoints() {
        let sys = notwi();
        let hole = sys.repeller.holes[0];
        // closed forms: cos(5π/9) and cos(4π/9)
        let a = (5.0 * std::f64::consts::PI / 9.0).cos();
        let b = (4.0 * std::f64::consts::PI / 9.0).cos();
        assert!((hole.lo - a).abs() < 1e-12, "{} vs {}", hole.lo, a);
        assert!((hole.hi - b).abs() < 1e-12);
        // forward orbit of the hole endpoints avoids the closure of the hole
        for e in [hole.lo, hole.hi] {
            let mut cur = e;
            for _ in 0..50 {
                cur = sys.map.f(cur);
                assert!(!hole.contains_with_margin(cur, 1e-9));
            }
        }
    }

    #[test]
    fn notwi_membership_examples() {
        let sys = notwi();
        // any point in the hole starts with itinerary block 11
        assert_eq!(
            sys.repeller.membership(&sys.map, 0.0),
            Membership::NotInK
        );
        // boundary fixed points stay forever
        assert_eq!(
            sys.repeller.membership(&sys.map, 0.9),
            sys.repeller.membership(&sys.map, 0.9)
        );
        assert_eq!(
            sys.repeller.certify_periodic_orbit(&[1.0]),
            Membership::InK
        );
    }

    #[test]
    fn config_roundtrip_builds() {
        let cfg = MapConfig {
            name: "cheb3".into(),
            expression: "cheb3".into(),
            lambda: None,
            coefficients: None,
            domain: vec![[-1.0, 1.0]],
            holes: vec![],
            horizon: 64,
            lipschitz_bound: None,
        };
        let sys = cfg.build().unwrap();
        assert_eq!(sys.map.laps.len(), 3);
        assert!(sys.repeller.full);
    }

    #[test]
    fn registry_lookup() {
        assert!(by_name("cheb3").is_ok());
        assert!(by_name("logistic4").is_ok());
        assert!(by_name("logistic:3.9").is_ok());
        assert!(by_name("notwi").is_ok());
        assert!(by_name("nope").is_err());
    }
}
