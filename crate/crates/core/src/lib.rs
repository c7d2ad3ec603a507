//! Numerical workbench for the thermodynamic formalism of piecewise-monotone
//! interval maps: geometric pressure by independent estimators (backward
//! trees, periodic orbits, weighted subshifts, induced systems), conformal
//! measures by the Patterson-Sullivan recipe, and executable cross-checks of
//! the equivalences between them.

pub mod conformal;
pub mod error;
pub mod inducing;
pub mod interval;
pub mod map;
pub mod numerics;
pub mod orbit;
pub mod pressure;
pub mod registry;
pub mod repeller;
pub mod report;
pub mod symbolic;
pub mod tce;

pub use error::{Error, Result};
pub use interval::Interval;
pub use map::{CritKind, CriticalPoint, Lap, MapExpr, MultimodalMap, Preimage};
pub use registry::System;
pub use repeller::{Membership, Repeller, SingularSet};
