//! Rolling of Riemannian manifolds of possibly different dimensions.
//!
//! A state `q = (x, x̂; A)` pairs a point of `M`, a point of `M̂` and a
//! partial isometry `A: T_xM → T_x̂M̂` of maximal rank, stored as a matrix
//! in the deterministic orthonormal frames at `x` and `x̂`. The crate
//! integrates rolling motions (no slipping, no spinning) and the no-spin
//! system, evaluates the rolling curvature `Rol` and the Lie brackets of the
//! rolling distribution, and diagnoses controllability of both systems.

pub mod control;
pub mod controllability;
pub mod dim_gap;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod manifold;
pub mod ode;
pub mod rol;
pub mod rolling;
pub mod state;
pub mod verify;

pub use control::{ControlFrame, ControlSignal};
pub use controllability::{
    holonomy_algebra, involutivity_check, larc, loop_holonomy, ns_controllable, rol_scan, HolonomyAlgebra, LarcOptions, LieSpanReport, NsReport,
    Verdict,
};
pub use dim_gap::{commutation_check, lift, project, GapConfig, GapSide};
pub use error::{Error, Result, Side};
pub use flow::{flow_bracket_oracle, OracleBracket, QField};
pub use manifold::isometry::Isometry;
pub use manifold::{ChartPoint, DerivativeMode, Domain, ManifoldKind, ManifoldSpec, PolynomialMetric, Warping};
pub use rol::{lr_bracket, lr_nu_bracket, nu_nu_bracket, rol, rol_cov, rol_norm, FieldAtPoint, MField, RolContext};
pub use rolling::{roll, roll_geodesic, roll_ns, Diagnostics, RollingTrajectory};
pub use state::{dim_q, i_nnhat, vertical_dim, RollingPair, RollingState, StateRecord, TangentTriple};
