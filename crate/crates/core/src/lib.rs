//! Canards in time-periodically forced planar slow/fast systems.
//!
//! The crate locates canard points, evaluates the normal-form coefficients,
//! predicts the parameter interval that supports maximal canards in the low
//! and intermediate forcing-frequency regimes, checks those predictions
//! against a quadrature of the splitting integrals, and measures the
//! canard boundaries directly by shooting from the attracting and repelling
//! slow manifolds.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `…F64`
//! aliases below name the usual double-precision instantiations.

pub mod coefficients;
pub mod detector;
pub mod envelope;
pub mod error;
pub mod integrator;
pub mod locator;
pub mod melnikov;
pub mod quadrature;
pub mod reduced;
pub mod scalar;
pub mod system;
pub mod verify;

pub use coefficients::{compute_coefficients, compute_coefficients_with, CoefficientSet, DerivativeMode, DerivativeSource};
pub use detector::{
    fold_of_canards, splitting_profile, trace_boundary, BoundaryCurve, BoundaryPoint, Branch, DetectorConfig,
    SplittingProfile,
};
pub use envelope::{
    a_center, canard_curve, envelope_int, envelope_low, envelope_unified, EnvelopeResult, Unscaling,
};
pub use error::{CanardError, Result};
pub use integrator::{integrate, Direction, Event, IvpSpec, Trajectory};
pub use locator::{find_canard_point, find_fold, CanardPoint, CertFlags};
pub use melnikov::{
    gamma, hamiltonian, melnikov_int, melnikov_low, BlowupScaledParams, HamiltonianState, MelnikovInt, MelnikovLow,
};
pub use quadrature::QuadratureSpec;
pub use reduced::{
    desingularized_rhs, find_folded_singularities, fsn_parameter, orientation_corrected, FoldedSingularities,
    FoldedSingularity, SingularityClass,
};
pub use scalar::Scalar;
pub use system::{
    builtin_fhn, builtin_vdp, fhn_lienard, lienard_fast_form, lienard_slow_form, vdp_lienard, ForcingConfig,
    LienardDef, Regime, SlowFastSystem,
};

pub type SystemF64 = SlowFastSystem<f64>;
pub type CanardPointF64 = CanardPoint<f64>;
pub type CoefficientSetF64 = CoefficientSet<f64>;
pub type EnvelopeResultF64 = EnvelopeResult<f64>;
pub type SplittingProfileF64 = SplittingProfile<f64>;
pub type BoundaryCurveF64 = BoundaryCurve<f64>;
pub type TrajectoryF64 = Trajectory<f64>;

pub type SystemF32 = SlowFastSystem<f32>;
pub type CanardPointF32 = CanardPoint<f32>;
pub type CoefficientSetF32 = CoefficientSet<f32>;
pub type EnvelopeResultF32 = EnvelopeResult<f32>;
