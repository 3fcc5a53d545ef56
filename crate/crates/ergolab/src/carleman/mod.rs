//! Radial Carleman weights for the vortex and flat 2+1 space, the bulk coefficient of the
//! multiplier identity, and numerical checks of the identity and of the resulting estimate.

pub mod bulk;
pub mod identity;
pub mod jet;
pub mod params;
pub mod weights;

pub use bulk::{bulk_coefficient, BulkCoefficient, BulkRegion, Envelopes, MultiplierWeights};
pub use identity::{
    carleman_inequality_check, identity_convergence, multiplier_identity_residual, profile_for_pulse, AnalyticWeight,
    GaussianPulse, IdentityTerms, InequalityConstants, InequalityReport,
};
pub use jet::Jet;
pub use params::{choose_parameters, choose_parameters_from, CarlemanParams};
pub use weights::{build_profile, FhReport, RadialSetting, WeightProfile, WeightSample};
