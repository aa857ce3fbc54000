//! Odometer coordinates, the maps `phi` and `theta`, proximality evidence,
//! periods, Toeplitz skeletons and the maximal-entropy sampler.

mod odometer;
mod proximal;
mod sampler;
mod toeplitz;

pub use odometer::{phi, theta, OdometerPoint, Theta};
pub use proximal::{
    max_equicontinuous_period, minimal_period, proximality_suite, Overall, ProximalityOptions,
    ProximalityVerdict, TProxEvidence, ZeroBlockEvidence,
};
pub use sampler::sample_max_entropy;
pub use toeplitz::{
    build_minimal_toeplitz, dyadic_period, toeplitz_verify, PeriodStrategy, Stage, ToeplitzReport,
    ToeplitzSkeleton,
};
