//! Second-order summaries and envelope tests.

pub mod envelope;
pub mod gpcf;
pub mod validate;

pub use envelope::{
    envelope_test, erl_measure, erl_measures, erl_p_value, global_envelope, pointwise_envelopes, EnvelopeResult,
    GlobalEnvelope,
};
pub use gpcf::{estimate_gpcf, estimate_gpcf_with, loo_kernel_intensity, Bandwidths, GpcfSurface};
pub use validate::{gpcf_for, simulation_envelope, EnvelopeSpec, GIntensity};
