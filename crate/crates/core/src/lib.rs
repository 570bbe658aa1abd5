//! Delay-Doppler sensing with OTFS: the cross-talk channel operator in dense,
//! Kronecker-factored and Dirichlet-masked form, a maximum-likelihood
//! delay-Doppler estimator and the matching Cramér-Rao bounds.

pub mod crlb;
pub mod crosstalk;
pub mod dirichlet;
pub mod error;
pub mod estimator;
pub mod grid;

pub use crlb::{bounds, fisher, mean_vector, Bounds, FisherMatrix, ParameterPoint};
pub use crosstalk::{
    compose, direct_crosstalk, factored_crosstalk, masked_crosstalk, partials, CrossTalkPartials,
    DenseCrossTalk, FactoredCrossTalk,
};
pub use dirichlet::{dirichlet_mag, lobe_samples, make_mask, masks_for, BandMask, LobeThreshold};
pub use error::{Error, Result};
pub use estimator::{
    likelihood_metric, ml_estimate, ml_estimate_with, simulate_rx, EstimationResult, SearchGrid,
    SearchStrategy,
};
pub use grid::{
    isfft, random_dd_frame, sfft, DdFrame, Modulation, SensingTarget, SystemConfig, TargetParams,
    TfFrame, SPEED_OF_LIGHT,
};
