//! Rotary-angle distribution analysis for context-window extension.
//!
//! The library estimates the empirical distribution of the rotary angles a
//! RoPE-based model saw during pre-training, quantifies how much a candidate
//! extension strategy perturbs that distribution, and emits per-dimension
//! scaling plans that keep the perturbation minimal.
//!
//! Pipeline: [`rope`] provides frequencies and exact angle reduction;
//! [`distribution`] buckets every position's angle into fixed intervals;
//! [`disturbance`] scores extended distributions against the pre-trained
//! ones; [`strategies`] turns the scores into exportable scaling plans.

pub mod distribution;
pub mod disturbance;
pub mod error;
pub mod rope;
pub mod strategies;

pub use distribution::{
    bucket_index, estimate_histogram, estimate_set, pretrain_set, AngleHistogram, DistributionSet,
};
pub use disturbance::{
    count_ood_bins, disturbance_of_thetas, extension_margins, kl_disturbance, DisturbanceReport,
    PairDisturbance, ThetaDisturbance,
};
pub use error::{Error, Result};
pub use rope::{
    apply_rotation, base_theta, extension_scale, rotary_angle, rotation_ratio,
    verify_relative_property, wavelength, RopeConfig, ThetaVector, TWO_PI,
};
pub use strategies::{
    plan_dprope, plan_extrapolate, plan_pi, plan_yarn, plan_yarn_oriented, sweep_bins,
    sweep_interpolated_dims, sweep_threshold, sweep_to_csv, DpropeSelection, PairAssignment,
    PairStrategy, PlanMethod, ScalingPlan, SweepPoint, YarnOrientation,
};
