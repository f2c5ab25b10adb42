//! Desk-scale simulator for localizing in-body bionanosensors.
//!
//! The crate covers the whole chain: tissue permittivity and the layered THz
//! backscatter channel ([`dielectric`], [`channel`]), sensor motion through a
//! simplified vessel graph ([`vasculature`]), inertial dead reckoning with an
//! error-state Kalman filter ([`imu`]), skin anchors with packet tables and
//! sink merging ([`anchor`]), and scenario orchestration ([`experiments`]).

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchor;
pub mod channel;
pub mod consts;
pub mod dielectric;
pub mod experiments;
pub mod imu;
pub mod vasculature;

pub use anchor::{Anchor, AnchorTable, LinkGate, SensorPacket, SinkView};
pub use channel::{
    backscatter_power, channel_capacity, noise_psd, path_loss_layer, path_loss_stack, ChannelConfig, Direction,
    LayerStack, LinkBudget, LinkParams, SpreadingMode, TissueLayer,
};
pub use dielectric::{
    eval_permittivity, optical_properties, AbsorptionWavelength, DielectricModel, OpticalProperties, TissueLibrary,
};
pub use experiments::{MetricsReport, RunOptions, ScenarioConfig};
pub use imu::{EstimatorState, ImuSample, ImuSpec, ResetModel, VesselConstraint};
pub use vasculature::{AnomalyEvent, BnsState, TrajectoryIter, VesselGraph, VesselSegment};
