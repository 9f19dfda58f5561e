//! Region tracking through video by dense optical flow.
//!
//! The library estimates a dense flow field between consecutive frames and
//! aggregates it inside each rectangular region of interest in a
//! shape-preserving way, keeping every region axis-parallel while it moves
//! (and, with the affine method, rescales). A synthetic benchmark generator
//! and a Jaccard/FPS evaluation harness reproduce a controlled experimental
//! protocol end to end, and [`cli`] exposes the whole pipeline as
//! subcommands.

pub mod cli;
pub mod error;
pub mod flow;
pub mod frame;
pub mod geometry;
pub mod io;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use flow::{estimate_flow, sample_flow, FlowConfig, FlowField};
pub use frame::Frame;
pub use geometry::{jaccard, roi_visible_fraction, transform_quad, Homography, Point, Quad, Roi};
pub use synth::{evaluate, generate_scenario, MotionBounds, Scenario, ScenarioTruth};
pub use tracker::{
    affine_fit, median_aggregate, step, track, update_affine, update_median, AffineFlowParams,
    AggregationMethod, Displacement, TrackResult, TrackTiming, TrackerConfig, Trajectory,
};
