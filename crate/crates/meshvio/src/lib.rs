//! Visual-inertial state estimation with incremental 3D meshing and planar
//! structural regularities.
//!
//! The pipeline builds a 2D Delaunay triangulation over the tracked keypoints
//! of every keyframe, lifts it to a 3D mesh spanning the receding optimization
//! horizon, detects horizontal and vertical planes in that mesh via
//! histograms, and enforces landmark-plane co-planarity constraints inside a
//! fixed-lag factor-graph smoother. A deterministic scene/IMU/feature-track
//! simulator provides ground truth for end-to-end verification.

pub mod config;
pub mod eval;
pub mod factors;
pub mod sim;
pub mod geometry;
pub mod mesher;
pub mod optimizer;
pub mod pipeline;
pub mod ply;
pub mod regularity;
pub mod smoother;
