//! Residuals, noise models, and analytic Jacobians for every factor type of
//! the estimation problem: prior, preintegrated IMU, projection (mono and
//! stereo), structureless, and landmark-plane regularity, plus the dense
//! Gaussian factor produced by marginalization.
//!
//! All residuals returned through [`Factor`] are whitened (scaled by the
//! inverse square root of the factor covariance), so the total cost is the
//! plain sum of squared residual norms.

mod coplanarity;
mod imu;
mod linear;
mod prior;
mod projection;
mod structureless;

pub use coplanarity::{regularity_residual, regularity_residual_jacobian, RegularityFactor};
pub use imu::{
    imu_preintegrate, imu_residual, propagate_navstate, ImuFactor, ImuNoiseParams,
    PreintegratedImu,
};
pub use linear::LinearGaussianFactor;
pub use prior::{prior_residual, PriorFactor};
pub use projection::{projection_residual, ProjectionFactor};
pub use structureless::{
    structureless_residual, triangulate_landmark, StructurelessFactor, StructurelessLinearization,
};

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use thiserror::Error;

use crate::geometry::{Pose, Rotation};
use crate::mesher::LandmarkId;
use crate::smoother::{Symbol, Values, VelBias};

/// Gravity in the world frame, m/s^2.
pub const GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("variable {0} missing or of wrong kind")]
    MissingVariable(String),
    #[error("landmark behind the camera (depth {0:.3} m)")]
    Cheirality(f64),
    #[error("not enough observations: got {got}, need {need}")]
    InsufficientObservations { got: usize, need: usize },
    #[error("degenerate triangulation (condition number {0:.2e})")]
    DegenerateTriangulation(f64),
    #[error("empty IMU sample list")]
    EmptyImuInterval,
}

/// Per-keyframe navigation state: orientation, position, velocity and IMU
/// biases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub rotation: Rotation,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub bias_gyro: Vector3<f64>,
    pub bias_accel: Vector3<f64>,
}

impl NavState {
    pub fn identity() -> Self {
        NavState {
            rotation: Rotation::identity(),
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            bias_gyro: Vector3::zeros(),
            bias_accel: Vector3::zeros(),
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.rotation, self.position)
    }

    pub fn vel_bias(&self) -> VelBias {
        VelBias {
            velocity: self.velocity,
            bias_gyro: self.bias_gyro,
            bias_accel: self.bias_accel,
        }
    }

    pub fn from_parts(pose: &Pose, vb: &VelBias) -> Self {
        NavState {
            rotation: pose.rotation,
            position: pose.translation,
            velocity: vb.velocity,
            bias_gyro: vb.bias_gyro,
            bias_accel: vb.bias_accel,
        }
    }
}

/// Rectified stereo pinhole camera with its mounting pose on the body.
///
/// `body_to_camera` maps camera-frame coordinates into the body frame. The
/// right camera sits at +baseline along the camera x axis.
#[derive(Debug, Clone, Copy)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub baseline: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub body_to_camera: Pose,
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        baseline: f64,
        image_width: f64,
        image_height: f64,
        body_to_camera: Pose,
    ) -> Self {
        assert!(fx > 0.0 && fy > 0.0 && baseline > 0.0);
        CameraModel {
            fx,
            fy,
            cx,
            cy,
            baseline,
            image_width,
            image_height,
            body_to_camera,
        }
    }

    /// EuRoC-like defaults: fx = fy = 400 px, 752x480 image, 0.11 m baseline,
    /// camera co-located with the body.
    pub fn default_stereo() -> Self {
        CameraModel::new(400.0, 400.0, 376.0, 240.0, 0.11, 752.0, 480.0, Pose::identity())
    }

    /// World-to-camera transform for a body pose: x_cam = T * x_world.
    pub fn world_to_camera(&self, body_pose: &Pose) -> Pose {
        body_pose.compose(&self.body_to_camera).inverse()
    }
}

/// One image observation of a landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PixelMeasurement {
    Mono(Vector2<f64>),
    /// Rectified stereo: left u, right u, shared v. Disparity must be > 0.
    Stereo { u_left: f64, u_right: f64, v: f64 },
}

impl PixelMeasurement {
    pub fn dim(&self) -> usize {
        match self {
            PixelMeasurement::Mono(_) => 2,
            PixelMeasurement::Stereo { .. } => 3,
        }
    }
}

/// A landmark observation attributed to a keyframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub keyframe: u64,
    pub landmark: LandmarkId,
    pub pixel: PixelMeasurement,
}

impl Measurement {
    pub fn stereo(keyframe: u64, landmark: LandmarkId, u_left: f64, u_right: f64, v: f64) -> Self {
        debug_assert!(u_left - u_right > 0.0, "stereo disparity must be positive");
        Measurement {
            keyframe,
            landmark,
            pixel: PixelMeasurement::Stereo { u_left, u_right, v },
        }
    }

    pub fn mono(keyframe: u64, landmark: LandmarkId, u: f64, v: f64) -> Self {
        Measurement {
            keyframe,
            landmark,
            pixel: PixelMeasurement::Mono(Vector2::new(u, v)),
        }
    }
}

/// Default noise parameters per factor family.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModels {
    /// Prior sigmas: rotation (rad), position (m), velocity (m/s), biases.
    pub prior_rotation_sigma: f64,
    pub prior_position_sigma: f64,
    pub prior_velocity_sigma: f64,
    pub prior_bias_sigma: f64,
    /// Reprojection noise, pixels (both mono and stereo components).
    pub pixel_sigma: f64,
    /// Co-planarity noise, meters.
    pub regularity_sigma: f64,
    pub imu: ImuNoiseParams,
}

impl Default for NoiseModels {
    fn default() -> Self {
        NoiseModels {
            prior_rotation_sigma: 1e-2,
            prior_position_sigma: 1e-3,
            prior_velocity_sigma: 1e-2,
            prior_bias_sigma: 1e-2,
            pixel_sigma: 1.0,
            regularity_sigma: 0.05,
            imu: ImuNoiseParams::default(),
        }
    }
}

/// Whitened residual and per-key Jacobians of one factor at a linearization
/// point.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub residual: DVector<f64>,
    /// One block per key, dimensions residual_dim x key.dim().
    pub jacobians: Vec<DMatrix<f64>>,
}

/// A factor of the estimation problem.
#[derive(Debug, Clone)]
pub enum Factor {
    Prior(PriorFactor),
    Imu(ImuFactor),
    Projection(ProjectionFactor),
    Structureless(StructurelessFactor),
    Regularity(RegularityFactor),
    LinearGaussian(LinearGaussianFactor),
}

impl Factor {
    pub fn keys(&self) -> &[Symbol] {
        match self {
            Factor::Prior(f) => f.keys(),
            Factor::Imu(f) => f.keys(),
            Factor::Projection(f) => f.keys(),
            Factor::Structureless(f) => f.keys(),
            Factor::Regularity(f) => f.keys(),
            Factor::LinearGaussian(f) => f.keys(),
        }
    }

    /// Whitened residual vector at the given values.
    pub fn residual(&self, values: &Values) -> Result<DVector<f64>, FactorError> {
        match self {
            Factor::Prior(f) => f.residual(values),
            Factor::Imu(f) => f.residual(values),
            Factor::Projection(f) => f.residual(values),
            Factor::Structureless(f) => f.projected_residual(values),
            Factor::Regularity(f) => f.residual(values),
            Factor::LinearGaussian(f) => f.residual(values),
        }
    }

    /// Squared whitened residual norm; structureless factors use a fast path
    /// that avoids forming the null-space basis.
    pub fn cost(&self, values: &Values) -> Result<f64, FactorError> {
        match self {
            Factor::Structureless(f) => f.cost(values),
            other => Ok(other.residual(values)?.norm_squared()),
        }
    }

    /// Whitened residual and Jacobians. For structureless factors this is the
    /// null-space-projected form.
    pub fn linearize(&self, values: &Values) -> Result<Linearization, FactorError> {
        match self {
            Factor::Prior(f) => f.linearize(values),
            Factor::Imu(f) => f.linearize(values),
            Factor::Projection(f) => f.linearize(values),
            Factor::Structureless(f) => f.linearize_projected(values),
            Factor::Regularity(f) => f.linearize(values),
            Factor::LinearGaussian(f) => f.linearize(values),
        }
    }
}

pub(crate) fn missing(symbol: &Symbol) -> FactorError {
    FactorError::MissingVariable(symbol.to_string())
}

#[cfg(test)]
mod tests;
