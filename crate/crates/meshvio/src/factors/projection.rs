//! Monocular and stereo reprojection factors for explicit landmarks.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::geometry::{skew, Pose};
use crate::mesher::LandmarkId;
use crate::smoother::{Symbol, Values};

use super::{missing, CameraModel, FactorError, Linearization, NavState, PixelMeasurement};

const MIN_DEPTH: f64 = 1e-6;

/// Predicted-minus-measured pixel error and, optionally, the Jacobians of the
/// camera-frame point with respect to the body pose and the landmark.
pub(crate) struct ProjectionEval {
    pub residual: DVector<f64>,
    /// residual_dim x 6, [dtheta, dposition] of the body pose.
    pub j_pose: DMatrix<f64>,
    /// residual_dim x 3 in the landmark position.
    pub j_landmark: DMatrix<f64>,
}

pub(crate) fn evaluate_projection(
    body_pose: &Pose,
    landmark: &Vector3<f64>,
    pixel: &PixelMeasurement,
    cam: &CameraModel,
) -> Result<ProjectionEval, FactorError> {
    let t_wc = body_pose.compose(&cam.body_to_camera);
    let r_wc = t_wc.rotation;
    let p_c = r_wc.unrotate(&(landmark - t_wc.translation));
    let (x, y, z) = (p_c.x, p_c.y, p_c.z);
    if z <= MIN_DEPTH {
        return Err(FactorError::Cheirality(z));
    }

    let (dim, residual) = match pixel {
        PixelMeasurement::Mono(uv) => {
            let r = DVector::from_vec(vec![
                cam.fx * x / z + cam.cx - uv.x,
                cam.fy * y / z + cam.cy - uv.y,
            ]);
            (2, r)
        }
        PixelMeasurement::Stereo { u_left, u_right, v } => {
            let r = DVector::from_vec(vec![
                cam.fx * x / z + cam.cx - u_left,
                cam.fx * (x - cam.baseline) / z + cam.cx - u_right,
                cam.fy * y / z + cam.cy - v,
            ]);
            (3, r)
        }
    };

    // d(pixel)/d(p_c).
    let mut j_proj = DMatrix::zeros(dim, 3);
    match pixel {
        PixelMeasurement::Mono(_) => {
            j_proj[(0, 0)] = cam.fx / z;
            j_proj[(0, 2)] = -cam.fx * x / (z * z);
            j_proj[(1, 1)] = cam.fy / z;
            j_proj[(1, 2)] = -cam.fy * y / (z * z);
        }
        PixelMeasurement::Stereo { .. } => {
            j_proj[(0, 0)] = cam.fx / z;
            j_proj[(0, 2)] = -cam.fx * x / (z * z);
            j_proj[(1, 0)] = cam.fx / z;
            j_proj[(1, 2)] = -cam.fx * (x - cam.baseline) / (z * z);
            j_proj[(2, 1)] = cam.fy / z;
            j_proj[(2, 2)] = -cam.fy * y / (z * z);
        }
    }

    // d(p_c)/d(body perturbation) and d(p_c)/d(landmark).
    let r_bc_t = cam.body_to_camera.rotation.inverse();
    let body_frame_offset = body_pose.rotation.unrotate(&(landmark - body_pose.translation));
    let dpc_dtheta: Matrix3<f64> = r_bc_t.matrix() * skew(&body_frame_offset);
    let dpc_dlandmark: Matrix3<f64> = r_wc.inverse().matrix().into_owned();

    let mut j_pose = DMatrix::zeros(dim, 6);
    j_pose
        .view_mut((0, 0), (dim, 3))
        .copy_from(&(&j_proj * dpc_dtheta));
    j_pose
        .view_mut((0, 3), (dim, 3))
        .copy_from(&(&j_proj * (-dpc_dlandmark)));
    let prod = &j_proj * dpc_dlandmark;
    let mut j_landmark = DMatrix::zeros(dim, 3);
    j_landmark.copy_from(&prod);

    Ok(ProjectionEval {
        residual,
        j_pose,
        j_landmark,
    })
}

/// Reprojection residual of one observation given the full navigation state.
pub fn projection_residual(
    state: &NavState,
    landmark: &Vector3<f64>,
    pixel: &PixelMeasurement,
    cam: &CameraModel,
) -> Result<DVector<f64>, FactorError> {
    Ok(evaluate_projection(&state.pose(), landmark, pixel, cam)?.residual)
}

/// Reprojection factor between a keyframe pose and an explicit landmark.
#[derive(Debug, Clone)]
pub struct ProjectionFactor {
    keys: [Symbol; 2],
    pixel: PixelMeasurement,
    cam: CameraModel,
    inv_sigma: f64,
}

impl ProjectionFactor {
    pub fn new(
        keyframe: u64,
        landmark: LandmarkId,
        pixel: PixelMeasurement,
        cam: CameraModel,
        pixel_sigma: f64,
    ) -> Self {
        ProjectionFactor {
            keys: [Symbol::pose(keyframe), Symbol::landmark(landmark)],
            pixel,
            cam,
            inv_sigma: 1.0 / pixel_sigma,
        }
    }

    pub fn keys(&self) -> &[Symbol] {
        &self.keys
    }

    pub fn landmark_id(&self) -> LandmarkId {
        self.keys[1].index
    }

    fn eval(&self, values: &Values) -> Result<ProjectionEval, FactorError> {
        let pose = values.pose(&self.keys[0]).ok_or_else(|| missing(&self.keys[0]))?;
        let landmark = values
            .landmark(&self.keys[1])
            .ok_or_else(|| missing(&self.keys[1]))?;
        evaluate_projection(pose, landmark, &self.pixel, &self.cam)
    }

    pub fn residual(&self, values: &Values) -> Result<DVector<f64>, FactorError> {
        Ok(self.eval(values)?.residual * self.inv_sigma)
    }

    pub fn linearize(&self, values: &Values) -> Result<Linearization, FactorError> {
        let eval = self.eval(values)?;
        Ok(Linearization {
            residual: eval.residual * self.inv_sigma,
            jacobians: vec![eval.j_pose * self.inv_sigma, eval.j_landmark * self.inv_sigma],
        })
    }

    /// Whitened per-block linearization for the landmark-elimination path of
    /// the solver.
    pub(crate) fn eval_whitened(&self, values: &Values) -> Result<ProjectionEval, FactorError> {
        let mut eval = self.eval(values)?;
        eval.residual *= self.inv_sigma;
        eval.j_pose *= self.inv_sigma;
        eval.j_landmark *= self.inv_sigma;
        Ok(eval)
    }
}
