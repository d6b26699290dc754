//! Prior factor anchoring the first state of the time horizon.

use nalgebra::{DMatrix, DVector};

use crate::geometry::so3_right_jacobian_inv;
use crate::smoother::{Symbol, Values};

use super::{missing, FactorError, Linearization, NavState, NoiseModels};

/// On-manifold difference to a prior navigation state, ordered
/// [rotation, position, velocity, gyro bias, accel bias].
pub fn prior_residual(x: &NavState, x_prior: &NavState) -> DVector<f64> {
    let mut r = DVector::zeros(15);
    let w = x_prior.rotation.local(&x.rotation);
    r.fixed_rows_mut::<3>(0).copy_from(&w);
    r.fixed_rows_mut::<3>(3).copy_from(&(x.position - x_prior.position));
    r.fixed_rows_mut::<3>(6).copy_from(&(x.velocity - x_prior.velocity));
    r.fixed_rows_mut::<3>(9).copy_from(&(x.bias_gyro - x_prior.bias_gyro));
    r.fixed_rows_mut::<3>(12)
        .copy_from(&(x.bias_accel - x_prior.bias_accel));
    r
}

/// Gaussian prior on one keyframe's pose and velocity/bias variables.
#[derive(Debug, Clone)]
pub struct PriorFactor {
    keys: [Symbol; 2],
    prior: NavState,
    /// Inverse sigmas in residual order.
    inv_sigmas: DVector<f64>,
}

impl PriorFactor {
    pub fn new(keyframe: u64, prior: NavState, noise: &NoiseModels) -> Self {
        let mut inv = DVector::zeros(15);
        for i in 0..3 {
            inv[i] = 1.0 / noise.prior_rotation_sigma;
            inv[3 + i] = 1.0 / noise.prior_position_sigma;
            inv[6 + i] = 1.0 / noise.prior_velocity_sigma;
            inv[9 + i] = 1.0 / noise.prior_bias_sigma;
            inv[12 + i] = 1.0 / noise.prior_bias_sigma;
        }
        PriorFactor {
            keys: [Symbol::pose(keyframe), Symbol::vel_bias(keyframe)],
            prior,
            inv_sigmas: inv,
        }
    }

    pub fn keys(&self) -> &[Symbol] {
        &self.keys
    }

    fn state(&self, values: &Values) -> Result<NavState, FactorError> {
        let pose = values.pose(&self.keys[0]).ok_or_else(|| missing(&self.keys[0]))?;
        let vb = values
            .vel_bias(&self.keys[1])
            .ok_or_else(|| missing(&self.keys[1]))?;
        Ok(NavState::from_parts(pose, vb))
    }

    pub fn residual(&self, values: &Values) -> Result<DVector<f64>, FactorError> {
        let mut r = prior_residual(&self.state(values)?, &self.prior);
        r.component_mul_assign(&self.inv_sigmas);
        Ok(r)
    }

    pub fn linearize(&self, values: &Values) -> Result<Linearization, FactorError> {
        let x = self.state(values)?;
        let mut r = prior_residual(&x, &self.prior);

        // d log(R_prior^T R exp(w)) / dw = Jr^-1 of the current log error.
        let w = x.rotation.local(&self.prior.rotation);
        let jr_inv = so3_right_jacobian_inv(&-w);

        let mut j_pose = DMatrix::zeros(15, 6);
        j_pose.view_mut((0, 0), (3, 3)).copy_from(&jr_inv);
        j_pose.view_mut((3, 3), (3, 3)).fill_with_identity();
        let mut j_vb = DMatrix::zeros(15, 9);
        j_vb.view_mut((6, 0), (9, 9)).fill_with_identity();

        for i in 0..15 {
            let s = self.inv_sigmas[i];
            r[i] *= s;
            for c in 0..6 {
                j_pose[(i, c)] *= s;
            }
            for c in 0..9 {
                j_vb[(i, c)] *= s;
            }
        }
        Ok(Linearization {
            residual: r,
            jacobians: vec![j_pose, j_vb],
        })
    }
}
