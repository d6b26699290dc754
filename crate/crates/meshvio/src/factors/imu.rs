//! IMU preintegration between consecutive keyframes and the 15-dof IMU
//! factor (9 navigation components plus the bias random walk).

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3};

use crate::geometry::{skew, so3_exp, so3_right_jacobian, so3_right_jacobian_inv, Rotation};
use crate::smoother::{Symbol, Values};

use super::{missing, FactorError, Linearization, NavState};

/// Continuous-time IMU noise densities and bias random-walk intensities.
#[derive(Debug, Clone, Copy)]
pub struct ImuNoiseParams {
    /// Gyro white noise, rad/s/sqrt(Hz).
    pub gyro_sigma: f64,
    /// Accelerometer white noise, m/s^2/sqrt(Hz).
    pub accel_sigma: f64,
    /// Gyro bias random walk, rad/s/sqrt(s).
    pub gyro_bias_rw_sigma: f64,
    /// Accel bias random walk, m/s^2/sqrt(s).
    pub accel_bias_rw_sigma: f64,
}

impl Default for ImuNoiseParams {
    fn default() -> Self {
        ImuNoiseParams {
            gyro_sigma: 1.7e-4,
            accel_sigma: 2.0e-3,
            gyro_bias_rw_sigma: 2.0e-5,
            accel_bias_rw_sigma: 3.0e-3,
        }
    }
}

/// Accumulated IMU motion between two keyframes, gravity-free and expressed
/// in the body frame of the starting keyframe.
#[derive(Debug, Clone)]
pub struct PreintegratedImu {
    pub delta_rotation: Rotation,
    pub delta_velocity: Vector3<f64>,
    pub delta_position: Vector3<f64>,
    pub duration: f64,
    /// Bias used to correct the raw samples.
    pub bias_gyro: Vector3<f64>,
    pub bias_accel: Vector3<f64>,
    /// 9x9 covariance of [rotation, position, velocity] errors.
    pub covariance: SMatrix<f64, 9, 9>,
}

/// First-order preintegration of bias-corrected body-frame samples.
///
/// Each sample is (gyro rad/s, accel m/s^2, dt s); gravity is not included
/// here, it enters the residual. The covariance is propagated to first order
/// in [rotation, velocity, position] error order internally and stored
/// permuted to [rotation, position, velocity].
pub fn imu_preintegrate(
    samples: &[(Vector3<f64>, Vector3<f64>, f64)],
    bias_gyro: Vector3<f64>,
    bias_accel: Vector3<f64>,
    noise: &ImuNoiseParams,
) -> Result<PreintegratedImu, FactorError> {
    if samples.is_empty() {
        return Err(FactorError::EmptyImuInterval);
    }
    let mut delta_r = Rotation::identity();
    let mut delta_v = Vector3::zeros();
    let mut delta_p = Vector3::zeros();
    let mut duration = 0.0;
    // Error order during propagation: [theta, v, p].
    let mut cov = SMatrix::<f64, 9, 9>::zeros();

    for &(gyro, accel, dt) in samples {
        assert!(dt > 0.0, "IMU sample dt must be positive");
        let w = gyro - bias_gyro;
        let a = accel - bias_accel;
        let incr = so3_exp(&(w * dt));
        let ax = skew(&a);
        let rm = *delta_r.matrix();

        // State transition A and noise gain B for the error state.
        let mut a_mat = SMatrix::<f64, 9, 9>::identity();
        a_mat
            .fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&incr.matrix().transpose());
        a_mat
            .fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(-rm * ax * dt));
        a_mat
            .fixed_view_mut::<3, 3>(6, 0)
            .copy_from(&(-rm * ax * (0.5 * dt * dt)));
        a_mat
            .fixed_view_mut::<3, 3>(6, 3)
            .copy_from(&(Matrix3::identity() * dt));

        let mut b_mat = SMatrix::<f64, 9, 6>::zeros();
        b_mat
            .fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(so3_right_jacobian(&(w * dt)) * dt));
        b_mat.fixed_view_mut::<3, 3>(3, 3).copy_from(&(rm * dt));
        b_mat
            .fixed_view_mut::<3, 3>(6, 3)
            .copy_from(&(rm * (0.5 * dt * dt)));

        // Discrete sample variances: sigma^2 * rate = sigma^2 / dt.
        let qg = noise.gyro_sigma * noise.gyro_sigma / dt;
        let qa = noise.accel_sigma * noise.accel_sigma / dt;
        let mut q = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..3 {
            q[(i, i)] = qg;
            q[(3 + i, 3 + i)] = qa;
        }
        cov = a_mat * cov * a_mat.transpose() + b_mat * q * b_mat.transpose();

        delta_p += delta_v * dt + rm * a * (0.5 * dt * dt);
        delta_v += rm * a * dt;
        delta_r = Rotation::from_matrix(rm * incr.matrix());
        duration += dt;
    }

    // Permute [theta, v, p] -> [theta, p, v] to match the residual order.
    let mut permuted = SMatrix::<f64, 9, 9>::zeros();
    let order = [0usize, 1, 2, 6, 7, 8, 3, 4, 5];
    for (ri, &si) in order.iter().enumerate() {
        for (rj, &sj) in order.iter().enumerate() {
            permuted[(ri, rj)] = cov[(si, sj)];
        }
    }

    Ok(PreintegratedImu {
        delta_rotation: delta_r,
        delta_velocity: delta_v,
        delta_position: delta_p,
        duration,
        bias_gyro,
        bias_accel,
        covariance: permuted,
    })
}

/// Propagates a navigation state through a preintegrated interval under
/// gravity.
pub fn propagate_navstate(
    x: &NavState,
    pim: &PreintegratedImu,
    gravity: &Vector3<f64>,
) -> NavState {
    let dt = pim.duration;
    NavState {
        rotation: Rotation::from_matrix(x.rotation.matrix() * pim.delta_rotation.matrix()),
        position: x.position
            + x.velocity * dt
            + gravity * (0.5 * dt * dt)
            + x.rotation.rotate(&pim.delta_position),
        velocity: x.velocity + gravity * dt + x.rotation.rotate(&pim.delta_velocity),
        bias_gyro: x.bias_gyro,
        bias_accel: x.bias_accel,
    }
}

/// 15-dof IMU residual [rotation, position, velocity, gyro bias, accel bias].
///
/// Zero exactly when `x_j == propagate_navstate(x_i, pim, gravity)`.
pub fn imu_residual(
    x_i: &NavState,
    x_j: &NavState,
    pim: &PreintegratedImu,
    gravity: &Vector3<f64>,
) -> DVector<f64> {
    let dt = pim.duration;
    let ri_t = x_i.rotation.inverse();
    let r_theta = pim
        .delta_rotation
        .local(&(ri_t * x_j.rotation));
    let u_p = ri_t.rotate(
        &(x_j.position - x_i.position - x_i.velocity * dt - gravity * (0.5 * dt * dt)),
    ) - pim.delta_position;
    let u_v = ri_t.rotate(&(x_j.velocity - x_i.velocity - gravity * dt)) - pim.delta_velocity;

    let mut r = DVector::zeros(15);
    r.fixed_rows_mut::<3>(0).copy_from(&r_theta);
    r.fixed_rows_mut::<3>(3).copy_from(&u_p);
    r.fixed_rows_mut::<3>(6).copy_from(&u_v);
    r.fixed_rows_mut::<3>(9).copy_from(&(x_j.bias_gyro - x_i.bias_gyro));
    r.fixed_rows_mut::<3>(12)
        .copy_from(&(x_j.bias_accel - x_i.bias_accel));
    r
}

/// Preintegrated IMU factor between consecutive keyframes i and j.
#[derive(Debug, Clone)]
pub struct ImuFactor {
    keys: [Symbol; 4],
    pim: PreintegratedImu,
    gravity: Vector3<f64>,
    /// Lower-triangular inverse of the 15x15 covariance square root.
    sqrt_info: DMatrix<f64>,
}

impl ImuFactor {
    pub fn new(
        keyframe_i: u64,
        keyframe_j: u64,
        pim: PreintegratedImu,
        gravity: Vector3<f64>,
        noise: &ImuNoiseParams,
    ) -> Self {
        // 15x15 covariance: preintegrated navigation block plus the bias
        // random walk over the interval.
        let mut cov = DMatrix::zeros(15, 15);
        for i in 0..9 {
            for j in 0..9 {
                cov[(i, j)] = pim.covariance[(i, j)];
            }
        }
        let qbg = noise.gyro_bias_rw_sigma.powi(2) * pim.duration;
        let qba = noise.accel_bias_rw_sigma.powi(2) * pim.duration;
        for i in 0..3 {
            cov[(9 + i, 9 + i)] = qbg.max(1e-20);
            cov[(12 + i, 12 + i)] = qba.max(1e-20);
        }
        let chol = cov
            .cholesky()
            .expect("preintegrated IMU covariance must be positive definite");
        let sqrt_info = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(15, 15))
            .expect("triangular solve");
        ImuFactor {
            keys: [
                Symbol::pose(keyframe_i),
                Symbol::vel_bias(keyframe_i),
                Symbol::pose(keyframe_j),
                Symbol::vel_bias(keyframe_j),
            ],
            pim,
            gravity,
            sqrt_info,
        }
    }

    pub fn keys(&self) -> &[Symbol] {
        &self.keys
    }

    pub fn preintegrated(&self) -> &PreintegratedImu {
        &self.pim
    }

    fn states(&self, values: &Values) -> Result<(NavState, NavState), FactorError> {
        let pose_i = values.pose(&self.keys[0]).ok_or_else(|| missing(&self.keys[0]))?;
        let vb_i = values
            .vel_bias(&self.keys[1])
            .ok_or_else(|| missing(&self.keys[1]))?;
        let pose_j = values.pose(&self.keys[2]).ok_or_else(|| missing(&self.keys[2]))?;
        let vb_j = values
            .vel_bias(&self.keys[3])
            .ok_or_else(|| missing(&self.keys[3]))?;
        Ok((
            NavState::from_parts(pose_i, vb_i),
            NavState::from_parts(pose_j, vb_j),
        ))
    }

    pub fn residual(&self, values: &Values) -> Result<DVector<f64>, FactorError> {
        let (xi, xj) = self.states(values)?;
        Ok(&self.sqrt_info * imu_residual(&xi, &xj, &self.pim, &self.gravity))
    }

    pub fn linearize(&self, values: &Values) -> Result<Linearization, FactorError> {
        let (xi, xj) = self.states(values)?;
        let dt = self.pim.duration;
        let r = imu_residual(&xi, &xj, &self.pim, &self.gravity);
        let r_theta = Vector3::new(r[0], r[1], r[2]);
        let u_p = Vector3::new(r[3], r[4], r[5]) + self.pim.delta_position;
        let u_v = Vector3::new(r[6], r[7], r[8]) + self.pim.delta_velocity;

        let jr_inv = so3_right_jacobian_inv(&r_theta);
        let ri = xi.rotation.matrix();
        let rj = xj.rotation.matrix();
        let ri_t = ri.transpose();
        let rj_t_ri = rj.transpose() * ri;

        // Blocks ordered [pose_i(6), velbias_i(9), pose_j(6), velbias_j(9)].
        let mut j_pose_i = DMatrix::zeros(15, 6);
        let mut j_vb_i = DMatrix::zeros(15, 9);
        let mut j_pose_j = DMatrix::zeros(15, 6);
        let mut j_vb_j = DMatrix::zeros(15, 9);

        // Rotation rows.
        j_pose_i
            .view_mut((0, 0), (3, 3))
            .copy_from(&(-jr_inv * rj_t_ri));
        j_pose_j.view_mut((0, 0), (3, 3)).copy_from(&jr_inv);
        // Position rows.
        j_pose_i.view_mut((3, 0), (3, 3)).copy_from(&skew(&u_p));
        j_pose_i.view_mut((3, 3), (3, 3)).copy_from(&(-ri_t));
        j_pose_j.view_mut((3, 3), (3, 3)).copy_from(&ri_t);
        j_vb_i.view_mut((3, 0), (3, 3)).copy_from(&(-ri_t * dt));
        // Velocity rows.
        j_pose_i.view_mut((6, 0), (3, 3)).copy_from(&skew(&u_v));
        j_vb_i.view_mut((6, 0), (3, 3)).copy_from(&(-ri_t));
        j_vb_j.view_mut((6, 0), (3, 3)).copy_from(&ri_t);
        // Bias random-walk rows.
        for i in 0..6 {
            j_vb_i[(9 + i, 3 + i)] = -1.0;
            j_vb_j[(9 + i, 3 + i)] = 1.0;
        }

        let w = &self.sqrt_info;
        Ok(Linearization {
            residual: w * r,
            jacobians: vec![w * j_pose_i, w * j_vb_i, w * j_pose_j, w * j_vb_j],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::GRAVITY;
    use approx::assert_relative_eq;

    fn noise() -> ImuNoiseParams {
        ImuNoiseParams::default()
    }

    #[test]
    fn stationary_interval_is_identity() {
        let samples: Vec<_> = (0..100)
            .map(|_| (Vector3::zeros(), Vector3::zeros(), 0.01))
            .collect();
        let pim =
            imu_preintegrate(&samples, Vector3::zeros(), Vector3::zeros(), &noise()).unwrap();
        assert_relative_eq!(pim.delta_rotation.matrix(), &Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(pim.delta_velocity, Vector3::zeros());
        assert_relative_eq!(pim.delta_position, Vector3::zeros());
        assert_relative_eq!(pim.duration, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_acceleration_kinematics() {
        let samples: Vec<_> = (0..1000)
            .map(|_| (Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0), 0.001))
            .collect();
        let pim =
            imu_preintegrate(&samples, Vector3::zeros(), Vector3::zeros(), &noise()).unwrap();
        assert_relative_eq!(pim.delta_velocity, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-9);
        // First-order integration of p over steps of a*dt^2/2 sums to
        // t^2/2 + t*dt/2 - per-step midpoint offset vanishes as dt -> 0.
        assert_relative_eq!(pim.delta_position.x, 0.5, epsilon = 1e-3);
        assert_relative_eq!(pim.delta_position.y, 0.0);
    }

    #[test]
    fn constant_turn_matches_exponential() {
        let n = 2000;
        let dt = std::f64::consts::FRAC_PI_2 / n as f64;
        let samples: Vec<_> = (0..n)
            .map(|_| (Vector3::new(0.0, 0.0, 1.0), Vector3::zeros(), dt))
            .collect();
        let pim =
            imu_preintegrate(&samples, Vector3::zeros(), Vector3::zeros(), &noise()).unwrap();
        let expect = so3_exp(&Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        assert_relative_eq!(pim.delta_rotation.matrix(), expect.matrix(), epsilon = 1e-9);
    }

    #[test]
    fn composition_consistency() {
        // Smooth synthetic signal integrated in one go vs two halves.
        let sig = |t: f64| {
            (
                Vector3::new((0.7 * t).sin() * 0.3, 0.2, (1.3 * t).cos() * 0.2),
                Vector3::new(0.5 * t.cos(), -0.3 * (0.9 * t).sin(), 0.1),
            )
        };
        let dt = 1e-4;
        let make = |t0: f64, t1: f64| {
            let n = ((t1 - t0) / dt).round() as usize;
            let samples: Vec<_> = (0..n)
                .map(|k| {
                    let t = t0 + (k as f64 + 0.5) * dt;
                    let (w, a) = sig(t);
                    (w, a, dt)
                })
                .collect();
            imu_preintegrate(&samples, Vector3::zeros(), Vector3::zeros(), &noise()).unwrap()
        };
        let full = make(0.0, 2.0);
        let first = make(0.0, 1.0);
        let second = make(1.0, 2.0);

        // Compose the halves: gravity-free body-frame deltas chain like this.
        let r01 = first.delta_rotation;
        let composed_r = Rotation::from_matrix(r01.matrix() * second.delta_rotation.matrix());
        let composed_v = first.delta_velocity + r01.rotate(&second.delta_velocity);
        let composed_p = first.delta_position
            + first.delta_velocity * second.duration
            + r01.rotate(&second.delta_position);

        assert_relative_eq!(composed_r.matrix(), full.delta_rotation.matrix(), epsilon = 1e-8);
        assert_relative_eq!(composed_v, full.delta_velocity, epsilon = 1e-8);
        assert_relative_eq!(composed_p, full.delta_position, epsilon = 1e-8);
    }

    #[test]
    fn residual_zero_after_exact_propagation() {
        let sig = |t: f64| {
            (
                Vector3::new(0.4 * (2.0 * t).sin(), -0.2, 0.6 * t.cos()),
                Vector3::new(1.2 * t.sin(), 0.5, -0.4 * (0.7 * t).cos()),
            )
        };
        let dt = 1e-3;
        let samples: Vec<_> = (0..100)
            .map(|k| {
                let (w, a) = sig(k as f64 * dt);
                (w, a, dt)
            })
            .collect();
        let pim =
            imu_preintegrate(&samples, Vector3::zeros(), Vector3::zeros(), &noise()).unwrap();
        let xi = NavState {
            rotation: so3_exp(&Vector3::new(0.2, -0.1, 0.4)),
            position: Vector3::new(1.0, 2.0, 3.0),
            velocity: Vector3::new(0.3, -0.2, 0.1),
            bias_gyro: Vector3::zeros(),
            bias_accel: Vector3::zeros(),
        };
        let xj = propagate_navstate(&xi, &pim, &GRAVITY);
        let r = imu_residual(&xi, &xj, &pim, &GRAVITY);
        assert!(r.norm() < 1e-9, "residual {}", r.norm());

        // A position offset shows up only in the position block, rotated into
        // the body frame of keyframe i.
        let mut xj_off = xj;
        xj_off.position += Vector3::new(0.1, 0.0, 0.0);
        let r = imu_residual(&xi, &xj_off, &pim, &GRAVITY);
        let expected = xi.rotation.unrotate(&Vector3::new(0.1, 0.0, 0.0));
        assert_relative_eq!(Vector3::new(r[3], r[4], r[5]), expected, epsilon = 1e-9);
        assert!(r.fixed_rows::<3>(0).norm() < 1e-12);
        assert!(r.fixed_rows::<9>(6).norm() < 1e-12);

        // Bias drift lands in the bias block with unit magnitude.
        let mut xj_bias = xj;
        xj_bias.bias_gyro += Vector3::new(1e-3, 0.0, 0.0);
        let r = imu_residual(&xi, &xj_bias, &pim, &GRAVITY);
        assert_relative_eq!(r[9], 1e-3);
        assert!(r.fixed_rows::<9>(0).norm() < 1e-12);
    }

    #[test]
    fn covariance_is_symmetric_positive_definite() {
        let samples: Vec<_> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.005;
                (
                    Vector3::new(0.1 * t.sin(), 0.05, 0.2),
                    Vector3::new(0.3, 0.1 * t.cos(), -0.2),
                    0.005,
                )
            })
            .collect();
        let pim =
            imu_preintegrate(&samples, Vector3::zeros(), Vector3::zeros(), &noise()).unwrap();
        let cov = pim.covariance;
        assert_relative_eq!(cov, cov.transpose(), epsilon = 1e-18);
        let chol = nalgebra::Cholesky::new(cov);
        assert!(chol.is_some(), "covariance must be positive definite");
    }
}
