//! Deterministic synthetic front-end: planar room scenes, analytic
//! trajectories, IMU streams and persistent stereo feature tracks with
//! configurable noise. Everything is a pure function of (config, seed).

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::factors::{CameraModel, ImuNoiseParams, Measurement, NavState, GRAVITY};
use crate::geometry::{s2_tangent_basis, so3_exp, Plane, Pose, Rotation};
use crate::mesher::{Keypoint, LandmarkId};

/// A rectangular planar patch populated with landmarks.
#[derive(Debug, Clone, Copy)]
pub struct ScenePlane {
    pub plane: Plane,
    /// In-plane half-widths along the deterministic tangent basis, meters.
    pub half_extents: (f64, f64),
    /// Landmarks per square meter.
    pub density: f64,
}

/// Scene description: planar patches plus off-plane clutter.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub planes: Vec<ScenePlane>,
    pub clutter_count: usize,
    pub clutter_center: Vector3<f64>,
    pub clutter_half_extent: Vector3<f64>,
}

/// Ground-truth world: landmarks, their plane memberships, gravity.
#[derive(Debug, Clone)]
pub struct SimWorld {
    pub planes: Vec<ScenePlane>,
    pub landmarks: BTreeMap<LandmarkId, Vector3<f64>>,
    /// Landmarks per plane, aligned with `planes`.
    pub plane_members: Vec<BTreeSet<LandmarkId>>,
    /// Landmarks not on any plane.
    pub clutter: BTreeSet<LandmarkId>,
    pub gravity: Vector3<f64>,
}

/// Analytic trajectory families with exact derivatives.
#[derive(Debug, Clone, Copy)]
pub enum TrajectoryKind {
    Stationary {
        position: Vector3<f64>,
        yaw: f64,
    },
    /// Horizontal circle, camera facing outward with a downward pitch.
    Circle {
        center: Vector3<f64>,
        radius: f64,
        period: f64,
        pitch_down: f64,
    },
    /// Bounded quasi-periodic sweep with a slow yaw oscillation.
    Lissajous {
        center: Vector3<f64>,
        amplitude: Vector3<f64>,
        period: f64,
        yaw_amplitude: f64,
        pitch_down: f64,
    },
}

/// Simulation parameters; `imu_rate_hz` must be at least ten times the
/// keyframe rate.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub trajectory: TrajectoryKind,
    pub keyframe_rate_hz: f64,
    pub imu_rate_hz: f64,
    pub num_keyframes: usize,
    /// Additive pixel noise (1 sigma) on every measured coordinate.
    pub pixel_noise_sigma: f64,
    /// Injected IMU noise; the estimator's noise model is configured
    /// separately.
    pub imu_noise: ImuNoiseParams,
    /// Fraction of measurements replaced by uniform garbage pixels.
    pub outlier_rate: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) {
        assert!(
            self.imu_rate_hz >= 10.0 * self.keyframe_rate_hz,
            "IMU rate must be at least 10x the keyframe rate"
        );
        assert!(self.num_keyframes >= 1);
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            trajectory: TrajectoryKind::Circle {
                center: Vector3::new(0.0, 0.0, 0.0),
                radius: 1.5,
                period: 12.0,
                pitch_down: 0.25,
            },
            keyframe_rate_hz: 10.0,
            imu_rate_hz: 200.0,
            num_keyframes: 50,
            pixel_noise_sigma: 0.0,
            imu_noise: ImuNoiseParams {
                gyro_sigma: 0.0,
                accel_sigma: 0.0,
                gyro_bias_rw_sigma: 0.0,
                accel_bias_rw_sigma: 0.0,
            },
            outlier_rate: 0.0,
            seed: 0,
        }
    }
}

/// One dense trajectory sample with exact kinematics.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub time: f64,
    pub pose: Pose,
    pub velocity: Vector3<f64>,
    /// Body-frame angular rate.
    pub angular_velocity: Vector3<f64>,
    /// World-frame linear acceleration (gravity not included).
    pub acceleration: Vector3<f64>,
}

// Constant camera-carrier orientation: body z is the optical axis pointing
// along +x (radially outward on the circle), body y points down, with an
// extra downward pitch.
fn carrier_orientation(pitch_down: f64) -> Rotation {
    let r0 = Rotation::from_matrix(nalgebra::Matrix3::new(
        0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    ));
    let pitch = so3_exp(&Vector3::new(-pitch_down, 0.0, 0.0));
    Rotation::from_matrix(r0.matrix() * pitch.matrix())
}

/// Exact kinematic state of the trajectory at time t.
pub fn kinematics(kind: &TrajectoryKind, t: f64) -> TrajectorySample {
    match *kind {
        TrajectoryKind::Stationary { position, yaw } => {
            let c = carrier_orientation(0.0);
            let rot = Rotation::from_matrix(Rotation::from_yaw(yaw).matrix() * c.matrix());
            TrajectorySample {
                time: t,
                pose: Pose::new(rot, position),
                velocity: Vector3::zeros(),
                angular_velocity: Vector3::zeros(),
                acceleration: Vector3::zeros(),
            }
        }
        TrajectoryKind::Circle {
            center,
            radius,
            period,
            pitch_down,
        } => {
            let w = std::f64::consts::TAU / period;
            let theta = w * t;
            let (s, c) = theta.sin_cos();
            let position = center + Vector3::new(radius * c, radius * s, 0.0);
            let velocity = Vector3::new(-radius * w * s, radius * w * c, 0.0);
            let acceleration = Vector3::new(-radius * w * w * c, -radius * w * w * s, 0.0);
            let carrier = carrier_orientation(pitch_down);
            let rot = Rotation::from_matrix(Rotation::from_yaw(theta).matrix() * carrier.matrix());
            let angular_velocity = carrier.unrotate(&Vector3::new(0.0, 0.0, w));
            TrajectorySample {
                time: t,
                pose: Pose::new(rot, position),
                velocity,
                angular_velocity,
                acceleration,
            }
        }
        TrajectoryKind::Lissajous {
            center,
            amplitude,
            period,
            yaw_amplitude,
            pitch_down,
        } => {
            let w = std::f64::consts::TAU / period;
            let (wx, wy, wz) = (w, 2.0 * w, 3.0 * w);
            let position = center
                + Vector3::new(
                    amplitude.x * (wx * t).sin(),
                    amplitude.y * (wy * t).sin(),
                    amplitude.z * (wz * t).sin(),
                );
            let velocity = Vector3::new(
                amplitude.x * wx * (wx * t).cos(),
                amplitude.y * wy * (wy * t).cos(),
                amplitude.z * wz * (wz * t).cos(),
            );
            let acceleration = Vector3::new(
                -amplitude.x * wx * wx * (wx * t).sin(),
                -amplitude.y * wy * wy * (wy * t).sin(),
                -amplitude.z * wz * wz * (wz * t).sin(),
            );
            let yaw = yaw_amplitude * (w * t).sin();
            let yaw_rate = yaw_amplitude * w * (w * t).cos();
            let carrier = carrier_orientation(pitch_down);
            let rot = Rotation::from_matrix(Rotation::from_yaw(yaw).matrix() * carrier.matrix());
            let angular_velocity = carrier.unrotate(&Vector3::new(0.0, 0.0, yaw_rate));
            TrajectorySample {
                time: t,
                pose: Pose::new(rot, position),
                velocity,
                angular_velocity,
                acceleration,
            }
        }
    }
}

/// Ground-truth navigation state at time t (zero biases).
pub fn ground_truth_state(kind: &TrajectoryKind, t: f64) -> NavState {
    let s = kinematics(kind, t);
    NavState {
        rotation: s.pose.rotation,
        position: s.pose.translation,
        velocity: s.velocity,
        bias_gyro: Vector3::zeros(),
        bias_accel: Vector3::zeros(),
    }
}

/// Samples landmarks on every scene plane (at the given density) and the
/// clutter box, with globally unique ids. Pure function of (spec, seed).
pub fn build_scene(spec: &SceneSpec, seed: u64) -> SimWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xB0);
    let mut world = SimWorld {
        planes: spec.planes.clone(),
        landmarks: BTreeMap::new(),
        plane_members: Vec::new(),
        clutter: BTreeSet::new(),
        gravity: GRAVITY,
    };
    let mut next_id: LandmarkId = 0;
    for sp in &spec.planes {
        let mut members = BTreeSet::new();
        let area = 4.0 * sp.half_extents.0 * sp.half_extents.1;
        let count = (sp.density * area).round() as usize;
        let n = sp.plane.normal();
        let (b1, b2) = s2_tangent_basis(n);
        let center = n.vector() * sp.plane.distance();
        for _ in 0..count {
            let u: f64 = rng.random_range(-sp.half_extents.0..sp.half_extents.0);
            let v: f64 = rng.random_range(-sp.half_extents.1..sp.half_extents.1);
            let p = center + b1 * u + b2 * v;
            world.landmarks.insert(next_id, p);
            members.insert(next_id);
            next_id += 1;
        }
        world.plane_members.push(members);
    }
    for _ in 0..spec.clutter_count {
        let p = spec.clutter_center
            + Vector3::new(
                rng.random_range(-spec.clutter_half_extent.x..spec.clutter_half_extent.x),
                rng.random_range(-spec.clutter_half_extent.y..spec.clutter_half_extent.y),
                rng.random_range(-spec.clutter_half_extent.z..spec.clutter_half_extent.z),
            );
        world.landmarks.insert(next_id, p);
        world.clutter.insert(next_id);
        next_id += 1;
    }
    world
}

/// Dense trajectory sampling at the IMU rate (exact kinematics per sample).
pub fn simulate_trajectory(config: &SimConfig) -> Vec<TrajectorySample> {
    config.validate();
    let duration = config.num_keyframes as f64 / config.keyframe_rate_hz;
    let dt = 1.0 / config.imu_rate_hz;
    let n = (duration / dt).round() as usize;
    (0..=n)
        .map(|k| kinematics(&config.trajectory, k as f64 * dt))
        .collect()
}

/// One IMU sample: body-frame angular rate and specific force.
#[derive(Debug, Clone, Copy)]
pub struct ImuSample {
    pub time: f64,
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

/// Simulates the IMU stream over the whole run.
///
/// Samples are stamped at the midpoint of each integration interval of
/// length 1/imu_rate (the measured value is the exact signal at the stamp),
/// with additive white noise scaled by sqrt(rate) and a random-walk bias.
pub fn simulate_imu(kind: &TrajectoryKind, config: &SimConfig) -> Vec<ImuSample> {
    config.validate();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0xB1);
    let duration = config.num_keyframes as f64 / config.keyframe_rate_hz;
    let dt = 1.0 / config.imu_rate_hz;
    let n = (duration / dt).round() as usize;
    let sqrt_rate = config.imu_rate_hz.sqrt();
    let sqrt_dt = dt.sqrt();
    let mut bias_gyro = Vector3::zeros();
    let mut bias_accel = Vector3::zeros();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = (k as f64 + 0.5) * dt;
        let s = kinematics(kind, t);
        let specific_force = s.pose.rotation.unrotate(&(s.acceleration - GRAVITY));
        let mut gyro = s.angular_velocity + bias_gyro;
        let mut accel = specific_force + bias_accel;
        for i in 0..3 {
            gyro[i] += config.imu_noise.gyro_sigma
                * sqrt_rate
                * rng.sample::<f64, _>(StandardNormal);
            accel[i] += config.imu_noise.accel_sigma
                * sqrt_rate
                * rng.sample::<f64, _>(StandardNormal);
            bias_gyro[i] += config.imu_noise.gyro_bias_rw_sigma
                * sqrt_dt
                * rng.sample::<f64, _>(StandardNormal);
            bias_accel[i] += config.imu_noise.accel_bias_rw_sigma
                * sqrt_dt
                * rng.sample::<f64, _>(StandardNormal);
        }
        out.push(ImuSample {
            time: t,
            gyro,
            accel,
        });
    }
    out
}

/// Slices an IMU stream into the preintegration input for the keyframe
/// interval (t_prev, t_now].
pub fn imu_interval(
    stream: &[ImuSample],
    t_prev: f64,
    t_now: f64,
    imu_rate_hz: f64,
) -> Vec<(Vector3<f64>, Vector3<f64>, f64)> {
    let dt = 1.0 / imu_rate_hz;
    stream
        .iter()
        .filter(|s| s.time > t_prev && s.time <= t_now)
        .map(|s| (s.gyro, s.accel, dt))
        .collect()
}

/// All tracked keypoints and stereo measurements of one keyframe.
#[derive(Debug, Clone)]
pub struct KeyframeTracks {
    pub keyframe: u64,
    pub time: f64,
    pub keypoints: Vec<Keypoint>,
    pub measurements: Vec<Measurement>,
}

/// Projects every visible landmark into each keyframe with persistent ids
/// (perfect data association) and additive pixel noise; occlusion is not
/// modeled.
pub fn simulate_tracks(
    world: &SimWorld,
    kind: &TrajectoryKind,
    cam: &CameraModel,
    config: &SimConfig,
) -> Vec<KeyframeTracks> {
    config.validate();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0xB2);
    let kf_dt = 1.0 / config.keyframe_rate_hz;
    let mut out = Vec::with_capacity(config.num_keyframes);
    for k in 0..config.num_keyframes {
        let t = k as f64 * kf_dt;
        let body = kinematics(kind, t).pose;
        let t_cw = cam.world_to_camera(&body);
        let mut tracks = KeyframeTracks {
            keyframe: k as u64,
            time: t,
            keypoints: Vec::new(),
            measurements: Vec::new(),
        };
        for (&id, p) in &world.landmarks {
            let pc = t_cw.transform_point(p);
            if pc.z < 0.2 {
                continue;
            }
            let u_l = cam.fx * pc.x / pc.z + cam.cx;
            let u_r = cam.fx * (pc.x - cam.baseline) / pc.z + cam.cx;
            let v = cam.fy * pc.y / pc.z + cam.cy;
            let in_bounds = |u: f64, v: f64| {
                u >= 0.0 && u < cam.image_width && v >= 0.0 && v < cam.image_height
            };
            if !in_bounds(u_l, v) || !in_bounds(u_r, v) {
                continue;
            }
            let (mut mu_l, mut mu_r, mut mv) = (u_l, u_r, v);
            if config.pixel_noise_sigma > 0.0 {
                mu_l += config.pixel_noise_sigma * rng.sample::<f64, _>(StandardNormal);
                mu_r += config.pixel_noise_sigma * rng.sample::<f64, _>(StandardNormal);
                mv += config.pixel_noise_sigma * rng.sample::<f64, _>(StandardNormal);
            }
            if config.outlier_rate > 0.0 && rng.random_range(0.0..1.0) < config.outlier_rate {
                mu_l = rng.random_range(0.0..cam.image_width);
                mv = rng.random_range(0.0..cam.image_height);
                mu_r = mu_l - rng.random_range(1.0..40.0);
            }
            if mu_l - mu_r <= 0.1 {
                continue;
            }
            tracks.keypoints.push(Keypoint {
                landmark_id: id,
                pixel: Vector2::new(mu_l, mv),
            });
            tracks
                .measurements
                .push(Measurement::stereo(k as u64, id, mu_l, mu_r, mv));
        }
        out.push(tracks);
    }
    out
}

/// Uniform point cloud sampled from the scene planes (stratified per plane by
/// area) plus the clutter landmarks; the mesh-accuracy ground truth.
pub fn sample_ground_truth_cloud(world: &SimWorld, density: f64, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xB3);
    let mut cloud = Vec::new();
    for sp in &world.planes {
        let area = 4.0 * sp.half_extents.0 * sp.half_extents.1;
        let expected = density * area;
        let mut count = expected.floor() as usize;
        if rng.random_range(0.0..1.0) < expected.fract() {
            count += 1;
        }
        let n = sp.plane.normal();
        let (b1, b2) = s2_tangent_basis(n);
        let center = n.vector() * sp.plane.distance();
        for _ in 0..count {
            let u: f64 = rng.random_range(-sp.half_extents.0..sp.half_extents.0);
            let v: f64 = rng.random_range(-sp.half_extents.1..sp.half_extents.1);
            cloud.push(center + b1 * u + b2 * v);
        }
    }
    for id in &world.clutter {
        cloud.push(world.landmarks[id]);
    }
    cloud
}

/// Room-scale scene presets used by the pipeline configs.
pub mod presets {
    use super::*;
    use crate::geometry::UnitNormal;

    fn plane(n: Vector3<f64>, d: f64, he: (f64, f64), density: f64) -> ScenePlane {
        ScenePlane {
            plane: Plane::new(UnitNormal::new(n).unwrap(), d),
            half_extents: he,
            density,
        }
    }

    /// Floor plus two perpendicular walls around a circle trajectory:
    /// regularity-rich. The patches are separated so no mesh face within the
    /// clustering tolerances can span two planes and cross-associate their
    /// landmarks.
    pub fn planar_room(density: f64) -> SceneSpec {
        SceneSpec {
            planes: vec![
                plane(Vector3::new(0.0, 0.0, 1.0), -1.6, (2.5, 2.5), density),
                plane(Vector3::new(1.0, 0.0, 0.0), 3.0, (1.0, 2.5), density),
                plane(Vector3::new(0.0, 1.0, 0.0), 3.0, (1.0, 2.5), density),
            ],
            clutter_count: 0,
            clutter_center: Vector3::zeros(),
            clutter_half_extent: Vector3::new(1.0, 1.0, 1.0),
        }
    }

    /// Free 3D points only: no structural regularities to find.
    pub fn plane_free(count: usize) -> SceneSpec {
        SceneSpec {
            planes: vec![],
            clutter_count: count,
            clutter_center: Vector3::new(0.0, 0.0, 0.3),
            clutter_half_extent: Vector3::new(3.2, 3.2, 1.6),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::{imu_preintegrate, projection_residual, PixelMeasurement};
    use crate::geometry::point_plane_signed_distance;
    use approx::assert_relative_eq;

    fn circle() -> TrajectoryKind {
        TrajectoryKind::Circle {
            center: Vector3::new(0.2, -0.1, 0.4),
            radius: 2.0,
            period: 10.0,
            pitch_down: 0.2,
        }
    }

    #[test]
    fn circle_speed_is_constant() {
        let kind = circle();
        for k in 0..50 {
            let s = kinematics(&kind, k as f64 * 0.17);
            assert_relative_eq!(
                s.velocity.norm(),
                std::f64::consts::TAU * 2.0 / 10.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn stationary_is_still() {
        let kind = TrajectoryKind::Stationary {
            position: Vector3::new(1.0, 2.0, 3.0),
            yaw: 0.7,
        };
        let s = kinematics(&kind, 4.2);
        assert_eq!(s.velocity, Vector3::zeros());
        assert_eq!(s.acceleration, Vector3::zeros());
        assert_eq!(s.angular_velocity, Vector3::zeros());
    }

    #[test]
    fn finite_difference_matches_analytic_velocity() {
        for kind in [
            circle(),
            TrajectoryKind::Lissajous {
                center: Vector3::zeros(),
                amplitude: Vector3::new(1.0, 0.7, 0.3),
                period: 9.0,
                yaw_amplitude: 0.5,
                pitch_down: 0.1,
            },
        ] {
            let h = 1e-5;
            for k in 0..20 {
                let t = 0.3 * k as f64;
                let p_plus = kinematics(&kind, t + h).pose.translation;
                let p_minus = kinematics(&kind, t - h).pose.translation;
                let v_num = (p_plus - p_minus) / (2.0 * h);
                let v = kinematics(&kind, t).velocity;
                assert!((v_num - v).norm() < 1e-8 + 1e-6 * v.norm());
            }
        }
    }

    #[test]
    fn stationary_imu_reads_gravity_reaction() {
        let kind = TrajectoryKind::Stationary {
            position: Vector3::zeros(),
            yaw: 0.3,
        };
        let config = SimConfig {
            trajectory: kind,
            num_keyframes: 2,
            ..SimConfig::default()
        };
        let stream = simulate_imu(&kind, &config);
        let rot = kinematics(&kind, 0.0).pose.rotation;
        let expect = rot.unrotate(&Vector3::new(0.0, 0.0, 9.81));
        for s in &stream {
            assert!(s.gyro.norm() < 1e-15);
            assert!((s.accel - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn preintegration_reproduces_analytic_delta() {
        let kind = circle();
        // First-order integration: fine steps push the scheme error below
        // the 1e-6 gate.
        let config = SimConfig {
            trajectory: kind,
            imu_rate_hz: 50_000.0,
            num_keyframes: 2,
            ..SimConfig::default()
        };
        let stream = simulate_imu(&kind, &config);
        let noise = ImuNoiseParams::default();
        let t0 = 0.0;
        let t1 = 0.1;
        let samples = imu_interval(&stream, t0, t1, config.imu_rate_hz);
        let pim =
            imu_preintegrate(&samples, Vector3::zeros(), Vector3::zeros(), &noise).unwrap();

        let s0 = kinematics(&kind, t0);
        let s1 = kinematics(&kind, t1);
        let dt = t1 - t0;
        let ri_t = s0.pose.rotation.inverse();
        let delta_r_true = ri_t.matrix() * s1.pose.rotation.matrix();
        let delta_v_true = ri_t.rotate(&(s1.velocity - s0.velocity - GRAVITY * dt));
        let delta_p_true = ri_t.rotate(
            &(s1.pose.translation
                - s0.pose.translation
                - s0.velocity * dt
                - GRAVITY * (0.5 * dt * dt)),
        );
        assert!((pim.delta_rotation.matrix() - delta_r_true).norm() < 1e-6);
        assert!((pim.delta_velocity - delta_v_true).norm() < 1e-6);
        assert!((pim.delta_position - delta_p_true).norm() < 1e-6);
    }

    #[test]
    fn same_seed_same_everything() {
        let spec = presets::planar_room(8.0);
        let w1 = build_scene(&spec, 42);
        let w2 = build_scene(&spec, 42);
        assert_eq!(w1.landmarks, w2.landmarks);

        let config = SimConfig {
            seed: 42,
            pixel_noise_sigma: 1.0,
            imu_noise: ImuNoiseParams::default(),
            num_keyframes: 5,
            ..SimConfig::default()
        };
        let cam = CameraModel::default_stereo();
        let i1 = simulate_imu(&config.trajectory, &config);
        let i2 = simulate_imu(&config.trajectory, &config);
        assert_eq!(i1.len(), i2.len());
        for (a, b) in i1.iter().zip(&i2) {
            assert_eq!(a.gyro, b.gyro);
            assert_eq!(a.accel, b.accel);
        }
        let t1 = simulate_tracks(&w1, &config.trajectory, &cam, &config);
        let t2 = simulate_tracks(&w2, &config.trajectory, &cam, &config);
        for (a, b) in t1.iter().zip(&t2) {
            assert_eq!(a.measurements.len(), b.measurements.len());
            for (ma, mb) in a.measurements.iter().zip(&b.measurements) {
                assert_eq!(ma.pixel, mb.pixel);
            }
        }
    }

    #[test]
    fn on_plane_landmarks_satisfy_plane_equation() {
        let spec = presets::planar_room(10.0);
        let world = build_scene(&spec, 7);
        // ~ area * density landmarks per plane.
        assert!(world.plane_members[0].len() > 200);
        for (i, members) in world.plane_members.iter().enumerate() {
            let plane = &world.planes[i].plane;
            for id in members {
                let d = point_plane_signed_distance(plane, &world.landmarks[id]);
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn center_landmark_projects_to_principal_point() {
        let cam = CameraModel::default_stereo();
        let kind = TrajectoryKind::Stationary {
            position: Vector3::zeros(),
            yaw: 0.0,
        };
        let body = kinematics(&kind, 0.0).pose;
        // 2 m straight down the optical axis.
        let p = body.transform_point(&Vector3::new(0.0, 0.0, 2.0));
        let mut world = SimWorld {
            planes: vec![],
            landmarks: BTreeMap::new(),
            plane_members: vec![],
            clutter: BTreeSet::new(),
            gravity: GRAVITY,
        };
        world.landmarks.insert(5, p);
        // And one behind the camera that must not appear.
        world
            .landmarks
            .insert(6, body.transform_point(&Vector3::new(0.0, 0.0, -2.0)));
        let config = SimConfig {
            trajectory: kind,
            num_keyframes: 1,
            ..SimConfig::default()
        };
        let tracks = simulate_tracks(&world, &kind, &cam, &config);
        assert_eq!(tracks[0].measurements.len(), 1);
        let m = tracks[0].measurements[0];
        assert_eq!(m.landmark, 5);
        match m.pixel {
            PixelMeasurement::Stereo { u_left, v, .. } => {
                assert_relative_eq!(u_left, cam.cx, epsilon = 1e-12);
                assert_relative_eq!(v, cam.cy, epsilon = 1e-12);
            }
            _ => panic!("expected stereo"),
        }
    }

    #[test]
    fn noiseless_tracks_have_zero_reprojection_residual() {
        let cam = CameraModel::default_stereo();
        let spec = presets::planar_room(6.0);
        let world = build_scene(&spec, 3);
        let config = SimConfig {
            num_keyframes: 5,
            ..SimConfig::default()
        };
        let tracks = simulate_tracks(&world, &config.trajectory, &cam, &config);
        let mut checked = 0;
        for kf in &tracks {
            let state = ground_truth_state(&config.trajectory, kf.time);
            for m in &kf.measurements {
                let r =
                    projection_residual(&state, &world.landmarks[&m.landmark], &m.pixel, &cam)
                        .unwrap();
                assert!(r.norm() < 1e-9);
                checked += 1;
            }
        }
        assert!(checked > 100, "expected plenty of visible landmarks");
    }
}
