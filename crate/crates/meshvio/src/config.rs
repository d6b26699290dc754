//! Flat key=value run configuration with dotted namespaces.
//!
//! Files hold one `key=value` per line (blank lines and `#` comments
//! allowed); command-line `--set key=value` entries override file keys. The
//! resolved configuration, every default included, is echoed into the run
//! manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use nalgebra::Vector3;
use thiserror::Error;

use crate::factors::{CameraModel, ImuNoiseParams, NoiseModels};
use crate::geometry::Pose;
use crate::mesher::FilterParams;
use crate::optimizer::OptimizeConfig;
use crate::regularity::DetectorParams;
use crate::sim::{presets, SceneSpec, SimConfig, TrajectoryKind};
use crate::smoother::{HorizonPolicy, PipelineVariant, PlaneGating};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: expected key=value")]
    Malformed(usize),
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {value}")]
    InvalidValue { key: String, value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Raw string key-value pairs.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    map: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Malformed(lineno + 1));
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(RawConfig { map })
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.map.insert(key.trim().to_string(), value.trim().to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }
}

/// Evaluation settings.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub rpe_lengths: Vec<f64>,
    /// Ground-truth cloud sampling density, points per square meter.
    pub gt_cloud_density: f64,
    /// Mesh-accuracy sampling density, points per square meter.
    pub mesh_sample_density: f64,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pipeline: PipelineVariant,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub scene_preset: String,
    pub scene: SceneSpec,
    pub sim: SimConfig,
    pub camera: CameraModel,
    pub filter: FilterParams,
    pub detector: DetectorParams,
    pub policy: HorizonPolicy,
    pub gating: PlaneGating,
    pub noise: NoiseModels,
    pub optimize: OptimizeConfig,
    pub eval: EvalConfig,
    /// Resolved key=value pairs, defaults included (the manifest content).
    manifest_cache: BTreeMap<String, String>,
}

// Typed readers that mark keys consumed.
struct Reader<'a> {
    raw: &'a RawConfig,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl<'a> Reader<'a> {
    fn new(raw: &'a RawConfig) -> Self {
        Reader {
            raw,
            used: BTreeSet::new(),
            resolved: BTreeMap::new(),
        }
    }

    fn str(&mut self, key: &str, default: &str) -> String {
        self.used.insert(key.to_string());
        let v = self.raw.get(key).unwrap_or(default).to_string();
        self.resolved.insert(key.to_string(), v.clone());
        v
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.used.insert(key.to_string());
        let v = match self.raw.get(key) {
            Some(s) => s.parse::<f64>().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                value: s.to_string(),
            })?,
            None => default,
        };
        self.resolved.insert(key.to_string(), format!("{}", v));
        Ok(v)
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        self.used.insert(key.to_string());
        let v = match self.raw.get(key) {
            Some(s) => s.parse::<usize>().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                value: s.to_string(),
            })?,
            None => default,
        };
        self.resolved.insert(key.to_string(), format!("{}", v));
        Ok(v)
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        self.used.insert(key.to_string());
        let v = match self.raw.get(key) {
            Some(s) => s.parse::<u64>().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                value: s.to_string(),
            })?,
            None => default,
        };
        self.resolved.insert(key.to_string(), format!("{}", v));
        Ok(v)
    }
}

impl RunConfig {
    /// Resolves a raw configuration against the defaults. Unknown keys are
    /// rejected.
    pub fn from_raw(raw: &RawConfig) -> Result<RunConfig, ConfigError> {
        let mut r = Reader::new(raw);

        let pipeline = match r.str("pipeline", "spr").as_str() {
            "s" => PipelineVariant::S,
            "sp" => PipelineVariant::Sp,
            "spr" => PipelineVariant::Spr,
            other => {
                return Err(ConfigError::InvalidValue {
                    key: "pipeline".into(),
                    value: other.into(),
                })
            }
        };
        let seed = r.u64("seed", 0)?;
        let out_dir = PathBuf::from(r.str("out", "out"));

        let scene_preset = r.str("scene.preset", "planar_room");
        let density = r.f64("scene.density", 7.0)?;
        let clutter = r.usize("scene.clutter", 120)?;
        let scene = match scene_preset.as_str() {
            "planar_room" => presets::planar_room(density),
            "plane_free" => presets::plane_free(clutter),
            other => {
                return Err(ConfigError::InvalidValue {
                    key: "scene.preset".into(),
                    value: other.into(),
                })
            }
        };

        let trajectory = match r.str("sim.trajectory", "circle").as_str() {
            "circle" => TrajectoryKind::Circle {
                center: Vector3::new(0.0, 0.0, 0.0),
                radius: r.f64("sim.circle_radius_m", 1.5)?,
                period: r.f64("sim.circle_period_s", 12.0)?,
                pitch_down: r.f64("sim.pitch_down_rad", 0.25)?,
            },
            "lissajous" => TrajectoryKind::Lissajous {
                center: Vector3::new(0.0, 0.0, 0.0),
                amplitude: Vector3::new(
                    r.f64("sim.lissajous_amp_x_m", 1.2)?,
                    r.f64("sim.lissajous_amp_y_m", 0.9)?,
                    r.f64("sim.lissajous_amp_z_m", 0.3)?,
                ),
                period: r.f64("sim.lissajous_period_s", 14.0)?,
                yaw_amplitude: r.f64("sim.lissajous_yaw_amp_rad", 0.6)?,
                pitch_down: r.f64("sim.pitch_down_rad", 0.25)?,
            },
            "stationary" => TrajectoryKind::Stationary {
                position: Vector3::zeros(),
                yaw: 0.0,
            },
            other => {
                return Err(ConfigError::InvalidValue {
                    key: "sim.trajectory".into(),
                    value: other.into(),
                })
            }
        };
        let sim = SimConfig {
            trajectory,
            keyframe_rate_hz: r.f64("sim.keyframe_rate_hz", 10.0)?,
            imu_rate_hz: r.f64("sim.imu_rate_hz", 200.0)?,
            num_keyframes: r.usize("sim.num_keyframes", 50)?,
            pixel_noise_sigma: r.f64("sim.pixel_noise_px", 0.0)?,
            imu_noise: ImuNoiseParams {
                gyro_sigma: r.f64("sim.gyro_noise", 0.0)?,
                accel_sigma: r.f64("sim.accel_noise", 0.0)?,
                gyro_bias_rw_sigma: r.f64("sim.gyro_bias_rw", 0.0)?,
                accel_bias_rw_sigma: r.f64("sim.accel_bias_rw", 0.0)?,
            },
            outlier_rate: r.f64("sim.outlier_rate", 0.0)?,
            seed,
        };

        let camera = CameraModel::new(
            r.f64("cam.fx_px", 400.0)?,
            r.f64("cam.fy_px", 400.0)?,
            r.f64("cam.cx_px", 376.0)?,
            r.f64("cam.cy_px", 240.0)?,
            r.f64("cam.baseline_m", 0.11)?,
            r.f64("cam.width_px", 752.0)?,
            r.f64("cam.height_px", 480.0)?,
            Pose::identity(),
        );

        let filter = FilterParams {
            max_edge_len: r.f64("mesher.max_edge_len_m", 1.5)?,
            max_edge_ratio: r.f64("mesher.max_edge_ratio", 10.0)?,
            min_angle: r.f64("mesher.min_angle_deg", 3.0)?.to_radians(),
        };

        let detector = DetectorParams {
            angle_tol: r.f64("detector.angle_tol_deg", 10.0)?.to_radians(),
            height_bin: r.f64("detector.height_bin_m", 0.05)?,
            distance_bin: r.f64("detector.distance_bin_m", 0.10)?,
            azimuth_bin: r.f64("detector.azimuth_bin_deg", 5.0)?.to_radians(),
            smoothing_sigma: r.f64("detector.smoothing_sigma_bins", 1.0)?,
            min_support: r.usize("detector.min_support", 20)?,
            match_normal_tol: r.f64("detector.match_normal_tol_deg", 10.0)?.to_radians(),
            match_distance_tol: r.f64("detector.match_distance_tol_m", 0.10)?,
        };

        let policy = HorizonPolicy {
            lag_keyframes: r.usize("smoother.lag_keyframes", 20)?,
            max_planes: r.usize("smoother.max_planes", 5)?,
        };
        let gating = PlaneGating {
            min_landmarks: r.usize("smoother.min_plane_landmarks", 3)?,
            min_scatter_eigenvalue: r.f64("smoother.min_scatter_eigenvalue", 1e-4)?,
        };

        let noise = NoiseModels {
            prior_rotation_sigma: r.f64("noise.prior_rotation_sigma", 1e-2)?,
            prior_position_sigma: r.f64("noise.prior_position_sigma", 1e-3)?,
            prior_velocity_sigma: r.f64("noise.prior_velocity_sigma", 1e-2)?,
            prior_bias_sigma: r.f64("noise.prior_bias_sigma", 1e-2)?,
            pixel_sigma: r.f64("noise.pixel_sigma_px", 1.0)?,
            regularity_sigma: r.f64("noise.regularity_sigma_m", 0.05)?,
            imu: ImuNoiseParams {
                gyro_sigma: r.f64("noise.gyro_sigma", 1.7e-4)?,
                accel_sigma: r.f64("noise.accel_sigma", 2.0e-3)?,
                gyro_bias_rw_sigma: r.f64("noise.gyro_bias_rw_sigma", 2.0e-5)?,
                accel_bias_rw_sigma: r.f64("noise.accel_bias_rw_sigma", 3.0e-3)?,
            },
        };

        let optimize = OptimizeConfig {
            max_iterations: r.usize("opt.max_iterations", 15)?,
            rel_cost_tol: r.f64("opt.rel_cost_tol", 1e-6)?,
            update_norm_tol: r.f64("opt.update_norm_tol", 1e-8)?,
            initial_lambda: r.f64("opt.initial_lambda", 1e-4)?,
            lambda_factor: r.f64("opt.lambda_factor", 10.0)?,
            max_lambda: r.f64("opt.max_lambda", 1e10)?,
        };

        let rpe_raw = r.str("eval.rpe_lengths_m", "1,2,4,8");
        let mut rpe_lengths = Vec::new();
        for tok in rpe_raw.split(',') {
            let v = tok.trim().parse::<f64>().map_err(|_| ConfigError::InvalidValue {
                key: "eval.rpe_lengths_m".into(),
                value: rpe_raw.clone(),
            })?;
            rpe_lengths.push(v);
        }
        let eval = EvalConfig {
            rpe_lengths,
            gt_cloud_density: r.f64("eval.gt_cloud_density", 1000.0)?,
            mesh_sample_density: r.f64("eval.mesh_sample_density", 1000.0)?,
        };

        // Reject unknown keys so typos do not silently fall back to defaults.
        for key in raw.keys() {
            if !r.used.contains(key) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }

        Ok(RunConfig {
            pipeline,
            seed,
            out_dir,
            scene_preset,
            scene,
            sim,
            camera,
            filter,
            detector,
            policy,
            gating,
            noise,
            optimize,
            eval,
            manifest_cache: r.resolved,
        })
    }

    /// The fully resolved configuration, one `key=value` per line, every
    /// default made explicit.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.manifest_cache {
            out.push_str(&format!("{}={}\n", k, v));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_resolve_with_overrides() {
        let raw = RawConfig::parse(
            "# comment\n\npipeline=sp\nsim.num_keyframes = 12\ndetector.min_support=25\n",
        )
        .unwrap();
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.pipeline, PipelineVariant::Sp);
        assert_eq!(cfg.sim.num_keyframes, 12);
        assert_eq!(cfg.detector.min_support, 25);
        // Defaults resolved.
        assert_eq!(cfg.policy.lag_keyframes, 20);
        // Manifest echoes both overrides and defaults.
        let manifest = cfg.manifest();
        assert!(manifest.contains("pipeline=sp\n"));
        assert!(manifest.contains("sim.num_keyframes=12\n"));
        assert!(manifest.contains("smoother.lag_keyframes=20\n"));
        assert!(manifest.contains("noise.pixel_sigma_px=1\n"));
    }

    #[test]
    fn unknown_and_invalid_keys_are_rejected() {
        let raw = RawConfig::parse("detector.min_suport=20\n").unwrap();
        assert!(matches!(
            RunConfig::from_raw(&raw),
            Err(ConfigError::UnknownKey(_))
        ));
        let raw = RawConfig::parse("seed=notanumber\n").unwrap();
        assert!(matches!(
            RunConfig::from_raw(&raw),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            RawConfig::parse("justakeywithoutvalue\n"),
            Err(ConfigError::Malformed(1))
        ));
    }
}
