//! End-to-end runner: simulator -> mesher + plane detector -> fixed-lag
//! smoother -> metrics, with the S/SP/SPR ablation switch and fully
//! reproducible on-disk artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::eval::{
    self, EvalError, MetricSummary, TimingRecord, Trajectory,
};
use crate::factors::imu_preintegrate;
use crate::geometry::Pose;
use crate::mesher::{self, LandmarkId, Mesh3D};
use crate::ply;
use crate::regularity::{self, PlaneCandidate};
use crate::sim::{self, ground_truth_state};
use crate::smoother::{
    FixedLagSmoother, KeyframeData, PipelineVariant, SmootherConfig, SmootherError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Smoother(#[from] SmootherError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("output directory {0}: {1}")]
    Output(PathBuf, std::io::Error),
}

/// Summary of one finished run (everything is also on disk).
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub ate: MetricSummary,
    pub mesh_accuracy: Option<MetricSummary>,
    pub timing: Vec<TimingRecord>,
    pub final_mesh_faces: usize,
    pub planes_spawned: usize,
    /// Largest unwhitened co-planarity residual (meters) in the final graph;
    /// None when no regularity factors exist.
    pub max_regularity_residual_m: Option<f64>,
    /// Landmarks promoted to explicit variables over the whole run.
    pub promoted_landmarks: usize,
    /// One-line description of every factor in the final graph.
    pub final_graph: Vec<String>,
}

/// Runs the full per-keyframe loop (mesh, detect, associate, optimize,
/// marginalize, propagate) and writes all artifacts. Identical
/// (config, seed) pairs produce identical outputs except for timing.csv,
/// which records wall-clock times.
pub fn run_pipeline(config: &RunConfig) -> Result<RunArtifacts, PipelineError> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| PipelineError::Output(config.out_dir.clone(), e))?;

    // Synthetic inputs.
    let world = sim::build_scene(&config.scene, config.seed);
    let gt_cloud = sim::sample_ground_truth_cloud(&world, config.eval.gt_cloud_density, config.seed);
    let imu_stream = sim::simulate_imu(&config.sim.trajectory, &config.sim);
    let tracks = sim::simulate_tracks(&world, &config.sim.trajectory, &config.camera, &config.sim);

    let mut smoother = FixedLagSmoother::new(SmootherConfig {
        variant: config.pipeline,
        policy: config.policy,
        noise: config.noise,
        camera: config.camera,
        optimize: config.optimize,
        gating: config.gating,
    });

    let mut horizon_mesh = Mesh3D::default();
    let mut estimates: BTreeMap<LandmarkId, Vector3<f64>> = BTreeMap::new();
    let mut pruned: BTreeSet<LandmarkId> = BTreeSet::new();
    let mut timing = Vec::with_capacity(tracks.len());
    let mut planes_spawned: BTreeSet<u64> = BTreeSet::new();
    let mut promoted_seen: BTreeSet<LandmarkId> = BTreeSet::new();

    let mut prev_time = 0.0;
    for kf in &tracks {
        // Mesh: per-frame triangulation lifted by the latest estimates,
        // merged into the horizon mesh, pruned by the last marginalization.
        let mesh_started = Instant::now();
        let faces2d = mesher::triangulate_2d(&kf.keypoints);
        let local = mesher::lift_to_3d(&faces2d, &estimates);
        let local = mesher::filter_faces(&local, &config.filter);
        horizon_mesh = mesher::update_mesh(&horizon_mesh, &local, &pruned);
        horizon_mesh.refresh_positions(|id| estimates.get(&id).copied());
        let t_mesh_ms = mesh_started.elapsed().as_secs_f64() * 1e3;

        // Regularity detection and data association (SP and SPR only).
        let (matched_planes, new_candidates) = if config.pipeline == PipelineVariant::S {
            (Vec::new(), Vec::new())
        } else {
            let (horizontal, vertical) =
                regularity::segment_faces_by_normal(&horizon_mesh, config.detector.angle_tol);
            let mut candidates: Vec<PlaneCandidate> = regularity::detect_horizontal_planes(
                &horizontal,
                &horizon_mesh,
                &config.detector,
            );
            candidates.extend(regularity::detect_vertical_planes(
                &vertical,
                &horizon_mesh,
                &config.detector,
            ));
            let tracked: Vec<(u64, crate::geometry::Plane)> = smoother.tracked_planes();
            let planes_only: Vec<crate::geometry::Plane> =
                tracked.iter().map(|(_, p)| *p).collect();
            let result = regularity::match_existing(candidates, &planes_only, &config.detector);
            let matched = result
                .matched
                .into_iter()
                .map(|(cand, idx)| (cand, tracked[idx].0))
                .collect();
            (matched, result.new)
        };

        // Keyframe assembly: preintegrate against the previous keyframe's
        // current bias estimate.
        let pim = if kf.keyframe == 0 {
            None
        } else {
            let prev_kf = kf.keyframe - 1;
            let state = smoother.state_of(prev_kf).expect("previous state");
            let samples =
                sim::imu_interval(&imu_stream, prev_time, kf.time, config.sim.imu_rate_hz);
            Some(
                imu_preintegrate(&samples, state.bias_gyro, state.bias_accel, &config.noise.imu)
                    .expect("non-empty IMU interval"),
            )
        };
        let prior = if kf.keyframe == 0 {
            Some(ground_truth_state(&config.sim.trajectory, kf.time))
        } else {
            None
        };
        smoother.add_keyframe(KeyframeData {
            id: kf.keyframe,
            timestamp: kf.time,
            pim,
            prior,
            measurements: kf.measurements.clone(),
            matched_planes,
            new_candidates,
        })?;

        let opt_started = Instant::now();
        smoother.optimize()?;
        let t_opt_ms = opt_started.elapsed().as_secs_f64() * 1e3;

        estimates = smoother.landmark_estimates();
        for (idx, _) in smoother.tracked_planes() {
            planes_spawned.insert(idx);
        }
        promoted_seen.extend(smoother.promoted_landmarks().iter().copied());
        let summary = smoother.marginalize_old()?;
        pruned = summary.exited_landmarks;

        timing.push(TimingRecord {
            keyframe: kf.keyframe,
            t_opt_ms,
            t_mesh_ms,
        });
        prev_time = kf.time;
    }

    // Final horizon mesh with the last estimates and prunes applied.
    horizon_mesh = mesher::update_mesh(&horizon_mesh, &Mesh3D::default(), &pruned);
    horizon_mesh.refresh_positions(|id| estimates.get(&id).copied());

    // Trajectories.
    let est = Trajectory::new(smoother.trajectory())?;
    let gt = Trajectory::new(
        tracks
            .iter()
            .map(|kf| {
                (
                    kf.time,
                    ground_truth_state(&config.sim.trajectory, kf.time).pose(),
                )
            })
            .collect(),
    )?;

    // Metrics.
    let max_gap = 0.5 / config.sim.keyframe_rate_hz;
    let (ate_rows, ate_summary) = eval::ate(&est, &gt, max_gap)?;
    let rpe_bins = eval::rpe(&est, &gt, &config.eval.rpe_lengths, max_gap)?;
    let mesh_summary = if horizon_mesh.is_empty() || gt_cloud.is_empty() {
        None
    } else {
        let (distances, summary) = eval::mesh_accuracy(
            &horizon_mesh,
            &gt_cloud,
            config.eval.mesh_sample_density,
            config.seed,
        )?;
        eval::write_mesh_accuracy_csv(&config.out_dir.join("mesh_accuracy.csv"), &distances)?;
        Some(summary)
    };

    // Artifacts.
    write_trajectory(&config.out_dir.join("traj_estimate.txt"), est.samples())
        .map_err(|e| PipelineError::Output(config.out_dir.clone(), e))?;
    write_trajectory(&config.out_dir.join("traj_ground_truth.txt"), gt.samples())
        .map_err(|e| PipelineError::Output(config.out_dir.clone(), e))?;
    ply::write_mesh_ply(&config.out_dir.join("mesh.ply"), &horizon_mesh)
        .map_err(|e| PipelineError::Output(config.out_dir.clone(), e))?;
    ply::write_cloud_ply(&config.out_dir.join("gt_cloud.ply"), &gt_cloud)
        .map_err(|e| PipelineError::Output(config.out_dir.clone(), e))?;
    eval::write_ate_csv(&config.out_dir.join("ate.csv"), &ate_rows)?;
    for bin in &rpe_bins {
        let name = if bin.length.fract() == 0.0 {
            format!("rpe_{}.csv", bin.length as i64)
        } else {
            format!("rpe_{}.csv", bin.length)
        };
        eval::write_rpe_csv(&config.out_dir.join(name), bin)?;
    }
    eval::write_timing_csv(&config.out_dir.join("timing.csv"), &timing)?;
    std::fs::write(config.out_dir.join("manifest.txt"), config.manifest())
        .map_err(|e| PipelineError::Output(config.out_dir.clone(), e))?;

    // Final co-planarity residuals, in meters.
    let mut max_regularity: Option<f64> = None;
    for factor in smoother.graph().factors() {
        if let crate::factors::Factor::Regularity(r) = factor {
            if let Ok(res) = r.residual(smoother.values()) {
                let meters = res[0].abs() * config.noise.regularity_sigma;
                max_regularity = Some(max_regularity.map_or(meters, |m: f64| m.max(meters)));
            }
        }
    }

    Ok(RunArtifacts {
        out_dir: config.out_dir.clone(),
        ate: ate_summary,
        mesh_accuracy: mesh_summary,
        timing,
        final_mesh_faces: horizon_mesh.faces.len(),
        planes_spawned: planes_spawned.len(),
        max_regularity_residual_m: max_regularity,
        promoted_landmarks: promoted_seen.len(),
        final_graph: smoother.graph().describe(),
    })
}

/// One line per keyframe: timestamp tx ty tz qx qy qz qw, 9 significant
/// digits.
fn write_trajectory(path: &Path, samples: &[(f64, Pose)]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    for (t, pose) in samples {
        let q = pose.rotation.to_quaternion_xyzw();
        writeln!(
            f,
            "{:.8e} {:.8e} {:.8e} {:.8e} {:.8e} {:.8e} {:.8e} {:.8e}",
            t,
            pose.translation.x,
            pose.translation.y,
            pose.translation.z,
            q[0],
            q[1],
            q[2],
            q[3]
        )?;
    }
    Ok(())
}

/// One comparison row per run directory.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub dir: PathBuf,
    pub pipeline: String,
    pub seed: String,
    pub scene: String,
    pub ate_median: f64,
    pub ate_rmse: f64,
    pub rpe_medians: Vec<(String, f64)>,
    pub scene_mismatch: bool,
}

/// Reads manifests and metric CSVs from finished runs and writes a
/// Table-style comparison CSV. Scene mismatches across runs are flagged, not
/// fatal.
pub fn compare_runs(dirs: &[PathBuf], out_csv: &Path) -> Result<Vec<RunRow>, PipelineError> {
    let mut rows: Vec<RunRow> = Vec::new();
    let mut reference_scene: Option<String> = None;
    for dir in dirs {
        let manifest_path = dir.join("manifest.txt");
        let manifest = std::fs::read_to_string(&manifest_path)
            .map_err(|e| PipelineError::Output(dir.clone(), e))?;
        let mut kv = BTreeMap::new();
        for line in manifest.lines() {
            if let Some((k, v)) = line.split_once('=') {
                kv.insert(k.to_string(), v.to_string());
            }
        }
        let scene_desc: String = kv
            .iter()
            .filter(|(k, _)| k.starts_with("scene.") || k.starts_with("sim."))
            .map(|(k, v)| format!("{}={}", k, v))
            .collect::<Vec<_>>()
            .join(";");
        let ate_path = dir.join("ate.csv");
        let ate_text = std::fs::read_to_string(&ate_path)
            .map_err(|e| PipelineError::Output(dir.clone(), e))?;
        let errors: Vec<f64> = ate_text
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').nth(1))
            .filter_map(|s| s.parse::<f64>().ok())
            .collect();
        let summary = MetricSummary::from_errors(&errors);

        let mut rpe_medians = Vec::new();
        if let Some(lengths) = kv.get("eval.rpe_lengths_m") {
            for tok in lengths.split(',') {
                let tok = tok.trim();
                let name = match tok.parse::<f64>() {
                    Ok(v) if v.fract() == 0.0 => format!("rpe_{}.csv", v as i64),
                    _ => format!("rpe_{}.csv", tok),
                };
                if let Ok(text) = std::fs::read_to_string(dir.join(&name)) {
                    let trans: Vec<f64> = text
                        .lines()
                        .skip(1)
                        .filter_map(|l| l.split(',').nth(1))
                        .filter_map(|s| s.parse::<f64>().ok())
                        .collect();
                    rpe_medians
                        .push((tok.to_string(), MetricSummary::from_errors(&trans).median));
                }
            }
        }

        let mismatch = match &reference_scene {
            None => {
                reference_scene = Some(scene_desc.clone());
                false
            }
            Some(reference) => reference != &scene_desc,
        };
        rows.push(RunRow {
            dir: dir.clone(),
            pipeline: kv.get("pipeline").cloned().unwrap_or_default(),
            seed: kv.get("seed").cloned().unwrap_or_default(),
            scene: scene_desc,
            ate_median: summary.median,
            ate_rmse: summary.rmse,
            rpe_medians,
            scene_mismatch: mismatch,
        });
    }

    let mut f = std::fs::File::create(out_csv)
        .map_err(|e| PipelineError::Output(out_csv.to_path_buf(), e))?;
    let lengths: Vec<String> = rows
        .first()
        .map(|r| r.rpe_medians.iter().map(|(l, _)| l.clone()).collect())
        .unwrap_or_default();
    let rpe_headers: Vec<String> = lengths
        .iter()
        .map(|l| format!("rpe_{}m_median", l))
        .collect();
    writeln!(
        f,
        "dir,pipeline,seed,ate_median_m,ate_rmse_m,{},scene_mismatch",
        rpe_headers.join(",")
    )
    .map_err(|e| PipelineError::Output(out_csv.to_path_buf(), e))?;
    for row in &rows {
        let rpes: Vec<String> = lengths
            .iter()
            .map(|l| {
                row.rpe_medians
                    .iter()
                    .find(|(rl, _)| rl == l)
                    .map(|(_, v)| format!("{:.9e}", v))
                    .unwrap_or_default()
            })
            .collect();
        writeln!(
            f,
            "{},{},{},{:.9e},{:.9e},{},{}",
            row.dir.display(),
            row.pipeline,
            row.seed,
            row.ate_median,
            row.ate_rmse,
            rpes.join(","),
            row.scene_mismatch
        )
        .map_err(|e| PipelineError::Output(out_csv.to_path_buf(), e))?;
    }
    Ok(rows)
}
