//! Trajectory and map metrics: SE(3)-aligned absolute trajectory error,
//! length-binned relative pose error, sampled-mesh accuracy against a
//! ground-truth cloud, and per-keyframe timing capture.

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Pose, Rotation};
use crate::mesher::Mesh3D;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {need} associated pose pairs, got {got}")]
    TooFewPairs { got: usize, need: usize },
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("ground-truth cloud is empty")]
    EmptyCloud,
    #[error("timestamps must be strictly increasing")]
    NonMonotonicTimestamps,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A timestamped pose sequence with strictly increasing timestamps.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    samples: Vec<(f64, Pose)>,
}

impl Trajectory {
    pub fn new(samples: Vec<(f64, Pose)>) -> Result<Self, EvalError> {
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(EvalError::NonMonotonicTimestamps);
            }
        }
        Ok(Trajectory { samples })
    }

    pub fn samples(&self) -> &[(f64, Pose)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Summary statistics of a set of non-negative errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub median: f64,
    pub rmse: f64,
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

impl MetricSummary {
    pub fn from_errors(errors: &[f64]) -> MetricSummary {
        if errors.is_empty() {
            return MetricSummary {
                median: 0.0,
                rmse: 0.0,
                mean: 0.0,
                max: 0.0,
                count: 0,
            };
        }
        let n = errors.len();
        let mean = errors.iter().sum::<f64>() / n as f64;
        let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
        let max = errors.iter().cloned().fold(0.0f64, f64::max);
        let mut sorted = errors.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if n % 2 == 0 {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        } else {
            sorted[n / 2]
        };
        MetricSummary {
            median,
            rmse,
            mean,
            max,
            count: n,
        }
    }
}

/// Nearest-timestamp association of two trajectories, keeping pairs whose
/// gap is at most `max_gap` seconds.
pub fn associate(est: &Trajectory, gt: &Trajectory, max_gap: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let gts = gt.samples();
    for (i, (t, _)) in est.samples().iter().enumerate() {
        let j = match gts.binary_search_by(|(tg, _)| tg.partial_cmp(t).unwrap()) {
            Ok(j) => j,
            Err(j) => {
                // Nearest of the two neighbors.
                if j == 0 {
                    0
                } else if j >= gts.len() {
                    gts.len() - 1
                } else if (gts[j].0 - t).abs() < (t - gts[j - 1].0).abs() {
                    j
                } else {
                    j - 1
                }
            }
        };
        if (gts[j].0 - t).abs() <= max_gap {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Closed-form least-squares rigid alignment (rotation via SVD of the
/// cross-covariance, no scale): returns T minimizing sum |T * p_est - p_gt|^2.
pub fn align_se3(est: &Trajectory, gt: &Trajectory, max_gap: f64) -> Result<Pose, EvalError> {
    let pairs = associate(est, gt, max_gap);
    if pairs.len() < 3 {
        return Err(EvalError::TooFewPairs {
            got: pairs.len(),
            need: 3,
        });
    }
    let n = pairs.len() as f64;
    let mut e_mean = Vector3::zeros();
    let mut g_mean = Vector3::zeros();
    for &(i, j) in &pairs {
        e_mean += est.samples()[i].1.translation;
        g_mean += gt.samples()[j].1.translation;
    }
    e_mean /= n;
    g_mean /= n;
    let mut w = Matrix3::<f64>::zeros();
    for &(i, j) in &pairs {
        let e = est.samples()[i].1.translation - e_mean;
        let g = gt.samples()[j].1.translation - g_mean;
        w += g * e.transpose();
    }
    let svd = w.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let det = (u * vt).determinant();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let r = Rotation::from_matrix(u * d * vt);
    let t = g_mean - r.rotate(&e_mean);
    Ok(Pose::new(r, t))
}

/// Absolute trajectory error: per-pair translational error norms after
/// SE(3) alignment (the rotational part is deliberately excluded).
pub fn ate(
    est: &Trajectory,
    gt: &Trajectory,
    max_gap: f64,
) -> Result<(Vec<(f64, f64)>, MetricSummary), EvalError> {
    let transform = align_se3(est, gt, max_gap)?;
    let pairs = associate(est, gt, max_gap);
    let mut rows = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let (t, pose_e) = est.samples()[i];
        let pose_g = &gt.samples()[j].1;
        let err = (transform.transform_point(&pose_e.translation) - pose_g.translation).norm();
        rows.push((t, err));
    }
    let errors: Vec<f64> = rows.iter().map(|(_, e)| *e).collect();
    Ok((rows, MetricSummary::from_errors(&errors)))
}

/// One RPE length bin: per-start (timestamp, translation error m, rotation
/// error deg) rows plus their summaries.
#[derive(Debug, Clone)]
pub struct RpeBin {
    pub length: f64,
    pub rows: Vec<(f64, f64, f64)>,
    pub translation: MetricSummary,
    pub rotation_deg: MetricSummary,
}

/// Relative pose error over all sub-trajectories of the given lengths:
/// every start index pairs with the first later sample at ground-truth path
/// length >= L; the relative pose error is measured after aligning frame i.
pub fn rpe(
    est: &Trajectory,
    gt: &Trajectory,
    lengths: &[f64],
    max_gap: f64,
) -> Result<Vec<RpeBin>, EvalError> {
    let pairs = associate(est, gt, max_gap);
    if pairs.len() < 2 {
        return Err(EvalError::TooFewPairs {
            got: pairs.len(),
            need: 2,
        });
    }
    // Cumulative ground-truth path length along the associated samples.
    let mut cum = vec![0.0; pairs.len()];
    for k in 1..pairs.len() {
        let a = gt.samples()[pairs[k - 1].1].1.translation;
        let b = gt.samples()[pairs[k].1].1.translation;
        cum[k] = cum[k - 1] + (b - a).norm();
    }
    let mut bins = Vec::new();
    for &length in lengths {
        let mut rows = Vec::new();
        for start in 0..pairs.len() {
            let mut end = None;
            for k in (start + 1)..pairs.len() {
                if cum[k] - cum[start] >= length {
                    end = Some(k);
                    break;
                }
            }
            let Some(end) = end else {
                break;
            };
            let (ts, _) = est.samples()[pairs[start].0];
            let e_i = &est.samples()[pairs[start].0].1;
            let e_j = &est.samples()[pairs[end].0].1;
            let g_i = &gt.samples()[pairs[start].1].1;
            let g_j = &gt.samples()[pairs[end].1].1;
            let rel_est = e_i.inverse().compose(e_j);
            let rel_gt = g_i.inverse().compose(g_j);
            let err = rel_gt.inverse().compose(&rel_est);
            rows.push((
                ts,
                err.translation.norm(),
                err.rotation.angle().to_degrees(),
            ));
        }
        let trans: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let rot: Vec<f64> = rows.iter().map(|r| r.2).collect();
        bins.push(RpeBin {
            length,
            rows,
            translation: MetricSummary::from_errors(&trans),
            rotation_deg: MetricSummary::from_errors(&rot),
        });
    }
    Ok(bins)
}

// Small exact (deterministic) kd-tree for nearest-neighbor distances.
struct KdTree {
    points: Vec<Vector3<f64>>,
    // node layout: (point index, split axis); children implicit via ranges.
    order: Vec<usize>,
}

impl KdTree {
    fn build(points: Vec<Vector3<f64>>) -> KdTree {
        let order: Vec<usize> = (0..points.len()).collect();
        let mut tree = KdTree { points, order };
        let n = tree.order.len();
        let mut scratch = std::mem::take(&mut tree.order);
        Self::build_range(&tree.points, &mut scratch, 0, n, 0);
        tree.order = scratch;
        tree
    }

    fn build_range(points: &[Vector3<f64>], order: &mut [usize], lo: usize, hi: usize, depth: usize) {
        if hi - lo <= 1 {
            return;
        }
        let axis = depth % 3;
        let mid = (lo + hi) / 2;
        order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        Self::build_range(points, order, lo, mid, depth + 1);
        Self::build_range(points, order, mid + 1, hi, depth + 1);
    }

    fn nearest_dist(&self, q: &Vector3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        self.search(q, 0, self.order.len(), 0, &mut best);
        best.sqrt()
    }

    fn search(&self, q: &Vector3<f64>, lo: usize, hi: usize, depth: usize, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let axis = depth % 3;
        let mid = (lo + hi) / 2;
        let p = &self.points[self.order[mid]];
        let d2 = (p - q).norm_squared();
        if d2 < *best {
            *best = d2;
        }
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        if diff * diff < *best {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

/// Samples the mesh uniformly (stratified per face by area, seeded) and
/// returns each sample's distance to the closest ground-truth point, plus a
/// summary.
pub fn mesh_accuracy(
    mesh: &Mesh3D,
    gt_cloud: &[Vector3<f64>],
    density: f64,
    seed: u64,
) -> Result<(Vec<f64>, MetricSummary), EvalError> {
    if mesh.is_empty() {
        return Err(EvalError::EmptyMesh);
    }
    if gt_cloud.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    let tree = KdTree::build(gt_cloud.to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xE0);
    let mut distances = Vec::new();
    for face in &mesh.faces {
        let Some([a, b, c]) = mesh.face_vertices(face) else {
            continue;
        };
        let area = (b - a).cross(&(c - a)).norm() * 0.5;
        let expected = area * density;
        let mut count = expected.floor() as usize;
        if rng.random_range(0.0..1.0) < expected.fract() {
            count += 1;
        }
        for _ in 0..count {
            let mut u: f64 = rng.random_range(0.0..1.0);
            let mut v: f64 = rng.random_range(0.0..1.0);
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let p = a + (b - a) * u + (c - a) * v;
            distances.push(tree.nearest_dist(&p));
        }
    }
    let summary = MetricSummary::from_errors(&distances);
    Ok((distances, summary))
}

/// Wall-clock stage times of one keyframe, milliseconds.
#[derive(Debug, Clone, Copy)]
pub struct TimingRecord {
    pub keyframe: u64,
    pub t_opt_ms: f64,
    pub t_mesh_ms: f64,
}

pub fn write_timing_csv(path: &Path, rows: &[TimingRecord]) -> Result<(), EvalError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "keyframe,t_opt_ms,t_mesh_ms")?;
    for r in rows {
        writeln!(f, "{},{:.6},{:.6}", r.keyframe, r.t_opt_ms, r.t_mesh_ms)?;
    }
    Ok(())
}

pub fn write_ate_csv(path: &Path, rows: &[(f64, f64)]) -> Result<(), EvalError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "timestamp,error_m")?;
    for (t, e) in rows {
        writeln!(f, "{:.9},{:.9e}", t, e)?;
    }
    Ok(())
}

pub fn write_rpe_csv(path: &Path, bin: &RpeBin) -> Result<(), EvalError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "timestamp,trans_err_m,rot_err_deg")?;
    for (t, te, re) in &bin.rows {
        writeln!(f, "{:.9},{:.9e},{:.9e}", t, te, re)?;
    }
    Ok(())
}

pub fn write_mesh_accuracy_csv(path: &Path, distances: &[f64]) -> Result<(), EvalError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "distance_m")?;
    for d in distances {
        writeln!(f, "{:.9e}", d)?;
    }
    Ok(())
}
