//! Structureless vision factors: the landmark is triangulated from the
//! current pose estimates and analytically eliminated by projecting the
//! stacked reprojection residuals onto the left null space of the landmark
//! Jacobian. The residual has dimension 2k-3 (mono) or 3k-3 (stereo) for k
//! observations.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::geometry::Pose;
use crate::smoother::{Symbol, Values};

use super::projection::evaluate_projection;
use super::{missing, CameraModel, FactorError, Linearization, NavState, PixelMeasurement};

const MAX_CONDITION: f64 = 1e8;

/// Linear least-squares triangulation of one landmark from its observations.
///
/// Returns the point and the condition number of the stacked system; a
/// condition number above 1e8 (or fewer than 3 independent rows) is reported
/// as a degenerate triangulation.
pub fn triangulate_landmark(
    observations: &[(Pose, PixelMeasurement)],
    cam: &CameraModel,
) -> Result<(Vector3<f64>, f64), FactorError> {
    let rows: usize = observations.iter().map(|(_, px)| px.dim()).sum();
    if rows < 3 {
        return Err(FactorError::InsufficientObservations {
            got: rows,
            need: 3,
        });
    }
    let mut a = DMatrix::zeros(rows, 3);
    let mut b = DVector::zeros(rows);
    let mut r = 0;
    for (body_pose, px) in observations {
        let t_cw = cam.world_to_camera(body_pose);
        let rm = *t_cw.rotation.matrix();
        let t = t_cw.translation;
        // Each normalized coordinate x_n on `axis` gives one row of
        // (row_axis - x_n * row_z) rho = x_n t_z - t_axis + extra.
        let mut row_specs: Vec<(f64, f64, usize)> = Vec::with_capacity(3);
        match px {
            PixelMeasurement::Mono(uv) => {
                row_specs.push(((uv.x - cam.cx) / cam.fx, 0.0, 0));
                row_specs.push(((uv.y - cam.cy) / cam.fy, 0.0, 1));
            }
            PixelMeasurement::Stereo { u_left, u_right, v } => {
                row_specs.push(((u_left - cam.cx) / cam.fx, 0.0, 0));
                row_specs.push(((u_right - cam.cx) / cam.fx, cam.baseline, 0));
                row_specs.push(((v - cam.cy) / cam.fy, 0.0, 1));
            }
        }
        for (x_n, extra, axis) in row_specs {
            for c in 0..3 {
                a[(r, c)] = rm[(axis, c)] - x_n * rm[(2, c)];
            }
            b[r] = x_n * t.z - t[axis] + extra;
            r += 1;
        }
    }

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > MAX_CONDITION {
        return Err(FactorError::DegenerateTriangulation(if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        }));
    }
    let point = svd.solve(&b, 0.0).expect("SVD solve");
    Ok((Vector3::new(point[0], point[1], point[2]), smax / smin))
}

// Orthonormal basis of the column space (first) and left null space (second)
// of `a`, by twice-reorthogonalized Gram-Schmidt. Deterministic.
fn column_and_nullspace_basis(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let m = a.nrows();
    let n = a.ncols();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut v: DVector<f64> = a.column(c).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let d = q.dot(&v);
                v -= q * d;
            }
        }
        let norm = v.norm();
        if norm < 1e-10 {
            return None; // rank deficient landmark Jacobian
        }
        cols.push(v / norm);
    }
    let mut null: Vec<DVector<f64>> = Vec::with_capacity(m - n);
    for k in 0..m {
        if null.len() == m - n {
            break;
        }
        let mut v = DVector::zeros(m);
        v[k] = 1.0;
        for _ in 0..2 {
            for q in cols.iter().chain(null.iter()) {
                let d = q.dot(&v);
                v -= q * d;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            null.push(v / norm);
        }
    }
    if null.len() != m - n {
        return None;
    }
    let col_basis = DMatrix::from_columns(&cols);
    let null_basis = if null.is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&null)
    };
    Some((col_basis, null_basis))
}

/// Null-space-projected residual of a structureless landmark given the
/// observing states and their measurements (one per state, aligned).
pub fn structureless_residual(
    states: &[NavState],
    measurements: &[PixelMeasurement],
    cam: &CameraModel,
) -> Result<DVector<f64>, FactorError> {
    assert_eq!(states.len(), measurements.len());
    let k = states.len();
    let mono = measurements
        .iter()
        .any(|m| matches!(m, PixelMeasurement::Mono(_)));
    let need = if mono { 2 } else { 1 };
    if k < need {
        return Err(FactorError::InsufficientObservations { got: k, need });
    }
    let obs: Vec<(Pose, PixelMeasurement)> = states
        .iter()
        .zip(measurements)
        .map(|(s, m)| (s.pose(), *m))
        .collect();
    let (point, _) = triangulate_landmark(&obs, cam)?;

    let rows: usize = measurements.iter().map(|m| m.dim()).sum();
    let mut r = DVector::zeros(rows);
    let mut j_rho = DMatrix::zeros(rows, 3);
    let mut at = 0;
    for (state, px) in states.iter().zip(measurements) {
        let eval = evaluate_projection(&state.pose(), &point, px, cam)?;
        let d = px.dim();
        r.rows_mut(at, d).copy_from(&eval.residual);
        j_rho.view_mut((at, 0), (d, 3)).copy_from(&eval.j_landmark);
        at += d;
    }
    let (_, nullspace) =
        column_and_nullspace_basis(&j_rho).ok_or(FactorError::DegenerateTriangulation(f64::INFINITY))?;
    Ok(nullspace.transpose() * r)
}

/// Whitened per-observation linearization blocks of a structureless factor,
/// before null-space projection. Used by the solver to accumulate the
/// landmark-eliminated normal equations directly.
pub struct StructurelessLinearization {
    pub point: Vector3<f64>,
    /// Per observation: whitened residual (dim 2 or 3), whitened pose
    /// Jacobian (dim x 6), whitened landmark Jacobian (dim x 3).
    pub blocks: Vec<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)>,
}

/// Structureless factor over all keyframes observing one landmark.
#[derive(Debug, Clone)]
pub struct StructurelessFactor {
    pose_keys: Vec<Symbol>,
    measurements: Vec<PixelMeasurement>,
    cam: CameraModel,
    inv_sigma: f64,
    landmark: Option<crate::mesher::LandmarkId>,
}

impl StructurelessFactor {
    /// One (keyframe id, measurement) pair per observation; at least two
    /// observations are required for a non-empty residual.
    pub fn new(
        observations: Vec<(u64, PixelMeasurement)>,
        cam: CameraModel,
        pixel_sigma: f64,
    ) -> Self {
        let mut obs = observations;
        obs.sort_by_key(|(kf, _)| *kf);
        StructurelessFactor {
            pose_keys: obs.iter().map(|(kf, _)| Symbol::pose(*kf)).collect(),
            measurements: obs.into_iter().map(|(_, m)| m).collect(),
            cam,
            inv_sigma: 1.0 / pixel_sigma,
            landmark: None,
        }
    }

    /// Same as [`StructurelessFactor::new`], tagged with the landmark id the
    /// observations belong to (used by the smoother's bookkeeping).
    pub fn with_landmark(
        landmark: crate::mesher::LandmarkId,
        observations: Vec<(u64, PixelMeasurement)>,
        cam: CameraModel,
        pixel_sigma: f64,
    ) -> Self {
        let mut f = StructurelessFactor::new(observations, cam, pixel_sigma);
        f.landmark = Some(landmark);
        f
    }

    pub fn landmark_id(&self) -> Option<crate::mesher::LandmarkId> {
        self.landmark
    }

    pub fn keys(&self) -> &[Symbol] {
        &self.pose_keys
    }

    pub fn num_observations(&self) -> usize {
        self.measurements.len()
    }

    /// Residual dimension: total measurement dimension minus the 3 eliminated
    /// landmark dof.
    pub fn residual_dim(&self) -> usize {
        let rows: usize = self.measurements.iter().map(|m| m.dim()).sum();
        rows.saturating_sub(3)
    }

    fn poses(&self, values: &Values) -> Result<Vec<Pose>, FactorError> {
        self.pose_keys
            .iter()
            .map(|k| values.pose(k).copied().ok_or_else(|| missing(k)))
            .collect()
    }

    /// Whitened per-observation blocks at the current values.
    pub fn linearize_full(
        &self,
        values: &Values,
    ) -> Result<StructurelessLinearization, FactorError> {
        let poses = self.poses(values)?;
        let obs: Vec<(Pose, PixelMeasurement)> = poses
            .iter()
            .zip(&self.measurements)
            .map(|(p, m)| (*p, *m))
            .collect();
        let (point, _) = triangulate_landmark(&obs, &self.cam)?;
        let mut blocks = Vec::with_capacity(obs.len());
        for (pose, px) in &obs {
            let eval = evaluate_projection(pose, &point, px, &self.cam)?;
            blocks.push((
                eval.residual * self.inv_sigma,
                eval.j_pose * self.inv_sigma,
                eval.j_landmark * self.inv_sigma,
            ));
        }
        Ok(StructurelessLinearization { point, blocks })
    }

    /// Null-space-projected whitened residual.
    pub fn projected_residual(&self, values: &Values) -> Result<DVector<f64>, FactorError> {
        let lin = self.linearize_full(values)?;
        let (r, j_rho, _) = stack_blocks(&lin);
        let (_, nullspace) = column_and_nullspace_basis(&j_rho)
            .ok_or(FactorError::DegenerateTriangulation(f64::INFINITY))?;
        Ok(nullspace.transpose() * r)
    }

    /// Null-space-projected whitened residual and pose Jacobians.
    pub fn linearize_projected(&self, values: &Values) -> Result<Linearization, FactorError> {
        let lin = self.linearize_full(values)?;
        let (r, j_rho, j_poses) = stack_blocks(&lin);
        let (_, nullspace) = column_and_nullspace_basis(&j_rho)
            .ok_or(FactorError::DegenerateTriangulation(f64::INFINITY))?;
        let nt = nullspace.transpose();
        let jacobians = j_poses.into_iter().map(|j| &nt * j).collect();
        Ok(Linearization {
            residual: nt * r,
            jacobians,
        })
    }

    /// Squared norm of the projected residual, via the identity
    /// |N^T r|^2 = |r|^2 - |B^T r|^2 with B an orthonormal basis of the
    /// landmark Jacobian's column space.
    pub fn cost(&self, values: &Values) -> Result<f64, FactorError> {
        let lin = self.linearize_full(values)?;
        let (r, j_rho, _) = stack_blocks(&lin);
        let (col_basis, _) = orthonormal_columns(&j_rho)
            .ok_or(FactorError::DegenerateTriangulation(f64::INFINITY))?;
        let projected = col_basis.transpose() * &r;
        Ok((r.norm_squared() - projected.norm_squared()).max(0.0))
    }
}

fn stack_blocks(
    lin: &StructurelessLinearization,
) -> (DVector<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
    let rows: usize = lin.blocks.iter().map(|(r, _, _)| r.len()).sum();
    let mut r = DVector::zeros(rows);
    let mut j_rho = DMatrix::zeros(rows, 3);
    let mut j_poses = Vec::with_capacity(lin.blocks.len());
    let mut at = 0;
    for (ri, jp, jr) in &lin.blocks {
        let d = ri.len();
        r.rows_mut(at, d).copy_from(ri);
        j_rho.view_mut((at, 0), (d, 3)).copy_from(jr);
        let mut j_full = DMatrix::zeros(rows, 6);
        j_full.view_mut((at, 0), (d, 6)).copy_from(jp);
        j_poses.push(j_full);
        at += d;
    }
    (r, j_rho, j_poses)
}

fn orthonormal_columns(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, ())> {
    let n = a.ncols();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut v: DVector<f64> = a.column(c).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let d = q.dot(&v);
                v -= q * d;
            }
        }
        let norm = v.norm();
        if norm < 1e-10 {
            return None;
        }
        cols.push(v / norm);
    }
    Some((DMatrix::from_columns(&cols), ()))
}
