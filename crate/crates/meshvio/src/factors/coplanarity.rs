//! Landmark-plane co-planarity factor with the plane normal optimized on the
//! unit sphere's tangent space.

use nalgebra::{DMatrix, DVector, RowVector6, Vector3};

use crate::geometry::{
    point_plane_signed_distance, s2_retract, s2_retract_jacobian, Plane, TangentVec2,
};
use crate::mesher::LandmarkId;
use crate::smoother::{Symbol, Values};

use super::{missing, FactorError, Linearization};

/// Co-planarity residual in the minimal parametrization around a
/// linearization plane: retract the normal by `v`, then n(v) . rho - d.
///
/// At v = 0 and d equal to the linearization distance this is exactly the
/// plane-to-point signed distance.
pub fn regularity_residual(plane_lin: &Plane, v: &TangentVec2, d: f64, landmark: &Vector3<f64>) -> f64 {
    let n = s2_retract(plane_lin.normal(), v);
    n.vector().dot(landmark) - d
}

/// Row Jacobian of [`regularity_residual`] with respect to (v1, v2, d, rho),
/// in that order.
pub fn regularity_residual_jacobian(
    plane_lin: &Plane,
    v: &TangentVec2,
    landmark: &Vector3<f64>,
) -> RowVector6<f64> {
    let dn_dv = s2_retract_jacobian(plane_lin.normal(), v);
    let n = s2_retract(plane_lin.normal(), v);
    let mut j = RowVector6::zeros();
    let dv = landmark.transpose() * dn_dv;
    j[0] = dv[0];
    j[1] = dv[1];
    j[2] = -1.0;
    j[3] = n.vector().x;
    j[4] = n.vector().y;
    j[5] = n.vector().z;
    j
}

/// Factor tying one landmark to one plane variable.
#[derive(Debug, Clone)]
pub struct RegularityFactor {
    keys: [Symbol; 2],
    inv_sigma: f64,
}

impl RegularityFactor {
    pub fn new(landmark: LandmarkId, plane_index: u64, sigma: f64) -> Self {
        RegularityFactor {
            keys: [Symbol::landmark(landmark), Symbol::plane(plane_index)],
            inv_sigma: 1.0 / sigma,
        }
    }

    pub fn keys(&self) -> &[Symbol] {
        &self.keys
    }

    pub fn landmark_id(&self) -> LandmarkId {
        self.keys[0].index
    }

    pub fn plane_index(&self) -> u64 {
        self.keys[1].index
    }

    pub fn residual(&self, values: &Values) -> Result<DVector<f64>, FactorError> {
        let rho = values
            .landmark(&self.keys[0])
            .ok_or_else(|| missing(&self.keys[0]))?;
        let plane = values.plane(&self.keys[1]).ok_or_else(|| missing(&self.keys[1]))?;
        let r = point_plane_signed_distance(plane, rho) * self.inv_sigma;
        Ok(DVector::from_vec(vec![r]))
    }

    pub fn linearize(&self, values: &Values) -> Result<Linearization, FactorError> {
        let rho = values
            .landmark(&self.keys[0])
            .ok_or_else(|| missing(&self.keys[0]))?;
        let plane = values.plane(&self.keys[1]).ok_or_else(|| missing(&self.keys[1]))?;

        // The plane variable linearizes at v = 0 around its current value.
        let full = regularity_residual_jacobian(plane, &TangentVec2::zeros(), rho);
        let mut j_landmark = DMatrix::zeros(1, 3);
        for c in 0..3 {
            j_landmark[(0, c)] = full[3 + c] * self.inv_sigma;
        }
        let mut j_plane = DMatrix::zeros(1, 3);
        for c in 0..3 {
            j_plane[(0, c)] = full[c] * self.inv_sigma;
        }
        let r = point_plane_signed_distance(plane, rho) * self.inv_sigma;
        Ok(Linearization {
            residual: DVector::from_vec(vec![r]),
            jacobians: vec![j_landmark, j_plane],
        })
    }
}
