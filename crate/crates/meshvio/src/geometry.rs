//! Rotation, pose and unit-sphere primitives with the retractions used by all
//! other modules.
//!
//! Conventions: angles in radians, distances in meters. Rotations are stored
//! as 3x3 orthonormal matrices and perturbed on the right, `R * exp(w)`.
//! Plane normals live on the unit sphere and are perturbed through a
//! two-dimensional tangent-space retraction.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

/// Minimal tangent-space parametrization of a unit normal perturbation.
pub type TangentVec2 = Vector2<f64>;

/// Skew-symmetric (hat) matrix of a 3-vector: `hat(w) * v == w x v`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// A rotation in SO(3), stored as a 3x3 orthonormal matrix with det +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: Matrix3<f64>,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            m: Matrix3::identity(),
        }
    }

    /// Wraps a matrix that is already orthonormal. Debug builds check the
    /// group invariants at 1e-9.
    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        debug_assert!(
            (m * m.transpose() - Matrix3::identity()).norm() < 1e-9,
            "rotation matrix is not orthonormal"
        );
        debug_assert!((m.determinant() - 1.0).abs() < 1e-9, "determinant is not +1");
        Rotation { m }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn inverse(&self) -> Self {
        Rotation { m: self.m.transpose() }
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.m * v
    }

    /// Applies the inverse rotation without forming it.
    pub fn unrotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.m.transpose() * v
    }

    /// Rotation about the z axis.
    pub fn from_yaw(yaw: f64) -> Self {
        so3_exp(&Vector3::new(0.0, 0.0, yaw))
    }

    /// Right-perturbed retraction `R * exp(w)`, re-orthonormalized to keep
    /// long composition chains on the manifold.
    pub fn retract(&self, w: &Vector3<f64>) -> Self {
        let composed = self.m * so3_exp(w).m;
        Rotation {
            m: reorthonormalize(&composed),
        }
    }

    /// Local coordinates of `other` relative to `self`: `log(self^T * other)`.
    pub fn local(&self, other: &Rotation) -> Vector3<f64> {
        so3_log(&Rotation {
            m: self.m.transpose() * other.m,
        })
    }

    /// Rotation angle in radians, in [0, pi].
    pub fn angle(&self) -> f64 {
        let c = ((self.m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Unit quaternion (x, y, z, w) with non-negative w, for serialization.
    pub fn to_quaternion_xyzw(&self) -> [f64; 4] {
        let m = &self.m;
        let trace = m.trace();
        let (x, y, z, w);
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = 0.25 * s;
        }
        let norm = (x * x + y * y + z * z + w * w).sqrt();
        let sign = if w < 0.0 { -1.0 } else { 1.0 };
        [
            sign * x / norm,
            sign * y / norm,
            sign * z / norm,
            sign * w / norm,
        ]
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation { m: self.m * rhs.m }
    }
}

fn reorthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    // One modified Gram-Schmidt pass; inputs are within rounding of SO(3).
    let c0 = m.column(0).normalize();
    let mut c1: Vector3<f64> = m.column(1).into();
    c1 -= c0 * c0.dot(&c1);
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    Matrix3::from_columns(&[c0, c1, c2])
}

/// Rodrigues exponential map, so(3) -> SO(3).
pub fn so3_exp(w: &Vector3<f64>) -> Rotation {
    let theta2 = w.norm_squared();
    let wx = skew(w);
    let (a, b) = if theta2 < 1e-16 {
        // sin(t)/t and (1-cos(t))/t^2 by series
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rotation {
        m: Matrix3::identity() + wx * a + wx * wx * b,
    }
}

/// Logarithm map, SO(3) -> so(3). Well defined for angles below pi; at the
/// pi singularity the axis is recovered from the symmetric part.
pub fn so3_log(r: &Rotation) -> Vector3<f64> {
    let m = r.matrix();
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = c.acos();
    let antisym = Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    );
    if theta < 1e-6 {
        // R ~ I + hat(w): the antisymmetric part is 2w to first order.
        return antisym * (0.5 + theta * theta / 12.0);
    }
    let s = theta.sin();
    if theta < 3.0 || s.abs() > 1e-6 {
        antisym * (theta / (2.0 * s))
    } else {
        // theta near pi: use the diagonal of R = I + 2*sin^2(t/2)*(aa^T - I).
        let aa = (m + Matrix3::identity()) * 0.5;
        let axis = if aa[(0, 0)] >= aa[(1, 1)] && aa[(0, 0)] >= aa[(2, 2)] {
            Vector3::new(aa[(0, 0)].sqrt(), aa[(0, 1)] / aa[(0, 0)].sqrt(), aa[(0, 2)] / aa[(0, 0)].sqrt())
        } else if aa[(1, 1)] >= aa[(2, 2)] {
            Vector3::new(aa[(0, 1)] / aa[(1, 1)].sqrt(), aa[(1, 1)].sqrt(), aa[(1, 2)] / aa[(1, 1)].sqrt())
        } else {
            Vector3::new(aa[(0, 2)] / aa[(2, 2)].sqrt(), aa[(1, 2)] / aa[(2, 2)].sqrt(), aa[(2, 2)].sqrt())
        };
        let axis = axis.normalize();
        // Resolve the sign from the antisymmetric part where possible.
        let sign = if antisym.dot(&axis) < 0.0 { -1.0 } else { 1.0 };
        axis * theta * sign
    }
}

/// Right Jacobian of SO(3): exp(w + dw) ~ exp(w) exp(Jr(w) dw).
pub fn so3_right_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let wx = skew(w);
    if theta2 < 1e-14 {
        return Matrix3::identity() - wx * 0.5 + wx * wx * (1.0 / 6.0);
    }
    let theta = theta2.sqrt();
    Matrix3::identity() - wx * ((1.0 - theta.cos()) / theta2)
        + wx * wx * ((theta - theta.sin()) / (theta2 * theta))
}

/// Inverse of the right Jacobian of SO(3).
pub fn so3_right_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let wx = skew(w);
    if theta2 < 1e-14 {
        return Matrix3::identity() + wx * 0.5 + wx * wx * (1.0 / 12.0);
    }
    let theta = theta2.sqrt();
    let coef = 1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() + wx * 0.5 + wx * wx * coef
}

/// A rigid transform: rotation plus translation, acting as `R * x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Pose { rotation, translation }
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rinv = self.rotation.inverse();
        Pose {
            translation: -rinv.rotate(&self.translation),
            rotation: rinv,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }
}

/// A unit-norm 3-vector, normalized on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitNormal {
    v: Vector3<f64>,
}

impl UnitNormal {
    /// Normalizes the input. Zero-norm input is rejected.
    pub fn new(v: Vector3<f64>) -> Option<Self> {
        let n = v.norm();
        if n < 1e-12 {
            return None;
        }
        Some(UnitNormal { v: v / n })
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.v
    }

    pub fn flipped(&self) -> Self {
        UnitNormal { v: -self.v }
    }

    /// Unsigned angle to another unit normal, in [0, pi].
    pub fn angle_to(&self, other: &UnitNormal) -> f64 {
        self.v.dot(&other.v).clamp(-1.0, 1.0).acos()
    }
}

/// Deterministic orthonormal basis (b1, b2) of the tangent plane at `n`.
///
/// `e` is the standard axis with the smallest |n . e| (ties broken by lowest
/// axis index); b1 = normalize(e x n), b2 = n x b1.
pub fn s2_tangent_basis(n: &UnitNormal) -> (Vector3<f64>, Vector3<f64>) {
    let v = n.vector();
    let abs = [v.x.abs(), v.y.abs(), v.z.abs()];
    let mut axis = 0;
    for i in 1..3 {
        if abs[i] < abs[axis] {
            axis = i;
        }
    }
    let mut e = Vector3::zeros();
    e[axis] = 1.0;
    let b1 = e.cross(v).normalize();
    let b2 = v.cross(&b1);
    (b1, b2)
}

/// Exponential-map retraction on the unit sphere.
///
/// With u = v1*b1 + v2*b2 in the tangent plane at `n`, returns
/// cos(|u|) n + sin(|u|) u/|u|; v = 0 maps to n.
pub fn s2_retract(n: &UnitNormal, v: &TangentVec2) -> UnitNormal {
    let (b1, b2) = s2_tangent_basis(n);
    let u = b1 * v.x + b2 * v.y;
    let theta = u.norm();
    if theta < 1e-14 {
        return *n;
    }
    UnitNormal {
        v: n.vector() * theta.cos() + u * (theta.sin() / theta),
    }
}

/// Derivative of `s2_retract(n, v)` with respect to `v`, as a 3x2 matrix of
/// column derivatives d(retract)/d(v_k).
pub fn s2_retract_jacobian(n: &UnitNormal, v: &TangentVec2) -> nalgebra::Matrix3x2<f64> {
    let (b1, b2) = s2_tangent_basis(n);
    let u = b1 * v.x + b2 * v.y;
    let theta = u.norm();
    // dn/du at u, a 3x3; columns then contracted with b1, b2.
    let dn_du = if theta < 1e-7 {
        // series: -n u^T + I + O(theta^2)
        Matrix3::identity() - n.vector() * u.transpose()
    } else {
        let uhat = u / theta;
        let sc = theta.sin() / theta;
        -n.vector() * (uhat.transpose() * theta.sin())
            + uhat * uhat.transpose() * (theta.cos() - sc)
            + Matrix3::identity() * sc
    };
    let c1 = dn_du * b1;
    let c2 = dn_du * b2;
    nalgebra::Matrix3x2::from_columns(&[c1, c2])
}

/// Inverse of the retraction: tangent coordinates v at `a` with
/// `s2_retract(a, v) == b`. Undefined at the antipode of `a`.
pub fn s2_local(a: &UnitNormal, b: &UnitNormal) -> TangentVec2 {
    let cos_t = a.vector().dot(b.vector()).clamp(-1.0, 1.0);
    let theta = cos_t.acos();
    if theta < 1e-12 {
        return TangentVec2::zeros();
    }
    // Unit tangent at `a` pointing toward `b` along the geodesic.
    let perp = b.vector() - a.vector() * cos_t;
    let pn = perp.norm();
    if pn < 1e-14 {
        // Antipodal: direction is arbitrary; pick b1.
        let (b1, _) = s2_tangent_basis(a);
        let (c1, c2) = {
            let basis = s2_tangent_basis(a);
            (basis.0, basis.1)
        };
        let u = b1 * theta;
        return TangentVec2::new(u.dot(&c1), u.dot(&c2));
    }
    let dir = perp / pn;
    let u = dir * theta;
    let (b1, b2) = s2_tangent_basis(a);
    TangentVec2::new(u.dot(&b1), u.dot(&b2))
}

/// Derivative of `v = s2_local(a, retract_n(w))` with respect to the tangent
/// perturbation `w` at `n`, evaluated at w = 0. Used when a Gaussian prior
/// stores a sphere-valued linearization point.
pub fn s2_local_jacobian(a: &UnitNormal, n: &UnitNormal) -> Matrix2<f64> {
    let (a1, a2) = s2_tangent_basis(a);
    let (n1, n2) = s2_tangent_basis(n);
    let cos_t = a.vector().dot(n.vector()).clamp(-1.0, 1.0);
    let theta = cos_t.acos();
    if theta < 1e-7 {
        // Transport is the identity in the limit; express n's basis in a's.
        return Matrix2::new(a1.dot(&n1), a1.dot(&n2), a2.dot(&n1), a2.dot(&n2));
    }
    // Geodesic frame: axis k = normalize(a x n); tangents e (at a) and t (at n).
    let k = a.vector().cross(n.vector()).normalize();
    let e = (n.vector() - a.vector() * cos_t).normalize();
    let t = k.cross(n.vector()).normalize() * -1.0;
    // gamma'(theta) = -sin(t) a + cos(t) e; equals -k x n up to sign checks.
    let gamma_t = -a.vector() * theta.sin() + e * theta.cos();
    let _ = t;
    let amp = theta / theta.sin();
    // w (in n's basis) -> 3-vector -> decompose along (gamma_t, k) ->
    // inverse differential -> (e, k) at a -> coordinates in a's basis.
    let mut j = Matrix2::zeros();
    for (col, bn) in [n1, n2].iter().enumerate() {
        let wt = bn.dot(&gamma_t);
        let wk = bn.dot(&k);
        let v3 = e * wt + k * (amp * wk);
        j[(0, col)] = v3.dot(&a1);
        j[(1, col)] = v3.dot(&a2);
    }
    j
}

/// A plane {n, d}: points x with n . x = d. Stored in canonical form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    normal: UnitNormal,
    distance: f64,
}

impl Plane {
    /// Builds the canonical representative of {(n, d), (-n, -d)}: the
    /// largest-magnitude normal component is made positive (ties between
    /// components resolved by the lowest axis index; an exactly zero leading
    /// component falls back to requiring d >= 0).
    pub fn new(normal: UnitNormal, distance: f64) -> Self {
        let v = normal.vector();
        let abs = [v.x.abs(), v.y.abs(), v.z.abs()];
        let mut axis = 0;
        for i in 1..3 {
            if abs[i] > abs[axis] {
                axis = i;
            }
        }
        let flip = if v[axis] < 0.0 {
            true
        } else if v[axis] == 0.0 {
            distance < 0.0
        } else {
            false
        };
        if flip {
            Plane {
                normal: normal.flipped(),
                distance: -distance,
            }
        } else {
            Plane { normal, distance }
        }
    }

    pub fn normal(&self) -> &UnitNormal {
        &self.normal
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Retracts the plane by tangent coordinates (v1, v2) on the normal and a
    /// Euclidean increment on the distance.
    pub fn retract(&self, v: &TangentVec2, dd: f64) -> Plane {
        Plane::new(s2_retract(&self.normal, v), self.distance + dd)
    }

    /// Angle between normals and distance gap, ignoring the double cover.
    pub fn gap_to(&self, other: &Plane) -> (f64, f64) {
        (
            self.normal.angle_to(&other.normal),
            (self.distance - other.distance).abs(),
        )
    }
}

/// Signed distance n . p - d of a point to a plane.
pub fn point_plane_signed_distance(plane: &Plane, point: &Vector3<f64>) -> f64 {
    plane.normal.vector().dot(point) - plane.distance
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn exp_of_zero_is_identity() {
        let r = so3_exp(&Vector3::zeros());
        assert_relative_eq!(r.matrix(), &Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = so3_exp(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let v = r.rotate(&Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(v, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn log_near_pi_recovers_angle() {
        for &axis in &[
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.6, -0.48, 0.64),
        ] {
            let w = axis.normalize() * (PI - 1e-9);
            let back = so3_log(&so3_exp(&w));
            assert_relative_eq!(back, w, epsilon = 1e-6);
        }
    }

    #[test]
    fn right_jacobian_matches_finite_differences() {
        let w = Vector3::new(0.3, -0.7, 0.5);
        let jr = so3_right_jacobian(&w);
        let h = 1e-6;
        for k in 0..3 {
            let mut dw = Vector3::zeros();
            dw[k] = h;
            let plus = so3_log(&so3_exp(&(w + dw)));
            let minus = so3_log(&so3_exp(&(w - dw)));
            // exp(w+dw) = exp(w) exp(Jr dw) => log-space finite difference of
            // the local coordinates around exp(w).
            let num = so3_exp(&w).local(&so3_exp(&(w + dw))) / h
                - so3_exp(&w).local(&so3_exp(&(w - dw))) / h;
            assert_relative_eq!(num * 0.5, jr.column(k).into_owned(), epsilon = 1e-6);
            let _ = (plus, minus);
        }
        let jri = so3_right_jacobian_inv(&w);
        assert_relative_eq!(jr * jri, Matrix3::identity(), epsilon = 1e-10);
    }

    #[test]
    fn s2_retract_examples() {
        let n = UnitNormal::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let same = s2_retract(&n, &TangentVec2::zeros());
        assert_relative_eq!(same.vector(), n.vector(), epsilon = 1e-15);

        let quarter = s2_retract(&n, &TangentVec2::new(FRAC_PI_2, 0.0));
        assert_relative_eq!(
            quarter.vector(),
            &Vector3::new(0.0, -1.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn s2_local_inverts_retract() {
        let n = UnitNormal::new(Vector3::new(0.2, -0.5, 0.9)).unwrap();
        let v = TangentVec2::new(0.4, -0.9);
        let m = s2_retract(&n, &v);
        let back = s2_local(&n, &m);
        assert_relative_eq!(back, v, epsilon = 1e-10);
    }

    #[test]
    fn s2_retract_jacobian_matches_finite_differences() {
        let n = UnitNormal::new(Vector3::new(0.3, 0.8, -0.5)).unwrap();
        for v in [TangentVec2::new(0.0, 0.0), TangentVec2::new(0.7, -0.3)] {
            let j = s2_retract_jacobian(&n, &v);
            let h = 1e-6;
            for k in 0..2 {
                let mut dv = TangentVec2::zeros();
                dv[k] = h;
                let num =
                    (s2_retract(&n, &(v + dv)).v - s2_retract(&n, &(v - dv)).v) / (2.0 * h);
                assert_relative_eq!(num, j.column(k).into_owned(), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn s2_local_jacobian_matches_finite_differences() {
        let a = UnitNormal::new(Vector3::new(0.1, -0.4, 0.91)).unwrap();
        let n = s2_retract(&a, &TangentVec2::new(0.3, 0.5));
        let j = s2_local_jacobian(&a, &n);
        let h = 1e-6;
        for k in 0..2 {
            let mut dw = TangentVec2::zeros();
            dw[k] = h;
            let num =
                (s2_local(&a, &s2_retract(&n, &dw)) - s2_local(&a, &s2_retract(&n, &-dw)))
                    / (2.0 * h);
            assert_relative_eq!(num, j.column(k).into_owned(), epsilon = 1e-7);
        }
    }

    #[test]
    fn signed_distance_examples() {
        let z = UnitNormal::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let p = Plane::new(z, 1.0);
        assert_relative_eq!(
            point_plane_signed_distance(&p, &Vector3::new(3.0, 4.0, 1.0)),
            0.0
        );
        assert_relative_eq!(
            point_plane_signed_distance(&p, &Vector3::new(2.0, 3.0, 4.0)),
            3.0
        );
        let x = UnitNormal::new(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let p = Plane::new(x, 2.0);
        assert_relative_eq!(
            point_plane_signed_distance(&p, &Vector3::new(0.0, 5.0, 5.0)),
            -2.0
        );
    }

    #[test]
    fn pose_compose_inverse_roundtrip() {
        let a = Pose::new(so3_exp(&Vector3::new(0.1, 0.2, -0.3)), Vector3::new(1.0, 2.0, 3.0));
        let ident = a.compose(&a.inverse());
        assert_relative_eq!(ident.rotation.matrix(), &Matrix3::identity(), epsilon = 1e-9);
        assert_relative_eq!(ident.translation, Vector3::zeros(), epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn exp_log_roundtrip(x in -1.7f64..1.7, y in -1.7f64..1.7, z in -1.7f64..1.7) {
            let w = Vector3::new(x, y, z);
            prop_assume!(w.norm() < 3.0);
            let back = so3_log(&so3_exp(&w));
            prop_assert!((back - w).norm() < 1e-9);
        }

        #[test]
        fn retract_stays_unit(nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
                              v1 in -3.0f64..3.0, v2 in -3.0f64..3.0) {
            let n = Vector3::new(nx, ny, nz);
            prop_assume!(n.norm() > 1e-3);
            let n = UnitNormal::new(n).unwrap();
            let out = s2_retract(&n, &TangentVec2::new(v1, v2));
            prop_assert!((out.vector().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn canonicalization_identifies_double_cover(
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0, d in -5.0f64..5.0
        ) {
            let n = Vector3::new(nx, ny, nz);
            prop_assume!(n.norm() > 1e-3);
            let n = UnitNormal::new(n).unwrap();
            let a = Plane::new(n, d);
            let b = Plane::new(n.flipped(), -d);
            prop_assert!((a.normal().vector() - b.normal().vector()).norm() < 1e-15);
            prop_assert!((a.distance() - b.distance()).abs() < 1e-15);
            // Idempotent: re-canonicalizing changes nothing.
            let again = Plane::new(*a.normal(), a.distance());
            prop_assert!((again.normal().vector() - a.normal().vector()).norm() < 1e-15);
            // Signed distance is unaffected by which representative was given.
            let p = Vector3::new(0.3, -0.7, 1.1);
            prop_assert!(
                (point_plane_signed_distance(&a, &p) - point_plane_signed_distance(&b, &p)).abs()
                    < 1e-12
            );
        }
    }
}
