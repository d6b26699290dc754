//! Symbol-keyed variable storage with on-manifold retractions.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::geometry::{
    s2_local, s2_local_jacobian, so3_right_jacobian_inv, Plane, Pose, TangentVec2,
};

/// What kind of variable a symbol refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    /// Keyframe pose (rotation + position), 6 local dof.
    Pose,
    /// Keyframe velocity and IMU biases, 9 local dof.
    VelBias,
    /// Landmark position, 3 local dof.
    Landmark,
    /// Plane (normal on the sphere + distance), 3 local dof.
    Plane,
}

/// Key of one variable in the estimation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub kind: SymbolKind,
    pub index: u64,
}

impl Symbol {
    pub fn pose(index: u64) -> Symbol {
        Symbol { kind: SymbolKind::Pose, index }
    }

    pub fn vel_bias(index: u64) -> Symbol {
        Symbol { kind: SymbolKind::VelBias, index }
    }

    pub fn landmark(index: u64) -> Symbol {
        Symbol { kind: SymbolKind::Landmark, index }
    }

    pub fn plane(index: u64) -> Symbol {
        Symbol { kind: SymbolKind::Plane, index }
    }

    /// Local (tangent-space) dimension of this variable kind.
    pub fn dim(&self) -> usize {
        match self.kind {
            SymbolKind::Pose => 6,
            SymbolKind::VelBias => 9,
            SymbolKind::Landmark => 3,
            SymbolKind::Plane => 3,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.kind {
            SymbolKind::Pose => 'x',
            SymbolKind::VelBias => 'v',
            SymbolKind::Landmark => 'l',
            SymbolKind::Plane => 'p',
        };
        write!(f, "{}{}", c, self.index)
    }
}

/// Velocity and IMU biases of one keyframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelBias {
    pub velocity: Vector3<f64>,
    pub bias_gyro: Vector3<f64>,
    pub bias_accel: Vector3<f64>,
}

impl VelBias {
    pub fn zero() -> Self {
        VelBias {
            velocity: Vector3::zeros(),
            bias_gyro: Vector3::zeros(),
            bias_accel: Vector3::zeros(),
        }
    }
}

/// A variable value; the variant must match the symbol kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Pose(Pose),
    VelBias(VelBias),
    Landmark(Vector3<f64>),
    Plane(Plane),
}

impl Value {
    pub fn kind(&self) -> SymbolKind {
        match self {
            Value::Pose(_) => SymbolKind::Pose,
            Value::VelBias(_) => SymbolKind::VelBias,
            Value::Landmark(_) => SymbolKind::Landmark,
            Value::Plane(_) => SymbolKind::Plane,
        }
    }

    pub fn as_pose(&self) -> Option<&Pose> {
        match self {
            Value::Pose(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_vel_bias(&self) -> Option<&VelBias> {
        match self {
            Value::VelBias(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_landmark(&self) -> Option<&Vector3<f64>> {
        match self {
            Value::Landmark(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_plane(&self) -> Option<&Plane> {
        match self {
            Value::Plane(p) => Some(p),
            _ => None,
        }
    }

    /// Applies a tangent-space increment of the kind-specific dimension.
    pub fn retract(&self, delta: &[f64]) -> Value {
        match self {
            Value::Pose(p) => {
                let w = Vector3::new(delta[0], delta[1], delta[2]);
                let dp = Vector3::new(delta[3], delta[4], delta[5]);
                Value::Pose(Pose::new(p.rotation.retract(&w), p.translation + dp))
            }
            Value::VelBias(v) => Value::VelBias(VelBias {
                velocity: v.velocity + Vector3::new(delta[0], delta[1], delta[2]),
                bias_gyro: v.bias_gyro + Vector3::new(delta[3], delta[4], delta[5]),
                bias_accel: v.bias_accel + Vector3::new(delta[6], delta[7], delta[8]),
            }),
            Value::Landmark(l) => {
                Value::Landmark(l + Vector3::new(delta[0], delta[1], delta[2]))
            }
            Value::Plane(p) => {
                Value::Plane(p.retract(&TangentVec2::new(delta[0], delta[1]), delta[2]))
            }
        }
    }

    /// Tangent coordinates of `other` in the chart centered at `self`.
    pub fn local_coords(&self, other: &Value) -> DVector<f64> {
        match (self, other) {
            (Value::Pose(a), Value::Pose(b)) => {
                let w = a.rotation.local(&b.rotation);
                let dp = b.translation - a.translation;
                DVector::from_vec(vec![w.x, w.y, w.z, dp.x, dp.y, dp.z])
            }
            (Value::VelBias(a), Value::VelBias(b)) => DVector::from_vec(vec![
                b.velocity.x - a.velocity.x,
                b.velocity.y - a.velocity.y,
                b.velocity.z - a.velocity.z,
                b.bias_gyro.x - a.bias_gyro.x,
                b.bias_gyro.y - a.bias_gyro.y,
                b.bias_gyro.z - a.bias_gyro.z,
                b.bias_accel.x - a.bias_accel.x,
                b.bias_accel.y - a.bias_accel.y,
                b.bias_accel.z - a.bias_accel.z,
            ]),
            (Value::Landmark(a), Value::Landmark(b)) => {
                let d = b - a;
                DVector::from_vec(vec![d.x, d.y, d.z])
            }
            (Value::Plane(a), Value::Plane(b)) => {
                let v = s2_local(a.normal(), b.normal());
                DVector::from_vec(vec![v.x, v.y, b.distance() - a.distance()])
            }
            _ => panic!("local_coords across mismatched value kinds"),
        }
    }

    /// Derivative of `self.local_coords(other.retract(w))` with respect to
    /// `w` at w = 0, used when a Gaussian factor stores `self` as its
    /// linearization point.
    pub fn local_coords_jacobian(&self, other: &Value) -> DMatrix<f64> {
        match (self, other) {
            (Value::Pose(a), Value::Pose(b)) => {
                let w = a.rotation.local(&b.rotation);
                let mut j = DMatrix::zeros(6, 6);
                j.view_mut((0, 0), (3, 3))
                    .copy_from(&so3_right_jacobian_inv(&w));
                j.view_mut((3, 3), (3, 3)).fill_with_identity();
                j
            }
            (Value::VelBias(_), Value::VelBias(_)) => DMatrix::identity(9, 9),
            (Value::Landmark(_), Value::Landmark(_)) => DMatrix::identity(3, 3),
            (Value::Plane(a), Value::Plane(b)) => {
                let mut j = DMatrix::zeros(3, 3);
                let js = s2_local_jacobian(a.normal(), b.normal());
                j.view_mut((0, 0), (2, 2)).copy_from(&js);
                j[(2, 2)] = 1.0;
                j
            }
            _ => panic!("local_coords_jacobian across mismatched value kinds"),
        }
    }
}

/// Symbol-keyed container of all current variable values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Values {
    map: BTreeMap<Symbol, Value>,
}

impl Values {
    pub fn new() -> Self {
        Values::default()
    }

    pub fn insert(&mut self, symbol: Symbol, value: Value) {
        assert_eq!(symbol.kind, value.kind(), "value kind must match symbol kind");
        self.map.insert(symbol, value);
    }

    pub fn get(&self, symbol: &Symbol) -> Option<&Value> {
        self.map.get(symbol)
    }

    pub fn pose(&self, symbol: &Symbol) -> Option<&Pose> {
        self.get(symbol).and_then(Value::as_pose)
    }

    pub fn vel_bias(&self, symbol: &Symbol) -> Option<&VelBias> {
        self.get(symbol).and_then(Value::as_vel_bias)
    }

    pub fn landmark(&self, symbol: &Symbol) -> Option<&Vector3<f64>> {
        self.get(symbol).and_then(Value::as_landmark)
    }

    pub fn plane(&self, symbol: &Symbol) -> Option<&Plane> {
        self.get(symbol).and_then(Value::as_plane)
    }

    pub fn remove(&mut self, symbol: &Symbol) -> Option<Value> {
        self.map.remove(symbol)
    }

    pub fn contains(&self, symbol: &Symbol) -> bool {
        self.map.contains_key(symbol)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Value)> {
        self.map.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Symbol> {
        self.map.keys()
    }

    /// Retracts a single variable in place.
    pub fn retract_symbol(&mut self, symbol: &Symbol, delta: &[f64]) {
        let v = self.map.get(symbol).expect("retract of unknown symbol");
        let updated = v.retract(delta);
        self.map.insert(*symbol, updated);
    }
}
