use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Rotational symmetry about a canonical axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryKind {
    #[serde(rename = "none")]
    None,
    C2,
    C4,
    #[serde(rename = "Cinf")]
    CInf,
}

impl SymmetryKind {
    /// Number of discrete symmetric rotations, `None` for the continuous class.
    pub fn order(&self) -> Option<usize> {
        match self {
            SymmetryKind::None => Some(1),
            SymmetryKind::C2 => Some(2),
            SymmetryKind::C4 => Some(4),
            SymmetryKind::CInf => None,
        }
    }
}

/// Symmetry class of an object instance. The axis is expressed in the frame
/// the ground-truth rotation acts on (the object as placed in the reference
/// scan).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryClass {
    #[serde(rename = "type")]
    pub kind: SymmetryKind,
    #[serde(with = "axis_serde")]
    pub axis: Vector3<f64>,
}

impl Default for SymmetryClass {
    fn default() -> Self {
        SymmetryClass::none()
    }
}

impl SymmetryClass {
    pub fn none() -> Self {
        SymmetryClass { kind: SymmetryKind::None, axis: Vector3::z() }
    }

    /// Builds a class with the axis normalized.
    pub fn new(kind: SymmetryKind, axis: Vector3<f64>) -> Result<Self> {
        let n = axis.norm();
        if !n.is_finite() || n < 1e-12 {
            return invalid("symmetry axis must be a finite non-zero vector");
        }
        Ok(SymmetryClass { kind, axis: axis / n })
    }

    pub fn is_normalized(&self) -> bool {
        (self.axis.norm() - 1.0).abs() < 1e-6
    }
}

mod axis_serde {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vector3::from(a))
    }
}
