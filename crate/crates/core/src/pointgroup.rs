//! Finite point groups in Schoenflies notation.
//!
//! Elements are generated by closing a small generator set under
//! multiplication. Conjugacy classes are computed from the generated
//! elements and then matched against literal character-table data, so every
//! built-in table is checked against the group it describes (see
//! [`verify_group`]).
//!
//! Axis convention for all built-in groups: the principal C4 axis is `z`,
//! cube faces are normal to the coordinate axes, the C2' axes of D4h lie
//! along `x`/`y` and the vertical mirror planes of C4v/C2v are the `xz` and
//! `yz` planes.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use nalgebra::{DMatrix, Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when comparing group-element matrices.
pub const ELEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("unknown point group `{0}` (supported: O_h, O, D_4h, C_4v, C_2v)")]
    UnknownGroup(String),
    #[error("matrix is not orthogonal (deviation {0:.3e})")]
    NotOrthogonal(f64),
    #[error("group `{group}` has no irrep named `{irrep}`")]
    UnknownIrrep { group: String, irrep: String },
    #[error("inconsistent group data for `{group}`: {reason}")]
    Construction { group: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperationKind {
    ProperRotation,
    /// Rotation composed with spatial inversion.
    ImproperRotation,
}

/// A proper or improper rotation of 3-space.
///
/// Improper operations are stored as `I * R(axis, angle)`, i.e. the matrix is
/// the negated proper rotation. A mirror with normal `n` is therefore
/// `improper(n, PI)` and the inversion is `improper(any, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryOperation {
    kind: OperationKind,
    axis: Vector3<f64>,
    angle: f64,
    matrix: Matrix3<f64>,
}

impl SymmetryOperation {
    pub fn identity() -> Self {
        Self {
            kind: OperationKind::ProperRotation,
            axis: Vector3::z(),
            angle: 0.0,
            matrix: Matrix3::identity(),
        }
    }

    pub fn inversion() -> Self {
        Self::improper(Vector3::z(), 0.0)
    }

    /// Proper rotation by `angle` (right-handed) about `axis`.
    pub fn rotation(axis: Vector3<f64>, angle: f64) -> Self {
        let axis = axis.normalize();
        let angle = angle.rem_euclid(TAU);
        let matrix = Rotation3::from_axis_angle(&Unit::new_unchecked(axis), angle).into_inner();
        Self {
            kind: OperationKind::ProperRotation,
            axis,
            angle,
            matrix,
        }
    }

    /// `I * R(axis, angle)`.
    pub fn improper(axis: Vector3<f64>, angle: f64) -> Self {
        let proper = Self::rotation(axis, angle);
        Self {
            kind: OperationKind::ImproperRotation,
            matrix: -proper.matrix,
            ..proper
        }
    }

    /// Mirror through the plane with the given normal.
    pub fn reflection(normal: Vector3<f64>) -> Self {
        Self::improper(normal, PI)
    }

    /// The horizontal mirror `IC_2z` (the `xy` plane).
    pub fn sigma_h() -> Self {
        Self::reflection(Vector3::z())
    }

    /// Recovers kind, axis and angle from an orthogonal matrix. The returned
    /// angle lies in `[0, PI]`.
    pub fn from_matrix(matrix: Matrix3<f64>) -> Result<Self, GroupError> {
        let dev = (matrix.transpose() * matrix - Matrix3::identity()).abs().max();
        if dev > 1e-8 {
            return Err(GroupError::NotOrthogonal(dev));
        }
        let det = matrix.determinant();
        let (kind, proper) = if det > 0.0 {
            (OperationKind::ProperRotation, matrix)
        } else {
            (OperationKind::ImproperRotation, -matrix)
        };
        let cos = ((proper.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        let mut angle = cos.acos();
        let anti = Vector3::new(
            proper[(2, 1)] - proper[(1, 2)],
            proper[(0, 2)] - proper[(2, 0)],
            proper[(1, 0)] - proper[(0, 1)],
        );
        let axis = if angle < 1e-9 {
            angle = 0.0;
            Vector3::z()
        } else if anti.norm() > 1e-6 {
            anti.normalize()
        } else {
            // angle ~ PI: R + I = 2 n n^T
            let sym = proper + Matrix3::identity();
            let col = (0..3)
                .map(|c| sym.column(c).into_owned())
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap_or_else(Vector3::z);
            let mut n = col.normalize();
            if let Some(first) = n.iter().copied().find(|c| c.abs() > 1e-9) {
                if first < 0.0 {
                    n = -n;
                }
            }
            n
        };
        Ok(Self {
            kind,
            axis,
            angle,
            matrix,
        })
    }

    pub fn kind(&self) -> OperationKind {
        self.kind
    }

    pub fn is_proper(&self) -> bool {
        self.kind == OperationKind::ProperRotation
    }

    pub fn axis(&self) -> &Vector3<f64> {
        &self.axis
    }

    /// Rotation angle of the proper part, in `[0, 2*PI)`.
    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn determinant(&self) -> f64 {
        match self.kind {
            OperationKind::ProperRotation => 1.0,
            OperationKind::ImproperRotation => -1.0,
        }
    }

    /// `self * other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_matrix(self.matrix * other.matrix).expect("product of orthogonal matrices")
    }

    pub fn inverse(&self) -> Self {
        Self::from_matrix(self.matrix.transpose()).expect("transpose of orthogonal matrix")
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.matrix - other.matrix).abs().max() <= tol
    }
}

impl Default for SymmetryOperation {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyClass {
    pub name: String,
    pub size: usize,
    pub representative: SymmetryOperation,
    /// Indices into [`PointGroup::elements`].
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// Even under inversion.
    G,
    /// Odd under inversion.
    U,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Irrep {
    /// Mulliken label, e.g. `T_1u`.
    pub name: String,
    /// Optional reference numbering; Mulliken labels are the primary key.
    pub number: Option<u32>,
    pub dimension: usize,
    pub parity: Parity,
    /// One value per conjugacy class, in class order.
    pub characters: Vec<f64>,
    /// Representation matrices indexed like [`PointGroup::elements`].
    pub matrices: Option<Vec<DMatrix<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointGroup {
    name: String,
    elements: Vec<SymmetryOperation>,
    generators: Vec<usize>,
    class_of: Vec<usize>,
    classes: Vec<ConjugacyClass>,
    irreps: Vec<Irrep>,
}

impl PointGroup {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[SymmetryOperation] {
        &self.elements
    }

    /// Indices of the generating elements.
    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn classes(&self) -> &[ConjugacyClass] {
        &self.classes
    }

    pub fn irreps(&self) -> &[Irrep] {
        &self.irreps
    }

    /// Class index of element `element`.
    pub fn class_of(&self, element: usize) -> usize {
        self.class_of[element]
    }

    pub fn find_element(&self, op: &SymmetryOperation) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| e.approx_eq(op, ELEMENT_TOL))
    }

    pub fn irrep_index(&self, name: &str) -> Result<usize, GroupError> {
        self.irreps
            .iter()
            .position(|ir| ir.name == name)
            .ok_or_else(|| GroupError::UnknownIrrep {
                group: self.name.clone(),
                irrep: name.to_string(),
            })
    }

    pub fn irrep(&self, name: &str) -> Result<&Irrep, GroupError> {
        self.irrep_index(name).map(|i| &self.irreps[i])
    }

    /// Character of irrep `irrep` at element `element`.
    pub fn character(&self, irrep: usize, element: usize) -> f64 {
        self.irreps[irrep].characters[self.class_of[element]]
    }

    /// Index of the product `elements[a] * elements[b]`.
    pub fn product(&self, a: usize, b: usize) -> Option<usize> {
        let m = self.elements[a].matrix * self.elements[b].matrix;
        self.elements
            .iter()
            .position(|e| (e.matrix - m).abs().max() <= ELEMENT_TOL)
    }

    pub fn identity_index(&self) -> usize {
        self.find_element(&SymmetryOperation::identity())
            .expect("groups always contain the identity")
    }

    /// Index of the horizontal mirror `IC_2z`, if the group contains it.
    pub fn sigma_h_index(&self) -> Option<usize> {
        self.find_element(&SymmetryOperation::sigma_h())
    }

    /// Replaces a single character-table entry. Intended for building
    /// deliberately broken tables when testing [`verify_group`].
    pub fn with_character(mut self, irrep: usize, class: usize, value: f64) -> Self {
        self.irreps[irrep].characters[class] = value;
        self
    }

    /// Drops all encoded irrep matrices, keeping only characters.
    pub fn without_matrices(mut self) -> Self {
        for ir in &mut self.irreps {
            ir.matrices = None;
        }
        self
    }

    pub fn to_json(&self) -> GroupJson {
        GroupJson {
            name: self.name.clone(),
            order: self.order(),
            classes: self
                .classes
                .iter()
                .map(|c| ClassJson {
                    name: c.name.clone(),
                    size: c.size,
                    representative: matrix_rows(&c.representative.matrix),
                })
                .collect(),
            irreps: self.irreps.iter().map(|ir| ir.name.clone()).collect(),
            characters: (0..self.classes.len())
                .map(|c| self.irreps.iter().map(|ir| ir.characters[c]).collect())
                .collect(),
            elements: self
                .elements
                .iter()
                .enumerate()
                .map(|(i, e)| ElementJson {
                    index: i,
                    class: self.classes[self.class_of[i]].name.clone(),
                    matrix: matrix_rows(&e.matrix),
                })
                .collect(),
        }
    }
}

fn matrix_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let clean = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
    [0, 1, 2].map(|r| [0, 1, 2].map(|c| clean(m[(r, c)])))
}

/// JSON export of a group. `characters` is a class-by-irrep grid: one row per
/// class (in `classes` order), one column per irrep (in `irreps` order).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupJson {
    pub name: String,
    pub order: usize,
    pub classes: Vec<ClassJson>,
    pub irreps: Vec<String>,
    pub characters: Vec<Vec<f64>>,
    pub elements: Vec<ElementJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassJson {
    pub name: String,
    pub size: usize,
    pub representative: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementJson {
    pub index: usize,
    pub class: String,
    pub matrix: [[f64; 3]; 3],
}

/// Irrep of O(3): multipole order `t` and polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct O3IrrepId {
    pub t: u32,
    pub s: Polarization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    /// `s = 1`
    TE,
    /// `s = 2`
    TM,
}

impl Polarization {
    pub fn index(self) -> u32 {
        match self {
            Polarization::TE => 1,
            Polarization::TM => 2,
        }
    }

    pub fn from_index(s: u32) -> Option<Self> {
        match s {
            1 => Some(Polarization::TE),
            2 => Some(Polarization::TM),
            _ => None,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::TE => f.write_str("TE"),
            Polarization::TM => f.write_str("TM"),
        }
    }
}

impl O3IrrepId {
    /// Panics if `t == 0`; use [`O3IrrepId::try_new`] for unchecked input.
    pub fn new(t: u32, s: Polarization) -> Self {
        Self::try_new(t, s).expect("multipole order must be >= 1")
    }

    pub fn try_new(t: u32, s: Polarization) -> Option<Self> {
        (t >= 1).then_some(Self { t, s })
    }

    pub fn te(t: u32) -> Self {
        Self::new(t, Polarization::TE)
    }

    pub fn tm(t: u32) -> Self {
        Self::new(t, Polarization::TM)
    }

    pub fn dimension(&self) -> usize {
        2 * self.t as usize + 1
    }

    /// Sign picked up under spatial inversion: `(-1)^t` for TM, `(-1)^(t+1)`
    /// for TE.
    pub fn inversion_parity(&self) -> f64 {
        let odd_t = self.t % 2 == 1;
        match (self.s, odd_t) {
            (Polarization::TM, true) | (Polarization::TE, false) => -1.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for O3IrrepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "O3(t={},{})", self.t, self.s)
    }
}

/// Character of the SO(3) weight-`t` irrep at a rotation by `angle`.
pub fn so3_character(t: u32, angle: f64) -> f64 {
    let half = 0.5 * angle;
    let denom = half.sin();
    if denom.abs() < 1e-6 {
        // removable singularity at angle = 0 (mod 2 pi)
        1.0 + 2.0 * (1..=t).map(|m| (m as f64 * angle).cos()).sum::<f64>()
    } else {
        ((t as f64 + 0.5) * angle).sin() / denom
    }
}

/// Character of the O(3) irrep `id` at `op`.
pub fn o3_character(id: O3IrrepId, op: &SymmetryOperation) -> f64 {
    let chi = so3_character(id.t, op.angle());
    if op.is_proper() {
        chi
    } else {
        id.inversion_parity() * chi
    }
}

/// Normalizes user spellings such as `Oh`, `O_h`, `d4h`.
pub fn canonical_group_name(name: &str) -> Option<&'static str> {
    let key: String = name
        .chars()
        .filter(|c| !matches!(c, '_' | ' ' | '-'))
        .collect::<String>()
        .to_ascii_lowercase();
    match key.as_str() {
        "oh" => Some("O_h"),
        "o" => Some("O"),
        "d4h" => Some("D_4h"),
        "c4v" => Some("C_4v"),
        "c2v" => Some("C_2v"),
        _ => None,
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["O_h", "O", "D_4h", "C_4v", "C_2v"]
}

/// Constructs one of the built-in groups.
pub fn builtin_group(name: &str) -> Result<PointGroup, GroupError> {
    let canonical =
        canonical_group_name(name).ok_or_else(|| GroupError::UnknownGroup(name.to_string()))?;
    let def = match canonical {
        "O_h" => oh_def(),
        "O" => o_def(),
        "D_4h" => d4h_def(),
        "C_4v" => c4v_def(),
        "C_2v" => c2v_def(),
        _ => unreachable!(),
    };
    build(def)
}

// ---------------------------------------------------------------------------
// literal group data

/// How the matrices of an irrep are produced.
#[derive(Debug, Clone, Copy)]
enum MatrixRule {
    /// 1-D: the character itself.
    Scalar,
    /// Polar vector `(x, y, z)`; optionally times `det`.
    Vector { pseudo: bool },
    /// The `(x, y)` block of a polar vector; optionally times `det`.
    PlanarVector { pseudo: bool },
    /// Quadratic forms `(2z^2 - x^2 - y^2, x^2 - y^2)`.
    QuadraticE { pseudo: bool },
    /// Quadratic forms `(yz, zx, xy)`.
    QuadraticT2 { pseudo: bool },
}

struct IrrepDef {
    name: &'static str,
    parity: Parity,
    characters: &'static [i32],
    rule: MatrixRule,
}

struct GroupDef {
    name: &'static str,
    generators: Vec<SymmetryOperation>,
    classes: Vec<(&'static str, usize, SymmetryOperation)>,
    irreps: Vec<IrrepDef>,
}

fn rot(axis: [f64; 3], angle: f64) -> SymmetryOperation {
    SymmetryOperation::rotation(Vector3::from(axis), angle)
}

fn imp(axis: [f64; 3], angle: f64) -> SymmetryOperation {
    SymmetryOperation::improper(Vector3::from(axis), angle)
}

const X: [f64; 3] = [1.0, 0.0, 0.0];
const Y: [f64; 3] = [0.0, 1.0, 0.0];
const Z: [f64; 3] = [0.0, 0.0, 1.0];
const XY: [f64; 3] = [1.0, 1.0, 0.0];
const XYZ: [f64; 3] = [1.0, 1.0, 1.0];
const C3: f64 = TAU / 3.0;

fn irrep(
    name: &'static str,
    parity: Parity,
    characters: &'static [i32],
    rule: MatrixRule,
) -> IrrepDef {
    IrrepDef {
        name,
        parity,
        characters,
        rule,
    }
}

fn oh_def() -> GroupDef {
    use MatrixRule::*;
    use Parity::{G, U};
    GroupDef {
        name: "O_h",
        generators: vec![rot(Z, FRAC_PI_2), rot(XYZ, C3), SymmetryOperation::inversion()],
        classes: vec![
            ("E", 1, SymmetryOperation::identity()),
            ("8C3", 8, rot(XYZ, C3)),
            ("6C2", 6, rot(XY, PI)),
            ("6C4", 6, rot(Z, FRAC_PI_2)),
            ("3C2", 3, rot(Z, PI)),
            ("i", 1, SymmetryOperation::inversion()),
            ("6S4", 6, imp(Z, FRAC_PI_2)),
            ("8S6", 8, imp(XYZ, C3)),
            ("3sh", 3, imp(Z, PI)),
            ("6sd", 6, imp(XY, PI)),
        ],
        irreps: vec![
            irrep("A_1g", G, &[1, 1, 1, 1, 1, 1, 1, 1, 1, 1], Scalar),
            irrep("A_2g", G, &[1, 1, -1, -1, 1, 1, -1, 1, 1, -1], Scalar),
            irrep("E_g", G, &[2, -1, 0, 0, 2, 2, 0, -1, 2, 0], QuadraticE { pseudo: false }),
            irrep("T_1g", G, &[3, 0, -1, 1, -1, 3, 1, 0, -1, -1], Vector { pseudo: true }),
            irrep("T_2g", G, &[3, 0, 1, -1, -1, 3, -1, 0, -1, 1], QuadraticT2 { pseudo: false }),
            irrep("A_1u", U, &[1, 1, 1, 1, 1, -1, -1, -1, -1, -1], Scalar),
            irrep("A_2u", U, &[1, 1, -1, -1, 1, -1, 1, -1, -1, 1], Scalar),
            irrep("E_u", U, &[2, -1, 0, 0, 2, -2, 0, 1, -2, 0], QuadraticE { pseudo: true }),
            irrep("T_1u", U, &[3, 0, -1, 1, -1, -3, -1, 0, 1, 1], Vector { pseudo: false }),
            irrep("T_2u", U, &[3, 0, 1, -1, -1, -3, 1, 0, 1, -1], QuadraticT2 { pseudo: true }),
        ],
    }
}

fn o_def() -> GroupDef {
    use MatrixRule::*;
    let n = Parity::None;
    GroupDef {
        name: "O",
        generators: vec![rot(Z, FRAC_PI_2), rot(XYZ, C3)],
        classes: vec![
            ("E", 1, SymmetryOperation::identity()),
            ("8C3", 8, rot(XYZ, C3)),
            ("6C2", 6, rot(XY, PI)),
            ("6C4", 6, rot(Z, FRAC_PI_2)),
            ("3C2", 3, rot(Z, PI)),
        ],
        irreps: vec![
            irrep("A_1", n, &[1, 1, 1, 1, 1], Scalar),
            irrep("A_2", n, &[1, 1, -1, -1, 1], Scalar),
            irrep("E", n, &[2, -1, 0, 0, 2], QuadraticE { pseudo: false }),
            irrep("T_1", n, &[3, 0, -1, 1, -1], Vector { pseudo: false }),
            irrep("T_2", n, &[3, 0, 1, -1, -1], QuadraticT2 { pseudo: false }),
        ],
    }
}

fn d4h_def() -> GroupDef {
    use MatrixRule::*;
    use Parity::{G, U};
    GroupDef {
        name: "D_4h",
        generators: vec![rot(Z, FRAC_PI_2), rot(X, PI), SymmetryOperation::inversion()],
        classes: vec![
            ("E", 1, SymmetryOperation::identity()),
            ("2C4", 2, rot(Z, FRAC_PI_2)),
            ("C2", 1, rot(Z, PI)),
            ("2C2'", 2, rot(X, PI)),
            ("2C2''", 2, rot(XY, PI)),
            ("i", 1, SymmetryOperation::inversion()),
            ("2S4", 2, imp(Z, FRAC_PI_2)),
            ("sh", 1, imp(Z, PI)),
            ("2sv", 2, imp(X, PI)),
            ("2sd", 2, imp(XY, PI)),
        ],
        irreps: vec![
            irrep("A_1g", G, &[1, 1, 1, 1, 1, 1, 1, 1, 1, 1], Scalar),
            irrep("A_2g", G, &[1, 1, 1, -1, -1, 1, 1, 1, -1, -1], Scalar),
            irrep("B_1g", G, &[1, -1, 1, 1, -1, 1, -1, 1, 1, -1], Scalar),
            irrep("B_2g", G, &[1, -1, 1, -1, 1, 1, -1, 1, -1, 1], Scalar),
            irrep("E_g", G, &[2, 0, -2, 0, 0, 2, 0, -2, 0, 0], PlanarVector { pseudo: true }),
            irrep("A_1u", U, &[1, 1, 1, 1, 1, -1, -1, -1, -1, -1], Scalar),
            irrep("A_2u", U, &[1, 1, 1, -1, -1, -1, -1, -1, 1, 1], Scalar),
            irrep("B_1u", U, &[1, -1, 1, 1, -1, -1, 1, -1, -1, 1], Scalar),
            irrep("B_2u", U, &[1, -1, 1, -1, 1, -1, 1, -1, 1, -1], Scalar),
            irrep("E_u", U, &[2, 0, -2, 0, 0, -2, 0, 2, 0, 0], PlanarVector { pseudo: false }),
        ],
    }
}

fn c4v_def() -> GroupDef {
    use MatrixRule::*;
    let n = Parity::None;
    GroupDef {
        name: "C_4v",
        generators: vec![rot(Z, FRAC_PI_2), imp(X, PI)],
        classes: vec![
            ("E", 1, SymmetryOperation::identity()),
            ("2C4", 2, rot(Z, FRAC_PI_2)),
            ("C2", 1, rot(Z, PI)),
            ("2sv", 2, imp(X, PI)),
            ("2sd", 2, imp(XY, PI)),
        ],
        irreps: vec![
            irrep("A_1", n, &[1, 1, 1, 1, 1], Scalar),
            irrep("A_2", n, &[1, 1, 1, -1, -1], Scalar),
            irrep("B_1", n, &[1, -1, 1, 1, -1], Scalar),
            irrep("B_2", n, &[1, -1, 1, -1, 1], Scalar),
            irrep("E", n, &[2, 0, -2, 0, 0], PlanarVector { pseudo: false }),
        ],
    }
}

fn c2v_def() -> GroupDef {
    use MatrixRule::*;
    let n = Parity::None;
    GroupDef {
        name: "C_2v",
        generators: vec![rot(Z, PI), imp(Y, PI)],
        classes: vec![
            ("E", 1, SymmetryOperation::identity()),
            ("C2", 1, rot(Z, PI)),
            ("sv(xz)", 1, imp(Y, PI)),
            ("sv(yz)", 1, imp(X, PI)),
        ],
        irreps: vec![
            irrep("A_1", n, &[1, 1, 1, 1], Scalar),
            irrep("A_2", n, &[1, 1, -1, -1], Scalar),
            irrep("B_1", n, &[1, -1, 1, -1], Scalar),
            irrep("B_2", n, &[1, -1, -1, 1], Scalar),
        ],
    }
}

// ---------------------------------------------------------------------------
// construction

fn close_under_multiplication(generators: &[SymmetryOperation]) -> Vec<SymmetryOperation> {
    let mut elements = vec![SymmetryOperation::identity()];
    let mut frontier = vec![0usize];
    while let Some(idx) = frontier.pop() {
        for g in generators {
            let candidate = g.compose(&elements[idx]);
            if !elements
                .iter()
                .any(|e| e.approx_eq(&candidate, ELEMENT_TOL))
            {
                elements.push(candidate);
                frontier.push(elements.len() - 1);
            }
            // hard stop for malformed generator sets
            assert!(elements.len() <= 1024, "generator set does not close");
        }
    }
    elements
}

fn conjugation_orbits(elements: &[SymmetryOperation]) -> Vec<Vec<usize>> {
    let find = |m: &Matrix3<f64>| {
        elements
            .iter()
            .position(|e| (e.matrix - m).abs().max() <= ELEMENT_TOL)
    };
    let mut assigned = vec![false; elements.len()];
    let mut orbits = Vec::new();
    for x in 0..elements.len() {
        if assigned[x] {
            continue;
        }
        let mut orbit = Vec::new();
        for g in elements {
            let conj = g.matrix * elements[x].matrix * g.matrix.transpose();
            if let Some(j) = find(&conj) {
                if !assigned[j] {
                    assigned[j] = true;
                    orbit.push(j);
                }
            }
        }
        orbit.sort_unstable();
        orbits.push(orbit);
    }
    orbits
}

fn quadratic_basis(rule: MatrixRule) -> Vec<Matrix3<f64>> {
    let s6 = 6f64.sqrt();
    let s2 = 2f64.sqrt();
    match rule {
        MatrixRule::QuadraticE { .. } => vec![
            Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 2.0)) / s6,
            Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 0.0)) / s2,
        ],
        MatrixRule::QuadraticT2 { .. } => {
            let sym = |a: usize, b: usize| {
                let mut m = Matrix3::zeros();
                m[(a, b)] = 1.0 / s2;
                m[(b, a)] = 1.0 / s2;
                m
            };
            vec![sym(1, 2), sym(2, 0), sym(0, 1)]
        }
        _ => Vec::new(),
    }
}

fn irrep_matrix(rule: MatrixRule, op: &SymmetryOperation, character: f64) -> DMatrix<f64> {
    let m = op.matrix;
    let det = op.determinant();
    let sign = |pseudo: bool| if pseudo { det } else { 1.0 };
    match rule {
        MatrixRule::Scalar => DMatrix::from_element(1, 1, character),
        MatrixRule::Vector { pseudo } => {
            DMatrix::from_fn(3, 3, |r, c| sign(pseudo) * m[(r, c)])
        }
        MatrixRule::PlanarVector { pseudo } => {
            DMatrix::from_fn(2, 2, |r, c| sign(pseudo) * m[(r, c)])
        }
        MatrixRule::QuadraticE { pseudo } | MatrixRule::QuadraticT2 { pseudo } => {
            // f(r) = r^T Q r transforms as Q -> M Q M^T
            let basis = quadratic_basis(rule);
            let n = basis.len();
            DMatrix::from_fn(n, n, |r, c| {
                let image = m * basis[c] * m.transpose();
                sign(pseudo) * basis[r].component_mul(&image).sum()
            })
        }
    }
}

fn build(def: GroupDef) -> Result<PointGroup, GroupError> {
    let err = |reason: String| GroupError::Construction {
        group: def.name.to_string(),
        reason,
    };
    let elements = close_under_multiplication(&def.generators);
    let generators = def
        .generators
        .iter()
        .map(|g| {
            elements
                .iter()
                .position(|e| e.approx_eq(g, ELEMENT_TOL))
                .expect("generators are elements")
        })
        .collect();
    let orbits = conjugation_orbits(&elements);
    if orbits.len() != def.classes.len() {
        return Err(err(format!(
            "{} conjugacy classes generated, {} encoded",
            orbits.len(),
            def.classes.len()
        )));
    }
    let mut classes = Vec::with_capacity(def.classes.len());
    let mut class_of = vec![usize::MAX; elements.len()];
    for (ci, (name, size, rep)) in def.classes.iter().enumerate() {
        let rep_idx = elements
            .iter()
            .position(|e| e.approx_eq(rep, ELEMENT_TOL))
            .ok_or_else(|| err(format!("representative of class {name} is not an element")))?;
        let orbit = orbits
            .iter()
            .find(|o| o.contains(&rep_idx))
            .expect("every element lies in an orbit");
        if orbit.len() != *size {
            return Err(err(format!(
                "class {name} has {} members, {size} encoded",
                orbit.len()
            )));
        }
        for &m in orbit {
            class_of[m] = ci;
        }
        classes.push(ConjugacyClass {
            name: name.to_string(),
            size: *size,
            representative: rep.clone(),
            members: orbit.clone(),
        });
    }
    if class_of.contains(&usize::MAX) {
        return Err(err("two encoded classes share a representative orbit".into()));
    }
    let irreps = def
        .irreps
        .iter()
        .map(|d| {
            let characters: Vec<f64> = d.characters.iter().map(|&c| c as f64).collect();
            let matrices = elements
                .iter()
                .enumerate()
                .map(|(i, e)| irrep_matrix(d.rule, e, characters[class_of[i]]))
                .collect();
            Irrep {
                name: d.name.to_string(),
                number: None,
                dimension: d.characters[0] as usize,
                parity: d.parity,
                characters,
                matrices: Some(matrices),
            }
        })
        .collect();
    Ok(PointGroup {
        name: def.name.to_string(),
        elements,
        generators,
        class_of,
        classes,
        irreps,
    })
}

// ---------------------------------------------------------------------------
// validation

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotClosed { a: usize, b: usize },
    MissingInverse(usize),
    ClassPartition(String),
    ClassNotConjugate { class: String, member: usize },
    ClassSizeSum { sum: usize, order: usize },
    IrrepCount { irreps: usize, classes: usize },
    IdentityCharacter { irrep: String, character: f64, dimension: usize },
    DimensionSum { sum: usize, order: usize },
    RowOrthogonality { p: String, q: String, value: f64, expected: f64 },
    ColumnOrthogonality { i: String, j: String, value: f64, expected: f64 },
    MatrixTrace { irrep: String, element: usize, trace: f64, character: f64 },
    MatrixNotOrthogonal { irrep: String, element: usize },
    NotHomomorphism { irrep: String, a: usize, b: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotClosed { a, b } => write!(f, "product of elements {a} and {b} is not in the group"),
            Violation::MissingInverse(a) => write!(f, "element {a} has no inverse in the group"),
            Violation::ClassPartition(msg) => write!(f, "class partition: {msg}"),
            Violation::ClassNotConjugate { class, member } => {
                write!(f, "element {member} in class {class} is not conjugate to its representative")
            }
            Violation::ClassSizeSum { sum, order } => write!(f, "class sizes sum to {sum}, order is {order}"),
            Violation::IrrepCount { irreps, classes } => write!(f, "{irreps} irreps but {classes} classes"),
            Violation::IdentityCharacter { irrep, character, dimension } => {
                write!(f, "{irrep}: chi(E) = {character} but dimension is {dimension}")
            }
            Violation::DimensionSum { sum, order } => write!(f, "sum of squared dimensions {sum} != order {order}"),
            Violation::RowOrthogonality { p, q, value, expected } => {
                write!(f, "row orthogonality ({p}, {q}): {value} (expected {expected})")
            }
            Violation::ColumnOrthogonality { i, j, value, expected } => {
                write!(f, "column orthogonality ({i}, {j}): {value} (expected {expected})")
            }
            Violation::MatrixTrace { irrep, element, trace, character } => {
                write!(f, "{irrep}: trace at element {element} is {trace}, character {character}")
            }
            Violation::MatrixNotOrthogonal { irrep, element } => {
                write!(f, "{irrep}: matrix at element {element} is not orthogonal")
            }
            Violation::NotHomomorphism { irrep, a, b } => {
                write!(f, "{irrep}: Gamma({a}) Gamma({b}) != Gamma({a}*{b})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks group axioms, the class partition, character orthogonality and
/// any encoded irrep matrices. Never fails; all problems are collected.
pub fn verify_group(group: &PointGroup) -> ValidationReport {
    const TOL: f64 = 1e-10;
    let mut v = Vec::new();
    let g = group.order();

    let mut table = vec![vec![None; g]; g];
    for (a, row) in table.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = group.product(a, b);
            if cell.is_none() {
                v.push(Violation::NotClosed { a, b });
            }
        }
    }
    let identity = group.find_element(&SymmetryOperation::identity());
    if identity.is_none() {
        v.push(Violation::ClassPartition("identity missing".into()));
    }
    for (a, row) in table.iter().enumerate() {
        if identity.is_some() && !row.contains(&identity) {
            v.push(Violation::MissingInverse(a));
        }
    }

    // class partition
    let mut seen = vec![0usize; g];
    for class in &group.classes {
        if class.members.len() != class.size {
            v.push(Violation::ClassPartition(format!(
                "class {} lists {} members but size {}",
                class.name,
                class.members.len(),
                class.size
            )));
        }
        for &m in &class.members {
            if m < g {
                seen[m] += 1;
            }
        }
        let Some(rep) = group.find_element(&class.representative) else {
            v.push(Violation::ClassPartition(format!(
                "representative of {} is not an element",
                class.name
            )));
            continue;
        };
        for &m in &class.members {
            let conjugate = group.elements.iter().any(|x| {
                (x.matrix * group.elements[rep].matrix * x.matrix.transpose()
                    - group.elements[m].matrix)
                    .abs()
                    .max()
                    <= ELEMENT_TOL
            });
            if !conjugate {
                v.push(Violation::ClassNotConjugate {
                    class: class.name.clone(),
                    member: m,
                });
            }
        }
    }
    if let Some(idx) = seen.iter().position(|&c| c != 1) {
        v.push(Violation::ClassPartition(format!(
            "element {idx} appears in {} classes",
            seen[idx]
        )));
    }
    let size_sum: usize = group.classes.iter().map(|c| c.size).sum();
    if size_sum != g {
        v.push(Violation::ClassSizeSum { sum: size_sum, order: g });
    }
    if group.irreps.len() != group.classes.len() {
        v.push(Violation::IrrepCount {
            irreps: group.irreps.len(),
            classes: group.classes.len(),
        });
    }

    let identity_class = identity.map(|i| group.class_of[i]);
    let dim_sum: usize = group.irreps.iter().map(|ir| ir.dimension * ir.dimension).sum();
    if dim_sum != g {
        v.push(Violation::DimensionSum { sum: dim_sum, order: g });
    }
    if let Some(ic) = identity_class {
        for ir in &group.irreps {
            if (ir.characters[ic] - ir.dimension as f64).abs() > TOL {
                v.push(Violation::IdentityCharacter {
                    irrep: ir.name.clone(),
                    character: ir.characters[ic],
                    dimension: ir.dimension,
                });
            }
        }
    }

    for (p, a) in group.irreps.iter().enumerate() {
        for b in &group.irreps[p..] {
            let value: f64 = group
                .classes
                .iter()
                .enumerate()
                .map(|(c, class)| class.size as f64 * a.characters[c] * b.characters[c])
                .sum();
            let expected = if a.name == b.name { g as f64 } else { 0.0 };
            if (value - expected).abs() > TOL {
                v.push(Violation::RowOrthogonality {
                    p: a.name.clone(),
                    q: b.name.clone(),
                    value,
                    expected,
                });
            }
        }
    }
    for i in 0..group.classes.len() {
        for j in i..group.classes.len() {
            let value: f64 = group
                .irreps
                .iter()
                .map(|ir| ir.characters[i] * ir.characters[j])
                .sum();
            let expected = if i == j {
                g as f64 / group.classes[i].size as f64
            } else {
                0.0
            };
            if (value - expected).abs() > TOL {
                v.push(Violation::ColumnOrthogonality {
                    i: group.classes[i].name.clone(),
                    j: group.classes[j].name.clone(),
                    value,
                    expected,
                });
            }
        }
    }

    for ir in &group.irreps {
        let Some(mats) = &ir.matrices else { continue };
        for (e, m) in mats.iter().enumerate() {
            let chi = ir.characters[group.class_of[e]];
            if (m.trace() - chi).abs() > 1e-9 {
                v.push(Violation::MatrixTrace {
                    irrep: ir.name.clone(),
                    element: e,
                    trace: m.trace(),
                    character: chi,
                });
            }
            let eye = DMatrix::<f64>::identity(m.nrows(), m.ncols());
            if (m.transpose() * m - eye).abs().max() > 1e-9 {
                v.push(Violation::MatrixNotOrthogonal {
                    irrep: ir.name.clone(),
                    element: e,
                });
            }
        }
        for a in 0..g {
            for b in 0..g {
                let Some(ab) = table[a][b] else { continue };
                if (&mats[a] * &mats[b] - &mats[ab]).abs().max() > 1e-9 {
                    v.push(Violation::NotHomomorphism {
                        irrep: ir.name.clone(),
                        a,
                        b,
                    });
                }
            }
        }
    }

    ValidationReport { violations: v }
}
