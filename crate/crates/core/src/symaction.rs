//! Representations of a point group on discretized coefficient spaces and
//! the projection machinery built on them.
//!
//! The projector onto irrep `p` is `P_p = (d_p / g) sum_T chi_p(T) D(T)`.
//! With an orthogonal action the projectors are orthogonal, idempotent,
//! mutually annihilating and sum to the identity.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointgroup::{PointGroup, SymmetryOperation};

/// Default weight threshold for calling a vector a basis function of a
/// single irrep.
pub const CLASSIFY_THRESHOLD: f64 = 1.0 - 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymactionError {
    #[error("point set is not symmetric: element {element} maps point {point} outside the set")]
    NotSymmetric { element: usize, point: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("basis is not isotypic: {0}")]
    NotIsotypic(String),
    #[error("trace {trace} of the irrep matrix differs from the character {character}")]
    CharacterMismatch { trace: f64, character: f64 },
    #[error("point set is not symmetric under the plane operation at point {0}")]
    PlaneNotSymmetric(usize),
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("a standalone plane operation needs a point-set action")]
    NoPointSet,
}

/// How the sampled field transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// One value per point.
    Scalar,
    /// Polar 3-vector per point, `v -> M v`.
    Vector,
    /// Axial 3-vector per point, `v -> det(M) M v`.
    Axial,
}

impl FieldKind {
    pub fn components(self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector | FieldKind::Axial => 3,
        }
    }

    fn block(self, m: &Matrix3<f64>) -> DMatrix<f64> {
        match self {
            FieldKind::Scalar => DMatrix::from_element(1, 1, 1.0),
            FieldKind::Vector => DMatrix::from_fn(3, 3, |r, c| m[(r, c)]),
            FieldKind::Axial => {
                let det = m.determinant().signum();
                DMatrix::from_fn(3, 3, |r, c| det * m[(r, c)])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PointField {
    points: Vec<Vector3<f64>>,
    kind: FieldKind,
    tolerance: f64,
}

impl PointField {
    /// `D(op)`, or the first point whose image is missing.
    fn operator(&self, m: &Matrix3<f64>) -> Result<DMatrix<f64>, usize> {
        let c = self.kind.components();
        let n = self.points.len();
        let mut d = DMatrix::zeros(n * c, n * c);
        let block = self.kind.block(m);
        for (j, x) in self.points.iter().enumerate() {
            // point j is carried to point i = M x_j
            let image = m * x;
            let i = self
                .points
                .iter()
                .position(|p| (p - image).norm() <= self.tolerance)
                .ok_or(j)?;
            d.view_mut((i * c, j * c), (c, c)).copy_from(&block);
        }
        Ok(d)
    }
}

/// A group acting by orthogonal matrices on an `N`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAction {
    group: PointGroup,
    operators: Vec<DMatrix<f64>>,
    field: Option<PointField>,
}

impl GroupAction {
    /// Induced action on a field sampled at `points`:
    /// `(D(T) v)(x_i) = M_T v(M_T^{-1} x_i)`.
    pub fn from_points(
        group: &PointGroup,
        points: &[Vector3<f64>],
        kind: FieldKind,
        tolerance: f64,
    ) -> Result<Self, SymactionError> {
        if points.is_empty() {
            return Err(SymactionError::InvalidAction("empty point set".into()));
        }
        let field = PointField {
            points: points.to_vec(),
            kind,
            tolerance,
        };
        let operators = group
            .elements()
            .iter()
            .enumerate()
            .map(|(e, op)| {
                field
                    .operator(op.matrix())
                    .map_err(|point| SymactionError::NotSymmetric { element: e, point })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            group: group.clone(),
            operators,
            field: Some(field),
        })
    }

    /// Action given by explicit matrices, one per group element in the
    /// group's element order.
    pub fn from_matrices(
        group: &PointGroup,
        operators: Vec<DMatrix<f64>>,
    ) -> Result<Self, SymactionError> {
        if operators.len() != group.order() {
            return Err(SymactionError::InvalidAction(format!(
                "{} matrices for a group of order {}",
                operators.len(),
                group.order()
            )));
        }
        let n = operators[0].nrows();
        let action = Self {
            group: group.clone(),
            operators,
            field: None,
        };
        for (e, d) in action.operators.iter().enumerate() {
            if d.nrows() != n || d.ncols() != n {
                return Err(SymactionError::InvalidAction(format!(
                    "matrix {e} is {}x{}, expected {n}x{n}",
                    d.nrows(),
                    d.ncols()
                )));
            }
            if (d.transpose() * d - DMatrix::identity(n, n)).abs().max() > 1e-8 {
                return Err(SymactionError::InvalidAction(format!("matrix {e} is not orthogonal")));
            }
        }
        let id = group.identity_index();
        if (&action.operators[id] - DMatrix::identity(n, n)).abs().max() > 1e-8 {
            return Err(SymactionError::InvalidAction("D(E) is not the identity".into()));
        }
        let gens = group.generators();
        for &a in gens {
            for &b in gens {
                let ab = group
                    .product(a, b)
                    .ok_or_else(|| SymactionError::InvalidAction("group is not closed".into()))?;
                let lhs = &action.operators[a] * &action.operators[b];
                if (lhs - &action.operators[ab]).abs().max() > 1e-8 {
                    return Err(SymactionError::InvalidAction(format!(
                        "D({a}) D({b}) != D({ab})"
                    )));
                }
            }
        }
        Ok(action)
    }

    pub fn group(&self) -> &PointGroup {
        &self.group
    }

    pub fn dimension(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn operator(&self, element: usize) -> &DMatrix<f64> {
        &self.operators[element]
    }

    pub fn operators(&self) -> &[DMatrix<f64>] {
        &self.operators
    }

    /// `D(op)` for an operation that need not belong to the group; only
    /// available for point-set actions.
    pub fn operator_for(&self, op: &SymmetryOperation) -> Result<DMatrix<f64>, SymactionError> {
        if let Some(e) = self.group.find_element(op) {
            return Ok(self.operators[e].clone());
        }
        let field = self.field.as_ref().ok_or(SymactionError::NoPointSet)?;
        field
            .operator(op.matrix())
            .map_err(SymactionError::PlaneNotSymmetric)
    }

    pub fn projector(&self, irrep: usize) -> DMatrix<f64> {
        let ir = &self.group.irreps()[irrep];
        let scale = ir.dimension as f64 / self.group.order() as f64;
        let n = self.dimension();
        let mut p = DMatrix::zeros(n, n);
        for (e, d) in self.operators.iter().enumerate() {
            let chi = self.group.character(irrep, e);
            if chi != 0.0 {
                p += d * (scale * chi);
            }
        }
        p
    }

    pub fn projectors(&self) -> Vec<DMatrix<f64>> {
        (0..self.group.irreps().len()).map(|p| self.projector(p)).collect()
    }

    fn check_dim(&self, got: usize) -> Result<(), SymactionError> {
        if got != self.dimension() {
            return Err(SymactionError::DimensionMismatch {
                expected: self.dimension(),
                got,
            });
        }
        Ok(())
    }
}

/// Per-irrep decomposition of one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionReport {
    /// `(irrep, ||P_p v|| / ||v||)` in the group's irrep order.
    pub weights: Vec<(String, f64)>,
    pub dominant: String,
    /// `P_p v` for each irrep.
    pub components: Vec<DVector<f64>>,
}

impl ProjectionReport {
    /// The irrep `v` is a basis function of, if its weight reaches
    /// `threshold`.
    pub fn classify(&self, threshold: f64) -> Option<&str> {
        self.weights
            .iter()
            .find(|(_, w)| *w >= threshold)
            .map(|(n, _)| n.as_str())
    }

    pub fn weight(&self, irrep: &str) -> f64 {
        self.weights
            .iter()
            .find(|(n, _)| n == irrep)
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    }
}

pub fn project(v: &DVector<f64>, action: &GroupAction) -> Result<ProjectionReport, SymactionError> {
    action.check_dim(v.len())?;
    let norm = v.norm();
    if norm == 0.0 {
        return Err(SymactionError::ZeroVector);
    }
    let group = action.group();
    let components: Vec<DVector<f64>> = (0..group.irreps().len())
        .map(|p| action.projector(p) * v)
        .collect();
    let weights: Vec<(String, f64)> = group
        .irreps()
        .iter()
        .zip(&components)
        .map(|(ir, c)| (ir.name.clone(), (c.norm() / norm).min(1.0)))
        .collect();
    let dominant = weights
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(n, _)| n.clone())
        .unwrap_or_default();
    Ok(ProjectionReport {
        weights,
        dominant,
        components,
    })
}

/// `Gamma_mu_nu(T) = <psi_mu, D(T) psi_nu>` for an orthonormal basis of one
/// copy of an irrep. Returns the irrep name and the matrix.
pub fn irrep_matrix_entries(
    basis: &[DVector<f64>],
    action: &GroupAction,
    element: usize,
) -> Result<(String, DMatrix<f64>), SymactionError> {
    if basis.is_empty() {
        return Err(SymactionError::NotIsotypic("empty basis".into()));
    }
    for b in basis {
        action.check_dim(b.len())?;
    }
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            if (a.dot(b) - expected).abs() > 1e-6 {
                return Err(SymactionError::NotIsotypic("basis is not orthonormal".into()));
            }
        }
    }
    let mut label: Option<String> = None;
    for (i, b) in basis.iter().enumerate() {
        let report = project(b, action)?;
        let name = report
            .classify(CLASSIFY_THRESHOLD)
            .ok_or_else(|| SymactionError::NotIsotypic(format!("vector {i} is mixed")))?
            .to_string();
        match &label {
            None => label = Some(name),
            Some(l) if *l != name => {
                return Err(SymactionError::NotIsotypic(format!(
                    "vector {i} belongs to {name}, not {l}"
                )))
            }
            _ => {}
        }
    }
    let name = label.expect("non-empty basis");
    let group = action.group();
    let p = group.irrep_index(&name).expect("label comes from the group");
    let dim = group.irreps()[p].dimension;
    if basis.len() != dim {
        return Err(SymactionError::NotIsotypic(format!(
            "{} vectors for the {dim}-dimensional irrep {name}",
            basis.len()
        )));
    }
    let d = action.operator(element);
    let m = DMatrix::from_fn(dim, dim, |r, c| basis[r].dot(&(d * &basis[c])));
    let character = group.character(p, element);
    if (m.trace() - character).abs() > 1e-6 {
        return Err(SymactionError::CharacterMismatch {
            trace: m.trace(),
            character,
        });
    }
    Ok((name, m))
}

/// The plane operation used by [`parity_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum PlaneOp {
    /// Index of a group element.
    Element(usize),
    /// Any orthogonal 3x3 operation (point-set actions only).
    Operation(SymmetryOperation),
}

impl Default for PlaneOp {
    fn default() -> Self {
        PlaneOp::Operation(SymmetryOperation::sigma_h())
    }
}

/// `<v, D(plane) v> / <v, v>`, optionally in the inner product weighted by
/// `weight`. `-1` means odd under the mirror, `+1` even.
pub fn parity_check(
    v: &DVector<f64>,
    action: &GroupAction,
    plane: &PlaneOp,
    weight: Option<&DMatrix<f64>>,
) -> Result<f64, SymactionError> {
    action.check_dim(v.len())?;
    let d = match plane {
        PlaneOp::Element(e) => action.operator(*e).clone(),
        PlaneOp::Operation(op) => action.operator_for(op)?,
    };
    let image = d * v;
    let (num, den) = match weight {
        Some(w) => {
            action.check_dim(w.nrows())?;
            (v.dot(&(w * &image)), v.dot(&(w * v)))
        }
        None => (v.dot(&image), v.dot(v)),
    };
    if den == 0.0 {
        return Err(SymactionError::ZeroVector);
    }
    Ok(num / den)
}

/// Orbit of `seed` under the group, deduplicated within `tolerance`.
pub fn orbit(group: &PointGroup, seed: &Vector3<f64>, tolerance: f64) -> Vec<Vector3<f64>> {
    let mut out: Vec<Vector3<f64>> = Vec::new();
    for op in group.elements() {
        let p = op.matrix() * seed;
        if !out.iter().any(|q| (q - p).norm() <= tolerance) {
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointgroup::builtin_group;
    use std::f64::consts::FRAC_PI_2;

    fn square() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(-1.0, 0.0, 0.0),
            Vector3::new(0.0, -1.0, 0.0),
        ]
    }

    fn z_field(values: [f64; 4]) -> DVector<f64> {
        let mut v = DVector::zeros(12);
        for (i, x) in values.iter().enumerate() {
            v[3 * i + 2] = *x;
        }
        v
    }

    #[test]
    fn c4_acts_as_cyclic_shift_times_rotation() {
        let c4v = builtin_group("C_4v").unwrap();
        let action = GroupAction::from_points(&c4v, &square(), FieldKind::Vector, 1e-9).unwrap();
        let c4 = c4v
            .find_element(&SymmetryOperation::rotation(Vector3::z(), FRAC_PI_2))
            .unwrap();
        let d = action.operator(c4);
        let rz = SymmetryOperation::rotation(Vector3::z(), FRAC_PI_2);
        // point j goes to point j+1
        for j in 0..4 {
            let i = (j + 1) % 4;
            let block = d.view((3 * i, 3 * j), (3, 3));
            assert!((block - rz.matrix()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_action_is_the_matrix() {
        let oh = builtin_group("O_h").unwrap();
        let action =
            GroupAction::from_points(&oh, &[Vector3::zeros()], FieldKind::Vector, 1e-9).unwrap();
        for (e, op) in oh.elements().iter().enumerate() {
            let d = action.operator(e);
            assert!((d - DMatrix::from_fn(3, 3, |r, c| op.matrix()[(r, c)])).abs().max() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_point_set_is_rejected() {
        let c4v = builtin_group("C_4v").unwrap();
        let mut pts = square();
        pts[2].x -= 10.0 * 1e-6;
        let err = GroupAction::from_points(&c4v, &pts, FieldKind::Vector, 1e-6).unwrap_err();
        assert!(matches!(err, SymactionError::NotSymmetric { .. }));
    }

    #[test]
    fn symmetric_z_field_is_a1() {
        let c4v = builtin_group("C_4v").unwrap();
        let action = GroupAction::from_points(&c4v, &square(), FieldKind::Vector, 1e-9).unwrap();
        let r = project(&z_field([1.0; 4]), &action).unwrap();
        assert_eq!(r.classify(CLASSIFY_THRESHOLD), Some("A_1"));
        for (name, w) in &r.weights {
            if name != "A_1" {
                assert!(w.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn alternating_z_field_is_b1() {
        // corners on the axes: +,-,+,- is even under sigma_v (xz, yz planes)
        // and odd under C4, i.e. B_1 in the pinned convention
        let c4v = builtin_group("C_4v").unwrap();
        let action = GroupAction::from_points(&c4v, &square(), FieldKind::Vector, 1e-9).unwrap();
        let r = project(&z_field([1.0, -1.0, 1.0, -1.0]), &action).unwrap();
        assert_eq!(r.classify(CLASSIFY_THRESHOLD), Some("B_1"));
        let p = action.projector(c4v.irrep_index("B_1").unwrap());
        assert!((&p * &p - &p).abs().max() < 1e-12);
    }

    #[test]
    fn e_pair_matrix_at_c4_has_zero_trace() {
        let c4v = builtin_group("C_4v").unwrap();
        let action = GroupAction::from_points(&c4v, &square(), FieldKind::Vector, 1e-9).unwrap();
        let e1 = z_field([1.0, 0.0, -1.0, 0.0]) / 2f64.sqrt();
        let e2 = z_field([0.0, 1.0, 0.0, -1.0]) / 2f64.sqrt();
        let c4 = c4v
            .find_element(&SymmetryOperation::rotation(Vector3::z(), FRAC_PI_2))
            .unwrap();
        let (name, m) = irrep_matrix_entries(&[e1.clone(), e2.clone()], &action, c4).unwrap();
        assert_eq!(name, "E");
        assert!(m.trace().abs() < 1e-12);
        let (_, id) = irrep_matrix_entries(&[e1, e2], &action, c4v.identity_index()).unwrap();
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn one_dimensional_identity_entry() {
        let c4v = builtin_group("C_4v").unwrap();
        let action = GroupAction::from_points(&c4v, &square(), FieldKind::Vector, 1e-9).unwrap();
        let v = z_field([0.5; 4]);
        let (_, m) = irrep_matrix_entries(&[v], &action, c4v.identity_index()).unwrap();
        assert_eq!(m.shape(), (1, 1));
        assert!((m[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_basis_is_rejected() {
        let c4v = builtin_group("C_4v").unwrap();
        let action = GroupAction::from_points(&c4v, &square(), FieldKind::Vector, 1e-9).unwrap();
        let v = z_field([1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            irrep_matrix_entries(&[v], &action, 0),
            Err(SymactionError::NotIsotypic(_))
        ));
    }

    #[test]
    fn parity_of_normal_and_tangential_fields() {
        let c4v = builtin_group("C_4v").unwrap();
        let action = GroupAction::from_points(&c4v, &square(), FieldKind::Vector, 1e-9).unwrap();
        let plane = PlaneOp::default();
        let normal = z_field([1.0; 4]);
        assert!((parity_check(&normal, &action, &plane, None).unwrap() + 1.0).abs() < 1e-12);
        let mut tangential = DVector::zeros(12);
        for (i, p) in square().iter().enumerate() {
            tangential[3 * i] = -p.y;
            tangential[3 * i + 1] = p.x;
        }
        assert!((parity_check(&tangential, &action, &plane, None).unwrap() - 1.0).abs() < 1e-12);
        let mixed = normal.normalize() + tangential.normalize();
        assert!(parity_check(&mixed, &action, &plane, None).unwrap().abs() < 1e-12);
    }

    #[test]
    fn standalone_plane_needs_points() {
        let c4v = builtin_group("C_4v").unwrap();
        let pts = GroupAction::from_points(&c4v, &square(), FieldKind::Scalar, 1e-9).unwrap();
        let explicit = GroupAction::from_matrices(&c4v, pts.operators().to_vec()).unwrap();
        let v = DVector::from_element(4, 1.0);
        assert_eq!(
            parity_check(&v, &explicit, &PlaneOp::default(), None),
            Err(SymactionError::NoPointSet)
        );
        assert!((parity_check(&v, &pts, &PlaneOp::default(), None).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_matrices_are_validated() {
        let c4v = builtin_group("C_4v").unwrap();
        let pts = GroupAction::from_points(&c4v, &square(), FieldKind::Scalar, 1e-9).unwrap();
        let mut mats = pts.operators().to_vec();
        mats.swap(1, 2);
        assert!(GroupAction::from_matrices(&c4v, mats).is_err());
        assert!(GroupAction::from_matrices(&c4v, vec![DMatrix::identity(4, 4)]).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let c4v = builtin_group("C_4v").unwrap();
        let action = GroupAction::from_points(&c4v, &square(), FieldKind::Vector, 1e-9).unwrap();
        assert_eq!(
            project(&DVector::from_element(5, 1.0), &action),
            Err(SymactionError::DimensionMismatch { expected: 12, got: 5 })
        );
    }
}
