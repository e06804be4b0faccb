//! Subduction of a parent representation onto the irreps of a subgroup.
//!
//! Multiplicities are `n_p = (1/g) sum_T chi(T) chi_p(T)` over the child
//! elements, returned as exact rationals. A [`ParityFilter`] first restricts
//! the parent representation to the basis slots whose diagonal entry at the
//! plane operation (`IC_2z` by default) has the requested sign; when the
//! plane operation does not commute with the child group this yields
//! fractional multiplicities, which are reported rather than rounded.

use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointgroup::{
    builtin_group, o3_character, GroupError, O3IrrepId, PointGroup, SymmetryOperation,
};

pub type Multiplicity = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubductionError {
    #[error("{child} is not a subgroup of {parent}")]
    NotASubgroup { child: String, parent: String },
    #[error("irrep {irrep} of {group} has no representation matrices")]
    MissingIrrepMatrix { group: String, irrep: String },
    #[error("plane operation is not an element of {0}")]
    PlaneOpNotInGroup(String),
    #[error("multiplicity {0} is not a small-denominator rational")]
    NonRational(f64),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Which mirror-parity slots of the parent survive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keep {
    /// Slots with `Gamma_mu_mu(plane) = -1` (PEC-plane compatible).
    Odd,
    /// Slots with `Gamma_mu_mu(plane) = +1`.
    Even,
    None,
}

impl Keep {
    fn sign(self) -> Option<f64> {
        match self {
            Keep::Odd => Some(-1.0),
            Keep::Even => Some(1.0),
            Keep::None => None,
        }
    }
}

impl std::str::FromStr for Keep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "odd" => Ok(Keep::Odd),
            "even" => Ok(Keep::Even),
            "none" => Ok(Keep::None),
            other => Err(format!("unknown parity `{other}` (odd | even | none)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityFilter {
    pub plane_op: SymmetryOperation,
    pub keep: Keep,
}

impl ParityFilter {
    pub fn none() -> Self {
        Self::new(Keep::None)
    }

    pub fn odd() -> Self {
        Self::new(Keep::Odd)
    }

    pub fn even() -> Self {
        Self::new(Keep::Even)
    }

    /// Filter at the horizontal mirror `IC_2z`.
    pub fn new(keep: Keep) -> Self {
        Self {
            plane_op: SymmetryOperation::sigma_h(),
            keep,
        }
    }

    pub fn is_active(&self) -> bool {
        self.keep != Keep::None
    }
}

impl Default for ParityFilter {
    fn default() -> Self {
        Self::none()
    }
}

/// The representation being subduced.
#[derive(Debug, Clone, Copy)]
pub enum Parent<'a> {
    O3(O3IrrepId),
    Irrep { group: &'a PointGroup, irrep: usize },
}

impl<'a> Parent<'a> {
    pub fn irrep(group: &'a PointGroup, name: &str) -> Result<Self, SubductionError> {
        Ok(Parent::Irrep {
            group,
            irrep: group.irrep_index(name)?,
        })
    }

    pub fn id(&self) -> ParentId {
        match *self {
            Parent::O3(id) => ParentId::O3(id),
            Parent::Irrep { group, irrep } => ParentId::Finite {
                group: group.name().to_string(),
                irrep: group.irreps()[irrep].name.clone(),
            },
        }
    }

    pub fn dimension(&self) -> usize {
        match *self {
            Parent::O3(id) => id.dimension(),
            Parent::Irrep { group, irrep } => group.irreps()[irrep].dimension,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParentId {
    O3(O3IrrepId),
    Finite { group: String, irrep: String },
}

impl fmt::Display for ParentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParentId::O3(id) => id.fmt(f),
            ParentId::Finite { group, irrep } => write!(f, "{group}:{irrep}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubductionResult {
    pub parent: ParentId,
    pub child_group: String,
    /// Nonzero multiplicities, in the child's irrep order.
    pub entries: Vec<(String, Multiplicity)>,
    /// `sum n_p d_p`
    pub dimension_check: Multiplicity,
}

impl SubductionResult {
    pub fn multiplicity(&self, irrep: &str) -> Multiplicity {
        self.entries
            .iter()
            .find(|(name, _)| name == irrep)
            .map(|(_, n)| *n)
            .unwrap_or_else(Multiplicity::zero)
    }

    pub fn is_fractional(&self) -> bool {
        self.entries.iter().any(|(_, n)| !n.is_integer())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn irreps(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Irreps contained at least once in both results.
    pub fn shared_irreps(&self, other: &Self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(name, n)| *n >= Multiplicity::from(1) && other.multiplicity(name) >= Multiplicity::from(1))
            .map(|(name, _)| name.clone())
            .collect()
    }

    /// Compact form used in tables, e.g. `E_g, T_1g(2), T_2g`.
    pub fn table_cell(&self) -> String {
        if self.entries.is_empty() {
            return "-".into();
        }
        self.entries
            .iter()
            .map(|(name, n)| {
                if *n == Multiplicity::from(1) {
                    name.clone()
                } else {
                    format!("{name}({n})")
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn to_json(&self) -> SubductionJson {
        SubductionJson {
            parent: self.parent.to_string(),
            child_group: self.child_group.clone(),
            entries: self
                .entries
                .iter()
                .map(|(irrep, n)| EntryJson {
                    irrep: irrep.clone(),
                    multiplicity: n.to_string(),
                    value: n.to_f64().unwrap_or(f64::NAN),
                })
                .collect(),
            dimension_check: self.dimension_check.to_string(),
            fractional: self.is_fractional(),
        }
    }
}

/// `A_1:1 E:1/2` style.
impl fmt::Display for SubductionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(name, n)| format!("{name}:{n}"))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubductionJson {
    pub parent: String,
    pub child_group: String,
    pub entries: Vec<EntryJson>,
    pub dimension_check: String,
    pub fractional: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryJson {
    pub irrep: String,
    pub multiplicity: String,
    pub value: f64,
}

/// Exact rational `sum / order` for a sum that is known to be a rational
/// with small denominator.
fn to_multiplicity(sum: f64, order: usize) -> Result<Multiplicity, SubductionError> {
    for q in 1..=48i64 {
        let scaled = sum * q as f64;
        let rounded = scaled.round();
        if (scaled - rounded).abs() <= 1e-7 * (1.0 + scaled.abs()) {
            return Ok(Multiplicity::new(rounded as i64, q * order as i64));
        }
    }
    Err(SubductionError::NonRational(sum / order as f64))
}

/// Parent character (possibly parity-masked) evaluated at every child element.
fn restricted_characters(
    parent: &Parent,
    child: &PointGroup,
    filter: &ParityFilter,
) -> Result<Vec<f64>, SubductionError> {
    match *parent {
        Parent::O3(id) => {
            let chars = child.elements().iter().map(|op| {
                let chi = o3_character(id, op);
                match filter.keep.sign() {
                    None => chi,
                    // Real spherical harmonics diagonalize the plane op, and
                    // masking the slots with eigenvalue `s` is the trace of
                    // the projector (1 + s Gamma(plane)) / 2 times Gamma(T).
                    Some(s) => 0.5 * (chi + s * o3_character(id, &filter.plane_op.compose(op))),
                }
            });
            Ok(chars.collect())
        }
        Parent::Irrep { group, irrep } => {
            let embed: Vec<usize> = child
                .elements()
                .iter()
                .map(|op| group.find_element(op))
                .collect::<Option<_>>()
                .ok_or_else(|| SubductionError::NotASubgroup {
                    child: child.name().to_string(),
                    parent: group.name().to_string(),
                })?;
            let Some(sign) = filter.keep.sign() else {
                return Ok(embed.iter().map(|&e| group.character(irrep, e)).collect());
            };
            let ir = &group.irreps()[irrep];
            let mats = ir
                .matrices
                .as_ref()
                .ok_or_else(|| SubductionError::MissingIrrepMatrix {
                    group: group.name().to_string(),
                    irrep: ir.name.clone(),
                })?;
            let plane = group
                .find_element(&filter.plane_op)
                .ok_or_else(|| SubductionError::PlaneOpNotInGroup(group.name().to_string()))?;
            let slots: Vec<usize> = (0..ir.dimension)
                .filter(|&mu| (mats[plane][(mu, mu)] - sign).abs() < 1e-9)
                .collect();
            Ok(embed
                .iter()
                .map(|&e| slots.iter().map(|&mu| mats[e][(mu, mu)]).sum())
                .collect())
        }
    }
}

/// Decomposes `parent`, restricted to `child`, into the child's irreps.
pub fn subduce(
    parent: &Parent,
    child: &PointGroup,
    filter: &ParityFilter,
) -> Result<SubductionResult, SubductionError> {
    let chars = restricted_characters(parent, child, filter)?;
    let g = child.order();
    let mut entries = Vec::new();
    let mut dimension_check = Multiplicity::zero();
    for (p, ir) in child.irreps().iter().enumerate() {
        let sum: f64 = chars
            .iter()
            .enumerate()
            .map(|(e, chi)| chi * child.character(p, e))
            .sum();
        let n = to_multiplicity(sum, g)?;
        if !n.is_zero() {
            dimension_check += n * ir.dimension as i64;
            entries.push((ir.name.clone(), n));
        }
    }
    Ok(SubductionResult {
        parent: parent.id(),
        child_group: child.name().to_string(),
        entries,
        dimension_check,
    })
}

/// Subduces `parent` through each group of `path` in turn. The filter is
/// applied only on the step whose child is `path[filter_stage]`. Each stage
/// result carries the original parent as its `parent`.
pub fn chain_subduce(
    parent: &Parent,
    path: &[&PointGroup],
    filter: &ParityFilter,
    filter_stage: Option<usize>,
) -> Result<Vec<SubductionResult>, SubductionError> {
    let none = ParityFilter::none();
    let stage_filter = |k: usize| if filter_stage == Some(k) { filter } else { &none };
    let mut out: Vec<SubductionResult> = Vec::with_capacity(path.len());
    for (k, &group) in path.iter().enumerate() {
        let result = if k == 0 {
            subduce(parent, group, stage_filter(0))?
        } else {
            let prev_group = path[k - 1];
            let prev = &out[k - 1];
            let mut totals = vec![Multiplicity::zero(); group.irreps().len()];
            for (name, n) in &prev.entries {
                let step = subduce(&Parent::irrep(prev_group, name)?, group, stage_filter(k))?;
                for (child_name, m) in &step.entries {
                    totals[group.irrep_index(child_name)?] += *n * *m;
                }
            }
            let mut entries = Vec::new();
            let mut dimension_check = Multiplicity::zero();
            for (ir, n) in group.irreps().iter().zip(totals) {
                if !n.is_zero() {
                    dimension_check += n * ir.dimension as i64;
                    entries.push((ir.name.clone(), n));
                }
            }
            SubductionResult {
                parent: parent.id(),
                child_group: group.name().to_string(),
                entries,
                dimension_check,
            }
        };
        out.push(result);
    }
    Ok(out)
}

/// One row of the O(3) -> O_h correlation table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableOneRow {
    pub id: O3IrrepId,
    pub dimension: usize,
    pub result: SubductionResult,
}

/// O(3) irreps (both polarizations, `t = 1..=tmax`) subduced onto O_h.
pub fn table_one(tmax: u32) -> Result<Vec<TableOneRow>, SubductionError> {
    let oh = builtin_group("O_h")?;
    let mut rows = Vec::new();
    for t in 1..=tmax {
        for id in [O3IrrepId::te(t), O3IrrepId::tm(t)] {
            rows.push(TableOneRow {
                id,
                dimension: id.dimension(),
                result: subduce(&Parent::O3(id), &oh, &ParityFilter::none())?,
            });
        }
    }
    Ok(rows)
}

pub fn format_table_one(rows: &[TableOneRow]) -> String {
    let mut out = format!("{:<12} {:>5}  {}\n", "O(3) irrep", "d_p", "O_h irreps (n_p)");
    for row in rows {
        out.push_str(&format!(
            "{:<12} {:>5}  {}\n",
            format!("t={} {}", row.id.t, row.id.s),
            row.dimension,
            row.result.table_cell()
        ));
    }
    out
}

/// One row of the O_h -> D_4h -> C_4v -> C_2v table with the odd-parity
/// filter applied at the D_4h stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableTwoRow {
    pub oh_irrep: String,
    pub d4h_irrep: String,
    /// `Gamma_D4h(IC_2z)`; diagonal for every D_4h irrep.
    pub plane_matrix: Vec<Vec<i32>>,
    pub d4h_odd: Option<String>,
    pub c4v_odd: Option<String>,
    pub c2v_odd: Vec<String>,
}

pub fn table_two() -> Result<Vec<TableTwoRow>, SubductionError> {
    let oh = builtin_group("O_h")?;
    let d4h = builtin_group("D_4h")?;
    let c4v = builtin_group("C_4v")?;
    let c2v = builtin_group("C_2v")?;
    let plane = d4h
        .sigma_h_index()
        .ok_or_else(|| SubductionError::PlaneOpNotInGroup(d4h.name().to_string()))?;
    let none = ParityFilter::none();
    let mut rows = Vec::new();
    for ir in oh.irreps() {
        let to_d4h = subduce(&Parent::irrep(&oh, &ir.name)?, &d4h, &none)?;
        for name in to_d4h.irreps() {
            let d4h_ir = d4h.irrep(name)?;
            let mats = d4h_ir
                .matrices
                .as_ref()
                .ok_or_else(|| SubductionError::MissingIrrepMatrix {
                    group: d4h.name().to_string(),
                    irrep: name.to_string(),
                })?;
            let m = &mats[plane];
            let plane_matrix: Vec<Vec<i32>> = (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| m[(r, c)].round() as i32).collect())
                .collect();
            let odd = (0..m.nrows()).all(|mu| (m[(mu, mu)] + 1.0).abs() < 1e-9);
            let (d4h_odd, c4v_odd, c2v_odd) = if odd {
                let c4 = subduce(&Parent::irrep(&d4h, name)?, &c4v, &none)?;
                let c4_name = c4.table_cell();
                let c2 = subduce(&Parent::irrep(&c4v, &c4_name)?, &c2v, &none)?;
                (
                    Some(name.to_string()),
                    Some(c4_name),
                    c2.irreps().map(str::to_string).collect(),
                )
            } else {
                (None, None, Vec::new())
            };
            rows.push(TableTwoRow {
                oh_irrep: ir.name.clone(),
                d4h_irrep: name.to_string(),
                plane_matrix,
                d4h_odd,
                c4v_odd,
                c2v_odd,
            });
        }
    }
    Ok(rows)
}

fn plane_cell(m: &[Vec<i32>]) -> String {
    if m.len() == 1 {
        m[0][0].to_string()
    } else {
        let diag: Vec<String> = (0..m.len()).map(|i| m[i][i].to_string()).collect();
        format!("diag({})", diag.join(","))
    }
}

pub fn format_table_two(rows: &[TableTwoRow]) -> String {
    let dash = |o: &Option<String>| o.clone().unwrap_or_else(|| "-".into());
    let mut out = format!(
        "{:<6} {:<6} {:<14} {:<10} {:<10} {}\n",
        "O_h", "D_4h", "G_D4h(IC_2z)", "D_4h odd", "C_4v odd", "C_2v odd"
    );
    for r in rows {
        let c2v = if r.c2v_odd.is_empty() {
            "-".to_string()
        } else {
            r.c2v_odd.join(", ")
        };
        out.push_str(&format!(
            "{:<6} {:<6} {:<14} {:<10} {:<10} {}\n",
            r.oh_irrep,
            r.d4h_irrep,
            plane_cell(&r.plane_matrix),
            dash(&r.d4h_odd),
            dash(&r.c4v_odd),
            c2v
        ));
    }
    out
}
