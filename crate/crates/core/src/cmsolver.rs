//! Characteristic-mode generalized eigenproblem `X I = lambda R I` on
//! supplied impedance data, and symmetry labeling of the resulting modes.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symaction::{project, GroupAction, SymactionError, CLASSIFY_THRESHOLD};

/// Default relative threshold below which eigenvalues of `R` are dropped.
pub const DEFAULT_TRUNCATION: f64 = 1e-12;
/// Default relative tolerance for calling two eigenvalues degenerate.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmError {
    #[error("{name} is {rows}x{cols}, expected a square matrix")]
    NotSquare { name: &'static str, rows: usize, cols: usize },
    #[error("dimension mismatch: X is {x}x{x}, R is {r}x{r}")]
    DimensionMismatch { x: usize, r: usize },
    #[error("{0} is not symmetric")]
    NotSymmetric(&'static str),
    #[error("{0} contains non-finite entries")]
    NonFinite(&'static str),
    #[error("R is indefinite: smallest eigenvalue {min} against largest {max}")]
    Indefinite { min: f64, max: f64 },
    #[error("R has no eigenvalue above the truncation threshold")]
    ZeroRank,
    #[error("action dimension {action} does not match {modes} unknowns")]
    ActionDimension { action: usize, modes: usize },
    #[error(transparent)]
    Symaction(#[from] SymactionError),
}

/// Reactance and resistance parts of an impedance matrix at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedancePair {
    x: DMatrix<f64>,
    r: DMatrix<f64>,
    frequency: f64,
}

fn check_square(name: &'static str, m: &DMatrix<f64>) -> Result<(), CmError> {
    if m.nrows() != m.ncols() {
        return Err(CmError::NotSquare {
            name,
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CmError::NonFinite(name));
    }
    let scale = m.amax();
    if (m - m.transpose()).amax() > 1e-8 * scale {
        return Err(CmError::NotSymmetric(name));
    }
    Ok(())
}

impl ImpedancePair {
    pub fn new(x: DMatrix<f64>, r: DMatrix<f64>, frequency: f64) -> Result<Self, CmError> {
        check_square("X", &x)?;
        check_square("R", &r)?;
        if x.nrows() != r.nrows() {
            return Err(CmError::DimensionMismatch {
                x: x.nrows(),
                r: r.nrows(),
            });
        }
        let eig = SymmetricEigen::new(symmetrize(&r)).eigenvalues;
        let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let min = eig.min();
        if min < -1e-10 * max {
            return Err(CmError::Indefinite { min, max });
        }
        Ok(Self { x, r, frequency })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn dimension(&self) -> usize {
        self.x.nrows()
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues in ascending order with `R`-orthonormal eigenvectors as
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub frequency: f64,
    pub eigenvalues: Vec<f64>,
    /// `N x rank`.
    pub vectors: DMatrix<f64>,
    pub rank: usize,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `max_n ||X I_n - lambda_n R I_n|| / (||X|| + |lambda_n| ||R||)`,
    /// with Frobenius norms.
    pub fn max_residual(&self, pair: &ImpedancePair) -> f64 {
        let (xn, rn) = (pair.x.norm(), pair.r.norm());
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(n, &l)| {
                let v = self.vectors.column(n);
                let res = (&pair.x * v - (&pair.r * v) * l).norm();
                res / (xn + l.abs() * rn)
            })
            .fold(0.0, f64::max)
    }

    /// `max |I^T R I - 1|`.
    pub fn orthonormality_error(&self, pair: &ImpedancePair) -> f64 {
        let g = self.vectors.transpose() * &pair.r * &self.vectors;
        (g - DMatrix::identity(self.rank, self.rank)).amax()
    }
}

/// Solves the pencil by spectral reduction of `R`: eigenvalues of `R` below
/// `truncation * max` are discarded and the remaining standard symmetric
/// problem is solved densely.
pub fn solve_cm(pair: &ImpedancePair, truncation: f64) -> Result<ModeSet, CmError> {
    let re = SymmetricEigen::new(symmetrize(&pair.r));
    let max = re.eigenvalues.max();
    let keep: Vec<usize> = (0..re.eigenvalues.len())
        .filter(|&i| re.eigenvalues[i] > truncation * max && re.eigenvalues[i] > 0.0)
        .collect();
    if keep.is_empty() {
        return Err(CmError::ZeroRank);
    }
    let n = pair.dimension();
    let k = keep.len();
    // B = U_k S_k^{-1/2}, so B^T R B = I
    let b = DMatrix::from_fn(n, k, |r, c| {
        let i = keep[c];
        re.eigenvectors[(r, i)] / re.eigenvalues[i].sqrt()
    });
    let h = symmetrize(&(b.transpose() * &pair.x * &b));
    let he = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &c| he.eigenvalues[a].total_cmp(&he.eigenvalues[c]));
    let mut vectors = DMatrix::zeros(n, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (col, &i) in order.iter().enumerate() {
        let mut v = &b * he.eigenvectors.column(i);
        // fix the arbitrary sign: largest component positive
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
        eigenvalues.push(he.eigenvalues[i]);
    }
    Ok(ModeSet {
        frequency: pair.frequency,
        eigenvalues,
        vectors,
        rank: k,
    })
}

/// Groups of mode indices with `|l_i - l_j| <= tol (1 + |l_i|)`, chained
/// along the sorted eigenvalues.
pub fn degenerate_clusters(eigenvalues: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, &l) in eigenvalues.iter().enumerate() {
        match out.last_mut() {
            Some(c) if {
                let prev = eigenvalues[*c.last().unwrap()];
                (l - prev).abs() <= tol * (1.0 + prev.abs())
            } =>
            {
                c.push(i)
            }
            _ => out.push(vec![i]),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeLabel {
    /// Dominant irrep of the (re-diagonalized) mode.
    pub irrep: String,
    /// Weight of `irrep`.
    pub weight: f64,
    /// Whether the weight reaches the classification threshold.
    pub pure: bool,
    /// Index of the degenerate cluster the mode belongs to.
    pub cluster: usize,
    /// Per-irrep share of the cluster subspace, `tr(Q^T P_p Q) / k`.
    pub cluster_weights: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub cluster_tol: f64,
    pub threshold: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            cluster_tol: DEFAULT_CLUSTER_TOL,
            threshold: CLASSIFY_THRESHOLD,
        }
    }
}

/// Labels every mode with an irrep. Degenerate clusters are handled
/// jointly: the cluster span is projected onto each irrep, and the
/// operator `sum_p (p + 1) Q^T P_p Q` is diagonalized to rotate the cluster
/// into irrep-pure vectors before per-vector labeling. Labels of a cluster
/// therefore do not depend on how its basis is mixed.
pub fn classify_modes(
    modes: &ModeSet,
    action: &GroupAction,
    options: &ClassifyOptions,
) -> Result<Vec<ModeLabel>, CmError> {
    let n = modes.vectors.nrows();
    if action.dimension() != n {
        return Err(CmError::ActionDimension {
            action: action.dimension(),
            modes: n,
        });
    }
    let projectors = action.projectors();
    let names: Vec<String> = action.group().irreps().iter().map(|i| i.name.clone()).collect();
    let mut labels = vec![None; modes.len()];
    for (ci, cluster) in degenerate_clusters(&modes.eigenvalues, options.cluster_tol)
        .into_iter()
        .enumerate()
    {
        let k = cluster.len();
        let raw = DMatrix::from_fn(n, k, |r, c| modes.vectors[(r, cluster[c])]);
        // Euclidean orthonormal basis of the cluster span
        let q = raw.qr().q();
        let blocks: Vec<DMatrix<f64>> = projectors
            .iter()
            .map(|p| symmetrize(&(q.transpose() * p * &q)))
            .collect();
        let cluster_weights: Vec<(String, f64)> = names
            .iter()
            .zip(&blocks)
            .map(|(nm, a)| (nm.clone(), a.trace() / k as f64))
            .collect();
        let mut mix = DMatrix::zeros(k, k);
        for (p, a) in blocks.iter().enumerate() {
            mix += a * (p + 1) as f64;
        }
        let eig = SymmetricEigen::new(mix);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for (slot, &i) in cluster.iter().zip(&order) {
            let v = &q * eig.eigenvectors.column(i);
            let report = project(&v, action)?;
            let weight = report.weight(&report.dominant);
            labels[*slot] = Some(ModeLabel {
                irrep: report.dominant.clone(),
                weight,
                pure: weight >= options.threshold,
                cluster: ci,
                cluster_weights: cluster_weights.clone(),
            });
        }
    }
    Ok(labels.into_iter().map(|l| l.expect("every mode is in a cluster")).collect())
}
