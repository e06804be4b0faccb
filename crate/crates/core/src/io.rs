//! File formats: matrices (CSV or binary grid), mode sets, actions,
//! coefficient vectors and tracked traces.
//!
//! Binary grid layout: the 8 bytes `MODESUBM`, the dimension `N` as a
//! little-endian `u64`, then `N * N` little-endian `f64` in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmsolver::ModeSet;
use crate::pointgroup::{builtin_group, GroupError};
use crate::sphwave::TraceSample;
use crate::symaction::{FieldKind, GroupAction, SymactionError};
use crate::tracker::{AvoidanceSignature, Snapshot, TrackedTrace};
use crate::O3IrrepId;

pub const GRID_MAGIC: &[u8; 8] = b"MODESUBM";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Symaction(#[from] SymactionError),
}

fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(r)
}

fn parse_rows<R: Read>(r: R) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rows = Vec::new();
    for (line, rec) in csv_reader(r).records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| IoError::Format(format!("row {}: cannot parse {f:?}", line + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Dense matrix, one row per line.
pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>, IoError> {
    let rows = parse_rows(r)?;
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(IoError::Format("empty matrix".into()));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(IoError::Format(format!("row {} has {} entries, expected {m}", i + 1, row.len())));
    }
    Ok(DMatrix::from_fn(n, m, |r, c| rows[r][c]))
}

pub fn write_matrix_csv<W: Write>(w: W, m: &DMatrix<f64>) -> Result<(), IoError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for r in 0..m.nrows() {
        out.write_record(m.row(r).iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_binary<R: Read>(mut r: R) -> Result<DMatrix<f64>, IoError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return Err(IoError::Format("bad magic in binary matrix".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = usize::try_from(u64::from_le_bytes(word))
        .map_err(|_| IoError::Format("matrix dimension overflows".into()))?;
    let len = n
        .checked_mul(n)
        .ok_or_else(|| IoError::Format("matrix dimension overflows".into()))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut word)
            .map_err(|_| IoError::Format(format!("binary matrix truncated, expected {n}x{n}")))?;
        data.push(f64::from_le_bytes(word));
    }
    Ok(DMatrix::from_row_slice(n, n, &data))
}

pub fn write_matrix_binary<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<(), IoError> {
    if m.nrows() != m.ncols() {
        return Err(IoError::Format("binary grid holds square matrices only".into()));
    }
    w.write_all(GRID_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    for r in 0..m.nrows() {
        for v in m.row(r).iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix file, choosing the format from its first bytes.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, IoError> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(GRID_MAGIC) {
        read_matrix_binary(bytes.as_slice())
    } else {
        read_matrix_csv(bytes.as_slice())
    }
}

/// One coefficient per line; extra columns are further vectors.
pub fn read_vectors_csv<R: Read>(r: R) -> Result<Vec<DVector<f64>>, IoError> {
    let m = read_matrix_csv(r)?;
    Ok(m.column_iter().map(|c| c.into_owned()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesJson {
    pub frequency: f64,
    pub lambdas: Vec<f64>,
    /// One coefficient list per mode.
    pub vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl ModesJson {
    pub fn from_modes(modes: &ModeSet, labels: Option<Vec<String>>) -> Self {
        Self {
            frequency: modes.frequency,
            lambdas: modes.eigenvalues.clone(),
            vectors: modes
                .vectors
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            labels,
        }
    }

    fn vector_matrix(&self) -> Result<Option<DMatrix<f64>>, IoError> {
        if self.vectors.is_empty() {
            return Ok(None);
        }
        let n = self.vectors[0].len();
        if self.vectors.iter().any(|v| v.len() != n) {
            return Err(IoError::Format("mode vectors differ in length".into()));
        }
        Ok(Some(DMatrix::from_fn(n, self.vectors.len(), |r, c| self.vectors[c][r])))
    }

    pub fn to_modes(&self) -> Result<ModeSet, IoError> {
        let vectors = self
            .vector_matrix()?
            .ok_or_else(|| IoError::Format("modes file has no vectors".into()))?;
        if vectors.ncols() != self.lambdas.len() {
            return Err(IoError::Format(format!(
                "{} vectors for {} eigenvalues",
                vectors.ncols(),
                self.lambdas.len()
            )));
        }
        Ok(ModeSet {
            frequency: self.frequency,
            eigenvalues: self.lambdas.clone(),
            rank: self.lambdas.len(),
            vectors,
        })
    }

    pub fn to_snapshot(&self) -> Result<Snapshot, IoError> {
        Ok(Snapshot {
            frequency: self.frequency,
            lambdas: self.lambdas.clone(),
            vectors: self.vector_matrix()?,
            labels: self.labels.clone(),
            weight: None,
        })
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// All `*.json` snapshots in a directory, ordered by frequency.
pub fn read_snapshot_dir(dir: &Path) -> Result<Vec<Snapshot>, IoError> {
    let entries = std::fs::read_dir(dir).map_err(|source| IoError::File {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e?.path();
        if p.extension().is_some_and(|x| x == "json") {
            paths.push(p);
        }
    }
    paths.sort();
    let mut snaps = paths
        .iter()
        .map(|p| read_json::<ModesJson>(p)?.to_snapshot())
        .collect::<Result<Vec<_>, _>>()?;
    snaps.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    Ok(snaps)
}

/// Action file: a group name and either one matrix per group element (in
/// element order) or a point set with its field kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionJson {
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl ActionJson {
    pub fn to_action(&self) -> Result<GroupAction, IoError> {
        let group = builtin_group(&self.group)?;
        match (&self.matrices, &self.points) {
            (Some(mats), None) => {
                let ops = mats
                    .iter()
                    .enumerate()
                    .map(|(e, rows)| {
                        let n = rows.len();
                        if rows.iter().any(|r| r.len() != n) {
                            return Err(IoError::Format(format!("matrix {e} is not square")));
                        }
                        Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(GroupAction::from_matrices(&group, ops)?)
            }
            (None, Some(points)) => {
                let pts: Vec<Vector3<f64>> = points.iter().map(|p| Vector3::from(*p)).collect();
                Ok(GroupAction::from_points(
                    &group,
                    &pts,
                    self.field.unwrap_or(FieldKind::Vector),
                    self.tolerance.unwrap_or(1e-9),
                )?)
            }
            _ => Err(IoError::Format(
                "action needs exactly one of `matrices` or `points`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracesJson {
    pub enforce_vnw: bool,
    pub gap_threshold: f64,
    pub traces: Vec<TrackedTrace>,
    pub avoidances: Vec<AvoidanceSignature>,
}

/// One row per (trace, frequency).
pub fn write_traces_csv<W: Write>(w: W, traces: &[TrackedTrace]) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["trace", "irrep", "frequency", "lambda", "mode"])?;
    for t in traces {
        for p in &t.points {
            out.write_record([
                t.id.to_string(),
                t.irrep.clone().unwrap_or_default(),
                p.frequency.to_string(),
                p.lambda.to_string(),
                p.mode.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Analytic trace samples; the `lambda` cell is empty at a pole.
pub fn write_sphere_csv<W: Write>(
    w: W,
    rows: &[(O3IrrepId, Vec<TraceSample>)],
) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kR_over_pi", "t", "s", "lambda", "is_pole_adjacent"])?;
    for (id, samples) in rows {
        for s in samples {
            out.write_record([
                s.kr_over_pi.to_string(),
                id.t.to_string(),
                id.s.to_string(),
                s.lambda.map(|l| l.to_string()).unwrap_or_default(),
                s.pole_adjacent.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn csv_round_trip() {
        let m = dmatrix![1.0, -2.5; 3.25e-10, 4.0];
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        assert_eq!(read_matrix_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn csv_tolerates_spaces_and_comments() {
        let text = "# X\n 1, 2\n\n3 ,4\n";
        assert_eq!(read_matrix_csv(text.as_bytes()).unwrap(), dmatrix![1.0, 2.0; 3.0, 4.0]);
    }

    #[test]
    fn ragged_csv_is_rejected() {
        assert!(matches!(
            read_matrix_csv("1,2\n3\n".as_bytes()),
            Err(IoError::Format(_))
        ));
    }

    #[test]
    fn binary_round_trip() {
        let m = dmatrix![1.0, f64::MIN_POSITIVE; -0.0, 1e300];
        let mut buf = Vec::new();
        write_matrix_binary(&mut buf, &m).unwrap();
        assert_eq!(&buf[..8], GRID_MAGIC);
        assert_eq!(buf.len(), 16 + 4 * 8);
        assert_eq!(read_matrix_binary(buf.as_slice()).unwrap(), m);
        assert!(read_matrix_binary(&buf[..30]).is_err());
    }

    #[test]
    fn vectors_by_column() {
        let v = read_vectors_csv("1,0\n2,0\n3,1\n".as_bytes()).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn action_json_needs_one_source() {
        let a = ActionJson {
            group: "C2v".into(),
            matrices: None,
            points: None,
            field: None,
            tolerance: None,
        };
        assert!(a.to_action().is_err());
        let a = ActionJson {
            points: Some(vec![[0.0, 0.0, 0.0]]),
            ..a
        };
        assert_eq!(a.to_action().unwrap().dimension(), 3);
    }

    #[test]
    fn modes_json_omits_missing_labels() {
        let m = ModesJson {
            frequency: 1.0,
            lambdas: vec![0.5],
            vectors: vec![vec![1.0, 0.0]],
            labels: None,
        };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"frequency":1.0,"lambdas":[0.5],"vectors":[[1.0,0.0]]}"#);
        let snap = m.to_snapshot().unwrap();
        assert_eq!(snap.vectors.unwrap().shape(), (2, 1));
    }
}
