//! Correlation tracking of characteristic modes across a frequency sweep.
//!
//! Tracking runs in three passes: optimal assignment between adjacent
//! snapshots, splitting at poles, and optionally the no-crossing
//! enforcement for traces of equal irrep label.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::max_affinity_assignment;

pub const DEFAULT_POLE_THRESHOLD: f64 = 1e3;
pub const DEFAULT_GAP_THRESHOLD: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("no snapshots to track")]
    NoSnapshots,
    #[error("snapshot {snapshot}: {reason}")]
    Inconsistent { snapshot: usize, reason: String },
    #[error("frequencies must be strictly increasing (snapshot {0})")]
    NotIncreasing(usize),
}

/// Modes at one frequency.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub frequency: f64,
    pub lambdas: Vec<f64>,
    /// `N x K`, one column per mode.
    pub vectors: Option<DMatrix<f64>>,
    pub labels: Option<Vec<String>>,
    /// Weight of the correlation inner product (plain when absent).
    pub weight: Option<DMatrix<f64>>,
}

impl Snapshot {
    pub fn new(frequency: f64, lambdas: Vec<f64>) -> Self {
        Self {
            frequency,
            lambdas,
            ..Self::default()
        }
    }

    pub fn with_vectors(mut self, vectors: DMatrix<f64>) -> Self {
        self.vectors = Some(vectors);
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn with_weight(mut self, weight: DMatrix<f64>) -> Self {
        self.weight = Some(weight);
        self
    }

    fn label(&self, mode: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[mode].as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    /// Reorder same-label traces so that they never cross.
    pub enforce_vnw: bool,
    pub split_poles: bool,
    pub pole_threshold: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            enforce_vnw: false,
            split_poles: true,
            pole_threshold: DEFAULT_POLE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub frequency: f64,
    pub lambda: f64,
    /// Index of the mode within its snapshot.
    pub mode: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoleDirection {
    /// `-inf` from below, `+inf` from above (closed bodies).
    NegativeToPositive,
    /// The reverse order, seen on structures with holes.
    PositiveToNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TraceEvent {
    /// The trace starts after the first snapshot.
    Birth { frequency: f64 },
    /// The trace ends before the last snapshot.
    Death { frequency: f64 },
    /// The trace was cut at a pole between `below` and `above`.
    PoleSplit {
        below: f64,
        above: f64,
        direction: PoleDirection,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedTrace {
    pub id: usize,
    pub irrep: Option<String>,
    pub points: Vec<TracePoint>,
    pub events: Vec<TraceEvent>,
}

impl TrackedTrace {
    pub fn lambda_at(&self, frequency: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.frequency == frequency)
            .map(|p| p.lambda)
    }

    /// Linear interpolation inside the trace's frequency span.
    pub fn interpolate(&self, frequency: f64) -> Option<f64> {
        let pts = &self.points;
        let first = pts.first()?;
        let last = pts.last()?;
        if frequency < first.frequency || frequency > last.frequency {
            return None;
        }
        let k = pts.partition_point(|p| p.frequency < frequency);
        if pts[k].frequency == frequency {
            return Some(pts[k].lambda);
        }
        let (a, b) = (pts[k - 1], pts[k]);
        let t = (frequency - a.frequency) / (b.frequency - a.frequency);
        Some(a.lambda + t * (b.lambda - a.lambda))
    }
}

/// A trace under construction: contiguous snapshots `start..start + len`.
#[derive(Debug, Clone)]
struct Chain {
    start: usize,
    modes: Vec<usize>,
    label: Option<String>,
    events: Vec<TraceEvent>,
}

impl Chain {
    fn end(&self) -> usize {
        self.start + self.modes.len()
    }

    fn alive(&self, s: usize) -> bool {
        s >= self.start && s < self.end()
    }

    fn mode_at(&self, s: usize) -> usize {
        self.modes[s - self.start]
    }
}

fn validate(snapshots: &[Snapshot]) -> Result<(), TrackError> {
    if snapshots.is_empty() {
        return Err(TrackError::NoSnapshots);
    }
    let mut dim = None;
    for (i, s) in snapshots.iter().enumerate() {
        let k = s.lambdas.len();
        let bad = |reason: String| TrackError::Inconsistent { snapshot: i, reason };
        if let Some(v) = &s.vectors {
            if v.ncols() != k {
                return Err(bad(format!("{} vectors for {k} eigenvalues", v.ncols())));
            }
            match dim {
                None => dim = Some(v.nrows()),
                Some(d) if d != v.nrows() => {
                    return Err(bad(format!("vector length {} differs from {d}", v.nrows())))
                }
                _ => {}
            }
            if let Some(w) = &s.weight {
                if w.shape() != (v.nrows(), v.nrows()) {
                    return Err(bad("weight matrix does not match the vectors".into()));
                }
            }
        }
        if let Some(l) = &s.labels {
            if l.len() != k {
                return Err(bad(format!("{} labels for {k} eigenvalues", l.len())));
            }
        }
        if s.lambdas.iter().any(|l| l.is_nan()) {
            return Err(bad("NaN eigenvalue".into()));
        }
        if i > 0 && s.frequency <= snapshots[i - 1].frequency {
            return Err(TrackError::NotIncreasing(i));
        }
    }
    Ok(())
}

/// `|I_m^T W I_n| / (||I_m||_W ||I_n||_W)` when both snapshots carry
/// vectors, `-|lambda_m - lambda_n|` otherwise.
fn affinity(a: &Snapshot, b: &Snapshot, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    match (&a.vectors, &b.vectors) {
        (Some(va), Some(vb)) => {
            let w = a.weight.as_ref().or(b.weight.as_ref());
            let ip = |x: usize, y: usize, left: &DMatrix<f64>, right: &DMatrix<f64>| {
                let (u, v) = (left.column(x), right.column(y));
                match w {
                    Some(w) => u.dot(&(w * v)),
                    None => u.dot(&v),
                }
            };
            let na: Vec<f64> = rows.iter().map(|&m| ip(m, m, va, va).abs().sqrt()).collect();
            let nb: Vec<f64> = cols.iter().map(|&n| ip(n, n, vb, vb).abs().sqrt()).collect();
            DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
                let den = na[r] * nb[c];
                if den == 0.0 {
                    0.0
                } else {
                    ip(rows[r], cols[c], va, vb).abs() / den
                }
            })
        }
        _ => DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
            -(a.lambdas[rows[r]] - b.lambdas[cols[c]]).abs()
        }),
    }
}

fn correlate(snapshots: &[Snapshot]) -> Vec<Chain> {
    let mut chains: Vec<Chain> = Vec::new();
    // chain index for each mode of the current snapshot
    let mut current: Vec<usize> = Vec::new();
    for m in 0..snapshots[0].lambdas.len() {
        chains.push(Chain {
            start: 0,
            modes: vec![m],
            label: snapshots[0].label(m).map(str::to_string),
            events: Vec::new(),
        });
        current.push(m);
    }
    for s in 1..snapshots.len() {
        let (prev, next) = (&snapshots[s - 1], &snapshots[s]);
        let mut groups: BTreeMap<Option<&str>, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for m in 0..prev.lambdas.len() {
            groups.entry(prev.label(m)).or_default().0.push(m);
        }
        for n in 0..next.lambdas.len() {
            groups.entry(next.label(n)).or_default().1.push(n);
        }
        let mut following = vec![usize::MAX; next.lambdas.len()];
        for (label, (rows, cols)) in groups {
            let assignment = max_affinity_assignment(&affinity(prev, next, &rows, &cols));
            let mut taken = vec![false; cols.len()];
            for (r, a) in assignment.iter().enumerate() {
                let chain = current[rows[r]];
                match a {
                    Some(c) => {
                        taken[*c] = true;
                        chains[chain].modes.push(cols[*c]);
                        following[cols[*c]] = chain;
                    }
                    None => chains[chain].events.push(TraceEvent::Death {
                        frequency: prev.frequency,
                    }),
                }
            }
            for (c, t) in taken.iter().enumerate() {
                if !t {
                    following[cols[c]] = chains.len();
                    chains.push(Chain {
                        start: s,
                        modes: vec![cols[c]],
                        label: label.map(str::to_string),
                        events: vec![TraceEvent::Birth {
                            frequency: next.frequency,
                        }],
                    });
                }
            }
        }
        current = following;
    }
    chains
}

fn pole_direction(a: f64, b: f64, threshold: f64) -> Option<PoleDirection> {
    if a < -threshold && b > threshold {
        Some(PoleDirection::NegativeToPositive)
    } else if a > threshold && b < -threshold {
        Some(PoleDirection::PositiveToNegative)
    } else {
        None
    }
}

/// Cuts a chain wherever consecutive eigenvalues jump across
/// `[-threshold, threshold]`.
fn split_chain(chain: Chain, snapshots: &[Snapshot], threshold: f64) -> Vec<Chain> {
    let mut out = Vec::new();
    let mut piece = Chain {
        start: chain.start,
        modes: vec![chain.modes[0]],
        label: chain.label.clone(),
        events: chain
            .events
            .iter()
            .copied()
            .filter(|e| matches!(e, TraceEvent::Birth { .. }))
            .collect(),
    };
    for k in 1..chain.modes.len() {
        let s = chain.start + k;
        let a = snapshots[s - 1].lambdas[chain.modes[k - 1]];
        let b = snapshots[s].lambdas[chain.modes[k]];
        if let Some(direction) = pole_direction(a, b, threshold) {
            let ev = TraceEvent::PoleSplit {
                below: snapshots[s - 1].frequency,
                above: snapshots[s].frequency,
                direction,
            };
            piece.events.push(ev);
            let done = std::mem::replace(
                &mut piece,
                Chain {
                    start: s,
                    modes: Vec::new(),
                    label: chain.label.clone(),
                    events: vec![ev],
                },
            );
            out.push(done);
        }
        piece.modes.push(chain.modes[k]);
    }
    piece.events.extend(
        chain
            .events
            .iter()
            .copied()
            .filter(|e| matches!(e, TraceEvent::Death { .. })),
    );
    out.push(piece);
    out
}

/// Within each label, hands the sorted eigenvalues at every snapshot to
/// the continuing traces in their established order, so same-label traces
/// keep their relative order over their common span.
fn enforce_no_crossing(chains: &mut [Chain], snapshots: &[Snapshot]) {
    let mut by_label: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, c) in chains.iter().enumerate() {
        if let Some(l) = &c.label {
            by_label.entry(l.clone()).or_default().push(i);
        }
    }
    for members in by_label.values() {
        let mut order: Vec<usize> = Vec::new();
        for (s, snap) in snapshots.iter().enumerate() {
            let lam = |chains: &[Chain], c: usize| snap.lambdas[chains[c].mode_at(s)];
            order.retain(|&c| chains[c].alive(s));
            let mut modes: Vec<usize> = order.iter().map(|&c| chains[c].mode_at(s)).collect();
            modes.sort_by(|&a, &b| snap.lambdas[a].total_cmp(&snap.lambdas[b]).then(a.cmp(&b)));
            for (&c, m) in order.iter().zip(modes) {
                let start = chains[c].start;
                chains[c].modes[s - start] = m;
            }
            let mut born: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&c| chains[c].start == s)
                .collect();
            born.sort_by(|&a, &b| lam(chains, a).total_cmp(&lam(chains, b)));
            let mut merged = Vec::with_capacity(order.len() + born.len());
            let (mut i, mut j) = (0, 0);
            while i < order.len() || j < born.len() {
                let take_old = j == born.len()
                    || (i < order.len() && lam(chains, order[i]) <= lam(chains, born[j]));
                if take_old {
                    merged.push(order[i]);
                    i += 1;
                } else {
                    merged.push(born[j]);
                    j += 1;
                }
            }
            order = merged;
        }
    }
}

pub fn track(snapshots: &[Snapshot], options: &TrackOptions) -> Result<Vec<TrackedTrace>, TrackError> {
    validate(snapshots)?;
    let mut chains = correlate(snapshots);
    if options.split_poles {
        chains = chains
            .into_iter()
            .flat_map(|c| split_chain(c, snapshots, options.pole_threshold))
            .collect();
    }
    if options.enforce_vnw {
        enforce_no_crossing(&mut chains, snapshots);
    }
    let mut traces: Vec<TrackedTrace> = chains
        .into_iter()
        .map(|c| TrackedTrace {
            id: 0,
            points: c
                .modes
                .iter()
                .enumerate()
                .map(|(k, &m)| {
                    let snap = &snapshots[c.start + k];
                    TracePoint {
                        frequency: snap.frequency,
                        lambda: snap.lambdas[m],
                        mode: m,
                    }
                })
                .collect(),
            irrep: c.label,
            events: c.events,
        })
        .collect();
    // ids independent of the input mode order
    traces.sort_by(|a, b| {
        let (pa, pb) = (a.points[0], b.points[0]);
        pa.frequency
            .total_cmp(&pb.frequency)
            .then(pa.lambda.total_cmp(&pb.lambda))
            .then(a.irrep.cmp(&b.irrep))
            .then(a.points.len().cmp(&b.points.len()))
    });
    for (i, t) in traces.iter_mut().enumerate() {
        t.id = i;
    }
    Ok(traces)
}

/// Cuts one trace at poles; `track` applies this to every trace.
pub fn split_at_poles(trace: &TrackedTrace, threshold: f64) -> Vec<TrackedTrace> {
    let mut out: Vec<TrackedTrace> = Vec::new();
    let mut piece = TrackedTrace {
        id: trace.id,
        irrep: trace.irrep.clone(),
        points: vec![trace.points[0]],
        events: Vec::new(),
    };
    for w in trace.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if let Some(direction) = pole_direction(a.lambda, b.lambda, threshold) {
            let ev = TraceEvent::PoleSplit {
                below: a.frequency,
                above: b.frequency,
                direction,
            };
            piece.events.push(ev);
            let next = TrackedTrace {
                id: trace.id,
                irrep: trace.irrep.clone(),
                points: Vec::new(),
                events: vec![ev],
            };
            out.push(std::mem::replace(&mut piece, next));
        }
        piece.points.push(b);
    }
    out.push(piece);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AvoidanceKind {
    /// Microscopic: small gap, typically numerical.
    Mica,
    /// Macroscopic: geometry-induced gap.
    Maca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceSignature {
    /// Trace carrying the indentation.
    pub lower: usize,
    /// Trace carrying the peak.
    pub upper: usize,
    pub frequency: f64,
    pub gap: f64,
    pub kind: AvoidanceKind,
}

/// Local minima of `|lambda_a - lambda_b|` for every pair of traces with
/// equal labels, evaluated on the union of their frequencies inside the
/// common span. Minima where the difference changes sign are crossings,
/// not avoidances, and are skipped.
pub fn detect_avoidances(traces: &[TrackedTrace], gap_threshold: f64) -> Vec<AvoidanceSignature> {
    let mut out = Vec::new();
    for (i, a) in traces.iter().enumerate() {
        for b in &traces[i + 1..] {
            if a.irrep != b.irrep {
                continue;
            }
            let lo = a.points[0].frequency.max(b.points[0].frequency);
            let hi = a.points.last().unwrap().frequency.min(b.points.last().unwrap().frequency);
            if hi <= lo {
                continue;
            }
            let mut grid: Vec<f64> = a
                .points
                .iter()
                .chain(&b.points)
                .map(|p| p.frequency)
                .filter(|&f| f >= lo && f <= hi)
                .collect();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let diff: Vec<f64> = grid
                .iter()
                .map(|&f| a.interpolate(f).unwrap() - b.interpolate(f).unwrap())
                .collect();
            for k in 1..diff.len().saturating_sub(1) {
                let (g0, g1, g2) = (diff[k - 1].abs(), diff[k].abs(), diff[k + 1].abs());
                let same_sign = diff[k - 1].signum() == diff[k].signum()
                    && diff[k].signum() == diff[k + 1].signum()
                    && diff[k] != 0.0;
                if g1 < g0 && g1 <= g2 && same_sign {
                    let (lower, upper) = if diff[k] < 0.0 { (a.id, b.id) } else { (b.id, a.id) };
                    out.push(AvoidanceSignature {
                        lower,
                        upper,
                        frequency: grid[k],
                        gap: g1,
                        kind: if g1 > gap_threshold {
                            AvoidanceKind::Maca
                        } else {
                            AvoidanceKind::Mica
                        },
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(f: f64, l: [f64; 2]) -> Snapshot {
        Snapshot::new(f, l.to_vec())
    }

    #[test]
    fn identity_steps_follow_index_order() {
        let snaps = vec![two(0.0, [1.0, 2.0]), two(1.0, [1.1, 2.1])];
        let t = track(&snaps, &TrackOptions::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].points.iter().map(|p| p.mode).collect::<Vec<_>>(), vec![0, 0]);
        assert_eq!(t[1].points.iter().map(|p| p.mode).collect::<Vec<_>>(), vec![1, 1]);
    }

    #[test]
    fn single_snapshot_gives_single_point_traces() {
        let t = track(&[two(0.5, [3.0, -1.0])], &TrackOptions::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|t| t.points.len() == 1 && t.events.is_empty()));
    }

    #[test]
    fn count_change_opens_and_closes_traces() {
        let snaps = vec![
            Snapshot::new(0.0, vec![1.0]),
            Snapshot::new(1.0, vec![1.0, 5.0]),
            Snapshot::new(2.0, vec![5.0]),
        ];
        let t = track(&snaps, &TrackOptions::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].events, vec![TraceEvent::Death { frequency: 1.0 }]);
        assert_eq!(t[1].events, vec![TraceEvent::Birth { frequency: 1.0 }]);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(track(&[], &TrackOptions::default()), Err(TrackError::NoSnapshots));
        let snaps = vec![two(1.0, [0.0, 1.0]), two(1.0, [0.0, 1.0])];
        assert_eq!(track(&snaps, &TrackOptions::default()), Err(TrackError::NotIncreasing(1)));
        let bad = Snapshot::new(0.0, vec![1.0, 2.0]).with_labels(vec!["A".into()]);
        assert!(matches!(
            track(&[bad], &TrackOptions::default()),
            Err(TrackError::Inconsistent { .. })
        ));
    }

    #[test]
    fn split_in_both_directions() {
        let pts = |ls: &[f64]| TrackedTrace {
            id: 0,
            irrep: None,
            points: ls
                .iter()
                .enumerate()
                .map(|(i, &l)| TracePoint {
                    frequency: i as f64,
                    lambda: l,
                    mode: 0,
                })
                .collect(),
            events: vec![],
        };
        let normal = split_at_poles(&pts(&[-10.0, -5e3, 5e3, 10.0]), 1e3);
        assert_eq!(normal.len(), 2);
        assert!(matches!(
            normal[1].events[0],
            TraceEvent::PoleSplit {
                direction: PoleDirection::NegativeToPositive,
                ..
            }
        ));
        let reversed = split_at_poles(&pts(&[10.0, 5e3, -5e3, -10.0]), 1e3);
        assert!(matches!(
            reversed[0].events[0],
            TraceEvent::PoleSplit {
                direction: PoleDirection::PositiveToNegative,
                ..
            }
        ));
        assert_eq!(split_at_poles(&pts(&[1.0, 2.0, 3.0]), 1e3).len(), 1);
    }

    fn labeled(id: usize, ls: &[f64]) -> TrackedTrace {
        TrackedTrace {
            id,
            irrep: Some("A".into()),
            points: ls
                .iter()
                .enumerate()
                .map(|(i, &l)| TracePoint {
                    frequency: i as f64,
                    lambda: l,
                    mode: id,
                })
                .collect(),
            events: vec![],
        }
    }

    #[test]
    fn gap_classification() {
        let lower = labeled(0, &[0.0, 0.5, 0.99, 0.5, 0.0]);
        let upper = labeled(1, &[2.0, 1.5, 1.0, 1.5, 2.0]);
        let s = detect_avoidances(&[lower.clone(), upper], 1.0);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].lower, s[0].upper), (0, 1));
        assert!((s[0].gap - 0.01).abs() < 1e-12);
        assert_eq!(s[0].kind, AvoidanceKind::Mica);
        let far = labeled(1, &[8.0, 7.5, 5.99, 7.5, 8.0]);
        let s = detect_avoidances(&[lower, far], 1.0);
        assert_eq!(s[0].kind, AvoidanceKind::Maca);
        assert!((s[0].gap - 5.0).abs() < 1e-12);
    }

    #[test]
    fn crossings_are_not_avoidances() {
        let a = labeled(0, &[0.0, 1.0, 2.0, 3.0]);
        let b = labeled(1, &[3.0, 2.0, 1.0, 0.0]);
        assert!(detect_avoidances(&[a, b], 1.0).is_empty());
    }
}
