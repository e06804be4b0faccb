//! Irrep-labeled analytic trace diagrams.
//!
//! Every spherical-shell trace `(t, s)` is labeled with the irreps it
//! subduces onto in a target group. Two traces whose labels share an irrep
//! cannot cross once the symmetry is lowered to that group, so every
//! crossing in the analytic diagram between such traces marks the location
//! of a crossing avoidance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointgroup::{O3IrrepId, PointGroup};
use crate::sphwave::{linspace, sample_trace, SphwaveError, TraceSample};
use crate::subduction::{subduce, Keep, Parent, ParityFilter, SubductionError, SubductionJson, SubductionResult};

/// Largest multipole order accepted by [`build_diagram`].
pub const MAX_DIAGRAM_ORDER: u32 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagramError {
    #[error("invalid diagram request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sphwave(#[from] SphwaveError),
    #[error(transparent)]
    Subduction(#[from] SubductionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub source: O3IrrepId,
    pub samples: Vec<TraceSample>,
    /// Pole locations in `kR/pi`.
    pub poles: Vec<f64>,
    pub label: SubductionResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagram {
    pub group: String,
    pub keep: Keep,
    /// Sample abscissae, `kR/pi`.
    pub grid: Vec<f64>,
    pub traces: Vec<LabeledTrace>,
}

/// Samples all traces with `t <= tmax` on `points` values of `kR/pi` in
/// `[lo, hi]` and labels them by subduction onto `group`. Traces whose
/// filtered label is empty are dropped.
pub fn build_diagram(
    tmax: u32,
    lo: f64,
    hi: f64,
    points: usize,
    group: &PointGroup,
    filter: &ParityFilter,
) -> Result<Diagram, DiagramError> {
    if tmax == 0 || tmax > MAX_DIAGRAM_ORDER {
        return Err(DiagramError::Invalid(format!(
            "tmax must be in 1..={MAX_DIAGRAM_ORDER}, got {tmax}"
        )));
    }
    if !(lo > 0.0 && hi > lo) || points < 2 {
        return Err(DiagramError::Invalid(format!(
            "need 0 < lo < hi and at least 2 points (lo={lo}, hi={hi}, points={points})"
        )));
    }
    let grid = linspace(lo, hi, points);
    let ids: Vec<O3IrrepId> = (1..=tmax)
        .flat_map(|t| [O3IrrepId::te(t), O3IrrepId::tm(t)])
        .collect();
    let traces = ids
        .par_iter()
        .map(|&id| -> Result<Option<LabeledTrace>, DiagramError> {
            let label = subduce(&Parent::O3(id), group, filter)?;
            if label.is_empty() {
                return Ok(None);
            }
            let (samples, poles) = sample_trace(id, &grid)?;
            Ok(Some(LabeledTrace {
                source: id,
                samples,
                poles,
                label,
            }))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(Diagram {
        group: group.name().to_string(),
        keep: filter.keep,
        grid,
        traces,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "irreps")]
pub enum Verdict {
    AllowedCrossing,
    ForbiddenFor(Vec<String>),
}

impl Verdict {
    pub fn is_forbidden(&self) -> bool {
        matches!(self, Verdict::ForbiddenFor(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    /// Indices into [`Diagram::traces`], `trace_a < trace_b`.
    pub trace_a: usize,
    pub trace_b: usize,
    pub source_a: O3IrrepId,
    pub source_b: O3IrrepId,
    /// Linearly interpolated crossing abscissa.
    pub kr_over_pi: f64,
    /// Eigenvalue at the crossing (interpolated along trace a).
    pub lambda: f64,
    pub shared_irreps: Vec<String>,
    pub verdict: Verdict,
    /// Which trace is lower just before the crossing.
    pub lower_before: O3IrrepId,
}

fn usable(s: &TraceSample) -> Option<f64> {
    if s.pole_adjacent {
        None
    } else {
        s.lambda
    }
}

fn crossings_between(diagram: &Diagram, a: usize, b: usize) -> Vec<CrossingEvent> {
    let ta = &diagram.traces[a];
    let tb = &diagram.traces[b];
    let shared = ta.label.shared_irreps(&tb.label);
    let verdict = if shared.is_empty() {
        Verdict::AllowedCrossing
    } else {
        Verdict::ForbiddenFor(shared.clone())
    };
    let mut out = Vec::new();
    for i in 0..diagram.grid.len().saturating_sub(1) {
        let (Some(a0), Some(a1), Some(b0), Some(b1)) = (
            usable(&ta.samples[i]),
            usable(&ta.samples[i + 1]),
            usable(&tb.samples[i]),
            usable(&tb.samples[i + 1]),
        ) else {
            continue;
        };
        let d0 = a0 - b0;
        let d1 = a1 - b1;
        if d0 == 0.0 || d0 * d1 > 0.0 {
            continue;
        }
        let frac = d0 / (d0 - d1);
        let (x0, x1) = (diagram.grid[i], diagram.grid[i + 1]);
        out.push(CrossingEvent {
            trace_a: a,
            trace_b: b,
            source_a: ta.source,
            source_b: tb.source,
            kr_over_pi: x0 + frac * (x1 - x0),
            lambda: a0 + frac * (a1 - a0),
            shared_irreps: shared.clone(),
            verdict: verdict.clone(),
            lower_before: if d0 < 0.0 { ta.source } else { tb.source },
        });
    }
    out
}

/// All sign changes of `lambda_a - lambda_b` between adjacent grid points,
/// for every unordered pair of distinct traces. Cells touching a pole are
/// skipped.
pub fn find_crossings(diagram: &Diagram) -> Vec<CrossingEvent> {
    let n = diagram.traces.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    pairs
        .par_iter()
        .flat_map_iter(|&(a, b)| crossings_between(diagram, a, b))
        .collect()
}

/// A crossing that the lowered symmetry forbids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidancePrediction {
    pub event: CrossingEvent,
    /// Sub-traces that must repel; other components still cross.
    pub affected_irreps: Vec<String>,
    /// The lower branch near the crossing develops an indentation.
    pub indentation: O3IrrepId,
    /// The upper branch develops a peak.
    pub peak: O3IrrepId,
}

pub fn predict_avoidances(crossings: &[CrossingEvent]) -> Vec<AvoidancePrediction> {
    crossings
        .iter()
        .filter_map(|ev| match &ev.verdict {
            Verdict::ForbiddenFor(irreps) => {
                let upper = if ev.lower_before == ev.source_a {
                    ev.source_b
                } else {
                    ev.source_a
                };
                Some(AvoidancePrediction {
                    event: ev.clone(),
                    affected_irreps: irreps.clone(),
                    indentation: ev.lower_before,
                    peak: upper,
                })
            }
            Verdict::AllowedCrossing => None,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceJson {
    pub t: u32,
    pub s: String,
    pub label: SubductionJson,
    pub poles_kr_over_pi: Vec<f64>,
    /// `None` marks a pole gap.
    pub lambda: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionJson {
    pub group: String,
    pub parity: Keep,
    pub kr_over_pi: Vec<f64>,
    pub traces: Vec<TraceJson>,
    pub crossings: Vec<CrossingEvent>,
    pub avoidances: Vec<AvoidancePrediction>,
}

impl Diagram {
    pub fn to_json(&self, crossings: &[CrossingEvent], avoidances: &[AvoidancePrediction]) -> PredictionJson {
        PredictionJson {
            group: self.group.clone(),
            parity: self.keep,
            kr_over_pi: self.grid.clone(),
            traces: self
                .traces
                .iter()
                .map(|tr| TraceJson {
                    t: tr.source.t,
                    s: tr.source.s.to_string(),
                    label: tr.label.to_json(),
                    poles_kr_over_pi: tr.poles.clone(),
                    lambda: tr.samples.iter().map(|s| s.lambda).collect(),
                })
                .collect(),
            crossings: crossings.to_vec(),
            avoidances: avoidances.to_vec(),
        }
    }

    pub fn trace(&self, id: O3IrrepId) -> Option<&LabeledTrace> {
        self.traces.iter().find(|t| t.source == id)
    }
}
