//! Subduction of point-group representations for characteristic-mode
//! analysis.
//!
//! The crate covers the analytic side (spherical-shell eigenvalue traces,
//! irrep subduction along point-group chains, crossing-avoidance prediction)
//! and the numerical side (generalized eigenproblem solving, projection-based
//! mode classification, correlation tracking with same-irrep no-crossing
//! enforcement).

pub mod assignment;
pub mod cmsolver;
pub mod io;
pub mod pointgroup;
pub mod sphwave;
pub mod symaction;
pub mod subduction;
pub mod tracediagram;
pub mod tracker;

pub use cmsolver::{classify_modes, solve_cm, ClassifyOptions, CmError, ImpedancePair, ModeLabel, ModeSet};
pub use pointgroup::{
    builtin_group, o3_character, verify_group, GroupError, Irrep, O3IrrepId, Parity, PointGroup,
    Polarization, SymmetryOperation,
};
pub use sphwave::{eigenvalue, spherical_bessel, BesselKind, SphwaveError};
pub use subduction::{chain_subduce, subduce, Keep, Multiplicity, Parent, ParityFilter, SubductionResult};
pub use symaction::{parity_check, project, FieldKind, GroupAction, PlaneOp, ProjectionReport};
pub use tracediagram::{build_diagram, find_crossings, predict_avoidances, Diagram, Verdict};
pub use tracker::{detect_avoidances, track, Snapshot, TrackOptions, TrackedTrace};
