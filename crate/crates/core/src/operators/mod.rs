//! Operator measures and the two kinds of representation: general state
//! representations and maximally entangled ones in canonical trace form.

mod measure;
mod rep;
mod state;

pub use measure::{HermMatrix, MeasureFailure, MeasureKind, MeasureReport, OperatorMeasure};
pub use rep::MaxEntRep;
pub use state::{canonical_max_ent_state, is_maximally_entangled, schmidt_decompose, SchmidtForm, StateRep};
