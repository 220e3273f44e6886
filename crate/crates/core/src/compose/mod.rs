//! Game rules: does a set of detected tiles build the requested figure?

mod check;
mod template;

pub use check::{
    check_composition, feedback, ComposeTolerance, CompositionResult, ExtraTile, GroupChoice, MissingSlot,
    RigidTransform, SlotMatch,
};
pub use template::{CompositionTemplate, PartGroup, PartSlot, TemplateRegistry};
