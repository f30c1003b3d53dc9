//! Subordinator models and exact path samplers.

mod path;
mod sample;
mod spec;

pub use path::{Interpolation, PathSample};
pub(crate) use sample::{exp1, open_unit};
pub use sample::{
    sample_increment, sample_passage_time, sample_path, sample_path_past_level, sample_stable_increment, FirstPassage,
    SampleMode, StableJumpApprox,
};
pub use spec::{JumpLaw, SubordinatorSpec};
