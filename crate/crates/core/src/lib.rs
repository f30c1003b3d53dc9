// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditioning;
pub mod error;
pub mod inversion;
pub mod ladderbox;
pub mod lamperti;
pub mod lastpassage;
pub mod mc;
pub mod models;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod special;
pub mod suites;
pub mod verify;

pub use conditioning::{HitLaw, HitMethod, StripLaw, StripMethod};
pub use error::{Error, Result};
pub use inversion::EulerInversion;
pub use ladderbox::LadderBoxLaw;
pub use lastpassage::{CtmcSpec, Excursions, LastPassageLaw};
pub use mc::Estimate;
pub use models::{JumpLaw, PathSample, SampleMode, SubordinatorSpec};
pub use potential::{PotentialTable, Provenance};
pub use rng::RngStream;
pub use suites::{SuiteOptions, SuiteResult, SUITES};
pub use verify::{Status, TestReport, Thresholds};
