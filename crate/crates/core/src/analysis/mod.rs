//! Recurrence classes, resistances, potentials and stochastically stable
//! states.

pub mod arborescence;
pub mod graph;
pub mod predict;
pub mod ritel_class;
pub mod scc;
pub mod stationary;
pub mod verify;

pub use arborescence::{min_arborescence, Arborescence};
pub use graph::{class_resistance, Potentials, ResistanceGraph};
pub use predict::{analyze, predict_sss_iodl, predict_sss_itel, Analysis, SssCase, SssPrediction};
pub use scc::{recurrence_classes, Classes};
pub use stationary::{stationary_distribution, Stationary, StationaryError};
pub use ritel_class::{classify_ritel_states, predict_sss_ritel, RitelCase, RitelClassification, RitelPrediction};
pub use verify::{verify_ritel_superset, verify_theorem, VerifyReport};
