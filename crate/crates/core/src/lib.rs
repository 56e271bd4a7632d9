//! Discovery of decision synchronization patterns from event logs.
//!
//! The pipeline replays a log over an unguarded timed colored Petri net,
//! turns the states in which a transition could have fired into a labeled
//! table per pattern candidate, trains a decision tree on every table and
//! reads guard constraints off the pure `False` leaves.

pub mod config;
pub mod constraint;
pub mod error;
pub mod event_log;
pub mod extract;
pub mod net;
pub mod patterns;
pub mod replay;
pub mod report;
pub mod sim;
pub mod tree;
pub mod value;

pub use constraint::{Agg, Atom, AttrRef, Constraint, Feature, Op, Scalar};
pub use error::{Error, Result};
pub use event_log::{Event, Log, TimeFormat};
pub use net::{Binding, DelaySpec, Marking, Net, Place, PlaceKind, Token, Transition};
pub use value::{AttrType, Time, Value};
