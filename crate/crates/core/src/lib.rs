pub mod circuits;
pub mod cli;
pub mod decider;
pub mod clock;
pub mod error;
pub mod excited;
pub mod gadget;
pub mod glhle;
pub mod kitaev5;
pub mod operators;
pub mod state;
pub mod twolocal;
pub mod verify;

pub use error::{Error, Result};
