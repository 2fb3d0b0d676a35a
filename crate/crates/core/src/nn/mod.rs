//! Minimal neural-network toolkit: autodiff tape, parameters, Adam, LSTMs.

pub mod adam;
pub mod lstm;
pub mod params;
pub mod tape;
pub mod vocab;

pub use adam::Adam;
pub use lstm::{BiLstm, Dropout, Encoded, Lstm};
pub use params::{Grads, ParamId, ParamStore, Tensor};
pub use tape::{Tape, Var};
pub use vocab::Vocab;
