//! Classical stage-1 processing: LS at the pilots, linear grid interpolation,
//! single-tap hard decisions and a 2D LMMSE comparator.

mod equalize;
mod lmmse;
mod ls;

pub use equalize::{equalize_hard, equalize_hard_with, SymbolDecisions, MIN_CHANNEL_MAGNITUDE};
pub use lmmse::{lmmse_estimate, ChannelStats, LmmseEstimator, DIAGONAL_LOADING};
pub use ls::{interpolate_grid, ls_at_pilots, ls_interpolated, InitialEstimate, PilotEstimates};
