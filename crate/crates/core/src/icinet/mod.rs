//! Two-stage channel refinement: a per-subcarrier PreDNN fed with ICI-relevant
//! neighbors, followed by a small residual CNN over the whole grid.

pub mod casresnet;
pub mod model;
pub mod predn;
pub mod train;

pub use casresnet::{casresnet_refine, CasResNetConfig};
pub use model::{icinet_forward, IciNet, RefinedEstimate};
pub use predn::{assemble_predn_input, grid_to_tensor, predn_features, predn_refine, tensor_to_grid, PreDnnConfig};
pub use train::{
    composed_backward, train_casres_only, train_end_to_end, train_mode, train_predn, train_sequential, EpochRecord, LossTrace, Sample,
    TrainConfig, TrainMode,
};
