//! Doubly-selective OFDM link: fading generation, CIR/CFR matrices and the
//! frequency-domain received signal including intercarrier interference.

mod config;
mod dft;
mod fading;
mod link;
mod pilots;
mod profile;
mod realization;

pub use config::{doppler_from_speed, SystemConfig};
pub use dft::UnitaryDft;
pub use fading::{generate_fading, FadingSpec, TapGains, DEFAULT_SINUSOIDS};
pub use link::{apply_channel, generate_subframe, noise_var_from_snr, random_symbols, simulate_subframe, Subframe};
pub use pilots::{PilotPattern, PilotPreset};
pub use profile::{DelayProfile, ProfileKind, EVA_TAPS};
pub use realization::{build_cir_matrix, cfr_from_cir, dump_cfr_magnitude, matrix_to_csv, ChannelRealization, CMatrix};
