//! Synthetic acoustic-microscopy data: reference pulse, two-interface echoes,
//! phantoms and raster acquisition of speed-of-sound maps.

pub mod acquire;
pub mod echo;
pub mod phantom;
pub mod pulse;

pub use acquire::{acquire_and_map, acquire_rf, Acquisition, AcquisitionSettings, RfCube};
pub use echo::{
    delay_from_sos, envelope, estimate_echo_params, minus6db_width, sos_from_delays, synth_echo, EchoEstimate,
    EchoParams, EchoRecord,
};
pub use phantom::{generate_phantom, Phantom, PhantomSpec, DEFAULT_COUPLING_SPEED, DEFAULT_THICKNESS};
pub use pulse::{synth_reference, ReferencePulse};
