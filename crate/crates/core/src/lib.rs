//! Simulation and separation of superimposed OTDR traces behind a passive
//! 1xN splitter.
//!
//! The forward model ([`waveform`]) synthesises each branch's trace from a
//! four-segment piecewise shape and combines them with the splitter sum
//! ([`superpose`]). The inverse problem ([`separator`]) recovers the
//! post-splitter level of every branch from one aggregate trace with
//! differential evolution ([`de`]).

pub mod calibration;
pub mod de;
pub mod design_file;
pub mod error;
pub mod fixtures;
pub mod geo;
pub mod harness;
pub mod model;
pub mod separator;
pub mod superpose;
pub mod trace_io;
pub mod waveform;

pub use calibration::{compare, detect_fiber_end, CalibrationDiff, CalibrationRecord, EndDetector};
pub use de::{DeConfig, DeOutcome, Individual};
pub use design_file::DesignFile;
pub use error::{Error, Result};
pub use geo::{locate_event, BranchGeometry, CoordinateSystem};
pub use harness::{run_sequence, SequenceName, SequencePlan, StepReport};
pub use model::{Branch, NetworkDesign, OtdrSettings, RegionOfInterest, Trace, DISCONNECTED};
pub use separator::{pearson, separate, SeparationResult, PEARSON_GATE};
pub use superpose::{db_to_linear, superpose, LinearIntensity};
pub use trace_io::{parse_csv, write_csv};
pub use waveform::{simulate_channel, simulate_network, ChannelSimParams, Noise, PulseShape};
