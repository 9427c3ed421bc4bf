//! Shared inputs for the benchmarks.

use otdr_split::fixtures;
use otdr_split::waveform::{nominal_y0, simulate_network, Noise};
use otdr_split::{NetworkDesign, OtdrSettings, Trace};

pub struct Case {
    pub design: NetworkDesign,
    pub settings: OtdrSettings,
    pub truth: Vec<f64>,
    pub measured: Trace,
}

/// Reference network on a `resolution_m` grid with a noiseless aggregate.
pub fn reference_case(resolution_m: f64) -> Case {
    let design = fixtures::reference_network();
    let settings = OtdrSettings::new(25.0, resolution_m).expect("valid grid");
    let truth = nominal_y0(&design, &settings).expect("design fits the grid");
    let measured = simulate_network(&design, &truth, &settings, Noise::NONE).expect("simulates");
    Case {
        design,
        settings,
        truth,
        measured,
    }
}
