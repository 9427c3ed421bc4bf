//! Separation of a superimposed trace into per-branch traces.
//!
//! The unknowns are the post-splitter levels `y0`, one per connected branch.
//! Differential evolution minimises the sum of squared residuals between the
//! measured trace and the simulated aggregate over the region of interest;
//! the Pearson correlation over the same region is the quality gate.

use std::time::{Duration, Instant};

use crate::de::{self, DeConfig, DeOutcome, RunOptions};
use crate::error::{Error, Result};
use crate::model::{NetworkDesign, OtdrSettings, RegionOfInterest, Trace};
use crate::waveform::{
    default_roi, isolated_channel_trace, params_from_design_with, simulate_channel, simulate_network_with,
    splitter_index, Noise, PulseShape,
};

/// Minimum correlation for a separation to count as successful.
pub const PEARSON_GATE: f64 = 0.97;

/// Default search window for every `y0`, in dB.
pub const DEFAULT_Y0_BOUNDS: (f64, f64) = (-40.0, 0.0);

/// Product-moment correlation of two equally long vectors.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation("need at least two samples".into()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(saa > 0.0 && sbb > 0.0) || !(saa.is_finite() && sbb.is_finite()) {
        return Err(Error::UndefinedCorrelation(
            "one of the inputs has zero or non-finite variance".into(),
        ));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// A channel's squared linear power over the ROI, split as
/// `10^(0.2 (a y0 + b))`. Almost every sample has `a = 1`, so the
/// `10^(0.2 b)` part is precomputed and scaled by `10^(0.2 y0)`.
#[derive(Debug, Clone)]
struct ChannelBasis {
    unit: Vec<f64>,
    /// `(roi offset, a, b)` for samples whose `y0` coefficient is not 1.
    scaled: Vec<(usize, f64, f64)>,
}

/// Sum of squared residuals between a measured trace and the simulated
/// aggregate, as a function of the `y0` genome.
#[derive(Debug, Clone)]
pub struct SeparationObjective {
    roi: RegionOfInterest,
    measured: Vec<f64>,
    channels: Vec<ChannelBasis>,
}

impl SeparationObjective {
    pub fn dimension(&self) -> usize {
        self.channels.len()
    }

    pub fn roi(&self) -> RegionOfInterest {
        self.roi
    }

    /// Simulated aggregate over the ROI.
    pub fn aggregate(&self, genome: &[f64]) -> Vec<f64> {
        let mut sum = vec![0.0; self.measured.len()];
        for (basis, &y0) in self.channels.iter().zip(genome) {
            let gain = 10f64.powf(0.2 * y0);
            for (s, &u) in sum.iter_mut().zip(&basis.unit) {
                *s += gain * u;
            }
            for &(k, a, b) in &basis.scaled {
                sum[k] += 10f64.powf(0.2 * (a * y0 + b));
            }
        }
        // 10 log10(sqrt(sum)) with sum = sum of squared linear powers
        sum.into_iter().map(|s| 10.0 * s.sqrt().log10()).collect()
    }

    pub fn fitness(&self, genome: &[f64]) -> f64 {
        if genome.len() != self.channels.len() {
            return f64::NAN;
        }
        self.aggregate(genome)
            .iter()
            .zip(&self.measured)
            .map(|(s, m)| (m - s) * (m - s))
            .sum()
    }
}

/// Builds the fitting objective with the default pulse shape.
pub fn build_objective(
    measured: &Trace,
    design: &NetworkDesign,
    settings: &OtdrSettings,
    roi: RegionOfInterest,
) -> Result<SeparationObjective> {
    build_objective_with(measured, design, settings, roi, &PulseShape::default())
}

pub fn build_objective_with(
    measured: &Trace,
    design: &NetworkDesign,
    settings: &OtdrSettings,
    roi: RegionOfInterest,
    shape: &PulseShape,
) -> Result<SeparationObjective> {
    design.validate()?;
    if !measured.matches_settings(settings) {
        return Err(Error::Grid(format!(
            "measured trace ({} samples, {} m) does not match the settings grid ({} samples, {} m)",
            measured.len(),
            measured.resolution_m(),
            settings.sample_count(),
            settings.resolution_m
        )));
    }
    let splitter = splitter_index(design, settings)?;
    if roi.start <= splitter || roi.end > measured.len() {
        return Err(Error::Range(format!(
            "region [{}, {}) must lie after the splitter (sample {splitter}) and inside the trace",
            roi.start, roi.end
        )));
    }
    let measured_roi = roi.slice(measured.samples())?;
    if measured_roi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "measured trace has non-finite samples inside the region of interest".into(),
        ));
    }

    let mut channels = Vec::with_capacity(design.connected_count());
    for b in design.connected() {
        let at0 = simulate_channel(&params_from_design_with(design, b.id, 0.0, settings, shape)?)?;
        let at1 = simulate_channel(&params_from_design_with(design, b.id, 1.0, settings, shape)?)?;
        let mut unit = Vec::with_capacity(roi.len());
        let mut scaled = Vec::new();
        for (offset, g) in (roi.start..roi.end).enumerate() {
            // local 1-based index x = g - splitter lives at array slot x - 1
            let i = g - splitter - 1;
            let coeff = at1[i] - at0[i];
            if (coeff - 1.0).abs() < 1e-9 {
                unit.push(10f64.powf(0.2 * at0[i]));
            } else {
                unit.push(0.0);
                scaled.push((offset, coeff, at0[i]));
            }
        }
        channels.push(ChannelBasis { unit, scaled });
    }
    Ok(SeparationObjective {
        roi,
        measured: measured_roi.to_vec(),
        channels,
    })
}

/// Knobs beyond the DE configuration.
#[derive(Debug, Clone, Default)]
pub struct SeparationOptions {
    /// Overrides the default region of interest.
    pub roi: Option<RegionOfInterest>,
    /// Genomes injected into the initial population.
    pub initial: Vec<Vec<f64>>,
    pub shape: PulseShape,
}

#[derive(Debug, Clone)]
pub struct SeparationResult {
    pub channel_ids: Vec<u32>,
    pub y0_per_channel: Vec<f64>,
    /// What the OTDR would show with only that branch plugged in.
    pub per_channel_traces: Vec<Trace>,
    pub fitted_aggregate: Trace,
    pub roi: RegionOfInterest,
    pub pearson: f64,
    pub residual_sse: f64,
    pub generations_used: usize,
    pub history: Vec<f64>,
    pub elapsed: Duration,
    /// Pairs of branches whose ends fall within one dead zone of each other.
    pub ambiguous: Vec<(u32, u32)>,
}

impl SeparationResult {
    pub fn passed(&self) -> bool {
        self.pearson >= PEARSON_GATE
    }
}

pub fn separate(
    measured: &Trace,
    design: &NetworkDesign,
    settings: &OtdrSettings,
    de_config: &DeConfig,
) -> Result<SeparationResult> {
    separate_with(
        measured,
        design,
        settings,
        de_config,
        SeparationOptions::default(),
    )
}

/// Runs the fit. An empty `de_config.bounds` means [`DEFAULT_Y0_BOUNDS`] for
/// every channel.
pub fn separate_with(
    measured: &Trace,
    design: &NetworkDesign,
    settings: &OtdrSettings,
    de_config: &DeConfig,
    options: SeparationOptions,
) -> Result<SeparationResult> {
    let started = Instant::now();
    let shape = options.shape;
    let roi = match options.roi {
        Some(r) => r,
        None => default_roi(design, settings, &shape)?,
    };
    let objective = build_objective_with(measured, design, settings, roi, &shape)?;
    let dim = objective.dimension();

    let mut config = de_config.clone();
    if config.bounds.is_empty() {
        config.bounds = vec![DEFAULT_Y0_BOUNDS; dim];
    } else if config.bounds.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            actual: config.bounds.len(),
        });
    }
    let run_options = RunOptions {
        initial: options.initial,
        ..RunOptions::default()
    };
    let DeOutcome {
        best,
        history,
        generations,
    } = de::run_with(|g| objective.fitness(g), &config, run_options)?;

    let y0 = best.genome;
    let channel_ids = design.connected_ids();
    let fitted_aggregate = simulate_network_with(design, &y0, settings, &shape, Noise::NONE)?;
    let per_channel_traces = channel_ids
        .iter()
        .zip(&y0)
        .map(|(&id, &y)| isolated_channel_trace(design, id, y, settings, &shape))
        .collect::<Result<Vec<_>>>()?;
    let pearson = pearson(
        roi.slice(measured.samples())?,
        roi.slice(fitted_aggregate.samples())?,
    )?;
    let residual_sse = best.fitness.unwrap_or(f64::INFINITY);

    Ok(SeparationResult {
        channel_ids,
        y0_per_channel: y0,
        per_channel_traces,
        fitted_aggregate,
        roi,
        pearson,
        residual_sse,
        generations_used: generations,
        history,
        elapsed: started.elapsed(),
        ambiguous: ambiguous_pairs(design, settings, &shape),
    })
}

/// Connected branches whose lengths differ by less than one dead-zone width.
pub fn ambiguous_pairs(
    design: &NetworkDesign,
    settings: &OtdrSettings,
    shape: &PulseShape,
) -> Vec<(u32, u32)> {
    let width_km = shape.dead_zone_samples() as f64 * settings.step_km();
    let branches: Vec<_> = design.connected().collect();
    let mut pairs = Vec::new();
    for (i, a) in branches.iter().enumerate() {
        for b in &branches[i + 1..] {
            if (a.length_km - b.length_km).abs() < width_km {
                pairs.push((a.id, b.id));
            }
        }
    }
    pairs
}
