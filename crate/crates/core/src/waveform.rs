//! Piecewise synthesis of a single branch's post-splitter trace, and of the
//! whole-network aggregate.
//!
//! A channel is simulated on a local 1-based index `x` running from the first
//! sample after the splitter (`x = 1`) to the end of the acquisition grid
//! (`x = D`). With `A` the last sample before the fibre end,
//! `B = A + peak_len` and `C = B + decline_len`:
//!
//! | samples        | value                                    |
//! |----------------|------------------------------------------|
//! | `1 ..= A`      | `y0 + m x` (Rayleigh backscatter)        |
//! | `A + 1`        | `(y(A) + v_f) * sqrt(2)/2`               |
//! | `A + 2 ..= B`  | `y(A) + v_f` (Fresnel plateau)           |
//! | `B + 1 ..= C`  | `y(B) + decline_slope (x - B)`          |
//! | `C + 1 ..= D`  | `y(C) + tail_coeff ln(x - C) + tail_offset` |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{NetworkDesign, OtdrSettings, RegionOfInterest, Trace};
use crate::superpose::superpose;

/// Grid spacing the default pulse constants were measured on, in metres.
pub const REFERENCE_RESOLUTION_M: f64 = 0.5;

/// Shape constants of a reflective fibre end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    /// Rayleigh slope in dB per sample on the reference grid.
    pub slope_at_reference: f64,
    /// Fresnel rise in dB.
    pub fresnel_rise: f64,
    pub peak_len: usize,
    pub decline_len: usize,
    /// dB per sample.
    pub decline_slope: f64,
    pub tail_coeff: f64,
    pub tail_offset: f64,
}

impl Default for PulseShape {
    fn default() -> Self {
        PulseShape {
            slope_at_reference: (-1.0f64 / 1150.0).atan(),
            fresnel_rise: 21.0,
            peak_len: 11,
            decline_len: 4,
            decline_slope: -3.86,
            tail_coeff: -2.41,
            tail_offset: 1.0,
        }
    }
}

impl PulseShape {
    /// Rayleigh slope scaled linearly to a grid of `resolution_m`.
    pub fn slope_for(&self, resolution_m: f64) -> f64 {
        self.slope_at_reference * resolution_m / REFERENCE_RESOLUTION_M
    }

    /// Samples from the first Fresnel sample to the end of the linear decline.
    pub fn dead_zone_samples(&self) -> usize {
        self.peak_len + self.decline_len
    }

    pub fn params(
        &self,
        y0: f64,
        fiber_end: usize,
        len: usize,
        resolution_m: f64,
    ) -> Result<ChannelSimParams> {
        let p = ChannelSimParams {
            y0,
            slope: self.slope_for(resolution_m),
            fresnel_rise: self.fresnel_rise,
            fiber_end,
            peak_len: self.peak_len,
            decline_len: self.decline_len,
            decline_slope: self.decline_slope,
            tail_coeff: self.tail_coeff,
            tail_offset: self.tail_offset,
            len,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Parameters of one simulated channel, in local 1-based sample indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSimParams {
    /// Power right after the splitter, dB.
    pub y0: f64,
    /// Rayleigh slope, dB per sample.
    pub slope: f64,
    pub fresnel_rise: f64,
    /// `A`: last sample before the fibre end.
    pub fiber_end: usize,
    pub peak_len: usize,
    pub decline_len: usize,
    pub decline_slope: f64,
    pub tail_coeff: f64,
    pub tail_offset: f64,
    /// `D`: total number of local samples.
    pub len: usize,
}

impl ChannelSimParams {
    /// Default shape on the reference grid.
    pub fn new(y0: f64, fiber_end: usize, len: usize) -> Result<Self> {
        PulseShape::default().params(y0, fiber_end, len, REFERENCE_RESOLUTION_M)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.y0,
            self.slope,
            self.fresnel_rise,
            self.decline_slope,
            self.tail_coeff,
            self.tail_offset,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite channel constant".into()));
        }
        if self.fiber_end < 1 {
            return Err(Error::Parameter(
                "fibre end must lie after the splitter (A >= 1)".into(),
            ));
        }
        if self.peak_len < 1 || self.decline_len < 1 {
            return Err(Error::Parameter(
                "peak and decline must each span at least one sample".into(),
            ));
        }
        if self.decline_end() >= self.len {
            return Err(Error::Parameter(format!(
                "dead zone ends at sample {} but the channel only has {} samples",
                self.decline_end(),
                self.len
            )));
        }
        Ok(())
    }

    /// `B`.
    pub fn peak_end(&self) -> usize {
        self.fiber_end + self.peak_len
    }

    /// `C`.
    pub fn decline_end(&self) -> usize {
        self.peak_end() + self.decline_len
    }

    /// Closed-form value at local sample `x` (1-based).
    pub fn value_at(&self, x: usize) -> f64 {
        let a = self.fiber_end;
        let b = self.peak_end();
        let c = self.decline_end();
        let at_a = self.y0 + self.slope * a as f64;
        let plateau = at_a + self.fresnel_rise;
        let first_peak = plateau * std::f64::consts::FRAC_1_SQRT_2;
        let at_b = if self.peak_len == 1 { first_peak } else { plateau };
        let at_c = at_b + self.decline_slope * self.decline_len as f64;
        match x {
            _ if x <= a => self.y0 + self.slope * x as f64,
            _ if x == a + 1 => first_peak,
            _ if x <= b => plateau,
            _ if x <= c => at_b + self.decline_slope * (x - b) as f64,
            _ => at_c + self.tail_coeff * ((x - c) as f64).ln() + self.tail_offset,
        }
    }
}

/// Writes the piecewise amplitudes over a `D`-sample array; element `i` holds
/// local sample `x = i + 1`.
pub fn simulate_channel(params: &ChannelSimParams) -> Result<Vec<f64>> {
    params.validate()?;
    let a = params.fiber_end;
    let b = params.peak_end();
    let c = params.decline_end();
    let mut y = vec![0.0; params.len];
    // y[x - 1] holds y(x)
    for x in 1..=a {
        y[x - 1] = params.y0 + params.slope * x as f64;
    }
    let at_a = y[a - 1];
    y[a] = (at_a + params.fresnel_rise) * std::f64::consts::FRAC_1_SQRT_2;
    for x in a + 2..=b {
        y[x - 1] = at_a + params.fresnel_rise;
    }
    let at_b = y[b - 1];
    for x in b + 1..=c {
        y[x - 1] = at_b + params.decline_slope * (x - b) as f64;
    }
    let at_c = y[c - 1];
    for x in c + 1..=params.len {
        y[x - 1] = at_c + params.tail_coeff * ((x - c) as f64).ln() + params.tail_offset;
    }
    Ok(y)
}

/// Global sample index of the splitter.
pub fn splitter_index(design: &NetworkDesign, settings: &OtdrSettings) -> Result<usize> {
    settings.index_of_distance(design.feeder_length_km)
}

/// Channel parameters for one connected branch under the default shape.
pub fn params_from_design(
    design: &NetworkDesign,
    branch_id: u32,
    y0: f64,
    settings: &OtdrSettings,
) -> Result<ChannelSimParams> {
    params_from_design_with(design, branch_id, y0, settings, &PulseShape::default())
}

pub fn params_from_design_with(
    design: &NetworkDesign,
    branch_id: u32,
    y0: f64,
    settings: &OtdrSettings,
    shape: &PulseShape,
) -> Result<ChannelSimParams> {
    let branch = design
        .branch(branch_id)
        .ok_or_else(|| Error::InvalidInput(format!("unknown branch id {branch_id}")))?;
    if !branch.connected {
        return Err(Error::InvalidInput(format!(
            "branch {branch_id} is not connected"
        )));
    }
    let splitter = splitter_index(design, settings)?;
    let end = settings.index_of_distance(design.feeder_length_km + branch.length_km)?;
    if end <= splitter {
        return Err(Error::Parameter(format!(
            "branch {branch_id} ends at or before the splitter"
        )));
    }
    let len = settings.sample_count() - 1 - splitter;
    shape.params(y0, end - splitter, len, settings.resolution_m)
}

/// Level right after the splitter implied by the design losses.
///
/// Feeder Rayleigh line at the splitter minus the branch insertion loss.
pub fn nominal_y0(design: &NetworkDesign, settings: &OtdrSettings) -> Result<Vec<f64>> {
    let splitter = splitter_index(design, settings)?;
    let at_splitter = feeder_level(design, settings, &PulseShape::default(), splitter);
    Ok(design
        .connected()
        .map(|b| at_splitter - b.insertion_loss_db)
        .collect())
}

fn feeder_level(design: &NetworkDesign, settings: &OtdrSettings, shape: &PulseShape, index: usize) -> f64 {
    design.launch_level_db + shape.slope_for(settings.resolution_m) * index as f64
}

/// Additive zero-mean Gaussian noise in the dB domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub sigma_db: f64,
    pub seed: u64,
}

impl Noise {
    pub const NONE: Noise = Noise {
        sigma_db: 0.0,
        seed: 0,
    };

    pub fn gaussian(sigma_db: f64, seed: u64) -> Self {
        Noise { sigma_db, seed }
    }

    fn apply(&self, samples: &mut [f64]) -> Result<()> {
        if !(self.sigma_db.is_finite() && self.sigma_db >= 0.0) {
            return Err(Error::Parameter(format!(
                "noise sigma must be >= 0, got {}",
                self.sigma_db
            )));
        }
        if self.sigma_db == 0.0 {
            return Ok(());
        }
        let normal = Normal::new(0.0, self.sigma_db).map_err(|e| Error::Parameter(format!("noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for s in samples {
            *s += normal.sample(&mut rng);
        }
        Ok(())
    }
}

/// Local channel arrays for every connected branch, in design order.
pub fn simulate_channels(
    design: &NetworkDesign,
    y0_per_channel: &[f64],
    settings: &OtdrSettings,
    shape: &PulseShape,
) -> Result<Vec<Vec<f64>>> {
    design.validate()?;
    let expected = design.connected_count();
    if y0_per_channel.len() != expected {
        return Err(Error::Dimension {
            expected,
            actual: y0_per_channel.len(),
        });
    }
    design
        .connected()
        .zip(y0_per_channel)
        .map(|(b, &y0)| {
            let p = params_from_design_with(design, b.id, y0, settings, shape)?;
            simulate_channel(&p)
        })
        .collect()
}

/// Aggregate trace of the whole network with the default shape.
pub fn simulate_network(
    design: &NetworkDesign,
    y0_per_channel: &[f64],
    settings: &OtdrSettings,
    noise: Noise,
) -> Result<Trace> {
    simulate_network_with(design, y0_per_channel, settings, &PulseShape::default(), noise)
}

pub fn simulate_network_with(
    design: &NetworkDesign,
    y0_per_channel: &[f64],
    settings: &OtdrSettings,
    shape: &PulseShape,
    noise: Noise,
) -> Result<Trace> {
    settings.validate()?;
    let channels = simulate_channels(design, y0_per_channel, settings, shape)?;
    let splitter = splitter_index(design, settings)?;
    let post_start = settings.distance_of_index(splitter + 1);
    let post: Vec<Trace> = channels
        .into_iter()
        .map(|c| Trace::new(post_start, settings.resolution_m, c))
        .collect::<Result<_>>()?;
    let aggregate = superpose(&post)?;

    let mut samples = Vec::with_capacity(settings.sample_count());
    samples.extend((0..=splitter).map(|g| feeder_level(design, settings, shape, g)));
    samples.extend_from_slice(aggregate.samples());
    noise.apply(&mut samples)?;
    Trace::on_grid(settings, samples)
}

/// Trace seen with only `branch_id` plugged in: feeder line, then that channel.
pub fn isolated_channel_trace(
    design: &NetworkDesign,
    branch_id: u32,
    y0: f64,
    settings: &OtdrSettings,
    shape: &PulseShape,
) -> Result<Trace> {
    let p = params_from_design_with(design, branch_id, y0, settings, shape)?;
    let channel = simulate_channel(&p)?;
    let splitter = splitter_index(design, settings)?;
    let mut samples = Vec::with_capacity(settings.sample_count());
    samples.extend((0..=splitter).map(|g| feeder_level(design, settings, shape, g)));
    samples.extend(channel);
    Trace::on_grid(settings, samples)
}

/// Default fitting window: from the end of the splitter's dead zone to the
/// end of the farthest branch's linear decline.
pub fn default_roi(
    design: &NetworkDesign,
    settings: &OtdrSettings,
    shape: &PulseShape,
) -> Result<RegionOfInterest> {
    let splitter = splitter_index(design, settings)?;
    let mut farthest = None;
    for b in design.connected() {
        let p = params_from_design_with(design, b.id, 0.0, settings, shape)?;
        farthest = farthest.max(Some(splitter + p.decline_end()));
    }
    let farthest = farthest.ok_or_else(|| Error::Parameter("no connected branch".into()))?;
    let start = splitter + 1 + shape.dead_zone_samples();
    let end = (farthest + 1).min(settings.sample_count());
    RegionOfInterest::new(start, end)
}
