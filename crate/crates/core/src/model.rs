//! Domain types shared by every module, and the sample-index/distance
//! convention.
//!
//! Distances travel in kilometres, the sample spacing in metres. Sample `k`
//! of a trace (0-based) sits at `start + k * resolution / 1000` km.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::BranchGeometry;

/// Power value standing in for an unplugged channel. It maps to zero linear
/// intensity in [`crate::superpose`].
pub const DISCONNECTED: f64 = f64::NEG_INFINITY;

/// Slack used when checking that a distance lies inside the display range.
const DISTANCE_EPS_KM: f64 = 1e-9;

/// OTDR acquisition settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtdrSettings {
    /// Distance (display) range in km.
    pub distance_range_km: f64,
    /// Sample spacing in metres.
    pub resolution_m: f64,
    /// Pulse width in ns. Informational only.
    pub pulse_width_ns: f64,
    /// Number of averaged acquisitions. Informational only.
    pub averages: u32,
}

impl Default for OtdrSettings {
    fn default() -> Self {
        OtdrSettings {
            distance_range_km: 25.0,
            resolution_m: 0.5,
            pulse_width_ns: 500.0,
            averages: 60,
        }
    }
}

impl OtdrSettings {
    pub fn new(distance_range_km: f64, resolution_m: f64) -> Result<Self> {
        let settings = OtdrSettings {
            distance_range_km,
            resolution_m,
            ..OtdrSettings::default()
        };
        settings.validate()?;
        Ok(settings)
    }

    /// Same settings on a different grid spacing.
    pub fn with_resolution(self, resolution_m: f64) -> Result<Self> {
        let settings = OtdrSettings { resolution_m, ..self };
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution_m.is_finite() && self.resolution_m > 0.0) {
            return Err(Error::Parameter(format!(
                "resolution must be positive, got {} m",
                self.resolution_m
            )));
        }
        if !(self.distance_range_km.is_finite() && self.distance_range_km > 0.0) {
            return Err(Error::Parameter(format!(
                "distance range must be positive, got {} km",
                self.distance_range_km
            )));
        }
        if self.sample_count() < 2 {
            return Err(Error::Parameter(
                "distance range shorter than one sample step".into(),
            ));
        }
        Ok(())
    }

    /// `floor(range / resolution) + 1`.
    pub fn sample_count(&self) -> usize {
        let steps = self.distance_range_km * 1000.0 / self.resolution_m;
        // absorb representation error such as 24.999999999 steps
        (steps + 1e-9).floor() as usize + 1
    }

    pub fn index_of_distance(&self, z_km: f64) -> Result<usize> {
        if !z_km.is_finite() || z_km < -DISTANCE_EPS_KM || z_km > self.distance_range_km + DISTANCE_EPS_KM {
            return Err(Error::Range(format!(
                "distance {z_km} km outside [0, {}] km",
                self.distance_range_km
            )));
        }
        let index = (z_km.max(0.0) * 1000.0 / self.resolution_m).round() as usize;
        Ok(index.min(self.sample_count() - 1))
    }

    pub fn distance_of_index(&self, index: usize) -> f64 {
        index as f64 * self.resolution_m / 1000.0
    }

    /// Spatial extent of one sample step, in km.
    pub fn step_km(&self) -> f64 {
        self.resolution_m / 1000.0
    }
}

/// A uniformly sampled two-way power record, in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    start_km: f64,
    resolution_m: f64,
    samples: Vec<f64>,
}

impl Trace {
    /// Builds a trace, rejecting NaN, `+inf` and empty sample vectors.
    /// [`DISCONNECTED`] samples are allowed.
    pub fn new(start_km: f64, resolution_m: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("trace has no samples".into()));
        }
        if !(resolution_m.is_finite() && resolution_m > 0.0) {
            return Err(Error::InvalidInput(format!(
                "trace resolution must be positive, got {resolution_m}"
            )));
        }
        if !start_km.is_finite() {
            return Err(Error::InvalidInput("trace start must be finite".into()));
        }
        if let Some(k) = samples
            .iter()
            .position(|&p| !(p.is_finite() || p == DISCONNECTED))
        {
            return Err(Error::InvalidInput(format!(
                "sample {k} is {} (only finite values or the disconnected sentinel are allowed)",
                samples[k]
            )));
        }
        Ok(Trace {
            start_km,
            resolution_m,
            samples,
        })
    }

    /// A trace covering the whole grid of `settings`, starting at 0 km.
    pub fn on_grid(settings: &OtdrSettings, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != settings.sample_count() {
            return Err(Error::Grid(format!(
                "expected {} samples for the settings grid, got {}",
                settings.sample_count(),
                samples.len()
            )));
        }
        Trace::new(0.0, settings.resolution_m, samples)
    }

    /// An all-sentinel trace: the record of an unplugged channel.
    pub fn disconnected(start_km: f64, resolution_m: f64, len: usize) -> Result<Self> {
        Trace::new(start_km, resolution_m, vec![DISCONNECTED; len])
    }

    pub fn start_km(&self) -> f64 {
        self.start_km
    }

    pub fn resolution_m(&self) -> f64 {
        self.resolution_m
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn distance_at(&self, index: usize) -> f64 {
        self.start_km + index as f64 * self.resolution_m / 1000.0
    }

    pub fn last_distance(&self) -> f64 {
        self.distance_at(self.samples.len() - 1)
    }

    /// True if both traces share start, spacing and length.
    pub fn same_grid(&self, other: &Trace) -> bool {
        self.samples.len() == other.samples.len()
            && (self.start_km - other.start_km).abs() <= DISTANCE_EPS_KM
            && (self.resolution_m - other.resolution_m).abs() <= 1e-9
    }

    /// Does this trace cover the grid described by `settings`?
    pub fn matches_settings(&self, settings: &OtdrSettings) -> bool {
        self.samples.len() == settings.sample_count()
            && self.start_km.abs() <= DISTANCE_EPS_KM
            && (self.resolution_m - settings.resolution_m).abs() <= 1e-9
    }

    /// Same grid, different values.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.samples.len() {
            return Err(Error::Grid(format!(
                "expected {} samples, got {}",
                self.samples.len(),
                samples.len()
            )));
        }
        Trace::new(self.start_km, self.resolution_m, samples)
    }
}

/// One splitter output port and the drop fibre plugged into it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Branch {
    pub id: u32,
    pub length_km: f64,
    pub insertion_loss_db: f64,
    pub loss_per_km: f64,
    pub return_loss_db: f64,
    /// Unplugged ports are kept in the design but not simulated.
    pub connected: bool,
    /// External label, e.g. a database code.
    pub code: Option<String>,
    pub geometry: Option<BranchGeometry>,
}

impl Branch {
    pub fn new(id: u32, length_km: f64) -> Self {
        Branch {
            id,
            length_km,
            connected: true,
            ..Branch::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km.is_finite() && self.length_km > 0.0) {
            return Err(Error::Parameter(format!(
                "branch {} length must be positive, got {} km",
                self.id, self.length_km
            )));
        }
        if !(self.loss_per_km.is_finite() && self.loss_per_km >= 0.0) {
            return Err(Error::Parameter(format!(
                "branch {} loss per km must be non-negative",
                self.id
            )));
        }
        Ok(())
    }
}

/// Feeder, 1xN splitter and its N output branches.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDesign {
    pub feeder_length_km: f64,
    pub feeder_loss_per_km: f64,
    pub feeder_code: Option<String>,
    pub splitter_ratio: usize,
    pub branches: Vec<Branch>,
    /// Trace level at the OTDR port, in dB.
    pub launch_level_db: f64,
}

impl NetworkDesign {
    pub fn new(feeder_length_km: f64, branches: Vec<Branch>) -> Result<Self> {
        let design = NetworkDesign {
            feeder_length_km,
            feeder_loss_per_km: 0.0,
            feeder_code: None,
            splitter_ratio: branches.len(),
            branches,
            launch_level_db: 0.0,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.feeder_length_km.is_finite() && self.feeder_length_km >= 0.0) {
            return Err(Error::Parameter(format!(
                "feeder length must be non-negative, got {} km",
                self.feeder_length_km
            )));
        }
        if self.splitter_ratio == 0 || self.branches.len() != self.splitter_ratio {
            return Err(Error::Parameter(format!(
                "a 1x{} splitter needs exactly {} branches, got {}",
                self.splitter_ratio,
                self.splitter_ratio,
                self.branches.len()
            )));
        }
        for (i, b) in self.branches.iter().enumerate() {
            b.validate()?;
            if self.branches[..i].iter().any(|o| o.id == b.id) {
                return Err(Error::Parameter(format!("duplicate branch id {}", b.id)));
            }
        }
        if self.connected_count() == 0 {
            return Err(Error::Parameter("no connected branch".into()));
        }
        if !self.launch_level_db.is_finite() {
            return Err(Error::Parameter("launch level must be finite".into()));
        }
        Ok(())
    }

    pub fn branch(&self, id: u32) -> Option<&Branch> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn connected(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.connected)
    }

    pub fn connected_count(&self) -> usize {
        self.connected().count()
    }

    pub fn connected_ids(&self) -> Vec<u32> {
        self.connected().map(|b| b.id).collect()
    }

    /// Copy of the design in which exactly the listed ports are plugged.
    pub fn with_connected(&self, ids: &[u32]) -> Result<Self> {
        for id in ids {
            if self.branch(*id).is_none() {
                return Err(Error::InvalidInput(format!("unknown branch id {id}")));
            }
        }
        let mut design = self.clone();
        for b in &mut design.branches {
            b.connected = ids.contains(&b.id);
        }
        design.validate()?;
        Ok(design)
    }

    /// Splitter position along the trace, in km.
    pub fn splitter_position_km(&self) -> f64 {
        self.feeder_length_km
    }
}

/// Half-open sample range `[start, end)` of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionOfInterest {
    pub start: usize,
    pub end: usize,
}

impl RegionOfInterest {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::Range(format!("empty region of interest [{start}, {end})")));
        }
        Ok(RegionOfInterest { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn slice<'a>(&self, samples: &'a [f64]) -> Result<&'a [f64]> {
        samples.get(self.start..self.end).ok_or_else(|| {
            Error::Range(format!(
                "region [{}, {}) exceeds {} samples",
                self.start,
                self.end,
                samples.len()
            ))
        })
    }
}
