//! JSON design documents.
//!
//! ```json
//! {
//!   "settings": { "distance_range_km": 25.0, "resolution_m": 0.5,
//!                 "pulse_width_ns": 500.0, "averages": 60 },
//!   "feeder": { "length_km": 2.542, "loss_per_km": 0.2, "code": "PON01UDI" },
//!   "splitter_ratio": 8,
//!   "launch_level_db": 0.0,
//!   "branches": [
//!     { "id": 1, "length_km": 5.6578, "insertion_loss_db": 10.375,
//!       "return_loss_db": 71.14, "loss_per_km": 0.19, "code": "PON02UDI",
//!       "connected": true,
//!       "geometry": { "coordinates": "planar",
//!                     "vertices": [[0, 0], [5.6578, 0]], "tolerance": 0.01 } }
//!   ]
//! }
//! ```
//!
//! `settings` fields, `loss_per_km`, `code`, `connected` (default `true`),
//! `launch_level_db` (default 0) and `geometry` are optional.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::BranchGeometry;
use crate::model::{Branch, NetworkDesign, OtdrSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    #[serde(default)]
    pub settings: SettingsEntry,
    pub feeder: FeederEntry,
    pub splitter_ratio: usize,
    #[serde(default)]
    pub launch_level_db: f64,
    pub branches: Vec<BranchEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SettingsEntry {
    pub distance_range_km: f64,
    pub resolution_m: f64,
    pub pulse_width_ns: f64,
    pub averages: u32,
}

impl Default for SettingsEntry {
    fn default() -> Self {
        let s = OtdrSettings::default();
        SettingsEntry {
            distance_range_km: s.distance_range_km,
            resolution_m: s.resolution_m,
            pulse_width_ns: s.pulse_width_ns,
            averages: s.averages,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederEntry {
    pub length_km: f64,
    #[serde(default)]
    pub loss_per_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchEntry {
    pub id: u32,
    pub length_km: f64,
    #[serde(default)]
    pub insertion_loss_db: f64,
    #[serde(default)]
    pub return_loss_db: f64,
    #[serde(default)]
    pub loss_per_km: f64,
    #[serde(default = "yes")]
    pub connected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<BranchGeometry>,
}

impl DesignFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Design(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DesignFile::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design documents always serialise")
    }

    /// Validated network and acquisition settings. Branch geometries must
    /// match their declared lengths within their tolerance.
    pub fn build(&self) -> Result<(NetworkDesign, OtdrSettings)> {
        let settings = OtdrSettings {
            distance_range_km: self.settings.distance_range_km,
            resolution_m: self.settings.resolution_m,
            pulse_width_ns: self.settings.pulse_width_ns,
            averages: self.settings.averages,
        };
        settings.validate()?;
        let branches = self
            .branches
            .iter()
            .map(|b| {
                if let Some(g) = &b.geometry {
                    g.validate_length(b.length_km)
                        .map_err(|e| Error::Design(format!("branch {}: {e}", b.id)))?;
                }
                Ok(Branch {
                    id: b.id,
                    length_km: b.length_km,
                    insertion_loss_db: b.insertion_loss_db,
                    loss_per_km: b.loss_per_km,
                    return_loss_db: b.return_loss_db,
                    connected: b.connected,
                    code: b.code.clone(),
                    geometry: b.geometry.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let design = NetworkDesign {
            feeder_length_km: self.feeder.length_km,
            feeder_loss_per_km: self.feeder.loss_per_km,
            feeder_code: self.feeder.code.clone(),
            splitter_ratio: self.splitter_ratio,
            branches,
            launch_level_db: self.launch_level_db,
        };
        design.validate()?;
        if design.feeder_length_km >= settings.distance_range_km {
            return Err(Error::Design("splitter lies beyond the distance range".into()));
        }
        Ok((design, settings))
    }

    pub fn from_design(design: &NetworkDesign, settings: &OtdrSettings) -> Self {
        DesignFile {
            settings: SettingsEntry {
                distance_range_km: settings.distance_range_km,
                resolution_m: settings.resolution_m,
                pulse_width_ns: settings.pulse_width_ns,
                averages: settings.averages,
            },
            feeder: FeederEntry {
                length_km: design.feeder_length_km,
                loss_per_km: design.feeder_loss_per_km,
                code: design.feeder_code.clone(),
            },
            splitter_ratio: design.splitter_ratio,
            launch_level_db: design.launch_level_db,
            branches: design
                .branches
                .iter()
                .map(|b| BranchEntry {
                    id: b.id,
                    length_km: b.length_km,
                    insertion_loss_db: b.insertion_loss_db,
                    return_loss_db: b.return_loss_db,
                    loss_per_km: b.loss_per_km,
                    connected: b.connected,
                    code: b.code.clone(),
                    geometry: b.geometry.clone(),
                })
                .collect(),
        }
    }
}
