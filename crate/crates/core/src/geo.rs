//! Branch geometry: polylines along which trace distance is mapped to map
//! coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkDesign;

/// Mean earth radius used for great-circle lengths, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

pub const DEFAULT_LENGTH_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateSystem {
    /// Cartesian coordinates in km.
    #[default]
    Planar,
    /// `[longitude, latitude]` in degrees.
    Geographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchGeometry {
    #[serde(default)]
    pub coordinates: CoordinateSystem,
    pub vertices: Vec<[f64; 2]>,
    /// Relative tolerance for [`BranchGeometry::validate_length`].
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_LENGTH_TOLERANCE
}

/// Where a cursor landed: segment index and the parameter within it.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CursorPosition {
    pub segment: usize,
    pub t: f64,
}

fn haversine_km(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (lon1, lat1) = (a[0].to_radians(), a[1].to_radians());
    let (lon2, lat2) = (b[0].to_radians(), b[1].to_radians());
    let h =
        ((lat2 - lat1) / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

impl BranchGeometry {
    pub fn planar(vertices: Vec<[f64; 2]>) -> Self {
        BranchGeometry {
            coordinates: CoordinateSystem::Planar,
            vertices,
            tolerance: DEFAULT_LENGTH_TOLERANCE,
        }
    }

    pub fn geographic(vertices: Vec<[f64; 2]>) -> Self {
        BranchGeometry {
            coordinates: CoordinateSystem::Geographic,
            ..BranchGeometry::planar(vertices)
        }
    }

    fn check(&self) -> Result<()> {
        if self.vertices.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a polyline needs at least 2 vertices, got {}",
                self.vertices.len()
            )));
        }
        if self.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite vertex coordinate".into()));
        }
        Ok(())
    }

    fn segment_length(&self, i: usize) -> f64 {
        let (a, b) = (self.vertices[i], self.vertices[i + 1]);
        match self.coordinates {
            CoordinateSystem::Planar => (b[0] - a[0]).hypot(b[1] - a[1]),
            CoordinateSystem::Geographic => haversine_km(a, b),
        }
    }

    pub fn arc_length(&self) -> Result<f64> {
        self.check()?;
        Ok((0..self.vertices.len() - 1).map(|i| self.segment_length(i)).sum())
    }

    /// Checks the polyline length against `declared_km` within the relative
    /// tolerance.
    pub fn validate_length(&self, declared_km: f64) -> Result<()> {
        let length = self.arc_length()?;
        if (length - declared_km).abs() > self.tolerance * declared_km {
            return Err(Error::InvalidInput(format!(
                "polyline is {length:.4} km long, declared {declared_km:.4} km (tolerance {:.1}%)",
                self.tolerance * 100.0
            )));
        }
        Ok(())
    }

    pub fn cursor_position(&self, s_km: f64) -> Result<CursorPosition> {
        let total = self.arc_length()?;
        if !(s_km.is_finite() && (0.0..=total).contains(&s_km)) {
            return Err(Error::Range(format!(
                "{s_km} km is outside [0, {total}] km along the cable"
            )));
        }
        let segments = self.vertices.len() - 1;
        let mut walked = 0.0;
        for i in 0..segments {
            let len = self.segment_length(i);
            if s_km <= walked + len || i == segments - 1 {
                let t = if len > 0.0 {
                    ((s_km - walked) / len).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                return Ok(CursorPosition { segment: i, t });
            }
            walked += len;
        }
        unreachable!("loop returns on the last segment")
    }

    /// Point at arc distance `s_km`, linearly interpolated inside its segment.
    pub fn cursor(&self, s_km: f64) -> Result<[f64; 2]> {
        let CursorPosition { segment, t } = self.cursor_position(s_km)?;
        let (a, b) = (self.vertices[segment], self.vertices[segment + 1]);
        Ok([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
    }
}

/// Map coordinate of an event seen at `trace_distance_km` on `branch_id`.
pub fn locate_event(design: &NetworkDesign, branch_id: u32, trace_distance_km: f64) -> Result<[f64; 2]> {
    let branch = design
        .branch(branch_id)
        .ok_or_else(|| Error::InvalidInput(format!("unknown branch id {branch_id}")))?;
    let geometry = branch
        .geometry
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("branch {branch_id} has no geometry")))?;
    let along = trace_distance_km - design.feeder_length_km;
    if along < -1e-9 || along > branch.length_km + 1e-9 {
        return Err(Error::Range(format!(
            "{trace_distance_km} km is not on branch {branch_id} ({} .. {} km)",
            design.feeder_length_km,
            design.feeder_length_km + branch.length_km
        )));
    }
    // slack can make the optical length exceed the drawn polyline
    let arc = geometry.arc_length()?;
    geometry.cursor(along.clamp(0.0, arc))
}
