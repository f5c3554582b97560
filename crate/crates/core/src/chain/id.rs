//! Region and vehicle identity, plus the circular region registry.
//!
//! A vehicle is identified by its permanent region and an index within it;
//! the pair never changes even when the vehicle is active elsewhere. Regions
//! are circles of configurable radius; adjacency is explicit and symmetric.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::codec::Encode;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RegionId(pub u16);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

impl Encode for RegionId {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.0.encode_into(out);
    }
}

/// Globally unique vehicle identity: permanent region plus index.
///
/// Serializes as its display string ("R2V17") so it can key JSON maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VehicleId {
    pub permanent_region: RegionId,
    pub index: u32,
}

impl Serialize for VehicleId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VehicleId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl VehicleId {
    pub fn new(permanent_region: RegionId, index: u32) -> Self {
        VehicleId {
            permanent_region,
            index,
        }
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}V{}", self.permanent_region, self.index)
    }
}

impl FromStr for VehicleId {
    type Err = IdParseError;

    /// Parses the display form, e.g. "R2V17".
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s.strip_prefix('R').ok_or(IdParseError)?;
        let (region, index) = rest.split_once('V').ok_or(IdParseError)?;
        Ok(VehicleId {
            permanent_region: RegionId(region.parse().map_err(|_| IdParseError)?),
            index: index.parse().map_err(|_| IdParseError)?,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("vehicle ids look like R<region>V<index>, e.g. R0V12")]
pub struct IdParseError;

impl Encode for VehicleId {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.permanent_region.encode_into(out);
        self.index.encode_into(out);
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl Encode for Point {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.x.encode_into(out);
        self.y.encode_into(out);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionInfo {
    pub id: RegionId,
    pub center: Point,
    pub radius_km: f64,
    pub neighbors: BTreeSet<RegionId>,
}

impl RegionInfo {
    pub fn radius_m(&self) -> f64 {
        self.radius_km * 1000.0
    }

    /// Distance from a point to this region's circular boundary.
    pub fn boundary_distance_m(&self, p: Point) -> f64 {
        (self.center.distance(p) - self.radius_m()).abs()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegionMapError {
    #[error("region {0} already defined")]
    Duplicate(RegionId),
    #[error("region {0} has non-positive radius")]
    BadRadius(RegionId),
    #[error("unknown region {0}")]
    Unknown(RegionId),
}

/// Registry of regions with a symmetric neighbor relation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RegionMap {
    regions: BTreeMap<RegionId, RegionInfo>,
}

impl RegionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, id: RegionId, center: Point, radius_km: f64) -> Result<(), RegionMapError> {
        if !(radius_km > 0.0) {
            return Err(RegionMapError::BadRadius(id));
        }
        if self.regions.contains_key(&id) {
            return Err(RegionMapError::Duplicate(id));
        }
        self.regions.insert(
            id,
            RegionInfo {
                id,
                center,
                radius_km,
                neighbors: BTreeSet::new(),
            },
        );
        Ok(())
    }

    /// Declares a and b adjacent; the relation is stored in both directions.
    pub fn link(&mut self, a: RegionId, b: RegionId) -> Result<(), RegionMapError> {
        for id in [a, b] {
            if !self.regions.contains_key(&id) {
                return Err(RegionMapError::Unknown(id));
            }
        }
        self.regions.get_mut(&a).unwrap().neighbors.insert(b);
        self.regions.get_mut(&b).unwrap().neighbors.insert(a);
        Ok(())
    }

    pub fn get(&self, id: RegionId) -> Option<&RegionInfo> {
        self.regions.get(&id)
    }

    pub fn are_neighbors(&self, a: RegionId, b: RegionId) -> bool {
        self.regions
            .get(&a)
            .is_some_and(|r| r.neighbors.contains(&b))
    }

    pub fn ids(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.regions.keys().copied()
    }

    /// True when `p` lies within `threshold_m` of both regions' boundaries,
    /// i.e. near the border between them.
    pub fn near_border(&self, a: RegionId, b: RegionId, p: Point, threshold_m: f64) -> bool {
        match (self.regions.get(&a), self.regions.get(&b)) {
            (Some(ra), Some(rb)) => {
                ra.boundary_distance_m(p) <= threshold_m && rb.boundary_distance_m(p) <= threshold_m
            }
            _ => false,
        }
    }
}
