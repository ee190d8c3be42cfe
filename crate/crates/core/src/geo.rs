//! Integer-grid locations and conversions between surface and Euclidean
//! distance on a spherical Earth.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};

/// Per-axis magnitude limit on grid coordinates.
pub const COORD_LIMIT: i64 = 1 << 26;

/// Largest squared distance the comparison blinds can absorb without
/// wrapping modulo a 1024-bit Paillier modulus.
pub const MAX_DIST_SQ: u128 = 1 << 52;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Half-extent of each axis in the default Earth-centred box.
pub const EARTH_BOX_HALF_EXTENT: i64 = 6_500_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("locations must have 2 or 3 coordinates, got {0}")]
    BadDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("coordinate {0} exceeds the grid limit of 2^26")]
    CoordinateOutOfRange(i64),
    #[error("location {0} lies outside the configured space")]
    OutOfBounds(Location),
    #[error("distance {0} is outside [0, 2R]")]
    DistanceOutOfRange(f64),
    #[error("invalid geodetic input: {0}")]
    InvalidGeodetic(String),
    #[error("invalid space configuration: {0}")]
    InvalidSpace(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// A point on the integer grid, in meters, in the plane or in space.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Location {
    coords: Vec<i64>,
}

impl Location {
    pub fn new(coords: Vec<i64>) -> Result<Self, GeoError> {
        if !(2..=3).contains(&coords.len()) {
            return Err(GeoError::BadDimension(coords.len()));
        }
        if let Some(&c) = coords.iter().find(|c| c.abs() > COORD_LIMIT) {
            return Err(GeoError::CoordinateOutOfRange(c));
        }
        Ok(Location { coords })
    }

    pub fn plane(x: i64, y: i64) -> Result<Self, GeoError> {
        Self::new(vec![x, y])
    }

    pub fn space(x: i64, y: i64, z: i64) -> Result<Self, GeoError> {
        Self::new(vec![x, y, z])
    }

    pub fn origin(dim: usize) -> Result<Self, GeoError> {
        Self::new(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    /// Sum of squared coordinates.
    pub fn norm_sq(&self) -> u128 {
        self.coords.iter().map(|&c| (c as i128 * c as i128) as u128).sum()
    }

    /// `d` signed 64-bit big-endian integers.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        for &c in &self.coords {
            w.i64(c);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8], dim: usize) -> Result<Self, GeoError> {
        let mut r = Reader::new(bytes);
        let coords = (0..dim).map(|_| r.i64()).collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        Self::new(coords)
    }
}

impl fmt::Debug for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Location{self}")
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl std::str::FromStr for Location {
    type Err = GeoError;

    /// Parses `x,y` or `x,y,z`, with optional surrounding parentheses.
    fn from_str(s: &str) -> Result<Self, GeoError> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let coords = trimmed
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<i64>()
                    .map_err(|e| GeoError::Decode(DecodeError::invalid(format!("{p:?}: {e}"))))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(coords)
    }
}

/// Exact squared Euclidean distance.
pub fn euclid_dist_sq(a: &Location, b: &Location) -> Result<u128, GeoError> {
    if a.dim() != b.dim() {
        return Err(GeoError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(a.coords
        .iter()
        .zip(&b.coords)
        .map(|(&x, &y)| {
            let d = (x as i128 - y as i128).unsigned_abs();
            d * d
        })
        .sum())
}

/// Great-circle distance for a chord of length `dist`: `2R asin(dist / 2R)`.
pub fn surface_from_euclid(dist: f64, radius: f64) -> Result<f64, GeoError> {
    if !(0.0..=2.0 * radius).contains(&dist) {
        return Err(GeoError::DistanceOutOfRange(dist));
    }
    Ok(2.0 * radius * (dist / (2.0 * radius)).asin())
}

/// Chord length for a great-circle distance: `2R sin(surface / 2R)`.
pub fn euclid_threshold_from_surface(surface: f64, radius: f64) -> Result<f64, GeoError> {
    if !(0.0..=PI * radius).contains(&surface) {
        return Err(GeoError::DistanceOutOfRange(surface));
    }
    Ok(2.0 * radius * (surface / (2.0 * radius)).sin())
}

/// Axis-aligned box of admissible grid points plus the sphere radius used
/// for surface-distance conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceConfig {
    bounds: Vec<(i64, i64)>,
    radius: f64,
}

impl SpaceConfig {
    /// `bounds[i]` is the inclusive coordinate range of axis `i`. The box
    /// diameter `D` must satisfy `D^2 <= 2^52`.
    pub fn new(bounds: Vec<(i64, i64)>, radius: f64) -> Result<Self, GeoError> {
        if !(2..=3).contains(&bounds.len()) {
            return Err(GeoError::BadDimension(bounds.len()));
        }
        for &(lo, hi) in &bounds {
            if lo > hi {
                return Err(GeoError::InvalidSpace(format!("empty axis range {lo}..={hi}")));
            }
            if lo.abs() > COORD_LIMIT || hi.abs() > COORD_LIMIT {
                return Err(GeoError::CoordinateOutOfRange(if lo.abs() > hi.abs() { lo } else { hi }));
            }
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeoError::InvalidSpace(format!("radius must be positive, got {radius}")));
        }
        let config = SpaceConfig { bounds, radius };
        if config.max_distance_sq() > MAX_DIST_SQ {
            return Err(GeoError::InvalidSpace(format!(
                "box diameter squared {} exceeds 2^52",
                config.max_distance_sq()
            )));
        }
        Ok(config)
    }

    /// Earth-centred box of half-extent 6 500 km per axis, `R = 6 371 km`.
    pub fn earth(dim: usize) -> Self {
        let h = EARTH_BOX_HALF_EXTENT;
        Self::new(vec![(-h, h); dim], EARTH_RADIUS_M).expect("earth box is valid")
    }

    /// `[-half_extent, half_extent]` on every axis.
    pub fn centered(dim: usize, half_extent: i64) -> Result<Self, GeoError> {
        Self::new(vec![(-half_extent, half_extent); dim], EARTH_RADIUS_M)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(i64, i64)] {
        &self.bounds
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, loc: &Location) -> bool {
        loc.dim() == self.dim()
            && loc
                .coords()
                .iter()
                .zip(&self.bounds)
                .all(|(c, (lo, hi))| (lo..=hi).contains(&c))
    }

    pub fn check(&self, loc: &Location) -> Result<(), GeoError> {
        if loc.dim() != self.dim() {
            return Err(GeoError::DimensionMismatch(loc.dim(), self.dim()));
        }
        if !self.contains(loc) {
            return Err(GeoError::OutOfBounds(loc.clone()));
        }
        Ok(())
    }

    /// `D^2`, the squared diameter of the box.
    pub fn max_distance_sq(&self) -> u128 {
        self.bounds
            .iter()
            .map(|&(lo, hi)| {
                let span = (hi as i128 - lo as i128) as u128;
                span * span
            })
            .sum()
    }

    /// `D`, the diameter of the box.
    pub fn max_distance(&self) -> f64 {
        (self.max_distance_sq() as f64).sqrt()
    }
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self::earth(3)
    }
}

/// Unrounded Earth-centred Cartesian coordinates on a sphere of radius `R`.
/// `(0, 0)` maps to `+x`, the north pole to `+z`.
pub fn geodetic_to_cartesian(lat_deg: f64, lon_deg: f64, alt_m: f64, radius: f64) -> Result<[f64; 3], GeoError> {
    if !lat_deg.is_finite() || !(-90.0..=90.0).contains(&lat_deg) {
        return Err(GeoError::InvalidGeodetic(format!("latitude {lat_deg}")));
    }
    if !lon_deg.is_finite() || !(-180.0..=180.0).contains(&lon_deg) {
        return Err(GeoError::InvalidGeodetic(format!("longitude {lon_deg}")));
    }
    if !alt_m.is_finite() || alt_m <= -radius {
        return Err(GeoError::InvalidGeodetic(format!("altitude {alt_m}")));
    }
    let r = radius + alt_m;
    let (lat, lon) = (lat_deg.to_radians(), lon_deg.to_radians());
    Ok([r * lat.cos() * lon.cos(), r * lat.cos() * lon.sin(), r * lat.sin()])
}

/// Maps a geodetic position onto the 3D grid, rounding each coordinate to
/// the nearest meter.
pub fn to_grid(lat_deg: f64, lon_deg: f64, alt_m: f64, config: &SpaceConfig) -> Result<Location, GeoError> {
    if config.dim() != 3 {
        return Err(GeoError::DimensionMismatch(3, config.dim()));
    }
    let xyz = geodetic_to_cartesian(lat_deg, lon_deg, alt_m, config.radius())?;
    let loc = Location::new(xyz.iter().map(|c| c.round() as i64).collect())?;
    config.check(&loc)?;
    Ok(loc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Independent schoolbook oracle: expand (a-b)^2 = a^2 - 2ab + b^2 in i128.
    fn schoolbook(a: &[i64], b: &[i64]) -> i128 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                let (x, y) = (x as i128, y as i128);
                x * x - 2 * x * y + y * y
            })
            .sum()
    }

    #[test]
    fn distance_examples() {
        let a = Location::space(0, 0, 0).unwrap();
        assert_eq!(euclid_dist_sq(&a, &a).unwrap(), 0);
        let b = Location::space(3, 4, 0).unwrap();
        assert_eq!(euclid_dist_sq(&a, &b).unwrap(), 25);
        let c = Location::plane(3, 4).unwrap();
        assert_eq!(
            euclid_dist_sq(&a, &c).unwrap_err(),
            GeoError::DimensionMismatch(3, 2)
        );
    }

    #[test]
    fn distance_matches_schoolbook_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for i in 0..100 {
            let dim = 2 + i % 2;
            let mut pick = || (0..dim).map(|_| rng.gen_range(-COORD_LIMIT..=COORD_LIMIT)).collect::<Vec<_>>();
            let (a, b) = (pick(), pick());
            let expected = schoolbook(&a, &b);
            let got = euclid_dist_sq(&Location::new(a).unwrap(), &Location::new(b).unwrap()).unwrap();
            assert_eq!(got as i128, expected);
        }
    }

    #[test]
    fn rejects_bad_locations() {
        assert_eq!(Location::new(vec![1]).unwrap_err(), GeoError::BadDimension(1));
        assert_eq!(
            Location::plane(COORD_LIMIT + 1, 0).unwrap_err(),
            GeoError::CoordinateOutOfRange(COORD_LIMIT + 1)
        );
        assert!(Location::plane(-COORD_LIMIT, COORD_LIMIT).is_ok());
    }

    #[test]
    fn location_text_and_bytes() {
        let loc: Location = "(10,-20,30)".parse().unwrap();
        assert_eq!(loc.coords(), &[10, -20, 30]);
        assert_eq!(loc.to_string(), "(10,-20,30)");
        let bytes = loc.to_bytes();
        assert_eq!(bytes.len(), 24);
        assert_eq!(&bytes[8..16], &(-20i64).to_be_bytes());
        assert_eq!(Location::from_bytes(&bytes, 3).unwrap(), loc);
        assert!("1,x".parse::<Location>().is_err());
    }

    #[test]
    fn surface_distance_examples() {
        let r = EARTH_RADIUS_M;
        assert_eq!(surface_from_euclid(0.0, r).unwrap(), 0.0);
        assert!((surface_from_euclid(2.0 * r, r).unwrap() - PI * r).abs() < 1e-6);
        assert!(surface_from_euclid(2.0 * r + 1.0, r).is_err());
        assert!(surface_from_euclid(-1.0, r).is_err());
    }

    #[test]
    fn surface_roundtrip_relative_error() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let r = EARTH_RADIUS_M;
        for _ in 0..1000 {
            let dist = rng.gen_range(1.0..2.0 * r);
            let sd = surface_from_euclid(dist, r).unwrap();
            let back = euclid_threshold_from_surface(sd, r).unwrap();
            assert!(((back - dist) / dist).abs() < 1e-9, "{dist} -> {back}");
        }
    }

    #[test]
    fn surface_is_strictly_increasing() {
        let r = EARTH_RADIUS_M;
        let mut prev = -1.0;
        for i in 0..=1000 {
            let d = 2.0 * r * i as f64 / 1000.0;
            let s = surface_from_euclid(d, r).unwrap();
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn grid_axis_conventions() {
        let cfg = SpaceConfig::earth(3);
        let r = EARTH_RADIUS_M as i64;
        assert_eq!(to_grid(0.0, 0.0, 0.0, &cfg).unwrap().coords(), &[r, 0, 0]);
        for lon in [-120.0, 0.0, 45.0, 180.0] {
            assert_eq!(to_grid(90.0, lon, 0.0, &cfg).unwrap().coords(), &[0, 0, r]);
        }
        assert!(to_grid(91.0, 0.0, 0.0, &cfg).is_err());
        assert!(to_grid(0.0, 181.0, 0.0, &cfg).is_err());
        assert!(to_grid(0.0, 0.0, 200_000.0, &cfg).is_err());
        assert!(to_grid(0.0, 0.0, 0.0, &SpaceConfig::earth(2)).is_err());
    }

    #[test]
    fn space_config_invariants() {
        let cfg = SpaceConfig::earth(3);
        let d = cfg.max_distance();
        let expected = 2.0 * EARTH_BOX_HALF_EXTENT as f64 * 3f64.sqrt();
        assert!((d - expected).abs() < 1e-3);
        assert!(cfg.max_distance_sq() <= MAX_DIST_SQ);
        assert!(SpaceConfig::centered(2, COORD_LIMIT).is_err());
        let grid = SpaceConfig::new(vec![(0, 999), (0, 999)], EARTH_RADIUS_M).unwrap();
        assert_eq!(grid.max_distance_sq(), 2 * 999 * 999);
        assert!(!grid.contains(&Location::plane(1000, 0).unwrap()));
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_triangle(
            a in prop::collection::vec(-COORD_LIMIT..=COORD_LIMIT, 3),
            b in prop::collection::vec(-COORD_LIMIT..=COORD_LIMIT, 3),
            c in prop::collection::vec(-COORD_LIMIT..=COORD_LIMIT, 3),
        ) {
            let (a, b, c) = (Location::new(a).unwrap(), Location::new(b).unwrap(), Location::new(c).unwrap());
            let ab = euclid_dist_sq(&a, &b).unwrap();
            prop_assert_eq!(ab, euclid_dist_sq(&b, &a).unwrap());
            let (ab, bc, ac) = (
                (ab as f64).sqrt(),
                (euclid_dist_sq(&b, &c).unwrap() as f64).sqrt(),
                (euclid_dist_sq(&a, &c).unwrap() as f64).sqrt(),
            );
            prop_assert!(ac <= ab + bc + 1e-6 * (ab + bc).max(1.0));
        }
    }
}
