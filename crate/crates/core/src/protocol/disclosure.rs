use std::fmt;
use std::str::FromStr;

use crate::codec::{DecodeError, Reader, Writer};
use crate::geo::{Location, COORD_LIMIT};

/// What a level-4 query reveals about the publisher's location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DisclosureFunction {
    #[default]
    Exact,
    /// Snap every coordinate down to a multiple of `cell` meters.
    Quantize { cell: u64 },
}

impl DisclosureFunction {
    /// `cell` must be a power of two no larger than the grid limit.
    pub fn quantize(cell: u64) -> Result<Self, DecodeError> {
        if !cell.is_power_of_two() || cell > COORD_LIMIT as u64 {
            return Err(DecodeError::invalid(format!(
                "cell size {cell} must be a power of two <= 2^26"
            )));
        }
        Ok(DisclosureFunction::Quantize { cell })
    }

    pub fn apply(&self, loc: &Location) -> Location {
        match *self {
            DisclosureFunction::Exact => loc.clone(),
            DisclosureFunction::Quantize { cell } => {
                let cell = cell as i64;
                let coords = loc.coords().iter().map(|&c| c - c.rem_euclid(cell)).collect();
                Location::new(coords).expect("flooring to a cell of at most 2^26 stays on the grid")
            }
        }
    }

    pub fn write(&self, w: &mut Writer) {
        match *self {
            DisclosureFunction::Exact => w.u8(0).u64(0),
            DisclosureFunction::Quantize { cell } => w.u8(1).u64(cell),
        };
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let kind = r.u8()?;
        let cell = r.u64()?;
        match kind {
            0 => Ok(DisclosureFunction::Exact),
            1 => Self::quantize(cell),
            k => Err(DecodeError::invalid(format!("unknown disclosure kind {k}"))),
        }
    }
}

impl fmt::Display for DisclosureFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisclosureFunction::Exact => f.write_str("exact"),
            DisclosureFunction::Quantize { cell } => write!(f, "quantize:{cell}"),
        }
    }
}

impl FromStr for DisclosureFunction {
    type Err = DecodeError;

    /// `exact` or `quantize:<cell>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "exact" {
            return Ok(DisclosureFunction::Exact);
        }
        let cell = s
            .strip_prefix("quantize:")
            .and_then(|c| c.trim().parse::<u64>().ok())
            .ok_or_else(|| DecodeError::invalid(format!("bad disclosure function {s:?}")))?;
        Self::quantize(cell)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let x = Location::space(5, 6, 7).unwrap();
        assert_eq!(DisclosureFunction::Exact.apply(&x), x);
        let q = DisclosureFunction::quantize(1024).unwrap();
        assert_eq!(q.apply(&x), Location::space(0, 0, 0).unwrap());
        assert_eq!(q.apply(&Location::plane(-1, 2049).unwrap()), Location::plane(-1024, 2048).unwrap());
        assert!(DisclosureFunction::quantize(1000).is_err());
        assert!(DisclosureFunction::quantize(1 << 27).is_err());
    }

    #[test]
    fn text_and_binary_forms() {
        for f in [DisclosureFunction::Exact, DisclosureFunction::quantize(64).unwrap()] {
            assert_eq!(f.to_string().parse::<DisclosureFunction>().unwrap(), f);
            let mut w = Writer::new();
            f.write(&mut w);
            let bytes = w.finish();
            let mut r = Reader::new(&bytes);
            assert_eq!(DisclosureFunction::read(&mut r).unwrap(), f);
        }
        assert!("quantize:3".parse::<DisclosureFunction>().is_err());
        assert!("fuzzy".parse::<DisclosureFunction>().is_err());
    }

    proptest! {
        #[test]
        fn quantized_coordinates_are_cell_corners(
            k in 0u32..=26,
            coords in proptest::collection::vec(-(1i64 << 26)..=(1i64 << 26), 2..=3),
        ) {
            let cell = 1i64 << k;
            let loc = Location::new(coords).unwrap();
            let out = DisclosureFunction::quantize(cell as u64).unwrap().apply(&loc);
            for (&c, &q) in loc.coords().iter().zip(out.coords()) {
                prop_assert_eq!(q.rem_euclid(cell), 0);
                prop_assert!(q <= c && c - q < cell);
            }
        }
    }
}
