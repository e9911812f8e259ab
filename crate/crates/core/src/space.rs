//! State spaces and their metrics.
//!
//! Two carriers are modelled: the flat torus `[0,1)^d` with the wrap-around
//! L∞ metric, and the box `[-L, L]^d` with the plain L∞ metric.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    Torus { dim: usize },
    Box { dim: usize, half_width: f64 },
}

impl Space {
    pub fn torus(dim: usize) -> Self {
        Space::Torus { dim }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        Space::Box { dim, half_width }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Space::Torus { dim } | Space::Box { dim, .. } => dim,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Space::Torus { .. })
    }

    /// Side length of the fundamental domain along one axis.
    pub fn side(&self) -> f64 {
        match *self {
            Space::Torus { .. } => 1.0,
            Space::Box { half_width, .. } => 2.0 * half_width,
        }
    }

    /// Lower corner coordinate along every axis.
    pub fn origin(&self) -> f64 {
        match *self {
            Space::Torus { .. } => 0.0,
            Space::Box { half_width, .. } => -half_width,
        }
    }

    /// Lebesgue volume of the fundamental domain (1 on tori).
    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    /// Diameter under the space's metric.
    pub fn diameter(&self) -> f64 {
        match *self {
            Space::Torus { .. } => 0.5,
            Space::Box { half_width, .. } => 2.0 * half_width,
        }
    }

    pub(crate) fn check_same(&self, other: &Space) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                expected: *self,
                found: *other,
            })
        }
    }

    /// Metric between two coordinate slices of this space.
    #[inline]
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Space::Torus { .. } => torus_linf(a, b),
            Space::Box { .. } => linf(a, b),
        }
    }

    /// Bring coordinates back into the fundamental domain (mod 1 on tori).
    #[inline]
    pub fn normalize(&self, coords: &mut [f64]) {
        if self.is_torus() {
            for c in coords {
                *c = wrap_unit(*c);
            }
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Space::Torus { dim } => write!(f, "torus({dim})"),
            Space::Box { dim, half_width } => write!(f, "box({dim}, {half_width})"),
        }
    }
}

/// Reduce a real into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[inline]
pub fn torus_linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            d.min(1.0 - d)
        })
        .fold(0.0, f64::max)
}

/// A point of a torus or box, tagged with its space.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    space: Space,
    coords: Vec<f64>,
}

impl Point {
    /// Torus point; coordinates are reduced mod 1.
    pub fn on_torus(coords: impl Into<Vec<f64>>) -> Self {
        let mut coords = coords.into();
        for c in coords.iter_mut() {
            *c = wrap_unit(*c);
        }
        Point {
            space: Space::torus(coords.len()),
            coords,
        }
    }

    /// Box point; rejects coordinates outside `[-L, L]`.
    pub fn in_box(coords: impl Into<Vec<f64>>, half_width: f64) -> Result<Self> {
        let coords = coords.into();
        if !(half_width > 0.0) {
            return Err(Error::invalid("half_width", "must be positive"));
        }
        if let Some(c) = coords.iter().find(|c| !(c.abs() <= half_width)) {
            return Err(Error::invalid(
                "coords",
                format!("{c} outside [-{half_width}, {half_width}]"),
            ));
        }
        Ok(Point {
            space: Space::cube(coords.len(), half_width),
            coords,
        })
    }

    /// Build a point in `space`, normalizing torus coordinates.
    pub fn new(space: Space, coords: impl Into<Vec<f64>>) -> Result<Self> {
        let coords = coords.into();
        if coords.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: coords.len(),
            });
        }
        match space {
            Space::Torus { .. } => Ok(Point::on_torus(coords)),
            Space::Box { half_width, .. } => Point::in_box(coords, half_width),
        }
    }

    pub(crate) fn from_raw(space: Space, coords: Vec<f64>) -> Self {
        debug_assert_eq!(space.dim(), coords.len());
        Point { space, coords }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// L∞ distance, with wrap-around on tori.
pub fn torus_distance(x: &Point, y: &Point) -> Result<f64> {
    x.space.check_same(&y.space)?;
    Ok(x.space.distance(&x.coords, &y.coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_around_distance() {
        let a = Point::on_torus(vec![0.9]);
        let b = Point::on_torus(vec![0.1]);
        assert!((torus_distance(&a, &b).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(torus_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn two_dim_example() {
        let a = Point::on_torus(vec![0.1, 0.4]);
        let b = Point::on_torus(vec![0.9, 0.5]);
        assert!((torus_distance(&a, &b).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let a = Point::on_torus(vec![0.1]);
        let b = Point::on_torus(vec![0.1, 0.2]);
        assert!(matches!(
            torus_distance(&a, &b),
            Err(Error::SpaceMismatch { .. })
        ));
        let c = Point::in_box(vec![0.1], 1.0).unwrap();
        assert!(torus_distance(&a, &c).is_err());
    }

    #[test]
    fn torus_coords_reduced() {
        let p = Point::on_torus(vec![1.25, -0.25, -1e-18]);
        assert_eq!(p.coords()[0], 0.25);
        assert_eq!(p.coords()[1], 0.75);
        assert!(p.coords()[2] < 1.0 && p.coords()[2] >= 0.0);
    }

    #[test]
    fn box_points_validated() {
        assert!(Point::in_box(vec![0.5, -2.0], 2.0).is_ok());
        assert!(Point::in_box(vec![2.5], 2.0).is_err());
        assert!(Point::in_box(vec![f64::NAN], 2.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn metric_axioms(
            a in proptest::collection::vec(0.0f64..1.0, 2),
            b in proptest::collection::vec(0.0f64..1.0, 2),
            c in proptest::collection::vec(0.0f64..1.0, 2),
        ) {
            let s = Space::torus(2);
            let ab = s.distance(&a, &b);
            let ba = s.distance(&b, &a);
            let bc = s.distance(&b, &c);
            let ac = s.distance(&a, &c);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=0.5).contains(&ab));
            prop_assert!(ac <= ab + bc + 1e-15);
            prop_assert_eq!(s.distance(&a, &a), 0.0);
            if a != b { prop_assert!(ab > 0.0); }
        }
    }
}
