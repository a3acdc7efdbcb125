use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing evaluation points in `[0, 1]`.
///
/// Dyadic grids (`i / 2^J`) are exact in binary floating point, which is what
/// makes the Brownian-motion reference checks bit-tight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("no points".into()));
        }
        for &p in &points {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidGrid(format!("point {p} outside [0, 1]")));
            }
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("points not strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// Uniform dyadic grid `{ i / 2^level : i = 0..=2^level }`.
    pub fn dyadic(level: u32) -> Result<Self> {
        if level > 24 {
            return Err(Error::InvalidGrid(format!(
                "dyadic level {level} too large (max 24)"
            )));
        }
        let denom = (1u64 << level) as f64;
        let points = (0..=(1u64 << level)).map(|i| i as f64 / denom).collect();
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Index of a point equal to `t` (bitwise), if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.partial_cmp(&t).unwrap())
            .ok()
    }

    /// Index of the grid point closest to `t`, if within `tol`.
    pub fn index_near(&self, t: f64, tol: f64) -> Option<usize> {
        let (mut best, mut dist) = (None, tol);
        for (i, &p) in self.points.iter().enumerate() {
            let d = (p - t).abs();
            if d <= dist {
                best = Some(i);
                dist = d;
            }
        }
        best
    }

    /// Detects grids of the exact form `{ i / 2^J }` and returns `J`.
    pub fn dyadic_level(&self) -> Option<u32> {
        let m = self.points.len();
        if m < 2 || (m - 1).count_ones() != 1 {
            return None;
        }
        let level = (m - 1).trailing_zeros();
        let denom = (m - 1) as f64;
        self.points
            .iter()
            .enumerate()
            .all(|(i, &p)| p == i as f64 / denom)
            .then_some(level)
    }
}

impl From<Grid> for Vec<f64> {
    fn from(g: Grid) -> Self {
        g.points
    }
}

impl TryFrom<Vec<f64>> for Grid {
    type Error = Error;
    fn try_from(points: Vec<f64>) -> Result<Self> {
        Grid::new(points)
    }
}

/// JSON description of a grid: either explicit points or a dyadic level.
///
/// Accepts `{"points": [...]}` or `{"dyadic_level": J}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Dyadic { dyadic_level: u32 },
    Points { points: Vec<f64> },
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        match self {
            GridSpec::Dyadic { dyadic_level } => Grid::dyadic(*dyadic_level),
            GridSpec::Points { points } => Grid::new(points.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        assert!(Grid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(Grid::new(vec![0.5, 0.2]).is_err());
        assert!(Grid::new(vec![-0.1, 0.5]).is_err());
        assert!(Grid::new(vec![0.1, 1.5]).is_err());
        assert!(Grid::new(vec![]).is_err());
        assert!(Grid::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn dyadic_points_are_exact() {
        let g = Grid::dyadic(3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(4), 0.5);
        assert_eq!(g.point(8), 1.0);
        assert_eq!(g.dyadic_level(), Some(3));
    }

    #[test]
    fn dyadic_detection_rejects_non_dyadic() {
        let g = Grid::new(vec![0.0, 0.3, 1.0]).unwrap();
        assert_eq!(g.dyadic_level(), None);
        let g = Grid::new(vec![0.0, 0.25, 0.5, 0.75]).unwrap(); // missing t = 1
        assert_eq!(g.dyadic_level(), None);
    }

    #[test]
    fn grid_spec_parses_both_forms() {
        let s: GridSpec = serde_json::from_str(r#"{"dyadic_level": 2}"#).unwrap();
        assert_eq!(s.build().unwrap().len(), 5);
        let s: GridSpec = serde_json::from_str(r#"{"points": [0.0, 0.5, 1.0]}"#).unwrap();
        assert_eq!(s.build().unwrap().len(), 3);
    }

    #[test]
    fn index_lookup() {
        let g = Grid::dyadic(2).unwrap();
        assert_eq!(g.index_of(0.5), Some(2));
        assert_eq!(g.index_of(0.3), None);
        assert_eq!(g.index_near(0.26, 0.02), Some(1));
        assert_eq!(g.index_near(0.3, 0.01), None);
    }
}
