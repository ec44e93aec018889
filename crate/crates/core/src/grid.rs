//! Parameter-space discretization and grid-realized regions.
//!
//! Grids are deterministic given their geometry: rectangular grids are
//! row-major with the first axis slowest, simplex grids enumerate
//! barycentric triples lexicographically, curves walk their parameter
//! uniformly. Regions are boolean masks over a shared grid; subset, union
//! and disjointness are exact on the grid and are the resolution-limited
//! realizations of the continuum statements they stand in for.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{PragmaError, Result};

/// One rectangular axis: `count` evenly spaced values on `[lo, hi]`.
/// A singleton axis (`count == 1`, `lo == hi`) pins a coordinate, which is
/// how degenerate hypothesis sets like `{mu0} x (0, M^2]` are discretized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        Axis { lo, hi, count }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(PragmaError::Config("axis bounds must be finite".into()));
        }
        match self.count {
            0 => Err(PragmaError::Config("axis count must be >= 1".into())),
            1 if self.lo != self.hi => Err(PragmaError::Config(
                "a single-point axis requires lo == hi".into(),
            )),
            _ if self.count >= 2 && self.lo >= self.hi => Err(PragmaError::Config(format!(
                "degenerate axis bounds [{}, {}]",
                self.lo, self.hi
            ))),
            _ => Ok(()),
        }
    }

    pub fn step(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.hi - self.lo) / (self.count - 1) as f64
        }
    }

    fn value(&self, i: usize) -> f64 {
        if self.count < 2 {
            self.lo
        } else if i == self.count - 1 {
            self.hi
        } else {
            self.lo + self.step() * i as f64
        }
    }
}

/// Parametrized curves embedded in a parameter space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    /// (p^2, 2p(1-p), (1-p)^2) for p in [0, 1], on the 2-simplex.
    HardyWeinberg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GridGeometry {
    Rectangular { axes: Vec<Axis> },
    /// All barycentric triples (i/r, j/r, k/r) with i + j + k = r.
    Simplex { resolution: u32 },
    Curve { curve: CurveKind, knots: usize },
    /// A grid given by explicit points (e.g. the image of another grid
    /// under a reparametrization).
    Explicit { count: usize, dim: usize },
}

/// A deterministic discretization of (part of) a parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    geometry: GridGeometry,
    points: Vec<Vec<f64>>,
}

impl ParameterGrid {
    pub fn new(geometry: GridGeometry) -> Result<Self> {
        let points = match &geometry {
            GridGeometry::Rectangular { axes } => {
                if axes.is_empty() {
                    return Err(PragmaError::Config("rectangular grid needs >= 1 axis".into()));
                }
                for ax in axes {
                    ax.validate()?;
                }
                let total: usize = axes.iter().map(|a| a.count).product();
                let mut points = Vec::with_capacity(total);
                let mut idx = vec![0usize; axes.len()];
                loop {
                    points.push(idx.iter().zip(axes).map(|(i, a)| a.value(*i)).collect());
                    // row-major increment, last axis fastest
                    let mut k = axes.len();
                    loop {
                        if k == 0 {
                            return Ok(ParameterGrid { geometry, points });
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < axes[k].count {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            }
            GridGeometry::Simplex { resolution } => {
                let r = *resolution;
                if r < 2 {
                    return Err(PragmaError::Config("simplex resolution must be >= 2".into()));
                }
                let rf = r as f64;
                let mut points = Vec::with_capacity(((r + 1) * (r + 2) / 2) as usize);
                for i in 0..=r {
                    for j in 0..=(r - i) {
                        let k = r - i - j;
                        points.push(vec![i as f64 / rf, j as f64 / rf, k as f64 / rf]);
                    }
                }
                points
            }
            GridGeometry::Curve { curve, knots } => {
                if *knots < 2 {
                    return Err(PragmaError::Config("curve needs >= 2 knots".into()));
                }
                match curve {
                    CurveKind::HardyWeinberg => (0..*knots)
                        .map(|i| {
                            let p = i as f64 / (*knots - 1) as f64;
                            vec![p * p, 2.0 * p * (1.0 - p), (1.0 - p) * (1.0 - p)]
                        })
                        .collect(),
                }
            }
            GridGeometry::Explicit { .. } => {
                return Err(PragmaError::Config(
                    "explicit geometry is built with ParameterGrid::from_points".into(),
                ))
            }
        };
        Ok(ParameterGrid { geometry, points })
    }

    /// Wrap explicit points (all of one dimension) as a grid.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(PragmaError::Config("explicit grid needs >= 1 point".into()));
        };
        let dim = first.len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(PragmaError::Config("explicit grid points must share one dimension".into()));
        }
        let geometry = GridGeometry::Explicit { count: points.len(), dim };
        Ok(ParameterGrid { geometry, points })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn into_shared(self) -> Arc<ParameterGrid> {
        Arc::new(self)
    }

    fn same_as(&self, other: &ParameterGrid) -> bool {
        self.geometry == other.geometry && self.points == other.points
    }
}

/// A subset of a grid, as a per-point membership mask.
#[derive(Clone, Debug)]
pub struct GridRegion {
    grid: Arc<ParameterGrid>,
    mask: Vec<bool>,
}

impl GridRegion {
    pub fn new(grid: Arc<ParameterGrid>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(PragmaError::GridMismatch(format!(
                "mask has {} entries for a grid of {} points",
                mask.len(),
                grid.len()
            )));
        }
        Ok(GridRegion { grid, mask })
    }

    /// Evaluate a predicate at every grid point.
    pub fn from_predicate<F>(grid: &Arc<ParameterGrid>, predicate: F) -> Self
    where
        F: Fn(&[f64]) -> bool,
    {
        let mask = grid.points().iter().map(|p| predicate(p)).collect();
        GridRegion { grid: Arc::clone(grid), mask }
    }

    pub fn grid(&self) -> &Arc<ParameterGrid> {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn member_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn member_fraction(&self) -> f64 {
        self.member_count() as f64 / self.mask.len() as f64
    }

    pub fn is_empty_region(&self) -> bool {
        self.member_count() == 0
    }

    fn check_same_grid(&self, other: &GridRegion, op: &str) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(PragmaError::GridMismatch(format!(
                "{op} requires both regions on the same grid"
            )))
        }
    }

    /// Is `self` a subset of `other`?
    pub fn subset(&self, other: &GridRegion) -> Result<bool> {
        self.check_same_grid(other, "subset")?;
        Ok(self
            .mask
            .iter()
            .zip(&other.mask)
            .all(|(a, b)| !*a || *b))
    }

    /// Do `self` and `other` share no point? (Equivalently, self is a
    /// subset of other's complement.)
    pub fn disjoint(&self, other: &GridRegion) -> Result<bool> {
        self.check_same_grid(other, "disjoint")?;
        Ok(self.mask.iter().zip(&other.mask).all(|(a, b)| !(*a && *b)))
    }

    pub fn union(regions: &[&GridRegion]) -> Result<GridRegion> {
        let Some(first) = regions.first() else {
            return Err(PragmaError::Config("union of an empty region list".into()));
        };
        let mut mask = first.mask.clone();
        for r in &regions[1..] {
            first.check_same_grid(r, "union")?;
            for (m, b) in mask.iter_mut().zip(&r.mask) {
                *m |= *b;
            }
        }
        Ok(GridRegion { grid: Arc::clone(&first.grid), mask })
    }

    pub fn intersect(&self, other: &GridRegion) -> Result<GridRegion> {
        self.check_same_grid(other, "intersect")?;
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        Ok(GridRegion { grid: Arc::clone(&self.grid), mask })
    }

    pub fn complement(&self) -> GridRegion {
        GridRegion {
            grid: Arc::clone(&self.grid),
            mask: self.mask.iter().map(|m| !*m).collect(),
        }
    }

    pub fn intersection_count(&self, other: &GridRegion) -> Result<usize> {
        self.check_same_grid(other, "intersection_count")?;
        Ok(self
            .mask
            .iter()
            .zip(&other.mask)
            .filter(|(a, b)| **a && **b)
            .count())
    }

    /// Bitwise mask equality (same grid required).
    pub fn same_mask(&self, other: &GridRegion) -> Result<bool> {
        self.check_same_grid(other, "same_mask")?;
        Ok(self.mask == other.mask)
    }

    /// CSV rows `theta_1,...,theta_k,member` in grid order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.grid.dim();
        for i in 1..=dim {
            write!(w, "theta_{i},")?;
        }
        writeln!(w, "member")?;
        for (point, m) in self.grid.points().iter().zip(&self.mask) {
            for x in point {
                write!(w, "{x},")?;
            }
            writeln!(w, "{}", if *m { 1 } else { 0 })?;
        }
        Ok(())
    }

    /// JSON document with a geometry header and the 0/1 mask.
    pub fn to_json(&self) -> serde_json::Value {
        let mask: Vec<u8> = self.mask.iter().map(|m| u8::from(*m)).collect();
        let mut doc = json!({
            "geometry": self.grid.geometry(),
            "member_count": self.member_count(),
            "mask": mask,
        });
        if matches!(self.grid.geometry(), GridGeometry::Explicit { .. }) {
            doc["points"] = json!(self.grid.points());
        }
        doc
    }
}
