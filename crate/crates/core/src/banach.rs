//! Grid-sampled states on `L1` and sup-norm spaces, and selections of the
//! duality map with their pairings.
//!
//! A state is stored as one value per uniform cell. The `L1` norm is the
//! midpoint rule over the cells; the sup norm is the largest cell magnitude.
//! The duality map is set-valued in both spaces, so [`GridFunction::duality_select`]
//! returns one deterministic element of it:
//!
//! * `L1`: the sign function scaled by `|y|_1`, with sign `0` at exact zeros.
//! * sup: a point mass at the smallest index where `|y|` is maximal, weighted
//!   by the value there.

use crate::error::{Error, Result};

/// Which norm a state carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    L1,
    Sup,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::L1 => "L1",
            NormKind::Sup => "Sup",
        }
    }
}

/// Uniform cell grid on `(x_min, x_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "x_max = {x_max} must exceed x_min = {x_min}"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells, got {n_cells}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
        })
    }

    /// Unit interval `(0, 1)`.
    pub fn unit(n_cells: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_cells)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.width() / self.n_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |i| self.center(i))
    }

    /// Number of whole cells covered by a displacement `t`, if `t` is a
    /// multiple of the spacing up to rounding.
    pub fn aligned_cells(&self, t: f64) -> Option<usize> {
        let m = t / self.dx();
        let r = m.round();
        if (m - r).abs() <= 1e-9 * m.abs().max(1.0) {
            Some(r as usize)
        } else {
            None
        }
    }

    /// Midpoint-rule integral of cell values.
    pub(crate) fn integrate(&self, sum: f64) -> f64 {
        // width * sum / n rather than dx * sum keeps constants exact
        self.width() * sum / self.n_cells as f64
    }
}

/// A state sampled on a [`Grid`], tagged with the norm of its space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    norm: NormKind,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, norm: NormKind) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values, norm })
    }

    pub fn zeros(grid: Grid, norm: NormKind) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_cells()],
            norm,
        }
    }

    pub fn constant(grid: Grid, norm: NormKind, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_cells()],
            norm,
        }
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: Grid, norm: NormKind, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.centers().map(f).collect();
        Self::new(grid, values, norm)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same grid and norm, new values. Panics on a length mismatch.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "length mismatch");
        Self {
            grid: self.grid,
            values,
            norm: self.norm,
        }
    }

    pub fn norm(&self) -> f64 {
        match self.norm {
            NormKind::L1 => self
                .grid
                .integrate(self.values.iter().map(|v| v.abs()).sum()),
            NormKind::Sup => self.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.ensure_same_grid(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        ))
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &GridFunction) -> Result<()> {
        self.ensure_same_grid(x)?;
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
        Ok(())
    }

    /// One element of the duality set `J(y)`.
    ///
    /// For the zero state the zero functional is returned.
    pub fn duality_select(&self) -> DualityElement {
        let selection = match self.norm {
            NormKind::L1 => {
                let signs = self
                    .values
                    .iter()
                    .map(|&v| {
                        if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                DualitySelection::L1Sign {
                    signs,
                    scale: self.norm(),
                }
            }
            NormKind::Sup => {
                let mut index = 0;
                let mut best = 0.0;
                for (i, v) in self.values.iter().enumerate() {
                    if v.abs() > best {
                        best = v.abs();
                        index = i;
                    }
                }
                DualitySelection::PointMass {
                    index,
                    weight: self.values[index],
                }
            }
        };
        DualityElement {
            grid: self.grid,
            selection,
        }
    }
}

/// Concrete form of a duality-map selection.
#[derive(Debug, Clone, PartialEq)]
pub enum DualitySelection {
    /// `phi(x) = scale * sign(y(x))`, an element of `L^inf`.
    L1Sign { signs: Vec<f64>, scale: f64 },
    /// `phi = weight * delta_{x_index}`, a point measure.
    PointMass { index: usize, weight: f64 },
}

/// A functional in the dual space, bound to the grid of the state it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityElement {
    grid: Grid,
    selection: DualitySelection,
}

impl DualityElement {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn selection(&self) -> &DualitySelection {
        &self.selection
    }

    /// `<z, phi>`
    pub fn pair(&self, z: &GridFunction) -> Result<f64> {
        if z.grid != self.grid {
            return Err(Error::GridMismatch(format!(
                "pairing a state on {:?} with a functional on {:?}",
                z.grid, self.grid
            )));
        }
        Ok(match &self.selection {
            DualitySelection::L1Sign { signs, scale } => {
                let s: f64 = z.values.iter().zip(signs).map(|(a, b)| a * b).sum();
                scale * self.grid.integrate(s)
            }
            DualitySelection::PointMass { index, weight } => z.values[*index] * weight,
        })
    }
}

/// `<z, j>`; see [`DualityElement::pair`].
pub fn pair(z: &GridFunction, j: &DualityElement) -> Result<f64> {
    j.pair(z)
}
