use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::torus::TorusGrid;

/// Real samples on a torus grid.
///
/// Values are stored component-major: component `c` occupies
/// `values[c * len .. (c + 1) * len]`. Scalar fields have one component,
/// vector fields `d`, and tensor fields `d * d` (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    components: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &TorusGrid, components: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != components * grid.len() {
            return Err(Error::Invalid(format!(
                "field expects {} samples, got {}",
                components * grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            components,
            values,
        })
    }

    pub fn zeros(grid: &TorusGrid, components: usize) -> Self {
        Self {
            grid: grid.clone(),
            components,
            values: vec![0.0; components * grid.len()],
        }
    }

    pub fn constant(grid: &TorusGrid, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            components: 1,
            values: vec![value; grid.len()],
        }
    }

    pub fn scalar(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, values)
    }

    /// Samples a scalar function of the point coordinates.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..d])).collect();
        Self {
            grid: grid.clone(),
            components: 1,
            values,
        }
    }

    /// Samples a vector function; `f` writes `d` components into its output.
    pub fn vector_from_fn(grid: &TorusGrid, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let d = grid.dim();
        let len = grid.len();
        let mut values = vec![0.0; d * len];
        let mut buf = vec![0.0; d];
        for i in 0..len {
            f(&grid.point(i)[..d], &mut buf);
            for c in 0..d {
                values[c * len + i] = buf[c];
            }
        }
        Self {
            grid: grid.clone(),
            components: d,
            values,
        }
    }

    /// Stacks scalar fields into one multi-component field.
    pub fn stack(parts: &[Field]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("cannot stack zero fields".into()))?;
        let mut values = Vec::with_capacity(parts.len() * first.grid.len());
        for p in parts {
            p.expect_grid(&first.grid)?;
            p.expect_components(1)?;
            values.extend_from_slice(&p.values);
        }
        Ok(Self {
            grid: first.grid.clone(),
            components: parts.len(),
            values,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
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

    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[c * len..(c + 1) * len]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let len = self.grid.len();
        &mut self.values[c * len..(c + 1) * len]
    }

    /// Copies one component out as a scalar field.
    pub fn component_field(&self, c: usize) -> Field {
        Field {
            grid: self.grid.clone(),
            components: 1,
            values: self.component(c).to_vec(),
        }
    }

    pub fn expect_grid(&self, grid: &TorusGrid) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::GridMismatch(format!(
                "field on {:?}, expected {:?}",
                self.grid, grid
            )));
        }
        Ok(())
    }

    pub fn expect_components(&self, expected: usize) -> Result<()> {
        if self.components != expected {
            return Err(Error::ComponentMismatch {
                expected,
                found: self.components,
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            components: self.components,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| v * s)
    }

    /// Multiplies every component by a scalar field.
    pub fn mul_scalar_field(&self, s: &Field) -> Field {
        debug_assert_eq!(s.components, 1);
        let len = self.grid.len();
        let mut out = self.clone();
        for c in 0..self.components {
            for i in 0..len {
                out.values[c * len + i] *= s.values[i];
            }
        }
        out
    }

    /// Pointwise product of two scalar fields.
    pub fn mul_pointwise(&self, other: &Field) -> Field {
        debug_assert_eq!(self.values.len(), other.values.len());
        Field {
            grid: self.grid.clone(),
            components: self.components,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }

    /// Pointwise Euclidean magnitude across components.
    pub fn magnitude(&self) -> Field {
        let len = self.grid.len();
        let values = (0..len)
            .map(|i| {
                (0..self.components)
                    .map(|c| self.values[c * len + i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        Field {
            grid: self.grid.clone(),
            components: 1,
            values,
        }
    }

    /// Pointwise dot product of two fields with equal component counts.
    pub fn dot_pointwise(&self, other: &Field) -> Field {
        let len = self.grid.len();
        let mut values = vec![0.0; len];
        for c in 0..self.components {
            let (a, b) = (self.component(c), other.component(c));
            for i in 0..len {
                values[i] += a[i] * b[i];
            }
        }
        Field {
            grid: self.grid.clone(),
            components: 1,
            values,
        }
    }

    /// Measure-weighted integral of each component, summed: `∫ f dx`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * neumaier_sum(self.values.iter().copied())
    }

    /// Integral divided by the torus measure.
    pub fn average(&self) -> f64 {
        self.integral() / (self.grid.measure() * self.components as f64)
    }

    /// Discrete `L²` inner product (cell-volume quadrature).
    pub fn inner(&self, other: &Field) -> f64 {
        self.grid.cell_volume() * neumaier_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&Field> for Field {
    fn add_assign(&mut self, rhs: &Field) {
        debug_assert_eq!(self.values.len(), rhs.values.len());
        for (a, b) in self.values.iter_mut().zip(&rhs.values) {
            *a += b;
        }
    }
}

impl SubAssign<&Field> for Field {
    fn sub_assign(&mut self, rhs: &Field) {
        debug_assert_eq!(self.values.len(), rhs.values.len());
        for (a, b) in self.values.iter_mut().zip(&rhs.values) {
            *a -= b;
        }
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scale(rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}
