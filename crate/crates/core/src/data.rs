//! Shared data primitives: treatment arms, row-major covariate matrices and
//! query points on the augmented input space `X × {0, 1}`.

use crate::error::{input, Result};

/// Treatment arm of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treated];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn indicator(self) -> f64 {
        self.index() as f64
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }

    /// Parses a numeric treatment indicator; only exact 0 and 1 are accepted.
    pub fn from_indicator(value: f64) -> Result<Arm> {
        if value == 0.0 {
            Ok(Arm::Control)
        } else if value == 1.0 {
            Ok(Arm::Treated)
        } else {
            input(format!("treatment must be 0 or 1, got {value}"))
        }
    }
}

impl TryFrom<u8> for Arm {
    type Error = crate::Error;

    fn try_from(value: u8) -> Result<Arm> {
        Arm::from_indicator(f64::from(value))
    }
}

/// Dense row-major `n × d` covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    values: Vec<f64>,
    dim: usize,
}

impl Covariates {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return input("covariate dimension must be positive");
        }
        if values.len() % dim != 0 {
            return input(format!(
                "{} values cannot be split into rows of width {dim}",
                values.len()
            ));
        }
        Ok(Self { values, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return input("no covariate rows");
        };
        let dim = first.len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return input(format!("row {i} has {} columns, expected {dim}", row.len()));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, dim)
    }

    pub fn empty(dim: usize) -> Self {
        Self { values: Vec::new(), dim }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return input(format!("row has {} columns, expected {}", row.len(), self.dim));
        }
        self.values.extend_from_slice(row);
        Ok(())
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select(&self, indices: &[usize]) -> Covariates {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Covariates { values, dim: self.dim }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// A query location `(x, t)` on the augmented input space.
#[derive(Debug, Clone, Copy)]
pub struct Point<'a> {
    pub x: &'a [f64],
    pub arm: Arm,
}

impl<'a> Point<'a> {
    pub fn new(x: &'a [f64], arm: Arm) -> Self {
        Self { x, arm }
    }
}

/// Labeled training data `D_T = {(x_i, t_i, y_i)}` with factual outcomes only.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub covariates: Covariates,
    pub arms: Vec<Arm>,
    pub outcomes: Vec<f64>,
}

impl LabeledSet {
    pub fn new(covariates: Covariates, arms: Vec<Arm>, outcomes: Vec<f64>) -> Result<Self> {
        if covariates.len() != arms.len() || arms.len() != outcomes.len() {
            return input(format!(
                "labeled set length mismatch: {} rows, {} arms, {} outcomes",
                covariates.len(),
                arms.len(),
                outcomes.len()
            ));
        }
        if let Some(i) = outcomes.iter().position(|y| !y.is_finite()) {
            return input(format!("outcome {i} is not finite"));
        }
        Ok(Self { covariates, arms, outcomes })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.dim()
    }

    pub fn point(&self, i: usize) -> Point<'_> {
        Point::new(self.covariates.row(i), self.arms[i])
    }

    pub fn points(&self) -> Vec<Point<'_>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Returns a copy with rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> LabeledSet {
        LabeledSet {
            covariates: self.covariates.select(order),
            arms: order.iter().map(|&i| self.arms[i]).collect(),
            outcomes: order.iter().map(|&i| self.outcomes[i]).collect(),
        }
    }
}
