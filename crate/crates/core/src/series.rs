// SPDX-License-Identifier: MIT OR Apache-2.0

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{CpdError, Result};

/// A finite real sequence of length at least two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Series(Vec<f64>);

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(CpdError::InvalidLength(format!(
                "a series needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(CpdError::NonFinite { index });
        }
        Ok(Series(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Applies `f` elementwise. Fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Series> {
        Series::new(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn window(&self, start: usize, len: usize) -> Result<Series> {
        Series::new(self.0[start..start + len].to_vec())
    }
}

impl Deref for Series {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Series {
    type Error = CpdError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Series::new(values)
    }
}

impl From<Series> for Vec<f64> {
    fn from(s: Series) -> Vec<f64> {
        s.0
    }
}
