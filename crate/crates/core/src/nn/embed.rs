// SPDX-License-Identifier: MIT OR Apache-2.0

//! Networks with one hidden layer that reproduce a contrast scan exactly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::network::{Architecture, Head, Layer, Network};
use super::preprocess::Preprocess;
use crate::cusum::{cusum_basis, dyadic_grid};
use crate::error::{CpdError, Result};
use crate::glr::GlrDirections;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CusumVariant {
    /// All `n − 1` contrasts, width `2n − 2`.
    Full,
    /// Dyadic grid only, width `2|T₀|`.
    Star,
}

/// `1{max_k |u_kᵀx| > λ}` as a network: hidden rows `±u_k` with bias `λ`,
/// output summing the hidden units, threshold 0.
pub fn embed_directions(n: usize, directions: &[&[f64]], lambda: f64) -> Result<Network> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CpdError::InvalidThreshold(format!("lambda must be positive, got {lambda}")));
    }
    if directions.is_empty() {
        return Err(CpdError::EmptyScan);
    }
    let k = directions.len();
    let mut w0 = DMatrix::zeros(2 * k, n);
    for (i, u) in directions.iter().enumerate() {
        if u.len() != n {
            return Err(CpdError::ShapeMismatch { expected: n, got: u.len() });
        }
        for (j, &v) in u.iter().enumerate() {
            w0[(i, j)] = v;
            w0[(k + i, j)] = -v;
        }
    }
    let hidden = Layer { weights: w0, bias: DVector::from_element(2 * k, lambda) };
    let output = Layer { weights: DMatrix::from_element(1, 2 * k, 1.0), bias: DVector::zeros(1) };
    let arch = Architecture::new(n, &[2 * k], 1)?;
    Network::new(arch, Preprocess::identity(), vec![hidden, output], Head::Threshold { lambda: 0.0 })
}

/// Network equivalent of the CUSUM (or CUSUM*) classifier at threshold λ.
pub fn embed_cusum(n: usize, lambda: f64, variant: CusumVariant) -> Result<Network> {
    let basis = cusum_basis(n)?;
    let idx: Vec<usize> = match variant {
        CusumVariant::Full => (1..n).collect(),
        CusumVariant::Star => dyadic_grid(n)?.indices().to_vec(),
    };
    let dirs: Vec<&[f64]> = idx.iter().map(|&i| basis.vector(i)).collect();
    embed_directions(n, &dirs, lambda)
}

/// Network equivalent of the generalised likelihood-ratio test at threshold
/// λ, skipping degenerate change locations.
pub fn embed_glr(dirs: &GlrDirections, lambda: f64) -> Result<Network> {
    let rows: Vec<&[f64]> = dirs.taus().iter().filter_map(|&t| dirs.direction(t)).collect();
    embed_directions(dirs.n(), &rows, lambda)
}
