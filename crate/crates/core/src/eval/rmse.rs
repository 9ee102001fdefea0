// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{CpdError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    /// Over cases with exactly one estimate; `None` if there are none.
    pub rmse: Option<f64>,
    pub matched: usize,
    /// Cases where the number of estimates is not one.
    pub failures: usize,
    pub total: usize,
}

/// `√(mean (τ̂ − τ)²)` over single-change cases; cases with `ν̂ ≠ 1` are
/// counted as failures and left out.
pub fn localisation_rmse(estimates: &[Vec<usize>], truths: &[usize]) -> Result<RmseReport> {
    if estimates.len() != truths.len() {
        return Err(CpdError::ShapeMismatch { expected: truths.len(), got: estimates.len() });
    }
    let mut sum = 0.0;
    let mut matched = 0;
    for (est, &tau) in estimates.iter().zip(truths) {
        if let [hat] = est.as_slice() {
            let d = hat.abs_diff(tau) as f64;
            sum += d * d;
            matched += 1;
        }
    }
    Ok(RmseReport {
        rmse: (matched > 0).then(|| (sum / matched as f64).sqrt()),
        matched,
        failures: truths.len() - matched,
        total: truths.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusum::cusum_statistic;
    use crate::simgen::{gen_single_change_long, NoiseSpec, SnrBand};

    #[test]
    fn exact_and_shifted() {
        let truths = [10, 20, 30];
        let r = localisation_rmse(&[vec![10], vec![20], vec![30]], &truths).unwrap();
        assert_eq!(r.rmse, Some(0.0));
        let r = localisation_rmse(&[vec![12], vec![22], vec![32]], &truths).unwrap();
        assert_eq!(r.rmse, Some(2.0));
        let r = localisation_rmse(&[vec![], vec![22, 40], vec![32]], &truths).unwrap();
        assert_eq!((r.matched, r.failures, r.rmse), (1, 2, Some(2.0)));
        assert!(localisation_rmse(&[vec![1]], &[]).is_err());
    }

    #[test]
    fn cusum_argmax_sharpens_with_snr() {
        let g = NoiseSpec::Gaussian { sd: 1.0 };
        let rmse = |band| {
            let d = gen_single_change_long(2000, (750, 1250), band, g, 200, 11).unwrap();
            let est: Vec<Vec<usize>> = d.series().map(|x| vec![cusum_statistic(x).1]).collect();
            let truth: Vec<usize> = d.examples.iter().map(|e| e.meta.tau.unwrap()).collect();
            localisation_rmse(&est, &truth).unwrap().rmse.unwrap()
        };
        assert!(rmse(SnrBand::Strong) < rmse(SnrBand::Weak));
    }
}
