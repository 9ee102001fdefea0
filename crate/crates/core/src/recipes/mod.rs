// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named end-to-end experiments. Each is a pure function of its seed and
//! returns a serialisable report; [`run`] renders it as versioned JSON.

mod figures;
mod theory;

pub use figures::{
    fig1, fig1a, fig1d, figb1, table1, Fig1Report, Fig1Seed, FigB1Report, FigB1Seed, Table1Report, FIG_SEEDS,
};
pub use theory::{
    corollary1, embedding, gradcheck, grid_lemma, lemma3, thm_localisation, CorollaryReport, EmbeddingReport,
    EmbeddingRow, GradcheckReport, GridLemmaReport, GridLemmaRow, Lemma3Report, LocalisationReport,
};

use crate::error::{CpdError, Result};
use crate::io::report_json;

/// Every recipe name accepted by [`run`].
pub const RECIPES: &[&str] = &[
    "embedding",
    "lemma3",
    "corollary1",
    "grid-lemma",
    "gradcheck",
    "thm-localisation",
    "fig1a",
    "fig1d",
    "figb1",
    "table1",
];

/// Runs a recipe and returns its JSON report.
pub fn run(name: &str, seed: u64) -> Result<String> {
    match name {
        "embedding" => report_json(name, &embedding(seed)?),
        "lemma3" => report_json(name, &lemma3(seed)?),
        "corollary1" => report_json(name, &corollary1(seed)?),
        "grid-lemma" => report_json(name, &grid_lemma()?),
        "gradcheck" => report_json(name, &gradcheck(seed)?),
        "thm-localisation" => report_json(name, &thm_localisation(seed)?),
        "fig1a" => report_json(name, &fig1a(seed)?),
        "fig1d" => report_json(name, &fig1d(seed)?),
        "figb1" => report_json(name, &figb1(seed)?),
        "table1" => report_json(name, &table1(seed)?),
        other => Err(CpdError::UnknownRecipe(other.to_string())),
    }
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
