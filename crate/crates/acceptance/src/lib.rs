// SPDX-License-Identifier: MIT OR Apache-2.0

//! Holds the `acceptance` test target; run it with
//! `cargo test -p cpdnet-validation --test acceptance`.
