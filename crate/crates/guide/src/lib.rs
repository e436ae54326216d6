//! The chapters of `book/` as modules, so `cargo test` runs every Rust
//! snippet in the guide. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/mesh.md")]
pub mod mesh {}
#[doc = include_str!("../../../book/src/discretization.md")]
pub mod discretization {}
#[doc = include_str!("../../../book/src/state.md")]
pub mod state {}
#[doc = include_str!("../../../book/src/filters.md")]
pub mod filters {}
#[doc = include_str!("../../../book/src/discrepancy.md")]
pub mod discrepancy {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
