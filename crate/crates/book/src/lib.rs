//! Runs every Rust listing of the guide as a doc test, one module per
//! chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/specs.md")]
pub mod specs {}
#[doc = include_str!("../../../book/src/energies.md")]
pub mod energies {}
#[doc = include_str!("../../../book/src/geometries.md")]
pub mod geometries {}
#[doc = include_str!("../../../book/src/energization.md")]
pub mod energization {}
#[doc = include_str!("../../../book/src/forcing.md")]
pub mod forcing {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
