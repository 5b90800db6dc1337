//! The book's chapters, smushed into one crate so `cargo test --doc` runs
//! every code fence. mdbook renders the same files from `book/`; this crate
//! exists because mdbook's own `test` subcommand cannot link against
//! dependencies. One module per chapter keeps failure origins identifiable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/scale-banks.md")]
pub mod scale_banks {}

#[doc = include_str!("../../../book/src/characters.md")]
pub mod characters {}

#[doc = include_str!("../../../book/src/gateway.md")]
pub mod gateway {}

#[doc = include_str!("../../../book/src/interviews.md")]
pub mod interviews {}

#[doc = include_str!("../../../book/src/assessment.md")]
pub mod assessment {}

#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
