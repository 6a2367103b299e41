//! The book under `book/` is the narrative guide to `limitrain`; this
//! crate exists so `cargo test` compiles and runs every code block in
//! it. Each chapter becomes the doc comment of one empty module, and
//! rustdoc treats its fenced Rust blocks as doc tests — the book cannot
//! drift from the library without failing the build.
//!
//! Build the rendered book with `mdbook build book` (the `mdbook` tool
//! is not a build dependency; the chapters are plain Markdown).

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/plants.md")]
pub mod plants {}

#[doc = include_str!("../../../book/src/discretization.md")]
pub mod discretization {}

#[doc = include_str!("../../../book/src/networks.md")]
pub mod networks {}

#[doc = include_str!("../../../book/src/exact-imitators.md")]
pub mod exact_imitators {}

#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}

#[doc = include_str!("../../../book/src/controllers.md")]
pub mod controllers {}

#[doc = include_str!("../../../book/src/lqr.md")]
pub mod lqr {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
