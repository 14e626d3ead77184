//! Explicit min-wise and k-min-wise hash families, together with the
//! pseudorandom generators, extractors and exact measurement tools used to
//! build and check them.

pub mod cli;
pub mod enumerate;
pub mod error;
pub mod extractor;
pub mod gf2;
pub mod kwise;
pub mod minwise;
pub mod rect_prg;
pub mod seed;
pub mod verify;

pub use error::{Error, Result};
pub use seed::SeedBits;
