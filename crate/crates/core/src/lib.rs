#![no_std]

extern crate alloc;

pub mod designs;
pub mod dists;
pub mod error;
pub mod estimation;
pub mod inclusion;
pub mod oracle;
pub mod simlab;
pub mod spacing_vectors;
pub mod special;

pub use designs::{Design, DesignKind, SampleDraw};
pub use dists::{DiscreteDist, Moments, RateFamily};
pub use error::{Error, Result};
pub use spacing_vectors::{SpacingFamily, SpacingVectorDist};
