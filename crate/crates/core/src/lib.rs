//! Snapshot video compressive sensing: forward models, a GAP-TV baseline, and a
//! two-stage deep unfolding reconstructor with memory-free invertible blocks.

pub mod cli;
pub mod error;
pub mod gap_tv;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod projection;
pub mod sensing;
pub mod training;
pub mod unfold_net;

pub use error::{Result, VcsError};
