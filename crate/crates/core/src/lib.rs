//! Simulation library for the uplink of a massive MIMO base station assisted by
//! an intelligent reflecting surface (IRS).
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: dense complex kernels (Hermitian square root, SVD, QR,
//!   null spaces, seeded complex Gaussian sampling).
//! * [`channel`]: correlated Rayleigh channel draws for the direct, IRS-BS and
//!   user-IRS links, cascaded and effective channels.
//! * [`beamforming`]: MRC, optimal zero-forcing and the structured suboptimal
//!   zero-forcing receiver, plus instantaneous SINR.
//! * [`asymptotics`]: large-M SINR limits, overhead-aware rates and the
//!   reflection-coefficient search used by the MRC scheme.
//! * [`harness`]: seeded Monte Carlo trials, sweeps, convergence studies and
//!   CSV/JSON output.
//!
//! Trials run on rayon when the `parallel` feature is enabled (the default);
//! without it every [`exec::Execution`] mode runs sequentially.

pub mod asymptotics;
pub mod beamforming;
pub mod channel;
pub mod error;
pub mod exec;
pub mod harness;
pub mod numerics;

pub use error::{Error, Result};
pub use num_complex::Complex64;
