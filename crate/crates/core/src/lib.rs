//! Impulse response of a molecular diffusion channel made of a point
//! transmitter, a spherical absorbing receiver and a concentric spherical
//! reflecting boundary.
//!
//! * [`eigenmodes`] solves the radial eigenproblem of the shell.
//! * [`analytic_cir`] sums the eigenmode series for the hitting rate,
//!   cumulative absorption, survival and density, and holds the free-space
//!   reference model.
//! * [`monte_carlo`] is an independent Brownian particle simulator.
//! * [`ber_link`] runs an on-off keyed link with intersymbol interference.
//! * [`cli_io`] writes the CSV/JSON artifacts used by the `shellcir` binary.

pub mod analytic_cir;
pub mod ber_link;
pub mod cli_io;
pub mod eigenmodes;
pub mod error;
pub mod monte_carlo;
pub mod numeric;
pub mod rng;
pub mod special;

pub use analytic_cir::{
    Channel, ChannelGeometry, FreeSpaceChannel, PeakPoint, SeriesKind, SeriesOptions, TStarMethod,
    TimeSeries,
};
pub use eigenmodes::{EigenMode, ModeTable, ShellRatio};
pub use error::{Error, Result};
