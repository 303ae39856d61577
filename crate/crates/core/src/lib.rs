//! Spectral density estimation for continuous-time CAR processes observed at
//! regularly spaced or Poisson sampling times.

pub mod asymptotics;
pub mod estimators;
pub mod experiment;
pub mod kernels;
pub mod process_models;
pub mod quadrature;
pub mod sampling;
