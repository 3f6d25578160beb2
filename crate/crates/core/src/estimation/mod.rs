//! Conditional maximum likelihood estimation.

pub mod bfgs;
mod fit;
mod init;
mod likelihood;

pub use fit::{fit_cmle, FitOptions, FitResult};
pub use init::initial_values;
pub use likelihood::{conditional_loglik, eta_gradients, score, EtaGradientState};

pub(crate) use likelihood::{evaluate, expected_information};
