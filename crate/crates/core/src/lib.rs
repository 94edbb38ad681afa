//! Stochastic matrix population models fitted to time series by sequential
//! importance sampling.
//!
//! A model is a [`StateSchema`](schema::StateSchema) of demographic cells,
//! an ordered list of [`ProcessSpec`](process::ProcessSpec)s applied each
//! year, and an [`ObservationModel`](observation::ObservationModel) linking
//! the hidden state to survey counts. The [`sis`] module fits such models;
//! [`oracle`] holds exact reference filters for small cases.

pub mod catalog;
pub mod covariates;
pub mod error;
pub mod io;
pub mod model;
pub mod oracle;
pub mod observation;
pub mod params;
pub mod process;
pub mod rates;
pub mod rng;
pub mod schema;
pub mod seal;
pub mod sis;
pub mod state;

pub use error::{Error, Result};
