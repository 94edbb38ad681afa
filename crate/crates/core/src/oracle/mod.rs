//! Exact reference filters: complete enumeration for small integer models
//! and the Kalman recursion for linear-Gaussian ones.

mod enumerate;
mod kalman;

pub use enumerate::{
    enumerate_filter, initial_distribution, EnumeratedDistribution, EnumerationResult, MAX_LOST_MASS, POISSON_COVER,
};
pub use kalman::{kalman_filter, GaussianBelief, KalmanResult, LinearGaussian};
