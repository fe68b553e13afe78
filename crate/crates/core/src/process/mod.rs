//! Stationary hidden-Markov processes with exact lagged window laws.

mod generate;
mod model;
mod provider;
mod sample;
mod window;

pub use generate::{
    make_hidden_nonmarkov, make_markov_observable, make_markov_reference, mix_toward_markov,
    ModelSizes,
};
pub use model::{ModelRepr, ProcessModel, DEFAULT_LAG_CAP};
pub use provider::{age_requests, LagVar, LawProvider, MixtureProvider, Series, WindowLaw};
pub use sample::sample_trajectory;

pub(crate) use provider::check_requests;
