//! Age-of-information bookkeeping.
//!
//! The age of source `l` at slot `t` is `t - U_l(t)`, where `U_l(t)` is the
//! generation time of the freshest feature delivered by slot `t`. Before the
//! first delivery the age is undefined and represented as `None`.

mod age;
mod distribution;
mod order;
mod trace;

pub use age::{age_process, empirical_age_distribution, sample_path_dominates, AgeProcess};
pub use distribution::{AgeDistribution, AgeVector};
pub use order::{
    stochastic_order_multivariate, stochastic_order_univariate, OrderVerdict, UpperSet, Witness,
    ORDER_TOL,
};
pub use trace::{Delivery, DeliveryTrace};
