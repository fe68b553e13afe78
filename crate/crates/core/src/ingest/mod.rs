//! Datasets, quantization and empirical window laws.

mod dataset;
mod empirical;
mod quantize;

pub use dataset::{read_records, Dataset, Record};
pub use empirical::{
    dynamic_age_law, empirical_law, empirical_law_with_history, empirical_window_law, pooled_law,
    smooth, smooth_counts, stationarity_diagnostic, AgeLawFamily, EmpiricalProvider,
    StationarityReport, DEFAULT_MIN_WINDOWS, STATIONARITY_WARN,
};
pub use quantize::{quantize, Quantizer, QuantizerConfig};
