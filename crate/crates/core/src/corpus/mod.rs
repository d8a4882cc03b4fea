//! Labeled datasets, the label set and the prediction-exchange format.

mod dataset;
mod io;
mod label;
mod prediction;
mod sampling;

pub use dataset::{Dataset, Document};
pub use io::{load_dataset, load_dataset_with, write_dataset, DataFormat, LoadOptions};
pub use label::{FoundationLabel, ParseLabelError, Polarity, FOUNDATIONS, REPORT_ORDER};
pub use prediction::{
    read_predictions, read_predictions_from, write_predictions, write_predictions_to, Prediction,
};
pub(crate) use sampling::rng;
pub use sampling::{make_batches, stratified_split, undersample, UndersampleTarget};
