//! Record parsing, one-hot and min-max preprocessing, experiment splits and
//! training-set contamination.

mod cache;
mod parse;
mod preprocess;
mod schema;
mod split;

pub use cache::{read_cache, write_cache};
pub use parse::{
    parse_csv, parse_csv_reader, parse_nslkdd, parse_nslkdd_reader, LineError, ParseReport, RawRecord, RawValue,
    DEFAULT_MAX_BAD_RATIO,
};
pub use preprocess::{
    encode, encode_values, fit_transform, EncodeReport, LabeledDataset, PreprocessStats, Provenance, UnseenPolicy,
};
pub use schema::{FeatureKind, FeatureSpec, LabelConvention, RecordSchema};
pub use split::{
    contamination_count, mix_contamination, split_ideal, split_ideal_indices, split_with_pool, split_with_pool_indices,
    subsample, ContaminatedSet, Split, SplitIndices,
};
