//! Character error rate: alignment, MSA-bias classification and sampling.

mod align;
mod breakdown;
mod sample;

pub use align::{
    align, align_with, edit_distance, graphemes, Alignment, EditKind, EditOp, GraphemeUnit,
};
pub use breakdown::{breakdown, ErrorBreakdown};
pub use sample::{eligible_pairs, sample_report, SampleError, SampleItem, SampleReport, AVERAGING};
