//! Parsers for the two input streams: OCR page dumps and manually
//! transcribed TSV files.

mod ocr;
mod tabular;

pub use ocr::{
    parse_ocr_pages, segment_ocr_page, OcrError, OcrPage, SegmentationRules, UNDETERMINED_LANG,
};
pub use tabular::{
    emit_tabular, LabelMap, LabelMapError, RowError, RowProblem, RowWarning, TabularError,
    TabularParse, TabularParser, HEADER,
};
