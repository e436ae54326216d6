//! Reconstruction filters and regularization-parameter choice.

mod baseline;
mod discrepancy;
mod fdc;
mod report;

pub use baseline::{smoothing_filter, solenoidal_filter};
pub use discrepancy::{discrepancy_select, Discrepancy, MAX_HALVINGS};
pub use fdc::{CgOptions, FdcProblem, FdcSolution};
pub use report::{write_reports, FilterReport, REPORT_HEADER};
