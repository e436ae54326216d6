use std::path::Path;

use crate::error::Result;
use crate::fem::{PressureField, VelocityField};
use crate::testbed::{Evaluator, PoiseuilleCase};

/// One row of a filter comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterReport {
    pub method: String,
    pub alpha: f64,
    pub residual_l2: f64,
    pub err_u_l2: Option<f64>,
    pub err_u_h1: Option<f64>,
    pub err_p_l2: Option<f64>,
    pub div_h: f64,
    pub iters: Option<usize>,
    pub seconds: f64,
}

pub const REPORT_HEADER: &str = "method,alpha,residual_l2,err_u_l2,err_u_h1,err_p_l2,div_h,iters,seconds";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

impl FilterReport {
    /// Scores a filter output. Reference errors are filled in when `case`
    /// is given; the pressure error only when `p` is.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        method: &str,
        alpha: f64,
        eval: &Evaluator,
        u: &VelocityField,
        p: Option<&PressureField>,
        u_delta: &VelocityField,
        case: Option<&PoiseuilleCase>,
        iters: Option<usize>,
        seconds: f64,
    ) -> Result<Self> {
        let norms = case.map(|c| eval.error_norms(c, u, p)).transpose()?;
        Ok(FilterReport {
            method: method.to_string(),
            alpha,
            residual_l2: eval.distance_l2(u, u_delta)?,
            err_u_l2: norms.map(|n| n.u_l2),
            err_u_h1: norms.map(|n| n.u_h1),
            err_p_l2: norms.and_then(|n| n.p_l2),
            div_h: eval.div_h(u)?,
            iters,
            seconds,
        })
    }

    /// H^1 velocity error plus L^2 pressure error.
    pub fn total_error(&self) -> Option<f64> {
        Some(self.err_u_h1? + self.err_p_l2.unwrap_or(0.0))
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method,
            self.alpha,
            self.residual_l2,
            opt(self.err_u_l2),
            opt(self.err_u_h1),
            opt(self.err_p_l2),
            self.div_h,
            opt(self.iters),
            self.seconds
        )
    }
}

pub fn write_reports(path: &Path, reports: &[FilterReport]) -> Result<()> {
    crate::io::write_atomic(path, |w| {
        writeln!(w, "{REPORT_HEADER}")?;
        for r in reports {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_entries_are_nan() {
        let r = FilterReport {
            method: "smoothing".into(),
            alpha: 0.5,
            residual_l2: 0.1,
            err_u_l2: Some(0.2),
            err_u_h1: Some(3.0),
            err_p_l2: None,
            div_h: 0.6,
            iters: None,
            seconds: 0.0,
        };
        assert_eq!(r.csv_row(), "smoothing,0.5,0.1,0.2,3,nan,0.6,nan,0");
        assert_eq!(r.total_error(), Some(3.0));
        assert_eq!(REPORT_HEADER.split(',').count(), r.csv_row().split(',').count());
    }
}
