//! Discrepancy principle on the dyadic grid `alpha_k = alpha0 * 2^-k`.

use crate::error::{Error, Result};

/// Largest grid index scanned.
pub const MAX_HALVINGS: usize = 40;

#[derive(Clone, Debug)]
pub struct Discrepancy<T> {
    pub alpha: f64,
    pub k: usize,
    pub residual: f64,
    pub value: T,
    /// `(alpha, residual)` for every evaluated grid point.
    pub trace: Vec<(f64, f64)>,
}

/// Walks `k = 0, 1, ...` and returns the first (largest) `alpha` whose
/// residual is at most `tau * delta`. `eval(alpha, previous)` returns the
/// residual and the filter output; `previous` is the output at the previous
/// grid point, useful as a warm start.
pub fn discrepancy_select<T>(
    delta: f64,
    tau: f64,
    alpha0: f64,
    mut eval: impl FnMut(f64, Option<&T>) -> Result<(f64, T)>,
) -> Result<Discrepancy<T>> {
    if !(tau > 1.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must exceed 1, got {tau}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha0 must be positive, got {alpha0}")));
    }
    let mut trace = Vec::new();
    let mut previous: Option<T> = None;
    for k in 0..=MAX_HALVINGS {
        let alpha = alpha0 * 0.5f64.powi(k as i32);
        let (residual, value) = eval(alpha, previous.as_ref())?;
        trace.push((alpha, residual));
        if residual <= tau * delta {
            return Ok(Discrepancy {
                alpha,
                k,
                residual,
                value,
                trace,
            });
        }
        previous = Some(value);
    }
    Err(Error::NoAdmissibleAlpha { trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_the_largest_admissible_alpha() {
        // residual(alpha) = alpha, so the first grid point below 0.1 is 2^-4.
        let d = discrepancy_select(0.05, 2.0, 1.0, |a, _| Ok((a, ()))).unwrap();
        assert_eq!(d.k, 4);
        assert_eq!(d.alpha, 0.0625);
        assert_eq!(d.trace.len(), 5);
    }

    #[test]
    fn warm_start_is_the_previous_output() {
        let d = discrepancy_select(0.1, 1.01, 1.0, |a, prev: Option<&f64>| {
            if let Some(&p) = prev {
                assert_eq!(p, 2.0 * a);
            }
            Ok((a, a))
        })
        .unwrap();
        assert_eq!(d.value, d.alpha);
    }

    #[test]
    fn reports_the_trace_when_nothing_is_admissible() {
        let err = discrepancy_select(0.1, 1.5, 1.0, |_, _| Ok((1.0, ()))).unwrap_err();
        match err {
            Error::NoAdmissibleAlpha { trace } => assert_eq!(trace.len(), MAX_HALVINGS + 1),
            other => panic!("{other}"),
        }
        assert!(discrepancy_select(0.1, 1.0, 1.0, |_, _| Ok((0.0, ()))).is_err());
        assert!(discrepancy_select(0.0, 2.0, 1.0, |_, _| Ok((0.0, ()))).is_err());
    }
}
