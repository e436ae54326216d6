//! Smoothing and solenoidal filters: the data-only baselines.

use crate::error::{Error, Result};
use crate::fem::{PressureField, SystemMatrices, VelocityField};
use crate::linalg::{CsrMatrix, SparseCholesky, SparseLu, TripletBuilder};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")))
    }
}

fn check_field(sys: &SystemMatrices, u: &VelocityField) -> Result<()> {
    if u.layout() == sys.layout {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context: "measurements vs matrices",
            expected: sys.velocity_dofs(),
            actual: u.coefficients().len(),
        })
    }
}

/// Solves `(M + alpha K) u = M u_delta`; `alpha = 0` returns the data.
pub fn smoothing_filter(sys: &SystemMatrices, u_delta: &VelocityField, alpha: f64) -> Result<VelocityField> {
    check_alpha(alpha)?;
    check_field(sys, u_delta)?;
    if alpha == 0.0 {
        return Ok(u_delta.clone());
    }
    let lhs = CsrMatrix::linear_combination(&[(1.0, &sys.m), (alpha, &sys.k)]);
    let rhs = sys.m.mul_vec(u_delta.coefficients());
    let u = SparseCholesky::new(&lhs)?.solve(&rhs);
    Ok(VelocityField::from_raw(sys.layout, u))
}

/// Solves `(M + alpha K) u + B^T p = M u_delta, B u = 0`.
pub fn solenoidal_filter(
    sys: &SystemMatrices,
    u_delta: &VelocityField,
    alpha: f64,
) -> Result<(VelocityField, PressureField)> {
    check_alpha(alpha)?;
    check_field(sys, u_delta)?;
    let nv = sys.velocity_dofs();
    let n = nv + sys.pressure_dofs();
    let mut t = TripletBuilder::with_capacity(n, n, sys.m.nnz() + sys.k.nnz() + 2 * sys.b.nnz());
    t.add_block(&sys.m, 0, 0, 1.0);
    if alpha > 0.0 {
        t.add_block(&sys.k, 0, 0, alpha);
    }
    t.add_block(&sys.b, nv, 0, 1.0);
    t.add_block_transposed(&sys.b, 0, nv, 1.0);
    let lu = SparseLu::new(t.build())?;
    let mut rhs = sys.m.mul_vec(u_delta.coefficients());
    rhs.resize(n, 0.0);
    let mut x = lu.solve(&rhs);
    let p = x.split_off(nv);
    Ok((VelocityField::from_raw(sys.layout, x), PressureField::from_raw(p)))
}
