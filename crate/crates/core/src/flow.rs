//! The discrete linearized (Oseen) state system, its adjoint, and the
//! control-to-state map built on one reusable saddle-point factorization.

use crate::error::{check_len, Error, Result};
use crate::fem::{BoundaryField, PressureField, SystemMatrices, VelocityField};
use crate::linalg::{CsrMatrix, SparseLu, TripletBuilder};
use crate::mesh::{BoundaryTag, Mesh};

/// Volume force `f`, inflow velocity `g` and outflow traction `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelData {
    pub f: VelocityField,
    pub g: BoundaryField,
    pub h: BoundaryField,
}

impl ModelData {
    pub fn zeros(mesh: &Mesh) -> Self {
        ModelData {
            f: VelocityField::zeros(mesh),
            g: BoundaryField::zeros(mesh, BoundaryTag::Inflow),
            h: BoundaryField::zeros(mesh, BoundaryTag::Outflow),
        }
    }

    pub fn new(f: VelocityField, g: BoundaryField, h: BoundaryField) -> Result<Self> {
        if g.tag() != BoundaryTag::Inflow || h.tag() != BoundaryTag::Outflow {
            return Err(Error::InvalidArgument(
                "model data needs inflow g and outflow h".into(),
            ));
        }
        Ok(ModelData { f, g, h })
    }

    /// Concatenated control vector `[f, g, h]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.f.coefficients().len() + self.g.values().len() + self.h.values().len());
        v.extend_from_slice(self.f.coefficients());
        v.extend_from_slice(self.g.values());
        v.extend_from_slice(self.h.values());
        v
    }

    /// Inverse of [`ModelData::to_vector`] for the spaces of `sys`.
    pub fn from_vector(sys: &SystemMatrices, v: &[f64]) -> Result<Self> {
        let (nv, nin) = (sys.velocity_dofs(), sys.inflow_dofs());
        check_len("control vector", control_dofs(sys), v.len())?;
        Ok(ModelData {
            f: VelocityField::from_raw(sys.layout, v[..nv].to_vec()),
            g: BoundaryField::from_raw(BoundaryTag::Inflow, v[nv..nv + nin].to_vec()),
            h: BoundaryField::from_raw(BoundaryTag::Outflow, v[nv + nin..].to_vec()),
        })
    }

    pub(crate) fn check(&self, sys: &SystemMatrices) -> Result<()> {
        check_len("f", sys.velocity_dofs(), self.f.coefficients().len())?;
        check_len("g", sys.inflow_dofs(), self.g.values().len())?;
        check_len("h", sys.outflow_dofs(), self.h.values().len())?;
        if self.f.layout() != sys.layout {
            return Err(Error::InvalidArgument("f does not match the mesh".into()));
        }
        Ok(())
    }
}

/// Length of the concatenated control vector `[f, g, h]`.
pub fn control_dofs(sys: &SystemMatrices) -> usize {
    sys.velocity_dofs() + sys.inflow_dofs() + sys.outflow_dofs()
}

/// `A = nu K + C + R / eps` together with an LU factorization of
/// `[[A, B^T], [B, 0]]`. Immutable after construction.
#[derive(Debug)]
pub struct StateOperator {
    matrices: SystemMatrices,
    nu: f64,
    epsilon: f64,
    a: CsrMatrix,
    lu: SparseLu,
}

impl StateOperator {
    pub fn new(matrices: SystemMatrices, nu: f64, epsilon: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("penalty epsilon must be positive, got {epsilon}")));
        }
        let a = CsrMatrix::linear_combination(&[
            (nu, &matrices.k),
            (1.0, &matrices.c),
            (1.0 / epsilon, &matrices.boundary.r),
        ]);
        let nv = matrices.velocity_dofs();
        let n = nv + matrices.pressure_dofs();
        let mut t = TripletBuilder::with_capacity(n, n, a.nnz() + 2 * matrices.b.nnz());
        t.add_block(&a, 0, 0, 1.0);
        t.add_block(&matrices.b, nv, 0, 1.0);
        t.add_block_transposed(&matrices.b, 0, nv, 1.0);
        let lu = SparseLu::new(t.build())?;
        Ok(StateOperator {
            matrices,
            nu,
            epsilon,
            a,
            lu,
        })
    }

    pub fn matrices(&self) -> &SystemMatrices {
        &self.matrices
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    /// The assembled saddle matrix.
    pub fn saddle(&self) -> &CsrMatrix {
        self.lu.matrix()
    }

    /// `M f + (1/eps) R E g + N h` for a concatenated control vector.
    pub fn state_rhs(&self, controls: &[f64]) -> Vec<f64> {
        let sys = &self.matrices;
        let (nv, nin) = (sys.velocity_dofs(), sys.inflow_dofs());
        let bnd = &sys.boundary;
        let mut rhs = sys.m.mul_vec(&controls[..nv]);
        let eg = bnd.e.mul_vec(&controls[nv..nv + nin]);
        bnd.r.mul_vec_add(1.0 / self.epsilon, &eg, &mut rhs);
        bnd.n.mul_vec_add(1.0, &controls[nv + nin..], &mut rhs);
        rhs
    }

    fn split(&self, mut x: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let p = x.split_off(self.matrices.velocity_dofs());
        (x, p)
    }

    /// Solves `A u + B^T p = rhs, B u = 0`.
    pub(crate) fn solve_velocity_rhs(&self, rhs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut full = rhs.to_vec();
        full.resize(self.lu.dim(), 0.0);
        self.split(self.lu.solve(&full))
    }

    /// Solves `A^T l + B^T m = rhs, B l = 0`.
    pub(crate) fn solve_adjoint_rhs(&self, rhs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut full = rhs.to_vec();
        full.resize(self.lu.dim(), 0.0);
        self.split(self.lu.solve_transpose(&full))
    }

    pub fn solve_state(&self, data: &ModelData) -> Result<(VelocityField, PressureField)> {
        data.check(&self.matrices)?;
        let (u, p) = self.solve_velocity_rhs(&self.state_rhs(&data.to_vector()));
        Ok((
            VelocityField::from_raw(self.matrices.layout, u),
            PressureField::from_raw(p),
        ))
    }

    /// Adjoint solve with right-hand side `M residual`.
    pub fn solve_adjoint(&self, residual: &VelocityField) -> Result<(VelocityField, PressureField)> {
        if residual.layout() != self.matrices.layout {
            return Err(Error::DimensionMismatch {
                context: "adjoint residual",
                expected: self.matrices.velocity_dofs(),
                actual: residual.coefficients().len(),
            });
        }
        let rhs = self.matrices.m.mul_vec(residual.coefficients());
        let (l, m) = self.solve_adjoint_rhs(&rhs);
        Ok((
            VelocityField::from_raw(self.matrices.layout, l),
            PressureField::from_raw(m),
        ))
    }

    /// Control-to-state map `c = [f, g, h] -> u`.
    pub fn control_to_state(&self, controls: &[f64]) -> Result<Vec<f64>> {
        check_len("control vector", control_dofs(&self.matrices), controls.len())?;
        Ok(self.solve_velocity_rhs(&self.state_rhs(controls)).0)
    }

    /// Transpose of the control-to-state map applied to a dual velocity
    /// vector `z`: `L^T z = [M l, (1/eps) E^T R l, N^T l]` with `l` the
    /// adjoint velocity for right-hand side `z`.
    pub fn control_adjoint(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("dual velocity vector", self.matrices.velocity_dofs(), z.len())?;
        let (l, m) = self.solve_adjoint_rhs(z);
        Ok(self.pullback(z, &l, &m))
    }

    pub(crate) fn pullback(&self, z: &[f64], l: &[f64], m: &[f64]) -> Vec<f64> {
        let sys = &self.matrices;
        let bnd = &sys.boundary;
        // (1/eps) R l is O(1) while l itself is O(eps) on the Dirichlet
        // boundary; recover it from the adjoint equation instead of
        // amplifying round-off by 1/eps:
        // (1/eps) R l = z - nu K l + C l - B^T m.
        let mut rl = z.to_vec();
        sys.k.mul_vec_add(-self.nu, l, &mut rl);
        sys.c.mul_vec_add(1.0, l, &mut rl);
        sys.b.tr_mul_vec_add(-1.0, m, &mut rl);

        let mut out = sys.m.mul_vec(l);
        out.extend(bnd.e.tr_mul_vec(&rl));
        out.extend(bnd.n.tr_mul_vec(l));
        out
    }
}
