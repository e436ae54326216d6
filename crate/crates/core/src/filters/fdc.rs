//! The fluid-dynamically consistent filter: Tikhonov-regularized fitting of
//! the linearized flow model to the data, with `(f, g, h)` as controls.
//!
//! With `u = L c` the control-to-state map and `W = diag(M, G, H)`,
//!
//! ```text
//! J(c) = ||L c - u_delta||_M^2 + alpha ||c - c*||_W^2
//! ```
//!
//! whose minimizer solves `(L^T M L + alpha W) c = L^T M u_delta + alpha W c*`.

use crate::error::{check_len, Error, Result};
use crate::fem::{PressureField, VelocityField};
use crate::flow::{control_dofs, ModelData, StateOperator};
use crate::linalg::{axpy, dot, sub, CsrMatrix, SparseCholesky, SparseLu, TripletBuilder};

/// Stopping rule of the reduced conjugate gradient method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    /// Bound on `||r||_{W^-1} / ||b||_{W^-1}`, where `r` is the residual of
    /// the normal equations (half the negative gradient) and `b` the
    /// right-hand side (half the negative gradient at `c = 0`).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

/// Minimizer of `J` for one `alpha`.
#[derive(Clone, Debug)]
pub struct FdcSolution {
    pub alpha: f64,
    pub u: VelocityField,
    pub p: PressureField,
    pub controls: ModelData,
    /// CG iterations (0 for the one-shot KKT solve).
    pub iterations: usize,
    pub relative_gradient: f64,
}

/// The filter problem for fixed state operator, priors and measurements;
/// `alpha` is supplied per solve.
pub struct FdcProblem<'a> {
    op: &'a StateOperator,
    priors: &'a ModelData,
    data: &'a VelocityField,
    gramian_blocks: [SparseCholesky; 3],
    /// `L^T M u_delta`
    data_term: Vec<f64>,
    /// `W c*`
    prior_term: Vec<f64>,
}

impl std::fmt::Debug for FdcProblem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FdcProblem")
            .field("controls", &self.data_term.len())
            .finish_non_exhaustive()
    }
}

impl<'a> FdcProblem<'a> {
    pub fn new(op: &'a StateOperator, priors: &'a ModelData, data: &'a VelocityField) -> Result<Self> {
        let sys = op.matrices();
        priors.check(sys)?;
        if data.layout() != sys.layout {
            return Err(Error::DimensionMismatch {
                context: "measurements vs state operator",
                expected: sys.velocity_dofs(),
                actual: data.coefficients().len(),
            });
        }
        let bnd = &sys.boundary;
        let gramian_blocks = [
            SparseCholesky::new(&sys.m)?,
            SparseCholesky::new(&bnd.g)?,
            SparseCholesky::new(&bnd.h)?,
        ];
        let data_term = op.control_adjoint(&sys.m.mul_vec(data.coefficients()))?;
        let mut problem = FdcProblem {
            op,
            priors,
            data,
            gramian_blocks,
            data_term,
            prior_term: Vec::new(),
        };
        problem.prior_term = problem.gramian(&priors.to_vector());
        Ok(problem)
    }

    pub fn op(&self) -> &StateOperator {
        self.op
    }

    pub fn priors(&self) -> &ModelData {
        self.priors
    }

    pub fn data(&self) -> &VelocityField {
        self.data
    }

    fn ranges(&self) -> [std::ops::Range<usize>; 3] {
        let sys = self.op.matrices();
        let (nv, nin) = (sys.velocity_dofs(), sys.inflow_dofs());
        [0..nv, nv..nv + nin, nv + nin..control_dofs(sys)]
    }

    /// `W c` with `W = diag(M, G, H)`.
    pub fn gramian(&self, c: &[f64]) -> Vec<f64> {
        let sys = self.op.matrices();
        let blocks = [&sys.m, &sys.boundary.g, &sys.boundary.h];
        let mut out = Vec::with_capacity(c.len());
        for (r, m) in self.ranges().into_iter().zip(blocks) {
            out.extend(m.mul_vec(&c[r]));
        }
        out
    }

    fn gramian_inverse(&self, c: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(c.len());
        for (r, chol) in self.ranges().into_iter().zip(&self.gramian_blocks) {
            out.extend(chol.solve(&c[r]));
        }
        out
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "the model-based filter needs alpha > 0, got {alpha}"
            )))
        }
    }

    /// `J_alpha(c)`.
    pub fn objective(&self, alpha: f64, controls: &ModelData) -> Result<f64> {
        controls.check(self.op.matrices())?;
        let c = controls.to_vector();
        let u = self.op.control_to_state(&c)?;
        let r = sub(&u, self.data.coefficients());
        let d = sub(&c, &self.priors.to_vector());
        Ok(self.op.matrices().m.quad_form(&r) + alpha * dot(&d, &self.gramian(&d)))
    }

    /// Gradient of `J_alpha` with respect to the concatenated controls:
    /// `2 L^T M (L c - u_delta) + 2 alpha W (c - c*)`; one state and one
    /// adjoint solve.
    pub fn reduced_gradient(&self, alpha: f64, controls: &ModelData) -> Result<ModelData> {
        controls.check(self.op.matrices())?;
        let c = controls.to_vector();
        let u = self.op.control_to_state(&c)?;
        let r = sub(&u, self.data.coefficients());
        let mut grad = self.op.control_adjoint(&self.op.matrices().m.mul_vec(&r))?;
        let d = sub(&c, &self.priors.to_vector());
        let wd = self.gramian(&d);
        for (g, w) in grad.iter_mut().zip(&wd) {
            *g = 2.0 * (*g + alpha * w);
        }
        ModelData::from_vector(self.op.matrices(), &grad)
    }

    /// `(L^T M L + alpha W) d`: one state and one adjoint solve.
    fn hessian(&self, alpha: f64, d: &[f64]) -> Result<Vec<f64>> {
        let u = self.op.control_to_state(d)?;
        let mut out = self.op.control_adjoint(&self.op.matrices().m.mul_vec(&u))?;
        axpy(alpha, &self.gramian(d), &mut out);
        Ok(out)
    }

    fn finish(&self, alpha: f64, c: Vec<f64>, iterations: usize, relative_gradient: f64) -> Result<FdcSolution> {
        let controls = ModelData::from_vector(self.op.matrices(), &c)?;
        let (u, p) = self.op.solve_state(&controls)?;
        Ok(FdcSolution {
            alpha,
            u,
            p,
            controls,
            iterations,
            relative_gradient,
        })
    }

    /// Minimizes `J_alpha` by conjugate gradients on the controls,
    /// preconditioned with `W^-1`. Starts from `start`, or from the priors.
    pub fn solve(&self, alpha: f64, start: Option<&ModelData>, options: CgOptions) -> Result<FdcSolution> {
        Self::check_alpha(alpha)?;
        let mut x = match start {
            Some(s) => {
                s.check(self.op.matrices())?;
                s.to_vector()
            }
            None => self.priors.to_vector(),
        };
        let mut b = self.data_term.clone();
        axpy(alpha, &self.prior_term, &mut b);
        let reference = dot(&b, &self.gramian_inverse(&b)).max(0.0).sqrt();

        let mut r = sub(&b, &self.hessian(alpha, &x)?);
        let mut z = self.gramian_inverse(&r);
        let mut rz = dot(&r, &z);
        let rel = |rz: f64| if reference > 0.0 { rz.max(0.0).sqrt() / reference } else { 0.0 };
        if rel(rz) <= options.tolerance {
            return self.finish(alpha, x, 0, rel(rz));
        }
        let mut p = z.clone();
        for it in 1..=options.max_iterations {
            let q = self.hessian(alpha, &p)?;
            let step = rz / dot(&p, &q);
            axpy(step, &p, &mut x);
            axpy(-step, &q, &mut r);
            z = self.gramian_inverse(&r);
            let rz_new = dot(&r, &z);
            if rel(rz_new) <= options.tolerance {
                return self.finish(alpha, x, it, rel(rz_new));
            }
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        Err(Error::IterationLimit {
            iterations: options.max_iterations,
            relative_gradient: rel(rz),
            last_iterate: x,
        })
    }

    /// The symmetric indefinite optimality system in the unknowns
    /// `[u, p, f, g, h, l, m]` (state, controls, adjoint state).
    pub fn kkt_matrix(&self, alpha: f64) -> CsrMatrix {
        let op = self.op;
        let sys = op.matrices();
        let bnd = &sys.boundary;
        let (nv, np, nin, nout) = (sys.velocity_dofs(), sys.pressure_dofs(), sys.inflow_dofs(), sys.outflow_dofs());
        let (iu, ip, i_f) = (0, nv, nv + np);
        let (ig, ih) = (i_f + nv, i_f + nv + nin);
        let (il, im) = (ih + nout, ih + nout + nv);
        let n = im + np;
        let re = bnd.r.mul_mat(&bnd.e).scaled(1.0 / op.epsilon());

        let mut t = TripletBuilder::new(n, n);
        t.add_block(&sys.m, iu, iu, 1.0);
        t.add_block_transposed(op.a(), iu, il, 1.0);
        t.add_block_transposed(&sys.b, iu, im, 1.0);
        t.add_block(&sys.b, ip, il, 1.0);
        t.add_block(&sys.m, i_f, i_f, alpha);
        t.add_block(&sys.m, i_f, il, -1.0);
        t.add_block(&bnd.g, ig, ig, alpha);
        t.add_block_transposed(&re, ig, il, -1.0);
        t.add_block(&bnd.h, ih, ih, alpha);
        t.add_block_transposed(&bnd.n, ih, il, -1.0);
        t.add_block(op.a(), il, iu, 1.0);
        t.add_block_transposed(&sys.b, il, ip, 1.0);
        t.add_block(&sys.m, il, i_f, -1.0);
        t.add_block(&re, il, ig, -1.0);
        t.add_block(&bnd.n, il, ih, -1.0);
        t.add_block(&sys.b, im, iu, 1.0);
        t.build()
    }

    /// Solves the full optimality system with one sparse LU; the
    /// cross-check for [`FdcProblem::solve`].
    pub fn solve_kkt(&self, alpha: f64) -> Result<FdcSolution> {
        Self::check_alpha(alpha)?;
        let sys = self.op.matrices();
        let (nv, np) = (sys.velocity_dofs(), sys.pressure_dofs());
        let nc = control_dofs(sys);
        let kkt = self.kkt_matrix(alpha);
        let mut rhs = vec![0.0; kkt.nrows()];
        rhs[..nv].copy_from_slice(&sys.m.mul_vec(self.data.coefficients()));
        for (k, v) in self.prior_term.iter().enumerate() {
            rhs[nv + np + k] = alpha * v;
        }
        let x = SparseLu::new(kkt)?.solve(&rhs);
        let c = x[nv + np..nv + np + nc].to_vec();
        let u = VelocityField::from_raw(sys.layout, x[..nv].to_vec());
        let p = PressureField::from_raw(x[nv..nv + np].to_vec());
        check_len("kkt controls", nc, c.len())?;
        Ok(FdcSolution {
            alpha,
            u,
            p,
            controls: ModelData::from_vector(sys, &c)?,
            iterations: 0,
            relative_gradient: f64::NAN,
        })
    }
}
