//! Poiseuille channel flow reference, synthetic measurement noise, and the
//! error norms used to score reconstructions.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_divergence, assemble_mass, eval_pressure, eval_velocity, interpolate, interpolate_boundary, Element,
    PressureField, SystemMatrices, VelocityField,
};
use crate::flow::{ModelData, StateOperator};
use crate::linalg::SparseCholesky;
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::triangle_degree6;

/// Pressure-driven flow between two plates, `Omega = (0,L) x (0,H)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoiseuilleCase {
    pub length: f64,
    pub height: f64,
    pub nu: f64,
    pub p0: f64,
    pub pl: f64,
}

impl Default for PoiseuilleCase {
    fn default() -> Self {
        PoiseuilleCase {
            length: 5.0,
            height: 1.0,
            nu: 0.01,
            p0: 1.0,
            pl: 0.0,
        }
    }
}

impl PoiseuilleCase {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.height > 0.0 && self.nu > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid Poiseuille case {self:?}")));
        }
        Ok(())
    }

    fn amplitude(&self) -> f64 {
        (self.p0 - self.pl) / (2.0 * self.nu * self.length)
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let y = x[1];
        [self.amplitude() * (self.height * y - y * y), 0.0]
    }

    /// `grad[i][j] = d u_i / d x_j`.
    pub fn velocity_grad(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0, self.amplitude() * (self.height - 2.0 * x[1])], [0.0, 0.0]]
    }

    pub fn pressure(&self, x: [f64; 2]) -> f64 {
        self.p0 + (self.pl - self.p0) * x[0] / self.length
    }

    /// Outflow traction `nu du/dn - p n - (u.n) u / 2` at `x = L`.
    pub fn outflow_traction(&self, y: f64) -> [f64; 2] {
        let ux = self.velocity([self.length, y])[0];
        [-0.5 * ux * ux - self.pl, 0.0]
    }

    pub fn mesh(&self, nx: usize, ny: usize) -> Result<Mesh> {
        Mesh::channel(self.length, self.height, nx, ny)
    }

    /// Interpolated exact data `(f, g, h) = (0, u|in, traction|out)`.
    pub fn model_data(&self, mesh: &Mesh) -> ModelData {
        ModelData {
            f: VelocityField::zeros(mesh),
            g: interpolate_boundary(mesh, BoundaryTag::Inflow, |x| self.velocity(x)),
            h: interpolate_boundary(mesh, BoundaryTag::Outflow, |x| self.outflow_traction(x[1])),
        }
    }

    pub fn interpolate_velocity(&self, mesh: &Mesh) -> VelocityField {
        interpolate(mesh, |x| self.velocity(x))
    }

    pub fn interpolate_pressure(&self, mesh: &Mesh) -> PressureField {
        crate::fem::interpolate_pressure(mesh, |x| self.pressure(x))
    }
}

/// Target `L^3` norm and seed of the synthetic measurement noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

/// Adds i.i.d. standard normal noise to both components at every node,
/// rescaled by one global factor so that the perturbation has `L^3` norm
/// `delta`. The noise shape depends only on the seed and the mesh.
pub fn add_noise(mesh: &Mesh, clean: &VelocityField, spec: NoiseSpec) -> Result<VelocityField> {
    clean.conforms_to(mesh)?;
    if !(spec.delta >= 0.0 && spec.delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {}", spec.delta)));
    }
    if mesh.num_nodes() == 0 {
        return Err(Error::InvalidArgument("empty field".into()));
    }
    if spec.delta == 0.0 {
        return Ok(clean.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values: Vec<[f64; 2]> = (0..mesh.num_nodes())
        .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
        .collect();
    let noise = VelocityField::from_nodal(mesh, &values)?;
    let scale = spec.delta / norm_l3(mesh, &noise);
    let mut out = clean.clone();
    for (o, n) in out.coefficients_mut().iter_mut().zip(noise.coefficients()) {
        *o += scale * n;
    }
    Ok(out)
}

fn integrate(mesh: &Mesh, mut f: impl FnMut(usize, &Element, [f64; 3], [f64; 2]) -> f64) -> f64 {
    let rule = triangle_degree6();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        for q in &rule {
            total += q.weight * el.area * f(t, &el, q.bary, el.point(q.bary));
        }
    }
    total
}

/// `(int |v|^3)^(1/3)` by degree-6 quadrature of the Mini representation.
pub fn norm_l3(mesh: &Mesh, v: &VelocityField) -> f64 {
    integrate(mesh, |t, el, l, _| {
        let (val, _) = eval_velocity(mesh, el, v, t, l);
        (val[0] * val[0] + val[1] * val[1]).powf(1.5)
    })
    .cbrt()
}

/// Error norms of a reconstruction against an analytic reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub u_l2: f64,
    pub u_h1: f64,
    /// `None` for methods that produce no pressure.
    pub p_l2: Option<f64>,
    pub div_h: f64,
}

impl ErrorNorms {
    /// H^1 velocity error plus L^2 pressure error (pressure counted as 0
    /// when absent).
    pub fn total(&self) -> f64 {
        self.u_h1 + self.p_l2.unwrap_or(0.0)
    }
}

/// Mesh-bound norm evaluator; holds the factorized pressure mass matrix for
/// the discrete divergence.
#[derive(Debug)]
pub struct Evaluator {
    mesh: Mesh,
    m: crate::linalg::CsrMatrix,
    b: crate::linalg::CsrMatrix,
    mp: SparseCholesky,
}

impl Evaluator {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let (m, mp) = assemble_mass(mesh);
        Ok(Evaluator {
            mesh: mesh.clone(),
            m,
            b: assemble_divergence(mesh),
            mp: SparseCholesky::new(&mp)?,
        })
    }

    /// Reuses already assembled matrices.
    pub fn from_matrices(mesh: &Mesh, sys: &SystemMatrices) -> Result<Self> {
        Ok(Evaluator {
            mesh: mesh.clone(),
            m: sys.m.clone(),
            b: sys.b.clone(),
            mp: SparseCholesky::new(&sys.mp)?,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// `||u - v||_{L^2}` between two discrete fields.
    pub fn distance_l2(&self, u: &VelocityField, v: &VelocityField) -> Result<f64> {
        u.conforms_to(&self.mesh)?;
        v.conforms_to(&self.mesh)?;
        let d = crate::linalg::sub(u.coefficients(), v.coefficients());
        Ok(self.m.quad_form(&d).max(0.0).sqrt())
    }

    /// `sqrt((Bu)^T Mp^-1 (Bu))`, the L^2 norm of the projected divergence.
    pub fn div_h(&self, u: &VelocityField) -> Result<f64> {
        u.conforms_to(&self.mesh)?;
        let bu = self.b.mul_vec(u.coefficients());
        let z = self.mp.solve(&bu);
        Ok(crate::linalg::dot(&bu, &z).max(0.0).sqrt())
    }

    pub fn velocity_l2_error(&self, u: &VelocityField, exact: impl Fn([f64; 2]) -> [f64; 2]) -> Result<f64> {
        u.conforms_to(&self.mesh)?;
        Ok(integrate(&self.mesh, |t, el, l, x| {
            let (v, _) = eval_velocity(&self.mesh, el, u, t, l);
            let e = exact(x);
            (v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2)
        })
        .sqrt())
    }

    /// Full H^1 norm of the error (L^2 part plus gradient part).
    pub fn velocity_h1_error(
        &self,
        u: &VelocityField,
        exact: impl Fn([f64; 2]) -> [f64; 2],
        exact_grad: impl Fn([f64; 2]) -> [[f64; 2]; 2],
    ) -> Result<f64> {
        u.conforms_to(&self.mesh)?;
        Ok(integrate(&self.mesh, |t, el, l, x| {
            let (v, g) = eval_velocity(&self.mesh, el, u, t, l);
            let (e, eg) = (exact(x), exact_grad(x));
            let mut s = (v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2);
            for i in 0..2 {
                for j in 0..2 {
                    s += (g[i][j] - eg[i][j]).powi(2);
                }
            }
            s
        })
        .sqrt())
    }

    pub fn pressure_l2_error(&self, p: &PressureField, exact: impl Fn([f64; 2]) -> f64) -> Result<f64> {
        crate::error::check_len("pressure field", self.mesh.num_nodes(), p.coefficients().len())?;
        Ok(integrate(&self.mesh, |t, _, l, x| (eval_pressure(&self.mesh, p, t, l) - exact(x)).powi(2)).sqrt())
    }

    /// All norms against the Poiseuille reference.
    pub fn error_norms(
        &self,
        case: &PoiseuilleCase,
        u: &VelocityField,
        p: Option<&PressureField>,
    ) -> Result<ErrorNorms> {
        Ok(ErrorNorms {
            u_l2: self.velocity_l2_error(u, |x| case.velocity(x))?,
            u_h1: self.velocity_h1_error(u, |x| case.velocity(x), |x| case.velocity_grad(x))?,
            p_l2: p.map(|p| self.pressure_l2_error(p, |x| case.pressure(x))).transpose()?,
            div_h: self.div_h(u)?,
        })
    }
}

/// Noisy measurements of the Poiseuille flow on `mesh`.
pub fn noisy_measurements(mesh: &Mesh, case: &PoiseuilleCase, noise: NoiseSpec) -> Result<VelocityField> {
    add_noise(mesh, &case.interpolate_velocity(mesh), noise)
}

/// One cell of the linearization experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearizationRow {
    pub mesh_ny: usize,
    pub delta: f64,
    pub seed: u64,
    pub err_u_h1: f64,
    pub err_p_l2: f64,
}

/// Solves the state system with exact data, linearized around noisy
/// measurements, for every mesh `ny` (with `nx = 5 ny`) and noise level.
pub fn linearization_experiment(
    case: &PoiseuilleCase,
    mesh_ladder: &[usize],
    deltas: &[f64],
    seed: u64,
    epsilon: f64,
) -> Result<Vec<LinearizationRow>> {
    case.validate()?;
    if mesh_ladder.is_empty() || deltas.is_empty() {
        return Err(Error::InvalidArgument("empty mesh ladder or noise list".into()));
    }
    let aspect = (case.length / case.height).round() as usize;
    let mut rows = Vec::new();
    for &ny in mesh_ladder {
        let mesh = case.mesh(aspect * ny, ny)?;
        let eval = Evaluator::new(&mesh)?;
        let data = case.model_data(&mesh);
        for &delta in deltas {
            let u_delta = noisy_measurements(&mesh, case, NoiseSpec { delta, seed })?;
            let op = StateOperator::new(SystemMatrices::assemble(&mesh, &u_delta)?, case.nu, epsilon)?;
            let (u, p) = op.solve_state(&data)?;
            let norms = eval.error_norms(case, &u, Some(&p))?;
            rows.push(LinearizationRow {
                mesh_ny: ny,
                delta,
                seed,
                err_u_h1: norms.u_h1,
                err_p_l2: norms.p_l2.unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}

pub fn write_linearization_csv(path: &Path, rows: &[LinearizationRow]) -> Result<()> {
    crate::io::write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["mesh_ny", "delta", "seed", "err_u_h1", "err_p_l2"])?;
        for r in rows {
            csv.write_record([
                r.mesh_ny.to_string(),
                r.delta.to_string(),
                r.seed.to_string(),
                r.err_u_h1.to_string(),
                r.err_p_l2.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn poiseuille_values() {
        let case = PoiseuilleCase::default();
        assert_eq!(case.velocity([2.5, 0.5]), [2.5, 0.0]);
        for y in [0.0, 0.3, 1.0] {
            assert_eq!(case.pressure([5.0, y]), 0.0);
        }
        assert_eq!(case.pressure([0.0, 0.2]), 1.0);
        assert_eq!(case.outflow_traction(0.5), [-3.125, 0.0]);
        assert!(PoiseuilleCase { nu: 0.0, ..case }.validate().is_err());
    }

    #[test]
    fn poiseuille_solves_the_stokes_part_pointwise() {
        // -nu u_yy + p_x = 0 and div u = 0 for the closed form.
        let case = PoiseuilleCase::default();
        let h = 1e-4;
        for &(x, y) in &[(1.0, 0.3), (4.0, 0.8)] {
            let uyy = (case.velocity([x, y + h])[0] - 2.0 * case.velocity([x, y])[0] + case.velocity([x, y - h])[0]) / (h * h);
            let px = (case.pressure([x + h, y]) - case.pressure([x - h, y])) / (2.0 * h);
            assert!((-case.nu * uyy + px).abs() < 1e-6);
        }
    }

    #[test]
    fn l3_norm_examples() {
        let mesh = Mesh::channel(5.0, 1.0, 10, 4).unwrap();
        let one = interpolate(&mesh, |_| [1.0, 0.0]);
        assert!((norm_l3(&mesh, &one) - 5f64.cbrt()).abs() < 1e-12);
        assert_eq!(norm_l3(&mesh, &VelocityField::zeros(&mesh)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = VelocityField::from_coefficients(
            &mesh,
            (0..mesh.num_nodes() * 2 + mesh.num_triangles() * 2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let scaled = VelocityField::from_coefficients(&mesh, v.coefficients().iter().map(|c| -2.5 * c).collect()).unwrap();
        let (a, b) = (norm_l3(&mesh, &v), norm_l3(&mesh, &scaled));
        assert!((b - 2.5 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn noise_hits_the_target_level() {
        let mesh = Mesh::channel(5.0, 1.0, 20, 4).unwrap();
        let case = PoiseuilleCase::default();
        let clean = case.interpolate_velocity(&mesh);
        assert_eq!(add_noise(&mesh, &clean, NoiseSpec { delta: 0.0, seed: 1 }).unwrap(), clean);
        for seed in 0..20 {
            let noisy = add_noise(&mesh, &clean, NoiseSpec { delta: 0.1, seed }).unwrap();
            let diff = VelocityField::from_coefficients(
                &mesh,
                noisy.coefficients().iter().zip(clean.coefficients()).map(|(a, b)| a - b).collect(),
            )
            .unwrap();
            assert!((norm_l3(&mesh, &diff) - 0.1).abs() <= 1e-10 * 0.1);
            for t in 0..mesh.num_triangles() {
                assert_eq!(noisy.bubble(t), [0.0, 0.0]);
            }
        }
        let a = add_noise(&mesh, &clean, NoiseSpec { delta: 0.1, seed: 7 }).unwrap();
        let b = add_noise(&mesh, &clean, NoiseSpec { delta: 0.1, seed: 7 }).unwrap();
        let c = add_noise(&mesh, &clean, NoiseSpec { delta: 0.1, seed: 8 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(add_noise(&mesh, &clean, NoiseSpec { delta: -1.0, seed: 7 }).is_err());
    }

    #[test]
    fn norms_are_seminorms() {
        let mesh = Mesh::channel(5.0, 1.0, 10, 4).unwrap();
        let eval = Evaluator::new(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 2 * (mesh.num_nodes() + mesh.num_triangles());
        let zero = |_: [f64; 2]| [0.0, 0.0];
        let zgrad = |_: [f64; 2]| [[0.0; 2]; 2];
        for _ in 0..5 {
            let mut draw = || VelocityField::from_coefficients(&mesh, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let (a, b) = (draw(), draw());
            let sum = VelocityField::from_coefficients(&mesh, a.coefficients().iter().zip(b.coefficients()).map(|(x, y)| x + y).collect()).unwrap();
            let l2 = |v: &VelocityField| eval.velocity_l2_error(v, zero).unwrap();
            let h1 = |v: &VelocityField| eval.velocity_h1_error(v, zero, zgrad).unwrap();
            let l3 = |v: &VelocityField| norm_l3(&mesh, v);
            for norm in [&l2 as &dyn Fn(&VelocityField) -> f64, &h1, &l3] {
                assert!(norm(&a) >= 0.0);
                assert!(norm(&sum) <= norm(&a) + norm(&b) + 1e-10);
            }
            assert!(eval.div_h(&a).unwrap() >= 0.0);
        }
        let case = PoiseuilleCase::default();
        let exact_as_field = |x: [f64; 2]| [x[0] - 1.0, x[1] * 2.0];
        let u = interpolate(&mesh, exact_as_field);
        assert!(eval.velocity_l2_error(&u, exact_as_field).unwrap() < 1e-13);
        assert!(eval.velocity_h1_error(&u, exact_as_field, |_| [[1.0, 0.0], [0.0, 2.0]]).unwrap() < 1e-12);
        let p = case.interpolate_pressure(&mesh);
        assert!(eval.pressure_l2_error(&p, |x| case.pressure(x)).unwrap() < 1e-13);
    }

    #[test]
    fn interpolation_error_rates_and_h1_norm() {
        let case = PoiseuilleCase::default();
        let errors: Vec<(f64, f64, f64)> = [8, 16]
            .iter()
            .map(|&ny| {
                let mesh = case.mesh(5 * ny, ny).unwrap();
                let eval = Evaluator::new(&mesh).unwrap();
                let n = eval.error_norms(&case, &case.interpolate_velocity(&mesh), None).unwrap();
                assert!(n.p_l2.is_none());
                (n.u_l2, (n.u_h1.powi(2) - n.u_l2.powi(2)).sqrt(), n.div_h)
            })
            .collect();
        let rate = |a: f64, b: f64| (a / b).log2();
        assert!((rate(errors[0].0, errors[1].0) - 2.0).abs() < 0.1);
        assert!((rate(errors[0].1, errors[1].1) - 1.0).abs() < 0.1);
        // Nodal values depend on y only and every triangle has a horizontal
        // edge, so the interpolant is pointwise divergence-free.
        assert!(errors[0].2 < 1e-12 && errors[1].2 < 1e-12);

        let mesh = case.mesh(112, 80).unwrap();
        let eval = Evaluator::new(&mesh).unwrap();
        let u = case.interpolate_velocity(&mesh);
        let zero = |_: [f64; 2]| [0.0, 0.0];
        let h1 = eval.velocity_h1_error(&u, zero, |_| [[0.0; 2]; 2]).unwrap();
        let exact = (550.0f64 / 3.0).sqrt();
        assert!((h1 - exact).abs() <= 0.01 * exact, "{h1}");
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.4, 0.2, 0.1];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
    }
}
