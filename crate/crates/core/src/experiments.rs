//! Reproducible filter runs on the Poiseuille testbed: single filters with a
//! fixed or discrepancy-chosen `alpha`, the four-way comparison, and `alpha`
//! sweeps over several noise levels.

use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{interpolate, PressureField, SystemMatrices, VelocityField};
use crate::filters::{
    discrepancy_select, smoothing_filter, solenoidal_filter, CgOptions, FdcProblem, FilterReport,
};
use crate::flow::{ModelData, StateOperator};
use crate::mesh::Mesh;
use crate::testbed::{noisy_measurements, Evaluator, NoiseSpec, PoiseuilleCase};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Smoothing,
    Solenoidal,
    Fdc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Smoothing => "smoothing",
            Method::Solenoidal => "solenoidal",
            Method::Fdc => "fdc",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" | "smoothing" => Ok(Method::Smoothing),
            "solenoidal" => Ok(Method::Solenoidal),
            "fdc" => Ok(Method::Fdc),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method {s:?} (expected smooth, solenoidal or fdc)"
            ))),
        }
    }
}

/// How the regularization parameter is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaRule {
    Fixed(f64),
    /// Largest `alpha0 * 2^-k` with residual at most `tau * delta`.
    Discrepancy { delta: f64, tau: f64, alpha0: f64 },
}

/// Dyadic grid `alpha0 * 2^-k` for `k = first..=last`, written
/// `a0*2^-first..last`, e.g. `1*2^-0..20`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaGrid {
    pub alpha0: f64,
    pub first: u32,
    pub last: u32,
}

impl AlphaGrid {
    pub fn alphas(&self) -> Vec<f64> {
        (self.first..=self.last)
            .map(|k| self.alpha0 * 0.5f64.powi(k as i32))
            .collect()
    }
}

impl FromStr for AlphaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("alpha grid {s:?} is not of the form a0*2^-k..K"));
        let (a0, rest) = s.split_once("*2^-").ok_or_else(bad)?;
        let (first, last) = rest.split_once("..").ok_or_else(bad)?;
        let grid = AlphaGrid {
            alpha0: a0.trim().parse().map_err(|_| bad())?,
            first: first.trim().parse().map_err(|_| bad())?,
            last: last.trim().parse().map_err(|_| bad())?,
        };
        if !(grid.alpha0 > 0.0 && grid.alpha0.is_finite()) || grid.first > grid.last {
            return Err(bad());
        }
        Ok(grid)
    }
}

/// Shape of the force misspecification: the curl of the stream function
/// `sin(pi x / L) sin(pi y / H)`. It is divergence free with zero normal
/// component on the boundary, so no part of it can be absorbed into the
/// pressure. Scaled to `L^2` norm `magnitude`.
pub fn force_offset(case: &PoiseuilleCase, mesh: &Mesh, eval: &Evaluator, magnitude: f64) -> Result<VelocityField> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidArgument(format!("force offset must be >= 0, got {magnitude}")));
    }
    let (kx, ky) = (PI / case.length, PI / case.height);
    let shape = interpolate(mesh, |x| {
        [
            ky * (kx * x[0]).sin() * (ky * x[1]).cos(),
            -kx * (kx * x[0]).cos() * (ky * x[1]).sin(),
        ]
    });
    let norm = eval.distance_l2(&shape, &VelocityField::zeros(mesh))?;
    let scale = if norm > 0.0 { magnitude / norm } else { 0.0 };
    let coefficients = shape.coefficients().iter().map(|v| scale * v).collect();
    VelocityField::from_coefficients(mesh, coefficients)
}

/// Exact Poiseuille data, with `f*` shifted by [`force_offset`].
pub fn testbed_priors(case: &PoiseuilleCase, mesh: &Mesh, eval: &Evaluator, fstar_offset: f64) -> Result<ModelData> {
    let mut priors = case.model_data(mesh);
    if fstar_offset > 0.0 {
        priors.f = force_offset(case, mesh, eval, fstar_offset)?;
    }
    Ok(priors)
}

/// Everything a filter run needs: data, the operator linearized around it,
/// priors and the evaluator.
#[derive(Debug)]
pub struct Setup {
    pub case: PoiseuilleCase,
    pub mesh: Mesh,
    pub u_delta: VelocityField,
    pub op: StateOperator,
    pub eval: Evaluator,
    pub priors: ModelData,
}

impl Setup {
    pub fn new(case: PoiseuilleCase, mesh: Mesh, u_delta: VelocityField, epsilon: f64, fstar_offset: f64) -> Result<Self> {
        case.validate()?;
        let sys = SystemMatrices::assemble(&mesh, &u_delta)?;
        let eval = Evaluator::from_matrices(&mesh, &sys)?;
        let op = StateOperator::new(sys, case.nu, epsilon)?;
        let priors = testbed_priors(&case, &mesh, &eval, fstar_offset)?;
        Ok(Setup {
            case,
            mesh,
            u_delta,
            op,
            eval,
            priors,
        })
    }

    /// Synthetic measurements: the interpolated Poiseuille flow plus noise.
    pub fn synthetic(case: PoiseuilleCase, mesh: Mesh, noise: NoiseSpec, epsilon: f64, fstar_offset: f64) -> Result<Self> {
        let u_delta = noisy_measurements(&mesh, &case, noise)?;
        Self::new(case, mesh, u_delta, epsilon, fstar_offset)
    }

    pub fn matrices(&self) -> &SystemMatrices {
        self.op.matrices()
    }

    pub fn fdc(&self) -> Result<FdcProblem<'_>> {
        FdcProblem::new(&self.op, &self.priors, &self.u_delta)
    }
}

#[derive(Clone, Debug)]
pub struct FilterOutput {
    pub u: VelocityField,
    pub p: Option<PressureField>,
    pub controls: Option<ModelData>,
    pub report: FilterReport,
    /// `(alpha, residual)` of every grid point tried by the discrepancy
    /// walk; a single entry for a fixed `alpha`.
    pub trace: Vec<(f64, f64)>,
}

struct Raw {
    u: VelocityField,
    p: Option<PressureField>,
    controls: Option<ModelData>,
    iters: Option<usize>,
}

fn filter_once(
    setup: &Setup,
    problem: Option<&FdcProblem<'_>>,
    method: Method,
    alpha: f64,
    warm: Option<&Raw>,
    cg: CgOptions,
) -> Result<Raw> {
    let sys = setup.matrices();
    Ok(match method {
        Method::Smoothing => Raw {
            u: smoothing_filter(sys, &setup.u_delta, alpha)?,
            p: None,
            controls: None,
            iters: None,
        },
        Method::Solenoidal => {
            let (u, p) = solenoidal_filter(sys, &setup.u_delta, alpha)?;
            Raw {
                u,
                p: Some(p),
                controls: None,
                iters: None,
            }
        }
        Method::Fdc => {
            let problem = problem.expect("fdc runs carry a problem");
            let start = warm.and_then(|w| w.controls.as_ref());
            let s = problem.solve(alpha, start, cg)?;
            Raw {
                u: s.u,
                p: Some(s.p),
                controls: Some(s.controls),
                iters: Some(s.iterations),
            }
        }
    })
}

/// Runs one filter. For `fdc` along a discrepancy walk, each grid point is
/// warm-started from the previous one.
pub fn run_filter(setup: &Setup, method: Method, rule: AlphaRule, cg: CgOptions) -> Result<FilterOutput> {
    let clock = Instant::now();
    let problem = match method {
        Method::Fdc => Some(setup.fdc()?),
        _ => None,
    };
    let residual = |raw: &Raw| setup.eval.distance_l2(&raw.u, &setup.u_delta);
    let (alpha, raw, trace) = match rule {
        AlphaRule::Fixed(alpha) => {
            let raw = filter_once(setup, problem.as_ref(), method, alpha, None, cg)?;
            let r = residual(&raw)?;
            (alpha, raw, vec![(alpha, r)])
        }
        AlphaRule::Discrepancy { delta, tau, alpha0 } => {
            let d = discrepancy_select(delta, tau, alpha0, |alpha, prev: Option<&Raw>| {
                let raw = filter_once(setup, problem.as_ref(), method, alpha, prev, cg)?;
                Ok((residual(&raw)?, raw))
            })?;
            (d.alpha, d.value, d.trace)
        }
    };
    let report = FilterReport::evaluate(
        method.name(),
        alpha,
        &setup.eval,
        &raw.u,
        raw.p.as_ref(),
        &setup.u_delta,
        Some(&setup.case),
        raw.iters,
        clock.elapsed().as_secs_f64(),
    )?;
    Ok(FilterOutput {
        u: raw.u,
        p: raw.p,
        controls: raw.controls,
        report,
        trace,
    })
}

/// Scores the state generated by a control vector, e.g. the last CG iterate
/// carried by an iteration-limit error.
pub fn report_for_controls(setup: &Setup, alpha: f64, controls: &[f64], iters: Option<usize>) -> Result<FilterReport> {
    let controls = ModelData::from_vector(setup.matrices(), controls)?;
    let (u, p) = setup.op.solve_state(&controls)?;
    FilterReport::evaluate(
        Method::Fdc.name(),
        alpha,
        &setup.eval,
        &u,
        Some(&p),
        &setup.u_delta,
        Some(&setup.case),
        iters,
        0.0,
    )
}

/// Smoothing, plain solenoidal, solenoidal with smoothing, and `fdc`, all
/// with the discrepancy rule (`alpha0 = 1`) except the plain solenoidal
/// filter. With `delta = 0` the rule is undefined; the baselines then use
/// `alpha = 0` and `fdc` uses `alpha = 1`.
pub fn compare(setup: &Setup, delta: f64, tau: f64, cg: CgOptions) -> Result<Vec<FilterReport>> {
    let (baseline, model) = if delta == 0.0 {
        (AlphaRule::Fixed(0.0), AlphaRule::Fixed(1.0))
    } else {
        let rule = AlphaRule::Discrepancy { delta, tau, alpha0: 1.0 };
        (rule, rule)
    };
    let smoothing = run_filter(setup, Method::Smoothing, baseline, cg)?.report;
    let solenoidal = run_filter(setup, Method::Solenoidal, AlphaRule::Fixed(0.0), cg)?.report;
    let mut solenoidal_smoothing = run_filter(setup, Method::Solenoidal, baseline, cg)?.report;
    solenoidal_smoothing.method = "solenoidal_smoothing".into();
    let fdc = run_filter(setup, Method::Fdc, model, cg)?.report;
    Ok(vec![smoothing, solenoidal, solenoidal_smoothing, fdc])
}

/// One `(alpha, delta)` cell of a sweep; `NaN` marks a failed solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub delta: f64,
    pub residual: f64,
    pub err_total: f64,
    pub iterations: Option<usize>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.residual.is_nan()
    }
}

/// Settings shared by every cell of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepConfig {
    pub case: PoiseuilleCase,
    pub seed: u64,
    pub epsilon: f64,
    pub fstar_offset: f64,
    pub cg: CgOptions,
}

/// `fdc` over the full `(alpha, delta)` grid. Noise levels run in parallel;
/// along `alpha` each solve is warm-started from the previous one (from the
/// last iterate after a failure). All levels reuse the same noise seed.
pub fn sweep(config: &SweepConfig, mesh: &Mesh, grid: AlphaGrid, deltas: &[f64]) -> Result<Vec<SweepRow>> {
    let alphas = grid.alphas();
    let per_delta: Vec<Vec<SweepRow>> = deltas
        .par_iter()
        .map(|&delta| {
            let setup = Setup::synthetic(
                config.case,
                mesh.clone(),
                NoiseSpec { delta, seed: config.seed },
                config.epsilon,
                config.fstar_offset,
            )?;
            let problem = setup.fdc()?;
            let mut start: Option<ModelData> = None;
            let mut rows = Vec::with_capacity(alphas.len());
            for &alpha in &alphas {
                let failed = SweepRow {
                    alpha,
                    delta,
                    residual: f64::NAN,
                    err_total: f64::NAN,
                    iterations: None,
                };
                match problem.solve(alpha, start.as_ref(), config.cg) {
                    Ok(s) => {
                        let norms = setup.eval.error_norms(&setup.case, &s.u, Some(&s.p))?;
                        rows.push(SweepRow {
                            residual: setup.eval.distance_l2(&s.u, &setup.u_delta)?,
                            err_total: norms.total(),
                            iterations: Some(s.iterations),
                            ..failed
                        });
                        start = Some(s.controls);
                    }
                    Err(Error::IterationLimit { last_iterate, .. }) => {
                        rows.push(failed);
                        start = ModelData::from_vector(setup.matrices(), &last_iterate).ok();
                    }
                    Err(_) => rows.push(failed),
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_delta.into_iter().flatten().collect())
}

pub const SWEEP_HEADER: [&str; 4] = ["alpha", "delta", "residual", "err_total"];

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    crate::io::write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(SWEEP_HEADER)?;
        for r in rows {
            csv.write_record([
                format!("{:?}", r.alpha),
                format!("{:?}", r.delta),
                format!("{:?}", r.residual),
                format!("{:?}", r.err_total),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })
}

/// Index of the smallest finite value, if it is neither the first nor the
/// last entry.
pub fn interior_minimum(values: &[f64]) -> Option<usize> {
    let (best, _) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    (best > 0 && best + 1 < values.len()).then_some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_grid_parses() {
        let g: AlphaGrid = "1*2^-0..3".parse().unwrap();
        assert_eq!(g.alphas(), vec![1.0, 0.5, 0.25, 0.125]);
        let g: AlphaGrid = "0.5*2^-2..2".parse().unwrap();
        assert_eq!(g.alphas(), vec![0.125]);
        for bad in ["1*2^-3..1", "x*2^-0..2", "1..2", "-1*2^-0..2", "1*2^-0.5..2"] {
            assert!(bad.parse::<AlphaGrid>().is_err(), "{bad}");
        }
    }

    #[test]
    fn method_names() {
        for m in [Method::Smoothing, Method::Solenoidal, Method::Fdc] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("smooth".parse::<Method>().unwrap(), Method::Smoothing);
        assert!("kalman".parse::<Method>().is_err());
    }

    #[test]
    fn interior_minimum_cases() {
        assert_eq!(interior_minimum(&[3.0, 1.0, 2.0]), Some(1));
        assert_eq!(interior_minimum(&[1.0, 2.0, 3.0]), None);
        assert_eq!(interior_minimum(&[3.0, 2.0, 1.0]), None);
        assert_eq!(interior_minimum(&[3.0, f64::NAN, 1.0, 2.0]), Some(2));
        assert_eq!(interior_minimum(&[]), None);
    }

    #[test]
    fn force_offset_is_pressure_free() {
        // Hitting the offset with B gives ~0 (divergence free) and its
        // M-norm equals the requested magnitude.
        let case = PoiseuilleCase::default();
        let mesh = case.mesh(40, 8).unwrap();
        let eval = Evaluator::new(&mesh).unwrap();
        let f = force_offset(&case, &mesh, &eval, 5.0).unwrap();
        let norm = eval.distance_l2(&f, &VelocityField::zeros(&mesh)).unwrap();
        assert!((norm - 5.0).abs() < 1e-12);
        assert!(eval.div_h(&f).unwrap() < 0.05 * norm, "{}", eval.div_h(&f).unwrap());
    }

    #[test]
    fn fixed_rule_matches_direct_calls() {
        let case = PoiseuilleCase::default();
        let mesh = case.mesh(10, 4).unwrap();
        let setup = Setup::synthetic(case, mesh, NoiseSpec { delta: 0.1, seed: 3 }, 1e-8, 0.0).unwrap();
        let out = run_filter(&setup, Method::Smoothing, AlphaRule::Fixed(0.0), CgOptions::default()).unwrap();
        assert_eq!(out.u, setup.u_delta);
        assert_eq!(out.report.residual_l2, 0.0);
        assert!(out.report.err_p_l2.is_none());

        let out = run_filter(&setup, Method::Fdc, AlphaRule::Fixed(0.25), CgOptions::default()).unwrap();
        let direct = setup.fdc().unwrap().solve(0.25, None, CgOptions::default()).unwrap();
        assert_eq!(out.u, direct.u);
        assert!(out.report.div_h < 1e-10);
    }

    #[test]
    fn discrepancy_walk_stops_at_first_admissible() {
        let case = PoiseuilleCase::default();
        let mesh = case.mesh(10, 4).unwrap();
        let setup = Setup::synthetic(case, mesh, NoiseSpec { delta: 0.1, seed: 3 }, 1e-8, 0.0).unwrap();
        let rule = AlphaRule::Discrepancy { delta: 0.1, tau: 2.0, alpha0: 1.0 };
        let out = run_filter(&setup, Method::Smoothing, rule, CgOptions::default()).unwrap();
        let (last, before) = out.trace.split_last().unwrap();
        assert!(last.1 <= 0.2);
        assert!(before.iter().all(|&(_, r)| r > 0.2));
        assert_eq!(out.report.alpha, last.0);
    }

    #[test]
    fn fdc_rejects_zero_alpha() {
        let case = PoiseuilleCase::default();
        let mesh = case.mesh(10, 4).unwrap();
        let setup = Setup::synthetic(case, mesh, NoiseSpec { delta: 0.1, seed: 3 }, 1e-8, 0.0).unwrap();
        let err = run_filter(&setup, Method::Fdc, AlphaRule::Fixed(0.0), CgOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn single_cell_sweep_matches_filter() {
        let case = PoiseuilleCase::default();
        let mesh = case.mesh(10, 4).unwrap();
        let config = SweepConfig {
            case,
            seed: 5,
            epsilon: 1e-8,
            fstar_offset: 5.0,
            cg: CgOptions::default(),
        };
        let grid = AlphaGrid { alpha0: 1.0, first: 3, last: 3 };
        let rows = sweep(&config, &mesh, grid, &[0.2]).unwrap();
        let setup = Setup::synthetic(case, mesh, NoiseSpec { delta: 0.2, seed: 5 }, 1e-8, 5.0).unwrap();
        let out = run_filter(&setup, Method::Fdc, AlphaRule::Fixed(0.125), CgOptions::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].residual, out.report.residual_l2);
        assert_eq!(Some(rows[0].err_total), out.report.total_error());
    }

    #[test]
    fn sweep_marks_failed_cells_and_continues() {
        let case = PoiseuilleCase::default();
        let mesh = case.mesh(10, 4).unwrap();
        let config = SweepConfig {
            case,
            seed: 5,
            epsilon: 1e-8,
            fstar_offset: 0.0,
            cg: CgOptions {
                tolerance: 1e-10,
                max_iterations: 2,
            },
        };
        let grid = AlphaGrid { alpha0: 1.0, first: 0, last: 3 };
        let rows = sweep(&config, &mesh, grid, &[0.1, 0.4]).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().any(|r| r.failed()));
        assert_eq!(rows[4].delta, 0.4);
    }
}
