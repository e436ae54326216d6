//! `flowfilter`: mesh generation, synthetic data, filtering, parameter sweeps
//! and filter comparisons for the Poiseuille channel testbed.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowfilter::experiments::{
    compare, report_for_controls, run_filter, sweep, write_sweep_csv, AlphaGrid, AlphaRule, Method, Setup,
    SweepConfig,
};
use flowfilter::filters::{write_reports, CgOptions, FilterReport, REPORT_HEADER};
use flowfilter::io::{read_velocity, write_pressure, write_velocity};
use flowfilter::testbed::{add_noise, NoiseSpec, PoiseuilleCase};
use flowfilter::{Error, Mesh};

#[derive(Parser)]
#[command(name = "flowfilter", version, about = "Flow-model based filtering of noisy channel-flow velocity data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a structured channel mesh.
    Mesh(MeshArgs),
    /// Write the exact Poiseuille field or a noisy copy of a field.
    #[command(subcommand)]
    Data(DataCommand),
    /// Filter a velocity field.
    Filter(FilterArgs),
    /// Run the model-based filter over an (alpha, delta) grid.
    Sweep(SweepArgs),
    /// Compare the four filters on synthetic data.
    Compare(CompareArgs),
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long, default_value_t = 5.0)]
    length: f64,
    #[arg(long, default_value_t = 1.0)]
    height: f64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    nx: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    ny: u32,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DataCommand {
    /// Interpolated exact velocity (and optionally pressure).
    Poiseuille {
        #[arg(long)]
        mesh: PathBuf,
        #[command(flatten)]
        physics: Physics,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        pressure_out: Option<PathBuf>,
    },
    /// Adds Gaussian nodal noise scaled to L^3 norm `delta`.
    Noise {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

/// Flow parameters of the reference channel; pressures are fixed at 1 and 0.
#[derive(Args, Clone, Copy)]
struct Physics {
    #[arg(long, default_value_t = 0.01)]
    nu: f64,
}

impl Physics {
    fn case(self, mesh: &Mesh) -> PoiseuilleCase {
        PoiseuilleCase {
            length: mesh.length(),
            height: mesh.height(),
            nu: self.nu,
            ..PoiseuilleCase::default()
        }
    }
}

#[derive(Args, Clone, Copy)]
struct Model {
    #[command(flatten)]
    physics: Physics,
    /// Dirichlet penalty parameter.
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    /// L^2 norm of the force prior misspecification.
    #[arg(long, default_value_t = 0.0)]
    fstar_offset: f64,
    /// Relative preconditioned-gradient tolerance of the CG solver.
    #[arg(long, default_value_t = 1e-10)]
    cg_tolerance: f64,
    #[arg(long, default_value_t = 500)]
    cg_max_iterations: usize,
}

impl Model {
    fn cg(self) -> CgOptions {
        CgOptions {
            tolerance: self.cg_tolerance,
            max_iterations: self.cg_max_iterations,
        }
    }
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("choice").required(true).args(["alpha", "discrepancy"])))]
struct FilterArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Measured (noisy) velocity field.
    #[arg(long)]
    field: PathBuf,
    /// smooth, solenoidal or fdc.
    #[arg(long)]
    method: String,
    #[arg(long)]
    alpha: Option<f64>,
    /// Choose alpha by the discrepancy principle.
    #[arg(long, requires_all = ["tau", "delta"])]
    discrepancy: bool,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    #[command(flatten)]
    model: Model,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    pressure_out: Option<PathBuf>,
    /// Also write the report row to this CSV file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Dyadic grid `a0*2^-k..K`.
    #[arg(long)]
    alphas: String,
    #[arg(long, value_delimiter = ',', required = true)]
    deltas: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    model: Model,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    tau: f64,
    #[command(flatten)]
    model: Model,
    #[arg(short, long)]
    out: PathBuf,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Singular(_) | Error::IterationLimit { .. } | Error::NoAdmissibleAlpha { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn finite(name: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be finite, got {v}")))
    }
}

fn print_report(report: &FilterReport) {
    println!("{REPORT_HEADER}");
    println!("{}", report.csv_row());
}

fn cmd_mesh(a: MeshArgs) -> Result<(), Failure> {
    finite("length", a.length)?;
    finite("height", a.height)?;
    let mesh = Mesh::channel(a.length, a.height, a.nx as usize, a.ny as usize)?;
    mesh.write(&a.out)?;
    println!("nodes {} triangles {}", mesh.num_nodes(), mesh.num_triangles());
    Ok(())
}

fn cmd_data(d: DataCommand) -> Result<(), Failure> {
    match d {
        DataCommand::Poiseuille {
            mesh,
            physics,
            out,
            pressure_out,
        } => {
            let mesh = Mesh::read(&mesh)?;
            let case = physics.case(&mesh);
            case.validate()?;
            write_velocity(&out, &case.interpolate_velocity(&mesh))?;
            if let Some(path) = pressure_out {
                write_pressure(&path, &case.interpolate_pressure(&mesh))?;
            }
        }
        DataCommand::Noise {
            mesh,
            field,
            delta,
            seed,
            out,
        } => {
            let mesh = Mesh::read(&mesh)?;
            let clean = read_velocity(&field, &mesh)?;
            let noisy = add_noise(&mesh, &clean, NoiseSpec { delta, seed })?;
            write_velocity(&out, &noisy)?;
        }
    }
    Ok(())
}

fn load_setup(mesh: &Path, field: &Path, model: Model) -> Result<Setup, Failure> {
    let mesh = Mesh::read(mesh)?;
    let u_delta = read_velocity(field, &mesh)?;
    let case = model.physics.case(&mesh);
    Ok(Setup::new(case, mesh, u_delta, model.epsilon, model.fstar_offset)?)
}

fn cmd_filter(a: FilterArgs) -> Result<(), Failure> {
    let method: Method = a.method.parse()?;
    let rule = match a.alpha {
        Some(alpha) => AlphaRule::Fixed(finite("alpha", alpha)?),
        None => AlphaRule::Discrepancy {
            delta: finite("delta", a.delta.unwrap_or(f64::NAN))?,
            tau: finite("tau", a.tau.unwrap_or(f64::NAN))?,
            alpha0: finite("alpha0", a.alpha0)?,
        },
    };
    let setup = load_setup(&a.mesh, &a.field, a.model)?;
    match run_filter(&setup, method, rule, a.model.cg()) {
        Ok(out) => {
            write_velocity(&a.out, &out.u)?;
            if let (Some(path), Some(p)) = (&a.pressure_out, &out.p) {
                write_pressure(path, p)?;
            }
            if let Some(path) = &a.report {
                write_reports(path, std::slice::from_ref(&out.report))?;
            }
            print_report(&out.report);
            Ok(())
        }
        Err(Error::IterationLimit {
            iterations,
            relative_gradient,
            last_iterate,
        }) => {
            // Report what the last iterate achieves before failing.
            let alpha = match rule {
                AlphaRule::Fixed(alpha) => alpha,
                AlphaRule::Discrepancy { .. } => f64::NAN,
            };
            let partial = report_for_controls(&setup, alpha, &last_iterate, Some(iterations))?;
            if let Some(path) = &a.report {
                write_reports(path, std::slice::from_ref(&partial))?;
            }
            print_report(&partial);
            Err(Error::IterationLimit {
                iterations,
                relative_gradient,
                last_iterate: Vec::new(),
            }
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let grid: AlphaGrid = a.alphas.parse()?;
    for &d in &a.deltas {
        finite("deltas", d)?;
    }
    let mesh = Mesh::read(&a.mesh)?;
    let config = SweepConfig {
        case: a.model.physics.case(&mesh),
        seed: a.seed,
        epsilon: a.model.epsilon,
        fstar_offset: a.model.fstar_offset,
        cg: a.model.cg(),
    };
    let rows = sweep(&config, &mesh, grid, &a.deltas)?;
    write_sweep_csv(&a.out, &rows)?;
    let failed = rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        return Err(Failure {
            code: 3,
            message: format!("{failed} of {} cells failed (written as nan)", rows.len()),
        });
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failure> {
    let mesh = Mesh::read(&a.mesh)?;
    let case = a.model.physics.case(&mesh);
    let setup = Setup::synthetic(
        case,
        mesh,
        NoiseSpec {
            delta: finite("delta", a.delta)?,
            seed: a.seed,
        },
        a.model.epsilon,
        a.model.fstar_offset,
    )?;
    let rows = compare(&setup, a.delta, finite("tau", a.tau)?, a.model.cg())?;
    write_reports(&a.out, &rows)?;
    println!("{REPORT_HEADER}");
    for r in &rows {
        println!("{}", r.csv_row());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mesh(a) => cmd_mesh(a),
        Command::Data(d) => cmd_data(d),
        Command::Filter(a) => cmd_filter(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
