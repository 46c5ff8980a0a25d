use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use twogrid::harness::report::fmt12;
use twogrid::harness::{
    couple_h, emit_report, run_cell, run_convergence_study, to_csv, CellSpec, Coupling, ReportFormat,
    StudyOptions, StudyPlan, CSV_HEADER,
};
use twogrid::mms::case_by_name;
use twogrid::saddle::infsup_estimate;
use twogrid::stepper::{Algorithm, FineConvection, TimeScheme};
use twogrid::{par, ElementFamily, Error, Mesh, MixedSpace, Result};

/// Environment variable holding the worker thread count (default 1).
const THREADS_VAR: &str = "TWOGRID_THREADS";

#[derive(Debug, Parser)]
#[command(name = "twogrid", version, about = "Two-grid mixed finite element Navier-Stokes solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a convergence study described by a TOML plan.
    Study {
        #[arg(long)]
        plan: PathBuf,
        /// Run cells sequentially and write zero wall times.
        #[arg(long)]
        serial: bool,
        /// Skew-symmetric convection in the fine Oseen step.
        #[arg(long)]
        skew: bool,
    },
    /// Run one simulation and print the final errors as CSV.
    Run {
        #[arg(long)]
        algorithm: String,
        #[arg(long)]
        family: String,
        #[arg(long)]
        case: String,
        /// Fine subdivisions per side.
        #[arg(long)]
        n: usize,
        /// Number of time steps.
        #[arg(long = "N")]
        steps: usize,
        /// Final time.
        #[arg(long = "T")]
        final_time: f64,
        #[arg(long, default_value = "bdf2")]
        scheme: String,
        #[arg(long, default_value = "h_half")]
        coupling: String,
        #[arg(long)]
        skew: bool,
    },
    /// Print mesh statistics.
    MeshInfo {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        refine: usize,
        /// Also write the mesh as text.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Print the discrete inf-sup constant.
    Infsup {
        #[arg(long)]
        family: String,
        #[arg(long)]
        n: usize,
    },
}

fn threads() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(1),
    }
}

fn convection(skew: bool) -> FineConvection {
    if skew {
        FineConvection::Skew
    } else {
        FineConvection::Plain
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Study { plan, serial, skew } => {
            let plan = StudyPlan::from_file(&plan)?;
            let opts = StudyOptions {
                serial,
                fine_convection: convection(skew),
            };
            let report = run_convergence_study(&plan, opts)?;
            if let Some(p) = &plan.out_csv {
                emit_report(&report, ReportFormat::Csv, p)?;
            }
            if let Some(p) = &plan.out_svg {
                emit_report(&report, ReportFormat::Svg, p)?;
            }
            print!("{}", to_csv(&report));
            Ok(())
        }
        Command::Run {
            algorithm,
            family,
            case,
            n,
            steps,
            final_time,
            scheme,
            coupling,
            skew,
        } => {
            let algorithm: Algorithm = algorithm.parse()?;
            let family: ElementFamily = family.parse()?;
            let scheme: TimeScheme = scheme.parse()?;
            let coupling: Coupling = coupling.parse()?;
            if family == ElementFamily::EqualOrderP1 {
                return Err(Error::Config("p1p1 can only be used with `infsup`".into()));
            }
            if n == 0 {
                return Err(Error::Config("n must be positive".into()));
            }
            let case = case_by_name(&case).map_err(|e| Error::Config(e.to_string()))?;
            let coarse_n = match algorithm {
                Algorithm::GalerkinOnly => n,
                _ => couple_h(n, coupling)?,
            };
            let spec = CellSpec {
                algorithm,
                family,
                case,
                n,
                coarse_n,
                scheme,
                steps,
                final_time,
                fine_convection: convection(skew),
            };
            let row = run_cell(&spec)?;
            println!("{CSV_HEADER}");
            let cols = [row.h, row.coarse_h, row.dt, row.vel_l2, row.vel_h1, row.p_l2, row.wall_s];
            println!("{}", cols.map(fmt12).join(","));
            Ok(())
        }
        Command::MeshInfo { n, refine, dump } => {
            let chain = Mesh::refined_chain(n, refine)?;
            let mesh = chain.last().expect("chain has the base mesh");
            let s = mesh.stats();
            println!("n,level,vertices,edges,triangles,h_max,min_angle,regularity_ratio");
            println!(
                "{},{},{},{},{},{},{},{}",
                mesh.divisions(),
                mesh.level(),
                mesh.num_vertices(),
                mesh.num_edges(),
                mesh.num_triangles(),
                fmt12(s.h_max),
                fmt12(s.min_angle),
                fmt12(s.regularity_ratio)
            );
            if let Some(path) = dump {
                std::fs::write(&path, mesh.to_text()).map_err(|source| Error::Io { path, source })?;
            }
            Ok(())
        }
        Command::Infsup { family, n } => {
            let family: ElementFamily = family.parse()?;
            let mesh = Mesh::unit_square(n)?;
            let beta = infsup_estimate(&MixedSpace::new(Arc::clone(&mesh), family))?;
            println!("family,n,beta");
            println!("{family},{n},{}", fmt12(beta));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = threads().and_then(|t| par::with_threads(t, || execute(cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
