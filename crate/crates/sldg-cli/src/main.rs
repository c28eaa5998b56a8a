//! Benchmark CLI: run single cases, mesh/CFL convergence sequences, snapshot
//! comparison, and CSV exporters. Exit codes: 0 success, 2 configuration
//! error, 3 numerical abort (failing step index on stderr).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sldg_cli::config::{parse_overrides, CaseConfig};
use sldg_cli::io::{read_snapshot, write_cut, write_invariants, write_snapshot, write_surface};
use sldg_cli::runner::{run_case, RunError};
use sldg_cli::table::{compare_solutions, convergence_table, errors_against, SweepKind};
use sldg_cli::{cases, table};

#[derive(Parser)]
#[command(name = "sldg", about = "Semi-Lagrangian DG transport benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Case configuration file (key=value lines)
    #[arg(long)]
    config: PathBuf,
    /// Overrides applied on top of the file, e.g. --set mesh=80 --set cfl=10
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Force serial execution (execution is serial either way; accepted for
    /// timing-run compatibility)
    #[arg(long)]
    single_thread: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<CaseConfig> {
        let mut cfg = CaseConfig::from_file(&self.config)?;
        cfg.apply_entries(parse_overrides(&self.set)?)?;
        if self.single_thread {
            cfg.single_thread = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured case; write the snapshot and invariant series
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run a mesh- or CFL-sequence and emit an error/order table
    Convergence {
        #[command(flatten)]
        config: ConfigArgs,
        /// Mesh resolutions, e.g. 20,40,80,160
        #[arg(long, value_delimiter = ',')]
        meshes: Vec<usize>,
        /// CFL numbers at fixed mesh, e.g. 5,10,15,20,25
        #[arg(long, value_delimiter = ',')]
        cfls: Vec<f64>,
        /// Reference snapshot for cases without an exact solution
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Output CSV path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two snapshots (errors measured on the first one's mesh)
    Compare {
        a: PathBuf,
        b: PathBuf,
    },
    /// Export artifacts from a snapshot file
    Export {
        /// Input snapshot
        #[arg(long)]
        snapshot: PathBuf,
        /// Write the cell-center surface grid to this path
        #[arg(long)]
        surface: Option<PathBuf>,
        /// Cut along x = VALUE (sampled in y)
        #[arg(long)]
        cut_x: Option<f64>,
        /// Cut along y = VALUE (sampled in x)
        #[arg(long)]
        cut_y: Option<f64>,
        /// Output path for the cut
        #[arg(long)]
        cut_out: Option<PathBuf>,
    },
}

fn cmd_run(config: &ConfigArgs) -> Result<(), RunError> {
    let cfg = config.load().map_err(RunError::Config)?;
    let out = run_case(&cfg)?;
    println!(
        "case={} scheme={} k={} mesh={}x{} cfl={} T={}",
        cfg.case,
        cfg.scheme.name(),
        cfg.k,
        cfg.nx,
        cfg.ny,
        cfg.cfl,
        cfg.t_final
    );
    println!(
        "steps={} cpu={:.3}s mass_dev={:.3e}",
        out.steps,
        out.cpu_seconds,
        out.mass_deviation()
    );
    let setup = cases::setup(&cfg);
    if let Some(exact) = &setup.exact {
        let e = exact(0.1, 0.2, cfg.t_final);
        if e.is_finite() {
            let (l2, linf) =
                errors_against(&out.snapshot, |x, y| exact(x, y, cfg.t_final));
            println!("L2_error={l2:.6e} Linf_error={linf:.6e}");
        }
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Config(e.into()))?;
        write_snapshot(&dir.join("snapshot.csv"), &out.snapshot).map_err(RunError::Config)?;
        write_invariants(&dir.join("invariants.csv"), &out.samples)
            .map_err(RunError::Config)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn cmd_convergence(
    config: &ConfigArgs,
    meshes: &[usize],
    cfls: &[f64],
    reference: Option<&PathBuf>,
    out_path: Option<&PathBuf>,
) -> Result<(), RunError> {
    let base = config.load().map_err(RunError::Config)?;
    if meshes.is_empty() == cfls.is_empty() {
        return Err(RunError::Config(anyhow!(
            "provide exactly one of --meshes or --cfls"
        )));
    }
    let reference = reference
        .map(|p| read_snapshot(p))
        .transpose()
        .map_err(RunError::Config)?;
    let setup = cases::setup(&base);
    let exact_ok = setup
        .exact
        .as_ref()
        .map(|e| e(0.1, 0.2, base.t_final).is_finite())
        .unwrap_or(false);
    if !exact_ok && reference.is_none() {
        return Err(RunError::Config(anyhow!(
            "case {} has no exact solution at T={}; pass --reference",
            base.case,
            base.t_final
        )));
    }
    let mut entries = Vec::new();
    let kind = if meshes.is_empty() {
        SweepKind::Cfl
    } else {
        SweepKind::Mesh
    };
    let labels: Vec<f64> = if meshes.is_empty() {
        cfls.to_vec()
    } else {
        meshes.iter().map(|&n| n as f64).collect()
    };
    for &label in &labels {
        let mut cfg = base.clone();
        match kind {
            SweepKind::Mesh => {
                cfg.nx = label as usize;
                cfg.ny = label as usize;
            }
            SweepKind::Cfl => cfg.cfl = label,
        }
        let run = run_case(&cfg)?;
        let (l2, linf) = if let Some(reference) = &reference {
            compare_solutions(&run.snapshot, reference).map_err(RunError::Config)?
        } else {
            let exact = setup.exact.as_ref().unwrap();
            errors_against(&run.snapshot, |x, y| exact(x, y, cfg.t_final))
        };
        entries.push((label, l2, linf, run.cpu_seconds));
        eprintln!("{label}: L2 {l2:.4e}  Linf {linf:.4e}  cpu {:.2}s", run.cpu_seconds);
    }
    let table = convergence_table(kind, &entries);
    print!("{}", table.render());
    if let Some(path) = out_path {
        table.write_csv(path).map_err(RunError::Config)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_compare(a: &PathBuf, b: &PathBuf) -> Result<()> {
    let sa = read_snapshot(a)?;
    let sb = read_snapshot(b)?;
    let (l2, linf) = table::compare_solutions(&sa, &sb)?;
    println!("L2_diff={l2:.6e} Linf_diff={linf:.6e}");
    Ok(())
}

fn cmd_export(
    snapshot: &PathBuf,
    surface: Option<&PathBuf>,
    cut_x: Option<f64>,
    cut_y: Option<f64>,
    cut_out: Option<&PathBuf>,
) -> Result<()> {
    let snap = read_snapshot(snapshot)?;
    let mut wrote = false;
    if let Some(path) = surface {
        write_surface(path, &snap)?;
        println!("wrote {}", path.display());
        wrote = true;
    }
    if cut_x.is_some() && cut_y.is_some() {
        bail!("pass only one of --cut-x / --cut-y");
    }
    if let Some(at) = cut_x {
        let path = cut_out.ok_or_else(|| anyhow!("--cut-out is required with --cut-x"))?;
        write_cut(path, &snap, 'x', at).context("writing cut")?;
        println!("wrote {}", path.display());
        wrote = true;
    }
    if let Some(at) = cut_y {
        let path = cut_out.ok_or_else(|| anyhow!("--cut-out is required with --cut-y"))?;
        write_cut(path, &snap, 'y', at).context("writing cut")?;
        println!("wrote {}", path.display());
        wrote = true;
    }
    if !wrote {
        bail!("nothing to export; pass --surface or --cut-x/--cut-y");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<(), RunError> = match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Convergence {
            config,
            meshes,
            cfls,
            reference,
            out,
        } => cmd_convergence(config, meshes, cfls, reference.as_ref(), out.as_ref()),
        Command::Compare { a, b } => cmd_compare(a, b).map_err(RunError::Config),
        Command::Export {
            snapshot,
            surface,
            cut_x,
            cut_y,
            cut_out,
        } => cmd_export(snapshot, surface.as_ref(), *cut_x, *cut_y, cut_out.as_ref())
            .map_err(RunError::Config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e @ RunError::Numerical { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
