use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use agfem::experiments::demo::{run_demo, write_vtk, DemoOptions};
use agfem::experiments::{
    convergence_csv, loglog_slope, moving_csv, run_convergence, run_moving_domain, write_text,
    Problem, RunConfig,
};
use agfem::{Error, Result};

#[derive(Parser)]
#[command(
    name = "agfem",
    about = "Aggregated unfitted finite elements for Stokes flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Errors and condition numbers under uniform refinement.
    Convergence(Common),
    /// Condition numbers while an obstacle moves along the diagonal.
    Moving {
        #[command(flatten)]
        common: Common,
        /// Number of obstacle positions.
        #[arg(long)]
        samples: Option<usize>,
        /// Refinement level of the sweep.
        #[arg(long)]
        moving_level: Option<u32>,
    },
    /// Channel (`--geometry halfspace`) or lid-driven cavity with VTK output.
    Demo {
        #[command(flatten)]
        common: Common,
        /// Inlet peak velocity or lid speed.
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
    },
    /// Quick end-to-end check on a field reproduced exactly by the spaces.
    Selftest(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// `key=value` file read before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Inclusive range `a..b` or a single level.
    #[arg(long)]
    levels: Option<String>,
    /// standard | aggregated
    #[arg(long)]
    space: Option<String>,
    /// standard | serendipity
    #[arg(long)]
    extension: Option<String>,
    /// none | alg2 | alg3
    #[arg(long)]
    stabilization: Option<String>,
    #[arg(long)]
    tau_nitsche: Option<f64>,
    #[arg(long)]
    tau_j1: Option<f64>,
    #[arg(long)]
    tau_j2: Option<f64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Quadrature degree.
    #[arg(long)]
    degree: Option<usize>,
    /// swirl | patch
    #[arg(long)]
    problem: Option<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        // dim first so that dimension-dependent defaults follow it
        if let Some(d) = self.dim {
            cfg.set("dim", &d.to_string())?;
        }
        let pairs: [(&str, Option<String>); 13] = [
            ("levels", self.levels.clone()),
            ("space", self.space.clone()),
            ("extension", self.extension.clone()),
            ("stabilization", self.stabilization.clone()),
            ("tau-nitsche", self.tau_nitsche.map(|v| v.to_string())),
            ("tau-j1", self.tau_j1.map(|v| v.to_string())),
            ("tau-j2", self.tau_j2.map(|v| v.to_string())),
            ("eta0", self.eta0.map(|v| v.to_string())),
            ("geometry", self.geometry.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("degree", self.degree.map(|v| v.to_string())),
            ("problem", self.problem.clone()),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn convergence(cfg: &RunConfig) -> Result<()> {
    let rows = run_convergence(cfg);
    emit(cfg, &convergence_csv(&rows))?;
    let ok: Vec<_> = rows.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    if ok.len() >= 2 {
        let h: Vec<f64> = ok.iter().map(|o| o.h).collect();
        let slope = |f: &dyn Fn(&agfem::experiments::LevelOutcome) -> f64| {
            loglog_slope(&h, &ok.iter().map(|o| f(o)).collect::<Vec<_>>())
        };
        eprintln!(
            "slopes: H1(u) {:.2}, L2(u) {:.2}, L2(p) {:.2}, kappa1 {:.2}",
            slope(&|o| o.errors.h1_u),
            slope(&|o| o.errors.l2_u),
            slope(&|o| o.errors.l2_p),
            slope(&|o| o.kappa1)
        );
    }
    Ok(())
}

fn selftest(mut cfg: RunConfig) -> Result<()> {
    cfg.problem = Problem::Patch;
    if cfg.dim == 3 {
        cfg.degree = cfg.degree.max(8);
    }
    let m = cfg.levels.0;
    let o = agfem::experiments::run_level(&cfg, m)?;
    let worst = o.errors.h1_u.max(o.errors.l2_u).max(o.errors.l2_p);
    println!(
        "selftest dim={} m={m}: n_dofs={} max error {worst:.3e} residual {:.3e} kappa1 {:.3e}",
        cfg.dim, o.n_dofs, o.residual, o.kappa1
    );
    if worst > 1e-8 {
        return Err(Error::Internal(format!(
            "patch field not reproduced: error {worst:e}"
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convergence(common) => convergence(&common.config()?),
        Command::Moving {
            common,
            samples,
            moving_level,
        } => {
            let mut cfg = common.config()?;
            if let Some(n) = samples {
                cfg.samples = n;
            }
            if let Some(m) = moving_level {
                cfg.moving_level = m;
            }
            let rows = run_moving_domain(&cfg)?;
            emit(&cfg, &moving_csv(&rows))
        }
        Command::Demo { common, amplitude } => {
            let cfg = common.config()?;
            let result = run_demo(&cfg, &DemoOptions { amplitude })?;
            eprintln!(
                "demo '{}': {} dofs, inflow {:.6e}, outflow {:.6e}",
                cfg.geometry,
                result.solution.len(),
                result.inflow,
                result.outflow
            );
            let path = cfg.out.clone().unwrap_or_else(|| PathBuf::from("demo.vtk"));
            write_vtk(&result.disc, &result.solution, &path)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::Selftest(common) => selftest(common.config()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
