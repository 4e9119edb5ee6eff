//! Command-line front end. Every command prints JSON; the process exits
//! with status 1 when the run recorded an error and 2 on bad usage.

use std::path::PathBuf;
use std::process::ExitCode;

use aklt_gap::criterion::verify_cover_counts;
use aklt_gap::lattice::build_torus;
use aklt_gap::report::{
    cmd_certify, cmd_gap, cmd_report, cmd_tables, cmd_vbs, GammaSource, PatchChoice, Report, ResolutionChoice,
    RunConfig, SectorSelection,
};
use clap::{Args, Parser, Subcommand};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "AKLT_GAP_THREADS";

#[derive(Parser)]
#[command(
    name = "aklt-gap",
    version,
    about = "Spectral gap tools for the hexagonal spin-3/2 valence-bond model"
)]
struct Cli {
    /// TOML configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Periodic honeycomb lattice summary.
    Lattice {
        #[arg(long)]
        m1: Option<usize>,
        #[arg(long)]
        m2: Option<usize>,
    },
    /// Vertices and weighted edges of a patch.
    Patch(PatchArgs),
    /// Check the cover multiplicities on a torus.
    CoverCheck {
        #[arg(long)]
        m1: Option<usize>,
        #[arg(long)]
        m2: Option<usize>,
        #[arg(long)]
        a: Option<f64>,
    },
    /// Ground-state multiplicities and sector dimensions.
    Degeneracy {
        /// Number of dangling spin-1s.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        patch: PatchArgs,
    },
    /// Build the valence-bond ground states of one sector.
    Vbs {
        #[command(flatten)]
        patch: PatchArgs,
        #[arg(long, allow_hyphen_values = true)]
        two_m: i32,
    },
    /// Lowest excitations in each magnetization sector.
    Gap {
        #[command(flatten)]
        patch: PatchArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Evaluate the finite-size criterion.
    Criterion {
        /// Weight in the criterion.
        #[arg(long = "a")]
        a: Option<f64>,
        #[command(flatten)]
        criterion: CriterionArgs,
    },
    /// Tables, cover counts and the criterion, optionally with a gap scan.
    Report {
        /// Also run the gap scan.
        #[arg(long)]
        gap: bool,
        #[command(flatten)]
        patch: PatchArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Weight in the criterion.
        #[arg(long)]
        criterion_a: Option<f64>,
        #[command(flatten)]
        criterion: CriterionArgs,
    },
}

#[derive(Args)]
struct PatchArgs {
    /// F, F12 or ring.
    #[arg(long)]
    kind: Option<PatchChoice>,
    /// Adjustable edge weight.
    #[arg(long = "a")]
    a: Option<f64>,
}

#[derive(Args)]
struct SolverArgs {
    /// `all` or a comma separated list of 2m values.
    #[arg(long, allow_hyphen_values = true)]
    sectors: Option<SectorSelection>,
    #[arg(long)]
    eigenpairs: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    residual_tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Resolve spins by sector lowest states only.
    #[arg(long)]
    lowest: bool,
    /// Energy added to the J = |m| + 1 multiplets in highest-weight mode.
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CriterionArgs {
    #[arg(long)]
    gamma_f: Option<f64>,
    /// Take the patch gap from a scan of the configured patch.
    #[arg(long)]
    computed: bool,
    #[arg(long)]
    m1: Option<usize>,
    #[arg(long)]
    m2: Option<usize>,
}

impl PatchArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(k) = self.kind {
            c.patch.kind = k;
        }
        if let Some(a) = self.a {
            c.patch.a = a;
        }
    }
}

impl SolverArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(s) = &self.sectors {
            c.sectors.select = s.clone();
        }
        let s = &mut c.solver;
        if let Some(v) = self.eigenpairs {
            s.eigenpairs = v;
        }
        if let Some(v) = self.tolerance {
            s.tolerance = v;
        }
        if let Some(v) = self.residual_tolerance {
            s.residual_tolerance = v;
        }
        if let Some(v) = self.max_iterations {
            s.max_iterations = v;
        }
        if self.lowest {
            s.resolution = ResolutionChoice::Lowest;
        }
        if let Some(v) = self.penalty {
            s.penalty = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
    }
}

impl CriterionArgs {
    fn apply(&self, weight: Option<f64>, c: &mut RunConfig) {
        let k = &mut c.criterion;
        if let Some(v) = weight {
            k.a = v;
        }
        if let Some(v) = self.gamma_f {
            k.gamma_f = v;
            k.gamma_f_source = GammaSource::Constant;
        }
        if self.computed {
            k.gamma_f_source = GammaSource::Computed;
        }
        if let Some(v) = self.m1 {
            k.m1 = v;
        }
        if let Some(v) = self.m2 {
            k.m2 = v;
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    if n == 0 {
        return Err(format!("{THREADS_ENV} must be positive"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn finish(report: Report, out: Option<&PathBuf>) -> Result<u8, String> {
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    report.write_outputs().map_err(|e| e.to_string())?;
    emit(&report.to_json().map_err(|e| e.to_string())?, out)?;
    Ok(report.exit_code() as u8)
}

fn run(cli: Cli) -> Result<u8, String> {
    configure_threads()?;
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => RunConfig::default(),
    };
    let out = cli.out.as_ref();
    match cli.command {
        Command::Lattice { m1, m2 } => {
            let lattice = build_torus(m1.unwrap_or(config.criterion.m1), m2.unwrap_or(config.criterion.m2))
                .map_err(|e| e.to_string())?;
            let doc = serde_json::to_string_pretty(&lattice.to_document()).map_err(|e| e.to_string())?;
            emit(&doc, out)?;
            Ok(0)
        }
        Command::Patch(p) => {
            p.apply(&mut config);
            let patch = config.patch.build().map_err(|e| e.to_string())?;
            let doc = serde_json::to_string_pretty(&patch.to_document()).map_err(|e| e.to_string())?;
            emit(&doc, out)?;
            Ok(0)
        }
        Command::CoverCheck { m1, m2, a } => {
            let m1 = m1.unwrap_or(config.criterion.m1);
            let m2 = m2.unwrap_or(config.criterion.m2);
            let a = a.unwrap_or(config.criterion.a);
            match build_torus(m1, m2).and_then(|t| verify_cover_counts(&t, a)) {
                Ok(counts) => {
                    emit(&serde_json::to_string_pretty(&counts).map_err(|e| e.to_string())?, out)?;
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(1)
                }
            }
        }
        Command::Degeneracy { n, patch } => {
            patch.apply(&mut config);
            if let Some(n) = n {
                config.tables.n = n;
            }
            finish(cmd_tables(&config), out)
        }
        Command::Vbs { patch, two_m } => {
            patch.apply(&mut config);
            finish(cmd_vbs(&config, two_m), out)
        }
        Command::Gap { patch, solver } => {
            patch.apply(&mut config);
            solver.apply(&mut config);
            finish(cmd_gap(&config), out)
        }
        Command::Criterion { a, criterion } => {
            criterion.apply(a, &mut config);
            finish(cmd_certify(&config), out)
        }
        Command::Report {
            gap,
            patch,
            solver,
            criterion_a,
            criterion,
        } => {
            patch.apply(&mut config);
            solver.apply(&mut config);
            criterion.apply(criterion_a, &mut config);
            config.report_gap |= gap;
            finish(cmd_report(&config), out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
