use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coagflux::config::RunConfig;
use coagflux::pipeline::{self, Stage, StageError};

#[derive(Parser)]
#[command(name = "coagflux", version, about = "Oscillatory constant-flux solutions of the coagulation equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build W0, locate k* and pick the perturbation pair.
    Construct,
    /// Solve the fixed-point problem for H from w0_manifest.json.
    Solve,
    /// Check constant flux for solution.json.
    Verify,
    /// Emit the alignment plot data.
    Figdata,
    /// construct, solve, verify and figdata in sequence.
    All,
}

/// Each flag overrides the key of the same name in the config file.
#[derive(Args)]
struct Overrides {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    gamma: Option<String>,
    #[arg(long, global = true)]
    p: Option<String>,
    #[arg(long = "z_a", alias = "z-a", global = true)]
    z_a: Option<String>,
    #[arg(long = "z_b", alias = "z-b", global = true)]
    z_b: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    s: Option<String>,
    #[arg(long = "J0", global = true)]
    j0: Option<String>,
    #[arg(long = "N", global = true)]
    n: Option<String>,
    #[arg(long = "quad_abs_tol", alias = "quad-abs-tol", global = true)]
    quad_abs_tol: Option<String>,
    #[arg(long = "quad_rel_tol", alias = "quad-rel-tol", global = true)]
    quad_rel_tol: Option<String>,
    #[arg(long = "k_scan_lo", alias = "k-scan-lo", global = true)]
    k_scan_lo: Option<String>,
    #[arg(long = "k_scan_hi", alias = "k-scan-hi", global = true)]
    k_scan_hi: Option<String>,
    #[arg(long = "K_max", global = true)]
    k_max: Option<String>,
    #[arg(long = "M", global = true)]
    m: Option<String>,
    #[arg(long = "fp_tol", alias = "fp-tol", global = true)]
    fp_tol: Option<String>,
    #[arg(long = "max_iter", alias = "max-iter", global = true)]
    max_iter: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long = "out_dir", alias = "out-dir", global = true)]
    out_dir: Option<String>,
    #[arg(long = "z_search_lo", alias = "z-search-lo", global = true)]
    z_search_lo: Option<String>,
    #[arg(long = "z_search_hi", alias = "z-search-hi", global = true)]
    z_search_hi: Option<String>,
    #[arg(long = "verify_tol", alias = "verify-tol", global = true)]
    verify_tol: Option<String>,
    #[arg(long = "verify_points", alias = "verify-points", global = true)]
    verify_points: Option<String>,
    #[arg(long = "fig_k_lo", alias = "fig-k-lo", global = true)]
    fig_k_lo: Option<String>,
    #[arg(long = "fig_k_hi", alias = "fig-k-hi", global = true)]
    fig_k_hi: Option<String>,
    #[arg(long = "fig_points", alias = "fig-points", global = true)]
    fig_points: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("gamma", &self.gamma),
            ("p", &self.p),
            ("z_a", &self.z_a),
            ("z_b", &self.z_b),
            ("epsilon", &self.epsilon),
            ("s", &self.s),
            ("J0", &self.j0),
            ("N", &self.n),
            ("quad_abs_tol", &self.quad_abs_tol),
            ("quad_rel_tol", &self.quad_rel_tol),
            ("k_scan_lo", &self.k_scan_lo),
            ("k_scan_hi", &self.k_scan_hi),
            ("K_max", &self.k_max),
            ("M", &self.m),
            ("fp_tol", &self.fp_tol),
            ("max_iter", &self.max_iter),
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("z_search_lo", &self.z_search_lo),
            ("z_search_hi", &self.z_search_hi),
            ("verify_tol", &self.verify_tol),
            ("verify_points", &self.verify_points),
            ("fig_k_lo", &self.fig_k_lo),
            ("fig_k_hi", &self.fig_k_hi),
            ("fig_points", &self.fig_points),
        ]
    }

    fn config(&self) -> coagflux::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn run(cmd: Command, cfg: &RunConfig) -> Result<String, StageError> {
    Ok(match cmd {
        Command::Construct => {
            let m = pipeline::cmd_construct(cfg)?;
            format!("k* = {:.15} (z1 = {}, z2 = {})", m.bifurcation.k_star, m.perturbation.z1, m.perturbation.z2)
        }
        Command::Solve => {
            let m = pipeline::cmd_solve(cfg)?;
            format!("converged in {} iterations: alpha = ({:e}, {:e}), K0 = {}", m.iterations, m.alpha1, m.alpha2, m.k0)
        }
        Command::Verify => {
            let r = pipeline::cmd_verify(cfg)?;
            format!("pass: deviation {:e} (log grid), {:e} (x grid)", r.max_rel_dev_log, r.max_rel_dev_x)
        }
        Command::Figdata => {
            pipeline::cmd_figdata(cfg)?;
            "wrote G_align.csv and G_vectors.csv".to_string()
        }
        Command::All => {
            let r = pipeline::cmd_all(cfg)?;
            format!("all stages done; deviation {:e} (log grid), {:e} (x grid)", r.max_rel_dev_log, r.max_rel_dev_x)
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(Stage::Usage.exit_code() as u8) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match cli.overrides.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Stage::Usage.exit_code() as u8);
        }
    };
    match run(cli.command, &cfg) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Err(w) = pipeline::write_error(&cfg, &e) {
                eprintln!("could not write error.json: {w}");
            }
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
