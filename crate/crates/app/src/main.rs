use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flame_app::bench::{bench_csv, cmd_bench_transpose, cmd_speedup, speedup_csv};
use flame_app::run::{cmd_fit, cmd_run};
use flame_app::selftest::{run_selftest, table, SelftestOptions};
use flame_app::{AppError, RunConfig};

/// Distributed pseudo-spectral simulator for expanding flame fronts.
#[derive(Parser)]
#[command(name = "flame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the front equation and write series, checkpoints and timings.
    Run(ConfigArgs),
    /// Time the global transpose for both strategies.
    BenchTranspose(ConfigArgs),
    /// Fixed-size runs over several rank counts.
    Speedup(ConfigArgs),
    /// Run the oracle suites.
    Selftest {
        /// Flip the sign of the linear growth rate; the linear suite must fail.
        #[arg(long, hide = true)]
        inject_sign_error: bool,
    },
    /// Fit `c (t - t_star)^alpha` to a velocity series.
    Fit(ConfigArgs),
}

/// Flags mirror the configuration keys and override the file.
#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "K", alias = "k")]
    k: Option<String>,
    #[arg(long = "N_p", alias = "np")]
    n_p: Option<String>,
    #[arg(long)]
    backend: Option<String>,
    /// Comma-separated host:port list, one per rank.
    #[arg(long)]
    peers: Option<String>,
    #[arg(long)]
    rank: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "theta_pi", alias = "theta-pi")]
    theta_pi: Option<String>,
    #[arg(long = "phi_pi", alias = "phi-pi")]
    phi_pi: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    t0: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long = "t_end", alias = "t-end")]
    t_end: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "output_dir", alias = "output-dir")]
    output_dir: Option<String>,
    #[arg(long = "output_every", alias = "output-every")]
    output_every: Option<String>,
    #[arg(long = "checkpoint_every", alias = "checkpoint-every")]
    checkpoint_every: Option<String>,
    #[arg(long = "symmetrize_every", alias = "symmetrize-every")]
    symmetrize_every: Option<String>,
    #[arg(long = "transpose_strategy", alias = "transpose-strategy")]
    transpose_strategy: Option<String>,
    #[arg(long)]
    resume: Option<String>,
    #[arg(long = "export_physical", alias = "export-physical")]
    export_physical: Option<String>,
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long = "np_list", alias = "np-list")]
    np_list: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    input: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, AppError> {
        let flags = [
            ("K", &self.k),
            ("N_p", &self.n_p),
            ("backend", &self.backend),
            ("peers", &self.peers),
            ("rank", &self.rank),
            ("gamma", &self.gamma),
            ("theta_pi", &self.theta_pi),
            ("phi_pi", &self.phi_pi),
            ("epsilon", &self.epsilon),
            ("t0", &self.t0),
            ("h", &self.h),
            ("t_end", &self.t_end),
            ("seed", &self.seed),
            ("output_dir", &self.output_dir),
            ("output_every", &self.output_every),
            ("checkpoint_every", &self.checkpoint_every),
            ("symmetrize_every", &self.symmetrize_every),
            ("transpose_strategy", &self.transpose_strategy),
            ("resume", &self.resume),
            ("export_physical", &self.export_physical),
            ("sizes", &self.sizes),
            ("np_list", &self.np_list),
            ("steps", &self.steps),
            ("input", &self.input),
        ];
        let overrides: Vec<(String, String)> =
            flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect();
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

fn execute(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            if let Some(s) = cmd_run(&cfg)? {
                print!("{}", s.report.summary());
                println!("{} steps, t = {:.6}, output in {}", s.steps, s.t, s.output_dir.display());
            }
        }
        Command::BenchTranspose(args) => {
            let cfg = args.load()?;
            let rows = cmd_bench_transpose(&cfg)?;
            let csv = bench_csv(&rows);
            write_output(&cfg, "bench_transpose.csv", &csv)?;
            print!("{csv}");
        }
        Command::Speedup(args) => {
            let cfg = args.load()?;
            let rows = cmd_speedup(&cfg)?;
            let csv = speedup_csv(&rows);
            write_output(&cfg, "speedup.csv", &csv)?;
            print!("{csv}");
            if let Some(base) = rows.first() {
                println!("# speedup relative to N_p = {}", base.n_ranks);
            }
        }
        Command::Selftest { inject_sign_error } => {
            let rows = run_selftest(SelftestOptions { inject_sign_error });
            print!("{}", table(&rows));
            let failed = rows.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(AppError::Selftest(format!("{failed} of {} checks failed", rows.len())));
            }
        }
        Command::Fit(args) => {
            let cfg = args.load()?;
            let fit = cmd_fit(&cfg)?;
            println!("t_star,alpha,c,residual");
            println!("{:.16e},{:.16e},{:.16e},{:.16e}", fit.t_star, fit.alpha, fit.c, fit.residual);
        }
    }
    Ok(())
}

fn write_output(cfg: &RunConfig, name: &str, text: &str) -> Result<(), AppError> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| AppError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| AppError::Other(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flame: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
