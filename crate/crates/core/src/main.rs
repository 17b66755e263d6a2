use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;

use tts_ac::experiments::{emit_report, run_replications, ExperimentSpec, SEED_ENV};
use tts_ac::mdp::mixing_constants;
use tts_ac::oracle::{lipschitz_bounds, optimal_value, OracleBundle};
use tts_ac::par::Execution;
use tts_ac::policy::assumption_constants;
use tts_ac::two_timescale::run;
use tts_ac::{Algorithm, Error, FeatureMap, Result, RunConfig, TabularMdp, TabularPolicy};

#[derive(Parser)]
#[command(name = "tts-ac", version, about = "Two time-scale actor-critic on finite MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact oracle quantities at one parameter vector, as JSON.
    Oracle {
        #[arg(long)]
        mdp: PathBuf,
        /// Comma-separated actor parameters; defaults to zeros.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        w: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-2)]
        lambda: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A single seeded run; writes CSV, or JSON when `--out` ends in `.json`.
    Run {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, value_enum, default_value = "ac")]
        algo: AlgoArg,
        #[arg(long, default_value_t = 0.6)]
        sigma: f64,
        #[arg(long, default_value_t = 0.4)]
        nu: f64,
        #[arg(long, default_value_t = 1e-2)]
        lambda: f64,
        #[arg(long, default_value_t = 100_000)]
        horizon: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replications over the grid of an experiment spec file.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, value_enum)]
        algo: Option<AlgoArg>,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        /// Run replications on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Validates an MDP file and prints its mixing and smoothness constants.
    Check {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AlgoArg {
    Ac,
    Nac,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Ac => Algorithm::Ac,
            AlgoArg::Nac => Algorithm::Nac,
        }
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            context: format!("writing {}", path.display()),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Oracle { mdp, w, lambda, out } => {
            let mdp = TabularMdp::load(&mdp)?;
            let map = FeatureMap::for_mdp(&mdp);
            let w = w.unwrap_or_else(|| vec![0.0; map.dim()]);
            if w.len() != map.dim() {
                return Err(Error::Config(format!(
                    "w has {} entries, expected {}",
                    w.len(),
                    map.dim()
                )));
            }
            let bundle = OracleBundle::compute(&map, &mdp, &DVector::from_vec(w), lambda)?;
            write_or_print(out.as_deref(), &(bundle.to_json() + "\n"))
        }
        Command::Run {
            mdp,
            algo,
            sigma,
            nu,
            lambda,
            horizon,
            seed,
            out,
        } => {
            let mdp = TabularMdp::load(&mdp)?;
            let map = FeatureMap::for_mdp(&mdp);
            let config = RunConfig::new(algo.into(), sigma, nu, lambda, horizon);
            let log = run(&mdp, &map, &config, seed)?;
            let json = out
                .as_deref()
                .and_then(Path::extension)
                .is_some_and(|e| e == "json");
            let text = if json { log.to_json() + "\n" } else { log.to_csv() };
            write_or_print(out.as_deref(), &text)
        }
        Command::Sweep {
            spec,
            out,
            seeds,
            horizon,
            algo,
            seed,
            sequential,
        } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(n) = seeds {
                spec.n_seeds = n;
            }
            if let Some(t) = horizon {
                spec.horizon = t;
            }
            if let Some(a) = algo {
                spec.algorithm = a.into();
            }
            if let Some(s) = seed {
                spec.base_seed = s;
            }
            let out_dir = out
                .or_else(|| spec.out.clone())
                .ok_or_else(|| Error::Config("no output directory (use --out)".into()))?;
            let execution = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let curves = run_replications(&spec, execution)?;
            let reports = emit_report(&spec, &curves, &out_dir)?;
            for r in &reports {
                println!(
                    "{}: tracking {} (slope {}), final ‖∇J‖² {:.3e}, final gap {:.3e}",
                    r.tag,
                    r.tracking_err.predicted.label,
                    r.tracking_err
                        .rate
                        .as_ref()
                        .map_or_else(|| "n/a".to_string(), |f| format!("{:.3}", f.slope)),
                    r.grad_norm_sq.final_mean,
                    r.opt_gap.final_mean,
                );
            }
            Ok(())
        }
        Command::Check {
            mdp,
            pairs,
            radius,
            seed,
        } => {
            let mdp = TabularMdp::load(&mdp)?;
            let map = FeatureMap::for_mdp(&mdp);
            let uniform = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());
            let mixing = mixing_constants(&mdp, &uniform)?;
            let mut rng = tts_ac::rng::SimRng::seed_from_u64(seed);
            let constants = assumption_constants(&map, &mdp, pairs, radius, &mut rng)?;
            let bounds = lipschitz_bounds(
                &mdp,
                constants.c_phi,
                constants.l_phi_hat,
                constants.c_pi_hat,
                mixing.kappa,
                mixing.rho,
            )?;
            let opt = optimal_value(&mdp)?;
            println!(
                "states {}, actions {}, gamma {}, r_max {}",
                mdp.n_states(),
                mdp.n_actions(),
                mdp.gamma(),
                mdp.r_max()
            );
            println!("mixing (uniform policy): kappa {:.6e}, rho {:.6}", mixing.kappa, mixing.rho);
            println!(
                "C_phi {:.6}, L_phi {:.6}, C_pi {:.6} ({} pairs, radius {})",
                constants.c_phi, constants.l_phi_hat, constants.c_pi_hat, pairs, radius
            );
            println!(
                "C_nu {:.6}, L_J {:.6}, L_Q {:.6}, L_V {:.6}",
                bounds.c_nu, bounds.l_j, bounds.l_q, bounds.l_v
            );
            println!("J* {:.9}", opt.j_opt);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
