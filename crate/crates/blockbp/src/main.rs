//! Thin command-line front end over the library. Exit codes: 0 success,
//! 2 invalid parameters, 3 non-convergence in single-run `infer`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blockbp::adiabatic::adiabatic_sweep;
use blockbp::bp::{self, BpOptions, InitMode};
use blockbp::config::{self, parse_init, RunConfig};
use blockbp::diagnose;
use blockbp::error::Error;
use blockbp::graph::{parse_network_file, sample_network, write_network_file, Network};
use blockbp::model::degree_profile;
use blockbp::oracle::WeightModel;
use blockbp::sweep::{self, AxisParam, InitKind};

#[derive(Parser)]
#[command(name = "blockbp", about = "Belief-propagation community detection on block models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for sweep grids (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// TOML config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Centered group-size offsets; default is the equally spaced scheme.
    #[arg(long, value_delimiter = ',')]
    zeta: Option<Vec<f64>>,
    #[arg(long)]
    disassortative: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => config::load_run_config(p)?,
            None => RunConfig {
                n: 0,
                q: 0,
                c: 0.0,
                epsilon: 0.0,
                delta: 0.0,
                zeta: None,
                disassortative: false,
                seed: 0,
            },
        };
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(q) = self.q {
            cfg.q = q;
        }
        if let Some(c) = self.c {
            cfg.c = c;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if self.zeta.is_some() {
            cfg.zeta = self.zeta.clone();
        }
        if self.disassortative {
            cfg.disassortative = true;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if cfg.n == 0 || cfg.q == 0 {
            return Err(Error::invalid(
                "n and q are required (flags or --config)",
            ));
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a block-model network and write it to a file.
    Generate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run message passing to convergence on one network.
    Infer {
        #[arg(long)]
        network: PathBuf,
        /// random | prior | planted
        #[arg(long, default_value = "random")]
        init: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 2000)]
        max_sweeps: usize,
        /// Disable the mean-field non-edge factor.
        #[arg(long)]
        no_field: bool,
        /// Stop after exactly this many synchronous rounds instead of
        /// iterating to convergence.
        #[arg(long)]
        finite_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also dump the directed messages.
        #[arg(long)]
        messages: bool,
    },
    /// Closed-form local classification (radius 1 or 2).
    Classify {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, default_value_t = 1)]
        radius: u8,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Exact enumeration posterior on a small instance.
    Oracle {
        #[arg(long)]
        network: PathBuf,
        /// tree | poissonized | bernoulli
        #[arg(long, default_value = "tree")]
        model: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a parameter grid from a sweep config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Warm-started adiabatic trajectory (down then back up by default).
    Hysteresis {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 0.25)]
        step: f64,
        /// Trajectory start: planted | random | prior.
        #[arg(long, default_value = "planted")]
        init: String,
        /// Only run the one-way trajectory (no return leg).
        #[arg(long)]
        one_way: bool,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 2000)]
        max_sweeps: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-diagnose an emitted records.csv.
    Diagnose {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        gap_threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_marginals_csv(path: &Path, rows: &[f64], q: usize) -> Result<(), Error> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "node,group,value")?;
    for (i, row) in rows.chunks_exact(q).enumerate() {
        for (a, v) in row.iter().enumerate() {
            writeln!(w, "{i},{},{v}", a + 1)?;
        }
    }
    Ok(())
}

fn write_messages_csv(path: &Path, net: &Network, state: &bp::MessageSet) -> Result<(), Error> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "src,dst,group,value")?;
    for i in 0..net.n() {
        for s in net.slots(i) {
            let j = net.slot_target(s);
            for (a, v) in state.message(s).iter().enumerate() {
                writeln!(w, "{i},{j},{},{v}", a + 1)?;
            }
        }
    }
    Ok(())
}

fn init_from_name(name: &str, seed: u64) -> Result<InitMode, Error> {
    Ok(match parse_init(name)? {
        InitKind::Random => InitMode::Random(seed),
        InitKind::Prior => InitMode::Prior,
        InitKind::Planted => InitMode::Planted,
    })
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Generate { model, out } => {
            let cfg = model.resolve()?;
            let spec = cfg.family().spec_for(cfg.n)?;
            let net = sample_network(&spec, cfg.seed)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("network.txt");
            write_network_file(&net, &path)?;
            let (_, c) = degree_profile(&spec);
            println!(
                "wrote {} ({} nodes, {} edges, target mean degree {c:.3}, empirical {:.3})",
                path.display(),
                net.n(),
                net.num_edges(),
                net.mean_degree()
            );
            Ok(0)
        }
        Command::Infer {
            network,
            init,
            tol,
            max_sweeps,
            no_field,
            finite_steps,
            seed,
            out,
            messages,
        } => {
            let net = parse_network_file(&network)?;
            let mode = init_from_name(&init, seed.unwrap_or(0))?;
            std::fs::create_dir_all(&out)?;
            let (state, report) = match finite_steps {
                Some(t) => {
                    let state = bp::run_finite_with(&net, mode, t, !no_field)?;
                    let ll = bp::log_likelihood(&state, &net)?;
                    (
                        state,
                        bp::ConvergenceReport {
                            sweeps: t,
                            residual: f64::NAN,
                            converged: true,
                            log_likelihood: ll,
                        },
                    )
                }
                None => {
                    let opts = BpOptions {
                        tol,
                        max_sweeps,
                        nonedge_field: !no_field,
                        order_seed: seed.unwrap_or(0),
                        ..BpOptions::default()
                    };
                    bp::run_to_convergence(&net, mode, &opts)?
                }
            };
            write_marginals_csv(&out.join("marginals.csv"), state.marginals(), net.q())?;
            if messages {
                write_messages_csv(&out.join("messages.csv"), &net, &state)?;
            }
            let rep = serde_json::json!({
                "sweeps": report.sweeps,
                "residual": report.residual,
                "converged": report.converged,
                "log_likelihood": report.log_likelihood,
                "overlap": blockbp::overlap(state.marginals(), net.planted()),
                "marginal_overlap": blockbp::marginal_overlap(state.marginals(), net.planted()),
            });
            std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&rep).unwrap())?;
            println!("{rep}");
            if finite_steps.is_none() && !report.converged {
                return Ok(3);
            }
            Ok(0)
        }
        Command::Classify {
            network,
            radius,
            out,
        } => {
            let net = parse_network_file(&network)?;
            let spec = net.spec().clone();
            let (ca, _) = degree_profile(&spec);
            let rows = match radius {
                1 => blockbp::degree_classifier(&net, &spec.prior, &ca)?.rows().to_vec(),
                2 => blockbp::radius2_classifier(&net, &spec.prior, &spec.affinity, &ca)?
                    .rows()
                    .to_vec(),
                r => {
                    return Err(Error::invalid(format!(
                        "radius {r} unsupported; use 1 or 2 (deeper radii via finite-step infer)"
                    )))
                }
            };
            std::fs::create_dir_all(&out)?;
            write_marginals_csv(&out.join("marginals.csv"), &rows, net.q())?;
            println!(
                "overlap {:.4}, marginal overlap {:.4}",
                blockbp::overlap(&rows, net.planted()),
                blockbp::marginal_overlap(&rows, net.planted())
            );
            Ok(0)
        }
        Command::Oracle {
            network,
            model,
            out,
        } => {
            let net = parse_network_file(&network)?;
            let wm = match model.as_str() {
                "tree" => WeightModel::TreeOnly,
                "poissonized" => WeightModel::Poissonized,
                "bernoulli" => WeightModel::Bernoulli,
                other => {
                    return Err(Error::invalid(format!(
                        "unknown weight model `{other}`"
                    )))
                }
            };
            let spec = net.spec().clone();
            let (marginals, log_z) = blockbp::exact_posterior(&net, &spec, wm)?;
            std::fs::create_dir_all(&out)?;
            write_marginals_csv(&out.join("marginals.csv"), &marginals, net.q())?;
            println!("log evidence: {log_z}");
            Ok(0)
        }
        Command::Sweep { config, seed, out } => {
            let cfg = config::load_sweep_config(&config)?;
            let spec = cfg.resolve()?;
            let master = seed.unwrap_or(cfg.seed);
            let records = sweep::sweep(&spec, master)?;
            let diag = diagnose::diagnose(&records, spec.gap_threshold);
            sweep::emit(&records, Some(&diag), &spec, master, &out)?;
            let flagged = records.iter().filter(|r| !r.ok).count();
            println!(
                "{} records ({} flagged) -> {}",
                records.len(),
                flagged,
                out.display()
            );
            Ok(0)
        }
        Command::Hysteresis {
            model,
            from,
            to,
            step,
            init,
            one_way,
            tol,
            max_sweeps,
            out,
        } => {
            let cfg = model.resolve()?;
            let family = cfg.family();
            let mut values = Vec::new();
            let count = ((to - from).abs() / step + 0.5).floor() as usize + 1;
            let dir = if to >= from { 1.0 } else { -1.0 };
            for k in 0..count {
                values.push(from + dir * k as f64 * step);
            }
            if !one_way {
                let back: Vec<f64> = values.iter().rev().skip(1).cloned().collect();
                values.extend(back);
            }
            let opts = BpOptions {
                tol,
                max_sweeps,
                ..BpOptions::default()
            };
            let records = adiabatic_sweep(
                &family,
                AxisParam::MeanDegree,
                &values,
                cfg.n,
                parse_init(&init)?,
                cfg.seed,
                &opts,
            )?;
            std::fs::create_dir_all(&out)?;
            let mut w = std::io::BufWriter::new(std::fs::File::create(out.join("trajectory.csv"))?);
            sweep::write_records(&records, &mut w)?;
            println!("{} trajectory steps -> {}", records.len(), out.display());
            Ok(0)
        }
        Command::Diagnose {
            records,
            gap_threshold,
            out,
        } => {
            let recs = sweep::read_records(std::fs::File::open(&records)?)?;
            let diag = diagnose::diagnose(&recs, gap_threshold);
            let text = serde_json::to_string_pretty(&diag).unwrap();
            if let Some(o) = out {
                std::fs::create_dir_all(&o)?;
                std::fs::write(o.join("summary.json"), &text)?;
            }
            println!("{text}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
