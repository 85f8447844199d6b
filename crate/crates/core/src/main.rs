//! `llicti` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 format/unsupported input,
//! 5 corrupt stream, 6 numeric failure, 1 anything else. Errors are printed
//! to stderr as a single line `error: <kind>: <message>`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use llicti::imageio::{read_image, write_image};
use llicti::interpolator::{count_macs, count_params, load_weights, save_weights};
use llicti::trainer::{evaluate, train, Corpus, TrainConfig};
use llicti::{decode, encode, estimate_bits, Error, IcnnConfig, Model};

#[derive(Parser)]
#[command(name = "llicti", version, about = "Learned lossless image codec")]
struct Cli {
    /// Worker threads for probability tables and training (0 = all cores).
    #[arg(long, global = true, env = "LLICTI_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Weight file; without it the flat (uniform) model is used.
    #[arg(long, short)]
    weights: Option<PathBuf>,
    /// Scale count for the flat model.
    #[arg(long, default_value_t = 5)]
    scales: usize,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long, default_value_t = 88)]
    channels: usize,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 3)]
    mixtures: usize,
    #[arg(long, default_value_t = 5)]
    scales: usize,
    /// Separate weights for every scale.
    #[arg(long)]
    per_scale: bool,
    /// One set of cross-channel coefficients per mixture component.
    #[arg(long)]
    alpha_per_mixture: bool,
}

impl ConfigArgs {
    fn config(&self) -> IcnnConfig {
        IcnnConfig {
            channels: self.channels,
            layers: self.layers,
            mixtures: self.mixtures,
            scales: self.scales,
            share_across_scales: !self.per_scale,
            alpha_per_mixture: self.alpha_per_mixture,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compress a PPM/PNG image.
    Encode {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Decompress to PPM (or PNG when the output ends in .png).
    Decode {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train interpolator weights on a directory of images.
    Train {
        /// Directory of training images.
        #[arg(long)]
        corpus: PathBuf,
        /// Directory of validation images (defaults to the training set).
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 64)]
        patch: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 1e-5)]
        lr_floor: f64,
        #[arg(long, default_value_t = 0.5)]
        lr_decay: f64,
        #[arg(long, default_value_t = 5)]
        patience: usize,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        #[arg(long, default_value_t = 100)]
        eval_every: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV training log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Checkpoint written at every validation.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Per-scale rates over a directory of images.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Parameter and multiply-accumulate counts of a configuration.
    Stats {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 576)]
        height: usize,
        #[arg(long, default_value_t = 768)]
        width: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 2,
        Error::Io { .. } => 3,
        Error::Format(_) | Error::Unsupported(_) => 4,
        Error::Corruption(_) => 5,
        Error::Numeric(_) => 6,
        _ => 1,
    }
}

fn with_model<R>(args: &ModelArgs, f: impl FnOnce(&Model) -> llicti::Result<R>) -> llicti::Result<R> {
    match &args.weights {
        Some(p) => {
            let w = load_weights(p)?;
            f(&Model::Learned(&w))
        }
        None => f(&Model::Flat { scales: args.scales }),
    }
}

fn run(cli: Cli) -> llicti::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Encode { input, output, model } => {
            let img = read_image(&input)?;
            with_model(&model, |m| {
                let t = Instant::now();
                let bytes = encode(&img, m)?;
                let elapsed = t.elapsed();
                std::fs::write(&output, &bytes).map_err(|e| Error::Io {
                    path: output.clone(),
                    source: e,
                })?;
                let est = estimate_bits(&img, m)?;
                let px = img.pixels() as f64;
                println!("bytes: {}", bytes.len());
                println!("bpsp: {:.4}", bytes.len() as f64 * 8.0 / (3.0 * px));
                for s in (1..=est.scales()).rev() {
                    println!("scale {s} bits: {:.0}", est.scale_bits(s));
                }
                println!("fixed bits: {:.0}", est.fixed_bits);
                println!("encode time: {:.3} s", elapsed.as_secs_f64());
                Ok(())
            })
        }
        Command::Decode { input, output, model } => {
            let bytes = std::fs::read(&input).map_err(|e| Error::Io { path: input.clone(), source: e })?;
            with_model(&model, |m| {
                let t = Instant::now();
                let img = decode(&bytes, m)?;
                write_image(&output, &img)?;
                println!("decoded {}x{} in {:.3} s", img.width(), img.height(), t.elapsed().as_secs_f64());
                Ok(())
            })
        }
        Command::Train {
            corpus,
            val,
            output,
            config,
            batch,
            patch,
            lr,
            lr_floor,
            lr_decay,
            patience,
            steps,
            eval_every,
            seed,
            log,
            checkpoint,
        } => {
            let train_set = Corpus::from_dir(&corpus)?;
            let val_set = match val {
                Some(v) => Corpus::from_dir(v)?,
                None => Corpus::default(),
            };
            let tc = TrainConfig {
                batch_size: batch,
                patch_size: patch,
                learning_rate: lr,
                lr_decay,
                lr_floor,
                patience,
                max_steps: steps,
                eval_every,
                seed,
                log_path: log,
                checkpoint_path: checkpoint,
                ..TrainConfig::default()
            };
            let out = train(&config.config(), &train_set, &val_set, &tc, |row| {
                if let Some(v) = row.val_bpp {
                    println!("step {} lr {:e} train {:.4} val {:.4}", row.step, row.lr, row.train_bpp, v);
                }
            })?;
            save_weights(&out.weights, &output)?;
            println!("weights: {} checksum {:016x}", output.display(), out.weights.checksum());
            Ok(())
        }
        Command::Eval { corpus, model } => {
            let c = Corpus::from_dir(&corpus)?;
            with_model(&model, |m| {
                let report = evaluate(&c, m)?;
                for (name, r) in report.names.iter().zip(&report.rates) {
                    println!("{name}: {:.4} bpp", (r.coded_bits() + r.fixed_bits) / r.pixels() as f64);
                }
                print!("{}", report.table());
                Ok(())
            })
        }
        Command::Stats { config, height, width } => {
            let c = config.config();
            c.validate()?;
            if height == 0 || width == 0 {
                return Err(Error::Argument("image size must be positive".into()));
            }
            println!("config: {c}");
            println!("params: {} (reference: 188K at C=88, 34K at C=24)", count_params(&c));
            println!(
                "KMAC/pix: {:.2} at {width}x{height} (reference: 66)",
                count_macs(&c, height, width)
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let msg = e.to_string();
                let first = msg.lines().next().unwrap_or("invalid arguments");
                eprintln!("error: argument: {}", first.trim_start_matches("error: "));
                return ExitCode::from(2);
            }
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::from(exit_code(&e))
        }
    }
}
