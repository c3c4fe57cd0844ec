use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use imvcdc::data::{save_matrix, write_labels, generate_synthetic, Manifest};
use imvcdc::nn::Tensor;
use imvcdc::pipeline::{
    ablate, default_etas, evaluate_saved, load_run, pca_2d, resolve_out_dir, run_experiment, sweep_missing_rate,
    write_projection_csv, DataSource, ExperimentConfig, Run,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Incomplete multi-view clustering with latent diffusion completion.
#[derive(Parser)]
#[command(name = "imvcdc", version)]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides IMVCDC_OUT and the config's out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset and a manifest for it.
    GenData,
    /// Run all stages and save checkpoints, predictions and the run record.
    Train,
    /// Reload a saved run and recompute its metrics from the checkpoints.
    Evaluate {
        /// Run directory (defaults to the output directory).
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// One run per missing rate.
    Sweep {
        /// Comma-separated missing rates.
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
    },
    /// Train the four objective variants and tabulate them.
    Ablate,
    /// Project latents or head features of a saved run onto 2 components.
    ExportProj {
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Source::Latents)]
        source: Source,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Latents,
    Features,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            if !path.exists() {
                bail!("config file {} does not exist", path.display());
            }
            ExperimentConfig::load(path)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn metrics_line(run: &Run) -> String {
    match &run.record.metrics {
        Some(m) => format!("acc {:.4}  nmi {:.4}  ari {:.4}", m.acc, m.nmi, m.ari),
        None => "no labels, metrics skipped".to_string(),
    }
}

fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let DataSource::Synthetic(spec) = &cfg.data else {
        bail!("gen-data needs a synthetic data source");
    };
    let data = generate_synthetic(&cfg.synthetic_spec(spec))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut views = Vec::new();
    for (v, x) in data.views().iter().enumerate() {
        let name = format!("view{}.mat", v + 1);
        save_matrix(&out.join(&name), x)?;
        views.push(PathBuf::from(name));
    }
    write_labels(&out.join("labels.txt"), data.labels().unwrap_or_default())?;
    Manifest {
        views,
        labels: Some("labels.txt".into()),
        eta: Some(cfg.eta),
    }
    .write(&out.join("manifest.toml"))?;
    println!("wrote {} samples x {} views to {}", data.n(), data.num_views(), out.display());
    Ok(())
}

fn train(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let mut run = run_experiment(cfg)?;
    run.save(out)?;
    println!("{}", metrics_line(&run));
    println!("objective {:.6}", run.record.losses.objective);
    println!("saved to {}", out.display());
    Ok(())
}

fn evaluate(dir: &Path) -> Result<()> {
    let e = evaluate_saved(dir)?;
    match &e.recomputed {
        Some(m) => println!("acc {:.4}  nmi {:.4}  ari {:.4}", m.acc, m.nmi, m.ari),
        None => println!("no labels, metrics skipped"),
    }
    if !e.reproduced() {
        bail!("recomputed metrics differ from the saved record in {}", dir.display());
    }
    println!("matches saved record");
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, etas: Vec<f64>, out: &Path) -> Result<()> {
    let mut table = String::from("eta,acc,nmi,ari,status\n");
    let mut failed = 0;
    for (eta, result) in sweep_missing_rate(cfg, &etas) {
        match result {
            Ok(mut run) => {
                run.save(&out.join(format!("eta_{eta:.2}")))?;
                let m = run.record.metrics.unwrap_or_default();
                writeln!(table, "{eta},{},{},{},ok", m.acc, m.nmi, m.ari)?;
                println!("eta {eta:.2}: {}", metrics_line(&run));
            }
            Err(e) => {
                failed += 1;
                writeln!(table, "{eta},,,,\"{e}\"")?;
                eprintln!("eta {eta:.2}: {e}");
            }
        }
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("sweep.csv"), table)?;
    if failed > 0 {
        bail!("{failed} of {} runs failed", etas.len());
    }
    Ok(())
}

fn run_ablation(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let mut table = String::from("variant,acc,nmi,ari\n");
    for mut run in ablate(cfg)? {
        let variant = run.record.variant;
        run.save(&out.join(format!("{variant:?}").to_lowercase()))?;
        let m = run.record.metrics.unwrap_or_default();
        writeln!(table, "{variant},{},{},{}", m.acc, m.nmi, m.ari)?;
        println!("{:<18} {}", variant.label(), metrics_line(&run));
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("ablation.csv"), table)?;
    Ok(())
}

fn export_projection(dir: &Path, source: Source) -> Result<()> {
    let run = load_run(dir)?;
    let x: Tensor = match source {
        Source::Latents => run.bank.concatenated(),
        Source::Features => {
            let Some(heads) = &run.heads else {
                bail!("run in {} has no clustering heads", dir.display());
            };
            let feats: Vec<Tensor> = heads.outputs(&run.bank)?.into_iter().map(|(h, _)| h).collect();
            let n = run.bank.n();
            let width: usize = feats.iter().map(Tensor::cols).sum();
            let mut data = Vec::with_capacity(n * width);
            for i in 0..n {
                for f in &feats {
                    data.extend_from_slice(f.row(i));
                }
            }
            Tensor::matrix(n, width, data)
        }
    };
    let p = pca_2d(&x)?;
    let labels = run.dataset.labels().map(<[usize]>::to_vec).unwrap_or_else(|| run.predictions.clone());
    let path = dir.join("projection.csv");
    write_projection_csv(&path, &p, Some(&labels))?;
    println!(
        "explained variance {:.4} {:.4}; wrote {}",
        p.explained[0],
        p.explained[1],
        path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = load_config(&cli).and_then(|cfg| {
        let out = resolve_out_dir(cli.out.as_deref(), &cfg);
        match cli.command {
            Command::GenData => gen_data(&cfg, &out),
            Command::Train => train(&cfg, &out),
            Command::Evaluate { run } => evaluate(run.as_deref().unwrap_or(&out)),
            Command::Sweep { etas } => sweep(&cfg, etas.unwrap_or_else(default_etas), &out),
            Command::Ablate => run_ablation(&cfg, &out),
            Command::ExportProj { run, source } => export_projection(run.as_deref().unwrap_or(&out), source),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
