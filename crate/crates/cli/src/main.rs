//! Command-line front end: `align`, `simulate`, `template` and `export`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 parse or configuration error,
//! 3 numerical failure, 4 insufficient posterior support.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use warpbayes::io::{export_plot_data, load_functions, load_warp, save_functions, sha256_hex};
use warpbayes::model::{Decay, PriorConfig};
use warpbayes::pipeline::{align, ImportanceMean, InputDigest, ResultBundle, RunConfig};
use warpbayes::sim::{run_sim1, run_sim2, run_template_alignment, Sim1Warp, SimConfig};
use warpbayes::AlignError;

#[derive(Parser)]
#[command(
    name = "warpbayes",
    version,
    about = "Bayesian elastic registration of functional data"
)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align f2 to f1 and write a JSON result bundle.
    Align(AlignArgs),
    /// Run a built-in simulation study.
    Simulate(SimulateArgs),
    /// Align every function of a dataset to one of its members.
    Template(TemplateArgs),
    /// Write plot-ready CSVs from a result bundle.
    Export(ExportArgs),
}

#[derive(Args, Clone)]
struct Sampling {
    /// Grid size N.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Importance sample size S.
    #[arg(long, default_value_t = 50_000)]
    samples: usize,
    /// Resample size s.
    #[arg(long, default_value_t = 200)]
    resample: usize,
    /// Basis size m (default N - 1).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 1000.0)]
    sigma2: f64,
    #[arg(long, value_enum, default_value_t = DecayArg::Quadratic)]
    decay: DecayArg,
    #[arg(long, default_value_t = 1.0)]
    gamma_alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    gamma_beta: f64,
    /// Credible level of the pointwise bands.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, env = "WARPBAYES_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecayArg {
    None,
    Linear,
    Quadratic,
}

impl From<DecayArg> for Decay {
    fn from(d: DecayArg) -> Self {
        match d {
            DecayArg::None => Decay::None,
            DecayArg::Linear => Decay::Linear,
            DecayArg::Quadratic => Decay::Quadratic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MeanArg {
    Identity,
    DpSolution,
    File,
}

#[derive(Args)]
struct AlignArgs {
    /// CSV with f1 in its first function column.
    f1: PathBuf,
    /// CSV with f2 in its first function column; if omitted, f2 is the
    /// second function column of the f1 file.
    f2: Option<PathBuf>,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long, default_value_t = 5)]
    k_max: usize,
    #[arg(long, default_value_t = 0.30)]
    mode_threshold: f64,
    #[arg(long, value_enum, default_value_t = MeanArg::Identity)]
    importance_mean: MeanArg,
    /// Warp CSV used with `--importance-mean file`.
    #[arg(long)]
    importance_mean_file: Option<PathBuf>,
    /// Output JSON path (stdout if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write plot CSVs into this directory.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WarpArg {
    Identity,
    Gamma1,
    Gamma2,
    Gamma3,
}

impl From<WarpArg> for Sim1Warp {
    fn from(w: WarpArg) -> Self {
        match w {
            WarpArg::Identity => Sim1Warp::Identity,
            WarpArg::Gamma1 => Sim1Warp::Gamma1,
            WarpArg::Gamma2 => Sim1Warp::Gamma2,
            WarpArg::Gamma3 => Sim1Warp::Gamma3,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Study 1 (known unimodal warp) or 2 (bimodal posterior).
    #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
    which: u8,
    /// True warp for study 1.
    #[arg(long, value_enum, default_value_t = WarpArg::Gamma1)]
    warp: WarpArg,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TemplateArgs {
    /// CSV whose function columns form the dataset.
    dataset: PathBuf,
    /// Zero-based column index of the template among the functions.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write `warps.csv`, `aligned.csv` and `averages.csv` here.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Result bundle written by `align`.
    bundle: PathBuf,
    out_dir: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<AlignError>() {
        Some(AlignError::Parse { .. } | AlignError::InvalidInput(_) | AlignError::Json(_)) => 2,
        Some(AlignError::InsufficientSupport { .. }) => 4,
        Some(AlignError::Io(_)) => 1,
        Some(_) => 3,
        None => 1,
    }
}

fn digest(path: &Path) -> anyhow::Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputDigest {
        name: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn sim_config(s: &Sampling, replicates: usize) -> SimConfig {
    SimConfig {
        n: s.n,
        samples: s.samples,
        resample: s.resample,
        replicates,
        prior: PriorConfig {
            sigma2: s.sigma2,
            decay: s.decay.into(),
            m: s.m.unwrap_or(s.n.saturating_sub(1)),
            gamma_alpha: s.gamma_alpha,
            gamma_beta: s.gamma_beta,
        },
        level: s.level,
        dp: Default::default(),
    }
}

fn first_two(
    f1: &Path,
    f2: Option<&Path>,
    n: usize,
) -> anyhow::Result<(
    warpbayes::function::SampledFunction,
    warpbayes::function::SampledFunction,
)> {
    let mut a = load_functions(f1, n)?;
    match f2 {
        Some(p) => {
            let b = load_functions(p, n)?;
            Ok((
                a.swap_remove(0),
                b.into_iter().next().expect("parser guarantees a column"),
            ))
        }
        None if a.len() >= 2 => {
            let second = a.swap_remove(1);
            Ok((a.swap_remove(0), second))
        }
        None => Err(AlignError::InvalidInput(format!(
            "{} has one function column; pass a second file for f2",
            f1.display()
        ))
        .into()),
    }
}

fn run_align(args: &AlignArgs) -> anyhow::Result<()> {
    let s = &args.sampling;
    let importance_mean = match args.importance_mean {
        MeanArg::Identity => ImportanceMean::Identity,
        MeanArg::DpSolution => ImportanceMean::DpSolution,
        MeanArg::File => match &args.importance_mean_file {
            Some(p) => ImportanceMean::File(p.display().to_string()),
            None => {
                return Err(AlignError::InvalidInput(
                    "--importance-mean file needs --importance-mean-file".into(),
                )
                .into())
            }
        },
    };
    let cfg = RunConfig {
        n: s.n,
        samples: s.samples,
        resample: s.resample,
        m: s.m,
        sigma2: s.sigma2,
        decay: s.decay.into(),
        gamma_alpha: s.gamma_alpha,
        gamma_beta: s.gamma_beta,
        k_max: args.k_max,
        mode_threshold: args.mode_threshold,
        level: s.level,
        seed: s.seed,
        importance_mean,
    };
    cfg.validate()?;
    let (f1, f2) = first_two(&args.f1, args.f2.as_deref(), cfg.n)?;
    let mut inputs = vec![digest(&args.f1)?];
    if let Some(p) = &args.f2 {
        inputs.push(digest(p)?);
    }
    let file_mean = match &args.importance_mean_file {
        Some(p) if matches!(args.importance_mean, MeanArg::File) => {
            inputs.push(digest(p)?);
            Some(load_warp(p, cfg.n)?)
        }
        _ => None,
    };
    let bundle = align(&f1, &f2, &cfg, inputs, file_mean.as_ref())?;
    emit(args.out.as_deref(), &bundle.to_json()?)?;
    if let Some(dir) = &args.export_dir {
        export_plot_data(&bundle, dir)?;
    }
    eprintln!(
        "k = {}; retained {} of {} draws; DPD (MAP) {}",
        bundle.clusters.k,
        bundle.importance.retained,
        bundle.importance.total,
        bundle
            .summaries
            .iter()
            .map(|x| x
                .dpd_map
                .map_or("undefined".to_string(), |v| format!("{v:.2}")))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let cfg = sim_config(&args.sampling, args.replicates);
    let seed = args.sampling.seed;
    let text = if args.which == 1 {
        let r = run_sim1(args.warp.into(), &cfg, seed)?;
        let fmt = |x: Option<warpbayes::sim::Statistic>| {
            x.map_or("n/a".to_string(), |s| {
                format!("{:.2} ({:.2})", s.mean, s.sd)
            })
        };
        eprintln!("d_FR(γ_T, γ̄)   d_FR(γ_T, γ_DP)   DPD mean   DPD DP");
        eprintln!(
            "{:.4} ({:.4})   {:.4} ({:.4})   {}   {}",
            r.dfr_mean.mean,
            r.dfr_mean.sd,
            r.dfr_dp.mean,
            r.dfr_dp.sd,
            fmt(r.dpd_mean),
            fmt(r.dpd_dp)
        );
        to_json(&r)?
    } else {
        let r = run_sim2(&cfg, seed)?;
        eprintln!("cluster   size            dist mean       dist median     dist MAP");
        for c in 0..2 {
            eprintln!(
                "{}         {:.2} ({:.2})   {:.4} ({:.4})   {:.4} ({:.4})   {:.4} ({:.4})",
                c + 1,
                r.cluster_sizes[c].mean,
                r.cluster_sizes[c].sd,
                r.distance_mean[c].mean,
                r.distance_mean[c].sd,
                r.distance_median[c].mean,
                r.distance_median[c].sd,
                r.distance_map[c].mean,
                r.distance_map[c].sd
            );
        }
        eprintln!("no-warp distance {:.4}", r.no_warp_distance);
        to_json(&r)?
    };
    emit(args.out.as_deref(), &text)
}

fn run_template(args: &TemplateArgs) -> anyhow::Result<()> {
    let cfg = sim_config(&args.sampling, 1);
    let data = load_functions(&args.dataset, cfg.n)?;
    let res = run_template_alignment(&data, args.index, &cfg, args.sampling.seed)?;
    emit(args.out.as_deref(), &to_json(&res)?)?;
    if let Some(dir) = &args.export_dir {
        fs::create_dir_all(dir)?;
        let warps: Vec<_> = res
            .warps
            .iter()
            .map(|g| warpbayes::function::SampledFunction::new(g.values().to_vec()))
            .collect::<Result<_, _>>()?;
        save_functions(&dir.join("warps.csv"), &warps)?;
        save_functions(&dir.join("aligned.csv"), &res.aligned)?;
        let averages = [
            warpbayes::function::SampledFunction::new(res.mean_before.clone())?,
            warpbayes::function::SampledFunction::new(res.mean_after.clone())?,
        ];
        save_functions(&dir.join("averages.csv"), &averages)?;
    }
    Ok(())
}

fn run_export(args: &ExportArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.bundle)
        .with_context(|| format!("reading {}", args.bundle.display()))?;
    let bundle = ResultBundle::from_json(&text)?;
    for name in export_plot_data(&bundle, &args.out_dir)? {
        eprintln!("wrote {}", args.out_dir.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Align(a) => run_align(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Template(a) => run_template(a),
        Command::Export(a) => run_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
