use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cloccs::comparison::{compare_submodels, ComparisonSettings};
use cloccs::error::{CloccsError, Result};
use cloccs::inference::{run_chain, summarize, CloccsModel};
use cloccs::io::{
    parse_budding_csv, parse_flow_table, read_chain_csv, write_budding_csv, write_budding_curve_csv, write_chain_csv,
    write_comparison_csv, write_diagnostics_csv, write_flow_density_csv, write_flow_table, write_manifest,
    write_summary_csv, RunConfig,
};
use cloccs::prior::{Prior, SubmodelSpec};
use cloccs::start::{search_start, StartSearch};

/// Fit and simulate branching-process models of cell-cycle synchrony loss.
#[derive(Parser, Debug)]
#[command(name = "cloccs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic budding and flow datasets.
    Simulate(Common),
    /// Run the Metropolis sampler on budding and/or flow data.
    Fit(FitArgs),
    /// Bayes factors and RMSE over the eight nested submodels (budding data).
    Compare(CompareArgs),
    /// Recompute the posterior summary from a saved chain.
    Summarize(SummarizeArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `section.key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SamplerArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    budding: Option<PathBuf>,
    #[arg(long)]
    flow: Option<PathBuf>,
    /// Fix a parameter at zero (mu0, sigma0 or delta); repeatable.
    #[arg(long, value_parser = ["mu0", "sigma0", "delta"])]
    fix: Vec<String>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    budding: PathBuf,
    #[arg(long = "importance-draws")]
    importance_draws: Option<usize>,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// Chain CSV written by `fit`.
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(common: &Common, sampler: Option<&SamplerArgs>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.sampler.seed = s;
    }
    if let Some(a) = sampler {
        if let Some(v) = a.iterations {
            cfg.sampler.iterations = v;
        }
        if let Some(v) = a.thin {
            cfg.sampler.thin = v;
        }
        if let Some(v) = a.burn_in {
            cfg.sampler.burn_in = v;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest(command: &str, inputs: &[(&str, &Path)], cfg: Option<&RunConfig>) -> Vec<(String, String)> {
    let mut m = vec![
        ("command".to_string(), command.to_string()),
        ("cloccs.version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ];
    for (k, p) in inputs {
        m.push((format!("input.{k}"), p.display().to_string()));
    }
    if let Some(c) = cfg {
        m.extend(c.entries());
    }
    m
}

fn simulate(args: &Common) -> Result<()> {
    let cfg = load_config(args, None)?;
    let data = cfg.simulate.generate(cfg.model, cfg.sampler.seed)?;
    write_budding_csv(&args.out.join("budding.csv"), &data.budding)?;
    write_flow_table(&args.out.join("flow.csv"), &data.flow)?;
    let mut truth = String::from("time_min,alpha1,alpha2,tau\n");
    for (t, p) in data.flow.times().iter().zip(&data.per_time) {
        truth.push_str(&format!("{t},{},{},{}\n", p.alpha1, p.alpha2, p.tau));
    }
    std::fs::write(args.out.join("flow_truth.csv"), truth)?;
    write_manifest(&args.out.join("manifest.txt"), &manifest("simulate", &[], Some(&cfg)))
}

fn fit(args: &FitArgs) -> Result<()> {
    let mut cfg = load_config(&args.common, Some(&args.sampler))?;
    if !args.fix.is_empty() {
        cfg.submodel = SubmodelSpec::from_fixed(&args.fix)?;
    }
    if args.budding.is_none() && args.flow.is_none() {
        return Err(CloccsError::Config("fit needs --budding and/or --flow".into()));
    }
    let budding = args.budding.as_deref().map(parse_budding_csv).transpose()?;
    let flow = args.flow.as_deref().map(parse_flow_table).transpose()?;
    let model = CloccsModel::new(Prior::new(cfg.prior)?, cfg.model, cfg.submodel, budding, flow)?;
    let init = if cfg.search_start {
        Some(search_start(&model, &StartSearch::default(), cfg.sampler.seed)?)
    } else {
        None
    };
    let chain = run_chain(&model, &cfg.sampler, init)?;
    let out = &args.common.out;
    write_chain_csv(&out.join("chain.csv"), &chain)?;
    write_summary_csv(&out.join("summary.csv"), &summarize(&chain)?)?;
    write_diagnostics_csv(&out.join("diagnostics.csv"), &chain)?;
    if let Some(d) = model.budding() {
        let times: Vec<f64> = d.records().iter().map(|r| r.time()).collect();
        let (lo, hi) = (times[0].min(0.0), times[times.len() - 1]);
        let mut grid: Vec<f64> = (0..=400)
            .map(|i| lo + (hi - lo) * i as f64 / 400.0)
            .chain(times)
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        write_budding_curve_csv(&out.join("budding_curve.csv"), &model, &chain, &grid, 1000)?;
    }
    if model.flow().is_some() {
        write_flow_density_csv(&out.join("flow_density.csv"), &model, &chain, 100)?;
    }
    let mut inputs = Vec::new();
    if let Some(p) = &args.budding {
        inputs.push(("budding", p.as_path()));
    }
    if let Some(p) = &args.flow {
        inputs.push(("flow", p.as_path()));
    }
    write_manifest(&out.join("manifest.txt"), &manifest("fit", &inputs, Some(&cfg)))
}

fn compare(args: &CompareArgs) -> Result<()> {
    let mut cfg = load_config(&args.common, Some(&args.sampler))?;
    if let Some(n) = args.importance_draws {
        cfg.importance_draws = n;
    }
    cfg.validate()?;
    let data = parse_budding_csv(&args.budding)?;
    let settings = ComparisonSettings {
        sampler: cfg.sampler.clone(),
        importance_draws: cfg.importance_draws,
        rmse_draws: cfg.rmse_draws,
        start: cfg.search_start.then(StartSearch::default),
    };
    let table = compare_submodels(
        &Prior::new(cfg.prior)?,
        cfg.model,
        &data,
        &SubmodelSpec::lattice(),
        &settings,
    )?;
    let out = &args.common.out;
    write_comparison_csv(&out.join("comparison.csv"), &table)?;
    write_manifest(
        &out.join("manifest.txt"),
        &manifest("compare", &[("budding", args.budding.as_path())], Some(&cfg)),
    )
}

fn summarize_cmd(args: &SummarizeArgs) -> Result<()> {
    let chain = read_chain_csv(&args.chain)?;
    write_summary_csv(&args.out.join("summary.csv"), &summarize(&chain)?)?;
    write_manifest(
        &args.out.join("manifest.txt"),
        &manifest("summarize", &[("chain", args.chain.as_path())], None),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Compare(a) => compare(a),
        Command::Summarize(a) => summarize_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cloccs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
