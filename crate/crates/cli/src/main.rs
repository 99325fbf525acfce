mod config;
mod io;
mod report;

use anyhow::{bail, ensure, Context, Result};
use bernstein_yett::diagnostics::{grid_points, hellinger, PosteriorMean, Quadrature, SimulationModel, WaicAccumulator};
use bernstein_yett::mcmc::{
    fit_gaussian_copula, read_chain, ChainRecord, ChainWriter, Observations, RunSummary, Sampler,
};
use bernstein_yett::{BernsteinCopula, Dataset, UnitPoints};
use clap::{Args, Parser, Subcommand};
use config::{Config, MarginalsKind};
use report::{Acceptance, BaselineReport, ChainSummary, EssReport, FitSummary, WaicReport, SUMMARY_FILE};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "yett", version, about = "Bernstein copula estimation with yett-uniform priors")]
struct Cli {
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler on a data file.
    Fit(FitArgs),
    /// Write a perfect sample from a built-in model.
    Simulate(SimulateArgs),
    /// ESS, posterior mean density and Hellinger distance for a chain file.
    Diagnose(DiagnoseArgs),
    /// Rank fitted models by WAIC.
    Compare(CompareArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.chains`.
    #[arg(long)]
    chains: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// M1, M2, M3 or M4.
    #[arg(long)]
    model: SimulationModel,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    chain: PathBuf,
    /// Comma-separated: cells, loglik, logprior, r, theta.
    #[arg(long, value_delimiter = ',', default_value = "cells,loglik")]
    functionals: Vec<String>,
    /// Reference model for the Hellinger distance.
    #[arg(long)]
    model: Option<SimulationModel>,
    /// Points per axis of the posterior mean density table.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    /// Defaults to the chain file's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Fit output directories or summary files.
    #[arg(required = true, num_args = 2..)]
    fits: Vec<PathBuf>,
    /// WAIC differences below this are reported as ties.
    #[arg(long, default_value_t = 1.0)]
    tie: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Fit(a) => cmd_fit(a, cli.seed),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Diagnose(a) => cmd_diagnose(a, cli.seed),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn observations(cfg: &Config, data: Dataset) -> Result<Observations> {
    Ok(match cfg.marginals.kind {
        MarginalsKind::Empirical | MarginalsKind::Parametric => {
            let set = cfg.marginal_set(&data)?;
            Observations::data(data, set)?
        }
        MarginalsKind::Uniform => {
            ensure!(
                data.as_slice().iter().all(|v| *v > 0.0 && *v < 1.0),
                "marginals.kind = \"uniform\" needs every value strictly inside (0, 1)"
            );
            Observations::copula(UnitPoints::new(data.dims(), data.as_slice().to_vec())?)
        }
        MarginalsKind::Known => {
            let model: SimulationModel = cfg.marginals.model.as_deref().unwrap_or_default().parse()?;
            ensure!(data.dims() == 2, "built-in models are bivariate, the data have {} columns", data.dims());
            Observations::copula(UnitPoints::from_rows(&model.mixture().pseudo_observations(&data))?)
        }
    })
}

fn cmd_fit(args: FitArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(dir) = args.out {
        cfg.output.dir = dir;
    }
    if let Some(c) = args.chains {
        ensure!(c > 0, "--chains must be at least 1");
        cfg.run.chains = c;
    }
    let mut data = io::load_dataset(&cfg.data.path, cfg.data.header)?;
    // the echoed config must work from any directory
    cfg.data.path = std::fs::canonicalize(&cfg.data.path)?;
    if let Some(n) = cfg.data.subsample {
        data = data.subsample(n, cfg.seed);
    }
    let digest = io::data_digest(&data);
    let dims = data.dims();
    let n_obs = data.len();
    let obs = observations(&cfg, data)?;
    // fail early on settings the sampler rejects
    cfg.run_config(dims, 0)?;

    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    let chains = cfg.run.chains;
    let file_name = |c: usize| if chains == 1 { "chain.csv".to_string() } else { format!("chain-{c}.csv") };

    let results: Vec<Result<(RunSummary, Vec<ChainRecord>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|c| {
                let (cfg, obs, path) = (&cfg, obs.clone(), dir.join(file_name(c)));
                scope.spawn(move || run_chain(cfg, obs, dims, c, &path))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut pooled: Option<WaicAccumulator> = None;
    for (s, _) in &results {
        if let Some(acc) = &s.waic_state {
            match pooled.as_mut() {
                None => pooled = Some(acc.clone()),
                Some(p) => p.merge(acc)?,
            }
        }
    }
    let records: Vec<&[ChainRecord]> = results.iter().map(|(_, r)| r.as_slice()).collect();
    let mut ess = Vec::new();
    for f in &cfg.report.ess {
        match report::ess_report(f, &records) {
            Ok(Some(r)) => ess.push(r),
            Ok(None) => {}
            Err(e) => log::warn!("no ESS for `{f}`: {e:#}"),
        }
    }
    let baseline = match cfg.baseline_config() {
        None => None,
        Some(b) => {
            let fit = fit_gaussian_copula(obs.points(), &b)?;
            Some(BaselineReport {
                model: "gaussian-copula".into(),
                waic: fit.waic.into(),
                acceptance: fit.acceptance,
                posterior_mean_r: fit.posterior_mean.upper_triangle(),
            })
        }
    };
    let summary = FitSummary {
        data_sha256: digest,
        observations: n_obs,
        dims,
        k: cfg.degree(dims)?.as_slice().to_vec(),
        proposal: cfg.proposal_kind().name().to_string(),
        prior: serde_json::to_value(cfg.prior.kind)?.as_str().unwrap_or_default().to_string(),
        seed: cfg.seed,
        iterations: cfg.run.iterations,
        chains: results
            .iter()
            .enumerate()
            .map(|(c, (s, _))| ChainSummary {
                chain: c,
                file: file_name(c),
                saved: s.saved,
                acceptance: Acceptance { g: s.g.rate(), r: s.r.map(|b| b.rate()), marginals: s.marginals.map(|b| b.rate()) },
                runtime_secs: s.runtime_secs,
                waic: s.waic.map(Into::into),
            })
            .collect(),
        waic: pooled.map(|p| p.finish()).transpose()?.map(Into::into),
        ess,
        baseline,
        clamped_cdf_values: results.iter().map(|(s, _)| s.clamped_cdf_values).max().unwrap_or(0),
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    print_fit(&summary);
    Ok(())
}

fn run_chain(cfg: &Config, obs: Observations, dims: usize, chain: usize, path: &Path) -> Result<(RunSummary, Vec<ChainRecord>)> {
    let rc = cfg.run_config(dims, chain as u64)?;
    let mut sampler = Sampler::new(rc, obs)?;
    let echo = format!(
        "seed={} chain={} proposal={} alpha={} iterations={} burnin={} thin={}",
        cfg.seed,
        chain,
        cfg.proposal_kind().name(),
        cfg.prior.alpha,
        cfg.run.iterations,
        cfg.run.burnin,
        cfg.run.thin
    );
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut writer = ChainWriter::new(BufWriter::new(file), sampler.chain_header(echo))?;
    let mut records = Vec::with_capacity(sampler.config().saved_count());
    let total = cfg.run.iterations.max(1);
    let summary = sampler.run(|rec| {
        writer.write(rec)?;
        if (rec.iteration + 1) % (total / 10).max(1) == 0 {
            log::info!("chain {chain}: iteration {}/{total}", rec.iteration + 1);
        }
        records.push(rec.clone());
        Ok(())
    })?;
    Ok((summary, records))
}

fn print_fit(s: &FitSummary) {
    println!("observations {}  k {:?}  proposal {}  prior {}", s.observations, s.k, s.proposal, s.prior);
    for c in &s.chains {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "chain {}: saved {}  accept G {:.3}  R {}  marginals {}  {:.1}s",
            c.chain,
            c.saved,
            c.acceptance.g,
            opt(c.acceptance.r),
            opt(c.acceptance.marginals),
            c.runtime_secs
        );
    }
    for e in &s.ess {
        println!("ESS {}: min {:.1}  median {:.1}  max {:.1}", e.functional, e.min, e.median, e.max);
    }
    if let Some(w) = &s.waic {
        println!("WAIC {:.3}  (lppd {:.3}, p_waic {:.3})", w.waic, w.lppd, w.p_waic);
    }
    if let Some(b) = &s.baseline {
        println!("{} WAIC {:.3}", b.model, b.waic.waic);
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    ensure!(args.n > 0, "--n must be positive");
    let data = args.model.perfect_sample(args.n)?;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("{}_n{}.csv", args.model, args.n));
    io::write_dataset(BufWriter::new(File::create(&path)?), &data)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseReport {
    chain: String,
    records: usize,
    truncated: bool,
    ess: Vec<EssReport>,
    hellinger: Option<HellingerReport>,
    density_table: Option<String>,
}

#[derive(Serialize)]
struct HellingerReport {
    reference: String,
    value: f64,
}

fn cmd_diagnose(mut args: DiagnoseArgs, seed: Option<u64>) -> Result<()> {
    args.functionals.retain(|f| !f.trim().is_empty());
    ensure!(!args.functionals.is_empty(), "no functionals requested");
    let file = File::open(&args.chain).with_context(|| format!("opening {}", args.chain.display()))?;
    let chain = read_chain(std::io::BufReader::new(file))?;
    ensure!(!chain.records.is_empty(), "{} holds no records", args.chain.display());
    let degree = chain.header.degree.clone();
    let dims = degree.dims();

    let mut ess = Vec::new();
    for f in &args.functionals {
        match report::ess_report(f, &[&chain.records])? {
            Some(r) => ess.push(r),
            None => log::warn!("functional `{f}` is empty for this chain"),
        }
    }
    let mut acc = PosteriorMean::new();
    for r in &chain.records {
        acc.push(&r.copula(&degree)?)?;
    }
    let mean = acc.mean()?;
    let bernstein = BernsteinCopula::new(&mean);

    let hellinger = match args.model {
        None => None,
        Some(m) => {
            ensure!(dims == 2, "built-in reference models are bivariate");
            let mix = m.mixture();
            let quad = match (Quadrature::default_for(dims), seed) {
                (Quadrature::Qmc { points, .. }, Some(s)) => Quadrature::Qmc { points, seed: s },
                (q, _) => q,
            };
            let value = hellinger(|z| bernstein.density(z), |z| mix.copula_density(z), dims, quad);
            Some(HellingerReport { reference: m.to_string(), value })
        }
    };

    let out = match args.out {
        Some(d) => d,
        None => args.chain.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&out)?;
    let density_table = if dims == 2 {
        ensure!(args.grid > 0, "--grid must be positive");
        let pts = grid_points(args.grid);
        let path = out.join("posterior_density.csv");
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
        w.write_record(["u1", "u2", "density"])?;
        for z in pts.rows() {
            w.write_record([z[0].to_string(), z[1].to_string(), format!("{:.10e}", bernstein.density(z))])?;
        }
        w.flush()?;
        Some(path.display().to_string())
    } else {
        None
    };
    let report = DiagnoseReport {
        chain: args.chain.display().to_string(),
        records: chain.records.len(),
        truncated: chain.truncated,
        ess,
        hellinger,
        density_table,
    };
    write_json(&out.join("diagnose.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CompareRow {
    rank: usize,
    source: String,
    model: String,
    waic: f64,
    /// Within the tie tolerance of the row above.
    tie: bool,
}

fn load_summary(path: &Path) -> Result<FitSummary> {
    let file = if path.is_dir() { path.join(SUMMARY_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    ensure!(args.tie >= 0.0, "--tie must be non-negative");
    let mut rows = Vec::new();
    let mut digest: Option<String> = None;
    for path in &args.fits {
        let s = load_summary(path)?;
        match &digest {
            None => digest = Some(s.data_sha256.clone()),
            Some(d) if *d != s.data_sha256 => {
                bail!("{} was fitted to different data than {}", path.display(), args.fits[0].display())
            }
            _ => {}
        }
        let source = path.display().to_string();
        match s.waic {
            Some(WaicReport { waic, .. }) => rows.push(CompareRow {
                rank: 0,
                source: source.clone(),
                model: format!("bernstein k={:?} {} {}", s.k, s.proposal, s.prior),
                waic,
                tie: false,
            }),
            None => log::warn!("{source} has no WAIC"),
        }
        if let Some(b) = s.baseline {
            rows.push(CompareRow { rank: 0, source, model: b.model, waic: b.waic.waic, tie: false });
        }
    }
    ensure!(rows.len() >= 2, "need at least two models with a WAIC");
    rows.sort_by(|a, b| a.waic.total_cmp(&b.waic));
    for i in 0..rows.len() {
        rows[i].rank = i + 1;
        rows[i].tie = i > 0 && rows[i].waic - rows[i - 1].waic < args.tie;
    }
    println!("{:>4}  {:>12}  {:<5} model (source)", "rank", "WAIC", "tie");
    for r in &rows {
        println!("{:>4}  {:>12.3}  {:<5} {} ({})", r.rank, r.waic, if r.tie { "yes" } else { "" }, r.model, r.source);
    }
    if let Some(out) = args.out {
        std::fs::create_dir_all(&out)?;
        write_json(&out.join("compare.json"), &rows)?;
    }
    Ok(())
}
