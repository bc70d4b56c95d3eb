use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sigcomm::matrix::write_matrix_csv;
use sigcomm::pipeline::{self, parse_list, Algorithm, FilterKind, Method, RunConfig};
use sigcomm::similarity::{Gamma, FeatureScaling, PathInput};
use sigcomm::spectral::rmt_decompose;
use sigcomm::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "sigcomm", version, about = "Signature-based community detection for time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the method × filter × algorithm grid and write grid/partition/spectrum files.
    Run(Shared),
    /// Re-run the grid on growing prefixes of the panel and write stability.csv.
    Stability(Shared),
    /// Generate a planted-block synthetic price panel.
    Synth(SynthArgs),
    /// Write the dependence matrices and their eigenvalue reports.
    Spectrum(Shared),
}

#[derive(Args, Debug, Default)]
struct Shared {
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    sectors: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Signature truncation depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Comma separated: correlation, sig-ed, sig-cs, sig-rbf.
    #[arg(long)]
    methods: Option<String>,
    /// Comma separated: threshold, rmt.
    #[arg(long)]
    filters: Option<String>,
    /// Comma separated: louvain, greedy.
    #[arg(long)]
    algos: Option<String>,
    #[arg(long, conflicts_with = "target_density", allow_hyphen_values = true)]
    threshold: Option<f64>,
    #[arg(long)]
    target_density: Option<f64>,
    /// Positive number or `median`.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    start_frac: Option<f64>,
    #[arg(long)]
    step: Option<usize>,
    #[arg(long)]
    min_coverage: Option<f64>,
    /// Lead-lag the raw returns instead of their cumulative sum.
    #[arg(long)]
    raw_increments: bool,
    /// Z-score signature features column-wise before comparing them.
    #[arg(long)]
    standardize_features: bool,
    /// Visit Louvain nodes in seeded random order.
    #[arg(long)]
    shuffle: bool,
    /// Also write signatures.csv (`ticker,word,coefficient`).
    #[arg(long)]
    dump_signatures: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    n_series: usize,
    /// Number of price observations per series.
    #[arg(long, default_value_t = 2000)]
    n_obs: usize,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 0.8)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synth")]
    out: PathBuf,
}

impl Shared {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.prices {
            cfg.prices = Some(p);
        }
        if let Some(p) = self.sectors {
            cfg.sectors = Some(p);
        }
        if let Some(p) = self.out {
            cfg.out = p;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.depth {
            cfg.depth = d;
        }
        if let Some(m) = self.methods {
            cfg.methods = parse_list::<Method>(&m)?;
        }
        if let Some(f) = self.filters {
            cfg.filters = parse_list::<FilterKind>(&f)?;
        }
        if let Some(a) = self.algos {
            cfg.algos = parse_list::<Algorithm>(&a)?;
        }
        // a flag replaces whichever threshold rule the file chose
        if let Some(t) = self.threshold {
            cfg.threshold = Some(t);
            cfg.target_density = None;
        }
        if let Some(d) = self.target_density {
            cfg.target_density = Some(d);
            cfg.threshold = None;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g.parse::<Gamma>()?;
        }
        if let Some(f) = self.start_frac {
            cfg.start_frac = f;
        }
        if let Some(s) = self.step {
            cfg.step = Some(s);
        }
        if let Some(c) = self.min_coverage {
            cfg.min_coverage = c;
        }
        if self.raw_increments {
            cfg.path_input = PathInput::Increments;
        }
        if self.standardize_features {
            cfg.feature_scaling = FeatureScaling::Standardize;
        }
        cfg.shuffle |= self.shuffle;
        cfg.dump_signatures |= self.dump_signatures;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(shared: Shared) -> Result<()> {
    let cfg = shared.into_config()?;
    let results = pipeline::run_grid(&cfg)?;
    for cell in &results.cells {
        match (cell.modularity, cell.clusters) {
            (Some(q), Some(k)) => println!("{:<32} q = {q:.4}  K = {k}", cell.name()),
            _ => println!(
                "{:<32} failed: {}",
                cell.name(),
                cell.reason.as_deref().unwrap_or("unknown")
            ),
        }
    }
    pipeline::emit_report(&results, &cfg.out)?;
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn stability(shared: Shared) -> Result<()> {
    let cfg = shared.into_config()?;
    let curve = pipeline::stability_analysis(&cfg)?;
    println!("windows: {:?}", curve.windows());
    pipeline::emit_stability(&curve, &cfg.out)?;
    println!("wrote {}", cfg.out.join("stability.csv").display());
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let panel = pipeline::synth_panel(args.n_series, args.n_obs, args.blocks, args.rho, args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Config(format!("{}: {e}", args.out.display())))?;
    panel.prices.write_csv(args.out.join("prices.csv"))?;
    panel.block_sectors().write_csv(args.out.join("sectors.csv"))?;
    println!(
        "wrote {} series x {} dates to {}",
        panel.prices.n_series(),
        panel.prices.n_dates(),
        args.out.display()
    );
    Ok(())
}

fn spectrum(shared: Shared) -> Result<()> {
    let cfg = shared.into_config()?;
    let data = pipeline::load_dataset(&cfg)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::Config(format!("{}: {e}", cfg.out.display())))?;
    for &method in &cfg.methods {
        let matrix = pipeline::build_matrix(method, &data.returns, &cfg)?;
        write_matrix_csv(cfg.out.join(format!("matrix_{method}.csv")), data.returns.tickers(), matrix.values())?;
        let split = rmt_decompose(&matrix, data.returns.n_obs())?;
        let report = split.report(matrix.kind());
        let path = cfg.out.join(format!("spectrum_{method}.json"));
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        println!(
            "{method:<12} λ_max = {:.4}  λ+ = {:.4}  structure eigenvalues = {}",
            report.lambda_max, report.lambda_plus, report.counts.structure
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(s) => run(s),
        Command::Stability(s) => stability(s),
        Command::Synth(a) => synth(a),
        Command::Spectrum(s) => spectrum(s),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
