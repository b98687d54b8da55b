use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bitfold_harness::{
    capacity_table, format_table, predict_traffic, run_experiment, selftest, ExperimentConfig, HarnessError, Overrides,
    TransportKind,
};

#[derive(Parser)]
#[command(name = "bitfold", version, about = "Encrypted federated averaging with packed updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write metrics.csv and summary.json.
    Run(CommonArgs),
    /// Print slot capacity, ciphertext count and expansion per beta.
    Capacity {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated quantization widths.
        #[arg(long, value_delimiter = ',', default_value = "6,8,12")]
        betas: Vec<u32>,
        /// Weights in the reference model.
        #[arg(long, default_value_t = 61_706)]
        reference_weights: usize,
    },
    /// Print the predicted per-round traffic of one client as JSON.
    PredictTraffic(CommonArgs),
    /// Run the quick invariant checks.
    Selftest {
        /// Directory for the short runs' output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Mem,
    Socket,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    beta: Option<u32>,
    #[arg(long)]
    delta: Option<u32>,
    /// Total clients.
    #[arg(long)]
    clients: Option<usize>,
    /// Clients aggregated per round.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, value_enum)]
    transport: Option<TransportArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip packing and encryption; average quantized integers directly.
    #[arg(long)]
    plaintext_control: bool,
}

impl CommonArgs {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        Overrides {
            seed: self.seed,
            rounds: self.rounds,
            beta: self.beta,
            delta: self.delta,
            clients: self.clients,
            sample: self.sample,
            transport: self.transport.map(|t| match t {
                TransportArg::Mem => TransportKind::Mem,
                TransportArg::Socket => TransportKind::Socket,
            }),
            out: self.out.clone(),
            plaintext_control: self.plaintext_control,
        }
        .apply(&mut config);
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Run(args) => {
            let config = args.load()?;
            let report = run_experiment(&config)?;
            println!("{}", serde_json::to_string_pretty(&report.summary)?);
            println!("wrote {} and {}", report.metrics_path.display(), report.summary_path.display());
        }
        Command::Capacity { common, betas, reference_weights } => {
            let config = common.load()?;
            let ctx = config.ring()?;
            let rows = capacity_table(&ctx, config.sample as u64, &betas, config.delta, reference_weights);
            print!("{}", format_table(&rows, reference_weights));
        }
        Command::PredictTraffic(args) => {
            let config = args.load()?;
            config.validate()?;
            let p = predict_traffic(&config.schema()?, &*config.ring()?);
            println!("{}", serde_json::to_string_pretty(&p)?);
        }
        Command::Selftest { out } => {
            let dir =
                out.unwrap_or_else(|| std::env::temp_dir().join(format!("bitfold-selftest-{}", std::process::id())));
            let checks = selftest::run_selftest(&dir);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
