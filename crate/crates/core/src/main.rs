use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lsisvm::corpus::{self, CorpusFormat, RawDocument, ScrubRules};
use lsisvm::nusvm::{BalancingStrategy, SolverConfig};
use lsisvm::pipeline::{self, PipelineConfig, PipelineError, PAPER_GAMMA_GRID, PAPER_NU_GRID};
use lsisvm::Weighting;

#[derive(Parser)]
#[command(
    name = "lsisvm",
    version,
    about = "Genre classification of short descriptions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a CSV or JSONL corpus and rewrite it as JSONL.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit the full pipeline and save the model.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Predict labels; writes `id,label,votes` CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-validate one configuration; prints the report as JSON.
    Cv {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Cross-validate every (gamma, nu) pair and write reports.
    GridSearch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated; defaults to the 24-value grid.
        #[arg(long, value_delimiter = ',')]
        gamma_grid: Option<Vec<f64>>,
        /// Comma-separated; defaults to the 17-value grid.
        #[arg(long, value_delimiter = ',')]
        nu_grid: Option<Vec<f64>>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write a synthetic labeled corpus as JSONL.
    GenCorpus {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        num_classes: usize,
        #[arg(long, default_value_t = 10)]
        docs_per_class: usize,
        #[arg(long, default_value_t = 100)]
        vocab_size: usize,
        #[arg(long, default_value_t = 5)]
        keywords_per_class: usize,
        #[arg(long, default_value_t = 0.2)]
        noise_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Balancing {
    None,
    Oversample,
    InverseWeights,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value_t = Weighting::Probability)]
    weighting: Weighting,
    #[arg(long, default_value_t = 0.0035)]
    mi_threshold_bits: f64,
    #[arg(long, default_value_t = 100)]
    mi_bins: usize,
    #[arg(long, default_value_t = 2400)]
    k_latent: usize,
    #[arg(long, default_value_t = 3.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.025)]
    nu: f64,
    #[arg(long, value_enum, default_value_t = Balancing::None)]
    balancing: Balancing,
    #[arg(long, default_value_t = 20)]
    folds: usize,
    #[arg(long)]
    unstratified: bool,
    #[arg(long)]
    fit_transform_once: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file with `company_names` and `ad_patterns`.
    #[arg(long)]
    scrub_rules: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 10_000_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 100)]
    cache_mb: usize,
    /// JSON object of config fields; its keys override the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

enum Failure {
    Data(String),
    Search(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_infeasible() {
            Failure::Search(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<corpus::CorpusError> for Failure {
    fn from(e: corpus::CorpusError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, Failure> {
        let scrub_rules = match &self.scrub_rules {
            Some(p) => ScrubRules::load(p)?,
            None => ScrubRules::default(),
        };
        let flags = PipelineConfig {
            weighting: self.weighting,
            mi_threshold_bits: self.mi_threshold_bits,
            mi_bins: self.mi_bins,
            k_latent: self.k_latent,
            gamma: self.gamma,
            nu: self.nu,
            balancing: match self.balancing {
                Balancing::None => BalancingStrategy::None,
                Balancing::Oversample => BalancingStrategy::Oversample { seed: self.seed },
                Balancing::InverseWeights => BalancingStrategy::InverseWeights,
            },
            folds: self.folds,
            stratified: !self.unstratified,
            fit_transform_once: self.fit_transform_once,
            seed: self.seed,
            scrub_rules,
            solver: SolverConfig {
                eps: self.eps,
                max_iter: self.max_iter,
                cache_mb: self.cache_mb,
            },
        };
        let Some(path) = &self.config else {
            return Ok(flags);
        };
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let overrides: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let serde_json::Value::Object(overrides) = overrides else {
            return Err(Failure::Data(format!(
                "{}: expected a JSON object",
                path.display()
            )));
        };
        let mut merged = serde_json::to_value(&flags).expect("config serializes");
        let target = merged.as_object_mut().expect("config is an object");
        for (k, v) in overrides {
            target.insert(k, v);
        }
        let mut config: PipelineConfig = serde_json::from_value(merged)
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        // the character set is never part of the JSON form
        config.scrub_rules.remove_chars = ScrubRules::default().remove_chars;
        Ok(config)
    }
}

fn load_docs(path: &Path) -> Result<Vec<RawDocument>, Failure> {
    Ok(corpus::load_corpus(path, CorpusFormat::from_path(path))?)
}

fn write_jsonl(path: &Path, docs: &[RawDocument]) -> Result<(), Failure> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d).expect("document serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest { input, output } => {
            let docs = load_docs(&input)?;
            write_jsonl(&output, &docs)?;
            log::info!("wrote {} documents to {}", docs.len(), output.display());
        }
        Command::Train {
            input,
            model,
            config,
        } => {
            let config = config.resolve()?;
            let docs = load_docs(&input)?;
            let fitted = pipeline::fit(&docs, &config)?;
            pipeline::save_model(&fitted, &model)?;
            log::info!(
                "model: {} terms, k = {}, {} support vectors",
                fitted.features.vocabulary.len(),
                fitted.features.projector.k(),
                fitted.classifier.total_support_vectors
            );
        }
        Command::Predict {
            model,
            input,
            output,
        } => {
            let model = pipeline::load_model(&model)?;
            let docs = load_docs(&input)?;
            let sink: Box<dyn Write> = match &output {
                Some(p) => Box::new(fs::File::create(p).map_err(|e| io_err(p, e))?),
                None => Box::new(io::stdout().lock()),
            };
            let mut w = csv::Writer::from_writer(sink);
            let csv_err = |e: csv::Error| Failure::Data(e.to_string());
            w.write_record(["id", "label", "votes"]).map_err(csv_err)?;
            for d in &docs {
                let p = model.predict_document(d);
                let votes = p
                    .votes
                    .iter()
                    .map(|(c, n)| format!("{c}={n}"))
                    .collect::<Vec<_>>()
                    .join(";");
                w.write_record([d.id.as_str(), p.label.as_str(), votes.as_str()])
                    .map_err(csv_err)?;
            }
            w.flush().map_err(|e| Failure::Data(e.to_string()))?;
        }
        Command::Cv { input, config } => {
            let config = config.resolve()?;
            let docs = load_docs(&input)?;
            let report = pipeline::cross_validate(&docs, &config)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
        }
        Command::GridSearch {
            input,
            out_dir,
            gamma_grid,
            nu_grid,
            config,
        } => {
            let config = config.resolve()?;
            let docs = load_docs(&input)?;
            let gammas = gamma_grid.unwrap_or_else(|| PAPER_GAMMA_GRID.to_vec());
            let nus = nu_grid.unwrap_or_else(|| PAPER_NU_GRID.to_vec());
            let grid = pipeline::grid_search(&docs, &gammas, &nus, &config)?;

            let (singular_values, scatter) = match grid.best_row() {
                Some(best) => {
                    let cfg = PipelineConfig {
                        gamma: best.gamma,
                        nu: best.nu,
                        ..config.clone()
                    };
                    let h = pipeline::holdout_scatter(&docs, &cfg, 0.7)?;
                    log::info!("70:30 holdout accuracy {:.4}", h.test_accuracy);
                    (h.model.features.projector.d.clone(), h.points)
                }
                None => (Vec::new(), Vec::new()),
            };
            pipeline::emit_reports(&grid, &singular_values, &scatter, &out_dir)?;
            let json_path = out_dir.join("grid.json");
            fs::write(
                &json_path,
                serde_json::to_string_pretty(&grid).expect("report serializes"),
            )
            .map_err(|e| io_err(&json_path, e))?;

            match grid.best_row() {
                Some(best) => println!(
                    "best gamma={} nu={} mean_accuracy={:.4} std={:.4} mean_support_vectors={}",
                    best.gamma,
                    best.nu,
                    best.mean_accuracy.unwrap_or(f64::NAN),
                    best.std_accuracy.unwrap_or(f64::NAN),
                    best.mean_support_vectors.unwrap_or(f64::NAN)
                ),
                None => return Err(Failure::Search("no grid cell trained successfully".into())),
            }
        }
        Command::GenCorpus {
            output,
            num_classes,
            docs_per_class,
            vocab_size,
            keywords_per_class,
            noise_ratio,
            seed,
        } => {
            let docs = pipeline::generate_synthetic_corpus(
                num_classes,
                docs_per_class,
                vocab_size,
                keywords_per_class,
                noise_ratio,
                seed,
            )?;
            write_jsonl(&output, &docs)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Search(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
