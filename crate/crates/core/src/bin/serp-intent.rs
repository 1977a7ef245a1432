use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use serp_intent::evaluate::{load_dataset, ConfusionMatrix};
use serp_intent::features::FeatureMatrix;
use serp_intent::pipeline::{self, PipelineConfig};
use serp_intent::tagger::IntentLexicon;

#[derive(Parser)]
#[command(name = "serp-intent", version, about = "Query intent mining from search engine result pages")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON). Relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the train/test split and KMeans.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of clusters.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    test_fraction: Option<f64>,
    /// Correlation pruning threshold.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    top_n: Option<usize>,
    #[arg(long, global = true)]
    min_count: Option<usize>,
    /// SERP endpoint queried by `fetch`.
    #[arg(long, global = true)]
    endpoint: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch every dataset query and store the raw pages.
    Fetch {
        /// Comma-separated proxy URLs; overrides the config.
        #[arg(long, env = "SERP_PROXIES")]
        proxies: Option<String>,
    },
    /// Parse raw pages into canonical SERP documents.
    Parse,
    /// Build the feature matrix and its correlation-pruned copy.
    Extract,
    /// Split, fit KMeans on the train rows, assign the test rows.
    Cluster,
    /// Pick k by the elbow of the wcss curve.
    Elbow {
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        /// Feature CSV (first column = row label); defaults to the pruned matrix.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Per-cluster feature profiles.
    Profile,
    /// Word frequencies, keyword sets and the tagging lexicon.
    Keywords,
    /// Tag queries with the lexicon.
    Tag {
        /// Dataset TSV to tag; defaults to the test split.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Confusion matrix and per-class precision/recall.
    Eval {
        /// Evaluate a stored confusion matrix instead of pipeline outputs.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// parse, extract, cluster, profile, keywords, tag and eval in one go.
    Pipeline,
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => {
            let mut c = PipelineConfig::default();
            c.rebase(&std::env::current_dir()?);
            c
        }
    };
    if let Some(seed) = common.seed {
        config.kmeans.seed = seed;
    }
    if let Some(k) = common.k {
        config.kmeans.k = k;
    }
    if let Some(f) = common.test_fraction {
        config.test_fraction = f;
    }
    if let Some(t) = common.threshold {
        config.correlation_threshold = t;
    }
    if let Some(n) = common.top_n {
        config.keywords.top_n = n;
    }
    if let Some(n) = common.min_count {
        config.keywords.min_count = n;
    }
    if let Some(e) = &common.endpoint {
        config.fetch.endpoint_url = e.clone();
    }
    Ok(config)
}

fn out(config: &PipelineConfig, name: &str) -> PathBuf {
    config.paths.output_dir.join(name)
}

fn read_full(config: &PipelineConfig) -> Result<FeatureMatrix> {
    Ok(pipeline::read_matrix(&out(config, pipeline::FEATURES_CSV), &config.spec()?)?)
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli.common)?;
    match cli.command {
        Command::Fetch { proxies } => {
            config.validate()?;
            let summary = pipeline::run_fetch(&config, proxies.as_deref())?;
            println!(
                "fetched {} ok, {} captcha, {} network errors",
                summary.ok,
                summary.captcha.len(),
                summary.network_error.len()
            );
            if summary.ok == 0 && !(summary.captcha.is_empty() && summary.network_error.is_empty()) {
                bail!("no query could be fetched");
            }
        }
        Command::Parse => {
            let s = pipeline::run_parse(&config)?;
            println!("parsed {}, missing {}, captcha {}", s.parsed, s.missing.len(), s.captcha.len());
        }
        Command::Extract => {
            config.validate()?;
            let (full, _, pruned) = pipeline::run_extract(&config)?;
            println!("{} rows x {} features", full.len(), full.width());
            println!("kept: {}", pruned.kept.join(", "));
            println!("dropped: {}", pruned.dropped.join(", "));
        }
        Command::Cluster => {
            config.validate()?;
            let pruned = pipeline::read_matrix(&out(&config, pipeline::PRUNED_CSV), &config.spec()?)?;
            let c = pipeline::run_cluster(&config, &pruned)?;
            println!(
                "k={} wcss={:.6} iterations={} train={} test={}",
                c.model.k,
                c.model.wcss,
                c.model.iterations_run,
                c.train_queries.len(),
                c.test_queries.len()
            );
        }
        Command::Elbow { k_min, k_max, input } => {
            if let Some(k) = k_min {
                config.elbow.k_min = k;
            }
            if let Some(k) = k_max {
                config.elbow.k_max = k;
            }
            config.validate()?;
            let path = input.unwrap_or_else(|| out(&config, pipeline::PRUNED_CSV));
            let m = pipeline::read_matrix(&path, &config.spec()?)?;
            let e = pipeline::run_elbow(&config, &m)?;
            for ((k, w), d) in e.k_values.iter().zip(&e.wcss_values).zip(&e.chord_distances) {
                println!("k={k} wcss={w:.6} distance={d:.6}");
            }
            println!("selected_k {}", e.selected_k);
        }
        Command::Profile => {
            let assignments = pipeline::read_assignments(&out(&config, pipeline::ASSIGNMENTS_CSV))?;
            let profiles = pipeline::run_profile(&config, &read_full(&config)?, &assignments)?;
            for p in profiles {
                println!("cluster {} (n={})", p.cluster_id, p.size);
                for (name, v) in &p.binary_pct {
                    println!("  {name:<28}{:>8.1}%", v * 100.0);
                }
                for (name, v) in &p.numeric_mean {
                    println!("  {name:<28}{v:>9.3}");
                }
            }
        }
        Command::Keywords => {
            config.validate()?;
            let assignments = pipeline::read_assignments(&out(&config, pipeline::ASSIGNMENTS_CSV))?;
            let profiles = pipeline::run_profile(&config, &read_full(&config)?, &assignments)?;
            let (sets, _) = pipeline::run_keywords(&config, &profiles, &assignments)?;
            for s in sets {
                let words: Vec<&str> = s.keywords.iter().map(String::as_str).collect();
                println!("{}: {}", s.intent, words.join(" "));
            }
        }
        Command::Tag { input } => {
            let lexicon = IntentLexicon::from_json(&read_file(&out(&config, pipeline::LEXICON_JSON))?)?;
            let queries: Vec<String> = match input {
                Some(path) => load_dataset(&path)?.into_iter().map(|r| r.query).collect(),
                None => pipeline::read_assignments(&out(&config, pipeline::TEST_ASSIGNMENTS_CSV))?
                    .into_iter()
                    .map(|(q, _)| q)
                    .collect(),
            };
            for t in pipeline::run_tag(&config, &lexicon, &queries)? {
                println!("{}\t{}", t.query, t.intent);
            }
        }
        Command::Eval { matrix } => {
            let table = match matrix {
                Some(path) => {
                    let cm = ConfusionMatrix::from_json(&read_file(&path)?)?;
                    let (report, table) = pipeline::report_metrics(&cm)?;
                    print!("{}", report.to_json());
                    table
                }
                None => {
                    let test = pipeline::read_assignments(&out(&config, pipeline::TEST_ASSIGNMENTS_CSV))?;
                    let tags = pipeline::read_tags(&out(&config, pipeline::TAGS_CSV))?;
                    pipeline::run_eval(&config, &test, &tags)?.2
                }
            };
            print!("{table}");
        }
        Command::Pipeline => {
            let s = pipeline::run_pipeline(&config)?;
            println!(
                "parsed {} pages; kept {} of {} features; k={} wcss={:.6}",
                s.parse.parsed,
                s.pruned.kept.len(),
                s.pruned.kept.len() + s.pruned.dropped.len(),
                s.cluster.model.k,
                s.cluster.model.wcss
            );
            print!("{}", s.table);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
