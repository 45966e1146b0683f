use automine::cluster::{self, select_algorithm, Algorithm, ClusterModel, DataSummary};
use automine::dataset::{self, generate_blobs, generate_student_data, load_csv, write_csv, Dataset, IngestError};
use automine::detection::{detect_good_clusters, QualityReport};
use automine::pipeline::{
    artifact_bytes, build_plots, choose_k, prepare_data, read_artifact, run_pipeline_with, svg_name, write_file,
    MineRequest, Overrides, PipelineConfig, PipelineError, PlotSet, Stage,
};
use automine::profile::{tokenize, PatternSummary, ProfileStore};
use automine::ranking::rank_attributes;
use automine::viz;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "automine", version, about = "Automated clustering sessions over tabular data")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    user: Option<String>,
    #[arg(long, global = true)]
    objective: Option<String>,
    /// Profile store file.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic student dataset (or planted blobs) as CSV.
    GenData {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Generate this many 2-D Gaussian blobs instead of student records.
        #[arg(long)]
        blobs: Option<usize>,
        #[arg(long, default_value_t = 8.0)]
        separation: f64,
        /// Output file; defaults to data.csv in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a CSV file and report inferred attribute types.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Rank attributes for an objective.
    Rank {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        top: Option<usize>,
    },
    /// Cluster the chosen attributes.
    Cluster {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated attribute names.
        #[arg(long, value_delimiter = ',', required = true)]
        attrs: Vec<String>,
        #[arg(long, default_value = "auto")]
        algorithm: String,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Judge the clusters of a model.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Emit plot specs and SVG charts for a model.
    Viz {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        quality: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the full session: profile, ranking, clustering, detection, charts.
    Mine {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        /// Reuse the N-th suggested pattern (1-based).
        #[arg(long)]
        use_suggestion: Option<usize>,
        /// Comma-separated attributes, bypassing the ranking's choice.
        #[arg(long, value_delimiter = ',')]
        attrs: Option<Vec<String>>,
        /// Do not mark the session as accepted.
        #[arg(long)]
        no_accept: bool,
        /// Prompt for a suggestion when a terminal is attached.
        #[arg(long)]
        interactive: bool,
    },
    /// Inspect the profile store.
    Profile {
        #[command(subcommand)]
        action: ProfileAction,
    },
}

#[derive(Subcommand)]
enum ProfileAction {
    /// Print a user's stored sessions as JSON.
    Show,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn data(message: impl ToString) -> Self {
        Self { code: 3, message: message.to_string() }
    }

    fn stage(stage: Stage, message: impl ToString) -> Self {
        Self { code: 4, message: format!("stage {stage} failed: {}", message.to_string()) }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Self { code: e.exit_code() as u8, message: e.to_string() }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Self::data(e)
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn config(common: &Common) -> Result<PipelineConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(store) = &common.store {
        config.store_path = store.clone();
    }
    Ok(config)
}

fn load(config: &PipelineConfig, path: &Path) -> Result<Dataset, Failure> {
    Ok(load_csv(path, config.ingest.delimiter_byte()?, config.ingest.has_header)?)
}

fn save<T: Serialize>(out_dir: &Path, name: &str, body: &T) -> Result<PathBuf, Failure> {
    let path = out_dir.join(name);
    write_file(&path, &artifact_bytes(body))?;
    Ok(path)
}

fn parse_algorithm(s: &str) -> Result<Option<Algorithm>, Failure> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    s.parse().map(Some).map_err(Failure::usage)
}

fn required<'a>(value: &'a Option<String>, flag: &str) -> Result<&'a str, Failure> {
    value.as_deref().ok_or_else(|| Failure::usage(format!("{flag} is required for this command")))
}

fn run(cli: Cli) -> CliResult {
    let common = &cli.common;
    let config = config(common)?;
    let out_dir = &common.out_dir;
    match cli.command {
        Command::GenData { n, blobs, separation, out } => {
            let ds = match blobs {
                Some(k) => generate_blobs(n, k, separation, config.seed)?.0,
                None => generate_student_data(n, config.seed)?,
            };
            let path = out.unwrap_or_else(|| out_dir.join("data.csv"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
            }
            write_csv(&ds, &path, config.ingest.delimiter_byte()?)?;
            println!("wrote {} records to {}", ds.n(), path.display());
        }
        Command::Ingest { input } => {
            let ds = load(&config, &input)?;
            println!("{} records, {} attributes", ds.n(), ds.attributes().len());
            for a in ds.attributes() {
                println!("{:<20} {:<12} distinct {:<6} missing {:.3}", a.name, format!("{:?}", a.kind), a.cardinality, a.missing_ratio);
            }
            #[derive(Serialize)]
            struct Attributes<'a> {
                n: usize,
                attributes: &'a [dataset::AttributeMeta],
            }
            save(out_dir, "attributes.json", &Attributes { n: ds.n(), attributes: ds.attributes() })?;
        }
        Command::Rank { input, top } => {
            let ds = load(&config, &input)?;
            let objective = required(&common.objective, "--objective")?;
            let store = ProfileStore::open(&config.store_path).map_err(Failure::data)?;
            let history = common.user.as_deref().map_or(&[][..], |u| store.history(u));
            let ranked = rank_attributes(&ds, &tokenize(objective), history, top.unwrap_or(config.ranking.top), config.ranking.weights())
                .map_err(|e| Failure::stage(Stage::Ranking, e))?;
            println!("{:>4}  {:<20} {:>8} {:>8} {:>8}", "rank", "attribute", "type", "query", "combined");
            for r in &ranked.ranks {
                println!("{:>4}  {:<20} {:>8.4} {:>8.4} {:>8.4}", r.rank, r.name, r.type_score, r.query_weight, r.combined);
            }
            println!("selected: {}", ranked.selected.join(", "));
            save(out_dir, "ranks.json", &ranked)?;
        }
        Command::Cluster { input, attrs, algorithm, k } => {
            let ds = load(&config, &input)?;
            let stage = |e| Failure::stage(Stage::ClusterFormation, e);
            let (projected, data) = prepare_data(&ds, &attrs, config.ingest.missing).map_err(stage)?;
            let algorithm = match parse_algorithm(&algorithm)? {
                Some(a) => a,
                None => {
                    let kinds = attrs.iter().map(|a| projected.attribute(a).unwrap().kind).collect();
                    select_algorithm(&DataSummary { n: data.n(), kinds }, None, &config.selection)
                        .map_err(|e| stage(e.into()))?
                }
            };
            let k = match k.or(config.clustering.k) {
                Some(k) => k,
                None => choose_k(&data, algorithm, &config.clustering, config.seed).map_err(|e| stage(e.into()))?.0,
            };
            let model =
                cluster::run(&data, &config.clustering.spec(algorithm, k, config.seed)).map_err(|e| stage(e.into()))?;
            println!("{} k={} objective {:.6} after {} iteration(s); sizes {:?}", algorithm, k, model.objective, model.iterations_run, model.cluster_sizes());
            save(out_dir, "model.json", &model)?;
        }
        Command::Detect { model, input } => {
            let model: ClusterModel = read_artifact(&model)?;
            let ds = load(&config, &input)?;
            let (_, data) = prepare_data(&ds, &model.selected_attributes, config.ingest.missing)
                .map_err(|e| Failure::stage(Stage::ClusterDetection, e))?;
            let quality = detect_good_clusters(&model, &data, &config.detection)
                .map_err(|e| Failure::stage(Stage::ClusterDetection, e))?;
            print_quality(&quality);
            save(out_dir, "quality.json", &quality)?;
        }
        Command::Viz { model, quality, input } => {
            let model: ClusterModel = read_artifact(&model)?;
            let quality: QualityReport = read_artifact(&quality)?;
            let ds = load(&config, &input)?;
            let fail = |e: String| Failure::stage(Stage::Visualization, e);
            let (projected, _) = prepare_data(&ds, &model.selected_attributes, config.ingest.missing)
                .map_err(|e| fail(e.to_string()))?;
            let plots = build_plots(&projected, &model.selected_attributes, &model, &quality, config.seed)
                .map_err(|e| fail(e.to_string()))?;
            if config.viz.svg {
                for (i, spec) in plots.iter().enumerate() {
                    let path = out_dir.join(svg_name(i + 1, spec));
                    viz::render_svg(spec, &path).map_err(|e| fail(e.to_string()))?;
                    println!("wrote {}", path.display());
                }
            }
            let path = save(out_dir, "plotspec.json", &PlotSet { plots })?;
            println!("wrote {}", path.display());
        }
        Command::Mine { input, algorithm, k, use_suggestion, attrs, no_accept, interactive } => {
            let request = MineRequest {
                user_id: required(&common.user, "--user")?.to_string(),
                objective: required(&common.objective, "--objective")?.to_string(),
                data_path: input,
                out_dir: out_dir.clone(),
                overrides: Overrides {
                    algorithm: algorithm.as_deref().map(parse_algorithm).transpose()?.flatten(),
                    k,
                    use_suggestion,
                    attributes: attrs,
                    no_accept,
                },
            };
            let prompt = interactive && std::io::stdin().is_terminal();
            let report = run_pipeline_with(&config, &request, |suggestions| {
                if prompt && !suggestions.is_empty() {
                    print_suggestions(suggestions);
                    ask_suggestion(suggestions.len())
                } else {
                    None
                }
            })?;
            if !prompt {
                print_suggestions(&report.suggestions);
            }
            if let Some(i) = report.used_suggestion {
                println!("using suggestion {i}");
            }
            println!("selected attributes: {}", report.selected_attributes.join(", "));
            if let Some(m) = &report.model {
                println!("{} k={} objective {:.6}", m.algorithm, m.k, m.objective);
            }
            if let Some(q) = &report.quality {
                print_quality(q);
            }
            println!("session {} {}", report.session.session_id, if report.accepted { "accepted" } else { "not accepted" });
            println!("artifacts in {}", out_dir.display());
        }
        Command::Profile { action: ProfileAction::Show } => {
            let user = required(&common.user, "--user")?;
            let store = ProfileStore::open(&config.store_path).map_err(Failure::data)?;
            let profile = store.profile(user).ok_or_else(|| Failure::data(format!("no profile for user {user:?}")))?;
            println!("{}", serde_json::to_string_pretty(profile).expect("profile serializes"));
        }
    }
    Ok(())
}

fn print_quality(q: &QualityReport) {
    println!("overall silhouette {:.4}; {} good cluster(s)", q.overall_silhouette, q.good_count);
    for c in &q.per_cluster {
        println!("  cluster {:<3} size {:<6} silhouette {:>7.4} {:?}", c.cluster_id, c.size, c.silhouette, c.verdict);
    }
}

fn print_suggestions(suggestions: &[PatternSummary]) {
    if suggestions.is_empty() {
        println!("no suggestions from history");
        return;
    }
    println!("suggestions:");
    for (i, s) in suggestions.iter().enumerate() {
        let alg = s.algorithm_used.map_or("-".to_string(), |a| a.to_string());
        let k = s.k_used.map_or("-".to_string(), |k| k.to_string());
        println!("  {}. [{}] {} via {} k={} relevance {:.3} ({})", i + 1, s.selected_attributes.join(", "), s.objective, alg, k, s.relevance, s.source_user);
    }
}

fn ask_suggestion(count: usize) -> Option<usize> {
    loop {
        print!("use suggestion [1-{count}, empty for none]: ");
        std::io::stdout().flush().ok()?;
        let mut line = String::new();
        if std::io::stdin().lock().read_line(&mut line).ok()? == 0 {
            return None;
        }
        let line = line.trim();
        if line.is_empty() {
            return None;
        }
        match line.parse::<usize>() {
            Ok(i) if (1..=count).contains(&i) => return Some(i),
            _ => println!("enter a number between 1 and {count}"),
        }
    }
}
