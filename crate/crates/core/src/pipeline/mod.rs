//! Session orchestration across the user interface, ranking, data mining
//! and visualization agents.
//!
//! A session runs five stages in a fixed order: attribute selection,
//! ranking, cluster formation, cluster detection and visualization. Every
//! hand-off between agents goes through a [`Bus`] so the control order is
//! checked and logged.

mod bus;

pub use bus::{canonical_trace, AgentId, AgentMessage, Bus, BusError, BusStage, MessageKind};

use crate::cluster::{
    self, select_algorithm, Algorithm, ClusterData, ClusterError, ClusterModel, ClusteringSpec, DataSummary,
    SelectionPolicy,
};
use crate::dataset::{load_csv, Dataset, IngestError, MissingPolicy};
use crate::detection::{detect_good_clusters, silhouette, DetectionError, DetectionThresholds, QualityReport};
use crate::profile::{
    record_navigation, NavigationEvent, PatternSummary, ProfileError, ProfileStore, RelevanceWeights, SessionOutcome, SessionRecord,
};
use crate::ranking::{rank_attributes, RankWeights, RankedAttributes, RankingError};
use crate::viz::{self, PlotSpec, VizError};
use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Version stamped on every JSON artifact.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub delimiter: char,
    pub has_header: bool,
    pub missing: MissingPolicy,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { delimiter: ',', has_header: true, missing: MissingPolicy::ImputeMeanMode }
    }
}

impl IngestConfig {
    pub fn delimiter_byte(&self) -> Result<u8, PipelineError> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| PipelineError::Usage(format!("delimiter {:?} is not a single ASCII character", self.delimiter)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingConfig {
    pub type_weight: f64,
    pub query_weight: f64,
    /// Number of attributes forwarded to clustering.
    pub top: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        let w = RankWeights::default();
        Self { type_weight: w.type_score, query_weight: w.query, top: 3 }
    }
}

impl RankingConfig {
    pub fn weights(&self) -> RankWeights {
        RankWeights { type_score: self.type_weight, query: self.query_weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Fixed cluster count; `None` searches `2..=max_k` by silhouette.
    pub k: Option<usize>,
    pub max_k: usize,
    /// Rows sampled for the k search.
    pub auto_k_rows: usize,
    pub max_iter: usize,
    pub gamma: Option<f64>,
    pub clara_samples: usize,
    pub clara_sample_size: Option<usize>,
    pub clarans_numlocal: usize,
    pub clarans_maxneighbor: Option<usize>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let s = ClusteringSpec::new(Algorithm::KMeans, 1, 0);
        Self {
            k: None,
            max_k: 10,
            auto_k_rows: 500,
            max_iter: s.max_iter,
            gamma: s.gamma,
            clara_samples: s.clara_samples,
            clara_sample_size: s.clara_sample_size,
            clarans_numlocal: s.clarans_numlocal,
            clarans_maxneighbor: s.clarans_maxneighbor,
        }
    }
}

impl ClusteringConfig {
    pub fn spec(&self, algorithm: Algorithm, k: usize, seed: u64) -> ClusteringSpec {
        ClusteringSpec {
            algorithm,
            k,
            seed,
            max_iter: self.max_iter,
            gamma: self.gamma,
            clara_samples: self.clara_samples,
            clara_sample_size: self.clara_sample_size,
            clarans_numlocal: self.clarans_numlocal,
            clarans_maxneighbor: self.clarans_maxneighbor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VizConfig {
    /// Write an SVG next to every plot spec.
    pub svg: bool,
}

impl Default for VizConfig {
    fn default() -> Self {
        Self { svg: true }
    }
}

/// Every tunable of a session. Loaded from TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub store_path: PathBuf,
    pub ingest: IngestConfig,
    pub ranking: RankingConfig,
    pub selection: SelectionPolicy,
    pub clustering: ClusteringConfig,
    pub detection: DetectionThresholds,
    pub viz: VizConfig,
    pub profile: RelevanceWeights,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            store_path: PathBuf::from("profiles.json"),
            ingest: IngestConfig::default(),
            ranking: RankingConfig::default(),
            selection: SelectionPolicy::default(),
            clustering: ClusteringConfig::default(),
            detection: DetectionThresholds::default(),
            viz: VizConfig::default(),
            profile: RelevanceWeights::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    AttributeSelection,
    Ranking,
    ClusterFormation,
    ClusterDetection,
    Visualization,
}

impl Stage {
    pub const ORDER: [Stage; 5] =
        [Stage::AttributeSelection, Stage::Ranking, Stage::ClusterFormation, Stage::ClusterDetection, Stage::Visualization];

    pub fn name(self) -> &'static str {
        match self {
            Stage::AttributeSelection => "attribute_selection",
            Stage::Ranking => "ranking",
            Stage::ClusterFormation => "cluster_formation",
            Stage::ClusterDetection => "cluster_detection",
            Stage::Visualization => "visualization",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Failure inside one stage.
#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Viz(#[from] VizError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Bus(#[from] BusError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] IngestError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("stage {stage} failed: {source} (partial artifacts in {})", failed_dir.display())]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
        failed_dir: PathBuf,
    },
    #[error("cannot read {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 2 usage, 3 data, 4 stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Usage(_) => 2,
            PipelineError::Data(_) | PipelineError::Profile(_) | PipelineError::Artifact { .. } => 3,
            PipelineError::Stage { .. } | PipelineError::Io { .. } => 4,
        }
    }
}

/// A JSON artifact body with its format version alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub version: u32,
    #[serde(flatten)]
    pub body: T,
}

pub fn artifact_bytes<T: Serialize>(body: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&Versioned { version: ARTIFACT_VERSION, body }).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

pub fn read_artifact<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let err = |reason: String| PipelineError::Artifact { path: path.to_path_buf(), reason };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let v: Versioned<T> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    if v.version != ARTIFACT_VERSION {
        return Err(err(format!("unsupported version {}", v.version)));
    }
    Ok(v.body)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

/// Hex SHA-256 of a file's bytes.
pub fn hash_file(path: &Path) -> Result<String, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// The plot specs written to `plotspec.json`, in chart-plan order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSet {
    pub plots: Vec<PlotSpec>,
}

/// Project to `attributes` and fill missing cells, ready for clustering.
pub fn prepare_data(
    ds: &Dataset,
    attributes: &[String],
    policy: MissingPolicy,
) -> Result<(Dataset, ClusterData), StageError> {
    let projected = ds.project(attributes)?.handle_missing(policy)?;
    let data = ClusterData::from_dataset(&projected, attributes)?;
    Ok((projected, data))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub silhouette: f64,
}

/// Best k in `2..=min(max_k, n - 1)` by overall silhouette on a seeded row
/// sample; ties go to the smaller k. Falls back to 1 when n < 3.
pub fn choose_k(
    data: &ClusterData,
    algorithm: Algorithm,
    cfg: &ClusteringConfig,
    seed: u64,
) -> Result<(usize, Vec<KScore>), ClusterError> {
    let n = data.n();
    let max_k = cfg.max_k.min(n.saturating_sub(1));
    if max_k < 2 {
        return Ok((1, Vec::new()));
    }
    let sample = if n > cfg.auto_k_rows.max(max_k + 1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, cfg.auto_k_rows.max(max_k + 1)).into_vec();
        idx.sort_unstable();
        Some(data.subset(&idx))
    } else {
        None
    };
    let sub = sample.as_ref().unwrap_or(data);
    let mut scores = Vec::new();
    let mut best: Option<KScore> = None;
    for k in 2..=max_k {
        let model = cluster::run(sub, &cfg.spec(algorithm, k, seed))?;
        let s = silhouette(sub, &model.assignments, model.measure).map_or(f64::NEG_INFINITY, |s| s.overall);
        let score = KScore { k, silhouette: s };
        if best.is_none_or(|b| s > b.silhouette) {
            best = Some(score);
        }
        scores.push(score);
    }
    Ok((best.map_or(2, |b| b.k), scores))
}

/// One plot spec per entry of the chart plan.
pub fn build_plots(
    ds: &Dataset,
    attributes: &[String],
    model: &ClusterModel,
    quality: &QualityReport,
    seed: u64,
) -> Result<Vec<PlotSpec>, VizError> {
    viz::chart_plan(attributes)
        .iter()
        .map(|subset| {
            let dim = viz::classify_dimensionality(subset)?;
            let kinds = subset
                .iter()
                .map(|a| ds.attribute(a).map(|m| m.kind).ok_or_else(|| VizError::UnknownAttribute(a.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            viz::build_plot_spec(ds, subset, model, quality, viz::choose_chart(dim, &kinds), seed)
        })
        .collect()
}

/// File name for the `index`-th chart (1-based).
pub fn svg_name(index: usize, spec: &PlotSpec) -> String {
    format!("plot-{index}-{}.svg", format!("{:?}", spec.chart).to_lowercase())
}

/// Choices that take precedence over ranking, history and config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub algorithm: Option<Algorithm>,
    pub k: Option<usize>,
    /// 1-based index into the suggestion list.
    pub use_suggestion: Option<usize>,
    pub attributes: Option<Vec<String>>,
    /// Record the session as not accepted even when good clusters exist.
    pub no_accept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MineRequest {
    pub user_id: String,
    pub objective: String,
    pub data_path: PathBuf,
    pub out_dir: PathBuf,
    pub overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub user_id: String,
    pub objective: String,
    pub objective_tokens: Vec<String>,
    pub returning_user: bool,
    pub started_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: PathBuf,
    pub sha256: String,
    pub records: usize,
    pub attributes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub algorithm: Algorithm,
    pub k: usize,
    pub gamma: Option<f64>,
    pub objective: f64,
    pub iterations_run: usize,
    pub cluster_sizes: Vec<usize>,
}

impl ModelSummary {
    pub fn of(model: &ClusterModel) -> Self {
        Self {
            algorithm: model.spec.algorithm,
            k: model.k(),
            gamma: model.spec.gamma,
            objective: model.objective,
            iterations_run: model.iterations_run,
            cluster_sizes: model.cluster_sizes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub millis: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session: SessionInfo,
    pub input: InputInfo,
    pub seed: u64,
    pub config: PipelineConfig,
    pub suggestions: Vec<PatternSummary>,
    /// 1-based index of the suggestion the session reused.
    pub used_suggestion: Option<usize>,
    pub ranking: Option<RankedAttributes>,
    pub selected_attributes: Vec<String>,
    pub spec: Option<ClusteringSpec>,
    /// Silhouette per candidate k when k was searched.
    pub k_search: Vec<KScore>,
    pub model: Option<ModelSummary>,
    pub quality: Option<QualityReport>,
    /// Files written by the session, relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
    pub stages: Vec<StageTiming>,
    pub messages: Vec<AgentMessage>,
    pub accepted: bool,
    pub record: Option<SessionRecord>,
    pub failure: Option<StageFailure>,
}

struct Run<'a> {
    out_dir: &'a Path,
    report: SessionReport,
    artifacts: Vec<(String, Vec<u8>)>,
    bus: Bus,
}

impl Run<'_> {
    fn send(&mut self, from: AgentId, to: AgentId, kind: MessageKind, payload: &str) -> Result<(), StageError> {
        self.bus.dispatch(AgentMessage::new(from, to, kind, payload))?;
        Ok(())
    }

    fn artifact(&mut self, name: &str, bytes: Vec<u8>) {
        self.report.artifacts.push(PathBuf::from(name));
        self.artifacts.push((name.to_string(), bytes));
    }

    fn stage<T>(&mut self, stage: Stage, f: impl FnOnce(&mut Self) -> Result<T, StageError>) -> Result<T, PipelineError> {
        let start = Instant::now();
        let result = f(self);
        self.report.stages.push(StageTiming { stage, millis: start.elapsed().as_secs_f64() * 1e3, ok: result.is_ok() });
        result.map_err(|e| self.fail(stage, e))
    }

    /// Write what the session produced so far under `failed/`.
    fn fail(&mut self, stage: Stage, source: StageError) -> PipelineError {
        if let Some(holder) = self.bus.holder().filter(|&h| h != AgentId::UserInterface) {
            let _ = self.bus.dispatch(AgentMessage::new(holder, AgentId::UserInterface, MessageKind::Error, stage.name()));
        }
        self.report.messages = self.bus.log().to_vec();
        self.report.failure = Some(StageFailure { stage, message: source.to_string() });
        let failed_dir = self.out_dir.join("failed");
        let report = artifact_bytes(&self.report);
        for (name, bytes) in self.artifacts.iter().chain(std::iter::once(&("report.json".to_string(), report))) {
            if let Err(e) = write_file(&failed_dir.join(name), bytes) {
                return e;
            }
        }
        PipelineError::Stage { stage, source, failed_dir }
    }
}

/// Run a full session with suggestions chosen by `overrides.use_suggestion`.
pub fn run_pipeline(config: &PipelineConfig, request: &MineRequest) -> Result<SessionReport, PipelineError> {
    run_pipeline_with(config, request, |_| None)
}

/// As [`run_pipeline`]; `choose` picks a 1-based suggestion when no
/// override names one.
pub fn run_pipeline_with(
    config: &PipelineConfig,
    request: &MineRequest,
    choose: impl FnOnce(&[PatternSummary]) -> Option<usize>,
) -> Result<SessionReport, PipelineError> {
    let overrides = &request.overrides;
    let delimiter = config.ingest.delimiter_byte()?;
    let ds = load_csv(&request.data_path, delimiter, config.ingest.has_header)?;
    let sha256 = hash_file(&request.data_path)?;
    let mut store = ProfileStore::open(&config.store_path)?.with_weights(config.profile);
    let (mut session, suggestions) = store.begin_session(&request.user_id, &request.objective).map_err(|e| match e {
        ProfileError::EmptyUserId | ProfileError::EmptyObjective => PipelineError::Usage(e.to_string()),
        e => PipelineError::Profile(e),
    })?;
    let history = store.history(&request.user_id).to_vec();
    let used_suggestion = overrides.use_suggestion.or_else(|| choose(&suggestions));
    if let Some(i) = used_suggestion {
        if i == 0 || i > suggestions.len() {
            return Err(PipelineError::Usage(format!(
                "suggestion {i} does not exist; {} suggestion(s) available",
                suggestions.len()
            )));
        }
    }
    let suggestion = used_suggestion.map(|i| suggestions[i - 1].clone());

    let mut run = Run {
        out_dir: &request.out_dir,
        report: SessionReport {
            session: SessionInfo {
                session_id: session.session_id.clone(),
                user_id: session.user_id.clone(),
                objective: session.objective.clone(),
                objective_tokens: session.objective_tokens.clone(),
                returning_user: session.returning_user,
                started_at: session.started_at,
            },
            input: InputInfo {
                path: request.data_path.clone(),
                sha256,
                records: ds.n(),
                attributes: ds.attributes().len(),
            },
            seed: config.seed,
            config: config.clone(),
            suggestions: suggestions.clone(),
            used_suggestion,
            ranking: None,
            selected_attributes: Vec::new(),
            spec: None,
            k_search: Vec::new(),
            model: None,
            quality: None,
            artifacts: Vec::new(),
            plots: Vec::new(),
            stages: Vec::new(),
            messages: Vec::new(),
            accepted: false,
            record: None,
            failure: None,
        },
        artifacts: Vec::new(),
        bus: Bus::new(),
    };

    // The user interface agent settles which attributes the user asked for.
    let requested: Option<Vec<String>> = run.stage(Stage::AttributeSelection, |run| {
        record_navigation(&mut session, NavigationEvent::new("suggestions", suggestions.len().to_string()))?;
        if let (Some(i), Some(s)) = (used_suggestion, &suggestion) {
            record_navigation(&mut session, NavigationEvent::new("use_suggestion", format!("{i}:{}", s.source_session)))?;
        }
        let requested = overrides.attributes.clone().or_else(|| suggestion.as_ref().map(|s| s.selected_attributes.clone()));
        if let Some(attrs) = &requested {
            if let Some(unknown) = attrs.iter().find(|a| ds.attribute(a).is_none()) {
                return Err(IngestError::UnknownAttribute(unknown.clone()).into());
            }
            record_navigation(&mut session, NavigationEvent::new("attributes", attrs.join(",")))?;
        }
        run.send(AgentId::UserInterface, AgentId::DataMining, MessageKind::TransferControl, "session")?;
        Ok(requested)
    })?;

    let selected = run.stage(Stage::Ranking, |run| {
        run.send(AgentId::DataMining, AgentId::Ranking, MessageKind::TransferControl, "data")?;
        let ranked = rank_attributes(
            &ds,
            &session.objective_tokens,
            &history,
            config.ranking.top,
            config.ranking.weights(),
        )?;
        let selected = requested.unwrap_or_else(|| ranked.selected.clone());
        run.artifact("ranks.json", artifact_bytes(&ranked));
        run.report.ranking = Some(ranked);
        run.report.selected_attributes = selected.clone();
        run.send(AgentId::Ranking, AgentId::DataMining, MessageKind::Result, "ranks.json")?;
        Ok(selected)
    })?;

    let (projected, data, model) = run.stage(Stage::ClusterFormation, |run| {
        let (projected, data) = prepare_data(&ds, &selected, config.ingest.missing)?;
        let summary = DataSummary { n: data.n(), kinds: selected.iter().map(|a| projected.attribute(a).unwrap().kind).collect() };
        let hint = suggestion.as_ref().and_then(|s| s.algorithm_used).or_else(|| {
            suggestions
                .first()
                .filter(|s| s.accepted && s.selected_attributes == selected)
                .and_then(|s| s.algorithm_used)
        });
        let algorithm = match overrides.algorithm {
            Some(a) => a,
            None => select_algorithm(&summary, hint, &config.selection)?,
        };
        let k = match overrides.k.or(suggestion.as_ref().and_then(|s| s.k_used)).or(config.clustering.k) {
            Some(k) => k,
            None => {
                let (k, scores) = choose_k(&data, algorithm, &config.clustering, config.seed)?;
                run.report.k_search = scores;
                k
            }
        };
        let spec = config.clustering.spec(algorithm, k, config.seed);
        run.report.spec = Some(spec.clone());
        let model = cluster::run(&data, &spec)?;
        run.report.spec = Some(model.spec.clone());
        run.report.model = Some(ModelSummary::of(&model));
        run.artifact("model.json", artifact_bytes(&model));
        Ok((projected, data, model))
    })?;

    let quality = run.stage(Stage::ClusterDetection, |run| {
        let quality = detect_good_clusters(&model, &data, &config.detection)?;
        run.artifact("quality.json", artifact_bytes(&quality));
        run.report.quality = Some(quality.clone());
        run.send(AgentId::DataMining, AgentId::Visualization, MessageKind::TransferControl, "quality.json")?;
        Ok(quality)
    })?;

    run.stage(Stage::Visualization, |run| {
        let plots = build_plots(&projected, &selected, &model, &quality, config.seed)?;
        if config.viz.svg {
            for (i, spec) in plots.iter().enumerate() {
                let name = svg_name(i + 1, spec);
                run.artifact(&name, viz::to_svg(spec).into_bytes());
                run.report.plots.push(PathBuf::from(name));
            }
        }
        run.artifact("plotspec.json", artifact_bytes(&PlotSet { plots }));
        run.report.plots.push(PathBuf::from("plotspec.json"));
        run.send(AgentId::Visualization, AgentId::UserInterface, MessageKind::Result, "plotspec.json")?;
        Ok(())
    })?;

    for (name, bytes) in &run.artifacts {
        write_file(&request.out_dir.join(name), bytes)?;
    }
    let accepted = quality.good_count > 0 && !overrides.no_accept;
    record_navigation(&mut session, NavigationEvent::new(if accepted { "accept" } else { "decline" }, quality.good_count.to_string()))?;
    let record = store.commit_session(
        &mut session,
        SessionOutcome {
            selected_attributes: selected,
            algorithm_used: Some(model.spec.algorithm),
            k_used: Some(model.k()),
            quality_summary: Some(quality.overall_silhouette),
            accepted,
        },
    )?;
    let mut report = run.report;
    report.accepted = accepted;
    report.record = Some(record);
    report.messages = run.bus.log().to_vec();
    report.artifacts.push(PathBuf::from("report.json"));
    write_file(&request.out_dir.join("report.json"), &artifact_bytes(&report))?;
    Ok(report)
}
