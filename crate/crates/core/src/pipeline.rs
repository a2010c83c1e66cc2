//! Pipeline stages behind the CLI subcommands.
//!
//! Every stage reads its inputs from the paths in the configuration, writes
//! its outputs atomically and records the config hash and seeds it used.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assort::{self, Assortment, Product, SeedPair, Solver};
use crate::compatibility::{self, CompatibilityMetric, PurchaseRecord, PurchaseWindow};
use crate::config::LoadedConfig;
use crate::corpus::{self, ActivationSummary, CatalogEntry, CorpusOptions, DocumentTuple, Stopwords, ThresholdVector, VisualLayout};
use crate::error::{Error, Result};
use crate::eval::{self, ClickSession, EvalReport};
use crate::io::{self, Provenance};
use crate::synth;
use crate::theta::{ThetaRecord, ThetaTable};
use crate::topicmodel::{self, PolyCorpus, PolyTopicModel, TrainParams, Variant};

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const VOCAB_FILE: &str = "vocab.json";
pub const INFERRED_THETA_FILE: &str = "inferred_theta.jsonl";
pub const METRIC_FILE: &str = "metric.json";
pub const SEEDS_FILE: &str = "seeds.jsonl";
pub const ASSORTMENTS_FILE: &str = "assortments.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const ORACLE_FILE: &str = "oracle.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const MODEL_META_FILE: &str = "meta.json";
pub const MODEL_THETA_FILE: &str = "theta.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BuildDocs,
    Train,
    Infer,
    FitMetric,
    Seeds,
    Assort,
    Eval,
    Synth,
    Oracle,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::BuildDocs,
        Command::Train,
        Command::Infer,
        Command::FitMetric,
        Command::Seeds,
        Command::Assort,
        Command::Eval,
        Command::Synth,
        Command::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::BuildDocs => "build-docs",
            Command::Train => "train",
            Command::Infer => "infer",
            Command::FitMetric => "fit-metric",
            Command::Seeds => "seeds",
            Command::Assort => "assort",
            Command::Eval => "eval",
            Command::Synth => "synth",
            Command::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// `documents.jsonl` line; `null` marks a missing modality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub product_id: String,
    pub visual: Option<Vec<u32>>,
    pub text: Option<Vec<u32>>,
}

impl From<&DocumentTuple> for DocumentRecord {
    fn from(t: &DocumentTuple) -> Self {
        Self {
            product_id: t.product_id.clone(),
            visual: t.visual.as_ref().map(|d| d.words().iter().copied().collect()),
            text: t.text.as_ref().map(|d| d.tokens().to_vec()),
        }
    }
}

impl From<DocumentRecord> for DocumentTuple {
    fn from(r: DocumentRecord) -> Self {
        Self {
            product_id: r.product_id,
            visual: r.visual.map(|v| v.into_iter().collect()),
            text: r.text.map(|t| t.into_iter().collect()),
        }
    }
}

/// `vocab.json`: word id ↔ token for text, word id ↔ channel label for
/// visual words, and the fitted thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabFile {
    pub provenance: Provenance,
    pub text: Vec<String>,
    pub visual: Vec<String>,
    pub thresholds: Option<ThresholdVector>,
}

/// `meta.json` inside the model directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub provenance: Provenance,
    pub variant: Variant,
    pub num_topics: usize,
    pub languages: Vec<String>,
    pub vocab_sizes: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricArtifact {
    #[serde(flatten)]
    pub metric: CompatibilityMetric,
    pub purchase_vectors: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportArtifact {
    #[serde(flatten)]
    pub report: EvalReport,
    pub provenance: Provenance,
}

// serde's flatten buffers map keys as strings, which breaks the integer-keyed
// histogram, so split the object by hand.
impl<'de> Deserialize<'de> for ReportArtifact {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut value = serde_json::Value::deserialize(d)?;
        let provenance = value
            .as_object_mut()
            .and_then(|o| o.remove("provenance"))
            .ok_or_else(|| D::Error::missing_field("provenance"))?;
        Ok(ReportArtifact {
            report: serde_json::from_value(value).map_err(D::Error::custom)?,
            provenance: serde_json::from_value(provenance).map_err(D::Error::custom)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub couch_set: String,
    pub coffee_table: String,
    pub candidates: usize,
    pub greedy: f64,
    pub optimum: f64,
    pub ratio: f64,
    pub greedy_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instances: Vec<OracleInstance>,
    pub min_ratio: f64,
    pub mean_ratio: f64,
    pub provenance: Provenance,
}

/// What a stage wrote, for the CLI to report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutput {
    pub written: Vec<PathBuf>,
}

/// Resolved paths and provenance for one run.
#[derive(Debug, Clone)]
pub struct Context {
    pub loaded: LoadedConfig,
    pub config_hash: String,
}

impl Context {
    pub fn new(loaded: LoadedConfig) -> Self {
        let config_hash = loaded.config.hash();
        Self { loaded, config_hash }
    }

    fn cfg(&self) -> &crate::config::PipelineConfig {
        &self.loaded.config
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        self.loaded.resolve(p)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.path(&self.cfg().paths.output_dir)
    }

    pub fn model_dir(&self) -> PathBuf {
        self.path(&self.cfg().paths.model_dir)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir().join(name)
    }

    fn provenance(&self, command: Command) -> Provenance {
        let c = self.cfg();
        let mut seeds = BTreeMap::new();
        match command {
            Command::Train | Command::Infer => {
                seeds.insert("topicmodel".to_string(), c.topicmodel.seed);
            }
            Command::Synth => {
                seeds.insert("catalog".to_string(), c.synth.catalog.seed);
                seeds.insert("feedback".to_string(), c.synth.feedback.seed);
            }
            _ => {}
        }
        Provenance {
            command: command.name().to_string(),
            config_hash: self.config_hash.clone(),
            seeds,
        }
    }
}

fn require(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input file does not exist"),
        ))
    }
}

/// Runs one stage under the output-directory lock.
pub fn run(command: Command, ctx: &Context) -> Result<StageOutput> {
    let _lock = io::OutputLock::acquire(&ctx.output_dir())?;
    match command {
        Command::Synth => synth_stage(ctx),
        Command::BuildDocs => build_docs(ctx),
        Command::Train => train(ctx),
        Command::Infer => infer(ctx),
        Command::FitMetric => fit_metric(ctx),
        Command::Seeds => seeds(ctx),
        Command::Assort => assort_stage(ctx),
        Command::Eval => eval_stage(ctx),
        Command::Oracle => oracle(ctx),
    }
}

fn synth_stage(ctx: &Context) -> Result<StageOutput> {
    let c = ctx.cfg();
    let generated = synth::generate_catalog(&c.synth.catalog)?;
    let (sessions, purchases) = synth::generate_feedback(&generated.catalog, &generated.truth, &c.synth.feedback)?;
    let prov = ctx.provenance(Command::Synth);
    let paths = [
        ctx.path(&c.paths.catalog),
        ctx.path(&c.paths.activations),
        ctx.path(&c.paths.sessions),
        ctx.path(&c.paths.purchases),
        ctx.output(GROUND_TRUTH_FILE),
    ];
    io::write_jsonl_with_provenance(&paths[0], &generated.catalog, &prov)?;
    io::write_jsonl_with_provenance(&paths[1], &generated.activations, &prov)?;
    io::write_jsonl_with_provenance(&paths[2], &sessions, &prov)?;
    io::write_jsonl_with_provenance(&paths[3], &purchases, &prov)?;
    io::write_json(&paths[4], &generated.truth)?;
    Ok(StageOutput { written: paths.to_vec() })
}

fn read_catalog(ctx: &Context) -> Result<Vec<CatalogEntry>> {
    io::read_jsonl(require(&ctx.path(&ctx.cfg().paths.catalog))?)
}

fn build_docs(ctx: &Context) -> Result<StageOutput> {
    let c = ctx.cfg();
    let catalog = read_catalog(ctx)?;
    let activations: Vec<ActivationSummary> = io::read_jsonl(require(&ctx.path(&c.paths.activations))?)?;
    let stopwords = match &c.corpus.stopwords {
        Some(p) => {
            let p = ctx.path(p);
            Stopwords::parse(&std::fs::read_to_string(require(&p)?).map_err(|e| Error::io(&p, e))?)
        }
        None => Stopwords::english(),
    };
    let layout = c.corpus.layer_offsets.clone().map(VisualLayout::new).transpose()?;
    let options = CorpusOptions {
        quantile: c.corpus.quantile,
        min_token_freq: c.corpus.min_token_freq,
        stopwords,
        layout,
    };
    let built = corpus::build_corpus(&catalog, &activations, &options)?;
    let prov = ctx.provenance(Command::BuildDocs);
    let records: Vec<DocumentRecord> = built.tuples.iter().map(DocumentRecord::from).collect();
    let docs_path = ctx.output(DOCUMENTS_FILE);
    io::write_jsonl_with_provenance(&docs_path, &records, &prov)?;
    let vocab = VocabFile {
        provenance: prov,
        text: built.text_vocab.tokens().to_vec(),
        visual: (0..built.layout.vocab_size())
            .map(|w| built.layout.word_label(w).unwrap_or_default())
            .collect(),
        thresholds: built.thresholds,
    };
    let vocab_path = ctx.output(VOCAB_FILE);
    io::write_json(&vocab_path, &vocab)?;
    Ok(StageOutput {
        written: vec![docs_path, vocab_path],
    })
}

fn read_documents(ctx: &Context) -> Result<(Vec<DocumentTuple>, VocabFile)> {
    let records: Vec<DocumentRecord> = io::read_jsonl(require(&ctx.output(DOCUMENTS_FILE))?)?;
    let vocab: VocabFile = io::read_json(require(&ctx.output(VOCAB_FILE))?)?;
    Ok((records.into_iter().map(DocumentTuple::from).collect(), vocab))
}

/// Training corpus for the configured variant.
pub fn training_corpus(tuples: &[DocumentTuple], vocab: &VocabFile, variant: Variant) -> PolyCorpus {
    PolyCorpus::from_tuples(tuples, variant, vocab.visual.len(), vocab.text.len())
}

fn train(ctx: &Context) -> Result<StageOutput> {
    let c = ctx.cfg();
    let (tuples, vocab) = read_documents(ctx)?;
    let corpus = training_corpus(&tuples, &vocab, c.topicmodel.variant);
    let tm = &c.topicmodel;
    let params = TrainParams::symmetric(tm.num_topics, tm.alpha_sum, tm.beta, tm.iterations, tm.seed);
    let model = topicmodel::train(&corpus, &params)?;
    let log_likelihood = topicmodel::log_likelihood(&model, &corpus)?;
    write_model(&ctx.model_dir(), &model, tm.variant, log_likelihood, ctx.provenance(Command::Train))
}

/// Writes `meta.json`, `phi_<language>.jsonl` and `theta.jsonl`.
pub fn write_model(
    dir: &Path,
    model: &PolyTopicModel,
    variant: Variant,
    log_likelihood: f64,
    provenance: Provenance,
) -> Result<StageOutput> {
    let mut written = Vec::new();
    for (l, name) in model.languages.iter().enumerate() {
        let p = dir.join(format!("phi_{name}.jsonl"));
        io::write_jsonl(&p, &model.phi[l])?;
        written.push(p);
    }
    let thetas: Vec<ThetaRecord> = model
        .product_ids
        .iter()
        .zip(&model.theta)
        .map(|(id, t)| ThetaRecord {
            product_id: id.clone(),
            theta: t.clone(),
        })
        .collect();
    let p = dir.join(MODEL_THETA_FILE);
    io::write_jsonl(&p, &thetas)?;
    written.push(p);
    let meta = ModelMeta {
        provenance,
        variant,
        num_topics: model.num_topics,
        languages: model.languages.clone(),
        vocab_sizes: model.vocab_sizes.clone(),
        alpha: model.alpha.clone(),
        beta: model.beta,
        iterations: model.iterations,
        seed: model.seed,
        log_likelihood,
    };
    let p = dir.join(MODEL_META_FILE);
    io::write_json(&p, &meta)?;
    written.push(p);
    Ok(StageOutput { written })
}

/// Reads a model directory written by [`write_model`].
pub fn read_model(dir: &Path) -> Result<(PolyTopicModel, ModelMeta)> {
    let meta: ModelMeta = io::read_json(require(&dir.join(MODEL_META_FILE))?)?;
    let mut phi = Vec::with_capacity(meta.languages.len());
    for (name, &v) in meta.languages.iter().zip(&meta.vocab_sizes) {
        let path = dir.join(format!("phi_{name}.jsonl"));
        let rows: Vec<Vec<f64>> = io::read_jsonl(require(&path)?)?;
        if rows.len() != meta.num_topics || rows.iter().any(|r| r.len() != v) {
            return Err(Error::Schema {
                path,
                line: 0,
                message: format!("expected {} rows of {} probabilities", meta.num_topics, v),
            });
        }
        phi.push(rows);
    }
    let thetas: Vec<ThetaRecord> = io::read_jsonl(require(&dir.join(MODEL_THETA_FILE))?)?;
    let model = PolyTopicModel {
        num_topics: meta.num_topics,
        languages: meta.languages.clone(),
        vocab_sizes: meta.vocab_sizes.clone(),
        alpha: meta.alpha.clone(),
        beta: meta.beta,
        iterations: meta.iterations,
        seed: meta.seed,
        phi,
        product_ids: thetas.iter().map(|t| t.product_id.clone()).collect(),
        theta: thetas.into_iter().map(|t| t.theta).collect(),
    };
    Ok((model, meta))
}

/// Per-product fold-in seed derived from the run seed and the tuple index.
fn fold_in_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn infer(ctx: &Context) -> Result<StageOutput> {
    let c = ctx.cfg();
    let (model, meta) = read_model(&ctx.model_dir())?;
    let (tuples, _) = read_documents(ctx)?;
    let records: Vec<ThetaRecord> = tuples
        .iter()
        .enumerate()
        .map(|(i, t)| ThetaRecord {
            product_id: t.product_id.clone(),
            theta: topicmodel::infer_theta(
                &model,
                &topicmodel::project(t, meta.variant),
                c.topicmodel.fold_in_sweeps,
                fold_in_seed(c.topicmodel.seed, i),
            ),
        })
        .collect();
    let path = ctx.output(INFERRED_THETA_FILE);
    io::write_jsonl_with_provenance(&path, &records, &ctx.provenance(Command::Infer))?;
    Ok(StageOutput { written: vec![path] })
}

/// Training θ from the model directory, filled in with fold-in estimates
/// from `inferred_theta.jsonl` for products the model did not train on.
pub fn load_thetas(ctx: &Context) -> Result<ThetaTable> {
    let dir = ctx.model_dir();
    let records: Vec<ThetaRecord> = io::read_jsonl(require(&dir.join(MODEL_THETA_FILE))?)?;
    let mut table = ThetaTable::from_records(records)?;
    let inferred = ctx.output(INFERRED_THETA_FILE);
    if inferred.exists() {
        for r in io::read_jsonl::<ThetaRecord>(&inferred)? {
            if !table.contains(&r.product_id) {
                table.insert(r.product_id, r.theta)?;
            }
        }
    }
    Ok(table)
}

fn fit_metric(ctx: &Context) -> Result<StageOutput> {
    let c = ctx.cfg();
    let thetas = load_thetas(ctx)?;
    let purchases: Vec<PurchaseRecord> = io::read_jsonl(require(&ctx.path(&c.paths.purchases))?)?;
    let window = PurchaseWindow {
        window_days: c.metric.window_days,
        min_items: c.metric.min_items,
        max_items: c.metric.max_items,
    };
    let vectors = compatibility::build_purchase_vectors(&purchases, &thetas, window);
    let metric = compatibility::fit_metric(&vectors, thetas.num_topics(), c.metric.mode, c.metric.lambda)?;
    let path = ctx.output(METRIC_FILE);
    io::write_json(
        &path,
        &MetricArtifact {
            metric,
            purchase_vectors: vectors.len(),
            provenance: ctx.provenance(Command::FitMetric),
        },
    )?;
    Ok(StageOutput { written: vec![path] })
}

fn read_sessions(ctx: &Context) -> Result<Vec<ClickSession>> {
    io::read_jsonl(require(&ctx.path(&ctx.cfg().paths.sessions))?)
}

fn seeds(ctx: &Context) -> Result<StageOutput> {
    let c = ctx.cfg();
    let catalog = read_catalog(ctx)?;
    let sessions = read_sessions(ctx)?;
    let verticals: HashMap<String, String> = catalog
        .iter()
        .map(|e| (e.product_id.clone(), e.vertical.clone()))
        .collect();
    let [a, b] = &c.assort.seed_verticals;
    let seeds = assort::generate_seeds(&sessions, &verticals, a, b, c.assort.top_n);
    let path = ctx.output(SEEDS_FILE);
    io::write_jsonl_with_provenance(&path, &seeds, &ctx.provenance(Command::Seeds))?;
    Ok(StageOutput { written: vec![path] })
}

pub fn read_metric(ctx: &Context) -> Result<CompatibilityMetric> {
    let artifact: MetricArtifact = io::read_json(require(&ctx.output(METRIC_FILE))?)?;
    Ok(artifact.metric)
}

/// Catalog products that have θ, in catalog order.
fn products_with_theta(catalog: &[CatalogEntry], thetas: &ThetaTable) -> Vec<Product> {
    catalog
        .iter()
        .filter_map(|e| {
            thetas.get(&e.product_id).map(|t| Product {
                id: e.product_id.clone(),
                vertical: e.vertical.clone(),
                price_cents: e.price_cents,
                theta: t.to_vec(),
            })
        })
        .collect()
}

fn resolve_seed(seed: &assort::Seed, products: &HashMap<&str, &Product>) -> Option<SeedPair> {
    Some(SeedPair {
        seed: seed.clone(),
        couch_set: (*products.get(seed.couch_set.as_str())?).clone(),
        coffee_table: (*products.get(seed.coffee_table.as_str())?).clone(),
    })
}

/// Builds one assortment per seed whose products both have θ.
pub fn build_assortments(
    seeds: &[assort::Seed],
    products: &[Product],
    metric: &CompatibilityMetric,
    config: &crate::config::AssortConfig,
) -> Result<Vec<Assortment>> {
    let by_id: HashMap<&str, &Product> = products.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut out = Vec::new();
    for seed in seeds {
        let Some(pair) = resolve_seed(seed, &by_id) else { continue };
        let assortment = match config.solver {
            Solver::Qkp => {
                let budget = config.budget_cents.saturating_sub(pair.cost());
                assort::greedy_qkp(&pair, products, metric, budget, &config.verticals, config.max_passes)?
            }
            Solver::VerticalIter => {
                assort::generate_assortment(&pair, products, metric, &config.verticals, config.epsilon, config.max_iters)?
                    .assortment
            }
        };
        out.push(assortment);
    }
    Ok(out)
}

fn assort_stage(ctx: &Context) -> Result<StageOutput> {
    let c = ctx.cfg();
    let catalog = read_catalog(ctx)?;
    let thetas = load_thetas(ctx)?;
    let metric = read_metric(ctx)?;
    let seeds: Vec<assort::Seed> = io::read_jsonl(require(&ctx.output(SEEDS_FILE))?)?;
    let products = products_with_theta(&catalog, &thetas);
    let assortments = build_assortments(&seeds, &products, &metric, &c.assort)?;
    let path = ctx.output(ASSORTMENTS_FILE);
    io::write_jsonl_with_provenance(&path, &assortments, &ctx.provenance(Command::Assort))?;
    Ok(StageOutput { written: vec![path] })
}

fn eval_stage(ctx: &Context) -> Result<StageOutput> {
    let c = ctx.cfg();
    let thetas = load_thetas(ctx)?;
    let sessions = read_sessions(ctx)?;
    let assortments: Vec<Assortment> = io::read_jsonl(require(&ctx.output(ASSORTMENTS_FILE))?)?;
    let report = eval::evaluate(&assortments, &sessions, &thetas, c.eval.tau)?;
    let path = ctx.output(REPORT_FILE);
    io::write_json(
        &path,
        &ReportArtifact {
            report,
            provenance: ctx.provenance(Command::Eval),
        },
    )?;
    Ok(StageOutput { written: vec![path] })
}

/// Greedy QKP against the exhaustive optimum for each mined seed, on the
/// `oracle_candidates` products nearest that seed.
fn oracle(ctx: &Context) -> Result<StageOutput> {
    let c = ctx.cfg();
    let catalog = read_catalog(ctx)?;
    let thetas = load_thetas(ctx)?;
    let metric = read_metric(ctx)?;
    let seeds: Vec<assort::Seed> = io::read_jsonl(require(&ctx.output(SEEDS_FILE))?)?;
    let products = products_with_theta(&catalog, &thetas);
    let by_id: HashMap<&str, &Product> = products.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut instances = Vec::new();
    for seed in &seeds {
        let Some(pair) = resolve_seed(seed, &by_id) else { continue };
        let seed_vector = pair.seed_vector()?;
        let [va, vb] = &c.assort.seed_verticals;
        let mut pool: Vec<(f64, &Product)> = products
            .iter()
            .filter(|p| &p.vertical != va && &p.vertical != vb)
            .map(|p| (metric.distance_unchecked(&p.theta, &seed_vector), p))
            .collect();
        pool.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
        let candidates: Vec<Product> = pool
            .into_iter()
            .take(c.assort.oracle_candidates)
            .map(|(_, p)| p.clone())
            .collect();
        let budget = c.assort.budget_cents.saturating_sub(pair.cost());
        let greedy = assort::greedy_qkp(&pair, &candidates, &metric, budget, &c.assort.verticals, c.assort.max_passes)?;
        let best = synth::brute_force_qkp(&pair, &candidates, &metric, budget, &c.assort.verticals)?;
        let ratio = if best.objective > 0.0 { greedy.objective / best.objective } else { 1.0 };
        instances.push(OracleInstance {
            couch_set: seed.couch_set.clone(),
            coffee_table: seed.coffee_table.clone(),
            candidates: candidates.len(),
            greedy: greedy.objective,
            optimum: best.objective,
            ratio,
            greedy_feasible: greedy.feasible,
        });
    }
    let ratios: Vec<f64> = instances.iter().map(|i| i.ratio).collect();
    let report = OracleReport {
        min_ratio: ratios.iter().copied().fold(1.0, f64::min),
        mean_ratio: if ratios.is_empty() { 1.0 } else { ratios.iter().sum::<f64>() / ratios.len() as f64 },
        instances,
        provenance: ctx.provenance(Command::Oracle),
    };
    let path = ctx.output(ORACLE_FILE);
    io::write_json(&path, &report)?;
    Ok(StageOutput { written: vec![path] })
}
