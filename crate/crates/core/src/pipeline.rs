//! End-to-end batch pipeline over a workspace directory.
//!
//! Every stage reads its inputs from files written by earlier stages, so any
//! stage can be rerun alone. Stage outputs depend only on the inputs and the
//! configuration, never on thread count or timing.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::analyze::{Analyzer, AnalyzerKind, PhraseVocab, TextRules, TokenStream};
use crate::config::Config;
use crate::corpus::{Language, NameNormalizer, PatentStore};
use crate::error::{io_err, read_to_string, Error, Result};
use crate::eval::{self, average_precision, Evaluation, GradeFilter, Qrels};
use crate::fusion::{self, MergeExample, MergeFeatures, MergeModels, MergeTraining};
use crate::index::{build_augmented_metadocs, MetaDocument, TermIndex};
use crate::regress::RegressionModel;
use crate::rerank::{self, RerankTraining};
use crate::retrieve::{self, ModelId, Query, RankedList, Scorer, ScorerKind};
use crate::syngen::{self, Split};
use crate::terminology::{DomainMap, TermDb};
use crate::workingset::{self, cited_patents_run};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Gen,
    Ingest,
    Index,
    Worksets,
    Retrieve,
    TrainMerge,
    Merge,
    TrainRerank,
    Rerank,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Gen,
        Stage::Ingest,
        Stage::Index,
        Stage::Worksets,
        Stage::Retrieve,
        Stage::TrainMerge,
        Stage::Merge,
        Stage::TrainRerank,
        Stage::Rerank,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Ingest => "ingest",
            Stage::Index => "index",
            Stage::Worksets => "worksets",
            Stage::Retrieve => "retrieve",
            Stage::TrainMerge => "train-merge",
            Stage::Merge => "merge",
            Stage::TrainRerank => "train-rerank",
            Stage::Rerank => "rerank",
            Stage::Eval => "eval",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Relative artifact paths inside a workspace.
pub mod paths {
    pub const INPUT_DIR: &str = "input";
    pub const CITATIONS: &str = "ingest/citations.tsv";
    pub const PHRASES: &str = "index/phrases.tsv";
    pub const WORKSETS: &str = "worksets/worksets.tsv";
    pub const TRACE: &str = "worksets/trace.csv";
    pub const VALIDATION: &str = "worksets/validation.txt";
    pub const CITED_RUN: &str = "runs/cited.run";
    pub const MERGED_RUN: &str = "runs/merged.run";
    pub const FINAL_RUN: &str = "runs/final.run";
    pub const MERGE_MODEL: &str = "models/merge.json";
    pub const RERANK_MODEL: &str = "models/rerank.json";
    pub const RERANK_FEATURES: &str = "models/rerank_features.csv";
    pub const CONFIDENCES: &str = "confidences.csv";
    pub const REPORT_TXT: &str = "eval/report.txt";
    pub const REPORT_CSV: &str = "eval/report.csv";
    pub const MANIFEST: &str = "manifest.json";

    pub fn index(kind: crate::analyze::AnalyzerKind) -> String {
        format!("index/{kind}.idx")
    }

    pub fn run(model: &str) -> String {
        format!("runs/{model}.run")
    }
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

fn format_err(path: &Path) -> impl FnOnce((usize, String)) -> Error + '_ {
    move |(line, message)| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    }
}

pub fn read_run(path: &Path) -> Result<Vec<RankedList>> {
    retrieve::parse_run(&read_to_string(path)?).map_err(format_err(path))
}

pub fn read_topics(path: &Path) -> Result<Vec<(String, Split)>> {
    syngen::parse_topics(&read_to_string(path)?).map_err(format_err(path))
}

/// Models used for a topic in the given language. Monolingual mode keeps the
/// topic language's lemma models, concepts, and English phrases for English.
pub fn models_for(language: Language, monolingual: bool) -> Vec<ModelId> {
    ModelId::all()
        .into_iter()
        .filter(|m| {
            !monolingual
                || match m.analyzer {
                    AnalyzerKind::Concept => true,
                    AnalyzerKind::PhraseEn => language == Language::En,
                    lemma => lemma == AnalyzerKind::lemma(language),
                }
        })
        .collect()
}

/// Query-side meta-document: no citation texts, and in monolingual mode no
/// text outside the topic language.
pub fn query_document(store: &PatentStore, topic_id: &str, monolingual: bool) -> Option<MetaDocument> {
    let record = store.get(topic_id)?;
    let mut doc = MetaDocument::from_record(record);
    if monolingual {
        for lang in Language::ALL {
            if lang != record.language {
                doc.title.set(lang, String::new());
                doc.abstract_text.set(lang, String::new());
                doc.claims.set(lang, String::new());
            }
        }
    }
    Some(doc)
}

fn scorer_for(config: &Config, model: ModelId) -> Scorer {
    match model.scorer {
        ScorerKind::Kl => Scorer::Kl(config.retrieval.kl()),
        ScorerKind::Bm25 => Scorer::Bm25(config.retrieval.bm25()),
    }
}

/// (topic, model, confidence) as written to the confidence table.
pub type ConfidenceRow = (String, String, f64);

/// (topic, document, features) for the rerank audit file.
type AuditRow = (String, String, rerank::RerankFeatures);

/// Feature vector and regression target.
type TrainingRow = (Vec<f64>, f64);

/// Per-model lists keyed by topic.
pub type ModelRuns = BTreeMap<ModelId, HashMap<String, RankedList>>;

pub struct Pipeline {
    pub workspace: PathBuf,
    pub config: Config,
}

impl Pipeline {
    pub fn new(workspace: impl Into<PathBuf>, config: Config) -> Self {
        Pipeline {
            workspace: workspace.into(),
            config,
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.workspace.join(rel)
    }

    fn input(&self, configured: &Option<PathBuf>, name: &str) -> PathBuf {
        configured
            .clone()
            .unwrap_or_else(|| self.workspace.join(paths::INPUT_DIR).join(name))
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.input(&self.config.input.corpus, "corpus.jsonl")
    }

    pub fn termdb_path(&self) -> PathBuf {
        self.input(&self.config.input.termdb, "termdb.tsv")
    }

    pub fn domains_path(&self) -> PathBuf {
        self.input(&self.config.input.domains, "domains.tsv")
    }

    pub fn qrels_path(&self) -> PathBuf {
        self.input(&self.config.input.qrels, "qrels.txt")
    }

    pub fn topics_path(&self) -> PathBuf {
        self.input(&self.config.input.topics, "topics.tsv")
    }

    pub fn load_store(&self) -> Result<PatentStore> {
        PatentStore::load(&self.corpus_path(), &NameNormalizer::default())
    }

    pub fn load_qrels(&self) -> Result<Qrels> {
        Qrels::load(&self.qrels_path())
    }

    pub fn load_topics(&self) -> Result<Vec<(String, Split)>> {
        read_topics(&self.topics_path())
    }

    pub fn topics_in(&self, split: Split) -> Result<Vec<String>> {
        Ok(self
            .load_topics()?
            .into_iter()
            .filter(|(_, s)| *s == split)
            .map(|(t, _)| t)
            .collect())
    }

    pub fn load_validation(&self) -> Result<Vec<String>> {
        let path = self.path(paths::VALIDATION);
        Ok(read_to_string(&path)?
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect())
    }

    /// Topics followed by validation topics: everything that gets a run.
    pub fn all_query_topics(&self) -> Result<Vec<String>> {
        let mut topics: Vec<String> = self.load_topics()?.into_iter().map(|(t, _)| t).collect();
        topics.extend(self.load_validation()?);
        Ok(topics)
    }

    /// Analyzer with terminology and, once indexed, the phrase vocabulary.
    pub fn load_analyzer(&self, with_phrases: bool) -> Result<Analyzer> {
        let mut analyzer = Analyzer::new(TextRules::default());
        let termdb = TermDb::load(&self.termdb_path(), &analyzer.rules)?;
        let domains = DomainMap::load(&self.domains_path())?;
        analyzer.concepts = Some((termdb, domains));
        if with_phrases {
            let path = self.path(paths::PHRASES);
            analyzer.phrases = PhraseVocab::parse_tsv(&read_to_string(&path)?).map_err(format_err(&path))?;
        }
        Ok(analyzer)
    }

    /// Active working sets keyed by topic.
    pub fn load_working_sets(&self) -> Result<BTreeMap<String, BTreeSet<String>>> {
        let path = self.path(paths::WORKSETS);
        workingset::parse_working_sets(&read_to_string(&path)?).map_err(format_err(&path))
    }

    pub fn load_model_runs(&self) -> Result<ModelRuns> {
        let mut runs = ModelRuns::new();
        for model in ModelId::all() {
            let path = self.path(&paths::run(&model.to_string()));
            if !path.exists() && self.config.fusion.monolingual {
                continue;
            }
            let lists = read_run(&path)?;
            runs.insert(model, lists.into_iter().map(|l| (l.topic_id.clone(), l)).collect());
        }
        Ok(runs)
    }

    pub fn load_merge_models(&self) -> Result<MergeModels> {
        MergeModels::from_json(&read_to_string(&self.path(paths::MERGE_MODEL))?)
    }

    pub fn load_rerank_model(&self) -> Result<RegressionModel> {
        RegressionModel::from_json(&read_to_string(&self.path(paths::RERANK_MODEL))?)
    }

    /// Runs one stage and records its wall time in the manifest.
    pub fn run_stage(&self, stage: Stage) -> Result<()> {
        let start = Instant::now();
        log::info!("stage {} starting", stage.name());
        match stage {
            Stage::Gen => self.gen(),
            Stage::Ingest => self.ingest(),
            Stage::Index => self.index(),
            Stage::Worksets => self.worksets(),
            Stage::Retrieve => self.retrieve(),
            Stage::TrainMerge => self.train_merge(),
            Stage::Merge => self.merge(),
            Stage::TrainRerank => self.train_rerank(),
            Stage::Rerank => self.rerank(),
            Stage::Eval => self.eval().map(|_| ()),
        }?;
        let seconds = start.elapsed().as_secs_f64();
        log::info!("stage {} done in {seconds:.2}s", stage.name());
        self.record_timing(stage, seconds)
    }

    /// All stages; `gen` only when `generate` is set.
    pub fn run_all(&self, generate: bool) -> Result<()> {
        for stage in Stage::ALL {
            if stage == Stage::Gen && !generate {
                continue;
            }
            self.run_stage(stage)?;
        }
        Ok(())
    }

    fn record_timing(&self, stage: Stage, seconds: f64) -> Result<()> {
        let path = self.path(paths::MANIFEST);
        let mut manifest = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str::<serde_json::Value>(&text).unwrap_or(serde_json::Value::Null),
            Err(_) => serde_json::Value::Null,
        };
        let hash = self.config.hash();
        if manifest.get("config_hash").and_then(|h| h.as_str()) != Some(hash.as_str()) {
            manifest = serde_json::json!({
                "config_hash": hash,
                "seed": self.config.seed,
                "stages": {},
            });
        }
        manifest["stages"][stage.name()] = serde_json::json!({ "seconds": seconds });
        write_file(&path, serde_json::to_string_pretty(&manifest).expect("json") + "\n")
    }

    // -- stages ------------------------------------------------------------

    pub fn gen(&self) -> Result<()> {
        syngen::generate(self.config.seed, &self.config.gen)?.write(&self.path(paths::INPUT_DIR))
    }

    /// Normalizes names, resolves citations and writes the citation edges.
    pub fn ingest(&self) -> Result<()> {
        let store = self.load_store()?;
        let mut out = String::from("from_id\tto_id\tcategory\n");
        for e in store.edges() {
            let _ = writeln!(out, "{}\t{}\t{}", e.from_id, e.to_id, e.category.code());
        }
        log::info!("{} patents, {} citation edges", store.len(), store.edges().len());
        write_file(&self.path(paths::CITATIONS), out)
    }

    /// Mines phrases and writes one index per analyzer.
    pub fn index(&self) -> Result<()> {
        let store = self.load_store()?;
        let docs = build_augmented_metadocs(&store);
        let mut analyzer = self.load_analyzer(false)?;
        let rules = &analyzer.rules;
        let per_doc: Vec<Vec<TokenStream>> = docs
            .par_iter()
            .map(|d| {
                d.texts(Language::En)
                    .into_iter()
                    .map(|t| rules.analyze(t, Language::En))
                    .collect()
            })
            .collect();
        let phrases = crate::analyze::extract_phrases(per_doc.iter().flatten(), &self.config.analysis.phrase_params());
        drop(per_doc);
        write_file(&self.path(paths::PHRASES), phrases.to_tsv())?;
        analyzer.phrases = phrases;
        for kind in AnalyzerKind::ALL {
            let index = TermIndex::build(&docs, &analyzer, kind)?;
            log::info!("index {kind}: {} docs, {} terms", index.num_docs(), index.num_terms());
            index.write(&self.path(&paths::index(kind)))?;
        }
        Ok(())
    }

    /// Working sets for all topics plus the validation topics, which are
    /// chosen here and filtered by priority date.
    pub fn worksets(&self) -> Result<()> {
        let store = self.load_store()?;
        let topics: Vec<String> = self.load_topics()?.into_iter().map(|(t, _)| t).collect();
        let exclude: BTreeSet<String> = topics.iter().cloned().collect();
        let validation = fusion::build_validation_set(
            &store,
            self.config.fusion.validation_size,
            self.config.fusion.min_citations,
            &exclude,
        );
        let mut sets = workingset::build_working_sets(&topics, &store, &self.config.workingset.params(false))?;
        sets.extend(workingset::build_working_sets(
            &validation,
            &store,
            &self.config.workingset.params(true),
        )?);
        let active = sets.iter().filter(|s| s.active).count();
        log::info!("{} working sets, {active} active", sets.len());
        write_file(
            &self.path(paths::VALIDATION),
            validation.iter().map(|v| format!("{v}\n")).collect::<String>(),
        )?;
        write_file(&self.path(paths::WORKSETS), workingset::write_working_sets(&sets))?;
        write_file(&self.path(paths::TRACE), workingset::write_step_trace(&sets))
    }

    /// One run file per model plus the cited-patents baseline.
    pub fn retrieve(&self) -> Result<()> {
        let store = self.load_store()?;
        let analyzer = self.load_analyzer(true)?;
        let topics = self.all_query_topics()?;
        let sets = if self.config.retrieval.use_working_sets {
            self.load_working_sets()?
        } else {
            BTreeMap::new()
        };
        let mut indexes = BTreeMap::new();
        for kind in AnalyzerKind::ALL {
            indexes.insert(kind, TermIndex::read(&self.path(&paths::index(kind)))?);
        }
        let monolingual = self.config.fusion.monolingual;
        let cutoff = self.config.retrieval.cutoff;
        let per_topic: Vec<Vec<RankedList>> = topics
            .par_iter()
            .map(|topic| {
                let doc = query_document(&store, topic, monolingual)
                    .ok_or_else(|| Error::Config(format!("topic {topic} is not in the collection")))?;
                let set: Option<HashSet<String>> = sets.get(topic).map(|s| s.iter().cloned().collect());
                let mut lists = Vec::new();
                let mut queries: HashMap<AnalyzerKind, Query> = HashMap::new();
                for model in models_for(doc.language, monolingual) {
                    let query = match queries.get(&model.analyzer) {
                        Some(q) => q.clone(),
                        None => {
                            let q = Query::new(topic.clone(), analyzer.analyze_to_terms(&doc, model.analyzer)?);
                            queries.insert(model.analyzer, q.clone());
                            q
                        }
                    };
                    let name = model.to_string();
                    let list = match retrieve::retrieve(
                        &query,
                        &indexes[&model.analyzer],
                        &scorer_for(&self.config, model),
                        &name,
                        set.as_ref(),
                        cutoff,
                    ) {
                        Err(Error::EmptyQuery) => RankedList::new(topic.clone(), name),
                        other => other?,
                    };
                    lists.push(list);
                }
                Ok(lists)
            })
            .collect::<Result<_>>()?;
        let mut by_model: BTreeMap<String, Vec<RankedList>> = ModelId::all()
            .into_iter()
            .filter(|m| !monolingual || Language::ALL.iter().any(|&l| models_for(l, true).contains(m)))
            .map(|m| (m.to_string(), Vec::new()))
            .collect();
        for list in per_topic.into_iter().flatten() {
            by_model.get_mut(&list.model_id).expect("known model").push(list);
        }
        for (model, lists) in &by_model {
            write_file(&self.path(&paths::run(model)), retrieve::write_run(lists))?;
        }
        let cited: Vec<RankedList> = topics.iter().map(|t| cited_patents_run(t, &store)).collect();
        write_file(&self.path(paths::CITED_RUN), retrieve::write_run(&cited))
    }

    /// Merge features of every available list for one topic.
    pub fn topic_features(
        &self,
        store: &PatentStore,
        analyzer: &Analyzer,
        runs: &ModelRuns,
        sets: &BTreeMap<String, BTreeSet<String>>,
        topic: &str,
    ) -> Result<HashMap<ModelId, MergeFeatures>> {
        let monolingual = self.config.fusion.monolingual;
        let doc = query_document(store, topic, monolingual)
            .ok_or_else(|| Error::Config(format!("topic {topic} is not in the collection")))?;
        let record = store.get(topic).expect("topic present");
        let set_size = sets.get(topic).map(BTreeSet::len);
        let mut queries: HashMap<AnalyzerKind, Query> = HashMap::new();
        let mut out = HashMap::new();
        for model in models_for(doc.language, monolingual) {
            let Some(list) = runs.get(&model).and_then(|r| r.get(topic)).cloned().or_else(|| {
                runs.contains_key(&model)
                    .then(|| RankedList::new(topic, model.to_string()))
            }) else {
                continue;
            };
            let query = match queries.entry(model.analyzer) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(Query::new(topic, analyzer.analyze_to_terms(&doc, model.analyzer)?)),
            };
            let features = fusion::extract_merge_features(record, model, query, &list, set_size);
            out.insert(model, features);
        }
        Ok(out)
    }

    /// Confidence regressors from train topics (file judgments) and validation
    /// topics (their own description citations).
    pub fn train_merge(&self) -> Result<()> {
        let models = self.fit_merge_models()?;
        write_file(&self.path(paths::MERGE_MODEL), models.to_json())
    }

    pub fn fit_merge_models(&self) -> Result<MergeModels> {
        let store = self.load_store()?;
        let analyzer = self.load_analyzer(true)?;
        let runs = self.load_model_runs()?;
        let sets = self.load_working_sets()?;
        let file_qrels = self.load_qrels()?;
        let validation = self.load_validation()?;
        let validation_qrels = fusion::validation_qrels(&store, &validation);
        let mut jobs: Vec<(String, &Qrels)> = self
            .topics_in(Split::Train)?
            .into_iter()
            .map(|t| (t, &file_qrels))
            .collect();
        jobs.extend(validation.into_iter().map(|t| (t, &validation_qrels)));

        let per_topic: Vec<Vec<(ModelId, MergeExample)>> = jobs
            .par_iter()
            .map(|(topic, qrels)| {
                let relevant = qrels.relevant_set(topic, GradeFilter::All);
                if relevant.is_empty() {
                    return Ok(Vec::new());
                }
                let features = self.topic_features(&store, &analyzer, &runs, &sets, topic)?;
                let mut rows: Vec<(ModelId, MergeExample)> = Vec::new();
                for (model, features) in features {
                    let ap = match runs.get(&model).and_then(|r| r.get(topic.as_str())) {
                        Some(list) => average_precision(list.ids(), &relevant)?,
                        None => 0.0,
                    };
                    rows.push((model, MergeExample { features, ap }));
                }
                rows.sort_by_key(|(m, _)| *m);
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        let mut examples: BTreeMap<ModelId, Vec<MergeExample>> = BTreeMap::new();
        for (model, example) in per_topic.into_iter().flatten() {
            examples.entry(model).or_default().push(example);
        }
        let training = MergeTraining {
            grid: self.config.fusion.learner.grid(),
            folds: self.config.fusion.learner.folds,
        };
        fusion::train_merge(&examples, &training)
    }

    /// Merged lists for `topics` under `models`, with the confidence table.
    pub fn merge_topics(
        &self,
        models: &MergeModels,
        topics: &[String],
    ) -> Result<(Vec<RankedList>, Vec<ConfidenceRow>)> {
        let store = self.load_store()?;
        let analyzer = self.load_analyzer(true)?;
        let runs = self.load_model_runs()?;
        let sets = self.load_working_sets()?;
        let cutoff = self.config.retrieval.cutoff;
        let results: Vec<(RankedList, Vec<ConfidenceRow>)> = topics
            .par_iter()
            .map(|topic| {
                let features = self.topic_features(&store, &analyzer, &runs, &sets, topic)?;
                let mut order: Vec<ModelId> = features.keys().copied().collect();
                order.sort();
                let confidences = fusion::topic_confidences(models, &features, &order);
                let lists: Vec<RankedList> = order
                    .iter()
                    .map(|m| {
                        runs[m]
                            .get(topic.as_str())
                            .map(fusion::normalize_scores)
                            .unwrap_or_else(|| RankedList::new(topic.as_str(), m.to_string()))
                    })
                    .collect();
                let merged = fusion::merge(topic, &lists, &confidences, cutoff);
                let rows = order
                    .iter()
                    .zip(&confidences)
                    .map(|(m, &c)| (topic.clone(), m.to_string(), c))
                    .collect();
                Ok((merged, rows))
            })
            .collect::<Result<_>>()?;
        let (lists, rows): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        Ok((lists, rows.into_iter().flatten().collect()))
    }

    pub fn merge(&self) -> Result<()> {
        let models = self.load_merge_models()?;
        let topics: Vec<String> = self.load_topics()?.into_iter().map(|(t, _)| t).collect();
        let (lists, confidences) = self.merge_topics(&models, &topics)?;
        write_file(&self.path(paths::CONFIDENCES), fusion::confidences_csv(&confidences))?;
        write_file(&self.path(paths::MERGED_RUN), retrieve::write_run(&lists))
    }

    pub fn load_merged(&self) -> Result<HashMap<String, RankedList>> {
        Ok(read_run(&self.path(paths::MERGED_RUN))?
            .into_iter()
            .map(|l| (l.topic_id.clone(), l))
            .collect())
    }

    /// Boost model from merged lists of the train topics.
    pub fn train_rerank(&self) -> Result<()> {
        let store = self.load_store()?;
        let qrels = self.load_qrels()?;
        let merged = self.load_merged()?;
        let train = self.topics_in(Split::Train)?;
        let negatives = self.config.rerank.negatives;
        let per_topic: Vec<(Vec<TrainingRow>, Vec<AuditRow>)> = train
            .par_iter()
            .filter_map(|t| Some((t, merged.get(t)?, store.get(t)?)))
            .map(|(t, list, record)| {
                let relevant = qrels.relevant_set(t, GradeFilter::All);
                let features = rerank::extract_rerank_features(record, list, &store);
                let rows = rerank::training_rows(&features, list, &relevant, negatives);
                let audit = list
                    .entries
                    .iter()
                    .zip(features)
                    .take(negatives)
                    .map(|((id, _), f)| (t.clone(), id.clone(), f))
                    .collect();
                (rows, audit)
            })
            .collect();
        let (rows, audit): (Vec<_>, Vec<_>) = per_topic.into_iter().unzip();
        let rows: Vec<(Vec<f64>, f64)> = rows.into_iter().flatten().collect();
        let audit: Vec<_> = audit.into_iter().flatten().collect();
        let training = RerankTraining {
            negatives,
            max_rows: self.config.rerank.max_rows,
            grid: self.config.rerank.learner.grid(),
            folds: self.config.rerank.learner.folds,
        };
        let model = rerank::train_rerank(rows, &training)?;
        write_file(&self.path(paths::RERANK_FEATURES), rerank::features_csv(&audit))?;
        write_file(&self.path(paths::RERANK_MODEL), model.to_json())
    }

    /// Applies a boost model to the given merged lists.
    pub fn rerank_lists(&self, store: &PatentStore, lists: &[RankedList], model: &RegressionModel) -> Vec<RankedList> {
        let cutoff = self.config.retrieval.cutoff;
        lists
            .par_iter()
            .map(|list| match store.get(&list.topic_id) {
                Some(record) => {
                    let features = rerank::extract_rerank_features(record, list, store);
                    rerank::apply_rerank(list, &features, model, cutoff)
                }
                None => list.clone(),
            })
            .collect()
    }

    pub fn rerank(&self) -> Result<()> {
        let store = self.load_store()?;
        let model = self.load_rerank_model()?;
        let lists = read_run(&self.path(paths::MERGED_RUN))?;
        let reranked = self.rerank_lists(&store, &lists, &model);
        write_file(&self.path(paths::FINAL_RUN), retrieve::write_run(&reranked))
    }

    /// Scores every run on the test topics under both grade filters.
    pub fn eval(&self) -> Result<Vec<Evaluation>> {
        let qrels = self.load_qrels()?;
        let test: BTreeSet<String> = self.topics_in(Split::Test)?.into_iter().collect();
        let mut names: Vec<String> = ModelId::all()
            .into_iter()
            .map(|m| m.to_string())
            .filter(|m| self.path(&paths::run(m)).exists())
            .collect();
        names.extend(["cited", "merged", "final"].map(String::from));
        let mut evals = Vec::new();
        for name in &names {
            let lists = read_run(&self.path(&paths::run(name)))?;
            for filter in [GradeFilter::All, GradeFilter::High] {
                match eval::evaluate(name, &lists, &qrels, filter, Some(&test)) {
                    Ok(e) => evals.push(e),
                    Err(Error::Eval(msg)) => log::warn!("{msg}"),
                    Err(e) => return Err(e),
                }
            }
        }
        write_file(&self.path(paths::REPORT_TXT), eval::report_text(&evals))?;
        write_file(&self.path(paths::REPORT_CSV), eval::report_csv(&evals))?;
        Ok(evals)
    }
}
