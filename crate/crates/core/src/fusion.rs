//! Query-dependent confidence regression and linear merging of normalized lists.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Language, PatentRecord, PatentStore};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::regress::{self, Learner, RegressionModel};
use crate::retrieve::{rank_order, ModelId, Query, RankedList};

/// Min-max normalization to [0,1], order preserved. A list whose scores are all
/// equal maps to zeros.
pub fn normalize_scores(list: &RankedList) -> RankedList {
    let (lo, hi) = list
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, s)| {
            (lo.min(*s), hi.max(*s))
        });
    let entries = list
        .entries
        .iter()
        .map(|(id, s)| (id.clone(), if hi > lo { (s - lo) / (hi - lo) } else { 0.0 }))
        .collect();
    RankedList {
        topic_id: list.topic_id.clone(),
        model_id: list.model_id.clone(),
        entries,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeFeatures {
    /// f1
    pub language: Language,
    /// f2: total query term count.
    pub query_size: f64,
    /// f3: 0 when the working set is inactive or absent.
    pub working_set_size: f64,
    /// f4, f5: raw score extremes; 0 for an empty list.
    pub min_score: f64,
    pub max_score: f64,
    /// f6 = f5 − f4.
    pub score_range: f64,
    /// f7: first character of the main IPC class.
    pub ipc_section: Option<char>,
    /// f8: first three characters of the main IPC class.
    pub ipc_class: Option<String>,
    /// f9: mean words per phrase term in the query, phrase models only.
    pub phrase_length: Option<f64>,
}

pub fn extract_merge_features(
    topic: &PatentRecord,
    model: ModelId,
    query: &Query,
    list: &RankedList,
    working_set_size: Option<usize>,
) -> MergeFeatures {
    let (min_score, max_score) = if list.is_empty() {
        (0.0, 0.0)
    } else {
        list.entries
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, s)| {
                (lo.min(*s), hi.max(*s))
            })
    };
    let main_ipc = topic.ipc_classes.first();
    let phrase_length = model.is_phrase().then(|| {
        let (words, count) = query.terms.iter().fold((0.0, 0.0), |(w, c), (term, &n)| {
            let n = f64::from(n);
            (w + n * term.split('_').count() as f64, c + n)
        });
        if count > 0.0 {
            words / count
        } else {
            0.0
        }
    });
    MergeFeatures {
        language: topic.language,
        query_size: query.size() as f64,
        working_set_size: working_set_size.unwrap_or(0) as f64,
        min_score,
        max_score,
        score_range: max_score - min_score,
        ipc_section: main_ipc.and_then(|c| c.chars().next()),
        ipc_class: main_ipc.map(|c| c.chars().take(3).collect()),
        phrase_length,
    }
}

const SECTIONS: [char; 8] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H'];

/// One-hot layout: language (3), f2–f6, IPC section (8), IPC class vocabulary,
/// then f9 for phrase models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub ipc_vocab: Vec<String>,
    pub phrase: bool,
}

impl FeatureSchema {
    pub fn new(ipc_vocab: impl IntoIterator<Item = String>, phrase: bool) -> Self {
        let set: BTreeSet<String> = ipc_vocab.into_iter().collect();
        FeatureSchema {
            ipc_vocab: set.into_iter().collect(),
            phrase,
        }
    }

    pub fn dim(&self) -> usize {
        3 + 5 + SECTIONS.len() + self.ipc_vocab.len() + usize::from(self.phrase)
    }

    pub fn name(&self) -> String {
        format!("merge:ipc{}:phrase={}", self.ipc_vocab.len(), self.phrase)
    }

    pub fn encode(&self, f: &MergeFeatures) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend(Language::ALL.iter().map(|&l| f64::from(u8::from(l == f.language))));
        v.extend([
            f.query_size,
            f.working_set_size,
            f.min_score,
            f.max_score,
            f.score_range,
        ]);
        v.extend(SECTIONS.iter().map(|&s| f64::from(u8::from(f.ipc_section == Some(s)))));
        v.extend(
            self.ipc_vocab
                .iter()
                .map(|c| f64::from(u8::from(f.ipc_class.as_deref() == Some(c)))),
        );
        if self.phrase {
            v.push(f.phrase_length.unwrap_or(0.0));
        }
        v
    }
}

pub const MERGE_FORMAT_VERSION: u32 = 1;

/// Per-model confidence regressors sharing one IPC class vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeModels {
    pub format_version: u32,
    pub ipc_vocab: Vec<String>,
    pub models: BTreeMap<String, RegressionModel>,
}

impl MergeModels {
    /// Every model gets confidence 1.
    pub fn uniform() -> Self {
        MergeModels {
            format_version: MERGE_FORMAT_VERSION,
            ipc_vocab: Vec::new(),
            models: BTreeMap::new(),
        }
    }

    pub fn schema(&self, model: ModelId) -> FeatureSchema {
        FeatureSchema {
            ipc_vocab: self.ipc_vocab.clone(),
            phrase: model.is_phrase(),
        }
    }

    /// Predicted confidence clamped at zero; 1 for a model without a regressor.
    pub fn confidence(&self, model: ModelId, features: &MergeFeatures) -> f64 {
        match self.models.get(&model.to_string()) {
            Some(m) => m.predict(&self.schema(model).encode(features)).max(0.0),
            None => 1.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let models: MergeModels =
            serde_json::from_str(text).map_err(|e| Error::Fit(format!("merge model JSON: {e}")))?;
        if models.format_version != MERGE_FORMAT_VERSION {
            return Err(Error::Fit(format!(
                "unsupported merge model version {}",
                models.format_version
            )));
        }
        for (name, m) in &models.models {
            let model: ModelId = name.parse()?;
            let expected = models.schema(model).dim();
            // Round-trip through the validating loader.
            let m = RegressionModel::from_json(&m.to_json())?;
            if m.dim().is_some_and(|d| d != expected) {
                return Err(Error::Fit(format!("model {name} expects {expected} features")));
            }
        }
        Ok(models)
    }
}

/// One training row: a model's features on a topic and that list's AP.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeExample {
    pub features: MergeFeatures,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeTraining {
    pub grid: Vec<Learner>,
    pub folds: usize,
}

impl Default for MergeTraining {
    fn default() -> Self {
        MergeTraining {
            grid: regress::rbf_grid(&regress::DEFAULT_GAMMAS, &regress::DEFAULT_REGS),
            folds: 5,
        }
    }
}

/// Fits one confidence regressor per model (in parallel) from features to
/// per-topic average precision. The IPC vocabulary is the set of classes seen
/// in training.
pub fn train_merge(examples: &BTreeMap<ModelId, Vec<MergeExample>>, training: &MergeTraining) -> Result<MergeModels> {
    let ipc_vocab: BTreeSet<String> = examples
        .values()
        .flatten()
        .filter_map(|e| e.features.ipc_class.clone())
        .collect();
    let ipc_vocab: Vec<String> = ipc_vocab.into_iter().collect();
    let fitted: Vec<(String, RegressionModel)> = examples
        .par_iter()
        .map(|(&model, rows)| {
            if rows.len() < 2 {
                return Err(Error::Fit(format!("model {model} needs at least 2 training topics")));
            }
            let schema = FeatureSchema {
                ipc_vocab: ipc_vocab.clone(),
                phrase: model.is_phrase(),
            };
            let x: Vec<Vec<f64>> = rows.iter().map(|e| schema.encode(&e.features)).collect();
            let y: Vec<f64> = rows.iter().map(|e| e.ap).collect();
            let fitted = regress::train(&x, &y, training.folds, &training.grid)?.with_schema(schema.name());
            Ok((model.to_string(), fitted))
        })
        .collect::<Result<_>>()?;
    Ok(MergeModels {
        format_version: MERGE_FORMAT_VERSION,
        ipc_vocab,
        models: fitted.into_iter().collect(),
    })
}

/// `s_d = Σ_m c_m · w_{m,d}` over the union of the lists, with `w = 0` where a
/// list lacks the document. Lists must already be normalized.
pub fn merge(topic_id: &str, lists: &[RankedList], confidences: &[f64], cutoff: usize) -> RankedList {
    assert_eq!(lists.len(), confidences.len(), "one confidence per list");
    let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
    for (list, &c) in lists.iter().zip(confidences) {
        for (id, w) in &list.entries {
            *scores.entry(id.as_str()).or_insert(0.0) += c * w;
        }
    }
    let mut scored: Vec<(String, f64)> = scores.into_iter().map(|(id, s)| (id.to_string(), s)).collect();
    scored.sort_by(rank_order);
    scored.truncate(cutoff);
    RankedList {
        topic_id: topic_id.to_string(),
        model_id: "merged".to_string(),
        entries: scored,
    }
}

/// `topic_id,model_id,confidence` lines.
pub fn confidences_csv(rows: &[(String, String, f64)]) -> String {
    let mut out = String::from("topic_id,model_id,confidence\n");
    for (t, m, c) in rows {
        let _ = writeln!(out, "{t},{m},{c}");
    }
    out
}

/// Patents with at least `min_citations` in-collection description citations,
/// chosen so language and main-IPC-class shares follow the collection's.
/// Excluded ids (held-out topics) never appear. Returns fewer than `n` when the
/// candidates run out.
pub fn build_validation_set(
    store: &PatentStore,
    n: usize,
    min_citations: usize,
    exclude: &BTreeSet<String>,
) -> Vec<String> {
    let stratum = |r: &PatentRecord| {
        let class: String = r
            .ipc_classes
            .first()
            .map(|c| c.chars().take(3).collect())
            .unwrap_or_default();
        (r.language, class)
    };
    let mut population: BTreeMap<(Language, String), usize> = BTreeMap::new();
    for r in store.records() {
        *population.entry(stratum(r)).or_insert(0) += 1;
    }
    let mut candidates: BTreeMap<(Language, String), Vec<&str>> = BTreeMap::new();
    for r in store.records() {
        if r.cited_ids.len() >= min_citations && !exclude.contains(&r.id) {
            candidates.entry(stratum(r)).or_default().push(&r.id);
        }
    }
    let available: usize = candidates.values().map(Vec::len).sum();
    if available <= n {
        if available < n {
            log::warn!("validation set: only {available} candidates for {n} requested");
        }
        let mut all: Vec<String> = candidates.into_values().flatten().map(String::from).collect();
        all.sort();
        return all;
    }

    // Largest-remainder quotas over the population shares.
    let total = store.len() as f64;
    let mut quota: BTreeMap<&(Language, String), usize> = BTreeMap::new();
    let mut remainders = Vec::new();
    for (key, &count) in &population {
        let exact = n as f64 * count as f64 / total;
        quota.insert(key, exact.floor() as usize);
        remainders.push((exact - exact.floor(), key));
    }
    let assigned: usize = quota.values().sum();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    for (_, key) in remainders.iter().take(n - assigned) {
        *quota.get_mut(key).expect("known stratum") += 1;
    }

    let mut chosen: Vec<String> = Vec::with_capacity(n);
    let mut leftover: Vec<&str> = Vec::new();
    for (key, ids) in &candidates {
        let q = quota.get(key).copied().unwrap_or(0).min(ids.len());
        chosen.extend(ids[..q].iter().map(|s| s.to_string()));
        leftover.extend(&ids[q..]);
    }
    // Shortfalls in thin strata are filled evenly from the rest.
    let missing = n - chosen.len();
    if missing > 0 {
        leftover.sort_unstable();
        let step = leftover.len() as f64 / missing as f64;
        chosen.extend((0..missing).map(|i| leftover[(i as f64 * step) as usize].to_string()));
    }
    chosen.sort();
    chosen
}

/// Judgments for validation topics: their in-collection description citations
/// published no later than the topic's priority date, at grade 1.
pub fn validation_qrels(store: &PatentStore, topics: &[String]) -> Qrels {
    let mut q = Qrels::new();
    for t in topics {
        let Some(r) = store.get(t) else { continue };
        for cited in &r.cited_ids {
            if store
                .get(cited)
                .is_some_and(|c| c.publication_date() <= r.priority_date)
            {
                q.insert(t, cited, 1);
            }
        }
    }
    q
}

/// Confidence per list for one topic, in list order.
pub fn topic_confidences(
    models: &MergeModels,
    features: &HashMap<ModelId, MergeFeatures>,
    order: &[ModelId],
) -> Vec<f64> {
    order
        .iter()
        .map(|m| features.get(m).map_or(0.0, |f| models.confidence(*m, f)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::AnalyzerKind;
    use crate::retrieve::ScorerKind;

    fn list(entries: &[(&str, f64)]) -> RankedList {
        RankedList {
            topic_id: "t".into(),
            model_id: "m".into(),
            entries: entries.iter().map(|(i, s)| (i.to_string(), *s)).collect(),
        }
    }

    #[test]
    fn normalization_examples() {
        let n = normalize_scores(&list(&[("c", 20.0), ("b", 10.0), ("a", 5.0)]));
        assert_eq!(n.entries.iter().map(|e| e.1).collect::<Vec<_>>(), [1.0, 1.0 / 3.0, 0.0]);
        let flat = normalize_scores(&list(&[("a", 2.0), ("b", 2.0)]));
        assert!(flat.entries.iter().all(|e| e.1 == 0.0));
        let two = normalize_scores(&list(&[("a", 7.0), ("b", 3.0)]));
        assert_eq!(two.entries.iter().map(|e| e.1).collect::<Vec<_>>(), [1.0, 0.0]);
        assert!(normalize_scores(&list(&[])).is_empty());
    }

    #[test]
    fn merge_arithmetic() {
        let a = list(&[("d", 1.0)]);
        let b = list(&[("d", 0.4)]);
        let m = merge("t", &[a.clone(), b], &[0.5, 0.5], 1000);
        assert_eq!(m.entries, [("d".to_string(), 0.7)]);
        let c = list(&[("e", 0.8)]);
        let m = merge("t", &[a, c], &[1.0, 1.0], 1000);
        assert_eq!(m.entries[1], ("e".to_string(), 0.8));
        assert!(merge("t", &[], &[], 10).is_empty());
    }

    #[test]
    fn feature_extraction() {
        let topic = crate::workingset::tests::rec("EP0000001", "", &[], &["F02B"]);
        let model = ModelId {
            scorer: ScorerKind::Kl,
            analyzer: AnalyzerKind::PhraseEn,
        };
        let query = Query::new("EP0000001", [("a_b".to_string(), 1), ("c_d_e".to_string(), 1)].into());
        let f = extract_merge_features(&topic, model, &query, &list(&[("x", -2.0), ("y", -5.0)]), None);
        assert_eq!((f.min_score, f.max_score, f.score_range), (-5.0, -2.0, 3.0));
        assert_eq!(f.working_set_size, 0.0);
        assert_eq!(f.phrase_length, Some(2.5));
        assert_eq!(f.ipc_class.as_deref(), Some("F02"));
        let schema = FeatureSchema::new(["F02".to_string(), "A61".to_string()], true);
        let v = schema.encode(&f);
        assert_eq!(v.len(), schema.dim());
        assert_eq!(&v[..3], [1.0, 0.0, 0.0]);
        assert_eq!(v[8 + 5], 1.0); // section F
        assert_eq!(&v[16..18], [0.0, 1.0]); // vocabulary sorted: A61, F02
        assert_eq!(v[18], 2.5);
    }

    #[test]
    fn learned_confidence_separates_languages() {
        let model = ModelId {
            scorer: ScorerKind::Kl,
            analyzer: AnalyzerKind::LemmaEn,
        };
        let mut rows = Vec::new();
        for i in 0..20 {
            let lang = if i % 2 == 0 { Language::En } else { Language::De };
            rows.push(MergeExample {
                features: MergeFeatures {
                    language: lang,
                    query_size: 100.0 + i as f64,
                    working_set_size: 0.0,
                    min_score: -3.0,
                    max_score: -1.0,
                    score_range: 2.0,
                    ipc_section: Some('A'),
                    ipc_class: Some("A61".into()),
                    phrase_length: None,
                },
                ap: if lang == Language::En { 1.0 } else { 0.0 },
            });
        }
        let models = train_merge(&[(model, rows.clone())].into(), &MergeTraining::default()).unwrap();
        let en = models.confidence(model, &rows[0].features);
        let de = models.confidence(model, &rows[1].features);
        assert!(en > 0.9 && de < 0.1, "{en} {de}");
        let back = MergeModels::from_json(&models.to_json()).unwrap();
        assert_eq!(back, models);
    }
}
