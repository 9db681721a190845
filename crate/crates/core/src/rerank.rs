//! Metadata re-ranking of a merged list with the boost `w' = w·(s + 1)`.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::corpus::{PatentRecord, PatentStore};
use crate::error::Result;
use crate::regress::{self, Learner, RegressionModel};
use crate::retrieve::{rank_order, RankedList};

pub const FEATURE_NAMES: [&str; 7] = [
    "cited_in_description",
    "n_common_ecla",
    "n_common_ipc",
    "p_cite_ipc",
    "p_cite_results",
    "same_applicant",
    "frac_common_inventors",
];

pub const SCHEMA: &str = "rerank:7";

#[derive(Debug, Clone, PartialEq)]
pub struct RerankFeatures {
    pub cited_in_description: bool,
    pub n_common_ecla: u32,
    pub n_common_ipc: u32,
    /// Citations from patents sharing an IPC class with the topic, over the
    /// maximum such count in the result set.
    pub p_cite_ipc: f64,
    /// Citations from other result-set members, over the maximum in the set.
    pub p_cite_results: f64,
    pub same_applicant: bool,
    /// Shared inventors over the topic's inventor count.
    pub frac_common_inventors: f64,
}

impl RerankFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            f64::from(u8::from(self.cited_in_description)),
            f64::from(self.n_common_ecla),
            f64::from(self.n_common_ipc),
            self.p_cite_ipc,
            self.p_cite_results,
            f64::from(u8::from(self.same_applicant)),
            self.frac_common_inventors,
        ]
    }
}

fn common(a: &[String], b: &[String]) -> u32 {
    let a: HashSet<&String> = a.iter().collect();
    let b: HashSet<&String> = b.iter().collect();
    a.intersection(&b).count() as u32
}

fn normalize_by_max(raw: &[u32]) -> Vec<f64> {
    let max = raw.iter().copied().max().unwrap_or(0);
    raw.iter()
        .map(|&v| if max == 0 { 0.0 } else { f64::from(v) / f64::from(max) })
        .collect()
}

/// Features for every entry of `list`, in list order. Entries missing from the
/// store get all-zero features.
pub fn extract_rerank_features(topic: &PatentRecord, list: &RankedList, store: &PatentStore) -> Vec<RerankFeatures> {
    let graph = store.graph();
    let topic_ordinal = store.ordinal(&topic.id);
    let topic_ipc: HashSet<&String> = topic.ipc_classes.iter().collect();
    let cited: HashSet<&str> = topic.cited_ids.iter().map(String::as_str).collect();
    let ordinals: Vec<Option<usize>> = list.ids().map(|id| store.ordinal(id)).collect();
    let in_results: HashSet<usize> = ordinals.iter().flatten().copied().collect();

    let mut ipc_counts = Vec::with_capacity(ordinals.len());
    let mut result_counts = Vec::with_capacity(ordinals.len());
    for o in &ordinals {
        let (ipc, res) = match *o {
            Some(o) => graph
                .citer_ordinals(o)
                .iter()
                .filter(|&&c| Some(c) != topic_ordinal)
                .fold((0u32, 0u32), |(ipc, res), &c| {
                    let shares = store.record(c).ipc_classes.iter().any(|k| topic_ipc.contains(k));
                    (ipc + u32::from(shares), res + u32::from(in_results.contains(&c)))
                }),
            None => (0, 0),
        };
        ipc_counts.push(ipc);
        result_counts.push(res);
    }
    let p_ipc = normalize_by_max(&ipc_counts);
    let p_res = normalize_by_max(&result_counts);

    ordinals
        .iter()
        .zip(list.ids())
        .enumerate()
        .map(|(i, (o, id))| {
            let Some(o) = *o else {
                return RerankFeatures {
                    cited_in_description: cited.contains(id),
                    n_common_ecla: 0,
                    n_common_ipc: 0,
                    p_cite_ipc: 0.0,
                    p_cite_results: 0.0,
                    same_applicant: false,
                    frac_common_inventors: 0.0,
                };
            };
            let c = store.record(o);
            let shared_inventors = common(&topic.inventors, &c.inventors);
            RerankFeatures {
                cited_in_description: cited.contains(id),
                n_common_ecla: common(&topic.ecla_classes, &c.ecla_classes),
                n_common_ipc: common(&topic.ipc_classes, &c.ipc_classes),
                p_cite_ipc: p_ipc[i],
                p_cite_results: p_res[i],
                same_applicant: common(&topic.applicants, &c.applicants) > 0,
                frac_common_inventors: if topic.inventors.is_empty() {
                    0.0
                } else {
                    f64::from(shared_inventors) / topic.inventors.len() as f64
                },
            }
        })
        .collect()
}

/// Training target: the list's top score for a relevant entry, 0 otherwise.
pub fn rerank_target(list: &RankedList, relevant: bool) -> f64 {
    if relevant {
        list.entries.first().map_or(0.0, |e| e.1)
    } else {
        0.0
    }
}

/// Training rows for one topic: every relevant entry of the list plus its
/// `negatives` highest-ranked non-relevant entries.
pub fn training_rows(
    features: &[RerankFeatures],
    list: &RankedList,
    relevant: &HashSet<&str>,
    negatives: usize,
) -> Vec<(Vec<f64>, f64)> {
    let mut rows = Vec::new();
    let mut taken = 0;
    for (f, (id, _)) in features.iter().zip(&list.entries) {
        let rel = relevant.contains(id.as_str());
        if !rel {
            if taken == negatives {
                continue;
            }
            taken += 1;
        }
        rows.push((f.to_vec(), rerank_target(list, rel)));
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankTraining {
    pub negatives: usize,
    /// Rows kept for the kernel fit; larger sets are thinned by even striding.
    pub max_rows: usize,
    pub grid: Vec<Learner>,
    pub folds: usize,
}

impl Default for RerankTraining {
    fn default() -> Self {
        RerankTraining {
            negatives: 20,
            max_rows: 1000,
            grid: regress::rbf_grid(&regress::DEFAULT_GAMMAS, &regress::DEFAULT_REGS),
            folds: 5,
        }
    }
}

/// Fits the boost model from pooled per-topic rows (in topic order).
pub fn train_rerank(rows: Vec<(Vec<f64>, f64)>, training: &RerankTraining) -> Result<RegressionModel> {
    let rows = thin(rows, training.max_rows);
    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
    Ok(regress::train(&x, &y, training.folds, &training.grid)?.with_schema(SCHEMA))
}

fn thin<T>(rows: Vec<T>, max: usize) -> Vec<T> {
    if rows.len() <= max || max == 0 {
        return rows;
    }
    let n = rows.len();
    let mut keep = vec![false; n];
    for i in 0..max {
        keep[i * n / max] = true;
    }
    rows.into_iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect()
}

/// Rescores each entry by `w·(s + 1)` with `s = max(0, model prediction)`,
/// re-sorts (ties by id) and cuts at `cutoff`. The model id is kept.
pub fn apply_rerank(
    list: &RankedList,
    features: &[RerankFeatures],
    model: &RegressionModel,
    cutoff: usize,
) -> RankedList {
    let boosts: Vec<f64> = features.iter().map(|f| model.predict(&f.to_vec()).max(0.0)).collect();
    boost(list, &boosts, cutoff)
}

/// The boost step on precomputed `s` values (clamped at 0).
pub fn boost(list: &RankedList, s: &[f64], cutoff: usize) -> RankedList {
    assert_eq!(list.len(), s.len(), "one boost per entry");
    let mut entries: Vec<(String, f64)> = list
        .entries
        .iter()
        .zip(s)
        .map(|((id, w), s)| (id.clone(), w * (s.max(0.0) + 1.0)))
        .collect();
    entries.sort_by(rank_order);
    entries.truncate(cutoff);
    RankedList {
        topic_id: list.topic_id.clone(),
        model_id: list.model_id.clone(),
        entries,
    }
}

/// Audit CSV of features per (topic, candidate).
pub fn features_csv(rows: &[(String, String, RerankFeatures)]) -> String {
    let mut out = format!("topic_id,patent_id,{}\n", FEATURE_NAMES.join(","));
    for (t, p, f) in rows {
        let v: Vec<String> = f.to_vec().iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{t},{p},{}", v.join(","));
    }
    out
}
