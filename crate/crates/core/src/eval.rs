//! Relevance judgments and ranking metrics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{self, Error, Result};
use crate::retrieve::RankedList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GradeFilter {
    /// Grade ≥ 1.
    All,
    /// Grade ≥ 2.
    High,
}

impl GradeFilter {
    pub fn min_grade(self) -> u8 {
        match self {
            GradeFilter::All => 1,
            GradeFilter::High => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GradeFilter::All => "all",
            GradeFilter::High => "high",
        }
    }
}

impl FromStr for GradeFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(GradeFilter::All),
            "high" => Ok(GradeFilter::High),
            _ => Err(Error::Config(format!(
                "grade filter must be \"all\" or \"high\", got {s:?}"
            ))),
        }
    }
}

/// Topic → patent → grade (1 relevant, 2 highly relevant).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    topics: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Repeated judgments keep the highest grade.
    pub fn insert(&mut self, topic: &str, patent: &str, grade: u8) {
        let g = self
            .topics
            .entry(topic.to_string())
            .or_default()
            .entry(patent.to_string())
            .or_insert(grade);
        *g = (*g).max(grade);
    }

    /// `topic_id 0 patent_id grade` lines.
    pub fn parse(text: &str) -> Result<Self, (usize, String)> {
        let mut q = Qrels::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let [topic, _, patent, grade] = cols[..] else {
                return Err((i + 1, format!("expected 4 columns, found {}", cols.len())));
            };
            let grade: u8 = match grade {
                "1" => 1,
                "2" => 2,
                _ => return Err((i + 1, format!("grade must be 1 or 2, got {grade:?}"))),
            };
            q.insert(topic, patent, grade);
        }
        Ok(q)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = error::read_to_string(path)?;
        Self::parse(&text).map_err(|(line, message)| Error::Format {
            path: path.to_path_buf(),
            line,
            message,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (topic, docs) in &self.topics {
            for (doc, grade) in docs {
                let _ = writeln!(out, "{topic} 0 {doc} {grade}");
            }
        }
        out
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn contains_topic(&self, topic: &str) -> bool {
        self.topics.contains_key(topic)
    }

    pub fn judgments(&self, topic: &str) -> impl Iterator<Item = (&str, u8)> {
        self.topics
            .get(topic)
            .into_iter()
            .flatten()
            .map(|(d, &g)| (d.as_str(), g))
    }

    /// Every judged document of `topic`, any grade.
    pub fn relevant(&self, topic: &str) -> impl Iterator<Item = &str> {
        self.judgments(topic).map(|(d, _)| d)
    }

    pub fn relevant_set(&self, topic: &str, filter: GradeFilter) -> HashSet<&str> {
        self.judgments(topic)
            .filter(|&(_, g)| g >= filter.min_grade())
            .map(|(d, _)| d)
            .collect()
    }

    /// Keeps only the listed topics.
    pub fn restrict(&self, topics: &BTreeSet<String>) -> Qrels {
        Qrels {
            topics: self
                .topics
                .iter()
                .filter(|(t, _)| topics.contains(*t))
                .map(|(t, d)| (t.clone(), d.clone()))
                .collect(),
        }
    }
}

/// Mean of precision at each relevant rank, over the total relevant count.
pub fn average_precision<'a>(ranked: impl IntoIterator<Item = &'a str>, relevant: &HashSet<&str>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::Eval(
            "average precision needs at least one relevant document".into(),
        ));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, id) in ranked.into_iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

/// Relevant fraction of the top `k`; ranks past the list end count as non-relevant.
pub fn precision_at_k<'a>(ranked: impl IntoIterator<Item = &'a str>, relevant: &HashSet<&str>, k: usize) -> f64 {
    assert!(k >= 1, "precision cutoff must be at least 1");
    let hits = ranked.into_iter().take(k).filter(|id| relevant.contains(id)).count();
    hits as f64 / k as f64
}

pub fn recall<'a>(ranked: impl IntoIterator<Item = &'a str>, relevant: &HashSet<&str>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::Eval("recall needs at least one relevant document".into()));
    }
    let hits = ranked
        .into_iter()
        .filter(|id| relevant.contains(id))
        .collect::<HashSet<_>>()
        .len();
    Ok(hits as f64 / relevant.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicMetrics {
    pub topic_id: String,
    pub relevant: usize,
    pub ap: f64,
    pub p5: f64,
    pub p10: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub run: String,
    pub filter: GradeFilter,
    pub per_topic: Vec<TopicMetrics>,
    pub map: f64,
    pub p5: f64,
    pub p10: f64,
    pub macro_recall: f64,
    /// Run topics without judgments under the filter.
    pub skipped: Vec<String>,
}

/// Scores one run. Evaluated topics are `topics` when given, otherwise the run's
/// topics; either way only those with non-empty filtered judgments count. A
/// judged topic absent from the run scores zero.
pub fn evaluate(
    run: &str,
    lists: &[RankedList],
    qrels: &Qrels,
    filter: GradeFilter,
    topics: Option<&BTreeSet<String>>,
) -> Result<Evaluation> {
    let by_topic: BTreeMap<&str, &RankedList> = lists.iter().map(|l| (l.topic_id.as_str(), l)).collect();
    let candidates: BTreeSet<&str> = match topics {
        Some(t) => t.iter().map(String::as_str).collect(),
        None => by_topic.keys().copied().collect(),
    };
    let mut per_topic = Vec::new();
    let mut skipped = Vec::new();
    for topic in candidates {
        let rel = qrels.relevant_set(topic, filter);
        if rel.is_empty() {
            if by_topic.contains_key(topic) {
                skipped.push(topic.to_string());
            }
            continue;
        }
        let ids: Vec<&str> = by_topic.get(topic).map(|l| l.ids().collect()).unwrap_or_default();
        per_topic.push(TopicMetrics {
            topic_id: topic.to_string(),
            relevant: rel.len(),
            ap: average_precision(ids.iter().copied(), &rel)?,
            p5: precision_at_k(ids.iter().copied(), &rel, 5),
            p10: precision_at_k(ids.iter().copied(), &rel, 10),
            recall: recall(ids.iter().copied(), &rel)?,
        });
    }
    if per_topic.is_empty() {
        return Err(Error::Eval(format!("run {run} has no topic with judgments")));
    }
    let mean = |f: fn(&TopicMetrics) -> f64| per_topic.iter().map(f).sum::<f64>() / per_topic.len() as f64;
    Ok(Evaluation {
        run: run.to_string(),
        filter,
        map: mean(|m| m.ap),
        p5: mean(|m| m.p5),
        p10: mean(|m| m.p10),
        macro_recall: mean(|m| m.recall),
        per_topic,
        skipped,
    })
}

pub fn mean_average_precision(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::Eval("no topics to average".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

pub fn report_text(evals: &[Evaluation]) -> String {
    let width = evals.iter().map(|e| e.run.len()).max().unwrap_or(3).max(3);
    let mut out = format!(
        "{:<width$}  {:<5}  {:>6}  {:>8}  {:>8}  {:>8}  {:>8}\n",
        "run", "grade", "topics", "MAP", "P@5", "P@10", "recall"
    );
    for e in evals {
        let _ = writeln!(
            out,
            "{:<width$}  {:<5}  {:>6}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}",
            e.run,
            e.filter.name(),
            e.per_topic.len(),
            e.map,
            e.p5,
            e.p10,
            e.macro_recall
        );
    }
    out
}

pub fn report_csv(evals: &[Evaluation]) -> String {
    let mut out = String::from("run,grade,topics,map,p5,p10,macro_recall\n");
    for e in evals {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.run,
            e.filter.name(),
            e.per_topic.len(),
            e.map,
            e.p5,
            e.p10,
            e.macro_recall
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel<'a>(ids: &[&'a str]) -> HashSet<&'a str> {
        ids.iter().copied().collect()
    }

    #[test]
    fn ap_of_r_n_r() {
        let ap = average_precision(["a", "x", "b"], &rel(&["a", "b"])).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((ap - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn ap_edges() {
        assert_eq!(average_precision(["a", "b", "x"], &rel(&["a", "b"])).unwrap(), 1.0);
        assert_eq!(average_precision(["x", "y"], &rel(&["a"])).unwrap(), 0.0);
        assert!(average_precision(["x"], &rel(&[])).is_err());
    }

    #[test]
    fn precision_padding() {
        assert_eq!(precision_at_k(["a", "b", "x", "y", "z"], &rel(&["a", "b"]), 5), 0.4);
        assert_eq!(precision_at_k(["a"], &rel(&["a"]), 1), 1.0);
        assert_eq!(precision_at_k(["a"], &rel(&["a"]), 5), 0.2);
    }

    #[test]
    fn map_and_skips() {
        let qrels = Qrels::parse("t1 0 a 2\nt2 0 b 1\n").unwrap();
        let lists = vec![
            RankedList::from_scores("t1", "m", vec![("a".into(), 1.0)], 10),
            RankedList::from_scores("t2", "m", vec![("x".into(), 1.0)], 10),
            RankedList::from_scores("orphan", "m", vec![("x".into(), 1.0)], 10),
        ];
        let e = evaluate("m", &lists, &qrels, GradeFilter::All, None).unwrap();
        assert_eq!(e.map, 0.5);
        assert_eq!(e.skipped, ["orphan"]);
        let high = evaluate("m", &lists, &qrels, GradeFilter::High, None).unwrap();
        assert_eq!(high.per_topic.len(), 1);
        assert_eq!(high.map, 1.0);
        assert_eq!(high.skipped, ["orphan", "t2"]);
        assert_eq!(report_text(std::slice::from_ref(&e)), report_text(&[e]));
    }

    #[test]
    fn qrels_round_trip_and_errors() {
        let q = Qrels::parse("t1 0 a 1\nt1 0 a 2\nt2 0 b 1\n").unwrap();
        assert_eq!(q.judgments("t1").collect::<Vec<_>>(), [("a", 2)]);
        assert_eq!(Qrels::parse(&q.to_text()).unwrap(), q);
        assert_eq!(Qrels::parse("t1 0 a 3").unwrap_err().0, 1);
        assert_eq!(Qrels::parse("t1 0 a\n").unwrap_err().0, 1);
    }
}
