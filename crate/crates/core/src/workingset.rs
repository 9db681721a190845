//! Per-topic candidate restriction from citations, families, names and classes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::corpus::PatentStore;
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::retrieve::RankedList;

/// Step labels in application order.
pub const STEPS: [&str; 10] = ["1", "2", "3", "4", "5", "2+3", "6", "7", "8", "9"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkingSetParams {
    pub lower: usize,
    pub upper: usize,
    /// Co-occurring ECLA classes taken per topic class in step 7.
    pub cooccur_k: usize,
    /// Drop members published after the topic's priority date.
    pub temporal_filter: bool,
}

impl Default for WorkingSetParams {
    fn default() -> Self {
        WorkingSetParams {
            lower: 10,
            upper: 10_000,
            cooccur_k: 2,
            temporal_filter: false,
        }
    }
}

impl WorkingSetParams {
    pub fn validate(&self) -> Result<()> {
        if self.lower > self.upper {
            return Err(Error::Config(format!(
                "working-set lower limit {} exceeds upper limit {}",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkingSet {
    pub topic_id: String,
    /// Member id → index into [`STEPS`] of the step that added it.
    pub added_at: BTreeMap<String, usize>,
    /// Size after each step, one entry per [`STEPS`] label.
    pub step_trace: Vec<(&'static str, usize)>,
    /// Final size within the limits; otherwise retrieval ignores the set.
    pub active: bool,
}

impl WorkingSet {
    pub fn len(&self) -> usize {
        self.added_at.len()
    }

    pub fn is_empty(&self) -> bool {
        self.added_at.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.added_at.contains_key(id)
    }

    pub fn members(&self) -> impl Iterator<Item = &str> {
        self.added_at.keys().map(String::as_str)
    }

    /// Members present once step `step` (index into [`STEPS`]) has run.
    pub fn members_after(&self, step: usize) -> impl Iterator<Item = &str> {
        self.added_at
            .iter()
            .filter(move |(_, &s)| s <= step)
            .map(|(id, _)| id.as_str())
    }
}

/// For each ECLA class, the classes sharing at least one patent with it, ranked by
/// shared-patent count descending then class code ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EclaCooccurrence {
    ranked: BTreeMap<String, Vec<(String, u32)>>,
}

impl EclaCooccurrence {
    pub fn build(store: &PatentStore) -> Self {
        let mut counts: BTreeMap<&str, BTreeMap<&str, u32>> = BTreeMap::new();
        for r in store.records() {
            let classes: BTreeSet<&str> = r.ecla_classes.iter().map(String::as_str).collect();
            for &a in &classes {
                for &b in &classes {
                    if a != b {
                        *counts.entry(a).or_default().entry(b).or_insert(0) += 1;
                    }
                }
            }
        }
        let ranked = counts
            .into_iter()
            .map(|(c, others)| {
                let mut list: Vec<(String, u32)> = others.into_iter().map(|(o, n)| (o.to_string(), n)).collect();
                list.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
                (c.to_string(), list)
            })
            .collect();
        EclaCooccurrence { ranked }
    }

    pub fn ranked(&self, class: &str) -> &[(String, u32)] {
        self.ranked.get(class).map_or(&[], Vec::as_slice)
    }

    pub fn top(&self, class: &str, k: usize) -> impl Iterator<Item = &str> {
        self.ranked(class).iter().take(k).map(|(c, _)| c.as_str())
    }
}

struct Builder<'a> {
    store: &'a PatentStore,
    topic: usize,
    cutoff_date: Option<chrono::NaiveDate>,
    step: usize,
    added: HashMap<usize, usize>,
    order: Vec<usize>,
}

impl Builder<'_> {
    fn add(&mut self, ordinal: usize) {
        if ordinal == self.topic || self.added.contains_key(&ordinal) {
            return;
        }
        if let Some(cutoff) = self.cutoff_date {
            if self.store.record(ordinal).publication_date() > cutoff {
                return;
            }
        }
        self.added.insert(ordinal, self.step);
        self.order.push(ordinal);
    }

    fn add_all(&mut self, ordinals: impl IntoIterator<Item = usize>) {
        for o in ordinals {
            self.add(o);
        }
    }

    fn snapshot(&self) -> Vec<usize> {
        self.order.clone()
    }

    fn citers_of_members(&mut self) {
        let graph = self.store.graph();
        for m in self.snapshot() {
            self.add_all(graph.citer_ordinals(m).to_vec());
        }
    }

    fn cited_by_members(&mut self) {
        let graph = self.store.graph();
        for m in self.snapshot() {
            self.add_all(graph.cited_ordinals(m).to_vec());
        }
    }
}

fn shares_any(a: &[String], b: &[String]) -> bool {
    a.iter().any(|x| b.contains(x))
}

/// Applies the construction steps in order. Each step only adds members; the
/// topic never belongs to its own set.
pub fn build_working_set(
    topic_id: &str,
    store: &PatentStore,
    cooccurrence: &EclaCooccurrence,
    params: &WorkingSetParams,
) -> Result<WorkingSet> {
    let topic = store
        .ordinal(topic_id)
        .ok_or_else(|| Error::Config(format!("topic {topic_id} is not in the collection")))?;
    let record = store.record(topic);
    let mut b = Builder {
        store,
        topic,
        cutoff_date: params.temporal_filter.then_some(record.priority_date),
        step: 0,
        added: HashMap::new(),
        order: Vec::new(),
    };
    let mut trace = Vec::with_capacity(STEPS.len());
    let mut record_step = |b: &mut Builder, label: &'static str| {
        trace.push((label, b.order.len()));
        b.step += 1;
    };

    // 1: cited in the description and present in the collection
    let cited: Vec<usize> = record.cited_ids.iter().filter_map(|id| store.ordinal(id)).collect();
    b.add_all(cited);
    record_step(&mut b, STEPS[0]);

    b.citers_of_members();
    record_step(&mut b, STEPS[1]);
    b.cited_by_members();
    record_step(&mut b, STEPS[2]);

    // 4: shared priorities with the topic or a member, and citers of members' priority documents
    let mut member_priorities: BTreeSet<&str> = BTreeSet::new();
    for m in b.snapshot() {
        member_priorities.extend(store.record(m).priority_ids.iter().map(String::as_str));
    }
    let shared: BTreeSet<&str> = record
        .priority_ids
        .iter()
        .map(String::as_str)
        .chain(member_priorities.iter().copied())
        .collect();
    for p in shared {
        b.add_all(store.with_priority(p).to_vec());
    }
    for p in member_priorities {
        if let Some(doc) = store.ordinal(p) {
            b.add_all(store.graph().citer_ordinals(doc).to_vec());
        }
    }
    record_step(&mut b, STEPS[3]);

    // 5: same applicant and at least one common inventor
    for applicant in &record.applicants {
        for &o in store.with_applicant(applicant) {
            if shares_any(&store.record(o).inventors, &record.inventors) {
                b.add(o);
            }
        }
    }
    record_step(&mut b, STEPS[4]);

    b.citers_of_members();
    b.cited_by_members();
    record_step(&mut b, STEPS[5]);

    for class in &record.ecla_classes {
        b.add_all(store.with_ecla(class).to_vec());
    }
    record_step(&mut b, STEPS[6]);

    for class in &record.ecla_classes {
        for other in cooccurrence.top(class, params.cooccur_k) {
            b.add_all(store.with_ecla(other).to_vec());
        }
    }
    record_step(&mut b, STEPS[7]);

    if b.order.len() < params.upper {
        for class in &record.ipc_classes {
            for &o in store.with_ipc(class) {
                if shares_any(&store.record(o).applicants, &record.applicants) {
                    b.add(o);
                }
            }
        }
    }
    record_step(&mut b, STEPS[8]);

    if b.order.len() < params.upper {
        for class in &record.ipc_classes {
            b.add_all(store.with_ipc(class).to_vec());
        }
    }
    record_step(&mut b, STEPS[9]);

    let size = b.order.len();
    let added_at = b
        .added
        .iter()
        .map(|(&o, &step)| (store.record(o).id.clone(), step))
        .collect();
    Ok(WorkingSet {
        topic_id: topic_id.to_string(),
        added_at,
        step_trace: trace,
        active: (params.lower..=params.upper).contains(&size),
    })
}

/// Builds sets for many topics in parallel; output follows `topics` order.
pub fn build_working_sets(
    topics: &[String],
    store: &PatentStore,
    params: &WorkingSetParams,
) -> Result<Vec<WorkingSet>> {
    params.validate()?;
    let cooccurrence = EclaCooccurrence::build(store);
    topics
        .par_iter()
        .map(|t| build_working_set(t, store, &cooccurrence, params))
        .collect()
}

/// Baseline run made of the topic's in-collection description citations in order
/// of first mention, with descending synthetic scores.
pub fn cited_patents_run(topic_id: &str, store: &PatentStore) -> RankedList {
    let mut list = RankedList::new(topic_id, "cited");
    if let Some(record) = store.get(topic_id) {
        let cited: Vec<&String> = record.cited_ids.iter().filter(|id| store.contains(id)).collect();
        let n = cited.len();
        list.entries = cited
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), (n - i) as f64))
            .collect();
    }
    list
}

/// Pooled recall over topics: covered relevant / all relevant.
pub fn micro_recall(sets: &[WorkingSet], qrels: &Qrels) -> Result<f64> {
    micro_recall_by(sets, qrels, |set, id| set.contains(id))
}

/// Micro recall after each construction step.
pub fn step_micro_recall(sets: &[WorkingSet], qrels: &Qrels) -> Result<Vec<(&'static str, f64)>> {
    STEPS
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let r = micro_recall_by(sets, qrels, |set, id| set.added_at.get(id).is_some_and(|&s| s <= i))?;
            Ok((label, r))
        })
        .collect()
}

fn micro_recall_by(sets: &[WorkingSet], qrels: &Qrels, covered: impl Fn(&WorkingSet, &str) -> bool) -> Result<f64> {
    let mut hit = 0usize;
    let mut total = 0usize;
    for set in sets {
        for id in qrels.relevant(&set.topic_id) {
            total += 1;
            if covered(set, id) {
                hit += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Eval("no relevant documents for the given working sets".into()));
    }
    Ok(hit as f64 / total as f64)
}

/// `topic_id<TAB>member_id` lines for active sets.
pub fn write_working_sets(sets: &[WorkingSet]) -> String {
    let mut out = String::new();
    for set in sets.iter().filter(|s| s.active) {
        for id in set.members() {
            let _ = writeln!(out, "{}\t{}", set.topic_id, id);
        }
    }
    out
}

pub fn parse_working_sets(text: &str) -> Result<BTreeMap<String, BTreeSet<String>>, (usize, String)> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (topic, member) = line
            .split_once('\t')
            .ok_or((i + 1, "expected topic<TAB>member".to_string()))?;
        if topic.is_empty() || member.is_empty() || member.contains('\t') {
            return Err((i + 1, "expected two non-empty columns".into()));
        }
        out.entry(topic.to_string()).or_default().insert(member.to_string());
    }
    Ok(out)
}

/// Audit CSV: `topic_id,step,size,active`.
pub fn write_step_trace(sets: &[WorkingSet]) -> String {
    let mut out = String::from("topic_id,step,size,active\n");
    for set in sets {
        for (label, size) in &set.step_trace {
            let _ = writeln!(out, "{},{},{},{}", set.topic_id, label, size, set.active);
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::{LangText, Language, NameNormalizer, PatentRecord, PublicationVersion, VersionKind};
    use chrono::NaiveDate;

    pub(crate) fn rec(id: &str, desc: &str, ecla: &[&str], ipc: &[&str]) -> PatentRecord {
        PatentRecord {
            id: id.to_string(),
            versions: vec![PublicationVersion {
                kind: VersionKind::A1,
                date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
                title: LangText {
                    en: "t".into(),
                    ..Default::default()
                },
                abstract_text: LangText::default(),
                claims: LangText::default(),
                description: desc.to_string(),
            }],
            language: Language::En,
            applicants: vec![],
            inventors: vec![],
            ipc_classes: ipc.iter().map(|s| s.to_string()).collect(),
            ecla_classes: ecla.iter().map(|s| s.to_string()).collect(),
            priority_ids: vec![],
            cited_ids: vec![],
            priority_date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
        }
    }

    fn store(records: Vec<PatentRecord>) -> PatentStore {
        PatentStore::from_records(records, &NameNormalizer::default()).unwrap()
    }

    fn id(i: usize) -> String {
        format!("EP{i:07}")
    }

    #[test]
    fn single_citation_is_inactive() {
        let s = store(vec![
            rec(&id(1), &format!("see {}", id(2)), &[], &["F02B"]),
            rec(&id(2), "", &[], &["G06F"]),
        ]);
        let ws = build_working_set(&id(1), &s, &EclaCooccurrence::build(&s), &WorkingSetParams::default()).unwrap();
        assert_eq!(ws.step_trace[0], ("1", 1));
        assert_eq!(ws.len(), 1);
        assert!(!ws.active);
    }

    #[test]
    fn ecla_class_members_join_at_step_six() {
        let mut records = vec![rec(&id(0), "", &["F02B1/00"], &["F02B"])];
        records.extend((1..=50).map(|i| rec(&id(i), "", &["F02B1/00"], &["H01M"])));
        let s = store(records);
        let ws = build_working_set(&id(0), &s, &EclaCooccurrence::build(&s), &WorkingSetParams::default()).unwrap();
        assert_eq!(ws.step_trace[6], ("6", 50));
        assert!(ws.active);
        assert!(ws.added_at.values().all(|&step| step == 6));
    }

    #[test]
    fn cooccurrence_ranking() {
        let mut records = Vec::new();
        for i in 0..5 {
            records.push(rec(&id(i), "", &["C1", "C2"], &["A01B"]));
        }
        for i in 5..7 {
            records.push(rec(&id(i), "", &["C1", "C3"], &["A01B"]));
        }
        records.push(rec(&id(7), "", &["C9"], &["A01B"]));
        let co = EclaCooccurrence::build(&store(records));
        assert_eq!(co.ranked("C1"), [("C2".to_string(), 5), ("C3".to_string(), 2)]);
        assert!(co.ranked("C9").is_empty());
        assert_eq!(co.top("C1", 1).collect::<Vec<_>>(), ["C2"]);
    }

    #[test]
    fn single_class_corpus_has_no_cooccurrence() {
        let co = EclaCooccurrence::build(&store(vec![
            rec(&id(1), "", &["C1"], &[]),
            rec(&id(2), "", &["C1"], &[]),
        ]));
        assert!(co.ranked("C1").is_empty());
    }

    #[test]
    fn cited_run_keeps_first_mention_order() {
        let desc = format!("{} then {} and EP9999999 and {}", id(3), id(2), id(3));
        let s = store(vec![
            rec(&id(1), &desc, &[], &[]),
            rec(&id(2), "", &[], &[]),
            rec(&id(3), "", &[], &[]),
        ]);
        let run = cited_patents_run(&id(1), &s);
        assert_eq!(run.ids().collect::<Vec<_>>(), [id(3), id(2)]);
        assert!(run.entries[0].1 > run.entries[1].1);
        assert!(cited_patents_run(&id(2), &s).is_empty());
    }

    #[test]
    fn micro_recall_arithmetic() {
        let qrels = Qrels::parse("t1 0 a 1\nt1 0 b 1\nt2 0 c 1\nt2 0 d 2\n").unwrap();
        let set = |t: &str, m: &[&str]| WorkingSet {
            topic_id: t.into(),
            added_at: m.iter().map(|x| (x.to_string(), 0)).collect(),
            step_trace: vec![],
            active: true,
        };
        assert_eq!(
            micro_recall(&[set("t1", &["a"]), set("t2", &["c"])], &qrels).unwrap(),
            0.5
        );
        assert_eq!(
            micro_recall(&[set("t1", &["a", "b"]), set("t2", &["c", "d"])], &qrels).unwrap(),
            1.0
        );
        assert_eq!(micro_recall(&[set("t1", &[])], &qrels).unwrap(), 0.0);
        assert!(micro_recall(&[set("zz", &[])], &qrels).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let mut records = vec![rec(&id(0), "", &["C1"], &[])];
        records.extend((1..=12).map(|i| rec(&id(i), "", &["C1"], &[])));
        let s = store(records);
        let sets = build_working_sets(&[id(0), id(1)], &s, &WorkingSetParams::default()).unwrap();
        let parsed = parse_working_sets(&write_working_sets(&sets)).unwrap();
        assert_eq!(parsed[&id(0)].len(), 12);
        assert!(!parsed[&id(0)].contains(&id(0)));
        assert!(write_step_trace(&sets).lines().count() == 1 + 2 * STEPS.len());
    }
}
