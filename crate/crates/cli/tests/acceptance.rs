//! Acceptance suite: one PASS/FAIL line per criterion, with wall time.
//!
//! Criteria 4, 5, 6 and 9 share the default synthetic collection: criterion 9
//! runs the `priorart pipeline` binary twice (one worker thread vs eight) and
//! the other three read the single-threaded workspace.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use priorart::analyze::{Analyzer, AnalyzerKind, TermBag, TextRules};
use priorart::config::Config;
use priorart::corpus::{
    LangText, Language, NameNormalizer, PatentRecord, PatentStore, PublicationVersion, VersionKind,
};
use priorart::eval::{self, average_precision, precision_at_k, GradeFilter, Qrels};
use priorart::fusion::{
    self, extract_merge_features, merge, normalize_scores, MergeExample, MergeModels, MergeTraining,
};
use priorart::index::{build_metadocs, TermIndex};
use priorart::pipeline::{self, paths, Pipeline};
use priorart::regress::{self, fit_linear, Learner, Predictor, RegressionModel};
use priorart::rerank::{self, boost, rerank_target};
use priorart::retrieve::{
    score_bm25, score_kl, write_run, Bm25Params, KlParams, ModelId, Query, RankedList, ScorerKind,
};
use priorart::syngen::{self, GenParams, Split};
use priorart::workingset::{build_working_sets, cited_patents_run, step_micro_recall, WorkingSetParams, STEPS};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn id(i: usize) -> String {
    format!("EP{:07}", 1_000_000 + i)
}

fn day(n: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(1995, 1, 1).unwrap() + chrono::Days::new(n)
}

fn english_record(id: &str, text: &str, language: Language) -> PatentRecord {
    PatentRecord {
        id: id.to_string(),
        versions: vec![PublicationVersion {
            kind: VersionKind::A1,
            date: day(100),
            title: LangText::default(),
            abstract_text: LangText::default(),
            claims: LangText::default(),
            description: text.to_string(),
        }],
        language,
        applicants: vec![],
        inventors: vec![],
        ipc_classes: vec!["G06F".into()],
        ecla_classes: vec![],
        priority_ids: vec![],
        cited_ids: vec![],
        priority_date: day(50),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// -- 1 ----------------------------------------------------------------------

/// Pseudo-words built from vowel-final syllables: one index term per word.
fn words(n: usize) -> Vec<String> {
    const SYL: [&str; 8] = ["ba", "di", "ko", "lu", "ma", "pi", "to", "gu"];
    (0..n)
        .map(|i| format!("{}{}{}", SYL[i % 8], SYL[(i / 8) % 8], SYL[(i / 64) % 8]))
        .collect()
}

fn naive_kl(docs: &[Vec<usize>], q: &BTreeMap<usize, u32>, d: usize, lambda: f64) -> f64 {
    let clen: usize = docs.iter().map(Vec::len).sum();
    let qlen: u32 = q.values().sum();
    let mut s = 0.0;
    for (&t, &qtf) in q {
        let ctf = docs.iter().flatten().filter(|&&w| w == t).count();
        if ctf == 0 {
            continue;
        }
        let tf = docs[d].iter().filter(|&&w| w == t).count();
        let p_doc = if docs[d].is_empty() {
            0.0
        } else {
            tf as f64 / docs[d].len() as f64
        };
        let p = (1.0 - lambda) * p_doc + lambda * ctf as f64 / clen as f64;
        s += f64::from(qtf) / f64::from(qlen) * p.ln();
    }
    s
}

fn naive_bm25(docs: &[Vec<usize>], q: &BTreeMap<usize, u32>, d: usize, p: &Bm25Params) -> f64 {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let dl = docs[d].len() as f64;
    let mut s = 0.0;
    for (&t, &qtf) in q {
        let tf = docs[d].iter().filter(|&&w| w == t).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let df = docs.iter().filter(|doc| doc.contains(&t)).count() as f64;
        let idf = f64::max(0.0, ((n - df + 0.5) / (df + 0.5)).ln());
        let qtf = f64::from(qtf);
        s += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * dl / avgdl)) * (p.k3 + 1.0) * qtf / (p.k3 + qtf);
    }
    s
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let analyzer = Analyzer::new(TextRules::default());
    let (kl, bm) = (KlParams::default(), Bm25Params::default());
    let mut pairs = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n_terms = rng.random_range(5..=50);
        let vocab = words(n_terms + 5);
        let n_docs = rng.random_range(2..=200);
        let docs: Vec<Vec<usize>> = (0..n_docs)
            .map(|_| {
                (0..rng.random_range(0..60))
                    .map(|_| rng.random_range(0..n_terms))
                    .collect()
            })
            .collect();
        let records = docs
            .iter()
            .enumerate()
            .map(|(i, ws)| {
                english_record(
                    &id(i),
                    &ws.iter().map(|&w| vocab[w].as_str()).collect::<Vec<_>>().join(" "),
                    Language::En,
                )
            })
            .collect();
        let store = PatentStore::from_records(records, &NameNormalizer::default()).map_err(|e| e.to_string())?;
        let metadocs = build_metadocs(&store);
        let index = TermIndex::build(&metadocs, &analyzer, AnalyzerKind::LemmaEn).map_err(|e| e.to_string())?;
        if index.collection_length() != docs.iter().map(|d| d.len() as u64).sum::<u64>() {
            return Err("analysis did not keep one term per word".into());
        }
        for _ in 0..5 {
            // Term ids past n_terms never occur in the collection.
            let mut q: BTreeMap<usize, u32> = BTreeMap::new();
            for _ in 0..rng.random_range(1..15) {
                *q.entry(rng.random_range(0..n_terms + 5)).or_insert(0) += 1;
            }
            let bag: TermBag = q.iter().map(|(&t, &c)| (vocab[t].clone(), c)).collect();
            let query = Query::new("EP0000000", bag);
            for d in 0..n_docs {
                let ord = index.doc_ordinal(&id(d)).ok_or("document missing from index")?;
                let a = score_kl(&query, ord, &index, &kl).map_err(|e| e.to_string())?;
                let b = score_bm25(&query, ord, &index, &bm).map_err(|e| e.to_string())?;
                worst = worst.max((a - naive_kl(&docs, &q, d, kl.lambda)).abs());
                worst = worst.max((b - naive_bm25(&docs, &q, d, &bm)).abs());
                pairs += 1;
            }
        }
    }
    check(
        worst <= 1e-9,
        format!("{pairs} (query, doc) pairs, max |Δ| = {worst:.2e}"),
    )
}

// -- 2 ----------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let params = GenParams {
        n_patents: 5000,
        ..GenParams::default()
    };
    let g = syngen::generate(7, &params).map_err(|e| e.to_string())?;
    let store = PatentStore::parse(&g.corpus, Path::new("corpus.jsonl"), &NameNormalizer::default())
        .map_err(|e| e.to_string())?;
    let qrels = Qrels::parse(&g.qrels).map_err(|(l, m)| format!("qrels line {l}: {m}"))?;
    let topics: Vec<String> = syngen::parse_topics(&g.topics)
        .map_err(|(l, m)| format!("topics line {l}: {m}"))?
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    let sets = build_working_sets(&topics, &store, &WorkingSetParams::default()).map_err(|e| e.to_string())?;

    let mut violations = Vec::new();
    for set in &sets {
        if !set.step_trace.windows(2).all(|w| w[0].1 <= w[1].1) {
            violations.push(format!("{} size", set.topic_id));
        }
        let rel: Vec<&str> = qrels.relevant(&set.topic_id).collect();
        let per_step: Vec<usize> = (0..STEPS.len())
            .map(|s| {
                let m: HashSet<&str> = set.members_after(s).collect();
                rel.iter().filter(|r| m.contains(*r)).count()
            })
            .collect();
        if !per_step.windows(2).all(|w| w[0] <= w[1]) {
            violations.push(format!("{} recall", set.topic_id));
        }
    }
    let ladder = step_micro_recall(&sets, &qrels).map_err(|e| e.to_string())?;
    let ladder_ok = ladder.windows(2).all(|w| w[0].1 <= w[1].1);
    let cited: Vec<_> = sets
        .iter()
        .filter(|s| store.get(&s.topic_id).is_some_and(|r| !r.cited_ids.is_empty()))
        .cloned()
        .collect();
    let step1 = step_micro_recall(&cited, &qrels).map_err(|e| e.to_string())?[0].1;
    let trace: Vec<String> = ladder.iter().map(|(l, r)| format!("{l}:{r:.3}")).collect();
    check(
        violations.is_empty() && ladder_ok && step1 > 0.0,
        format!(
            "{} topics, {} violations, step-1 recall on citing topics {step1:.3}, ladder [{}]",
            sets.len(),
            violations.len(),
            trace.join(" ")
        ),
    )
}

// -- 3 ----------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = [1.5, -2.0, 0.25, 3.0, -0.75];
    let b = 0.5;
    let x: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| b + r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>())
        .collect();
    let model = fit_linear(&x, &y, 0.0).map_err(|e| e.to_string())?;
    let Predictor::Linear { weights, intercept } = &model.predictor else {
        return Err("linear fit returned another predictor".into());
    };
    let coef_err = weights
        .iter()
        .zip(&w)
        .map(|(a, c)| (a - c).abs())
        .fold((intercept - b).abs(), f64::max);

    let target = |r: &[f64]| (3.0 * r[0]).sin() + r[1] * r[1];
    let sample = |rng: &mut ChaCha8Rng, n: usize| -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)])
            .collect();
        let y = x.iter().map(|r| target(r)).collect();
        (x, y)
    };
    let (xt, yt) = sample(&mut rng, 300);
    let (xh, yh) = sample(&mut rng, 200);
    let kernel = regress::train(
        &xt,
        &yt,
        5,
        &regress::rbf_grid(&regress::DEFAULT_GAMMAS, &regress::DEFAULT_REGS),
    )
    .map_err(|e| e.to_string())?;
    let ridges: Vec<Learner> = [0.0, 1e-3, 1e-1, 1.0].map(|ridge| Learner::Linear { ridge }).to_vec();
    let linear = regress::train(&xt, &yt, 5, &ridges).map_err(|e| e.to_string())?;
    let (rk, rl) = (regress::rmse(&kernel, &xh, &yh), regress::rmse(&linear, &xh, &yh));
    check(
        coef_err <= 1e-6 && rk <= 0.8 * rl,
        format!("max coefficient error {coef_err:.2e}; held-out RMSE kernel {rk:.4} vs linear {rl:.4}"),
    )
}

// -- 4 ----------------------------------------------------------------------

fn test_topics(p: &Pipeline) -> Result<BTreeSet<String>, String> {
    Ok(p.topics_in(Split::Test)
        .map_err(|e| e.to_string())?
        .into_iter()
        .collect())
}

fn map_of(lists: &[RankedList], qrels: &Qrels, topics: &BTreeSet<String>) -> Result<f64, String> {
    eval::evaluate("run", lists, qrels, GradeFilter::All, Some(topics))
        .map(|e| e.map)
        .map_err(|e| e.to_string())
}

/// Mean of min-max normalized scores over all lists, missing entries as 0.
fn mean_normalized_ranking(lists: &[&RankedList]) -> Vec<String> {
    let mut sums: HashMap<String, f64> = HashMap::new();
    for l in lists {
        for (d, s) in normalize_scores(l).entries {
            *sums.entry(d).or_insert(0.0) += s;
        }
    }
    let k = lists.len() as f64;
    let mut ranked: Vec<(String, f64)> = sums.into_iter().map(|(d, s)| (d, s / k)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().map(|(d, _)| d).collect()
}

/// Two models, each perfect on one language and poor on the other.
fn specialized_fusion() -> Result<(f64, f64, f64), String> {
    let en = ModelId {
        scorer: ScorerKind::Kl,
        analyzer: AnalyzerKind::LemmaEn,
    };
    let de = ModelId {
        scorer: ScorerKind::Kl,
        analyzer: AnalyzerKind::LemmaDe,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let topic = |i: usize| {
        let lang = if i.is_multiple_of(2) {
            Language::En
        } else {
            Language::De
        };
        english_record(&format!("T{i:04}"), "", lang)
    };
    // Ten candidates; the relevant one sits at a random id position.
    let lists_for = |rng: &mut ChaCha8Rng, t: &PatentRecord| -> (RankedList, RankedList, String) {
        let mut docs: Vec<String> = (0..10).map(|d| format!("D{d}")).collect();
        docs.shuffle(rng);
        let relevant = docs[0].clone();
        let good: Vec<(String, f64)> = docs
            .iter()
            .enumerate()
            .map(|(r, d)| (d.clone(), 10.0 - r as f64))
            .collect();
        let bad: Vec<(String, f64)> = docs
            .iter()
            .enumerate()
            .map(|(r, d)| (d.clone(), 1.0 + r as f64))
            .collect();
        let (a, b) = if t.language == Language::En {
            (good, bad)
        } else {
            (bad, good)
        };
        (
            RankedList::from_scores(&t.id, en.to_string(), a, 1000),
            RankedList::from_scores(&t.id, de.to_string(), b, 1000),
            relevant,
        )
    };
    let mut bag = TermBag::new();
    bag.insert("term".into(), 5);
    let mut examples: BTreeMap<ModelId, Vec<MergeExample>> = BTreeMap::new();
    for i in 0..80 {
        let t = topic(i);
        let (a, b, rel) = lists_for(&mut rng, &t);
        let relevant: HashSet<&str> = [rel.as_str()].into();
        let q = Query::new(&t.id, bag.clone());
        for (m, l) in [(en, &a), (de, &b)] {
            let ap = average_precision(l.ids(), &relevant).map_err(|e| e.to_string())?;
            examples.entry(m).or_default().push(MergeExample {
                features: extract_merge_features(&t, m, &q, l, None),
                ap,
            });
        }
    }
    let models = fusion::train_merge(&examples, &MergeTraining::default()).map_err(|e| e.to_string())?;
    let (mut merged, mut single_a, mut single_b) = (Vec::new(), Vec::new(), Vec::new());
    for i in 80..160 {
        let t = topic(i);
        let (a, b, rel) = lists_for(&mut rng, &t);
        let relevant: HashSet<&str> = [rel.as_str()].into();
        let q = Query::new(&t.id, bag.clone());
        let features: HashMap<ModelId, _> = [(en, &a), (de, &b)]
            .into_iter()
            .map(|(m, l)| (m, extract_merge_features(&t, m, &q, l, None)))
            .collect();
        let c = fusion::topic_confidences(&models, &features, &[en, de]);
        let m = merge(&t.id, &[normalize_scores(&a), normalize_scores(&b)], &c, 1000);
        merged.push(average_precision(m.ids(), &relevant).map_err(|e| e.to_string())?);
        single_a.push(average_precision(a.ids(), &relevant).map_err(|e| e.to_string())?);
        single_b.push(average_precision(b.ids(), &relevant).map_err(|e| e.to_string())?);
    }
    Ok((mean(&merged), mean(&single_a), mean(&single_b)))
}

fn criterion_4(p: &Pipeline) -> Outcome {
    let qrels = p.load_qrels().map_err(|e| e.to_string())?;
    let test = test_topics(p)?;
    let topics: Vec<String> = test.iter().cloned().collect();

    let trained = pipeline::read_run(&p.path(paths::MERGED_RUN)).map_err(|e| e.to_string())?;
    let (uniform, _) = p
        .merge_topics(&MergeModels::uniform(), &topics)
        .map_err(|e| e.to_string())?;
    let map_trained = map_of(&trained, &qrels, &test)?;
    let map_uniform = map_of(&uniform, &qrels, &test)?;

    let runs = p.load_model_runs().map_err(|e| e.to_string())?;
    let mut best = (String::new(), f64::NEG_INFINITY);
    for (m, lists) in &runs {
        let lists: Vec<RankedList> = topics.iter().filter_map(|t| lists.get(t).cloned()).collect();
        let map = map_of(&lists, &qrels, &test)?;
        if map > best.1 {
            best = (m.to_string(), map);
        }
    }

    let cutoff = p.config.retrieval.cutoff;
    let mut mismatched = 0;
    for u in &uniform {
        let lists: Vec<&RankedList> = runs.values().filter_map(|r| r.get(&u.topic_id)).collect();
        let mut expected = mean_normalized_ranking(&lists);
        expected.truncate(cutoff);
        if !u.ids().eq(expected.iter().map(String::as_str)) {
            mismatched += 1;
        }
    }

    let (spec_merged, spec_a, spec_b) = specialized_fusion()?;
    check(
        map_trained >= map_uniform
            && mismatched == 0
            && map_trained >= best.1 - 1e-9
            && spec_merged > spec_a.max(spec_b),
        format!(
            "held-out MAP trained {map_trained:.4}, uniform {map_uniform:.4}, best single {} {:.4}; \
             uniform≠mean-normalized on {mismatched} topics; specialized merge {spec_merged:.4} vs singles {spec_a:.4}/{spec_b:.4}",
            best.0, best.1
        ),
    )
}

// -- 5 ----------------------------------------------------------------------

fn criterion_5(p: &Pipeline) -> Outcome {
    let qrels = p.load_qrels().map_err(|e| e.to_string())?;
    let test = test_topics(p)?;
    let before: HashMap<String, RankedList> = p.load_merged().map_err(|e| e.to_string())?;
    let after: HashMap<String, RankedList> = pipeline::read_run(&p.path(paths::FINAL_RUN))
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|l| (l.topic_id.clone(), l))
        .collect();
    let (mut ap_before, mut ap_after) = (Vec::new(), Vec::new());
    let (mut improved, mut changed) = (0, 0);
    for t in &test {
        let rel = qrels.relevant_set(t, GradeFilter::All);
        if rel.is_empty() {
            continue;
        }
        let ap = |l: Option<&RankedList>| -> Result<f64, String> {
            l.map_or(Ok(0.0), |l| average_precision(l.ids(), &rel).map_err(|e| e.to_string()))
        };
        let (b, a) = (ap(before.get(t))?, ap(after.get(t))?);
        if a != b {
            changed += 1;
            if a > b {
                improved += 1;
            }
        }
        ap_before.push(b);
        ap_after.push(a);
    }
    let share = improved as f64 / changed.max(1) as f64;

    // A zero model leaves every list untouched, up to truncation.
    let store = p.load_store().map_err(|e| e.to_string())?;
    let zero = RegressionModel::zero(rerank::SCHEMA, rerank::FEATURE_NAMES.len());
    let mut identical = true;
    let lists: Vec<RankedList> = before.values().take(50).cloned().collect();
    for cutoff in [p.config.retrieval.cutoff, 25] {
        let q = Pipeline::new(&p.workspace, {
            let mut c = p.config.clone();
            c.retrieval.cutoff = cutoff;
            c
        });
        let out = q.rerank_lists(&store, &lists, &zero);
        let truncated: Vec<RankedList> = lists
            .iter()
            .map(|l| RankedList {
                entries: l.entries.iter().take(cutoff).cloned().collect(),
                ..l.clone()
            })
            .collect();
        identical &= write_run(&out) == write_run(&truncated);
    }
    let (mb, ma) = (mean(&ap_before), mean(&ap_after));
    check(
        ap_before.len() >= 200 && ma >= mb && share >= 0.55 && identical,
        format!(
            "{} held-out topics, mean AP {mb:.4} → {ma:.4}, improved {improved}/{changed} changed ({:.1}%), zero model identical: {identical}",
            ap_before.len(),
            100.0 * share
        ),
    )
}

// -- 6 ----------------------------------------------------------------------

fn criterion_6(p: &Pipeline) -> Outcome {
    let store = p.load_store().map_err(|e| e.to_string())?;
    let qrels = p.load_qrels().map_err(|e| e.to_string())?;
    let topics: BTreeSet<String> = p
        .load_topics()
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    // Judgments must cover every in-collection description citation.
    for t in &topics {
        let rel = qrels.relevant_set(t, GradeFilter::All);
        let r = store.get(t).ok_or("topic missing")?;
        if r.cited_ids
            .iter()
            .any(|c| store.contains(c) && !rel.contains(c.as_str()))
        {
            return Err(format!("{t}: a citation is not judged relevant"));
        }
    }
    let cited: Vec<RankedList> = topics.iter().map(|t| cited_patents_run(t, &store)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let all: Vec<&str> = store.records().iter().map(|r| r.id.as_str()).collect();
    let random: Vec<RankedList> = topics
        .iter()
        .map(|t| {
            let mut ids: Vec<&str> = all.iter().copied().filter(|d| d != t).collect();
            ids.shuffle(&mut rng);
            let n = ids.len().min(1000);
            let entries = ids[..n]
                .iter()
                .enumerate()
                .map(|(i, d)| (d.to_string(), (n - i) as f64))
                .collect();
            RankedList {
                topic_id: t.clone(),
                model_id: "random".into(),
                entries,
            }
        })
        .collect();
    let (mc, mr) = (map_of(&cited, &qrels, &topics)?, map_of(&random, &qrels, &topics)?);
    check(
        mc > 10.0 * mr,
        format!("cited MAP {mc:.4} vs random {mr:.4} ({:.0}×)", mc / mr),
    )
}

// -- 7 ----------------------------------------------------------------------

fn list(entries: &[(&str, f64)]) -> RankedList {
    RankedList {
        topic_id: "t".into(),
        model_id: "m".into(),
        entries: entries.iter().map(|(d, s)| (d.to_string(), *s)).collect(),
    }
}

fn criterion_7() -> Outcome {
    let n = normalize_scores(&list(&[("c", 20.0), ("b", 10.0), ("a", 5.0)]));
    let norm_ok = n.entries.iter().map(|e| e.1).collect::<Vec<_>>() == [1.0, 1.0 / 3.0, 0.0];
    let m = merge("t", &[list(&[("d", 1.0)]), list(&[("d", 0.4)])], &[0.5, 0.5], 1000);
    let merge_ok = m.entries == [("d".to_string(), 0.7)];
    let l = list(&[("a", 0.9), ("b", 0.5), ("c", 0.1)]);
    let boost_ok =
        boost(&l, &[0.0; 3], 1000) == l && boost(&l, &[1.0, 0.0, 0.0], 1000).entries[0] == ("a".to_string(), 1.8);
    let target_ok = rerank_target(&l, true) == 0.9 && rerank_target(&l, false) == 0.0;
    check(
        norm_ok && merge_ok && boost_ok && target_ok,
        format!("normalize {norm_ok}, merge {merge_ok}, boost {boost_ok}, targets {target_ok}"),
    )
}

// -- 8 ----------------------------------------------------------------------

fn naive_ap(ranking: &[bool], total: usize) -> f64 {
    let mut hits = 0;
    let mut sum = 0.0;
    for (i, &r) in ranking.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

fn criterion_8() -> Outcome {
    let rel: HashSet<&str> = ["r1", "r2"].into();
    let ap = average_precision(["r1", "n", "r2"], &rel).map_err(|e| e.to_string())?;
    let fixed_ok = (ap - 0.8333).abs() <= 1e-4 && (ap - 5.0 / 6.0).abs() <= 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut qrels = Qrels::new();
    let mut lists = Vec::new();
    let mut naive_aps = Vec::new();
    for i in 0..1000 {
        let n_docs = rng.random_range(1..40);
        let docs: Vec<String> = (0..n_docs).map(|d| format!("D{d}")).collect();
        let relevant: Vec<&String> = docs.iter().filter(|_| rng.random_bool(0.3)).collect();
        let extra = rng.random_range(0..3);
        let topic = format!("T{i}");
        let mut ranking: Vec<&String> = docs.iter().collect();
        ranking.shuffle(&mut rng);
        ranking.truncate(rng.random_range(0..=n_docs));
        let mut rel: HashSet<&str> = relevant.iter().map(|d| d.as_str()).collect();
        let unretrieved: Vec<String> = (0..extra).map(|e| format!("X{e}")).collect();
        rel.extend(unretrieved.iter().map(String::as_str));
        if rel.is_empty() {
            continue;
        }
        for d in &rel {
            qrels.insert(&topic, d, 1);
        }
        let flags: Vec<bool> = ranking.iter().map(|d| rel.contains(d.as_str())).collect();
        let got = average_precision(ranking.iter().map(|d| d.as_str()), &rel).map_err(|e| e.to_string())?;
        let want = naive_ap(&flags, rel.len());
        worst = worst.max((got - want).abs());
        for k in [1, 5, 10] {
            let p = precision_at_k(ranking.iter().map(|d| d.as_str()), &rel, k);
            let naive = flags.iter().take(k).filter(|&&f| f).count() as f64 / k as f64;
            worst = worst.max((p - naive).abs());
        }
        naive_aps.push(want);
        let n = ranking.len();
        lists.push(RankedList {
            topic_id: topic,
            model_id: "m".into(),
            entries: ranking
                .iter()
                .enumerate()
                .map(|(r, d)| (d.to_string(), (n - r) as f64))
                .collect(),
        });
    }
    let map = eval::evaluate("m", &lists, &qrels, GradeFilter::All, None)
        .map_err(|e| e.to_string())?
        .map;
    worst = worst.max((map - mean(&naive_aps)).abs());
    check(
        fixed_ok && worst <= 1e-9,
        format!(
            "AP[R,N,R] = {ap:.10}; {} random instances, max |Δ| = {worst:.2e}",
            naive_aps.len()
        ),
    )
}

// -- 9 ----------------------------------------------------------------------

fn run_pipeline(dir: &Path, threads: usize) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_priorart"))
        .args(["--seed", "7", "--threads", &threads.to_string(), "--workspace"])
        .arg(dir)
        .arg("pipeline")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "pipeline exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn criterion_9(one: &Path, eight: &Path) -> Outcome {
    run_pipeline(one, 1)?;
    run_pipeline(eight, 8)?;
    let mut differing = Vec::new();
    for rel in [
        paths::FINAL_RUN,
        paths::MERGED_RUN,
        paths::MERGE_MODEL,
        paths::RERANK_MODEL,
        paths::REPORT_CSV,
    ] {
        let a = std::fs::read(one.join(rel)).map_err(|e| format!("{rel}: {e}"))?;
        let b = std::fs::read(eight.join(rel)).map_err(|e| format!("{rel}: {e}"))?;
        if a != b {
            differing.push(rel);
        }
    }
    let size = std::fs::metadata(one.join(paths::FINAL_RUN))
        .map_err(|e| e.to_string())?
        .len();
    check(
        differing.is_empty(),
        format!("final run {size} bytes; artifacts differing between 1 and 8 threads: {differing:?}"),
    )
}

// ---------------------------------------------------------------------------

fn report(n: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let (ok, detail) = match outcome {
        Ok(d) => (in_time, d),
        Err(d) => (false, d),
    };
    let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
    println!(
        "[{}] {n}. {name} ({:.1}s{budget}): {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn main() {
    // libtest-style filtering is not supported; `--list` support keeps tooling happy.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let tmp = tempfile::tempdir().expect("temp dir");
    let one: PathBuf = tmp.path().join("threads-1");
    let eight: PathBuf = tmp.path().join("threads-8");
    let shared = Pipeline::new(&one, Config::default());

    let mut results = Vec::new();
    results.push(report(
        1,
        "scorer oracle equivalence",
        Some(Duration::from_secs(30)),
        criterion_1,
    ));
    results.push(report(
        2,
        "working-set monotonicity ladder",
        Some(Duration::from_secs(120)),
        criterion_2,
    ));
    results.push(report(
        3,
        "regression recovery",
        Some(Duration::from_secs(10)),
        criterion_3,
    ));
    let determinism = report(9, "determinism across thread counts", None, || {
        criterion_9(&one, &eight)
    });
    let pipeline_ready = one.join(paths::FINAL_RUN).exists();
    let needs_pipeline = |f: fn(&Pipeline) -> Outcome| {
        let shared = &shared;
        move || {
            if pipeline_ready {
                f(shared)
            } else {
                Err("pipeline run unavailable".into())
            }
        }
    };
    results.push(report(
        4,
        "fusion improvement",
        Some(Duration::from_secs(300)),
        needs_pipeline(criterion_4),
    ));
    results.push(report(
        5,
        "rerank improvement",
        Some(Duration::from_secs(300)),
        needs_pipeline(criterion_5),
    ));
    results.push(report(6, "cited-patents baseline", None, needs_pipeline(criterion_6)));
    results.push(report(7, "unit identities", None, criterion_7));
    results.push(report(8, "metric oracle", None, criterion_8));
    results.push(determinism);

    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
