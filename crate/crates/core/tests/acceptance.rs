//! Acceptance suite: one test per criterion, each verified against an
//! independent oracle implemented here (never through the code path under
//! test). Criteria with runtime budgets assert them.

use hallumark::cli::{run_detect, RunManifest};
use hallumark::datamodel::{
    CharSpan, DetectionConfig, PredictionSet, Record, SampleSet, SoftLabel,
};
use hallumark::evaluator::{
    baseline_mark_all, baseline_mark_none, char_correlation, char_iou, evaluate_record,
    CorrelationKind,
};
use hallumark::matcher::{Match, MatchSet};
use hallumark::num::{mean, softmax};
use hallumark::pipeline::detect_record;
use hallumark::refiner::{merge_overlapping, ScoredSpan};
use hallumark::scorer::{
    combined_score, deterministic_stub_provider, lexical_entropy, semantic_entropy_from_sims,
};
use hallumark::segmenter::{enumerate_windows, tokenize};
use hallumark::tuner::{grid_search, GridSpec};
use hallumark::Score;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;
use std::time::Instant;

fn pass(criterion: u32, detail: &str, started: Instant) {
    println!(
        "acceptance criterion {criterion}: PASS ({detail}) in {:?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 1 oracles: character-set IoU and explicit rank-based Spearman.
// ---------------------------------------------------------------------------

fn oracle_iou(pred: &[CharSpan], gold: &[CharSpan], len: usize) -> Score {
    let covered = |spans: &[CharSpan]| -> Vec<bool> {
        let mut v = vec![false; len];
        for s in spans {
            for c in v.iter_mut().take(s.end).skip(s.start) {
                *c = true;
            }
        }
        v
    };
    let p = covered(pred);
    let g = covered(gold);
    let inter = p.iter().zip(&g).filter(|(a, b)| **a && **b).count();
    let union = p.iter().zip(&g).filter(|(a, b)| **a || **b).count();
    if union == 0 {
        1.0
    } else {
        inter as Score / union as Score
    }
}

/// Average rank of each element, computed by explicit counting rather than
/// sorting: rank_i = #less + (#equal + 1) / 2, 1-based.
fn oracle_ranks(v: &[Score]) -> Vec<Score> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count();
            let equal = v.iter().filter(|&&y| y == x).count();
            less as Score + (equal as Score + 1.0) / 2.0
        })
        .collect()
}

fn oracle_pearson(x: &[Score], y: &[Score]) -> Option<Score> {
    let n = x.len() as Score;
    let mx = x.iter().sum::<Score>() / n;
    let my = y.iter().sum::<Score>() / n;
    let sxy: Score = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: Score = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: Score = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

fn oracle_spearman(pred: &[SoftLabel], gold: &[SoftLabel], len: usize) -> Option<Score> {
    let profile = |labels: &[SoftLabel]| -> Vec<Score> {
        let mut v = vec![0.0; len];
        for l in labels {
            for c in v.iter_mut().take(l.end).skip(l.start) {
                *c = Score::max(*c, l.prob);
            }
        }
        v
    };
    let p_hat = profile(pred);
    let p = profile(gold);
    if len < 2 {
        return None;
    }
    oracle_pearson(&oracle_ranks(&p_hat), &oracle_ranks(&p))
}

fn random_spans(rng: &mut StdRng, len: usize, max_spans: usize) -> Vec<CharSpan> {
    let count = rng.gen_range(0..=max_spans);
    (0..count)
        .filter_map(|_| {
            if len == 0 {
                return None;
            }
            let start = rng.gen_range(0..len);
            let end = rng.gen_range(start + 1..=len.min(start + 40));
            Some(CharSpan::new(start, end))
        })
        .collect()
}

fn with_probs(rng: &mut StdRng, spans: &[CharSpan]) -> Vec<SoftLabel> {
    spans
        .iter()
        .map(|s| SoftLabel {
            start: s.start,
            end: s.end,
            prob: (rng.gen_range(0..=10) as Score) / 10.0,
        })
        .collect()
}

#[test]
fn criterion_1_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xace1);
    for _ in 0..1000 {
        let len = rng.gen_range(1..=200);
        let pred = random_spans(&mut rng, len, 4);
        let gold = random_spans(&mut rng, len, 4);

        let got_iou = char_iou(&pred, &gold, len).unwrap();
        assert_eq!(got_iou, oracle_iou(&pred, &gold, len));

        let pred_soft = with_probs(&mut rng, &pred);
        let gold_soft = with_probs(&mut rng, &gold);
        let got = char_correlation(&pred_soft, &gold_soft, len, CorrelationKind::Spearman).unwrap();
        let want = oracle_spearman(&pred_soft, &gold_soft, len);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some(w)) => assert!(
                (g - w).abs() < 1e-9,
                "spearman mismatch: {g} vs {w} (len {len})"
            ),
            other => panic!("definedness mismatch: {other:?}"),
        }
    }
    assert!(started.elapsed().as_secs() < 10, "criterion 1 budget");
    pass(
        1,
        "1000 random span configs, IoU exact, Spearman within 1e-9",
        started,
    );
}

#[test]
fn criterion_2_baseline_sanity() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xace2);
    let mut empties = 0;
    for i in 0..200 {
        let len = rng.gen_range(1..=120);
        let gold = if i % 4 == 0 {
            vec![]
        } else {
            random_spans(&mut rng, len, 3)
        };
        if gold.is_empty() {
            empties += 1;
        }
        let record = Record {
            id: Some(format!("r{i}")),
            lang: "en".into(),
            model_input: String::new(),
            model_output_text: "x".repeat(len),
            soft_labels: gold
                .iter()
                .map(|s| SoftLabel {
                    start: s.start,
                    end: s.end,
                    prob: 1.0,
                })
                .collect(),
            hard_labels: gold.clone(),
            sample_texts: None,
        };

        let none = baseline_mark_none(&record);
        let none_iou = char_iou(&none.hard_spans, &record.hard_labels, len).unwrap();
        assert_eq!(none_iou, oracle_iou(&none.hard_spans, &gold, len));
        if gold.is_empty() {
            assert_eq!(none_iou, 1.0);
        } else {
            assert_eq!(none_iou, 0.0);
        }

        let all = baseline_mark_all(&record);
        let all_iou = char_iou(&all.hard_spans, &record.hard_labels, len).unwrap();
        assert_eq!(all_iou, oracle_iou(&all.hard_spans, &gold, len));
        let gold_chars = {
            let mut v = vec![false; len];
            for s in &gold {
                for c in v.iter_mut().take(s.end).skip(s.start) {
                    *c = true;
                }
            }
            v.iter().filter(|c| **c).count()
        };
        if gold.is_empty() {
            assert_eq!(all_iou, 0.0); // union is all chars, intersection empty
        } else {
            assert!((all_iou - gold_chars as Score / len as Score).abs() < 1e-15);
        }
    }
    assert!(empties >= 10, "fixture must include empty-gold records");
    pass(2, "mark-none/mark-all vs oracle on 200 records", started);
}

// ---------------------------------------------------------------------------
// Criterion 3: entropy suite.
// ---------------------------------------------------------------------------

fn synthetic_match_set(texts: &[String]) -> MatchSet {
    let tt = tokenize("src win dow", "en");
    let source = enumerate_windows(&tt, 3, 1).unwrap()[0].clone();
    let matches: Vec<Match> = texts
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let mt = tokenize(text, "en");
            let window = enumerate_windows(&mt, mt.token_count().max(1), 1).unwrap()[0].clone();
            Match {
                sample_index: i,
                window,
                similarity: 0.9,
            }
        })
        .collect();
    MatchSet {
        source,
        matched_sample_count: texts.len(),
        matches,
    }
}

fn oracle_shannon(counts: &[usize]) -> Score {
    let total: usize = counts.iter().sum();
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as Score / total as Score;
            p * p.ln()
        })
        .sum::<Score>()
}

#[test]
fn criterion_3_entropy_suite() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xace3);
    let words = ["riverbed", "granite", "monsoon", "falcon", "orchid"];
    for _ in 0..500 {
        let m = rng.gen_range(0..=40);
        let sims: Vec<Score> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let (raw, norm) = semantic_entropy_from_sims(&sims);
        match m {
            0 => assert_eq!((raw, norm), (0.0, 1.0)),
            1 => assert_eq!((raw, norm), (0.0, 0.0)),
            _ => {
                let bound = (m as Score).ln();
                assert!(raw >= 0.0 && raw <= bound + 1e-9, "H_s {raw} vs ln {bound}");
                let probs = softmax(&sims);
                let total: Score = probs.iter().sum();
                assert!((total - 1.0).abs() < 1e-9, "softmax sum {total}");
            }
        }

        // Uniform similarities reach the entropy ceiling.
        if m >= 2 {
            let uniform = vec![rng.gen_range(-1.0..=1.0); m];
            let (_, norm_uniform) = semantic_entropy_from_sims(&uniform);
            assert!((norm_uniform - 1.0).abs() < 1e-9);
        }

        // Lexical entropy against an independent Shannon oracle.
        let texts: Vec<String> = (0..m)
            .map(|_| words[rng.gen_range(0..words.len())].to_string())
            .collect();
        let ms = synthetic_match_set(&texts);
        let (raw_l, _) = lexical_entropy(&ms);
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &texts {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        let count_vec: Vec<usize> = counts.values().copied().collect();
        let want = if m == 0 {
            0.0
        } else {
            oracle_shannon(&count_vec)
        };
        assert!(
            (raw_l - want).abs() < 1e-9,
            "lexical entropy {raw_l} vs oracle {want}"
        );
    }
    pass(
        3,
        "500 random match sets, bounds + oracle within 1e-9",
        started,
    );
}

#[test]
fn criterion_4_combination_and_merge_arithmetic() {
    let started = Instant::now();
    let cfg = DetectionConfig::default(); // alpha 0.4, beta 0.4, gamma 0.2

    let cases: &[(Score, Score, Score, Score)] = &[
        (1.0, 1.0, 1.0, 1.0),
        (0.0, 0.0, 0.0, 0.0),
        (0.5, 0.25, 1.0, 0.5),
        (1.0, 0.0, 0.0, 0.4),
        (0.0, 1.0, 0.5, 0.5),
    ];
    for &(hs, hl, f, want) in cases {
        let got = combined_score(hs, hl, f, &cfg);
        assert!((got - want).abs() < 1e-12, "{hs},{hl},{f}: {got} vs {want}");
    }
    let other = DetectionConfig {
        alpha: 0.25,
        beta: 0.5,
        gamma: 0.25,
        ..cfg.clone()
    };
    let got = combined_score(0.8, 0.4, 0.2, &other);
    assert!((got - 0.45).abs() < 1e-12);

    // The merged-span weighted average.
    let merged = merge_overlapping(vec![
        ScoredSpan::new(CharSpan::new(0, 10), 0.8),
        ScoredSpan::new(CharSpan::new(5, 15), 0.6),
    ]);
    assert_eq!(merged.len(), 1);
    assert_eq!(merged[0].span, CharSpan::new(0, 15));
    assert!((merged[0].score - 0.7).abs() < 1e-12);

    // Idempotence on 500 random span sets.
    let mut rng = StdRng::seed_from_u64(0xace4);
    for _ in 0..500 {
        let spans: Vec<ScoredSpan> = (0..rng.gen_range(0..12))
            .map(|_| {
                let start = rng.gen_range(0..100);
                let len = rng.gen_range(1..25);
                ScoredSpan::new(CharSpan::new(start, start + len), rng.gen_range(0.0..=1.0))
            })
            .collect();
        let once = merge_overlapping(spans);
        let twice = merge_overlapping(once.clone());
        assert_eq!(once, twice);
    }
    pass(
        4,
        "weighted sums within 1e-12, merge case + idempotence x500",
        started,
    );
}

#[test]
fn criterion_5_windowing_oracle() {
    let started = Instant::now();
    for n in 0..=30usize {
        let text = vec!["tok"; n].join(" ");
        let tt = tokenize(&text, "en");
        for w in 1..=8usize {
            for t in 1..=w {
                let got: Vec<(usize, usize)> = enumerate_windows(&tt, w, t)
                    .unwrap()
                    .iter()
                    .map(|win| (win.first_token, win.first_token + win.token_count))
                    .collect();
                // Direct index enumeration: window i covers
                // [(i-1)t, (i-1)t + w) clipped to the token count.
                let mut want = Vec::new();
                let mut i = 1usize;
                loop {
                    let start = (i - 1) * t;
                    if start >= n {
                        break;
                    }
                    want.push((start, (start + w).min(n)));
                    i += 1;
                }
                assert_eq!(got, want, "n={n} w={w} t={t}");
            }
        }
    }
    assert!(started.elapsed().as_secs() < 5, "criterion 5 budget");
    pass(5, "exhaustive n<=30, w<=8, t<=w vs index oracle", started);
}

// ---------------------------------------------------------------------------
// Criterion 6: brute-force matching-block oracle.
// ---------------------------------------------------------------------------

/// Longest common substring by scanning every (i, j) start pair; ties to the
/// earliest start in `a`, then in `b`. Recursion mirrors the
/// matching-block definition, not the implementation.
fn oracle_matched(a: &[u8], b: &[u8]) -> usize {
    let (mut bi, mut bj, mut blen) = (0usize, 0usize, 0usize);
    for i in 0..a.len() {
        for j in 0..b.len() {
            let mut k = 0;
            while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                k += 1;
            }
            if k > blen {
                bi = i;
                bj = j;
                blen = k;
            }
        }
    }
    if blen == 0 {
        return 0;
    }
    blen + oracle_matched(&a[..bi], &b[..bj]) + oracle_matched(&a[bi + blen..], &b[bj + blen..])
}

fn oracle_ratio(a: &str, b: &str) -> Score {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    if a.len() + b.len() == 0 {
        return 1.0;
    }
    2.0 * oracle_matched(a, b) as Score / (a.len() + b.len()) as Score
}

#[test]
fn criterion_6_similarity_oracle() {
    let started = Instant::now();
    // All strings over {a, b, c} of length <= 8.
    let mut strings: Vec<String> = vec![String::new()];
    let mut frontier: Vec<String> = vec![String::new()];
    for _ in 0..8 {
        let mut next = Vec::with_capacity(frontier.len() * 3);
        for s in &frontier {
            for c in ['a', 'b', 'c'] {
                let mut t = String::with_capacity(s.len() + 1);
                t.push_str(s);
                t.push(c);
                next.push(t.clone());
                strings.push(t);
            }
        }
        frontier = next;
    }
    assert_eq!(strings.len(), 9841);
    for a in &strings {
        for b in &strings {
            let got = hallumark::sequence_similarity(a, b);
            let want = oracle_ratio(a, b);
            assert_eq!(got, want, "{a:?} vs {b:?}");
        }
    }

    // 1000 random longer pairs over a wider alphabet.
    let mut rng = StdRng::seed_from_u64(0xace6);
    let alphabet: Vec<char> = "abcdefgh ".chars().collect();
    for _ in 0..1000 {
        let len_a = rng.gen_range(9..60);
        let len_b = rng.gen_range(9..60);
        let a: String = (0..len_a)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
            .collect();
        let b: String = (0..len_b)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
            .collect();
        let got = hallumark::sequence_similarity(&a, &b);
        let want = oracle_ratio(&a, &b);
        assert_eq!(got, want, "{a:?} vs {b:?}");
    }
    pass(
        6,
        "exhaustive 9841^2 pairs + 1000 random longer pairs",
        started,
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: end-to-end synthetic detection.
// ---------------------------------------------------------------------------

/// One token per letter: a run of `len` copies of it.
fn letter_blocks(letters: &str, len: usize) -> String {
    letters
        .chars()
        .map(|c| c.to_string().repeat(len))
        .collect::<Vec<_>>()
        .join(" ")
}

fn en_record(id: &str, answer: &str) -> Record {
    Record {
        id: Some(id.into()),
        lang: "en".into(),
        model_input: "q".into(),
        model_output_text: answer.into(),
        hard_labels: vec![],
        soft_labels: vec![],
        sample_texts: None,
    }
}

#[test]
fn criterion_7_end_to_end_synthetic_detection() {
    let started = Instant::now();
    let cfg = DetectionConfig::for_language("en").0;
    assert_eq!(
        (
            cfg.window_size,
            cfg.stride,
            cfg.score_threshold,
            cfg.min_span_length,
            cfg.boundary_threshold
        ),
        (5, 3, 0.5, 3, 0.3)
    );
    let provider = deterministic_stub_provider(256).unwrap();

    // Fabrication fixture: the answer carries a three-token capitalized
    // entity that no sample contains; samples otherwise agree verbatim.
    let head = letter_blocks("abcdefghij", 7);
    let tail = letter_blocks("klmnopqrst", 7);
    let fabricated = "Zxqzxqzxqzxq Zvzvzvzvzvzv Zjqzjqzjqzjq";
    let answer = format!("{head} {fabricated} {tail}");
    let sample = format!("{head} {tail} {}", letter_blocks("uvwxy", 15));
    let gold_start = head.chars().count() + 1;
    let gold_end = gold_start + fabricated.chars().count();
    let gold = CharSpan::new(gold_start, gold_end);

    let record = en_record("fab", &answer);
    let samples = SampleSet::from_texts(vec![sample; 20], "fixture");
    let prediction = detect_record(&record, &samples, &cfg, &provider, Some("fab".into())).unwrap();

    let overlapping: Vec<&CharSpan> = prediction
        .hard_spans
        .iter()
        .filter(|s| s.overlap(&gold) > 0)
        .collect();
    assert!(
        !overlapping.is_empty(),
        "no hard span overlaps the fabricated region: {:?}",
        prediction.hard_spans
    );
    let len = record.output_char_len();
    let iou = char_iou(&prediction.hard_spans, &[gold], len).unwrap();
    assert!(
        iou >= 0.5,
        "IoU {iou} < 0.5; hard spans {:?} vs gold {gold:?}",
        prediction.hard_spans
    );

    // Verbatim fixture: samples contain the answer word for word; nothing
    // may be flagged.
    let answer2 = format!("{head} {tail}");
    let sample2 = format!("{answer2} {}", letter_blocks("uvwxy", 15));
    let record2 = en_record("clean", &answer2);
    let samples2 = SampleSet::from_texts(vec![sample2; 20], "fixture");
    let prediction2 =
        detect_record(&record2, &samples2, &cfg, &provider, Some("clean".into())).unwrap();
    assert!(
        prediction2.hard_spans.is_empty(),
        "verbatim answer flagged: {:?}",
        prediction2.hard_spans
    );

    assert!(started.elapsed().as_secs() < 30, "criterion 7 budget");
    pass(
        7,
        &format!("fabricated-span IoU {iou:.3} >= 0.5; verbatim answer unflagged"),
        started,
    );
}

#[test]
fn criterion_8_detect_determinism_across_runs_and_jobs() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("records.jsonl");

    let head = letter_blocks("abcdefghij", 7);
    let tail = letter_blocks("klmnopqrst", 7);
    let fabricated = "Zxqzxqzxqzxq Zvzvzvzvzvzv Zjqzjqzjqzjq";
    let sample = format!("{head} {tail} {}", letter_blocks("uvwxy", 15));
    let mut lines = Vec::new();
    for i in 0..6 {
        let answer = if i % 2 == 0 {
            format!("{head} {fabricated} {tail}")
        } else {
            format!("{head} {tail}")
        };
        let record = serde_json::json!({
            "id": format!("r{i}"),
            "lang": "en",
            "model_input": "q",
            "model_output_text": answer,
            "sample_texts": vec![sample.clone(); 20],
        });
        lines.push(record.to_string());
    }
    std::fs::write(&input, lines.join("\n") + "\n").unwrap();

    let run = |jobs: usize, out_name: &str| -> Vec<u8> {
        let output = dir.path().join(out_name);
        let manifest = RunManifest {
            input: input.clone(),
            output: Some(output.clone()),
            offline: true,
            jobs,
            ..RunManifest::default()
        };
        run_detect(&manifest).unwrap();
        std::fs::read(&output).unwrap()
    };

    let first = run(1, "out1.jsonl");
    let second = run(1, "out2.jsonl");
    assert_eq!(first, second, "serial reruns differ");
    let parallel_a = run(4, "out3.jsonl");
    let parallel_b = run(4, "out4.jsonl");
    assert_eq!(parallel_a, parallel_b, "parallel reruns differ");
    assert_eq!(first, parallel_a, "jobs=1 and jobs=4 outputs differ");
    pass(
        8,
        "byte-identical outputs across reruns and jobs=4",
        started,
    );
}

#[test]
fn criterion_9_tuner_matches_independent_per_point_runs() {
    let started = Instant::now();
    let provider = deterministic_stub_provider(256).unwrap();

    // Three gold-labeled records with planted fabrications.
    let head = letter_blocks("abcdefghij", 7);
    let tail = letter_blocks("klmnopqrst", 7);
    let fabs = [
        "Zxqzxqzxqzxq Zvzvzvzvzvzv Zjqzjqzjqzjq",
        "Zbdbdbdbdbdb Zgmgmgmgmgmgm Zrprprprprpr",
        "Zcfcfcfcfcfc Zhshshshshshs Zlwlwlwlwlwlw",
    ];
    let sample = format!("{head} {tail} {}", letter_blocks("uvwxy", 15));
    let mut records = Vec::new();
    let mut samples = BTreeMap::new();
    for (i, fab) in fabs.iter().enumerate() {
        let id = format!("r{i}");
        let answer = format!("{head} {fab} {tail}");
        let gold_start = head.chars().count() + 1;
        let gold_end = gold_start + fab.chars().count();
        let mut record = en_record(&id, &answer);
        record.hard_labels = vec![CharSpan::new(gold_start, gold_end)];
        record.soft_labels = vec![SoftLabel {
            start: gold_start,
            end: gold_end,
            prob: 1.0,
        }];
        records.push((id.clone(), record));
        samples.insert(
            id,
            SampleSet::from_texts(vec![sample.clone(); 20], "fixture"),
        );
    }

    let grid = GridSpec {
        window_sizes: vec![4, 5],
        strides: vec![3],
        score_thresholds: vec![0.5, 0.7],
        min_span_lengths: vec![3],
        boundary_thresholds: vec![0.2, 0.3],
        ..GridSpec::for_language("en")
    };
    let ranked = grid_search(&records, &samples, &grid, &provider).unwrap();
    assert_eq!(ranked.len(), 8);

    // Oracle: fresh detect + evaluate per grid point, no shared analysis.
    let mut oracle: Vec<(DetectionConfig, Score)> = grid
        .configs()
        .into_iter()
        .map(|cfg| {
            let ious: Vec<Score> = records
                .iter()
                .map(|(id, record)| {
                    let p: PredictionSet =
                        detect_record(record, &samples[id], &cfg, &provider, Some(id.clone()))
                            .unwrap();
                    evaluate_record(record, &p, id, CorrelationKind::Spearman)
                        .unwrap()
                        .iou
                })
                .collect();
            (cfg, mean(&ious).unwrap())
        })
        .collect();
    oracle.sort_by(|(ca, va), (cb, vb)| {
        vb.partial_cmp(va)
            .unwrap()
            .then(ca.window_size.cmp(&cb.window_size))
            .then(ca.stride.cmp(&cb.stride))
            .then(cb.score_threshold.partial_cmp(&ca.score_threshold).unwrap())
            .then(ca.min_span_length.cmp(&cb.min_span_length))
            .then(
                ca.boundary_threshold
                    .partial_cmp(&cb.boundary_threshold)
                    .unwrap(),
            )
    });

    for ((got_cfg, got_val), (want_cfg, want_val)) in ranked.iter().zip(&oracle) {
        assert_eq!(got_cfg, want_cfg);
        assert!(
            (got_val - want_val).abs() < 1e-12,
            "objective mismatch: {got_val} vs {want_val}"
        );
    }
    pass(
        9,
        "2x2x2 grid ranking equals independent per-point runs",
        started,
    );
}
