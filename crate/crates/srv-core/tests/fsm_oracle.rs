//! Properties of trace ingestion, prefix-tree construction, k-tails merging
//! and necessary-predecessor (TSD) mining, checked against independent
//! oracles on random trace sets.

mod support;

use srv_core::fsm::{
    build_initial_fsm, extract_tsd, ingest_traces, merge_states, TraceError, TransactionTrace,
};
use std::collections::BTreeSet;

#[test]
fn initial_fsm_accepts_exactly_the_trace_prefixes() {
    let mut rng = support::rng(0x5eed_0020);
    for case in 0..120 {
        let traces = support::random_traces(&mut rng);
        let fsm = build_initial_fsm(&traces);

        let mut prefixes: BTreeSet<Vec<String>> = BTreeSet::from([Vec::new()]);
        for t in &traces {
            for n in 1..=t.calls.len() {
                prefixes.insert(t.calls[..n].to_vec());
            }
        }
        for p in &prefixes {
            assert!(fsm.accepts(p), "case {case}: prefix {p:?} rejected");
        }
        // Random probes not in the prefix set must be rejected.
        let labels = ["A", "B", "C", "D"];
        for _ in 0..20 {
            let probe: Vec<String> = (0..rand::Rng::random_range(&mut rng, 1..=7))
                .map(|_| labels[rand::Rng::random_range(&mut rng, 0..labels.len())].to_string())
                .collect();
            if !prefixes.contains(&probe) {
                assert!(!fsm.accepts(&probe), "case {case}: non-prefix {probe:?} accepted");
            }
        }
    }
}

#[test]
fn merging_preserves_training_traces_and_support_totals() {
    let mut rng = support::rng(0x5eed_0021);
    for case in 0..120 {
        let traces = support::random_traces(&mut rng);
        let initial = build_initial_fsm(&traces);
        let total: u64 = initial.support.values().sum();
        for k in 1..=3 {
            let merged = merge_states(&initial, k);
            for t in &traces {
                assert!(
                    merged.accepts(&t.calls),
                    "case {case} k={k}: training trace {:?} rejected after merge",
                    t.calls
                );
            }
            assert_eq!(
                merged.support.values().sum::<u64>(),
                total,
                "case {case} k={k}: merging changed total transition support"
            );
            assert_eq!(
                merged.labels(),
                initial.labels(),
                "case {case} k={k}: merging changed the alphabet"
            );
            // Origins partition the original state set.
            let mut seen: BTreeSet<u32> = BTreeSet::new();
            for (class, orig) in &merged.origins {
                assert!(merged.states.contains(class));
                for o in orig {
                    assert!(seen.insert(*o), "case {case} k={k}: state {o} in two classes");
                }
            }
            assert_eq!(
                seen, initial.states,
                "case {case} k={k}: origins do not cover the prefix tree"
            );
        }
    }
}

#[test]
fn merging_is_idempotent() {
    let mut rng = support::rng(0x5eed_0022);
    for case in 0..80 {
        let traces = support::random_traces(&mut rng);
        for k in 1..=3 {
            let once = merge_states(&build_initial_fsm(&traces), k);
            let twice = merge_states(&once, k);
            assert_eq!(twice, once, "case {case} k={k}: merging a merged machine changed it");
        }
    }
}

#[test]
fn tsd_matches_simple_path_enumeration_oracle() {
    let mut rng = support::rng(0x5eed_0023);
    for case in 0..120 {
        let traces = support::random_traces(&mut rng);
        let initial = build_initial_fsm(&traces);
        let merged = merge_states(&initial, 2);
        for (fsm, tag) in [(&initial, "initial"), (&merged, "merged")] {
            for min_support in [1, 2] {
                let got: BTreeSet<(String, String)> = extract_tsd(fsm, min_support)
                    .into_iter()
                    .map(|e| (e.dependent, e.prerequisite))
                    .collect();
                let want = support::oracle_tsd(fsm, min_support);
                assert_eq!(
                    got, want,
                    "case {case} ({tag}, min_support {min_support}): TSD differs from oracle"
                );
            }
        }
    }
}

#[test]
fn tsd_output_is_sorted_and_duplicate_free() {
    let mut rng = support::rng(0x5eed_0024);
    for _ in 0..60 {
        let traces = support::random_traces(&mut rng);
        let fsm = merge_states(&build_initial_fsm(&traces), 2);
        let edges = extract_tsd(&fsm, 1);
        let keys: Vec<(String, String)> =
            edges.iter().map(|e| (e.dependent.clone(), e.prerequisite.clone())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(keys, sorted, "TSD edges must arrive sorted without duplicates");
    }
}

#[test]
fn ingestion_is_line_order_independent() {
    let text = concat!(
        r#"{"sender":"0xAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAA","function":"enter","block":3,"index":0}"#,
        "\n",
        r#"{"sender":"0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa","function":"draw","block":7,"index":2}"#,
        "\n",
        r#"{"sender":"0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa","function":"claim","block":7,"index":1,"timestamp":99}"#,
        "\n\n",
        r#"{"sender":"0xbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbb","function":"enter","block":1,"index":0}"#,
        "\n",
    );
    let forward = ingest_traces(text).expect("valid trace file");
    let reversed: String = text.lines().rev().map(|l| format!("{l}\n")).collect();
    let backward = ingest_traces(&reversed).expect("valid trace file");
    assert_eq!(forward, backward, "line order must not matter");

    assert_eq!(
        forward,
        vec![
            TransactionTrace {
                sender: "0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa".into(),
                calls: vec!["enter".into(), "claim".into(), "draw".into()],
            },
            TransactionTrace {
                sender: "0xbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbb".into(),
                calls: vec!["enter".into()],
            },
        ],
        "traces must sort by sender and order by (block, index), case-normalized"
    );
}

#[test]
fn ingestion_rejects_bad_records_with_line_numbers() {
    let dup = concat!(
        r#"{"sender":"0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa","function":"a","block":1,"index":0}"#,
        "\n",
        r#"{"sender":"0xAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAA","function":"b","block":1,"index":0}"#,
    );
    match ingest_traces(dup) {
        Err(TraceError::DuplicateOrderKey { line, block: 1, index: 0, .. }) => {
            assert_eq!(line, 2)
        }
        other => panic!("expected duplicate-key error, got {other:?}"),
    }

    for (bad, what) in [
        ("not json", "malformed JSON"),
        (r#"{"sender":"0x123","function":"a","block":1,"index":0}"#, "short sender"),
        (
            r#"{"sender":"0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa","block":1,"index":0}"#,
            "missing function",
        ),
        (
            r#"{"sender":"0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa","function":"","block":1,"index":0}"#,
            "empty function",
        ),
        (
            r#"{"sender":"0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa","function":"a","index":0}"#,
            "missing block",
        ),
        (
            r#"{"sender":"0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa","function":"a","block":1,"index":0,"extra":1}"#,
            "unknown key",
        ),
    ] {
        match ingest_traces(bad) {
            Err(TraceError::MalformedLine { line: 1, .. }) => {}
            other => panic!("{what}: expected malformed-line error at line 1, got {other:?}"),
        }
    }
}
