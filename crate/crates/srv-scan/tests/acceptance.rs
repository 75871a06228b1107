//! Acceptance gate: one test per release criterion, each ending in a single
//! `[PASS] criterion N: …` line (visible with `--nocapture`; a failing
//! criterion panics with the same numbering).

#[path = "../../srv-core/tests/support/mod.rs"]
mod support;

use srv_core::deps::extract_asd;
use srv_core::fsm::{
    build_initial_fsm, extract_tsd, ingest_traces, merge_states, TransactionTrace,
};
use srv_core::model::{load_model, CmpOp, ContractModel, EnvAtom, Expr, Statement};
use srv_core::pipeline::{analyze_model, AnalysisOptions, ModelAnalysis};
use srv_core::report::all_traces;
use srv_core::sdg::EdgeLabel;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

const FIXTURES: [&str; 4] = ["tokengame", "bskttoken", "lotto", "barn"];

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").canonicalize().expect("corpus dir")
}

fn load_fixture(name: &str) -> (ContractModel, Option<Vec<TransactionTrace>>) {
    let dir = corpus_dir().join(name);
    let model_text = std::fs::read_to_string(dir.join("model.json")).expect("fixture model");
    let model = load_model(&model_text).expect("fixture model is valid");
    let traces_path = dir.join("traces.jsonl");
    let traces = traces_path.exists().then(|| {
        ingest_traces(&std::fs::read_to_string(traces_path).expect("trace file"))
            .expect("fixture traces are valid")
    });
    (model, traces)
}

fn analyze_fixture(name: &str) -> ModelAnalysis {
    let (model, traces) = load_fixture(name);
    analyze_model(
        model,
        traces.as_deref(),
        Vec::new(),
        BTreeSet::new(),
        &AnalysisOptions::default(),
    )
    .expect("fixture analyzes")
}

type TraceKey = (String, Vec<String>, BTreeSet<String>);

fn trace_set(a: &ModelAnalysis) -> BTreeSet<TraceKey> {
    all_traces(&a.model, &a.sdg, &a.detect.findings)
        .into_iter()
        .map(|t| (t.rule, t.route, t.vars))
        .collect()
}

fn expected_traces() -> BTreeMap<String, BTreeSet<TraceKey>> {
    #[derive(serde::Deserialize)]
    struct Entry {
        #[serde(default)]
        traces: Vec<Trace>,
    }
    #[derive(serde::Deserialize)]
    struct Trace {
        rule: String,
        trace: Vec<String>,
        vars: BTreeSet<String>,
    }
    let text = std::fs::read_to_string(corpus_dir().join("expected.json")).expect("expected.json");
    let raw: BTreeMap<String, Entry> = serde_json::from_str(&text).expect("expected.json parses");
    raw.into_iter()
        .map(|(name, e)| (name, e.traces.into_iter().map(|t| (t.rule, t.trace, t.vars)).collect()))
        .collect()
}

fn scan(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_srv-scan")).args(args).output().expect("binary runs")
}

fn pass(n: u32, msg: &str) {
    println!("[PASS] criterion {n}: {msg}");
}

#[test]
fn criterion_1_corpus_exactness() {
    let expected = expected_traces();
    let mut slowest_ms = 0u128;
    for name in FIXTURES {
        let started = Instant::now();
        let analysis = analyze_fixture(name);
        let elapsed = started.elapsed();
        let got = trace_set(&analysis);
        let want =
            expected.get(name).unwrap_or_else(|| panic!("criterion 1: no expectation for {name}"));
        assert_eq!(
            &got, want,
            "criterion 1: {name} finding traces diverge from the pinned expectation"
        );
        assert!(
            elapsed.as_secs() < 10,
            "criterion 1: {name} took {elapsed:?}, over the 10s per-fixture budget"
        );
        slowest_ms = slowest_ms.max(elapsed.as_millis());
    }

    // The corpus runner agrees end to end (exit 0 == every fixture matched).
    let corpus = corpus_dir();
    let out = scan(&[
        "corpus",
        corpus.to_str().unwrap(),
        "--expected",
        corpus.join("expected.json").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "criterion 1: corpus runner disagreed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    pass(
        1,
        &format!(
            "all {} fixtures match their pinned finding sets exactly (slowest {slowest_ms} ms)",
            FIXTURES.len()
        ),
    );
}

#[test]
fn criterion_2_fsm_fidelity() {
    // (a) Mining the bundled transaction log yields the sequential
    // dependency "PlaytoEarn requires MintToken".
    let text =
        std::fs::read_to_string(corpus_dir().join("tokengame/traces.jsonl")).expect("trace file");
    let traces = ingest_traces(&text).expect("traces parse");
    let fsm = merge_states(&build_initial_fsm(&traces), 2);
    let tsd: BTreeSet<(String, String)> =
        extract_tsd(&fsm, 1).into_iter().map(|e| (e.dependent, e.prerequisite)).collect();
    assert!(
        tsd.contains(&("PlaytoEarn".to_string(), "MintToken".to_string())),
        "criterion 2: mined TSD {tsd:?} lacks (PlaytoEarn, MintToken)"
    );

    // (b) The two-user sequence pair whose suffixes coincide after the first
    // two calls: k=2 merging must fold exactly [s2,s6], [s3,s7], [s4,s8].
    let mk = |sender: &str, calls: &[&str]| TransactionTrace {
        sender: sender.to_string(),
        calls: calls.iter().map(|c| c.to_string()).collect(),
    };
    let pair = vec![
        mk(
            "0x0000000000000000000000000000000000000001",
            &["MintToken", "Deposit", "Playtoearn", "Withdraw"],
        ),
        mk(
            "0x0000000000000000000000000000000000000002",
            &["Approve", "Stake", "Playtoearn", "Withdraw"],
        ),
    ];
    let merged = merge_states(&build_initial_fsm(&pair), 2);
    let multi: BTreeSet<BTreeSet<u32>> =
        merged.origins.values().filter(|o| o.len() > 1).cloned().collect();
    let want: BTreeSet<BTreeSet<u32>> =
        [BTreeSet::from([2, 6]), BTreeSet::from([3, 7]), BTreeSet::from([4, 8])].into();
    assert_eq!(
        multi, want,
        "criterion 2: k-tails merged the wrong state groups (origins {:?})",
        merged.origins
    );
    pass(2, "trace mining finds (PlaytoEarn ← MintToken) and k=2 merges exactly [s2,s6], [s3,s7], [s4,s8]");
}

#[test]
fn criterion_3_asd_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = support::rng(0xacce_0003);
    for case in 0..500 {
        let m = support::random_model(&mut rng);
        let got: BTreeSet<(String, String, _)> =
            extract_asd(&m).into_iter().map(|e| (e.reader, e.writer, e.var)).collect();
        let want = support::oracle_asd(&m);
        assert_eq!(got, want, "criterion 3: case {case} diverges from the enumeration oracle");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion 3: took {elapsed:?}, over the 60s budget");
    pass(3, &format!("500/500 random models agree with the ASD enumeration oracle in {elapsed:?}"));
}

#[test]
fn criterion_4_disassembler_round_trip() {
    use rand::Rng;
    use srv_core::evm::disasm::{disassemble, strip_metadata, DisasmError};

    let started = Instant::now();
    let mut rng = support::rng(0xacce_0004);
    for case in 0..1000 {
        let code = support::random_valid_code(&mut rng, 256);
        let d = disassemble(&code)
            .unwrap_or_else(|e| panic!("criterion 4: case {case} failed to disassemble: {e}"));
        assert_eq!(d.to_bytes(), code, "criterion 4: case {case} did not round-trip byte-exactly");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "criterion 4: took {elapsed:?}, over the 10s budget");

    let mut checked = 0;
    for case in 0..150 {
        let mut code = support::random_valid_code(&mut rng, 64);
        let width = rng.random_range(1..=32u8);
        let provided = rng.random_range(0..width) as usize;
        let push_offset = code.len();
        code.push(0x5f + width);
        for _ in 0..provided {
            code.push(rng.random());
        }
        if strip_metadata(&code).0.len() != code.len() {
            continue; // random tail parsed as a metadata trailer
        }
        match (disassemble(&code), disassemble(&code)) {
            (
                Err(DisasmError::TruncatedPush { offset, missing }),
                Err(DisasmError::TruncatedPush { offset: o2, missing: m2 }),
            ) => {
                assert_eq!(
                    (offset, missing),
                    (o2, m2),
                    "criterion 4: case {case} nondeterministic"
                );
                assert_eq!(offset, push_offset, "criterion 4: case {case} wrong offset");
                assert_eq!(
                    missing,
                    width as usize - provided,
                    "criterion 4: case {case} wrong gap"
                );
                checked += 1;
            }
            other => panic!("criterion 4: case {case} expected TruncatedPush twice, got {other:?}"),
        }
    }
    assert!(checked >= 100, "criterion 4: too few truncation cases exercised: {checked}");
    pass(4, &format!(
        "1000/1000 byte-exact round-trips in {elapsed:?}; {checked} truncated-PUSH errors deterministic and exact"
    ));
}

#[test]
fn criterion_5_loop_oracle() {
    use srv_core::evm::cfg::build_cfg;
    use srv_core::evm::disasm::disassemble;
    use srv_core::evm::loops::find_loops;

    let started = Instant::now();
    let mut rng = support::rng(0xacce_0005);
    let mut loopy = 0;
    for case in 0..300 {
        let code = support::random_cfg_bytecode(&mut rng, 12);
        let cfg = build_cfg(&disassemble(&code).expect("generated code parses"));
        let got: BTreeSet<(usize, usize, Vec<usize>)> = find_loops(&cfg)
            .into_iter()
            .map(|l| (l.header, l.latch, l.body.into_iter().collect()))
            .collect();
        let want = support::oracle_loops(&cfg);
        assert_eq!(got, want, "criterion 5: case {case} diverges from the dominance oracle");
        if !got.is_empty() {
            loopy += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion 5: took {elapsed:?}, over the 60s budget");
    assert!(loopy >= 50, "criterion 5: only {loopy}/300 cases had loops — generator degraded");
    pass(
        5,
        &format!(
            "300/300 random CFGs agree with the back-edge oracle ({loopy} loopy) in {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_6_taint_reachability_and_monotonicity() {
    use rand::Rng;

    let mut rng = support::rng(0xacce_0006);
    for case in 0..200 {
        let g = support::random_sdg(&mut rng);
        let labels = support::random_labels(&mut rng);
        let sources: Vec<usize> = (0..g.nodes.len()).filter(|_| rng.random_bool(0.2)).collect();
        let got = g.reachable(&sources, &labels).expect("valid ids");
        let want = support::oracle_reachable(&g, &sources, &labels);
        assert_eq!(got, want, "criterion 6: case {case} diverges from the closure oracle");

        let mut more = sources.clone();
        for n in 0..g.nodes.len() {
            if !more.contains(&n) && rng.random_bool(0.1) {
                more.push(n);
            }
        }
        let grown = g.reachable(&more, &labels).expect("valid ids");
        assert!(
            got.is_subset(&grown),
            "criterion 6: case {case} adding sources shrank the reachable set"
        );
    }
    pass(
        6,
        "200/200 random graphs: reachability equals brute-force closure and grows monotonically",
    );
}

#[test]
fn criterion_7_access_control_insertion_is_metamorphic() {
    let guard = Statement::Assert {
        cond: Expr::Cmp(
            CmpOp::Eq,
            Box::new(Expr::Atom(EnvAtom::Origin)),
            Box::new(Expr::Atom(EnvAtom::Caller)),
        ),
    };

    let mut eliminated = 0;
    for name in FIXTURES {
        let (model, traces) = load_fixture(name);
        let base = analyze_model(
            model.clone(),
            traces.as_deref(),
            Vec::new(),
            BTreeSet::new(),
            &AnalysisOptions::default(),
        )
        .expect("fixture analyzes");

        for finding in &base.detect.findings {
            let at = finding.indicator.site[0];
            let mut guarded = model.clone();
            guarded
                .functions
                .iter_mut()
                .find(|f| f.name == finding.indicator.function)
                .expect("indicator function exists")
                .body
                .insert(at, guard.clone());

            let after = analyze_model(
                guarded,
                traces.as_deref(),
                Vec::new(),
                BTreeSet::new(),
                &AnalysisOptions::default(),
            )
            .expect("guarded fixture analyzes");

            // The indicator statement shifted one slot down; nothing at its
            // new site may fire the same rule any more.
            let mut shifted = finding.indicator.site.clone();
            shifted[0] += 1;
            let survived = after.detect.findings.iter().any(|f| {
                f.rule == finding.rule
                    && f.indicator.function == finding.indicator.function
                    && f.indicator.site == shifted
            });
            assert!(
                !survived,
                "criterion 7: {name}: guard before {}:{:?} did not suppress the {} finding",
                finding.indicator.function,
                finding.indicator.site,
                finding.rule.as_str()
            );
            eliminated += 1;
        }
    }
    assert!(eliminated >= 4, "criterion 7: only {eliminated} findings exercised — corpus degraded");
    pass(7, &format!(
        "inserting an origin-equals-caller assert before each of the {eliminated} corpus indicators eliminates its finding"
    ));
}

#[test]
fn criterion_8_sequence_dependency_ablation() {
    let (model, traces) = load_fixture("tokengame");
    let traces = traces.expect("tokengame ships traces");
    let with_tsd = analyze_model(
        model.clone(),
        Some(&traces),
        Vec::new(),
        BTreeSet::new(),
        &AnalysisOptions::default(),
    )
    .expect("analyzes");
    let without_tsd = analyze_model(
        model,
        Some(&traces),
        Vec::new(),
        BTreeSet::new(),
        &AnalysisOptions { use_tsd: false, ..Default::default() },
    )
    .expect("analyzes");

    let full = trace_set(&with_tsd);
    let ablated = trace_set(&without_tsd);
    assert!(
        ablated.is_subset(&full),
        "criterion 8: disabling TSD produced traces the full run lacks"
    );
    assert!(
        ablated.len() < full.len(),
        "criterion 8: ablation lost nothing — TSD edges contributed no findings"
    );
    let lost_vars: BTreeSet<&String> =
        full.difference(&ablated).flat_map(|(_, _, vars)| vars).collect();
    assert!(
        lost_vars.contains(&"Earning".to_string()),
        "criterion 8: the sequence-dependent var should be what ablation loses, got {lost_vars:?}"
    );

    // The graph itself must still carry the mined edges so the ablation is
    // attributable to the detector toggle, not to skipped mining.
    assert!(
        !without_tsd.tsd.is_empty(),
        "criterion 8: mined sequence dependencies missing from the ablated run"
    );
    assert!(
        with_tsd.sdg.edges.iter().any(|e| e.label == EdgeLabel::Tsd),
        "criterion 8: full run's graph has no TSD edges"
    );
    pass(8, &format!(
        "without TSD the finding set shrinks strictly ({} → {}), losing exactly the sequence-dependent vars {lost_vars:?}",
        full.len(),
        ablated.len()
    ));
}

#[test]
fn criterion_9_corpus_runs_are_byte_identical() {
    let corpus = corpus_dir();
    let expected = corpus.join("expected.json");
    let args = ["corpus", corpus.to_str().unwrap(), "--expected", expected.to_str().unwrap()];
    let first = scan(&args);
    let second = scan(&args);
    assert_eq!(first.status.code(), Some(0), "criterion 9: first corpus run failed");
    assert_eq!(second.status.code(), Some(0), "criterion 9: second corpus run failed");
    assert!(!first.stdout.is_empty(), "criterion 9: corpus run printed no JSON");
    assert_eq!(
        first.stdout, second.stdout,
        "criterion 9: consecutive corpus runs differ byte-for-byte"
    );

    // Single-contract reports are equally stable.
    let model = corpus.join("tokengame/model.json");
    let traces = corpus.join("tokengame/traces.jsonl");
    let args =
        ["analyze", "--model", model.to_str().unwrap(), "--traces", traces.to_str().unwrap()];
    let a = scan(&args);
    let b = scan(&args);
    assert_eq!(a.stdout, b.stdout, "criterion 9: analyze runs differ byte-for-byte");
    pass(9, "two consecutive corpus runs (and analyze runs) emit byte-identical JSON");
}
