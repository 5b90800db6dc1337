//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them). Every tolerance is pinned
//! here, not in any config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use personaforge::assess::{
    Assessor, FilterPolicy, filter_records, full_accuracy, single_accuracy,
};
use personaforge::dataset::{SubsetName, build_subset};
use personaforge::eval::consistency::{StdMode, consistency};
use personaforge::eval::rouge::rouge_l_tokens;
use personaforge::eval::winrate::{WinRateItem, win_rate};
use personaforge::gateway::{Gateway, MockBackend, MockRule};
use personaforge::interview::{InterviewKind, InterviewRecord, Turn};
use personaforge::pipeline::{
    EvalConfig, GatewayConfig, Metric, ModelAliases, RunConfig, cmd_eval, cmd_export, cmd_filter,
    cmd_generate, interviews_path, report_path, subset_path,
};
use personaforge::registry::Registry;
use personaforge::scales::{QuestionMode, ScaleBank};
use personaforge::template::{TemplateSet, names, render};

fn repo_data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/e2e")
        .join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Textbook full-matrix LCS, kept deliberately separate from the library's
/// rolling-row implementation.
fn lcs_full_matrix(a: &[String], b: &[String]) -> usize {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table[a.len()][b.len()]
}

#[test]
fn ac01_rouge_l_matches_brute_force_oracle_on_1000_pairs() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_101);
    let vocab = ["a", "b", "c", "d", "e"];
    for case in 0..1000 {
        let seq = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let len = rng.random_range(0..=12);
            (0..len)
                .map(|_| vocab[rng.random_range(0..vocab.len())].to_string())
                .collect()
        };
        let cand = seq(&mut rng);
        let reference = seq(&mut rng);
        let got = rouge_l_tokens(&cand, &reference);
        let l = lcs_full_matrix(&cand, &reference) as f64;
        let want = if l == 0.0 {
            0.0
        } else {
            let r = l / reference.len() as f64;
            let p = l / cand.len() as f64;
            2.0 * r * p / (r + p)
        };
        assert!(
            (got - want).abs() <= 1e-9,
            "case {case}: got {got}, oracle {want} (cand {cand:?}, ref {reference:?})"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5s");
    println!("[PASS] AC-01 rouge-l equals the brute-force LCS oracle on 1000 pairs in {elapsed:?}");
}

#[test]
fn ac02_consistency_matches_hand_computed_oracle() {
    let rounds: Vec<BTreeMap<String, f64>> = [2.0, 2.0, 2.0, 2.0, 7.0]
        .iter()
        .map(|v| [("x".to_string(), *v), ("y".to_string(), 4.0)].into())
        .collect();

    let population = consistency("s", &rounds, StdMode::Population).unwrap();
    assert!((population.per_dimension_std["x"] - 2.0).abs() <= 1e-12);
    assert!((population.per_dimension_std["y"]).abs() <= 1e-12);
    assert!((population.average_std - 1.0).abs() <= 1e-12);

    let sample = consistency("s", &rounds, StdMode::Sample).unwrap();
    assert!((sample.per_dimension_std["x"] - 5.0_f64.sqrt()).abs() <= 1e-12);
    assert!((sample.per_dimension_std["x"] - 2.236_067_977_499_79).abs() <= 1e-9);
    println!(
        "[PASS] AC-02 consistency: population std([2,2,2,2,7]) = 2.0, sample = sqrt(5), both to 1e-12"
    );
}

/// A five-dimension scale plus a judge scripted per dimension name.
fn penta_bank() -> ScaleBank {
    let dims = [
        ("V", "Vigor"),
        ("W", "Warmth"),
        ("X", "Xenophilia"),
        ("Y", "Yearning"),
        ("Z", "Zeal"),
    ];
    let dim_meta: Vec<serde_json::Value> = dims
        .iter()
        .map(|(c, n)| serde_json::json!({"code": c, "name": n, "description": ""}))
        .collect();
    let questions: Vec<serde_json::Value> = dims
        .iter()
        .enumerate()
        .flat_map(|(i, (c, n))| {
            (0..2).map(move |j| {
                serde_json::json!({
                    "id": format!("penta-{}{}", i, j),
                    "dimension": c,
                    "text": format!("Question {j} about {n}?"),
                    "reverse_scored": false,
                    "language": "en"
                })
            })
        })
        .collect();
    ScaleBank::from_value(&serde_json::json!({
        "part_subset": [],
        "scales": [{
            "id": "penta", "name": "Penta", "label_kind": "per_dimension_level",
            "declared_count": 10, "dimensions": dim_meta, "questions": questions
        }]
    }))
    .unwrap()
}

fn penta_registry(characters: &[&str]) -> Registry {
    let chars: Vec<serde_json::Value> = characters
        .iter()
        .map(|name| {
            serde_json::json!({
                "name": name, "source": "Other", "split": "train",
                "description": format!("{name}, a fixture character."),
                "memory": []
            })
        })
        .collect();
    let labels: Vec<serde_json::Value> = characters
        .iter()
        .map(|name| {
            serde_json::json!({
                "character": name, "scale": "penta",
                "label": {"V": "High", "W": "High", "X": "High", "Y": "High", "Z": "High"}
            })
        })
        .collect();
    Registry::from_value(&serde_json::json!({"characters": chars, "labels": labels})).unwrap()
}

fn record(
    id: &str,
    character: &str,
    question_id: &str,
    dim: &str,
    dim_name: &str,
) -> InterviewRecord {
    InterviewRecord {
        id: id.to_string(),
        character: character.to_string(),
        scale_id: "penta".to_string(),
        kind: InterviewKind::Single,
        turns: vec![Turn {
            question_id: question_id.to_string(),
            dimension_code: dim.to_string(),
            question_text: format!("Question 0 about {dim_name}?"),
            response_text: "a reply".to_string(),
        }],
        generator_model: "mock".to_string(),
        created_at_unix: 0,
        turn_digests: vec![],
    }
}

#[test]
fn ac03_single_and_full_accuracy_semantics() {
    let bank = penta_bank();
    let scale = bank.get("penta").unwrap();
    let registry = penta_registry(&["Kim", "Lee"]);

    // The judge scores Vigor low (mismatching the all-High truth) and every
    // other dimension high, for both characters.
    let mock = MockBackend::new(vec![
        MockRule::substring("\"Vigor\"", "declines it.\n2"),
        MockRule::catch_all("embraces it.\n6"),
    ]);
    let gateway = Gateway::new(Box::new(mock));
    let templates = TemplateSet::embedded();
    let assessor = Assessor::new(&gateway, &templates, "judge");

    let mut results = Vec::new();
    for character in ["Kim", "Lee"] {
        let records: Vec<InterviewRecord> = scale
            .dimensions
            .iter()
            .enumerate()
            .map(|(i, d)| {
                record(
                    &format!("{character}-{i}"),
                    character,
                    &format!("penta-{i}0"),
                    &d.code,
                    &d.name,
                )
            })
            .collect();
        let refs: Vec<&InterviewRecord> = records.iter().collect();
        let truth = registry.ground_truth_for(character, "penta").unwrap();
        results.push(assessor.assess(character, scale, &refs, truth).unwrap());
    }

    let single = single_accuracy(&results).unwrap();
    let full = full_accuracy(&results).unwrap();
    assert!(
        (single - 0.8).abs() <= 1e-12,
        "single accuracy {single}, want 0.8"
    );
    assert!(full.abs() <= 1e-12, "full accuracy {full}, want 0.0");
    println!(
        "[PASS] AC-03 one mismatched dimension per character over 2x5 gives single 0.8, full 0.0"
    );
}

#[test]
fn ac04_filtering_conservation_and_exact_discard_set() {
    let bank = penta_bank();
    let scale = bank.get("penta").unwrap();
    let registry = penta_registry(&["Mo"]);

    // Three of five dimensions mismatch the all-High truth.
    let mock = MockBackend::new(vec![
        MockRule::substring("\"Vigor\"", "no.\n2"),
        MockRule::substring("\"Xenophilia\"", "no.\n2"),
        MockRule::substring("\"Zeal\"", "no.\n2"),
        MockRule::catch_all("yes.\n6"),
    ]);
    let gateway = Gateway::new(Box::new(mock));
    let templates = TemplateSet::embedded();
    let assessor = Assessor::new(&gateway, &templates, "judge");

    // Ten records: two per dimension.
    let records: Vec<InterviewRecord> = scale
        .dimensions
        .iter()
        .enumerate()
        .flat_map(|(i, d)| {
            (0..2).map(move |j| {
                record(
                    &format!("mo-{i}{j}"),
                    "Mo",
                    &format!("penta-{i}{j}"),
                    &d.code,
                    &d.name,
                )
            })
        })
        .collect();
    let refs: Vec<&InterviewRecord> = records.iter().collect();
    let truth = registry.ground_truth_for("Mo", "penta").unwrap();
    let assessment = assessor.assess("Mo", scale, &refs, truth).unwrap();

    let outcomes = filter_records(
        &records,
        std::slice::from_ref(&assessment),
        FilterPolicy::PerDimension,
    );
    let kept: Vec<&str> = outcomes
        .iter()
        .filter(|o| o.kept)
        .map(|o| o.record_id.as_str())
        .collect();
    let discarded: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.kept)
        .map(|o| o.record_id.as_str())
        .collect();

    assert_eq!(kept.len() + discarded.len(), records.len());
    let mismatched_dims = ["V", "X", "Z"];
    let expected_discards: Vec<&str> = records
        .iter()
        .filter(|r| mismatched_dims.contains(&r.turns[0].dimension_code.as_str()))
        .map(|r| r.id.as_str())
        .collect();
    assert_eq!(discarded, expected_discards);
    assert_eq!(discarded.len(), 6);
    println!(
        "[PASS] AC-04 filtering conserves records and discards exactly the mismatched-dimension probes"
    );
}

fn reference_mock_config(out_dir: &Path, subsets: Vec<SubsetName>, multi_rounds: u32) -> RunConfig {
    RunConfig {
        bank_path: repo_data("scales.json"),
        registry_path: repo_data("registry.json"),
        out_dir: out_dir.to_path_buf(),
        gateway: GatewayConfig {
            endpoint_url: None,
            api_key_env: "OPENAI_API_KEY".into(),
            mock_script: Some(repo_data("mock/pipeline.json")),
            models: ModelAliases::default(),
            concurrency: 8,
            retry_max_attempts: 2,
            backoff_base_ms: 1,
            timeout_ms: 1000,
            cache_dir: None,
            generation_temperature: 0.7,
            price_per_mtok_prompt: 0.0,
            price_per_mtok_completion: 0.0,
        },
        subsets,
        seed: Some(11),
        filter_policy: FilterPolicy::PerDimension,
        multi_rounds,
        memory_k: 3,
        templates_dir: None,
        eval: EvalConfig::default(),
    }
}

#[test]
fn ac05_multi_turn_structure_over_a_500_record_run() {
    let dir = tempfile::tempdir().unwrap();
    // 46 train characters x 2 multi-capable Part scales (bfi, 16personalities)
    // x 6 rounds = 552 planned multi records.
    let config = reference_mock_config(dir.path(), vec![SubsetName::PartMulti], 6);
    let outcome = cmd_generate(&config).unwrap();
    assert!(
        outcome.emitted >= 500,
        "only {} records generated",
        outcome.emitted
    );

    let bank = ScaleBank::load(repo_data("scales.json")).unwrap();
    let text = std::fs::read_to_string(interviews_path(dir.path())).unwrap();
    let mut checked = 0usize;
    for line in text.lines() {
        let record: InterviewRecord = serde_json::from_str(line).unwrap();
        assert_eq!(record.kind, InterviewKind::Multi);
        assert_eq!(
            record.turns.len(),
            5,
            "record {} has wrong turn count",
            record.id
        );
        let scale = bank.get(&record.scale_id).expect("record's scale exists");
        let mut dims = std::collections::BTreeSet::new();
        for turn in &record.turns {
            assert!(
                scale.dimension(&turn.dimension_code).is_some(),
                "turn dimension {} not in scale {}",
                turn.dimension_code,
                scale.id
            );
            assert!(
                dims.insert(turn.dimension_code.clone()),
                "record {} repeats dimension {}",
                record.id,
                turn.dimension_code
            );
        }
        checked += 1;
    }
    assert!(checked >= 500);

    // The exported samples keep the structure: one system message plus five
    // user/assistant pairs.
    cmd_filter(&config).unwrap();
    cmd_export(&config).unwrap();
    let jsonl = std::fs::read_to_string(subset_path(dir.path(), SubsetName::PartMulti)).unwrap();
    assert!(!jsonl.trim().is_empty());
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let messages = v["messages"].as_array().unwrap();
        assert_eq!(messages.len(), 11);
        assert_eq!(messages[0]["role"], "system");
        for (i, m) in messages[1..].iter().enumerate() {
            assert_eq!(m["role"], if i % 2 == 0 { "user" } else { "assistant" });
        }
    }
    println!(
        "[PASS] AC-05 all {checked} generated multi records (and every exported sample) have 5 turns over distinct dimensions"
    );
}

#[test]
fn ac06_test_character_injection_fails_with_test_leak() {
    let bank = ScaleBank::load(repo_data("scales.json")).unwrap();
    let registry = Registry::load(repo_data("registry.json")).unwrap();
    let templates = TemplateSet::embedded();

    // Shrek is a test-split character in the reference registry.
    let leak = InterviewRecord {
        id: "leak-1".into(),
        character: "Shrek".into(),
        scale_id: "bfi".into(),
        kind: InterviewKind::Single,
        turns: vec![Turn {
            question_id: "bfi-001".into(),
            dimension_code: "O".into(),
            question_text:
                "How do you feel about exploring ideas no one around you takes seriously?".into(),
            response_text: "Layers. I contain layers.".into(),
        }],
        generator_model: "mock".into(),
        created_at_unix: 0,
        turn_digests: vec![],
    };
    let err = build_subset(
        SubsetName::FullSingle,
        &[leak],
        &bank,
        &registry,
        &templates,
        3,
    )
    .unwrap_err();
    match err {
        personaforge::dataset::DatasetError::TestLeak { character, .. } => {
            assert_eq!(character, "Shrek");
        }
        other => panic!("expected TestLeak, got {other:?}"),
    }
    println!("[PASS] AC-06 injecting a test-split character fails the export with TestLeak");
}

#[test]
fn ac07_judge_prompts_match_golden_files() {
    let templates = TemplateSet::embedded();
    let update = std::env::var("UPDATE_GOLDEN").is_ok();

    let dimensional_slots: [(&str, &str); 3] = [
        ("agent_name", "Ada Lovelace"),
        (
            "agent_context",
            "A methodical analyst of engines and tables.",
        ),
        (
            "interactions",
            "Interviewer: How do you feel about planning your week down to the hour?\nAda Lovelace: I annotate the plan, then annotate the annotations.",
        ),
    ];
    let winrate_slots: [(&str, &str); 4] = [
        ("role_name", "Ada Lovelace"),
        (
            "role_description_and_catchphrases",
            "A methodical analyst. \"The engine does not guess.\"",
        ),
        (
            "question_dict",
            "{\"question\": \"How do you plan a week?\"}",
        ),
        (
            "list_model_answer_dict",
            "[{\"model\": \"model_1\", \"answer\": \"I plan by the hour.\"}, {\"model\": \"model_2\", \"answer\": \"I wing it.\"}]",
        ),
    ];

    let cases: [(&str, &[(&str, &str)]); 7] = [
        (names::DIM_MEMORIZATION, &dimensional_slots),
        (names::DIM_PERSONALITY, &dimensional_slots),
        (names::DIM_VALUES, &dimensional_slots),
        (names::DIM_STABILITY, &dimensional_slots),
        (names::DIM_HALLUCINATION, &dimensional_slots),
        (names::WINRATE_SYSTEM, &[]),
        (names::WINRATE_USER, &winrate_slots),
    ];

    for (name, slots) in cases {
        let rendered = render(templates.get(name).unwrap(), slots).unwrap();
        let path = golden(&format!("{name}.golden.txt"));
        if update {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &rendered).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("missing golden {path:?}: {e}"));
        assert_eq!(
            rendered, want,
            "template `{name}` drifted from its golden file; \
             if the change is intended, regenerate with UPDATE_GOLDEN=1"
        );
    }
    if update {
        println!("[regenerated golden files]");
    } else {
        println!(
            "[PASS] AC-07 the five dimensional prompts and the win-rate prompt render bit-exact to their goldens"
        );
    }
}

fn e2e_config(out_dir: &Path) -> RunConfig {
    RunConfig {
        bank_path: fixture("bank.json"),
        registry_path: fixture("registry.json"),
        out_dir: out_dir.to_path_buf(),
        gateway: GatewayConfig {
            endpoint_url: None,
            api_key_env: "OPENAI_API_KEY".into(),
            mock_script: Some(fixture("mock.json")),
            models: ModelAliases::default(),
            concurrency: 4,
            retry_max_attempts: 2,
            backoff_base_ms: 1,
            timeout_ms: 1000,
            cache_dir: None,
            generation_temperature: 0.7,
            price_per_mtok_prompt: 0.0,
            price_per_mtok_completion: 0.0,
        },
        subsets: SubsetName::ALL.to_vec(),
        seed: Some(7),
        filter_policy: FilterPolicy::PerDimension,
        multi_rounds: 1,
        memory_k: 2,
        templates_dir: None,
        eval: EvalConfig {
            metrics: vec![],
            mcq_path: Some(repo_data("mcq.sample.json")),
            rouge_pairs_path: Some(repo_data("eval/rouge_pairs.sample.json")),
            winrate_items_path: Some(repo_data("eval/winrate_items.sample.json")),
            transcripts_path: Some(repo_data("eval/transcripts.sample.json")),
            per_character_averaging: false,
            sample_std: false,
            consistency_scales: None,
        },
    }
}

fn run_full_pipeline(out_dir: &Path) {
    let config = e2e_config(out_dir);
    cmd_generate(&config).unwrap();
    cmd_filter(&config).unwrap();
    cmd_export(&config).unwrap();
    let outcome = cmd_eval(&config, &Metric::ALL).unwrap();
    assert!(
        outcome.failed.is_empty(),
        "eval failures: {:?}",
        outcome.failed
    );
}

#[test]
fn ac08_end_to_end_mock_runs_are_byte_identical() {
    let started = Instant::now();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_full_pipeline(dir_a.path());
    run_full_pipeline(dir_b.path());

    let mut compared = 0usize;
    for subset in SubsetName::ALL {
        let a = std::fs::read(subset_path(dir_a.path(), subset)).unwrap();
        let b = std::fs::read(subset_path(dir_b.path(), subset)).unwrap();
        assert_eq!(a, b, "subset {} differs between runs", subset.as_str());
        assert!(
            !a.is_empty(),
            "subset {} unexpectedly empty",
            subset.as_str()
        );
        compared += 1;
    }
    for metric in Metric::ALL {
        let a = std::fs::read(report_path(dir_a.path(), metric)).unwrap();
        let b = std::fs::read(report_path(dir_b.path(), metric)).unwrap();
        assert_eq!(a, b, "{} report differs between runs", metric.as_str());
        compared += 1;
    }
    let a = std::fs::read(dir_a.path().join("reports/summary.csv")).unwrap();
    let b = std::fs::read(dir_b.path().join("reports/summary.csv")).unwrap();
    assert_eq!(a, b, "summary.csv differs between runs");
    compared += 1;
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 60s");
    println!(
        "[PASS] AC-08 two full pipeline runs produced {compared} byte-identical exports and reports in {elapsed:?}"
    );
}

#[test]
fn ac09_reference_bank_counts_match_the_published_table() {
    let bank = ScaleBank::load(repo_data("scales.json")).unwrap();
    let expected: [(&str, usize); 14] = [
        ("16personalities", 60),
        ("bfi", 44),
        ("bsri", 60),
        ("cabin", 164),
        ("dtdd", 12),
        ("ecr_r", 36),
        ("eis", 33),
        ("empathy", 10),
        ("epq_r", 100),
        ("gse", 10),
        ("icb", 8),
        ("lms", 9),
        ("lot_r", 10),
        ("wleis", 16),
    ];
    assert_eq!(bank.len(), 14);
    for (id, count) in expected {
        let scale = bank.get(id).unwrap_or_else(|| panic!("scale {id} missing"));
        assert_eq!(scale.questions.len(), count, "scale {id}");
        assert_eq!(scale.declared_count, count, "scale {id} declared");
    }
    assert_eq!(
        bank.select_questions(QuestionMode::Full).unwrap().len(),
        572
    );

    // DTDD partitions into its three dark-triad dimensions.
    let dtdd = bank.get("dtdd").unwrap();
    let buckets = dtdd.questions_by_dimension();
    assert_eq!(
        buckets.keys().copied().collect::<Vec<_>>(),
        vec!["M", "N", "P"]
    );
    assert_eq!(buckets.values().map(|b| b.len()).sum::<usize>(), 12);

    // BFI partitions into OCEAN with sizes summing to 44.
    let bfi = bank.get("bfi").unwrap();
    let buckets = bfi.questions_by_dimension();
    let mut codes: Vec<&str> = buckets.keys().copied().collect();
    codes.sort_unstable();
    assert_eq!(codes, vec!["A", "C", "E", "N", "O"]);
    assert_eq!(buckets.values().map(|b| b.len()).sum::<usize>(), 44);

    // The registry fixture matches the published split: 46 train characters
    // (30 + 16 by source), nine test characters, 16P histogram summing to 46.
    let registry = Registry::load(repo_data("registry.json")).unwrap();
    let (train, test) = registry.split();
    assert_eq!(train.len(), 46);
    assert_eq!(test.len(), 9);
    let rolellm = train
        .iter()
        .filter(|c| matches!(c.source, personaforge::registry::Source::RoleLLM))
        .count();
    let haruhi = train
        .iter()
        .filter(|c| matches!(c.source, personaforge::registry::Source::ChatHaruhi))
        .count();
    assert_eq!((rolellm, haruhi), (30, 16));
    for name in [
        "Shrek",
        "Thor",
        "Rorschach",
        "Twilight Sparkle",
        "Michael Scott",
    ] {
        assert!(
            registry.is_test_character(name),
            "{name} should be a test character"
        );
    }
    let train_labels = registry
        .labels()
        .iter()
        .filter(|l| l.scale_id == "16personalities" && !registry.is_test_character(&l.character))
        .count();
    assert_eq!(train_labels, 46);
    registry.validate_labels(&bank).unwrap();

    // A part_subset of one scale selects exactly that scale's questions.
    let mut narrowed = bank.to_value();
    narrowed["part_subset"] = serde_json::json!(["icb"]);
    let narrowed = ScaleBank::from_value(&narrowed).unwrap();
    let icb_only = narrowed.select_questions(QuestionMode::Part).unwrap();
    assert_eq!(icb_only.len(), 8);
    assert!(icb_only.iter().all(|q| q.scale_id == "icb"));

    // Annotations resolve to parseable type codes, e.g. Sheldon's.
    let sheldon = registry
        .ground_truth_for("Sheldon", "16personalities")
        .unwrap()
        .unwrap();
    match &sheldon.label {
        personaforge::registry::LabelValue::Categorical(code) => {
            let scale = bank.get("16personalities").unwrap();
            assert!(
                scale.parse_categorical_label(code).is_some(),
                "bad code {code}"
            );
            assert_eq!(code.len(), 4);
        }
        other => panic!("expected a categorical label, got {other:?}"),
    }
    println!(
        "[PASS] AC-09 reference bank has the 14 published per-scale counts (572 total) and the 46+9 character split"
    );
}

#[test]
fn ac10_win_rate_arithmetic_48_of_100() {
    let templates = TemplateSet::embedded();
    let seed = 97;
    let items: Vec<WinRateItem> = (0..100)
        .map(|i| WinRateItem {
            id: format!("ac10-{i:03}"),
            question: format!("Scenario question {i}?"),
            candidate_answer: format!("candidate take {i}"),
            reference_answer: format!("reference take {i}"),
            role_name: "Fixture".into(),
            role_description: "A fixture role.".into(),
        })
        .collect();

    // Script the judge so the candidate is ranked first on exactly 48 items,
    // whatever alias order the per-item seed picked.
    let rules: Vec<MockRule> = items
        .iter()
        .enumerate()
        .map(|(idx, item)| {
            let candidate_first = personaforge::eval::winrate::candidate_goes_first(seed, &item.id);
            let cand = if candidate_first { "model_1" } else { "model_2" };
            let reference = if candidate_first { "model_2" } else { "model_1" };
            let (first, second) = if idx < 48 { (cand, reference) } else { (reference, cand) };
            MockRule::substring(
                item.question.clone(),
                format!(
                    "[{{\"model\": \"{first}\", \"reason\": \"stronger voice\", \"rank\": 1}}, {{\"model\": \"{second}\", \"reason\": \"weaker\", \"rank\": 2}}]"
                ),
            )
        })
        .collect();
    let gateway = Gateway::new(Box::new(MockBackend::new(rules)));
    let report = win_rate(&gateway, "judge", &items, &templates, seed).unwrap();
    assert_eq!(report.judged, 100);
    assert_eq!(report.wins, 48);
    assert!((report.win_rate - 0.48).abs() <= 1e-12);
    println!(
        "[PASS] AC-10 a judge ranking the candidate first on 48 of 100 items yields win-rate 0.48"
    );
}
