mod common;

use std::fs;

use bookrel_cli::RunManifest;
use common::{run, run_ok, run_pipeline, tree, tree_differences, TINY_CONFIG};

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["ingest", "--in", "x", "--out", "y", "--bogus"]), 2);
    assert_eq!(run(&["synthesize", "--out", "x"]), 2, "missing --corpus");
    assert_eq!(run(&["gen-demo-corpus", "--out", "x", "--threads", "0"]), 2);
    assert_eq!(run(&["sweep", "--features", "f", "--out", "o", "--fractions", "0,a"]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn io_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let out = dir.path().join("out.tsv");
    assert_eq!(run(&["ingest", "--in", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    assert!(!out.exists());
    let catalog = dir.path().join("catalog.tsv");
    assert_eq!(
        run(&["infer-labels", "--catalog", catalog.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        1
    );
    let bad_config = dir.path().join("bad.json");
    fs::write(&bad_config, "{\"no_such_key\": 1}").unwrap();
    let demo = dir.path().join("demo");
    assert_eq!(
        run(&["gen-demo-corpus", "--out", demo.to_str().unwrap(), "--config", bad_config.to_str().unwrap()]),
        1
    );
}

#[test]
fn ingest_indexes_book_files() {
    let dir = tempfile::tempdir().unwrap();
    let books = dir.path().join("books");
    fs::create_dir(&books).unwrap();
    fs::write(
        books.join("a.json"),
        r#"{"id": "a", "metadata": {"title": "T", "author": "A", "enumeration": "v.1", "work_key": "w"},
            "pages": [{"tokens": {"x": 3, "y": 2}}, {"tokens": {"x": 1}}]}"#,
    )
    .unwrap();
    fs::write(books.join("b.json"), r#"{"id": "b", "pages": [{"tokens": {"z": 7}}]}"#).unwrap();
    fs::write(books.join("notes.txt"), "ignored").unwrap();
    let out = dir.path().join("manifest.tsv");
    run_ok(&["ingest", "--in", books.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "id\tpath\tword_count\na\tbooks/a.json\t6\nb\tbooks/b.json\t7\n"
    );
    let manifest = RunManifest::read(&dir.path().join("manifest.tsv.run.json")).unwrap();
    assert_eq!(manifest.command, "ingest");
    assert_eq!(manifest.outputs, vec![out.clone()]);

    fs::write(books.join("c.json"), r#"{"id": "a", "pages": []}"#).unwrap();
    assert_eq!(run(&["ingest", "--in", books.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn pipeline_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.json");
    fs::write(&config, TINY_CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_pipeline(&a, &config, 1);
    run_pipeline(&b, &config, 2);
    assert_eq!(tree_differences(&a, &b), Vec::<std::path::PathBuf>::new());

    let files = tree(&a);
    for expected in [
        "demo/manifest.tsv",
        "demo/catalog.tsv",
        "demo/embeddings.txt",
        "labels.tsv",
        "synth/synth-labels.tsv",
        "features/features-manifest.tsv",
        "model/model.bin",
        "eval/metrics.tsv",
        "eval/confusion.tsv",
        "sweep/sweep.tsv",
        "sweep/sweep.csv",
        "overlaps.tsv",
    ] {
        assert!(files.keys().any(|k| k.to_str() == Some(expected)), "{expected} missing");
    }
    let csv = String::from_utf8(files[std::path::Path::new("sweep/sweep.csv")].clone()).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("fraction,ratio,"));
    let overlaps = String::from_utf8(files[std::path::Path::new("overlaps.tsv")].clone()).unwrap();
    assert_eq!(overlaps.lines().count(), 6);

    // the sweep can be repeated from its manifest alone
    let manifest = RunManifest::read(&a.join("sweep/run-manifest.json")).unwrap();
    assert_eq!(manifest.command, "sweep");
    assert_eq!(manifest.seeds, vec![7]);
    let snapshot = dir.path().join("snapshot.json");
    fs::write(&snapshot, serde_json::to_string(&manifest.config).unwrap()).unwrap();
    let mut argv: Vec<String> = manifest.argv[1..].to_vec();
    let config_at = argv.iter().position(|x| x == "--config").unwrap();
    argv[config_at + 1] = snapshot.to_str().unwrap().to_string();
    let out_at = argv.iter().position(|x| x == "--out").unwrap();
    let replay = dir.path().join("replay");
    argv[out_at + 1] = replay.to_str().unwrap().to_string();
    run_ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(tree_differences(&a.join("sweep"), &replay), Vec::<std::path::PathBuf>::new());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.json");
    fs::write(&config, TINY_CONFIG).unwrap();
    let out = dir.path().join("demo");
    run_ok(&["gen-demo-corpus", "--out", out.to_str().unwrap(), "--seed", "11", "--config", config.to_str().unwrap()]);
    let manifest = RunManifest::read(&out.join("run-manifest.json")).unwrap();
    assert_eq!(manifest.seeds, vec![11]);
    assert_eq!(manifest.config.demo.seed, 11);
    assert_eq!(manifest.config.demo.n_works, 4);
    assert_eq!(manifest.config.matrix_size, 16);
}

#[test]
fn unlabeled_pairs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.json");
    fs::write(&config, TINY_CONFIG).unwrap();
    let cfg = config.to_str().unwrap();
    let demo = dir.path().join("demo");
    run_ok(&["gen-demo-corpus", "--out", demo.to_str().unwrap(), "--config", cfg]);
    let planted = demo.join("planted-labels.tsv");
    let features = dir.path().join("features");
    run_ok(&[
        "featurize",
        "--corpus",
        demo.join("heldout-manifest.tsv").to_str().unwrap(),
        "--pairs",
        planted.to_str().unwrap(),
        "--embeddings",
        demo.join("embeddings.txt").to_str().unwrap(),
        "--out",
        features.to_str().unwrap(),
        "--config",
        cfg,
    ]);
    let other = dir.path().join("other.tsv");
    fs::write(&other, "left_id\tright_id\tlabel\nq\tr\tDIFF\n").unwrap();
    let code = run(&[
        "train",
        "--features",
        features.to_str().unwrap(),
        "--labels",
        other.to_str().unwrap(),
        "--out",
        dir.path().join("m.bin").to_str().unwrap(),
        "--config",
        cfg,
    ]);
    assert_eq!(code, 1);
}
