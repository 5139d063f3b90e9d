use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use uiddec::eval::corpus_bleu;
use uiddec::fixtures;
use uiddec::model::{load_model, train_ngram};
use uiddec::objectives::Objective;
use uiddec::search::{beam_search, SearchConfig};
use uiddec::SequenceModel;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn uiddec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uiddec")).args(args).env_remove("UIDDECODE_SEED").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = uiddec(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn records(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,k,bleu,mean_sigma,mean_len,empty_rate"));
    lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn train_ngram_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, "the cat sat\nthe dog\n\na cat\n").unwrap();
    let out = dir.path().join("ngram.json");
    ok(&["train-ngram", s(&corpus), "--order", "3", "--add-k", "0.5", "-o", s(&out)]);
    assert!(dir.path().join("ngram.json.manifest.json").exists());

    let loaded = load_model(&out).unwrap();
    let text = fs::read_to_string(&corpus).unwrap();
    let lines: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .collect::<Vec<_>>();
    let direct = train_ngram(&lines, 3, 0.5).unwrap();
    let v = direct.vocab();
    for prefix in ["<s>", "<s> the", "<s> the cat", "<s> a cat", "<s> dog dog"] {
        let p = v.encode_prefix(prefix).unwrap();
        assert_eq!(loaded.next_log_probs(&[], &p).unwrap(), direct.next_log_probs(&[], &p).unwrap());
    }
}

#[test]
fn order_longer_than_every_line_is_fine() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, "a b\nb\n").unwrap();
    let out = dir.path().join("m.json");
    ok(&["train-ngram", s(&corpus), "--order", "6", "-o", s(&out)]);
    let m = load_model(&out).unwrap();
    let p = m.vocab().encode_prefix("<s> a b").unwrap();
    let total: f64 = m.next_log_probs(&[], &p).unwrap().iter().map(|l| l.exp()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn missing_file_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = uiddec(&["train-ngram", "/no/such/corpus.txt", "-o", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/corpus.txt"));

    let out = uiddec(&["decode", "/no/such/model.json", s(&fixture("m3.src")), "-o", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.jsonl");
    let bad_spec = uiddec(&["decode", s(&fixture("m1.json")), s(&fixture("m3.src")), "--objective", "nope=1", "-o", s(&out)]);
    assert_eq!(bad_spec.status.code(), Some(2));
    let misaligned = uiddec(&[
        "sweep",
        s(&fixture("m3.json")),
        s(&fixture("m3.src")),
        s(&fixture("bleu20.ref")),
        "-o",
        s(&out),
    ]);
    assert_eq!(misaligned.status.code(), Some(2));
    assert_eq!(uiddec(&["decode"]).status.code(), Some(2));
}

#[test]
fn beam_decode_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("beam.jsonl");
    let src = fixture("degradation.test.src");
    ok(&["decode", s(&fixture("degradation.json")), s(&src), "--decoder", "beam", "--k", "5", "--objective", "", "--n-max", "8", "-o", s(&out)]);

    let model = fixtures::degradation();
    let got = records(&out);
    let lines: Vec<&str> = fixtures::DEGRADATION_TEST_SRC.lines().collect();
    assert_eq!(got.len(), lines.len());
    for (rec, line) in got.iter().zip(lines) {
        let source = model.vocab().encode_line(line).unwrap();
        let want = beam_search(&model, &source, &Objective::map(), &SearchConfig::new(5, 8)).unwrap();
        assert_eq!(rec["output"], model.vocab().words(&want.best.tokens).join(" "));
        assert_eq!(rec["total"].as_f64().unwrap(), want.best.score.total);
        assert_eq!(rec["log_prob"].as_f64().unwrap(), want.best.log_prob);
        assert_eq!(rec["beam"].as_array().unwrap().len(), want.beam_set.len());
        assert_eq!(rec["source"], line);
    }
}

#[test]
fn exact_decode_certifies_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exact.jsonl");
    ok(&["decode", s(&fixture("m3.json")), s(&fixture("m3.src")), "--decoder", "exact", "--objective", "greedy=10", "--n-max", "6", "-o", s(&out)]);
    let recs = records(&out);
    assert_eq!(recs.len(), 6);
    assert!(recs.iter().all(|r| r["optimality_certificate"] == true));
}

#[test]
fn combined_objective_is_echoed_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("combined.jsonl");
    let input = dir.path().join("in.txt");
    fs::write(&input, "\n\n").unwrap();
    ok(&["decode", s(&fixture("m1.json")), s(&input), "--objective", "greedy=5,square=2", "--n-max", "4", "-o", s(&out)]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("combined.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "decode");
    assert_eq!(manifest["config"]["objective"], "greedy=5,square=2");
    assert_eq!(manifest["model_digest"].as_str().unwrap().len(), 64);
    let recs = records(&out);
    let kinds: Vec<&str> = recs[0]["penalties"].as_array().unwrap().iter().map(|p| p["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["greedy", "square"]);
}

#[test]
fn single_lambda_sweep_equals_decode_plus_eval() {
    let dir = tempfile::tempdir().unwrap();
    let (model, src, refs) = (fixture("degradation.json"), fixture("degradation.test.src"), fixture("degradation.test.ref"));
    let csv = dir.path().join("sweep.csv");
    ok(&["sweep", s(&model), s(&src), s(&refs), "--lambdas", "0", "--k", "4", "--n-max", "8", "-o", s(&csv)]);
    let jsonl = dir.path().join("decode.jsonl");
    ok(&["decode", s(&model), s(&src), "--k", "4", "--n-max", "8", "-o", s(&jsonl)]);

    let recs = records(&jsonl);
    let hyps: Vec<Vec<String>> =
        recs.iter().map(|r| r["output"].as_str().unwrap().split_whitespace().map(String::from).collect()).collect();
    let references = fixtures::lines(fixtures::DEGRADATION_TEST_REF);
    let bleu = corpus_bleu(&hyps, &references).unwrap().corpus_bleu;
    let sigma = recs.iter().map(|r| r["anchored_sigma"].as_f64().unwrap()).sum::<f64>() / recs.len() as f64;
    let empty = recs.iter().filter(|r| r["output"] == "").count() as f64 / recs.len() as f64;

    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][..2], [0.0, 4.0]);
    assert_eq!(rows[0][2], bleu);
    assert!((rows[0][3] - sigma).abs() < 1e-12);
    assert_eq!(rows[0][5], empty);
}

#[test]
fn m3_sweep_moves_from_empty_to_full() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m3.csv");
    let refs = dir.path().join("m3.ref");
    let paths: String = (0..6).map(|i| fixtures::m3_path(i).join(" ") + "\n").collect();
    fs::write(&refs, paths).unwrap();
    ok(&[
        "sweep",
        s(&fixture("m3.json")),
        s(&fixture("m3.src")),
        s(&refs),
        "--decoder",
        "exact",
        "--objective-kind",
        "greedy",
        "--lambdas",
        "0,1e6",
        "--n-max",
        "6",
        "-o",
        s(&csv),
    ]);
    let rows = csv_rows(&csv);
    assert_eq!(rows[0][5], 1.0);
    assert_eq!(rows[1][5], 0.0);
    assert_eq!(rows[1][2], 100.0);
}

#[test]
fn k_sweep_bleu_is_non_increasing_without_regularization() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("k.csv");
    ok(&[
        "sweep",
        s(&fixture("degradation.json")),
        s(&fixture("degradation.test.src")),
        s(&fixture("degradation.test.ref")),
        "--lambdas",
        "0",
        "--ks",
        "1,2,4,8",
        "--n-max",
        "8",
        "-o",
        s(&csv),
    ]);
    let rows = csv_rows(&csv);
    let ks: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    assert_eq!(ks, [1.0, 2.0, 4.0, 8.0]);
    assert!(rows.windows(2).all(|w| w[1][2] <= w[0][2]));
    assert!(rows[3][2] < rows[0][2]);
}

#[test]
fn verify_exactness_passes_and_reports_counts() {
    let out = ok(&["verify", "--suite", "exactness", "--seed", "7", "--trials", "200"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("score_equal: 3200/3200 ok"), "{stdout}");
    for suite in ["thm1", "thm2", "bleu"] {
        ok(&["verify", "--suite", suite]);
    }
    assert_eq!(uiddec(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn verify_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["verify", "--suite", "thm2", "--trials", "10", "--report", s(&a)]);
    let out = Command::new(env!("CARGO_BIN_EXE_uiddec"))
        .args(["verify", "--suite", "thm2", "--trials", "10", "--report", s(&b)])
        .env("UIDDECODE_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);

    let c = dir.path().join("c.json");
    let out = Command::new(env!("CARGO_BIN_EXE_uiddec"))
        .args(["verify", "--suite", "thm2", "--trials", "10", "--report", s(&c)])
        .env("UIDDECODE_SEED", "8")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn decode_output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}.jsonl"));
        ok(&[
            "--threads",
            threads,
            "decode",
            s(&fixture("degradation.json")),
            s(&fixture("degradation.valid.src")),
            "--objective",
            "variance=2",
            "--k",
            "3",
            "--n-max",
            "8",
            "-o",
            s(&out),
        ]);
        outputs.push((fs::read(&out).unwrap(), fs::read(dir.path().join(format!("t{threads}.jsonl.manifest.json"))).unwrap()));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1, outputs[1].1);
}
