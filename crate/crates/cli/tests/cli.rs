use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pica_core::io;
use pica_core::recovery::{estimate_unmixing, RecoveryOptions};
use pica_core::{sample_cumulant, SourceSpec};

fn pica_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pica"));
    cmd.args(args).env_remove("PICA_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn pica")
}

fn pica(args: &[&str]) -> Output {
    pica_with_env(args, &[])
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn write(&self, name: &str, text: &str) -> String {
        std::fs::write(self.path(name), text).unwrap();
        self.arg(name)
    }

    fn simulate(&self, spec: &str, n: usize, seed: u64, out: &str) -> String {
        let spec = self.write("spec.json", spec);
        let out = self.arg(out);
        let mixing = self.arg("mixing.json");
        let res = pica(&[
            "simulate", "--spec", &spec, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", &out,
            "--mixing-out", &mixing,
        ]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
        out
    }
}

const COUNTEREXAMPLE: &str = r#"{"order": 3, "dim": 4, "entries": [
  {"idx": [1,1,1], "val": 0.4}, {"idx": [1,1,2], "val": -1.3}, {"idx": [1,2,2], "val": 0.4},
  {"idx": [2,2,2], "val": -1.3}, {"idx": [3,3,3], "val": 0.7}, {"idx": [3,3,4], "val": 1.0},
  {"idx": [3,4,4], "val": 0.7}, {"idx": [4,4,4], "val": 1.0}]}"#;

#[test]
fn check_reports_membership() {
    let ws = Workspace::new();
    let tensor = ws.write("t.json", COUNTEREXAMPLE);
    let pattern = ws.write("p.json", r#"{"kind":"partition","order":3,"dim":4,"blocks":[[1,2],[3,4]]}"#);
    let out = pica(&["check", "--tensor", &tensor, "--pattern", &pattern]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("member max_violation=0e0"), "{}", stdout(&out));

    let diagonal = ws.write("d.json", r#"{"kind":"diagonal","order":3,"dim":4}"#);
    let out = pica(&["check", "--tensor", &tensor, "--pattern", &diagonal, "--tol", "1e-10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).starts_with("non-member"));

    let wrong_dim = ws.write("w.json", r#"{"kind":"diagonal","order":3,"dim":3}"#);
    assert_eq!(pica(&["check", "--tensor", &tensor, "--pattern", &wrong_dim]).status.code(), Some(2));
    assert_eq!(pica(&["check", "--tensor", &tensor, "--pattern", &diagonal, "--tol", "-1"]).status.code(), Some(1));
}

#[test]
fn simulate_writes_data_and_provenance() {
    let ws = Workspace::new();
    let data = ws.simulate(r#"{"kind":"graph","d":4,"edges":[[1,2],[1,3],[1,4]]}"#, 500, 9, "star.csv");
    let x = io::read_csv_file(Path::new(&data)).unwrap();
    assert_eq!((x.n(), x.d()), (500, 4));
    let provenance: SourceSpec = io::read_json(&ws.path("star.spec.json")).unwrap();
    assert_eq!(provenance.seed, Some(9));

    // Without mixing the CSV is exactly the generator output.
    let spec = ws.arg("spec.json");
    let plain = ws.arg("plain.csv");
    let res = pica(&["simulate", "--spec", &spec, "--n", "500", "--seed", "9", "--out", &plain]);
    assert_eq!(res.status.code(), Some(0));
    let mut expected = Vec::new();
    io::write_csv(&mut expected, &provenance.generate(500, 9).unwrap()).unwrap();
    assert_eq!(std::fs::read(&plain).unwrap(), expected);

    let bad = ws.write("bad_spec.json", r#"{"kind":"graph","d":4}"#);
    assert_eq!(pica(&["simulate", "--spec", &bad, "--n", "5", "--seed", "1", "--out", &plain]).status.code(), Some(2));
}

#[test]
fn cumulants_match_the_library() {
    let ws = Workspace::new();
    let data = ws.simulate(r#"{"kind":"independent","d":3,"dist":"laplace_like"}"#, 3000, 4, "x.csv");
    let out = ws.arg("k.json");
    assert_eq!(pica(&["cumulants", "--in", &data, "--order", "4", "--out", &out]).status.code(), Some(0));
    let x = io::read_csv_file(Path::new(&data)).unwrap();
    let expected = io::tensor_to_json(&sample_cumulant(&x, 4).unwrap()).unwrap() + "\n";
    assert_eq!(std::fs::read_to_string(&out).unwrap(), expected);
    assert_eq!(pica(&["cumulants", "--in", &data, "--order", "9", "--out", &out]).status.code(), Some(1));
}

#[test]
fn recover_matches_the_library_and_verifies() {
    let ws = Workspace::new();
    let data = ws.simulate(r#"{"kind":"partitioned","d":4,"blocks":[[1,2],[3,4]]}"#, 100_000, 5, "y.csv");
    let pattern = ws.write("p.json", r#"{"kind":"partition","order":4,"dim":4,"blocks":[[1,2],[3,4]]}"#);
    let report = ws.arg("report.json");
    let mixing = ws.arg("mixing.json");
    let res = pica(&[
        "recover", "--in", &data, "--pattern", &pattern, "--order", "4", "--restarts", "4", "--seed", "11", "--out",
        &report, "--truth", &mixing,
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(stdout(&res).contains("residual="));

    let x = io::read_csv_file(Path::new(&data)).unwrap();
    let p = io::pattern_from_json(&std::fs::read_to_string(&pattern).unwrap()).unwrap();
    let opts = RecoveryOptions {
        restarts: 4,
        seed: 11,
        ..Default::default()
    };
    let mut expected = estimate_unmixing(&x, &p, &opts).unwrap();
    let a_true = io::read_json(Path::new(&mixing)).unwrap();
    expected.attach_truth(&a_true, &pica_core::BlockStructure::new(vec![2, 2]).unwrap(), 0.1).unwrap();
    let expected = serde_json::to_string_pretty(&expected).unwrap() + "\n";
    assert_eq!(std::fs::read_to_string(&report).unwrap(), expected);

    let res = pica(&["verify", "--report", &report, "--truth", &mixing, "--blocks", "2,2"]);
    assert_eq!(res.status.code(), Some(0), "{}", stdout(&res));
    assert!(stdout(&res).contains("identified"));
    let res = pica(&["verify", "--report", &report, "--truth", &mixing, "--blocks", "2,x"]);
    assert_eq!(res.status.code(), Some(1));
    let res = pica(&["verify", "--report", &report, "--truth", &mixing, "--blocks", "1,3"]);
    assert_eq!(res.status.code(), Some(3), "{}", stdout(&res));
}

#[test]
fn recover_needs_blocks_for_unstructured_truth() {
    let ws = Workspace::new();
    let data = ws.simulate(r#"{"kind":"independent","d":2}"#, 2000, 1, "y.csv");
    let pattern = ws.write("p.json", r#"{"kind":"mean_independence","order":4,"dim":2}"#);
    let mixing = ws.arg("mixing.json");
    let report = ws.arg("r.json");
    let args = ["recover", "--in", &data, "--pattern", &pattern, "--seed", "1", "--out", &report, "--truth", &mixing];
    assert_eq!(pica(&args).status.code(), Some(1));
    let mut with_blocks = args.to_vec();
    with_blocks.extend(["--blocks", "1,1"]);
    assert_eq!(pica(&with_blocks).status.code(), Some(0));
}

#[test]
fn thread_cap_is_honoured() {
    let ws = Workspace::new();
    let spec = ws.write("spec.json", r#"{"kind":"independent","d":3}"#);
    let (a, b) = (ws.arg("a.csv"), ws.arg("b.csv"));
    let args = |out: &str| vec!["simulate".to_string(), "--spec".into(), spec.clone(), "--n".into(), "20000".into(), "--seed".into(), "2".into(), "--out".into(), out.to_string()];
    let run = |out: &str, threads: &str| {
        let argv = args(out);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        pica_with_env(&argv, &[("PICA_THREADS", threads)]).status.code()
    };
    assert_eq!(run(&a, "1"), Some(0));
    assert_eq!(run(&b, "3"), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(run(&a, "0"), Some(1));
    assert_eq!(run(&a, "many"), Some(1));
}

#[test]
fn probe_writes_a_report() {
    let ws = Workspace::new();
    let graph = ws.write("g.json", r#"{"dim":4,"edges":[[1,2],[2,3],[3,4]]}"#);
    let out = ws.arg("probe.json");
    let res = pica(&["probe", "--graph", &graph, "--order", "3", "--trials", "5", "--seed", "2", "--out", &out]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(stdout(&res).trim(), "candidates=384 preserving=32 disagreements=0");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["candidates"].as_array().unwrap().len(), 384);
    assert_eq!(report["candidates"][0]["verdicts"].as_array().unwrap().len(), 5);
    assert_eq!(pica(&["probe", "--graph", &graph, "--order", "7", "--trials", "5", "--seed", "2"]).status.code(), Some(1));
}

#[test]
fn help_and_unknown_commands() {
    assert_eq!(pica(&["--help"]).status.code(), Some(0));
    assert_eq!(pica(&["recover", "--help"]).status.code(), Some(0));
    assert_eq!(pica(&["transmogrify"]).status.code(), Some(1));
}
