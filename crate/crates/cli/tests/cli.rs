use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tokrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokrec"))
        .args(args)
        .output()
        .expect("tokrec runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CORPUS: &str = "@a\nthe cat sat on the mat . the cat sat on the mat . the dog sat on the log .\n\n\
                      @b\nthe dog ran to the cat and the cat ran to the dog .\n";

#[test]
fn decode_methods_emit_identical_text() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    let model = dir.path().join("m.trng");
    fs::write(&corpus, CORPUS).unwrap();
    let o = tokrec(&["train-ngram", "--corpus", s(&corpus), "--out", s(&model), "--order", "2"]);
    assert!(o.status.success(), "{o:?}");

    let text = |method: &str| {
        let o = tokrec(&[
            "decode", "--model", s(&model), "--prompt", "the cat", "--method", method,
            "--temperature", "0", "--max-new-tokens", "40",
        ]);
        assert!(o.status.success(), "{o:?}");
        let out = stdout(&o);
        let mut lines = out.lines();
        let text = lines.next().unwrap().to_string();
        assert!(lines.next().unwrap().contains("steps="));
        text
    };
    let ar = text("ar");
    assert_eq!(text("tr"), ar);
    assert_eq!(text("pld"), ar);
}

#[test]
fn bench_is_deterministic_apart_from_timing() {
    let run = || {
        let o = tokrec(&[
            "bench", "--methods", "ar,tr", "--seed", "7", "--max-new-tokens", "40",
            "--categories", "repetitive",
        ]);
        assert!(o.status.success(), "{o:?}");
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        strip(&mut v);
        v
    };
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(m) => {
                m.remove("timing");
                m.values_mut().for_each(strip);
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a["outputs_identical"], true);

    let no_timing = || {
        stdout(&tokrec(&[
            "bench", "--methods", "ar,tr,pld", "--seed", "7", "--max-new-tokens", "30",
            "--categories", "fresh-text", "--no-timing", "--format", "csv",
        ]))
    };
    let csv = no_timing();
    assert!(csv.starts_with("method,case,"));
    assert_eq!(csv, no_timing());
}

#[test]
fn matrix_export_copies_bytes_and_round_trips_json() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.trmx");
    let o = tokrec(&[
        "decode", "--prompt", "The team approved the", "--max-new-tokens", "30",
        "--save-matrix", s(&run),
    ]);
    assert!(o.status.success(), "{o:?}");

    let copy = dir.path().join("copy.trmx");
    assert!(tokrec(&["matrix", "export", "--in", s(&run), "--out", s(&copy)]).status.success());
    assert_eq!(fs::read(&run).unwrap(), fs::read(&copy).unwrap());

    let json = dir.path().join("m.json");
    let back = dir.path().join("back.trmx");
    assert!(tokrec(&["matrix", "export", "--in", s(&run), "--out", s(&json), "--format", "json"])
        .status
        .success());
    assert!(tokrec(&["matrix", "import", "--in", s(&json), "--out", s(&back)]).status.success());
    assert_eq!(fs::read(&run).unwrap(), fs::read(&back).unwrap());

    let o = tokrec(&["matrix", "inspect", "--in", s(&run), "team"]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert!(out.starts_with("row "));
    assert_eq!(out.lines().count(), 1 + 8);

    // A hot start from the saved matrix decodes the same text.
    let hot = format!("hot:{}", s(&run));
    let a = tokrec(&["decode", "--prompt", "The team approved the", "--max-new-tokens", "30"]);
    let b = tokrec(&[
        "decode", "--prompt", "The team approved the", "--max-new-tokens", "30", "--init", &hot,
    ]);
    assert_eq!(stdout(&a).lines().next(), stdout(&b).lines().next());
}

#[test]
fn refuses_to_overwrite_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.trmx");
    tokrec(&["decode", "--prompt", "the", "--max-new-tokens", "5", "--save-matrix", s(&run)]);
    let before = fs::read(&run).unwrap();
    let o = tokrec(&["matrix", "export", "--in", s(&run), "--out", s(&run)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read(&run).unwrap(), before);
}

#[test]
fn exit_codes() {
    assert_eq!(tokrec(&["decode", "--nope"]).status.code(), Some(2));
    assert_eq!(tokrec(&["decode", "--prompt", "a", "--k", "0"]).status.code(), Some(2));
    assert_eq!(tokrec(&["decode", "--prompt", "a", "--init", "warm"]).status.code(), Some(2));
    assert_eq!(
        tokrec(&["decode", "--prompt", "a", "--update-scope", "some"]).status.code(),
        Some(2)
    );
    let missing = tokrec(&["decode", "--prompt", "a", "--model", "/no/such/model"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("loading model"));

    // A matrix whose shape does not match the model.
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("small.trmx");
    let corpus = dir.path().join("c.txt");
    let model = dir.path().join("m.trng");
    fs::write(&corpus, CORPUS).unwrap();
    tokrec(&["train-ngram", "--corpus", s(&corpus), "--out", s(&model)]);
    tokrec(&[
        "decode", "--model", s(&model), "--prompt", "the", "--max-new-tokens", "3",
        "--save-matrix", s(&run),
    ]);
    let hot = format!("hot:{}", s(&run));
    let o = tokrec(&["decode", "--prompt", "the", "--init", &hot]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("matrix"));
}

#[test]
fn help_lists_every_decode_flag_with_defaults() {
    let help = stdout(&tokrec(&["bench", "--help"]));
    for flag in [
        "--k", "--tree", "--temperature", "--seed", "--init", "--update ", "--update-scope",
        "--max-new-tokens", "--out", "--format",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
    assert!(help.contains("[default: 8]"));
    assert!(help.contains("[default: 0]"));
    assert!(help.contains("zero, random[:SEED] or hot:PATH"));
    assert!(help.contains("[possible values: accepted, all]"));
}

#[test]
fn sweep_and_calibrate_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = tokrec(&[
        "sweep", "--nodes", "10,20", "--depths", "3", "--max-new-tokens", "20", "--format", "csv",
        "--out", s(&out), "--categories", "repetitive",
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 3);

    let tree = dir.path().join("tree.txt");
    let o = tokrec(&[
        "calibrate-tree", "--branch", "2", "--depth", "3", "--target-nodes", "8",
        "--prune-step", "3", "--max-new-tokens", "20", "--categories", "warmup",
        "--out", s(&tree),
    ]);
    assert!(o.status.success(), "{o:?}");
    let o = tokrec(&[
        "decode", "--prompt", "The", "--tree", s(&tree), "--max-new-tokens", "10",
    ]);
    assert!(o.status.success(), "{o:?}");
}
