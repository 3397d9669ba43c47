use std::io::Write;
use std::process::{Command, Output, Stdio};

fn fixture(name: &str) -> String {
    format!("{}/../core/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evidential")).args(args).output().unwrap()
}

fn run_with_input(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_evidential"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn on(net: &str, args: &[&str]) -> Output {
    let path = fixture(net);
    let mut all = vec!["--net", path.as_str()];
    all.extend_from_slice(args);
    run(&all)
}

#[test]
fn disjunction_query() {
    let o = on("ab.json", &["query", "a='t' .or. b='t'"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "P = 0.850000000000\n");
}

#[test]
fn chain_is_separated_by_its_middle() {
    let o = on("chain.json", &["dsep", "A", "C", "B"]);
    assert_eq!(stdout(&o), "d-separated: true\n");
    let o = on("chain.json", &["dsep", "A", "C", "-"]);
    assert_eq!(stdout(&o), "d-separated: false\n");
}

#[test]
fn most_probable_explanation() {
    let o = on("ab.json", &["mpe"]);
    assert_eq!(stdout(&o), "a=t b=t beta=0.630000000000\n");
    let o = on("ab.json", &["mpe", "--hypothesize", "b=f"]);
    assert_eq!(stdout(&o), "a=f beta=0.150000000000\n");
    let o = on("ab.json", &["mpe", "--given", "b='f'", "--normalized"]);
    assert_eq!(stdout(&o), "a=f beta=0.150000000000\nbeta/P(e) = 0.681818181818 (derived)\n");
}

#[test]
fn repl_transcript() {
    let input = format!("load {}\nmarginal b\n\nbogus\nquit\nmarginal a\n", fixture("ab.json"));
    let o = run_with_input(&[], &input);
    assert_eq!(o.status.code(), Some(0));
    let expected = format!(
        "loaded 2 variables from {}\nP(b=t) = 0.780000000000\nP(b=f) = 0.220000000000\nE_USAGE: unrecognized subcommand 'bogus'\n",
        fixture("ab.json")
    );
    assert_eq!(stdout(&o), expected);
}

#[test]
fn repl_transcripts_replay_identically() {
    let input = format!(
        "load {}\nshow-rules q\nvalidate-rule \"if p='t' then q='t'\"\nmarginal q --given \"p='t'\"\nmpe\nquery \"q='f'\"\n",
        fixture("ds_implication.json")
    );
    let first = run_with_input(&["repl"], &input);
    let second = run_with_input(&["repl"], &input);
    assert_eq!(first.stdout, second.stdout);
    assert!(stdout(&first).contains("P(t) = 0.720000000000"), "{}", stdout(&first));
    assert!(stdout(&first).contains("Bel(q=t)"), "{}", stdout(&first));
}

#[test]
fn repl_ends_at_eof_and_keeps_going_after_errors() {
    let o = run_with_input(&["--net", &fixture("ab.json")], "marginal nope\nmarginal a\n");
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("E_VALIDATE: unknown variable `nope`\n"), "{out}");
    assert!(out.ends_with("P(a=f) = 0.300000000000\n"), "{out}");
}

#[test]
fn exit_codes() {
    assert_eq!(on("ab.json", &["marginal", "a"]).status.code(), Some(0));
    let o = on("ab.json", &["marginal", "zz"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("E_VALIDATE"), "{}", stderr(&o));
    let o = on("ab.json", &["query", "a='t' and"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("E_PARSE"), "{}", stderr(&o));
    let o = on("ab.json", &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("E_USAGE"), "{}", stderr(&o));
    let o = run(&["marginal", "a"]);
    assert_eq!(o.status.code(), Some(2), "no network loaded");
    let o = on("ab.json", &["mpe", "--hypothesize", "b=f", "--explain", "a"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn impossible_condition_is_a_conflict() {
    let o = on("ab.json", &["query", "b='t'", "--given", "a='t' and a='f'"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("E_CONFLICT"), "{}", stderr(&o));
}

#[test]
fn rules_and_beliefs() {
    let o = on("ab.json", &["show-rules", "b"]);
    assert_eq!(
        stdout(&o),
        "NODE b GIVEN a KIND PROBABILISTIC\n\
         IF a='t' THEN b='t' WITH 0.9\n\
         IF a='t' THEN b='f' WITH 0.1\n\
         IF a='f' THEN b='t' WITH 0.5\n\
         IF a='f' THEN b='f' WITH 0.5\n"
    );
    let o = on("ds_implication.json", &["marginal", "q"]);
    assert_eq!(
        stdout(&o),
        "Bel(q=t) = 0.720000000000  Pl(q=t) = 1.00000000000\nBel(q=f) = 0.00000000000  Pl(q=f) = 0.280000000000\n"
    );
}

#[test]
fn estimate_then_save_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est.json");
    let out_s = out.to_str().unwrap();
    let o = run(&[
        "estimate",
        "--data",
        &fixture("ab_records.csv"),
        "--dag",
        &fixture("ab_structure.json"),
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["--net", out_s, "show-rules", "b"]);
    assert!(stdout(&o).contains("IF a='t' THEN b='t' WITH 0.75\n"), "{}", stdout(&o));

    let copy = dir.path().join("copy.json");
    let o = run(&["--net", out_s, "save", copy.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(&out).unwrap());

    let o = run(&[
        "estimate",
        "--data",
        &fixture("ab_records.csv"),
        "--dag",
        &fixture("ab_structure.json"),
        "--smoothing",
        "-1",
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn capacity_can_be_lowered_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_evidential"))
        .args(["--net", &fixture("example_dag.json"), "marginal", "p8"])
        .env("EVIDENTIAL_CAPACITY", "4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("E_CAPACITY"), "{}", stderr(&o));
}
