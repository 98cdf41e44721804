use std::process::{Command, Output};

use serde_json::Value;
use tuplespan::monodromy::SolutionFile;
use tuplespan::tensor::{CTensor, Format};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tuplespan"))
        .args(args)
        .env_remove("TUPLESPAN_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn ed_degree_command() {
    let o = run(&["ed-degree", "2,3,5"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("18, non-sub-boundary, concise\nn_B = 4, D = 6\n"));
    let o = run(&["ed-degree", "2,2,3"]);
    assert!(stdout(&o).starts_with("8, boundary\n"));
    let o = run(&["ed-degree", "2,1,3"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 2"));
}

#[test]
fn solve_command() {
    let v = json(&run(&["solve", "-f", "2,2,4", "-s", "7"]));
    assert_eq!(v["tuples"].as_array().unwrap().len(), 8);
    assert_eq!(v["complete"], Value::Bool(true));
    let file: SolutionFile = serde_json::from_value(v).unwrap();
    let set = file.clone().into_solution_set().unwrap();
    assert_eq!(SolutionFile::from(&set), file);

    let v = json(&run(&["solve", "-f", "3,4", "-s", "1", "--assert-expected"]));
    assert_eq!(v["tuples"].as_array().unwrap().len(), 3);
}

#[test]
fn solve_from_tensor_file() {
    let dir = std::env::temp_dir().join(format!("tuplespan-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let t = CTensor::random(&Format::new(vec![2, 2, 3]).unwrap(), 4);
    let path = dir.join("t.json");
    std::fs::write(&path, t.to_json()).unwrap();
    let out = dir.join("sol.json");
    let o = run(&["solve", "--tensor", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let file: SolutionFile = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(file.tuples.len(), 8);

    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"format\": [2, 2],\n \"re\": [1, 2, 3, 4,]}").unwrap();
    let o = run(&["solve", "--tensor", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = run(&["solve", "--tensor", path.to_str().unwrap(), "-f", "2,2,4"]);
    assert!(!o.status.success());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn span_command() {
    let v = json(&run(&["span", "-f", "2,2,4", "--assert-expected"]));
    assert_eq!(v["span_dim_projective"], 6);
    assert_eq!(v["critical_dim_projective"], 7);
    assert_eq!(v["extra_relations"], 1);
    assert!(v["membership_residual"].as_f64().unwrap() < 1e-8);

    let v = json(&run(&["span", "-f", "2,2,3"]));
    assert_eq!(v["span_dim_projective"], 6);
    assert_eq!(v["critical_dim_projective"], 6);
}

#[test]
fn relations_command() {
    let v = json(&run(&["relations", "-f", "2,2,4", "--assert-expected"]));
    assert_eq!(v["validated"], 6);
    assert_eq!(v["extra_rank"], 1);
    assert_eq!(v["confirmed"], 6);
    assert_eq!(v["relations"].as_array().unwrap().len(), 6);
}

#[test]
fn table_command() {
    let o = run(&["table", "-p", "2,2", "-n", "3..5", "--assert-expected"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["(2,2,n)", "3", "6", "6", "6", "0", "8"]);
}

#[test]
fn rejects_missing_input() {
    let o = run(&["span"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--format"));
}
