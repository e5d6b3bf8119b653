use std::path::PathBuf;
use std::process::{Command, Output};

fn costa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_costa-sos")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("costa-sos-cli-{}-{name}", std::process::id()))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn prove_then_verify_then_tamper() {
    let cert = scratch("c2.json");
    let cert_arg = cert.to_str().unwrap();
    let o = costa(&["prove", "C2", "--m", "3", "--n", "1", "--log-concave", "--out", cert_arg]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = costa(&["verify", cert_arg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: pass"));

    let text = std::fs::read_to_string(&cert).unwrap();
    let tampered = scratch("c2-bad.json");
    std::fs::write(&tampered, text.replacen("\"1/2\"", "\"1/3\"", 1)).unwrap();
    let o = costa(&["verify", tampered.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["verdict"], "fail");
    let _ = std::fs::remove_file(cert);
    let _ = std::fs::remove_file(tampered);
}

#[test]
fn invalid_requests_exit_with_two() {
    assert_eq!(costa(&["prove", "C2", "--m", "5", "--n", "1"]).status.code(), Some(2));
    assert_eq!(costa(&["prove", "C3", "--m", "3", "--n", "generic"]).status.code(), Some(2));
}

#[test]
fn validate_and_constraints_listings() {
    let o = costa(&["validate", "--target", "e1", "--m", "2", "--n", "1", "--t", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("reference value 0.125000000"));
    let o = costa(&["constraints", "--m", "3", "--n", "1", "--log-concave"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).is_empty());
}
