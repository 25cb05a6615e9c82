use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn falsify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_falsify")).args(args).output().unwrap()
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    let scn = scenarios().join("intersection.scn");
    let spec = scenarios().join("phi_eventually.mtl");
    let stub = falsify(&["run", "--scenario", path(&scn), "--spec", path(&spec), "--episodes", "3"]);
    assert_eq!(stub.status.code(), Some(2), "{}", String::from_utf8_lossy(&stub.stderr));
    let gt = falsify(&[
        "run", "--scenario", path(&scn), "--spec", path(&spec), "--episodes", "3", "--flag", "perception=ground-truth",
    ]);
    assert_eq!(gt.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&gt.stdout).contains("3 satisfied"));
    let bad = falsify(&["run", "--scenario", "missing.scn", "--spec", path(&spec)]);
    assert_eq!(bad.status.code(), Some(1));
    let flag = falsify(&["run", "--scenario", path(&scn), "--spec", path(&spec), "--flag", "bogus=1"]);
    assert_eq!(flag.status.code(), Some(1));
}

#[test]
fn run_analyze_replay_export() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.jsonl");
    let spec = scenarios().join("phi_eventually.mtl");
    let scn = scenarios().join("falsif.scn");
    let run = falsify(&[
        "run", "--scenario", path(&scn), "--spec", path(&spec), "--episodes", "60", "--seed", "4", "--parallel", "2",
        "--no-wall-time", "--out", path(&table),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(&table).unwrap().lines().count(), 60);

    let svg = dir.path().join("p.svg");
    let analyze = falsify(&["analyze", "--table", path(&table), "--bin-by", "time", "--svg", path(&svg)]);
    assert!(analyze.status.success());
    assert!(String::from_utf8_lossy(&analyze.stdout).starts_with("lo,hi,count,median,q25,q75"));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));

    let replay = falsify(&[
        "replay", "--table", path(&table), "--spec", path(&spec), "--scenario", path(&scn), "--override", "ground-truth",
    ]);
    assert_eq!(replay.status.code(), Some(0), "{}", String::from_utf8_lossy(&replay.stdout));

    let out = dir.path().join("c.jsonl");
    let export = falsify(&["export-configs", "--scenario", path(&scenarios().join("specialized.scn")), "-n", "20", "--out", path(&out)]);
    assert!(export.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 20);
}

#[test]
fn ce_report() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("ce.jsonl");
    let scn = scenarios().join("falsif_ce.scn");
    let run = falsify(&[
        "run", "--scenario", path(&scn), "--spec", path(&scenarios().join("phi_eventually.mtl")), "--sampler", "ce",
        "--episodes", "100", "--out", path(&table), "--report", path(&dir.path().join("r.csv")),
    ]);
    assert!(run.status.code() == Some(0) || run.status.code() == Some(2));
    let printed = falsify(&["report-distribution", "--scenario", path(&scn), "--table", path(&table)]);
    assert!(printed.status.success());
    // rebuilt from the table, the learned distribution matches the live one
    assert_eq!(
        String::from_utf8_lossy(&printed.stdout),
        std::fs::read_to_string(dir.path().join("r.csv")).unwrap()
    );
}

#[test]
fn tcp_campaign_with_sim_client() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let server = Command::new(env!("CARGO_BIN_EXE_falsify"))
        .args([
            "run",
            "--scenario",
            path(&scenarios().join("intersection.scn")),
            "--spec",
            path(&scenarios().join("phi_eventually.mtl")),
            "--episodes",
            "4",
            "--sim",
            &format!("tcp:{addr}"),
            "--connect-timeout",
            "20",
        ])
        .stdout(std::process::Stdio::null())
        .spawn()
        .unwrap();
    // retry until the server is listening
    let mut client = None;
    for _ in 0..100 {
        let out = falsify(&["sim-client", "--connect", &addr]);
        if out.status.success() {
            client = Some(out);
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(100));
    }
    let client = client.expect("client never connected");
    assert!(String::from_utf8_lossy(&client.stderr).contains("served 4 episodes"));
    let status = server.wait_with_output().unwrap().status;
    assert_eq!(status.code(), Some(2));
}
