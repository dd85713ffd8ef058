use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zverify"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("zverify-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn verify_merge_and_determinism() {
    let d = scratch("verify");
    let run = |out: &str, only: &str| {
        let s = bin().args(["verify", "--only", only, "--out"]).arg(d.join(out)).status().unwrap();
        assert_eq!(s.code(), Some(0));
        std::fs::read_to_string(d.join(out)).unwrap()
    };
    let a = run("a.json", "S1");
    let b = run("b.json", "S1");
    assert_eq!(a, b);
    let _ = run("c.json", "tauhatstar");
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    let e = &v["certificates"][0];
    for k in ["id", "value", "error", "margin", "verdict", "config_hash", "notes"] {
        assert!(e.get(k).is_some(), "missing {k}");
    }
    let s = bin().args(["report", "--merge"]).arg(d.join("a.json")).arg(d.join("c.json")).arg("--out").arg(d.join("m.json")).status().unwrap();
    assert_eq!(s.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    let ids: Vec<&str> = m["certificates"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["S1", "tauhatstar"]);
}

#[test]
fn unmet_threshold_fails_the_run() {
    let d = scratch("blocked");
    std::fs::write(d.join("cfg.toml"), "threshold = 1e300\n").unwrap();
    let s = bin().args(["verify", "--only", "tauhatstar"]).arg("--config").arg(d.join("cfg.toml")).arg("--out").arg(d.join("r.json")).status().unwrap();
    assert_eq!(s.code(), Some(1));
    let r = std::fs::read_to_string(d.join("r.json")).unwrap();
    assert!(r.contains("\"fail\""));
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(bin().args(["verify", "--only", "nope"]).status().unwrap().code(), Some(2));
    let d = scratch("badcfg");
    std::fs::write(d.join("cfg.toml"), "unknown_key = 1\n").unwrap();
    assert_eq!(bin().args(["verify", "--config"]).arg(d.join("cfg.toml")).status().unwrap().code(), Some(2));
}

#[test]
fn dump_profiles_writes_files() {
    let d = scratch("dump");
    let s = bin().args(["dump", "profiles", "--dir"]).arg(&d).status().unwrap();
    assert_eq!(s.code(), Some(0));
    for f in ["W.txt", "LambdaW.txt", "phi.txt", "psi.txt"] {
        assert!(d.join(f).exists(), "{f}");
    }
}
