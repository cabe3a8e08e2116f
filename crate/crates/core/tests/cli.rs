//! End-to-end runs of the `uwdg` binary.

use std::path::{Path, PathBuf};
use std::process::Command;
use uwdg::config::RunConfig;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("uwdg-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn uwdg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_uwdg")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn lines(p: &Path) -> Vec<String> {
    std::fs::read_to_string(p).unwrap().lines().map(String::from).collect()
}

#[test]
fn run_writes_all_outputs() {
    let dir = scratch("run");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "problem = \"kdv_manufactured\"\nk = 2\nt_final = 0.01\n\n[grid]\nkind = \"full\"\nn = 3\n\n[output]\nsnapshots = 2\n",
    )
    .unwrap();
    let out = dir.join("out");
    let r = uwdg(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let errors = lines(&out.join("errors.csv"));
    assert_eq!(errors[0], "N_or_eps,DoF,L1,L2,Linf,order");
    assert!(errors[1].starts_with("3,24,"));
    let energy = lines(&out.join("energy.csv"));
    assert_eq!(energy[0], "t,energy");
    assert!(energy.len() > 2);
    assert_eq!(lines(&out.join("dof.csv")).len(), energy.len());
    assert_eq!(lines(&out.join("active_elements.dat")).len(), 8);
    assert!(!lines(&out.join("samples.dat")).is_empty());
    for f in ["samples_000.dat", "active_elements_001.dat"] {
        assert!(out.join("snapshots").join(f).exists(), "{f}");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_config_exits_with_one() {
    let dir = scratch("bad");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "problem = \"kdv_manufactured\"\nk = 2\nt_final = 0.01\nbogus = 1\n\n[grid]\nkind = \"full\"\nn = 3\nwidth = 2\n").unwrap();
    let r = uwdg(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("bogus") && err.contains("width"), "{err}");
    let r = uwdg(&["run", "--config", dir.join("missing.toml").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            RunConfig::from_file(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
