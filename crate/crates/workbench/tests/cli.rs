mod common;

use std::process::Command;

fn lexcom() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lexcom"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    std::fs::write(&manifest, common::TINY).unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\noutput_dir = \"o\"\n").unwrap();

    assert_eq!(code(lexcom().args(["train"])), 2);
    assert_eq!(code(lexcom().arg("train").arg("--manifest").arg(&bad)), 2);
    assert_eq!(code(lexcom().arg("train").arg("--manifest").arg(&manifest).args(["--seed", "9"])), 2);
    assert_eq!(
        code(lexcom().arg("ingest").arg("--input").arg(dir.path().join("absent.csv")).arg("--out").arg(dir.path())),
        3
    );
    // Training before data generation has nothing to read.
    assert_eq!(
        code(lexcom().arg("train").arg("--manifest").arg(&manifest).arg("--out").arg(dir.path().join("fresh"))),
        3
    );
}

#[test]
fn staged_commands_match_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    std::fs::write(&manifest, common::TINY).unwrap();
    let (staged, full) = (dir.path().join("staged"), dir.path().join("full"));
    for stage in ["gen-data", "train", "eval", "metrics", "report", "plot"] {
        let out = lexcom().arg(stage).arg("--manifest").arg(&manifest).arg("--out").arg(&staged).output().unwrap();
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = lexcom().arg("run").arg("--manifest").arg(&manifest).arg("--out").arg(&full).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("SL+RL+"));
    for f in common::files(&full) {
        assert_eq!(std::fs::read(full.join(&f)).unwrap(), std::fs::read(staged.join(&f)).unwrap(), "{f}");
    }
}
