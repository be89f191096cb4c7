use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Dir(PathBuf);

impl Dir {
    fn new(tag: &str) -> Self {
        let p = std::env::temp_dir().join(format!("quanta-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        Dir(p)
    }

    fn path(&self, name: &str) -> String {
        self.0.join(name).to_string_lossy().into_owned()
    }

    /// Runs `quanta generate ...` and stores stdout under `name`.
    fn generate(&self, name: &str, args: &[&str]) -> String {
        let out = quanta(&[&["generate"], args].concat());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let p = self.path(name);
        std::fs::write(&p, &out.stdout).unwrap();
        p
    }
}

impl Drop for Dir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn quanta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quanta")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn error(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn art_analysis_end_to_end() {
    let d = Dir::new("art");
    let art = d.generate("art.json", &["art", "--k", "2"]);
    let rg = d.generate("rg.json", &["request-grant", "--p", "1/2"]);
    let out = quanta(&["validate", &art]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["valid"], true);

    let out = quanta(&["analyze", "--nwa", &art, "--chain", &rg]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["expected"], "2/1");
    assert_eq!(r["exact"], true);

    let out = quanta(&["analyze", "--nwa", &art, "--chain", &rg, "--question", "distribution", "--lambda", "1"]);
    assert_eq!(json(&out)["cdf"][0]["cdf"], "0/1");

    let out = quanta(&["simulate", "--nwa", &art, "--chain", &rg, "--horizon", "500", "--samples", "50", "--seed", "3"]);
    let again = quanta(&["simulate", "--nwa", &art, "--chain", &rg, "--horizon", "500", "--samples", "50", "--seed", "3"]);
    assert_eq!(out.stdout, again.stdout);
    let mean: f64 = json(&out)["mean"].as_str().unwrap().parse().unwrap();
    assert!((mean - 2.0).abs() < 0.2);
}

#[test]
fn seed_comes_from_the_environment() {
    let d = Dir::new("seed");
    let art = d.generate("art.json", &["art"]);
    let rg = d.generate("rg.json", &["request-grant"]);
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_quanta"))
            .args(["simulate", "--nwa", &art, "--chain", &rg, "--horizon", "200", "--samples", "20"])
            .env("QUANTA_SEED", seed)
            .output()
            .unwrap()
    };
    assert_eq!(json(&run("9"))["seed"], 9);
    assert_eq!(run("9").stdout, run("9").stdout);
}

#[test]
fn almost_sure_violation_exits_with_one() {
    let d = Dir::new("as");
    let art = d.generate("art.json", &["art"]);
    let u = d.generate("u.json", &["uniform", "--alphabet", "r,g,#"]);
    let out = quanta(&["analyze", "--nwa", &art, "--chain", &u, "--question", "almost-sure"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["almostSureAccepting"], false);
    let out = quanta(&["analyze", "--nwa", &art, "--chain", &u]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error(&out)["error"], "NotAlmostSureAccepting");
}

#[test]
fn translations_are_equivalent_from_the_command_line() {
    let d = Dir::new("tr");
    let bd = d.generate("bd.json", &["blocks-diff"]);
    let out = quanta(&["translate", "mca-to-nwa", &bd]);
    assert_eq!(out.status.code(), Some(0));
    let nwa = d.path("bd-nwa.json");
    std::fs::write(&nwa, &out.stdout).unwrap();
    let out = quanta(&["equivalence", "--left", &bd, "--right", &nwa, "--max-len", "8"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"], "equivalent");

    let art = d.generate("art.json", &["art", "--k", "3"]);
    let out = quanta(&["translate", "nwa-to-mca", "--width", "2", &art]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let out = quanta(&["translate", "nwa-to-mca", "--width", "3", &art]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn bad_input_exits_with_three() {
    let d = Dir::new("bad");
    let p = d.path("bad.json");
    std::fs::write(&p, r#"{"states": 3}"#).unwrap();
    let out = quanta(&["validate", &p]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error(&out)["error"], "SchemaError");

    let missing = Path::new(&d.path("missing.json")).to_string_lossy().into_owned();
    assert_eq!(quanta(&["validate", &missing]).status.code(), Some(3));
    assert_eq!(quanta(&["analyze", "--chain", &p]).status.code(), Some(3));
    assert_eq!(quanta(&["no-such-command"]).status.code(), Some(3));
    assert_eq!(quanta(&["--help"]).status.code(), Some(0));
}
