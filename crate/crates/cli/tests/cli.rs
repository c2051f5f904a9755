use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use perron_cli::validate::{run_suite, SuiteOptions};

fn perron(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perron"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const GREEN: &str = "[subequation]\nkind=laplace\nn=2\n\n[domain]\nh=0.03125\n\n[singularity]\npoints=0,0\n\n[output]\noracle=radial\n";

#[test]
fn riesz_char_prints_the_characteristic() {
    for (args, expected) in [
        (vec!["--kind", "sigmak", "--n", "4", "--k", "2"], "p=2.000000000"),
        (vec!["--kind", "tracepower", "--n", "9", "--q", "3"], "p=3.000000000"),
        (vec!["--kind", "minmax", "--n", "2", "--p", "1.5"], "p=1.500000000"),
        (vec!["--spec", "kind=pucci n=2 lambda=1 cap_lambda=2"], "p=1.500000000"),
        (vec!["--kind", "largesteig", "--n", "3"], "p=inf"),
    ] {
        let mut full = vec!["riesz-char"];
        full.extend(args.iter().copied());
        let o = perron(&full);
        assert!(o.status.success(), "{full:?}: {}", String::from_utf8_lossy(&o.stderr));
        let out = stdout(&o);
        assert!(out.lines().any(|l| l == expected), "{full:?}:\n{out}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(perron(&["riesz-char", "--kind", "nonsense"]).status.code(), Some(2));
    assert_eq!(perron(&["riesz-char", "--kind", "minmax", "--n", "2", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(perron(&["green"]).status.code(), Some(2));
    assert_eq!(perron(&["--config", "/nonexistent/perron.conf", "green"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.conf", "[domain]\nhh=0.1\n");
    assert_eq!(perron(&["--config", bad.to_str().unwrap(), "green"]).status.code(), Some(2));
    let dup = write_config(dir.path(), "dup.conf", "[domain]\nh=0.1\nh=0.2\n");
    assert_eq!(perron(&["--config", dup.to_str().unwrap(), "green"]).status.code(), Some(2));
    assert_eq!(perron(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn dual_check_reports_involution() {
    let o = perron(&["dual-check", "--kind", "minmax", "--n", "2", "--p", "2", "--samples", "500", "--diag=-1,1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for line in ["involution=pass", "zero_in_dual=true", "minus_identity_in_dual=false", "member=true", "dual_member=true"] {
        assert!(out.lines().any(|l| l == line), "missing {line}:\n{out}");
    }
}

#[test]
fn green_writes_pgm_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "green.conf", GREEN);
    let plain = dir.path().join("plain");
    let o = perron(&["--config", cfg.to_str().unwrap(), "--out", plain.to_str().unwrap(), "green"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(plain.join("green.csv").exists());
    assert!(!plain.join("green.pgm").exists());

    let img = dir.path().join("img");
    let o = perron(&["--config", cfg.to_str().unwrap(), "--out", img.to_str().unwrap(), "--emit-pgm", "green"]);
    assert!(o.status.success());
    let pgm = std::fs::read_to_string(img.join("green.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n"));
    let summary = std::fs::read_to_string(img.join("green_summary.txt")).unwrap();
    assert!(summary.contains("pgm_min=") && summary.contains("pgm_max="));
}

#[test]
fn green_summary_echoes_config_and_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "green.conf", GREEN);
    let out = dir.path().join("out");
    let o = perron(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "green"]);
    assert!(o.status.success());
    let summary = std::fs::read_to_string(out.join("green_summary.txt")).unwrap();
    assert_eq!(summary, stdout(&o));
    for line in [
        "config.subequation.kind=laplace",
        "config.domain.h=0.03125",
        "config.domain.shape=disk",
        "config.solver.method=newton",
        "config.singularity.theta=1",
        "status=pass",
    ] {
        assert!(summary.lines().any(|l| l == line), "missing {line}:\n{summary}");
    }
    let theta: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("density_theta_hat="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((theta - 1.0).abs() <= 0.05, "{theta}");
    let csv = std::fs::read_to_string(out.join("green.csv")).unwrap();
    assert!(csv.starts_with("# nx="));
    assert!(csv.lines().nth(1) == Some("x,y,value"));
}

#[test]
fn value_cone_examples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "value.conf",
        "[subequation]\nkind=minmax\np=1.5\n\n[domain]\nh=0.03125\n\n[singularity]\npoints=0,0\n\n[value]\nv=0.1;-0.5\nsamples=5\n",
    );
    let out = dir.path().join("out");
    let o = perron(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "value-cone", "--solve=-1"]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let g: f64 = text.lines().find_map(|l| l.strip_prefix("generator_1=")).unwrap().parse().unwrap();
    assert!((g + 1.0).abs() <= 1e-9, "{g}");
    assert!(text.contains("listed_0 v=(1.0000000000000001e-1) member=false"), "{text}");
    assert!(text.contains("member=true"));
    assert!(text.lines().all(|l| !l.starts_with("sampled_") || l.ends_with("member=true")));
    let err: f64 = text.lines().find_map(|l| l.strip_prefix("solve_0_value_error=")).unwrap().parse().unwrap();
    assert!(err <= 0.03);
    for f in ["generators.csv", "value_cone.csv", "value_field_0.csv", "value_cone_summary.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "green.conf", &GREEN.replace("[output]", "[solver]\nmethod=jacobi\n\n[output]"));
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let o = perron(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads, "green"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("green.csv")).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn sign_flipped_gauge_fails_a_named_invariant() {
    let checks = run_suite(SuiteOptions { seed: 0, flip_gauge: true }, None).unwrap();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    assert!(failed.contains(&"gauge_monotone"), "{failed:?}");
    let line = checks.iter().find(|c| c.name == "gauge_monotone").unwrap().line();
    assert!(line.starts_with("invariant=gauge_monotone result=fail"));
}
