use std::path::Path;
use std::process::{Command, Output};

use slut_core::io;

fn slut(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slut"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("SLUT_WORKERS")
        .output()
        .expect("run slut")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn help_and_version_succeed() {
    for flag in ["--help", "--version"] {
        let o = Command::new(env!("CARGO_BIN_EXE_slut")).arg(flag).output().unwrap();
        assert_eq!(code(&o), 0, "{flag}");
    }
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let lut = dir.path().join("missing.lut");
    let lut = lut.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["refine", "--no-such-flag"],
        vec!["refine", "--metric", "bogus"],
        vec!["refine", "--model", "bogus"],
        vec!["refine", "--workers", "0"],
        vec!["refine", "--threshold", "-1"],
        vec!["refine", "--sizes", "3", "--grid", "g.nrrd"],
        vec!["refine", "--split-rule", "sideways"],
        vec!["tessellate", "--grid", "g.nrrd", "--weight-limit", "0.1"],
        vec!["events", "--lut", lut, "--mode", "uniform", "--exact-density"],
        vec!["sample", "--sizes", "3,3"],
        vec![],
    ];
    for args in cases {
        let o = slut(dir.path(), &args);
        assert_eq!(code(&o), 64, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn affine_refine_converges_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let o = slut(dir.path(), &["refine", "--model", "affine:3", "--sizes", "3", "--workers", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lut = io::read_lut(dir.path().join("table.lut")).unwrap();
    assert_eq!(lut.mesh.live_count(), 48);
    assert_eq!(lut.meta.build["status"], "converged");
    assert_eq!(lut.meta.build["iterations"], "1");
    let report = lines(&dir.path().join("report.csv"));
    assert_eq!(report.len(), 2);
    assert_eq!(report[0], io::REPORT_HEADER);
    let manifest = std::fs::read_to_string(dir.path().join("refine-manifest.txt")).unwrap();
    assert!(manifest.contains("oracle_calls=75"), "{manifest}");
    assert!(manifest.contains("wall_seconds="));
}

#[test]
fn unconverged_refine_exits_2_with_partial_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = slut(dir.path(), &["refine", "--sizes", "3", "--max-iter", "0"]);
    assert_eq!(code(&o), 2);
    let lut = io::read_lut(dir.path().join("table.lut")).unwrap();
    assert_eq!(lut.meta.build["status"], "partial:48");
    assert_eq!(lines(&dir.path().join("report.csv")).len(), 1);
}

#[test]
fn vertex_budget_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = slut(dir.path(), &["refine", "--sizes", "5", "--max-vertices", "150", "--workers", "1"]);
    assert_eq!(code(&o), 2);
    let lut = io::read_lut(dir.path().join("table.lut")).unwrap();
    assert!(lut.mesh.vertex_count() >= 150);
}

#[test]
fn zero_events_write_a_header_only_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&slut(dir.path(), &["refine", "--sizes", "3", "--max-iter", "1"])), 2);
    let lut = dir.path().join("table.lut");
    let o = slut(dir.path(), &["events", "--lut", lut.to_str().unwrap(), "--n", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lines(&dir.path().join("events.csv")), vec!["x0,x1,x2,weight,simplex_id".to_string()]);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "# affine table\nmodel = affine:3\nsizes=3\nmax_iter=0\nvtk=true\n").unwrap();
    let c = config.to_str().unwrap();
    let o = slut(dir.path(), &["refine", "--config", c]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("table.vtk").exists());
    let o = slut(dir.path(), &["refine", "--config", c, "--max-iter", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(&config, "bogus_key=1\n").unwrap();
    assert_eq!(code(&slut(dir.path(), &["refine", "--config", c])), 64);
    std::fs::write(&config, "vtk=maybe\n").unwrap();
    assert_eq!(code(&slut(dir.path(), &["refine", "--config", c])), 64);
    let missing = dir.path().join("missing.conf");
    assert_eq!(code(&slut(dir.path(), &["refine", "--config", missing.to_str().unwrap()])), 1);
}

#[test]
fn workers_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str, extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_slut"))
            .args(["refine", "--model", "affine:3", "--sizes", "3"])
            .args(extra)
            .arg("--out-dir")
            .arg(dir.path())
            .env("SLUT_WORKERS", workers)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("0", &[])), 64);
    assert_eq!(code(&run("2", &[])), 0);
    assert_eq!(code(&run("0", &["--workers", "1"])), 0);
}

#[test]
fn sample_tessellate_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&slut(d, &["sample", "--sizes", "5,4,3"])), 0);
    let grid = io::read_nrrd(d.join("grid.nrrd")).unwrap();
    assert_eq!(grid.sizes(), &[5, 4, 3]);
    let g = d.join("grid.nrrd");
    let o = slut(d, &["tessellate", "--grid", g.to_str().unwrap(), "--sizing", "sf1", "--vtk"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mesh = io::read_lut(d.join("mesh.lut")).unwrap();
    assert!(mesh.mesh.live_count() > 4 * 3 * 2 * 6);
    assert!(d.join("mesh.vtk").exists());
    let lut = d.join("mesh.lut");
    let o = slut(d, &["stats", "--lut", lut.to_str().unwrap(), "--probes", "random:500:3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stats = lines(&d.join("stats.csv"));
    assert_eq!(stats[0], "probes,mean_err,rms_err,max_err");
    assert!(stats[1].starts_with("500,"));
    assert_eq!(lines(&d.join("histogram.csv")).len(), 1 + slut_core::refine::HISTOGRAM_BINS + 2);
}

#[test]
fn baseline_and_bench_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&slut(d, &["baseline", "--resolutions", "3;4,4,5"])), 0);
    let rows = lines(&d.join("baseline.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows[3].starts_with("structured,4x4x5,80,"), "{rows:?}");
    let o = slut(d, &["bench", "--sizes", "3", "--max-iter", "2", "--n", "1000", "--model-samples", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&d.join("bench.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("measured,1000.0,"));
    assert!(rows[3].starts_with("extrapolated,10000000000.0,"), "{rows:?}");
}
