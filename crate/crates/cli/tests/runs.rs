use std::fs;
use std::path::Path;
use std::process::Command as Proc;

use randqc::io::{read_map, Manifest};
use randqc_cli::{run, Command, ExperimentConfig, FieldSpec, ModelSpec};

fn config(command: Command, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default_for(command);
    c.output = out.to_path_buf();
    c
}

fn table(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

#[test]
fn config_round_trips() {
    for cmd in [Command::Solve, Command::Percolation, Command::Modulus, Command::Linearity, Command::SurfaceOrder] {
        let mut c = ExperimentConfig::default_for(cmd);
        c.threads = Some(2);
        c.solve.field = FieldSpec::Radial { k: 0.25, radius: 3.0 };
        c.model = ModelSpec::Uniform { fraction: 0.5 };
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }
    let mut c = ExperimentConfig::default_for(Command::Solve);
    c.model = ModelSpec::Custom(randqc::SurfaceModel::default().to_file());
    assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    assert!(ExperimentConfig::from_toml("command = \"solve\"").is_err());
}

#[test]
fn zero_field_dumps_identity() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Command::Solve, dir.path());
    c.grid.n = 64;
    c.solve.field = FieldSpec::Zero;
    run(&c).unwrap();
    let map = read_map(&dir.path().join("map")).unwrap();
    let m = map.nodes_per_side();
    for k in 0..m * m {
        assert!((map.values()[k] - map.node(k / m, k % m)).norm() < 1e-12);
    }
    assert_eq!(header(&dir.path().join("convergence.csv")), ["iteration", "residual"]);
    let man = Manifest::read(&dir.path().join("manifest.toml")).unwrap();
    assert_eq!(man.command, "solve");
    assert!(man.outputs.iter().any(|o| o == "map.bin"));
}

#[test]
fn radial_run_reports_oracle_error_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut c = config(Command::Solve, a.path());
    c.grid.n = 256;
    c.solve.field = FieldSpec::Radial { k: 1.0 / 3.0, radius: 4.0 };
    run(&c).unwrap();
    c.output = b.path().to_path_buf();
    run(&c).unwrap();
    let rows = table(&a.path().join("summary.csv"));
    let rel: f64 = rows.iter().find(|r| r[0] == "oracle_relative_error").unwrap()[1].parse().unwrap();
    assert!(rel < 5e-2, "{rel}");
    for f in ["summary.csv", "convergence.csv", "map.bin", "field.bin"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn percolation_without_yellow_gives_unit_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Command::Percolation, dir.path());
    c.percolation.r = vec![0.0, 0.3];
    c.percolation.n = 24.0;
    c.percolation.pairs = 30;
    c.percolation.colorings = 3;
    run(&c).unwrap();
    let rows = table(&dir.path().join("ratios.csv"));
    assert_eq!(rows.len(), 2 * 3 * 30);
    for r in &rows {
        let d: f64 = r[4].parse().unwrap();
        assert!(d >= 24f64.ln());
        if r[1] == "0" {
            assert_eq!(r[6].parse::<f64>().unwrap(), 1.0);
        }
    }
    let s = table(&dir.path().join("summary.csv"));
    let min0: f64 = s[0][1].parse().unwrap();
    let min1: f64 = s[1][1].parse().unwrap();
    assert!(min1 <= min0);
    assert!(header(&dir.path().join("ratios.csv")).iter().any(|h| h == "d_chem [len]"));
}

#[test]
fn small_modulus_linearity_and_order_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Command::Modulus, &dir.path().join("m"));
    c.modulus.seeds = 1;
    c.modulus.rectangles = 2;
    c.plot = true;
    run(&c).unwrap();
    assert_eq!(table(&dir.path().join("m/rough_qc.csv")).len(), 4);
    assert!(dir.path().join("m/chain.svg").exists());

    let mut c = config(Command::Linearity, &dir.path().join("l"));
    c.linearity.ladder = vec![2.0, 4.0];
    c.linearity.samples = 500;
    c.model = ModelSpec::Base;
    run(&c).unwrap();
    for r in table(&dir.path().join("l/deviation.csv")) {
        assert!(r[5].parse::<f64>().unwrap() < 1e-9);
    }

    let mut c = config(Command::SurfaceOrder, &dir.path().join("o"));
    c.grid = randqc::GridSpec::new(16.0, 128).unwrap();
    c.order.t_max = 8.0;
    c.order.window = (2.0, 8.0);
    c.order.samples = 1;
    c.plot = true;
    run(&c).unwrap();
    let fits = table(&dir.path().join("o/fits.csv"));
    assert_eq!(fits.len(), 2);
    let base: f64 = fits[0][2].parse().unwrap();
    assert!((base - 2.0).abs() < 0.2, "{base}");
    let man = Manifest::read(&dir.path().join("o/manifest.toml")).unwrap();
    assert_eq!(man.seeds.len(), 3);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_randqc");
    let dir = tempfile::tempdir().unwrap();
    let out = Proc::new(exe).args(["init", "solve"]).output().unwrap();
    assert!(out.status.success());
    let mut c = ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    c.grid.n = 32;
    c.solve.field = FieldSpec::Zero;
    c.output = dir.path().join("ok");
    let cfg = dir.path().join("solve.toml");
    fs::write(&cfg, c.to_toml().unwrap()).unwrap();
    let st = Proc::new(exe).args(["solve", "--config"]).arg(&cfg).arg("--plot").output().unwrap().status;
    assert_eq!(st.code(), Some(0));
    assert!(dir.path().join("ok/convergence.svg").exists());

    // truncation radius beyond half the grid: precondition failure
    c.solve.truncation = Some(6.0);
    fs::write(&cfg, c.to_toml().unwrap()).unwrap();
    assert_eq!(Proc::new(exe).args(["solve", "--config"]).arg(&cfg).output().unwrap().status.code(), Some(2));
    // config for another subcommand
    assert_eq!(Proc::new(exe).args(["modulus", "--config"]).arg(&cfg).output().unwrap().status.code(), Some(2));

    // iteration budget too small: numerical failure
    c.solve.truncation = None;
    c.solve.field = FieldSpec::Radial { k: 0.9, radius: 2.0 };
    c.solve.max_iter = 2;
    fs::write(&cfg, c.to_toml().unwrap()).unwrap();
    assert_eq!(Proc::new(exe).args(["solve", "--config"]).arg(&cfg).output().unwrap().status.code(), Some(3));
}
