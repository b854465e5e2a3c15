use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wela::dataset::{build_weak_labels, generate_dataset, save_dataset, GenerateConfig, WeakLabelConfig};
use wela::evaluation::Task;
use wela::experiments::{
    build_report, check_gamma_rule, collect_runs, published_gammas, read_metrics_csv, read_report_csv,
    report_runs, run_sweep, Family, RangeMode, RunStatus, SweepConfig, TrainTemplate,
};

fn write_dataset(dir: &Path, side: usize, ps: &[usize]) -> PathBuf {
    let ds = generate_dataset(&GenerateConfig::new(side, 2)).unwrap();
    let labels: Vec<_> = ps
        .iter()
        .map(|&p| build_weak_labels(&ds, &WeakLabelConfig::new(p, side)).unwrap())
        .collect();
    let path = dir.join("data");
    save_dataset(&path, &ds, &labels).unwrap();
    path
}

fn tiny_sweep(data: &Path, family: Family, out: &Path) -> SweepConfig {
    let mut cfg = SweepConfig::new(data, family, out);
    cfg.ps = vec![2, 3];
    cfg.gammas = BTreeMap::from([(2, 16.0), (3, 11.0)]);
    cfg.seeds = vec![0, 1];
    cfg.tcvae_latent_dim = 3;
    cfg.train = TrainTemplate {
        learning_rate: 1e-3,
        batch_size: 32,
        epochs: 2,
        hidden: 16,
        shuffle: true,
    };
    cfg
}

fn wela() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wela"))
}

fn ok(out: &Output) {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn canonical_sweep_has_four_hundred_runs() {
    let wela = SweepConfig::new("d", Family::Wela, "o");
    let tcvae = SweepConfig::new("d", Family::Tcvae, "o");
    assert_eq!(wela.jobs(4096).len(), 350);
    assert_eq!(tcvae.jobs(4096).len(), 50);
    assert_eq!(wela.seeds, (0..50).collect::<Vec<u64>>());
    assert!(tcvae.jobs(4096).iter().all(|j| j.train.model.latent_dim == 5));
    assert!(wela.jobs(4096).iter().all(|j| j.train.model.latent_dim == 2));
}

#[test]
fn wela_jobs_cross_p_with_seeds_and_take_gamma_from_the_map() {
    let mut cfg = tiny_sweep(Path::new("d"), Family::Wela, Path::new("o"));
    let jobs = cfg.jobs(64);
    assert_eq!(jobs.len(), 4);
    let got: Vec<(Option<usize>, u64, f64)> = jobs.iter().map(|j| (j.p, j.train.seed, j.train.model.gamma)).collect();
    assert_eq!(got, vec![(Some(2), 0, 16.0), (Some(2), 1, 16.0), (Some(3), 0, 11.0), (Some(3), 1, 11.0)]);
    cfg.ps.push(4);
    assert!(cfg.validate().is_err());
    cfg.ps.pop();
    cfg.seeds = vec![1, 1];
    assert!(cfg.validate().is_err());
}

#[test]
fn published_gammas_against_the_rule_of_thumb() {
    // γ·2p lands at 8000–9000 for D = 4096; p = 3, 6, 7 exceed the 2× band
    assert_eq!(check_gamma_rule(&published_gammas(), 4096), vec![3, 6, 7]);
    assert!(check_gamma_rule(&BTreeMap::from([(3, 42.0)]), 256).is_empty());
}

#[test]
fn tcvae_sweep_trains_one_run_per_seed_without_labels() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 6, &[]);
    let mut cfg = tiny_sweep(&data, Family::Tcvae, &dir.path().join("sweep"));
    cfg.seeds = vec![0, 1, 2];
    let records = run_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 3);
    for r in &records {
        let run = r.status.result().unwrap();
        assert!(run.label_accuracy.is_empty());
        assert!(!run.config.model.is_labeled());
    }
}

#[test]
fn interrupted_sweep_resumes_to_a_byte_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 8, &[2, 3]);

    let full = dir.path().join("full");
    let cfg = tiny_sweep(&data, Family::Wela, &full);
    let records = run_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| matches!(r.status, RunStatus::Trained(_))));
    let (rows, files) = report_runs(&full.join("runs"), Task::Polar, RangeMode::Extent, &full).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.seeds_ok == 2 && r.seeds_failed == 0));

    let partial = dir.path().join("partial");
    let mut first_half = tiny_sweep(&data, Family::Wela, &partial);
    first_half.seeds = vec![0];
    run_sweep(&first_half).unwrap();
    // a run killed before writing its metadata
    let cut = tiny_sweep(&data, Family::Wela, &partial).jobs(64)[1].run_dir(&partial.join("runs"), &records[0].status.result().unwrap().dataset_hash);
    std::fs::create_dir_all(&cut).unwrap();
    std::fs::write(cut.join("checkpoint.bin"), b"truncated").unwrap();

    let resumed = run_sweep(&tiny_sweep(&data, Family::Wela, &partial)).unwrap();
    let statuses: Vec<bool> = resumed.iter().map(|r| matches!(r.status, RunStatus::Resumed(_))).collect();
    assert_eq!(statuses, vec![true, false, true, false]);
    let again = run_sweep(&tiny_sweep(&data, Family::Wela, &partial)).unwrap();
    assert!(again.iter().all(|r| matches!(r.status, RunStatus::Resumed(_))));

    let (_, resumed_files) = report_runs(&partial.join("runs"), Task::Polar, RangeMode::Extent, &partial).unwrap();
    for (a, b) in [
        (&files.report_csv, &resumed_files.report_csv),
        (&files.report_txt, &resumed_files.report_txt),
        (&files.metrics_csv, &resumed_files.metrics_csv),
    ] {
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), "{}", a.display());
    }
}

#[test]
fn report_recomputed_from_per_seed_rows_matches_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 8, &[2, 3]);
    let out = dir.path().join("sweep");
    run_sweep(&tiny_sweep(&data, Family::Wela, &out)).unwrap();
    let (rows, files) = report_runs(&out.join("runs"), Task::Cartesian, RangeMode::Extent, &out).unwrap();
    let metrics = read_metrics_csv(&files.metrics_csv).unwrap();
    assert_eq!(metrics.len(), 4);
    assert_eq!(build_report(&metrics), rows);
    assert_eq!(read_report_csv(&files.report_csv).unwrap(), rows);
    let header = std::fs::read_to_string(&files.report_csv).unwrap();
    assert!(header.starts_with(
        "family,p,beta,gamma,seeds_ok,seeds_failed,acc_angle,acc_distance,mse_lowest,mse_mean,mse_best10\n"
    ));
    for row in &rows {
        let lowest = row.mse_lowest.unwrap();
        assert!(lowest <= row.mse_best10.unwrap() && row.mse_best10.unwrap() <= row.mse_mean.unwrap());
        let best = metrics
            .iter()
            .filter(|m| m.p == row.p)
            .min_by(|a, b| a.mse.unwrap().total_cmp(&b.mse.unwrap()))
            .unwrap();
        assert_eq!(best.mse, Some(lowest));
        assert_eq!((best.acc_angle, best.acc_distance), (row.acc_angle, row.acc_distance));
    }
}

#[test]
fn diverged_runs_are_recorded_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 6, &[2]);
    let out = dir.path().join("sweep");
    let mut cfg = tiny_sweep(&data, Family::Wela, &out);
    cfg.ps = vec![2];
    cfg.train.learning_rate = 1e30;
    cfg.train.epochs = 5;
    let records = run_sweep(&cfg).unwrap();
    assert!(records.iter().all(|r| matches!(r.status, RunStatus::Failed(_))));
    assert_eq!(collect_runs(&out.join("runs")).unwrap().len(), 2);
    let (rows, files) = report_runs(&out.join("runs"), Task::Polar, RangeMode::Extent, &out).unwrap();
    assert_eq!((rows[0].seeds_ok, rows[0].seeds_failed), (0, 2));
    assert!(!rows[0].available());
    assert!(std::fs::read_to_string(files.report_txt).unwrap().contains("unavailable"));
}

#[test]
fn cli_report_on_an_empty_directory_fails_with_no_runs_found() {
    let dir = tempfile::tempdir().unwrap();
    let out = wela().args(["report", "--task", "polar", "--in"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no runs found"));
}

#[test]
fn cli_usage_errors_exit_one() {
    let out = wela().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = wela().args(["report", "--task", "diagonal", "--in", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(wela().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn cli_train_eval_traverse_heatmap_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 8, &[3]);
    let run_dir = dir.path().join("runs/wela-p3/seed-7");
    let tiny = ["--epochs", "2", "--batch-size", "32", "--hidden", "16", "--lr", "1e-3"];
    let out = wela()
        .args(["train", "--family", "wela", "--p", "3", "--gamma", "1500", "--beta", "40", "--seed", "7", "--data"])
        .arg(&data)
        .args(tiny)
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap();
    ok(&out);
    let run = wela::trainer::read_run(&run_dir).unwrap();
    assert_eq!(run.seed, 7);
    assert_eq!(run.config.model.gamma, 1500.0);
    assert_eq!(run.dataset_path.as_deref(), Some(data.as_path()));

    ok(&wela().args(["eval", "--run"]).arg(&run_dir).output().unwrap());
    let metrics = read_metrics_csv(&run_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.iter().map(|m| m.task).collect::<Vec<_>>(), vec![Task::Cartesian, Task::Polar]);

    ok(&wela().args(["traverse", "--steps", "4", "--samples", "0,5", "--run"]).arg(&run_dir).output().unwrap());
    let pgms: Vec<_> = std::fs::read_dir(run_dir.join("traversal")).unwrap().collect();
    assert_eq!(pgms.len(), 4);

    ok(&wela().args(["heatmap", "--run"]).arg(&run_dir).output().unwrap());
    assert!(run_dir.join("heatmap/heatmap_1.csv").is_file());

    let out = wela().args(["report", "--task", "polar", "--in"]).arg(dir.path().join("runs")).output().unwrap();
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("wela"));
}

#[test]
fn cli_sweep_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 6, &[2]);
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        format!(
            "threads = 2\n[sweep]\ndata = {:?}\nfamily = \"wela\"\np = [2]\nseeds = [3, 4]\nepochs = 1\nbatch_size = 16\nhidden = 8\n[sweep.gammas]\n2 = 9.0\n",
            data
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("sweep");
    ok(&wela().arg("sweep").arg("--config").arg(&config).arg("--out").arg(&out_dir).output().unwrap());
    let runs = collect_runs(&out_dir.join("runs")).unwrap();
    let seeds: Vec<u64> = runs.iter().map(|r| r.config().seed).collect();
    assert_eq!(seeds, vec![3, 4]);
    assert!(runs.iter().all(|r| r.config().model.gamma == 9.0));
}
