use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_precursor-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(name: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = configs().join(name);
    let mut args = vec![cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lab(&args)
}

fn summary_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("{key} missing from\n{text}"))
        .to_string()
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_recovers_inverse_square_root_decay() {
    let tmp = TempDir::new().unwrap();
    let out = run_config("sweep.cfg", tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let slope: f64 = summary_value(tmp.path(), "DECAY_EXPONENT").parse().unwrap();
    assert!((slope + 0.5).abs() < 0.01, "slope {slope}");
    let sweep = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next(), Some("z,t_peak,peak_amp,rms_width,energy_ratio"));
    assert_eq!(sweep.lines().count(), 6);
    for z in ["100", "200", "400", "800", "1600"] {
        assert!(tmp.path().join(format!("signal_z{z}.csv")).exists());
    }
}

#[test]
fn stochastic_output_is_identical_across_thread_counts() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(run_config("stochastic.cfg", a.path(), &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run_config("stochastic.cfg", b.path(), &["--threads", "4"]).status.code(), Some(0));
    let (la, lb) = (listing(a.path()), listing(b.path()));
    assert_eq!(la.len(), 6);
    assert_eq!(la, lb);
    let z: f64 = summary_value(a.path(), "MC_MAX_ZSCORE_VS_ENSEMBLE_AVERAGE").parse().unwrap();
    assert!(z < 4.0, "{z}");
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("stochastic.cfg")).unwrap();
    let cfg = write_config(tmp.path(), &text.replace("mc-samples = 10000", "mc-samples = 200"));
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    lab(&[cfg, "--output-dir", a.to_str().unwrap()]);
    lab(&[cfg, "--output-dir", b.to_str().unwrap(), "--seed", "8"]);
    assert_eq!(summary_value(&a, "SEED"), "42");
    assert_eq!(summary_value(&b, "SEED"), "8");
    let read = |d: &Path| fs::read(d.join("stochastic_z10.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}

#[test]
fn rerun_replaces_previous_outputs() {
    let tmp = TempDir::new().unwrap();
    run_config("propagate.cfg", tmp.path(), &[]);
    assert!(tmp.path().join("signal_z50.csv").exists());
    fs::write(tmp.path().join("notes.md"), "keep").unwrap();
    assert_eq!(run_config("chirp.cfg", tmp.path(), &[]).status.code(), Some(0));
    assert!(!tmp.path().join("signal_z50.csv").exists());
    assert!(tmp.path().join("notes.md").exists());
}

#[test]
fn verify_passes() {
    let tmp = TempDir::new().unwrap();
    let out = run_config("verify.cfg", tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary_value(tmp.path(), "VERIFY_RESULT"), "PASS");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.matches(": PASS ").count(), 4, "{stdout}");
}

#[test]
fn experiment_flag_switches_run() {
    let tmp = TempDir::new().unwrap();
    let out = run_config("propagate.cfg", tmp.path(), &["--experiment", "verify"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary_value(tmp.path(), "EXPERIMENT"), "verify");
}

#[test]
fn validation_errors_exit_one_and_name_the_key() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("propagate.cfg")).unwrap();
    let cfg = write_config(tmp.path(), &text.replace("z = 50, 200", "z = -1"));
    let out = lab(&[cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("z"));
    assert!(!tmp.path().join("output").exists());

    let out = run_config("propagate.cfg", tmp.path(), &["--experiment", "teleport"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["propagate", "sweep-z", "stochastic", "chirp", "slab", "verify"] {
        assert!(err.contains(name), "{err}");
    }

    let out = run_config("propagate.cfg", tmp.path(), &["--threads", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_errors_exit_one_with_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "experiment = verify\nnot a pair\n");
    let out = lab(&[cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains('2'));
}

#[test]
fn missing_config_exits_three() {
    let tmp = TempDir::new().unwrap();
    let out = lab(&[tmp.path().join("absent.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn pulse_file_matches_generated_pulse() {
    let tmp = TempDir::new().unwrap();
    let grid = "[grid]\nn = 4096\ndt = 0.1\nt0 = -10\n";
    let medium = "[medium]\nkind = quadratic\na = 1\nv = 1\n";
    let generated = write_config(
        tmp.path(),
        &format!("experiment = propagate\nz = 50\noutput-dir = gen\n{grid}[pulse]\nkind = gaussian\nwidth = 1\nomega0 = 2\n{medium}"),
    );
    assert_eq!(lab(&[generated.to_str().unwrap()]).status.code(), Some(0));

    let mut csv = String::from("t,f\n");
    for i in 0..=4000 {
        let t = -20.0 + i as f64 * 0.01;
        csv.push_str(&format!("{t},{}\n", (-t * t / 2.0).exp() * (2.0 * t).cos()));
    }
    fs::write(tmp.path().join("pulse.csv"), csv).unwrap();
    let from_file = write_config(
        tmp.path(),
        &format!("experiment = propagate\nz = 50\noutput-dir = file\n{grid}[pulse]\nfile = pulse.csv\n{medium}"),
    );
    assert_eq!(lab(&[from_file.to_str().unwrap()]).status.code(), Some(0));

    let column = |d: &str| -> Vec<f64> {
        csv_rows(&tmp.path().join(d).join("signal_z50.csv")).iter().map(|row| row[1]).collect()
    };
    let (a, b) = (column("gen"), column("file"));
    assert_eq!(a.len(), b.len());
    let peak = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let worst = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    // linear interpolation of the 0.01-spaced file onto the grid
    assert!(worst < 1e-4 * peak, "{worst} vs peak {peak}");
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}
