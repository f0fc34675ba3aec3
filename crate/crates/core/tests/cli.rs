use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsm_vlc::runner::{sha256_file, Manifest, BER_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gsm-vlc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const GSM_7_2_4: &str = r#"
[scheme]
kind = "gsm"
n_tx = 7
n_active = 2
levels = 4

[sweep]
snr_db = [20, 30, 40]

[sim]
min_bit_errors = 50
max_channel_uses = 200000
"#;

const SM_4_4: &str = r#"
[transmitter]
placement = [1, 2, 11, 15]

[scheme]
kind = "sm"
n_tx = 4
levels = 4

[sweep]
snr_db = [20, 25, 30, 35]

[sim]
min_bit_errors = 50
max_channel_uses = 200000
"#;

#[test]
fn metrics_reports_efficiency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", GSM_7_2_4);
    let o = run(&["metrics", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("GSM(7,2,4)"), "{text}");
    assert!(text.contains("efficiency    8 bpcu"), "{text}");
    assert!(text.contains("signal set    256 vectors"), "{text}");
    assert_eq!(text.matches('×').count(), 7);
}

#[test]
fn channel_dump_has_a_row_per_detector() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", GSM_7_2_4);
    let o = run(&["channel", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0].split(',').count(), 7);
    for row in &lines[1..] {
        for v in row.split(',') {
            assert!(v.parse::<f64>().unwrap() > 0.0);
        }
    }
}

#[test]
fn bound_is_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", GSM_7_2_4);
    let o = run(&["bound", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("snr_db,ber_bound"));
    let ber: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(ber.len(), 3);
    assert!(ber.windows(2).all(|w| w[1] < w[0]), "{ber:?}");
}

#[test]
fn simulate_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", GSM_7_2_4);
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("gsm-7-2-4.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], BER_HEADER.join(","));
    assert_eq!(lines.len(), 1 + 3);

    let manifest = Manifest::load(&out.join("gsm-7-2-4_manifest.json")).unwrap();
    assert_eq!(manifest.seed, 42);
    assert_eq!(manifest.outputs.len(), 1);
    assert_eq!(manifest.outputs[0].rows, 3);
    assert_eq!(manifest.outputs[0].sha256, sha256_file(&out.join("gsm-7-2-4.csv")).unwrap());
    assert_eq!(manifest.runs[0].label, "GSM(7,2,4)");
    assert_eq!(manifest.runs[0].cells.len(), 7);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", GSM_7_2_4);
    let one = run(&["simulate", "--config", cfg.to_str().unwrap(), "--threads", "1"]);
    let four = run(&["simulate", "--config", cfg.to_str().unwrap(), "--threads", "4"]);
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", GSM_7_2_4);
    let a = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    let b = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "7"]);
    let c = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "42"]);
    assert_ne!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn exhausted_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", GSM_7_2_4);
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--min-errors",
        "100000",
        "--max-uses",
        "8192",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains(",true"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.toml",
        "[transmitter]\nsemiangle = 120.0\n\n[scheme]\nkind = \"ssk\"\nn_tx = 16\n",
    );
    let o = run(&["metrics", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("transmitter.semiangle"), "{}", stderr(&o));

    let empty = write_config(dir.path(), "empty.toml", "");
    let o = run(&["bound", "--config", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scheme"), "{}", stderr(&o));

    let o = run(&["metrics"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["preset", "fig99", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig12"));
}

#[test]
fn missing_file_is_reported() {
    let o = run(&["metrics", "--config", "/nonexistent/a.toml"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/a.toml"));
}

#[test]
fn place_opt_lists_top_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "a.toml",
        "[scheme]\nkind = \"gsm\"\nn_tx = 4\nn_active = 2\nlevels = 8\npatterns = \"optimized\"\n",
    );
    let o = run(&["place-opt", "--config", cfg.to_str().unwrap(), "--top", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("× × ○ ○"), "{text}");
    assert!(text.contains("rank,cells,d_min,d_avg"));
    assert!(text.contains("\n1,1 2 11 15,1.88"), "{text}");
    assert!(text.contains("\n3,"));
    assert!(!text.contains("\n4,"));
}

#[test]
fn compare_rejects_mixed_efficiency() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "eight.toml", GSM_7_2_4);
    let b = write_config(dir.path(), "four.toml", SM_4_4);
    let o = run(&["compare", "--config", a.to_str().unwrap(), "--config", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("eight.toml") && err.contains("four.toml"), "{err}");

    let o = run(&[
        "compare",
        "--config",
        a.to_str().unwrap(),
        "--config",
        b.to_str().unwrap(),
        "--allow-mixed-efficiency",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "snr_db,gsm-7-2-4_bit_errors,gsm-7-2-4_ber_sim,gsm-7-2-4_ber_bound,sm-4-1-4_bit_errors,sm-4-1-4_ber_sim,sm-4-1-4_ber_bound"
    );
    assert_eq!(text.lines().count(), 1 + 3);
}

#[test]
fn compare_identical_configs() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.toml", SM_4_4);
    let b = write_config(dir.path(), "b.toml", SM_4_4);
    let c = write_config(dir.path(), "c.toml", &SM_4_4.replace("[sim]", "[sim]\nseed = 9"));
    let columns = |args: &[&str]| -> Vec<Vec<String>> {
        let o = run(args);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    };
    let same = columns(&["compare", "--config", a.to_str().unwrap(), "--config", b.to_str().unwrap()]);
    assert_eq!(same.len(), 4);
    for row in &same {
        assert_eq!(row[1..4], row[4..7]);
    }
    let distinct = columns(&["compare", "--config", a.to_str().unwrap(), "--config", c.to_str().unwrap()]);
    assert!(distinct.iter().any(|row| row[1..3] != row[4..6]));
    for row in &distinct {
        assert_eq!(row[3], row[6]);
    }
}

#[test]
fn table2_preset_writes_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["preset", "table2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("table2_rank.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "system,config,eta,cells,patterns,pattern_search,d_min,d_avg");
    for (line, label) in lines[1..].iter().zip(["GSM(4,2,8)", "GSM(7,2,4)", "GSM(7,3,2)", "GSM(12,2,2)"]) {
        assert!(line.contains(label), "{line}");
        assert!(line.contains(",8,"), "{line}");
    }
    let manifest = Manifest::load(&dir.path().join("table2_manifest.json")).unwrap();
    assert_eq!(manifest.runs.len(), 4);
    assert_eq!(manifest.runs[0].cells, [1, 2, 11, 15]);
}
