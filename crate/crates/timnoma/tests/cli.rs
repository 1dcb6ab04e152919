//! End-to-end checks of the `timnoma` binary: exit codes, exported files and
//! figure regeneration.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_timnoma"))
}

#[test]
fn simulate_preset_writes_results_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args([
            "simulate",
            "--preset",
            "paper-siso-5u",
            "--snr",
            "6,12",
            "--frames",
            "3",
            "--seed",
            "7",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("results.csv").is_file());
    assert!(out.join("run.toml").is_file());
    for figure in [5, 6, 8, 10, 12] {
        assert!(out.join(format!("figure_{figure}.csv")).is_file(), "figure {figure}");
    }

    // Regenerate one figure in place.
    std::fs::remove_file(out.join("figure_12.csv")).unwrap();
    let status = bin()
        .args(["report", "--figure", "12", "--in"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let content = std::fs::read_to_string(out.join("figure_12.csv")).unwrap();
    assert!(content.starts_with("snr_db,ratio\n"));
    assert_eq!(content.lines().count(), 3);

    // A multi-antenna figure cannot be drawn from a single-antenna run.
    let output = bin()
        .args(["report", "--figure", "11", "--in"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("figure 11"), "{stderr}");
}

#[test]
fn simulate_accepts_config_files_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.toml");
    std::fs::write(
        &config,
        r#"
        preset = "paper-mimo-4u"
        scheme = "mimo-sinr"
        c = 0.03
        frames = 2
        snr_grid_db = [8.0]
        legs = ["hybrid"]
        "#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--snr", "4,8", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    // Two SNR points (the --snr override), no tdma metrics.
    assert!(results.contains("\n4,1,bits,"));
    assert!(results.contains("\n8,1,bits,"));
    assert!(!results.contains("ber_tdma"));
}

#[test]
fn invalid_inputs_exit_nonzero_with_a_diagnostic() {
    // No scenario at all.
    let output = bin().args(["simulate", "--frames", "1"]).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("--preset"));

    // A config violating the distance-interleaving invariant.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        r#"
        frames = 1
        snr_grid_db = [10.0]

        [scenario]
        time_slots = 2
        tx_antennas = 1
        rx_antennas = 1
        distances_km = [1.0, 2.0, 3.0, 4.0]
        groups = [[1, 2], [3, 4]]
        "#,
    )
    .unwrap();
    let output = bin().args(["simulate", "--config"]).arg(&config).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("interleaving"), "{stderr}");

    // Unknown preset.
    let output = bin()
        .args(["simulate", "--preset", "no-such-cell"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown preset"));
}
