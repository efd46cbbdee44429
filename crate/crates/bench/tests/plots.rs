//! Figure rendering. The golden files are regenerated with
//! `UPDATE_GOLDEN=1 cargo test -p doma-bench --test plots`.

use std::path::Path;

use doma_bench::error::BenchError;
use doma_bench::plan::Mode;
use doma_bench::plot::{render_plots, render_svgs, EE_VS_SE, SE_VS_OMEGA, SE_VS_UES};
use doma_bench::record::{write_csv, RunRecord};

fn record(mode: Mode, omega: f64, ues_per_ap: usize, trial: usize) -> RunRecord {
    // Smooth synthetic trends: SE rises with omega and UEs, more overlap
    // freedom adds a little.
    let bonus = match mode {
        Mode::Pod => 1.0,
        Mode::Npod => 0.7,
        Mode::NomaOfdm => 0.4,
        Mode::Ofdma => 0.0,
    };
    let se = 8.0 + 2.0 * omega + bonus + (ues_per_ap as f64).ln() + 0.1 * trial as f64;
    let sp = 0.05 + 0.3 * omega * omega + 0.02 * (1.0 - bonus);
    RunRecord {
        plan: "golden".into(),
        trial,
        seed: trial as u64,
        ues_per_ap,
        total_ues: 2 * ues_per_ap,
        capacity: if mode == Mode::Ofdma { 1 } else { 10 },
        mode,
        omega,
        status: "converged".into(),
        se_bps_hz: se,
        sr_bps: se * 360e3,
        sp_w: sp,
        cp_w: 0.12,
        ee_bit_per_j: se * 360e3 / (sp + 0.12),
        lambda: 0.1,
        iterations: 10,
        work: 100,
        utopia_se: 12.0,
        utopia_sp: 0.01,
        utopia_se_method: "supplied".into(),
        utopia_sp_method: "supplied".into(),
        wall_time_s: 0.0,
    }
}

fn full_sweep() -> Vec<RunRecord> {
    let mut out = Vec::new();
    for trial in 0..2 {
        for mode in Mode::ALL {
            for omega in [0.0, 0.25, 0.5, 0.75, 1.0] {
                out.push(record(mode, omega, 2, trial));
            }
            for ues in [1, 3, 4] {
                out.push(record(mode, 0.5, ues, trial));
            }
        }
    }
    out
}

/// Offset of `label` drawn as a text element of its own.
fn has_label(svg: &str, label: &str) -> Option<usize> {
    svg.find(&format!(">\n{label}\n</text>"))
}

fn golden_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden"))
}

#[test]
fn full_sweep_matches_golden_figures() {
    let svgs = render_svgs(&full_sweep()).unwrap();
    assert_eq!(
        svgs.iter().map(|s| s.0).collect::<Vec<_>>(),
        vec![SE_VS_OMEGA, EE_VS_SE, SE_VS_UES]
    );
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, svg) in svgs {
        let path = golden_dir().join(name);
        if update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, &svg).unwrap();
            continue;
        }
        let expected =
            std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert!(
            svg == expected,
            "{name} differs from its golden file; rerun with UPDATE_GOLDEN=1 after checking it"
        );
    }
}

#[test]
fn legend_lists_modes_in_fixed_order() {
    let svgs = render_svgs(&full_sweep()).unwrap();
    let svg = &svgs[0].1;
    let at = |label: &str| has_label(svg, label).unwrap_or_else(|| panic!("{label} not in legend"));
    assert!(
        at("POD") < at("NPOD") && at("NPOD") < at("NOMA-OFDM") && at("NOMA-OFDM") < at("OFDMA")
    );
}

#[test]
fn single_mode_gives_single_series() {
    let only: Vec<RunRecord> = full_sweep()
        .into_iter()
        .filter(|r| r.mode == Mode::Npod)
        .collect();
    for (name, svg) in render_svgs(&only).unwrap() {
        assert!(has_label(&svg, "NPOD").is_some(), "{name}");
        for other in ["POD", "NOMA-OFDM", "OFDMA"] {
            assert!(has_label(&svg, other).is_none(), "{name} shows {other}");
        }
    }
}

#[test]
fn empty_csv_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    write_csv(&csv, &[]).unwrap();
    let out = dir.path().join("figs");
    assert!(matches!(
        render_plots(&csv, &out),
        Err(BenchError::EmptyPlot(_))
    ));
    assert!(!out.exists());
}

#[test]
fn missing_column_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "# doma-bench runs v1\nplan,mode,omega,status,total_ues,se_bps_hz,sp_w\ng,POD,0.5,converged,4,10,0.1\n").unwrap();
    match render_plots(&csv, dir.path()) {
        Err(BenchError::MissingColumn(c)) => assert_eq!(c, "ee_bit_per_j"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn figures_land_in_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    write_csv(&csv, &full_sweep()).unwrap();
    let paths = render_plots(&csv, &dir.path().join("figs")).unwrap();
    assert_eq!(paths.len(), 3);
    for p in paths {
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("<svg"));
    }
}
