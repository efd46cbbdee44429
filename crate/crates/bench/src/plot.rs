//! SVG figures from a run CSV.
//!
//! All three figures average solved records over trials. Modes are drawn
//! and listed in [`Mode::ALL`] order.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use plotters::coord::Shift;
use plotters::prelude::*;
use plotters::style::{register_font, FontStyle};

use crate::error::{BenchError, Result};
use crate::plan::Mode;
use crate::record::{read_csv, RunRecord};

pub const SE_VS_OMEGA: &str = "se_vs_omega.svg";
pub const EE_VS_SE: &str = "ee_vs_se.svg";
pub const SE_VS_UES: &str = "se_vs_ues.svg";

const SIZE: (u32, u32) = (800, 600);
const FONT: &str = "sans-serif";

/// Columns the plots read.
pub const REQUIRED_COLUMNS: [&str; 7] = [
    "mode",
    "omega",
    "status",
    "total_ues",
    "se_bps_hz",
    "sp_w",
    "ee_bit_per_j",
];

// plotters ships no fonts of its own with the ab_glyph backend.
fn ensure_font() -> Result<()> {
    static REGISTERED: OnceLock<bool> = OnceLock::new();
    let ok = *REGISTERED.get_or_init(|| {
        register_font(
            FONT,
            FontStyle::Normal,
            include_bytes!("../assets/DejaVuSansMono.ttf"),
        )
        .is_ok()
    });
    if ok {
        Ok(())
    } else {
        Err(BenchError::Render("embedded font failed to load".into()))
    }
}

fn color(mode: Mode) -> RGBColor {
    match mode {
        Mode::Pod => RGBColor(200, 30, 30),
        Mode::Npod => RGBColor(30, 80, 200),
        Mode::NomaOfdm => RGBColor(20, 140, 60),
        Mode::Ofdma => RGBColor(90, 90, 90),
    }
}

/// Per-mode curve of the mean of `y` at each distinct `x`, over solved
/// records, with `x` ascending. Modes without data are left out.
pub fn mean_curves(
    records: &[RunRecord],
    x: impl Fn(&RunRecord) -> f64,
    y: impl Fn(&RunRecord) -> f64,
) -> Vec<(Mode, Vec<(f64, f64)>)> {
    Mode::ALL
        .into_iter()
        .filter_map(|mode| {
            let mut pts: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.mode == mode && r.is_solved())
                .map(|r| (x(r), y(r)))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut curve: Vec<(f64, f64)> = Vec::new();
            let mut i = 0;
            while i < pts.len() {
                let j = i + pts[i..].iter().take_while(|p| p.0 == pts[i].0).count();
                let mean = pts[i..j].iter().map(|p| p.1).sum::<f64>() / (j - i) as f64;
                curve.push((pts[i].0, mean));
                i = j;
            }
            (!curve.is_empty()).then_some((mode, curve))
        })
        .collect()
}

fn span(values: impl Iterator<Item = f64>, floor_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(v), h.max(v))
    });
    if floor_zero {
        lo = lo.min(0.0);
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.05 * hi.abs().max(1.0)
    };
    lo -= if floor_zero && lo == 0.0 { 0.0 } else { pad };
    hi += pad;
    (lo, hi)
}

fn render<E: std::fmt::Display>(e: E) -> BenchError {
    BenchError::Render(e.to_string())
}

type Area<'a> = DrawingArea<SVGBackend<'a>, Shift>;

fn line_chart(
    area: &Area<'_>,
    caption: &str,
    x_desc: &str,
    y_desc: &str,
    curves: &[(Mode, Vec<(f64, f64)>)],
    legend: SeriesLabelPosition,
) -> Result<()> {
    let (x0, x1) = span(curves.iter().flat_map(|c| c.1.iter().map(|p| p.0)), false);
    let (y0, y1) = span(curves.iter().flat_map(|c| c.1.iter().map(|p| p.1)), false);
    let mut chart = ChartBuilder::on(area)
        .caption(caption, (FONT, 18))
        .margin(12)
        .x_label_area_size(38)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(render)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .label_style((FONT, 12))
        .draw()
        .map_err(render)?;
    for (mode, pts) in curves {
        let c = color(*mode);
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), c.stroke_width(2)))
            .map_err(render)?
            .label(mode.label())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 3, c.filled())))
            .map_err(render)?;
    }
    chart
        .configure_series_labels()
        .position(legend)
        .label_font((FONT, 13))
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(render)?;
    Ok(())
}

/// Grouped bars of SP per weight, one bar per mode.
fn sp_bars(area: &Area<'_>, curves: &[(Mode, Vec<(f64, f64)>)]) -> Result<()> {
    let mut xs: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.1.iter().map(|p| p.0))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let step = xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let step = if step.is_finite() { step } else { 0.1 };
    let (x0, x1) = (xs[0] - 0.6 * step, xs[xs.len() - 1] + 0.6 * step);
    let (_, y1) = span(curves.iter().flat_map(|c| c.1.iter().map(|p| p.1)), true);
    let mut chart = ChartBuilder::on(area)
        .caption("Sum power", (FONT, 18))
        .margin(12)
        .x_label_area_size(38)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(render)?;
    chart
        .configure_mesh()
        .x_desc("omega")
        .y_desc("SP (W)")
        .label_style((FONT, 12))
        .draw()
        .map_err(render)?;
    let width = 0.8 * step / curves.len() as f64;
    for (i, (mode, pts)) in curves.iter().enumerate() {
        let c = color(*mode);
        let offset = -0.4 * step + i as f64 * width;
        chart
            .draw_series(pts.iter().map(|&(x, y)| {
                Rectangle::new([(x + offset, 0.0), (x + offset + width, y)], c.filled())
            }))
            .map_err(render)?;
    }
    Ok(())
}

fn save(path: &Path, svg: String) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, svg.as_bytes())?;
    tmp.persist(path).map_err(|e| BenchError::Io(e.error))?;
    Ok(())
}

fn draw(f: impl FnOnce(&Area<'_>) -> Result<()>) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(render)?;
        f(&root)?;
        root.present().map_err(render)?;
    }
    Ok(svg)
}

/// Weight used for the UE-sweep figure: the median distinct weight.
fn sweep_weight(records: &[RunRecord]) -> f64 {
    let mut ws: Vec<f64> = records.iter().map(|r| r.omega).collect();
    ws.sort_by(f64::total_cmp);
    ws.dedup();
    ws[ws.len().saturating_sub(1) / 2]
}

/// Renders the figures for `records` as SVG strings, keyed by file name.
pub fn render_svgs(records: &[RunRecord]) -> Result<Vec<(&'static str, String)>> {
    if !records.iter().any(RunRecord::is_solved) {
        return Err(BenchError::EmptyPlot("no solved records".into()));
    }
    ensure_font()?;
    let se = mean_curves(records, |r| r.omega, |r| r.se_bps_hz);
    let sp = mean_curves(records, |r| r.omega, |r| r.sp_w);
    let mut out = Vec::new();
    out.push((
        SE_VS_OMEGA,
        draw(|root| {
            let (top, bottom) = root.split_vertically(SIZE.1 * 3 / 5);
            line_chart(
                &top,
                "Spectral efficiency vs weight",
                "omega",
                "SE (bps/Hz)",
                &se,
                SeriesLabelPosition::LowerRight,
            )?;
            sp_bars(&bottom, &sp)
        })?,
    ));

    // EE against SE traced along the weight sweep.
    let se_ee: Vec<(Mode, Vec<(f64, f64)>)> = se
        .iter()
        .map(|(mode, pts)| {
            let ee = mean_curves(records, |r| r.omega, |r| r.ee_bit_per_j);
            let ee = &ee.iter().find(|c| c.0 == *mode).expect("same records").1;
            let mut pts: Vec<(f64, f64)> =
                pts.iter().zip(ee).map(|(s, e)| (s.1, e.1 / 1e6)).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (*mode, pts)
        })
        .collect();
    out.push((
        EE_VS_SE,
        draw(|root| {
            line_chart(
                root,
                "Energy efficiency vs spectral efficiency",
                "SE (bps/Hz)",
                "EE (Mbit/J)",
                &se_ee,
                SeriesLabelPosition::UpperRight,
            )
        })?,
    ));

    let w = sweep_weight(records);
    let at_w: Vec<RunRecord> = records.iter().filter(|r| r.omega == w).cloned().collect();
    let by_ues = mean_curves(&at_w, |r| r.total_ues as f64, |r| r.se_bps_hz);
    let caption = format!("Spectral efficiency vs UEs (omega = {w})");
    out.push((
        SE_VS_UES,
        draw(|root| {
            line_chart(
                root,
                &caption,
                "total UEs",
                "SE (bps/Hz)",
                &by_ues,
                SeriesLabelPosition::LowerRight,
            )
        })?,
    ));
    Ok(out)
}

/// Reads `csv` and writes every figure into `out_dir`. Nothing is written
/// unless every figure renders.
pub fn render_plots(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let records = read_csv(csv, &REQUIRED_COLUMNS)?;
    let svgs = render_svgs(&records)?;
    let mut paths = Vec::new();
    for (name, svg) in svgs {
        let path = out_dir.join(name);
        save(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(mode: Mode, omega: f64, se: f64) -> RunRecord {
        RunRecord {
            plan: "p".into(),
            trial: 0,
            seed: 0,
            ues_per_ap: 2,
            total_ues: 4,
            capacity: 2,
            mode,
            omega,
            status: "converged".into(),
            se_bps_hz: se,
            sr_bps: se * 1e6,
            sp_w: 0.1,
            cp_w: 0.1,
            ee_bit_per_j: se * 5e6,
            lambda: 0.0,
            iterations: 1,
            work: 1,
            utopia_se: 0.0,
            utopia_sp: 0.0,
            utopia_se_method: "supplied".into(),
            utopia_sp_method: "supplied".into(),
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn curves_average_trials_in_mode_order() {
        let recs = vec![
            rec(Mode::NomaOfdm, 0.5, 2.0),
            rec(Mode::Pod, 0.5, 1.0),
            rec(Mode::Pod, 0.5, 3.0),
            rec(Mode::Pod, 0.0, 5.0),
        ];
        let c = mean_curves(&recs, |r| r.omega, |r| r.se_bps_hz);
        assert_eq!(
            c,
            vec![
                (Mode::Pod, vec![(0.0, 5.0), (0.5, 2.0)]),
                (Mode::NomaOfdm, vec![(0.5, 2.0)])
            ]
        );
    }

    #[test]
    fn unsolved_records_give_no_plot() {
        let mut r = rec(Mode::Pod, 0.5, f64::NAN);
        r.status = "infeasible".into();
        assert!(matches!(render_svgs(&[r]), Err(BenchError::EmptyPlot(_))));
    }
}
