//! PSNR-versus-step line chart as a standalone SVG document.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::PsnrReport;
use crate::upscale::UpscaleMethod;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 90.0;

const BAND_COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn dash(method: UpscaleMethod) -> &'static str {
    match method {
        UpscaleMethod::Bilinear => "2,4",
        UpscaleMethod::Bicubic => "8,4",
        UpscaleMethod::Srcnn => "none",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One polyline per (band, method) with at least one finite value; rows
/// with infinite PSNR are listed in an annotation instead of plotted.
pub fn render_psnr_svg(report: &PsnrReport) -> Result<String> {
    if report.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot plot an empty PSNR report".into(),
        ));
    }
    let mut bands: Vec<&str> = Vec::new();
    for row in report.rows() {
        if !bands.contains(&row.band_id.as_str()) {
            bands.push(&row.band_id);
        }
    }
    let methods: BTreeSet<UpscaleMethod> = report.rows().iter().map(|r| r.method).collect();
    let finite: Vec<f64> = report
        .rows()
        .iter()
        .map(|r| r.psnr_db)
        .filter(|v| v.is_finite())
        .collect();
    let max_step = report.rows().iter().map(|r| r.step).max().unwrap_or(1);

    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if finite.is_empty() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |step: usize| {
        if max_step == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * (step - 1) as f64 / (max_step - 1) as f64
        }
    };
    let y_of = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">PSNR per upscaling step</text>"#,
        LEFT + plot_w / 2.0
    )
    .unwrap();

    // Axes, ticks and labels.
    writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{0}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w
    )
    .unwrap();
    for step in 1..=max_step {
        let x = x_of(step);
        writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{step}</text>"#,
            TOP + plot_h + 18.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">step</text>"#,
        LEFT + plot_w / 2.0,
        TOP + plot_h + 36.0
    )
    .unwrap();
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let y = y_of(v);
        writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#,
            LEFT - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">PSNR (dB)</text>"#,
        TOP + plot_h / 2.0
    )
    .unwrap();

    // Curves.
    let mut infinite = Vec::new();
    for (b, band) in bands.iter().enumerate() {
        let color = BAND_COLORS[b % BAND_COLORS.len()];
        for &method in &methods {
            let series = report.series(band, method);
            for &(step, _) in series.iter().filter(|(_, v)| v.is_infinite()) {
                infinite.push(format!("{} {} step {}", band, method, step));
            }
            let points: Vec<String> = series
                .iter()
                .filter(|(_, v)| v.is_finite())
                .map(|&(step, v)| format!("{:.1},{:.1}", x_of(step), y_of(v)))
                .collect();
            if points.is_empty() {
                continue;
            }
            writeln!(
                svg,
                r#"<polyline class="curve" data-band="{}" data-method="{method}" points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{}"/>"#,
                escape(band),
                points.join(" "),
                dash(method)
            )
            .unwrap();
            for p in &points {
                let (x, y) = p.split_once(',').expect("formatted point");
                writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#).unwrap();
            }
        }
    }

    // Legend: bands by color, methods by dash pattern.
    let lx = LEFT + plot_w + 20.0;
    let mut ly = TOP + 10.0;
    writeln!(
        svg,
        r#"<text x="{lx}" y="{ly}" font-weight="bold">band</text>"#
    )
    .unwrap();
    for (b, band) in bands.iter().enumerate() {
        ly += 18.0;
        let color = BAND_COLORS[b % BAND_COLORS.len()];
        writeln!(svg, r#"<line x1="{lx}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="{color}" stroke-width="3"/>"#, ly - 4.0, lx + 24.0).unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{ly}">{}</text>"#,
            lx + 30.0,
            escape(band)
        )
        .unwrap();
    }
    ly += 28.0;
    writeln!(
        svg,
        r#"<text x="{lx}" y="{ly}" font-weight="bold">method</text>"#
    )
    .unwrap();
    for &method in &methods {
        ly += 18.0;
        writeln!(
            svg,
            r#"<line class="legend-method" x1="{lx}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="black" stroke-width="2" stroke-dasharray="{2}"/>"#,
            ly - 4.0,
            lx + 24.0,
            dash(method)
        )
        .unwrap();
        writeln!(svg, r#"<text x="{}" y="{ly}">{method}</text>"#, lx + 30.0).unwrap();
    }

    if !infinite.is_empty() {
        let text = format!(
            "identical images (PSNR = inf, not plotted): {}",
            infinite.join("; ")
        );
        writeln!(
            svg,
            r#"<text class="annotation" x="{LEFT}" y="{:.1}" font-size="11">{}</text>"#,
            HEIGHT - 20.0,
            escape(&text)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_psnr_plot(report: &PsnrReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = render_psnr_svg(report)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::PsnrRow;

    fn report(methods: &[UpscaleMethod], value: impl Fn(usize, usize) -> f64) -> PsnrReport {
        let mut r = PsnrReport::new();
        for &m in methods {
            for b in 0..6 {
                for step in 1..=3 {
                    r.push(PsnrRow {
                        band_id: format!("B{b}"),
                        method: m,
                        step,
                        psnr_db: value(b, step),
                    })
                    .unwrap();
                }
            }
        }
        r
    }

    fn curves(svg: &str) -> usize {
        svg.matches(r#"class="curve""#).count()
    }

    #[test]
    fn one_curve_per_band() {
        let svg = render_psnr_svg(&report(&[UpscaleMethod::Bicubic], |b, s| {
            30.0 + b as f64 + s as f64
        }))
        .unwrap();
        assert_eq!(curves(&svg), 6);
        assert!(!svg.contains("annotation"));
    }

    #[test]
    fn two_methods_twelve_curves_with_legend() {
        let svg = render_psnr_svg(&report(
            &[UpscaleMethod::Bicubic, UpscaleMethod::Srcnn],
            |_, s| 30.0 + s as f64,
        ))
        .unwrap();
        assert_eq!(curves(&svg), 12);
        assert_eq!(svg.matches("legend-method").count(), 2);
    }

    #[test]
    fn all_infinite_rows_annotated() {
        let svg =
            render_psnr_svg(&report(&[UpscaleMethod::Bilinear], |_, _| f64::INFINITY)).unwrap();
        assert_eq!(curves(&svg), 0);
        assert!(svg.contains("PSNR = inf"));
        assert!(svg.contains("B5 bilinear step 3"));
    }

    #[test]
    fn empty_report_rejected() {
        assert!(render_psnr_svg(&PsnrReport::new()).is_err());
    }
}
