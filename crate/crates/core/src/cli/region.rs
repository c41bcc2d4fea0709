//! `kf region`: sampled section images as CSV and an optional SVG scatter.

use std::fmt::Write as _;
use std::path::Path as FsPath;

use serde::Serialize;

use super::{write_file, CliError, EXIT_FAIL, EXIT_PASS};
use crate::bloch::BlochVector3;
use crate::sampler::{sample_region, ChannelKind, RegionPoint, RegionRequest, SamplerError};

pub const CSV_HEADER: &str = "sample,m1,m2,m3,m4,m5,m6,m7,m8,cond1,cond2,cond3,cond4,margin1,margin2,margin3,margin4";

#[derive(Clone, Debug, PartialEq)]
pub struct RegionArgs {
    /// 1-based coordinates as given on the command line.
    pub section: (usize, usize),
    pub ti: f64,
    pub tj: f64,
    pub kind: ChannelKind,
    pub n: usize,
    pub seed: u64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub section: [usize; 2],
    pub t: [f64; 8],
    pub kind: String,
    pub seed: u64,
    pub n_samples: usize,
    pub initial_physical: bool,
    pub min: [f64; 8],
    pub max: [f64; 8],
    /// Violations per condition; condition 2 is advisory and never fails
    /// the command.
    pub violations: [usize; 4],
    pub retries: usize,
}

pub fn parse_section(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--section expects two distinct indices i,j in 1..=8, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let i: usize = a.trim().parse().map_err(|_| bad())?;
    let j: usize = b.trim().parse().map_err(|_| bad())?;
    if i == j || !(1..=8).contains(&i) || !(1..=8).contains(&j) {
        return Err(bad());
    }
    Ok((i, j))
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_csv(points: &[RegionPoint]) -> String {
    let mut out = String::with_capacity(64 + points.len() * 400);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in points {
        write!(out, "{}", p.index).unwrap();
        for x in p.m.t {
            write!(out, ",{}", fmt_f(x)).unwrap();
        }
        for r in &p.report.records {
            out.push(',');
            if r.applicable {
                out.push(if r.satisfied { '1' } else { '0' });
            }
        }
        for r in &p.report.records {
            out.push(',');
            if r.applicable {
                out.push_str(&fmt_f(r.margin));
            }
        }
        out.push('\n');
    }
    out
}

const SIZE: f64 = 480.0;
const PAD: f64 = 48.0;

/// Scatter of `(m_a, m_b)` for the section `a < b`, with the bound that
/// applies to it drawn on top.
pub fn region_svg(points: &[RegionPoint], t: &BlochVector3, (a, b): (usize, usize)) -> String {
    let s3 = 3f64.sqrt();
    let (ta, tb) = (t.get(a).abs(), t.get(b).abs());
    let coherence = [(1, 4), (2, 5), (3, 6)].contains(&(a, b));
    let interval = |k: usize| if k == 7 { ((1.0 - s3) / 3.0, 2.0 / s3) } else { (-2.0 * s3 / 3.0, 2.0 * s3 / 3.0) };

    let mut xs: Vec<f64> = points.iter().map(|p| p.m.get(a)).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.m.get(b)).collect();
    enum Shape {
        Box(f64, f64, f64, f64),
        Disk(f64),
        Diamond(f64),
        Line,
    }
    let shape = if a <= 6 && b >= 7 {
        let (lo, hi) = interval(b);
        Shape::Box(-ta, ta, lo, hi)
    } else if (a, b) == (7, 8) {
        Shape::Line
    } else if coherence {
        Shape::Disk(ta.hypot(tb))
    } else {
        Shape::Diamond(ta + tb)
    };
    match shape {
        Shape::Box(x0, x1, y0, y1) => {
            xs.extend([x0, x1]);
            ys.extend([y0, y1]);
        }
        Shape::Disk(r) | Shape::Diamond(r) => {
            xs.extend([-r, r]);
            ys.extend([-r, r]);
        }
        Shape::Line => {}
    }
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || hi - lo < 1e-9 {
            let c = if lo.is_finite() { 0.5 * (lo + hi) } else { 0.0 };
            (c - 0.5, c + 0.5)
        } else {
            let m = 0.05 * (hi - lo);
            (lo - m, hi + m)
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let inner = SIZE - 2.0 * PAD;
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * inner;
    let py = |y: f64| SIZE - PAD - (y - y0) / (y1 - y0) * inner;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{inner}" height="{inner}" fill="none" stroke="black" stroke-width="1"/>"#
    )
    .unwrap();
    if x0 < 0.0 && x1 > 0.0 {
        writeln!(svg, r##"<line x1="{0:.2}" y1="{PAD}" x2="{0:.2}" y2="{1}" stroke="#bbb"/>"##, px(0.0), SIZE - PAD).unwrap();
    }
    if y0 < 0.0 && y1 > 0.0 {
        writeln!(svg, r##"<line x1="{PAD}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#bbb"/>"##, py(0.0), SIZE - PAD).unwrap();
    }
    writeln!(svg, r##"<g fill="#1f5fa8" fill-opacity="0.45">"##).unwrap();
    for (x, y) in xs.iter().zip(&ys).take(points.len()) {
        writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, px(*x), py(*y)).unwrap();
    }
    writeln!(svg, "</g>").unwrap();
    let stroke = r##"fill="none" stroke="#c0392b" stroke-width="1.5""##;
    match shape {
        Shape::Box(bx0, bx1, by0, by1) => {
            writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {stroke}/>"#,
                px(bx0),
                py(by1),
                px(bx1) - px(bx0),
                py(by0) - py(by1)
            )
            .unwrap();
        }
        Shape::Disk(r) => {
            writeln!(
                svg,
                r#"<ellipse cx="{:.2}" cy="{:.2}" rx="{:.2}" ry="{:.2}" {stroke}/>"#,
                px(0.0),
                py(0.0),
                px(r) - px(0.0),
                py(0.0) - py(r)
            )
            .unwrap();
        }
        Shape::Diamond(r) => {
            writeln!(
                svg,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" {stroke}/>"#,
                px(r),
                py(0.0),
                px(0.0),
                py(r),
                px(-r),
                py(0.0),
                px(0.0),
                py(-r)
            )
            .unwrap();
        }
        Shape::Line => {
            // −√3 m7 + m8 = 2√3/3, dashed: advisory only.
            let f = |x: f64| s3 * x + 2.0 * s3 / 3.0;
            writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {stroke} stroke-dasharray="6 4"/>"#,
                px(x0),
                py(f(x0)),
                px(x1),
                py(f(x1))
            )
            .unwrap();
        }
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">m{a}</text>"#,
        SIZE / 2.0,
        SIZE - 14.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">m{b}</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="28" font-family="sans-serif" font-size="13" text-anchor="middle">t{a} = {}, t{b} = {}</text>"#,
        SIZE / 2.0,
        t.get(a),
        t.get(b)
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

pub fn cmd_region(args: &RegionArgs, csv: &FsPath, svg: Option<&FsPath>) -> Result<(RegionReport, i32), CliError> {
    let (i, j) = args.section;
    let t = BlochVector3::section(i, args.ti, j, args.tj);
    let req = RegionRequest {
        t,
        n_samples: args.n,
        kind: args.kind,
        seed: args.seed,
    };
    let region = sample_region(&req).map_err(|e| match e {
        SamplerError::InvalidRequest(m) => CliError::Usage(m),
        other => CliError::Usage(other.to_string()),
    })?;
    write_file(csv, &format_csv(&region.points))?;
    if let Some(path) = svg {
        write_file(path, &region_svg(&region.points, &t, (i.min(j), i.max(j))))?;
    }
    let s = &region.summary;
    let report = RegionReport {
        section: [i, j],
        t: t.t,
        kind: match args.kind {
            ChannelKind::Sio => "sio",
            ChannelKind::Io => "io",
        }
        .into(),
        seed: args.seed,
        n_samples: s.n_samples,
        initial_physical: s.initial_physical,
        min: s.min,
        max: s.max,
        violations: s.violations,
        retries: s.retries,
    };
    let failed = [0, 2, 3].iter().any(|&k| s.violations[k] > 0);
    Ok((report, if failed { EXIT_FAIL } else { EXIT_PASS }))
}
