//! Standalone SVG plots of a finished run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fabric::kinematics::PlanarArm;
use fabric::sim::config::PlotStyle;
use fabric::Vector;

use crate::export::{parse_csv, CsvTable, Manifest};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
];

/// Data-to-pixel transform of one axes box.
#[derive(Debug, Clone, Copy)]
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn scale(&self) -> f64 {
        self.width / (self.x.1 - self.x.0)
    }

    fn clip_id(&self) -> String {
        format!("clip{}_{}", self.left as i64, self.top as i64)
    }
}

struct Svg {
    width: f64,
    height: f64,
    defs: String,
    body: String,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            defs: String::new(),
            body: String::new(),
        }
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        )
        .unwrap();
    }

    fn polyline(&mut self, f: &Frame, pts: &[[f64; 2]], color: &str, width: f64, opacity: f64) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for p in pts {
            write!(d, "{:.2},{:.2} ", f.px(p[0]), f.py(p[1])).unwrap();
        }
        writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity:.3}" clip-path="url(#{})"/>"#,
            d.trim_end(),
            f.clip_id()
        )
        .unwrap();
    }

    fn circle(&mut self, f: &Frame, c: [f64; 2], r_px: f64, style: &str) {
        writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r_px:.2}" {style} clip-path="url(#{})"/>"#,
            f.px(c[0]),
            f.py(c[1]),
            f.clip_id()
        )
        .unwrap();
    }

    fn cross(&mut self, f: &Frame, c: [f64; 2], color: &str) {
        let (x, y) = (f.px(c[0]), f.py(c[1]));
        writeln!(
            self.body,
            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="{color}" stroke-width="2"/>"#,
            x - 5.0,
            y - 5.0,
            x + 5.0,
            y + 5.0,
            x - 5.0,
            y + 5.0,
            x + 5.0,
            y - 5.0
        )
        .unwrap();
    }

    /// Box, ticks and labels of `f`.
    fn axes(&mut self, f: &Frame, xlabel: &str, ylabel: &str) {
        writeln!(
            self.defs,
            r#"<clipPath id="{}"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath>"#,
            f.clip_id(),
            f.left,
            f.top,
            f.width,
            f.height
        )
        .unwrap();
        writeln!(
            self.body,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
            f.left, f.top, f.width, f.height
        )
        .unwrap();
        let step = nice_step(f.x.1 - f.x.0);
        for t in ticks(f.x.0, f.x.1) {
            let x = f.px(t);
            let y = f.top + f.height;
            writeln!(self.body, r##"<line x1="{x:.2}" y1="{y:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##, y + 4.0).unwrap();
            self.text(x, y + 15.0, 10.0, "middle", &tick_label(t, step));
        }
        let step = nice_step(f.y.1 - f.y.0);
        for t in ticks(f.y.0, f.y.1) {
            let y = f.py(t);
            writeln!(
                self.body,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#333"/>"##,
                f.left - 4.0,
                f.left
            )
            .unwrap();
            self.text(f.left - 6.0, y + 3.5, 10.0, "end", &tick_label(t, step));
        }
        self.text(f.left + f.width / 2.0, f.top + f.height + 30.0, 11.0, "middle", xlabel);
        let (lx, ly) = (f.left - 42.0, f.top + f.height / 2.0);
        writeln!(
            self.body,
            r#"<text x="{lx:.2}" y="{ly:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
            escape(ylabel)
        )
        .unwrap();
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n\
             <defs>\n{defs}</defs>\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            defs = self.defs,
            body = self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    mag * if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn tick_label(t: f64, step: f64) -> String {
    if t != 0.0 && (t.abs() < 1e-3 || t.abs() >= 1e5) {
        return format!("{t:.1e}");
    }
    let decimals = (-step.log10().floor()).clamp(0.0, 12.0) as usize;
    let s = format!("{t:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Padded range covering `values`.
fn range(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    let m = if span > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        pad * span
    } else {
        0.5 * (1.0 + lo.abs()) * 1e-3
    };
    (lo - m, hi + m)
}

/// Equal-aspect ranges inside a `w × h` box.
fn square_ranges(x: (f64, f64), y: (f64, f64), w: f64, h: f64) -> ((f64, f64), (f64, f64)) {
    let s = ((x.1 - x.0) / w).max((y.1 - y.0) / h);
    let (cx, cy) = ((x.0 + x.1) / 2.0, (y.0 + y.1) / 2.0);
    ((cx - s * w / 2.0, cx + s * w / 2.0), (cy - s * h / 2.0, cy + s * h / 2.0))
}

fn load_tables(dir: &Path, m: &Manifest) -> Result<Vec<(String, CsvTable)>, String> {
    m.rollouts
        .iter()
        .map(|r| {
            let file = r.csv.as_ref().ok_or_else(|| format!("rollout {} has no csv (output.csv = false)", r.label))?;
            let path = dir.join(file);
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            Ok((r.label.clone(), parse_csv(&text).map_err(|e| format!("{}: {e}", path.display()))?))
        })
        .collect()
}

fn positions(t: &CsvTable) -> Vec<Vector> {
    let dim = t.header.iter().filter(|h| h.starts_with('q') && !h.starts_with("qd")).count();
    t.rows.iter().map(|r| Vector::from_column_slice(&r[1..1 + dim])).collect()
}

fn arm_of(m: &Manifest) -> Option<PlanarArm> {
    let links = m.overlay.arm.clone()?;
    let n = links.len();
    PlanarArm::new(links, vec![(-1.0, 1.0); n], vec![0.0; n]).ok()
}

/// Drawn 2-D path of a rollout: positions, or end-effector points for arms.
fn plane_path(t: &CsvTable, arm: Option<&PlanarArm>) -> Result<Vec<[f64; 2]>, String> {
    positions(t)
        .iter()
        .map(|q| match arm {
            Some(a) => {
                let ee = a.fk(q).map_err(|e| e.to_string())?.ee;
                Ok([ee[0], ee[1]])
            }
            None if q.len() == 2 => Ok([q[0], q[1]]),
            None => Err(format!("paths style needs 2-D positions, found dimension {}", q.len())),
        })
        .collect()
}

/// Writes the SVG(s) of `style` into `dir` and returns their paths.
pub fn plot_run(dir: &Path, m: &Manifest, style: PlotStyle) -> Result<Vec<PathBuf>, String> {
    let svg = match style {
        PlotStyle::Paths => paths_svg(dir, m)?,
        PlotStyle::ArmFrames => arm_frames_svg(dir, m)?,
        PlotStyle::EnergyTrace => energy_trace_svg(dir, m)?,
    };
    let tag = match style {
        PlotStyle::Paths => "paths",
        PlotStyle::ArmFrames => "arm_frames",
        PlotStyle::EnergyTrace => "energy_trace",
    };
    let path = dir.join(format!("{}_{tag}.svg", m.name));
    std::fs::write(&path, svg).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(vec![path])
}

/// Particle paths over obstacle, limit, vortex, floor and target overlays.
pub fn paths_svg(dir: &Path, m: &Manifest) -> Result<String, String> {
    let tables = load_tables(dir, m)?;
    let arm = arm_of(m);
    let paths: Vec<Vec<[f64; 2]>> = tables.iter().map(|(_, t)| plane_path(t, arm.as_ref())).collect::<Result<_, _>>()?;
    let o = &m.overlay;
    let mut xs: Vec<f64> = paths.iter().flatten().map(|p| p[0]).collect();
    let mut ys: Vec<f64> = paths.iter().flatten().map(|p| p[1]).collect();
    for c in &o.circles {
        xs.extend([c.center[0] - c.radius, c.center[0] + c.radius]);
        ys.extend([c.center[1] - c.radius, c.center[1] + c.radius]);
    }
    for b in &o.boxes {
        xs.extend([b.lower[0], b.upper[0]]);
        ys.extend([b.lower[1], b.upper[1]]);
    }
    for t in &o.targets {
        xs.push(t[0]);
        ys.push(t[1]);
    }
    if let Some(f) = o.floor {
        ys.push(f);
    }
    let (w, h) = (560.0, 560.0);
    let (xr, yr) = square_ranges(range(xs.into_iter(), 0.06), range(ys.into_iter(), 0.06), w, h);
    let f = Frame {
        left: 70.0,
        top: 40.0,
        width: w,
        height: h,
        x: xr,
        y: yr,
    };
    let mut svg = Svg::new(w + 100.0, h + 90.0);
    svg.axes(&f, "x", "y");
    svg.text(f.left + w / 2.0, 24.0, 14.0, "middle", &format!("{}: paths", m.name));

    for b in &o.boxes {
        writeln!(
            svg.body,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#555" stroke-dasharray="6 4" stroke-width="1.5"/>"##,
            f.px(b.lower[0]),
            f.py(b.upper[1]),
            f.px(b.upper[0]) - f.px(b.lower[0]),
            f.py(b.lower[1]) - f.py(b.upper[1])
        )
        .unwrap();
    }
    for c in &o.circles {
        svg.circle(&f, c.center, c.radius * f.scale(), r##"fill="#bbb" stroke="#444""##);
    }
    for v in &o.vortices {
        let color = if v.clockwise { "#c0392b" } else { "#2471a3" };
        let style = format!(r#"fill="{color}" fill-opacity="0.08" stroke="{color}" stroke-dasharray="3 3""#);
        svg.circle(&f, v.center, v.radius * f.scale(), &style);
        let label = format!("{}{:.1}", if v.clockwise { "cw " } else { "ccw " }, v.strength);
        svg.text(f.px(v.center[0]), f.py(v.center[1]) + 3.5, 9.0, "middle", &label);
    }
    if let Some(fl) = o.floor {
        writeln!(
            svg.body,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#6e4b2a" stroke-width="2"/>"##,
            f.left,
            f.left + w,
            y = f.py(fl)
        )
        .unwrap();
    }
    for (i, p) in paths.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        svg.polyline(&f, p, color, 1.4, 0.9);
        if let Some(s) = p.first() {
            svg.circle(&f, *s, 3.0, &format!(r#"fill="{color}""#));
        }
        if let Some(e) = p.last() {
            svg.circle(&f, *e, 2.5, &format!(r#"fill="white" stroke="{color}""#));
        }
    }
    for t in &o.targets {
        svg.cross(&f, *t, "#000");
    }
    Ok(svg.finish())
}

/// One panel per goal segment with arm poses fading from light to dark.
pub fn arm_frames_svg(dir: &Path, m: &Manifest) -> Result<String, String> {
    let arm = arm_of(m).ok_or("arm_frames style needs an arm experiment")?;
    let tables = load_tables(dir, m)?;
    let reach: f64 = arm.link_lengths.iter().sum();
    let floor = m.overlay.floor;
    let yr = (floor.map_or(-reach, |f| f.min(0.0) - 0.1 * reach), reach * 1.05);
    let xr = (-reach * 1.05, reach * 1.05);
    let panel = 260.0;
    let ((xr, yr), ph) = {
        let ph = panel * (yr.1 - yr.0) / (xr.1 - xr.0);
        ((xr, yr), ph)
    };
    let cols = tables.len().max(1);
    let mut svg = Svg::new(60.0 + cols as f64 * (panel + 50.0), ph + 110.0);
    svg.text(svg.width / 2.0, 22.0, 14.0, "middle", &format!("{}: arm frames", m.name));
    const FRAMES: usize = 12;
    for (i, (label, t)) in tables.iter().enumerate() {
        let f = Frame {
            left: 60.0 + i as f64 * (panel + 50.0),
            top: 50.0,
            width: panel,
            height: ph,
            x: xr,
            y: yr,
        };
        svg.axes(&f, "x", if i == 0 { "y" } else { "" });
        svg.text(f.left + panel / 2.0, f.top - 8.0, 11.0, "middle", label);
        if let Some(fl) = floor {
            svg.polyline(&f, &[[xr.0, fl], [xr.1, fl]], "#6e4b2a", 2.0, 1.0);
        }
        let qs = positions(t);
        let ee: Vec<[f64; 2]> = qs
            .iter()
            .map(|q| arm.fk(q).map(|k| [k.ee[0], k.ee[1]]).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        svg.polyline(&f, &ee, "#d62728", 1.0, 0.8);
        let n = qs.len();
        let picks: Vec<usize> = if n <= FRAMES {
            (0..n).collect()
        } else {
            (0..FRAMES).map(|k| k * (n - 1) / (FRAMES - 1)).collect()
        };
        for (k, &idx) in picks.iter().enumerate() {
            let alpha = 0.12 + 0.88 * k as f64 / (picks.len().max(2) - 1) as f64;
            let joints = arm.joint_positions(&qs[idx]).map_err(|e| e.to_string())?;
            svg.polyline(&f, &joints, "#1f3b73", 2.2, alpha);
        }
        if let Some(g) = m.overlay.targets.get(i) {
            svg.cross(&f, *g, "#2ca02c");
        }
        svg.circle(&f, [0.0, 0.0], 3.0, r##"fill="#333""##);
    }
    Ok(svg.finish())
}

/// Drift of `H_e` against its first sample, as in the run summary.
fn relative_drift(h: &[f64]) -> f64 {
    let Some(&h0) = h.first() else {
        return 0.0;
    };
    h.iter().map(|x| (x - h0).abs()).fold(0.0, f64::max) / h0.abs()
}

/// `H_e`, `L_ex` and `β`, `η` against time with a drift stats block.
pub fn energy_trace_svg(dir: &Path, m: &Manifest) -> Result<String, String> {
    let tables = load_tables(dir, m)?;
    let series = |name: &str| -> Result<Vec<(Vec<f64>, Vec<f64>)>, String> {
        tables
            .iter()
            .map(|(_, t)| Ok((t.column("t").ok_or("csv lacks t")?, t.column(name).ok_or(format!("csv lacks {name}"))?)))
            .collect()
    };
    let panels = [
        ("H_e", series("H_e")?),
        ("L_ex", series("L_ex")?),
        ("beta", series("beta")?),
        ("eta", series("eta")?),
    ];
    let (w, ph, gap) = (620.0, 150.0, 55.0);
    let stats_w = 250.0;
    let mut svg = Svg::new(80.0 + w + stats_w + 40.0, 50.0 + panels.len() as f64 * (ph + gap) + 10.0);
    svg.text(80.0 + w / 2.0, 24.0, 14.0, "middle", &format!("{}: energy trace", m.name));
    let t_range = range(panels[0].1.iter().flat_map(|(t, _)| t.iter().copied()), 0.0);
    for (k, (name, data)) in panels.iter().enumerate() {
        let f = Frame {
            left: 80.0,
            top: 40.0 + k as f64 * (ph + gap),
            width: w,
            height: ph,
            x: t_range,
            y: range(data.iter().flat_map(|(_, v)| v.iter().copied()), 0.05),
        };
        svg.axes(&f, "t", name);
        for (i, (t, v)) in data.iter().enumerate() {
            let pts: Vec<[f64; 2]> = t.iter().zip(v).filter(|(_, v)| v.is_finite()).map(|(t, v)| [*t, *v]).collect();
            svg.polyline(&f, &pts, PALETTE[i % PALETTE.len()], 1.2, 0.85);
        }
    }
    let drifts: Vec<f64> = panels[0].1.iter().map(|(_, h)| relative_drift(h)).collect();
    let max_drift = drifts.iter().copied().fold(0.0, f64::max);
    let conservative = m.kind != "arm" && m.variant == "unforced";
    let violations = m
        .rollouts
        .iter()
        .filter(|r| r.terminal.get("kind").and_then(|k| k.as_str()) == Some("barrier_violation"))
        .count();
    let mut lines = vec![
        format!("rollouts: {}", m.rollouts.len()),
        format!("variant: {}", m.variant),
        format!("max relative H_e drift: {max_drift:.3e}"),
        format!("barrier violations: {violations}"),
    ];
    if conservative {
        lines.push(format!("drift < 1e-4: {}", if max_drift < 1e-4 { "yes" } else { "no" }));
    }
    for (label, d) in tables.iter().map(|(l, _)| l).zip(&drifts).take(16) {
        lines.push(format!("{label}: {d:.2e}"));
    }
    let x0 = 80.0 + w + 30.0;
    writeln!(
        svg.body,
        r##"<rect x="{x0:.2}" y="40" width="{stats_w}" height="{:.2}" fill="#f7f7f7" stroke="#999"/>"##,
        20.0 + 15.0 * lines.len() as f64
    )
    .unwrap();
    for (i, l) in lines.iter().enumerate() {
        svg.text(x0 + 10.0, 60.0 + 15.0 * i as f64, 11.0, "start", l);
    }
    Ok(svg.finish())
}
