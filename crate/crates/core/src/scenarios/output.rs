//! CSV and SVG writers.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point2;

use super::sim::TrajectoryLog;
use super::tradeoff::TradeoffReport;
use super::ScenarioError;

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros dropped,
/// exponent form outside `[1e-4, 1e12)`.
pub fn fmt_g12(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn log_csv_header(n_x: usize, n_u: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n_x).map(|i| format!("x{i}")));
    cols.push("b".into());
    cols.extend((1..=n_u).map(|i| format!("ud{i}")));
    cols.extend((1..=n_u).map(|i| format!("u{i}")));
    for c in [
        "modified",
        "active_count",
        "d_sampled",
        "d_oracle",
        "qp_time_s",
        "assemble_time_s",
    ] {
        cols.push(c.into());
    }
    cols.join(",")
}

pub fn log_to_csv(log: &TrajectoryLog) -> String {
    let n_x = log.records.first().map_or(0, |r| r.x.len());
    let n_u = log.records.first().map_or(0, |r| r.u_d.len());
    let mut out = log_csv_header(n_x, n_u);
    out.push('\n');
    for r in &log.records {
        let mut fields = vec![fmt_g12(r.t)];
        fields.extend(r.x.iter().map(|v| fmt_g12(*v)));
        fields.push(fmt_g12(r.b));
        fields.extend(r.u_d.iter().map(|v| fmt_g12(*v)));
        fields.extend(r.u_star.iter().map(|v| fmt_g12(*v)));
        fields.push(u8::from(r.modified).to_string());
        fields.push(r.active_count.to_string());
        fields.push(fmt_g12(r.d_sampled));
        fields.push(fmt_g12(r.d_oracle.unwrap_or(f64::NAN)));
        fields.push(fmt_g12(r.qp_time.as_secs_f64()));
        fields.push(fmt_g12(r.assemble_time.as_secs_f64()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_csv(log: &TrajectoryLog, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    std::fs::write(path, log_to_csv(log))?;
    Ok(())
}

pub fn tradeoff_to_csv(report: &TradeoffReport) -> String {
    let mut out = String::from(
        "n_samples,epsilon,min_sampled_distance_at_deadlock,mean_qp_time_s,mean_filter_time_s\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n_samples,
            fmt_g12(r.epsilon),
            fmt_g12(r.min_sampled_distance_at_deadlock),
            fmt_g12(r.mean_qp_time_s),
            fmt_g12(r.mean_filter_time_s)
        );
    }
    out
}

pub fn emit_tradeoff_csv(
    report: &TradeoffReport,
    path: impl AsRef<Path>,
) -> Result<(), ScenarioError> {
    std::fs::write(path, tradeoff_to_csv(report))?;
    Ok(())
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn new(x0: f64, y0: f64, w: f64, h: f64, xs: (f64, f64), ys: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (xmin, xmax) = pad(xs);
        let (ymin, ymax) = pad(ys);
        Self {
            x0,
            y0,
            w,
            h,
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w,
            self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h,
        )
    }

    fn polyline(&self, pts: impl Iterator<Item = (f64, f64)>, color: &str, closed: bool) -> String {
        let coords: Vec<String> = pts
            .map(|(x, y)| {
                let (px, py) = self.map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let tag = if closed { "polygon" } else { "polyline" };
        format!(
            "<{tag} fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" points=\"{}\"/>\n",
            coords.join(" ")
        )
    }

    fn border(&self, title: &str) -> String {
        format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\">{title}</text>\n",
            self.x0,
            self.y0,
            self.w,
            self.h,
            self.x0,
            self.y0 - 6.0
        )
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// Three panels: `b(t)`, nominal and filtered inputs, and the overhead path
/// with obstacle outlines. Inputs are drawn as one `polyline` per filtered
/// coordinate and dashed `path`s for the nominal ones.
pub fn log_to_svg(log: &TrajectoryLog) -> String {
    let recs = &log.records;
    let t_range = range(recs.iter().map(|r| r.t));
    let mut body = String::new();

    let f1 = Frame::new(
        MARGIN,
        MARGIN,
        PANEL_W,
        PANEL_H,
        t_range,
        range(recs.iter().map(|r| r.b).chain([0.0])),
    );
    body.push_str(&f1.border("barrier b(t)"));
    body.push_str(&f1.polyline(recs.iter().map(|r| (r.t, r.b)), COLORS[0], false));
    let (zx0, zy) = f1.map(t_range.0, 0.0);
    let (zx1, _) = f1.map(t_range.1, 0.0);
    let _ = writeln!(
        body,
        "<line x1=\"{zx0:.2}\" y1=\"{zy:.2}\" x2=\"{zx1:.2}\" y2=\"{zy:.2}\" stroke=\"#000\" stroke-dasharray=\"4 3\"/>"
    );

    let n_u = recs.first().map_or(0, |r| r.u_star.len());
    let u_range = range(
        recs.iter()
            .flat_map(|r| r.u_star.iter().chain(r.u_d.iter()).copied()),
    );
    let y2 = MARGIN * 2.0 + PANEL_H;
    let f2 = Frame::new(MARGIN, y2, PANEL_W, PANEL_H, t_range, u_range);
    body.push_str(&f2.border("inputs: u* solid, u_d dashed"));
    for i in 0..n_u {
        let color = COLORS[i % COLORS.len()];
        body.push_str(&f2.polyline(recs.iter().map(|r| (r.t, r.u_star[i])), color, false));
        let d: Vec<String> = recs
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let (px, py) = f2.map(r.t, r.u_d[i]);
                format!("{}{px:.2},{py:.2}", if k == 0 { "M" } else { "L" })
            })
            .collect();
        let _ = writeln!(
            body,
            "<path fill=\"none\" stroke=\"{color}\" stroke-dasharray=\"3 3\" d=\"{}\"/>",
            d.join(" ")
        );
    }

    let [ix, iy] = log.position_indices;
    let all: Vec<Point2<f64>> = log
        .outlines
        .iter()
        .flatten()
        .copied()
        .chain(recs.iter().map(|r| Point2::new(r.x[ix], r.x[iy])))
        .collect();
    let xr = range(all.iter().map(|p| p.x));
    let yr = range(all.iter().map(|p| p.y));
    let side = (xr.1 - xr.0).max(yr.1 - yr.0);
    let y3 = y2 + PANEL_H + MARGIN;
    let f3 = Frame::new(
        MARGIN,
        y3,
        PANEL_H * 2.0,
        PANEL_H * 2.0,
        (xr.0, xr.0 + side),
        (yr.0, yr.0 + side),
    );
    body.push_str(&f3.border("overhead view"));
    for outline in &log.outlines {
        body.push_str(&f3.polyline(outline.iter().map(|p| (p.x, p.y)), "#444", true));
    }
    let _ = writeln!(
        body,
        "<path fill=\"none\" stroke=\"{}\" d=\"{}\"/>",
        COLORS[1],
        recs.iter()
            .enumerate()
            .map(|(k, r)| {
                let (px, py) = f3.map(r.x[ix], r.x[iy]);
                format!("{}{px:.2},{py:.2}", if k == 0 { "M" } else { "L" })
            })
            .collect::<Vec<_>>()
            .join(" ")
    );

    let height = y3 + PANEL_H * 2.0 + MARGIN;
    let width = PANEL_W + 2.0 * MARGIN;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n{body}</svg>\n"
    )
}

pub fn emit_svg_plot(log: &TrajectoryLog, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    std::fs::write(path, log_to_svg(log))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_matches_printf() {
        assert_eq!(fmt_g12(0.0), "0");
        assert_eq!(fmt_g12(1.0), "1");
        assert_eq!(fmt_g12(-2.5), "-2.5");
        assert_eq!(fmt_g12(0.1), "0.1");
        assert_eq!(fmt_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g12(123456.789), "123456.789");
        assert_eq!(fmt_g12(1e-5), "1e-05");
        assert_eq!(fmt_g12(1.5e-7), "1.5e-07");
        assert_eq!(fmt_g12(0.0001), "0.0001");
        assert_eq!(fmt_g12(1e12), "1e+12");
        assert_eq!(fmt_g12(999999999999.0), "999999999999");
        assert_eq!(fmt_g12(9.9999999999999e-5), "0.0001");
        assert_eq!(fmt_g12(f64::NAN), "NaN");
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            log_csv_header(2, 1),
            "t,x1,x2,b,ud1,u1,modified,active_count,d_sampled,d_oracle,qp_time_s,assemble_time_s"
        );
    }
}
