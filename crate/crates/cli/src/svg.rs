//! Tiny SVG writer. Coordinates are printed with three decimals so output
//! bytes depend only on the data.

use std::fmt::Write;

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

fn f(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.body, "<!-- {} -->", text.replace("--", "- -"));
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="{stroke}"/>"#,
            f(x),
            f(y),
            f(w),
            f(h)
        );
    }

    pub fn bar(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" fill-opacity="{}"/>"#,
            f(x),
            f(y),
            f(w),
            f(h),
            f(opacity)
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="{}" fill="{fill}" fill-opacity="{}"/>"#,
            f(x),
            f(y),
            f(r),
            f(opacity)
        );
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64, dashed: bool) {
        let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="{}"{dash}/>"#,
            f(a.0),
            f(a.1),
            f(b.0),
            f(b.1),
            f(width)
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", f(*x), f(*y))).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{}"/>"#,
            pts.join(" "),
            f(width)
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{}" text-anchor="{anchor}">{}</text>"#,
            f(x),
            f(y),
            f(size),
            escape(text)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = f(self.width),
            h = f(self.height)
        )
    }
}

/// Maps a data rectangle onto a pixel panel (y axis pointing up).
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Frame {
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = self.left + (x - self.x_min) / (self.x_max - self.x_min) * self.width;
        let py = self.top + self.height - (y - self.y_min) / (self.y_max - self.y_min) * self.height;
        (px, py)
    }

    pub fn draw_axes(&self, svg: &mut Svg, title: &str, x_label: &str, y_label: &str) {
        svg.rect(self.left, self.top, self.width, self.height, "none", "#444");
        svg.text(self.left + self.width / 2.0, self.top - 8.0, 13.0, "middle", title);
        svg.text(self.left + self.width / 2.0, self.top + self.height + 28.0, 11.0, "middle", x_label);
        svg.text(self.left - 30.0, self.top + self.height / 2.0, 11.0, "middle", y_label);
        for (v, anchor_x, anchor_y, anchor) in [
            (self.x_min, self.left, self.top + self.height + 14.0, "start"),
            (self.x_max, self.left + self.width, self.top + self.height + 14.0, "end"),
        ] {
            svg.text(anchor_x, anchor_y, 9.0, anchor, &format!("{v:.2}"));
        }
        svg.text(self.left - 4.0, self.top + self.height, 9.0, "end", &format!("{:.2}", self.y_min));
        svg.text(self.left - 4.0, self.top + 9.0, 9.0, "end", &format!("{:.2}", self.y_max));
    }
}

pub const CLASS_COLORS: [&str; 2] = ["#1f77b4", "#d62728"];
