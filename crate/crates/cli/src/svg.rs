//! Minimal static SVG output for phase plots.

use std::fmt::Write;

use filippov::{Domain, Orbit, Point, Regime, RegionKind};

const SIZE: f64 = 640.0;

pub struct Canvas {
    lo: [f64; 2],
    hi: [f64; 2],
    body: String,
}

pub fn regime_color(r: Regime) -> &'static str {
    match r {
        Regime::Plus => "#c0392b",
        Regime::Minus => "#2471a3",
        Regime::Sliding => "#1e8449",
        Regime::Stationary => "#7d3c98",
    }
}

pub fn region_color(k: RegionKind) -> &'static str {
    match k {
        RegionKind::CrossingPositive => "#e67e22",
        RegionKind::CrossingNegative => "#5dade2",
        RegionKind::SlidingStable => "#1e8449",
        RegionKind::SlidingUnstable => "#c0392b",
        RegionKind::Tangency => "#000000",
    }
}

impl Canvas {
    /// Projects onto the first two coordinates of the domain.
    pub fn new(domain: &Domain) -> Self {
        Canvas { lo: [domain.min[0], domain.min[1]], hi: [domain.max[0], domain.max[1]], body: String::new() }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        let sx = (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * SIZE;
        let sy = SIZE - (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]) * SIZE;
        (sx, sy)
    }

    pub fn polyline(&mut self, pts: &[Point], color: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = self.map(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
            coords.join(" ")
        );
    }

    pub fn dot(&mut self, p: Point, color: &str, r: f64) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{color}"/>"#);
    }

    /// Every arc of `orbit`, colored by regime and sampled at `step`.
    pub fn orbit(&mut self, orbit: &Orbit, step: f64) {
        for arc in orbit.arcs() {
            let n = (((arc.t_end() - arc.t_start()) / step).ceil() as usize).max(1);
            let pts: Vec<Point> = (0..=n)
                .map(|k| arc.eval(arc.t_start() + (arc.t_end() - arc.t_start()) * k as f64 / n as f64))
                .collect();
            self.polyline(&pts, regime_color(arc.regime), 1.5);
        }
        self.dot(orbit.eval(0.0), "#000000", 3.0);
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}
