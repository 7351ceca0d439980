//! Plan documents and SVG rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};
use crate::geometry::Point;
use crate::grouping::Grouping;
use crate::scenario::{BatchRow, FapPlan, Plan, Scenario, Totals};
use crate::trajectory::TrajectoryKind;

/// Version of the plan document layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario: Scenario,
    pub grouping: Grouping,
    pub faps: Vec<FapPlan>,
    pub totals: Totals,
    pub warnings: Vec<String>,
}

impl PlanDocument {
    pub fn new(scenario: &Scenario, plan: Plan) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: scenario.clone(),
            grouping: plan.grouping,
            faps: plan.faps,
            totals: plan.totals,
            warnings: plan.warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(PlanError::Parse(format!(
                "unsupported plan schema version {}",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    /// Recomputes the totals from the per-FAP entries.
    pub fn recomputed_totals(&self) -> Totals {
        let hover = self.faps.first().map_or(0.0, |f| f.hover_baseline_energy);
        Totals::from_plans(&self.faps, hover)
    }
}

/// Machine-readable description of a failed plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub status: String,
    pub label: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gu: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offered_load: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
}

impl Diagnostic {
    pub fn from_error(label: &str, err: &PlanError) -> Self {
        let mut d = Self {
            status: if err.is_infeasible() { "infeasible" } else { "error" }.to_string(),
            label: label.to_string(),
            message: err.to_string(),
            gu: None,
            offered_load: None,
            group: None,
        };
        let mut e = err;
        while let PlanError::Scenario { source, .. } = e {
            e = source;
        }
        match *e {
            PlanError::InfeasibleDemand { gu, load } | PlanError::CapacityInfeasible { gu, load, .. } => {
                d.gu = Some(gu);
                d.offered_load = Some(load);
            }
            PlanError::EmptyRegion { group } => d.group = Some(group),
            _ => {}
        }
        d
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
    margin: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = Point>, size: f64, margin: f64) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        if !x0.is_finite() {
            (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-9);
        Self {
            min_x: x0,
            max_y: y1,
            scale: (size - 2.0 * margin) / span,
            margin,
        }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (
            self.margin + (p.x - self.min_x) * self.scale,
            self.margin + (self.max_y - p.y) * self.scale,
        )
    }
}

/// Top view of users, regions and chosen trajectories.
pub fn plan_svg(doc: &PlanDocument) -> String {
    let size = 800.0;
    let (w, h) = doc.scenario.area;
    let corners = [Point::new(0.0, 0.0), Point::new(w, h)];
    let frame = Frame::fit(
        corners
            .into_iter()
            .chain(doc.scenario.gus.iter().map(|u| Point::new(u.x, u.y)))
            .chain(doc.faps.iter().flat_map(|f| f.region.perimeter.iter().copied()))
            .chain(doc.faps.iter().flat_map(|f| f.chosen.polyline.iter().copied())),
        size,
        20.0,
    );
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let (ax, ay) = frame.map(Point::new(0.0, h));
    let _ = writeln!(
        s,
        r##"<rect x="{ax:.2}" y="{ay:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#888888" stroke-dasharray="4 3"/>"##,
        w * frame.scale,
        h * frame.scale
    );
    for f in &doc.faps {
        let color = PALETTE[f.group_id % PALETTE.len()];
        let _ = writeln!(s, r#"<g id="group-{}">"#, f.group_id);
        for p in &f.region.perimeter {
            let (x, y) = frame.map(*p);
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="0.8" fill="{color}" fill-opacity="0.5"/>"#
            );
        }
        if f.chosen.kind == TrajectoryKind::Hover {
            let (x, y) = frame.map(f.chosen.center);
            let _ = writeln!(
                s,
                r#"<path d="M {:.2} {:.2} L {:.2} {:.2} M {:.2} {:.2} L {:.2} {:.2}" stroke="{color}" stroke-width="2"/>"#,
                x - 5.0,
                y - 5.0,
                x + 5.0,
                y + 5.0,
                x - 5.0,
                y + 5.0,
                x + 5.0,
                y - 5.0
            );
        } else {
            let pts: Vec<String> = f
                .chosen
                .polyline
                .iter()
                .map(|p| {
                    let (x, y) = frame.map(*p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        let (x, y) = frame.map(f.region.hover_point);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">FAP {} ({})</text>"#,
            x + 6.0,
            y - 6.0,
            f.group_id,
            f.chosen.kind
        );
        let _ = writeln!(s, "</g>");
    }
    for (i, u) in doc.scenario.gus.iter().enumerate() {
        let (x, y) = frame.map(Point::new(u.x, u.y));
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#000000"/>"##);
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" fill="#000000">GU{i}</text>"##,
            x + 5.0,
            y + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Empirical CDF of batch energy ratios.
pub fn cdf_svg(rows: &[BatchRow]) -> String {
    let (width, height, m) = (640.0, 420.0, 50.0);
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.energy_ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let lo = ratios.first().copied().unwrap_or(0.0).min(0.5);
    let hi = 1.0f64.max(ratios.last().copied().unwrap_or(1.0));
    let sx = |v: f64| m + (v - lo) / (hi - lo) * (width - 2.0 * m);
    let sy = |p: f64| height - m - p * (height - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<path d="M {m} {} L {} {} M {m} {} L {m} {m}" stroke="#000000"/>"##,
        height - m,
        width - m,
        height - m,
        height - m
    );
    for k in 0..=5 {
        let v = lo + (hi - lo) * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{v:.2}</text>"#,
            sx(v),
            height - m + 16.0
        );
        let p = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{p:.1}</text>"#,
            m - 6.0,
            sy(p) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">energy ratio</text>"#,
        width / 2.0,
        height - 10.0
    );
    let n = ratios.len().max(1) as f64;
    let mut d = format!("M {:.2} {:.2}", sx(lo), sy(0.0));
    for (i, r) in ratios.iter().enumerate() {
        let _ = write!(
            d,
            " L {:.2} {:.2} L {:.2} {:.2}",
            sx(*r),
            sy(i as f64 / n),
            sx(*r),
            sy((i + 1) as f64 / n)
        );
    }
    let _ = write!(d, " L {:.2} {:.2}", sx(hi), sy(1.0));
    let _ = writeln!(s, r##"<path d="{d}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##);
    s.push_str("</svg>\n");
    s
}
