//! Closed FAP trajectories inside a placement region and their selection.
//!
//! Three shapes are built from the region's hover point, perimeter and
//! farthest perimeter pair: a circle, a stadium inscribed in that circle,
//! and a stadium spanning the farthest pair. Each feasible shape is costed
//! at per-segment optimal speed and compared with hovering.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyParams, Segment, Turn};
use crate::error::{PlanError, Result};
use crate::geometry::{Point, Region};
use crate::rf_link::{self, LinkBudget, McsTable};
use crate::scenario::GroundUser;

/// Smallest turn radius a geometric trajectory may use, m.
pub const MIN_RADIUS: f64 = 1.0;
/// Largest arc length between consecutive waypoints, m.
pub const MAX_WAYPOINT_SPACING: f64 = 1.0;
/// Largest angle between consecutive waypoints on a turn, rad.
const MAX_WAYPOINT_ANGLE: f64 = 0.1;
/// Inner stadium semicircle radius as a fraction of the circle radius.
pub const INNER_RADIUS_FRACTION: f64 = 0.3;
/// Circle radius decrement, as a fraction of the grid step, used when the
/// initial circle crosses the region boundary.
const SHRINK_FRACTION: f64 = 0.1;
/// QoS verification tolerance, dB.
pub const QOS_TOLERANCE_DB: f64 = 1e-6;

/// Trajectory kinds in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Hover,
    Circular,
    InnerElliptic,
    Elliptic,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 4] = [
        TrajectoryKind::Hover,
        TrajectoryKind::Circular,
        TrajectoryKind::InnerElliptic,
        TrajectoryKind::Elliptic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrajectoryKind::Hover => "hover",
            TrajectoryKind::Circular => "circular",
            TrajectoryKind::InnerElliptic => "inner_elliptic",
            TrajectoryKind::Elliptic => "elliptic",
        }
    }
}

impl std::fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub length: f64,
    pub turn: Turn,
    /// Optimal speed for this segment, m/s.
    pub speed: f64,
    /// Propulsion power at that speed, W.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub center: Point,
    pub altitude: f64,
    /// Direction of the straight segments, rad.
    pub orientation: f64,
    /// Semicircle radius; zero for hover.
    pub radius: f64,
    /// Length of each straight segment.
    pub straight_length: f64,
    pub segments: Vec<TrajectorySegment>,
    /// Closed counter-clockwise waypoint list; the last point repeats the first.
    pub polyline: Vec<Point>,
    pub lap_length: f64,
    pub lap_time: f64,
    pub mean_power: f64,
    pub energy_per_hour: f64,
}

impl Trajectory {
    pub fn hover(params: &EnergyParams, center: Point, altitude: f64) -> Self {
        let p = params.hover_power();
        Self {
            kind: TrajectoryKind::Hover,
            center,
            altitude,
            orientation: 0.0,
            radius: 0.0,
            straight_length: 0.0,
            segments: Vec::new(),
            polyline: vec![center],
            lap_length: 0.0,
            lap_time: 0.0,
            mean_power: p,
            energy_per_hour: energy::hover_energy_per_hour(params),
        }
    }

    /// Stadium with semicircle centres `straight / 2` either side of
    /// `center` along `orientation`. A zero straight length gives a circle.
    /// Not yet costed.
    fn stadium(
        kind: TrajectoryKind,
        center: Point,
        altitude: f64,
        orientation: f64,
        radius: f64,
        straight: f64,
    ) -> Self {
        let h = straight / 2.0;
        let (s, c) = orientation.sin_cos();
        let to_world = |u: f64, v: f64| Point::new(center.x + u * c - v * s, center.y + u * s + v * c);
        let mut polyline = vec![to_world(-h, -radius)];
        let mut segments = Vec::new();
        let arc_steps =
            ((PI * radius / MAX_WAYPOINT_SPACING).ceil() as usize).max((PI / MAX_WAYPOINT_ANGLE).ceil() as usize);
        let line_steps = (straight / MAX_WAYPOINT_SPACING).ceil().max(1.0) as usize;
        for (side, sign) in [(h, 1.0), (-h, -1.0)] {
            if straight > 0.0 {
                for i in 1..=line_steps {
                    let t = i as f64 / line_steps as f64;
                    polyline.push(to_world(sign * (-h + straight * t), -sign * radius));
                }
                segments.push(Segment {
                    length: straight,
                    turn: Turn::Straight,
                });
            }
            for i in 1..=arc_steps {
                let a = -PI / 2.0 + PI * i as f64 / arc_steps as f64;
                let (sa, ca) = a.sin_cos();
                polyline.push(to_world(side + sign * radius * ca, sign * radius * sa));
            }
            segments.push(Segment {
                length: PI * radius,
                turn: Turn::Radius(radius),
            });
        }
        // close exactly on the start point
        *polyline.last_mut().expect("non-empty") = polyline[0];
        let lap_length = segments.iter().map(|s| s.length).sum();
        Self {
            kind,
            center,
            altitude,
            orientation,
            radius,
            straight_length: straight,
            segments: segments
                .into_iter()
                .map(|s| TrajectorySegment {
                    length: s.length,
                    turn: s.turn,
                    speed: 0.0,
                    power: 0.0,
                })
                .collect(),
            polyline,
            lap_length,
            lap_time: 0.0,
            mean_power: 0.0,
            energy_per_hour: 0.0,
        }
    }

    /// Fills per-segment speeds and the loop energy.
    fn costed(mut self, params: &EnergyParams) -> Result<Self> {
        let segs: Vec<Segment> = self
            .segments
            .iter()
            .map(|s| Segment {
                length: s.length,
                turn: s.turn,
            })
            .collect();
        let e = energy::loop_energy_per_hour(params, &segs)?;
        for (seg, sp) in self.segments.iter_mut().zip(&e.speeds) {
            seg.speed = sp.speed;
            seg.power = sp.power;
        }
        self.lap_time = e.lap_time;
        self.mean_power = e.mean_power;
        self.energy_per_hour = e.energy;
        Ok(self)
    }

    /// Sum of chord lengths along the polyline.
    pub fn polyline_length(&self) -> f64 {
        self.polyline.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// Waypoint test: nearest cell in the region and every member's sphere
/// contains the point at the trajectory altitude.
fn waypoints_ok(region: &Region, t: &Trajectory) -> bool {
    t.polyline
        .iter()
        .all(|&p| region.contains_point(p) && region.admits(p, t.altitude))
}

/// Geometric construction outcome; infeasible shapes carry a reason.
pub type Construction = std::result::Result<Trajectory, String>;

/// Circle around the hover point. Its radius starts at the distance to the
/// nearest perimeter cell and shrinks in tenth-of-a-step decrements until
/// every waypoint passes the region test.
pub fn circular_trajectory(region: &Region) -> Construction {
    let center = region.hover_point().ok_or("empty region")?;
    let r_c = region
        .perimeter()
        .iter()
        .map(|&c| region.lattice.point(c).dist(center))
        .fold(f64::INFINITY, f64::min);
    let decrement = SHRINK_FRACTION * region.lattice.step;
    let mut r = r_c;
    while r >= MIN_RADIUS {
        let t = Trajectory::stadium(TrajectoryKind::Circular, center, region.altitude, 0.0, r, 0.0);
        if waypoints_ok(region, &t) {
            return Ok(t);
        }
        r -= decrement;
    }
    Err(format!(
        "radius {r_c:.3} m leaves no circle of at least {MIN_RADIUS} m inside the region"
    ))
}

/// Stadium inscribed in the circular trajectory of radius `r_c`, oriented
/// along the farthest perimeter pair.
pub fn inner_elliptic_trajectory(region: &Region, r_c: Option<f64>) -> Construction {
    let r_c = r_c.ok_or("no circular trajectory")?;
    let center = region.hover_point().ok_or("empty region")?;
    let pair = region.farthest_pair().map_err(|e| e.to_string())?;
    let r_i = INNER_RADIUS_FRACTION * r_c;
    if r_i < MIN_RADIUS {
        return Err(format!("semicircle radius {r_i:.3} m below {MIN_RADIUS} m"));
    }
    let (a, b) = (region.lattice.point(pair.a), region.lattice.point(pair.b));
    let orientation = (b.y - a.y).atan2(b.x - a.x);
    let t = Trajectory::stadium(
        TrajectoryKind::InnerElliptic,
        center,
        region.altitude,
        orientation,
        r_i,
        2.0 * (r_c - r_i),
    );
    if waypoints_ok(region, &t) {
        Ok(t)
    } else {
        Err("waypoint outside the region".into())
    }
}

/// Stadium along the farthest perimeter pair, centred on its midpoint.
///
/// The semicircle radius is the largest `r` for which every other perimeter
/// cell projecting onto the straight part of the chord lies at least `r`
/// from it. When the resulting stadium leaves the region, the straights are
/// shortened, then the radius is reduced, until every waypoint passes.
pub fn elliptic_trajectory(region: &Region) -> Construction {
    let pair = region.farthest_pair().map_err(|e| e.to_string())?;
    let (a, b) = (region.lattice.point(pair.a), region.lattice.point(pair.b));
    let d = pair.distance;
    let (ux, uy) = ((b.x - a.x) / d, (b.y - a.y) / d);
    // (position along the chord, distance from the chord line)
    let others: Vec<(f64, f64)> = region
        .perimeter()
        .iter()
        .filter(|&&c| c != pair.a && c != pair.b)
        .map(|&c| {
            let p = region.lattice.point(c);
            let (px, py) = (p.x - a.x, p.y - a.y);
            (px * ux + py * uy, (px * uy - py * ux).abs())
        })
        .collect();
    let decrement = SHRINK_FRACTION * region.lattice.step;
    let clearance = |r: f64| {
        others
            .iter()
            .filter(|(t, _)| *t >= r && *t <= d - r)
            .map(|&(_, dist)| dist)
            .fold(f64::INFINITY, f64::min)
    };
    let mut r = d / 2.0;
    while r >= MIN_RADIUS && clearance(r) < r {
        r -= decrement;
    }
    if r < MIN_RADIUS {
        return Err(format!("chord clearance below {MIN_RADIUS} m"));
    }
    let center = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
    let orientation = uy.atan2(ux);
    let build =
        |r: f64, l: f64| Trajectory::stadium(TrajectoryKind::Elliptic, center, region.altitude, orientation, r, l);
    while r >= MIN_RADIUS {
        let full = d - 2.0 * r;
        if full > 0.0 {
            let t = build(r, full);
            if waypoints_ok(region, &t) {
                return Ok(t);
            }
            // largest passing straight length by bisection
            let (mut lo, mut hi) = (0.0, full);
            let mut found = None;
            while hi - lo > decrement {
                let mid = 0.5 * (lo + hi);
                let t = build(r, mid);
                if waypoints_ok(region, &t) {
                    lo = mid;
                    found = Some(t);
                } else {
                    hi = mid;
                }
            }
            if let Some(t) = found {
                return Ok(t);
            }
        }
        r -= decrement;
    }
    Err("no stadium along the farthest pair fits in the region".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: TrajectoryKind,
    pub feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_per_hour: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub candidates: Vec<Candidate>,
    pub chosen: Trajectory,
}

/// Builds every trajectory kind, costs the feasible ones and keeps the
/// cheapest; hover is always admissible.
pub fn select_trajectory(region: &Region, params: &EnergyParams) -> Result<Selection> {
    let center = region
        .hover_point()
        .ok_or(PlanError::EmptyRegion { group: region.group_id })?;
    let circ = circular_trajectory(region);
    let r_c = circ.as_ref().ok().map(|t| t.radius);
    let built = [
        Ok(Trajectory::hover(params, center, region.altitude)),
        circ,
        inner_elliptic_trajectory(region, r_c),
        elliptic_trajectory(region),
    ];
    let mut candidates = Vec::with_capacity(built.len());
    let mut best: Option<Trajectory> = None;
    for (kind, b) in TrajectoryKind::ALL.into_iter().zip(built) {
        let costed = match b {
            Ok(t) if t.kind == TrajectoryKind::Hover => Ok(t),
            Ok(t) => t.costed(params).map_err(|e| e.to_string()).and_then(|t| {
                if t.mean_power <= params.max_power {
                    Ok(t)
                } else {
                    Err(format!(
                        "mean power {:.2} W above the {:.2} W limit",
                        t.mean_power, params.max_power
                    ))
                }
            }),
            Err(r) => Err(r),
        };
        match costed {
            Ok(t) => {
                candidates.push(Candidate {
                    kind,
                    feasible: true,
                    reason: None,
                    mean_power: Some(t.mean_power),
                    energy_per_hour: Some(t.energy_per_hour),
                });
                // kinds are visited in tie-break order, so strict < keeps the earlier
                if best.as_ref().is_none_or(|b| t.energy_per_hour < b.energy_per_hour) {
                    best = Some(t);
                }
            }
            Err(reason) => candidates.push(Candidate {
                kind,
                feasible: false,
                reason: Some(reason),
                mean_power: None,
                energy_per_hour: None,
            }),
        }
    }
    Ok(Selection {
        candidates,
        chosen: best.expect("hover is always feasible"),
    })
}

/// Selection restricted to hovering at `point`, used by the overlap fallback.
pub fn hover_selection(params: &EnergyParams, point: Point, altitude: f64, reason: &str) -> Selection {
    let hover = Trajectory::hover(params, point, altitude);
    let candidates = TrajectoryKind::ALL
        .into_iter()
        .map(|kind| {
            if kind == TrajectoryKind::Hover {
                Candidate {
                    kind,
                    feasible: true,
                    reason: None,
                    mean_power: Some(hover.mean_power),
                    energy_per_hour: Some(hover.energy_per_hour),
                }
            } else {
                Candidate {
                    kind,
                    feasible: false,
                    reason: Some(reason.to_string()),
                    mean_power: None,
                    energy_per_hour: None,
                }
            }
        })
        .collect();
    Selection {
        candidates,
        chosen: hover,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuSlack {
    pub gu: usize,
    /// Smallest SNR slack over all waypoints, dB.
    pub worst_slack_db: f64,
}

/// Checks that every waypoint meets every member's target SNR plus margin.
pub fn verify_plan_qos(
    trajectory: &Trajectory,
    members: &[usize],
    gus: &[GroundUser],
    budget: &LinkBudget,
    table: &McsTable,
) -> Result<Vec<GuSlack>> {
    let n = members.len();
    members
        .iter()
        .map(|&gu| {
            let u = gus
                .get(gu)
                .ok_or_else(|| PlanError::domain(format!("unknown ground user {gu}")))?;
            let target = rf_link::target_snr(budget, table, u.offered_load, n)?;
            let mut worst = f64::INFINITY;
            for p in &trajectory.polyline {
                let dz = trajectory.altitude - u.z;
                let d = ((p.x - u.x).powi(2) + (p.y - u.y).powi(2) + dz * dz).sqrt();
                let slack = rf_link::snr(budget, d.max(1e-9))? - target;
                if slack < -QOS_TOLERANCE_DB {
                    return Err(PlanError::QosViolation {
                        gu,
                        x: p.x,
                        y: p.y,
                        z: trajectory.altitude,
                        slack_db: slack,
                    });
                }
                worst = worst.min(slack);
            }
            Ok(GuSlack {
                gu,
                worst_slack_db: worst,
            })
        })
        .collect()
}
