//! Scenario model, random generation, the end-to-end planning pipeline and
//! batch statistics.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyParams};
use crate::error::{PlanError, Result};
use crate::geometry::{self, Cell, FarthestPair, Point, Region};
use crate::grouping::{self, CandidateGrid, Grouping, GroupingOptions, ModeChoice};
use crate::rf_link::{LinkBudget, McsTable};
use crate::trajectory::{self, Candidate, GuSlack, Selection, Trajectory, TrajectoryKind};

/// Altitude added to the later of two FAPs whose regions could not be
/// separated, m.
pub const FALLBACK_ALTITUDE_OFFSET: f64 = 3.0;
/// Environment variable capping batch worker threads.
pub const THREADS_ENV: &str = "SUPPLY_THREADS";

/// A ground user: position in metres and offered load in Mbit/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundUser {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
    pub offered_load: f64,
}

fn default_area() -> (f64, f64) {
    (100.0, 100.0)
}

fn default_altitude() -> f64 {
    6.0
}

fn default_capacity() -> f64 {
    500.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Width and height of the area of interest, m.
    #[serde(default = "default_area")]
    pub area: (f64, f64),
    /// FAP altitude, m.
    #[serde(default = "default_altitude")]
    pub altitude: f64,
    /// Channel capacity C_max, Mbit/s.
    #[serde(default = "default_capacity")]
    pub channel_capacity: f64,
    pub gus: Vec<GroundUser>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub label: String,
}

impl Scenario {
    pub fn new(label: impl Into<String>, gus: Vec<GroundUser>) -> Self {
        Self {
            area: default_area(),
            altitude: default_altitude(),
            channel_capacity: default_capacity(),
            gus,
            seed: None,
            label: label.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.area;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(PlanError::domain(format!("area must be positive, got {w} x {h}")));
        }
        if !(self.altitude >= 0.0) || !self.altitude.is_finite() {
            return Err(PlanError::domain(format!(
                "altitude must be non-negative, got {}",
                self.altitude
            )));
        }
        if !(self.channel_capacity > 0.0) || !self.channel_capacity.is_finite() {
            return Err(PlanError::domain(format!(
                "channel capacity must be positive, got {}",
                self.channel_capacity
            )));
        }
        if self.gus.is_empty() {
            return Err(PlanError::domain("scenario has no ground users"));
        }
        for (i, u) in self.gus.iter().enumerate() {
            if !(0.0..=w).contains(&u.x) || !(0.0..=h).contains(&u.y) {
                return Err(PlanError::domain(format!(
                    "ground user {i} at ({}, {}) is outside the area",
                    u.x, u.y
                )));
            }
            if u.z != 0.0 {
                return Err(PlanError::domain(format!(
                    "ground user {i} must be at ground level, got z = {}",
                    u.z
                )));
            }
            if !(u.offered_load > 0.0) || !u.offered_load.is_finite() {
                return Err(PlanError::domain(format!(
                    "ground user {i} offered load must be positive, got {}",
                    u.offered_load
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn total_load(&self) -> f64 {
        self.gus.iter().map(|u| u.offered_load).sum()
    }
}

/// Random scenario: users on integer lattice points of the area, loads
/// uniform on `(0, C_max / n]`, rescaled if their sum exceeds `C_max`.
/// The generator is ChaCha8 seeded with `seed`.
pub fn generate_scenario(n_gus: usize, seed: u64, area: (f64, f64), channel_capacity: f64) -> Result<Scenario> {
    if n_gus == 0 {
        return Err(PlanError::domain("need at least one ground user"));
    }
    if !(area.0 >= 0.0 && area.1 >= 0.0) || !(channel_capacity > 0.0) {
        return Err(PlanError::domain("area and channel capacity must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (area.0.floor() as i64, area.1.floor() as i64);
    let share = channel_capacity / n_gus as f64;
    let mut gus: Vec<GroundUser> = (0..n_gus)
        .map(|_| {
            let x = rng.gen_range(0..=w) as f64;
            let y = rng.gen_range(0..=h) as f64;
            let u: f64 = rng.gen();
            GroundUser {
                x,
                y,
                z: 0.0,
                offered_load: (1.0 - u) * share,
            }
        })
        .collect();
    let total: f64 = gus.iter().map(|u| u.offered_load).sum();
    if total > channel_capacity {
        let k = channel_capacity / total;
        for u in &mut gus {
            u.offered_load *= k;
        }
    }
    Ok(Scenario {
        area,
        altitude: default_altitude(),
        channel_capacity,
        gus,
        seed: Some(seed),
        label: format!("n{n_gus}-s{seed}"),
    })
}

/// Models and solver settings shared by every scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub params: EnergyParams,
    pub budget: LinkBudget,
    pub table: McsTable,
    /// Candidate and region lattice spacing, m.
    pub grid_step: f64,
    pub mode: ModeChoice,
    pub exact_limit: usize,
    /// Restrict regions to the area of interest.
    pub clip_to_area: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            params: EnergyParams::default(),
            budget: LinkBudget::default(),
            table: McsTable::default(),
            grid_step: 1.0,
            mode: ModeChoice::Auto,
            exact_limit: grouping::DEFAULT_EXACT_LIMIT,
            clip_to_area: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub cell_count: usize,
    pub area_m2: f64,
    pub centroid: Point,
    pub hover_point: Point,
    pub farthest_pair: Option<FarthestPair>,
    /// Perimeter cell positions in `(x, y)` order.
    pub perimeter: Vec<Point>,
}

impl RegionSummary {
    fn of(region: &Region) -> Self {
        let step = region.lattice.step;
        Self {
            cell_count: region.len(),
            area_m2: region.len() as f64 * step * step,
            centroid: region.centroid().expect("non-empty region"),
            hover_point: region.hover_point().expect("non-empty region"),
            farthest_pair: region.farthest_pair().ok(),
            perimeter: region.perimeter().iter().map(|&c| region.lattice.point(c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FapPlan {
    pub group_id: usize,
    pub members: Vec<usize>,
    pub region: RegionSummary,
    pub candidates: Vec<Candidate>,
    pub chosen: Trajectory,
    pub hover_baseline_energy: f64,
    /// Worst SNR slack per member along the chosen trajectory.
    pub qos: Vec<GuSlack>,
    /// Set when the FAP was forced to hover by the overlap fallback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub n_faps: usize,
    /// Sum of the chosen trajectories' energy per hour, J.
    pub supply_energy: f64,
    /// Every FAP hovering for an hour, J.
    pub hover_energy: f64,
    pub energy_ratio: f64,
    pub saving_percent: f64,
}

impl Totals {
    pub fn from_plans(faps: &[FapPlan], hover_per_fap: f64) -> Self {
        let supply_energy: f64 = faps.iter().map(|f| f.chosen.energy_per_hour).sum();
        let hover_energy = faps.len() as f64 * hover_per_fap;
        let energy_ratio = supply_energy / hover_energy;
        Self {
            n_faps: faps.len(),
            supply_energy,
            hover_energy,
            energy_ratio,
            saving_percent: 100.0 * (1.0 - energy_ratio),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub grouping: Grouping,
    pub faps: Vec<FapPlan>,
    pub totals: Totals,
    pub warnings: Vec<String>,
}

impl Plan {
    pub fn trajectory_kinds(&self) -> Vec<TrajectoryKind> {
        self.faps.iter().map(|f| f.chosen.kind).collect()
    }
}

struct Forced {
    point: Point,
    altitude: f64,
    reason: String,
}

impl Forced {
    fn new(point: Point, altitude: f64, why: &str) -> Self {
        Self {
            point,
            altitude,
            reason: format!("{why}; hovering at {altitude} m"),
        }
    }
}

/// Groups the users, builds disjoint regions in group order, selects a
/// trajectory per FAP and re-verifies every constraint on the result.
pub fn run_pipeline(scenario: &Scenario, config: &PlannerConfig) -> Result<Plan> {
    run_pipeline_with_regions(scenario, config).map(|(plan, _)| plan)
}

/// As [`run_pipeline`], also returning the final region of each group,
/// indexed by group id.
pub fn run_pipeline_with_regions(scenario: &Scenario, config: &PlannerConfig) -> Result<(Plan, Vec<Region>)> {
    run_pipeline_inner(scenario, config).map_err(|e| match e {
        PlanError::Scenario { .. } => e,
        other => PlanError::Scenario {
            label: scenario.label.clone(),
            source: Box::new(other),
        },
    })
}

fn run_pipeline_inner(scenario: &Scenario, config: &PlannerConfig) -> Result<(Plan, Vec<Region>)> {
    scenario.validate()?;
    config.params.validate()?;
    config.budget.validate()?;
    let (w, h) = scenario.area;
    let grid = CandidateGrid::for_area(w, h, config.grid_step, scenario.altitude)?;
    let options = GroupingOptions {
        mode: config.mode,
        exact_limit: config.exact_limit,
        channel_capacity: scenario.channel_capacity,
    };
    let gus = &scenario.gus;
    let grouping = grouping::minimize_faps(gus, &grid, &config.budget, &config.table, &options)?;
    grouping::verify_grouping(
        gus,
        &grouping,
        scenario.altitude,
        &config.budget,
        &config.table,
        scenario.channel_capacity,
    )?;

    let mut warnings = Vec::new();
    if grouping.mode == grouping::GroupingMode::Heuristic {
        warnings.push(format!(
            "heuristic grouping: {} FAPs, lower bound {}",
            grouping.len(),
            grouping.lower_bound
        ));
    }

    let lattice = grid.lattice();
    let bounds = config.clip_to_area.then(|| grid.bounds());
    let fulls: Vec<Region> = grouping
        .groups
        .par_iter()
        .map(|g| {
            let members: Vec<(usize, GroundUser)> = g.members.iter().map(|&i| (i, gus[i])).collect();
            geometry::intersection_region(
                g.id,
                &members,
                &config.budget,
                &config.table,
                lattice,
                scenario.altitude,
                bounds,
            )
        })
        .collect::<Result<_>>()?;
    // smaller regions claim their cells first so large ones cannot swallow them
    let mut order: Vec<usize> = (0..fulls.len()).collect();
    order.sort_by_key(|&k| (fulls[k].len(), k));

    let mut regions: Vec<Option<Region>> = vec![None; fulls.len()];
    let mut forced: Vec<Option<Forced>> = (0..fulls.len()).map(|_| None).collect();
    let mut taken: HashSet<Cell> = HashSet::new();
    let mut owner: HashMap<Cell, usize> = HashMap::new();
    for &id in &order {
        let full = &fulls[id];
        let region = match geometry::remove_overlap(full, &taken) {
            Ok(r) => r,
            Err(PlanError::EmptyRegion { .. }) => {
                let mut earlier: Vec<usize> = full.cells().iter().filter_map(|c| owner.get(&c).copied()).collect();
                earlier.sort_unstable();
                earlier.dedup();
                let low = scenario.altitude;
                let high = low + FALLBACK_ALTITUDE_OFFSET;
                let shared = format!("region shared with group {id}");
                let earlier_region = |k: usize| regions[k].as_ref().expect("claimed regions are built");
                // prefer lifting this FAP; otherwise lift the earlier ones
                let mine = if let Some(p) = altitude_hover_point(full, high) {
                    for &k in &earlier {
                        let point = earlier_region(k).hover_point().expect("non-empty region");
                        forced[k] = Some(Forced::new(point, low, &shared));
                    }
                    Forced::new(p, high, &format!("region covered by groups {earlier:?}"))
                } else {
                    let lifted: Option<Vec<Point>> = earlier
                        .iter()
                        .map(|&k| altitude_hover_point(earlier_region(k), high))
                        .collect();
                    let lifted = lifted.ok_or(PlanError::EmptyRegion { group: id })?;
                    for (&k, p) in earlier.iter().zip(lifted) {
                        forced[k] = Some(Forced::new(p, high, &shared));
                    }
                    let point = full.hover_point().expect("non-empty region");
                    Forced::new(point, low, &format!("region covered by groups {earlier:?}"))
                };
                forced[id] = Some(mine);
                warnings.push(format!(
                    "group {id} region fully overlapped by groups {earlier:?}; altitude-separated hover"
                ));
                full.clone()
            }
            Err(e) => return Err(e),
        };
        for c in region.cells().iter() {
            if taken.insert(c) {
                owner.insert(c, id);
            }
        }
        regions[id] = Some(region);
    }
    let regions: Vec<Region> = regions
        .into_iter()
        .map(|r| r.expect("every group has a region"))
        .collect();

    let hover_per_fap = energy::hover_energy_per_hour(&config.params);
    let faps: Vec<FapPlan> = grouping
        .groups
        .par_iter()
        .zip(regions.par_iter())
        .zip(forced.par_iter())
        .map(|((g, region), f)| -> Result<FapPlan> {
            let selection: Selection = match f {
                Some(f) => trajectory::hover_selection(&config.params, f.point, f.altitude, &f.reason),
                None => trajectory::select_trajectory(region, &config.params)?,
            };
            let qos = trajectory::verify_plan_qos(&selection.chosen, &g.members, gus, &config.budget, &config.table)?;
            if selection.chosen.energy_per_hour > hover_per_fap {
                return Err(PlanError::domain(format!(
                    "group {} trajectory costs more than hovering",
                    g.id
                )));
            }
            Ok(FapPlan {
                group_id: g.id,
                members: g.members.clone(),
                region: RegionSummary::of(region),
                candidates: selection.candidates,
                chosen: selection.chosen,
                hover_baseline_energy: hover_per_fap,
                qos,
                fallback: f.as_ref().map(|f| f.reason.clone()),
            })
        })
        .collect::<Result<_>>()?;

    for w in faps.iter().filter_map(|f| f.fallback.as_ref()) {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    let totals = Totals::from_plans(&faps, hover_per_fap);
    let plan = Plan {
        grouping,
        faps,
        totals,
        warnings,
    };
    Ok((plan, regions))
}

/// Region cell nearest the centroid that still meets every member's
/// constraint at altitude `z`.
fn altitude_hover_point(region: &Region, z: f64) -> Option<Point> {
    let c = region.centroid()?;
    region
        .cells()
        .iter()
        .map(|cell| region.lattice.point(cell))
        .filter(|&p| region.admits(p, z))
        .min_by(|a, b| {
            a.dist(c)
                .total_cmp(&b.dist(c))
                .then(a.x.total_cmp(&b.x))
                .then(a.y.total_cmp(&b.y))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub label: String,
    pub seed: u64,
    pub n_gus: usize,
    pub n_faps: usize,
    pub supply_energy_j: f64,
    pub hover_energy_j: f64,
    pub energy_ratio: f64,
    /// Chosen trajectory kinds in group order, `;`-separated.
    pub trajectories: String,
}

impl BatchRow {
    pub fn from_plan(scenario: &Scenario, plan: &Plan) -> Self {
        Self {
            label: scenario.label.clone(),
            seed: scenario.seed.unwrap_or(0),
            n_gus: scenario.gus.len(),
            n_faps: plan.totals.n_faps,
            supply_energy_j: plan.totals.supply_energy,
            hover_energy_j: plan.totals.hover_energy,
            energy_ratio: plan.totals.energy_ratio,
            trajectories: plan
                .trajectory_kinds()
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

/// Worker count from `SUPPLY_THREADS`, if set to a positive integer.
pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Generates and plans `count` scenarios with seeds `base_seed + k`.
/// Rows are returned sorted by seed.
pub fn run_batch(
    n_gus: usize,
    count: usize,
    base_seed: u64,
    area: (f64, f64),
    channel_capacity: f64,
    config: &PlannerConfig,
) -> Result<Vec<BatchRow>> {
    if count == 0 {
        return Err(PlanError::domain("batch count must be at least 1"));
    }
    let work = || -> Result<Vec<BatchRow>> {
        let mut rows = (0..count as u64)
            .into_par_iter()
            .map(|k| {
                let s = generate_scenario(n_gus, base_seed.wrapping_add(k), area, channel_capacity)?;
                let plan = run_pipeline(&s, config)?;
                Ok(BatchRow::from_plan(&s, &plan))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.sort_by_key(|r| r.seed);
        Ok(rows)
    };
    match thread_limit() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PlanError::domain(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

pub fn write_batch_csv<W: Write>(rows: &[BatchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_batch_csv<R: Read>(input: R) -> Result<Vec<BatchRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<BatchRow>, _>>()?;
    Ok(rows)
}

/// Nearest-rank percentile: the value at rank `ceil(p / 100 * n)`.
pub fn percentile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(PlanError::domain("percentile of an empty sample"));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(PlanError::domain(format!("percentile must be in (0, 100], got {p}")));
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileRow {
    pub percentile: f64,
    pub energy_ratio: f64,
}

pub fn energy_ratio_stats(rows: &[BatchRow], percentiles: &[f64]) -> Result<Vec<PercentileRow>> {
    if rows.is_empty() {
        return Err(PlanError::domain("empty batch"));
    }
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.energy_ratio).collect();
    ratios.sort_by(f64::total_cmp);
    percentiles
        .iter()
        .map(|&p| {
            Ok(PercentileRow {
                percentile: p,
                energy_ratio: percentile(&ratios, p)?,
            })
        })
        .collect()
}

pub fn mean_faps(rows: &[BatchRow]) -> f64 {
    rows.iter().map(|r| r.n_faps as f64).sum::<f64>() / rows.len().max(1) as f64
}
