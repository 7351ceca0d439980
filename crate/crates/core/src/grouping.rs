//! Assigns ground users to as few FAPs as possible.
//!
//! The problem is an exact set cover over columns `(position, subset)`. A
//! column is feasible when every member's fair share of its own link rate
//! covers its offered load and the sum of fair shares stays within the
//! channel capacity. Only the position with the largest minimum SNR slack is
//! kept for each subset. Exact mode enumerates all feasible subsets and runs
//! a branch-and-bound search; heuristic mode grows groups greedily and
//! reports the gap to a combinatorial lower bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};
use crate::geometry::{Cell, Lattice, Point};
use crate::rf_link::{self, LinkBudget, McsTable};
use crate::scenario::GroundUser;

/// Exact mode is used up to this many ground users when the mode is `Auto`.
pub const DEFAULT_EXACT_LIMIT: usize = 14;
const MAX_EXACT_USERS: usize = 24;

/// Lattice of provisional FAP positions at a fixed altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub step: f64,
    pub altitude: f64,
}

impl CandidateGrid {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), step: f64, altitude: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(PlanError::domain(format!("grid step must be positive, got {step}")));
        }
        if !(altitude >= 0.0) || !altitude.is_finite() {
            return Err(PlanError::domain(format!(
                "altitude must be non-negative, got {altitude}"
            )));
        }
        if !(x_range.1 >= x_range.0) || !(y_range.1 >= y_range.0) {
            return Err(PlanError::domain("grid bounds are inverted"));
        }
        Ok(Self {
            x_range,
            y_range,
            step,
            altitude,
        })
    }

    pub fn for_area(width: f64, height: f64, step: f64, altitude: f64) -> Result<Self> {
        Self::new((0.0, width), (0.0, height), step, altitude)
    }

    pub fn lattice(&self) -> Lattice {
        Lattice {
            origin_x: self.x_range.0,
            origin_y: self.y_range.0,
            step: self.step,
        }
    }

    pub fn nx(&self) -> usize {
        ((self.x_range.1 - self.x_range.0) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn ny(&self) -> usize {
        ((self.y_range.1 - self.y_range.0) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell of candidate `idx`; candidates are numbered in `(x, y)` order.
    pub fn cell(&self, idx: usize) -> Cell {
        Cell::new((idx / self.ny()) as i32, (idx % self.ny()) as i32)
    }

    pub fn position(&self, idx: usize) -> Point {
        self.lattice().point(self.cell(idx))
    }

    /// Inclusive index bounds of the grid.
    pub fn bounds(&self) -> (Cell, Cell) {
        (Cell::new(0, 0), Cell::new(self.nx() as i32 - 1, self.ny() as i32 - 1))
    }
}

/// Per-link SNR and single-user MCS rate for every `(user, candidate)` pair.
#[derive(Debug, Clone)]
pub struct CapacityMatrix {
    n_candidates: usize,
    snr: Vec<f64>,
    rate: Vec<f64>,
}

impl CapacityMatrix {
    pub fn n_users(&self) -> usize {
        self.rate.len().checked_div(self.n_candidates).unwrap_or(0)
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    /// Aggregate MCS rate of link `user` to candidate `p`, Mbit/s.
    pub fn rate(&self, user: usize, p: usize) -> f64 {
        self.rate[user * self.n_candidates + p]
    }

    /// SNR of the link before the margin is subtracted, dB.
    pub fn snr(&self, user: usize, p: usize) -> f64 {
        self.snr[user * self.n_candidates + p]
    }
}

/// Link SNR and the MCS rate it supports with the margin held back, for
/// every user and candidate position. Rates are not yet divided by the
/// group size.
pub fn link_capacity_matrix(
    gus: &[GroundUser],
    grid: &CandidateGrid,
    budget: &LinkBudget,
    table: &McsTable,
) -> Result<CapacityMatrix> {
    if gus.is_empty() {
        return Err(PlanError::domain("no ground users"));
    }
    let n_candidates = grid.len();
    let mut snr = Vec::with_capacity(gus.len() * n_candidates);
    let mut rate = Vec::with_capacity(gus.len() * n_candidates);
    for u in gus {
        for p in 0..n_candidates {
            let pos = grid.position(p);
            let dz = grid.altitude - u.z;
            let d = ((pos.x - u.x).powi(2) + (pos.y - u.y).powi(2) + dz * dz).sqrt();
            // a user exactly at the FAP position gets the top rate
            let s = rf_link::snr(budget, d.max(1e-9))?;
            snr.push(s);
            rate.push(rf_link::rate_for_snr(table, s - budget.snr_margin, 1));
        }
    }
    Ok(CapacityMatrix {
        n_candidates,
        snr,
        rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    Auto,
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupingOptions {
    pub mode: ModeChoice,
    pub exact_limit: usize,
    /// Channel capacity C_max, Mbit/s.
    pub channel_capacity: f64,
}

impl Default for GroupingOptions {
    fn default() -> Self {
        Self {
            mode: ModeChoice::Auto,
            exact_limit: DEFAULT_EXACT_LIMIT,
            channel_capacity: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub id: usize,
    /// Ground-user indices, ascending.
    pub members: Vec<usize>,
    /// Provisional FAP position chosen during grouping.
    pub cell: Cell,
    pub position: Point,
    /// Smallest member SNR slack at `position`, dB.
    pub min_slack_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub groups: Vec<Group>,
    pub unassigned: Vec<usize>,
    pub mode: GroupingMode,
    /// Proven lower bound on the number of groups.
    pub lower_bound: usize,
    /// `groups.len() - lower_bound` in heuristic mode, 0 in exact mode.
    pub optimality_gap: usize,
}

impl Grouping {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct Column {
    mask: u64,
    candidate: usize,
    min_slack: f64,
}

/// Precomputed per-candidate feasibility data.
struct Problem<'a> {
    gus: &'a [GroundUser],
    grid: &'a CandidateGrid,
    caps: CapacityMatrix,
    /// `thresholds[i][n - 1]`: MCS threshold user `i` needs in a group of `n`.
    thresholds: Vec<Vec<Option<f64>>>,
    margin: f64,
    c_max: f64,
}

impl<'a> Problem<'a> {
    fn new(
        gus: &'a [GroundUser],
        grid: &'a CandidateGrid,
        budget: &LinkBudget,
        table: &McsTable,
        c_max: f64,
    ) -> Result<Self> {
        let caps = link_capacity_matrix(gus, grid, budget, table)?;
        let n = gus.len();
        let thresholds = gus
            .iter()
            .map(|u| {
                (1..=n)
                    .map(|k| table.min_entry_for_rate(u.offered_load, k).map(|e| e.min_snr))
                    .collect()
            })
            .collect();
        Ok(Self {
            gus,
            grid,
            caps,
            thresholds,
            margin: budget.snr_margin,
            c_max,
        })
    }

    fn qos_ok(&self, members: &[usize], p: usize) -> bool {
        let n = members.len() as f64;
        members
            .iter()
            .all(|&i| self.caps.rate(i, p) / n >= self.gus[i].offered_load)
    }

    fn capacity_ok(&self, members: &[usize], p: usize) -> bool {
        let n = members.len() as f64;
        let total: f64 = members.iter().map(|&i| self.caps.rate(i, p) / n).sum();
        total <= self.c_max
    }

    fn min_slack(&self, members: &[usize], p: usize) -> f64 {
        let n = members.len();
        members
            .iter()
            .map(|&i| {
                let thr = self.thresholds[i][n - 1].unwrap_or(f64::INFINITY);
                self.caps.snr(i, p) - self.margin - thr
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Best position for `members`: feasible, largest minimum slack, then
    /// smallest candidate index. Also reports whether any position met the
    /// QoS constraint alone.
    fn best_position(&self, members: &[usize]) -> (bool, Option<Column>) {
        self.best_position_excluding(members, &[])
    }

    fn best_position_excluding(&self, members: &[usize], used: &[usize]) -> (bool, Option<Column>) {
        let mut any_qos = false;
        let mut best: Option<Column> = None;
        let mask = members.iter().fold(0u64, |m, &i| m | (1 << i));
        for p in 0..self.caps.n_candidates() {
            if used.contains(&p) || !self.qos_ok(members, p) {
                continue;
            }
            any_qos = true;
            if !self.capacity_ok(members, p) {
                continue;
            }
            let s = self.min_slack(members, p);
            if best.is_none_or(|b| s > b.min_slack) {
                best = Some(Column {
                    mask,
                    candidate: p,
                    min_slack: s,
                });
            }
        }
        (any_qos, best)
    }

    fn check_singletons(&self) -> Result<Vec<Column>> {
        (0..self.gus.len())
            .map(|i| {
                let load = self.gus[i].offered_load;
                match self.best_position(&[i]) {
                    (_, Some(c)) => Ok(c),
                    (true, None) => Err(PlanError::CapacityInfeasible {
                        gu: i,
                        load,
                        c_max: self.c_max,
                    }),
                    (false, None) => Err(PlanError::InfeasibleDemand { gu: i, load }),
                }
            })
            .collect()
    }

    /// Necessary condition for two users to share any group: some position
    /// meets both users' QoS at group size two. Group size only tightens the
    /// QoS constraint, so failing this rules out every larger group too.
    fn pair_compatible(&self, i: usize, j: usize) -> bool {
        (0..self.caps.n_candidates()).any(|p| self.qos_ok(&[i, j], p))
    }

    fn group(&self, id: usize, col: &Column) -> Group {
        Group {
            id,
            members: mask_members(col.mask),
            cell: self.grid.cell(col.candidate),
            position: self.grid.position(col.candidate),
            min_slack_db: col.min_slack,
        }
    }
}

fn mask_members(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask & (1 << i) != 0).collect()
}

/// Greedy clique of pairwise-incompatible users among `uncovered`.
fn clique_bound(uncovered: u64, compat: &[u64]) -> usize {
    let mut clique: u64 = 0;
    let mut count = 0;
    let mut rest = uncovered;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        if compat[i] & clique == 0 {
            clique |= 1 << i;
            count += 1;
        }
    }
    count
}

/// Ordering key among groupings with the same number of groups, smallest
/// first: ascending group sizes, then candidate cells in group order.
fn tie_key(cols: &[Column], grid: &CandidateGrid) -> (Vec<usize>, Vec<Cell>) {
    let mut ordered: Vec<&Column> = cols.iter().collect();
    ordered.sort_by_key(|c| c.mask.trailing_zeros());
    let mut sizes: Vec<usize> = cols.iter().map(|c| c.mask.count_ones() as usize).collect();
    sizes.sort_unstable();
    (sizes, ordered.iter().map(|c| grid.cell(c.candidate)).collect())
}

struct Search<'a> {
    columns: &'a [Column],
    by_user: Vec<Vec<usize>>,
    compat: Vec<u64>,
    all: u64,
    grid: &'a CandidateGrid,
    best: Option<Incumbent>,
    chosen: Vec<usize>,
}

// (group count, tie-break key, chosen columns)
type Incumbent = (usize, (Vec<usize>, Vec<Cell>), Vec<usize>);

impl Search<'_> {
    fn run(&mut self, covered: u64) {
        if covered == self.all {
            let cols: Vec<Column> = self.chosen.iter().map(|&k| self.columns[k]).collect();
            let key = tie_key(&cols, self.grid);
            let better = match &self.best {
                None => true,
                Some((n, k, _)) => cols.len() < *n || (cols.len() == *n && key < *k),
            };
            if better {
                self.best = Some((cols.len(), key, self.chosen.clone()));
            }
            return;
        }
        let uncovered = self.all & !covered;
        if let Some((n, _, _)) = &self.best {
            if self.chosen.len() + clique_bound(uncovered, &self.compat) > *n {
                return;
            }
        }
        let i = uncovered.trailing_zeros() as usize;
        for idx in 0..self.by_user[i].len() {
            let k = self.by_user[i][idx];
            if self.columns[k].mask & covered != 0 {
                continue;
            }
            self.chosen.push(k);
            self.run(covered | self.columns[k].mask);
            self.chosen.pop();
        }
    }
}

/// All feasible columns, one per subset, in ascending mask order.
fn enumerate_columns(problem: &Problem) -> Vec<Column> {
    let n = problem.gus.len();
    let full = 1u64 << n;
    let mut qos = vec![false; full as usize];
    let mut columns = Vec::new();
    for size in 1..=n {
        let level: Vec<u64> = (1..full)
            .filter(|&m| m.count_ones() as usize == size)
            .filter(|&m| {
                // QoS feasibility is inherited by subsets
                size == 1 || {
                    let lo = m & (m - 1);
                    let hi = m & !(1 << (63 - m.leading_zeros()));
                    qos[lo as usize] && qos[hi as usize]
                }
            })
            .collect();
        let evaluated: Vec<(u64, bool, Option<Column>)> = level
            .par_iter()
            .map(|&m| {
                let members = mask_members(m);
                let (any, col) = problem.best_position(&members);
                (m, any, col)
            })
            .collect();
        for (m, any, col) in evaluated {
            qos[m as usize] = any;
            if let Some(c) = col {
                columns.push(c);
            }
        }
    }
    columns.sort_by_key(|c| c.mask);
    columns
}

/// Orders groups by smallest member and moves any group whose candidate is
/// already taken to its best free candidate.
fn order_groups(problem: &Problem, mut cols: Vec<Column>) -> Result<Vec<Group>> {
    cols.sort_by_key(|c| c.mask.trailing_zeros());
    let mut used = Vec::with_capacity(cols.len());
    for c in &mut cols {
        if used.contains(&c.candidate) {
            *c = problem
                .best_position_excluding(&mask_members(c.mask), &used)
                .1
                .ok_or_else(|| {
                    PlanError::GroupingViolation(format!("no free position for users {:?}", mask_members(c.mask)))
                })?;
        }
        used.push(c.candidate);
    }
    Ok(cols.iter().enumerate().map(|(id, c)| problem.group(id, c)).collect())
}

fn solve_exact(problem: &Problem) -> Result<Grouping> {
    let n = problem.gus.len();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let columns = enumerate_columns(problem);
    let mut compat = vec![0u64; n];
    for c in &columns {
        for i in mask_members(c.mask) {
            compat[i] |= c.mask;
        }
    }
    let mut by_user = vec![Vec::new(); n];
    for (k, c) in columns.iter().enumerate() {
        for i in mask_members(c.mask) {
            by_user[i].push(k);
        }
    }
    // larger columns first finds good incumbents early
    for list in &mut by_user {
        list.sort_by_key(|&k| (std::cmp::Reverse(columns[k].mask.count_ones()), columns[k].mask));
    }
    let lower_bound = clique_bound(all, &compat);
    let mut search = Search {
        columns: &columns,
        by_user,
        compat,
        all,
        grid: problem.grid,
        best: None,
        chosen: Vec::new(),
    };
    search.run(0);
    let (_, _, chosen) = search.best.expect("singleton columns always cover");
    let groups = order_groups(problem, chosen.iter().map(|&k| columns[k]).collect())?;
    Ok(Grouping {
        lower_bound: lower_bound.max(1),
        optimality_gap: 0,
        groups,
        unassigned: Vec::new(),
        mode: GroupingMode::Exact,
    })
}

fn solve_heuristic(problem: &Problem, singles: &[Column]) -> Result<Grouping> {
    let n = problem.gus.len();
    let mut compat = vec![0u64; n];
    for i in 0..n {
        compat[i] |= 1 << i;
        for j in i + 1..n {
            if problem.pair_compatible(i, j) {
                compat[i] |= 1 << j;
                compat[j] |= 1 << i;
            }
        }
    }
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let lower_bound = clique_bound(all, &compat).max(1);

    let mut uncovered: Vec<usize> = (0..n).collect();
    let mut cols = Vec::new();
    while let Some(&seed) = uncovered.first() {
        let mut members = vec![seed];
        let mut col = singles[seed];
        let mut rest: Vec<usize> = uncovered[1..].to_vec();
        let s = problem.gus[seed];
        rest.sort_by(|&a, &b| {
            let da = (problem.gus[a].x - s.x).hypot(problem.gus[a].y - s.y);
            let db = (problem.gus[b].x - s.x).hypot(problem.gus[b].y - s.y);
            da.total_cmp(&db).then(a.cmp(&b))
        });
        for j in rest {
            if compat[seed] & (1 << j) == 0 {
                continue;
            }
            let mut trial = members.clone();
            trial.push(j);
            trial.sort_unstable();
            if let (_, Some(c)) = problem.best_position(&trial) {
                members = trial;
                col = c;
            }
        }
        uncovered.retain(|i| !members.contains(i));
        cols.push(col);
    }
    let groups = order_groups(problem, cols)?;
    Ok(Grouping {
        optimality_gap: groups.len().saturating_sub(lower_bound),
        lower_bound,
        groups,
        unassigned: Vec::new(),
        mode: GroupingMode::Heuristic,
    })
}

/// Groups ground users so that the number of FAPs is minimal (exact mode)
/// or small with a reported gap (heuristic mode).
pub fn minimize_faps(
    gus: &[GroundUser],
    grid: &CandidateGrid,
    budget: &LinkBudget,
    table: &McsTable,
    options: &GroupingOptions,
) -> Result<Grouping> {
    if gus.is_empty() {
        return Err(PlanError::domain("no ground users"));
    }
    if gus.len() > 64 {
        return Err(PlanError::domain("at most 64 ground users are supported"));
    }
    let problem = Problem::new(gus, grid, budget, table, options.channel_capacity)?;
    let singles = problem.check_singletons()?;
    let exact = match options.mode {
        ModeChoice::Exact => true,
        ModeChoice::Heuristic => false,
        ModeChoice::Auto => gus.len() <= options.exact_limit,
    };
    if exact && gus.len() > MAX_EXACT_USERS {
        return Err(PlanError::domain(format!(
            "exact grouping supports at most {MAX_EXACT_USERS} ground users"
        )));
    }
    if exact {
        solve_exact(&problem)
    } else {
        solve_heuristic(&problem, &singles)
    }
}

/// Re-derives every link from geometry and checks the grouping constraints:
/// each user in exactly one group, distinct positions, fair-share rate at
/// least the offered load, and capacity and load sums within `c_max`.
pub fn verify_grouping(
    gus: &[GroundUser],
    grouping: &Grouping,
    altitude: f64,
    budget: &LinkBudget,
    table: &McsTable,
    c_max: f64,
) -> Result<()> {
    let fail = |m: String| Err(PlanError::GroupingViolation(m));
    if !grouping.unassigned.is_empty() {
        return fail(format!("unassigned users {:?}", grouping.unassigned));
    }
    let mut seen = vec![0usize; gus.len()];
    for g in &grouping.groups {
        for &i in &g.members {
            if i >= gus.len() {
                return fail(format!("group {} references unknown user {i}", g.id));
            }
            seen[i] += 1;
        }
    }
    if let Some(i) = seen.iter().position(|&c| c != 1) {
        return fail(format!("user {i} appears in {} groups", seen[i]));
    }
    for (a, ga) in grouping.groups.iter().enumerate() {
        for gb in &grouping.groups[a + 1..] {
            if ga.position == gb.position {
                return fail(format!("groups {} and {} share a position", ga.id, gb.id));
            }
        }
    }
    for g in &grouping.groups {
        let n = g.members.len();
        let mut capacity = 0.0;
        let mut load = 0.0;
        for &i in &g.members {
            let u = gus[i];
            let d = ((g.position.x - u.x).powi(2) + (g.position.y - u.y).powi(2) + (altitude - u.z).powi(2)).sqrt();
            let s = rf_link::snr(budget, d.max(1e-9))?;
            let share = rf_link::rate_for_snr(table, s - budget.snr_margin, n);
            if share < u.offered_load {
                return fail(format!(
                    "user {i} in group {} gets {share} Mbit/s for a {} Mbit/s load",
                    g.id, u.offered_load
                ));
            }
            capacity += share;
            load += u.offered_load;
        }
        if capacity > c_max || load > c_max {
            return fail(format!(
                "group {} uses {capacity} Mbit/s capacity ({load} offered) above {c_max}",
                g.id
            ));
        }
    }
    Ok(())
}
