//! Rasterised placement regions on the fixed-altitude plane.
//!
//! A group's region is every lattice point where the FAP satisfies each
//! member's maximum-distance constraint. Regions are then made disjoint in
//! group order, and summarised by centroid, boundary cells and the farthest
//! apart boundary pair.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};
use crate::rf_link::{self, LinkBudget, McsTable};
use crate::scenario::GroundUser;

/// Integer lattice coordinate. Ordering is lexicographic on `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    fn dist2(self, o: Cell) -> i64 {
        let dx = (self.x - o.x) as i64;
        let dy = (self.y - o.y) as i64;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Maps lattice cells to plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin_x: f64,
    pub origin_y: f64,
    pub step: f64,
}

impl Lattice {
    pub fn point(&self, c: Cell) -> Point {
        Point::new(
            self.origin_x + c.x as f64 * self.step,
            self.origin_y + c.y as f64 * self.step,
        )
    }

    pub fn nearest_cell(&self, p: Point) -> Cell {
        Cell::new(
            ((p.x - self.origin_x) / self.step).round() as i32,
            ((p.y - self.origin_y) / self.step).round() as i32,
        )
    }

    fn index_range(&self, origin: f64, lo: f64, hi: f64) -> (i32, i32) {
        (
            ((lo - origin) / self.step).ceil() as i32,
            ((hi - origin) / self.step).floor() as i32,
        )
    }
}

/// Dense bitmap of cells over a bounding box. Iterates in `(x, y)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    x0: i32,
    y0: i32,
    width: usize,
    height: usize,
    bits: Vec<bool>,
    len: usize,
}

impl CellSet {
    pub fn empty() -> Self {
        Self {
            x0: 0,
            y0: 0,
            width: 0,
            height: 0,
            bits: Vec::new(),
            len: 0,
        }
    }

    /// Fills `[x_lo, x_hi] x [y_lo, y_hi]` with cells passing `keep`.
    pub fn from_box(x_lo: i32, x_hi: i32, y_lo: i32, y_hi: i32, mut keep: impl FnMut(Cell) -> bool) -> Self {
        if x_hi < x_lo || y_hi < y_lo {
            return Self::empty();
        }
        let width = (x_hi - x_lo + 1) as usize;
        let height = (y_hi - y_lo + 1) as usize;
        let mut bits = vec![false; width * height];
        let mut len = 0;
        for i in 0..width {
            for j in 0..height {
                if keep(Cell::new(x_lo + i as i32, y_lo + j as i32)) {
                    bits[i * height + j] = true;
                    len += 1;
                }
            }
        }
        Self {
            x0: x_lo,
            y0: y_lo,
            width,
            height,
            bits,
            len,
        }
    }

    pub fn from_cells(cells: &[Cell]) -> Self {
        let Some(first) = cells.first() else {
            return Self::empty();
        };
        let (mut xl, mut xh, mut yl, mut yh) = (first.x, first.x, first.y, first.y);
        for c in cells {
            xl = xl.min(c.x);
            xh = xh.max(c.x);
            yl = yl.min(c.y);
            yh = yh.max(c.y);
        }
        let set: HashSet<Cell> = cells.iter().copied().collect();
        Self::from_box(xl, xh, yl, yh, |c| set.contains(&c))
    }

    fn slot(&self, c: Cell) -> Option<usize> {
        let i = c.x.checked_sub(self.x0)?;
        let j = c.y.checked_sub(self.y0)?;
        if i < 0 || j < 0 || i as usize >= self.width || j as usize >= self.height {
            return None;
        }
        Some(i as usize * self.height + j as usize)
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.slot(c).is_some_and(|s| self.bits[s])
    }

    pub fn remove(&mut self, c: Cell) -> bool {
        match self.slot(c) {
            Some(s) if self.bits[s] => {
                self.bits[s] = false;
                self.len -= 1;
                true
            }
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        let h = self.height;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(k, _)| Cell::new(self.x0 + (k / h) as i32, self.y0 + (k % h) as i32))
    }
}

/// One member's constraint on FAP placement: the sphere of radius
/// `max_distance` around the ground user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberConstraint {
    pub gu: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub offered_load: f64,
    /// Required SNR including margin, dB.
    pub target_snr: f64,
    pub max_distance: f64,
}

impl MemberConstraint {
    pub fn distance_to(&self, p: Point, altitude: f64) -> f64 {
        let dz = altitude - self.z;
        ((p.x - self.x).powi(2) + (p.y - self.y).powi(2) + dz * dz).sqrt()
    }

    pub fn admits(&self, p: Point, altitude: f64) -> bool {
        self.distance_to(p, altitude) <= self.max_distance
    }

    /// Radius of the sphere's slice at `altitude`, if non-empty.
    pub fn planar_radius(&self, altitude: f64) -> Option<f64> {
        let dz = altitude - self.z;
        let r2 = self.max_distance * self.max_distance - dz * dz;
        (r2 >= 0.0).then(|| r2.sqrt())
    }
}

/// Per-member constraints for a group of `members.len()` users sharing one FAP.
pub fn member_constraints(
    members: &[(usize, GroundUser)],
    budget: &LinkBudget,
    table: &McsTable,
) -> Result<Vec<MemberConstraint>> {
    let n = members.len();
    members
        .iter()
        .map(|&(gu, u)| {
            let target_snr =
                rf_link::target_snr(budget, table, u.offered_load, n).map_err(|_| PlanError::InfeasibleDemand {
                    gu,
                    load: u.offered_load,
                })?;
            Ok(MemberConstraint {
                gu,
                x: u.x,
                y: u.y,
                z: u.z,
                offered_load: u.offered_load,
                target_snr,
                max_distance: rf_link::distance_for_snr(budget, target_snr),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarthestPair {
    pub a: Cell,
    pub b: Cell,
    /// Plane distance between `a` and `b`, m.
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct Region {
    pub group_id: usize,
    pub altitude: f64,
    pub lattice: Lattice,
    pub constraints: Vec<MemberConstraint>,
    cells: CellSet,
    centroid: Option<Point>,
    perimeter: Vec<Cell>,
}

impl Region {
    pub fn new(
        group_id: usize,
        altitude: f64,
        lattice: Lattice,
        constraints: Vec<MemberConstraint>,
        cells: CellSet,
    ) -> Self {
        let mut r = Self {
            group_id,
            altitude,
            lattice,
            constraints,
            cells,
            centroid: None,
            perimeter: Vec::new(),
        };
        r.refresh();
        r
    }

    fn refresh(&mut self) {
        match centroid_and_perimeter(&self.cells, &self.lattice) {
            Ok((c, p)) => {
                self.centroid = Some(c);
                self.perimeter = p;
            }
            Err(_) => {
                self.centroid = None;
                self.perimeter.clear();
            }
        }
    }

    pub fn cells(&self) -> &CellSet {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.cells.contains(c)
    }

    /// Nearest-cell membership test for a continuous plane point.
    pub fn contains_point(&self, p: Point) -> bool {
        self.cells.contains(self.lattice.nearest_cell(p))
    }

    /// True when `p` at `altitude` lies within every member's sphere.
    pub fn admits(&self, p: Point, altitude: f64) -> bool {
        self.constraints.iter().all(|m| m.admits(p, altitude))
    }

    pub fn centroid(&self) -> Option<Point> {
        self.centroid
    }

    pub fn perimeter(&self) -> &[Cell] {
        &self.perimeter
    }

    /// Hover position: the centroid when its nearest cell belongs to the
    /// region, otherwise the member cell closest to the centroid.
    pub fn hover_point(&self) -> Option<Point> {
        let c = self.centroid?;
        if self.contains_point(c) {
            return Some(c);
        }
        self.cells
            .iter()
            .map(|cell| (self.lattice.point(cell).dist(c), cell))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, cell)| self.lattice.point(cell))
    }

    pub fn farthest_pair(&self) -> Result<FarthestPair> {
        farthest_pair(&self.perimeter, self.lattice.step)
    }

    /// CSV with header `x,y,perimeter` listing every cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,perimeter")?;
        let perim: HashSet<Cell> = self.perimeter.iter().copied().collect();
        for c in self.cells.iter() {
            let p = self.lattice.point(c);
            writeln!(out, "{},{},{}", p.x, p.y, u8::from(perim.contains(&c)))?;
        }
        Ok(())
    }
}

/// Lattice cells at the group altitude that satisfy every member's distance
/// constraint. With `bounds`, cells are also clipped to that index box.
pub fn intersection_region(
    group_id: usize,
    members: &[(usize, GroundUser)],
    budget: &LinkBudget,
    table: &McsTable,
    lattice: Lattice,
    altitude: f64,
    bounds: Option<(Cell, Cell)>,
) -> Result<Region> {
    if members.is_empty() {
        return Err(PlanError::domain("group has no members"));
    }
    let constraints = member_constraints(members, budget, table)?;
    let (mut xl, mut xh, mut yl, mut yh) = (i32::MIN, i32::MAX, i32::MIN, i32::MAX);
    for m in &constraints {
        let rho = m
            .planar_radius(altitude)
            .ok_or(PlanError::EmptyRegion { group: group_id })?;
        let (a, b) = lattice.index_range(lattice.origin_x, m.x - rho, m.x + rho);
        let (c, d) = lattice.index_range(lattice.origin_y, m.y - rho, m.y + rho);
        xl = xl.max(a);
        xh = xh.min(b);
        yl = yl.max(c);
        yh = yh.min(d);
    }
    if let Some((lo, hi)) = bounds {
        xl = xl.max(lo.x);
        yl = yl.max(lo.y);
        xh = xh.min(hi.x);
        yh = yh.min(hi.y);
    }
    let cells = CellSet::from_box(xl, xh, yl, yh, |c| {
        let p = lattice.point(c);
        constraints.iter().all(|m| m.admits(p, altitude))
    });
    if cells.is_empty() {
        return Err(PlanError::EmptyRegion { group: group_id });
    }
    Ok(Region::new(group_id, altitude, lattice, constraints, cells))
}

/// Drops cells already claimed by earlier groups.
pub fn remove_overlap(region: &Region, previously_assigned: &HashSet<Cell>) -> Result<Region> {
    let mut cells = region.cells.clone();
    for c in region.cells.iter() {
        if previously_assigned.contains(&c) {
            cells.remove(c);
        }
    }
    if cells.is_empty() {
        return Err(PlanError::EmptyRegion { group: region.group_id });
    }
    Ok(Region::new(
        region.group_id,
        region.altitude,
        region.lattice,
        region.constraints.clone(),
        cells,
    ))
}

/// Mean cell position and the cells with at least one 4-neighbour outside
/// the set, in `(x, y)` order.
pub fn centroid_and_perimeter(cells: &CellSet, lattice: &Lattice) -> Result<(Point, Vec<Cell>)> {
    if cells.is_empty() {
        return Err(PlanError::domain("centroid of an empty region"));
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    let mut perimeter = Vec::new();
    for c in cells.iter() {
        let p = lattice.point(c);
        sx += p.x;
        sy += p.y;
        let boundary = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .iter()
            .any(|(dx, dy)| !cells.contains(Cell::new(c.x + dx, c.y + dy)));
        if boundary {
            perimeter.push(c);
        }
    }
    let n = cells.len() as f64;
    Ok((Point::new(sx / n, sy / n), perimeter))
}

fn cross(o: Cell, a: Cell, b: Cell) -> i64 {
    (a.x - o.x) as i64 * (b.y - o.y) as i64 - (a.y - o.y) as i64 * (b.x - o.x) as i64
}

/// Strict convex hull (collinear points dropped), counter-clockwise.
pub fn convex_hull(points: &[Cell]) -> Vec<Cell> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Cell> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Farthest-apart pair of points. Ties resolve to the lexicographically
/// smallest `(a, b)` with `a < b`.
///
/// Any farthest pair consists of strict hull vertices, so only those are
/// compared; integer arithmetic keeps tie-breaking exact.
pub fn farthest_pair(points: &[Cell], step: f64) -> Result<FarthestPair> {
    let hull = convex_hull(points);
    if hull.len() < 2 {
        return Err(PlanError::Degenerate(format!(
            "farthest pair needs two distinct points, got {}",
            hull.len()
        )));
    }
    let mut best: Option<(i64, Cell, Cell)> = None;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let (a, b) = if hull[i] < hull[j] {
                (hull[i], hull[j])
            } else {
                (hull[j], hull[i])
            };
            let d = a.dist2(b);
            let better = match best {
                None => true,
                Some((bd, ba, bb)) => d > bd || (d == bd && (a, b) < (ba, bb)),
            };
            if better {
                best = Some((d, a, b));
            }
        }
    }
    let (d, a, b) = best.expect("hull has two points");
    Ok(FarthestPair {
        a,
        b,
        distance: (d as f64).sqrt() * step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    const UNIT: Lattice = Lattice {
        origin_x: 0.0,
        origin_y: 0.0,
        step: 1.0,
    };

    fn gu(x: f64, y: f64, load: f64) -> GroundUser {
        GroundUser {
            x,
            y,
            z: 0.0,
            offered_load: load,
        }
    }

    /// Budget whose single-user 53 Mbit/s radius is exactly `d` metres.
    fn budget_for_radius(d: f64) -> LinkBudget {
        let b = LinkBudget::default();
        let current = rf_link::max_distance_for_rate(&b, &McsTable::default(), 53.0, 1).unwrap();
        LinkBudget {
            tx_power: b.tx_power + 20.0 * (d / current).log10(),
            ..b
        }
    }

    fn brute_cells(members: &[MemberConstraint], altitude: f64, span: i32) -> Vec<Cell> {
        let mut out = Vec::new();
        for x in -span..=span {
            for y in -span..=span {
                let p = UNIT.point(Cell::new(x, y));
                if members.iter().all(|m| {
                    let d = ((p.x - m.x).powi(2) + (p.y - m.y).powi(2) + (altitude - m.z).powi(2)).sqrt();
                    d <= m.max_distance
                }) {
                    out.push(Cell::new(x, y));
                }
            }
        }
        out
    }

    fn brute_perimeter(cells: &[Cell]) -> Vec<Cell> {
        let set: HashSet<Cell> = cells.iter().copied().collect();
        let mut out: Vec<Cell> = cells
            .iter()
            .copied()
            .filter(|c| {
                !(set.contains(&Cell::new(c.x + 1, c.y))
                    && set.contains(&Cell::new(c.x - 1, c.y))
                    && set.contains(&Cell::new(c.x, c.y + 1))
                    && set.contains(&Cell::new(c.x, c.y - 1)))
            })
            .collect();
        out.sort();
        out
    }

    fn brute_farthest(points: &[Cell]) -> (Cell, Cell, i64) {
        let mut best: Option<(i64, Cell, Cell)> = None;
        for &p in points {
            for &q in points {
                if p >= q {
                    continue;
                }
                let d = p.dist2(q);
                if best.is_none_or(|(bd, ba, bb)| d > bd || (d == bd && (p, q) < (ba, bb))) {
                    best = Some((d, p, q));
                }
            }
        }
        let (d, a, b) = best.unwrap();
        (a, b, d)
    }

    #[test]
    fn single_user_disc_matches_scan() {
        let b = budget_for_radius(100.0);
        let members = [(0, gu(0.0, 0.0, 53.0))];
        let r = intersection_region(0, &members, &b, &McsTable::default(), UNIT, 6.0, None).unwrap();
        let expected = brute_cells(&r.constraints, 6.0, 110);
        let got: Vec<Cell> = r.cells().iter().collect();
        assert_eq!(got, expected);
        let rho = r.constraints[0].planar_radius(6.0).unwrap();
        assert!((rho - (100f64.powi(2) - 36.0).sqrt()).abs() < 1e-9);
        let c = r.centroid().unwrap();
        assert!(c.x.abs() <= 0.5 && c.y.abs() <= 0.5);
    }

    #[test]
    fn coincident_users_share_the_two_user_radius() {
        let b = LinkBudget::default();
        let t = McsTable::default();
        let pair = [(0, gu(10.0, 10.0, 40.0)), (1, gu(10.0, 10.0, 40.0))];
        let r2 = intersection_region(0, &pair, &b, &t, UNIT, 6.0, None).unwrap();
        let single_at_two = rf_link::max_distance_for_rate(&b, &t, 40.0, 2).unwrap();
        let expect = brute_cells(
            &[MemberConstraint {
                gu: 0,
                x: 10.0,
                y: 10.0,
                z: 0.0,
                offered_load: 40.0,
                target_snr: 0.0,
                max_distance: single_at_two,
            }],
            6.0,
            200,
        );
        assert_eq!(r2.cells().iter().collect::<Vec<_>>(), expect);
    }

    #[test]
    fn touching_discs_give_midpoint_lens() {
        // Planar radius exactly 20 for both users, centres 40 apart.
        let d = (20f64.powi(2) + 36.0).sqrt();
        let b = budget_for_radius(d);
        let members = [(0, gu(-20.0, 0.0, 53.0)), (1, gu(20.0, 0.0, 53.0))];
        let t = McsTable::default();
        // the pair shares the channel, so give each the two-user radius
        let b2 = LinkBudget {
            tx_power: b.tx_power
                + (t.min_entry_for_rate(53.0, 2).unwrap().min_snr - t.min_entry_for_rate(53.0, 1).unwrap().min_snr),
            ..b
        };
        let r = intersection_region(0, &members, &b2, &t, UNIT, 6.0, None).unwrap();
        let expect = brute_cells(&r.constraints, 6.0, 40);
        assert_eq!(r.cells().iter().collect::<Vec<_>>(), expect);
        assert!(!expect.is_empty() && expect.len() <= 3);
        assert!(expect.contains(&Cell::new(0, 0)));
    }

    #[test]
    fn altitude_above_reach_is_empty() {
        let b = budget_for_radius(5.0);
        let members = [(0, gu(0.0, 0.0, 53.0))];
        let err = intersection_region(3, &members, &b, &McsTable::default(), UNIT, 6.0, None).unwrap_err();
        assert!(matches!(err, PlanError::EmptyRegion { group: 3 }));
    }

    #[test]
    fn overlap_removal_cases() {
        let b = budget_for_radius(20.0);
        let t = McsTable::default();
        let r = intersection_region(0, &[(0, gu(0.0, 0.0, 53.0))], &b, &t, UNIT, 6.0, None).unwrap();
        let far: HashSet<Cell> = (0..10).map(|k| Cell::new(500 + k, 0)).collect();
        let same = remove_overlap(&r, &far).unwrap();
        assert_eq!(same.cells(), r.cells());

        let all: HashSet<Cell> = r.cells().iter().collect();
        assert!(matches!(
            remove_overlap(&r, &all),
            Err(PlanError::EmptyRegion { group: 0 })
        ));

        let left: HashSet<Cell> = r.cells().iter().filter(|c| c.x < 0).collect();
        let half = remove_overlap(&r, &left).unwrap();
        let remaining: Vec<Cell> = r.cells().iter().filter(|c| c.x >= 0).collect();
        let n = remaining.len() as f64;
        let cx = remaining.iter().map(|c| c.x as f64).sum::<f64>() / n;
        let cy = remaining.iter().map(|c| c.y as f64).sum::<f64>() / n;
        let c = half.centroid().unwrap();
        assert!(c.x > r.centroid().unwrap().x + 1.0);
        assert!((c.x - cx).abs() < 1e-9 && (c.y - cy).abs() < 1e-9);
        assert_eq!(half.perimeter(), brute_perimeter(&remaining).as_slice());
    }

    #[test]
    fn two_cell_region() {
        let cells = CellSet::from_cells(&[Cell::new(3, 4), Cell::new(4, 4)]);
        let (c, p) = centroid_and_perimeter(&cells, &UNIT).unwrap();
        assert_eq!(c, Point::new(3.5, 4.0));
        assert_eq!(p, vec![Cell::new(3, 4), Cell::new(4, 4)]);
        assert!(centroid_and_perimeter(&CellSet::empty(), &UNIT).is_err());
    }

    #[test]
    fn farthest_pair_basic_shapes() {
        let rect: Vec<Cell> = (0..=60).flat_map(|x| (0..=20).map(move |y| Cell::new(x, y))).collect();
        let set = CellSet::from_cells(&rect);
        let (_, perim) = centroid_and_perimeter(&set, &UNIT).unwrap();
        let fp = farthest_pair(&perim, 1.0).unwrap();
        assert_eq!((fp.a, fp.b), (Cell::new(0, 0), Cell::new(60, 20)));
        assert!((fp.distance - (60f64 * 60.0 + 400.0).sqrt()).abs() < 1e-9);

        let disc: Vec<Cell> = (-30..=30)
            .flat_map(|x| (-30..=30).map(move |y| Cell::new(x, y)))
            .filter(|c| c.dist2(Cell::new(0, 0)) <= 900)
            .collect();
        let set = CellSet::from_cells(&disc);
        let (_, perim) = centroid_and_perimeter(&set, &UNIT).unwrap();
        let fp = farthest_pair(&perim, 1.0).unwrap();
        assert!((fp.distance - 60.0).abs() <= 1.0);

        assert!(matches!(
            farthest_pair(&[Cell::new(1, 1)], 1.0),
            Err(PlanError::Degenerate(_))
        ));
        assert!(matches!(
            farthest_pair(&[Cell::new(1, 1), Cell::new(1, 1)], 1.0),
            Err(PlanError::Degenerate(_))
        ));
    }

    #[test]
    fn farthest_pair_matches_exhaustive_on_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let pts: Vec<Cell> = (0..200)
                .map(|_| Cell::new(rng.gen_range(-40..40), rng.gen_range(-25..25)))
                .collect();
            let fp = farthest_pair(&pts, 1.0).unwrap();
            let (a, b, d) = brute_farthest(&pts);
            assert_eq!((fp.a, fp.b), (a, b));
            assert!((fp.distance - (d as f64).sqrt()).abs() < 1e-12);
        }
    }

    /// Random blob: union of a few random discs.
    pub(crate) fn random_blob(rng: &mut impl Rng) -> Vec<Cell> {
        let discs: Vec<(i32, i32, i32)> = (0..rng.gen_range(1..5))
            .map(|_| (rng.gen_range(-15..15), rng.gen_range(-15..15), rng.gen_range(2..12)))
            .collect();
        let mut cells = Vec::new();
        for x in -30..=30 {
            for y in -30..=30 {
                if discs
                    .iter()
                    .any(|&(cx, cy, r)| (x - cx).pow(2) + (y - cy).pow(2) <= r * r)
                {
                    cells.push(Cell::new(x, y));
                }
            }
        }
        cells
    }

    #[test]
    fn perimeter_matches_scan_on_random_blobs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let cells = random_blob(&mut rng);
            let set = CellSet::from_cells(&cells);
            let (_, perim) = centroid_and_perimeter(&set, &UNIT).unwrap();
            assert_eq!(perim, brute_perimeter(&cells));
            if perim.len() >= 2 {
                let fp = farthest_pair(&perim, 1.0).unwrap();
                let (a, b, _) = brute_farthest(&perim);
                assert_eq!((fp.a, fp.b), (a, b));
            }
        }
    }

    #[test]
    fn ring_centroid_snaps_to_member_cell() {
        let ring: Vec<Cell> = (-20..=20)
            .flat_map(|x| (-20..=20).map(move |y| Cell::new(x, y)))
            .filter(|c| {
                let d = c.dist2(Cell::new(0, 0));
                (100..=400).contains(&d)
            })
            .collect();
        let r = Region::new(0, 6.0, UNIT, Vec::new(), CellSet::from_cells(&ring));
        let c = r.centroid().unwrap();
        assert!(!r.contains_point(c));
        let h = r.hover_point().unwrap();
        assert!(r.contains_point(h));
        assert!((h.dist(c) - 10.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn adding_member_or_load_never_enlarges(
            x1 in 0.0f64..100.0, y1 in 0.0f64..100.0,
            x2 in 0.0f64..100.0, y2 in 0.0f64..100.0,
            l1 in 1.0f64..60.0, l2 in 1.0f64..60.0, extra in 0.0f64..100.0,
        ) {
            let b = LinkBudget::default();
            let t = McsTable::default();
            let a = [(0, gu(x1, y1, l1))];
            let ab = [(0, gu(x1, y1, l1)), (1, gu(x2, y2, l2))];
            let heavier = [(0, gu(x1, y1, l1 + extra))];
            let ra = intersection_region(0, &a, &b, &t, UNIT, 6.0, None).unwrap();
            if let Ok(rab) = intersection_region(0, &ab, &b, &t, UNIT, 6.0, None) {
                prop_assert!(rab.cells().iter().all(|c| ra.contains(c)));
                for c in rab.cells().iter() {
                    let p = UNIT.point(c);
                    for m in &rab.constraints {
                        prop_assert!(m.distance_to(p, 6.0) <= m.max_distance);
                    }
                }
            }
            if let Ok(rh) = intersection_region(0, &heavier, &b, &t, UNIT, 6.0, None) {
                prop_assert!(rh.cells().iter().all(|c| ra.contains(c)));
            }
        }

        #[test]
        fn centroid_within_hull(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cells = random_blob(&mut rng);
            let set = CellSet::from_cells(&cells);
            let (c, _) = centroid_and_perimeter(&set, &UNIT).unwrap();
            let hull = convex_hull(&cells);
            if hull.len() >= 3 {
                for i in 0..hull.len() {
                    let a = hull[i];
                    let b = hull[(i + 1) % hull.len()];
                    let cr = (b.x - a.x) as f64 * (c.y - a.y as f64) - (b.y - a.y) as f64 * (c.x - a.x as f64);
                    prop_assert!(cr >= -1e-9);
                }
            }
        }
    }
}
