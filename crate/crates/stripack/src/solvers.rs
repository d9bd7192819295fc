//! Baseline solvers: an exact branch-and-bound oracle for small instances,
//! classical shelf heuristics (NFDH, FFDH), a bottom-left heuristic, and an
//! exhaustive 3-Partition solver used as a test oracle.

use std::time::Instant;

use thiserror::Error;

use crate::model::{area_lower_bound, Coord, Instance, Item, Packing, Placement, Rect};
use crate::reduction::{ThreePartitionInstance, TripleCover};

/// Which packing algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Exact,
    Nfdh,
    Ffdh,
    BottomLeft,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Exact => "exact",
            Algorithm::Nfdh => "nfdh",
            Algorithm::Ffdh => "ffdh",
            Algorithm::BottomLeft => "bl",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        match s {
            "exact" => Some(Algorithm::Exact),
            "nfdh" => Some(Algorithm::Nfdh),
            "ffdh" => Some(Algorithm::Ffdh),
            "bl" | "bottom_left" | "bottom-left" => Some(Algorithm::BottomLeft),
            _ => None,
        }
    }
}

/// Limits for the exact solver. `max_items` caps the instance size the
/// branch-and-bound will even attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub node_limit: u64,
    pub time_limit_ms: u64,
    pub max_items: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Exact,
            node_limit: 20_000_000,
            time_limit_ms: 600_000,
            max_items: 10,
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("instance has {count} items, exact solver cap is {cap}")]
    TooManyItems { count: usize, cap: usize },
    #[error("search limit exceeded after {nodes} nodes; incumbent height {} is unproven", best.height)]
    LimitExceeded { best: Packing, nodes: u64 },
}

/// Runs the algorithm selected by the config.
pub fn solve(instance: &Instance, config: &SolverConfig) -> Result<Packing, SolveError> {
    match config.algorithm {
        Algorithm::Exact => solve_exact(instance, config),
        Algorithm::Nfdh => Ok(solve_nfdh(instance)),
        Algorithm::Ffdh => Ok(solve_ffdh(instance)),
        Algorithm::BottomLeft => Ok(solve_bottom_left(instance)),
    }
}

/// Subset sums of the given values, deduplicated, ascending, capped.
fn subset_sums(values: &[Coord], cap: Coord) -> Vec<Coord> {
    let mut sums = vec![0];
    for &v in values {
        let mut next: Vec<Coord> = sums
            .iter()
            .map(|&s| s + v)
            .filter(|&s| s <= cap)
            .collect();
        sums.append(&mut next);
        sums.sort_unstable();
        sums.dedup();
    }
    sums
}

/// Provably minimum-height packing via branch-and-bound.
///
/// Items are placed in order of decreasing area. Candidate coordinates are
/// restricted to normal patterns: sums of subsets of item widths (for x)
/// and heights (for y). This is sound for minimum-height strip packing by
/// the standard dominance argument: any packing can be normalized by
/// repeatedly sliding items left and down until each item either touches
/// the strip boundary or another item, at which point every coordinate is
/// a subset sum; the normalization never increases the height, so at least
/// one optimal packing survives the restriction.
pub fn solve_exact(instance: &Instance, config: &SolverConfig) -> Result<Packing, SolveError> {
    let count = instance.len();
    if count > config.max_items {
        return Err(SolveError::TooManyItems {
            count,
            cap: config.max_items,
        });
    }
    if count == 0 {
        return Ok(Packing {
            height: 0,
            placements: vec![],
        });
    }

    let lb = area_lower_bound(instance);
    let seed = solve_nfdh(instance);
    if seed.height == lb {
        return Ok(seed);
    }

    let mut order: Vec<&Item> = instance.items().iter().collect();
    order.sort_by(|a, b| (b.area(), a.id).cmp(&(a.area(), b.id)));

    let widths: Vec<Coord> = order.iter().map(|it| it.w).collect();
    let heights: Vec<Coord> = order.iter().map(|it| it.h).collect();
    let xs = subset_sums(&widths, instance.width() - 1);
    let ys = subset_sums(&heights, seed.height - 1);

    struct Search<'a> {
        order: &'a [&'a Item],
        width: Coord,
        xs: &'a [Coord],
        ys: &'a [Coord],
        lb: Coord,
        best_height: Coord,
        best: Vec<(u64, Coord, Coord)>,
        current: Vec<Rect>,
        ids: Vec<u64>,
        nodes: u64,
        node_limit: u64,
        deadline: Instant,
        hit_limit: bool,
    }

    impl Search<'_> {
        fn run(&mut self, depth: usize, top: Coord) {
            if self.hit_limit || self.best_height == self.lb {
                return;
            }
            if depth == self.order.len() {
                // Strictly better by construction of the candidate filter.
                self.best_height = top;
                self.best = self
                    .current
                    .iter()
                    .zip(&self.ids)
                    .map(|(r, &id)| (id, r.x, r.y))
                    .collect();
                return;
            }
            let item = self.order[depth];
            for &y in self.ys {
                if y + item.h >= self.best_height + 1 {
                    break;
                }
                for &x in self.xs {
                    if x + item.w > self.width {
                        break;
                    }
                    self.nodes += 1;
                    if self.nodes > self.node_limit {
                        self.hit_limit = true;
                        return;
                    }
                    if self.nodes % 8192 == 0 && Instant::now() >= self.deadline {
                        self.hit_limit = true;
                        return;
                    }
                    let rect = Rect::new(x, y, item.w, item.h);
                    if self.current.iter().any(|r| r.overlaps(&rect)) {
                        continue;
                    }
                    let new_top = top.max(rect.top());
                    if new_top.max(self.lb) >= self.best_height {
                        continue;
                    }
                    self.current.push(rect);
                    self.ids.push(item.id);
                    self.run(depth + 1, new_top);
                    self.current.pop();
                    self.ids.pop();
                    if self.hit_limit || self.best_height == self.lb {
                        return;
                    }
                }
            }
        }
    }

    let deadline = Instant::now() + std::time::Duration::from_millis(config.time_limit_ms);
    let mut search = Search {
        order: &order,
        width: instance.width(),
        xs: &xs,
        ys: &ys,
        lb,
        best_height: seed.height,
        best: Vec::new(),
        current: Vec::with_capacity(count),
        ids: Vec::with_capacity(count),
        nodes: 0,
        node_limit: config.node_limit,
        deadline,
        hit_limit: false,
    };
    search.run(0, 0);

    let packing = if search.best.is_empty() {
        seed
    } else {
        let mut placements: Vec<Placement> = search
            .best
            .iter()
            .map(|&(item_id, x, y)| Placement { item_id, x, y })
            .collect();
        placements.sort_unstable_by_key(|p| p.item_id);
        Packing {
            height: search.best_height,
            placements,
        }
    };
    if search.hit_limit {
        return Err(SolveError::LimitExceeded {
            best: packing,
            nodes: search.nodes,
        });
    }
    Ok(packing)
}

/// Items sorted by non-increasing height, packed into shelves; a new shelf
/// opens when the current one runs out of width.
pub fn solve_nfdh(instance: &Instance) -> Packing {
    let mut order: Vec<&Item> = instance.items().iter().collect();
    order.sort_by(|a, b| (b.h, a.id).cmp(&(a.h, b.id)));
    let mut placements = Vec::with_capacity(order.len());
    let mut shelf_y = 0;
    let mut shelf_h = 0;
    let mut cursor = 0;
    for item in order {
        if cursor + item.w > instance.width() {
            shelf_y += shelf_h;
            shelf_h = 0;
            cursor = 0;
        }
        if shelf_h == 0 {
            shelf_h = item.h;
        }
        placements.push(Placement {
            item_id: item.id,
            x: cursor,
            y: shelf_y,
        });
        cursor += item.w;
    }
    placements.sort_unstable_by_key(|p| p.item_id);
    Packing {
        height: shelf_y + shelf_h,
        placements,
    }
}

/// Like NFDH but each item goes to the first shelf with room.
pub fn solve_ffdh(instance: &Instance) -> Packing {
    let mut order: Vec<&Item> = instance.items().iter().collect();
    order.sort_by(|a, b| (b.h, a.id).cmp(&(a.h, b.id)));
    // (y, height, cursor) per shelf.
    let mut shelves: Vec<(Coord, Coord, Coord)> = Vec::new();
    let mut placements = Vec::with_capacity(order.len());
    for item in order {
        let slot = shelves
            .iter()
            .position(|&(_, _, cursor)| cursor + item.w <= instance.width());
        let shelf = match slot {
            Some(i) => i,
            None => {
                let y = shelves.last().map(|&(y, h, _)| y + h).unwrap_or(0);
                shelves.push((y, item.h, 0));
                shelves.len() - 1
            }
        };
        let (y, _, cursor) = shelves[shelf];
        placements.push(Placement {
            item_id: item.id,
            x: cursor,
            y,
        });
        shelves[shelf].2 += item.w;
    }
    placements.sort_unstable_by_key(|p| p.item_id);
    let height = shelves.last().map(|&(y, h, _)| y + h).unwrap_or(0);
    Packing { height, placements }
}

/// Places items in input order at the lowest, then leftmost, feasible
/// position. Candidate coordinates are strip edges plus edges of already
/// placed items, which always contain the true lowest-leftmost position.
pub fn solve_bottom_left(instance: &Instance) -> Packing {
    let mut placed: Vec<Rect> = Vec::with_capacity(instance.len());
    let mut placements = Vec::with_capacity(instance.len());
    for item in instance.items() {
        let mut ys: Vec<Coord> = std::iter::once(0)
            .chain(placed.iter().map(|r| r.top()))
            .collect();
        ys.sort_unstable();
        ys.dedup();
        let mut xs: Vec<Coord> = std::iter::once(0)
            .chain(placed.iter().map(|r| r.right()))
            .collect();
        xs.sort_unstable();
        xs.dedup();
        let mut best: Option<(Coord, Coord)> = None;
        'outer: for &y in &ys {
            for &x in &xs {
                if x + item.w > instance.width() {
                    continue;
                }
                let rect = Rect::new(x, y, item.w, item.h);
                if placed.iter().all(|r| !r.overlaps(&rect)) {
                    best = Some((y, x));
                    break 'outer;
                }
            }
        }
        let (y, x) = best.expect("an empty row above everything is always feasible");
        placed.push(Rect::new(x, y, item.w, item.h));
        placements.push(Placement {
            item_id: item.id,
            x,
            y,
        });
    }
    placements.sort_unstable_by_key(|p| p.item_id);
    let height = placed.iter().map(|r| r.top()).max().unwrap_or(0);
    Packing { height, placements }
}

/// Exhaustive 3-Partition solver: partitions indices 1..=3n into zero-sum
/// triples, or reports that none exists. Exponential; intended for n <= 6.
pub fn brute_force_3partition(tp: &ThreePartitionInstance) -> Option<TripleCover> {
    let values = tp.values();
    let len = values.len();
    let mut used = vec![false; len];
    let mut triples: Vec<[u64; 3]> = Vec::with_capacity(tp.n());

    fn rec(
        values: &[i64],
        used: &mut [bool],
        triples: &mut Vec<[u64; 3]>,
    ) -> bool {
        let first = match used.iter().position(|&u| !u) {
            Some(i) => i,
            None => return true,
        };
        used[first] = true;
        for j in first + 1..values.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            for k in j + 1..values.len() {
                if used[k] || values[first] + values[j] + values[k] != 0 {
                    continue;
                }
                used[k] = true;
                triples.push([first as u64 + 1, j as u64 + 1, k as u64 + 1]);
                if rec(values, used, triples) {
                    return true;
                }
                triples.pop();
                used[k] = false;
            }
            used[j] = false;
        }
        used[first] = false;
        false
    }

    if rec(values, &mut used, &mut triples) {
        Some(TripleCover::new(triples).expect("search yields a partition"))
    } else {
        None
    }
}
