//! Preprocessing for the repacking pipeline: OPT guessing, parameter
//! choice, item classification, height rounding, grid snapping of a
//! reference packing, the first-level cell/box partition, and relocation of
//! crossing horizontal/vertical items.
//!
//! All thresholds (epsilon, delta, mu) are exact rationals so comparisons
//! against integer dimensions are never subject to rounding. Grid and cell
//! sizes are the integer ceilings of the rational cell dimensions, which
//! keeps the row and column counts within their rational bounds.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::model::{
    area_lower_bound, ceil_div, validate_packing, BoxRegion, BoxTag, Coord, Instance, Item,
    Packing, Placement, Rect,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("no (delta, mu) candidate keeps the medium-item area within epsilon * W * opt; the opt guess is too small")]
    NoFeasiblePair,
    #[error("rounding grid collapsed below 1; opt is too small for the chosen epsilon and delta")]
    DegenerateGrid,
    #[error("item {0} of the reference packing is off the rounding grid")]
    GridViolation(u64),
    #[error("reference packing unusable: {0}")]
    InvalidReference(String),
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),
    #[error("internal invariant failed: {0}")]
    Internal(String),
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn ratio_int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn ceil_to_coord(r: &BigRational) -> Coord {
    r.ceil().to_integer().to_i64().expect("value fits in i64")
}

/// The rational knobs of the partition machinery plus the guessed optimal
/// height. Requires 0 < epsilon < 1/3 and 1 >= delta > mu > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionParams {
    pub epsilon: BigRational,
    pub delta: BigRational,
    pub mu: BigRational,
    pub opt: Coord,
}

impl PartitionParams {
    pub fn new(
        epsilon: BigRational,
        delta: BigRational,
        mu: BigRational,
        opt: Coord,
    ) -> Result<Self, StructureError> {
        if epsilon <= BigRational::zero() || epsilon >= ratio(1, 3) {
            return Err(StructureError::BadParams(format!(
                "epsilon {epsilon} outside (0, 1/3)"
            )));
        }
        if delta > BigRational::one() || mu >= delta || mu <= BigRational::zero() {
            return Err(StructureError::BadParams(format!(
                "need 1 >= delta > mu > 0, got delta {delta}, mu {mu}"
            )));
        }
        if opt < 1 {
            return Err(StructureError::BadParams(format!(
                "opt {opt} must be positive"
            )));
        }
        Ok(PartitionParams {
            epsilon,
            delta,
            mu,
            opt,
        })
    }

    /// Rounding grid: ceil(epsilon * delta * opt), at least 1.
    pub fn grid(&self) -> Coord {
        ceil_to_coord(&(&self.epsilon * &self.delta * ratio_int(self.opt)))
    }

    /// Cell width: ceil(epsilon * delta * W), at least 1.
    pub fn cell_width(&self, width: Coord) -> Coord {
        ceil_to_coord(&(&self.epsilon * &self.delta * ratio_int(width)))
    }

    /// Box-count bound K = 5 / (epsilon * delta)^2.
    pub fn k_bound(&self) -> BigRational {
        let ed = &self.epsilon * &self.delta;
        ratio_int(5) / (&ed * &ed)
    }

    /// mu <= epsilon * delta / (2 K) = (epsilon * delta)^3 / 10, the
    /// inequality the crossing-item relocation relies on.
    pub fn relocation_bound_ok(&self) -> bool {
        let ed = &self.epsilon * &self.delta;
        self.mu <= &(&ed * &ed) * &ed / ratio_int(10)
    }
}

/// The six item classes. Thresholds: large in both dimensions (L), tall
/// (T), vertical (V), horizontal (H), small in both dimensions (S), and
/// the medium remainder (M).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ItemClass {
    Large,
    Tall,
    Vertical,
    Horizontal,
    Small,
    Medium,
}

impl ItemClass {
    pub fn letter(&self) -> &'static str {
        match self {
            ItemClass::Large => "L",
            ItemClass::Tall => "T",
            ItemClass::Vertical => "V",
            ItemClass::Horizontal => "H",
            ItemClass::Small => "S",
            ItemClass::Medium => "M",
        }
    }

    pub fn parse(s: &str) -> Option<ItemClass> {
        match s {
            "L" => Some(ItemClass::Large),
            "T" => Some(ItemClass::Tall),
            "V" => Some(ItemClass::Vertical),
            "H" => Some(ItemClass::Horizontal),
            "S" => Some(ItemClass::Small),
            "M" => Some(ItemClass::Medium),
            _ => None,
        }
    }
}

/// Class assignment for every item of an instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemClassification {
    pub classes: BTreeMap<u64, ItemClass>,
}

impl ItemClassification {
    pub fn class_of(&self, id: u64) -> Option<ItemClass> {
        self.classes.get(&id).copied()
    }

    pub fn ids_in(&self, class: ItemClass) -> Vec<u64> {
        self.classes
            .iter()
            .filter(|(_, &c)| c == class)
            .map(|(&id, _)| id)
            .collect()
    }

    /// Items whose heights get rounded: L, T and V.
    pub fn is_rounded(&self, id: u64) -> bool {
        matches!(
            self.class_of(id),
            Some(ItemClass::Large | ItemClass::Tall | ItemClass::Vertical)
        )
    }
}

/// Ascending candidate heights ceil(lb * (1+eps)^k), clamped to 2 * lb.
/// Some optimal packing height always lies in [lb, 2 lb] (Steinberg), and
/// consecutive candidates differ by at most a (1+eps) factor, so one
/// candidate is within (1+eps) of OPT.
pub fn opt_candidates(instance: &Instance, epsilon: &BigRational) -> Vec<Coord> {
    let lb = area_lower_bound(instance);
    if lb == 0 {
        return vec![0];
    }
    let cap = 2 * lb;
    let factor = BigRational::one() + epsilon;
    let mut value = ratio_int(lb);
    let mut out = Vec::new();
    loop {
        let candidate = ceil_to_coord(&value).min(cap);
        if out.last() != Some(&candidate) {
            out.push(candidate);
        }
        if candidate == cap {
            return out;
        }
        value *= &factor;
    }
}

/// Chooses (delta, mu) from the candidate ladder delta_0 = epsilon,
/// delta_{j+1} = (epsilon * delta_j)^3 / 10, mu_j = delta_{j+1}, with
/// j up to ceil(2/epsilon). The medium band of rung j collects the area of
/// items whose width falls in [mu_j W, delta_j W) or height in
/// [mu_j opt, delta_j opt); the first rung whose band area is at most
/// epsilon * W * opt wins. Bands of consecutive rungs are disjoint, so such
/// a rung exists whenever opt is a feasible height.
///
/// A rung whose band contains no integer dimension at all
/// (delta * max(W, opt) < 1) has zero area and always wins, which also
/// caps how deep the cubing of the ladder denominators can go.
pub fn choose_delta_mu(
    instance: &Instance,
    epsilon: &BigRational,
    opt: Coord,
) -> Result<PartitionParams, StructureError> {
    if opt < 1 {
        return Err(StructureError::BadParams(format!(
            "opt {opt} must be positive"
        )));
    }
    let max_steps = ceil_to_coord(&(ratio_int(2) / epsilon)) as usize + 1;
    let w = ratio_int(instance.width());
    let o = ratio_int(opt);
    let budget = epsilon * &w * &o;

    let mut delta = epsilon.clone();
    for _ in 0..max_steps {
        let ed = epsilon * &delta;
        let mu = &(&ed * &ed) * &ed / ratio_int(10);
        let (w_lo, w_hi) = (&mu * &w, &delta * &w);
        let (h_lo, h_hi) = (&mu * &o, &delta * &o);
        let mut band_area = BigRational::zero();
        for item in instance.items() {
            let iw = ratio_int(item.w);
            let ih = ratio_int(item.h);
            if (iw >= w_lo && iw < w_hi) || (ih >= h_lo && ih < h_hi) {
                band_area += ratio_int(item.area());
            }
        }
        if band_area <= budget {
            return PartitionParams::new(epsilon.clone(), delta, mu, opt);
        }
        delta = mu;
    }
    Err(StructureError::NoFeasiblePair)
}

/// Assigns every item its class. Boundary items follow the inequality
/// directions exactly as written: L uses >=, T uses strict >, V uses a
/// closed height interval.
pub fn classify_items(instance: &Instance, p: &PartitionParams) -> ItemClassification {
    let w = ratio_int(instance.width());
    let o = ratio_int(p.opt);
    let delta_w = &p.delta * &w;
    let delta_o = &p.delta * &o;
    let mu_w = &p.mu * &w;
    let mu_o = &p.mu * &o;
    let third_o = &o / ratio_int(3);

    let mut classes = BTreeMap::new();
    for item in instance.items() {
        let iw = ratio_int(item.w);
        let ih = ratio_int(item.h);
        let class = if iw >= delta_w && ih >= delta_o {
            ItemClass::Large
        } else if iw < delta_w && ih > third_o {
            ItemClass::Tall
        } else if iw < mu_w && ih >= delta_o && ih <= third_o {
            ItemClass::Vertical
        } else if iw >= delta_w && ih < mu_o {
            ItemClass::Horizontal
        } else if iw < mu_w && ih < mu_o {
            ItemClass::Small
        } else {
            ItemClass::Medium
        };
        classes.insert(item.id, class);
    }
    ItemClassification { classes }
}

/// Rounds the heights of all L, T and V items up to the next multiple of
/// the grid g = ceil(epsilon * delta * opt) and returns the rounded
/// instance together with g. Identity of unchanged items is preserved.
pub fn round_heights(
    instance: &Instance,
    classification: &ItemClassification,
    p: &PartitionParams,
) -> Result<(Instance, Coord), StructureError> {
    let g = p.grid();
    if g < 1 {
        return Err(StructureError::DegenerateGrid);
    }
    let items: Vec<Item> = instance
        .items()
        .iter()
        .map(|it| {
            if classification.is_rounded(it.id) {
                let h = ceil_div(it.h, g) * g;
                Item { h, ..*it }
            } else {
                *it
            }
        })
        .collect();
    let rounded = Instance::new(instance.width(), items)
        .map_err(|e| StructureError::Internal(e.to_string()))?;
    Ok((rounded, g))
}

/// Rebuilds a valid packing of the rounded instance from a packing of the
/// original one, with every rounded item's y-coordinate snapped to a
/// multiple of the grid.
///
/// Items are lifted bottom-to-top: each item rests on the tallest already
/// lifted item below it (in the original packing), rounded items then move
/// up to the next grid line. Any two x-overlapping items are vertically
/// comparable in the original packing, so the order is well-founded and the
/// result is overlap-free. Each chain below an item carries at most 1/delta
/// rounded members, so the total lift stays within O(epsilon * opt + 1/delta).
pub fn snap_to_grid(
    original: &Instance,
    rounded: &Instance,
    classification: &ItemClassification,
    grid: Coord,
    packing: &Packing,
) -> Packing {
    let mut order: Vec<&Placement> = packing.placements.iter().collect();
    order.sort_unstable_by_key(|p| (p.y, p.item_id));

    // (x-interval, new top) of everything lifted so far, plus final spots.
    let mut lifted: Vec<(Rect, Coord)> = Vec::with_capacity(order.len());
    let mut placements = Vec::with_capacity(order.len());
    for p in order {
        let orig = original.item(p.item_id).expect("packing validated");
        let new_h = rounded.item(p.item_id).expect("same ids").h;
        let orig_rect = Rect::new(p.x, p.y, orig.w, orig.h);
        let mut y = 0;
        for (below, new_top) in &lifted {
            let x_overlap = below.x < orig_rect.right() && orig_rect.x < below.right();
            if x_overlap && below.top() <= orig_rect.y {
                y = y.max(*new_top);
            }
        }
        if classification.is_rounded(p.item_id) {
            y = ceil_div(y, grid) * grid;
        }
        lifted.push((orig_rect, y + new_h));
        placements.push(Placement {
            item_id: p.item_id,
            x: p.x,
            y,
        });
    }
    placements.sort_unstable_by_key(|p| p.item_id);
    Packing::with_computed_height(rounded, placements)
}

/// Everything the box-partition stages need, produced coherently: the
/// parameters (with opt large enough to hold the snapped reference), the
/// classification, the rounded instance, the grid, and the snapped
/// reference packing of height <= opt.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub params: PartitionParams,
    pub classification: ItemClassification,
    pub rounded: Instance,
    pub grid: Coord,
    pub reference: Packing,
}

/// Runs classification, rounding and snapping, growing the opt guess until
/// the snapped reference fits under it. When `delta_mu` is None the
/// (delta, mu) pair is re-chosen per iteration from the ladder.
pub fn prepare_reference(
    instance: &Instance,
    epsilon: &BigRational,
    delta_mu: Option<(BigRational, BigRational)>,
    reference: &Packing,
) -> Result<Prepared, StructureError> {
    let report = validate_packing(instance, reference)
        .map_err(|e| StructureError::InvalidReference(e.to_string()))?;
    if !report.is_valid() {
        return Err(StructureError::InvalidReference(format!(
            "{} violations",
            report.violations.len()
        )));
    }
    if instance.is_empty() {
        return Err(StructureError::InvalidReference(
            "instance has no items".into(),
        ));
    }

    let mut opt = reference.height.max(1);
    for _ in 0..256 {
        let params = match &delta_mu {
            Some((delta, mu)) => {
                PartitionParams::new(epsilon.clone(), delta.clone(), mu.clone(), opt)?
            }
            None => choose_delta_mu(instance, epsilon, opt)?,
        };
        let classification = classify_items(instance, &params);
        let (rounded, grid) = round_heights(instance, &classification, &params)?;
        let snapped = snap_to_grid(instance, &rounded, &classification, grid, reference);
        if snapped.height <= opt {
            debug_assert!(validate_packing(&rounded, &snapped)
                .map(|r| r.is_valid())
                .unwrap_or(false));
            return Ok(Prepared {
                params,
                classification,
                rounded,
                grid,
                reference: snapped,
            });
        }
        opt = snapped.height;
    }
    Err(StructureError::Internal(
        "opt fixpoint failed to converge".into(),
    ))
}

/// A partition of the W x opt area into tagged boxes. `assignment` maps
/// each large item to the index of the box built around it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxPartition {
    pub area: (Coord, Coord),
    pub boxes: Vec<BoxRegion>,
    pub assignment: BTreeMap<u64, usize>,
}

impl BoxPartition {
    pub fn boxes_tagged(&self, tag: BoxTag) -> impl Iterator<Item = (usize, &BoxRegion)> {
        self.boxes
            .iter()
            .enumerate()
            .filter(move |(_, b)| b.tag == tag)
    }

    /// Sum of box areas; equals W * opt when the partition tiles the area.
    pub fn covered_area(&self) -> i128 {
        self.boxes
            .iter()
            .map(|b| b.rect.w as i128 * b.rect.h as i128)
            .sum()
    }
}

/// Items crossed by partition boundaries, by class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrossingSets {
    pub horizontal: Vec<u64>,
    pub vertical: Vec<u64>,
    pub tall: Vec<u64>,
}

/// Builds the first-level partition of W x opt: one box per large item;
/// grid cells classified horizontal or vertical by the items crossing
/// them; mixed cells split at the outermost edges separating vertical from
/// horizontal items; vertical rectilinear pieces cut into rectangles by
/// extending their vertical edges. Returns the boxes plus the crossed
/// H' / V' / T' item sets.
pub fn build_level1_partition(
    rounded: &Instance,
    classification: &ItemClassification,
    p: &PartitionParams,
    reference: &Packing,
) -> Result<(BoxPartition, CrossingSets), StructureError> {
    let report = validate_packing(rounded, reference)
        .map_err(|e| StructureError::InvalidReference(e.to_string()))?;
    if !report.is_valid() {
        return Err(StructureError::InvalidReference(format!(
            "{} violations",
            report.violations.len()
        )));
    }
    if reference.height > p.opt {
        return Err(StructureError::InvalidReference(format!(
            "reference height {} exceeds opt {}",
            reference.height, p.opt
        )));
    }
    let g = p.grid();
    if g < 1 {
        return Err(StructureError::DegenerateGrid);
    }
    for placement in &reference.placements {
        if classification.is_rounded(placement.item_id) {
            let item = rounded.item(placement.item_id).expect("validated");
            if placement.y % g != 0 || item.h % g != 0 {
                return Err(StructureError::GridViolation(placement.item_id));
            }
        }
    }

    let width = rounded.width();
    let opt = p.opt;
    let cell_w = p.cell_width(width);
    let rows = ceil_div(opt, g);
    let cols = ceil_div(width, cell_w);

    let rect_of = |pl: &Placement| {
        let item = rounded.item(pl.item_id).expect("validated");
        Rect::new(pl.x, pl.y, item.w, item.h)
    };
    let class_rects = |class: ItemClass| -> Vec<(u64, Rect)> {
        let mut v: Vec<(u64, Rect)> = reference
            .placements
            .iter()
            .filter(|pl| classification.class_of(pl.item_id) == Some(class))
            .map(|pl| (pl.item_id, rect_of(pl)))
            .collect();
        v.sort_unstable_by_key(|(id, _)| *id);
        v
    };
    let large = class_rects(ItemClass::Large);
    let mut upright = class_rects(ItemClass::Tall);
    upright.extend(class_rects(ItemClass::Vertical));
    let flat = class_rects(ItemClass::Horizontal);

    let mut boxes: Vec<BoxRegion> = Vec::new();
    let mut assignment = BTreeMap::new();
    for (id, rect) in &large {
        assignment.insert(*id, boxes.len());
        boxes.push(BoxRegion {
            rect: *rect,
            tag: BoxTag::Large,
        });
    }

    // Per row: horizontal intervals to merge; per column band: the vertical
    // fragment interval of each row.
    let mut horiz: Vec<Vec<(Coord, Coord)>> = vec![Vec::new(); rows as usize];
    let mut vert: Vec<Vec<Option<(Coord, Coord)>>> =
        vec![vec![None; rows as usize]; cols as usize];

    for row in 0..rows {
        let y0 = row * g;
        let y1 = ((row + 1) * g).min(opt);
        for col in 0..cols {
            let cx0 = col * cell_w;
            let cx1 = ((col + 1) * cell_w).min(width);
            let cell = Rect::new(cx0, y0, cx1 - cx0, y1 - y0);

            // Large items cut the cell only from the sides.
            let mut x_lo = cx0;
            let mut x_hi = cx1;
            for (_, lr) in &large {
                if lr.overlaps(&cell) {
                    let covers_left = lr.x <= x_lo;
                    let covers_right = lr.right() >= x_hi;
                    match (covers_left, covers_right) {
                        (true, true) => {
                            x_lo = x_hi;
                        }
                        (true, false) => x_lo = x_lo.max(lr.right()),
                        (false, true) => x_hi = x_hi.min(lr.x),
                        (false, false) => {
                            return Err(StructureError::Internal(format!(
                                "large item strictly inside cell at row {row}, col {col}"
                            )))
                        }
                    }
                }
            }
            if x_lo >= x_hi {
                continue;
            }
            let frag = Rect::new(x_lo, y0, x_hi - x_lo, y1 - y0);

            let mut v_lo = None;
            let mut v_hi = None;
            for (_, r) in &upright {
                if r.overlaps(&frag) {
                    let lo = r.x.max(x_lo);
                    let hi = r.right().min(x_hi);
                    v_lo = Some(v_lo.map_or(lo, |v: Coord| v.min(lo)));
                    v_hi = Some(v_hi.map_or(hi, |v: Coord| v.max(hi)));
                }
            }
            match (v_lo, v_hi) {
                (None, None) => horiz[row as usize].push((x_lo, x_hi)),
                (Some(lo), Some(hi)) => {
                    let has_flat = flat.iter().any(|(_, r)| r.overlaps(&frag));
                    if has_flat {
                        if lo > x_lo {
                            horiz[row as usize].push((x_lo, lo));
                        }
                        if hi < x_hi {
                            horiz[row as usize].push((hi, x_hi));
                        }
                        vert[col as usize][row as usize] = Some((lo, hi));
                    } else {
                        vert[col as usize][row as usize] = Some((x_lo, x_hi));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    // Horizontal boxes: merge touching intervals within each row.
    for (row, intervals) in horiz.iter_mut().enumerate() {
        intervals.sort_unstable();
        let y0 = row as Coord * g;
        let y1 = ((row as Coord + 1) * g).min(opt);
        let mut iter = intervals.iter().copied();
        if let Some((mut lo, mut hi)) = iter.next() {
            for (a, b) in iter {
                if a == hi {
                    hi = b;
                } else {
                    boxes.push(BoxRegion {
                        rect: Rect::new(lo, y0, hi - lo, y1 - y0),
                        tag: BoxTag::Horizontal,
                    });
                    lo = a;
                    hi = b;
                }
            }
            boxes.push(BoxRegion {
                rect: Rect::new(lo, y0, hi - lo, y1 - y0),
                tag: BoxTag::Horizontal,
            });
        }
    }

    // Vertical pieces: per column band, stack fragments of consecutive rows
    // into connected rectilinear pieces, then cut at every vertical edge.
    for column in vert.iter() {
        let mut row = 0usize;
        while row < column.len() {
            if column[row].is_none() {
                row += 1;
                continue;
            }
            let start = row;
            while row + 1 < column.len() {
                let (cur, next) = (column[row].unwrap(), column[row + 1]);
                match next {
                    Some(n) if n.0 < cur.1 && cur.0 < n.1 => row += 1,
                    _ => break,
                }
            }
            let piece: Vec<(usize, (Coord, Coord))> = (start..=row)
                .map(|r| (r, column[r].unwrap()))
                .collect();
            row += 1;

            let mut cuts: Vec<Coord> = piece.iter().flat_map(|(_, (a, b))| [*a, *b]).collect();
            cuts.sort_unstable();
            cuts.dedup();
            for win in cuts.windows(2) {
                let (u, v) = (win[0], win[1]);
                // Rows of the piece covering [u, v), grouped into runs.
                let mut run_start: Option<usize> = None;
                let mut prev: Option<usize> = None;
                let flush =
                    |from: usize, to: usize, boxes: &mut Vec<BoxRegion>| {
                        let y0 = from as Coord * g;
                        let y1 = ((to as Coord + 1) * g).min(opt);
                        boxes.push(BoxRegion {
                            rect: Rect::new(u, y0, v - u, y1 - y0),
                            tag: BoxTag::Vertical,
                        });
                    };
                for (r, (a, b)) in &piece {
                    if *a <= u && *b >= v {
                        match prev {
                            Some(pr) if pr + 1 == *r => {}
                            Some(pr) => {
                                flush(run_start.unwrap(), pr, &mut boxes);
                                run_start = Some(*r);
                            }
                            None => run_start = Some(*r),
                        }
                        prev = Some(*r);
                    }
                }
                if let (Some(from), Some(to)) = (run_start, prev) {
                    flush(from, to, &mut boxes);
                }
            }
        }
    }

    let partition = BoxPartition {
        area: (width, opt),
        boxes,
        assignment,
    };
    let covered = partition.covered_area();
    if covered != width as i128 * opt as i128 {
        return Err(StructureError::Internal(format!(
            "partition covers {covered}, area is {}",
            width as i128 * opt as i128
        )));
    }

    let contained = |rect: &Rect| partition.boxes.iter().any(|b| b.rect.contains(rect));
    let mut crossing = CrossingSets::default();
    for (id, r) in &flat {
        if !contained(r) {
            crossing.horizontal.push(*id);
        }
    }
    let tall_ids = classification.ids_in(ItemClass::Tall);
    for (id, r) in &upright {
        if !contained(r) {
            if tall_ids.contains(id) {
                crossing.tall.push(*id);
            } else {
                crossing.vertical.push(*id);
            }
        }
    }
    Ok((partition, crossing))
}

/// A floating box with items packed inside it; coordinates are relative to
/// the box origin at (0, 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedBox {
    pub size: (Coord, Coord),
    pub tag: BoxTag,
    pub placements: Vec<Placement>,
}

/// Output of crossing-item relocation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelocatedCrossing {
    /// One W x ceil(epsilon * opt) box holding all of H', stacked by
    /// non-increasing width, or None when H' is empty.
    pub horizontal_box: Option<PackedBox>,
    /// One box per distinct (rounded) height holding the V' items side by
    /// side. Total width at most epsilon * W / 3.
    pub vertical_boxes: Vec<PackedBox>,
}

/// Packs the crossed horizontal items into one W x epsilon*opt box and the
/// crossed vertical items into equal-height boxes. Bounds are asserted at
/// runtime: violations mean mu was too large for the partition produced.
pub fn relocate_crossing(
    rounded: &Instance,
    p: &PartitionParams,
    crossing: &CrossingSets,
) -> Result<RelocatedCrossing, StructureError> {
    let mut out = RelocatedCrossing::default();

    if !crossing.horizontal.is_empty() {
        let mut items: Vec<&Item> = crossing
            .horizontal
            .iter()
            .map(|&id| rounded.item(id).expect("crossing ids exist"))
            .collect();
        items.sort_by(|a, b| (b.w, a.id).cmp(&(a.w, b.id)));
        let mut y = 0;
        let mut placements = Vec::with_capacity(items.len());
        for item in items {
            placements.push(Placement {
                item_id: item.id,
                x: 0,
                y,
            });
            y += item.h;
        }
        let budget = &p.epsilon * ratio_int(p.opt);
        if ratio_int(y) > budget {
            return Err(StructureError::CapacityExceeded(format!(
                "H' stack height {y} exceeds epsilon * opt = {budget}"
            )));
        }
        out.horizontal_box = Some(PackedBox {
            size: (rounded.width(), ceil_to_coord(&budget)),
            tag: BoxTag::Horizontal,
            placements,
        });
    }

    if !crossing.vertical.is_empty() {
        let mut by_height: BTreeMap<Coord, Vec<&Item>> = BTreeMap::new();
        for &id in &crossing.vertical {
            let item = rounded.item(id).expect("crossing ids exist");
            by_height.entry(item.h).or_default().push(item);
        }
        let group_cap = BigRational::one() / (&p.epsilon * &p.delta);
        if ratio_int(by_height.len() as i64) > group_cap {
            return Err(StructureError::CapacityExceeded(format!(
                "{} distinct V' heights exceed 1/(epsilon delta) = {group_cap}",
                by_height.len()
            )));
        }
        let mut total_width = 0;
        for (height, mut items) in by_height {
            items.sort_by_key(|it| it.id);
            let mut x = 0;
            let mut placements = Vec::with_capacity(items.len());
            for item in items {
                placements.push(Placement {
                    item_id: item.id,
                    x,
                    y: 0,
                });
                x += item.w;
            }
            total_width += x;
            out.vertical_boxes.push(PackedBox {
                size: (x, height),
                tag: BoxTag::Vertical,
                placements,
            });
        }
        let width_budget = &p.epsilon * ratio_int(rounded.width()) / ratio_int(3);
        if ratio_int(total_width) > width_budget {
            return Err(StructureError::CapacityExceeded(format!(
                "V' total width {total_width} exceeds epsilon * W / 3 = {width_budget}"
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{solve_exact, SolverConfig};

    fn inst(width: Coord, dims: &[(Coord, Coord)]) -> Instance {
        let items = dims
            .iter()
            .enumerate()
            .map(|(i, &(w, h))| Item::new(i as u64 + 1, w, h).unwrap())
            .collect();
        Instance::new(width, items).unwrap()
    }

    fn params(e: (i64, i64), d: (i64, i64), m: (i64, i64), opt: Coord) -> PartitionParams {
        PartitionParams::new(ratio(e.0, e.1), ratio(d.0, d.1), ratio(m.0, m.1), opt).unwrap()
    }

    #[test]
    fn opt_candidates_examples() {
        // lb = 10: strip of width 1 with a 1 x 10 item.
        let i = inst(1, &[(1, 10)]);
        assert_eq!(opt_candidates(&i, &ratio(1, 2)), vec![10, 15, 20]);

        let i = inst(1, &[(1, 1)]);
        let c = opt_candidates(&i, &ratio(1, 10));
        assert!(c.contains(&1) && c.contains(&2));

        let i = inst(3, &[(3, 7)]);
        let c = opt_candidates(&i, &ratio(1, 4));
        assert_eq!(c[0], 7);
    }

    #[test]
    fn choose_delta_mu_unit_squares_takes_first_rung() {
        let dims: Vec<(Coord, Coord)> = (0..5).map(|_| (1, 1)).collect();
        let i = inst(100, &dims);
        let p = choose_delta_mu(&i, &ratio(1, 10), 100).unwrap();
        // 1 x 1 items sit below every band, so j = 0 already has zero area.
        assert_eq!(p.delta, ratio(1, 10));
        assert!(p.relocation_bound_ok());
    }

    #[test]
    fn choose_delta_mu_descends_to_an_empty_band_when_needed() {
        // 70 items of 9 x 9 fall inside the first rung's band and blow the
        // epsilon * W * opt budget, so the ladder descends until the band
        // contains no integer dimension.
        let dims: Vec<(Coord, Coord)> = (0..70).map(|_| (9, 9)).collect();
        let i = inst(100, &dims);
        let eps = ratio(1, 10);
        let p = choose_delta_mu(&i, &eps, 100).unwrap();
        assert!(p.delta < eps);
        let w_lo = &p.mu * ratio_int(100);
        let w_hi = &p.delta * ratio_int(100);
        let nine = ratio_int(9);
        assert!(!(nine >= w_lo && nine < w_hi));
        // mu <= (delta * epsilon)^3 as required.
        let de = &p.delta * &p.epsilon;
        assert!(p.mu <= &(&de * &de) * &de);
    }

    #[test]
    fn classify_six_way_example() {
        let i = inst(
            1000,
            &[(200, 500), (50, 400), (5, 200), (300, 5), (5, 5), (50, 50)],
        );
        let p = params((1, 10), (1, 10), (1, 100), 1000);
        let c = classify_items(&i, &p);
        assert_eq!(c.class_of(1), Some(ItemClass::Large));
        assert_eq!(c.class_of(2), Some(ItemClass::Tall));
        assert_eq!(c.class_of(3), Some(ItemClass::Vertical));
        assert_eq!(c.class_of(4), Some(ItemClass::Horizontal));
        assert_eq!(c.class_of(5), Some(ItemClass::Small));
        assert_eq!(c.class_of(6), Some(ItemClass::Medium));
    }

    #[test]
    fn classify_boundary_item_is_large() {
        let i = inst(1000, &[(100, 100)]);
        let p = params((1, 10), (1, 10), (1, 100), 1000);
        assert_eq!(
            classify_items(&i, &p).class_of(1),
            Some(ItemClass::Large)
        );
        let empty = Instance::new(10, vec![]).unwrap();
        assert!(classify_items(&empty, &p).classes.is_empty());
    }

    #[test]
    fn round_heights_examples() {
        // epsilon * delta * opt = 10.
        let i = inst(1000, &[(100, 250), (100, 253)]);
        let p = params((1, 10), (1, 10), (1, 100), 1000);
        let c = classify_items(&i, &p);
        assert!(c.is_rounded(1) && c.is_rounded(2));
        let (rounded, g) = round_heights(&i, &c, &p).unwrap();
        assert_eq!(g, 10);
        assert_eq!(rounded.item(1).unwrap().h, 250);
        assert_eq!(rounded.item(2).unwrap().h, 260);
    }

    #[test]
    fn round_heights_monotone_and_idempotent() {
        let i = inst(100, &[(20, 37), (15, 41), (90, 2)]);
        let p = params((1, 4), (1, 4), (1, 1000), 60);
        let c = classify_items(&i, &p);
        let (r1, g) = round_heights(&i, &c, &p).unwrap();
        for (a, b) in i.items().iter().zip(r1.items()) {
            assert!(b.h >= a.h);
        }
        let (r2, _) = round_heights(&r1, &c, &p).unwrap();
        assert_eq!(r1, r2);
        assert!(g >= 1);
    }

    #[test]
    fn snap_preserves_validity_and_grid() {
        let i = inst(6, &[(2, 5), (2, 4), (3, 2), (1, 3), (4, 1)]);
        let reference = solve_exact(&i, &SolverConfig::default()).unwrap();
        let prepared =
            prepare_reference(&i, &ratio(1, 4), Some((ratio(1, 4), ratio(1, 1000))), &reference)
                .unwrap();
        let report = validate_packing(&prepared.rounded, &prepared.reference).unwrap();
        assert!(report.is_valid(), "{:?}", report);
        assert!(prepared.reference.height <= prepared.params.opt);
        for pl in &prepared.reference.placements {
            if prepared.classification.is_rounded(pl.item_id) {
                assert_eq!(pl.y % prepared.grid, 0);
            }
        }
    }

    #[test]
    fn level1_single_large_item_fills_strip() {
        let i = inst(10, &[(10, 4)]);
        let reference = Packing {
            height: 4,
            placements: vec![Placement {
                item_id: 1,
                x: 0,
                y: 0,
            }],
        };
        // opt = 8 leaves empty rows above the item.
        let p = params((1, 4), (1, 4), (1, 1000), 8);
        let c = classify_items(&i, &p);
        let (rounded, _) = round_heights(&i, &c, &p).unwrap();
        let (partition, crossing) = build_level1_partition(&rounded, &c, &p, &reference).unwrap();
        assert_eq!(crossing, CrossingSets::default());
        assert_eq!(partition.boxes_tagged(BoxTag::Large).count(), 1);
        assert!(partition.boxes_tagged(BoxTag::Vertical).count() == 0);
        assert!(partition.boxes_tagged(BoxTag::Horizontal).count() >= 1);
        assert_eq!(
            partition.covered_area(),
            (partition.area.0 as i128) * (partition.area.1 as i128)
        );
    }

    #[test]
    fn level1_no_upright_items_gives_rows() {
        // Everything is horizontal: wide flat items, mu * opt = 2 > 1.
        let i = inst(10, &[(10, 1), (10, 1)]);
        let p = params((1, 4), (1, 2), (1, 4), 8);
        let c = classify_items(&i, &p);
        assert_eq!(c.class_of(1), Some(ItemClass::Horizontal));
        let (rounded, _) = round_heights(&i, &c, &p).unwrap();
        let reference = Packing {
            height: 2,
            placements: vec![
                Placement {
                    item_id: 1,
                    x: 0,
                    y: 0,
                },
                Placement {
                    item_id: 2,
                    x: 0,
                    y: 1,
                },
            ],
        };
        let (partition, _) = build_level1_partition(&rounded, &c, &p, &reference).unwrap();
        assert!(partition
            .boxes
            .iter()
            .all(|b| b.tag == BoxTag::Horizontal));
        // Rows of height g = 1 tile the whole area.
        assert_eq!(partition.covered_area(), 80);
    }

    #[test]
    fn relocate_crossing_examples() {
        let p = params((1, 4), (1, 4), (1, 1000), 64);
        let i = inst(100, &[(30, 2), (40, 2), (50, 2), (1, 20), (1, 24)]);
        let empty = relocate_crossing(&i, &p, &CrossingSets::default()).unwrap();
        assert_eq!(empty, RelocatedCrossing::default());

        let crossing = CrossingSets {
            horizontal: vec![1, 2, 3],
            vertical: vec![4, 5],
            tall: vec![],
        };
        let out = relocate_crossing(&i, &p, &crossing).unwrap();
        let hbox = out.horizontal_box.unwrap();
        // Stacked by non-increasing width: ids 3, 2, 1.
        assert_eq!(
            hbox.placements.iter().map(|p| p.item_id).collect::<Vec<_>>(),
            vec![3, 2, 1]
        );
        assert_eq!(hbox.placements.iter().map(|p| p.y).collect::<Vec<_>>(), vec![0, 2, 4]);
        // Two distinct heights -> two boxes of matching widths.
        assert_eq!(out.vertical_boxes.len(), 2);
        assert_eq!(out.vertical_boxes[0].size, (1, 20));
        assert_eq!(out.vertical_boxes[1].size, (1, 24));
    }
}
