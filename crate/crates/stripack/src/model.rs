//! Integer rectangle geometry, instance/packing data model, and the packing
//! validator everything else trusts.
//!
//! All coordinates and dimensions are 64-bit integers with checked
//! arithmetic; construction fails instead of overflowing. Disjointness is
//! defined on open rectangles, so boundary contact is legal.

use std::collections::HashMap;

use thiserror::Error;

/// Coordinate / dimension type used throughout the crate.
pub type Coord = i64;

/// Errors raised while constructing model values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("item {id} has non-positive dimension {w}x{h}")]
    BadDimension { id: u64, w: Coord, h: Coord },
    #[error("strip width {0} is not positive")]
    BadWidth(Coord),
    #[error("item {id} is wider ({w}) than the strip ({width})")]
    ItemTooWide { id: u64, w: Coord, width: Coord },
    #[error("duplicate item id {0}")]
    DuplicateId(u64),
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
}

/// Structural errors that make a packing impossible to validate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidateError {
    #[error("placement references unknown item id {0}")]
    UnknownItemId(u64),
    #[error("item {0} has no placement")]
    MissingItem(u64),
    #[error("item {0} is placed more than once")]
    DuplicatePlacement(u64),
}

/// A rectangular item to be packed. Width is measured in strip-width units,
/// height in strip-height units; neither may be zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Item {
    pub id: u64,
    pub w: Coord,
    pub h: Coord,
}

impl Item {
    pub fn new(id: u64, w: Coord, h: Coord) -> Result<Self, ModelError> {
        if w < 1 || h < 1 {
            return Err(ModelError::BadDimension { id, w, h });
        }
        Ok(Item { id, w, h })
    }

    pub fn area(&self) -> Coord {
        self.w * self.h
    }
}

/// A strip-packing instance: the strip width plus an ordered item list with
/// distinct ids, every item no wider than the strip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    width: Coord,
    items: Vec<Item>,
    index: HashMap<u64, usize>,
}

impl Instance {
    pub fn new(width: Coord, items: Vec<Item>) -> Result<Self, ModelError> {
        if width < 1 {
            return Err(ModelError::BadWidth(width));
        }
        let mut index = HashMap::with_capacity(items.len());
        let mut area: i128 = 0;
        for (pos, item) in items.iter().enumerate() {
            if item.w < 1 || item.h < 1 {
                return Err(ModelError::BadDimension {
                    id: item.id,
                    w: item.w,
                    h: item.h,
                });
            }
            if item.w > width {
                return Err(ModelError::ItemTooWide {
                    id: item.id,
                    w: item.w,
                    width,
                });
            }
            if index.insert(item.id, pos).is_some() {
                return Err(ModelError::DuplicateId(item.id));
            }
            area += item.w as i128 * item.h as i128;
        }
        if area > Coord::MAX as i128 {
            return Err(ModelError::Overflow("total instance area"));
        }
        Ok(Instance {
            width,
            items,
            index,
        })
    }

    pub fn width(&self) -> Coord {
        self.width
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: u64) -> Option<&Item> {
        self.index.get(&id).map(|&pos| &self.items[pos])
    }
}

/// Position of one item: its bottom-left corner. y = 0 is the strip bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Placement {
    pub item_id: u64,
    pub x: Coord,
    pub y: Coord,
}

/// A complete packing: one placement per item and the achieved height.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packing {
    pub height: Coord,
    pub placements: Vec<Placement>,
}

impl Packing {
    /// Builds a packing whose height is computed from the placements.
    pub fn with_computed_height(instance: &Instance, placements: Vec<Placement>) -> Self {
        let height = placements
            .iter()
            .filter_map(|p| instance.item(p.item_id).map(|it| p.y + it.h))
            .max()
            .unwrap_or(0);
        Packing { height, placements }
    }

    pub fn placement(&self, id: u64) -> Option<&Placement> {
        self.placements.iter().find(|p| p.item_id == id)
    }
}

/// Axis-aligned rectangle given by its bottom-left corner and size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: Coord,
    pub y: Coord,
    pub w: Coord,
    pub h: Coord,
}

impl Rect {
    pub fn new(x: Coord, y: Coord, w: Coord, h: Coord) -> Self {
        Rect { x, y, w, h }
    }

    pub fn right(&self) -> Coord {
        self.x + self.w
    }

    pub fn top(&self) -> Coord {
        self.y + self.h
    }

    pub fn area(&self) -> Coord {
        self.w * self.h
    }

    /// Open-rectangle intersection test; touching boundaries do not count.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.top()
            && other.y < self.top()
    }

    /// Whether `other` lies fully inside `self` (boundary contact allowed).
    pub fn contains(&self, other: &Rect) -> bool {
        self.x <= other.x
            && self.y <= other.y
            && other.right() <= self.right()
            && other.top() <= self.top()
    }

    pub fn contains_point(&self, x: Coord, y: Coord) -> bool {
        self.x <= x && x < self.right() && self.y <= y && y < self.top()
    }
}

/// Box class within a partition of the strip area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoxTag {
    Large,
    Horizontal,
    Vertical,
    Spare,
}

impl BoxTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoxTag::Large => "large",
            BoxTag::Horizontal => "horizontal",
            BoxTag::Vertical => "vertical",
            BoxTag::Spare => "spare",
        }
    }
}

/// A tagged box of a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxRegion {
    pub rect: Rect,
    pub tag: BoxTag,
}

/// A single packing-invariant violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// Two open rectangles intersect.
    Overlap { first: u64, second: u64 },
    /// An item pokes out of the strip (x < 0, y < 0, or x + w > W).
    OutsideStrip { id: u64 },
    /// The declared height differs from max(y + h).
    WrongHeight { declared: Coord, computed: Coord },
}

/// Every violation found in a packing, not just the first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a packing against all invariants: every item placed exactly once,
/// open rectangles pairwise disjoint, nothing outside the strip, and the
/// declared height equal to the achieved height.
///
/// Structural mismatches (unknown ids, missing or duplicate placements) are
/// errors; geometric problems are collected in the report.
pub fn validate_packing(
    instance: &Instance,
    packing: &Packing,
) -> Result<ValidationReport, ValidateError> {
    let mut seen: HashMap<u64, ()> = HashMap::with_capacity(packing.placements.len());
    let mut rects: Vec<(u64, Rect)> = Vec::with_capacity(packing.placements.len());
    for p in &packing.placements {
        let item = instance
            .item(p.item_id)
            .ok_or(ValidateError::UnknownItemId(p.item_id))?;
        if seen.insert(p.item_id, ()).is_some() {
            return Err(ValidateError::DuplicatePlacement(p.item_id));
        }
        rects.push((p.item_id, Rect::new(p.x, p.y, item.w, item.h)));
    }
    for item in instance.items() {
        if !seen.contains_key(&item.id) {
            return Err(ValidateError::MissingItem(item.id));
        }
    }

    let mut report = ValidationReport::default();
    let mut computed = 0;
    for (id, r) in &rects {
        if r.x < 0 || r.y < 0 || r.right() > instance.width() {
            report.violations.push(Violation::OutsideStrip { id: *id });
        }
        computed = computed.max(r.top());
    }
    for (a, b) in overlapping_pairs(&rects) {
        report.violations.push(Violation::Overlap {
            first: a.min(b),
            second: a.max(b),
        });
    }
    if packing.height != computed {
        report.violations.push(Violation::WrongHeight {
            declared: packing.height,
            computed,
        });
    }
    Ok(report)
}

/// Sweep-line search for all open-overlapping pairs among labelled rects.
/// This is the independent checker used to audit rearrangement output; it
/// shares no bookkeeping with any packing routine.
pub fn overlapping_pairs(rects: &[(u64, Rect)]) -> Vec<(u64, u64)> {
    // Events: (x, 1=start/0=end, index). Ends sort before starts at equal x
    // so that boundary contact never reports.
    let mut events: Vec<(Coord, u8, usize)> = Vec::with_capacity(rects.len() * 2);
    for (i, (_, r)) in rects.iter().enumerate() {
        events.push((r.x, 1, i));
        events.push((r.right(), 0, i));
    }
    events.sort_unstable();
    let mut active: Vec<usize> = Vec::new();
    let mut pairs = Vec::new();
    for (_, kind, i) in events {
        if kind == 0 {
            active.retain(|&j| j != i);
        } else {
            let (id_i, r_i) = rects[i];
            for &j in &active {
                let (id_j, r_j) = rects[j];
                if r_i.y < r_j.top() && r_j.y < r_i.top() {
                    pairs.push((id_i, id_j));
                }
            }
            active.push(i);
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Per-column load profile: for each maximal x-band between rectangle edges,
/// the summed height of all rectangles covering that band. Every unit column
/// inside a band carries the same load, so checking bands checks all columns.
pub fn column_load(rects: &[Rect]) -> Vec<(Coord, Coord, Coord)> {
    let mut xs: Vec<Coord> = rects.iter().flat_map(|r| [r.x, r.right()]).collect();
    xs.sort_unstable();
    xs.dedup();
    let mut out = Vec::new();
    for win in xs.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let sum = rects
            .iter()
            .filter(|r| r.x <= lo && r.right() >= hi)
            .map(|r| r.h)
            .sum();
        out.push((lo, hi, sum));
    }
    out
}

/// Ceiling division for non-negative dividends.
pub fn ceil_div(a: Coord, b: Coord) -> Coord {
    debug_assert!(a >= 0 && b >= 1);
    (a + b - 1) / b
}

/// Sum of item areas.
pub fn total_area(instance: &Instance) -> Coord {
    instance.items().iter().map(|it| it.area()).sum()
}

/// max(ceil(total area / W), tallest item): no packing can be lower.
pub fn area_lower_bound(instance: &Instance) -> Coord {
    let area = total_area(instance);
    let by_area = ceil_div(area, instance.width());
    let by_height = instance.items().iter().map(|it| it.h).max().unwrap_or(0);
    by_area.max(by_height)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(width: Coord, dims: &[(Coord, Coord)]) -> Instance {
        let items = dims
            .iter()
            .enumerate()
            .map(|(i, &(w, h))| Item::new(i as u64 + 1, w, h).unwrap())
            .collect();
        Instance::new(width, items).unwrap()
    }

    fn packing(places: &[(u64, Coord, Coord)], height: Coord) -> Packing {
        Packing {
            height,
            placements: places
                .iter()
                .map(|&(item_id, x, y)| Placement { item_id, x, y })
                .collect(),
        }
    }

    #[test]
    fn unit_squares_side_by_side_are_valid() {
        let i = inst(2, &[(1, 1), (1, 1)]);
        let p = packing(&[(1, 0, 0), (2, 1, 0)], 1);
        let report = validate_packing(&i, &p).unwrap();
        assert!(report.is_valid(), "{:?}", report);
    }

    #[test]
    fn forced_intersection_is_reported() {
        let i = inst(2, &[(2, 1), (1, 1)]);
        let p = packing(&[(1, 0, 0), (2, 1, 0)], 1);
        let report = validate_packing(&i, &p).unwrap();
        assert_eq!(
            report.violations,
            vec![Violation::Overlap {
                first: 1,
                second: 2
            }]
        );
    }

    #[test]
    fn unknown_and_missing_ids_are_errors() {
        let i = inst(2, &[(1, 1)]);
        let p = packing(&[(7, 0, 0)], 1);
        assert_eq!(
            validate_packing(&i, &p),
            Err(ValidateError::UnknownItemId(7))
        );
        let p = packing(&[], 0);
        assert_eq!(validate_packing(&i, &p), Err(ValidateError::MissingItem(1)));
        let p = packing(&[(1, 0, 0), (1, 1, 0)], 1);
        assert_eq!(
            validate_packing(&i, &p),
            Err(ValidateError::DuplicatePlacement(1))
        );
    }

    #[test]
    fn wrong_height_and_outside_strip_are_violations() {
        let i = inst(2, &[(2, 2)]);
        let p = packing(&[(1, 0, 0)], 3);
        let report = validate_packing(&i, &p).unwrap();
        assert_eq!(
            report.violations,
            vec![Violation::WrongHeight {
                declared: 3,
                computed: 2
            }]
        );
        let p = packing(&[(1, 1, 0)], 2);
        let report = validate_packing(&i, &p).unwrap();
        assert_eq!(report.violations, vec![Violation::OutsideStrip { id: 1 }]);
    }

    #[test]
    fn boundary_contact_is_legal() {
        let i = inst(4, &[(2, 2), (2, 2), (4, 1)]);
        let p = packing(&[(1, 0, 0), (2, 2, 0), (3, 0, 2)], 3);
        assert!(validate_packing(&i, &p).unwrap().is_valid());
    }

    #[test]
    fn total_area_examples() {
        assert_eq!(total_area(&inst(3, &[(2, 3), (1, 1)])), 7);
        assert_eq!(total_area(&Instance::new(5, vec![]).unwrap()), 0);
    }

    #[test]
    fn area_lower_bound_examples() {
        assert_eq!(area_lower_bound(&inst(2, &[(1, 1), (1, 1)])), 1);
        assert_eq!(area_lower_bound(&inst(2, &[(1, 3)])), 3);
        // area 13 over width 4 rounds up to 4, which beats the tallest item.
        assert_eq!(area_lower_bound(&inst(4, &[(3, 2), (2, 2), (2, 1), (1, 1)])), 4);
    }

    #[test]
    fn instance_construction_rejects_bad_input() {
        assert!(matches!(
            Instance::new(0, vec![]),
            Err(ModelError::BadWidth(0))
        ));
        let wide = Item::new(1, 5, 1).unwrap();
        assert!(matches!(
            Instance::new(4, vec![wide]),
            Err(ModelError::ItemTooWide { .. })
        ));
        let a = Item::new(1, 1, 1).unwrap();
        assert!(matches!(
            Instance::new(4, vec![a, a]),
            Err(ModelError::DuplicateId(1))
        ));
        assert!(Item::new(1, 0, 3).is_err());
    }

    #[test]
    fn column_load_never_exceeds_height_of_valid_packing() {
        let i = inst(4, &[(3, 2), (2, 2), (2, 1), (1, 1)]);
        let p = packing(&[(1, 0, 0), (2, 0, 2), (3, 2, 2), (4, 3, 0)], 4);
        let report = validate_packing(&i, &p).unwrap();
        assert!(report.is_valid(), "{:?}", report);
        let rects: Vec<Rect> = p
            .placements
            .iter()
            .map(|pl| {
                let it = i.item(pl.item_id).unwrap();
                Rect::new(pl.x, pl.y, it.w, it.h)
            })
            .collect();
        for (_, _, load) in column_load(&rects) {
            assert!(load <= p.height);
        }
    }
}
