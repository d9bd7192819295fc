//! The rearrangement engine: regroups tall and vertical items inside
//! vertical boxes into equal-height boxes, restores sliced vertical items,
//! and assembles the second-level partition with medium and small item
//! insertion.
//!
//! Every rearrangement is audited by the independent sweep-line overlap
//! checker from the model module; a failed audit surfaces as
//! `InvariantBroken` instead of a silently bad packing.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::model::{
    ceil_div, overlapping_pairs, validate_packing, BoxRegion, BoxTag, Coord, Instance, Item,
    Packing, Placement, Rect,
};
use crate::structure::{
    build_level1_partition, ratio_int, relocate_crossing, BoxPartition, ItemClass,
    ItemClassification, PartitionParams, StructureError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepackError {
    #[error("rearrangement invariant broken: {0}")]
    InvariantBroken(String),
    #[error("{found} distinct slice heights exceed the cap {cap}")]
    TooManyDistinctHeights { found: usize, cap: usize },
    #[error("strip overflow: {0}")]
    StripOverflow(String),
    #[error("free area too small for reinserted slices: {0}")]
    GapDeficit(String),
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),
    #[error("medium items do not fit their two boxes: {0}")]
    MediumOverflow(String),
    #[error("small items do not fit the free areas: {0}")]
    SmallItemOverflow(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Rational knobs needed by the rearrangement bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RepackParams {
    pub epsilon: BigRational,
    pub delta: BigRational,
}

impl RepackParams {
    pub fn new(epsilon: BigRational, delta: BigRational) -> Self {
        RepackParams { epsilon, delta }
    }
}

/// An item with a fixed rectangle, scene-local.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlacedItem {
    pub id: u64,
    pub rect: Rect,
}

impl PlacedItem {
    pub fn new(id: u64, x: Coord, y: Coord, w: Coord, h: Coord) -> Self {
        PlacedItem {
            id,
            rect: Rect::new(x, y, w, h),
        }
    }
}

/// One vertical box plus the items interacting with it: tall items split
/// into top and bottom lanes, the ids of tall items not fully inside the
/// box (which must not move), and unit-width vertical slices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerticalBoxScene {
    pub region: Rect,
    pub top: Vec<PlacedItem>,
    pub bottom: Vec<PlacedItem>,
    pub crossing: Vec<u64>,
    pub unit_verticals: Vec<PlacedItem>,
}

impl VerticalBoxScene {
    pub fn talls(&self) -> impl Iterator<Item = &PlacedItem> {
        self.top.iter().chain(self.bottom.iter())
    }

    fn is_crossing(&self, id: u64) -> bool {
        self.crossing.contains(&id)
    }

    /// Checks the scene invariants: tall items pairwise disjoint, at most
    /// two per vertical line, crossing ids exactly the talls not fully
    /// inside, slices of width one inside the box, and a valid flush
    /// configuration (non-crossing tops shifted to the box top and bottoms
    /// to the box bottom overlap nothing).
    pub fn validate(&self) -> Result<(), RepackError> {
        let err = |m: String| Err(RepackError::InvariantBroken(m));
        if self.region.w < 1 || self.region.h < 1 {
            return err("empty region".into());
        }
        let mut rects: Vec<(u64, Rect)> = Vec::new();
        for t in self.talls() {
            let inside = self.region.contains(&t.rect);
            if inside == self.is_crossing(t.id) {
                return err(format!("item {} crossing flag mismatch", t.id));
            }
            if !t.rect.overlaps(&self.region) {
                return err(format!("item {} misses the region", t.id));
            }
            rects.push((t.id, t.rect));
        }
        for v in &self.unit_verticals {
            if v.rect.w != 1 {
                return err(format!("vertical slice {} has width {}", v.id, v.rect.w));
            }
            if !self.region.contains(&v.rect) {
                return err(format!("vertical slice {} leaves the region", v.id));
            }
            rects.push((v.id, v.rect));
        }
        let mut seen = HashSet::new();
        for (id, _) in &rects {
            if !seen.insert(*id) {
                return err(format!("duplicate id {id}"));
            }
        }
        if let Some(&(a, b)) = overlapping_pairs(&rects).first() {
            return err(format!("items {a} and {b} overlap"));
        }
        // At most two talls per vertical line.
        let tall_rects: Vec<Rect> = self.talls().map(|t| t.rect).collect();
        let mut xs: Vec<Coord> = tall_rects.iter().flat_map(|r| [r.x, r.right()]).collect();
        xs.sort_unstable();
        xs.dedup();
        for win in xs.windows(2) {
            let n = tall_rects
                .iter()
                .filter(|r| r.x <= win[0] && r.right() >= win[1])
                .count();
            if n > 2 {
                return err(format!("{n} tall items share a vertical line"));
            }
        }
        // Flush simulation: non-crossing tops to the box top, non-crossing
        // bottoms to the box bottom, crossing items in place.
        let flushed: Vec<(u64, Rect)> = self
            .top
            .iter()
            .map(|t| {
                let y = if self.is_crossing(t.id) {
                    t.rect.y
                } else {
                    self.region.top() - t.rect.h
                };
                (t.id, Rect::new(t.rect.x, y, t.rect.w, t.rect.h))
            })
            .chain(self.bottom.iter().map(|t| {
                let y = if self.is_crossing(t.id) {
                    t.rect.y
                } else {
                    self.region.y
                };
                (t.id, Rect::new(t.rect.x, y, t.rect.w, t.rect.h))
            }))
            .collect();
        if let Some(&(a, b)) = overlapping_pairs(&flushed).first() {
            return err(format!("flush shift makes {a} and {b} overlap"));
        }
        Ok(())
    }
}

/// A box of one common item height with its members at final coordinates.
/// Pinned groups hold crossing items at their original coordinates and may
/// stick out of the scene region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub rect: Rect,
    pub height: Coord,
    pub members: Vec<PlacedItem>,
    pub pinned: bool,
}

/// The boxes produced by a rearrangement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroupedBoxes {
    pub groups: Vec<Group>,
}

impl GroupedBoxes {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn all_members(&self) -> impl Iterator<Item = &PlacedItem> {
        self.groups.iter().flat_map(|g| g.members.iter())
    }
}

// ---------------------------------------------------------------------------
// Arrangement engine shared by rearrange_tall and rearrange_unit.

/// A movable entity: a tall item, or a glued unit-width pseudo-item carrying
/// its slices.
#[derive(Debug, Clone)]
struct Piece {
    id: u64,
    w: Coord,
    h: Coord,
    x: Coord,
    slices: Option<Vec<PlacedItem>>,
}

impl Piece {
    fn tall(item: &PlacedItem) -> Self {
        Piece {
            id: item.id,
            w: item.rect.w,
            h: item.rect.h,
            x: item.rect.x,
            slices: None,
        }
    }

    fn span(&self) -> (Coord, Coord) {
        (self.x, self.x + self.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lane {
    Top,
    Bottom,
}

#[derive(Debug, Clone)]
struct Arranged {
    piece: Piece,
    rect: Rect,
    lane: Lane,
    /// Pieces of one sorted run share a segment id; pinned-in-place pieces
    /// carry None.
    segment: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    DescLeft,
    AscRight,
}

#[derive(Debug, Clone, Copy)]
struct Pin {
    rect: Rect,
}

struct ArrangeCtx {
    region: Rect,
    flush_top: Coord,
    out: Vec<Arranged>,
    next_segment: u32,
}

impl ArrangeCtx {
    fn flush_rect(&self, p: &Piece, lane: Lane) -> Rect {
        let y = match lane {
            Lane::Top => self.flush_top - p.h,
            Lane::Bottom => self.region.y,
        };
        Rect::new(p.x, y, p.w, p.h)
    }

    fn emit_in_place(&mut self, p: Piece, lane: Lane) {
        let rect = self.flush_rect(&p, lane);
        self.out.push(Arranged {
            piece: p,
            rect,
            lane,
            segment: None,
        });
    }

    /// Sorts the pieces by height and abuts them: descending starting at
    /// `lo`, or ascending ending at `hi`.
    fn emit_segment(&mut self, mut pieces: Vec<Piece>, lane: Lane, lo: Coord, hi: Coord, dir: Dir) {
        if pieces.is_empty() {
            return;
        }
        match dir {
            Dir::DescLeft => pieces.sort_by(|a, b| (b.h, a.id).cmp(&(a.h, b.id))),
            Dir::AscRight => pieces.sort_by(|a, b| (a.h, a.id).cmp(&(b.h, b.id))),
        }
        let total: Coord = pieces.iter().map(|p| p.w).sum();
        debug_assert!(total <= hi - lo);
        let mut x = match dir {
            Dir::DescLeft => lo,
            Dir::AscRight => hi - total,
        };
        let segment = self.next_segment;
        self.next_segment += 1;
        for mut p in pieces {
            p.x = x;
            x += p.w;
            let rect = self.flush_rect(&p, lane);
            self.out.push(Arranged {
                piece: p,
                rect,
                lane,
                segment: Some(segment),
            });
        }
    }
}

fn spans_overlap(a: (Coord, Coord), b: (Coord, Coord)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Arranges the movable tops and bottoms of one box around the pinned
/// items, following the case analysis around the pin whose top is highest.
/// With more than two pins (rare after splitting) everything simply stays
/// at its flush position, which is always valid.
fn arrange(
    region: Rect,
    flush_top: Coord,
    tops: Vec<Piece>,
    bottoms: Vec<Piece>,
    pins: Vec<Pin>,
) -> Vec<Arranged> {
    let mut ctx = ArrangeCtx {
        region,
        flush_top,
        out: Vec::new(),
        next_segment: 0,
    };
    // Bottoms lying under a floating pin keep their flush position. Sorted
    // segments are bounded by delimiters outside every pin span, so they
    // never slide over these.
    let mut movable_bottoms = Vec::new();
    for b in bottoms {
        if pins
            .iter()
            .any(|p| spans_overlap(b.span(), (p.rect.x, p.rect.right())))
        {
            ctx.emit_in_place(b, Lane::Bottom);
        } else {
            movable_bottoms.push(b);
        }
    }
    if pins.len() > 2 {
        for t in tops {
            ctx.emit_in_place(t, Lane::Top);
        }
        for b in movable_bottoms {
            ctx.emit_in_place(b, Lane::Bottom);
        }
        return ctx.out;
    }
    arrange_interval(
        &mut ctx,
        region.x,
        region.right(),
        tops,
        movable_bottoms,
        pins,
        0,
    );
    ctx.out
}

fn arrange_interval(
    ctx: &mut ArrangeCtx,
    lo: Coord,
    hi: Coord,
    tops: Vec<Piece>,
    bottoms: Vec<Piece>,
    pins: Vec<Pin>,
    depth: usize,
) {
    if lo >= hi {
        for t in tops {
            ctx.emit_in_place(t, Lane::Top);
        }
        for b in bottoms {
            ctx.emit_in_place(b, Lane::Bottom);
        }
        return;
    }
    if depth > 512 {
        // Each recursion consumes one top item, so this is unreachable;
        // flush placement stays valid regardless.
        for t in tops {
            ctx.emit_in_place(t, Lane::Top);
        }
        for b in bottoms {
            ctx.emit_in_place(b, Lane::Bottom);
        }
        return;
    }

    let left_pin = pins
        .iter()
        .filter(|p| p.rect.x <= lo && p.rect.right() > lo)
        .max_by_key(|p| (p.rect.top(), p.rect.x))
        .copied();
    let right_pin = pins
        .iter()
        .filter(|p| {
            p.rect.right() >= hi
                && p.rect.x < hi
                && left_pin.map(|l| l.rect != p.rect).unwrap_or(true)
        })
        .max_by_key(|p| (p.rect.top(), p.rect.x))
        .copied();

    match (left_pin, right_pin) {
        (None, None) => {
            // Plain double sort: tops descending from the left, bottoms
            // ascending toward the right.
            ctx.emit_segment(tops, Lane::Top, lo, hi, Dir::DescLeft);
            ctx.emit_segment(bottoms, Lane::Bottom, lo, hi, Dir::AscRight);
        }
        (None, Some(_)) => mirror_and_recurse(ctx, lo, hi, tops, bottoms, pins, depth),
        (Some(l), Some(r)) if r.rect.top() > l.rect.top() => {
            mirror_and_recurse(ctx, lo, hi, tops, bottoms, pins, depth)
        }
        (Some(l), r) => arrange_with_left_pin(ctx, lo, hi, l, r, tops, bottoms, depth),
    }
}

/// Solves the mirrored interval and reflects the result back.
fn mirror_and_recurse(
    ctx: &mut ArrangeCtx,
    lo: Coord,
    hi: Coord,
    mut tops: Vec<Piece>,
    mut bottoms: Vec<Piece>,
    pins: Vec<Pin>,
    depth: usize,
) {
    let reflect = |x: Coord, w: Coord| lo + hi - x - w;
    for p in tops.iter_mut().chain(bottoms.iter_mut()) {
        p.x = reflect(p.x, p.w);
    }
    let pins = pins
        .into_iter()
        .map(|p| Pin {
            rect: Rect::new(reflect(p.rect.x, p.rect.w), p.rect.y, p.rect.w, p.rect.h),
        })
        .collect();
    let start = ctx.out.len();
    arrange_interval(ctx, lo, hi, tops, bottoms, pins, depth + 1);
    for a in &mut ctx.out[start..] {
        let x = reflect(a.rect.x, a.rect.w);
        a.rect = Rect::new(x, a.rect.y, a.rect.w, a.rect.h);
        a.piece.x = x;
    }
}

/// Case analysis around the left pin. The horizontal line through its top
/// either meets some top item (cut at that item's right edge, sort the left
/// part, recurse to the right) or none (terminal block sort).
#[allow(clippy::too_many_arguments)]
fn arrange_with_left_pin(
    ctx: &mut ArrangeCtx,
    lo: Coord,
    hi: Coord,
    left: Pin,
    right: Option<Pin>,
    tops: Vec<Piece>,
    bottoms: Vec<Piece>,
    depth: usize,
) {
    let line_h = left.rect.top();
    let t_t = tops
        .iter()
        .filter(|t| ctx.flush_top - t.h < line_h)
        .min_by_key(|t| (t.x, t.id))
        .cloned();

    match t_t {
        None => {
            // Terminal: no top reaches the line, one block sort suffices.
            sort_block(ctx, lo, hi, left, tops, bottoms, hi, None);
        }
        Some(tt) => {
            let v_r = tt.x + tt.w;
            let (mut tops_l, tops_r): (Vec<Piece>, Vec<Piece>) =
                tops.into_iter().partition(|t| t.x + t.w <= v_r);
            tops_l.retain(|t| t.id != tt.id);
            let mut bottoms_l = Vec::new();
            let mut bottoms_r = Vec::new();
            let mut straddler: Option<Piece> = None;
            for b in bottoms {
                let (bx, br) = b.span();
                if br <= v_r {
                    bottoms_l.push(b);
                } else if bx >= v_r {
                    bottoms_r.push(b);
                } else {
                    straddler = Some(b);
                }
            }
            // The bottom straddling the cut stays flush and pins the right
            // sub-interval.
            let next_left_pin = straddler.map(|b| {
                let rect = ctx.flush_rect(&b, Lane::Bottom);
                ctx.emit_in_place(b, Lane::Bottom);
                Pin { rect }
            });
            let tt_pin_x = tt.x;
            ctx.emit_in_place(tt.clone(), Lane::Top);
            sort_block(ctx, lo, v_r, left, tops_l, bottoms_l, tt_pin_x, Some(tt_pin_x));
            let mut next_pins = Vec::new();
            if let Some(p) = next_left_pin {
                next_pins.push(p);
            }
            if let Some(r) = right {
                next_pins.push(r);
            }
            arrange_interval(ctx, v_r, hi, tops_r, bottoms_r, next_pins, depth + 1);
        }
    }
}

/// Sorts one block to the right of the left pin. Bottoms ascend toward the
/// highest inside bottom b_0 and descend after it; tops descend from the
/// left and ascend toward `top_right_edge`; the tops crossing the vertical
/// lines through b_0's edges, and the bottom crossing `b1_line`, stay put.
#[allow(clippy::too_many_arguments)]
fn sort_block(
    ctx: &mut ArrangeCtx,
    lo: Coord,
    _hi: Coord,
    left: Pin,
    tops: Vec<Piece>,
    bottoms: Vec<Piece>,
    top_right_edge: Coord,
    b1_line: Option<Coord>,
) {
    // b_1: the bottom crossing the line through the cut item's left edge.
    let mut b1: Option<Piece> = None;
    let mut rest_bottoms = Vec::new();
    for b in bottoms {
        let (bx, br) = b.span();
        if b1.is_none() && b1_line.map(|c| bx < c && br > c).unwrap_or(false) {
            b1 = Some(b);
        } else {
            rest_bottoms.push(b);
        }
    }
    let b1_span = b1.as_ref().map(|b| b.span());
    if let Some(b) = b1 {
        ctx.emit_in_place(b, Lane::Bottom);
    }

    // b_0: the highest bottom left of b_1; ties break toward the left.
    let limit = b1_span.map(|s| s.0).unwrap_or(Coord::MAX);
    let b0 = rest_bottoms
        .iter()
        .filter(|b| b.span().1 <= limit)
        .max_by(|a, b| (a.h, b.x).cmp(&(b.h, a.x)))
        .cloned();
    let b0_span = match &b0 {
        Some(b) => b.span(),
        None => (left.rect.right(), left.rect.right()),
    };
    if let Some(b) = &b0 {
        ctx.emit_in_place(b.clone(), Lane::Bottom);
    }
    let b0_id = b0.as_ref().map(|b| b.id);

    // Tops crossing the lines through b_0's edges stay in place.
    let mut t1: Option<Piece> = None;
    let mut t2: Option<Piece> = None;
    let mut movable_tops = Vec::new();
    for t in tops {
        let (tx, tr) = t.span();
        if t1.is_none() && tx < b0_span.0 && tr > b0_span.0 {
            t1 = Some(t);
        } else if t2.is_none() && tx < b0_span.1 && tr > b0_span.1 {
            t2 = Some(t);
        } else {
            movable_tops.push(t);
        }
    }
    let c1 = t1.as_ref().map(|t| t.span()).unwrap_or((b0_span.0, b0_span.0));
    let c2 = t2.as_ref().map(|t| t.span()).unwrap_or((b0_span.1, b0_span.1));
    for t in [t1, t2].into_iter().flatten() {
        ctx.emit_in_place(t, Lane::Top);
    }

    // Top segments: descending left of b_0 and over it, ascending toward
    // the right edge. No movable top straddles a cut point: the straddlers
    // were captured as t_1 / t_2 or are disjoint from those pinned tops.
    let mut seg_t0 = Vec::new();
    let mut seg_t1 = Vec::new();
    let mut seg_t2 = Vec::new();
    for t in movable_tops {
        let (tx, tr) = t.span();
        if tr <= c1.0 {
            seg_t0.push(t);
        } else if tx >= c1.1 && tr <= c2.0 {
            seg_t1.push(t);
        } else if tx >= c2.1 {
            seg_t2.push(t);
        } else {
            // Defensive: geometry says this cannot happen.
            ctx.emit_in_place(t, Lane::Top);
        }
    }
    ctx.emit_segment(seg_t0, Lane::Top, lo, c1.0, Dir::DescLeft);
    ctx.emit_segment(seg_t1, Lane::Top, c1.1, c2.0, Dir::DescLeft);
    ctx.emit_segment(seg_t2, Lane::Top, c2.1, top_right_edge, Dir::AscRight);

    // Bottom segments: ascending toward b_0, descending after it, and
    // descending after b_1.
    let mut seg_b0 = Vec::new();
    let mut seg_b1 = Vec::new();
    let mut seg_b2 = Vec::new();
    for b in rest_bottoms {
        if Some(b.id) == b0_id {
            continue;
        }
        let (bx, br) = b.span();
        if br <= b0_span.0 {
            seg_b0.push(b);
        } else if bx >= b0_span.1 && b1_span.map(|s| br <= s.0).unwrap_or(true) {
            seg_b1.push(b);
        } else if b1_span.map(|s| bx >= s.1).unwrap_or(false) {
            seg_b2.push(b);
        } else {
            ctx.emit_in_place(b, Lane::Bottom);
        }
    }
    let b0_left = b0_span.0.max(left.rect.right().min(b0_span.0));
    ctx.emit_segment(seg_b0, Lane::Bottom, b0_left.min(b0_span.0), b0_span.0, Dir::AscRight);
    let b1_left = b1_span.map(|s| s.0).unwrap_or(top_right_edge.max(b0_span.1));
    ctx.emit_segment(seg_b1, Lane::Bottom, b0_span.1, b1_left.max(b0_span.1), Dir::DescLeft);
    if let Some(s) = b1_span {
        ctx.emit_segment(seg_b2, Lane::Bottom, s.1, _hi, Dir::DescLeft);
    }
}

// ---------------------------------------------------------------------------
// Public operations on scenes.

/// Cuts the box at the inner vertical edges of top-lane crossing items, so
/// that every sub-scene has its crossing items in the bottom lane only.
/// Top-lane crossers span the full width of their sub-box and are treated
/// as (reassigned) bottom items there.
pub fn split_for_crossing(scene: &VerticalBoxScene) -> Result<Vec<VerticalBoxScene>, RepackError> {
    scene.validate()?;
    let region = scene.region;
    let mut cuts: Vec<Coord> = Vec::new();
    let mut demoted: BTreeSet<u64> = BTreeSet::new();
    for t in &scene.top {
        if !scene.is_crossing(t.id) {
            continue;
        }
        demoted.insert(t.id);
        if t.rect.x < region.x && t.rect.right() < region.right() {
            cuts.push(t.rect.right());
        } else if t.rect.right() > region.right() && t.rect.x > region.x {
            cuts.push(t.rect.x);
        }
        // An item overhanging both edges spans the whole box: no cut.
    }
    cuts.sort_unstable();
    cuts.dedup();
    cuts.retain(|&c| c > region.x && c < region.right());

    let mut edges = vec![region.x];
    edges.extend(cuts);
    edges.push(region.right());

    let mut scenes = Vec::new();
    for win in edges.windows(2) {
        let sub = Rect::new(win[0], region.y, win[1] - win[0], region.h);
        let mut out = VerticalBoxScene {
            region: sub,
            ..Default::default()
        };
        for t in scene.talls() {
            if !(t.rect.x < sub.right() && sub.x < t.rect.right()) {
                continue;
            }
            let was_top = scene.top.iter().any(|p| p.id == t.id) && !demoted.contains(&t.id);
            if was_top {
                out.top.push(*t);
            } else {
                out.bottom.push(*t);
            }
            if !sub.contains(&t.rect) {
                out.crossing.push(t.id);
            }
        }
        for v in &scene.unit_verticals {
            if v.rect.x >= sub.x && v.rect.right() <= sub.right() {
                out.unit_verticals.push(*v);
            }
        }
        scenes.push(out);
    }
    Ok(scenes)
}

/// Audit helper: all rects of the final layout must be pairwise disjoint.
fn audit_disjoint(rects: &[(u64, Rect)], what: &str) -> Result<(), RepackError> {
    if let Some(&(a, b)) = overlapping_pairs(rects).first() {
        return Err(RepackError::InvariantBroken(format!(
            "{what}: items {a} and {b} overlap after rearrangement"
        )));
    }
    Ok(())
}

/// Builds equal-height groups from an arranged layout of tall pieces.
fn tall_groups(arranged: &[Arranged], pinned: &[PlacedItem]) -> GroupedBoxes {
    let mut groups = Vec::new();
    for p in pinned {
        groups.push(Group {
            rect: p.rect,
            height: p.rect.h,
            members: vec![*p],
            pinned: true,
        });
    }
    // Segment members were emitted in x order.
    let mut by_segment: BTreeMap<u32, Vec<&Arranged>> = BTreeMap::new();
    for a in arranged {
        match a.segment {
            Some(s) => by_segment.entry(s).or_default().push(a),
            None => groups.push(Group {
                rect: a.rect,
                height: a.rect.h,
                members: vec![PlacedItem {
                    id: a.piece.id,
                    rect: a.rect,
                }],
                pinned: false,
            }),
        }
    }
    for (_, members) in by_segment {
        let mut run: Vec<&Arranged> = Vec::new();
        let flush = |run: &mut Vec<&Arranged>, groups: &mut Vec<Group>| {
            if run.is_empty() {
                return;
            }
            let first = run[0].rect;
            let width: Coord = run.iter().map(|a| a.rect.w).sum();
            groups.push(Group {
                rect: Rect::new(first.x, first.y, width, first.h),
                height: first.h,
                members: run
                    .iter()
                    .map(|a| PlacedItem {
                        id: a.piece.id,
                        rect: a.rect,
                    })
                    .collect(),
                pinned: false,
            });
            run.clear();
        };
        for a in members {
            if run.last().map(|p| p.rect.h != a.rect.h).unwrap_or(false) {
                flush(&mut run, &mut groups);
            }
            run.push(a);
        }
        flush(&mut run, &mut groups);
    }
    GroupedBoxes { groups }
}

/// Rearranges the tall items of a scene (no vertical slices) into
/// equal-height boxes. Crossing items must be bottom-lane and keep their
/// exact coordinates; the result is audited for overlaps.
pub fn rearrange_tall(scene: &VerticalBoxScene) -> Result<GroupedBoxes, RepackError> {
    scene.validate()?;
    if !scene.unit_verticals.is_empty() {
        return Err(RepackError::InvariantBroken(
            "scene has vertical slices; use rearrange_unit".into(),
        ));
    }
    for id in &scene.crossing {
        if scene.top.iter().any(|t| t.id == *id) {
            return Err(RepackError::InvariantBroken(format!(
                "crossing item {id} is in the top lane; split the scene first"
            )));
        }
    }

    let pinned: Vec<PlacedItem> = scene
        .bottom
        .iter()
        .filter(|t| scene.is_crossing(t.id))
        .copied()
        .collect();
    let tops: Vec<Piece> = scene.top.iter().map(Piece::tall).collect();
    let bottoms: Vec<Piece> = scene
        .bottom
        .iter()
        .filter(|t| !scene.is_crossing(t.id))
        .map(Piece::tall)
        .collect();
    let pins = pinned.iter().map(|p| Pin { rect: p.rect }).collect();

    let arranged = arrange(scene.region, scene.region.top(), tops, bottoms, pins);

    let mut audit: Vec<(u64, Rect)> = arranged.iter().map(|a| (a.piece.id, a.rect)).collect();
    audit.extend(pinned.iter().map(|p| (p.id, p.rect)));
    audit_disjoint(&audit, "rearrange_tall")?;
    for a in &arranged {
        if a.rect.x < scene.region.x
            || a.rect.right() > scene.region.right()
            || a.rect.y < scene.region.y
            || a.rect.top() > scene.region.top()
        {
            return Err(RepackError::InvariantBroken(format!(
                "item {} left the box",
                a.piece.id
            )));
        }
    }
    Ok(tall_groups(&arranged, &pinned))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(
        region: (Coord, Coord, Coord, Coord),
        top: &[(u64, Coord, Coord, Coord, Coord)],
        bottom: &[(u64, Coord, Coord, Coord, Coord)],
        crossing: &[u64],
    ) -> VerticalBoxScene {
        VerticalBoxScene {
            region: Rect::new(region.0, region.1, region.2, region.3),
            top: top
                .iter()
                .map(|&(id, x, y, w, h)| PlacedItem::new(id, x, y, w, h))
                .collect(),
            bottom: bottom
                .iter()
                .map(|&(id, x, y, w, h)| PlacedItem::new(id, x, y, w, h))
                .collect(),
            crossing: crossing.to_vec(),
            unit_verticals: vec![],
        }
    }

    #[test]
    fn split_no_crossing_is_identity() {
        let s = scene((0, 0, 10, 12), &[(1, 2, 7, 2, 5)], &[(2, 5, 0, 2, 6)], &[]);
        let parts = split_for_crossing(&s).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0], s);
    }

    #[test]
    fn split_one_top_crosser_gives_two_scenes() {
        // Item 1 overhangs the left edge; the cut falls at its right edge.
        let s = scene(
            (0, 0, 10, 12),
            &[(1, -2, 6, 5, 5)],
            &[(2, 6, 0, 2, 6)],
            &[1],
        );
        let parts = split_for_crossing(&s).unwrap();
        assert_eq!(parts.len(), 2);
        // The crosser is demoted to the bottom lane of its sub-scene.
        assert!(parts[0].top.is_empty());
        assert_eq!(parts[0].bottom.len(), 1);
        assert_eq!(parts[0].crossing, vec![1]);
        assert_eq!(parts[1].bottom.iter().map(|t| t.id).collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn split_two_top_crossers_give_three_scenes() {
        let s = scene(
            (0, 0, 12, 12),
            &[(1, -2, 6, 5, 5), (2, 9, 7, 5, 5)],
            &[(3, 5, 0, 2, 6)],
            &[1, 2],
        );
        let parts = split_for_crossing(&s).unwrap();
        assert_eq!(parts.len(), 3);
        for p in &parts {
            for id in &p.crossing {
                assert!(p.bottom.iter().any(|t| t.id == *id));
            }
        }
    }

    #[test]
    fn rearrange_tall_sorts_both_lanes() {
        // Tops of heights 3, 5, 4 and bottoms 2, 1 in a height-10 box.
        let s = scene(
            (0, 0, 12, 10),
            &[(1, 0, 5, 2, 3), (2, 2, 4, 2, 5), (3, 4, 5, 2, 4)],
            &[(4, 6, 0, 3, 2), (5, 9, 0, 3, 1)],
            &[],
        );
        let out = rearrange_tall(&s).unwrap();
        // Tops sorted non-increasing flush to the top: 5, 4, 3.
        let tops: Vec<(u64, Coord)> = out
            .groups
            .iter()
            .flat_map(|g| g.members.iter())
            .filter(|m| m.rect.top() == 10)
            .map(|m| (m.id, m.rect.x))
            .collect();
        let mut sorted = tops.clone();
        sorted.sort_by_key(|&(_, x)| x);
        assert_eq!(
            sorted.iter().map(|&(id, _)| id).collect::<Vec<_>>(),
            vec![2, 3, 1]
        );
        // Bottoms sorted non-decreasing toward the right edge: 1 then 2.
        let mut bots: Vec<(Coord, Coord)> = out
            .groups
            .iter()
            .flat_map(|g| g.members.iter())
            .filter(|m| m.rect.y == 0)
            .map(|m| (m.rect.x, m.rect.h))
            .collect();
        bots.sort_unstable();
        assert_eq!(bots.iter().map(|&(_, h)| h).collect::<Vec<_>>(), vec![1, 2]);
        // Five distinct heights -> five groups.
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn rearrange_tall_single_item() {
        let s = scene((0, 0, 5, 9), &[], &[(1, 2, 0, 2, 4)], &[]);
        let out = rearrange_tall(&s).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.groups[0].members[0].id, 1);
    }

    #[test]
    fn rearrange_tall_keeps_crossing_item_fixed() {
        let s = scene(
            (0, 0, 10, 12),
            &[(1, 4, 7, 2, 5)],
            &[(2, -3, 2, 5, 5), (3, 6, 0, 2, 6)],
            &[2],
        );
        let out = rearrange_tall(&s).unwrap();
        let pinned = out
            .groups
            .iter()
            .find(|g| g.pinned)
            .expect("crossing item keeps its own group");
        assert_eq!(pinned.members[0], PlacedItem::new(2, -3, 2, 5, 5));
    }

    #[test]
    fn rearrange_tall_rejects_top_lane_crosser() {
        let s = scene((0, 0, 10, 12), &[(1, -2, 6, 4, 5)], &[], &[1]);
        assert!(matches!(
            rearrange_tall(&s),
            Err(RepackError::InvariantBroken(_))
        ));
    }

    #[test]
    fn scene_validation_catches_overlaps() {
        let s = scene(
            (0, 0, 10, 12),
            &[(1, 0, 6, 4, 5), (2, 2, 5, 4, 5)],
            &[],
            &[],
        );
        assert!(s.validate().is_err());
        // Two tops that collide once both are flush to the box top.
        let s = scene(
            (0, 0, 10, 12),
            &[(1, 0, 2, 4, 5), (2, 2, 0, 4, 2)],
            &[],
            &[],
        );
        assert!(s.validate().is_err());
    }
}
