//! 3-Partition → strip-packing reduction: instance construction, canonical
//! height-11 packing for yes-instances, and recovery of a 3-Partition
//! solution from any valid height-11 packing.
//!
//! The gadget packs `10n + 1` rectangles of total area `11 W` into a strip
//! of width `W = 2(a+b)n`. Heights 1..3 are "middle" rectangles, heights
//! 4..5 are "side" rectangles; the height-1 rectangles of width `b/3 + s_i`
//! encode the input integers.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::model::{Coord, Instance, Item, Packing, Placement, Rect};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("invalid 3-partition input: {0}")]
    InvalidInput(String),
    #[error("invalid triple cover: {0}")]
    InvalidCover(String),
    #[error("packing is not tightly packed: {0}")]
    NotTightlyPacked(String),
    #[error("bad solution-rectangle run at x={x}: length {len}, width {width}")]
    BadRun { x: Coord, len: usize, width: Coord },
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
}

/// A multiset of 3n integers summing to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreePartitionInstance {
    values: Vec<i64>,
}

impl ThreePartitionInstance {
    pub fn new(values: Vec<i64>) -> Result<Self, ReductionError> {
        if values.is_empty() || values.len() % 3 != 0 {
            return Err(ReductionError::InvalidInput(format!(
                "need 3n values, got {}",
                values.len()
            )));
        }
        let sum: i128 = values.iter().map(|&v| v as i128).sum();
        if sum != 0 {
            return Err(ReductionError::InvalidInput(format!(
                "values sum to {sum}, not 0"
            )));
        }
        Ok(ThreePartitionInstance { values })
    }

    pub fn n(&self) -> usize {
        self.values.len() / 3
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// M = 1 + Σ|s_i|.
    pub fn magnitude_bound(&self) -> Result<i64, ReductionError> {
        let m: i128 = 1 + self.values.iter().map(|&v| (v as i128).abs()).sum::<i128>();
        i64::try_from(m).map_err(|_| ReductionError::Overflow("magnitude bound"))
    }

    /// s-value for a 1-based index.
    pub fn value(&self, index: u64) -> Option<i64> {
        if index == 0 {
            return None;
        }
        self.values.get(index as usize - 1).copied()
    }
}

/// Constants of one reduction: the input size n, the magnitude bound M, the
/// gadget pair (a, b), and the strip width W = 2(a+b)n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionParams {
    pub n: u64,
    pub m: i64,
    pub a: i64,
    pub b: i64,
    pub width: Coord,
}

/// A partition of the indices 1..=3n into n triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleCover {
    pub triples: Vec<[u64; 3]>,
}

impl TripleCover {
    /// Checks that the triples partition 1..=3n exactly.
    pub fn new(triples: Vec<[u64; 3]>) -> Result<Self, ReductionError> {
        let n = triples.len();
        let mut seen = vec![false; 3 * n + 1];
        for t in &triples {
            for &i in t {
                if i == 0 || i as usize > 3 * n {
                    return Err(ReductionError::InvalidCover(format!(
                        "index {i} out of range 1..={}",
                        3 * n
                    )));
                }
                if seen[i as usize] {
                    return Err(ReductionError::InvalidCover(format!("index {i} repeated")));
                }
                seen[i as usize] = true;
            }
        }
        Ok(TripleCover { triples })
    }

    /// Checks every triple sums to zero for the given instance.
    pub fn validate_for(&self, tp: &ThreePartitionInstance) -> Result<(), ReductionError> {
        if self.triples.len() != tp.n() {
            return Err(ReductionError::InvalidCover(format!(
                "expected {} triples, got {}",
                tp.n(),
                self.triples.len()
            )));
        }
        for t in &self.triples {
            let sum: i64 = t.iter().map(|&i| tp.value(i).unwrap_or(0)).sum();
            if sum != 0 {
                return Err(ReductionError::InvalidCover(format!(
                    "triple {t:?} sums to {sum}"
                )));
            }
        }
        Ok(())
    }

    /// Order-insensitive comparison: same multiset of sorted triples.
    pub fn same_cover(&self, other: &TripleCover) -> bool {
        let norm = |c: &TripleCover| {
            let mut v: Vec<[u64; 3]> = c
                .triples
                .iter()
                .map(|t| {
                    let mut s = *t;
                    s.sort_unstable();
                    s
                })
                .collect();
            v.sort_unstable();
            v
        };
        norm(self) == norm(other)
    }
}

/// Picks the gadget pair: b = max(9n, 3M) + 3 and a = b². The result
/// satisfies a, b > 3M with b divisible by 3, and kills every small
/// solution of ax + by + z = 0.
pub fn pick_ab(n: u64, m: i64) -> Result<(i64, i64), ReductionError> {
    if n < 1 || m < 1 {
        return Err(ReductionError::InvalidInput(format!(
            "need n >= 1 and M >= 1, got n={n}, M={m}"
        )));
    }
    let nine_n = i64::try_from(n)
        .ok()
        .and_then(|v| v.checked_mul(9))
        .ok_or(ReductionError::Overflow("9n"))?;
    let three_m = m.checked_mul(3).ok_or(ReductionError::Overflow("3M"))?;
    let b = nine_n
        .max(three_m)
        .checked_add(3)
        .ok_or(ReductionError::Overflow("b"))?;
    let a = b.checked_mul(b).ok_or(ReductionError::Overflow("a = b^2"))?;
    Ok((a, b))
}

/// Item-id layout of a reduction instance; all ids are functions of n.
///
/// 1..=3n        solution rectangles, (b/3 + s_i) x 1, id i encodes s_i
/// 3n+1..=5n     middle a x 2
/// 5n+1..=6n     middle b x 3
/// 6n+1..=8n     side (a+b) x 4
/// 8n+1..=10n-1  side (a+b) x 5
/// 10n           side a x 5
/// 10n+1         side b x 5
#[derive(Debug, Clone, Copy)]
pub struct IdLayout {
    n: u64,
}

impl IdLayout {
    pub fn new(n: u64) -> Self {
        IdLayout { n }
    }
    pub fn solution(&self, i: u64) -> u64 {
        debug_assert!(1 <= i && i <= 3 * self.n);
        i
    }
    pub fn is_solution(&self, id: u64) -> bool {
        1 <= id && id <= 3 * self.n
    }
    pub fn middle_a(&self, k: u64) -> u64 {
        3 * self.n + 1 + k
    }
    pub fn middle_b(&self, p: u64) -> u64 {
        5 * self.n + 1 + p
    }
    pub fn side_four(&self, k: u64) -> u64 {
        6 * self.n + 1 + k
    }
    pub fn side_five(&self, k: u64) -> u64 {
        8 * self.n + 1 + k
    }
    pub fn side_a(&self) -> u64 {
        10 * self.n
    }
    pub fn side_b(&self) -> u64 {
        10 * self.n + 1
    }
}

/// Builds the strip-packing instance for a 3-Partition input: 6n middle
/// rectangles, 4n+1 side rectangles, strip width W = 2(a+b)n, total area
/// exactly 11W.
pub fn build_instance(
    tp: &ThreePartitionInstance,
) -> Result<(Instance, ReductionParams), ReductionError> {
    let n = tp.n() as u64;
    let m = tp.magnitude_bound()?;
    let (a, b) = pick_ab(n, m)?;
    let ab = a.checked_add(b).ok_or(ReductionError::Overflow("a+b"))?;
    let width = ab
        .checked_mul(2)
        .and_then(|v| v.checked_mul(n as i64))
        .ok_or(ReductionError::Overflow("W = 2(a+b)n"))?;
    let params = ReductionParams { n, m, a, b, width };
    let ids = IdLayout::new(n);

    let mut items = Vec::with_capacity(10 * n as usize + 1);
    for (i, &s) in tp.values().iter().enumerate() {
        // b > 3M guarantees b/3 + s_i >= 1.
        let w = b / 3 + s;
        items.push(
            Item::new(ids.solution(i as u64 + 1), w, 1)
                .map_err(|e| ReductionError::InvalidInput(e.to_string()))?,
        );
    }
    for k in 0..2 * n {
        items.push(Item::new(ids.middle_a(k), a, 2).expect("a x 2"));
    }
    for p in 0..n {
        items.push(Item::new(ids.middle_b(p), b, 3).expect("b x 3"));
    }
    for k in 0..2 * n {
        items.push(Item::new(ids.side_four(k), ab, 4).expect("(a+b) x 4"));
    }
    for k in 0..2 * n - 1 {
        items.push(Item::new(ids.side_five(k), ab, 5).expect("(a+b) x 5"));
    }
    items.push(Item::new(ids.side_a(), a, 5).expect("a x 5"));
    items.push(Item::new(ids.side_b(), b, 5).expect("b x 5"));

    let instance =
        Instance::new(width, items).map_err(|e| ReductionError::InvalidInput(e.to_string()))?;
    Ok((instance, params))
}

/// Lays out the canonical height-11 packing for a yes-instance.
///
/// Bottom row alternates side rectangles 5, 4, 5, 4, ...; the top row is
/// b x 5 first, then alternating 4, 5 starting with 4, and a x 5 last; the
/// middle rectangles run 1, 2, 3, 2 per period at y-offsets 5, 5, 4, 4,
/// with each grouped triple abutted into a b x 1 block.
pub fn canonical_packing(
    instance: &Instance,
    params: &ReductionParams,
    cover: &TripleCover,
) -> Result<Packing, ReductionError> {
    let n = params.n;
    let (a, b, ab) = (params.a, params.b, params.a + params.b);
    let ids = IdLayout::new(n);
    if cover.triples.len() != n as usize {
        return Err(ReductionError::InvalidCover(format!(
            "expected {} triples, got {}",
            n,
            cover.triples.len()
        )));
    }

    let mut placements = Vec::with_capacity(instance.len());
    // Bottom row: per period, a 5-high then a 4-high side rectangle.
    for p in 0..n {
        placements.push(Placement {
            item_id: ids.side_five(p),
            x: 2 * p as i64 * ab,
            y: 0,
        });
        placements.push(Placement {
            item_id: ids.side_four(p),
            x: (2 * p as i64 + 1) * ab,
            y: 0,
        });
    }
    // Top row: b x 5, then alternating 4/5 starting with 4, then a x 5.
    placements.push(Placement {
        item_id: ids.side_b(),
        x: 0,
        y: 6,
    });
    for k in 1..2 * n {
        let x = b + (k as i64 - 1) * ab;
        if k % 2 == 1 {
            placements.push(Placement {
                item_id: ids.side_four(n + (k + 1) / 2 - 1),
                x,
                y: 7,
            });
        } else {
            placements.push(Placement {
                item_id: ids.side_five(n + k / 2 - 1),
                x,
                y: 6,
            });
        }
    }
    placements.push(Placement {
        item_id: ids.side_a(),
        x: params.width - a,
        y: 6,
    });
    // Middle row, one period per triple: heights 1, 2, 3, 2 at y 5, 5, 4, 4.
    for (p, triple) in cover.triples.iter().enumerate() {
        let base = 2 * p as i64 * ab;
        let mut x = base;
        for &i in triple {
            let item = instance
                .item(ids.solution(i))
                .ok_or_else(|| ReductionError::InvalidCover(format!("no solution item {i}")))?;
            placements.push(Placement {
                item_id: item.id,
                x,
                y: 5,
            });
            x += item.w;
        }
        if x - base != b {
            return Err(ReductionError::InvalidCover(format!(
                "triple {triple:?} has total width {}, expected b = {b}",
                x - base
            )));
        }
        placements.push(Placement {
            item_id: ids.middle_a(2 * p as u64),
            x: base + b,
            y: 5,
        });
        placements.push(Placement {
            item_id: ids.middle_b(p as u64),
            x: base + ab,
            y: 4,
        });
        placements.push(Placement {
            item_id: ids.middle_a(2 * p as u64 + 1),
            x: base + ab + b,
            y: 4,
        });
    }

    Ok(Packing {
        height: 11,
        placements,
    })
}

fn placed_rects(instance: &Instance, packing: &Packing) -> Vec<(u64, Rect)> {
    packing
        .placements
        .iter()
        .filter_map(|p| {
            instance
                .item(p.item_id)
                .map(|it| (p.item_id, Rect::new(p.x, p.y, it.w, it.h)))
        })
        .collect()
}

/// Mirrors the packing (x -> W - x - w) when the b x 5 rectangle sits right
/// of the a x 5 one, so that side-boundary bookkeeping is deterministic.
fn normalize_mirror(instance: &Instance, params: &ReductionParams, packing: &Packing) -> Packing {
    let ids = IdLayout::new(params.n);
    let xa = packing.placement(ids.side_a()).map(|p| p.x).unwrap_or(0);
    let xb = packing.placement(ids.side_b()).map(|p| p.x).unwrap_or(0);
    if xb <= xa {
        return packing.clone();
    }
    let placements = packing
        .placements
        .iter()
        .map(|p| {
            let w = instance.item(p.item_id).map(|it| it.w).unwrap_or(0);
            Placement {
                item_id: p.item_id,
                x: params.width - p.x - w,
                y: p.y,
            }
        })
        .collect();
    Packing {
        height: packing.height,
        placements,
    }
}

/// Recovers a triple cover from a valid packing of height at most 11.
///
/// Scans the middle rectangles left to right after checking that every
/// x-band in general position meets exactly one middle and two side
/// rectangles; every maximal run of solution rectangles must consist of
/// three rectangles of total width exactly b.
pub fn extract_partition(
    instance: &Instance,
    params: &ReductionParams,
    packing: &Packing,
) -> Result<TripleCover, ReductionError> {
    let report = crate::model::validate_packing(instance, packing)
        .map_err(|e| ReductionError::NotTightlyPacked(e.to_string()))?;
    if !report.is_valid() {
        return Err(ReductionError::NotTightlyPacked(format!(
            "packing has {} violations",
            report.violations.len()
        )));
    }
    if packing.height > 11 {
        return Err(ReductionError::NotTightlyPacked(format!(
            "height {} exceeds 11",
            packing.height
        )));
    }

    let packing = normalize_mirror(instance, params, packing);
    let rects = placed_rects(instance, &packing);

    // Unit-column check, evaluated per maximal band between rectangle edges:
    // a vertical line at x + 1/2 anywhere in a band meets the same set, so
    // checking bands checks every unit column of [0, W).
    let mut xs: Vec<Coord> = vec![0, params.width];
    xs.extend(rects.iter().flat_map(|(_, r)| [r.x, r.right()]));
    xs.sort_unstable();
    xs.dedup();
    for win in xs.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let mut middles = 0u32;
        let mut sides = 0u32;
        for (_, r) in &rects {
            if r.x <= lo && r.right() >= hi {
                if r.h <= 3 {
                    middles += 1;
                } else {
                    sides += 1;
                }
            }
        }
        if middles != 1 || sides != 2 {
            return Err(ReductionError::NotTightlyPacked(format!(
                "band [{lo}, {hi}) meets {middles} middle and {sides} side rectangles"
            )));
        }
    }

    // Middle rectangles are tightly packed, so sorting by x orders them.
    let ids = IdLayout::new(params.n);
    let mut middles: Vec<(u64, Rect)> = rects.iter().filter(|(_, r)| r.h <= 3).copied().collect();
    middles.sort_unstable_by_key(|(_, r)| r.x);

    let mut triples = Vec::with_capacity(params.n as usize);
    let mut run: Vec<u64> = Vec::new();
    let mut run_x = 0;
    let mut run_width = 0;
    for (id, r) in middles.iter() {
        if r.h == 1 {
            if run.is_empty() {
                run_x = r.x;
                run_width = 0;
            }
            run.push(*id);
            run_width += r.w;
        } else if !run.is_empty() {
            if run.len() != 3 || run_width != params.b {
                return Err(ReductionError::BadRun {
                    x: run_x,
                    len: run.len(),
                    width: run_width,
                });
            }
            triples.push([run[0], run[1], run[2]]);
            run.clear();
        }
    }
    if !run.is_empty() {
        if run.len() != 3 || run_width != params.b {
            return Err(ReductionError::BadRun {
                x: run_x,
                len: run.len(),
                width: run_width,
            });
        }
        triples.push([run[0], run[1], run[2]]);
    }
    if triples.len() != params.n as usize
        || !triples.iter().all(|t| t.iter().all(|&i| ids.is_solution(i)))
    {
        return Err(ReductionError::NotTightlyPacked(format!(
            "recovered {} solution runs, expected {}",
            triples.len(),
            params.n
        )));
    }
    TripleCover::new(triples)
}

/// One side-rectangle boundary that does not decompose as a*n_a + b*n_b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XCoordViolation {
    pub item_id: u64,
    pub x: Coord,
}

/// Result of auditing side-rectangle boundaries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct XCoordReport {
    pub violations: Vec<XCoordViolation>,
}

impl XCoordReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that every x-coordinate where a side rectangle starts or ends
/// decomposes as a*n_a + b*n_b with 0 <= n_a, n_b <= 2n and
/// n_b - n_a in {0, 1}. The packing is mirror-normalized first.
pub fn check_x_coordinates(
    instance: &Instance,
    params: &ReductionParams,
    packing: &Packing,
) -> XCoordReport {
    let packing = normalize_mirror(instance, params, packing);
    let rects = placed_rects(instance, &packing);
    let mut report = XCoordReport::default();
    for (id, r) in rects.iter().filter(|(_, r)| r.h >= 4) {
        for x in [r.x, r.right()] {
            if decompose_boundary(params, x).is_none() {
                report.violations.push(XCoordViolation { item_id: *id, x });
            }
        }
    }
    report.violations.sort_unstable_by_key(|v| (v.x, v.item_id));
    report
}

/// Finds (n_a, n_b) with x = a*n_a + b*n_b, 0 <= n_a, n_b <= 2n,
/// n_b - n_a in {0, 1}.
pub fn decompose_boundary(params: &ReductionParams, x: Coord) -> Option<(i64, i64)> {
    let ab = params.a + params.b;
    for d in [0i64, 1] {
        let rest = x - params.b * d;
        if rest >= 0 && rest % ab == 0 {
            let na = rest / ab;
            let nb = na + d;
            if na <= 2 * params.n as i64 && nb <= 2 * params.n as i64 {
                return Some((na, nb));
            }
        }
    }
    None
}

/// Samples a yes-instance: n triples of integers in [-range, range] each
/// summing to zero, shuffled. Returns the instance and the cover that
/// witnesses it (in shuffled indexing).
pub fn random_yes_instance<R: Rng>(
    n: usize,
    range: i64,
    rng: &mut R,
) -> (ThreePartitionInstance, TripleCover) {
    assert!(n >= 1 && range >= 1);
    let mut values = Vec::with_capacity(3 * n);
    for _ in 0..n {
        loop {
            let s1 = rng.random_range(-range..=range);
            let s2 = rng.random_range(-range..=range);
            let s3 = -s1 - s2;
            if s3.abs() <= range {
                values.push(s1);
                values.push(s2);
                values.push(s3);
                break;
            }
        }
    }
    let mut order: Vec<usize> = (0..3 * n).collect();
    order.shuffle(rng);
    // order[slot] = original index; invert to find each original's new slot.
    let mut new_pos = vec![0u64; 3 * n];
    for (slot, &orig) in order.iter().enumerate() {
        new_pos[orig] = slot as u64 + 1;
    }
    let shuffled: Vec<i64> = order.iter().map(|&orig| values[orig]).collect();
    let triples = (0..n)
        .map(|t| [new_pos[3 * t], new_pos[3 * t + 1], new_pos[3 * t + 2]])
        .collect();
    let tp = ThreePartitionInstance::new(shuffled).expect("sums to zero by construction");
    let cover = TripleCover::new(triples).expect("permutation of 1..=3n");
    (tp, cover)
}

/// Samples a no-instance: starts from a yes-instance, perturbs a pair of
/// values in opposite directions to keep the zero sum, and keeps retrying
/// until the brute-force solver confirms no cover exists. Requires
/// 2 <= n <= 6 so the confirmation stays feasible.
pub fn random_no_instance<R: Rng>(
    n: usize,
    range: i64,
    rng: &mut R,
) -> Option<ThreePartitionInstance> {
    assert!((2..=6).contains(&n) && range >= 1);
    for _ in 0..200 {
        let (base, _) = random_yes_instance(n, range, rng);
        let mut values = base.values().to_vec();
        for _ in 0..50 {
            let i = rng.random_range(0..values.len());
            let mut j = rng.random_range(0..values.len());
            while j == i {
                j = rng.random_range(0..values.len());
            }
            values[i] += 1;
            values[j] -= 1;
            let tp = ThreePartitionInstance::new(values.clone()).expect("sum preserved");
            if crate::solvers::brute_force_3partition(&tp).is_none() {
                return Some(tp);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{total_area, validate_packing};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tp(values: &[i64]) -> ThreePartitionInstance {
        ThreePartitionInstance::new(values.to_vec()).unwrap()
    }

    #[test]
    fn pick_ab_examples() {
        assert_eq!(pick_ab(1, 1).unwrap(), (144, 12));
        assert_eq!(pick_ab(2, 7).unwrap(), (576, 24));
    }

    #[test]
    fn pick_ab_small_case_has_no_nontrivial_small_solutions() {
        let (a, b) = pick_ab(1, 1).unwrap();
        for x in -9i64..=9 {
            for y in -9i64..=9 {
                for z in -9i64..=9 {
                    if a * x + b * y + z == 0 {
                        assert_eq!((x, y, z), (0, 0, 0));
                    }
                }
            }
        }
    }

    #[test]
    fn build_instance_n1_matches_hand_computation() {
        let (instance, params) = build_instance(&tp(&[-1, 0, 1])).unwrap();
        assert_eq!((params.m, params.b, params.a, params.width), (3, 12, 144, 312));
        assert_eq!(instance.len(), 11);
        let mut sol_widths: Vec<i64> = (1..=3).map(|i| instance.item(i).unwrap().w).collect();
        sol_widths.sort_unstable();
        assert_eq!(sol_widths, vec![3, 4, 5]);
        let count = |w, h| {
            instance
                .items()
                .iter()
                .filter(|it| it.w == w && it.h == h)
                .count()
        };
        assert_eq!(count(144, 2), 2);
        assert_eq!(count(12, 3), 1);
        assert_eq!(count(156, 4), 2);
        assert_eq!(count(156, 5), 1);
        assert_eq!(count(144, 5), 1);
        assert_eq!(count(12, 5), 1);
        assert_eq!(total_area(&instance), 3432);
        assert_eq!(total_area(&instance), 11 * params.width);
    }

    #[test]
    fn build_instance_zero_case_and_item_count() {
        let (instance, params) = build_instance(&tp(&[0, 0, 0])).unwrap();
        for i in 1..=3 {
            assert_eq!(instance.item(i).unwrap().w, params.b / 3);
        }
        let (instance, _) = build_instance(&tp(&[1, -1, 0, 2, -2, 0])).unwrap();
        assert_eq!(instance.len(), 21);
    }

    #[test]
    fn build_instance_rejects_nonzero_sum() {
        assert!(ThreePartitionInstance::new(vec![1, 2, 3]).is_err());
    }

    #[test]
    fn side_rectangle_heights_make_three_stacks_impossible() {
        let (instance, _) = build_instance(&tp(&[1, -1, 0, 2, -2, 0])).unwrap();
        let mut side_heights: Vec<i64> = instance
            .items()
            .iter()
            .filter(|it| it.h >= 4)
            .map(|it| it.h)
            .collect();
        side_heights.sort_unstable();
        assert!(side_heights.iter().all(|&h| h == 4 || h == 5));
        // Any three side rectangles reach at least 12.
        assert!(side_heights[0] + side_heights[1] + side_heights[2] >= 12);
        assert!(instance
            .items()
            .iter()
            .filter(|it| it.h <= 3)
            .all(|it| it.h >= 1));
    }

    #[test]
    fn canonical_packing_n1_layout() {
        let t = tp(&[-1, 0, 1]);
        let (instance, params) = build_instance(&t).unwrap();
        let cover = TripleCover::new(vec![[1, 2, 3]]).unwrap();
        let packing = canonical_packing(&instance, &params, &cover).unwrap();
        assert_eq!(packing.height, 11);
        let report = validate_packing(&instance, &packing).unwrap();
        assert!(report.is_valid(), "{:?}", report);

        // Middle x-extents: triple block, a x 2, b x 3, a x 2.
        let rects = placed_rects(&instance, &packing);
        let mut middle: Vec<(Coord, Coord)> = rects
            .iter()
            .filter(|(_, r)| r.h <= 3 && r.h != 1)
            .map(|(_, r)| (r.x, r.right()))
            .collect();
        let sol_lo = rects
            .iter()
            .filter(|(_, r)| r.h == 1)
            .map(|(_, r)| r.x)
            .min()
            .unwrap();
        let sol_hi = rects
            .iter()
            .filter(|(_, r)| r.h == 1)
            .map(|(_, r)| r.right())
            .max()
            .unwrap();
        middle.push((sol_lo, sol_hi));
        middle.sort_unstable();
        assert_eq!(middle, vec![(0, 12), (12, 156), (156, 168), (168, 312)]);

        // The strip is completely covered: area identity plus validity.
        assert_eq!(total_area(&instance), params.width * 11);
    }

    #[test]
    fn canonical_packing_covers_symmetric_zero_case() {
        let t = tp(&[0, 0, 0]);
        let (instance, params) = build_instance(&t).unwrap();
        let cover = TripleCover::new(vec![[1, 2, 3]]).unwrap();
        let packing = canonical_packing(&instance, &params, &cover).unwrap();
        assert!(validate_packing(&instance, &packing).unwrap().is_valid());
    }

    #[test]
    fn canonical_packing_rejects_bad_cover() {
        let t = tp(&[-1, 0, 1, -2, 0, 2]);
        let (instance, params) = build_instance(&t).unwrap();
        // Triple (1, 2, 4) sums to -3, so its widths cannot reach b.
        let cover = TripleCover::new(vec![[1, 2, 4], [3, 5, 6]]).unwrap();
        assert!(matches!(
            canonical_packing(&instance, &params, &cover),
            Err(ReductionError::InvalidCover(_))
        ));
    }

    #[test]
    fn extract_round_trips_canonical_packing() {
        let t = tp(&[-1, 0, 1]);
        let (instance, params) = build_instance(&t).unwrap();
        let cover = TripleCover::new(vec![[1, 2, 3]]).unwrap();
        let packing = canonical_packing(&instance, &params, &cover).unwrap();
        let found = extract_partition(&instance, &params, &packing).unwrap();
        assert!(found.same_cover(&cover));
        found.validate_for(&t).unwrap();
    }

    #[test]
    fn extract_recovers_permuted_cover_up_to_order() {
        let t = tp(&[1, -1, 0, 2, -2, 0]);
        let (instance, params) = build_instance(&t).unwrap();
        let cover = TripleCover::new(vec![[4, 5, 6], [1, 2, 3]]).unwrap();
        let packing = canonical_packing(&instance, &params, &cover).unwrap();
        let found = extract_partition(&instance, &params, &packing).unwrap();
        assert!(found.same_cover(&cover));
        found.validate_for(&t).unwrap();
    }

    #[test]
    fn extract_rejects_height_12_packing() {
        let t = tp(&[-1, 0, 1]);
        let (instance, params) = build_instance(&t).unwrap();
        let cover = TripleCover::new(vec![[1, 2, 3]]).unwrap();
        let mut packing = canonical_packing(&instance, &params, &cover).unwrap();
        // Raise the whole top row by one: still overlap-free, height 12.
        for p in &mut packing.placements {
            if p.y >= 6 {
                p.y += 1;
            }
        }
        packing.height = 12;
        assert!(validate_packing(&instance, &packing).unwrap().is_valid());
        assert!(matches!(
            extract_partition(&instance, &params, &packing),
            Err(ReductionError::NotTightlyPacked(_) | ReductionError::BadRun { .. })
        ));
    }

    #[test]
    fn x_coordinate_boundaries_decompose() {
        let t = tp(&[-1, 0, 1]);
        let (instance, params) = build_instance(&t).unwrap();
        let cover = TripleCover::new(vec![[1, 2, 3]]).unwrap();
        let packing = canonical_packing(&instance, &params, &cover).unwrap();
        let report = check_x_coordinates(&instance, &params, &packing);
        assert!(report.is_clean(), "{:?}", report);
        // Spot checks from the n = 1 layout.
        assert_eq!(decompose_boundary(&params, 0), Some((0, 0)));
        assert_eq!(decompose_boundary(&params, 156), Some((1, 1)));
        assert_eq!(decompose_boundary(&params, 12), Some((0, 1)));
    }

    #[test]
    fn mirrored_packing_still_extracts() {
        let t = tp(&[-1, 0, 1]);
        let (instance, params) = build_instance(&t).unwrap();
        let cover = TripleCover::new(vec![[1, 2, 3]]).unwrap();
        let packing = canonical_packing(&instance, &params, &cover).unwrap();
        let mirrored = Packing {
            height: packing.height,
            placements: packing
                .placements
                .iter()
                .map(|p| Placement {
                    item_id: p.item_id,
                    x: params.width - p.x - instance.item(p.item_id).unwrap().w,
                    y: p.y,
                })
                .collect(),
        };
        assert!(validate_packing(&instance, &mirrored).unwrap().is_valid());
        let found = extract_partition(&instance, &params, &mirrored).unwrap();
        assert!(found.same_cover(&cover));
        let report = check_x_coordinates(&instance, &params, &mirrored);
        assert!(report.is_clean(), "{:?}", report);
    }

    #[test]
    fn random_yes_instances_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = rng.random_range(1..=6);
            let (t, cover) = random_yes_instance(n, 5, &mut rng);
            cover.validate_for(&t).unwrap();
            let (instance, params) = build_instance(&t).unwrap();
            assert_eq!(total_area(&instance), 11 * params.width);
            let packing = canonical_packing(&instance, &params, &cover).unwrap();
            assert!(validate_packing(&instance, &packing).unwrap().is_valid());
            let found = extract_partition(&instance, &params, &packing).unwrap();
            found.validate_for(&t).unwrap();
        }
    }
}
