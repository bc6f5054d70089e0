//! Piecewise-linear supply-stack algebra.
//!
//! Each technology contributes a linear stack from its cheap to its
//! expensive cost over its capacity. Stacks are aggregated along the price
//! axis: the system inverse `Q(p)` is the sum of the per-stack inverses,
//! and the merit-order curve is the inverse of `Q`. Because every stack
//! inverse is linear between consecutive cost bounds, evaluating `Q` at the
//! sorted set of all bounds and joining the points with straight lines is
//! exact.
//!
//! Flat stacks (`low == high`) make `Q` jump. Inversion is right-continuous
//! (the full stack is dispatched at a price equal to its cost) and curve
//! evaluation at a quantity where the price steps up returns the upper
//! price.

use serde::Serialize;
use thiserror::Error;

use crate::marginal_costs::CostBounds;
use crate::market_data::PRICE_CAP;

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("negative quantity {0}")]
    NegativeQuantity(f64),
    #[error("quantity {q} outside [0, {total}]")]
    QuantityOutOfRange { q: f64, total: f64 },
    #[error("cannot aggregate an empty fleet")]
    EmptyFleet,
}

/// One technology's stack for one hour. `tag` is a caller-defined label
/// carried through aggregation and decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlantStack {
    pub tag: usize,
    pub cap: f64,
    pub bounds: CostBounds,
}

impl PlantStack {
    pub fn new(tag: usize, cap: f64, bounds: CostBounds) -> Self {
        debug_assert!(cap >= 0.0, "negative capacity {cap}");
        debug_assert!(bounds.low <= bounds.high, "unsorted bounds {bounds:?}");
        PlantStack { tag, cap, bounds }
    }
}

/// Price of `stack` at quantity `q`; `None` beyond its capacity.
pub fn stack_eval(stack: &PlantStack, q: f64) -> Result<Option<f64>, CurveError> {
    if q < 0.0 {
        return Err(CurveError::NegativeQuantity(q));
    }
    if q > stack.cap {
        return Ok(None);
    }
    if stack.cap == 0.0 {
        return Ok(Some(stack.bounds.low));
    }
    let CostBounds { low, high } = stack.bounds;
    Ok(Some(low + (q / stack.cap) * (high - low)))
}

/// Quantity `stack` offers at price `p`.
#[inline]
pub fn stack_invert(stack: &PlantStack, p: f64) -> f64 {
    let CostBounds { low, high } = stack.bounds;
    if p >= high {
        stack.cap
    } else if p <= low {
        0.0
    } else {
        stack.cap * (p - low) / (high - low)
    }
}

/// Left limit of [`stack_invert`] at `p`.
#[inline]
fn stack_invert_left(stack: &PlantStack, p: f64) -> f64 {
    if stack.bounds.is_flat() {
        if p > stack.bounds.low {
            stack.cap
        } else {
            0.0
        }
    } else {
        stack_invert(stack, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakpoint {
    /// Cumulative quantity, MWh.
    pub q: f64,
    /// Price, EUR/MWh.
    pub p: f64,
}

/// Nondecreasing price-versus-cumulative-quantity curve.
///
/// Two consecutive points with equal `q` are a vertical price step; two
/// with equal `p` are a flat segment. The first point has `q = 0` and the
/// last carries the total capacity.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PiecewiseCurve {
    points: Vec<Breakpoint>,
}

impl PiecewiseCurve {
    pub fn points(&self) -> &[Breakpoint] {
        &self.points
    }

    pub fn total_capacity(&self) -> f64 {
        self.points.last().map_or(0.0, |b| b.q)
    }

    pub fn min_price(&self) -> f64 {
        self.points[0].p
    }

    pub fn max_price(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |b| b.p)
    }

    /// Price at cumulative quantity `q`. Demand above total capacity
    /// clears at the price cap.
    pub fn eval(&self, q: f64) -> Result<f64, CurveError> {
        if q < 0.0 {
            return Err(CurveError::NegativeQuantity(q));
        }
        Ok(self.eval_unchecked(q))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, q: f64) -> f64 {
        let pts = &self.points;
        let last = pts[pts.len() - 1];
        if q > last.q {
            return PRICE_CAP;
        }
        let idx = pts.partition_point(|b| b.q <= q);
        if idx >= pts.len() {
            return last.p;
        }
        let (a, b) = (pts[idx - 1], pts[idx]);
        a.p + (q - a.q) / (b.q - a.q) * (b.p - a.p)
    }

    /// Total quantity dispatched at price `p` (right-continuous, clamped
    /// to `[0, total capacity]`).
    pub fn invert(&self, p: f64) -> f64 {
        let pts = &self.points;
        let idx = pts.partition_point(|b| b.p <= p);
        if idx == 0 {
            return 0.0;
        }
        if idx >= pts.len() {
            return pts[pts.len() - 1].q;
        }
        let (a, b) = (pts[idx - 1], pts[idx]);
        a.q + (p - a.p) / (b.p - a.p) * (b.q - a.q)
    }
}

/// Reusable buffers for building curves in a hot loop.
#[derive(Debug, Default, Clone)]
pub struct CurveBuilder {
    prices: Vec<f64>,
    curve: PiecewiseCurve,
}

impl CurveBuilder {
    pub fn build(&mut self, stacks: &[PlantStack]) -> Result<&PiecewiseCurve, CurveError> {
        if stacks.is_empty() {
            return Err(CurveError::EmptyFleet);
        }
        sorted_cost_set(stacks, &mut self.prices);
        let points = &mut self.curve.points;
        points.clear();
        if self.prices.is_empty() {
            // Nothing has capacity: a single point at the cheapest cost.
            let p = stacks.iter().map(|s| s.bounds.low).fold(f64::INFINITY, f64::min);
            points.push(Breakpoint { q: 0.0, p });
            return Ok(&self.curve);
        }
        for &p in &self.prices {
            let mut left = 0.0;
            let mut right = 0.0;
            for s in stacks.iter().filter(|s| s.cap > 0.0) {
                left += stack_invert_left(s, p);
                right += stack_invert(s, p);
            }
            points.push(Breakpoint { q: left, p });
            if right > left {
                points.push(Breakpoint { q: right, p });
            }
        }
        Ok(&self.curve)
    }
}

/// Sorted, de-duplicated low/high costs of the stacks that carry capacity.
fn sorted_cost_set(stacks: &[PlantStack], out: &mut Vec<f64>) {
    out.clear();
    for s in stacks.iter().filter(|s| s.cap > 0.0) {
        out.push(s.bounds.low);
        out.push(s.bounds.high);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
}

/// System merit-order curve of a fleet.
pub fn aggregate(stacks: &[PlantStack]) -> Result<PiecewiseCurve, CurveError> {
    let mut builder = CurveBuilder::default();
    builder.build(stacks)?;
    Ok(builder.curve)
}

pub fn curve_eval(curve: &PiecewiseCurve, q: f64) -> Result<f64, CurveError> {
    curve.eval(q)
}

pub fn curve_invert(curve: &PiecewiseCurve, p: f64) -> f64 {
    curve.invert(p)
}

/// Share of each stack in the quantity added over one price segment
/// `(p_low, p_high]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentShare {
    pub p_low: f64,
    pub p_high: f64,
    pub q_low: f64,
    pub q_high: f64,
    /// `(tag, fraction)` for every stack with capacity.
    pub fractions: Vec<(usize, f64)>,
    /// No stack adds quantity over the segment; fractions were carried over
    /// from a neighbouring segment.
    pub degenerate: bool,
}

impl ComponentShare {
    /// Tag of the stack with the largest share (first on ties).
    pub fn dominant(&self) -> Option<usize> {
        self.fractions
            .iter()
            .fold(None, |best: Option<(usize, f64)>, &(tag, f)| match best {
                Some((_, bf)) if bf >= f => best,
                _ => Some((tag, f)),
            })
            .map(|(tag, _)| tag)
    }
}

/// Marginal-technology decomposition of a curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub segments: Vec<ComponentShare>,
    /// Segment containing the queried quantity.
    pub at: usize,
    /// Price at the queried quantity.
    pub price: f64,
    /// `(tag, fraction * price)` at the queried quantity.
    pub components: Vec<(usize, f64)>,
}

impl Decomposition {
    /// Per-stack components at the upper boundary of segment `i`.
    pub fn boundary_components(&self, curve: &PiecewiseCurve, i: usize) -> Vec<(usize, f64)> {
        let seg = &self.segments[i];
        let price = curve.eval_unchecked(seg.q_high);
        seg.fractions.iter().map(|&(tag, f)| (tag, f * price)).collect()
    }

    pub fn marginal(&self) -> &ComponentShare {
        &self.segments[self.at]
    }
}

/// Decompose `curve` (built from `stacks`) into per-stack shares over the
/// segments between consecutive costs, and evaluate the components at `q`.
pub fn components_at(
    stacks: &[PlantStack],
    curve: &PiecewiseCurve,
    q: f64,
) -> Result<Decomposition, CurveError> {
    let total = curve.total_capacity();
    if !(0.0..=total).contains(&q) {
        return Err(CurveError::QuantityOutOfRange { q, total });
    }
    let mut prices = Vec::new();
    sorted_cost_set(stacks, &mut prices);
    let live: Vec<&PlantStack> = stacks.iter().filter(|s| s.cap > 0.0).collect();
    if live.is_empty() {
        return Err(CurveError::EmptyFleet);
    }

    let mut segments = Vec::with_capacity(prices.len());
    let mut prev_p = f64::NEG_INFINITY;
    let mut prev_q: Vec<f64> = vec![0.0; live.len()];
    for &p in &prices {
        let now: Vec<f64> = live.iter().map(|s| stack_invert(s, p)).collect();
        let deltas: Vec<f64> = now.iter().zip(&prev_q).map(|(a, b)| a - b).collect();
        let width: f64 = deltas.iter().sum();
        let q_low: f64 = prev_q.iter().sum();
        let q_high: f64 = now.iter().sum();
        let degenerate = width <= 0.0;
        let fractions = live
            .iter()
            .zip(&deltas)
            .map(|(s, d)| (s.tag, if degenerate { 0.0 } else { d / width }))
            .collect();
        segments.push(ComponentShare {
            p_low: prev_p,
            p_high: p,
            q_low,
            q_high,
            fractions,
            degenerate,
        });
        prev_p = p;
        prev_q = now;
    }

    // Carry fractions into degenerate segments: from the previous
    // nondegenerate segment, or the next one at the start of the curve.
    let first_live = segments.iter().position(|s| !s.degenerate);
    if let Some(first_live) = first_live {
        let mut carry = segments[first_live].fractions.clone();
        for seg in segments.iter_mut() {
            if seg.degenerate {
                seg.fractions.clone_from(&carry);
            } else {
                carry.clone_from(&seg.fractions);
            }
        }
    }

    let at = segments
        .iter()
        .position(|s| !s.degenerate && q <= s.q_high)
        .or(first_live)
        .unwrap_or(0);
    let price = curve.eval_unchecked(q);
    let components = segments[at].fractions.iter().map(|&(tag, f)| (tag, f * price)).collect();
    Ok(Decomposition {
        segments,
        at,
        price,
        components,
    })
}
