//! Piecewise-linear paths in the orthant and their cost functionals: the
//! plain integral of the local rate along the path, and the dilated variant
//! that may stretch each segment's clock by a factor θ ≥ 1 within a total
//! time budget.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{NetworkModel, SubsetMask};
use crate::scalar::Scalar;
use crate::variational::{local_rate, RateOpts};

/// Continuous piecewise-linear path given by its knots.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePath<T> {
    knots: Vec<(T, Vec<T>)>,
}

impl<T: Scalar> PiecewisePath<T> {
    pub fn new(knots: Vec<(T, Vec<T>)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Invalid("a path needs at least two knots".into()));
        }
        let dim = knots[0].1.len();
        for (k, (t, x)) in knots.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Invalid("knot time must be finite".into()));
            }
            if x.len() != dim {
                return Err(Error::Invalid("knot dimensions differ".into()));
            }
            for (i, &c) in x.iter().enumerate() {
                if !(c >= T::zero()) {
                    return Err(Error::NegativeCoordinate {
                        index: i,
                        value: c.as_f64(),
                    });
                }
            }
            if k > 0 && !(knots[k - 1].0 < *t) {
                return Err(Error::Invalid("knot times must strictly increase".into()));
            }
        }
        Ok(PiecewisePath { knots })
    }

    /// Straight line from `a` to `b` over `[t0, t1]`.
    pub fn line(t0: T, a: Vec<T>, t1: T, b: Vec<T>) -> Result<Self> {
        Self::new(vec![(t0, a), (t1, b)])
    }

    pub fn knots(&self) -> &[(T, Vec<T>)] {
        &self.knots
    }

    pub fn dimension(&self) -> usize {
        self.knots[0].1.len()
    }

    pub fn start_time(&self) -> T {
        self.knots[0].0
    }

    pub fn end_time(&self) -> T {
        self.knots[self.knots.len() - 1].0
    }

    pub fn start_point(&self) -> &[T] {
        &self.knots[0].1
    }

    pub fn end_point(&self) -> &[T] {
        &self.knots[self.knots.len() - 1].1
    }

    /// Value at `t`, clamped to the path's time span.
    pub fn eval(&self, t: T) -> Vec<T> {
        if t <= self.start_time() {
            return self.knots[0].1.clone();
        }
        if t >= self.end_time() {
            return self.end_point().to_vec();
        }
        let mut hi = 1;
        while self.knots[hi].0 < t {
            hi += 1;
        }
        let (t0, ref a) = self.knots[hi - 1];
        let (t1, ref b) = self.knots[hi];
        let w = (t - t0) / (t1 - t0);
        a.iter().zip(b).map(|(&x, &y)| x + w * (y - x)).collect()
    }

    /// Largest max-norm distance of any knot from the origin.
    pub fn sup_norm(&self) -> T {
        self.knots
            .iter()
            .flat_map(|(_, x)| x.iter())
            .fold(T::zero(), |m, &c| m.max(c.abs()))
    }

    /// Parses CSV with header `t,x1,...,xN`.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: "empty path file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.is_empty() || cols[0] != "t" {
            return Err(Error::Parse {
                line: 1,
                message: "path header must start with `t`".into(),
            });
        }
        let dim = cols.len() - 1;
        if dim == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "path header needs at least one coordinate column".into(),
            });
        }
        let mut knots = Vec::new();
        for (lineno, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != dim + 1 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {} fields, found {}", dim + 1, parts.len()),
                });
            }
            let mut nums = Vec::with_capacity(dim + 1);
            for p in &parts {
                let x: f64 = p.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad number `{p}`"),
                })?;
                nums.push(T::of(x));
            }
            knots.push((nums[0], nums[1..].to_vec()));
        }
        PiecewisePath::new(knots)
    }

    /// CSV form with header `t,x1,...,xN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.dimension() {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (t, x) in &self.knots {
            out.push_str(&crate::report::fmt(*t));
            for &c in x {
                out.push(',');
                out.push_str(&crate::report::fmt(c));
            }
            out.push('\n');
        }
        out
    }
}

/// Face of the open segment from `a` to `b`: the coordinates whose linear
/// interpolation is strictly positive strictly between the endpoints, i.e.
/// `{i : a_i + b_i > 0}`.
pub fn segment_face<T: Scalar>(a: &[T], b: &[T]) -> Result<SubsetMask> {
    if a.len() != b.len() {
        return Err(Error::Invalid(
            "segment endpoints differ in dimension".into(),
        ));
    }
    let mut mask = SubsetMask::empty();
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        if x < T::zero() || y < T::zero() {
            return Err(Error::NegativeCoordinate {
                index: i,
                value: x.min(y).as_f64(),
            });
        }
        if x + y > T::zero() {
            mask = mask.with(i);
        }
    }
    Ok(mask)
}

/// Per-segment cost attribution.
#[derive(Clone, Debug)]
pub struct SegmentCost<T> {
    pub face: SubsetMask,
    pub velocity: Vec<T>,
    pub duration: T,
    pub theta: T,
    pub cost: T,
}

/// Total path cost with its per-segment breakdown.
#[derive(Clone, Debug)]
pub struct CostBreakdown<T> {
    /// Sum of the segment costs, with `+∞` absorbing.
    pub total: T,
    pub per_segment: Vec<SegmentCost<T>>,
}

/// Per-segment dilation factors chosen within the time budget.
#[derive(Clone, Debug)]
pub struct DilationSchedule<T> {
    pub factors: Vec<T>,
    pub budget: T,
}

/// Memo for rate evaluations keyed by face and quantized velocity.
struct RateCache<'a, T> {
    model: &'a NetworkModel<T>,
    opts: &'a RateOpts<T>,
    memo: BTreeMap<(u32, Vec<i64>), T>,
}

impl<'a, T: Scalar> RateCache<'a, T> {
    fn new(model: &'a NetworkModel<T>, opts: &'a RateOpts<T>) -> Self {
        RateCache {
            model,
            opts,
            memo: BTreeMap::new(),
        }
    }

    fn rate(&mut self, face: SubsetMask, v: &[T]) -> Result<T> {
        // faces with an empty tilt space have velocity-independent rate
        let key_v: Vec<i64> = if face.is_empty() {
            Vec::new()
        } else {
            v.iter()
                .map(|&x| (x.as_f64() / 1e-9).round() as i64)
                .collect()
        };
        let key = (face.bits(), key_v);
        if let Some(&hit) = self.memo.get(&key) {
            return Ok(hit);
        }
        let value = local_rate(self.model, face, v, self.opts)?.value;
        self.memo.insert(key, value);
        Ok(value)
    }
}

struct Segment<T> {
    face: SubsetMask,
    duration: T,
    velocity: Vec<T>,
}

fn segments<T: Scalar>(path: &PiecewisePath<T>) -> Result<Vec<Segment<T>>> {
    let mut out = Vec::with_capacity(path.knots().len() - 1);
    for window in path.knots().windows(2) {
        let (t0, ref a) = window[0];
        let (t1, ref b) = window[1];
        let h = t1 - t0;
        let velocity: Vec<T> = a.iter().zip(b).map(|(&x, &y)| (y - x) / h).collect();
        out.push(Segment {
            face: segment_face(a, b)?,
            duration: h,
            velocity,
        });
    }
    Ok(out)
}

/// Cost of a path: `Σ_j h_j · L_{Λ_j}(Δ_j / h_j)` over its segments.
pub fn path_cost<T: Scalar>(
    model: &NetworkModel<T>,
    path: &PiecewisePath<T>,
    opts: &RateOpts<T>,
) -> Result<CostBreakdown<T>> {
    if path.dimension() != model.dimension() {
        return Err(Error::Invalid("path and model dimensions differ".into()));
    }
    let mut cache = RateCache::new(model, opts);
    let mut per_segment = Vec::new();
    let mut total = T::zero();
    for seg in segments(path)? {
        let rate = cache.rate(seg.face, &seg.velocity)?;
        let cost = seg.duration * rate;
        total += cost;
        per_segment.push(SegmentCost {
            face: seg.face,
            velocity: seg.velocity,
            duration: seg.duration,
            theta: T::one(),
            cost,
        });
    }
    Ok(CostBreakdown { total, per_segment })
}

/// Golden-section minimum of a unimodal function on `[lo, hi]`.
fn golden_min<T: Scalar>(
    mut f: impl FnMut(T) -> Result<T>,
    lo: T,
    hi: T,
    tol: T,
) -> Result<(T, T)> {
    let phi = T::of(0.618_033_988_749_894_9);
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 >= f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1)?;
        }
    }
    let mid = (a + b) * T::of(0.5);
    let fm = f(mid)?;
    // return the best of the probes
    if f1 <= fm && f1 <= f2 {
        Ok((x1, f1))
    } else if f2 <= fm {
        Ok((x2, f2))
    } else {
        Ok((mid, fm))
    }
}

/// Minimizes `Σ_j h_j θ_j · L_{Λ_j}(v_j / θ_j)` over per-segment dilations
/// `θ_j ≥ 1` subject to `Σ_j h_j (θ_j − 1) ≤ budget`.
///
/// Each single-θ subproblem is a convex perspective minimization solved by
/// bracketed search; the coupling constraint is resolved by bisection on a
/// Lagrange multiplier. A zero budget reduces exactly to `path_cost`.
pub fn dilated_cost<T: Scalar>(
    model: &NetworkModel<T>,
    path: &PiecewisePath<T>,
    budget: T,
    opts: &RateOpts<T>,
) -> Result<(CostBreakdown<T>, DilationSchedule<T>)> {
    if budget < T::zero() {
        return Err(Error::Invalid("dilation budget must be nonnegative".into()));
    }
    if budget == T::zero() {
        let breakdown = path_cost(model, path, opts)?;
        let factors = vec![T::one(); breakdown.per_segment.len()];
        return Ok((breakdown, DilationSchedule { factors, budget }));
    }

    let segs = segments(path)?;
    let mut cache = RateCache::new(model, opts);

    // perspective cost of one segment at dilation θ
    let mut seg_cost = |seg: &Segment<T>, theta: T| -> Result<T> {
        let w: Vec<T> = seg.velocity.iter().map(|&v| v / theta).collect();
        let rate = cache.rate(seg.face, &w)?;
        Ok(seg.duration * theta * rate)
    };

    let theta_tol = T::of(1e-9);
    let best_for =
        |eta: T, cache_cost: &mut dyn FnMut(&Segment<T>, T) -> Result<T>| -> Result<(Vec<T>, T)> {
            let mut thetas = Vec::with_capacity(segs.len());
            let mut used = T::zero();
            for seg in &segs {
                let hi = T::one() + budget / seg.duration;
                let (theta, _) = golden_min(
                    |th| Ok(cache_cost(seg, th)? + eta * seg.duration * (th - T::one())),
                    T::one(),
                    hi,
                    theta_tol,
                )?;
                used += seg.duration * (theta - T::one());
                thetas.push(theta);
            }
            Ok((thetas, used))
        };

    let (mut thetas, used) = best_for(T::zero(), &mut seg_cost)?;
    if used > budget {
        // bisection on the multiplier; spend decreases as η grows
        let mut lo = T::zero();
        let mut hi = T::one();
        loop {
            let (_, spent) = best_for(hi, &mut seg_cost)?;
            if spent <= budget {
                break;
            }
            hi *= T::of(2.0);
            if hi > T::of(1e30) {
                return Err(Error::Invalid("dilation multiplier diverged".into()));
            }
        }
        let mut feasible = best_for(hi, &mut seg_cost)?.0;
        for _ in 0..100 {
            let mid = (lo + hi) * T::of(0.5);
            let (cand, spent) = best_for(mid, &mut seg_cost)?;
            if spent <= budget {
                hi = mid;
                feasible = cand;
            } else {
                lo = mid;
            }
            if hi - lo < T::of(1e-12) {
                break;
            }
        }
        thetas = feasible;
    }

    let mut per_segment = Vec::with_capacity(segs.len());
    let mut total = T::zero();
    for (seg, &theta) in segs.iter().zip(&thetas) {
        let cost = seg_cost(seg, theta)?;
        total += cost;
        per_segment.push(SegmentCost {
            face: seg.face,
            velocity: seg.velocity.clone(),
            duration: seg.duration,
            theta,
            cost,
        });
    }
    Ok((
        CostBreakdown { total, per_segment },
        DilationSchedule {
            factors: thetas,
            budget,
        },
    ))
}

/// One row of a refinement trace.
#[derive(Clone, Debug)]
pub struct RefinePoint<T> {
    pub grid: usize,
    pub budget: T,
    pub cost: T,
}

/// Interpolates the sampled path on uniform grids over `[0, t_end]` and
/// reports the dilated cost for each grid. The trace approximates the
/// regularized path functional empirically; no convergence is claimed.
///
/// `budgets` must have one entry per grid or a single shared entry.
pub fn refine_trace<T: Scalar>(
    model: &NetworkModel<T>,
    sampler: &dyn Fn(T) -> std::result::Result<Vec<T>, String>,
    t_end: T,
    grids: &[usize],
    budgets: &[T],
    opts: &RateOpts<T>,
) -> Result<Vec<RefinePoint<T>>> {
    if grids.is_empty() {
        return Err(Error::Invalid("no grids given".into()));
    }
    if budgets.len() != grids.len() && budgets.len() != 1 {
        return Err(Error::Invalid(
            "budgets must match grids or be a single value".into(),
        ));
    }
    if !(t_end > T::zero()) {
        return Err(Error::Invalid("t_end must be positive".into()));
    }
    let mut out = Vec::with_capacity(grids.len());
    for (k, &grid) in grids.iter().enumerate() {
        if grid == 0 {
            return Err(Error::Invalid("grid size must be positive".into()));
        }
        let budget = budgets[if budgets.len() == 1 { 0 } else { k }];
        let mut knots = Vec::with_capacity(grid + 1);
        for j in 0..=grid {
            let t = t_end * T::of(j as f64) / T::of(grid as f64);
            let x = sampler(t).map_err(|message| Error::SamplerFailure {
                t: t.as_f64(),
                message,
            })?;
            if x.len() != model.dimension() {
                return Err(Error::SamplerFailure {
                    t: t.as_f64(),
                    message: "sampled point has wrong dimension".into(),
                });
            }
            knots.push((t, x));
        }
        let path = PiecewisePath::new(knots)?;
        let (breakdown, _) = dilated_cost(model, &path, budget, opts)?;
        out.push(RefinePoint {
            grid,
            budget,
            cost: breakdown.total,
        });
    }
    Ok(out)
}
