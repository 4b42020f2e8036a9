//! Pentagons of achievable rate pairs for a fixed policy, their convex-hull
//! union, and geometric comparison of the resulting regions.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::macmodel::{CoopConfig, Mode, S1, S2, STATE, U, V, X1, X2, Y};
use crate::probcore::{InfoCache, JointPmf, ProbError};

/// Feasibility slack on cooperation-link constraints.
pub const COOP_SLACK: f64 = 1e-12;
/// Largest `I(U;S)` a message-only joint may carry.
pub const LEAK_TOL: f64 = 1e-9;
/// Bound on the number of frontier vertices kept.
pub const MAX_FRONTIER: usize = 4000;
const DEDUP: f64 = 1e-9;
const MARKOV_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("joint does not have the {mode} structure: {why}")]
    WrongMode { mode: Mode, why: String },
    #[error("message-only joint leaks state: I(U;S) = {0}")]
    StateLeak(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
}

impl RatePoint {
    pub fn new(r1: f64, r2: f64) -> Self {
        RatePoint { r1, r2 }
    }

    fn dot(self, mu: (f64, f64)) -> f64 {
        mu.0 * self.r1 + mu.1 * self.r2
    }

    fn dist(self, o: RatePoint) -> f64 {
        (self.r1 - o.r1).hypot(self.r2 - o.r2)
    }
}

/// `R1 ≤ a1`, `R2 ≤ a2`, `R1 + R2 ≤ a12`, all rates nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pentagon {
    pub a1: f64,
    pub a2: f64,
    pub a12: f64,
    pub feasible: bool,
}

impl Pentagon {
    pub fn new(a1: f64, a2: f64, a12: f64) -> Self {
        Pentagon {
            a1: a1.max(0.0),
            a2: a2.max(0.0),
            a12: a12.max(0.0),
            feasible: true,
        }
    }

    pub fn infeasible() -> Self {
        Pentagon {
            a1: 0.0,
            a2: 0.0,
            a12: 0.0,
            feasible: false,
        }
    }

    /// Largest `R2` and largest `R1` on the pentagon.
    pub fn r2_top(&self) -> f64 {
        self.a2.min(self.a12)
    }

    pub fn r1_right(&self) -> f64 {
        self.a1.min(self.a12)
    }

    /// Corner points, counterclockwise from the origin. Empty if infeasible.
    pub fn vertices(&self) -> Vec<RatePoint> {
        if !self.feasible {
            return Vec::new();
        }
        let top = self.r2_top();
        let right = self.r1_right();
        vec![
            RatePoint::new(0.0, 0.0),
            RatePoint::new(right, 0.0),
            RatePoint::new(right, (self.a12 - right).clamp(0.0, top)),
            RatePoint::new((self.a12 - top).clamp(0.0, right), top),
            RatePoint::new(0.0, top),
        ]
    }

    /// `max μ·r` over the pentagon; `-inf` when infeasible.
    pub fn support(&self, mu: (f64, f64)) -> f64 {
        self.vertices()
            .into_iter()
            .map(|v| v.dot(mu))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: RatePoint, tol: f64) -> bool {
        self.feasible
            && p.r1 >= -tol
            && p.r2 >= -tol
            && p.r1 <= self.a1 + tol
            && p.r2 <= self.a2 + tol
            && p.r1 + p.r2 <= self.a12 + tol
    }
}

/// Pentagon plus how far the policy overshoots its cooperation-link budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub pentagon: Pentagon,
    pub violation: f64,
}

fn wrong(mode: Mode, why: impl Into<String>) -> RegionError {
    RegionError::WrongMode {
        mode,
        why: why.into(),
    }
}

fn check_structure(j: &JointPmf, mode: Mode) -> Result<(), RegionError> {
    for name in [S1, S2, U, V, X1, X2, Y] {
        j.axis_index(name)?;
    }
    let mut c = InfoCache::new(j);
    match mode {
        Mode::OneWay | Mode::StateOnly | Mode::MessageOnly => {
            if j.axis_size(V)? != 1 {
                return Err(wrong(mode, "V must be degenerate"));
            }
            if c.cmi(&[X2], &[X1, S1, S2], &[U])? > MARKOV_TOL {
                return Err(wrong(mode, "X2 depends on (X1, S) beyond U"));
            }
        }
        Mode::TwoWay => {
            if c.cmi(&[U], &[S2], &[S1])? > MARKOV_TOL {
                return Err(wrong(mode, "U depends on S2 beyond S1"));
            }
            if c.cmi(&[X1], &[S2], &[S1, U, V])? > MARKOV_TOL {
                return Err(wrong(mode, "X1 depends on S2 beyond (S1, U, V)"));
            }
            if c.cmi(&[X2], &[S1, X1], &[S2, U, V])? > MARKOV_TOL {
                return Err(wrong(mode, "X2 depends on (S1, X1) beyond (S2, U, V)"));
            }
        }
        Mode::Split => {
            if c.cmi(&[V], &[U, S1, S2], &[])? > MARKOV_TOL {
                return Err(wrong(mode, "V is not independent of (U, S)"));
            }
            if c.cmi(&[X2], &[X1, S1, S2], &[U, V])? > MARKOV_TOL {
                return Err(wrong(mode, "X2 depends on (X1, S) beyond (U, V)"));
            }
        }
    }
    Ok(())
}

/// Evaluates the pentagon of `coop.mode` without structural checks.
pub(crate) fn evaluate(c: &mut InfoCache<'_>, coop: &CoopConfig) -> Result<Evaluation, ProbError> {
    let s: &[&str] = &STATE;
    let x12 = [X1, X2];
    let ev = |pentagon, violation: f64| Evaluation {
        pentagon,
        violation: violation.max(0.0),
    };
    Ok(match coop.mode {
        Mode::OneWay | Mode::StateOnly | Mode::MessageOnly => {
            let ius = c.cmi(&[U], s, &[])?;
            let violation = match coop.mode {
                Mode::MessageOnly if ius >= LEAK_TOL => ius,
                Mode::MessageOnly => 0.0,
                _ => ius - coop.c12 - COOP_SLACK,
            };
            if violation > 0.0 {
                return Ok(ev(Pentagon::infeasible(), violation));
            }
            let i1 = c.cmi(&[X1], &[Y], &[X2, S1, S2, U])?;
            let i2 = c.cmi(&[X2], &[Y], &[X1, S1, S2, U])?;
            let i12u = c.cmi(&x12, &[Y], &[S1, S2, U])?;
            let p = match coop.mode {
                Mode::OneWay => {
                    let i12 = c.cmi(&x12, &[Y], s)?;
                    let credit = coop.c12 - ius;
                    Pentagon::new(i1 + credit, i2, (i12u + credit).min(i12))
                }
                Mode::StateOnly => Pentagon::new(i1, i2, i12u),
                _ => {
                    let i12 = c.cmi(&x12, &[Y], s)?;
                    Pentagon::new(i1 + coop.c12, i2, (i12u + coop.c12).min(i12))
                }
            };
            ev(p, 0.0)
        }
        Mode::TwoWay => {
            let iu = c.cmi(&[U], &[S1], &[S2])?;
            let iv = c.cmi(&[V], &[S2], &[S1, U])?;
            let violation =
                (iu - coop.c12 - COOP_SLACK).max(0.0) + (iv - coop.c21 - COOP_SLACK).max(0.0);
            if violation > 0.0 {
                return Ok(ev(Pentagon::infeasible(), violation));
            }
            let full = [S1, S2, U, V];
            let i1 = c.cmi(&[X1], &[Y], &[X2, S1, S2, U, V])?;
            let i2 = c.cmi(&[X2], &[Y], &[X1, S1, S2, U, V])?;
            let i12uv = c.cmi(&x12, &[Y], &full)?;
            let i12 = c.cmi(&x12, &[Y], s)?;
            let p = Pentagon::new(
                i1 + coop.c12 - iu,
                i2 + coop.c21 - iv,
                (i12uv + coop.c12 + coop.c21 - iu - iv).min(i12),
            );
            ev(p, 0.0)
        }
        Mode::Split => {
            let ius = c.cmi(&[U], s, &[])?;
            let violation = ius - coop.c12s - COOP_SLACK;
            if violation > 0.0 {
                return Ok(ev(Pentagon::infeasible(), violation));
            }
            let i1 = c.cmi(&[X1], &[Y], &[X2, S1, S2, U, V])?;
            let i2 = c.cmi(&[X2], &[Y], &[X1, S1, S2, U, V])?;
            let i12uv = c.cmi(&x12, &[Y], &[S1, S2, U, V])?;
            let i12u = c.cmi(&x12, &[Y], &[S1, S2, U])?;
            let p = Pentagon::new(i1 + coop.c12m, i2, (i12uv + coop.c12m).min(i12u));
            ev(p, 0.0)
        }
    })
}

fn checked(j: &JointPmf, coop: CoopConfig) -> Result<Pentagon, RegionError> {
    check_structure(j, coop.mode)?;
    let mut c = InfoCache::new(j);
    if coop.mode == Mode::MessageOnly {
        let leak = c.cmi(&[U], &STATE, &[])?;
        if leak >= LEAK_TOL {
            return Err(RegionError::StateLeak(leak));
        }
    }
    Ok(evaluate(&mut c, &coop)?.pentagon)
}

pub fn pentagon_one_way(j: &JointPmf, c12: f64) -> Result<Pentagon, RegionError> {
    checked(j, CoopConfig::one_way(c12))
}

pub fn pentagon_two_way(j: &JointPmf, c12: f64, c21: f64) -> Result<Pentagon, RegionError> {
    checked(j, CoopConfig::two_way(c12, c21))
}

pub fn pentagon_split(j: &JointPmf, c12m: f64, c12s: f64) -> Result<Pentagon, RegionError> {
    checked(j, CoopConfig::split(c12m, c12s))
}

pub fn pentagon_state_only(j: &JointPmf, c12: f64) -> Result<Pentagon, RegionError> {
    checked(j, CoopConfig::state_only(c12))
}

pub fn pentagon_message_only(j: &JointPmf, c12: f64) -> Result<Pentagon, RegionError> {
    checked(j, CoopConfig::message_only(c12))
}

/// Dispatches on `coop.mode`.
pub fn pentagon_for(j: &JointPmf, coop: &CoopConfig) -> Result<Pentagon, RegionError> {
    checked(j, *coop)
}

/// Convex region bounded by the axes and a concave, nonincreasing frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    /// From `(0, R2max)` to `(R1max, 0)` in increasing `r1`.
    pub boundary: Vec<RatePoint>,
    /// Index of the input pentagon each frontier vertex came from.
    pub sources: Vec<usize>,
}

impl RateRegion {
    pub fn empty() -> Self {
        RateRegion {
            boundary: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    pub fn max_r1(&self) -> f64 {
        self.boundary.iter().map(|p| p.r1).fold(0.0, f64::max)
    }

    pub fn max_r2(&self) -> f64 {
        self.boundary.iter().map(|p| p.r2).fold(0.0, f64::max)
    }

    pub fn support(&self, mu: (f64, f64)) -> f64 {
        self.boundary
            .iter()
            .map(|p| p.dot(mu))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `r` with `(r, r)` in the region.
    pub fn equal_rate(&self) -> f64 {
        let b = &self.boundary;
        for w in b.windows(2) {
            let (p, q) = (w[0], w[1]);
            let (fp, fq) = (p.r2 - p.r1, q.r2 - q.r1);
            if fp >= 0.0 && fq <= 0.0 {
                if fp == fq {
                    return p.r1;
                }
                let t = fp / (fp - fq);
                return p.r1 + t * (q.r1 - p.r1);
            }
        }
        0.0
    }

    /// Counterclockwise polygon: origin, then the frontier from the `R1` axis
    /// back to the `R2` axis.
    pub fn polygon(&self) -> Vec<RatePoint> {
        if self.is_empty() {
            return Vec::new();
        }
        let mut poly = vec![RatePoint::new(0.0, 0.0)];
        for &p in self.boundary.iter().rev() {
            if poly.last().map_or(true, |l| l.dist(p) > DEDUP) {
                poly.push(p);
            }
        }
        while poly.len() > 1 && poly[0].dist(*poly.last().unwrap()) <= DEDUP {
            poly.pop();
        }
        poly
    }

    /// Frontier as CSV: a `# mode=…` line, the `r1,r2` header, then rows.
    pub fn to_csv(&self, coop: &CoopConfig) -> String {
        let mut out = format!(
            "# mode={}, c12={:.6}, c21={:.6}, c12m={:.6}, c12s={:.6}\nr1,r2\n",
            coop.mode, coop.c12, coop.c21, coop.c12m, coop.c12s
        );
        for p in &self.boundary {
            let _ = writeln!(out, "{:.6},{:.6}", p.r1, p.r2);
        }
        out
    }
}

fn cross(o: RatePoint, a: RatePoint, b: RatePoint) -> f64 {
    (a.r1 - o.r1) * (b.r2 - o.r2) - (a.r2 - o.r2) * (b.r1 - o.r1)
}

/// Frontier of the convex hull of the union of the feasible pentagons.
pub fn hull_union(pentagons: &[Pentagon]) -> RateRegion {
    let mut pts: Vec<(RatePoint, usize)> = pentagons
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.vertices().into_iter().map(move |v| (v, i)))
        .collect();
    if pts.is_empty() {
        return RateRegion::empty();
    }
    pts.sort_by(|a, b| {
        a.0.r1
            .total_cmp(&b.0.r1)
            .then(b.0.r2.total_cmp(&a.0.r2))
            .then(a.1.cmp(&b.1))
    });
    pts.dedup_by(|b, a| a.0.dist(b.0) <= DEDUP);

    let mut hull: Vec<(RatePoint, usize)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2].0, hull[hull.len() - 1].0, p.0) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    if hull.len() > MAX_FRONTIER {
        let last = hull.len() - 1;
        hull = (0..MAX_FRONTIER)
            .map(|k| hull[k * last / (MAX_FRONTIER - 1)])
            .collect();
    }
    // Dedup keeps the higher of two nearly coincident points, which can lift
    // the frontier's end a hair off an axis.
    if let Some(first) = hull.first_mut() {
        if first.0.r1 <= DEDUP {
            first.0.r1 = 0.0;
        }
    }
    if let Some(last) = hull.last_mut() {
        if last.0.r2 <= DEDUP {
            last.0.r2 = 0.0;
        }
    }
    let (boundary, sources) = hull.into_iter().unzip();
    RateRegion { boundary, sources }
}

fn seg_dist(p: RatePoint, a: RatePoint, b: RatePoint) -> f64 {
    let (dx, dy) = (b.r1 - a.r1, b.r2 - a.r2);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.r1 - a.r1) * dx + (p.r2 - a.r2) * dy) / len2).clamp(0.0, 1.0);
    p.dist(RatePoint::new(a.r1 + t * dx, a.r2 + t * dy))
}

/// Euclidean distance from `p` to a convex counterclockwise polygon.
fn poly_dist(poly: &[RatePoint], p: RatePoint) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => p.dist(poly[0]),
        n => {
            let edges = (0..n).map(|i| (poly[i], poly[(i + 1) % n]));
            if n >= 3 && edges.clone().all(|(a, b)| cross(a, b, p) >= 0.0) {
                return 0.0;
            }
            edges.map(|(a, b)| seg_dist(p, a, b)).fold(f64::INFINITY, f64::min)
        }
    }
}

pub fn region_contains(r: &RateRegion, p: RatePoint, tol: f64) -> bool {
    poly_dist(&r.polygon(), p) <= tol
}

fn directed_gap(from: &[RatePoint], to: &[RatePoint]) -> f64 {
    from.iter().map(|&p| poly_dist(to, p)).fold(0.0, f64::max)
}

/// Hausdorff distance between two regions. Infinite if exactly one is empty.
pub fn hausdorff(a: &RateRegion, b: &RateRegion) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (false, false) => {
            let (pa, pb) = (a.polygon(), b.polygon());
            directed_gap(&pa, &pb).max(directed_gap(&pb, &pa))
        }
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equal,
    ASubsetB,
    BSubsetA,
    Crossing,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Equal => "equal",
            Verdict::ASubsetB => "a_subset_b",
            Verdict::BSubsetA => "b_subset_a",
            Verdict::Crossing => "crossing",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub verdict: Verdict,
    /// Hausdorff distance between the two regions.
    pub max_gap: f64,
}

fn sample_points(poly: &[RatePoint]) -> Vec<RatePoint> {
    let n = poly.len();
    let mut pts = poly.to_vec();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        pts.push(RatePoint::new((a.r1 + b.r1) / 2.0, (a.r2 + b.r2) / 2.0));
    }
    pts
}

/// Classifies `a` against `b` by checking each region's vertices and edge
/// midpoints for membership in the other, within `tol`.
pub fn region_compare(a: &RateRegion, b: &RateRegion, tol: f64) -> Comparison {
    let (pa, pb) = (a.polygon(), b.polygon());
    let a_in_b = sample_points(&pa).into_iter().all(|p| poly_dist(&pb, p) <= tol);
    let b_in_a = sample_points(&pb).into_iter().all(|p| poly_dist(&pa, p) <= tol);
    let verdict = match (a_in_b, b_in_a) {
        (true, true) => Verdict::Equal,
        (true, false) => Verdict::ASubsetB,
        (false, true) => Verdict::BSubsetA,
        (false, false) => Verdict::Crossing,
    };
    Comparison {
        verdict,
        max_gap: hausdorff(a, b),
    }
}
