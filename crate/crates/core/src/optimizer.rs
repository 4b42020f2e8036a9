//! Boundary tracing by weighted-sum maximization over auxiliary policies.
//!
//! The search is random-restart projected coordinate ascent. Every policy
//! table row is a point on a simplex; a move shifts probability mass between
//! two letters of a row, after which the policy is projected back onto the
//! feasible set (cooperation-link budget, then input weight caps).

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::macmodel::{
    self, check_cardinality, AuxPolicy, CoopConfig, Factorization, InputConstraint, MacChannel,
    ModelError, Mode, S1, S2, U, V,
};
use crate::probcore::{self, Axis, CondPmf, InfoCache, JointPmf, ProbError};
use crate::rateregion::{self, hull_union, Evaluation, Pentagon, RateRegion};

const INITIAL_STEP: f64 = 0.25;
const RANDOM_MOVES: usize = 8;
const INFEASIBLE_SCORE: f64 = -1000.0;
const BISECTION_ROUNDS: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("no feasible policy: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub u_card: usize,
    pub v_card: usize,
    pub weight_count: usize,
    pub restarts: usize,
    pub local_steps: usize,
    pub step_decay: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            u_card: 2,
            v_card: 2,
            weight_count: 65,
            restarts: 24,
            local_steps: 400,
            step_decay: 0.5,
            tol: 1e-7,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        for (name, v) in [
            ("u_card", self.u_card),
            ("v_card", self.v_card),
            ("weight_count", self.weight_count),
            ("restarts", self.restarts),
            ("local_steps", self.local_steps),
        ] {
            if v == 0 {
                return Err(OptError::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(OptError::Config("tol must be positive".into()));
        }
        if !(self.step_decay > 0.0 && self.step_decay < 1.0) {
            return Err(OptError::Config("step_decay must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One simplex row of a flattened parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub off: usize,
    pub len: usize,
    /// Rows the projection overwrites are not worth moving.
    pub searchable: bool,
}

/// A search space of stacked simplex rows with a projection and a pentagon
/// evaluator.
pub trait Problem: Sync {
    fn rows(&self) -> &[Row];

    fn dim(&self) -> usize {
        self.rows().iter().map(|r| r.off + r.len).max().unwrap_or(0)
    }

    /// Maps any stack of simplex rows onto the feasible set.
    fn project(&self, x: &mut [f64]);

    fn evaluate(&self, x: &[f64]) -> Evaluation;
}

/// Objective of a direction: support of the pentagon, or a penalty that
/// still ranks infeasible points by how far they overshoot.
pub fn score(ev: &Evaluation, mu: (f64, f64)) -> f64 {
    if ev.pentagon.feasible {
        ev.pentagon.support(mu)
    } else {
        INFEASIBLE_SCORE - ev.violation
    }
}

/// Best point found for one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub value: f64,
    pub params: Vec<f64>,
    pub pentagon: Pentagon,
    /// Worst final value over restarts.
    pub worst: f64,
    pub feasible_restarts: usize,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn random_row(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    if rng.gen_bool(0.25) {
        out.fill(0.0);
        let k = rng.gen_range(0..out.len());
        out[k] = 1.0;
        return;
    }
    for v in out.iter_mut() {
        *v = -(1.0 - rng.gen::<f64>()).ln();
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
}

fn local_search<P: Problem + ?Sized>(
    p: &P,
    mu: (f64, f64),
    cfg: &SearchConfig,
    rng: &mut ChaCha8Rng,
    mut x: Vec<f64>,
) -> (f64, Vec<f64>) {
    p.project(&mut x);
    let mut cur = score(&p.evaluate(&x), mu);
    let movable: Vec<Row> = p
        .rows()
        .iter()
        .copied()
        .filter(|r| r.searchable && r.len > 1)
        .collect();
    if movable.is_empty() {
        return (cur, x);
    }
    let mut step = INITIAL_STEP;
    let mut y = x.clone();
    let try_move = |y: &mut Vec<f64>, x: &mut Vec<f64>, cur: &mut f64| -> bool {
        p.project(y);
        let s = score(&p.evaluate(y), mu);
        if s > *cur + 1e-13 {
            *cur = s;
            x.copy_from_slice(y);
            true
        } else {
            y.copy_from_slice(x);
            false
        }
    };
    for _ in 0..cfg.local_steps {
        let start = x.clone();
        let mut improved = false;
        for row in &movable {
            for a in 0..row.len {
                for b in 0..row.len {
                    let d = step.min(x[row.off + a]);
                    if a == b || d <= 0.0 {
                        continue;
                    }
                    y[row.off + a] -= d;
                    y[row.off + b] += d;
                    improved |= try_move(&mut y, &mut x, &mut cur);
                }
            }
        }
        // Coordinate moves stall where two bounds of a min() cross; joint
        // moves of several rows can still climb along the crease.
        for _ in 0..RANDOM_MOVES {
            for row in &movable {
                if rng.gen_bool(0.5) {
                    continue;
                }
                let a = rng.gen_range(0..row.len);
                let b = (a + rng.gen_range(1..row.len)) % row.len;
                let d = (step * rng.gen::<f64>()).min(y[row.off + a]);
                y[row.off + a] -= d;
                y[row.off + b] += d;
            }
            improved |= try_move(&mut y, &mut x, &mut cur);
        }
        if improved {
            // Pattern move: repeat the sweep's net displacement while it pays.
            loop {
                for (k, v) in y.iter_mut().enumerate() {
                    *v = (2.0 * x[k] - start[k]).max(0.0);
                }
                for row in &movable {
                    let s: f64 = y[row.off..row.off + row.len].iter().sum();
                    y[row.off..row.off + row.len].iter_mut().for_each(|v| *v /= s);
                }
                if !try_move(&mut y, &mut x, &mut cur) {
                    break;
                }
            }
        } else {
            step *= cfg.step_decay;
            if step < cfg.tol {
                break;
            }
        }
    }
    (cur, x)
}

/// Maximizes `score(·, mu)` over `p` from `cfg.restarts` starting points.
/// Restart 0 starts from `warm` when given. `stream` keys the random streams
/// so distinct directions draw independent starts.
pub fn maximize<P: Problem + ?Sized>(
    p: &P,
    mu: (f64, f64),
    cfg: &SearchConfig,
    warm: Option<&[f64]>,
    stream: u64,
) -> Best {
    let dim = p.dim();
    let runs: Vec<(f64, Vec<f64>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream << 32 | r as u64);
            let start = match warm {
                Some(w) if r == 0 => w.to_vec(),
                _ => {
                    let mut x = vec![0.0; dim];
                    for row in p.rows() {
                        random_row(&mut rng, &mut x[row.off..row.off + row.len]);
                    }
                    x
                }
            };
            local_search(p, mu, cfg, &mut rng, start)
        })
        .collect();
    let worst = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let feasible_restarts = runs.iter().filter(|r| r.0 > INFEASIBLE_SCORE).count();
    let (value, params) = runs
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex_cmp(&b.1, &a.1)))
        .expect("at least one restart");
    let pentagon = p.evaluate(&params).pentagon;
    Best {
        value,
        params,
        pentagon,
        worst,
        feasible_restarts,
    }
}

/// Direction `k` of `count`: Chebyshev-spaced angle in [0°, 90°].
pub fn direction(k: usize, count: usize) -> (f64, f64) {
    let theta = if count == 1 {
        std::f64::consts::FRAC_PI_4
    } else {
        let c = (std::f64::consts::PI * k as f64 / (count - 1) as f64).cos();
        std::f64::consts::FRAC_PI_4 * (1.0 - c)
    };
    let (s, c) = theta.sin_cos();
    (c.max(0.0), s.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionDiag {
    pub mu: (f64, f64),
    pub best: f64,
    /// Best minus worst final value over restarts.
    pub spread: f64,
    pub feasible_restarts: usize,
}

/// Frontier of a generic problem with the parameters behind each vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Traced {
    pub region: RateRegion,
    pub witnesses: Vec<Vec<f64>>,
    pub pentagons: Vec<Pentagon>,
    pub diagnostics: Vec<DirectionDiag>,
}

/// Sweeps `cfg.weight_count` directions from the `R1` axis to the `R2`
/// axis, warm-starting each from the previous winner, and takes the hull of
/// the winning pentagons.
pub fn trace_problem<P: Problem + ?Sized>(p: &P, cfg: &SearchConfig) -> Result<Traced, OptError> {
    cfg.validate()?;
    let mut bests: Vec<Best> = Vec::with_capacity(cfg.weight_count);
    for k in 0..cfg.weight_count {
        let mu = direction(k, cfg.weight_count);
        let warm = bests.last().map(|b| b.params.as_slice());
        bests.push(maximize(p, mu, cfg, warm, k as u64));
    }
    let pentagons: Vec<Pentagon> = bests.iter().map(|b| b.pentagon).collect();
    let region = hull_union(&pentagons);
    if region.is_empty() {
        return Err(OptError::Infeasible(
            "every direction ended on an infeasible policy".into(),
        ));
    }
    let witnesses = region.sources.iter().map(|&i| bests[i].params.clone()).collect();
    let diagnostics = bests
        .iter()
        .enumerate()
        .map(|(k, b)| DirectionDiag {
            mu: direction(k, cfg.weight_count),
            best: b.value,
            spread: b.value - b.worst,
            feasible_restarts: b.feasible_restarts,
        })
        .collect();
    Ok(Traced {
        region,
        witnesses,
        pentagons,
        diagnostics,
    })
}

/// Mixes `x[range]` toward `anchor` by the smallest weight `t` (found by
/// bisection) for which `ok` holds; `t = 1` must satisfy `ok`.
fn retract(
    x: &mut [f64],
    range: std::ops::Range<usize>,
    anchor: &[f64],
    ok: impl Fn(&[f64]) -> bool,
) {
    if ok(x) {
        return;
    }
    let base = x[range.clone()].to_vec();
    let mix = |x: &mut [f64], t: f64| {
        for ((v, b), a) in x[range.clone()].iter_mut().zip(&base).zip(anchor) {
            *v = (1.0 - t) * b + t * a;
        }
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_ROUNDS {
        let mid = 0.5 * (lo + hi);
        mix(x, mid);
        if ok(x) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    mix(x, hi);
}

/// Scales `P(X = 1 | ctx)` so that `Σ ctx_w · P(X = 1 | ctx) ≤ cap`.
fn cap_weight(x: &mut [f64], off: usize, ctx_w: &[f64], cap: f64) {
    let m: f64 = ctx_w.iter().enumerate().map(|(r, w)| w * x[off + 2 * r + 1]).sum();
    if m > cap {
        let f = cap / m;
        for r in 0..ctx_w.len() {
            let one = x[off + 2 * r + 1] * f;
            x[off + 2 * r + 1] = one;
            x[off + 2 * r] = 1.0 - one;
        }
    }
}

/// Policy search space for one channel and cooperation setting.
pub struct PolicyProblem<'a> {
    ch: &'a MacChannel,
    coop: CoopConfig,
    constr: InputConstraint,
    fact: Factorization,
    u_card: usize,
    v_card: usize,
    shapes: [(Vec<usize>, usize); 4],
    offs: [usize; 4],
    rows: Vec<Row>,
}

const AUX: [&str; 4] = [S1, S2, U, V];

fn coord_row(names: &[&str], sizes: &[usize], c: [usize; 4]) -> usize {
    names.iter().zip(sizes).fold(0, |acc, (n, s)| {
        acc * s + c[AUX.iter().position(|a| a == n).expect("auxiliary parent")]
    })
}

impl<'a> PolicyProblem<'a> {
    pub fn new(
        ch: &'a MacChannel,
        coop: CoopConfig,
        constr: InputConstraint,
        cfg: &SearchConfig,
    ) -> Result<Self, OptError> {
        macmodel::validate_channel(ch)?;
        coop.validate()?;
        constr.validate()?;
        cfg.validate()?;
        for enc in [1u8, 2] {
            let size = if enc == 1 { ch.x1_size } else { ch.x2_size };
            if constr.cap(enc).is_some() && size != 2 {
                return Err(ModelError::NonBinary(enc).into());
            }
        }
        let fact = coop.mode.factorization();
        let v_card = if fact.has_v() { cfg.v_card } else { 1 };
        check_cardinality(ch, fact, cfg.u_card, v_card)?;
        let shapes = AuxPolicy::shapes(ch, fact, cfg.u_card, v_card);
        let mut offs = [0; 4];
        let mut rows = Vec::new();
        let mut off = 0;
        for (t, (parents, out)) in shapes.iter().enumerate() {
            offs[t] = off;
            if t == 1 && !fact.has_v() {
                continue;
            }
            let n: usize = parents.iter().product();
            for r in 0..n {
                let tied = t == 0 && r > 0 && coop.mode == Mode::MessageOnly;
                rows.push(Row {
                    off,
                    len: *out,
                    searchable: !tied,
                });
                off += out;
            }
        }
        Ok(PolicyProblem {
            ch,
            coop,
            constr,
            fact,
            u_card: cfg.u_card,
            v_card,
            shapes,
            offs,
            rows,
        })
    }

    fn table(&self, x: &[f64], t: usize) -> CondPmf {
        let (parents, out) = &self.shapes[t];
        let n: usize = parents.iter().product::<usize>() * out;
        CondPmf::from_raw(parents.clone(), *out, x[self.offs[t]..self.offs[t] + n].to_vec())
    }

    fn range(&self, t: usize) -> std::ops::Range<usize> {
        let (parents, out) = &self.shapes[t];
        self.offs[t]..self.offs[t] + parents.iter().product::<usize>() * out
    }

    pub fn to_policy(&self, x: &[f64]) -> AuxPolicy {
        AuxPolicy {
            factorization: self.fact,
            u_card: self.u_card,
            v_card: self.v_card,
            u_given: self.table(x, 0),
            v_given: self.fact.has_v().then(|| self.table(x, 1)),
            x1_given: self.table(x, 2),
            x2_given: self.table(x, 3),
        }
    }

    pub fn from_policy(&self, pol: &AuxPolicy) -> Vec<f64> {
        pol.tables().flat_map(|t| t.probs().iter().copied()).collect()
    }

    fn aux_sizes(&self) -> [usize; 4] {
        [self.ch.s1_size, self.ch.s2_size, self.u_card, self.v_card]
    }

    fn v_row<'x>(&self, x: &'x [f64], r: usize) -> &'x [f64] {
        if self.fact.has_v() {
            &x[self.offs[1] + r * self.v_card..self.offs[1] + (r + 1) * self.v_card]
        } else {
            &[1.0]
        }
    }

    /// Joint of `(s1, s2, u, v)` under `x`.
    fn aux_joint(&self, x: &[f64]) -> JointPmf {
        let sz = self.aux_sizes();
        let [su, sv] = [&self.shapes[0].0, &self.shapes[1].0];
        let mut probs = Vec::with_capacity(sz.iter().product());
        for s1 in 0..sz[0] {
            for s2 in 0..sz[1] {
                let ps = self.ch.state_pmf[s1 * sz[1] + s2];
                for u in 0..sz[2] {
                    let ru = coord_row(self.fact.u_parents(), su, [s1, s2, u, 0]);
                    let pu = x[self.offs[0] + ru * self.u_card + u];
                    for v in 0..sz[3] {
                        let rv = coord_row(self.fact.v_parents(), sv, [s1, s2, u, v]);
                        probs.push(ps * pu * self.v_row(x, rv)[v]);
                    }
                }
            }
        }
        let axes = AUX.iter().zip(sz).map(|(n, s)| Axis::new(*n, s)).collect();
        JointPmf::from_raw(axes, probs)
    }

    /// Probability of each row context of table `t` (x1 or x2).
    fn context_weights(&self, x: &[f64], t: usize) -> Vec<f64> {
        let names = if t == 2 {
            self.fact.x1_parents()
        } else {
            self.fact.x2_parents()
        };
        let parents = &self.shapes[t].0;
        let mut w = vec![0.0; parents.iter().product()];
        let j = self.aux_joint(x);
        let sz = self.aux_sizes();
        let mut i = 0;
        for s1 in 0..sz[0] {
            for s2 in 0..sz[1] {
                for u in 0..sz[2] {
                    for v in 0..sz[3] {
                        w[coord_row(names, parents, [s1, s2, u, v])] += j.probs()[i];
                        i += 1;
                    }
                }
            }
        }
        w
    }

    fn info(&self, x: &[f64], a: &[&str], b: &[&str], c: &[&str]) -> f64 {
        let j = self.aux_joint(x);
        InfoCache::new(&j).cmi(a, b, c).expect("auxiliary axes")
    }

    /// Rows of the U table averaged over the conditioning state, replicated.
    fn u_anchor(&self, x: &[f64]) -> Vec<f64> {
        let (parents, out) = &self.shapes[0];
        let n: usize = parents.iter().product();
        let weights: Vec<f64> = match self.fact {
            Factorization::TwoWay => (0..self.ch.s1_size)
                .map(|s1| self.ch.state_pmf[s1 * self.ch.s2_size..(s1 + 1) * self.ch.s2_size].iter().sum())
                .collect(),
            _ => self.ch.state_pmf.clone(),
        };
        let mut avg = vec![0.0; *out];
        for (r, w) in weights.iter().enumerate() {
            for (k, a) in avg.iter_mut().enumerate() {
                *a += w * x[self.offs[0] + r * out + k];
            }
        }
        avg.repeat(n)
    }

    /// V rows averaged over `s2` for each `u`.
    fn v_anchor(&self, x: &[f64]) -> Vec<f64> {
        let (s2n, un, vn) = (self.ch.s2_size, self.u_card, self.v_card);
        let p_s2: Vec<f64> = (0..s2n)
            .map(|s2| (0..self.ch.s1_size).map(|s1| self.ch.state_pmf[s1 * s2n + s2]).sum())
            .collect();
        let mut out = vec![0.0; s2n * un * vn];
        for u in 0..un {
            let mut avg = vec![0.0; vn];
            for (s2, w) in p_s2.iter().enumerate() {
                for (k, a) in avg.iter_mut().enumerate() {
                    *a += w * x[self.offs[1] + (s2 * un + u) * vn + k];
                }
            }
            for s2 in 0..s2n {
                out[(s2 * un + u) * vn..(s2 * un + u + 1) * vn].copy_from_slice(&avg);
            }
        }
        out
    }
}

impl Problem for PolicyProblem<'_> {
    fn rows(&self) -> &[Row] {
        &self.rows
    }

    fn project(&self, x: &mut [f64]) {
        let state: &[&str] = &[S1, S2];
        match self.coop.mode {
            Mode::MessageOnly => {
                let r = self.range(0);
                let out = self.u_card;
                for k in r.start + out..r.end {
                    x[k] = x[r.start + (k - r.start) % out];
                }
            }
            Mode::OneWay | Mode::StateOnly | Mode::Split => {
                let budget = if self.coop.mode == Mode::Split {
                    self.coop.c12s
                } else {
                    self.coop.c12
                };
                let anchor = self.u_anchor(x);
                retract(x, self.range(0), &anchor, |x| {
                    self.info(x, &[U], state, &[]) <= budget
                });
            }
            Mode::TwoWay => {
                let anchor = self.u_anchor(x);
                retract(x, self.range(0), &anchor, |x| {
                    self.info(x, &[U], &[S1], &[S2]) <= self.coop.c12
                });
                let anchor = self.v_anchor(x);
                retract(x, self.range(1), &anchor, |x| {
                    self.info(x, &[V], &[S2], &[S1, U]) <= self.coop.c21
                });
            }
        }
        for (t, enc) in [(2, 1u8), (3, 2)] {
            if let Some(cap) = self.constr.cap(enc) {
                let w = self.context_weights(x, t);
                cap_weight(x, self.offs[t], &w, cap);
            }
        }
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let pol = self.to_policy(x);
        let j = macmodel::assemble_unchecked(self.ch, &pol);
        let mut c = InfoCache::new(&j);
        rateregion::evaluate(&mut c, &self.coop).expect("assembled joint has every axis")
    }
}

/// Traced region with one certifying policy per frontier vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    pub region: RateRegion,
    pub witnesses: Vec<AuxPolicy>,
    pub diagnostics: Vec<DirectionDiag>,
}

pub fn optimize_weighted(
    ch: &MacChannel,
    coop: &CoopConfig,
    constr: &InputConstraint,
    w: (f64, f64),
    cfg: &SearchConfig,
) -> Result<Option<(f64, AuxPolicy)>, OptError> {
    if !(w.0 >= 0.0 && w.1 >= 0.0 && w.0 + w.1 > 0.0) {
        return Err(OptError::Config(
            "weights must be nonnegative and not both zero".into(),
        ));
    }
    let p = PolicyProblem::new(ch, *coop, *constr, cfg)?;
    let best = maximize(&p, w, cfg, None, 0);
    Ok(best
        .pentagon
        .feasible
        .then(|| (best.value, p.to_policy(&best.params))))
}

pub fn trace_boundary(
    ch: &MacChannel,
    coop: &CoopConfig,
    constr: &InputConstraint,
    cfg: &SearchConfig,
) -> Result<BoundaryResult, OptError> {
    let p = PolicyProblem::new(ch, *coop, *constr, cfg)?;
    let t = trace_problem(&p, cfg)?;
    Ok(BoundaryResult {
        region: t.region,
        witnesses: t.witnesses.iter().map(|x| p.to_policy(x)).collect(),
        diagnostics: t.diagnostics,
    })
}

/// Best equal-rate point. It may sit on a time-sharing chord between two
/// frontier vertices, so both witnesses are returned with the share of the
/// left one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualRatePoint {
    pub rate: f64,
    pub left: Option<AuxPolicy>,
    pub right: Option<AuxPolicy>,
    pub left_share: f64,
}

pub fn max_equal_rate(
    ch: &MacChannel,
    coop: &CoopConfig,
    constr: &InputConstraint,
    cfg: &SearchConfig,
) -> Result<EqualRatePoint, OptError> {
    let res = match trace_boundary(ch, coop, constr, cfg) {
        Ok(r) => r,
        Err(OptError::Infeasible(_)) => {
            return Ok(EqualRatePoint {
                rate: 0.0,
                left: None,
                right: None,
                left_share: 1.0,
            })
        }
        Err(e) => return Err(e),
    };
    Ok(equal_rate_of(&res))
}

pub fn equal_rate_of(res: &BoundaryResult) -> EqualRatePoint {
    let rate = res.region.equal_rate();
    let b = &res.region.boundary;
    let k = b
        .windows(2)
        .position(|w| w[0].r2 - w[0].r1 >= 0.0 && w[1].r2 - w[1].r1 <= 0.0)
        .unwrap_or(0);
    let (p, q) = (b[k], b[(k + 1).min(b.len() - 1)]);
    let left_share = if q.r1 > p.r1 {
        (q.r1 - rate) / (q.r1 - p.r1)
    } else {
        1.0
    };
    EqualRatePoint {
        rate,
        left: res.witnesses.get(k).cloned(),
        right: res.witnesses.get((k + 1).min(b.len() - 1)).cloned(),
        left_share: left_share.clamp(0.0, 1.0),
    }
}

/// How encoder 1's weight budget enters the closed-form example region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormVariant {
    /// All of encoder 1's ones go to the slots where its input is heard:
    /// `P(X1 = 1 | S = 0) = min(2 p1, 1/2)`.
    Concentrated,
    /// `P(X1 = 1 | S = 0) = p1`, as if the budget were spread over all slots.
    Spread,
}

/// Switch-channel region in closed form, optimized over binary `P(u|s)` and
/// `P(x2|u)` with encoder 1 independent of `U`.
struct ClosedForm {
    pz: f64,
    q1: f64,
    p2: f64,
    c12: f64,
    rows: Vec<Row>,
}

fn hb(p: f64) -> f64 {
    probcore::binary_entropy(p.clamp(0.0, 1.0)).expect("clamped")
}

fn conv(p: f64, q: f64) -> f64 {
    probcore::bernoulli_convolve(p.clamp(0.0, 1.0), q.clamp(0.0, 1.0)).expect("clamped")
}

impl ClosedForm {
    /// `P(u)` and `I(U;S)` for params laid out as `[P(u|s=0), P(u|s=1), P(x2|u=0), P(x2|u=1)]`.
    fn u_stats(x: &[f64]) -> ([f64; 2], f64) {
        let pu = [0.5 * (x[0] + x[2]), 0.5 * (x[1] + x[3])];
        let i = hb(pu[1]) - 0.5 * (hb(x[1]) + hb(x[3]));
        (pu, i.max(0.0))
    }
}

impl Problem for ClosedForm {
    fn rows(&self) -> &[Row] {
        &self.rows
    }

    fn project(&self, x: &mut [f64]) {
        let (pu, _) = Self::u_stats(x);
        let anchor = [pu[0], pu[1], pu[0], pu[1]];
        retract(x, 0..4, &anchor, |x| Self::u_stats(x).1 <= self.c12);
        let (pu, _) = Self::u_stats(x);
        cap_weight(x, 4, &pu, self.p2);
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let (_, ius) = Self::u_stats(x);
        if ius > self.c12 + rateregion::COOP_SLACK {
            return Evaluation {
                pentagon: Pentagon::infeasible(),
                violation: ius - self.c12,
            };
        }
        let hz = hb(self.pz);
        let w = [x[5], x[7]];
        let pu1 = [x[2], x[3]];
        let i1 = 0.5 * hb(conv(self.q1, self.pz)) - 0.5 * hz;
        let i2 = 0.5 * (pu1[0] * hb(conv(w[0], self.pz)) + pu1[1] * hb(conv(w[1], self.pz))) - 0.5 * hz;
        let wbar = pu1[0] * w[0] + pu1[1] * w[1];
        let credit = self.c12 - ius;
        let a1 = i1 + credit;
        let a12 = (i1 + i2 + credit).min(0.5 * hb(conv(self.q1, self.pz)) + 0.5 * hb(conv(wbar, self.pz)) - hz);
        Evaluation {
            pentagon: Pentagon::new(a1, i2, a12),
            violation: 0.0,
        }
    }
}

pub fn closed_form_example_variant(
    pz: f64,
    p1: f64,
    p2: f64,
    c12: f64,
    cfg: &SearchConfig,
    variant: ClosedFormVariant,
) -> Result<RateRegion, OptError> {
    for (name, v) in [("pz", pz), ("p1", p1), ("p2", p2)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ModelError::OutOfRange { name, value: v }.into());
        }
    }
    CoopConfig::one_way(c12).validate()?;
    let q1 = match variant {
        ClosedFormVariant::Concentrated => (2.0 * p1).min(0.5),
        ClosedFormVariant::Spread => p1,
    };
    let problem = ClosedForm {
        pz,
        q1,
        p2,
        c12,
        rows: (0..4)
            .map(|r| Row {
                off: 2 * r,
                len: 2,
                searchable: true,
            })
            .collect(),
    };
    Ok(trace_problem(&problem, cfg)?.region)
}

pub fn closed_form_example_region(
    pz: f64,
    p1: f64,
    p2: f64,
    c12: f64,
    cfg: &SearchConfig,
) -> Result<RateRegion, OptError> {
    closed_form_example_variant(pz, p1, p2, c12, cfg, ClosedFormVariant::Concentrated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macmodel::{assemble_joint, build_switch_bsc};
    use crate::rateregion::pentagon_for;

    fn quick() -> SearchConfig {
        SearchConfig {
            weight_count: 9,
            restarts: 4,
            local_steps: 200,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn chebyshev_directions_span_quadrant() {
        assert_eq!(direction(0, 5), (1.0, 0.0));
        let (a, b) = direction(4, 5);
        assert!(a.abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        let (a, b) = direction(2, 5);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let bad = SearchConfig {
            tol: 0.0,
            ..SearchConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn message_only_r1_on_clean_switch() {
        let ch = build_switch_bsc(0.0).unwrap();
        for c12 in [0.0, 0.3, 0.8] {
            let coop = CoopConfig::message_only(c12);
            let (v, _) = optimize_weighted(&ch, &coop, &InputConstraint::none(), (1.0, 0.0), &quick())
                .unwrap()
                .unwrap();
            let want = 0.5 + c12.min(0.5);
            assert!((v - want).abs() < 1e-6, "c12={c12}: {v} vs {want}");
        }
    }

    #[test]
    fn sum_rate_without_aux_matches_grid() {
        let ch = build_switch_bsc(0.1).unwrap();
        let cfg = SearchConfig {
            u_card: 1,
            ..quick()
        };
        let constr = InputConstraint::both(0.3, 0.2);
        let (v, _) = optimize_weighted(&ch, &CoopConfig::one_way(0.0), &constr, (1.0, 1.0), &cfg)
            .unwrap()
            .unwrap();
        // Y depends on one input per state, so the sum rate splits. Encoder 1
        // sees S and only spends ones where S = 0; encoder 2 is blind.
        let mut grid = 0.0f64;
        for i in 0..=200 {
            for k in 0..=200 {
                let (a, b) = (i as f64 / 200.0, k as f64 / 200.0);
                if a / 2.0 > 0.3 || b > 0.2 {
                    continue;
                }
                let r = 0.5 * (hb(conv(a, 0.1)) + hb(conv(b, 0.1))) - hb(0.1);
                grid = grid.max(r);
            }
        }
        assert!(v >= grid - 1e-9, "{v} < {grid}");
        assert!(v <= grid + 1e-3);
    }

    #[test]
    fn witnesses_reproduce_frontier() {
        let ch = build_switch_bsc(0.01).unwrap();
        let coop = CoopConfig::one_way(0.2);
        let res = trace_boundary(&ch, &coop, &InputConstraint::both(0.25, 0.25), &quick()).unwrap();
        assert_eq!(res.witnesses.len(), res.region.boundary.len());
        for (w, v) in res.witnesses.iter().zip(&res.region.boundary) {
            let j = assemble_joint(&ch, w, Mode::OneWay).unwrap();
            let p = pentagon_for(&j, &coop).unwrap();
            assert!(p.contains(*v, 1e-9), "{v:?} not certified by {p:?}");
            assert!(macmodel::expected_weight(w, &ch, 1).unwrap() <= 0.25 + 1e-12);
            assert!(macmodel::expected_weight(w, &ch, 2).unwrap() <= 0.25 + 1e-12);
        }
    }

    #[test]
    fn retraction_respects_link_budget() {
        let ch = build_switch_bsc(0.01).unwrap();
        let cfg = quick();
        for (coop, budget) in [
            (CoopConfig::one_way(0.1), 0.1),
            (CoopConfig::state_only(0.05), 0.05),
            (CoopConfig::split(0.1, 0.02), 0.02),
        ] {
            let p = PolicyProblem::new(&ch, coop, InputConstraint::none(), &cfg).unwrap();
            let mut x = vec![0.0; p.dim()];
            for row in p.rows() {
                x[row.off] = 1.0;
            }
            // U copies S.
            x[p.offs[0]] = 1.0;
            x[p.offs[0] + 1] = 0.0;
            x[p.offs[0] + 2] = 0.0;
            x[p.offs[0] + 3] = 1.0;
            p.project(&mut x);
            let pol = p.to_policy(&x);
            let j = assemble_joint(&ch, &pol, coop.mode).unwrap();
            let ius = probcore::conditional_mutual_information(&j, &[U], &[S1, S2], &[]).unwrap();
            assert!(ius <= budget + 1e-12 && ius > budget - 1e-6, "{ius}");
        }
    }

    #[test]
    fn seed_determinism() {
        let ch = build_switch_bsc(0.01).unwrap();
        let coop = CoopConfig::one_way(0.2);
        let c = InputConstraint::both(0.25, 0.25);
        let a = trace_boundary(&ch, &coop, &c, &quick()).unwrap();
        let b = trace_boundary(&ch, &coop, &c, &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn useless_channel_has_zero_equal_rate() {
        let ch = build_switch_bsc(0.5).unwrap();
        let r = max_equal_rate(&ch, &CoopConfig::one_way(0.0), &InputConstraint::none(), &quick()).unwrap();
        assert!(r.rate.abs() < 1e-12);
    }

    #[test]
    fn closed_form_without_cooperation() {
        let cfg = quick();
        let r = closed_form_example_region(0.01, 0.25, 0.25, 0.0, &cfg).unwrap();
        let hz = hb(0.01);
        let r1 = 0.5 * hb(conv(0.5, 0.01)) - 0.5 * hz;
        let r2 = 0.5 * hb(conv(0.25, 0.01)) - 0.5 * hz;
        assert!((r.max_r1() - r1).abs() < 1e-9);
        assert!((r.max_r2() - r2).abs() < 1e-6);
        // pz = 0: 0.5 Hb(p1 * 0) - 0.5 Hb(0) = 0.5 Hb(p1).
        let s = closed_form_example_variant(0.0, 0.2, 0.2, 0.0, &cfg, ClosedFormVariant::Spread).unwrap();
        assert!((s.max_r1() - 0.5 * hb(0.2)).abs() < 1e-9);
    }
}
