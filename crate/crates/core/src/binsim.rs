//! Monte-Carlo simulation of the binned random code for one-way cooperation.
//!
//! Encoder 1 splits its message into a bin index `m1a` and a remainder
//! `m1b`. In bin `m1a` it picks the first `U` codeword jointly typical with
//! the state sequence and sends that word's index over the cooperation link.
//! Both encoders then superimpose their codewords on it. The decoder knows the
//! state, so it can repeat the encoder's bin search for every candidate
//! `m1a`, and looks for the unique `(m1a, m1b, m2)` whose codewords are
//! jointly typical with the received sequence.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::macmodel::{
    assemble_joint, AuxPolicy, Factorization, MacChannel, ModelError, Mode, STATE, U, X1, X2, Y,
};
use crate::probcore::{InfoCache, JointPmf, ProbError};

/// Largest allowed `n·R` exponent for any codebook dimension.
pub const MAX_EXPONENT: f64 = 20.0;
/// Largest number of decoder candidates per block.
pub const MAX_CANDIDATES: u64 = 1 << 26;
const ROUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("invalid simulation parameter: {0}")]
    Invalid(String),
    #[error("memory guard: {0}")]
    MemoryGuard(String),
    #[error("sequence {index} has length {found}, expected {expected}")]
    Length {
        index: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub channel: MacChannel,
    pub policy: AuxPolicy,
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
    pub c12: f64,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if self.n == 0 || self.n > MAX_EXPONENT as usize {
            return bad(format!("n = {} must lie in 1..=20", self.n));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps = {} must lie in (0, 1)", self.eps));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for (name, r) in [("r1", self.r1), ("r2", self.r2), ("c12", self.c12)] {
            if !r.is_finite() || r < 0.0 {
                return bad(format!("{name} = {r} must be finite and nonnegative"));
            }
            if self.n as f64 * r > MAX_EXPONENT {
                return Err(SimError::MemoryGuard(format!(
                    "n·{name} = {} exceeds {MAX_EXPONENT}",
                    self.n as f64 * r
                )));
            }
        }
        if self.policy.factorization != Factorization::OneWay {
            return bad("the simulator needs a one-way policy".into());
        }
        self.policy.validate_for(&self.channel)?;
        Ok(())
    }
}

/// `⌊2^x⌋`, at least 1, tolerant of `x` landing a hair below an integer.
fn count(x: f64) -> usize {
    ((2f64).powf(x) + ROUND_SLACK).floor().max(1.0) as usize
}

/// Allowed count range per cell for blocklength `n`: strong typicality with
/// relative slack `eps`; cells of probability zero must stay empty.
#[derive(Debug, Clone, PartialEq)]
struct TypicalBounds {
    lo: Vec<u32>,
    hi: Vec<u32>,
}

impl TypicalBounds {
    fn new(probs: &[f64], n: usize, eps: f64) -> Self {
        let nf = n as f64;
        let (lo, hi) = probs
            .iter()
            .map(|&p| {
                if p <= 0.0 {
                    (0, 0)
                } else {
                    let lo = (nf * p * (1.0 - eps) - ROUND_SLACK).ceil().max(0.0);
                    let hi = (nf * p * (1.0 + eps) + ROUND_SLACK).floor();
                    (lo as u32, hi as u32)
                }
            })
            .unzip();
        TypicalBounds { lo, hi }
    }

    /// `cells` yields the flat cell index of each position.
    fn check(&self, cells: impl Iterator<Item = usize>, counts: &mut [u32]) -> bool {
        counts.fill(0);
        for c in cells {
            counts[c] += 1;
            if counts[c] > self.hi[c] {
                return false;
            }
        }
        counts.iter().zip(&self.lo).all(|(c, lo)| c >= lo)
    }
}

/// Strong joint typicality of `seqs` (one per axis of `j`, same order).
pub fn is_jointly_typical(seqs: &[&[usize]], j: &JointPmf, eps: f64) -> Result<bool, SimError> {
    let axes = j.axes();
    if seqs.len() != axes.len() {
        return Err(SimError::Invalid(format!(
            "{} sequences for {} axes",
            seqs.len(),
            axes.len()
        )));
    }
    let n = seqs.first().map_or(0, |s| s.len());
    for (index, s) in seqs.iter().enumerate() {
        if s.len() != n {
            return Err(SimError::Length {
                index,
                expected: n,
                found: s.len(),
            });
        }
        if let Some(&bad) = s.iter().find(|&&v| v >= axes[index].size) {
            return Err(SimError::Invalid(format!(
                "letter {bad} outside axis `{}`",
                axes[index].name
            )));
        }
    }
    let bounds = TypicalBounds::new(j.probs(), n, eps);
    let mut counts = vec![0; j.probs().len()];
    let cells = (0..n).map(|i| {
        seqs.iter()
            .zip(axes)
            .fold(0, |acc, (s, a)| acc * a.size + s[i])
    });
    Ok(bounds.check(cells, &mut counts))
}

/// Categorical sampler rows stored as cumulative sums.
#[derive(Debug, Clone, PartialEq)]
struct Sampler {
    cum: Vec<Vec<f64>>,
}

impl Sampler {
    fn new<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let cum = rows
            .map(|r| {
                let mut acc = 0.0;
                r.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        Sampler { cum }
    }

    fn draw(&self, row: usize, rng: &mut ChaCha8Rng) -> u8 {
        let c = &self.cum[row];
        let t = rng.gen::<f64>() * c[c.len() - 1];
        c.iter().position(|&v| t < v).unwrap_or(c.len() - 1) as u8
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0, |h, &p| mix(h ^ p))
}

const TAG_U: u64 = 1;
const TAG_X1: u64 = 2;
const TAG_X2: u64 = 3;
const TAG_TRIAL: u64 = 4;

fn keyed_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_key(parts));
    rng
}

/// Random code for one parameter set. `U` words are stored; `X1` and `X2`
/// words are regenerated on demand from keyed random streams, which fixes
/// them just as firmly as storing them would.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub n: usize,
    /// `u_count` words of length `n`, back to back.
    pub u_words: Vec<u8>,
    pub u_count: usize,
    pub bins: usize,
    pub m1a_count: usize,
    pub m1b_count: usize,
    pub m2_count: usize,
    /// `I(U;S)` of the policy.
    pub ius: f64,
    seed: u64,
    s_size: usize,
    u_card: usize,
    cell_sizes: [usize; 5],
    us_bounds: TypicalBounds,
    full_bounds: TypicalBounds,
    x1_sampler: Sampler,
    x2_sampler: Sampler,
}

impl Codebook {
    pub fn u_word(&self, j: usize) -> &[u8] {
        &self.u_words[j * self.n..(j + 1) * self.n]
    }

    /// Index range of bin `b`; sizes differ by at most one.
    pub fn bin(&self, b: usize) -> std::ops::Range<usize> {
        b * self.u_count / self.bins..(b + 1) * self.u_count / self.bins
    }

    pub fn m1_count(&self) -> usize {
        self.m1a_count * self.m1b_count
    }

    fn x2_word(&self, j: usize, m2: usize) -> Vec<u8> {
        let mut rng = keyed_rng(self.seed, &[TAG_X2, j as u64, m2 as u64]);
        self.u_word(j)
            .iter()
            .map(|&u| self.x2_sampler.draw(u as usize, &mut rng))
            .collect()
    }

    fn x1_word(&self, j: usize, m1b: usize, s: &[u8], s_hash: u64) -> Vec<u8> {
        let mut rng = keyed_rng(self.seed, &[TAG_X1, j as u64, m1b as u64, s_hash]);
        self.u_word(j)
            .iter()
            .zip(s)
            .map(|(&u, &s)| {
                let row = s as usize * self.u_card + u as usize;
                self.x1_sampler.draw(row, &mut rng)
            })
            .collect()
    }

    fn covers(&self, j: usize, s: &[u8], counts: &mut [u32]) -> bool {
        let cells = self
            .u_word(j)
            .iter()
            .zip(s)
            .map(|(&u, &s)| s as usize * self.u_card + u as usize);
        self.us_bounds.check(cells, counts)
    }

    /// First word of bin `m1a` typical with `s`, or the bin's first word.
    fn select(&self, m1a: usize, s: &[u8]) -> (usize, bool) {
        let mut counts = vec![0; self.s_size * self.u_card];
        let bin = self.bin(m1a);
        bin.clone()
            .find(|&j| self.covers(j, s, &mut counts))
            .map_or((bin.start, false), |j| (j, true))
    }

    fn full_typical(&self, s: &[u8], u: &[u8], x1: &[u8], x2: &[u8], y: &[u8], counts: &mut [u32]) -> bool {
        let [_, us, xs1, xs2, ys] = self.cell_sizes;
        let cells = (0..self.n).map(|i| {
            (((s[i] as usize * us + u[i] as usize) * xs1 + x1[i] as usize) * xs2 + x2[i] as usize) * ys
                + y[i] as usize
        });
        self.full_bounds.check(cells, counts)
    }
}

fn hash_seq(s: &[u8]) -> u64 {
    s.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| mix(h ^ b as u64))
}

fn policy_joint(p: &SimParams) -> Result<JointPmf, SimError> {
    Ok(assemble_joint(&p.channel, &p.policy, Mode::OneWay)?)
}

/// Marginal of `j` over `names`, in that order.
fn marginal(j: &JointPmf, names: &[&str]) -> Result<Vec<f64>, SimError> {
    let idx: Vec<usize> = names.iter().map(|n| j.axis_index(n)).collect::<Result<_, _>>()?;
    Ok(j.marginal_table(&idx))
}

pub fn build_codebooks(p: &SimParams) -> Result<Codebook, SimError> {
    p.validate()?;
    let j = policy_joint(p)?;
    let ius = InfoCache::new(&j).cmi(&[U], &STATE, &[])?;
    let n = p.n;
    let nf = n as f64;
    let u_count = count(nf * p.c12);
    let bins = count(nf * (p.c12 - ius - p.eps / 2.0)).min(u_count);
    let m1 = count(nf * p.r1);
    let m1a_count = bins.min(m1);
    let m1b_count = (m1 / m1a_count).max(1);
    let m2_count = count(nf * p.r2);
    let candidates = (m1a_count * m1b_count) as u64 * m2_count as u64;
    if candidates > MAX_CANDIDATES {
        return Err(SimError::MemoryGuard(format!(
            "{candidates} decoder candidates exceed {MAX_CANDIDATES}"
        )));
    }

    let ch = &p.channel;
    let pol = &p.policy;
    let s_size = ch.state_size();
    let pu = marginal(&j, &[U])?;
    let u_sampler = Sampler::new(std::iter::once(pu.as_slice()));
    let mut rng = keyed_rng(p.seed, &[TAG_U]);
    let u_words = (0..u_count * n).map(|_| u_sampler.draw(0, &mut rng)).collect();

    let full = marginal(&j, &["s1", "s2", U, X1, X2, Y])?;
    Ok(Codebook {
        n,
        u_words,
        u_count,
        bins,
        m1a_count,
        m1b_count,
        m2_count,
        ius,
        seed: p.seed,
        s_size,
        u_card: pol.u_card,
        cell_sizes: [s_size, pol.u_card, ch.x1_size, ch.x2_size, ch.y_size],
        us_bounds: TypicalBounds::new(&marginal(&j, &["s1", "s2", U])?, n, p.eps),
        full_bounds: TypicalBounds::new(&full, n, p.eps),
        x1_sampler: Sampler::new((0..pol.x1_given.num_rows()).map(|r| pol.x1_given.row(r))),
        x2_sampler: Sampler::new((0..pol.x2_given.num_rows()).map(|r| pol.x2_given.row(r))),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub x1: Vec<u8>,
    pub x2: Vec<u8>,
    /// Index of the `U` word sent over the cooperation link.
    pub coop_index: usize,
    pub coverage_ok: bool,
}

/// `s_seq` holds flattened state letters `s1·|S2| + s2`.
pub fn encode(cb: &Codebook, m1: usize, m2: usize, s_seq: &[u8]) -> Result<Encoded, SimError> {
    if m1 >= cb.m1_count() || m2 >= cb.m2_count {
        return Err(SimError::Invalid(format!(
            "message pair ({m1}, {m2}) outside {} x {}",
            cb.m1_count(),
            cb.m2_count
        )));
    }
    check_len(0, cb.n, s_seq)?;
    let (m1a, m1b) = (m1 / cb.m1b_count, m1 % cb.m1b_count);
    let (j, coverage_ok) = cb.select(m1a, s_seq);
    Ok(Encoded {
        x1: cb.x1_word(j, m1b, s_seq, hash_seq(s_seq)),
        x2: cb.x2_word(j, m2),
        coop_index: j,
        coverage_ok,
    })
}

fn check_len(index: usize, n: usize, s: &[u8]) -> Result<(), SimError> {
    if s.len() != n {
        return Err(SimError::Length {
            index,
            expected: n,
            found: s.len(),
        });
    }
    Ok(())
}

/// Message triple `(m1a, m1b, m2)`.
pub type Triple = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Unique(Triple),
    None,
    /// Two typical triples, in search order.
    Multiple(Triple, Triple),
}

impl Decoded {
    pub fn messages(&self, cb: &Codebook) -> Option<(usize, usize)> {
        match self {
            Decoded::Unique((a, b, m2)) => Some((a * cb.m1b_count + b, *m2)),
            _ => None,
        }
    }
}

/// Exhaustive search, stopping at the second typical triple.
pub fn decode(cb: &Codebook, y_seq: &[u8], s_seq: &[u8]) -> Result<Decoded, SimError> {
    check_len(0, cb.n, y_seq)?;
    check_len(1, cb.n, s_seq)?;
    let s_hash = hash_seq(s_seq);
    let mut counts = vec![0; cb.full_bounds.lo.len()];
    let mut first = None;
    for m1a in 0..cb.m1a_count {
        let (j, _) = cb.select(m1a, s_seq);
        let u = cb.u_word(j);
        let x2s: Vec<Vec<u8>> = (0..cb.m2_count).map(|m2| cb.x2_word(j, m2)).collect();
        for m1b in 0..cb.m1b_count {
            let x1 = cb.x1_word(j, m1b, s_seq, s_hash);
            for (m2, x2) in x2s.iter().enumerate() {
                if cb.full_typical(s_seq, u, &x1, x2, y_seq, &mut counts) {
                    match first {
                        None => first = Some((m1a, m1b, m2)),
                        Some(f) => return Ok(Decoded::Multiple(f, (m1a, m1b, m2))),
                    }
                }
            }
        }
    }
    Ok(first.map_or(Decoded::None, Decoded::Unique))
}

/// Failed blocks tagged by first cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    /// No word in the chosen bin was typical with the state.
    pub coverage_fail: usize,
    /// The transmitted codewords were not typical with the channel output.
    pub atypical: usize,
    /// A wrong triple was typical; named by which indices were wrong.
    pub confusion_m2: usize,
    pub confusion_m1b: usize,
    pub confusion_m1b_m2: usize,
    pub confusion_m1a: usize,
}

impl ErrorBreakdown {
    pub fn total(&self) -> usize {
        self.coverage_fail + self.decoder_side()
    }

    /// Everything the decoder got wrong once the encoder had covered.
    pub fn decoder_side(&self) -> usize {
        self.atypical
            + self.confusion_m2
            + self.confusion_m1b
            + self.confusion_m1b_m2
            + self.confusion_m1a
    }

    fn add(mut self, o: Self) -> Self {
        self.coverage_fail += o.coverage_fail;
        self.atypical += o.atypical;
        self.confusion_m2 += o.confusion_m2;
        self.confusion_m1b += o.confusion_m1b;
        self.confusion_m1b_m2 += o.confusion_m1b_m2;
        self.confusion_m1a += o.confusion_m1a;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
    pub c12: f64,
    pub eps: f64,
    pub trials: usize,
    pub errors: usize,
    pub error_rate: f64,
    pub ci95_halfwidth: f64,
    pub breakdown: ErrorBreakdown,
    pub u_count: usize,
    pub bins: usize,
    pub m1_count: usize,
    pub m2_count: usize,
}

pub const CSV_HEADER: &str = "n,r1,r2,c12,eps,trials,error_rate,ci95,coverage_fail,confusion";

impl SimResult {
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{},{:.6},{:.6},{},{}",
            self.n,
            self.r1,
            self.r2,
            self.c12,
            self.eps,
            self.trials,
            self.error_rate,
            self.ci95_halfwidth,
            self.breakdown.coverage_fail,
            self.breakdown.decoder_side()
        );
        s
    }
}

fn classify(truth: Triple, wrong: Triple) -> fn(&mut ErrorBreakdown) {
    match (truth.0 == wrong.0, truth.1 == wrong.1, truth.2 == wrong.2) {
        (false, _, _) => |b| b.confusion_m1a += 1,
        (true, true, _) => |b| b.confusion_m2 += 1,
        (true, false, true) => |b| b.confusion_m1b += 1,
        (true, false, false) => |b| b.confusion_m1b_m2 += 1,
    }
}

fn run_trial(p: &SimParams, cb: &Codebook, t: u64) -> ErrorBreakdown {
    let mut rng = keyed_rng(p.seed, &[TAG_TRIAL, t]);
    let ch = &p.channel;
    let state = Sampler::new(std::iter::once(ch.state_pmf.as_slice()));
    let s: Vec<u8> = (0..p.n).map(|_| state.draw(0, &mut rng)).collect();
    let m1 = rng.gen_range(0..cb.m1_count());
    let m2 = rng.gen_range(0..cb.m2_count);
    let enc = encode(cb, m1, m2, &s).expect("messages drawn in range");
    let y: Vec<u8> = (0..p.n)
        .map(|i| {
            let (s1, s2) = (s[i] as usize / ch.s2_size, s[i] as usize % ch.s2_size);
            let row = ch.kernel_row(s1, s2, enc.x1[i] as usize, enc.x2[i] as usize);
            Sampler::new(std::iter::once(row)).draw(0, &mut rng)
        })
        .collect();
    let truth = (m1 / cb.m1b_count, m1 % cb.m1b_count, m2);
    let mut b = ErrorBreakdown::default();
    let out = decode(cb, &y, &s).expect("lengths match");
    if out == Decoded::Unique(truth) {
        return b;
    }
    if !enc.coverage_ok {
        b.coverage_fail += 1;
        return b;
    }
    let mut counts = vec![0; cb.full_bounds.lo.len()];
    let u = cb.u_word(enc.coop_index);
    if !cb.full_typical(&s, u, &enc.x1, &enc.x2, &y, &mut counts) {
        b.atypical += 1;
        return b;
    }
    let wrong = match out {
        Decoded::Unique(w) => w,
        Decoded::Multiple(a, c) => {
            if a == truth {
                c
            } else {
                a
            }
        }
        Decoded::None => unreachable!("a typical truth is always found"),
    };
    classify(truth, wrong)(&mut b);
    b
}

pub fn estimate_error(p: &SimParams) -> Result<SimResult, SimError> {
    let cb = build_codebooks(p)?;
    let breakdown = (0..p.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(p, &cb, t))
        .reduce(ErrorBreakdown::default, ErrorBreakdown::add);
    let errors = breakdown.total();
    let rate = errors as f64 / p.trials as f64;
    Ok(SimResult {
        n: p.n,
        r1: p.r1,
        r2: p.r2,
        c12: p.c12,
        eps: p.eps,
        trials: p.trials,
        errors,
        error_rate: rate,
        ci95_halfwidth: 1.96 * (rate * (1.0 - rate) / p.trials as f64).sqrt(),
        breakdown,
        u_count: cb.u_count,
        bins: cb.bins,
        m1_count: cb.m1_count(),
        m2_count: cb.m2_count,
    })
}
