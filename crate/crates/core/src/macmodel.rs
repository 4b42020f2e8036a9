//! State-dependent MAC, cooperation settings, input cost constraints, and the
//! product-form joints each cooperation setting allows.
//!
//! Every joint produced here has the same seven axes, in this order:
//! `s1, s2, u, v, x1, x2, y`. Settings without a second state component or
//! without the auxiliary `V` carry those axes with a single letter, so the
//! region formulas can address them uniformly. In the one-encoder-knows-all
//! settings (`one_way`, `state_only`, `message_only`, `split`) the state seen
//! by encoder 1 is the pair `(s1, s2)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probcore::{self, Axis, CondPmf, Factor, JointPmf, ProbError, INPUT_TOL};

pub const S1: &str = "s1";
pub const S2: &str = "s2";
pub const U: &str = "u";
pub const V: &str = "v";
pub const X1: &str = "x1";
pub const X2: &str = "x2";
pub const Y: &str = "y";
/// The full state as seen by the decoder.
pub const STATE: [&str; 2] = [S1, S2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("kernel row (s1={s1}, s2={s2}, x1={x1}, x2={x2}) sums to {sum}")]
    KernelRow {
        s1: usize,
        s2: usize,
        x1: usize,
        x2: usize,
        sum: f64,
    },
    #[error("kernel row (s1={s1}, s2={s2}, x1={x1}, x2={x2}) has bad entry {value} at y={y}")]
    KernelEntry {
        s1: usize,
        s2: usize,
        x1: usize,
        x2: usize,
        y: usize,
        value: f64,
    },
    #[error("field `{field}`: {msg}")]
    Field { field: String, msg: String },
    #[error("{name} = {value} must be finite and nonnegative")]
    BadRate { name: &'static str, value: f64 },
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("policy structure mismatch: {0}")]
    Structure(String),
    #[error("encoder {0} does not have a binary input alphabet")]
    NonBinary(u8),
    #[error("|{which}| = {card} exceeds the cardinality cap {cap}")]
    CardinalityCap {
        which: &'static str,
        card: usize,
        cap: usize,
    },
}

fn field_err(field: &str, msg: impl Into<String>) -> ModelError {
    ModelError::Field {
        field: field.to_string(),
        msg: msg.into(),
    }
}

/// Channel `P(y | x1, x2, s1, s2)` together with the state law `P(s1, s2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacChannel {
    pub s1_size: usize,
    pub s2_size: usize,
    pub x1_size: usize,
    pub x2_size: usize,
    pub y_size: usize,
    /// Row-major over `(s1, s2)`.
    pub state_pmf: Vec<f64>,
    /// One row per `(s1, s2, x1, x2)` in lexicographic order, each over `y`.
    pub kernel: Vec<Vec<f64>>,
}

impl MacChannel {
    pub fn new(
        sizes: [usize; 5],
        state_pmf: Vec<f64>,
        kernel: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let [s1_size, s2_size, x1_size, x2_size, y_size] = sizes;
        let ch = MacChannel {
            s1_size,
            s2_size,
            x1_size,
            x2_size,
            y_size,
            state_pmf,
            kernel,
        };
        validate_channel(&ch)?;
        Ok(ch)
    }

    pub fn state_size(&self) -> usize {
        self.s1_size * self.s2_size
    }

    pub fn kernel_row(&self, s1: usize, s2: usize, x1: usize, x2: usize) -> &[f64] {
        &self.kernel[((s1 * self.s2_size + s2) * self.x1_size + x1) * self.x2_size + x2]
    }

    fn kernel_table(&self) -> CondPmf {
        let flat: Vec<f64> = self.kernel.iter().flatten().copied().collect();
        CondPmf::from_raw(
            vec![self.s1_size, self.s2_size, self.x1_size, self.x2_size],
            self.y_size,
            flat,
        )
    }

    fn state_table(&self) -> CondPmf {
        CondPmf::from_raw(vec![], self.state_size(), self.state_pmf.clone())
    }
}

/// Checks every channel invariant and reports the first violation.
pub fn validate_channel(ch: &MacChannel) -> Result<(), ModelError> {
    for (name, v) in [
        ("s1_size", ch.s1_size),
        ("s2_size", ch.s2_size),
        ("x1_size", ch.x1_size),
        ("x2_size", ch.x2_size),
        ("y_size", ch.y_size),
    ] {
        if v == 0 {
            return Err(field_err(name, "alphabet size must be at least 1"));
        }
    }
    if ch.state_pmf.len() != ch.state_size() {
        return Err(field_err(
            "state_pmf",
            format!("expected {} entries, found {}", ch.state_size(), ch.state_pmf.len()),
        ));
    }
    if let Some((i, v)) = ch
        .state_pmf
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(field_err("state_pmf", format!("entry {i} is {v}")));
    }
    let sum: f64 = ch.state_pmf.iter().sum();
    if (sum - 1.0).abs() > INPUT_TOL {
        return Err(field_err("state_pmf", format!("sums to {sum}")));
    }
    let rows = ch.state_size() * ch.x1_size * ch.x2_size;
    if ch.kernel.len() != rows {
        return Err(field_err(
            "kernel",
            format!("expected {rows} rows, found {}", ch.kernel.len()),
        ));
    }
    for (r, row) in ch.kernel.iter().enumerate() {
        let x2 = r % ch.x2_size;
        let x1 = (r / ch.x2_size) % ch.x1_size;
        let s2 = (r / (ch.x2_size * ch.x1_size)) % ch.s2_size;
        let s1 = r / (ch.x2_size * ch.x1_size * ch.s2_size);
        if row.len() != ch.y_size {
            return Err(field_err(
                "kernel",
                format!(
                    "row (s1={s1}, s2={s2}, x1={x1}, x2={x2}) has {} entries, expected {}",
                    row.len(),
                    ch.y_size
                ),
            ));
        }
        if let Some((y, &value)) = row
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(ModelError::KernelEntry {
                s1,
                s2,
                x1,
                x2,
                y,
                value,
            });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > INPUT_TOL {
            return Err(ModelError::KernelRow {
                s1,
                s2,
                x1,
                x2,
                sum,
            });
        }
    }
    Ok(())
}

/// The switching example: `Y = (1-S) X1 ⊕ S X2 ⊕ Z` with `S ~ Bernoulli(1/2)`
/// and `Z ~ Bernoulli(pz)`.
pub fn build_switch_bsc(pz: f64) -> Result<MacChannel, ModelError> {
    if !(0.0..=1.0).contains(&pz) {
        return Err(ModelError::OutOfRange {
            name: "pz",
            value: pz,
        });
    }
    let mut kernel = Vec::with_capacity(8);
    for s in 0..2 {
        for x1 in 0..2 {
            for x2 in 0..2 {
                let active = if s == 0 { x1 } else { x2 };
                kernel.push(if active == 0 {
                    vec![1.0 - pz, pz]
                } else {
                    vec![pz, 1.0 - pz]
                });
            }
        }
    }
    MacChannel::new([2, 1, 2, 2, 2], vec![0.5, 0.5], kernel)
}

/// Which cooperation setting a region refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneWay,
    TwoWay,
    Split,
    StateOnly,
    MessageOnly,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::OneWay,
        Mode::TwoWay,
        Mode::Split,
        Mode::StateOnly,
        Mode::MessageOnly,
    ];

    pub fn factorization(self) -> Factorization {
        match self {
            Mode::OneWay | Mode::StateOnly | Mode::MessageOnly => Factorization::OneWay,
            Mode::TwoWay => Factorization::TwoWay,
            Mode::Split => Factorization::Split,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OneWay => "one_way",
            Mode::TwoWay => "two_way",
            Mode::Split => "split",
            Mode::StateOnly => "state_only",
            Mode::MessageOnly => "message_only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| field_err("mode", format!("unknown mode `{s}`")))
    }
}

/// Conditioning structure of the auxiliary policy.
///
/// * `OneWay`: `P(u|s) P(x1|s,u) P(x2|u)`
/// * `TwoWay`: `P(u|s1) P(v|s2,u) P(x1|s1,u,v) P(x2|s2,u,v)`
/// * `Split`: `P(u|s) P(v) P(x1|s,u,v) P(x2|u,v)`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factorization {
    OneWay,
    TwoWay,
    Split,
}

impl Factorization {
    pub fn has_v(self) -> bool {
        !matches!(self, Factorization::OneWay)
    }

    pub fn u_parents(self) -> &'static [&'static str] {
        match self {
            Factorization::OneWay | Factorization::Split => &[S1, S2],
            Factorization::TwoWay => &[S1],
        }
    }

    pub fn v_parents(self) -> &'static [&'static str] {
        match self {
            Factorization::OneWay | Factorization::Split => &[],
            Factorization::TwoWay => &[S2, U],
        }
    }

    pub fn x1_parents(self) -> &'static [&'static str] {
        match self {
            Factorization::OneWay => &[S1, S2, U],
            Factorization::TwoWay => &[S1, U, V],
            Factorization::Split => &[S1, S2, U, V],
        }
    }

    pub fn x2_parents(self) -> &'static [&'static str] {
        match self {
            Factorization::OneWay => &[U],
            Factorization::TwoWay => &[S2, U, V],
            Factorization::Split => &[U, V],
        }
    }
}

/// Cooperation link rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoopConfig {
    pub mode: Mode,
    pub c12: f64,
    pub c21: f64,
    pub c12m: f64,
    pub c12s: f64,
}

impl CoopConfig {
    pub fn one_way(c12: f64) -> Self {
        Self::single(Mode::OneWay, c12)
    }

    pub fn state_only(c12: f64) -> Self {
        Self::single(Mode::StateOnly, c12)
    }

    pub fn message_only(c12: f64) -> Self {
        Self::single(Mode::MessageOnly, c12)
    }

    pub fn two_way(c12: f64, c21: f64) -> Self {
        CoopConfig {
            c21,
            ..Self::single(Mode::TwoWay, c12)
        }
    }

    pub fn split(c12m: f64, c12s: f64) -> Self {
        CoopConfig {
            mode: Mode::Split,
            c12: 0.0,
            c21: 0.0,
            c12m,
            c12s,
        }
    }

    fn single(mode: Mode, c12: f64) -> Self {
        CoopConfig {
            mode,
            c12,
            c21: 0.0,
            c12m: 0.0,
            c12s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("c12", self.c12),
            ("c21", self.c21),
            ("c12m", self.c12m),
            ("c12s", self.c12s),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::BadRate { name, value: v });
            }
        }
        let stray = match self.mode {
            Mode::TwoWay => [("c12m", self.c12m), ("c12s", self.c12s)],
            Mode::Split => [("c12", self.c12), ("c21", self.c21)],
            _ => [("c21", self.c21), ("c12m", self.c12m + self.c12s)],
        };
        for (name, v) in stray {
            if v != 0.0 {
                return Err(field_err(
                    name,
                    format!("not used by mode {}; must be 0", self.mode),
                ));
            }
        }
        Ok(())
    }
}

/// Caps on the expected fraction of ones each encoder may send.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputConstraint {
    pub p1: f64,
    pub p2: f64,
    pub active1: bool,
    pub active2: bool,
}

impl InputConstraint {
    pub fn none() -> Self {
        InputConstraint {
            p1: 1.0,
            p2: 1.0,
            active1: false,
            active2: false,
        }
    }

    pub fn both(p1: f64, p2: f64) -> Self {
        InputConstraint {
            p1,
            p2,
            active1: true,
            active2: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::OutOfRange { name, value: v });
            }
        }
        Ok(())
    }

    pub fn cap(&self, encoder: u8) -> Option<f64> {
        match encoder {
            1 if self.active1 => Some(self.p1),
            2 if self.active2 => Some(self.p2),
            _ => None,
        }
    }
}

/// Auxiliary and input distributions: the free variables of every region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxPolicy {
    pub factorization: Factorization,
    pub u_card: usize,
    pub v_card: usize,
    pub u_given: CondPmf,
    pub v_given: Option<CondPmf>,
    pub x1_given: CondPmf,
    pub x2_given: CondPmf,
}

fn axis_size(ch: &MacChannel, name: &str, u_card: usize, v_card: usize) -> usize {
    match name {
        S1 => ch.s1_size,
        S2 => ch.s2_size,
        U => u_card,
        V => v_card,
        X1 => ch.x1_size,
        X2 => ch.x2_size,
        _ => ch.y_size,
    }
}

impl AuxPolicy {
    /// Parent sizes of each factor `[u, v, x1, x2]` for this channel.
    pub fn shapes(
        ch: &MacChannel,
        fact: Factorization,
        u_card: usize,
        v_card: usize,
    ) -> [(Vec<usize>, usize); 4] {
        let sizes = |names: &[&str]| -> Vec<usize> {
            names
                .iter()
                .map(|n| axis_size(ch, n, u_card, v_card))
                .collect()
        };
        [
            (sizes(fact.u_parents()), u_card),
            (sizes(fact.v_parents()), v_card),
            (sizes(fact.x1_parents()), ch.x1_size),
            (sizes(fact.x2_parents()), ch.x2_size),
        ]
    }

    /// Every table uniform.
    pub fn uniform(ch: &MacChannel, fact: Factorization, u_card: usize, v_card: usize) -> Self {
        let v_card = if fact.has_v() { v_card } else { 1 };
        let [u, v, x1, x2] = Self::shapes(ch, fact, u_card, v_card);
        let uni = |(parents, out): (Vec<usize>, usize)| {
            CondPmf::constant(
                parents,
                &probcore::Pmf::uniform(probcore::Alphabet::new(out).expect("nonempty")),
            )
        };
        AuxPolicy {
            factorization: fact,
            u_card,
            v_card,
            u_given: uni(u),
            v_given: fact.has_v().then(|| uni(v)),
            x1_given: uni(x1),
            x2_given: uni(x2),
        }
    }

    /// Checks table shapes against the channel and the declared factorization.
    pub fn validate_for(&self, ch: &MacChannel) -> Result<(), ModelError> {
        let fact = self.factorization;
        if fact.has_v() != self.v_given.is_some() {
            return Err(ModelError::Structure(format!(
                "{fact:?} factorization {} a V table",
                if fact.has_v() { "requires" } else { "does not take" }
            )));
        }
        if !fact.has_v() && self.v_card != 1 {
            return Err(ModelError::Structure("v_card must be 1 without V".into()));
        }
        if self.u_card == 0 || self.v_card == 0 {
            return Err(ModelError::Structure("auxiliary alphabets must be nonempty".into()));
        }
        let [u, v, x1, x2] = Self::shapes(ch, fact, self.u_card, self.v_card);
        let check = |name: &str, t: &CondPmf, (parents, out): (Vec<usize>, usize)| {
            t.validate()?;
            if t.parent_sizes() != parents.as_slice() || t.out_size() != out {
                return Err(ModelError::Structure(format!(
                    "{name} table has shape {:?} -> {}, expected {:?} -> {}",
                    t.parent_sizes(),
                    t.out_size(),
                    parents,
                    out
                )));
            }
            Ok(())
        };
        check("u", &self.u_given, u)?;
        if let Some(t) = &self.v_given {
            check("v", t, v)?;
        }
        check("x1", &self.x1_given, x1)?;
        check("x2", &self.x2_given, x2)?;
        Ok(())
    }

    pub fn tables(&self) -> impl Iterator<Item = &CondPmf> {
        [&self.u_given]
            .into_iter()
            .chain(self.v_given.as_ref())
            .chain([&self.x1_given, &self.x2_given])
    }
}

/// Largest useful `|U|` (and `|V|`) for a factorization on this channel.
///
/// One-way: `min(|X1||X2||S| + 3, |Y||S| + 4)`. The two-way and split caps
/// follow the same support-lemma count: one letter per preserved input/state
/// cell plus one per preserved rate functional.
pub fn cardinality_caps(ch: &MacChannel, fact: Factorization, u_card: usize) -> (usize, usize) {
    let s = ch.state_size();
    let cells = s * ch.x1_size * ch.x2_size;
    match fact {
        Factorization::OneWay => ((cells + 3).min(ch.y_size * s + 4), 1),
        Factorization::TwoWay => (cells + 4, u_card * (cells + 4)),
        Factorization::Split => (cells + 3, cells + 3),
    }
}

pub fn check_cardinality(
    ch: &MacChannel,
    fact: Factorization,
    u_card: usize,
    v_card: usize,
) -> Result<(), ModelError> {
    let (u_cap, v_cap) = cardinality_caps(ch, fact, u_card);
    if u_card == 0 || u_card > u_cap {
        return Err(ModelError::CardinalityCap {
            which: "U",
            card: u_card,
            cap: u_cap,
        });
    }
    if v_card == 0 || v_card > v_cap {
        return Err(ModelError::CardinalityCap {
            which: "V",
            card: v_card,
            cap: v_cap,
        });
    }
    Ok(())
}

/// Builds the joint over `(s1, s2, u, v, x1, x2, y)` that `pol` induces on
/// `ch` under the factorization `mode` prescribes.
pub fn assemble_joint(ch: &MacChannel, pol: &AuxPolicy, mode: Mode) -> Result<JointPmf, ModelError> {
    if pol.factorization != mode.factorization() {
        return Err(ModelError::Structure(format!(
            "mode {mode} needs a {:?} policy, got {:?}",
            mode.factorization(),
            pol.factorization
        )));
    }
    pol.validate_for(ch)?;
    Ok(assemble_unchecked(ch, pol))
}

/// Joint assembly for a policy already validated against `ch`.
pub(crate) fn assemble_unchecked(ch: &MacChannel, pol: &AuxPolicy) -> JointPmf {
    let fact = pol.factorization;
    let v_table = match &pol.v_given {
        Some(t) => t.clone(),
        None => CondPmf::from_raw(vec![], 1, vec![1.0]),
    };
    let factors = [
        Factor::new(
            vec![Axis::new(S1, ch.s1_size), Axis::new(S2, ch.s2_size)],
            vec![],
            ch.state_table(),
        ),
        Factor::new(
            vec![Axis::new(U, pol.u_card)],
            fact.u_parents().to_vec(),
            pol.u_given.clone(),
        ),
        Factor::new(
            vec![Axis::new(V, pol.v_card)],
            fact.v_parents().to_vec(),
            v_table,
        ),
        Factor::new(
            vec![Axis::new(X1, ch.x1_size)],
            fact.x1_parents().to_vec(),
            pol.x1_given.clone(),
        ),
        Factor::new(
            vec![Axis::new(X2, ch.x2_size)],
            fact.x2_parents().to_vec(),
            pol.x2_given.clone(),
        ),
        Factor::new(
            vec![Axis::new(Y, ch.y_size)],
            vec![S1, S2, X1, X2],
            ch.kernel_table(),
        ),
    ];
    probcore::joint_from_factors(&factors).expect("validated policy and channel")
}

/// `P(X_encoder = 1)` under the joint the policy induces.
pub fn expected_weight(pol: &AuxPolicy, ch: &MacChannel, encoder: u8) -> Result<f64, ModelError> {
    let (name, size) = match encoder {
        1 => (X1, ch.x1_size),
        2 => (X2, ch.x2_size),
        _ => return Err(field_err("encoder", format!("{encoder} is not 1 or 2"))),
    };
    if size != 2 {
        return Err(ModelError::NonBinary(encoder));
    }
    pol.validate_for(ch)?;
    let j = assemble_unchecked(ch, pol);
    let idx = j.axis_index(name)?;
    Ok(j.marginal_table(&[idx])[1])
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    p1: Option<f64>,
    p2: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    preset: Option<String>,
    pz: Option<f64>,
    s1_size: Option<usize>,
    s2_size: Option<usize>,
    x1_size: Option<usize>,
    x2_size: Option<usize>,
    y_size: Option<usize>,
    state_pmf: Option<Vec<f64>>,
    kernel: Option<Vec<Vec<f64>>>,
    constraints: Option<ConstraintFile>,
}

/// Parses a channel spec document: either explicit sizes, `state_pmf` and
/// `kernel`, or `{"preset": "switch_bsc", "pz": …}`. Optional `constraints`
/// activate the per-encoder weight caps that are present.
pub fn parse_channel_spec(json: &str) -> Result<(MacChannel, InputConstraint), ModelError> {
    let file: ChannelFile =
        serde_json::from_str(json).map_err(|e| field_err("<document>", e.to_string()))?;
    let ch = match file.preset.as_deref() {
        Some("switch_bsc") => {
            let pz = file.pz.ok_or_else(|| field_err("pz", "required by preset switch_bsc"))?;
            build_switch_bsc(pz).map_err(|e| field_err("pz", e.to_string()))?
        }
        Some(other) => return Err(field_err("preset", format!("unknown preset `{other}`"))),
        None => {
            let need = |v: Option<usize>, name: &str| v.ok_or_else(|| field_err(name, "missing"));
            let sizes = [
                need(file.s1_size, "s1_size")?,
                need(file.s2_size, "s2_size")?,
                need(file.x1_size, "x1_size")?,
                need(file.x2_size, "x2_size")?,
                need(file.y_size, "y_size")?,
            ];
            let state = file.state_pmf.ok_or_else(|| field_err("state_pmf", "missing"))?;
            let kernel = file.kernel.ok_or_else(|| field_err("kernel", "missing"))?;
            MacChannel::new(sizes, state, kernel)?
        }
    };
    let mut constr = InputConstraint::none();
    if let Some(c) = file.constraints {
        if let Some(p1) = c.p1 {
            constr.p1 = p1;
            constr.active1 = true;
        }
        if let Some(p2) = c.p2 {
            constr.p2 = p2;
            constr.active2 = true;
        }
    }
    constr
        .validate()
        .map_err(|e| field_err("constraints", e.to_string()))?;
    for (enc, size) in [(1u8, ch.x1_size), (2, ch.x2_size)] {
        if constr.cap(enc).is_some() && size != 2 {
            return Err(field_err(
                "constraints",
                format!("encoder {enc} weight cap needs a binary input alphabet"),
            ));
        }
    }
    Ok((ch, constr))
}
