//! Finite-alphabet probability tables and information measures.
//!
//! Every quantity is in bits. Tables are dense and row-major with the last
//! axis varying fastest. The conventions `0 log 0 = 0` and "a zero-mass cell
//! contributes nothing" hold throughout, so sparse (deterministic) tables are
//! fine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the total mass of a user-supplied distribution or row.
pub const INPUT_TOL: f64 = 1e-12;
/// Tolerance on the total mass of a derived (product or marginal) joint.
pub const DERIVED_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("alphabet must have at least one letter")]
    EmptyAlphabet,
    #[error("{what}: entry {index} is {value}, expected a finite nonnegative probability")]
    BadEntry {
        what: String,
        index: usize,
        value: f64,
    },
    #[error("{what}: mass sums to {sum}, expected 1")]
    NotNormalized { what: String, sum: f64 },
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("{what}: expected {expected} entries, found {found}")]
    SizeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("axis name `{0}` appears more than once")]
    DuplicateAxis(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("factor {factor} conditions on `{parent}`, which no earlier factor defines")]
    DanglingParent { factor: usize, parent: String },
    #[error("axis `{0}` appears in more than one argument group")]
    OverlappingAxes(String),
}

pub type Result<T> = std::result::Result<T, ProbError>;

/// A finite alphabet `{0, .., size-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(ProbError::EmptyAlphabet);
        }
        Ok(Alphabet(size))
    }

    pub fn size(self) -> usize {
        self.0
    }
}

fn check_entries(what: &str, probs: &[f64]) -> Result<()> {
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ProbError::BadEntry {
                what: what.to_string(),
                index,
                value,
            });
        }
    }
    Ok(())
}

fn check_mass(what: &str, probs: &[f64], tol: f64) -> Result<()> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(ProbError::NotNormalized {
            what: what.to_string(),
            sum,
        });
    }
    Ok(())
}

/// A probability mass function over a single alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ProbError::EmptyAlphabet);
        }
        check_entries("pmf", &probs)?;
        check_mass("pmf", &probs, INPUT_TOL)?;
        Ok(Pmf { probs })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.size();
        Pmf {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(alphabet: Alphabet, letter: usize) -> Self {
        let mut probs = vec![0.0; alphabet.size()];
        probs[letter] = 1.0;
        Pmf { probs }
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet(self.probs.len())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = ProbError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Pmf::new(v)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Vec<f64> {
        p.probs
    }
}

/// A conditional distribution `P(out | parents)`.
///
/// Rows are indexed lexicographically by the parent tuple (last parent
/// fastest); a table without parents has exactly one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondPmf {
    parent_sizes: Vec<usize>,
    out_size: usize,
    probs: Vec<f64>,
}

impl CondPmf {
    pub fn new(parent_sizes: Vec<usize>, out_size: usize, probs: Vec<f64>) -> Result<Self> {
        let t = CondPmf {
            parent_sizes,
            out_size,
            probs,
        };
        t.validate()?;
        Ok(t)
    }

    /// Builds a table whose rows are all `row`.
    pub fn constant(parent_sizes: Vec<usize>, row: &Pmf) -> Self {
        let rows: usize = parent_sizes.iter().product();
        let mut probs = Vec::with_capacity(rows * row.probs.len());
        for _ in 0..rows {
            probs.extend_from_slice(&row.probs);
        }
        CondPmf {
            parent_sizes,
            out_size: row.probs.len(),
            probs,
        }
    }

    /// Builds a deterministic table from a map `parent row -> output letter`.
    pub fn deterministic(
        parent_sizes: Vec<usize>,
        out_size: usize,
        f: impl Fn(usize) -> usize,
    ) -> Self {
        let rows: usize = parent_sizes.iter().product();
        let mut probs = vec![0.0; rows * out_size];
        for r in 0..rows {
            probs[r * out_size + f(r)] = 1.0;
        }
        CondPmf {
            parent_sizes,
            out_size,
            probs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_size == 0 || self.parent_sizes.iter().any(|&s| s == 0) {
            return Err(ProbError::EmptyAlphabet);
        }
        let expected = self.num_rows() * self.out_size;
        if self.probs.len() != expected {
            return Err(ProbError::SizeMismatch {
                what: "conditional table".into(),
                expected,
                found: self.probs.len(),
            });
        }
        check_entries("conditional table", &self.probs)?;
        for (r, row) in self.probs.chunks(self.out_size).enumerate() {
            check_mass(&format!("conditional row {r}"), row, INPUT_TOL)?;
        }
        Ok(())
    }

    pub fn parent_sizes(&self) -> &[usize] {
        &self.parent_sizes
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn num_rows(&self) -> usize {
        self.parent_sizes.iter().product()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Wraps a table the caller has already validated.
    pub(crate) fn from_raw(parent_sizes: Vec<usize>, out_size: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), parent_sizes.iter().product::<usize>() * out_size);
        CondPmf {
            parent_sizes,
            out_size,
            probs,
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.probs[r * self.out_size..(r + 1) * self.out_size]
    }

    /// Row index of a parent tuple.
    pub fn row_index(&self, parents: &[usize]) -> usize {
        debug_assert_eq!(parents.len(), self.parent_sizes.len());
        parents
            .iter()
            .zip(&self.parent_sizes)
            .fold(0, |acc, (&v, &s)| acc * s + v)
    }

    pub fn get(&self, parents: &[usize], out: usize) -> f64 {
        self.probs[self.row_index(parents) * self.out_size + out]
    }
}

/// A named axis of a joint table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Axis {
            name: name.into(),
            size,
        }
    }
}

/// A joint distribution over a product of named alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    axes: Vec<Axis>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(axes: Vec<Axis>, probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(axes, probs, INPUT_TOL)
    }

    /// Wraps a table already known to be a valid joint over `axes`.
    pub(crate) fn from_raw(axes: Vec<Axis>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), axes.iter().map(|a| a.size).product::<usize>());
        JointPmf { axes, probs }
    }

    fn with_tolerance(axes: Vec<Axis>, probs: Vec<f64>, tol: f64) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if a.size == 0 {
                return Err(ProbError::EmptyAlphabet);
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(ProbError::DuplicateAxis(a.name.clone()));
            }
        }
        let expected: usize = axes.iter().map(|a| a.size).product();
        if probs.len() != expected {
            return Err(ProbError::SizeMismatch {
                what: "joint table".into(),
                expected,
                found: probs.len(),
            });
        }
        check_entries("joint table", &probs)?;
        check_mass("joint table", &probs, tol)?;
        Ok(JointPmf { axes, probs })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| ProbError::UnknownAxis(name.to_string()))
    }

    pub fn axis_size(&self, name: &str) -> Result<usize> {
        Ok(self.axes[self.axis_index(name)?].size)
    }

    /// Probability of one cell, coordinates in axis order.
    pub fn get(&self, coords: &[usize]) -> f64 {
        let idx = coords
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&c, a)| acc * a.size + c);
        self.probs[idx]
    }

    fn resolve(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.axis_index(n)).collect()
    }

    /// Marginal table over `keep` (indices into `axes`), laid out in the
    /// order given by `keep`.
    pub(crate) fn marginal_table(&self, keep: &[usize]) -> Vec<f64> {
        let n = self.axes.len();
        let mut out_stride = vec![0usize; n];
        let mut len = 1usize;
        for &k in keep.iter().rev() {
            out_stride[k] = len;
            len *= self.axes[k].size;
        }
        let mut out = vec![0.0; len];
        if keep.is_empty() {
            out[0] = self.probs.iter().sum();
            return out;
        }
        // Merge neighbouring axes that are both summed out, or both kept with
        // contiguous output strides, into (size, stride) groups.
        let mut groups: Vec<(usize, usize)> = Vec::with_capacity(n);
        for a in 0..n {
            let size = self.axes[a].size;
            if size == 1 {
                continue;
            }
            let stride = out_stride[a];
            match groups.last_mut() {
                Some(g) if (g.1 == 0 && stride == 0) || (stride > 0 && g.1 == stride * size) => {
                    g.0 *= size;
                    g.1 = stride;
                }
                _ => groups.push((size, stride)),
            }
        }
        let (inner, inner_stride) = groups.pop().unwrap_or((1, 0));
        let mut idx = vec![0usize; groups.len()];
        let mut o = 0usize;
        for chunk in self.probs.chunks_exact(inner) {
            if inner_stride == 0 {
                out[o] += chunk.iter().sum::<f64>();
            } else {
                for (k, &p) in chunk.iter().enumerate() {
                    out[o + k * inner_stride] += p;
                }
            }
            let mut g = groups.len();
            while g > 0 {
                g -= 1;
                idx[g] += 1;
                o += groups[g].1;
                if idx[g] < groups[g].0 {
                    break;
                }
                o -= groups[g].1 * groups[g].0;
                idx[g] = 0;
            }
        }
        out
    }

    pub(crate) fn marginal_entropy(&self, mask: u64) -> f64 {
        let keep: Vec<usize> = (0..self.axes.len()).filter(|i| mask >> i & 1 == 1).collect();
        if keep.len() == self.axes.len() {
            return entropy_of(&self.probs);
        }
        entropy_of(&self.marginal_table(&keep))
    }

    pub(crate) fn mask_of(&self, names: &[&str]) -> Result<u64> {
        let mut mask = 0u64;
        for n in names {
            mask |= 1 << self.axis_index(n)?;
        }
        Ok(mask)
    }
}

/// `-Σ p log2 p` over raw entries, skipping zeros.
pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// Shannon entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_of(&p.probs)
}

pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ProbError::OutOfRange { name: "p", value: p });
    }
    Ok(entropy_of(&[p, 1.0 - p]))
}

/// Parameter of the XOR of independent Bernoulli(p) and Bernoulli(q) bits.
pub fn bernoulli_convolve(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ProbError::OutOfRange { name: "p", value: p });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(ProbError::OutOfRange { name: "q", value: q });
    }
    Ok((1.0 - p) * q + (1.0 - q) * p)
}

/// One factor `P(outputs | parents)` of a product-form joint.
#[derive(Debug, Clone)]
pub struct Factor {
    pub outputs: Vec<Axis>,
    pub parents: Vec<String>,
    /// Output index is the row-major index over `outputs`.
    pub table: CondPmf,
}

impl Factor {
    pub fn new(outputs: Vec<Axis>, parents: Vec<&str>, table: CondPmf) -> Self {
        Factor {
            outputs,
            parents: parents.into_iter().map(String::from).collect(),
            table,
        }
    }

    /// A parentless factor over a single axis.
    pub fn root(axis: Axis, pmf: &Pmf) -> Self {
        Factor::new(vec![axis], vec![], CondPmf::constant(vec![], pmf))
    }
}

/// Multiplies factors in order into one joint table. Axes appear in the order
/// the factors introduce them.
pub fn joint_from_factors(factors: &[Factor]) -> Result<JointPmf> {
    let mut axes: Vec<Axis> = Vec::new();
    // For each factor: positions of its parents and outputs in `axes`.
    let mut wiring: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(factors.len());
    for (fi, f) in factors.iter().enumerate() {
        let mut parent_pos = Vec::with_capacity(f.parents.len());
        for (pi, p) in f.parents.iter().enumerate() {
            let pos = axes
                .iter()
                .position(|a| &a.name == p)
                .ok_or_else(|| ProbError::DanglingParent {
                    factor: fi,
                    parent: p.clone(),
                })?;
            if f.table.parent_sizes().get(pi) != Some(&axes[pos].size) {
                return Err(ProbError::SizeMismatch {
                    what: format!("factor {fi} parent `{p}`"),
                    expected: axes[pos].size,
                    found: f.table.parent_sizes().get(pi).copied().unwrap_or(0),
                });
            }
            parent_pos.push(pos);
        }
        if f.table.parent_sizes().len() != f.parents.len() {
            return Err(ProbError::SizeMismatch {
                what: format!("factor {fi} parent count"),
                expected: f.parents.len(),
                found: f.table.parent_sizes().len(),
            });
        }
        let out_cells: usize = f.outputs.iter().map(|a| a.size).product();
        if out_cells != f.table.out_size() {
            return Err(ProbError::SizeMismatch {
                what: format!("factor {fi} outputs"),
                expected: out_cells,
                found: f.table.out_size(),
            });
        }
        let mut out_pos = Vec::with_capacity(f.outputs.len());
        for o in &f.outputs {
            if o.size == 0 {
                return Err(ProbError::EmptyAlphabet);
            }
            if axes.iter().any(|a| a.name == o.name) {
                return Err(ProbError::DuplicateAxis(o.name.clone()));
            }
            out_pos.push(axes.len());
            axes.push(o.clone());
        }
        wiring.push((parent_pos, out_pos));
    }

    let sizes: Vec<usize> = axes.iter().map(|a| a.size).collect();
    let total: usize = sizes.iter().product();
    // stride[f][a]: step in factor f's flat table when axis a advances.
    let stride: Vec<Vec<usize>> = factors
        .iter()
        .zip(&wiring)
        .map(|(f, (parent_pos, out_pos))| {
            let mut st = vec![0usize; sizes.len()];
            let mut step = 1;
            for &pos in out_pos.iter().rev() {
                st[pos] = step;
                step *= sizes[pos];
            }
            let mut step = f.table.out_size();
            for &pos in parent_pos.iter().rev() {
                st[pos] = step;
                step *= sizes[pos];
            }
            st
        })
        .collect();
    let mut probs = vec![0.0; total];
    let mut idx = vec![0usize; axes.len()];
    let mut offs = vec![0usize; factors.len()];
    for cell in probs.iter_mut() {
        let mut p = 1.0;
        for (f, &o) in factors.iter().zip(&offs) {
            p *= f.table.probs()[o];
            if p == 0.0 {
                break;
            }
        }
        *cell = p;
        let mut a = sizes.len();
        while a > 0 {
            a -= 1;
            idx[a] += 1;
            for (o, st) in offs.iter_mut().zip(&stride) {
                *o += st[a];
            }
            if idx[a] < sizes[a] {
                break;
            }
            for (o, st) in offs.iter_mut().zip(&stride) {
                *o -= st[a] * sizes[a];
            }
            idx[a] = 0;
        }
    }
    JointPmf::with_tolerance(axes, probs, DERIVED_TOL)
}

/// Sums out every axis not named in `keep`. The result's axes follow the
/// order of `keep`.
pub fn marginalize(j: &JointPmf, keep: &[&str]) -> Result<JointPmf> {
    let idx = j.resolve(keep)?;
    for (i, a) in idx.iter().enumerate() {
        if idx[..i].contains(a) {
            return Err(ProbError::DuplicateAxis(keep[i].to_string()));
        }
    }
    let axes = idx.iter().map(|&i| j.axes[i].clone()).collect();
    JointPmf::with_tolerance(axes, j.marginal_table(&idx), DERIVED_TOL)
}

fn disjoint_masks(j: &JointPmf, groups: [&[&str]; 3]) -> Result<[u64; 3]> {
    let mut masks = [0u64; 3];
    let mut seen = 0u64;
    for (g, names) in groups.iter().enumerate() {
        for n in names.iter() {
            let bit = 1u64 << j.axis_index(n)?;
            if seen & bit != 0 {
                return Err(ProbError::OverlappingAxes(n.to_string()));
            }
            seen |= bit;
            masks[g] |= bit;
        }
    }
    Ok(masks)
}

/// `I(A;B|C)` in bits. An empty `c` gives plain mutual information.
pub fn conditional_mutual_information(
    j: &JointPmf,
    a: &[&str],
    b: &[&str],
    c: &[&str],
) -> Result<f64> {
    let [ma, mb, mc] = disjoint_masks(j, [a, b, c])?;
    Ok(cmi_from_entropies(
        j.marginal_entropy(ma | mc),
        j.marginal_entropy(mb | mc),
        j.marginal_entropy(ma | mb | mc),
        j.marginal_entropy(mc),
    ))
}

fn cmi_from_entropies(h_ac: f64, h_bc: f64, h_abc: f64, h_c: f64) -> f64 {
    (h_ac + h_bc - h_abc - h_c).max(0.0)
}

/// Memoizes marginal entropies of one joint so that a batch of (conditional)
/// mutual informations shares the work.
pub struct InfoCache<'a> {
    joint: &'a JointPmf,
    memo: std::collections::HashMap<u64, f64>,
}

impl<'a> InfoCache<'a> {
    pub fn new(joint: &'a JointPmf) -> Self {
        InfoCache {
            joint,
            memo: std::collections::HashMap::with_capacity(16),
        }
    }

    pub fn joint(&self) -> &JointPmf {
        self.joint
    }

    fn h(&mut self, mask: u64) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        let joint = self.joint;
        *self
            .memo
            .entry(mask)
            .or_insert_with(|| joint.marginal_entropy(mask))
    }

    pub fn entropy(&mut self, names: &[&str]) -> Result<f64> {
        let m = self.joint.mask_of(names)?;
        Ok(self.h(m))
    }

    pub fn cmi(&mut self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let [ma, mb, mc] = disjoint_masks(self.joint, [a, b, c])?;
        let (h_ac, h_bc, h_abc, h_c) = (
            self.h(ma | mc),
            self.h(mb | mc),
            self.h(ma | mb | mc),
            self.h(mc),
        );
        Ok(cmi_from_entropies(h_ac, h_bc, h_abc, h_c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(p: &[f64]) -> Pmf {
        Pmf::new(p.to_vec()).unwrap()
    }

    fn ax(name: &str, size: usize) -> Axis {
        Axis::new(name, size)
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&bits(&[0.5, 0.5])) - 1.0).abs() < 1e-15);
        assert_eq!(entropy(&bits(&[0.0, 1.0, 0.0])), 0.0);
        // -0.01 log2 0.01 - 0.99 log2 0.99
        let direct = -(0.01f64 * 0.01f64.log2()) - 0.99 * 0.99f64.log2();
        let h = entropy(&bits(&[0.01, 0.99]));
        assert!((h - direct).abs() < 1e-15);
        assert!((h - 0.080793).abs() < 1e-6);
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert!((binary_entropy(0.25).unwrap() - 0.811278).abs() < 1e-6);
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn convolve_examples() {
        assert_eq!(bernoulli_convolve(0.3, 0.0).unwrap(), 0.3);
        assert_eq!(bernoulli_convolve(0.3, 0.5).unwrap(), 0.5);
        assert_eq!(bernoulli_convolve(0.25, 0.25).unwrap(), 0.375);
        assert!(bernoulli_convolve(0.2, 1.1).is_err());
    }

    #[test]
    fn pmf_validation() {
        assert!(Pmf::new(vec![0.5, 0.4]).is_err());
        assert!(Pmf::new(vec![1.2, -0.2]).is_err());
        assert!(Pmf::new(vec![]).is_err());
        assert!(Alphabet::new(0).is_err());
        let bad_row = CondPmf::new(vec![2], 2, vec![0.5, 0.5, 0.9, 0.0]);
        assert!(matches!(bad_row, Err(ProbError::NotNormalized { .. })));
    }

    #[test]
    fn deterministic_factors_give_point_mass() {
        let s = Factor::root(ax("s", 2), &Pmf::point_mass(Alphabet::new(2).unwrap(), 1));
        let y = Factor::new(
            vec![ax("y", 3)],
            vec!["s"],
            CondPmf::deterministic(vec![2], 3, |r| r + 1),
        );
        let j = joint_from_factors(&[s, y]).unwrap();
        assert_eq!(j.get(&[1, 2]), 1.0);
        assert_eq!(j.probs().iter().filter(|&&p| p > 0.0).count(), 1);
    }

    #[test]
    fn independent_factors_have_zero_information() {
        let a = Factor::root(ax("a", 2), &bits(&[0.3, 0.7]));
        let b = Factor::root(ax("b", 3), &bits(&[0.2, 0.5, 0.3]));
        let j = joint_from_factors(&[a, b]).unwrap();
        assert!(conditional_mutual_information(&j, &["a"], &["b"], &[]).unwrap() < 1e-15);
        let ma = marginalize(&j, &["a"]).unwrap();
        assert!((ma.probs()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn factor_errors() {
        let y = Factor::new(
            vec![ax("y", 2)],
            vec!["x"],
            CondPmf::constant(vec![2], &bits(&[0.5, 0.5])),
        );
        assert!(matches!(
            joint_from_factors(&[y]),
            Err(ProbError::DanglingParent { .. })
        ));
        let x = Factor::root(ax("x", 3), &bits(&[0.2, 0.3, 0.5]));
        let y = Factor::new(
            vec![ax("y", 2)],
            vec!["x"],
            CondPmf::constant(vec![2], &bits(&[0.5, 0.5])),
        );
        assert!(matches!(
            joint_from_factors(&[x, y]),
            Err(ProbError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn marginalize_matches_hand_summation() {
        let probs: Vec<f64> = (1..=8).map(|v| v as f64 / 36.0).collect();
        let j = JointPmf::new(vec![ax("a", 2), ax("b", 2), ax("c", 2)], probs.clone()).unwrap();
        let m = marginalize(&j, &["a", "c"]).unwrap();
        for a in 0..2 {
            for c in 0..2 {
                let hand: f64 = (0..2).map(|b| probs[a * 4 + b * 2 + c]).sum();
                assert!((m.get(&[a, c]) - hand).abs() < 1e-15);
            }
        }
        // Reordered keep list transposes the table.
        let t = marginalize(&j, &["c", "a"]).unwrap();
        assert_eq!(t.get(&[1, 0]), m.get(&[0, 1]));
        let all = marginalize(&j, &["a", "b", "c"]).unwrap();
        assert_eq!(all, j);
        assert!(matches!(
            marginalize(&j, &["z"]),
            Err(ProbError::UnknownAxis(_))
        ));
    }

    #[test]
    fn mutual_information_examples() {
        let copy = JointPmf::new(vec![ax("a", 2), ax("b", 2)], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((conditional_mutual_information(&copy, &["a"], &["b"], &[]).unwrap() - 1.0).abs() < 1e-15);

        let p = 0.01;
        let x = Factor::root(ax("x", 2), &bits(&[0.5, 0.5]));
        let y = Factor::new(
            vec![ax("y", 2)],
            vec!["x"],
            CondPmf::new(vec![2], 2, vec![1.0 - p, p, p, 1.0 - p]).unwrap(),
        );
        let j = joint_from_factors(&[x, y]).unwrap();
        let i = conditional_mutual_information(&j, &["x"], &["y"], &[]).unwrap();
        assert!((i - (1.0 - binary_entropy(p).unwrap())).abs() < 1e-12);
        assert!((i - 0.919207).abs() < 1e-6);

        assert!(matches!(
            conditional_mutual_information(&j, &["x"], &["x"], &[]),
            Err(ProbError::OverlappingAxes(_))
        ));
    }

    #[test]
    fn cache_agrees_with_direct_route() {
        let probs: Vec<f64> = (1..=12).map(|v| v as f64 / 78.0).collect();
        let j = JointPmf::new(vec![ax("a", 2), ax("b", 3), ax("c", 2)], probs).unwrap();
        let mut cache = InfoCache::new(&j);
        for (a, b, c) in [(&["a"][..], &["b"][..], &["c"][..]), (&["a"], &["b", "c"], &[])] {
            let direct = conditional_mutual_information(&j, a, b, c).unwrap();
            assert!((cache.cmi(a, b, c).unwrap() - direct).abs() < 1e-15);
        }
    }
}
