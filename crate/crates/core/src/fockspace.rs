//! Truncated multi-mode Fock bases with conserved boson numbers, spin coherent
//! states, and sparse bilinear operators acting on them.
//!
//! Every node holds exactly `N` bosons spread over its internal levels, so
//! single ladder operators on atomic modes are never constructed. Operators are
//! assembled from number-conserving bilinears `x†y`, optionally dressed with
//! one photon ladder operator.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Internal level of a BEC node: the two hyperfine ground states and the
/// excited state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    A,
    B,
    E,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Level::A => "a",
            Level::B => "b",
            Level::E => "e",
        };
        f.write_str(s)
    }
}

/// A bosonic mode. Nodes are numbered from 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Atom { node: usize, level: Level },
    Photon,
}

impl Mode {
    pub fn a(node: usize) -> Self {
        Mode::Atom { node, level: Level::A }
    }
    pub fn b(node: usize) -> Self {
        Mode::Atom { node, level: Level::B }
    }
    pub fn e(node: usize) -> Self {
        Mode::Atom { node, level: Level::E }
    }

    fn excitation(self) -> i32 {
        match self {
            Mode::Atom { level: Level::E, .. } | Mode::Photon => 1,
            _ => 0,
        }
    }

    fn owner(self) -> Option<usize> {
        match self {
            Mode::Atom { node, .. } => Some(node),
            Mode::Photon => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Atom { node, level } => write!(f, "{}{}", level, node + 1),
            Mode::Photon => f.write_str("p"),
        }
    }
}

/// Constraint on the excitation number `n_ex` = (excited atoms) + (photons).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    Exactly(u32),
    AtMost(u32),
}

impl Sector {
    fn admits(self, n_ex: u32) -> bool {
        match self {
            Sector::Exactly(n) => n_ex == n,
            Sector::AtMost(n) => n_ex <= n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeSpec {
    /// Number of BEC nodes (1 or 2).
    pub nodes: usize,
    /// Levels present on every node.
    pub levels: Vec<Level>,
    pub bosons_per_node: u32,
    /// 0 or 1.
    pub photon_modes: usize,
    pub photon_cutoff: u32,
    pub excitation_sector: Option<Sector>,
}

impl ModeSpec {
    /// Atoms only, no photon mode.
    pub fn atoms(nodes: usize, levels: &[Level], bosons_per_node: u32) -> Self {
        Self {
            nodes,
            levels: levels.to_vec(),
            bosons_per_node,
            photon_modes: 0,
            photon_cutoff: 0,
            excitation_sector: None,
        }
    }

    pub fn with_photon(mut self, cutoff: u32) -> Self {
        self.photon_modes = 1;
        self.photon_cutoff = cutoff;
        self
    }

    pub fn with_sector(mut self, sector: Sector) -> Self {
        self.excitation_sector = Some(sector);
        self
    }

    pub fn n_modes(&self) -> usize {
        self.nodes * self.levels.len() + self.photon_modes
    }

    /// Position of `mode` inside an occupation tuple.
    pub fn slot(&self, mode: Mode) -> Option<usize> {
        match mode {
            Mode::Atom { node, level } => {
                if node >= self.nodes {
                    return None;
                }
                let j = self.levels.iter().position(|&l| l == level)?;
                Some(node * self.levels.len() + j)
            }
            Mode::Photon => (self.photon_modes == 1).then_some(self.nodes * self.levels.len()),
        }
    }

    pub fn has(&self, mode: Mode) -> bool {
        self.slot(mode).is_some()
    }

    pub fn modes(&self) -> Vec<Mode> {
        let mut out = Vec::with_capacity(self.n_modes());
        for node in 0..self.nodes {
            for &level in &self.levels {
                out.push(Mode::Atom { node, level });
            }
        }
        if self.photon_modes == 1 {
            out.push(Mode::Photon);
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.nodes) {
            return Err(Error::InvalidSpec(format!("nodes must be 1 or 2, got {}", self.nodes)));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidSpec("no levels per node".into()));
        }
        let mut sorted = self.levels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.levels.len() {
            return Err(Error::InvalidSpec("duplicate level labels".into()));
        }
        if self.bosons_per_node < 1 {
            return Err(Error::InvalidSpec("bosons_per_node must be >= 1".into()));
        }
        if self.photon_modes > 1 {
            return Err(Error::InvalidSpec("at most one photon mode".into()));
        }
        Ok(())
    }

    fn excitation(&self, occ: &[u32]) -> u32 {
        let mut n = 0;
        if let Some(j) = self.levels.iter().position(|&l| l == Level::E) {
            for node in 0..self.nodes {
                n += occ[node * self.levels.len() + j];
            }
        }
        if self.photon_modes == 1 {
            n += occ[occ.len() - 1];
        }
        n
    }
}

/// Ordered enumeration of the basis states allowed by a [`ModeSpec`].
#[derive(Debug)]
pub struct BasisIndex {
    spec: ModeSpec,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl BasisIndex {
    pub fn spec(&self) -> &ModeSpec {
        &self.spec
    }
    pub fn dim(&self) -> usize {
        self.states.len()
    }
    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }
    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }
    pub fn index_of(&self, occupation: &[u32]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Occupation of `mode` in basis state `i`.
    pub fn occupation(&self, i: usize, mode: Mode) -> Option<u32> {
        self.spec.slot(mode).map(|s| self.states[i][s])
    }

    /// Excitation number (excited atoms plus photons) of basis state `i`.
    pub fn excitation(&self, i: usize) -> u32 {
        self.spec.excitation(&self.states[i])
    }

    /// Two bases are compatible when they enumerate the same states.
    pub fn compatible(&self, other: &BasisIndex) -> bool {
        std::ptr::eq(self, other) || self.spec == other.spec
    }

    /// One occupation tuple per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = self.spec.modes().iter().map(|m| m.to_string()).collect();
        writeln!(w, "# {}", header.join(" "))?;
        for s in &self.states {
            let line: Vec<String> = s.iter().map(|n| n.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Enumerate all occupation tuples satisfying `spec`, in lexicographic order.
pub fn enumerate_basis(spec: ModeSpec) -> Result<Arc<BasisIndex>> {
    spec.validate()?;
    let per_node = compositions(spec.bosons_per_node, spec.levels.len());
    let mut states: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..spec.nodes {
        let mut next = Vec::with_capacity(states.len() * per_node.len());
        for s in &states {
            for c in &per_node {
                let mut t = s.clone();
                t.extend_from_slice(c);
                next.push(t);
            }
        }
        states = next;
    }
    if spec.photon_modes == 1 {
        let mut next = Vec::with_capacity(states.len() * (spec.photon_cutoff as usize + 1));
        for s in &states {
            for n in 0..=spec.photon_cutoff {
                let mut t = s.clone();
                t.push(n);
                next.push(t);
            }
        }
        states = next;
    }
    if let Some(sector) = spec.excitation_sector {
        states.retain(|s| sector.admits(spec.excitation(s)));
    }
    if states.is_empty() {
        return Err(Error::EmptyBasis(format!("no state satisfies {spec:?}")));
    }
    states.sort();
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(Arc::new(BasisIndex { spec, states, index }))
}

fn check_basis(a: &BasisIndex, b: &BasisIndex) -> Result<()> {
    if a.compatible(b) {
        Ok(())
    } else {
        Err(Error::BasisMismatch(format!("{:?} vs {:?}", a.spec, b.spec)))
    }
}

/// Sparse operator in compressed-row layout.
#[derive(Clone, Debug)]
pub struct Operator {
    basis: Arc<BasisIndex>,
    label: String,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Operator {
    /// Build from (row, col, value) triplets; duplicates are summed and exact
    /// zeros dropped.
    pub fn from_triplets(
        basis: &Arc<BasisIndex>,
        label: impl Into<String>,
        mut triplets: Vec<(usize, usize, C64)>,
    ) -> Result<Self> {
        let dim = basis.dim();
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= dim || *c >= dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: r.max(c) + 1 });
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != ZERO {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            basis: Arc::clone(basis),
            label: label.into(),
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        })
    }

    pub fn zero(basis: &Arc<BasisIndex>) -> Self {
        Self::from_triplets(basis, "0", Vec::new()).expect("empty operator")
    }

    pub fn identity(basis: &Arc<BasisIndex>) -> Self {
        Self::diagonal(basis, "1", &vec![1.0; basis.dim()])
    }

    pub fn diagonal(basis: &Arc<BasisIndex>, label: impl Into<String>, diag: &[f64]) -> Self {
        assert_eq!(diag.len(), basis.dim(), "diagonal length");
        let t = diag.iter().enumerate().map(|(i, &d)| (i, i, C64::new(d, 0.0))).collect();
        Self::from_triplets(basis, label, t).expect("diagonal in range")
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        &self.basis
    }
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Nonzero entries of row `i` as (column, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i).find(|&(c, _)| c == j).map_or(ZERO, |(_, v)| v)
    }

    pub fn diagonal_entries(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(i, j, _)| i == j)
    }

    /// Copy with the main diagonal removed.
    pub fn off_diagonal(&self) -> Operator {
        let t = self.triplets().filter(|&(i, j, _)| i != j).collect();
        Operator::from_triplets(&self.basis, format!("offdiag({})", self.label), t).unwrap()
    }

    pub fn adjoint(&self) -> Operator {
        let t = self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect();
        Operator::from_triplets(&self.basis, format!("({})†", self.label), t).unwrap()
    }

    pub fn scale(&self, s: C64) -> Operator {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out.label = format!("{}*{}", fmt_scalar(s), self.label);
        out
    }

    pub fn try_add(&self, other: &Operator) -> Result<Operator> {
        check_basis(&self.basis, &other.basis)?;
        let t = self.triplets().chain(other.triplets()).collect();
        Operator::from_triplets(&self.basis, format!("{} + {}", self.label, other.label), t)
    }

    /// Matrix product `self · other`.
    pub fn try_compose(&self, other: &Operator) -> Result<Operator> {
        check_basis(&self.basis, &other.basis)?;
        let mut t = Vec::new();
        for i in 0..self.dim() {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    t.push((i, j, a * b));
                }
            }
        }
        Operator::from_triplets(&self.basis, format!("{}·{}", self.label, other.label), t)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        let ab = self.try_compose(other)?;
        let ba = other.try_compose(self)?;
        Ok((&ab - &ba).with_label(format!("[{}, {}]", self.label, other.label)))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max |A − A†|.
    pub fn hermiticity_residual(&self) -> f64 {
        (self - &self.adjoint()).max_abs()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// `self · v`.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim(), "vector length");
        (0..self.dim()).map(|i| self.row(i).map(|(j, a)| a * v[j]).sum()).collect()
    }

    /// Compressed-row arrays `(row_ptr, cols, vals)`.
    pub(crate) fn csr(&self) -> (&[usize], &[usize], &[C64]) {
        (&self.row_ptr, &self.cols, &self.vals)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// One `row col re im` entry per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} dim={} nnz={}", self.label, self.dim(), self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{} {} {:e} {:e}", i, j, v.re, v.im)?;
        }
        Ok(())
    }
}

fn fmt_scalar(s: C64) -> String {
    if s.im == 0.0 {
        format!("{}", s.re)
    } else {
        format!("({}{:+}i)", s.re, s.im)
    }
}

impl Add for &Operator {
    type Output = Operator;
    /// Panics if the operands live on different bases.
    fn add(self, rhs: &Operator) -> Operator {
        self.try_add(rhs).expect("operator sum")
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-ONE).with_label(format!("-{}", self.label))
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        let out = self + &(-rhs);
        let label = format!("{} - {}", self.label, rhs.label);
        out.with_label(label)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.try_compose(rhs).expect("operator product")
    }
}

impl Mul<&Operator> for f64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(C64::new(self, 0.0))
    }
}

impl Mul<&Operator> for C64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(self)
    }
}

fn require(basis: &BasisIndex, mode: Mode) -> Result<usize> {
    basis
        .spec
        .slot(mode)
        .ok_or_else(|| Error::MissingMode(format!("{mode} in {:?}", basis.spec)))
}

fn check_excitation_change(basis: &BasisIndex, delta: i32, what: &str) -> Result<()> {
    match basis.spec.excitation_sector {
        Some(Sector::Exactly(_)) if delta != 0 => Err(Error::Conservation {
            law: "excitation number",
            detail: format!("{what} changes n_ex by {delta} in a fixed sector"),
        }),
        Some(Sector::AtMost(_)) if delta > 0 => Err(Error::Conservation {
            law: "excitation number",
            detail: format!("{what} raises n_ex above a capped sector"),
        }),
        _ => Ok(()),
    }
}

/// Photon ladder factor attached to an atomic bilinear.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhotonLadder {
    Raise,
    Lower,
}

fn ladder_operator(
    basis: &Arc<BasisIndex>,
    label: String,
    creation: Mode,
    annihilation: Mode,
    photon: Option<PhotonLadder>,
) -> Result<Operator> {
    let sx = require(basis, creation)?;
    let sy = require(basis, annihilation)?;
    let sp = match photon {
        Some(_) => Some(require(basis, Mode::Photon)?),
        None => None,
    };
    if creation.owner() != annihilation.owner() {
        return Err(Error::Conservation {
            law: "per-node boson number",
            detail: format!("{creation}†{annihilation} moves a boson between nodes or into the field"),
        });
    }
    let dp = match photon {
        Some(PhotonLadder::Raise) => 1,
        Some(PhotonLadder::Lower) => -1,
        None => 0,
    };
    check_excitation_change(basis, creation.excitation() - annihilation.excitation() + dp, &label)?;

    let mut t = Vec::new();
    for (j, occ) in basis.states.iter().enumerate() {
        let mut amp = 1.0;
        let mut next = occ.clone();
        if let Some(sp) = sp {
            if dp < 0 {
                if next[sp] == 0 {
                    continue;
                }
                amp *= (next[sp] as f64).sqrt();
                next[sp] -= 1;
            } else {
                next[sp] += 1;
                amp *= (next[sp] as f64).sqrt();
            }
        }
        if next[sy] == 0 {
            continue;
        }
        if sx == sy {
            amp *= next[sx] as f64;
        } else {
            amp *= (next[sy] as f64).sqrt();
            next[sy] -= 1;
            next[sx] += 1;
            amp *= (next[sx] as f64).sqrt();
        }
        // Targets outside the basis are beyond the photon cutoff.
        if let Some(i) = basis.index_of(&next) {
            t.push((i, j, C64::new(amp, 0.0)));
        }
    }
    Operator::from_triplets(basis, label, t)
}

/// The bilinear `x†y` for `x = creation`, `y = annihilation`.
///
/// Fails when the pair moves bosons between nodes or leaves a fixed
/// excitation sector.
pub fn bilinear_operator(basis: &Arc<BasisIndex>, creation: Mode, annihilation: Mode) -> Result<Operator> {
    ladder_operator(basis, format!("{creation}†{annihilation}"), creation, annihilation, None)
}

/// `x†y p` or `x†y p†`; transitions past the photon cutoff are dropped.
pub fn photon_assisted_operator(
    basis: &Arc<BasisIndex>,
    creation: Mode,
    annihilation: Mode,
    photon: PhotonLadder,
) -> Result<Operator> {
    let p = match photon {
        PhotonLadder::Raise => "p†",
        PhotonLadder::Lower => "p",
    };
    ladder_operator(basis, format!("{creation}†{annihilation}{p}"), creation, annihilation, Some(photon))
}

/// Photon annihilation `p`. Allowed only when the basis is closed under
/// lowering the excitation number.
pub fn photon_lowering(basis: &Arc<BasisIndex>) -> Result<Operator> {
    let sp = require(basis, Mode::Photon)?;
    check_excitation_change(basis, -1, "p")?;
    let mut t = Vec::new();
    for (j, occ) in basis.states.iter().enumerate() {
        if occ[sp] == 0 {
            continue;
        }
        let mut next = occ.clone();
        next[sp] -= 1;
        let i = basis.index_of(&next).ok_or_else(|| Error::Conservation {
            law: "excitation number",
            detail: "p leaves the enumerated basis".into(),
        })?;
        t.push((i, j, C64::new((occ[sp] as f64).sqrt(), 0.0)));
    }
    Operator::from_triplets(basis, "p", t)
}

pub fn number_operator(basis: &Arc<BasisIndex>, mode: Mode) -> Result<Operator> {
    bilinear_operator(basis, mode, mode)
}

/// Diagonal operator counting excited atoms plus photons.
pub fn excitation_operator(basis: &Arc<BasisIndex>) -> Operator {
    let d: Vec<f64> = (0..basis.dim()).map(|i| basis.excitation(i) as f64).collect();
    Operator::diagonal(basis, "n_ex", &d)
}

/// Diagonal operator counting all bosons on one node.
pub fn node_number_operator(basis: &Arc<BasisIndex>, node: usize) -> Result<Operator> {
    let spec = basis.spec();
    if node >= spec.nodes {
        return Err(Error::MissingMode(format!("node {}", node + 1)));
    }
    let k = spec.levels.len();
    let d: Vec<f64> = basis
        .states()
        .iter()
        .map(|s| s[node * k..(node + 1) * k].iter().sum::<u32>() as f64)
        .collect();
    Ok(Operator::diagonal(basis, format!("N{}", node + 1), &d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Schwinger spin of node `node`: `Sz = a†a − b†b`, `Sx = a†b + b†a`,
/// `Sy = −i(a†b − b†a)`.
pub fn collective_spin_operator(basis: &Arc<BasisIndex>, node: usize, axis: Axis) -> Result<Operator> {
    let (a, b) = (Mode::a(node), Mode::b(node));
    let op = match axis {
        Axis::Z => &number_operator(basis, a)? - &number_operator(basis, b)?,
        Axis::X => &bilinear_operator(basis, a, b)? + &bilinear_operator(basis, b, a)?,
        Axis::Y => {
            let ab = bilinear_operator(basis, a, b)?;
            let ba = bilinear_operator(basis, b, a)?;
            &(-I * &ab) + &(I * &ba)
        }
    };
    Ok(op.with_label(format!("S{}{}", axis, node + 1)))
}

/// Excitation pseudo-spin `Fz = e†e − b†b` of one node.
pub fn pseudo_spin_z(basis: &Arc<BasisIndex>, node: usize) -> Result<Operator> {
    let op = &number_operator(basis, Mode::e(node))? - &number_operator(basis, Mode::b(node))?;
    Ok(op.with_label(format!("Fz{}", node + 1)))
}

/// Natural log of the binomial coefficient.
pub fn ln_binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// √C(N,k) αᵏ β^(N−k), evaluated in log space so large N neither overflows
/// nor underflows prematurely.
pub(crate) fn coherent_amplitude(alpha: C64, beta: C64, n: u32, k: u32) -> C64 {
    let factor = |z: C64, p: u32| -> Option<(f64, f64)> {
        if p == 0 {
            Some((0.0, 0.0))
        } else if z == ZERO {
            None
        } else {
            Some((p as f64 * z.norm().ln(), p as f64 * z.arg()))
        }
    };
    match (factor(alpha, k), factor(beta, n - k)) {
        (Some((la, pa)), Some((lb, pb))) => C64::from_polar((0.5 * ln_binomial(n, k) + la + lb).exp(), pa + pb),
        _ => ZERO,
    }
}

fn check_normalized(alpha: C64, beta: C64) -> Result<()> {
    let s = alpha.norm_sqr() + beta.norm_sqr();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(s));
    }
    Ok(())
}

/// Product of spin coherent states, one `(α, β)` pair per node, with every
/// non-`{a, b}` mode empty.
pub fn spin_coherent_product(basis: &Arc<BasisIndex>, pairs: &[(C64, C64)]) -> Result<StateVector> {
    let spec = basis.spec();
    if pairs.len() != spec.nodes {
        return Err(Error::BasisMismatch(format!("{} coherent pairs for {} nodes", pairs.len(), spec.nodes)));
    }
    for &(a, b) in pairs {
        check_normalized(a, b)?;
    }
    let mut slots = Vec::with_capacity(spec.nodes);
    for node in 0..spec.nodes {
        slots.push((require(basis, Mode::a(node))?, require(basis, Mode::b(node))?));
    }
    let n = spec.bosons_per_node;
    let amps = basis
        .states()
        .iter()
        .map(|occ| {
            if occ.iter().sum::<u32>() != n * spec.nodes as u32 {
                return ZERO;
            }
            let mut amp = ONE;
            for (node, &(sa, sb)) in slots.iter().enumerate() {
                if occ[sa] + occ[sb] != n {
                    return ZERO;
                }
                let (alpha, beta) = pairs[node];
                amp *= coherent_amplitude(alpha, beta, n, occ[sa]);
            }
            amp
        })
        .collect();
    StateVector::new(basis, amps)
}

/// The spin coherent state `|α, β⟩⟩` on every node of `basis`.
pub fn spin_coherent_state(alpha: C64, beta: C64, n: u32, basis: &Arc<BasisIndex>) -> Result<StateVector> {
    if basis.spec().bosons_per_node != n {
        return Err(Error::BasisMismatch(format!("basis holds {} bosons per node, asked for {n}", basis.spec().bosons_per_node)));
    }
    spin_coherent_product(basis, &vec![(alpha, beta); basis.spec().nodes])
}

#[derive(Clone, Debug)]
pub struct StateVector {
    basis: Arc<BasisIndex>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(basis: &Arc<BasisIndex>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: amps.len() });
        }
        Ok(Self { basis: Arc::clone(basis), amps })
    }

    /// The basis state with the given occupation tuple.
    pub fn fock(basis: &Arc<BasisIndex>, occupation: &[u32]) -> Result<Self> {
        let i = basis
            .index_of(occupation)
            .ok_or_else(|| Error::InvalidParameter(format!("{occupation:?} is not in the basis")))?;
        let mut amps = vec![ZERO; basis.dim()];
        amps[i] = ONE;
        Self::new(basis, amps)
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        &self.basis
    }
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }
    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        self.amps.iter_mut().for_each(|a| *a /= n);
        self
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_basis(&self.basis, &other.basis)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn apply(&self, op: &Operator) -> Result<StateVector> {
        check_basis(&self.basis, op.basis())?;
        StateVector::new(&self.basis, op.apply(&self.amps))
    }
}

/// Dense density matrix, stored row-major.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    basis: Arc<BasisIndex>,
    entries: Vec<C64>,
}

impl DensityMatrix {
    pub fn new(basis: &Arc<BasisIndex>, entries: Vec<C64>) -> Result<Self> {
        let n = basis.dim();
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        Ok(Self { basis: Arc::clone(basis), entries })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        let entries = a.iter().flat_map(|x| a.iter().map(move |y| x * y.conj())).collect();
        Self { basis: Arc::clone(psi.basis()), entries }
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        &self.basis
    }
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
    pub fn entries(&self) -> &[C64] {
        &self.entries
    }
    pub fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.entries
    }
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim() + j]
    }

    pub fn trace(&self) -> C64 {
        let n = self.dim();
        (0..n).map(|i| self.entries[i * n + i]).sum()
    }

    /// max |ρ − ρ†|.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                r = r.max((self.entries[i * n + j] - self.entries[j * n + i].conj()).norm());
            }
        }
        r
    }

    /// ρ ← (ρ + ρ†)/2.
    pub fn symmetrize(&mut self) {
        let n = self.dim();
        hermitize(&mut self.entries, n);
    }

    /// max |ρ − σ| elementwise.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        check_basis(&self.basis, &other.basis)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        let n = self.dim();
        DMatrix::from_row_slice(n, n, &self.entries)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.to_dmatrix().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Whether every eigenvalue is ≥ −`tol`. Small matrices are diagonalized;
    /// larger ones use a Cholesky factorization of ρ + tol·𝟙.
    pub fn is_psd_within(&self, tol: f64) -> bool {
        psd_probe(self, tol).passed
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> Result<f64> {
        check_basis(&self.basis, psi.basis())?;
        let n = self.dim();
        let a = psi.amplitudes();
        let mut s = ZERO;
        for i in 0..n {
            let row = &self.entries[i * n..(i + 1) * n];
            let r: C64 = row.iter().zip(a).map(|(x, y)| x * y).sum();
            s += a[i].conj() * r;
        }
        Ok(s.re)
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += (self.entries[i * n + j] * self.entries[j * n + i]).re;
            }
        }
        s
    }
}

pub(crate) fn hermitize(m: &mut [C64], n: usize) {
    for i in 0..n {
        m[i * n + i].im = 0.0;
        for j in i + 1..n {
            let avg = 0.5 * (m[i * n + j] + m[j * n + i].conj());
            m[i * n + j] = avg;
            m[j * n + i] = avg.conj();
        }
    }
}

/// Outcome of a positivity probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdProbe {
    /// Smallest eigenvalue when it was computed exactly.
    pub min_eigenvalue: Option<f64>,
    pub passed: bool,
}

const EXACT_PSD_DIM: usize = 400;

pub(crate) fn psd_probe(rho: &DensityMatrix, tol: f64) -> PsdProbe {
    if rho.dim() <= EXACT_PSD_DIM {
        let m = rho.min_eigenvalue();
        PsdProbe { min_eigenvalue: Some(m), passed: m >= -tol }
    } else {
        let mut m = rho.to_dmatrix();
        for i in 0..rho.dim() {
            m[(i, i)] += C64::new(tol, 0.0);
        }
        PsdProbe { min_eigenvalue: None, passed: m.cholesky().is_some() }
    }
}

/// States and density matrices that can take expectation values.
pub trait Expectation {
    fn expectation(&self, op: &Operator) -> Result<C64>;
}

impl Expectation for StateVector {
    fn expectation(&self, op: &Operator) -> Result<C64> {
        check_basis(&self.basis, op.basis())?;
        let a = &self.amps;
        Ok((0..a.len()).map(|i| a[i].conj() * op.row(i).map(|(j, v)| v * a[j]).sum::<C64>()).sum())
    }
}

impl Expectation for DensityMatrix {
    fn expectation(&self, op: &Operator) -> Result<C64> {
        check_basis(&self.basis, op.basis())?;
        Ok(expectation_flat(op, &self.entries))
    }
}

/// tr(ρ O) for a row-major ρ.
pub(crate) fn expectation_flat(op: &Operator, rho: &[C64]) -> C64 {
    let n = op.dim();
    op.triplets().map(|(i, j, v)| v * rho[j * n + i]).sum()
}

/// `⟨ψ|O|ψ⟩` or `tr(ρO)`.
pub fn expectation<S: Expectation>(state: &S, op: &Operator) -> Result<C64> {
    state.expectation(op)
}
