//! Staggered micro-grid geometry and the combinatorics of patch-grid layouts.
//!
//! Every patch is a rectangular window cut from one conceptual staggered
//! lattice. A node at lattice index `(i, j)` with window phase `(a, b)` carries
//!
//! | `(i - a)` | `(j - b)` | kind     |
//! |-----------|-----------|----------|
//! | odd       | odd       | `h`      |
//! | even      | odd       | `u`      |
//! | odd       | even      | `v`      |
//! | even      | even      | (absent) |
//!
//! The four node kinds found on the left, right, bottom and top edges of a
//! window name its edge type (e.g. `uuvv`). A window whose lateral (or
//! vertical) edges carry different kinds spans `n - 1` intervals instead of `n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field carried by a lattice node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    H,
    U,
    V,
    Absent,
}

impl NodeKind {
    /// The three state fields, in state-vector block order.
    pub const FIELDS: [NodeKind; 3] = [NodeKind::H, NodeKind::U, NodeKind::V];

    pub fn letter(self) -> char {
        match self {
            NodeKind::H => 'h',
            NodeKind::U => 'u',
            NodeKind::V => 'v',
            NodeKind::Absent => '-',
        }
    }

    fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_lowercase() {
            'h' => Some(NodeKind::H),
            'u' => Some(NodeKind::U),
            'v' => Some(NodeKind::V),
            _ => None,
        }
    }

    /// Block index (0, 1, 2) of a field; `None` for [`NodeKind::Absent`].
    pub fn field_index(self) -> Option<usize> {
        match self {
            NodeKind::H => Some(0),
            NodeKind::U => Some(1),
            NodeKind::V => Some(2),
            NodeKind::Absent => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Kind of the lattice node at `(i, j)` for a window with phase `(a, b)`.
pub fn node_kind(i: i64, j: i64, phase: (i64, i64)) -> NodeKind {
    let odd_i = (i - phase.0).rem_euclid(2) == 1;
    let odd_j = (j - phase.1).rem_euclid(2) == 1;
    match (odd_i, odd_j) {
        (true, true) => NodeKind::H,
        (false, true) => NodeKind::U,
        (true, false) => NodeKind::V,
        (false, false) => NodeKind::Absent,
    }
}

/// Whether `n / 2` is odd (`n = 6, 10, ...`) or even (`n = 4, 8, ...`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if (n / 2) % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    /// Smallest representative `n` of the parity class.
    pub fn representative_n(self) -> usize {
        match self {
            Parity::Odd => 6,
            Parity::Even => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Odd => "odd",
            Parity::Even => "even",
        }
    }
}

impl FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odd" => Ok(Parity::Odd),
            "even" => Ok(Parity::Even),
            _ => Err(Error::Parse(format!("parity must be `odd` or `even`, got `{s}`"))),
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Node kinds on the left, right, bottom and top edges of a sub-patch micro-grid.
///
/// Construction does not enforce compatibility so that incompatible
/// arrangements can be represented and rejected by [`is_compatible`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeType {
    pub left: NodeKind,
    pub right: NodeKind,
    pub bottom: NodeKind,
    pub top: NodeKind,
}

impl EdgeType {
    pub const fn new(left: NodeKind, right: NodeKind, bottom: NodeKind, top: NodeKind) -> Self {
        Self { left, right, bottom, top }
    }

    /// The 16 compatible edge types in canonical (lexicographic, `h < u < v`) order.
    pub fn all() -> [EdgeType; 16] {
        use NodeKind::{H, U, V};
        let lateral = [H, U];
        let vertical = [H, V];
        let mut out = [EdgeType::new(H, H, H, H); 16];
        let mut k = 0;
        for left in lateral {
            for right in lateral {
                for bottom in vertical {
                    for top in vertical {
                        out[k] = EdgeType::new(left, right, bottom, top);
                        k += 1;
                    }
                }
            }
        }
        out
    }

    /// Digit value `1..=16` used in patch grid Ids.
    pub fn digit(self) -> Option<u32> {
        EdgeType::all().iter().position(|e| *e == self).map(|p| p as u32 + 1)
    }

    pub fn from_digit(d: u32) -> Option<EdgeType> {
        (1..=16).contains(&d).then(|| EdgeType::all()[d as usize - 1])
    }

    /// Left and right kinds are in `{h, u}`, bottom and top kinds in `{h, v}`.
    pub fn has_valid_kinds(self) -> bool {
        use NodeKind::{H, U, V};
        matches!(self.left, H | U)
            && matches!(self.right, H | U)
            && matches!(self.bottom, H | V)
            && matches!(self.top, H | V)
    }

    /// Same kind on opposite edges in both directions.
    pub fn is_symmetric(self) -> bool {
        self.left == self.right && self.bottom == self.top
    }

    /// Kind of the centre node of a window of this type, if it has one.
    pub fn centre(self, parity: Parity) -> Option<NodeKind> {
        if !self.has_valid_kinds() || !self.is_symmetric() {
            return None;
        }
        let spec = MicroGridSpec::new(parity.representative_n(), self).ok()?;
        spec.centre
    }

    /// Mirror image under `x -> -x`.
    pub fn reflect_x(self) -> Self {
        Self::new(self.right, self.left, self.bottom, self.top)
    }

    /// Mirror image under `y -> -y`.
    pub fn reflect_y(self) -> Self {
        Self::new(self.left, self.right, self.top, self.bottom)
    }

    /// Image under `x <-> y`, which also exchanges the `u` and `v` fields.
    pub fn transpose(self) -> Self {
        let swap = |k: NodeKind| match k {
            NodeKind::U => NodeKind::V,
            NodeKind::V => NodeKind::U,
            other => other,
        };
        Self::new(swap(self.bottom), swap(self.top), swap(self.left), swap(self.right))
    }

    pub fn name(self) -> String {
        [self.left, self.right, self.bottom, self.top].iter().map(|k| k.letter()).collect()
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for EdgeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kinds: Vec<NodeKind> = s.chars().filter_map(NodeKind::from_letter).collect();
        if kinds.len() != 4 || s.chars().count() != 4 {
            return Err(Error::Parse(format!("edge type must be four letters from h/u/v, got `{s}`")));
        }
        Ok(EdgeType::new(kinds[0], kinds[1], kinds[2], kinds[3]))
    }
}

/// A concrete sub-patch micro-grid: a window of `mx × my` intervals cut from
/// the staggered lattice with phase `phase`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MicroGridSpec {
    /// Nominal interval count (even).
    pub n: usize,
    pub edge_type: EdgeType,
    pub mx: usize,
    pub my: usize,
    pub phase: (i64, i64),
    pub centre: Option<NodeKind>,
}

impl MicroGridSpec {
    pub fn new(n: usize, edge_type: EdgeType) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("sub-patch interval count n = {n} must be even and >= 4")));
        }
        if !edge_type.has_valid_kinds() {
            return Err(Error::Incompatible(format!(
                "edge type {edge_type} is not geometrically compatible"
            )));
        }
        let a = if edge_type.left == NodeKind::U { 0 } else { 1 };
        let b = if edge_type.bottom == NodeKind::V { 0 } else { 1 };
        let mx = if edge_type.left == edge_type.right { n } else { n - 1 };
        let my = if edge_type.bottom == edge_type.top { n } else { n - 1 };
        let centre = if mx % 2 == 0 && my % 2 == 0 {
            match node_kind((mx / 2) as i64, (my / 2) as i64, (a, b)) {
                NodeKind::Absent => None,
                k => Some(k),
            }
        } else {
            None
        };
        Ok(Self { n, edge_type, mx, my, phase: (a, b), centre })
    }

    pub fn kind_at(&self, i: i64, j: i64) -> NodeKind {
        node_kind(i, j, self.phase)
    }

    /// Interior nodes `(i, j, kind)` with `1 <= i < mx`, `1 <= j < my`, ordered
    /// by field, then `i`, then `j`.
    pub fn interior_nodes(&self) -> Vec<(i64, i64, NodeKind)> {
        let mut out = Vec::new();
        for field in NodeKind::FIELDS {
            for i in 1..self.mx as i64 {
                for j in 1..self.my as i64 {
                    if self.kind_at(i, j) == field {
                        out.push((i, j, field));
                    }
                }
            }
        }
        out
    }

    /// Declared kind of the edge containing boundary index `(i, j)`; corners
    /// and points off the window boundary give `None`.
    fn declared_edge_kind(&self, i: i64, j: i64) -> Option<NodeKind> {
        let (mx, my) = (self.mx as i64, self.my as i64);
        let on_x = i == 0 || i == mx;
        let on_y = j == 0 || j == my;
        match (on_x, on_y) {
            (true, false) if (1..my).contains(&j) => Some(if i == 0 { self.edge_type.left } else { self.edge_type.right }),
            (false, true) if (1..mx).contains(&i) => Some(if j == 0 { self.edge_type.bottom } else { self.edge_type.top }),
            _ => None,
        }
    }

    /// Offset of lattice index `(i, j)` from the window centre, in units of δ.
    pub fn offset(&self, i: i64, j: i64) -> (f64, f64) {
        (i as f64 - self.mx as f64 / 2.0, j as f64 - self.my as f64 / 2.0)
    }
}

/// Neighbour kinds each interior node kind needs for its finite differences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StencilRequirement {
    /// `(node kind, [(di, dj, required kind)])`
    pub needs: Vec<(NodeKind, Vec<(i64, i64, NodeKind)>)>,
}

impl StencilRequirement {
    /// First-derivative stencil of the wave equations.
    pub fn first_derivative() -> Self {
        use NodeKind::{H, U, V};
        Self {
            needs: vec![
                (H, vec![(1, 0, U), (-1, 0, U), (0, 1, V), (0, -1, V)]),
                (U, vec![(1, 0, H), (-1, 0, H)]),
                (V, vec![(0, 1, H), (0, -1, H)]),
            ],
        }
    }

    /// First derivatives plus the like-kind second differences of the viscous terms.
    pub fn with_viscosity() -> Self {
        use NodeKind::{U, V};
        let mut s = Self::first_derivative();
        let visc = [(2, 0), (-2, 0), (0, 2), (0, -2)];
        for (kind, needs) in s.needs.iter_mut() {
            if matches!(kind, U | V) {
                needs.extend(visc.iter().map(|&(di, dj)| (di, dj, *kind)));
            }
        }
        s
    }

    pub fn needs_of(&self, kind: NodeKind) -> &[(i64, i64, NodeKind)] {
        self.needs.iter().find(|(k, _)| *k == kind).map(|(_, v)| v.as_slice()).unwrap_or(&[])
    }
}

/// True iff some window of `n` or `n - 1` intervals per axis, phased by the
/// left and bottom edges, supplies every neighbour the interior stencils need
/// from its interior or from single-layer edge nodes of the declared kinds.
pub fn is_compatible(n: usize, edge_type: EdgeType, stencil: &StencilRequirement) -> bool {
    if n < 4 || !n.is_multiple_of(2) {
        return false;
    }
    let a = if edge_type.left == NodeKind::U { 0 } else { 1 };
    let b = if edge_type.bottom == NodeKind::V { 0 } else { 1 };
    [n, n - 1].iter().any(|&mx| {
        [n, n - 1].iter().any(|&my| {
            let spec = MicroGridSpec { n, edge_type, mx, my, phase: (a, b), centre: None };
            spec.interior_nodes().iter().all(|&(i, j, kind)| {
                stencil.needs_of(kind).iter().all(|&(di, dj, want)| {
                    let (ni, nj) = (i + di, j + dj);
                    let interior = (1..mx as i64).contains(&ni) && (1..my as i64).contains(&nj);
                    if interior {
                        spec.kind_at(ni, nj) == want
                    } else {
                        spec.declared_edge_kind(ni, nj) == Some(want) && spec.kind_at(ni, nj) == want
                    }
                })
            })
        })
    })
}

/// The 16 compatible sub-patch micro-grids for `n`, in canonical order.
pub fn enumerate_edge_types(n: usize) -> Result<Vec<MicroGridSpec>> {
    EdgeType::all().iter().map(|&e| MicroGridSpec::new(n, e)).collect()
}

/// Slot positions `(p, q)` in layout-string and Id digit order:
/// bottom-left, bottom-right, top-left, top-right of a macro-cell.
pub const SLOT_ORDER: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// Index into [`SLOT_ORDER`] of slot `(p, q)`.
pub fn slot_index(p: usize, q: usize) -> usize {
    p + 2 * q
}

/// A 2×2 macro-cell of patch slots, each empty or holding one edge type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchGridLayout {
    /// Indexed by [`slot_index`].
    pub slots: [Option<EdgeType>; 4],
    pub parity: Parity,
}

/// Centredness of a patch grid layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayoutClass {
    Centred,
    NonCentred,
}

impl PatchGridLayout {
    pub fn new(slots: [Option<EdgeType>; 4], parity: Parity) -> Result<Self> {
        if slots.iter().all(Option::is_none) {
            return Err(Error::InvalidLayout("layout has no patches".into()));
        }
        if let Some(bad) = slots.iter().flatten().find(|e| !e.has_valid_kinds()) {
            return Err(Error::Incompatible(format!("edge type {bad} is not geometrically compatible")));
        }
        Ok(Self { slots, parity })
    }

    /// Parses four comma-separated tokens (edge-type names or `----`).
    pub fn parse(s: &str, parity: Parity) -> Result<Self> {
        let tokens: Vec<&str> = s.split(',').map(str::trim).collect();
        if tokens.len() != 4 {
            return Err(Error::Parse(format!("layout needs four comma-separated slots, got `{s}`")));
        }
        let mut slots = [None; 4];
        for (slot, tok) in slots.iter_mut().zip(&tokens) {
            if *tok != "----" {
                *slot = Some(tok.parse::<EdgeType>()?);
            }
        }
        Self::new(slots, parity)
    }

    pub fn slot(&self, p: usize, q: usize) -> Option<EdgeType> {
        self.slots[slot_index(p, q)]
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, EdgeType)> + '_ {
        self.slots.iter().enumerate().filter_map(|(s, e)| e.map(|e| (s, e)))
    }

    pub fn classify(&self) -> LayoutClass {
        let mut kinds = [false; 3];
        for (_, e) in self.occupied() {
            match e.centre(self.parity).and_then(NodeKind::field_index) {
                Some(f) => kinds[f] = true,
                None => return LayoutClass::NonCentred,
            }
        }
        if kinds.iter().all(|&k| k) {
            LayoutClass::Centred
        } else {
            LayoutClass::NonCentred
        }
    }

    pub fn is_centred(&self) -> bool {
        self.classify() == LayoutClass::Centred
    }

    pub fn is_symmetric_only(&self) -> bool {
        self.occupied().all(|(_, e)| e.is_symmetric())
    }

    pub fn id(&self) -> GridId {
        let id = self
            .slots
            .iter()
            .fold(0u32, |acc, s| acc * 17 + s.and_then(EdgeType::digit).unwrap_or(0));
        GridId { id, parity: self.parity }
    }

    /// Image under one of the 32 symmetries of the periodic patch grid:
    /// bit 0 reflects `x`, bit 1 reflects `y`, bit 2 transposes, bit 3 shifts
    /// by one patch in `x` and bit 4 by one patch in `y`.
    pub fn transformed(&self, g: u8) -> Self {
        let mut slots = [None; 4];
        for (s, &(p, q)) in SLOT_ORDER.iter().enumerate() {
            let Some(mut e) = self.slots[s] else { continue };
            let (mut p2, mut q2) = (p, q);
            if g & 1 != 0 {
                e = e.reflect_x();
            }
            if g & 2 != 0 {
                e = e.reflect_y();
            }
            if g & 4 != 0 {
                e = e.transpose();
                (p2, q2) = (q2, p2);
            }
            if g & 8 != 0 {
                p2 = 1 - p2;
            }
            if g & 16 != 0 {
                q2 = 1 - q2;
            }
            slots[slot_index(p2, q2)] = Some(e);
        }
        Self { slots, parity: self.parity }
    }

    /// Distinct images under the grid symmetries, in increasing Id order.
    pub fn orbit(&self) -> Vec<Self> {
        let mut out: Vec<Self> = (0..32).map(|g| self.transformed(g)).collect();
        out.sort_by_key(|l| l.id());
        out.dedup();
        out
    }

    /// The orbit member with the smallest Id.
    pub fn canonical(&self) -> Self {
        (0..32).map(|g| self.transformed(g)).min_by_key(|l| l.id()).expect("nonempty group")
    }

    /// All 83,520 layouts of one parity in increasing Id order.
    pub fn all(parity: Parity) -> impl Iterator<Item = PatchGridLayout> {
        (1..=GridId::MAX).map(move |id| GridId::new(id, parity).expect("in range").layout())
    }
}

impl fmt::Display for PatchGridLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<String> =
            self.slots.iter().map(|s| s.map(|e| e.name()).unwrap_or_else(|| "----".into())).collect();
        f.write_str(&tokens.join(","))
    }
}

/// Patch grid Id: the decimal value of the layout's four base-17 digits, the
/// first slot of [`SLOT_ORDER`] being most significant. Digit 0 is an empty
/// slot and digits 1–16 follow [`EdgeType::all`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridId {
    pub id: u32,
    pub parity: Parity,
}

impl GridId {
    pub const MAX: u32 = 17 * 17 * 17 * 17 - 1;

    pub fn new(id: u32, parity: Parity) -> Result<Self> {
        if id == 0 || id > Self::MAX {
            return Err(Error::Range(format!("patch grid Id {id} outside 1..={}", Self::MAX)));
        }
        Ok(Self { id, parity })
    }

    pub fn layout(self) -> PatchGridLayout {
        let mut slots = [None; 4];
        let mut rest = self.id;
        for slot in slots.iter_mut().rev() {
            *slot = EdgeType::from_digit(rest % 17);
            rest /= 17;
        }
        PatchGridLayout { slots, parity: self.parity }
    }
}

/// Number of centred layouts of one parity, by enumeration.
pub fn count_centred(parity: Parity) -> usize {
    PatchGridLayout::all(parity).filter(PatchGridLayout::is_centred).count()
}
