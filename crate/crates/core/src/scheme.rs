//! Patch scheme assembly: node indexing of the interior state and edge
//! vectors, the sub-patch finite-difference operator, macroscale aggregates and
//! the node-count formulas.
//!
//! Everything is indexed per macro-cell. The one-cell interior vector lists
//! the occupied slots in [`SLOT_ORDER`] order and, within a patch, the `h`
//! nodes, then `u`, then `v`, each ordered by `i` then `j`. A full patch-scheme
//! state is the concatenation of the one-cell vectors of all `(N/2)²`
//! macro-cells, cell `(I, J)` at block `I * N/2 + J`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MicroGridSpec, NodeKind, PatchGridLayout, SLOT_ORDER};
use crate::micro::WaveParams;

/// Macro and micro discretisation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Domain period `L`.
    pub l: f64,
    /// Macro-grid interval count `N` (patch spacing `Δ = L / N`).
    pub big_n: usize,
    /// Sub-patch micro-grid interval count `n`.
    pub n: usize,
    /// Patch scale ratio `r = l / (2Δ)`.
    pub r: f64,
}

impl GridParams {
    pub fn new(l: f64, big_n: usize, n: usize, r: f64) -> Result<Self> {
        let p = Self { l, big_n, n, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidParams(format!("L must be positive, got {}", self.l)));
        }
        if self.big_n < 2 || !self.big_n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("N must be even and >= 2, got {}", self.big_n)));
        }
        if self.n < 4 || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("n must be even and >= 4, got {}", self.n)));
        }
        if !(self.r > 0.0 && self.r <= 0.5) {
            return Err(Error::InvalidParams(format!("r must lie in (0, 0.5], got {}", self.r)));
        }
        Ok(())
    }

    /// Macro-grid interval `Δ = L / N`.
    pub fn macro_delta(&self) -> f64 {
        self.l / self.big_n as f64
    }

    /// Patch width `l = 2 r Δ`.
    pub fn patch_width(&self) -> f64 {
        2.0 * self.r * self.macro_delta()
    }

    /// Micro-grid interval `δ = l / n`.
    pub fn delta(&self) -> f64 {
        self.patch_width() / self.n as f64
    }

    /// Macro-cells per axis, `N / 2`.
    pub fn cells_per_axis(&self) -> usize {
        self.big_n / 2
    }

    /// Largest resolved integer wavenumber on the 2π-normalised domain, `⌊N/4⌋`.
    pub fn max_resolved_mode(&self) -> i64 {
        (self.big_n / 4) as i64
    }

    /// All resolved integer wavenumber pairs, `|k_x|, |k_y| <= ⌊N/4⌋`.
    pub fn resolved_modes(&self) -> Vec<(i64, i64)> {
        let m = self.max_resolved_mode();
        let mut out = Vec::new();
        for kx in -m..=m {
            for ky in -m..=m {
                out.push((kx, ky));
            }
        }
        out
    }
}

/// Edge-layer specification `n<normal>t<tangential>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeLayerSpec {
    pub normal: usize,
    pub tangential: usize,
}

impl EdgeLayerSpec {
    pub fn new(normal: usize, tangential: usize) -> Result<Self> {
        if normal == 0 {
            return Err(Error::InvalidParams("at least one normal edge layer is required".into()));
        }
        Ok(Self { normal, tangential })
    }

    pub const N1T0: Self = Self { normal: 1, tangential: 0 };
    pub const N2T0: Self = Self { normal: 2, tangential: 0 };
    pub const N3T2: Self = Self { normal: 3, tangential: 2 };
}

impl FromStr for EdgeLayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("edge layer spec `{s}` is not of the form n<int>t<int>"));
        let rest = s.trim().strip_prefix('n').ok_or_else(bad)?;
        let (a, b) = rest.split_once('t').ok_or_else(bad)?;
        Self::new(a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)
    }
}

impl fmt::Display for EdgeLayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}t{}", self.normal, self.tangential)
    }
}

/// How stencil targets outside the coupled edge layers are filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EdgeFill {
    /// Every stencil target must be an interior or coupled edge node.
    #[default]
    Coupled,
    /// Missing targets copy the nearest like-kind node inward.
    ExtrapolateConstant,
    /// Missing targets extrapolate linearly from the two nearest like-kind nodes inward.
    ExtrapolateLinear,
}

/// A node of the one-cell system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeRecord {
    /// Index into [`PatchScheme::patches`].
    pub patch: usize,
    pub i: i64,
    pub j: i64,
    pub kind: NodeKind,
}

/// Reference to an entry of the interior or edge vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeRef {
    Interior(usize),
    Edge(usize),
}

/// One occupied slot of the macro-cell.
#[derive(Clone, Debug)]
pub struct Patch {
    pub slot: usize,
    pub p: usize,
    pub q: usize,
    pub spec: MicroGridSpec,
    /// Patch centre relative to the macro-cell origin, `(pΔ, qΔ)`.
    pub centre: (f64, f64),
    pub interior: std::ops::Range<usize>,
    pub edges: std::ops::Range<usize>,
    /// Interior indices averaged into each field's aggregate (h, u, v).
    pub aggregate_nodes: [Vec<usize>; 3],
}

/// Immutable patch scheme for one layout, parameter set and layer spec.
#[derive(Clone, Debug)]
pub struct PatchScheme {
    pub params: GridParams,
    pub wave: WaveParams,
    pub layout: PatchGridLayout,
    pub layers: EdgeLayerSpec,
    pub fill: EdgeFill,
    pub patches: Vec<Patch>,
    pub interior: Vec<NodeRecord>,
    pub edges: Vec<NodeRecord>,
    lookup: HashMap<(usize, i64, i64), NodeRef>,
    /// Per interior node: `(source, coefficient)` pairs of its time derivative.
    stencils: Vec<Vec<(NodeRef, f64)>>,
}

/// Counts for the scheme description.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeCounts {
    pub interior_per_cell: usize,
    pub edge_per_cell: usize,
    pub interior_total: usize,
    pub edge_total: usize,
    pub per_patch_interior: Vec<[usize; 3]>,
}

/// JSON-serialisable description of a scheme.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeDescription {
    pub params: GridParams,
    pub wave: WaveParams,
    pub layout: String,
    pub parity: String,
    pub id: u32,
    pub layers: String,
    pub centred: bool,
    pub symmetric_only: bool,
    pub counts: SchemeCounts,
    pub delta: f64,
    pub macro_delta: f64,
    pub patch_width: f64,
}

/// Builds the patch scheme, validating geometry, parameters and edge-layer
/// sufficiency for the stencils implied by `wave`.
pub fn build_scheme(
    params: GridParams,
    layout: PatchGridLayout,
    layers: EdgeLayerSpec,
    wave: WaveParams,
) -> Result<PatchScheme> {
    build_scheme_with_fill(params, layout, layers, wave, EdgeFill::Coupled)
}

/// As [`build_scheme`], with an explicit fill rule for stencil targets beyond the coupled layers.
pub fn build_scheme_with_fill(
    params: GridParams,
    layout: PatchGridLayout,
    layers: EdgeLayerSpec,
    wave: WaveParams,
    fill: EdgeFill,
) -> Result<PatchScheme> {
    params.validate()?;
    if crate::geometry::Parity::of(params.n) != layout.parity {
        return Err(Error::InvalidParams(format!(
            "layout parity {} does not match n = {} (parity {})",
            layout.parity,
            params.n,
            crate::geometry::Parity::of(params.n)
        )));
    }
    let macro_delta = params.macro_delta();
    let mut patches = Vec::new();
    let mut interior = Vec::new();
    let mut edges = Vec::new();
    let mut lookup = HashMap::new();

    for (slot, &(p, q)) in SLOT_ORDER.iter().enumerate() {
        let Some(edge_type) = layout.slots[slot] else { continue };
        let spec = MicroGridSpec::new(params.n, edge_type)?;
        let index = patches.len();
        let start = interior.len();
        for (i, j, kind) in spec.interior_nodes() {
            lookup.insert((index, i, j), NodeRef::Interior(interior.len()));
            interior.push(NodeRecord { patch: index, i, j, kind });
        }
        let interior_range = start..interior.len();
        let estart = edges.len();
        for (i, j) in edge_band(&spec, layers) {
            let kind = spec.kind_at(i, j);
            lookup.insert((index, i, j), NodeRef::Edge(edges.len()));
            edges.push(NodeRecord { patch: index, i, j, kind });
        }
        let aggregate_nodes = aggregate_sets(&spec, &interior[interior_range.clone()], start);
        patches.push(Patch {
            slot,
            p,
            q,
            spec,
            centre: (p as f64 * macro_delta, q as f64 * macro_delta),
            interior: interior_range,
            edges: estart..edges.len(),
            aggregate_nodes,
        });
    }

    let mut scheme = PatchScheme {
        params,
        wave,
        layout,
        layers,
        fill,
        patches,
        interior,
        edges,
        lookup,
        stencils: Vec::new(),
    };
    scheme.stencils = scheme.assemble_stencils()?;
    Ok(scheme)
}

/// Non-absent lattice nodes in the edge bands of a window: `normal` layers
/// beyond each side, extended `tangential` nodes past the corners.
fn edge_band(spec: &MicroGridSpec, layers: EdgeLayerSpec) -> Vec<(i64, i64)> {
    let (mx, my) = (spec.mx as i64, spec.my as i64);
    let (nl, tl) = (layers.normal as i64, layers.tangential as i64);
    let mut set = BTreeSet::new();
    let normal_x: Vec<i64> = (1 - nl..=0).chain(mx..mx + nl).collect();
    let normal_y: Vec<i64> = (1 - nl..=0).chain(my..my + nl).collect();
    for &i in &normal_x {
        for j in 1 - tl..my + tl {
            set.insert((i, j));
        }
    }
    for &j in &normal_y {
        for i in 1 - tl..mx + tl {
            set.insert((i, j));
        }
    }
    // Field-major like the interior ordering.
    let mut out = Vec::with_capacity(set.len());
    for field in NodeKind::FIELDS {
        out.extend(set.iter().copied().filter(|&(i, j)| spec.kind_at(i, j) == field));
    }
    out
}

/// Interior indices whose mean is each field's aggregate: the centre node for
/// the centred field, otherwise the like-kind nodes at minimal Chebyshev
/// distance from the window centre.
fn aggregate_sets(spec: &MicroGridSpec, nodes: &[NodeRecord], offset: usize) -> [Vec<usize>; 3] {
    let mut out: [Vec<usize>; 3] = Default::default();
    for field in NodeKind::FIELDS {
        let f = field.field_index().unwrap();
        // Doubled coordinates keep half-integer centres exact.
        let dist = |r: &NodeRecord| (2 * r.i - spec.mx as i64).abs().max((2 * r.j - spec.my as i64).abs());
        let best = nodes.iter().filter(|r| r.kind == field).map(dist).min();
        if let Some(best) = best {
            out[f] = nodes
                .iter()
                .enumerate()
                .filter(|(_, r)| r.kind == field && dist(r) == best)
                .map(|(k, _)| offset + k)
                .collect();
        }
    }
    out
}

impl PatchScheme {
    pub fn interior_len(&self) -> usize {
        self.interior.len()
    }

    pub fn edge_len(&self) -> usize {
        self.edges.len()
    }

    pub fn cells(&self) -> usize {
        self.params.cells_per_axis().pow(2)
    }

    /// Full-domain interior state length `(N²/4) n_p^i`.
    pub fn total_interior_len(&self) -> usize {
        self.cells() * self.interior_len()
    }

    pub fn total_edge_len(&self) -> usize {
        self.cells() * self.edge_len()
    }

    pub fn node_ref(&self, patch: usize, i: i64, j: i64) -> Option<NodeRef> {
        self.lookup.get(&(patch, i, j)).copied()
    }

    /// Physical position of a node of `patch`, relative to the macro-cell origin.
    pub fn position(&self, patch: usize, i: i64, j: i64) -> (f64, f64) {
        let pt = &self.patches[patch];
        let (ox, oy) = pt.spec.offset(i, j);
        let d = self.params.delta();
        (pt.centre.0 + ox * d, pt.centre.1 + oy * d)
    }

    pub fn edge_position(&self, e: usize) -> (f64, f64) {
        let r = self.edges[e];
        self.position(r.patch, r.i, r.j)
    }

    pub fn interior_position(&self, k: usize) -> (f64, f64) {
        let r = self.interior[k];
        self.position(r.patch, r.i, r.j)
    }

    /// Per-cell and total node counts.
    pub fn counts(&self) -> SchemeCounts {
        let per_patch_interior = self
            .patches
            .iter()
            .map(|p| {
                let mut c = [0; 3];
                for r in &self.interior[p.interior.clone()] {
                    c[r.kind.field_index().unwrap()] += 1;
                }
                c
            })
            .collect();
        SchemeCounts {
            interior_per_cell: self.interior_len(),
            edge_per_cell: self.edge_len(),
            interior_total: self.total_interior_len(),
            edge_total: self.total_edge_len(),
            per_patch_interior,
        }
    }

    pub fn describe(&self) -> SchemeDescription {
        SchemeDescription {
            params: self.params,
            wave: self.wave,
            layout: self.layout.to_string(),
            parity: self.layout.parity.to_string(),
            id: self.layout.id().id,
            layers: self.layers.to_string(),
            centred: self.layout.is_centred(),
            symmetric_only: self.layout.is_symmetric_only(),
            counts: self.counts(),
            delta: self.params.delta(),
            macro_delta: self.params.macro_delta(),
            patch_width: self.params.patch_width(),
        }
    }

    /// The sparse one-cell operator: `d/dt x_i[r] = Σ coef · source`.
    pub fn stencil(&self, row: usize) -> &[(NodeRef, f64)] {
        &self.stencils[row]
    }

    fn assemble_stencils(&self) -> Result<Vec<Vec<(NodeRef, f64)>>> {
        use NodeKind::{H, U, V};
        let d = self.params.delta();
        let d1 = 1.0 / (2.0 * d);
        let visc = self.wave.c_v / (4.0 * d * d);
        let mut out = Vec::with_capacity(self.interior.len());
        for (row, rec) in self.interior.iter().enumerate() {
            let mut terms: Vec<(i64, i64, NodeKind, f64)> = Vec::new();
            match rec.kind {
                H => {
                    terms.extend([(1, 0, U, -d1), (-1, 0, U, d1), (0, 1, V, -d1), (0, -1, V, d1)]);
                }
                U | V => {
                    let (a, b) = if rec.kind == U { (1, 0) } else { (0, 1) };
                    terms.extend([(a, b, H, -d1), (-a, -b, H, d1)]);
                    if self.wave.c_v != 0.0 {
                        for (di, dj) in [(2, 0), (-2, 0), (0, 2), (0, -2)] {
                            terms.push((di, dj, rec.kind, visc));
                        }
                    }
                }
                NodeKind::Absent => unreachable!("interior nodes carry a field"),
            }
            let mut row_terms: Vec<(NodeRef, f64)> = Vec::new();
            let own_coef = if rec.kind == H { 0.0 } else { -self.wave.c_d - 4.0 * visc };
            if own_coef != 0.0 {
                row_terms.push((NodeRef::Interior(row), own_coef));
            }
            for (di, dj, want, coef) in terms {
                let (ti, tj) = (rec.i + di, rec.j + dj);
                debug_assert_eq!(self.patches[rec.patch].spec.kind_at(ti, tj), want);
                match self.node_ref(rec.patch, ti, tj) {
                    Some(r) => row_terms.push((r, coef)),
                    None => {
                        for (r, w) in self.extrapolate(rec, ti, tj)? {
                            row_terms.push((r, coef * w));
                        }
                    }
                }
            }
            out.push(merge_terms(row_terms));
        }
        Ok(out)
    }

    /// Weights expressing a missing stencil target through like-kind nodes
    /// stepping back towards the patch.
    fn extrapolate(&self, rec: &NodeRecord, ti: i64, tj: i64) -> Result<Vec<(NodeRef, f64)>> {
        let spec = &self.patches[rec.patch].spec;
        let missing = || {
            Error::InsufficientLayers(format!(
                "{} node ({}, {}) of patch {} needs ({ti}, {tj}) which lies beyond the {} edge layers",
                rec.kind,
                rec.i,
                rec.j,
                spec.edge_type,
                self.layers
            ))
        };
        let order = match self.fill {
            EdgeFill::Coupled => return Err(missing()),
            EdgeFill::ExtrapolateConstant => 1,
            EdgeFill::ExtrapolateLinear => 2,
        };
        let (mx, my) = (spec.mx as i64, spec.my as i64);
        let si = if ti < 1 { 2 } else if ti >= mx { -2 } else { 0 };
        let sj = if tj < 1 { 2 } else if tj >= my { -2 } else { 0 };
        let step = |k: i64| self.node_ref(rec.patch, ti + k * si, tj + k * sj).ok_or_else(missing);
        Ok(if order == 1 {
            vec![(step(1)?, 1.0)]
        } else {
            vec![(step(1)?, 2.0), (step(2)?, -1.0)]
        })
    }

    /// One-cell derivative `A_int x_i + A_edge x_e` for real or complex values.
    pub fn rhs_cell<T>(&self, xi: &[T], xe: &[T]) -> Vec<T>
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        assert_eq!(xi.len(), self.interior_len());
        assert_eq!(xe.len(), self.edge_len());
        self.stencils
            .iter()
            .map(|row| {
                row.iter().fold(T::default(), |acc, &(r, c)| {
                    acc + match r {
                        NodeRef::Interior(k) => xi[k],
                        NodeRef::Edge(k) => xe[k],
                    } * c
                })
            })
            .collect()
    }

    /// Derivative of the full interior state given the full edge vector.
    pub fn rhs_patch(&self, x_i: &[f64], x_e: &[f64]) -> Vec<f64> {
        let (ni, ne) = (self.interior_len(), self.edge_len());
        assert_eq!(x_i.len(), self.total_interior_len());
        assert_eq!(x_e.len(), self.total_edge_len());
        let mut out = Vec::with_capacity(x_i.len());
        for c in 0..self.cells() {
            out.extend(self.rhs_cell(&x_i[c * ni..(c + 1) * ni], &x_e[c * ne..(c + 1) * ne]));
        }
        out
    }

    /// Aggregate of field `f` of `patch` from a one-cell interior vector.
    pub fn aggregate<T>(&self, xi: &[T], patch: usize, f: usize) -> Option<T>
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let nodes = &self.patches[patch].aggregate_nodes[f];
        if nodes.is_empty() {
            return None;
        }
        let w = 1.0 / nodes.len() as f64;
        Some(nodes.iter().fold(T::default(), |acc, &k| acc + xi[k] * w))
    }

    /// Aggregates of all patches of one cell, `[patch][field]`.
    pub fn aggregate_values<T>(&self, xi: &[T]) -> Vec<[Option<T>; 3]>
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        (0..self.patches.len())
            .map(|p| [self.aggregate(xi, p, 0), self.aggregate(xi, p, 1), self.aggregate(xi, p, 2)])
            .collect()
    }
}

fn merge_terms(mut terms: Vec<(NodeRef, f64)>) -> Vec<(NodeRef, f64)> {
    let key = |r: &NodeRef| match *r {
        NodeRef::Interior(k) => (0, k),
        NodeRef::Edge(k) => (1, k),
    };
    terms.sort_by_key(|(r, _)| key(r));
    let mut out: Vec<(NodeRef, f64)> = Vec::with_capacity(terms.len());
    for (r, c) in terms {
        match out.last_mut() {
            Some((last, acc)) if *last == r => *acc += c,
            _ => out.push((r, c)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

/// Interior nodes per macro-cell of the layout `uuvv,hhvv,uuhh,----` (the
/// three-patch centred layout when `n/2` is odd), `9n²/4 − 4n + 2`.
pub fn centred_interior_per_cell(n: usize) -> usize {
    9 * n * n / 4 + 2 - 4 * n
}

/// Edge nodes per macro-cell of the layout `uuvv,hhvv,uuhh,----` with `n2t0` layers, `18n − 16`.
pub fn centred_n2t0_edges_per_cell(n: usize) -> usize {
    18 * n - 16
}

/// Edge nodes per macro-cell and in total for any scheme configuration.
pub fn edge_count(params: GridParams, layout: PatchGridLayout, layers: EdgeLayerSpec) -> Result<(usize, usize)> {
    let mut per_cell = 0;
    for (_, e) in layout.occupied() {
        per_cell += edge_band(&MicroGridSpec::new(params.n, e)?, layers).len();
    }
    Ok((per_cell, per_cell * params.cells_per_axis().pow(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Parity;
    use crate::micro::{rhs_staggered, MicroGrid};
    use std::f64::consts::TAU;

    fn centred(n: usize) -> PatchGridLayout {
        let s = if Parity::of(n) == Parity::Odd { "uuvv,hhvv,uuhh,----" } else { "hhhh,uuhh,hhvv,----" };
        PatchGridLayout::parse(s, Parity::of(n)).unwrap()
    }

    fn scheme(n: usize, big_n: usize, layers: EdgeLayerSpec, wave: WaveParams) -> PatchScheme {
        build_scheme(GridParams::new(TAU, big_n, n, 0.1).unwrap(), centred(n), layers, wave).unwrap()
    }

    #[test]
    fn layer_spec_parsing() {
        assert_eq!("n3t2".parse::<EdgeLayerSpec>().unwrap(), EdgeLayerSpec::N3T2);
        assert_eq!(EdgeLayerSpec::N2T0.to_string(), "n2t0");
        for bad in ["", "n0t0", "x1t0", "n1", "n1tx"] {
            assert!(bad.parse::<EdgeLayerSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn param_validation() {
        assert!(GridParams::new(TAU, 10, 6, 0.6).is_err());
        assert!(GridParams::new(TAU, 9, 6, 0.1).is_err());
        assert!(GridParams::new(TAU, 10, 5, 0.1).is_err());
        let g = GridParams::new(TAU, 10, 6, 0.01).unwrap();
        assert!((g.delta() - TAU / 3000.0).abs() < 1e-18);
        assert_eq!(g.resolved_modes().len(), 25);
    }

    #[test]
    fn interior_counts() {
        for n in [4, 6, 8, 10, 12, 14] {
            let layout = PatchGridLayout::parse("uuvv,hhvv,uuhh,----", Parity::of(n)).unwrap();
            let g = GridParams::new(TAU, 6, n, 0.1).unwrap();
            let s = build_scheme(g, layout, EdgeLayerSpec::N2T0, WaveParams::ideal()).unwrap();
            assert_eq!(s.interior_len(), centred_interior_per_cell(n), "n = {n}");
        }
        // The even-parity centred layout hhhh,uuhh,hhvv has fewer nodes.
        assert_eq!(scheme(4, 6, EdgeLayerSpec::N1T0, WaveParams::ideal()).interior_len(), 19);
        let s = scheme(6, 6, EdgeLayerSpec::N1T0, WaveParams::ideal());
        assert_eq!(s.counts().per_patch_interior.iter().map(|c| c.iter().sum::<usize>()).collect::<Vec<_>>(), [21, 19, 19]);
        assert_eq!(s.total_interior_len(), 531);
    }

    #[test]
    fn edge_counts() {
        let g = GridParams::new(TAU, 6, 6, 0.1).unwrap();
        assert_eq!(edge_count(g, centred(6), EdgeLayerSpec::N1T0).unwrap().1, 360);
        for n in [6, 10, 14] {
            let g = GridParams::new(TAU, 6, n, 0.1).unwrap();
            assert_eq!(edge_count(g, centred(n), EdgeLayerSpec::N2T0).unwrap().0, centred_n2t0_edges_per_cell(n));
        }
    }

    #[test]
    fn viscosity_needs_two_layers() {
        let damped = WaveParams::new(1e-6, 1e-4, TAU).unwrap();
        let g = GridParams::new(TAU, 6, 6, 0.1).unwrap();
        let err = build_scheme(g, centred(6), EdgeLayerSpec::N1T0, damped).unwrap_err();
        assert!(matches!(err, Error::InsufficientLayers(_)));
        build_scheme(g, centred(6), EdgeLayerSpec::N1T0, WaveParams::new(0.1, 0.0, TAU).unwrap()).unwrap();
        build_scheme(g, centred(6), EdgeLayerSpec::N2T0, damped).unwrap();
        build_scheme_with_fill(g, centred(6), EdgeLayerSpec::N1T0, damped, EdgeFill::ExtrapolateLinear).unwrap();
    }

    #[test]
    fn parity_mismatch_rejected() {
        let g = GridParams::new(TAU, 6, 4, 0.1).unwrap();
        assert!(build_scheme(g, centred(6), EdgeLayerSpec::N1T0, WaveParams::ideal()).is_err());
    }

    #[test]
    fn constants_steady_and_zero_zero() {
        let s = scheme(6, 6, EdgeLayerSpec::N2T0, WaveParams::new(0.0, 0.3, TAU).unwrap());
        let d = s.rhs_cell(&vec![1.7; s.interior_len()], &vec![1.7; s.edge_len()]);
        assert!(d.iter().all(|x| x.abs() < 1e-9));
        let d = s.rhs_cell(&vec![0.0; s.interior_len()], &vec![0.0; s.edge_len()]);
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn aggregates() {
        let s = scheme(6, 6, EdgeLayerSpec::N1T0, WaveParams::ideal());
        // h-centred patch: h aggregate is the single centre node.
        let h = &s.patches[0].aggregate_nodes[0];
        assert_eq!(h.len(), 1);
        let r = s.interior[h[0]];
        assert_eq!((r.i, r.j, r.kind), (3, 3, NodeKind::H));
        let xi = vec![2.5; s.interior_len()];
        for a in s.aggregate_values(&xi) {
            for v in a {
                assert!((v.unwrap() - 2.5).abs() < 1e-15);
            }
        }
        // Linear field: symmetric closest sets return the centre value.
        let xi: Vec<f64> = (0..s.interior_len()).map(|k| s.interior_position(k).0).collect();
        for (p, pt) in s.patches.iter().enumerate() {
            for f in 0..3 {
                assert!((s.aggregate(&xi, p, f).unwrap() - pt.centre.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn index_maps_are_bijective() {
        let s = scheme(6, 6, EdgeLayerSpec::N3T2, WaveParams::ideal());
        let mut seen_i = vec![false; s.interior_len()];
        let mut seen_e = vec![false; s.edge_len()];
        for (&(p, i, j), &r) in &s.lookup {
            match r {
                NodeRef::Interior(k) => {
                    assert!(!seen_i[k]);
                    seen_i[k] = true;
                    assert_eq!((s.interior[k].patch, s.interior[k].i, s.interior[k].j), (p, i, j));
                }
                NodeRef::Edge(k) => {
                    assert!(!seen_e[k]);
                    seen_e[k] = true;
                    assert_eq!((s.edges[k].patch, s.edges[k].i, s.edges[k].j), (p, i, j));
                }
            }
        }
        assert!(seen_i.iter().chain(&seen_e).all(|&b| b));
    }

    #[test]
    fn matches_full_domain_stencil_on_shared_nodes() {
        // Embed each patch window into a periodic full-domain grid with the
        // same δ, fill edges from it and compare derivatives node by node.
        let wave = WaveParams::new(0.1, 0.02, TAU).unwrap();
        let n = 6;
        let g = GridParams::new(TAU, 2, n, 0.5).unwrap();
        let s = build_scheme(g, centred(n), EdgeLayerSpec::N2T0, wave).unwrap();
        let full_n = 40;
        let grid = MicroGrid::staggered(full_n, full_n as f64 * g.delta()).unwrap();
        let local = WaveParams { l: grid.delta * full_n as f64, ..wave };
        let x: Vec<f64> = (0..grid.len()).map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let dx = rhs_staggered(&grid, &x, &local);
        let base = 10i64;
        let at = |r: &NodeRecord| {
            let (a, b) = s.patches[r.patch].spec.phase;
            grid.position(r.kind, base + r.i - a, base + r.j - b).unwrap()
        };
        for (p, pt) in s.patches.iter().enumerate() {
            let xi: Vec<f64> = s.interior.iter().map(|r| if r.patch == p { x[at(r)] } else { 0.0 }).collect();
            let xe: Vec<f64> = s.edges.iter().map(|r| x[at(r)]).collect();
            let d = s.rhs_cell(&xi, &xe);
            for k in pt.interior.clone() {
                let want = dx[at(&s.interior[k])];
                assert!((d[k] - want).abs() < 1e-9, "{:?}: {} vs {want}", s.interior[k], d[k]);
            }
        }
    }

    #[test]
    fn extrapolation_weights() {
        let wave = WaveParams::new(0.0, 0.1, TAU).unwrap();
        let g = GridParams::new(TAU, 6, 6, 0.1).unwrap();
        for (fill, want) in [(EdgeFill::ExtrapolateConstant, 0.0), (EdgeFill::ExtrapolateLinear, 0.0)] {
            let s = build_scheme_with_fill(g, centred(6), EdgeLayerSpec::N1T0, wave, fill).unwrap();
            let xi: Vec<f64> = (0..s.interior_len()).map(|_| 1.0).collect();
            let xe = vec![1.0; s.edge_len()];
            assert!(s.rhs_cell(&xi, &xe).iter().all(|v| (v - want).abs() < 1e-9));
        }
        // Linear extrapolation reproduces fields linear along the normal.
        let s = build_scheme_with_fill(g, centred(6), EdgeLayerSpec::N1T0, wave, EdgeFill::ExtrapolateLinear).unwrap();
        let full = build_scheme(g, centred(6), EdgeLayerSpec::N2T0, wave).unwrap();
        let f = |(x, y): (f64, f64)| 0.3 + 2.0 * x - y;
        let xi: Vec<f64> = (0..s.interior_len()).map(|k| f(s.interior_position(k))).collect();
        let a = s.rhs_cell(&xi, &(0..s.edge_len()).map(|k| f(s.edge_position(k))).collect::<Vec<_>>());
        let b = full.rhs_cell(&xi, &(0..full.edge_len()).map(|k| f(full.edge_position(k))).collect::<Vec<_>>());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}
