//! Spectral inter-patch coupling.
//!
//! Each field is interpolated from the aggregates of the patches that carry
//! it: the patches whose centre node is of that field's kind plus the patches
//! without any centre node (every patch when both kinds are absent). Each
//! carrier slot forms a uniform lattice of period `2Δ`. A carrier patch takes
//! that field's edge values from its own lattice; any other patch takes the
//! mean over carriers of each carrier lattice's trigonometric interpolant.
//! Interpolants are evaluated at the edge node's physical position.
//!
//! Two evaluation paths share this rule: [`couple_edges_fft`] transforms the
//! aggregate lattices of a full `N × N` patch grid, and
//! [`CouplingPlan::one_cell_edges`] evaluates a single macroscale Fourier
//! mode in closed form.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::NodeKind;
use crate::scheme::PatchScheme;

/// One interpolation source of an edge node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Source {
    pub patch: usize,
    pub field: usize,
    /// Displacement from the carrier's aggregate location to the edge node.
    pub disp: (f64, f64),
    pub weight: f64,
}

/// Precomputed interpolation sources of every edge node of one macro-cell.
#[derive(Clone, Debug)]
pub struct CouplingPlan {
    pub sources: Vec<Vec<Source>>,
    /// Macro-cells per axis.
    pub cells: usize,
    pub l: f64,
}

/// Patches whose aggregates feed field `field`: those centred on `field`
/// together with those that have no centre node; every patch when that set is
/// empty.
pub fn carriers(scheme: &PatchScheme, field: NodeKind) -> Vec<usize> {
    let set: Vec<usize> = scheme
        .patches
        .iter()
        .enumerate()
        .filter(|(_, p)| p.spec.centre.is_none() || p.spec.centre == Some(field))
        .map(|(k, _)| k)
        .collect();
    if set.is_empty() {
        (0..scheme.patches.len()).collect()
    } else {
        set
    }
}

impl CouplingPlan {
    pub fn new(scheme: &PatchScheme) -> Result<Self> {
        let carrier_sets: Vec<Vec<usize>> = NodeKind::FIELDS.iter().map(|&f| carriers(scheme, f)).collect();
        let mut sources = Vec::with_capacity(scheme.edge_len());
        for (e, rec) in scheme.edges.iter().enumerate() {
            let f = rec.kind.field_index().expect("edge nodes carry a field");
            let (x, y) = scheme.edge_position(e);
            let own = [rec.patch];
            let set: &[usize] = if carrier_sets[f].contains(&rec.patch) { &own } else { &carrier_sets[f] };
            let mut list = Vec::with_capacity(set.len());
            for &c in set {
                if scheme.patches[c].aggregate_nodes[f].is_empty() {
                    return Err(Error::Coupling(format!(
                        "patch {} has no {} aggregate for {} edge node ({}, {}) of patch {}",
                        scheme.patches[c].spec.edge_type,
                        rec.kind,
                        rec.kind,
                        rec.i,
                        rec.j,
                        scheme.patches[rec.patch].spec.edge_type
                    )));
                }
                let centre = scheme.patches[c].centre;
                list.push(Source {
                    patch: c,
                    field: f,
                    disp: (x - centre.0, y - centre.1),
                    weight: 1.0 / set.len() as f64,
                });
            }
            sources.push(list);
        }
        Ok(Self { sources, cells: scheme.params.cells_per_axis(), l: scheme.params.l })
    }

    /// Per-axis interpolation factor of integer mode `m` shifted by `d`; the
    /// Nyquist mode of an even carrier lattice takes the real symmetric split.
    fn factor(&self, m: i64, d: f64) -> Complex64 {
        let theta = TAU * m as f64 / self.l * d;
        if self.cells.is_multiple_of(2) && m.unsigned_abs() as usize == self.cells / 2 {
            Complex64::new(theta.cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, theta)
        }
    }

    /// Edge values of one macro-cell for the macroscale mode with integer
    /// wavenumber `(kx, ky)`, whose reference-cell interior values are `xi`.
    pub fn one_cell_edges(&self, scheme: &PatchScheme, k: (i64, i64), xi: &[Complex64]) -> Vec<Complex64> {
        let aggregates = scheme.aggregate_values(xi);

        self.sources
            .iter()
            .map(|list| {
                list.iter()
                    .map(|s| {
                        let a = aggregates[s.patch][s.field].expect("plan checked aggregates");
                        a * self.factor(k.0, s.disp.0) * self.factor(k.1, s.disp.1) * s.weight
                    })
                    .sum()
            })
            .collect()
    }
}

fn fft2(data: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    // Rows then columns of an `n × n` row-major array.
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

/// Signed integer mode of FFT bin `b` on a lattice of `n` samples.
fn signed_mode(b: usize, n: usize) -> i64 {
    if 2 * b > n {
        b as i64 - n as i64
    } else {
        b as i64
    }
}

/// Edge vector of the full patch grid from its interior state by 2D FFT
/// interpolation of each carrier's aggregate lattice.
pub fn couple_edges_fft(scheme: &PatchScheme, plan: &CouplingPlan, x_i: &[f64]) -> Vec<f64> {
    let m = plan.cells;
    let (ni, ne) = (scheme.interior_len(), scheme.edge_len());
    assert_eq!(x_i.len(), m * m * ni);
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(m);
    let inverse = planner.plan_fft_inverse(m);

    // Spectra of every (patch, field) aggregate lattice.
    let np = scheme.patches.len();
    let mut spectra = vec![Vec::new(); np * 3];
    for p in 0..np {
        for f in 0..3 {
            if scheme.patches[p].aggregate_nodes[f].is_empty() {
                continue;
            }
            let mut data: Vec<Complex64> = (0..m * m)
                .map(|c| Complex64::new(scheme.aggregate(&x_i[c * ni..(c + 1) * ni], p, f).unwrap(), 0.0))
                .collect();
            fft2(&mut data, m, &forward);
            spectra[p * 3 + f] = data;
        }
    }

    let scale = 1.0 / (m * m) as f64;
    let mut out = vec![0.0; m * m * ne];
    let mut work = vec![Complex64::new(0.0, 0.0); m * m];
    for (e, list) in plan.sources.iter().enumerate() {
        for s in list {
            let spec = &spectra[s.patch * 3 + s.field];
            for bi in 0..m {
                let fx = plan.factor(signed_mode(bi, m), s.disp.0);
                for bj in 0..m {
                    work[bi * m + bj] = spec[bi * m + bj] * fx * plan.factor(signed_mode(bj, m), s.disp.1);
                }
            }
            fft2(&mut work, m, &inverse);
            for c in 0..m * m {
                out[c * ne + e] += work[c].re * scale * s.weight;
            }
        }
    }
    out
}
