//! Full-domain collocated and staggered finite-difference models of the
//! weakly damped linear wave equations
//!
//! ```text
//! h_t = -u_x - v_y
//! u_t = -h_x - c_D u + c_V (u_xx + u_yy)
//! v_t = -h_y - c_D v + c_V (v_xx + v_yy)
//! ```
//!
//! on an `L`-periodic square, together with the 3×3 Fourier-symbol Jacobian of
//! the staggered model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{node_kind, NodeKind};
use crate::linalg::{self, CMat};

/// Physical coefficients and domain period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    /// Linear drag coefficient.
    pub c_d: f64,
    /// Viscosity coefficient.
    pub c_v: f64,
    /// Domain period.
    pub l: f64,
}

impl WaveParams {
    pub fn new(c_d: f64, c_v: f64, l: f64) -> Result<Self> {
        if !(c_d >= 0.0 && c_v >= 0.0 && l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "need c_D >= 0, c_V >= 0, L > 0 (got c_D={c_d}, c_V={c_v}, L={l})"
            )));
        }
        Ok(Self { c_d, c_v, l })
    }

    /// `c_D = c_V = 0` on the `2π` domain.
    pub fn ideal() -> Self {
        Self { c_d: 0.0, c_v: 0.0, l: std::f64::consts::TAU }
    }

    pub fn is_ideal(&self) -> bool {
        self.c_d == 0.0 && self.c_v == 0.0
    }

    /// Physical wavenumber of integer mode number `k` on this domain.
    pub fn wavenumber(&self, k: i64) -> f64 {
        std::f64::consts::TAU * k as f64 / self.l
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    Collocated,
    Staggered,
}

/// A periodic full-domain micro-grid.
///
/// State vectors are field-major (all `h`, then all `u`, then all `v`); within
/// a field, nodes are ordered by `i` then `j`.
#[derive(Clone, Debug)]
pub struct MicroGrid {
    pub kind: GridKind,
    /// Interval count per axis: `n` staggered intervals of width δ, or `n`
    /// collocated intervals of width 2δ.
    pub n: usize,
    pub delta: f64,
    /// `(i, j, kind)` in state order.
    nodes: Vec<(usize, usize, NodeKind)>,
    /// `index[kind][i * n + j]` = position in the state vector.
    index: [Vec<Option<usize>>; 3],
}

impl MicroGrid {
    /// Staggered grid of `n × n` intervals, `δ = L / n`; `h` on odd-odd nodes.
    pub fn staggered(n: usize, l: f64) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("staggered grid needs even n >= 2, got {n}")));
        }
        let mut nodes = Vec::with_capacity(3 * n * n / 4);
        for field in NodeKind::FIELDS {
            for i in 0..n {
                for j in 0..n {
                    if node_kind(i as i64, j as i64, (0, 0)) == field {
                        nodes.push((i, j, field));
                    }
                }
            }
        }
        Ok(Self::finish(GridKind::Staggered, n, l / n as f64, nodes))
    }

    /// Collocated grid of `n × n` intervals each `2δ` wide, `δ = L / (2n)`.
    pub fn collocated(n: usize, l: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("collocated grid needs n >= 1".into()));
        }
        let mut nodes = Vec::with_capacity(3 * n * n);
        for field in NodeKind::FIELDS {
            for i in 0..n {
                for j in 0..n {
                    nodes.push((i, j, field));
                }
            }
        }
        Ok(Self::finish(GridKind::Collocated, n, l / (2 * n) as f64, nodes))
    }

    fn finish(kind: GridKind, n: usize, delta: f64, nodes: Vec<(usize, usize, NodeKind)>) -> Self {
        let mut index = [vec![None; n * n], vec![None; n * n], vec![None; n * n]];
        for (pos, &(i, j, k)) in nodes.iter().enumerate() {
            index[k.field_index().unwrap()][i * n + j] = Some(pos);
        }
        Self { kind, n, delta, nodes, index }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[(usize, usize, NodeKind)] {
        &self.nodes
    }

    /// Position of field `kind` at periodic index `(i, j)`.
    pub fn position(&self, kind: NodeKind, i: i64, j: i64) -> Option<usize> {
        let n = self.n as i64;
        let (i, j) = (i.rem_euclid(n) as usize, j.rem_euclid(n) as usize);
        self.index[kind.field_index()?][i * self.n + j]
    }

    /// Physical coordinates of node `(i, j)`.
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        let step = match self.kind {
            GridKind::Staggered => self.delta,
            GridKind::Collocated => 2.0 * self.delta,
        };
        (i as f64 * step, j as f64 * step)
    }

    /// First-difference divisor, like-kind viscous reach and viscous divisor.
    fn difference_scales(&self) -> (f64, i64, f64) {
        let d = self.delta;
        match self.kind {
            GridKind::Staggered => (2.0 * d, 2, 4.0 * d * d),
            GridKind::Collocated => (4.0 * d, 1, 4.0 * d * d),
        }
    }

    /// Sparse rows `(column, coefficient)` of the linear right-hand side.
    fn stencil(&self, p: &WaveParams) -> Vec<Vec<(usize, f64)>> {
        use NodeKind::{H, U, V};
        let (spacing, reach, visc_div) = self.difference_scales();
        let d1 = 1.0 / spacing;
        let d2 = p.c_v / visc_div;
        let at = |k, i: usize, j: usize, di: i64, dj: i64| {
            self.position(k, i as i64 + di, j as i64 + dj).expect("lattice neighbour exists")
        };
        self.nodes
            .iter()
            .enumerate()
            .map(|(pos, &(i, j, kind))| {
                let mut row = Vec::new();
                match kind {
                    H => {
                        row.push((at(U, i, j, 1, 0), -d1));
                        row.push((at(U, i, j, -1, 0), d1));
                        row.push((at(V, i, j, 0, 1), -d1));
                        row.push((at(V, i, j, 0, -1), d1));
                    }
                    U | V => {
                        let (di, dj) = if kind == U { (1, 0) } else { (0, 1) };
                        row.push((at(H, i, j, di, dj), -d1));
                        row.push((at(H, i, j, -di, -dj), d1));
                        if p.c_d != 0.0 {
                            row.push((pos, -p.c_d));
                        }
                        if p.c_v != 0.0 {
                            for (a, b) in [(reach, 0), (-reach, 0), (0, reach), (0, -reach)] {
                                row.push((at(kind, i, j, a, b), d2));
                            }
                            row.push((pos, -4.0 * d2));
                        }
                    }
                    NodeKind::Absent => unreachable!(),
                }
                row
            })
            .collect()
    }
}

/// Sparse matrix as rows of `(column, value)`; duplicate columns are summed.
#[derive(Clone, Debug)]
pub struct SparseRows {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(c, v)| v * x[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = linalg::zeros(self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] += Complex64::new(v, 0.0);
            }
        }
        m
    }
}

/// Right-hand side of the staggered model:
/// `dh/dt = -(u[i+1,j]-u[i-1,j])/(2δ) - (v[i,j+1]-v[i,j-1])/(2δ)`,
/// `du/dt = -(h[i+1,j]-h[i-1,j])/(2δ) - c_D u + c_V Δ₂u` with the second
/// difference taken over like-kind neighbours two nodes away (spacing 2δ).
pub fn rhs_staggered(grid: &MicroGrid, x: &[f64], p: &WaveParams) -> Vec<f64> {
    assert_eq!(grid.kind, GridKind::Staggered);
    rhs_direct(grid, x, p)
}

/// Right-hand side of the collocated model: central differences over `2δ`
/// intervals (`/(4δ)` for first derivatives, `/(2δ)²` for second).
pub fn rhs_collocated(grid: &MicroGrid, x: &[f64], p: &WaveParams) -> Vec<f64> {
    assert_eq!(grid.kind, GridKind::Collocated);
    rhs_direct(grid, x, p)
}

fn rhs_direct(grid: &MicroGrid, x: &[f64], p: &WaveParams) -> Vec<f64> {
    use NodeKind::{H, U, V};
    assert_eq!(x.len(), grid.len());
    let (spacing, reach, visc_div) = grid.difference_scales();
    let visc = p.c_v / visc_div;
    let val = |k: NodeKind, i: i64, j: i64| x[grid.position(k, i, j).expect("node")];
    grid.nodes
        .iter()
        .map(|&(i, j, kind)| {
            let (i, j) = (i as i64, j as i64);
            match kind {
                H => {
                    -(val(U, i + 1, j) - val(U, i - 1, j)) / spacing - (val(V, i, j + 1) - val(V, i, j - 1)) / spacing
                }
                U | V => {
                    let (di, dj) = if kind == U { (1, 0) } else { (0, 1) };
                    let own = val(kind, i, j);
                    let mut d = -(val(H, i + di, j + dj) - val(H, i - di, j - dj)) / spacing - p.c_d * own;
                    if p.c_v != 0.0 {
                        let lap = val(kind, i + reach, j) + val(kind, i - reach, j) + val(kind, i, j + reach)
                            + val(kind, i, j - reach)
                            - 4.0 * own;
                        d += visc * lap;
                    }
                    d
                }
                NodeKind::Absent => unreachable!(),
            }
        })
        .collect()
}

/// Largest grid for which dense assembly is allowed.
pub const MAX_DENSE_N: usize = 48;

/// Matrix `M` with `rhs(x) = M x` for either grid kind.
pub fn assemble_full_jacobian(grid: &MicroGrid, p: &WaveParams) -> Result<SparseRows> {
    if grid.n > MAX_DENSE_N {
        return Err(Error::TooLarge(format!("n = {} exceeds dense limit {MAX_DENSE_N}", grid.n)));
    }
    Ok(SparseRows { n: grid.len(), rows: grid.stencil(p) })
}

/// Ideal-wave frequency of the staggered model, `sqrt(sin²(kxδ) + sin²(kyδ)) / δ`.
pub fn omega_staggered(kx: f64, ky: f64, delta: f64) -> f64 {
    ((kx * delta).sin().powi(2) + (ky * delta).sin().powi(2)).sqrt() / delta
}

/// Ideal-wave frequency of the collocated model, `sqrt(sin²(2kxδ) + sin²(2kyδ)) / (2δ)`.
pub fn omega_collocated(kx: f64, ky: f64, delta: f64) -> f64 {
    ((2.0 * kx * delta).sin().powi(2) + (2.0 * ky * delta).sin().powi(2)).sqrt() / (2.0 * delta)
}

/// Fourier symbol of the staggered model for physical wavenumber `(kx, ky)`.
pub fn jacobian_mu(kx: f64, ky: f64, delta: f64, p: &WaveParams) -> [[Complex64; 3]; 3] {
    let sx = Complex64::new(0.0, -(kx * delta).sin() / delta);
    let sy = Complex64::new(0.0, -(ky * delta).sin() / delta);
    let w = omega_staggered(kx, ky, delta);
    let d = Complex64::new(-p.c_d - p.c_v * w * w, 0.0);
    let z = Complex64::new(0.0, 0.0);
    [[z, sx, sy], [sx, d, z], [sy, z, d]]
}

/// Eigenvalues of [`jacobian_mu`] computed numerically.
pub fn eig_mu(kx: f64, ky: f64, delta: f64, p: &WaveParams) -> Result<[Complex64; 3]> {
    let j = jacobian_mu(kx, ky, delta, p);
    let m = faer::Mat::from_fn(3, 3, |r, c| j[r][c]);
    let ev = linalg::eigenvalues(&m)?;
    Ok([ev[0], ev[1], ev[2]])
}

/// Closed form of [`eig_mu`]: `-(c_D + c_V ω²)` and
/// `-(c_D + c_V ω²)/2 ± i sqrt(ω² - ((c_D + c_V ω²)/2)²)`.
pub fn eig_mu_closed_form(kx: f64, ky: f64, delta: f64, p: &WaveParams) -> [Complex64; 3] {
    let w = omega_staggered(kx, ky, delta);
    let d = p.c_d + p.c_v * w * w;
    let disc = Complex64::new(w * w - (d / 2.0).powi(2), 0.0).sqrt();
    let half = Complex64::new(-d / 2.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [Complex64::new(-d, 0.0), half + i * disc, half - i * disc]
}

/// Integer mode numbers resolved along one axis by a staggered grid of `n`
/// intervals: `-(n/2) < 2k <= n/2`.
pub fn resolved_modes(n: usize) -> Vec<i64> {
    let half = n as i64 / 2;
    (-half..=half).filter(|&k| -half < 2 * k && 2 * k <= half).collect()
}

/// Union over resolved wavenumbers of [`eig_mu`], for an `n × n` staggered grid.
pub fn spectrum_union(n: usize, p: &WaveParams) -> Result<Vec<Complex64>> {
    let delta = p.l / n as f64;
    let modes = resolved_modes(n);
    let mut out = Vec::with_capacity(3 * modes.len() * modes.len());
    for &kx in &modes {
        for &ky in &modes {
            out.extend(eig_mu(p.wavenumber(kx), p.wavenumber(ky), delta, p)?);
        }
    }
    Ok(out)
}

/// One CSV row per eigenvalue: `k_x,k_y,re,im`.
pub fn spectrum_csv(n: usize, p: &WaveParams, modes: &[i64]) -> Result<String> {
    let delta = p.l / n as f64;
    let mut s = String::from("k_x,k_y,re,im\n");
    for &kx in modes {
        for &ky in modes {
            for z in eig_mu(p.wavenumber(kx), p.wavenumber(ky), delta, p)? {
                s.push_str(&format!("{kx},{ky},{:.17e},{:.17e}\n", z.re, z.im));
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        v
    }

    #[test]
    fn state_counts_match() {
        for n in [4, 6, 12] {
            assert_eq!(MicroGrid::staggered(n, TAU).unwrap().len(), 3 * n * n / 4);
            assert_eq!(MicroGrid::collocated(n / 2, TAU).unwrap().len(), 3 * n * n / 4);
        }
    }

    #[test]
    fn constants_are_steady_and_zero_is_zero() {
        let p = WaveParams::ideal();
        let g = MicroGrid::staggered(8, TAU).unwrap();
        assert!(rhs_staggered(&g, &vec![2.5; g.len()], &p).iter().all(|d| d.abs() < 1e-12));
        assert!(rhs_staggered(&g, &vec![0.0; g.len()], &p).iter().all(|&d| d == 0.0));
        let c = MicroGrid::collocated(5, TAU).unwrap();
        assert!(rhs_collocated(&c, &vec![-1.0; c.len()], &p).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn collocated_difference_quotient() {
        let p = WaveParams::ideal();
        let g = MicroGrid::collocated(16, TAU).unwrap();
        let d = g.delta;
        let x: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&(i, j, k)| if k == NodeKind::U { g.coords(i, j).0.sin() } else { 0.0 })
            .collect();
        let out = rhs_collocated(&g, &x, &p);
        for (pos, &(i, j, k)) in g.nodes().iter().enumerate() {
            if k == NodeKind::H {
                let want = -g.coords(i, j).0.cos() * (2.0 * d).sin() / (2.0 * d);
                assert!((out[pos] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn drag_only_on_uniform_velocity() {
        let p = WaveParams::new(0.3, 0.0, TAU).unwrap();
        let g = MicroGrid::collocated(4, TAU).unwrap();
        let x: Vec<f64> = g.nodes().iter().map(|&(_, _, k)| if k == NodeKind::U { 1.0 } else { 0.0 }).collect();
        let out = rhs_collocated(&g, &x, &p);
        for (pos, &(_, _, k)) in g.nodes().iter().enumerate() {
            let want = if k == NodeKind::U { -0.3 } else { 0.0 };
            assert!((out[pos] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn matrix_reproduces_rhs() {
        let p = WaveParams::new(0.01, 0.002, TAU).unwrap();
        for grid in [MicroGrid::staggered(8, TAU).unwrap(), MicroGrid::collocated(5, TAU).unwrap()] {
            let m = assemble_full_jacobian(&grid, &p).unwrap();
            let x: Vec<f64> = (0..grid.len()).map(|k| ((k * 37 % 11) as f64 - 5.0) * 0.1).collect();
            let direct = match grid.kind {
                GridKind::Staggered => rhs_staggered(&grid, &x, &p),
                GridKind::Collocated => rhs_collocated(&grid, &x, &p),
            };
            for (a, b) in m.apply(&x).iter().zip(&direct) {
                assert!((a - b).abs() < 1e-11, "{a} vs {b}");
            }
        }
        assert!(assemble_full_jacobian(&MicroGrid::staggered(50, TAU).unwrap(), &p).is_err());
    }

    #[test]
    fn drag_block_diagonal() {
        let p = WaveParams::new(0.7, 0.0, TAU).unwrap();
        let g = MicroGrid::staggered(6, TAU).unwrap();
        let m = assemble_full_jacobian(&g, &p).unwrap();
        for (r, &(_, _, k)) in g.nodes().iter().enumerate() {
            if k != NodeKind::H {
                let own: f64 = m.rows[r].iter().filter(|(c, _)| *c == r).map(|(_, v)| v).sum();
                assert_eq!(own, -0.7);
            }
        }
    }

    #[test]
    fn fourier_mode_matches_symbol() {
        let p = WaveParams::new(0.05, 0.01, TAU).unwrap();
        let n = 12;
        let g = MicroGrid::staggered(n, TAU).unwrap();
        let (kx, ky) = (2.0, -1.0);
        let amp = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5), Complex64::new(0.7, -0.4)];
        let mode: Vec<Complex64> = g
            .nodes()
            .iter()
            .map(|&(i, j, k)| {
                let (x, y) = g.coords(i, j);
                amp[k.field_index().unwrap()] * Complex64::new(0.0, kx * x + ky * y).exp()
            })
            .collect();
        let re: Vec<f64> = mode.iter().map(|z| z.re).collect();
        let im: Vec<f64> = mode.iter().map(|z| z.im).collect();
        let (dr, di) = (rhs_staggered(&g, &re, &p), rhs_staggered(&g, &im, &p));
        let jm = jacobian_mu(kx, ky, g.delta, &p);
        for (pos, &(i, j, k)) in g.nodes().iter().enumerate() {
            let f = k.field_index().unwrap();
            let (x, y) = g.coords(i, j);
            let want: Complex64 = (0..3).map(|c| jm[f][c] * amp[c]).sum::<Complex64>()
                * Complex64::new(0.0, kx * x + ky * y).exp();
            assert!((Complex64::new(dr[pos], di[pos]) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn symbol_at_zero_and_ideal_structure() {
        let p = WaveParams::new(0.2, 0.1, TAU).unwrap();
        let ev = sorted(eig_mu(0.0, 0.0, 0.1, &p).unwrap().to_vec());
        let re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        let mut re_sorted = re.clone();
        re_sorted.sort_by(f64::total_cmp);
        assert!((re_sorted[0] + 0.2).abs() < 1e-14 && (re_sorted[1] + 0.2).abs() < 1e-14 && re_sorted[2].abs() < 1e-14);
        let ideal = WaveParams::ideal();
        for (kx, ky) in [(1.0, 0.0), (3.0, -2.0), (7.0, 5.0)] {
            let j = jacobian_mu(kx, ky, 0.05, &ideal);
            for r in 0..3 {
                for c in 0..3 {
                    assert!((j[r][c] + j[c][r].conj()).norm() < 1e-15);
                }
            }
            assert!(eig_mu(kx, ky, 0.05, &ideal).unwrap().iter().all(|z| z.re.abs() < 1e-12));
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn table_frequencies() {
        let p = WaveParams::ideal();
        let delta = TAU / 3000.0;
        for ((kx, ky), w) in [((1.0, 0.0), 1.0), ((1.0, 1.0), 1.4142), ((2.0, 0.0), 2.0), ((2.0, 1.0), 2.2361), ((2.0, 2.0), 2.8284)] {
            let ev = eig_mu(kx, ky, delta, &p).unwrap();
            let top = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            assert!((top - w).abs() < 5e-5, "{kx},{ky}: {top}");
        }
    }

    #[test]
    fn damped_pair_real_part() {
        let p = WaveParams::new(1e-6, 1e-4, TAU).unwrap();
        let delta = TAU / 420.0;
        let ev = eig_mu(1.0, 0.0, delta, &p).unwrap();
        let w = omega_staggered(1.0, 0.0, delta);
        let want = -(1e-6 + 1e-4 * w * w) / 2.0;
        assert!((want + 5.05e-5).abs() < 1e-7);
        let pair: Vec<&Complex64> = ev.iter().filter(|z| z.im.abs() > 0.5).collect();
        assert_eq!(pair.len(), 2);
        for z in pair {
            assert!((z.re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_agrees_with_numeric() {
        for p in [WaveParams::ideal(), WaveParams::new(1e-6, 1e-4, TAU).unwrap(), WaveParams::new(0.5, 0.3, TAU).unwrap()] {
            for (kx, ky) in [(0.0, 0.0), (1.0, 0.0), (2.0, -3.0), (20.0, 11.0)] {
                let a = eig_mu(kx, ky, 0.03, &p).unwrap();
                let b = eig_mu_closed_form(kx, ky, 0.03, &p);
                assert!(linalg::multiset_distance(&a, &b) < 1e-10);
            }
        }
    }

    #[test]
    fn staggered_less_dispersive() {
        let delta = 0.01;
        for step in 1..150 {
            let kd = step as f64 * 0.01;
            let k = kd / delta;
            let stag = (omega_staggered(k, 0.0, delta) - k).abs();
            let coll = (omega_collocated(k, 0.0, delta) - k).abs();
            assert!(stag < coll, "kδ = {kd}");
        }
    }

    #[test]
    fn resolved_mode_sets() {
        assert_eq!(resolved_modes(12), vec![-2, -1, 0, 1, 2, 3]);
        assert_eq!(resolved_modes(10), vec![-2, -1, 0, 1, 2]);
        assert_eq!(resolved_modes(4), vec![0, 1]);
    }
}
