//! One-cell eigen-analysis of a patch scheme: Jacobian assembly by column
//! probing, spectra, mode classification, stability and accuracy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingPlan;
use crate::error::Result;
use crate::linalg::{self, CMat};
use crate::micro::eig_mu;
use crate::scheme::PatchScheme;

/// Largest real part still counted as stable (round-off allowance).
pub const STABILITY_TOL: f64 = 1e-5;

/// Threshold and structural criteria for macroscale modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeThresholds {
    /// Macroscale modes have `Re λ > min_re` ...
    pub min_re: f64,
    /// ... and `|Im λ| < max_im`.
    pub max_im: f64,
    /// Largest sub-patch variation ratio of a macroscale eigenvector.
    pub max_variation: f64,
}

impl Default for ModeThresholds {
    fn default() -> Self {
        Self { min_re: -0.01, max_im: 10.0, max_variation: 0.5 }
    }
}

impl ModeThresholds {
    pub fn is_macro(&self, z: Complex64) -> bool {
        z.re > self.min_re && z.im.abs() < self.max_im
    }
}

/// `J_p(k)`: column `c` is the one-cell derivative of the unit vector `e_c`
/// with edges from the closed-form coupling of mode `k`.
pub fn assemble_one_cell_jacobian(scheme: &PatchScheme, plan: &CouplingPlan, k: (i64, i64)) -> CMat {
    let n = scheme.interior_len();
    let mut m = linalg::zeros(n);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        e[c] = Complex64::new(1.0, 0.0);
        let edges = plan.one_cell_edges(scheme, k, &e);
        let col = scheme.rhs_cell(&e, &edges);
        for (r, v) in col.into_iter().enumerate() {
            m[(r, c)] = v;
        }
        e[c] = Complex64::new(0.0, 0.0);
    }
    m
}

/// Eigenvalues closer to zero than this trigger the null-space deflation.
pub const NEAR_ZERO: f64 = 1e-2;
/// Singular values below this fraction of the largest count as exact zeros.
pub const NULL_RANK_TOL: f64 = 1e-10;

/// Eigenvalues of a one-cell Jacobian (dense complex QR). When the spectrum
/// has eigenvalues near zero, the generalized null space is split off first
/// so that defective zero eigenvalues come out exact.
pub fn spectrum(j: &CMat) -> Result<Vec<Complex64>> {
    let values = linalg::eigenvalues(j)?;
    if values.iter().any(|z| z.norm() < NEAR_ZERO) {
        Ok(linalg::eigenvalues_deflated(j, NULL_RANK_TOL)?.0)
    } else {
        Ok(values)
    }
}

/// Sets the `count` eigenvalues of smallest modulus to exactly zero.
fn snap_zeros(values: &mut [Complex64], count: usize) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].norm().total_cmp(&values[b].norm()));
    for &i in order.iter().take(count) {
        values[i] = Complex64::new(0.0, 0.0);
    }
}

/// RMS of differences between like-kind interior neighbours (two nodes apart)
/// within each patch over the RMS of the vector.
pub fn variation_ratio(scheme: &PatchScheme, v: &[Complex64]) -> f64 {
    let mut diff = 0.0;
    let mut pairs = 0usize;
    for (a, ra) in scheme.interior.iter().enumerate() {
        for (di, dj) in [(2, 0), (0, 2)] {
            if let Some(crate::scheme::NodeRef::Interior(b)) = scheme.node_ref(ra.patch, ra.i + di, ra.j + dj) {
                diff += (v[a] - v[b]).norm_sqr();
                pairs += 1;
            }
        }
    }
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64;
    if pairs == 0 || norm == 0.0 {
        return 0.0;
    }
    ((diff / pairs as f64) / norm).sqrt()
}

/// One eigenvalue with its classification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub re: f64,
    pub im: f64,
    /// Threshold rule.
    pub macro_threshold: bool,
    /// Structural rule, when eigenvectors were computed.
    pub macro_structural: Option<bool>,
    pub variation: Option<f64>,
}

impl Mode {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn class_name(&self) -> &'static str {
        if self.macro_threshold {
            "macroscale"
        } else {
            "microscale"
        }
    }
}

/// Spectrum and accuracy for one wavenumber.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WavenumberReport {
    pub kx: i64,
    pub ky: i64,
    pub modes: Vec<Mode>,
    /// `max` over macroscale modes of the distance to the nearest `λ_μ(k)`;
    /// zero when no mode is macroscale.
    pub eps: f64,
    pub n_macro: usize,
    /// Disagreements between the threshold and structural rules.
    pub n_disagree: usize,
}

/// Analysis settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    pub thresholds: ModeThresholds,
    /// Compute eigenvectors for the structural classification.
    pub structural: bool,
    /// Solve only one of each `±k` pair and conjugate for the other.
    pub conjugate_symmetry: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { thresholds: ModeThresholds::default(), structural: false, conjugate_symmetry: true }
    }
}

/// Whole-scheme result over a wavenumber set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenReport {
    pub wavenumbers: Vec<WavenumberReport>,
    pub max_re: f64,
    pub stable: bool,
    pub n_unstable: usize,
    pub max_eps: f64,
    pub n_eigenvalues: usize,
    pub n_disagree: usize,
}

impl EigenReport {
    /// Flat `k_x,k_y,re,im,mode_class` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k_x,k_y,re,im,mode_class\n");
        for w in &self.wavenumbers {
            for m in &w.modes {
                s.push_str(&format!("{},{},{:.16e},{:.16e},{}\n", w.kx, w.ky, m.re, m.im, m.class_name()));
            }
        }
        s
    }

    /// `max_re`, `stable` and the per-wavenumber `ε` table as JSON.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "max_re": self.max_re,
            "stable": self.stable,
            "n_unstable": self.n_unstable,
            "max_eps": self.max_eps,
            "n_eigenvalues": self.n_eigenvalues,
            "n_disagree": self.n_disagree,
            "eps": self.wavenumbers.iter().map(|w| serde_json::json!({
                "k_x": w.kx, "k_y": w.ky, "eps": w.eps, "n_macro": w.n_macro,
            })).collect::<Vec<_>>(),
        })
    }
}

fn classify(scheme: &PatchScheme, opts: &EigenOptions, values: &[Complex64], vectors: Option<&CMat>) -> Vec<Mode> {
    values
        .iter()
        .enumerate()
        .map(|(c, &z)| {
            let variation = vectors.map(|v| {
                let col: Vec<Complex64> = (0..v.nrows()).map(|r| v[(r, c)]).collect();
                variation_ratio(scheme, &col)
            });
            Mode {
                re: z.re,
                im: z.im,
                macro_threshold: opts.thresholds.is_macro(z),
                macro_structural: variation.map(|r| r <= opts.thresholds.max_variation),
                variation,
            }
        })
        .collect()
}

/// Spectrum and classification at one wavenumber.
pub fn analyze_wavenumber(
    scheme: &PatchScheme,
    plan: &CouplingPlan,
    k: (i64, i64),
    opts: &EigenOptions,
) -> Result<WavenumberReport> {
    let j = assemble_one_cell_jacobian(scheme, plan, k);
    let modes = if opts.structural {
        let (mut vals, vecs) = linalg::eigen(&j)?;
        if vals.iter().any(|z| z.norm() < NEAR_ZERO) {
            let (_, zeros) = linalg::eigenvalues_deflated(&j, NULL_RANK_TOL)?;
            snap_zeros(&mut vals, zeros);
        }
        classify(scheme, opts, &vals, Some(&vecs))
    } else {
        classify(scheme, opts, &spectrum(&j)?, None)
    };
    Ok(finish_wavenumber(scheme, k, modes))
}

fn finish_wavenumber(scheme: &PatchScheme, k: (i64, i64), modes: Vec<Mode>) -> WavenumberReport {
    let w = &scheme.wave;
    let kx = w.wavenumber(k.0);
    let ky = w.wavenumber(k.1);
    let reference = eig_mu(kx, ky, scheme.params.delta(), w).unwrap_or_else(|_| {
        crate::micro::eig_mu_closed_form(kx, ky, scheme.params.delta(), w)
    });
    let mut eps: f64 = 0.0;
    let mut n_macro = 0;
    let mut n_disagree = 0;
    for m in &modes {
        if m.macro_threshold {
            n_macro += 1;
            let d = reference.iter().map(|r| (r - m.lambda()).norm()).fold(f64::INFINITY, f64::min);
            eps = eps.max(d);
        }
        if m.macro_structural.is_some_and(|s| s != m.macro_threshold) {
            n_disagree += 1;
        }
    }
    WavenumberReport { kx: k.0, ky: k.1, modes, eps, n_macro, n_disagree }
}

/// Analysis over a wavenumber set.
pub fn analyze(
    scheme: &PatchScheme,
    modes: &[(i64, i64)],
    opts: &EigenOptions,
) -> Result<EigenReport> {
    let plan = CouplingPlan::new(scheme)?;
    let mut reports: Vec<Option<WavenumberReport>> = vec![None; modes.len()];
    for (idx, &k) in modes.iter().enumerate() {
        if reports[idx].is_some() {
            continue;
        }
        let rep = analyze_wavenumber(scheme, &plan, k, opts)?;
        if opts.conjugate_symmetry && k != (0, 0) {
            if let Some(mirror) = modes.iter().position(|&q| q == (-k.0, -k.1)) {
                if reports[mirror].is_none() {
                    let conj: Vec<Mode> = rep.modes.iter().map(|m| Mode { im: -m.im, ..*m }).collect();
                    reports[mirror] = Some(finish_wavenumber(scheme, (-k.0, -k.1), conj));
                }
            }
        }
        reports[idx] = Some(rep);
    }
    Ok(summarize(reports.into_iter().map(|r| r.expect("every wavenumber analysed")).collect()))
}

fn summarize(wavenumbers: Vec<WavenumberReport>) -> EigenReport {
    let mut max_re = f64::NEG_INFINITY;
    let mut n_unstable = 0;
    let mut max_eps: f64 = 0.0;
    let mut n_eigenvalues = 0;
    let mut n_disagree = 0;
    for w in &wavenumbers {
        for m in &w.modes {
            max_re = max_re.max(m.re);
            if m.re >= STABILITY_TOL {
                n_unstable += 1;
            }
        }
        n_eigenvalues += w.modes.len();
        max_eps = max_eps.max(w.eps);
        n_disagree += w.n_disagree;
    }
    EigenReport { stable: max_re < STABILITY_TOL, wavenumbers, max_re, n_unstable, max_eps, n_eigenvalues, n_disagree }
}

/// Stability over the resolved wavenumbers: `(stable, max Re λ_p)`.
pub fn stability(scheme: &PatchScheme) -> Result<(bool, f64)> {
    let r = analyze(scheme, &scheme.params.resolved_modes(), &EigenOptions::default())?;
    Ok((r.stable, r.max_re))
}

/// `ε_k` for one wavenumber.
pub type WavenumberEps = ((i64, i64), f64);

/// Accuracy over the resolved wavenumbers: `(per-k ε table, max ε)`.
pub fn accuracy(scheme: &PatchScheme) -> Result<(Vec<WavenumberEps>, f64)> {
    let r = analyze(scheme, &scheme.params.resolved_modes(), &EigenOptions::default())?;
    Ok((r.wavenumbers.iter().map(|w| ((w.kx, w.ky), w.eps)).collect(), r.max_eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Parity, PatchGridLayout};
    use crate::micro::WaveParams;
    use crate::scheme::{build_scheme, EdgeLayerSpec, GridParams};
    use std::f64::consts::TAU;

    fn scheme(layout: &str, big_n: usize, r: f64, wave: WaveParams) -> PatchScheme {
        let g = GridParams::new(TAU, big_n, 6, r).unwrap();
        build_scheme(g, PatchGridLayout::parse(layout, Parity::Odd).unwrap(), EdgeLayerSpec::N2T0, wave).unwrap()
    }

    #[test]
    fn size_and_sparsity() {
        let s = scheme("uuvv,hhvv,uuhh,----", 10, 0.1, WaveParams::ideal());
        let plan = CouplingPlan::new(&s).unwrap();
        let j = assemble_one_cell_jacobian(&s, &plan, (1, 2));
        assert_eq!((j.nrows(), j.ncols()), (59, 59));
        assert!(linalg::count_nonzeros(&j, 0.0) <= 318, "{}", linalg::count_nonzeros(&j, 0.0));
    }

    #[test]
    fn conjugate_wavenumbers() {
        let s = scheme("uhvh,hhvv,uuhh,----", 10, 0.1, WaveParams::new(0.01, 0.001, TAU).unwrap());
        let plan = CouplingPlan::new(&s).unwrap();
        let a = assemble_one_cell_jacobian(&s, &plan, (2, -1));
        let b = assemble_one_cell_jacobian(&s, &plan, (-2, 1));
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                assert!((a[(r, c)] - b[(r, c)].conj()).norm() < 1e-12);
            }
        }
        let with = analyze(&s, &s.params.resolved_modes(), &EigenOptions::default()).unwrap();
        let without = analyze(&s, &s.params.resolved_modes(), &EigenOptions { conjugate_symmetry: false, ..Default::default() }).unwrap();
        assert!((with.max_re - without.max_re).abs() < 1e-9);
        assert_eq!(with.n_unstable, without.n_unstable);
    }

    #[test]
    fn zero_mode_has_zero_eigenvalue() {
        let s = scheme("uuvv,hhvv,uuhh,----", 10, 0.1, WaveParams::ideal());
        let plan = CouplingPlan::new(&s).unwrap();
        let ev = spectrum(&assemble_one_cell_jacobian(&s, &plan, (0, 0))).unwrap();
        assert!(ev.iter().any(|z| z.norm() < 1e-10));
    }

    #[test]
    fn structural_rule_agrees_on_centred() {
        let s = scheme("uuvv,hhvv,uuhh,----", 10, 0.1, WaveParams::new(1e-6, 1e-4, TAU).unwrap());
        let opts = EigenOptions { structural: true, ..Default::default() };
        let r = analyze(&s, &s.params.resolved_modes(), &opts).unwrap();
        assert_eq!(r.n_disagree, 0);
        assert!(r.stable);
        assert!(r.max_eps < 1e-10);
    }

    #[test]
    fn constant_vector_is_macro() {
        let s = scheme("uuvv,hhvv,uuhh,----", 10, 0.1, WaveParams::ideal());
        let v = vec![Complex64::new(1.0, 0.0); s.interior_len()];
        assert!(variation_ratio(&s, &v) < 1e-15);
    }
}
