//! Stability and accuracy sweep over every patch grid layout of a parity.
//!
//! Results stream to a JSONL file as they complete, so an interrupted sweep
//! resumes where it stopped. Layouts related by a symmetry of the periodic
//! patch grid (reflections, the `x <-> y` transpose and one-patch shifts) have
//! identical spectra over the symmetric set of resolved wavenumbers, so by
//! default only the smallest-Id member of each orbit is analysed and its
//! result is copied to the other members.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{analyze, EigenOptions};
use crate::error::{Error, Result};
use crate::geometry::{GridId, Parity, PatchGridLayout};
use crate::micro::WaveParams;
use crate::scheme::{build_scheme, EdgeLayerSpec, GridParams};

/// Accuracy cut for the census summary.
pub const ACCURATE_EPS: f64 = 1e-9;

/// One census row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusRecord {
    pub id: u32,
    pub layout: String,
    pub parity: Parity,
    pub centred: bool,
    pub symmetric_only: bool,
    pub max_re: f64,
    pub stable: bool,
    pub n_unstable: usize,
    pub max_eps: f64,
    /// Id of the orbit member that was analysed.
    pub analysed_as: u32,
    /// Analysis failure; the numeric fields are then meaningless.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CensusConfig {
    pub params: GridParams,
    pub wave: WaveParams,
    pub layers: EdgeLayerSpec,
    pub parity: Parity,
    /// Analyse one layout per symmetry orbit.
    pub use_symmetry: bool,
}

impl CensusConfig {
    /// Standard sweep settings (`L = 2π`, `N = 10`, `r = 0.1`, ideal, `n2t0`) with `n` set to the parity's representative.
    pub fn standard(parity: Parity) -> Result<Self> {
        let params = GridParams::new(std::f64::consts::TAU, 10, parity.representative_n(), 0.1)?;
        Ok(Self { params, wave: WaveParams::ideal(), layers: EdgeLayerSpec::N2T0, parity, use_symmetry: true })
    }
}

/// Analyses a single layout.
pub fn analyse_layout(config: &CensusConfig, layout: &PatchGridLayout) -> CensusRecord {
    let outcome = build_scheme(config.params, *layout, config.layers, config.wave)
        .and_then(|s| analyze(&s, &config.params.resolved_modes(), &EigenOptions::default()));
    let id = layout.id().id;
    let mut rec = CensusRecord {
        id,
        layout: layout.to_string(),
        parity: layout.parity,
        centred: layout.is_centred(),
        symmetric_only: layout.is_symmetric_only(),
        max_re: f64::NAN,
        stable: false,
        n_unstable: 0,
        max_eps: f64::NAN,
        analysed_as: id,
        error: None,
    };
    match outcome {
        Ok(rep) => {
            rec.max_re = rep.max_re;
            rec.stable = rep.stable;
            rec.n_unstable = rep.n_unstable;
            rec.max_eps = rep.max_eps;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Reads the complete records of a JSONL file; a truncated or malformed final
/// line (an interrupted write) is skipped.
pub fn load_jsonl(path: &Path) -> Result<Vec<CensusRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(rec) = serde_json::from_str::<CensusRecord>(&line) {
            out.push(rec);
        }
    }
    Ok(out)
}

/// Runs (or resumes) the sweep. With `jsonl` set, previously recorded Ids of
/// the same parity are reused and new records are appended as they finish.
/// `progress` is called with the number of finished orbits.
pub fn run_census(
    config: &CensusConfig,
    jsonl: Option<&Path>,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<Vec<CensusRecord>> {
    let mut done: BTreeMap<u32, CensusRecord> = BTreeMap::new();
    if let Some(path) = jsonl {
        for rec in load_jsonl(path)? {
            if rec.parity == config.parity {
                done.insert(rec.id, rec);
            }
        }
    }

    // Group pending layouts by the member that gets analysed.
    let mut groups: BTreeMap<u32, Vec<PatchGridLayout>> = BTreeMap::new();
    for layout in PatchGridLayout::all(config.parity) {
        if done.contains_key(&layout.id().id) {
            continue;
        }
        let key = if config.use_symmetry { layout.canonical().id().id } else { layout.id().id };
        groups.entry(key).or_default().push(layout);
    }

    let writer = match jsonl {
        Some(path) => {
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            // A partial last line from an interrupted run must not swallow the next record.
            if path.metadata()?.len() > 0 {
                let text = std::fs::read(path)?;
                if text.last() != Some(&b'\n') {
                    file.write_all(b"\n")?;
                }
            }
            Some(Mutex::new(file))
        }
        None => None,
    };

    let total = groups.len();
    let finished = std::sync::atomic::AtomicUsize::new(0);
    let keys: Vec<(u32, Vec<PatchGridLayout>)> = groups.into_iter().collect();
    let fresh: Vec<Vec<CensusRecord>> = keys
        .par_iter()
        .map(|(key, members)| -> Result<Vec<CensusRecord>> {
            let rep_layout = GridId::new(*key, config.parity)?.layout();
            let base = match done.get(key) {
                Some(rec) => rec.clone(),
                None => analyse_layout(config, &rep_layout),
            };
            let recs: Vec<CensusRecord> = members
                .iter()
                .map(|l| CensusRecord {
                    id: l.id().id,
                    layout: l.to_string(),
                    centred: l.is_centred(),
                    symmetric_only: l.is_symmetric_only(),
                    analysed_as: base.analysed_as,
                    ..base.clone()
                })
                .collect();
            if let Some(w) = &writer {
                let mut buf = String::new();
                for r in &recs {
                    buf.push_str(&serde_json::to_string(r)?);
                    buf.push('\n');
                }
                let mut f = w.lock().map_err(|_| Error::Io(std::io::Error::other("poisoned writer lock")))?;
                f.write_all(buf.as_bytes())?;
                f.flush()?;
            }
            let n = finished.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            if let Some(cb) = progress {
                cb(n, total);
            }
            Ok(recs)
        })
        .collect::<Result<_>>()?;

    for rec in fresh.into_iter().flatten() {
        done.insert(rec.id, rec);
    }
    Ok(done.into_values().collect())
}

/// Sorted CSV of census records.
pub fn to_csv(records: &[CensusRecord]) -> String {
    let mut rows: Vec<&CensusRecord> = records.iter().collect();
    rows.sort_by_key(|r| (r.parity, r.id));
    let mut s = String::from("id,layout,parity,centred,symmetric_only,max_re,stable,n_unstable,max_eps\n");
    for r in rows {
        s.push_str(&format!(
            "{},\"{}\",{},{},{},{:.16e},{},{},{:.16e}\n",
            r.id, r.layout, r.parity, r.centred, r.symmetric_only, r.max_re, r.stable, r.n_unstable, r.max_eps
        ));
    }
    s
}

/// Headline counts of a sweep.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusSummary {
    pub total: usize,
    pub errors: usize,
    pub stable: usize,
    pub stable_centred: usize,
    pub stable_non_centred: usize,
    pub unstable: usize,
    pub centred: usize,
    pub symmetric_only: usize,
    /// Stable and `max_eps < ACCURATE_EPS`.
    pub accurate: usize,
    pub accurate_centred: usize,
    /// The stable set equals the set of layouts with only symmetric patches.
    pub stable_iff_symmetric: bool,
}

pub fn summarize(records: &[CensusRecord]) -> CensusSummary {
    let mut s = CensusSummary { total: records.len(), stable_iff_symmetric: true, ..Default::default() };
    for r in records {
        if r.error.is_some() {
            s.errors += 1;
            continue;
        }
        s.centred += r.centred as usize;
        s.symmetric_only += r.symmetric_only as usize;
        if r.stable {
            s.stable += 1;
            if r.centred {
                s.stable_centred += 1;
            } else {
                s.stable_non_centred += 1;
            }
            if r.max_eps < ACCURATE_EPS {
                s.accurate += 1;
                s.accurate_centred += r.centred as usize;
            }
        } else {
            s.unstable += 1;
        }
        if r.stable != r.symmetric_only {
            s.stable_iff_symmetric = false;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_sorted_and_quoted() {
        let mk = |id: u32| CensusRecord {
            id,
            layout: GridId::new(id, Parity::Odd).unwrap().layout().to_string(),
            parity: Parity::Odd,
            centred: false,
            symmetric_only: false,
            max_re: 0.5,
            stable: false,
            n_unstable: 2,
            max_eps: 1.0,
            analysed_as: id,
            error: None,
        };
        let csv = to_csv(&[mk(900), mk(17)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("17,\"----,----,hhhh,----\",odd,false,false,"));
        assert!(lines[2].starts_with("900,"));
    }

    #[test]
    fn summary_counts() {
        let rec = |stable: bool, sym: bool, centred: bool, eps: f64| CensusRecord {
            id: 1,
            layout: String::new(),
            parity: Parity::Odd,
            centred,
            symmetric_only: sym,
            max_re: 0.0,
            stable,
            n_unstable: 0,
            max_eps: eps,
            analysed_as: 1,
            error: None,
        };
        let s = summarize(&[rec(true, true, true, 1e-13), rec(true, true, false, 0.1), rec(false, false, false, 1.0)]);
        assert_eq!((s.stable, s.stable_centred, s.stable_non_centred, s.unstable, s.accurate), (2, 1, 1, 1, 1));
        assert!(s.stable_iff_symmetric);
    }
}
