use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::measure::{ErrorRegion, reference_for, strain_at, strain_error_against};
use super::{ExperimentConfig, Model, solve_model};
use crate::atomistic::solve_atomistic;
use crate::coupling::{CoupledSolution, CouplingOptions, DomainDecomposition, ghost_force_diagnostic};
use crate::error::{Error, Result};
use crate::exec::map_slice;
use crate::fem::interpolate_pi;
use crate::fem::mesh::build_canonical_mesh;
use crate::fem::space::MixedFESpace;
use crate::lattice::{LatticeFunction, LatticeSystem};

/// One (method, resolution) cell of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub method: String,
    pub half_count: usize,
    /// `ε = 1/(2N)` in convergence studies, the element size `h` in
    /// coarsening studies.
    pub resolution: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub iterations: usize,
}

/// Ghost force of one method at one blend width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhostRecord {
    pub method: String,
    pub half_count: usize,
    pub la: i64,
    pub lb: i64,
    pub l2: f64,
    pub dual: f64,
    pub max: f64,
}

/// Fitted slopes keyed by method name.
pub type Fits = Vec<(String, SlopeFit)>;

/// Least-squares line through `(log x, log y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Records of a study, the fitted slope of every series with at least two
/// points, and the series that stopped early on a solver failure.
#[derive(Clone, Debug, Default)]
pub struct StudyResult {
    pub records: Vec<ConvergenceRecord>,
    pub fits: Fits,
    pub partial: Vec<(String, String)>,
}

impl StudyResult {
    pub fn fit(&self, method: &str) -> Option<SlopeFit> {
        self.fits.iter().find(|f| f.0 == method).map(|f| f.1)
    }

    pub fn series(&self, method: &str) -> Vec<&ConvergenceRecord> {
        self.records.iter().filter(|r| r.method == method).collect()
    }
}

/// Ordinary least squares on `(log x, log y)`. Points with a nonpositive
/// coordinate are skipped with a warning.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| {
            let ok = x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite();
            if !ok {
                warn!("skipping point ({x}, {y}) in slope fit");
            }
            ok
        })
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = logs.len();
    if n < 2 {
        return Err(Error::Config(format!("slope fit needs two positive points, got {n}")));
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("slope fit needs at least two distinct resolutions".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit { slope, intercept: my - slope * mx, r2, points: n })
}

type Cell = std::result::Result<ConvergenceRecord, String>;

fn assemble(models: &[Model], cells: Vec<Vec<Cell>>, fit_abs: bool) -> StudyResult {
    let mut out = StudyResult::default();
    for (k, model) in models.iter().enumerate() {
        let name = model.name().to_string();
        let mut pts = Vec::new();
        for row in &cells {
            match &row[k] {
                Ok(r) => {
                    pts.push((r.resolution, if fit_abs { r.abs_error } else { r.rel_error }));
                    out.records.push(r.clone());
                }
                Err(msg) => {
                    warn!("{name}: series stopped: {msg}");
                    out.partial.push((name.clone(), msg.clone()));
                    break;
                }
            }
        }
        if pts.len() >= 2 {
            if let Ok(f) = fit_slope(&pts) {
                out.fits.push((name, f));
            }
        }
    }
    out
}

fn convergence_row(cfg: &ExperimentConfig, n: usize) -> Vec<Cell> {
    let fail = |e: Error| vec![Err(e.to_string()); cfg.models.len()];
    let setup = || -> Result<_> {
        let sys = cfg.system(n)?;
        let d = cfg.decomposition(&sys)?;
        let load = cfg.external_load();
        let newton = cfg.newton(&sys, &load)?;
        let (ua, _) = solve_atomistic(&sys, &load, &newton)?;
        Ok((sys, d, load, newton, ua))
    };
    let (sys, d, load, newton, ua) = match setup() {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    cfg.models
        .iter()
        .map(|&model| {
            let cell = || -> Result<ConvergenceRecord> {
                let (um, rep) = solve_model(model, &sys, &d, &load, &cfg.coupling, &newton)?;
                let reference = reference_for(&sys, &d, &ua, &um)?;
                let e = strain_error_against(&reference, &um, &d, cfg.region)?;
                Ok(ConvergenceRecord {
                    method: model.name().into(),
                    half_count: n,
                    resolution: sys.spacing(),
                    abs_error: e.absolute,
                    rel_error: e.relative,
                    iterations: rep.iterations,
                })
            };
            cell().map_err(|e| e.to_string())
        })
        .collect()
}

/// Relative strain error of every model against the atomistic solution
/// over the ladder of half-counts, and the fitted slopes in `ε`.
pub fn run_convergence_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let mut ns = cfg.half_counts.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::Config(format!("a convergence study needs at least 3 resolutions, got {}", ns.len())));
    }
    let rows = map_slice(cfg.coupling.exec, &ns, |&n| convergence_row(cfg, n));
    Ok(assemble(&cfg.models, rows, false))
}

/// Coarse-mesh error against the fine interpolant of the atomistic
/// solution, for every `h`, and the fitted slopes in `h`.
pub fn run_coarsening_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    cfg.validate()?;
    if let Some(m) = cfg.models.iter().find(|m| !matches!(m, Model::Coupled(c) if !c.is_lattice())) {
        return Err(Error::Config(format!("{m} cannot be coarsened; use bqhoce or bqhocf")));
    }
    let mut hs = cfg.h_list.clone();
    hs.sort_unstable_by(|a, b| b.cmp(a));
    hs.dedup();
    if hs.len() < 3 {
        return Err(Error::Config(format!("a coarsening study needs at least 3 mesh sizes, got {}", hs.len())));
    }
    let n = cfg.half_counts[0];
    let sys = cfg.system(n)?;
    let d = cfg.decomposition(&sys)?;
    let load = cfg.external_load();
    let newton = cfg.newton(&sys, &load)?;
    let (ua, _) = solve_atomistic(&sys, &load, &newton)?;
    let fine = interpolate_pi(&ua, &MixedFESpace::new(build_canonical_mesh(&sys, &d)?)?)?;
    let rows = map_slice(cfg.coupling.exec, &hs, |&h| {
        cfg.models
            .iter()
            .map(|&model| {
                let cell = || -> Result<ConvergenceRecord> {
                    let opts = CouplingOptions { mesh_size: h, ..cfg.coupling.clone() };
                    let (um, rep) = solve_model(model, &sys, &d, &load, &opts, &newton)?;
                    let e = strain_error_against(&fine, &um, &d, cfg.region)?;
                    Ok(ConvergenceRecord {
                        method: model.name().into(),
                        half_count: n,
                        resolution: h as f64,
                        abs_error: e.absolute,
                        rel_error: e.relative,
                        iterations: rep.iterations,
                    })
                };
                cell().map_err(|e| e.to_string())
            })
            .collect::<Vec<Cell>>()
    });
    Ok(assemble(&cfg.models, rows, true))
}

/// Ghost force of every model over the blend widths of `cfg.lb_list`, with
/// `L_a` from the width rule, and the fitted slope of the dual norm in `L_b`.
pub fn run_ghost_sweep(cfg: &ExperimentConfig) -> Result<(Vec<GhostRecord>, Fits)> {
    let n = *cfg.half_counts.first().ok_or_else(|| Error::Config("a half-count is required".into()))?;
    let sys = cfg.system(n)?;
    let la = cfg.widths.widths(n).0;
    let mut records = Vec::new();
    let mut fits = Vec::new();
    for model in &cfg.models {
        let Model::Coupled(method) = *model else {
            return Err(Error::Config(format!("{model} has no ghost force; choose a coupled method")));
        };
        let rows: Result<Vec<GhostRecord>> = map_slice(cfg.coupling.exec, &cfg.lb_list, |&lb| {
            let d = DomainDecomposition::new(&sys, la, lb)?;
            let g = ghost_force_diagnostic(method, &sys, &d, &cfg.coupling)?;
            Ok(GhostRecord { method: method.name().into(), half_count: n, la, lb, l2: g.l2, dual: g.dual, max: g.max })
        })
        .into_iter()
        .collect();
        let rows = rows?;
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.lb as f64, r.dual)).collect();
        if let Ok(f) = fit_slope(&pts) {
            fits.push((method.name().to_string(), f));
        }
        records.extend(rows);
    }
    Ok((records, fits))
}

/// Writes serializable rows as CSV with a header row.
pub fn write_records<T: Serialize, W: Write>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads rows written by [`write_records`].
pub fn read_records<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Strain profile CSV: one row per unit element midpoint with the
/// atomistic strain followed by each solution's strain. The interface
/// positions go in a leading comment line.
pub fn write_strain_profile<W: Write>(
    w: W,
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    u_ref: &LatticeFunction,
    solutions: &[(String, CoupledSolution)],
) -> Result<()> {
    let mut w = w;
    match decomposition.widths() {
        Some((la, lb)) => {
            let c = decomposition.center();
            writeln!(w, "# interfaces: {}, {}, {}, {}", c - la - lb, c - la, c + la, c + la + lb)?;
        }
        None => writeln!(w, "# interfaces: none")?,
    }
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["x".to_string(), "strain_atomistic".to_string()];
    header.extend(solutions.iter().map(|(name, _)| format!("strain_{name}")));
    wr.write_record(&header)?;
    let n = sys.half_count() as i64;
    for xi in -n..n {
        let x = xi as f64 + 0.5;
        let mut row = vec![format!("{x}"), format!("{:e}", u_ref.diff(xi, 1))];
        row.extend(solutions.iter().map(|(_, u)| format!("{:e}", strain_at(u, x))));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// [`write_strain_profile`] to a file.
pub fn dump_strain_profile(
    path: &Path,
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    u_ref: &LatticeFunction,
    solutions: &[(String, CoupledSolution)],
) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    write_strain_profile(f, sys, decomposition, u_ref, solutions)
}

/// Strain error over a region against a fresh reference; convenience for
/// one-off solves.
pub fn region_errors(
    sys: &LatticeSystem,
    decomposition: &DomainDecomposition,
    u_ref: &LatticeFunction,
    u_m: &CoupledSolution,
) -> Result<Vec<(ErrorRegion, f64, f64)>> {
    let reference = reference_for(sys, decomposition, u_ref, u_m)?;
    let mut out = Vec::new();
    for region in [ErrorRegion::All, ErrorRegion::Atomistic, ErrorRegion::Blend, ErrorRegion::Continuum] {
        if let Ok(e) = strain_error_against(&reference, u_m, decomposition, region) {
            out.push((region, e.absolute, e.relative));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Method;
    use crate::harness::WidthRule;
    use crate::lattice::LoadKind;

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&e| (e, e * e)).collect();
        assert!((fit_slope(&pts).unwrap().slope - 2.0).abs() < 1e-10);
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.02].iter().map(|&e: &f64| (e, 3.0 * e.powi(4))).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope - 4.0).abs() < 1e-10 && (f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let f = fit_slope(&[(1.0, 2.0), (2.0, 5.0)]).unwrap();
        assert!((f.slope - (2.5f64).ln() / 2f64.ln()).abs() < 1e-12);
        assert_eq!(fit_slope(&[(1.0, 1.0), (2.0, 0.0), (4.0, 16.0)]).unwrap().points, 2);
        assert!(fit_slope(&[(1.0, 0.0), (2.0, -1.0)]).is_err());
    }

    #[test]
    fn records_round_trip() {
        let recs = vec![
            ConvergenceRecord {
                method: "bqce".into(),
                half_count: 50,
                resolution: 0.01,
                abs_error: 1.234567890123e-3,
                rel_error: 2.5e-2,
                iterations: 1,
            },
            ConvergenceRecord {
                method: "hoc".into(),
                half_count: 100,
                resolution: 0.005,
                abs_error: 7.0e-9,
                rel_error: 1.0 / 3.0,
                iterations: 3,
            },
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,half_count,resolution,abs_error,rel_error,iterations"));
        let back: Vec<ConvergenceRecord> = read_records(buf.as_slice()).unwrap();
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.method, b.method);
            assert!((a.rel_error - b.rel_error).abs() <= 1e-12 * a.rel_error);
            assert!((a.abs_error - b.abs_error).abs() <= 1e-12 * a.abs_error);
        }
    }

    #[test]
    fn strain_profile_shape_and_symmetry() {
        let cfg = ExperimentConfig::default();
        let sys = cfg.system(30).unwrap();
        let d = cfg.decomposition(&sys).unwrap();
        let load = cfg.external_load();
        let newton = cfg.newton(&sys, &load).unwrap();
        let (ua, _) = solve_atomistic(&sys, &load, &newton).unwrap();
        let (ub, _) = solve_model(Model::Coupled(Method::Bqhocf), &sys, &d, &load, &cfg.coupling, &newton).unwrap();
        let sols = vec![("atomistic_copy".to_string(), CoupledSolution::Lattice(ua.clone())), ("bqhocf".into(), ub)];
        let mut buf = Vec::new();
        write_strain_profile(&mut buf, &sys, &d, &ua, &sols).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# interfaces: -16, -8, 8, 16");
        assert_eq!(lines.next().unwrap(), "x,strain_atomistic,strain_atomistic_copy,strain_bqhocf");
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 60);
        for r in &rows {
            assert_eq!(r[1], r[2]);
        }
        // Even load and no ghost forces: the strain is odd about x = 0.
        for k in 0..30 {
            let (a, b) = (&rows[k], &rows[59 - k]);
            assert_eq!(a[0], -b[0]);
            assert!((a[1] + b[1]).abs() < 1e-8 * a[1].abs().max(1e-3), "{k}: {a:?} {b:?}");
            assert!((a[3] + b[3]).abs() < 1e-8 * a[3].abs().max(1e-3), "{k}: {a:?} {b:?}");
        }
    }

    #[test]
    fn small_study_is_deterministic() {
        let cfg = ExperimentConfig {
            half_counts: vec![20, 40, 80],
            models: vec![Model::Coupled(Method::Bqcf), Model::Cb],
            ..ExperimentConfig::default()
        };
        let a = run_convergence_study(&cfg).unwrap();
        let b = run_convergence_study(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 6);
        assert!(a.partial.is_empty());
        assert!(a.series("bqcf").windows(2).all(|w| w[0].resolution > w[1].resolution));
        assert!(a.fit("bqcf").is_some());
        let bad = ExperimentConfig { half_counts: vec![20, 40], ..cfg };
        assert!(run_convergence_study(&bad).is_err());
    }

    #[test]
    fn failing_series_is_flagged() {
        let cfg = ExperimentConfig {
            half_counts: vec![20, 40, 80],
            models: vec![Model::Coupled(Method::Bqcf)],
            max_iter: 1,
            potential: crate::harness::PotentialChoice::LennardJones,
            f_scale: 2.0,
            load: LoadKind::Smooth,
            widths: WidthRule::Fixed { la: 4, lb: 4 },
            ..ExperimentConfig::default()
        };
        let r = run_convergence_study(&cfg).unwrap();
        assert_eq!(r.partial.len(), 1);
        assert!(r.records.is_empty());
    }
}
