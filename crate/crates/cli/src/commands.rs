use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use bfcnn_core::errorlab::{
    envelope_params, fit_by_iteration, sort_records, weight_error_bound, write_error_records,
    write_fits, write_weights, BoundCoefficients, ClosedForm, ErrorRecord,
};
use bfcnn_core::scheduler::run_training;
use bfcnn_core::{
    integrate, Blueprint64, Crn64, CrnBuilder, IntegratorConfig64, State64, TrainingTrace64,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{csv_writer, t_dir, write_file, Manifest};

#[derive(Debug, Clone, Copy, Default)]
pub struct Flags {
    pub trace: bool,
    pub emit_crn: bool,
}

/// Directory-safe dataset name: `OR`, `XOR` or the CSV file stem.
fn dataset_label(cfg: &RunConfig) -> String {
    let spec = &cfg.data.dataset;
    match spec.to_ascii_uppercase().as_str() {
        "OR" | "XOR" => spec.to_ascii_uppercase(),
        _ => Path::new(spec)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset")
            .to_string(),
    }
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn train(cfg: &RunConfig, flags: Flags) -> Result<()> {
    let dir = cfg
        .out_root()
        .join(dataset_label(cfg))
        .join(t_dir(cfg.run.t));
    let mut manifest = Manifest::new(dir.join("manifest.txt"), "train", cfg.echo());
    let outcome = cfg.blueprint().and_then(|bp| {
        let trace = train_one(&bp, cfg, cfg.run.t, &dir, flags, &mut manifest)?;
        print_summary(&trace);
        Ok(())
    });
    manifest.finish(outcome)
}

fn print_summary(trace: &TrainingTrace64) {
    let last = trace.records.last();
    println!(
        "{} T={}: {} rounds, terminated at {}, last max |e| = {}, last realization error = {}",
        trace.dataset,
        trace.t,
        trace.records.len(),
        trace
            .terminated_at
            .map_or("-".to_string(), |m| m.to_string()),
        last.map_or(f64::NAN, |r| r.train_err_max()),
        last.and_then(|r| r.error.as_ref())
            .map_or(f64::NAN, |e| e.err_total),
    );
}

/// One training run with all per-run files written into `dir`.
fn train_one(
    bp: &Blueprint64,
    cfg: &RunConfig,
    t: f64,
    dir: &Path,
    flags: Flags,
    manifest: &mut Manifest,
) -> Result<TrainingTrace64> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if flags.emit_crn {
        let p = dir.join("network.crn");
        write_file(&p, |w| Ok(w.write_all(bp.emit_crn().as_bytes())?))?;
        manifest.file(p);
    }
    let start = Instant::now();
    let trace = run_training(bp, &cfg.clock(t, flags.trace))?;
    manifest.timing(format!("training T={t}"), start.elapsed());
    for rec in &trace.records {
        for w in &rec.warnings {
            manifest.note(w.clone());
        }
    }

    let records: Vec<ErrorRecord> = trace
        .records
        .iter()
        .filter_map(|r| r.error.clone())
        .collect();
    let p = dir.join("trace.csv");
    write_file(&p, |w| Ok(write_error_records(&records, w)?))?;
    manifest.file(p);

    let p = dir.join("errors.csv");
    write_file(&p, |w| write_training_errors(&trace, w))?;
    manifest.file(p);

    if let Some(last) = trace.records.last() {
        let p = dir.join("weights.csv");
        write_file(&p, |w| Ok(write_weights(&last.weights, w)?))?;
        manifest.file(p);
    }
    let p = dir.join("reference_weights.csv");
    write_file(&p, |w| Ok(write_weights(&trace.final_reference, w)?))?;
    manifest.file(p);

    if flags.trace {
        let p = dir.join("snapshots.csv");
        write_file(&p, |w| write_snapshots(bp, &trace, w))?;
        manifest.file(p);
    }
    Ok(trace)
}

/// Per-sample outputs and errors of every round.
fn write_training_errors<W: Write>(trace: &TrainingTrace64, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "iteration",
        "batch",
        "sample",
        "output",
        "error",
        "abs_error",
        "terminated",
    ])?;
    for r in &trace.records {
        for l in 0..r.abs_errors.len() {
            w.write_record([
                r.iteration.to_string(),
                (r.batch + 1).to_string(),
                (l + 1).to_string(),
                r.outputs.get(l).map_or(String::new(), |v| v.to_string()),
                r.errors.get(l).map_or(String::new(), |v| v.to_string()),
                r.abs_errors[l].to_string(),
                r.terminated.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format: one row per species per phase.
fn write_snapshots<W: Write>(bp: &Blueprint64, trace: &TrainingTrace64, out: W) -> Result<()> {
    let names = bp.species_names();
    let mut w = csv_writer(out);
    w.write_record(["iteration", "phase", "module", "species", "value"])?;
    for r in &trace.records {
        for s in &r.snapshots {
            for (id, name) in names.iter().enumerate() {
                w.write_record([
                    r.iteration.to_string(),
                    s.phase_index.to_string(),
                    s.label.clone(),
                    name.to_string(),
                    s.state.raw(id).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn sweep(cfg: &RunConfig, flags: Flags) -> Result<()> {
    let root = cfg.out_root().join(dataset_label(cfg));
    let mut manifest = Manifest::new(root.join("manifest.txt"), "sweep", cfg.echo());
    let outcome = sweep_into(cfg, flags, &root, &mut manifest);
    manifest.finish(outcome)
}

fn sweep_into(cfg: &RunConfig, flags: Flags, root: &Path, manifest: &mut Manifest) -> Result<()> {
    let mut grid = cfg.run.t_grid.clone();
    if grid.is_empty() {
        bail!("sweep needs a nonempty t_grid");
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let bp = cfg.blueprint()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.parallelism)
        .build()?;

    // Each point writes its own directory and manifest; nothing is shared
    // until the merge below.
    let results: Vec<(f64, PathBuf, Result<Vec<ErrorRecord>>)> = pool.install(|| {
        grid.par_iter()
            .map(|&t| {
                let dir = root.join(t_dir(t));
                let mut m = Manifest::new(dir.join("manifest.txt"), "sweep point", cfg.echo());
                let res = train_one(&bp, cfg, t, &dir, flags, &mut m).map(|tr| {
                    tr.records
                        .into_iter()
                        .filter_map(|r| r.error)
                        .collect::<Vec<_>>()
                });
                let res = m.finish(res);
                (t, dir, res)
            })
            .collect()
    });

    let mut merged = Vec::new();
    let mut failed = 0;
    for (t, dir, res) in results {
        manifest.file(dir.join("manifest.txt"));
        match res {
            Ok(recs) => {
                info!("T={t}: {} records", recs.len());
                merged.extend(recs);
            }
            Err(e) => {
                failed += 1;
                warn!("T={t} failed: {e:#}");
                manifest.note(format!("T={t} failed: {e:#}"));
            }
        }
    }
    sort_records(&mut merged);

    let p = root.join("sweep.csv");
    write_file(&p, |w| Ok(write_error_records(&merged, w)?))?;
    manifest.file(p);

    let fits = fit_by_iteration(&merged, false);
    let trimmed = fit_by_iteration(&merged, true);
    if fits.is_empty() {
        manifest.note("too few phase lengths for a convergence fit");
    }
    for (name, rows) in [("fits.csv", &fits), ("fits_trimmed.csv", &trimmed)] {
        let p = root.join(name);
        write_file(&p, |w| Ok(write_fits(rows, w)?))?;
        manifest.file(p);
    }

    println!(
        "{} phase lengths, {} records, {} failed",
        grid.len(),
        merged.len(),
        failed
    );
    for r in &fits {
        println!(
            "iteration {}: v = {:.4}, R^2 = {:.4} over {} points",
            r.iteration, r.fit.v, r.fit.r2, r.fit.n_points
        );
    }
    if failed == grid.len() {
        bail!("every sweep point failed");
    }
    Ok(())
}

pub fn simulate_module(cfg: &RunConfig, flags: Flags) -> Result<()> {
    let section = cfg.module_section()?;
    let dir = cfg
        .out_root()
        .join("modules")
        .join(safe_name(&section.label));
    let mut manifest = Manifest::new(dir.join("manifest.txt"), "simulate-module", cfg.echo());
    let outcome = simulate_into(cfg, flags, &dir, &mut manifest);
    manifest.finish(outcome)
}

fn simulate_into(cfg: &RunConfig, flags: Flags, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let section = cfg.module_section()?;
    let bp = cfg.blueprint()?;
    let module = bp.module(&section.label).ok_or_else(|| {
        let labels: Vec<&str> = bp.modules.iter().map(|m| m.label.as_str()).collect();
        anyhow!(
            "no module `{}`; known modules: {}",
            section.label,
            labels.join(", ")
        )
    })?;
    let crn = &module.crn;
    let mut x0 = State64::new(
        module
            .local_to_global
            .iter()
            .map(|&g| bp.initial_state.raw(g))
            .collect(),
    );
    for (name, &v) in &section.initial {
        let id = crn
            .id(name)
            .ok_or_else(|| anyhow!("species `{name}` is not part of module `{}`", module.label))?;
        x0.set(id, v);
    }

    let mut icfg: IntegratorConfig64 = cfg.integrator();
    if section.samples > 0 {
        icfg.dense_samples = Some(section.samples);
    }
    let start = Instant::now();
    let traj = integrate(crn, &x0, section.t, &icfg)?;
    manifest.timing("integration", start.elapsed());

    let names: Vec<&str> = crn.species().iter().map(|s| s.name.as_str()).collect();
    let p = dir.join("trajectory.csv");
    write_file(&p, |w| Ok(traj.write_csv(&names, w)?))?;
    manifest.file(p);

    let p = dir.join("endpoint.csv");
    write_file(&p, |w| {
        let mut c = csv_writer(w);
        c.write_record(["species", "initial", "final"])?;
        for (id, name) in names.iter().enumerate() {
            c.write_record([
                name.to_string(),
                x0.raw(id).to_string(),
                traj.endpoint.raw(id).to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    manifest.file(p);

    if flags.emit_crn {
        let p = dir.join("module.crn");
        write_file(&p, |w| {
            Ok(w.write_all(bfcnn_core::write_crn(crn).as_bytes())?)
        })?;
        manifest.file(p);
    }
    println!(
        "{}: {} species, {} reactions, {} accepted steps to T={}",
        module.label,
        crn.n_species(),
        crn.n_reactions(),
        traj.accepted_steps,
        section.t
    );
    Ok(())
}

pub fn bounds(cfg: &RunConfig) -> Result<()> {
    let dir = cfg.out_root().join("bounds");
    let mut manifest = Manifest::new(dir.join("manifest.txt"), "bounds", cfg.echo());
    let outcome = bounds_into(cfg, &dir, &mut manifest);
    manifest.finish(outcome)
}

fn bounds_into(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let section = cfg.bounds_section()?;
    let coeffs: Vec<BoundCoefficients> = section
        .iteration
        .iter()
        .map(|c| BoundCoefficients {
            rs: c.rs,
            transfer: c.transfer,
        })
        .collect();
    let mut rows = Vec::with_capacity(section.m);
    for m in 1..=section.m {
        rows.push((m, weight_error_bound(&coeffs, m)?));
    }
    let p = dir.join("bounds.csv");
    write_file(&p, |w| {
        let mut c = csv_writer(w);
        c.write_record(["m", "er", "es"])?;
        for (m, e) in &rows {
            c.write_record([m.to_string(), e[0].to_string(), e[1].to_string()])?;
        }
        c.flush()?;
        Ok(())
    })?;
    manifest.file(p);
    for (m, e) in &rows {
        println!("m={m}: ER <= {}, ES <= {}", e[0], e[1]);
    }

    if !section.envelope.is_empty() {
        let mut params = Vec::with_capacity(section.envelope.len());
        for e in &section.envelope {
            params.push(envelope_params(e.a, e.b, e.delta)?);
        }
        let p = dir.join("envelope.csv");
        write_file(&p, |w| {
            let mut c = csv_writer(w);
            c.write_record(["a", "b", "delta", "u_min", "v_max", "tangent_point"])?;
            for e in &params {
                c.write_record([
                    e.a.to_string(),
                    e.b.to_string(),
                    e.delta.to_string(),
                    e.u_min.to_string(),
                    e.v_max.to_string(),
                    e.tangent_point().to_string(),
                ])?;
            }
            c.flush()?;
            Ok(())
        })?;
        manifest.file(p);
    }
    Ok(())
}

struct OracleCase {
    name: &'static str,
    crn: Crn64,
    x0: Vec<f64>,
    /// Species compared against the closed form.
    probe: &'static str,
    form: ClosedForm,
}

fn oracle_cases() -> Result<Vec<OracleCase>> {
    let mut cases = Vec::new();

    let mut b = CrnBuilder::new();
    b.reaction(&[], &[("X", 1)], 2.5).decay("X", 1.0);
    cases.push(OracleCase {
        name: "relaxation",
        crn: b.build()?,
        x0: vec![0.3],
        probe: "X",
        form: ClosedForm::Relaxation { a: 2.5, x0: 0.3 },
    });

    let mut b = CrnBuilder::new();
    b.decay("X", 0.7);
    cases.push(OracleCase {
        name: "decay",
        crn: b.build()?,
        x0: vec![1.8],
        probe: "X",
        form: ClosedForm::Decay { k: 0.7, x0: 1.8 },
    });

    for (name, x0, y0) in [
        ("annihilation", 1.4, 0.6),
        ("annihilation-balanced", 0.8, 0.8),
    ] {
        let mut b = CrnBuilder::new();
        b.reaction(&[("X", 1), ("Y", 1)], &[], 1.0);
        cases.push(OracleCase {
            name,
            crn: b.build()?,
            x0: vec![x0, y0],
            probe: "X",
            form: ClosedForm::Annihilation { x0, y0 },
        });
    }

    // ṗ = (n⁺ − n⁻) p q with q = 1 − p, and both rails decaying.
    for (name, np, nn) in [
        ("logistic-positive", 2.0, 0.0),
        ("logistic-negative", 0.0, 3.0),
    ] {
        let mut b = CrnBuilder::new();
        b.reaction(
            &[("Np", 1), ("P", 1), ("Q", 1)],
            &[("Np", 1), ("P", 2)],
            1.0,
        );
        b.reaction(
            &[("Nn", 1), ("P", 1), ("Q", 1)],
            &[("Nn", 1), ("Q", 2)],
            1.0,
        );
        b.decay("Np", 1.0).decay("Nn", 1.0);
        cases.push(OracleCase {
            name,
            crn: b.build()?,
            x0: vec![np, 0.5, 0.5, nn],
            probe: "P",
            form: ClosedForm::LogisticCatalyst {
                p0: 0.5,
                n0: np - nn,
            },
        });
    }
    Ok(cases)
}

pub fn oracle_check(cfg: &RunConfig) -> Result<()> {
    let dir = cfg.out_root().join("oracle");
    let mut manifest = Manifest::new(dir.join("manifest.txt"), "oracle-check", cfg.echo());
    let outcome = oracle_into(cfg, &dir, &mut manifest);
    manifest.finish(outcome)
}

fn oracle_into(cfg: &RunConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    const TIMES: [f64; 6] = [0.5, 1.0, 2.0, 5.0, 10.0, 50.0];
    let icfg = cfg.integrator();
    // Global error budget: a few hundred local steps at the configured tolerances.
    let tol = 1e3 * (icfg.rel_tol + icfg.abs_tol);
    let mut rows = Vec::new();
    for case in oracle_cases()? {
        case.form.validate()?;
        let names: Vec<&str> = case.crn.species().iter().map(|s| s.name.as_str()).collect();
        let x0 = case
            .crn
            .state_from(names.iter().copied().zip(case.x0.iter().copied()))?;
        let probe = case.crn.require(case.probe)?;
        for &t in &TIMES {
            let end = bfcnn_core::integrate_endpoint(&case.crn, &x0, t, &icfg)?;
            let got = end.raw(probe);
            let want = case.form.eval(t);
            let err = (got - want).abs();
            rows.push((
                case.name,
                t,
                want,
                got,
                err,
                err <= tol * want.abs().max(1.0),
            ));
        }
    }
    let p = dir.join("oracle.csv");
    write_file(&p, |w| {
        let mut c = csv_writer(w);
        c.write_record(["case", "t", "expected", "integrated", "abs_error", "pass"])?;
        for (name, t, want, got, err, pass) in &rows {
            c.write_record([
                name.to_string(),
                t.to_string(),
                want.to_string(),
                got.to_string(),
                err.to_string(),
                pass.to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    manifest.file(p);

    let failed: Vec<_> = rows.iter().filter(|r| !r.5).collect();
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.4));
    println!(
        "{} comparisons, {} failed, worst abs error {worst:e}",
        rows.len(),
        failed.len()
    );
    for (name, t, want, got, ..) in &failed {
        println!("  {name} at t={t}: expected {want}, got {got}");
    }
    if !failed.is_empty() {
        bail!("{} oracle comparisons failed", failed.len());
    }
    Ok(())
}
