//! Realization-error measurement, convergence-order fits and analytic bounds.

mod bounds;
mod oracles;

use std::io::Write;

use log::warn;
use thiserror::Error;

pub use bounds::{
    bfd_matrix, envelope_params, multiplication_bound, p_tilde, weight_error_bound,
    weight_error_bound_unrolled, BoundCoefficients, EnvelopeParams, Mat2, Vec2,
};
pub use oracles::ClosedForm;

use crate::netbuild::DualRailMatrices;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErrorLabError {
    #[error("need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("missing coefficients for iteration {0}")]
    MissingIteration(usize),
}

/// One row of an error sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub dataset: String,
    pub t: f64,
    pub iteration: usize,
    pub err_w1: f64,
    pub err_w2: f64,
    pub err_total: f64,
    pub train_err_max: f64,
    pub terminated: bool,
}

fn max_abs_diff<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |m, (x, y)| m.max((*x - *y).abs()))
}

/// `c·‖w⁺ − W⁺‖ + c·‖w⁻ − W⁻‖` with the max-entry norm, for layer 1, layer 2
/// and both layers stacked.
pub fn realization_error<S: Scalar>(
    sim: &DualRailMatrices<S>,
    reference: &DualRailMatrices<S>,
    c: S,
) -> (S, S, S) {
    let flat1 = |m: &[[S; 3]; 2]| -> Vec<S> { m.iter().flatten().copied().collect() };
    let p1 = max_abs_diff(&flat1(&sim.w1_pos), &flat1(&reference.w1_pos));
    let n1 = max_abs_diff(&flat1(&sim.w1_neg), &flat1(&reference.w1_neg));
    let p2 = max_abs_diff(&sim.w2_pos, &reference.w2_pos);
    let n2 = max_abs_diff(&sim.w2_neg, &reference.w2_neg);
    (c * (p1 + n1), c * (p2 + n2), c * (p1.max(p2) + n1.max(n2)))
}

/// Least-squares fit of `ln err = ln m − v·T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub v: f64,
    /// `ln m`.
    pub intercept: f64,
    pub r2: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub n_points: usize,
}

pub const MIN_FIT_POINTS: usize = 4;

/// Fits `(T, err)` pairs. Nonpositive errors are dropped with a warning.
pub fn fit_convergence_order(points: &[(f64, f64)]) -> Result<FitResult, ErrorLabError> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(t, e)| {
            let ok = e > 0.0 && e.is_finite() && t.is_finite();
            if !ok {
                warn!("dropping point T={t}, err={e} from the convergence fit");
            }
            ok
        })
        .collect();
    let mut ts: Vec<f64> = usable.iter().map(|p| p.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < MIN_FIT_POINTS {
        return Err(ErrorLabError::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: ts.len(),
        });
    }
    let n = usable.len() as f64;
    let mean_t = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = usable.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, e) in &usable {
        let (dt, dy) = (t - mean_t, e.ln() - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let ss_res: f64 = usable
        .iter()
        .map(|&(t, e)| {
            let r = e.ln() - (intercept + slope * t);
            r * r
        })
        .sum();
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        v: -slope,
        intercept,
        r2,
        t_min: ts[0],
        t_max: *ts.last().unwrap(),
        n_points: usable.len(),
    })
}

/// Keeps only points (sorted by `T`) that do not exceed every earlier error,
/// dropping overshoot.
pub fn trim_overshoot(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = f64::INFINITY;
    sorted
        .into_iter()
        .filter(|&(_, e)| {
            let keep = e <= best;
            if keep {
                best = e;
            }
            keep
        })
        .collect()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. `None` if either
/// side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn lf_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub const TRACE_HEADER: [&str; 8] = [
    "dataset",
    "T",
    "iteration",
    "err_w1",
    "err_w2",
    "err_total",
    "train_err_max",
    "terminated",
];

pub fn write_error_records<W: Write>(records: &[ErrorRecord], out: W) -> csv::Result<()> {
    let mut w = lf_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.dataset.clone(),
            r.t.to_string(),
            r.iteration.to_string(),
            r.err_w1.to_string(),
            r.err_w2.to_string(),
            r.err_total.to_string(),
            r.train_err_max.to_string(),
            r.terminated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sorts by `(dataset, T, iteration)` so merged sweeps come out in a fixed order.
pub fn sort_records(records: &mut [ErrorRecord]) {
    records.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(a.t.total_cmp(&b.t))
            .then(a.iteration.cmp(&b.iteration))
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub dataset: String,
    pub iteration: usize,
    pub fit: FitResult,
}

/// Per `(dataset, iteration)` fits of `err_total` against `T`; groups with too
/// few points are skipped. With `trimmed`, overshoot points are dropped first.
pub fn fit_by_iteration(records: &[ErrorRecord], trimmed: bool) -> Vec<FitRow> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut keys: Vec<(String, usize)> = sorted
        .iter()
        .map(|r| (r.dataset.clone(), r.iteration))
        .collect();
    keys.sort();
    keys.dedup();
    let mut rows = Vec::new();
    for (dataset, iteration) in keys {
        let pts: Vec<(f64, f64)> = sorted
            .iter()
            .filter(|r| r.dataset == dataset && r.iteration == iteration)
            .map(|r| (r.t, r.err_total))
            .collect();
        let pts = if trimmed { trim_overshoot(&pts) } else { pts };
        if let Ok(fit) = fit_convergence_order(&pts) {
            rows.push(FitRow {
                dataset,
                iteration,
                fit,
            });
        }
    }
    rows
}

pub fn write_fits<W: Write>(rows: &[FitRow], out: W) -> csv::Result<()> {
    let mut w = lf_writer(out);
    w.write_record(["dataset", "iteration", "v", "intercept", "r2", "n_points"])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.iteration.to_string(),
            r.fit.v.to_string(),
            r.fit.intercept.to_string(),
            r.fit.r2.to_string(),
            r.fit.n_points.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rail-separated weights, one row per entry: `layer,sign,row,col,value`.
pub fn write_weights<S: Scalar, W: Write>(w: &DualRailMatrices<S>, out: W) -> csv::Result<()> {
    let mut wr = lf_writer(out);
    wr.write_record(["layer", "sign", "row", "col", "value"])?;
    for (layer, sg, i, j) in crate::netbuild::weight_entries() {
        wr.write_record([
            layer.to_string(),
            sg.to_string(),
            i.to_string(),
            j.to_string(),
            w.get(layer, sg, i, j).as_f64().to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realization_error_examples() {
        let a = crate::fcnn::random_initial::<f64>(1, 0.1, 0.9);
        assert_eq!(realization_error(&a, &a, 1.0), (0.0, 0.0, 0.0));

        let mut b = a.clone();
        b.w1_pos[1][2] += 0.2;
        let (e1, e2, et) = realization_error(&b, &a, 1.0);
        assert!((e1 - 0.2).abs() < 1e-12 && e2 == 0.0 && (et - 0.2).abs() < 1e-12);

        let mut b = a.clone();
        b.w2_pos[0] += 0.1;
        b.w2_neg[1] += 0.1;
        let (_, e2, _) = realization_error(&b, &a, 2.0);
        assert!((e2 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn exact_log_linear() {
        let pts: Vec<_> = [10.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|&t: &f64| (t, 3.0 * (-0.5 * t).exp()))
            .collect();
        let f = fit_convergence_order(&pts).unwrap();
        assert!((f.v - 0.5).abs() < 1e-10);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-9);
        assert!((f.r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_and_insufficient() {
        let pts: Vec<_> = (1..=5).map(|t| (t as f64, 0.7)).collect();
        let f = fit_convergence_order(&pts).unwrap();
        assert!(f.v.abs() < 1e-12);
        assert_eq!(f.r2, 1.0);
        assert!(matches!(
            fit_convergence_order(&pts[..3]),
            Err(ErrorLabError::InsufficientData { got: 3, .. })
        ));
        let with_zero = [(1.0, 1.0), (2.0, 0.5), (3.0, 0.0), (4.0, 0.2), (5.0, -1.0)];
        assert!(fit_convergence_order(&with_zero).is_err());
    }

    #[test]
    fn trimming_drops_overshoot() {
        let pts = [(30.0, 0.5), (20.0, 1.0), (40.0, 0.7), (50.0, 0.1)];
        assert_eq!(
            trim_overshoot(&pts),
            vec![(20.0, 1.0), (30.0, 0.5), (50.0, 0.1)]
        );
    }

    #[test]
    fn spearman_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[0.1, 0.5, 0.9]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 1.0]), None);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn csv_headers() {
        let rec = ErrorRecord {
            dataset: "OR".into(),
            t: 25.0,
            iteration: 1,
            err_w1: 0.1,
            err_w2: 0.2,
            err_total: 0.3,
            train_err_max: 0.4,
            terminated: false,
        };
        let mut buf = Vec::new();
        write_error_records(&[rec], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "dataset,T,iteration,err_w1,err_w2,err_total,train_err_max,terminated\nOR,25,1,0.1,0.2,0.3,0.4,false\n"
        );
    }
}
