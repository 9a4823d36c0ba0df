//! Adaptive Dormand–Prince 5(4) integration of mass-action systems.

use std::io::Write;

use thiserror::Error;

use crate::crn::{ConcentrationState, Crn, CrnError, CLAMP_TOL};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<S> {
    pub rel_tol: S,
    pub abs_tol: S,
    /// Upper bound on the step; `None` means `duration / 10`.
    pub max_step: Option<S>,
    /// Number of uniformly spaced interior samples to keep (besides both ends).
    pub dense_samples: Option<usize>,
    pub max_steps: usize,
}

impl<S: Scalar> Default for IntegratorConfig<S> {
    fn default() -> Self {
        Self {
            rel_tol: S::lit(1e-9),
            abs_tol: S::lit(1e-11),
            max_step: None,
            dense_samples: None,
            max_steps: 5_000_000,
        }
    }
}

impl<S: Scalar> IntegratorConfig<S> {
    pub fn with_tolerances(rel_tol: S, abs_tol: S) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let pos = |v: S| v > S::zero() && v.is_finite();
        if !pos(self.rel_tol) || !pos(self.abs_tol) {
            return Err(IntegrateError::Config("tolerances must be positive".into()));
        }
        if let Some(h) = self.max_step {
            if !pos(h) {
                return Err(IntegrateError::Config("max_step must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error(transparent)]
    Crn(#[from] CrnError),
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("invalid duration {0}")]
    Duration(f64),
    #[error("step size underflow at t={t} (h={h})")]
    StepUnderflow {
        t: f64,
        h: f64,
        last_state: Vec<f64>,
    },
    #[error("step budget of {steps} exhausted at t={t}")]
    TooManySteps {
        t: f64,
        steps: usize,
        last_state: Vec<f64>,
    },
    #[error("non-finite state at t={t}")]
    NonFinite { t: f64, last_state: Vec<f64> },
}

impl IntegrateError {
    /// Time and state of the last accepted step, when the failure happened mid-run.
    pub fn last_good(&self) -> Option<(f64, &[f64])> {
        match self {
            Self::StepUnderflow { t, last_state, .. }
            | Self::TooManySteps { t, last_state, .. }
            | Self::NonFinite { t, last_state } => Some((*t, last_state)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<S>,
    pub states: Vec<Vec<S>>,
    pub endpoint: ConcentrationState<S>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<S: Scalar> Trajectory<S> {
    /// Writes `t,<names...>` followed by one row per sample.
    pub fn write_csv<W: Write>(&self, names: &[&str], out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["t"];
        header.extend_from_slice(names);
        w.write_record(&header)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = Vec::with_capacity(x.len() + 1);
            row.push(format!("{}", t.as_f64()));
            row.extend(x.iter().map(|v| format!("{}", v.as_f64())));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

// Dormand–Prince tableau (the system is autonomous, so the nodes c_i are not needed).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// 5th minus 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Stages<S> {
    k: [Vec<S>; 7],
    tmp: Vec<S>,
    y_new: Vec<S>,
    err: Vec<S>,
}

impl<S: Scalar> Stages<S> {
    fn new(n: usize) -> Self {
        let z = || vec![S::zero(); n];
        Self {
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            y_new: z(),
            err: z(),
        }
    }
}

fn combo<S: Scalar>(out: &mut [S], y: &[S], h: S, terms: &[(f64, &[S])]) {
    for i in 0..out.len() {
        let mut acc = S::zero();
        for (a, k) in terms {
            acc = acc + S::lit(*a) * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// One trial step from `y` with `k[0] = f(y)` already filled. Leaves the
/// candidate in `y_new`, `f(y_new)` in `k[6]` and the error estimate in `err`.
fn trial_step<S: Scalar>(crn: &Crn<S>, y: &[S], h: S, st: &mut Stages<S>) {
    let Stages { k, tmp, y_new, err } = st;
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    combo(tmp, y, h, &[(A21, k1)]);
    crn.derivative_into(tmp, k2);
    combo(tmp, y, h, &[(A31, k1), (A32, k2)]);
    crn.derivative_into(tmp, k3);
    combo(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    crn.derivative_into(tmp, k4);
    combo(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    crn.derivative_into(tmp, k5);
    combo(
        tmp,
        y,
        h,
        &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
    );
    crn.derivative_into(tmp, k6);
    combo(
        y_new,
        y,
        h,
        &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)],
    );
    crn.derivative_into(y_new, k7);
    for i in 0..y.len() {
        err[i] = h
            * (S::lit(E1) * k1[i]
                + S::lit(E3) * k3[i]
                + S::lit(E4) * k4[i]
                + S::lit(E5) * k5[i]
                + S::lit(E6) * k6[i]
                + S::lit(E7) * k7[i]);
    }
}

/// Hermite-type quintic interpolant over an accepted step.
fn interpolate<S: Scalar>(y: &[S], y1: &[S], k: &[Vec<S>; 7], h: S, theta: S) -> Vec<S> {
    let th1 = S::one() - theta;
    (0..y.len())
        .map(|i| {
            let ydiff = y1[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            let rc4 = ydiff - h * k[6][i] - bspl;
            let rc5 = h
                * (S::lit(D1) * k[0][i]
                    + S::lit(D3) * k[2][i]
                    + S::lit(D4) * k[3][i]
                    + S::lit(D5) * k[4][i]
                    + S::lit(D6) * k[5][i]
                    + S::lit(D7) * k[6][i]);
            y[i] + theta * (ydiff + th1 * (bspl + theta * (rc4 + th1 * rc5)))
        })
        .collect()
}

/// Integrates `crn` from `x0` over `[0, duration]`.
pub fn integrate<S: Scalar>(
    crn: &Crn<S>,
    x0: &ConcentrationState<S>,
    duration: S,
    cfg: &IntegratorConfig<S>,
) -> Result<Trajectory<S>, IntegrateError> {
    run(crn, x0, duration, cfg, true)
}

/// Like [`integrate`] but only the endpoint is kept.
pub fn integrate_endpoint<S: Scalar>(
    crn: &Crn<S>,
    x0: &ConcentrationState<S>,
    duration: S,
    cfg: &IntegratorConfig<S>,
) -> Result<ConcentrationState<S>, IntegrateError> {
    run(crn, x0, duration, cfg, false).map(|t| t.endpoint)
}

fn to_f64<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn run<S: Scalar>(
    crn: &Crn<S>,
    x0: &ConcentrationState<S>,
    duration: S,
    cfg: &IntegratorConfig<S>,
    dense: bool,
) -> Result<Trajectory<S>, IntegrateError> {
    cfg.validate()?;
    crn.validate_state(x0)?;
    if !(duration >= S::zero()) || !duration.is_finite() {
        return Err(IntegrateError::Duration(duration.as_f64()));
    }
    let n = x0.len();
    let mut y: Vec<S> = x0.values().to_vec();

    let samples = if dense {
        cfg.dense_samples.unwrap_or(0)
    } else {
        0
    };
    let sample_times: Vec<S> = (1..=samples)
        .map(|i| duration * S::lit(i as f64) / S::lit((samples + 1) as f64))
        .collect();
    let mut times = vec![S::zero()];
    let mut states = if dense { vec![y.clone()] } else { Vec::new() };
    let mut next_sample = 0;

    if duration == S::zero() || crn.n_reactions() == 0 {
        if dense {
            times.extend(sample_times.iter().copied());
            states.extend(sample_times.iter().map(|_| y.clone()));
            times.push(duration);
            states.push(y.clone());
        }
        return Ok(Trajectory {
            times,
            states,
            endpoint: ConcentrationState::new(y),
            accepted_steps: 0,
            rejected_steps: 0,
        });
    }

    let h_max = cfg
        .max_step
        .unwrap_or(duration / S::lit(10.0))
        .min(duration);
    let h_min = S::lit(64.0) * S::epsilon() * duration;
    let floor = -S::lit(CLAMP_TOL);
    let mut st = Stages::new(n);
    crn.derivative_into(&y, &mut st.k[0]);

    // Initial guess from the derivative scale.
    let d0 = scaled_norm(&y, &y, &y, cfg);
    let d1 = scaled_norm(&st.k[0], &y, &y, cfg);
    let mut h = if d0 < S::lit(1e-5) || d1 < S::lit(1e-5) {
        S::lit(1e-6) * duration
    } else {
        S::lit(0.01) * d0 / d1
    }
    .min(h_max)
    .max(h_min);

    let mut t = S::zero();
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let safety = S::lit(0.9);
    let fac_min = S::lit(0.2);
    let fac_max = S::lit(5.0);
    let mut last_rejected = false;

    while t < duration {
        if accepted + rejected >= cfg.max_steps {
            return Err(IntegrateError::TooManySteps {
                t: t.as_f64(),
                steps: cfg.max_steps,
                last_state: to_f64(&y),
            });
        }
        let remaining = duration - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        trial_step(crn, &y, h, &mut st);
        let err = scaled_norm(&st.err, &y, &st.y_new, cfg);
        let dips = st.y_new.iter().any(|v| *v < floor);
        if err.is_nan() || st.y_new.iter().any(|v| !v.is_finite()) {
            if h <= h_min {
                return Err(IntegrateError::NonFinite {
                    t: t.as_f64(),
                    last_state: to_f64(&y),
                });
            }
            h = (h * S::lit(0.25)).max(h_min);
            rejected += 1;
            last_rejected = true;
            continue;
        }
        if err > S::one() || dips {
            if h <= h_min {
                return Err(IntegrateError::StepUnderflow {
                    t: t.as_f64(),
                    h: h.as_f64(),
                    last_state: to_f64(&y),
                });
            }
            let fac = if dips {
                S::lit(0.5)
            } else {
                (safety * err.powf(S::lit(-0.2))).max(fac_min)
            };
            h = (h * fac).max(h_min);
            rejected += 1;
            last_rejected = true;
            continue;
        }

        let t_new = if last { duration } else { t + h };
        while dense && next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
            let ts = sample_times[next_sample];
            let theta = ((ts - t) / h).max(S::zero()).min(S::one());
            times.push(ts);
            states.push(interpolate(&y, &st.y_new, &st.k, h, theta));
            next_sample += 1;
        }
        std::mem::swap(&mut y, &mut st.y_new);
        st.k.swap(0, 6);
        t = t_new;
        accepted += 1;

        let mut fac = if err == S::zero() {
            fac_max
        } else {
            (safety * err.powf(S::lit(-0.2))).max(fac_min).min(fac_max)
        };
        if last_rejected {
            fac = fac.min(S::one());
        }
        last_rejected = false;
        h = (h * fac).min(h_max).max(h_min);
    }

    if dense {
        times.push(duration);
        states.push(y.clone());
    }
    Ok(Trajectory {
        times,
        states,
        endpoint: ConcentrationState::new(y),
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// Max-norm of `v` scaled componentwise by `abs + rel·max(|a|,|b|)`.
fn scaled_norm<S: Scalar>(v: &[S], a: &[S], b: &[S], cfg: &IntegratorConfig<S>) -> S {
    let mut m = S::zero();
    for i in 0..v.len() {
        let sc = cfg.abs_tol + cfg.rel_tol * a[i].abs().max(b[i].abs());
        let r = (v[i] / sc).abs();
        if r > m || r.is_nan() {
            m = r;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::parse_crn;

    fn cfg() -> IntegratorConfig<f64> {
        IntegratorConfig::default()
    }

    #[test]
    fn relaxation_and_decay() {
        let c: Crn<f64> = parse_crn("0 -> A ; k=2\nA -> 0 ; k=1").unwrap();
        let x = integrate_endpoint(&c, &ConcentrationState::new(vec![0.0]), 1.0, &cfg()).unwrap();
        assert!((x.raw(0) - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-9);

        let c: Crn<f64> = parse_crn("A -> 0 ; k=1").unwrap();
        let x = integrate_endpoint(&c, &ConcentrationState::new(vec![1.0]), 1.0, &cfg()).unwrap();
        assert!((x.raw(0) - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn dense_samples_follow_solution() {
        let c: Crn<f64> = parse_crn("A -> 0 ; k=1").unwrap();
        let mut cfg = cfg();
        cfg.dense_samples = Some(9);
        let tr = integrate(&c, &ConcentrationState::new(vec![1.0]), 2.0, &cfg).unwrap();
        assert_eq!(tr.times.len(), 11);
        assert_eq!(tr.times[0], 0.0);
        assert_eq!(*tr.times.last().unwrap(), 2.0);
        assert_eq!(tr.states.last().unwrap()[0], tr.endpoint.raw(0));
        for (t, x) in tr.times.iter().zip(&tr.states) {
            assert!((x[0] - (-t).exp()).abs() < 1e-8, "t={t}");
        }
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_duration_is_identity() {
        let c: Crn<f64> = parse_crn("A -> 0 ; k=1").unwrap();
        let x0 = ConcentrationState::new(vec![0.3]);
        assert_eq!(integrate_endpoint(&c, &x0, 0.0, &cfg()).unwrap(), x0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c: Crn<f64> = parse_crn("A -> 0 ; k=1").unwrap();
        let x0 = ConcentrationState::new(vec![1.0]);
        assert!(matches!(
            integrate_endpoint(&c, &x0, -1.0, &cfg()),
            Err(IntegrateError::Duration(_))
        ));
        assert!(integrate_endpoint(&c, &ConcentrationState::new(vec![-1.0]), 1.0, &cfg()).is_err());
        let bad = IntegratorConfig {
            rel_tol: 0.0,
            ..cfg()
        };
        assert!(matches!(
            integrate_endpoint(&c, &x0, 1.0, &bad),
            Err(IntegrateError::Config(_))
        ));
    }

    #[test]
    fn step_budget_reports_last_state() {
        let c: Crn<f64> = parse_crn("A -> 0 ; k=1").unwrap();
        let tight = IntegratorConfig {
            max_steps: 3,
            max_step: Some(0.01),
            ..cfg()
        };
        let err =
            integrate_endpoint(&c, &ConcentrationState::new(vec![1.0]), 1.0, &tight).unwrap_err();
        let (t, x) = err.last_good().unwrap();
        assert!(t > 0.0 && t < 1.0);
        assert!((x[0] - (-t).exp()).abs() < 1e-9);
    }

    #[test]
    fn works_in_single_precision() {
        let c: Crn<f32> = parse_crn("A -> 0 ; k=1").unwrap();
        let cfg = IntegratorConfig::<f32>::with_tolerances(1e-5, 1e-7);
        let x = integrate_endpoint(&c, &ConcentrationState::new(vec![1.0f32]), 1.0, &cfg).unwrap();
        assert!((x.raw(0) - (-1.0f32).exp()).abs() < 1e-4);
    }

    #[test]
    fn csv_layout() {
        let c: Crn<f64> = parse_crn("A -> B ; k=1").unwrap();
        let tr = integrate(&c, &ConcentrationState::new(vec![1.0, 0.0]), 1.0, &cfg()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&["A", "B"], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,A,B\n0,1,0\n"));
        assert_eq!(s.lines().count(), 3);
    }
}
