//! Idealized phase clock: one module active at a time, everything else frozen.

use std::collections::HashMap;

use log::warn;
use thiserror::Error;

use crate::crn::{ConcentrationState, CrnBuilder};
use crate::dataset::DatasetError;
use crate::errorlab::{realization_error, ErrorRecord};
use crate::fcnn::{dual_rail_step, ReferenceState};
use crate::integrate::{integrate_endpoint, IntegrateError, IntegratorConfig};
use crate::netbuild::{names as nm, Blueprint, DualRailMatrices, ModuleKind};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("phase {phase} ({label}): {source}")]
    Phase {
        phase: usize,
        label: String,
        #[source]
        source: IntegrateError,
    },
    #[error("no phase at position {0}")]
    NoSuchPhase(usize),
    #[error("state has {found} entries, blueprint has {expected} species")]
    Dimension { expected: usize, found: usize },
    #[error("phase length must be nonnegative and finite")]
    PhaseLength,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockConfig<S> {
    /// Phase length.
    pub t: S,
    pub max_iterations: usize,
    /// Overrides the blueprint's judgment threshold.
    pub threshold: Option<S>,
    pub integrator: IntegratorConfig<S>,
    /// Keep the full state after every phase.
    pub trace: bool,
    /// Scale `c` of the realization error.
    pub error_scale: S,
}

impl<S: Scalar> ClockConfig<S> {
    pub fn new(t: S, max_iterations: usize) -> Self {
        Self {
            t,
            max_iterations,
            threshold: None,
            integrator: IntegratorConfig::default(),
            trace: false,
            error_scale: S::one(),
        }
    }
}

/// Net-input rails of node `node` (3 is the output node) for batch slot `sample`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetInput<S> {
    pub node: usize,
    pub sample: usize,
    pub pos: S,
    pub neg: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<S> {
    pub phase_index: usize,
    pub label: String,
    pub state: ConcentrationState<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<S> {
    pub iteration: usize,
    /// Zero-based batch the iteration trained on.
    pub batch: usize,
    /// Weight rails at the end of the iteration.
    pub weights: DualRailMatrices<S>,
    /// Reference rails after the matching update, when run in lockstep.
    pub reference: Option<DualRailMatrices<S>>,
    /// Rails right after the weighted-sum phases.
    pub net_inputs: Vec<NetInput<S>>,
    /// Network outputs `Y_l` after the output sigmoid.
    pub outputs: Vec<S>,
    /// Signed errors `E⁺_l − E⁻_l`.
    pub errors: Vec<S>,
    /// Absolute errors `E_l` seen by the judgment comparator.
    pub abs_errors: Vec<S>,
    pub terminated: bool,
    /// `(node, sample)` pairs whose rails nearly cancelled after annihilation.
    pub degenerate: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
    pub error: Option<ErrorRecord>,
    pub snapshots: Vec<Snapshot<S>>,
}

impl<S: Scalar> IterationRecord<S> {
    pub fn train_err_max(&self) -> S {
        self.abs_errors.iter().fold(S::zero(), |a, &b| a.max(b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace<S> {
    pub dataset: String,
    pub t: S,
    pub max_iterations: usize,
    pub threshold: S,
    pub records: Vec<IterationRecord<S>>,
    pub terminated_at: Option<usize>,
    pub final_reference: DualRailMatrices<S>,
}

/// Runs module `position` of the schedule for time `t`. Only the module's
/// driven species are written back.
pub fn run_phase<S: Scalar>(
    bp: &Blueprint<S>,
    position: usize,
    state: &ConcentrationState<S>,
    t: S,
    cfg: &IntegratorConfig<S>,
) -> Result<ConcentrationState<S>, SchedulerError> {
    let module = bp
        .modules
        .get(position)
        .ok_or(SchedulerError::NoSuchPhase(position))?;
    if state.len() != bp.global.n_species() {
        return Err(SchedulerError::Dimension {
            expected: bp.global.n_species(),
            found: state.len(),
        });
    }
    if !(t >= S::zero()) || !t.is_finite() {
        return Err(SchedulerError::PhaseLength);
    }
    if t == S::zero() || module.crn.n_reactions() == 0 {
        return Ok(state.clone());
    }
    let local: Vec<S> = module
        .local_to_global
        .iter()
        .map(|&g| state.raw(g))
        .collect();
    let end = integrate_endpoint(&module.crn, &ConcentrationState::new(local), t, cfg).map_err(
        |source| SchedulerError::Phase {
            phase: module.phase_index,
            label: module.label.clone(),
            source,
        },
    )?;
    let mut out = state.clone();
    for &li in &module.write_local {
        out.set(module.local_to_global[li], end.raw(li));
    }
    Ok(out)
}

/// Lower bound on the phase length that keeps the sign of `x − y` aligned
/// with `c₁ − c₂`: `ln(1 + Σ history / current)`. Infinite when `current` is zero.
pub fn feasible_phase_length<S: Scalar>(history: &[S], current: S) -> S {
    if current == S::zero() {
        return S::infinity();
    }
    let sum: S = history.iter().map(|h| h.abs()).sum();
    (S::one() + sum / current.abs()).ln()
}

/// Runs every phase of one iteration in schedule order.
pub fn run_iteration<S: Scalar>(
    bp: &Blueprint<S>,
    state: &ConcentrationState<S>,
    clock: &ClockConfig<S>,
    iteration: usize,
) -> Result<(ConcentrationState<S>, IterationRecord<S>), SchedulerError> {
    let threshold = clock.threshold.unwrap_or(bp.config.threshold);
    let pb = bp.shape.p_batch;
    let read = |x: &ConcentrationState<S>, name: &str| x.get(bp.sid(name));
    let mut rec = IterationRecord {
        iteration,
        batch: (iteration.max(1) - 1) % bp.shape.batches(),
        weights: DualRailMatrices::zeros(),
        reference: None,
        net_inputs: Vec::new(),
        outputs: Vec::new(),
        errors: Vec::new(),
        abs_errors: Vec::new(),
        terminated: false,
        degenerate: Vec::new(),
        warnings: Vec::new(),
        error: None,
        snapshots: Vec::new(),
    };
    let mut x = state.clone();
    for (pos, module) in bp.modules.iter().enumerate() {
        if module.kind == ModuleKind::Judgment {
            rec.terminated = rec.abs_errors.iter().all(|&e| e < threshold);
            if clock.trace {
                rec.snapshots.push(Snapshot {
                    phase_index: module.phase_index,
                    label: module.label.clone(),
                    state: x.clone(),
                });
            }
            if rec.terminated {
                break;
            }
            continue;
        }
        x = run_phase(bp, pos, &x, clock.t, &clock.integrator)?;
        if clock.trace {
            rec.snapshots.push(Snapshot {
                phase_index: module.phase_index,
                label: module.label.clone(),
                state: x.clone(),
            });
        }
        match module.kind {
            ModuleKind::Lws(layer) => {
                let nodes: &[usize] = if layer == 1 { &[1, 2] } else { &[3] };
                for l in 1..=pb {
                    for &node in nodes {
                        rec.net_inputs.push(NetInput {
                            node,
                            sample: l,
                            pos: read(&x, &nm::n('+', node, l)),
                            neg: read(&x, &nm::n('-', node, l)),
                        });
                    }
                }
            }
            ModuleKind::Annihilation(layer) => {
                let nodes: &[usize] = if layer == 1 { &[1, 2] } else { &[3] };
                for l in 1..=pb {
                    for &node in nodes {
                        let d = read(&x, &nm::n('+', node, l)) - read(&x, &nm::n('-', node, l));
                        if d.abs() < S::lit(1e-6) {
                            rec.degenerate.push((node, l));
                            warn!("iteration {iteration}: net input of node {node}, sample {l} nearly cancelled ({d})");
                        }
                    }
                }
            }
            ModuleKind::SigStage2(2) => {
                rec.outputs = (1..=pb).map(|l| read(&x, &nm::y(l))).collect();
            }
            ModuleKind::Precalc => {
                rec.errors = (1..=pb)
                    .map(|l| read(&x, &nm::e_rail('+', l)) - read(&x, &nm::e_rail('-', l)))
                    .collect();
                rec.abs_errors = (1..=pb).map(|l| read(&x, &nm::e(l))).collect();
            }
            _ => {}
        }
    }
    rec.weights = bp.read_weights(&x);
    Ok((x, rec))
}

/// Trains until the comparator fires or `max_iterations` is reached, with the
/// dual-rail reference network updated on the same batches.
pub fn run_training<S: Scalar>(
    bp: &Blueprint<S>,
    clock: &ClockConfig<S>,
) -> Result<TrainingTrace<S>, SchedulerError> {
    let mut trace = TrainingTrace {
        dataset: bp.dataset.name.clone(),
        t: clock.t,
        max_iterations: clock.max_iterations,
        threshold: clock.threshold.unwrap_or(bp.config.threshold),
        records: Vec::new(),
        terminated_at: None,
        final_reference: bp.initial_weights.clone(),
    };
    let mut reference = ReferenceState::new(bp.initial_weights.clone());
    let mut state = bp.initial_state.clone();
    let mut history: HashMap<(usize, usize), Vec<S>> = HashMap::new();

    for m in 1..=clock.max_iterations {
        let (next, mut rec) = run_iteration(bp, &state, clock, m)?;
        state = next;

        for ni in &rec.net_inputs {
            let diff = (ni.pos - ni.neg).abs();
            let past = history.entry((ni.node, ni.sample)).or_default();
            let bound = feasible_phase_length(past, diff);
            if clock.t <= bound {
                let msg = format!(
                    "iteration {m}: phase length {} below feasible bound {} for node {}, sample {}",
                    clock.t, bound, ni.node, ni.sample
                );
                warn!("{msg}");
                rec.warnings.push(msg);
            }
            past.push(diff);
            let magnitude = ni.pos.max(ni.neg);
            if magnitude >= bp.config.k_pre {
                let msg = format!(
                    "iteration {m}: net input {} reaches the precalculation rate {}",
                    magnitude, bp.config.k_pre
                );
                warn!("{msg}");
                rec.warnings.push(msg);
            }
        }

        if !rec.terminated {
            let batch = bp.dataset.batch(rec.batch, bp.shape.p_batch)?;
            reference = dual_rail_step(&reference, &batch, bp.config.eta);
        }
        rec.reference = Some(reference.rails.clone());
        let (err_w1, err_w2, err_total) =
            realization_error(&rec.weights, &reference.rails, clock.error_scale);
        rec.error = Some(ErrorRecord {
            dataset: bp.dataset.name.clone(),
            t: clock.t.as_f64(),
            iteration: m,
            err_w1: err_w1.as_f64(),
            err_w2: err_w2.as_f64(),
            err_total: err_total.as_f64(),
            train_err_max: rec.train_err_max().as_f64(),
            terminated: rec.terminated,
        });
        let stop = rec.terminated;
        trace.records.push(rec);
        if stop {
            trace.terminated_at = Some(m);
            break;
        }
    }
    trace.final_reference = reference.rails;
    Ok(trace)
}

/// The two alternating systems `ẋ = c₁ − x, ẏ = c₂ − y` and `ẋ = ẏ = −xy`,
/// each run for `t` per round from `x = y = 0`. Returns `(x, y)` after each round.
pub fn alternating_system<S: Scalar>(
    schedule: &[(S, S)],
    t: S,
    cfg: &IntegratorConfig<S>,
) -> Result<Vec<(S, S)>, IntegrateError> {
    let mut relax = CrnBuilder::new();
    relax.species("x");
    relax.species("y");
    relax.decay("x", S::one()).decay("y", S::one());
    let relax = relax.build()?;
    let mut annih = CrnBuilder::new();
    annih.reaction(&[("x", 1), ("y", 1)], &[], S::one());
    let annih = annih.build()?;

    let mut x = ConcentrationState::zeros(2);
    let mut out = Vec::with_capacity(schedule.len());
    for &(c1, c2) in schedule {
        // Sources are per-round constants, so add them as zero-order reactions.
        let mut src = CrnBuilder::new();
        src.species("x");
        src.species("y");
        if c1 > S::zero() {
            src.reaction(&[], &[("x", 1)], c1);
        }
        if c2 > S::zero() {
            src.reaction(&[], &[("y", 1)], c2);
        }
        let sys1 = crate::crn::compose(&relax, &src.build()?, &[])?.crn;
        x = integrate_endpoint(&sys1, &x, t, cfg)?;
        x = integrate_endpoint(&annih, &x, t, cfg)?;
        out.push((x.get(0), x.get(1)));
    }
    Ok(out)
}
