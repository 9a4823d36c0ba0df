//! Reaction modules of the two-two-one network and their phase schedule.

mod modules;
pub mod names;

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

pub use modules::{
    build_assignment, build_clearout, build_feedforward_layer, build_judgment_standin,
    build_learning, build_precalc, cleared_species, monomials, next_batch_index, product_tree,
    restored_species, weight_entries, weight_snapshot_pairs, Monomial,
};

use crate::crn::{compose, format_reaction, ConcentrationState, Crn, CrnError};
use crate::dataset::{Dataset, DatasetError};
use crate::fcnn::Weights;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum NetbuildError {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("invalid rate constant: {0}")]
    Rate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Crn(#[from] CrnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Dataset size `p` and mini-batch size `p_batch` of the fixed 2-2-1 network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    pub p: usize,
    pub p_batch: usize,
}

impl NetworkShape {
    pub const N_IN: usize = 2;
    pub const N_HIDDEN: usize = 2;
    pub const N_OUT: usize = 1;

    pub fn new(p: usize, p_batch: usize) -> Result<Self, NetbuildError> {
        if p_batch == 0 || p_batch > p || p % p_batch != 0 {
            return Err(NetbuildError::Shape(format!(
                "batch size {p_batch} must divide dataset size {p}"
            )));
        }
        Ok(Self { p, p_batch })
    }

    pub fn batches(&self) -> usize {
        self.p / self.p_batch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModuleKind {
    Assignment(u8),
    Lws(usize),
    Annihilation(usize),
    SigStage1(usize),
    SigStage2(usize),
    Precalc,
    Judgment,
    LearnGrad,
    LearnUpdate,
    Clearout,
}

/// A module's reactions before it is placed in a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleDef<S> {
    pub label: String,
    pub kind: ModuleKind,
    pub crn: Crn<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasedModule<S> {
    pub label: String,
    pub kind: ModuleKind,
    pub crn: Crn<S>,
    /// Odd clock phase the module is catalyzed by.
    pub phase_index: usize,
    /// Global id of each local species.
    pub local_to_global: Vec<usize>,
    /// Species the module only reads (catalysts / inputs).
    pub reads: Vec<String>,
    /// Species the module drives.
    pub writes: Vec<String>,
    /// Local ids of `writes`.
    pub write_local: Vec<usize>,
}

impl<S: Scalar> PhasedModule<S> {
    fn place(def: ModuleDef<S>, phase_index: usize, local_to_global: Vec<usize>) -> Self {
        let write_local = def.crn.driven_species();
        let writes = write_local
            .iter()
            .map(|&i| def.crn.name(i).to_string())
            .collect();
        let reads = (0..def.crn.n_species())
            .filter(|i| !write_local.contains(i))
            .map(|i| def.crn.name(i).to_string())
            .collect();
        Self {
            label: def.label,
            kind: def.kind,
            crn: def.crn,
            phase_index,
            local_to_global,
            reads,
            writes,
            write_local,
        }
    }
}

/// Nonnegative weight rails; the represented weight is `pos − neg`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRailMatrices<S> {
    pub w1_pos: [[S; 3]; 2],
    pub w1_neg: [[S; 3]; 2],
    pub w2_pos: [S; 3],
    pub w2_neg: [S; 3],
}

impl<S: Scalar> DualRailMatrices<S> {
    pub fn zeros() -> Self {
        Self {
            w1_pos: [[S::zero(); 3]; 2],
            w1_neg: [[S::zero(); 3]; 2],
            w2_pos: [S::zero(); 3],
            w2_neg: [S::zero(); 3],
        }
    }

    /// Puts each weight on the rail matching its sign.
    pub fn from_weights(w: &Weights<S>) -> Self {
        let mut r = Self::zeros();
        for i in 0..2 {
            for j in 0..3 {
                r.w1_pos[i][j] = w.w1[i][j].max(S::zero());
                r.w1_neg[i][j] = (-w.w1[i][j]).max(S::zero());
            }
        }
        for j in 0..3 {
            r.w2_pos[j] = w.w2[j].max(S::zero());
            r.w2_neg[j] = (-w.w2[j]).max(S::zero());
        }
        r
    }

    pub fn represented(&self) -> Weights<S> {
        let mut w = Weights::zeros();
        for i in 0..2 {
            for j in 0..3 {
                w.w1[i][j] = self.w1_pos[i][j] - self.w1_neg[i][j];
            }
        }
        for j in 0..3 {
            w.w2[j] = self.w2_pos[j] - self.w2_neg[j];
        }
        w
    }

    /// Rail entry for `(layer, sign, i, j)` with 1-based indices.
    pub fn get(&self, layer: usize, sign: char, i: usize, j: usize) -> S {
        match (layer, sign) {
            (1, '+') => self.w1_pos[i - 1][j - 1],
            (1, _) => self.w1_neg[i - 1][j - 1],
            (_, '+') => self.w2_pos[j - 1],
            _ => self.w2_neg[j - 1],
        }
    }

    pub fn set(&mut self, layer: usize, sign: char, i: usize, j: usize, v: S) {
        let slot = match (layer, sign) {
            (1, '+') => &mut self.w1_pos[i - 1][j - 1],
            (1, _) => &mut self.w1_neg[i - 1][j - 1],
            (_, '+') => &mut self.w2_pos[j - 1],
            _ => &mut self.w2_neg[j - 1],
        };
        *slot = v;
    }

    /// `(species name, value)` for every rail entry.
    pub fn named_entries(&self) -> Vec<(String, S)> {
        weight_entries()
            .into_iter()
            .map(|(layer, sg, i, j)| (names::w(layer, sg, i, j), self.get(layer, sg, i, j)))
            .collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.named_entries().iter().all(|(_, v)| *v >= S::zero())
    }

    /// Largest absolute entrywise difference over all rails.
    pub fn max_rail_diff(&self, other: &Self) -> S {
        weight_entries()
            .into_iter()
            .map(|(layer, sg, i, j)| (self.get(layer, sg, i, j) - other.get(layer, sg, i, j)).abs())
            .fold(S::zero(), S::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildConfig<S> {
    /// Rate constant of assignment and annihilation reactions.
    pub k: S,
    /// Rate constant of the precalculation reactions.
    pub k_pre: S,
    pub eta: S,
    pub threshold: S,
}

impl<S: Scalar> Default for BuildConfig<S> {
    fn default() -> Self {
        Self {
            k: S::lit(2.0),
            k_pre: S::lit(4.0),
            eta: S::lit(0.5),
            threshold: S::lit(0.1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Blueprint<S> {
    pub shape: NetworkShape,
    pub dataset: Dataset<S>,
    pub config: BuildConfig<S>,
    pub modules: Vec<PhasedModule<S>>,
    /// Union of every module's species and reactions.
    pub global: Crn<S>,
    pub initial_state: ConcentrationState<S>,
    pub initial_weights: DualRailMatrices<S>,
}

impl<S: Scalar> Blueprint<S> {
    pub fn id(&self, name: &str) -> Option<usize> {
        self.global.id(name)
    }

    /// Id of a species the blueprint is known to contain.
    pub fn sid(&self, name: &str) -> usize {
        self.global
            .id(name)
            .unwrap_or_else(|| panic!("species `{name}` missing from blueprint"))
    }

    pub fn species_names(&self) -> Vec<&str> {
        self.global
            .species()
            .iter()
            .map(|s| s.name.as_str())
            .collect()
    }

    pub fn module(&self, label: &str) -> Option<&PhasedModule<S>> {
        self.modules.iter().find(|m| m.label == label)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.modules.iter().position(|m| m.label == label)
    }

    /// Weight rails currently held by `state`.
    pub fn read_weights(&self, state: &ConcentrationState<S>) -> DualRailMatrices<S> {
        let mut r = DualRailMatrices::zeros();
        for (layer, sg, i, j) in weight_entries() {
            r.set(
                layer,
                sg,
                i,
                j,
                state.get(self.sid(&names::w(layer, sg, i, j))),
            );
        }
        r
    }

    /// Every module in the reaction text format, preceded by `# phase N: label`.
    pub fn emit_crn(&self) -> String {
        let mut out = String::new();
        for m in &self.modules {
            let _ = writeln!(out, "# phase {}: {}", m.phase_index, m.label);
            if m.kind == ModuleKind::Judgment {
                let _ = writeln!(out, "# comparator on E_l, no reactions");
            }
            for r in m.crn.reactions() {
                let _ = writeln!(out, "{}", format_reaction(&m.crn, r));
            }
        }
        out
    }
}

/// Assembles every module in schedule order on odd phases `1, 3, 5, …`.
pub fn build_bfcnn<S: Scalar>(
    shape: NetworkShape,
    dataset: &Dataset<S>,
    config: BuildConfig<S>,
    initial: &DualRailMatrices<S>,
) -> Result<Blueprint<S>, NetbuildError> {
    dataset.validate()?;
    if dataset.len() != shape.p {
        return Err(NetbuildError::Shape(format!(
            "dataset has {} samples but the shape expects {}",
            dataset.len(),
            shape.p
        )));
    }
    if !initial.is_nonnegative() {
        return Err(NetbuildError::Config(
            "initial weight rails must be nonnegative".into(),
        ));
    }

    let mut defs = build_assignment(&shape, config.k)?;
    defs.extend(build_feedforward_layer(1, &shape, config.k)?);
    defs.extend(build_feedforward_layer(2, &shape, config.k)?);
    defs.push(build_precalc(&shape, config.k_pre)?);
    defs.push(build_judgment_standin(config.threshold)?);
    defs.extend(build_learning(&shape, config.eta)?);
    defs.push(build_clearout(&shape)?);

    let mut global = Crn::empty();
    let mut modules = Vec::with_capacity(defs.len());
    for (n, def) in defs.into_iter().enumerate() {
        let merged = compose(&global, &def.crn, &[])?;
        global = merged.crn;
        modules.push(PhasedModule::place(def, 2 * n + 1, merged.b_to_merged));
    }

    let mut values: HashMap<String, S> = HashMap::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        for r in 1..=3 {
            values.insert(names::x(r, i + 1), s[r - 1]);
        }
    }
    for l in 1..=shape.p_batch {
        values.insert(names::c(l, l), S::one());
    }
    for (name, v) in initial.named_entries() {
        values.insert(name, v);
    }
    for (w, g) in weight_snapshot_pairs() {
        let v = values[&w];
        values.insert(g, v);
    }
    for name in restored_species(&shape) {
        values.insert(name, S::one());
    }
    let mut state = ConcentrationState::zeros(global.n_species());
    for (name, v) in &values {
        if let Some(id) = global.id(name) {
            state.set(id, *v);
        }
    }

    Ok(Blueprint {
        shape,
        dataset: dataset.clone(),
        config,
        modules,
        global,
        initial_state: state,
        initial_weights: initial.clone(),
    })
}
