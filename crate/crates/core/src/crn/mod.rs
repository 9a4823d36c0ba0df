//! Chemical reaction networks under mass-action kinetics.
//!
//! A [`Crn`] owns a dense species table and a list of [`Reaction`]s. The
//! induced ODE is `dx/dt = Γ·K(x)` where column `j` of the stoichiometric
//! matrix `Γ` is the product complex minus the reactant complex of reaction
//! `j`, and `K_j(x) = k_j ∏ x_i^{v_ij}`.

mod text;

use std::collections::HashMap;

use thiserror::Error;

use crate::scalar::Scalar;

pub use text::{format_reaction, parse_crn, write_crn};

/// States may undershoot zero by at most this much before they are rejected.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrnError {
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("species id {id} out of range for a network with {n} species")]
    SpeciesOutOfRange { id: usize, n: usize },
    #[error("reaction {index}: rate constant must be positive and finite, got {rate}")]
    InvalidRate { index: usize, rate: f64 },
    #[error("reaction {index} has neither reactants nor products")]
    EmptyReaction { index: usize },
    #[error("duplicate species name `{0}`")]
    DuplicateSpecies(String),
    #[error("state has {found} entries but the network has {expected} species")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("species `{species}` has concentration {value} below -{CLAMP_TOL}")]
    NegativeConcentration { species: String, value: f64 },
    #[error("cannot merge species: {0}")]
    Conflict(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A named chemical species with its dense index inside one network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Species {
    pub id: usize,
    pub name: String,
}

/// Sparse complex: `(species id, stoichiometric coefficient)` sorted by id,
/// zero coefficients dropped.
pub type Complex = Vec<(usize, u32)>;

fn normalize(mut terms: Vec<(usize, u32)>) -> Complex {
    terms.sort_by_key(|t| t.0);
    let mut out: Complex = Vec::with_capacity(terms.len());
    for (id, c) in terms {
        if c == 0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.0 == id => last.1 += c,
            _ => out.push((id, c)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction<S> {
    reactants: Complex,
    products: Complex,
    rate: S,
}

impl<S: Scalar> Reaction<S> {
    /// Builds a reaction over species ids. Coefficients of repeated ids are summed.
    pub fn new(reactants: Vec<(usize, u32)>, products: Vec<(usize, u32)>, rate: S) -> Self {
        Self {
            reactants: normalize(reactants),
            products: normalize(products),
            rate,
        }
    }

    pub fn reactants(&self) -> &Complex {
        &self.reactants
    }

    pub fn products(&self) -> &Complex {
        &self.products
    }

    pub fn rate_constant(&self) -> S {
        self.rate
    }

    /// Same reaction with a different rate constant.
    pub fn with_rate(&self, rate: S) -> Self {
        Self {
            rate,
            ..self.clone()
        }
    }

    /// Net change of species `id` per unit extent of this reaction.
    pub fn net(&self, id: usize) -> i64 {
        let coef = |c: &Complex| {
            c.iter()
                .find(|t| t.0 == id)
                .map(|t| t.1 as i64)
                .unwrap_or(0)
        };
        coef(&self.products) - coef(&self.reactants)
    }

    /// Mass-action rate `k ∏ x_i^{v_i}`, reading negative entries as zero.
    pub fn rate(&self, x: &[S]) -> S {
        self.reactants.iter().fold(self.rate, |acc, &(id, c)| {
            let xi = x[id].max(S::zero());
            acc * if c == 1 { xi } else { xi.powi(c as i32) }
        })
    }

    fn max_id(&self) -> Option<usize> {
        self.reactants
            .iter()
            .chain(self.products.iter())
            .map(|t| t.0)
            .max()
    }
}

/// Rate of reaction `r` at state `x`.
pub fn reaction_rate<S: Scalar>(r: &Reaction<S>, x: &ConcentrationState<S>) -> S {
    r.rate(x.values())
}

/// Concentration vector indexed by species id.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationState<S> {
    values: Vec<S>,
}

impl<S: Scalar> ConcentrationState<S> {
    pub fn new(values: Vec<S>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![S::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Clamped read: never negative.
    pub fn get(&self, id: usize) -> S {
        self.values[id].max(S::zero())
    }

    /// Unclamped stored value.
    pub fn raw(&self, id: usize) -> S {
        self.values[id]
    }

    pub fn set(&mut self, id: usize, value: S) {
        self.values[id] = value;
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    /// Index of the first entry below `-CLAMP_TOL`, if any.
    pub fn first_violation(&self) -> Option<usize> {
        let floor = -S::lit(CLAMP_TOL);
        self.values.iter().position(|v| *v < floor || v.is_nan())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crn<S> {
    species: Vec<Species>,
    index: HashMap<String, usize>,
    reactions: Vec<Reaction<S>>,
}

impl<S: Scalar> Default for Crn<S> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<S: Scalar> Crn<S> {
    pub fn empty() -> Self {
        Self {
            species: Vec::new(),
            index: HashMap::new(),
            reactions: Vec::new(),
        }
    }

    /// Validates and assembles a network from species names and reactions over their ids.
    pub fn new(names: Vec<String>, reactions: Vec<Reaction<S>>) -> Result<Self, CrnError> {
        let mut index = HashMap::with_capacity(names.len());
        let mut species = Vec::with_capacity(names.len());
        for (id, name) in names.into_iter().enumerate() {
            if index.insert(name.clone(), id).is_some() {
                return Err(CrnError::DuplicateSpecies(name));
            }
            species.push(Species { id, name });
        }
        let n = species.len();
        for (i, r) in reactions.iter().enumerate() {
            let k = r.rate;
            if !(k > S::zero()) || !k.is_finite() {
                return Err(CrnError::InvalidRate {
                    index: i,
                    rate: k.as_f64(),
                });
            }
            if r.reactants.is_empty() && r.products.is_empty() {
                return Err(CrnError::EmptyReaction { index: i });
            }
            if let Some(id) = r.max_id() {
                if id >= n {
                    return Err(CrnError::SpeciesOutOfRange { id, n });
                }
            }
        }
        Ok(Self {
            species,
            index,
            reactions,
        })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction<S>] {
        &self.reactions
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.species[id].name
    }

    pub fn require(&self, name: &str) -> Result<usize, CrnError> {
        self.id(name)
            .ok_or_else(|| CrnError::UnknownSpecies(name.to_string()))
    }

    /// `Γ` as a dense row-major `n_species × n_reactions` integer matrix.
    pub fn stoichiometric_matrix(&self) -> Vec<Vec<i64>> {
        let mut gamma = vec![vec![0i64; self.reactions.len()]; self.species.len()];
        for (j, r) in self.reactions.iter().enumerate() {
            for &(id, c) in &r.products {
                gamma[id][j] += c as i64;
            }
            for &(id, c) in &r.reactants {
                gamma[id][j] -= c as i64;
            }
        }
        gamma
    }

    /// Species with a nonzero row in `Γ`: the species this network can change.
    pub fn driven_species(&self) -> Vec<usize> {
        self.stoichiometric_matrix()
            .iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(|&g| g != 0))
            .map(|(i, _)| i)
            .collect()
    }

    /// `Γ·K(x)` written into `out`. Slices must already match `n_species`.
    pub fn derivative_into(&self, x: &[S], out: &mut [S]) {
        out.iter_mut().for_each(|v| *v = S::zero());
        for r in &self.reactions {
            let rate = r.rate(x);
            if rate == S::zero() {
                continue;
            }
            for &(id, c) in &r.reactants {
                out[id] = out[id] - rate * S::lit(c as f64);
            }
            for &(id, c) in &r.products {
                out[id] = out[id] + rate * S::lit(c as f64);
            }
        }
    }

    /// `dx/dt = Γ·K(x)`.
    pub fn derivative(&self, x: &ConcentrationState<S>) -> Result<Vec<S>, CrnError> {
        if x.len() != self.n_species() {
            return Err(CrnError::DimensionMismatch {
                expected: self.n_species(),
                found: x.len(),
            });
        }
        let mut out = vec![S::zero(); x.len()];
        self.derivative_into(x.values(), &mut out);
        Ok(out)
    }

    /// Checks dimensions and rejects entries below `-CLAMP_TOL`.
    pub fn validate_state(&self, x: &ConcentrationState<S>) -> Result<(), CrnError> {
        if x.len() != self.n_species() {
            return Err(CrnError::DimensionMismatch {
                expected: self.n_species(),
                found: x.len(),
            });
        }
        if let Some(i) = x.first_violation() {
            return Err(CrnError::NegativeConcentration {
                species: self.name(i).to_string(),
                value: x.raw(i).as_f64(),
            });
        }
        Ok(())
    }

    /// State built from `(name, value)` pairs; unnamed species start at zero.
    pub fn state_from<'a, I>(&self, values: I) -> Result<ConcentrationState<S>, CrnError>
    where
        I: IntoIterator<Item = (&'a str, S)>,
    {
        let mut x = ConcentrationState::zeros(self.n_species());
        for (name, v) in values {
            x.set(self.require(name)?, v);
        }
        Ok(x)
    }
}

/// Incremental builder that assigns ids to species names on first use.
#[derive(Debug, Clone, Default)]
pub struct CrnBuilder<S> {
    names: Vec<String>,
    index: HashMap<String, usize>,
    reactions: Vec<Reaction<S>>,
}

impl<S: Scalar> CrnBuilder<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            index: HashMap::new(),
            reactions: Vec::new(),
        }
    }

    /// Id of `name`, registering it if new.
    pub fn species(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    /// Adds `reactants -> products` with rate constant `k`.
    pub fn reaction(
        &mut self,
        reactants: &[(&str, u32)],
        products: &[(&str, u32)],
        k: S,
    ) -> &mut Self {
        let r: Vec<_> = reactants
            .iter()
            .map(|(n, c)| (self.species(n), *c))
            .collect();
        let p: Vec<_> = products
            .iter()
            .map(|(n, c)| (self.species(n), *c))
            .collect();
        self.reactions.push(Reaction::new(r, p, k));
        self
    }

    /// `catalysts -> catalysts + product` at rate `k`: contributes `k ∏ catalysts` to `product`.
    pub fn produce(&mut self, catalysts: &[&str], product: &str, k: S) -> &mut Self {
        let r: Vec<(&str, u32)> = catalysts.iter().map(|n| (*n, 1)).collect();
        let mut p = r.clone();
        p.push((product, 1));
        self.reaction(&r, &p, k)
    }

    /// `x -> ∅` at rate `k`.
    pub fn decay(&mut self, species: &str, k: S) -> &mut Self {
        self.reaction(&[(species, 1)], &[], k)
    }

    pub fn build(self) -> Result<Crn<S>, CrnError> {
        Crn::new(self.names, self.reactions)
    }
}

/// Result of [`compose`]: the merged network and where each input species landed.
#[derive(Debug, Clone)]
pub struct Composition<S> {
    pub crn: Crn<S>,
    pub a_to_merged: Vec<usize>,
    pub b_to_merged: Vec<usize>,
}

/// Union of two networks. Species with equal names are merged; `shared`
/// additionally maps a species name of `b` onto a species name of `a`.
pub fn compose<S: Scalar>(
    a: &Crn<S>,
    b: &Crn<S>,
    shared: &[(&str, &str)],
) -> Result<Composition<S>, CrnError> {
    let mut rename: HashMap<&str, &str> = HashMap::new();
    for &(from_b, to_a) in shared {
        if b.id(from_b).is_none() {
            return Err(CrnError::Conflict(format!(
                "mapping source `{from_b}` is not a species of the second network"
            )));
        }
        if a.id(to_a).is_none() {
            return Err(CrnError::Conflict(format!(
                "mapping target `{to_a}` is not a species of the first network"
            )));
        }
        if let Some(prev) = rename.insert(from_b, to_a) {
            if prev != to_a {
                return Err(CrnError::Conflict(format!(
                    "`{from_b}` mapped to both `{prev}` and `{to_a}`"
                )));
            }
        }
    }
    // A renamed species would collide with an unrelated b-species of the target name.
    for (&from_b, &to_a) in &rename {
        if from_b != to_a && b.id(to_a).is_some() && !rename.contains_key(to_a) {
            return Err(CrnError::Conflict(format!(
                "`{from_b}` mapped onto `{to_a}`, which is also a distinct species of the second network"
            )));
        }
    }

    let mut names: Vec<String> = a.species.iter().map(|s| s.name.clone()).collect();
    let mut index: HashMap<String, usize> = a.index.clone();
    let a_to_merged: Vec<usize> = (0..a.n_species()).collect();
    let mut b_to_merged = Vec::with_capacity(b.n_species());
    let mut claimed: HashMap<usize, &str> = HashMap::new();
    for s in &b.species {
        let target = rename
            .get(s.name.as_str())
            .copied()
            .unwrap_or(s.name.as_str());
        let id = match index.get(target) {
            Some(&id) => id,
            None => {
                let id = names.len();
                names.push(target.to_string());
                index.insert(target.to_string(), id);
                id
            }
        };
        if let Some(other) = claimed.insert(id, s.name.as_str()) {
            return Err(CrnError::Conflict(format!(
                "`{other}` and `{}` both resolve to `{target}`",
                s.name
            )));
        }
        b_to_merged.push(id);
    }

    let remap = |c: &Complex, map: &[usize]| -> Vec<(usize, u32)> {
        c.iter().map(|&(id, k)| (map[id], k)).collect()
    };
    let mut reactions = a.reactions.clone();
    reactions.extend(b.reactions.iter().map(|r| {
        Reaction::new(
            remap(&r.reactants, &b_to_merged),
            remap(&r.products, &b_to_merged),
            r.rate,
        )
    }));
    Ok(Composition {
        crn: Crn::new(names, reactions)?,
        a_to_merged,
        b_to_merged,
    })
}
