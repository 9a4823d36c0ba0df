//! Reference two-two-one sigmoid network trained by mini-batch gradient
//! descent, in plain and dual-rail arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::BatchView;
use crate::netbuild::DualRailMatrices;
use crate::scalar::Scalar;

pub fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Plain weights; the last column of each matrix is the bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights<S> {
    pub w1: [[S; 3]; 2],
    pub w2: [S; 3],
}

impl<S: Scalar> Weights<S> {
    pub fn zeros() -> Self {
        Self {
            w1: [[S::zero(); 3]; 2],
            w2: [S::zero(); 3],
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..3 {
                out.w1[i][j] = out.w1[i][j] + other.w1[i][j];
            }
        }
        for j in 0..3 {
            out.w2[j] = out.w2[j] + other.w2[j];
        }
        out
    }

    /// Flattened `w1` (row major) followed by `w2`.
    pub fn flat(&self) -> [S; 9] {
        let mut out = [S::zero(); 9];
        for i in 0..2 {
            out[3 * i..3 * i + 3].copy_from_slice(&self.w1[i]);
        }
        out[6..].copy_from_slice(&self.w2);
        out
    }

    pub fn from_flat(v: &[S; 9]) -> Self {
        let mut w = Self::zeros();
        for i in 0..2 {
            w.w1[i].copy_from_slice(&v[3 * i..3 * i + 3]);
        }
        w.w2.copy_from_slice(&v[6..]);
        w
    }
}

/// Intermediate quantities of one forward pass, one entry per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward<S> {
    pub n: Vec<[S; 2]>,
    pub upsilon: Vec<[S; 2]>,
    pub n_tilde: Vec<S>,
    pub y: Vec<S>,
}

pub fn feedforward<S: Scalar>(w: &Weights<S>, batch: &BatchView<S>) -> Forward<S> {
    let mut f = Forward {
        n: Vec::with_capacity(batch.len()),
        upsilon: Vec::with_capacity(batch.len()),
        n_tilde: Vec::with_capacity(batch.len()),
        y: Vec::with_capacity(batch.len()),
    };
    for xi in &batch.xi {
        let mut n = [S::zero(); 2];
        for (i, row) in w.w1.iter().enumerate() {
            n[i] = row[0] * xi[0] + row[1] * xi[1] + row[2] * xi[2];
        }
        let u = [sigmoid(n[0]), sigmoid(n[1])];
        let nt = w.w2[0] * u[0] + w.w2[1] * u[1] + w.w2[2];
        f.n.push(n);
        f.upsilon.push(u);
        f.n_tilde.push(nt);
        f.y.push(sigmoid(nt));
    }
    f
}

/// `½ Σ (d_l − y_l)²`.
pub fn loss<S: Scalar>(y: &[S], delta: &[S]) -> S {
    let half = S::lit(0.5);
    y.iter()
        .zip(delta)
        .map(|(&y, &d)| half * (d - y) * (d - y))
        .sum()
}

/// Weight increments `−η ∂E/∂W` for one batch.
pub fn gradients<S: Scalar>(w: &Weights<S>, batch: &BatchView<S>, eta: S) -> Weights<S> {
    let f = feedforward(w, batch);
    let mut g = Weights::zeros();
    for l in 0..batch.len() {
        let y = f.y[l];
        let e = batch.delta[l] - y;
        let out = e * y * (S::one() - y);
        let ut = [f.upsilon[l][0], f.upsilon[l][1], S::one()];
        for j in 0..3 {
            g.w2[j] = g.w2[j] + eta * out * ut[j];
        }
        for i in 0..2 {
            let u = f.upsilon[l][i];
            let hidden = out * w.w2[i] * u * (S::one() - u);
            for j in 0..3 {
                g.w1[i][j] = g.w1[i][j] + eta * hidden * batch.xi[l][j];
            }
        }
    }
    g
}

pub fn mbgd_step<S: Scalar>(w: &Weights<S>, batch: &BatchView<S>, eta: S) -> Weights<S> {
    w.add(&gradients(w, batch, eta))
}

/// Rail-separated gradient sums: `par⁺` collects monomials with an even
/// number of negative-rail factors, `par⁻` those with an odd number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RailGradient<S> {
    pub pos: Weights<S>,
    pub neg: Weights<S>,
}

/// Splits `d − y` into its positive and negative parts.
pub fn error_rails<S: Scalar>(d: S, y: S) -> (S, S) {
    let e = d - y;
    (e.max(S::zero()), (-e).max(S::zero()))
}

/// Batch sums of the signed gradient monomials. Samples are visited in order
/// and, within a sample, `++` precedes `−−` and `+−` precedes `−+`.
pub fn rail_gradient<S: Scalar>(
    rails: &DualRailMatrices<S>,
    batch: &BatchView<S>,
) -> RailGradient<S> {
    let w = rails.represented();
    let f = feedforward(&w, batch);
    let mut pos = Weights::zeros();
    let mut neg = Weights::zeros();
    for l in 0..batch.len() {
        let y = f.y[l];
        let (ep, em) = error_rails(batch.delta[l], y);
        let sy = S::one() - y;
        for j in 0..3 {
            let pt = if j < 2 { f.upsilon[l][j] } else { S::one() };
            pos.w2[j] = pos.w2[j] + ep * y * sy * pt;
            neg.w2[j] = neg.w2[j] + em * y * sy * pt;
        }
        for i in 0..2 {
            let u = f.upsilon[l][i];
            let su = S::one() - u;
            let (wp, wm) = (rails.w2_pos[i], rails.w2_neg[i]);
            for j in 0..3 {
                let s = batch.xi[l][j];
                let mono = |e: S, w2: S| e * u * y * sy * su * w2 * s;
                pos.w1[i][j] = pos.w1[i][j] + mono(ep, wp) + mono(em, wm);
                neg.w1[i][j] = neg.w1[i][j] + mono(ep, wm) + mono(em, wp);
            }
        }
    }
    RailGradient { pos, neg }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState<S> {
    pub rails: DualRailMatrices<S>,
    pub iteration: usize,
}

impl<S: Scalar> ReferenceState<S> {
    pub fn new(rails: DualRailMatrices<S>) -> Self {
        Self {
            rails,
            iteration: 0,
        }
    }

    pub fn weights(&self) -> Weights<S> {
        self.rails.represented()
    }
}

/// Adds `η·par⁺` to the positive rails and `η·par⁻` to the negative rails.
pub fn dual_rail_step<S: Scalar>(
    state: &ReferenceState<S>,
    batch: &BatchView<S>,
    eta: S,
) -> ReferenceState<S> {
    let g = rail_gradient(&state.rails, batch);
    let mut r = state.rails.clone();
    for i in 0..2 {
        for j in 0..3 {
            r.w1_pos[i][j] = r.w1_pos[i][j] + eta * g.pos.w1[i][j];
            r.w1_neg[i][j] = r.w1_neg[i][j] + eta * g.neg.w1[i][j];
        }
    }
    for j in 0..3 {
        r.w2_pos[j] = r.w2_pos[j] + eta * g.pos.w2[j];
        r.w2_neg[j] = r.w2_neg[j] + eta * g.neg.w2[j];
    }
    ReferenceState {
        rails: r,
        iteration: state.iteration + 1,
    }
}

/// Default initial rails: positive entries uniform in `[lo, hi]`, negative rails zero.
pub fn random_initial<S: Scalar>(seed: u64, lo: f64, hi: f64) -> DualRailMatrices<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || S::lit(rng.random_range(lo..=hi));
    let mut r = DualRailMatrices::zeros();
    for i in 0..2 {
        for j in 0..3 {
            r.w1_pos[i][j] = draw();
        }
    }
    for j in 0..3 {
        r.w2_pos[j] = draw();
    }
    r
}

/// Classifies every sample at the 0.5 threshold and reports whether all match their label.
pub fn classifies<S: Scalar>(w: &Weights<S>, batch: &BatchView<S>) -> bool {
    let half = S::lit(0.5);
    feedforward(w, batch)
        .y
        .iter()
        .zip(&batch.delta)
        .all(|(&y, &d)| (y >= half) == (d >= half))
}
