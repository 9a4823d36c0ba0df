//! Builders for the reaction modules of one training iteration.

use super::names::{self as nm, SIGNS};
use super::{ModuleDef, ModuleKind, NetbuildError, NetworkShape};
use crate::crn::CrnBuilder;
use crate::scalar::Scalar;

fn finish<S: Scalar>(
    label: &str,
    kind: ModuleKind,
    b: CrnBuilder<S>,
) -> Result<ModuleDef<S>, NetbuildError> {
    Ok(ModuleDef {
        label: label.to_string(),
        kind,
        crn: b.build()?,
    })
}

/// Cyclic shift of a sample index to the same slot of the next batch.
pub fn next_batch_index(shape: &NetworkShape, i: usize) -> usize {
    (i - 1 + shape.p_batch) % shape.p + 1
}

/// Loads the current batch into `S_{r,l}`, moves the order selectors `C`
/// into `Ct`, then shifts them back into `C` one batch ahead.
pub fn build_assignment<S: Scalar>(
    shape: &NetworkShape,
    k: S,
) -> Result<Vec<ModuleDef<S>>, NetbuildError> {
    if !(k > S::one()) || !k.is_finite() {
        return Err(NetbuildError::Rate(format!(
            "assignment rate constant must exceed 1, got {k}"
        )));
    }
    let one = S::one();
    let (p, pb) = (shape.p, shape.p_batch);

    let mut m1 = CrnBuilder::new();
    for l in 1..=pb {
        for r in 1..=3 {
            for i in 1..=p {
                m1.produce(&[&nm::x(r, i), &nm::c(l, i)], &nm::s(r, l), one);
            }
            m1.decay(&nm::s(r, l), one);
        }
    }

    let mut m2 = CrnBuilder::new();
    for l in 1..=pb {
        for i in 1..=p {
            m2.reaction(&[(&nm::c(l, i), 1)], &[(&nm::ct(l, i), 1)], k);
        }
    }

    let mut m3 = CrnBuilder::new();
    for l in 1..=pb {
        for i in 1..=p {
            let to = next_batch_index(shape, i);
            m3.reaction(&[(&nm::ct(l, i), 1)], &[(&nm::c(l, to), 1)], k);
        }
    }

    Ok(vec![
        finish("M^a_1", ModuleKind::Assignment(1), m1)?,
        finish("M^a_2", ModuleKind::Assignment(2), m2)?,
        finish("M^a_3", ModuleKind::Assignment(3), m3)?,
    ])
}

fn net_index(layer: usize, i: usize) -> usize {
    if layer == 1 {
        i
    } else {
        3
    }
}

fn hidden_rows(layer: usize) -> std::ops::RangeInclusive<usize> {
    if layer == 1 {
        1..=2
    } else {
        1..=1
    }
}

/// Sigmoid rail and combined output species of node `i` for sample `l`.
fn out_rail(layer: usize, sign: char, i: usize, l: usize) -> String {
    if layer == 1 {
        nm::p_rail(sign, i, l)
    } else {
        nm::y_rail(sign, l)
    }
}

fn out_combined(layer: usize, i: usize, l: usize) -> String {
    if layer == 1 {
        nm::p(i, l)
    } else {
        nm::y(l)
    }
}

/// Weighted sum, annihilation and the two sigmoid stages of one layer.
/// Layer 1 also relaxes the weight snapshots `G` towards the current weights.
pub fn build_feedforward_layer<S: Scalar>(
    layer: usize,
    shape: &NetworkShape,
    k_annih: S,
) -> Result<Vec<ModuleDef<S>>, NetbuildError> {
    if layer != 1 && layer != 2 {
        return Err(NetbuildError::Shape(format!("no layer {layer}")));
    }
    if !(k_annih > S::zero()) {
        return Err(NetbuildError::Rate(
            "annihilation rate must be positive".into(),
        ));
    }
    let one = S::one();
    let half = S::lit(0.5);
    let pb = shape.p_batch;
    let input = |j: usize, l: usize| if layer == 1 { nm::s(j, l) } else { nm::p(j, l) };

    let mut lws = CrnBuilder::new();
    for l in 1..=pb {
        for i in hidden_rows(layer) {
            let ni = net_index(layer, i);
            for sg in SIGNS {
                for j in 1..=2 {
                    lws.produce(
                        &[&nm::w(layer, sg, i, j), &input(j, l)],
                        &nm::n(sg, ni, l),
                        one,
                    );
                }
                lws.produce(&[&nm::w(layer, sg, i, 3)], &nm::n(sg, ni, l), one);
                lws.decay(&nm::n(sg, ni, l), one);
            }
        }
    }
    if layer == 1 {
        for (wname, gname) in weight_snapshot_pairs() {
            lws.produce(&[&wname], &gname, one);
            lws.decay(&gname, one);
        }
    }

    let mut annih = CrnBuilder::new();
    let mut sig1 = CrnBuilder::new();
    let mut sig2 = CrnBuilder::new();
    for l in 1..=pb {
        for i in hidden_rows(layer) {
            let ni = net_index(layer, i);
            let (np, nn) = (nm::n('+', ni, l), nm::n('-', ni, l));
            annih.reaction(&[(&np, 1), (&nn, 1)], &[], k_annih);

            for sg in SIGNS {
                let nx = nm::n(sg, ni, l);
                let px = out_rail(layer, sg, i, l);
                sig1.produce(&[&nx], &px, half);
                sig1.reaction(&[(&nx, 1), (&px, 1)], &[(&nx, 1)], one);
            }

            let (pp, pn) = (out_rail(layer, '+', i, l), out_rail(layer, '-', i, l));
            sig2.reaction(&[(&np, 1), (&pp, 1)], &[(&np, 1), (&pp, 2)], one);
            sig2.reaction(&[(&np, 1), (&pp, 2)], &[(&np, 1), (&pp, 1)], one);
            sig2.reaction(&[(&nn, 1), (&pn, 2)], &[(&nn, 1), (&pn, 3)], one);
            sig2.reaction(&[(&nn, 1), (&pn, 1)], &[(&nn, 1)], one);
            sig2.decay(&np, one);
            sig2.decay(&nn, one);
            let out = out_combined(layer, i, l);
            sig2.produce(&[&pp], &out, one);
            sig2.produce(&[&pn], &out, one);
            sig2.decay(&out, one);
        }
    }

    Ok(vec![
        finish(&format!("lws-L{layer}"), ModuleKind::Lws(layer), lws)?,
        finish(
            &format!("annih-L{layer}"),
            ModuleKind::Annihilation(layer),
            annih,
        )?,
        finish(
            &format!("sig1-L{layer}"),
            ModuleKind::SigStage1(layer),
            sig1,
        )?,
        finish(
            &format!("sig2-L{layer}"),
            ModuleKind::SigStage2(layer),
            sig2,
        )?,
    ])
}

/// Every weight rail species paired with its snapshot species.
pub fn weight_snapshot_pairs() -> Vec<(String, String)> {
    weight_entries()
        .into_iter()
        .map(|(layer, sg, i, j)| (nm::w(layer, sg, i, j), nm::g(layer, sg, i, j)))
        .collect()
}

/// `(layer, sign, i, j)` for every weight rail, layer 1 before layer 2.
pub fn weight_entries() -> Vec<(usize, char, usize, usize)> {
    let mut out = Vec::with_capacity(18);
    for layer in 1..=2 {
        for sg in SIGNS {
            for i in hidden_rows(layer) {
                for j in 1..=3 {
                    out.push((layer, sg, i, j));
                }
            }
        }
    }
    out
}

/// Copies of the outputs, the signed output error and the derivative factors
/// `1 − y`, `1 − Υ_i` that the gradient needs.
pub fn build_precalc<S: Scalar>(
    shape: &NetworkShape,
    k_pre: S,
) -> Result<ModuleDef<S>, NetbuildError> {
    if !(k_pre > S::one()) || !k_pre.is_finite() {
        return Err(NetbuildError::Rate(format!(
            "precalculation rate constant must exceed 1, got {k_pre}"
        )));
    }
    let one = S::one();
    let mut b = CrnBuilder::new();
    for l in 1..=shape.p_batch {
        let (y, yt, ye, ys, iy) = (nm::y(l), nm::yt(l), nm::ye(l), nm::ys(l), nm::iy(l));
        let s3 = nm::s(3, l);
        b.reaction(&[(&y, 1)], &[(&yt, 1), (&ye, 1), (&ys, 1)], k_pre);
        b.reaction(&[(&ye, 1), (&s3, 1)], &[], k_pre);
        b.reaction(&[(&ys, 1), (&iy, 1)], &[], k_pre);
        for i in 1..=2 {
            let (p, pt, ps, ip) = (nm::p(i, l), nm::pt(i, l), nm::ps(i, l), nm::ip(i, l));
            b.reaction(&[(&p, 1)], &[(&pt, 1), (&ps, 1)], k_pre);
            b.reaction(&[(&ps, 1), (&ip, 1)], &[], k_pre);
        }

        let (ep, en, e) = (nm::e_rail('+', l), nm::e_rail('-', l), nm::e(l));
        b.produce(&[&s3], &ep, one);
        b.decay(&ep, one);
        b.produce(&[&ye], &en, one);
        b.decay(&en, one);
        b.produce(&[&ep], &e, one);
        b.produce(&[&en], &e, one);
        b.decay(&e, one);
        b.produce(&[&iy], &nm::sy(l), one);
        b.decay(&nm::sy(l), one);
        for i in 1..=2 {
            b.produce(&[&nm::ip(i, l)], &nm::sp(i, l), one);
            b.decay(&nm::sp(i, l), one);
        }
    }
    finish("pBCRN", ModuleKind::Precalc, b)
}

pub fn build_judgment_standin<S: Scalar>(threshold: S) -> Result<ModuleDef<S>, NetbuildError> {
    if !(threshold > S::zero()) {
        return Err(NetbuildError::Config(format!(
            "termination threshold must be positive, got {threshold}"
        )));
    }
    Ok(ModuleDef {
        label: "judgment".into(),
        kind: ModuleKind::Judgment,
        crn: CrnBuilder::new().build()?,
    })
}

/// One signed gradient monomial: its species, its factors and the rail it feeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial {
    pub name: String,
    pub factors: Vec<String>,
    pub par: String,
}

/// All signed monomials of the batch gradient, sample-major.
pub fn monomials(shape: &NetworkShape) -> Vec<Monomial> {
    let mut out = Vec::new();
    for l in 1..=shape.p_batch {
        for i in 1..=2 {
            for j in 1..=3 {
                for a in SIGNS {
                    for b in SIGNS {
                        let mut factors = vec![
                            nm::e_rail(a, l),
                            nm::pt(i, l),
                            nm::yt(l),
                            nm::sy(l),
                            nm::sp(i, l),
                            nm::w(2, b, 1, i),
                        ];
                        if j < 3 {
                            factors.push(nm::s(j, l));
                        }
                        let rail = if a == b { '+' } else { '-' };
                        out.push(Monomial {
                            name: nm::q1(a, b, i, j, l),
                            factors,
                            par: nm::par(1, rail, i, j),
                        });
                    }
                }
            }
        }
        for j in 1..=3 {
            for a in SIGNS {
                let mut factors = vec![nm::e_rail(a, l), nm::yt(l), nm::sy(l)];
                if j < 3 {
                    factors.push(nm::pt(j, l));
                }
                out.push(Monomial {
                    name: nm::q2(a, j, l),
                    factors,
                    par: nm::par(2, a, 1, j),
                });
            }
        }
    }
    out
}

/// Pairwise-reduction tree: `(left, right, product)` triples ending in the monomial itself.
pub fn product_tree(m: &Monomial) -> Vec<(String, String, String)> {
    let mut level = m.factors.clone();
    let mut nodes = Vec::new();
    let mut next_id = 1;
    while level.len() > 1 {
        let last_level = level.len() <= 2;
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.chunks(2);
        for pair in &mut it {
            match pair {
                [a, b] => {
                    let out = if last_level {
                        m.name.clone()
                    } else {
                        let u = nm::u(&m.name, next_id);
                        next_id += 1;
                        u
                    };
                    nodes.push((a.clone(), b.clone(), out.clone()));
                    next.push(out);
                }
                [a] => next.push(a.clone()),
                _ => unreachable!(),
            }
        }
        level = next;
    }
    nodes
}

/// Gradient monomials (`learn-grad`) and the weight update (`learn-update`).
pub fn build_learning<S: Scalar>(
    shape: &NetworkShape,
    eta: S,
) -> Result<Vec<ModuleDef<S>>, NetbuildError> {
    if !(eta > S::zero() && eta <= S::one()) {
        return Err(NetbuildError::Config(format!(
            "learning rate must lie in (0, 1], got {eta}"
        )));
    }
    let one = S::one();
    let mut grad = CrnBuilder::new();
    for m in monomials(shape) {
        for (a, b, out) in product_tree(&m) {
            grad.produce(&[&a, &b], &out, one);
            grad.decay(&out, one);
        }
        grad.produce(&[&m.name], &m.par, one);
    }
    for (layer, sg, i, j) in weight_entries() {
        grad.decay(&nm::par(layer, sg, i, j), one);
    }

    let mut update = CrnBuilder::new();
    for (layer, sg, i, j) in weight_entries() {
        let (par, dw) = (nm::par(layer, sg, i, j), nm::dw(layer, sg, i, j));
        let (w, g) = (nm::w(layer, sg, i, j), nm::g(layer, sg, i, j));
        update.produce(&[&par], &dw, eta);
        update.decay(&dw, one);
        update.produce(&[&g], &w, one);
        update.produce(&[&dw], &w, one);
        update.decay(&w, one);
    }

    Ok(vec![
        finish("learn-grad", ModuleKind::LearnGrad, grad)?,
        finish("learn-update", ModuleKind::LearnUpdate, update)?,
    ])
}

/// Species the clear-out phase decays to zero.
pub fn cleared_species(shape: &NetworkShape) -> Vec<String> {
    let mut out = Vec::new();
    for l in 1..=shape.p_batch {
        for sg in SIGNS {
            for i in 1..=3 {
                out.push(nm::n(sg, i, l));
            }
            for i in 1..=2 {
                out.push(nm::p_rail(sg, i, l));
            }
            out.push(nm::y_rail(sg, l));
        }
        for i in 1..=2 {
            out.push(nm::p(i, l));
            out.push(nm::pt(i, l));
            out.push(nm::ps(i, l));
        }
        out.extend([nm::y(l), nm::yt(l), nm::ye(l), nm::ys(l)]);
    }
    for m in monomials(shape) {
        for (_, _, node) in product_tree(&m) {
            out.push(node);
        }
    }
    out
}

/// Indicator species the clear-out phase restores to one.
pub fn restored_species(shape: &NetworkShape) -> Vec<String> {
    let mut out = Vec::new();
    for l in 1..=shape.p_batch {
        out.push(nm::iy(l));
        for i in 1..=2 {
            out.push(nm::ip(i, l));
        }
    }
    out
}

pub fn build_clearout<S: Scalar>(shape: &NetworkShape) -> Result<ModuleDef<S>, NetbuildError> {
    let one = S::one();
    let mut b = CrnBuilder::new();
    for s in cleared_species(shape) {
        b.decay(&s, one);
    }
    for s in restored_species(shape) {
        b.reaction(&[], &[(&s, 1)], one);
        b.decay(&s, one);
    }
    finish("clearout", ModuleKind::Clearout, b)
}
