use super::ErrorLabError;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Parameters of the envelope `t^a e^{-bt} < U e^{-vt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub u_min: f64,
    pub v_max: f64,
}

impl EnvelopeParams {
    /// `ln U_min`; the envelope touches `t^a e^{-bt}` at `t* = (a/b)e^{δ/a}`.
    pub fn ln_u_min(&self) -> f64 {
        self.a * ((self.a / self.b).ln() - 1.0) + self.delta
    }

    pub fn tangent_point(&self) -> f64 {
        self.a / self.b * (self.delta / self.a).exp()
    }

    /// Log-space margin `ln(U e^{-vt}) − ln(t^a e^{-bt})`; never negative.
    pub fn margin(&self, t: f64) -> f64 {
        (self.ln_u_min() - self.v_max * t) - (self.a * t.ln() - self.b * t)
    }
}

pub fn envelope_params(a: f64, b: f64, delta: f64) -> Result<EnvelopeParams, ErrorLabError> {
    if !(a > 0.0 && b > 0.0 && delta > 0.0) {
        return Err(ErrorLabError::Precondition(format!(
            "envelope needs positive a, b, delta; got {a}, {b}, {delta}"
        )));
    }
    let ln_u = a * ((a / b).ln() - 1.0) + delta;
    Ok(EnvelopeParams {
        a,
        b,
        delta,
        u_min: ln_u.exp(),
        v_max: -b * (-delta / a).exp_m1(),
    })
}

/// `Σ hᵢ εᵢ` bounding `|∏ x̄ᵢ − ∏ xᵢ|` whenever `|x̄ᵢ − xᵢ| ≤ εᵢ` and
/// `fᵢ ≥ |xᵢ| + εᵢ`, with `h₁ = ∏_{k≥2} f_k` and `hᵢ = |x₁⋯x_{i−1}| ∏_{k>i} f_k`.
pub fn multiplication_bound(x: &[f64], f: &[f64], eps: &[f64]) -> Result<f64, ErrorLabError> {
    let n = x.len();
    if n == 0 || f.len() != n || eps.len() != n {
        return Err(ErrorLabError::Precondition(
            "x, f and eps must have the same nonzero length".into(),
        ));
    }
    for i in 0..n {
        if eps[i] < 0.0 || f[i] < x[i].abs() + eps[i] {
            return Err(ErrorLabError::Precondition(format!(
                "factor {}: need f ≥ |x| + eps, got f={}, x={}, eps={}",
                i + 1,
                f[i],
                x[i],
                eps[i]
            )));
        }
    }
    let mut total = 0.0;
    let mut prefix = 1.0;
    for i in 0..n {
        let tail: f64 = f[i + 1..].iter().product();
        total += prefix * tail * eps[i];
        prefix *= x[i].abs();
    }
    Ok(total)
}

/// `P̃ = [[1, 2p̃], [0, 1 + 2p̃]]`.
pub fn p_tilde(p_batch: usize) -> Mat2 {
    let q = 2.0 * p_batch as f64;
    [[1.0, q], [0.0, 1.0 + q]]
}

/// `[BFD]` from the coefficient families `D₁..D₅` and `C₁, C₂` at phase length `t`.
pub fn bfd_matrix(p_batch: usize, t: f64, d: &[f64; 5], c: &[f64; 2]) -> Mat2 {
    let b = [5.0 * d[0] + 4.0 * c[0], 5.0 * d[1] + 4.0 * c[1], 5.0 * d[2]];
    let f = [3.0 * d[0] + c[0], 3.0 * d[1] + c[1], 3.0 * d[2]];
    let poly3 = |v: &[f64; 3]| v[0] + v[1] * t + v[2] * t * t;
    let tail = d[3] + d[4] * t;
    let s = 2.0 * p_batch as f64;
    [
        [s * poly3(&b), s * 5.0 * tail],
        [s * poly3(&f), s * 3.0 * tail],
    ]
}

/// Inputs of one iteration of the weight-error recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCoefficients {
    /// `(R̃, S̃)_m`.
    pub rs: Vec2,
    /// `[BFD]_m + P̃`.
    pub transfer: Mat2,
}

impl BoundCoefficients {
    pub fn from_bfd(rs: Vec2, bfd: Mat2, p_batch: usize) -> Self {
        let p = p_tilde(p_batch);
        let mut transfer = bfd;
        for i in 0..2 {
            for j in 0..2 {
                transfer[i][j] += p[i][j];
            }
        }
        Self { rs, transfer }
    }
}

fn mat_vec(m: &Mat2, v: &Vec2) -> Vec2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Bound on `(ER, ES)_m` via `E₁ = (R̃,S̃)₁`, `E_k = (R̃,S̃)_k + M_k E_{k−1}`,
/// i.e. the sum of `M_m ⋯ M_{m−j+1} (R̃,S̃)_{m−j}`. `coeffs[k-1]` is iteration `k`.
pub fn weight_error_bound(coeffs: &[BoundCoefficients], m: usize) -> Result<Vec2, ErrorLabError> {
    if m == 0 {
        return Err(ErrorLabError::Precondition(
            "iterations are numbered from 1".into(),
        ));
    }
    if coeffs.len() < m {
        return Err(ErrorLabError::MissingIteration(coeffs.len() + 1));
    }
    let mut e = coeffs[0].rs;
    for c in &coeffs[1..m] {
        let me = mat_vec(&c.transfer, &e);
        e = [c.rs[0] + me[0], c.rs[1] + me[1]];
    }
    Ok(e)
}

/// The same bound evaluated term by term as a sum of explicit matrix products.
pub fn weight_error_bound_unrolled(
    coeffs: &[BoundCoefficients],
    m: usize,
) -> Result<Vec2, ErrorLabError> {
    if m == 0 {
        return Err(ErrorLabError::Precondition(
            "iterations are numbered from 1".into(),
        ));
    }
    if coeffs.len() < m {
        return Err(ErrorLabError::MissingIteration(coeffs.len() + 1));
    }
    let mut total = [0.0; 2];
    for src in 1..=m {
        let mut v = coeffs[src - 1].rs;
        for c in &coeffs[src..m] {
            v = mat_vec(&c.transfer, &v);
        }
        total[0] += v[0];
        total[1] += v[1];
    }
    Ok(total)
}
