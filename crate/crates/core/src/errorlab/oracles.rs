use super::ErrorLabError;

/// Closed-form solutions of the elementary module dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    /// `ẋ = a − x`.
    Relaxation { a: f64, x0: f64 },
    /// `ẋ = −k x`.
    Decay { k: f64, x0: f64 },
    /// `ẋ = ẏ = −xy`; evaluates `x`.
    Annihilation { x0: f64, y0: f64 },
    /// `ṗ = n p (1 − p)`, `ṅ = −n`, starting from `n0` (signed).
    LogisticCatalyst { p0: f64, n0: f64 },
}

impl ClosedForm {
    pub fn validate(&self) -> Result<(), ErrorLabError> {
        let bad = |m: &str| Err(ErrorLabError::Precondition(m.to_string()));
        match *self {
            Self::Annihilation { x0, y0 } if x0 < 0.0 || y0 < 0.0 => {
                bad("annihilation needs nonnegative x0, y0")
            }
            Self::LogisticCatalyst { p0, .. } if !(p0 > 0.0 && p0 < 1.0) => {
                bad("logistic needs p0 in (0, 1)")
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Relaxation { a, x0 } => a + (x0 - a) * (-t).exp(),
            Self::Decay { k, x0 } => x0 * (-k * t).exp(),
            Self::Annihilation { x0, y0 } => {
                let d = x0 - y0;
                if d == 0.0 {
                    x0 / (1.0 + x0 * t)
                } else if t.is_infinite() {
                    d.max(0.0)
                } else {
                    d / (1.0 - (y0 / x0) * (-d * t).exp())
                }
            }
            Self::LogisticCatalyst { p0, n0 } => {
                let decayed = if t.is_infinite() { 1.0 } else { -(-t).exp_m1() };
                1.0 / (1.0 + (1.0 - p0) / p0 * (-n0 * decayed).exp())
            }
        }
    }

    /// `t → ∞` value.
    pub fn limit(&self) -> f64 {
        self.eval(f64::INFINITY)
    }
}
