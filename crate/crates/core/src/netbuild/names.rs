//! Species naming: `ROLE{sign}_{indices}` with 1-based indices.

pub const SIGNS: [char; 2] = ['+', '-'];

/// Sample `i` of input row `r` (`r = 3` is the label).
pub fn x(r: usize, i: usize) -> String {
    match r {
        1 | 2 => format!("X{r}_{i}"),
        _ => format!("D_{i}"),
    }
}

pub fn s(r: usize, l: usize) -> String {
    format!("S{r}_{l}")
}

pub fn c(l: usize, i: usize) -> String {
    format!("C_{l},{i}")
}

pub fn ct(l: usize, i: usize) -> String {
    format!("Ct_{l},{i}")
}

/// Weight rail. `layer` 1 has rows `i ∈ {1,2}`, layer 2 only row 1.
pub fn w(layer: usize, sign: char, i: usize, j: usize) -> String {
    format!("W{layer}{sign}_{i},{j}")
}

pub fn g(layer: usize, sign: char, i: usize, j: usize) -> String {
    format!("G{layer}{sign}_{i},{j}")
}

pub fn dw(layer: usize, sign: char, i: usize, j: usize) -> String {
    format!("DW{layer}{sign}_{i},{j}")
}

pub fn par(layer: usize, sign: char, i: usize, j: usize) -> String {
    format!("Par{layer}{sign}_{i},{j}")
}

/// Net input rail; the output node uses `i = 3`.
pub fn n(sign: char, i: usize, l: usize) -> String {
    format!("N{sign}_{i},{l}")
}

pub fn p_rail(sign: char, i: usize, l: usize) -> String {
    format!("P{sign}_{i},{l}")
}

pub fn p(i: usize, l: usize) -> String {
    format!("P_{i},{l}")
}

pub fn y_rail(sign: char, l: usize) -> String {
    format!("Y{sign}_{l}")
}

pub fn y(l: usize) -> String {
    format!("Y_{l}")
}

pub fn yt(l: usize) -> String {
    format!("Yt_{l}")
}

pub fn ye(l: usize) -> String {
    format!("Ye_{l}")
}

pub fn ys(l: usize) -> String {
    format!("Ys_{l}")
}

pub fn iy(l: usize) -> String {
    format!("Iy_{l}")
}

pub fn sy(l: usize) -> String {
    format!("Sy_{l}")
}

pub fn pt(i: usize, l: usize) -> String {
    format!("Pt_{i},{l}")
}

pub fn ps(i: usize, l: usize) -> String {
    format!("Ps_{i},{l}")
}

pub fn ip(i: usize, l: usize) -> String {
    format!("Ip_{i},{l}")
}

pub fn sp(i: usize, l: usize) -> String {
    format!("Sp_{i},{l}")
}

pub fn e_rail(sign: char, l: usize) -> String {
    format!("E{sign}_{l}")
}

pub fn e(l: usize) -> String {
    format!("E_{l}")
}

/// Layer-1 gradient monomial for entry `(i, j)`, sample `l`, error sign `a`, weight sign `b`.
pub fn q1(a: char, b: char, i: usize, j: usize, l: usize) -> String {
    format!("Q1{a}{b}_{i},{j},{l}")
}

/// Layer-2 gradient monomial for entry `j`, sample `l`, error sign `a`.
pub fn q2(a: char, j: usize, l: usize) -> String {
    format!("Q2{a}_1,{j},{l}")
}

/// Intermediate product `k` of the relaxation tree that ends in monomial `q`.
pub fn u(q: &str, k: usize) -> String {
    format!("U{}.{k}", &q[1..])
}
