//! Dense univariate polynomials in a local coordinate s, stored as monomial coefficients.

pub fn eval(p: &[f64], s: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

/// n-th derivative of p at s, without allocating.
pub fn eval_deriv(p: &[f64], s: f64, n: usize) -> f64 {
    if n == 0 {
        return eval(p, s);
    }
    let mut acc = 0.0;
    for i in (n..p.len()).rev() {
        let f: f64 = ((i - n + 1)..=i).map(|m| m as f64).product();
        acc = acc * s + f * p[i];
    }
    acc
}

pub fn deriv(p: &[f64]) -> Vec<f64> {
    if p.len() <= 1 {
        return vec![0.0];
    }
    p.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect()
}

pub fn deriv_n(p: &[f64], n: usize) -> Vec<f64> {
    let mut q = p.to_vec();
    for _ in 0..n {
        q = deriv(&q);
    }
    q
}

/// q(t) = p(a t + b).
pub fn affine(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    // Horner: out = (...((c_n)(a t + b) + c_{n-1})(a t + b) ...)
    for c in p.iter().rev() {
        let mut next = vec![0.0; out.len()];
        for (i, o) in out.iter().enumerate() {
            if *o == 0.0 {
                continue;
            }
            next[i] += o * b;
            if i + 1 < next.len() {
                next[i + 1] += o * a;
            }
        }
        next[0] += c;
        out = next;
    }
    out
}

pub fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            r[i + j] += a * b;
        }
    }
    r
}

/// Integral over [-1, 1].
pub fn integrate(p: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 0)
        .map(|(i, c)| 2.0 * c / (i as f64 + 1.0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_deriv_matches_deriv_n() {
        let p = [0.3, -1.0, 2.0, 0.5, -0.25];
        for n in 0..6 {
            let a = eval_deriv(&p, 0.37, n);
            let b = eval(&deriv_n(&p, n), 0.37);
            assert!((a - b).abs() < 1e-14, "{n}: {a} {b}");
        }
    }

    #[test]
    fn affine_composition() {
        let p = [1.0, -2.0, 0.5, 3.0];
        let q = affine(&p, 0.5, -0.25);
        for &t in &[-1.0, 0.0, 0.3, 1.0] {
            assert!((eval(&q, t) - eval(&p, 0.5 * t - 0.25)).abs() < 1e-14);
        }
    }
}
