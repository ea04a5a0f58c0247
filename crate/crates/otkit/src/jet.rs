//! Truncated Taylor-series ("jet") arithmetic.  A jet of order p holds the
//! coefficients a_0..a_p of f(t0 + h) = sum a_k h^k, so composing jets
//! yields exact derivative tables up to order p without symbolic algebra.

/// Jet of the identity map h -> t0 + h.
pub fn jet_var(t0: f64, order: usize) -> Vec<f64> {
    let mut a = vec![0.0; order + 1];
    a[0] = t0;
    if order >= 1 {
        a[1] = 1.0;
    }
    a
}

pub fn jet_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|&x| s * x).collect()
}

pub fn jet_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let p = a.len() - 1;
    let mut out = vec![0.0; p + 1];
    for k in 0..=p {
        let mut acc = 0.0;
        for j in 0..=k {
            acc += a[j] * b[k - j];
        }
        out[k] = acc;
    }
    out
}

/// exp(a): y' = a' y gives k y_k = sum_{j=1..k} j a_j y_{k-j}.
pub fn jet_exp(a: &[f64]) -> Vec<f64> {
    let p = a.len() - 1;
    let mut y = vec![0.0; p + 1];
    y[0] = a[0].exp();
    for k in 1..=p {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * a[j] * y[k - j];
        }
        y[k] = acc / k as f64;
    }
    y
}

/// a^e for real exponent e, requires a_0 > 0.
/// From y = a^e: a y' = e a' y, giving
/// k a_0 y_k = sum_{j=1..k} (e j - (k - j)) a_j y_{k-j}.
pub fn jet_pow(a: &[f64], e: f64) -> Vec<f64> {
    let p = a.len() - 1;
    assert!(a[0] > 0.0, "jet_pow needs a positive base value");
    let mut y = vec![0.0; p + 1];
    y[0] = a[0].powf(e);
    for k in 1..=p {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += (e * j as f64 - (k - j) as f64) * a[j] * y[k - j];
        }
        y[k] = acc / (k as f64 * a[0]);
    }
    y
}

/// Convert Taylor coefficients to derivative values: f^{(k)}(t0) = k! a_k.
#[cfg(test)]
pub fn jet_to_derivatives(a: &[f64]) -> Vec<f64> {
    let mut fact = 1.0;
    a.iter()
        .enumerate()
        .map(|(k, &c)| {
            if k > 0 {
                fact *= k as f64;
            }
            c * fact
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_negative_square() {
        // f(t) = exp(-t^2) at t0 = 0.5; compare with hand derivatives.
        let t = jet_var(0.5, 4);
        let arg = jet_scale(&jet_mul(&t, &t), -1.0);
        let f = jet_exp(&arg);
        let d = jet_to_derivatives(&f);
        let e = (-0.25f64).exp();
        assert!((d[0] - e).abs() < 1e-15);
        assert!((d[1] - (-2.0 * 0.5 * e)).abs() < 1e-14); // -2t e^{-t^2}
        assert!((d[2] - ((4.0 * 0.25 - 2.0) * e)).abs() < 1e-14); // (4t^2-2)e^{-t^2}
    }

    #[test]
    fn pow_matches_sqrt_derivatives() {
        // f(t) = (t^2 + 1)^{-1/2} at t0 = 2.
        let t = jet_var(2.0, 3);
        let mut base = jet_mul(&t, &t);
        base[0] += 1.0;
        let f = jet_pow(&base, -0.5);
        let d = jet_to_derivatives(&f);
        let s = 5.0f64;
        assert!((d[0] - s.powf(-0.5)).abs() < 1e-15);
        // f' = -t (t^2+1)^{-3/2}
        assert!((d[1] - (-2.0 * s.powf(-1.5))).abs() < 1e-14);
        // f'' = (2t^2 - 1)(t^2+1)^{-5/2}
        assert!((d[2] - (7.0 * s.powf(-2.5))).abs() < 1e-14);
    }
}
