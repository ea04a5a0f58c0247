//! In-repo equispaced FFT: iterative radix-2 Cooley-Tukey in complex double
//! precision, with a naive DFT fallback for lengths that are not powers of
//! two.  No external transform dependency.

use num_complex::Complex64;

/// Precomputed transform for one length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    // twiddles[k] = exp(-2*pi*i*k/n) for k < n/2 (radix-2 path only)
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        if !n.is_power_of_two() {
            return Self { n, twiddles: Vec::new(), bitrev: Vec::new() };
        }
        let half = n / 2;
        let twiddles = (0..half)
            .map(|k| {
                let a = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = if bits == 0 {
            vec![0]
        } else {
            (0..n).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect()
        };
        Self { n, twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place DFT: out[k] = sum_j in[j] e^{-2*pi*i*jk/n}.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// In-place inverse DFT including the 1/n factor:
    /// out[j] = (1/n) sum_k in[k] e^{+2*pi*i*jk/n}.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let s = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.n);
        if self.n == 1 {
            return;
        }
        if !self.n.is_power_of_two() {
            naive_dft(data, inverse);
            return;
        }
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len *= 2;
        }
    }
}

fn naive_dft(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let input = data.to_vec();
    for (k, out) in data.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in input.iter().enumerate() {
            let a = sign * 2.0 * std::f64::consts::PI * (j * k % n) as f64 / n as f64;
            acc += v * Complex64::new(a.cos(), a.sin());
        }
        *out = acc;
    }
}

/// Multi-dimensional DFT over a row-major array with the given shape,
/// applied axis by axis.
pub fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let total: usize = shape.iter().product();
    assert_eq!(data.len(), total);
    let plans: Vec<Fft> = shape.iter().map(|&n| Fft::new(n)).collect();
    let mut scratch = Vec::new();
    for (axis, plan) in plans.iter().enumerate() {
        let n = shape[axis];
        if n == 1 {
            continue;
        }
        // stride between consecutive elements along `axis`
        let stride: usize = shape[axis + 1..].iter().product();
        let lines = total / n;
        scratch.resize(n, Complex64::new(0.0, 0.0));
        for line in 0..lines {
            let outer = line / stride;
            let inner = line % stride;
            let base = outer * n * stride + inner;
            for i in 0..n {
                scratch[i] = data[base + i * stride];
            }
            if inverse {
                plan.inverse(&mut scratch);
            } else {
                plan.forward(&mut scratch);
            }
            for i in 0..n {
                data[base + i * stride] = scratch[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_dft(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let n = input.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &v) in input.iter().enumerate() {
                    let a = sign * 2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
                    acc += v * Complex64::new(a.cos(), a.sin());
                }
                if inverse {
                    acc / n as f64
                } else {
                    acc
                }
            })
            .collect()
    }

    #[test]
    fn matches_reference_dft() {
        let mut state = 88172645463325252u64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for &n in &[1usize, 2, 4, 8, 64, 256] {
            let input: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(rnd(), rnd())).collect();
            let want = reference_dft(&input, false);
            let mut got = input.clone();
            Fft::new(n).forward(&mut got);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).norm() < 1e-10 * n as f64, "n={n}");
            }
        }
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let n = 128;
        let input: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let plan = Fft::new(n);
        let mut data = input.clone();
        plan.forward(&mut data);
        plan.inverse(&mut data);
        for (a, b) in data.iter().zip(&input) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_matches_double_loop() {
        let shape = [4usize, 8usize];
        let total = 32;
        let input: Vec<Complex64> = (0..total)
            .map(|i| Complex64::new(i as f64 * 0.3, (i as f64).cos()))
            .collect();
        let mut got = input.clone();
        fft_nd(&mut got, &shape, false);
        for k0 in 0..shape[0] {
            for k1 in 0..shape[1] {
                let mut acc = Complex64::new(0.0, 0.0);
                for j0 in 0..shape[0] {
                    for j1 in 0..shape[1] {
                        let a = -2.0
                            * std::f64::consts::PI
                            * (j0 * k0) as f64
                            / shape[0] as f64
                            - 2.0 * std::f64::consts::PI * (j1 * k1) as f64
                                / shape[1] as f64;
                        acc += input[j0 * shape[1] + j1]
                            * Complex64::new(a.cos(), a.sin());
                    }
                }
                let g = got[k0 * shape[1] + k1];
                assert!((g - acc).norm() < 1e-10);
            }
        }
    }
}
