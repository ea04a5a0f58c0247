//! Nonequispaced discrete Fourier transforms in dimensions 1-3: an exact
//! reference evaluation (NDFT) and the fast approximation (NFFT) built on
//! an oversampled equispaced FFT with a truncated Kaiser-Bessel window.

use crate::fft::fft_nd;
use crate::{OtError, Result};
use num_complex::Complex64;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Frequency index set I_N = prod_t {-N_t/2, ..., N_t/2 - 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyGrid {
    pub bandwidth: Vec<usize>,
}

impl FrequencyGrid {
    pub fn new(bandwidth: Vec<usize>) -> Result<Self> {
        let d = bandwidth.len();
        if !(1..=3).contains(&d) {
            return Err(OtError::Unsupported(format!(
                "transforms support dimensions 1..=3, got {d}"
            )));
        }
        for &n in &bandwidth {
            if n < 2 || n % 2 != 0 {
                return Err(OtError::InvalidParameter(format!(
                    "bandwidth per axis must be even and >= 2, got {n}"
                )));
            }
        }
        Ok(Self { bandwidth })
    }

    pub fn dim(&self) -> usize {
        self.bandwidth.len()
    }

    /// |I_N|
    pub fn size(&self) -> usize {
        self.bandwidth.iter().product()
    }

    /// Signed frequency vector for a flat row-major coefficient index
    /// (axis index a_t maps to k_t = a_t - N_t/2).
    pub fn frequency(&self, mut flat: usize) -> Vec<i64> {
        let d = self.dim();
        let mut k = vec![0i64; d];
        for t in (0..d).rev() {
            let n = self.bandwidth[t];
            k[t] = (flat % n) as i64 - (n / 2) as i64;
            flat /= n;
        }
        k
    }
}

fn wrap_torus(x: f64) -> f64 {
    let w = x - (x + 0.5).floor();
    // floor can land exactly on 0.5 for inputs like -0.5 - eps; fold back
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

fn check_nodes(nodes: &[Vec<f64>], dim: usize) -> Result<()> {
    for p in nodes {
        if p.len() != dim {
            return Err(OtError::DimensionMismatch(format!(
                "node with {} coordinates in a dimension-{dim} transform",
                p.len()
            )));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(OtError::InvalidParameter("non-finite node".into()));
        }
    }
    Ok(())
}

/// Exact forward transform: value_j = sum_{k in I_N} coeffs_k e^{2 pi i k.x_j}.
/// Literal evaluation; the oracle for the fast path.
pub fn ndft_forward(
    grid: &FrequencyGrid,
    coeffs: &[Complex64],
    nodes: &[Vec<f64>],
) -> Result<Vec<Complex64>> {
    if coeffs.len() != grid.size() {
        return Err(OtError::SizeMismatch(format!(
            "{} coefficients for grid of size {}",
            coeffs.len(),
            grid.size()
        )));
    }
    check_nodes(nodes, grid.dim())?;
    let tables = exponent_tables(grid, nodes, 1.0);
    let d = grid.dim();
    let mut out = Vec::with_capacity(nodes.len());
    for j in 0..nodes.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (flat, &c) in coeffs.iter().enumerate() {
            let mut w = c;
            let mut rest = flat;
            for t in (0..d).rev() {
                let n = grid.bandwidth[t];
                let a = rest % n;
                rest /= n;
                w *= tables[t][j * n + a];
            }
            acc += w;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Exact adjoint transform: coeff_k = sum_j data_j e^{-2 pi i k.x_j}.
pub fn ndft_adjoint(
    grid: &FrequencyGrid,
    data: &[Complex64],
    nodes: &[Vec<f64>],
) -> Result<Vec<Complex64>> {
    if data.len() != nodes.len() {
        return Err(OtError::SizeMismatch(format!(
            "{} data values for {} nodes",
            data.len(),
            nodes.len()
        )));
    }
    check_nodes(nodes, grid.dim())?;
    let tables = exponent_tables(grid, nodes, -1.0);
    let d = grid.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.size()];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in data.iter().enumerate() {
            let mut w = v;
            let mut rest = flat;
            for t in (0..d).rev() {
                let n = grid.bandwidth[t];
                let a = rest % n;
                rest /= n;
                w *= tables[t][j * n + a];
            }
            acc += w;
        }
        *slot = acc;
    }
    Ok(out)
}

/// Per-axis tables of e^{sign 2 pi i k_t x_{j,t}} indexed [axis][node * N_t + a].
fn exponent_tables(
    grid: &FrequencyGrid,
    nodes: &[Vec<f64>],
    sign: f64,
) -> Vec<Vec<Complex64>> {
    (0..grid.dim())
        .map(|t| {
            let n = grid.bandwidth[t];
            let mut table = Vec::with_capacity(nodes.len() * n);
            for p in nodes {
                for a in 0..n {
                    let k = a as i64 - (n / 2) as i64;
                    let ang = sign * TAU * k as f64 * p[t];
                    table.push(Complex64::new(ang.cos(), ang.sin()));
                }
            }
            table
        })
        .collect()
}

fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for s in 1..1000 {
        term *= q / ((s * s) as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-Bessel window on the oversampled grid of size `n`:
/// phi(x) = (b/pi) * sinh(y)/y with y = b sqrt(m^2 - n^2 x^2), |x| <= m/n.
fn kb_window(x: f64, n: usize, m: usize, b: f64) -> f64 {
    let arg = (m * m) as f64 - (n as f64 * x) * (n as f64 * x);
    if arg < 0.0 {
        return 0.0;
    }
    let y = b * arg.sqrt();
    let ratio = if y < 1e-6 { 1.0 + y * y / 6.0 } else { y.sinh() / y };
    b / std::f64::consts::PI * ratio
}

/// Precomputed fast transform for a fixed frequency grid and node set.
pub struct NfftPlan {
    grid: FrequencyGrid,
    m: usize,
    /// Oversampled grid size per axis (power of two, >= 2 N_t).
    nsize: Vec<usize>,
    /// Per-axis correction 1/I0(m sqrt(b^2 - (2 pi k / n)^2)) per k index.
    corr: Vec<Vec<f64>>,
    /// Per node, per axis: first gather index (flattened node-major).
    node_l0: Vec<i64>,
    /// Per node, per axis, 2m window values (flattened node-major).
    node_win: Vec<f64>,
    num_nodes: usize,
}

impl NfftPlan {
    /// Default machine-precision parameters: oversampling 2, cutoff m = 8.
    pub fn new(grid: FrequencyGrid, nodes: &[Vec<f64>]) -> Result<Self> {
        Self::with_params(grid, nodes, 2.0, 8)
    }

    pub fn with_params(
        grid: FrequencyGrid,
        nodes: &[Vec<f64>],
        sigma: f64,
        m: usize,
    ) -> Result<Self> {
        if sigma < 2.0 {
            return Err(OtError::InvalidParameter(format!(
                "oversampling factor must be >= 2, got {sigma}"
            )));
        }
        if m < 1 {
            return Err(OtError::InvalidParameter("window cutoff m must be >= 1".into()));
        }
        check_nodes(nodes, grid.dim())?;
        let d = grid.dim();
        let nsize: Vec<usize> = grid
            .bandwidth
            .iter()
            .map(|&n| ((sigma * n as f64).ceil() as usize).next_power_of_two())
            .collect();
        let bshape: Vec<f64> = (0..d)
            .map(|t| {
                let s = nsize[t] as f64 / grid.bandwidth[t] as f64;
                std::f64::consts::PI * (2.0 - 1.0 / s)
            })
            .collect();
        let corr: Vec<Vec<f64>> = (0..d)
            .map(|t| {
                let nb = grid.bandwidth[t];
                let n = nsize[t] as f64;
                (0..nb)
                    .map(|a| {
                        let k = a as i64 - (nb / 2) as i64;
                        let w = TAU * k as f64 / n;
                        let arg = bshape[t] * bshape[t] - w * w;
                        1.0 / bessel_i0(m as f64 * arg.max(0.0).sqrt())
                    })
                    .collect()
            })
            .collect();
        let mut node_l0 = Vec::with_capacity(nodes.len() * d);
        let mut node_win = Vec::with_capacity(nodes.len() * d * 2 * m);
        for p in nodes {
            for t in 0..d {
                let x = wrap_torus(p[t]);
                let n = nsize[t];
                let l0 = (n as f64 * x).floor() as i64 - m as i64 + 1;
                node_l0.push(l0);
                for s in 0..2 * m {
                    let l = l0 + s as i64;
                    node_win.push(kb_window(x - l as f64 / n as f64, n, m, bshape[t]));
                }
            }
        }
        Ok(Self { grid, m, nsize, corr, node_l0, node_win, num_nodes: nodes.len() })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    fn oversampled_len(&self) -> usize {
        self.nsize.iter().product()
    }

    /// Flat oversampled-array index of signed frequency/grid position k_t,
    /// reduced modulo n_t.
    fn wrapped_flat(&self, signed: &[i64]) -> usize {
        let mut flat = 0usize;
        for (t, &k) in signed.iter().enumerate() {
            let n = self.nsize[t] as i64;
            flat = flat * n as usize + (k.rem_euclid(n)) as usize;
        }
        flat
    }

    fn total_corr(&self, flat: usize) -> f64 {
        let d = self.grid.dim();
        let mut rest = flat;
        let mut c = 1.0;
        for t in (0..d).rev() {
            let n = self.grid.bandwidth[t];
            c *= self.corr[t][rest % n];
            rest /= n;
        }
        c
    }

    /// Fast approximation of [`ndft_forward`] at the plan's nodes.
    pub fn forward(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.grid.size() {
            return Err(OtError::SizeMismatch(format!(
                "{} coefficients for grid of size {}",
                coeffs.len(),
                self.grid.size()
            )));
        }
        let vol = self.oversampled_len() as f64;
        let mut g = vec![Complex64::new(0.0, 0.0); self.oversampled_len()];
        for (flat, &c) in coeffs.iter().enumerate() {
            let k = self.grid.frequency(flat);
            // the unnormalized e^{+2 pi i k l / n} sum is wanted, so undo
            // the 1/n of the normalized inverse transform
            g[self.wrapped_flat(&k)] = c * (self.total_corr(flat) * vol);
        }
        fft_nd(&mut g, &self.nsize, true);
        let mut out = Vec::with_capacity(self.num_nodes);
        for j in 0..self.num_nodes {
            out.push(self.gather(&g, j));
        }
        Ok(out)
    }

    /// Fast approximation of [`ndft_adjoint`] from the plan's nodes.
    pub fn adjoint(&self, data: &[Complex64]) -> Result<Vec<Complex64>> {
        if data.len() != self.num_nodes {
            return Err(OtError::SizeMismatch(format!(
                "{} data values for {} nodes",
                data.len(),
                self.num_nodes
            )));
        }
        let mut g = vec![Complex64::new(0.0, 0.0); self.oversampled_len()];
        for (j, &v) in data.iter().enumerate() {
            self.spread(&mut g, j, v);
        }
        fft_nd(&mut g, &self.nsize, false);
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.size()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let k = self.grid.frequency(flat);
            *slot = g[self.wrapped_flat(&k)] * self.total_corr(flat);
        }
        Ok(out)
    }

    fn gather(&self, g: &[Complex64], node: usize) -> Complex64 {
        let d = self.grid.dim();
        let w = 2 * self.m;
        let l0 = &self.node_l0[node * d..(node + 1) * d];
        let win = &self.node_win[node * d * w..(node + 1) * d * w];
        let mut acc = Complex64::new(0.0, 0.0);
        match d {
            1 => {
                let n0 = self.nsize[0] as i64;
                for s in 0..w {
                    let i0 = (l0[0] + s as i64).rem_euclid(n0) as usize;
                    acc += g[i0] * win[s];
                }
            }
            2 => {
                let (n0, n1) = (self.nsize[0] as i64, self.nsize[1] as i64);
                for s0 in 0..w {
                    let i0 = (l0[0] + s0 as i64).rem_euclid(n0) as usize;
                    let w0 = win[s0];
                    let row = i0 * self.nsize[1];
                    for s1 in 0..w {
                        let i1 = (l0[1] + s1 as i64).rem_euclid(n1) as usize;
                        acc += g[row + i1] * (w0 * win[w + s1]);
                    }
                }
            }
            _ => {
                let (n0, n1, n2) = (
                    self.nsize[0] as i64,
                    self.nsize[1] as i64,
                    self.nsize[2] as i64,
                );
                for s0 in 0..w {
                    let i0 = (l0[0] + s0 as i64).rem_euclid(n0) as usize;
                    let w0 = win[s0];
                    for s1 in 0..w {
                        let i1 = (l0[1] + s1 as i64).rem_euclid(n1) as usize;
                        let w01 = w0 * win[w + s1];
                        let row = (i0 * self.nsize[1] + i1) * self.nsize[2];
                        for s2 in 0..w {
                            let i2 = (l0[2] + s2 as i64).rem_euclid(n2) as usize;
                            acc += g[row + i2] * (w01 * win[2 * w + s2]);
                        }
                    }
                }
            }
        }
        acc
    }

    fn spread(&self, g: &mut [Complex64], node: usize, v: Complex64) {
        let d = self.nsize.len();
        let w = 2 * self.m;
        let l0 = &self.node_l0[node * d..(node + 1) * d];
        let win = &self.node_win[node * d * w..(node + 1) * d * w];
        match d {
            1 => {
                let n0 = self.nsize[0] as i64;
                for s in 0..w {
                    let i0 = (l0[0] + s as i64).rem_euclid(n0) as usize;
                    g[i0] += v * win[s];
                }
            }
            2 => {
                let (n0, n1) = (self.nsize[0] as i64, self.nsize[1] as i64);
                for s0 in 0..w {
                    let i0 = (l0[0] + s0 as i64).rem_euclid(n0) as usize;
                    let w0 = win[s0];
                    let row = i0 * self.nsize[1];
                    for s1 in 0..w {
                        let i1 = (l0[1] + s1 as i64).rem_euclid(n1) as usize;
                        g[row + i1] += v * (w0 * win[w + s1]);
                    }
                }
            }
            _ => {
                let (n0, n1, n2) = (
                    self.nsize[0] as i64,
                    self.nsize[1] as i64,
                    self.nsize[2] as i64,
                );
                for s0 in 0..w {
                    let i0 = (l0[0] + s0 as i64).rem_euclid(n0) as usize;
                    let w0 = win[s0];
                    for s1 in 0..w {
                        let i1 = (l0[1] + s1 as i64).rem_euclid(n1) as usize;
                        let w01 = w0 * win[w + s1];
                        let row = (i0 * self.nsize[1] + i1) * self.nsize[2];
                        for s2 in 0..w {
                            let i2 = (l0[2] + s2 as i64).rem_euclid(n2) as usize;
                            g[row + i2] += v * (w01 * win[2 * w + s2]);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_nodes(rng: &mut SplitMix64, count: usize, d: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..d).map(|_| rng.next_f64() - 0.5).collect())
            .collect()
    }

    fn random_coeffs(rng: &mut SplitMix64, len: usize) -> Vec<Complex64> {
        (0..len)
            .map(|_| Complex64::new(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
            .collect()
    }

    fn linf(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn ndft_zero_frequency_indicator() {
        let grid = FrequencyGrid::new(vec![8]).unwrap();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 8];
        coeffs[4] = Complex64::new(1.0, 0.0); // k = 0
        let nodes = vec![vec![0.1], vec![-0.3], vec![0.45]];
        let vals = ndft_forward(&grid, &coeffs, &nodes).unwrap();
        for v in vals {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn ndft_node_at_origin_sums_coefficients() {
        let grid = FrequencyGrid::new(vec![4, 4]).unwrap();
        let mut rng = SplitMix64::new(1);
        let coeffs = random_coeffs(&mut rng, 16);
        let total: Complex64 = coeffs.iter().sum();
        let vals = ndft_forward(&grid, &coeffs, &[vec![0.0, 0.0]]).unwrap();
        assert!((vals[0] - total).norm() < 1e-13);
    }

    #[test]
    fn ndft_matches_hand_rolled_small_case() {
        // N=8, 5 nodes; independent scalar-loop evaluation of the same sum.
        let grid = FrequencyGrid::new(vec![8]).unwrap();
        let mut rng = SplitMix64::new(2);
        let coeffs = random_coeffs(&mut rng, 8);
        let nodes = random_nodes(&mut rng, 5, 1);
        let got = ndft_forward(&grid, &coeffs, &nodes).unwrap();
        for (j, p) in nodes.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, &c) in coeffs.iter().enumerate() {
                let k = a as f64 - 4.0;
                let ang = TAU * k * p[0];
                acc += c * Complex64::new(ang.cos(), ang.sin());
            }
            assert!((got[j] - acc).norm() < 1e-13);
        }
    }

    #[test]
    fn nfft_matches_ndft_all_dimensions() {
        let mut rng = SplitMix64::new(3);
        for (bandwidth, nodes_n) in [
            (vec![64usize], 200usize),
            (vec![16, 32], 150),
            (vec![16, 16, 16], 80),
        ] {
            let grid = FrequencyGrid::new(bandwidth).unwrap();
            let coeffs = random_coeffs(&mut rng, grid.size());
            let nodes = random_nodes(&mut rng, nodes_n, grid.dim());
            let plan = NfftPlan::new(grid.clone(), &nodes).unwrap();
            let exact = ndft_forward(&grid, &coeffs, &nodes).unwrap();
            let fast = plan.forward(&coeffs).unwrap();
            let scale: f64 = coeffs.iter().map(|c| c.norm()).sum();
            assert!(linf(&exact, &fast) / scale <= 1e-12, "d={}", grid.dim());

            let data = random_coeffs(&mut rng, nodes_n);
            let exact_adj = ndft_adjoint(&grid, &data, &nodes).unwrap();
            let fast_adj = plan.adjoint(&data).unwrap();
            let dscale: f64 = data.iter().map(|c| c.norm()).sum();
            assert!(linf(&exact_adj, &fast_adj) / dscale <= 1e-12);
        }
    }

    #[test]
    fn nfft_trivial_cases() {
        let grid = FrequencyGrid::new(vec![32]).unwrap();
        let mut rng = SplitMix64::new(4);
        let nodes = random_nodes(&mut rng, 10, 1);
        let plan = NfftPlan::new(grid.clone(), &nodes).unwrap();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 32];
        coeffs[16] = Complex64::new(1.0, 0.0);
        for v in plan.forward(&coeffs).unwrap() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let zeros = vec![Complex64::new(0.0, 0.0); 32];
        for v in plan.forward(&zeros).unwrap() {
            assert_eq!(v, Complex64::new(0.0, 0.0));
        }
        // single node at 0 with datum 1 -> all adjoint coefficients 1
        let plan0 = NfftPlan::new(grid, &[vec![0.0]]).unwrap();
        for c in plan0.adjoint(&[Complex64::new(1.0, 0.0)]).unwrap() {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_pairing_identity() {
        let grid = FrequencyGrid::new(vec![16, 16]).unwrap();
        let mut rng = SplitMix64::new(5);
        let nodes = random_nodes(&mut rng, 40, 2);
        let plan = NfftPlan::new(grid.clone(), &nodes).unwrap();
        let f = random_coeffs(&mut rng, grid.size());
        let g = random_coeffs(&mut rng, 40);
        let lhs: Complex64 = plan
            .forward(&f)
            .unwrap()
            .iter()
            .zip(&g)
            .map(|(a, b)| a * b.conj())
            .sum();
        let rhs: Complex64 = f
            .iter()
            .zip(plan.adjoint(&g).unwrap().iter())
            .map(|(a, b)| a * b.conj())
            .sum();
        assert!((lhs - rhs).norm() < 1e-11);
    }

    #[test]
    fn linearity_and_translation() {
        let grid = FrequencyGrid::new(vec![32]).unwrap();
        let mut rng = SplitMix64::new(6);
        let nodes = random_nodes(&mut rng, 25, 1);
        let plan = NfftPlan::new(grid.clone(), &nodes).unwrap();
        let f = random_coeffs(&mut rng, 32);
        let g = random_coeffs(&mut rng, 32);
        let combo: Vec<Complex64> =
            f.iter().zip(&g).map(|(a, b)| 2.0 * a + 3.0 * b).collect();
        let direct = plan.forward(&combo).unwrap();
        let ff = plan.forward(&f).unwrap();
        let gg = plan.forward(&g).unwrap();
        for i in 0..25 {
            let mix = 2.0 * ff[i] + 3.0 * gg[i];
            assert!((direct[i] - mix).norm() <= 1e-13 * (1.0 + mix.norm()));
        }
        // integer torus shift leaves values unchanged
        let shifted: Vec<Vec<f64>> = nodes.iter().map(|p| vec![p[0] + 1.0]).collect();
        let plan_s = NfftPlan::new(grid, &shifted).unwrap();
        let vs = plan_s.forward(&f).unwrap();
        for i in 0..25 {
            assert!((vs[i] - ff[i]).norm() <= 1e-13 * (1.0 + ff[i].norm()));
        }
    }
}
