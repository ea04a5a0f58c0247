//! Bregman and Kullback-Leibler divergences for unbalanced discrete
//! measures, plus the dense maximum mean discrepancy and its elementary
//! upper bound.

use crate::kernels::RadialKernel;
use crate::measures::{euclidean_distance, DiscreteMeasure};
use crate::{OtError, Result};

/// Scalar convex generator phi for the integral Bregman family.
pub struct ConvexGenerator {
    pub phi: Box<dyn Fn(f64) -> f64 + Sync>,
    pub phi_at_1: f64,
    pub dphi_at_1: f64,
}

impl ConvexGenerator {
    /// phi(z) = z log z, the KL generator (phi(1) = 0, phi'(1) = 1).
    pub fn kl() -> Self {
        Self {
            phi: Box::new(|z| if z == 0.0 { 0.0 } else { z * z.ln() }),
            phi_at_1: 0.0,
            dphi_at_1: 1.0,
        }
    }

    /// phi(z) = (z - 1)^2.
    pub fn chi_squared() -> Self {
        Self {
            phi: Box::new(|z| (z - 1.0) * (z - 1.0)),
            phi_at_1: 0.0,
            dphi_at_1: 0.0,
        }
    }
}

/// Bregman divergence of `nu` from `mu` on a shared atom list:
/// sum_i phi(nu_i/mu_i) mu_i + phi'(1)(mu(X) - nu(X)) - phi(1) mu(X).
pub fn bregman_divergence(
    gen: &ConvexGenerator,
    nu: &DiscreteMeasure,
    mu: &DiscreteMeasure,
) -> Result<f64> {
    if !nu.same_atoms(mu) {
        return Err(OtError::AtomMismatch);
    }
    let mut acc = 0.0;
    for (&n, &m) in nu.weights.iter().zip(&mu.weights) {
        acc += (gen.phi)(n / m) * m;
    }
    Ok(acc + gen.dphi_at_1 * (mu.total_mass() - nu.total_mass())
        - gen.phi_at_1 * mu.total_mass())
}

/// Generalized KL divergence for unbalanced measures on shared atoms:
/// sum_i nu_i log(nu_i/mu_i) + mu(X) - nu(X), with 0 log 0 = 0.
pub fn kl_divergence(nu: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<f64> {
    if !nu.same_atoms(mu) {
        return Err(OtError::AtomMismatch);
    }
    Ok(kl_weights(&nu.weights, &mu.weights))
}

/// KL on raw weight vectors; nu entries may be zero, mu entries may not.
pub fn kl_weights(nu: &[f64], mu: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut mass_mu = 0.0;
    let mut mass_nu = 0.0;
    for (&n, &m) in nu.iter().zip(mu) {
        mass_mu += m;
        mass_nu += n;
        if n > 0.0 {
            if m == 0.0 {
                return f64::INFINITY;
            }
            acc += n * (n / m).ln();
        }
    }
    acc + mass_mu - mass_nu
}

/// KL(pi || mu x nu) for a dense row-major plan of shape n x m.
pub fn kl_plan_divergence(
    pi: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<f64> {
    let (n, m) = (mu.len(), nu.len());
    if pi.len() != n * m {
        return Err(OtError::SizeMismatch(format!(
            "plan has {} entries, expected {}x{}",
            pi.len(),
            n,
            m
        )));
    }
    let mut acc = 0.0;
    let mut plan_mass = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = pi[i * m + j];
            plan_mass += p;
            if p > 0.0 {
                acc += p * (p / (mu.weights[i] * nu.weights[j])).ln();
            }
        }
    }
    Ok(acc + mu.total_mass() * nu.total_mass() - plan_mass)
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn quadratic_form(
    k: &RadialKernel,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
) -> f64 {
    kahan_sum(a.points.iter().zip(&a.weights).flat_map(|(x, &wx)| {
        b.points
            .iter()
            .zip(&b.weights)
            .map(move |(y, &wy)| wx * wy * k.evaluate(euclidean_distance(x, y)))
    }))
}

/// Raw and clamped squared MMD.
#[derive(Debug, Clone, Copy)]
pub struct MmdSquared {
    /// Clamped at zero; the quantity to report.
    pub value: f64,
    /// Unclamped accumulation, kept for diagnostics.
    pub raw: f64,
}

/// Dense MMD^2 via three kernel quadratic forms (summed in a fixed order
/// with compensated accumulation).  The Energy kernel is only a distance
/// for equal total masses and is refused otherwise unless `force` is set.
pub fn mmd_squared_dense(
    k: &RadialKernel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    force: bool,
) -> Result<MmdSquared> {
    if mu.dim != nu.dim {
        return Err(OtError::DimensionMismatch(format!(
            "measures have dimensions {} and {}",
            mu.dim, nu.dim
        )));
    }
    if matches!(k, RadialKernel::Energy)
        && (mu.total_mass() - nu.total_mass()).abs() > 1e-12
        && !force
    {
        return Err(OtError::InvalidParameter(
            "energy-kernel MMD requires equal total masses (not a distance otherwise); \
             pass force to compute it anyway"
                .into(),
        ));
    }
    // Symmetric cross term: evaluate in a canonical argument order so that
    // mmd(mu, nu) == mmd(nu, mu) bit for bit.
    let (first, second) = if mu.len() <= nu.len() { (mu, nu) } else { (nu, mu) };
    let raw = quadratic_form(k, mu, mu) - 2.0 * quadratic_form(k, first, second)
        + quadratic_form(k, nu, nu);
    Ok(MmdSquared { value: raw.max(0.0), raw })
}

/// Accelerated MMD^2: the three quadratic forms are computed with the
/// fast-summation pipeline on jointly rescaled nodes.
pub fn mmd_squared_nfft(
    k: &RadialKernel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    force: bool,
) -> Result<MmdSquared> {
    use crate::fastsum::{
        build_plan, default_band, default_bandwidth, default_interior, RegularizedKernel,
        SumKernel, DEFAULT_DEGREE,
    };
    use crate::measures::rescale_pair_to_torus;

    if mu.dim != nu.dim {
        return Err(OtError::DimensionMismatch(format!(
            "measures have dimensions {} and {}",
            mu.dim, nu.dim
        )));
    }
    if matches!(k, RadialKernel::Energy)
        && (mu.total_mass() - nu.total_mass()).abs() > 1e-12
        && !force
    {
        return Err(OtError::InvalidParameter(
            "energy-kernel MMD requires equal total masses (not a distance otherwise); \
             pass force to compute it anyway"
                .into(),
        ));
    }
    let bandwidth = default_bandwidth(mu.dim);
    let eps_b = default_band(bandwidth);
    let margin = eps_b.max(0.0625);
    let rescale = rescale_pair_to_torus(mu, nu, margin)?;
    let h = rescale.h;
    // kernel in scaled units: K(t) = factor * S(t / h)
    let (sum_kernel, factor) = match *k {
        RadialKernel::Gauss { length_scale } => {
            (SumKernel::Gauss { length_scale: length_scale / h }, 1.0)
        }
        RadialKernel::Laplace { length_scale } => {
            (SumKernel::Laplace { length_scale: length_scale / h }, 1.0)
        }
        RadialKernel::Imq { c } => (SumKernel::Imq { c: c / h }, 1.0 / h),
        RadialKernel::Energy => (SumKernel::Abs, -h),
    };
    let eps_i = default_interior(&sum_kernel, bandwidth);
    let reg = RegularizedKernel::new(sum_kernel, bandwidth, mu.dim, DEFAULT_DEGREE, eps_i, eps_b)?;
    let form = |src: &crate::measures::DiscreteMeasure,
                src_pts: &Vec<Vec<f64>>,
                tgt: &crate::measures::DiscreteMeasure,
                tgt_pts: &Vec<Vec<f64>>|
     -> Result<f64> {
        let plan = build_plan(reg.clone(), src_pts.clone(), tgt_pts.clone())?;
        let s = plan.apply(&src.weights)?;
        Ok(factor * s.iter().zip(&tgt.weights).map(|(v, &w)| v * w).sum::<f64>())
    };
    let (sa, sb) = (&rescale.a.points, &rescale.b.points);
    let (first, fp, second, sp) = if mu.len() <= nu.len() {
        (mu, sa, nu, sb)
    } else {
        (nu, sb, mu, sa)
    };
    let raw = form(mu, sa, mu, sa)? - 2.0 * form(first, fp, second, sp)?
        + form(nu, sb, nu, sb)?;
    Ok(MmdSquared { value: raw.max(0.0), raw })
}

/// Elementary upper bound sqrt(k(0) * (mu(X)^2 + nu(X)^2)) for bounded
/// kernels.
pub fn mmd_elementary_bound(
    k: &RadialKernel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<f64> {
    if !k.is_bounded() {
        return Err(OtError::Unsupported(
            "elementary MMD bound requires a bounded kernel".into(),
        ));
    }
    let m = mu.total_mass();
    let n = nu.total_mass();
    Ok((k.evaluate(0.0) * (m * m + n * n)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample_uniform, WeightMode};

    fn point(x: f64, w: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(vec![vec![x]], vec![w]).unwrap()
    }

    #[test]
    fn bregman_examples() {
        let mu = point(0.0, 2.0);
        let nu = point(0.0, 1.0);
        let kl = ConvexGenerator::kl();
        assert_eq!(bregman_divergence(&kl, &mu, &mu).unwrap(), 0.0);
        let v = bregman_divergence(&kl, &nu, &mu).unwrap();
        assert!((v - (1.0 - 2f64.ln())).abs() < 1e-15);
        let chi = ConvexGenerator::chi_squared();
        let w = bregman_divergence(&chi, &point(0.0, 2.0), &point(0.0, 1.0)).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let mu = point(0.0, 2.0);
        let nu = point(0.0, 1.0);
        assert_eq!(kl_divergence(&mu, &mu).unwrap(), 0.0);
        assert!((kl_divergence(&nu, &mu).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        // normalized-vs-raw closed form with total mass 4
        let raw = DiscreteMeasure::new(
            vec![vec![0.0], vec![1.0]],
            vec![1.0, 3.0],
        )
        .unwrap();
        let p = raw.normalize();
        let v = kl_divergence(&p, &raw).unwrap();
        assert!((v - (-(4f64.ln()) + 3.0)).abs() < 1e-12);
        // mismatch in atoms errors
        assert!(matches!(
            kl_divergence(&point(0.0, 1.0), &point(1.0, 1.0)),
            Err(OtError::AtomMismatch)
        ));
    }

    #[test]
    fn kl_nonnegative_random() {
        let mut rng = crate::rng::SplitMix64::new(5);
        for _ in 0..200 {
            let points: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
            let w1: Vec<f64> = (0..8).map(|_| rng.next_f64_open()).collect();
            let w2: Vec<f64> = (0..8).map(|_| rng.next_f64_open()).collect();
            let mu = DiscreteMeasure::new(points.clone(), w1).unwrap();
            let nu = DiscreteMeasure::new(points, w2).unwrap();
            assert!(kl_divergence(&nu, &mu).unwrap() >= 0.0);
        }
    }

    #[test]
    fn plan_kl_examples() {
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let nu = mu.clone();
        let product: Vec<f64> = (0..2)
            .flat_map(|i| (0..2).map(move |j| [0.5, 0.5][i] * [0.5, 0.5][j]))
            .collect();
        assert!(kl_plan_divergence(&product, &mu, &nu).unwrap().abs() < 1e-15);
        let half: Vec<f64> = product.iter().map(|p| 0.5 * p).collect();
        let v = kl_plan_divergence(&half, &mu, &nu).unwrap();
        assert!((v - (0.5 * 0.5f64.ln() + 0.5)).abs() < 1e-15);
        let zero = vec![0.0; 4];
        assert!((kl_plan_divergence(&zero, &mu, &nu).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mmd_examples() {
        let g = RadialKernel::gauss(1.0).unwrap();
        let a = point(0.0, 1.0);
        assert!(mmd_squared_dense(&g, &a, &a, false).unwrap().value < 1e-12);
        let b = point(1.0, 1.0);
        let v = mmd_squared_dense(&g, &a, &b, false).unwrap().value;
        assert!((v - (2.0 - 2.0 * (-1f64).exp())).abs() < 1e-14);
        let e = RadialKernel::Energy;
        let w = mmd_squared_dense(&e, &a, &b, false).unwrap().value;
        assert!((w - 2.0).abs() < 1e-14);
        // unequal mass energy MMD refused without force
        let c = point(1.0, 2.0);
        assert!(mmd_squared_dense(&e, &a, &c, false).is_err());
        assert!(mmd_squared_dense(&e, &a, &c, true).is_ok());
    }

    #[test]
    fn mmd_symmetry_and_dirac_identity() {
        let k = RadialKernel::imq(0.8).unwrap();
        let a = sample_uniform(17, 2, WeightMode::UniformRandom, 21).unwrap();
        let b = sample_uniform(23, 2, WeightMode::UniformRandom, 22).unwrap();
        let v1 = mmd_squared_dense(&k, &a, &b, false).unwrap().raw;
        let v2 = mmd_squared_dense(&k, &b, &a, false).unwrap().raw;
        assert_eq!(v1, v2);
        let x = point(0.3, 1.0);
        let y = point(1.1, 1.0);
        let mmd2 = mmd_squared_dense(&k, &x, &y, false).unwrap().value;
        let pm = k.pseudo_metric(0.8).unwrap();
        assert!((mmd2 - pm * pm).abs() < 1e-12);
    }

    #[test]
    fn mmd_triangle_inequality_probability_measures() {
        let k = RadialKernel::gauss(0.5).unwrap();
        for seed in 0..20u64 {
            let a = sample_uniform(12, 2, WeightMode::Probability, 100 + seed).unwrap();
            let b = sample_uniform(9, 2, WeightMode::Probability, 200 + seed).unwrap();
            let c = sample_uniform(15, 2, WeightMode::Probability, 300 + seed).unwrap();
            let ab = mmd_squared_dense(&k, &a, &b, false).unwrap().value.sqrt();
            let bc = mmd_squared_dense(&k, &b, &c, false).unwrap().value.sqrt();
            let ac = mmd_squared_dense(&k, &a, &c, false).unwrap().value.sqrt();
            assert!(ac <= ab + bc + 1e-10);
        }
    }

    #[test]
    fn mmd_nfft_matches_dense() {
        for (k, tol) in [
            (RadialKernel::gauss(0.7).unwrap(), 1e-9),
            (RadialKernel::laplace(0.9).unwrap(), 1e-6),
            (RadialKernel::imq(0.6).unwrap(), 1e-6),
            (RadialKernel::Energy, 1e-6),
        ] {
            let a = sample_uniform(300, 2, WeightMode::Probability, 31).unwrap();
            let b = sample_uniform(250, 2, WeightMode::Probability, 32).unwrap();
            let dense = mmd_squared_dense(&k, &a, &b, true).unwrap().raw;
            let fast = mmd_squared_nfft(&k, &a, &b, true).unwrap().raw;
            assert!(
                (dense - fast).abs() <= tol * dense.abs().max(1e-6),
                "{k:?}: {dense} vs {fast}"
            );
        }
    }

    #[test]
    fn elementary_bound() {
        let g = RadialKernel::gauss(1.0).unwrap();
        let a = point(0.0, 1.0);
        let b = point(1.0, 1.0);
        assert!((mmd_elementary_bound(&g, &a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let q = RadialKernel::imq(2.0).unwrap();
        assert!((mmd_elementary_bound(&q, &a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!(mmd_elementary_bound(&RadialKernel::Energy, &a, &b).is_err());
        for seed in 0..100u64 {
            let x = sample_uniform(10, 2, WeightMode::UniformRandom, 400 + seed).unwrap();
            let y = sample_uniform(11, 2, WeightMode::UniformRandom, 500 + seed).unwrap();
            let bound = mmd_elementary_bound(&g, &x, &y).unwrap();
            let v = mmd_squared_dense(&g, &x, &y, false).unwrap().value.sqrt();
            assert!(bound >= v);
        }
    }
}
