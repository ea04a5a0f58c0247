//! Entropy-regularized unbalanced optimal transport: the dense Sinkhorn
//! solver, its NFFT-accelerated counterpart, plan recovery, primal/dual
//! objectives, Sinkhorn divergences, lambda scaling, and the exact 1D
//! Wasserstein oracle.

use crate::divergences::{kl_plan_divergence, kl_weights};
use crate::fastsum::{
    build_plan, default_band, default_bandwidth, default_interior, FastsumPlan,
    RegularizedKernel, SumKernel, DEFAULT_DEGREE,
};
use crate::measures::{pairwise_cost, rescale_pair_to_torus, CostSpec, DiscreteMeasure, Norm};
use crate::{OtError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Dense,
    Nfft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Zeros,
    UpperBound,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinkhornConfig {
    /// Entropy parameter: the KL(pi || mu x nu) term enters with weight 1/lambda.
    pub lambda: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Stop when the sup-norm change of both potentials drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub init: Init,
    /// Optional strictly increasing schedule ending at `lambda`.
    pub lambda_schedule: Option<Vec<f64>>,
}

impl SinkhornConfig {
    pub fn new(lambda: f64, eta: f64) -> Self {
        Self {
            lambda,
            eta1: eta,
            eta2: eta,
            tol: 1e-10,
            max_iter: 10_000,
            init: Init::Zeros,
            lambda_schedule: None,
        }
    }

    pub fn validate(&self, backend: Backend) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(OtError::InvalidParameter(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if backend == Backend::Nfft && self.lambda > 200.0 {
            return Err(OtError::InvalidParameter(format!(
                "accelerated backend supports lambda in (0, 200], got {}",
                self.lambda
            )));
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return Err(OtError::InvalidParameter(
                "marginal parameters eta1, eta2 must be > 0".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(OtError::InvalidParameter("tol must be > 0".into()));
        }
        if let Some(schedule) = &self.lambda_schedule {
            if schedule.is_empty()
                || schedule.windows(2).any(|w| w[0] >= w[1])
                || schedule.last() != Some(&self.lambda)
            {
                return Err(OtError::InvalidParameter(
                    "lambda schedule must be strictly increasing and end at lambda".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_change: f64,
    pub backend: Backend,
    pub wall_time_secs: f64,
    /// (lambda, iterations) per schedule stage; single entry for direct solves.
    pub stage_lambdas: Vec<(f64, usize)>,
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim != nu.dim {
        return Err(OtError::DimensionMismatch(format!(
            "measures have dimensions {} and {}",
            mu.dim, nu.dim
        )));
    }
    Ok(())
}

/// Shared state of one dense instance: the Gibbs matrix for a fixed lambda.
struct DenseCtx {
    k: Vec<f64>, // e^{-lambda d_ij^r}, n x m row-major
    n: usize,
    m: usize,
    ln_mu: Vec<f64>,
    ln_nu: Vec<f64>,
}

impl DenseCtx {
    fn build(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        cost: &CostSpec,
        lambda: f64,
    ) -> Result<Self> {
        let d = pairwise_cost(mu, nu, cost)?;
        let k = d.par_iter().map(|&c| (-lambda * c).exp()).collect();
        Ok(Self {
            k,
            n: mu.len(),
            m: nu.len(),
            ln_mu: mu.weights.iter().map(|w| w.ln()).collect(),
            ln_nu: nu.weights.iter().map(|w| w.ln()).collect(),
        })
    }

    /// t_i = sum_j k_ij e^{a_j}, computed with a global shift so the
    /// exponentials stay in range; returns ln t_i.
    fn log_matvec(&self, a: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let shift = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v: Vec<f64> = a.iter().map(|&x| (x - shift).exp()).collect();
        let (rows, cols) = if transpose { (self.m, self.n) } else { (self.n, self.m) };
        let out: Vec<f64> = (0..rows)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                if transpose {
                    for (j, &vj) in v.iter().enumerate().take(cols) {
                        acc += self.k[j * self.m + i] * vj;
                    }
                } else {
                    let row = &self.k[i * self.m..(i + 1) * self.m];
                    for (kij, &vj) in row.iter().zip(&v) {
                        acc += kij * vj;
                    }
                }
                acc
            })
            .collect();
        out.iter()
            .map(|&t| {
                if t > 0.0 && t.is_finite() {
                    Ok(t.ln() + shift)
                } else {
                    Err(OtError::Numeric(format!(
                        "non-positive or non-finite kernel sum {t} in Sinkhorn update"
                    )))
                }
            })
            .collect()
    }
}

fn sweep_dense(
    ctx: &DenseCtx,
    cfg: &SinkhornConfig,
    lambda: f64,
    pots: &mut DualPotentials,
) -> Result<f64> {
    let c1 = cfg.eta1 / (1.0 + cfg.eta1 * lambda);
    let c2 = cfg.eta2 / (1.0 + cfg.eta2 * lambda);
    let a: Vec<f64> = pots
        .gamma
        .iter()
        .zip(&ctx.ln_nu)
        .map(|(&g, &ln)| lambda * g + ln)
        .collect();
    let lt = ctx.log_matvec(&a, false)?;
    let mut change = 0.0f64;
    for (b, l) in pots.beta.iter_mut().zip(&lt) {
        let new = -c1 * l;
        change = change.max((new - *b).abs());
        *b = new;
    }
    let a2: Vec<f64> = pots
        .beta
        .iter()
        .zip(&ctx.ln_mu)
        .map(|(&b, &ln)| lambda * b + ln)
        .collect();
    let ltt = ctx.log_matvec(&a2, true)?;
    for (g, l) in pots.gamma.iter_mut().zip(&ltt) {
        let new = -c2 * l;
        change = change.max((new - *g).abs());
        *g = new;
    }
    if !change.is_finite() {
        return Err(OtError::Overflow {
            lambda,
            detail: "potential update produced a non-finite value".into(),
        });
    }
    Ok(change)
}

/// Shared state of one accelerated instance: rescaled geometry and the
/// Gibbs-kernel fast-summation plans (Fourier coefficients are cached in
/// the plans across iterations).
pub struct AccCtx {
    pub h: f64,
    lambda: f64,
    lambda_eff: f64,
    r: f64,
    scaled_mu: Vec<Vec<f64>>,
    scaled_nu: Vec<Vec<f64>>,
    to_mu: FastsumPlan,
    to_nu: FastsumPlan,
}

impl AccCtx {
    pub fn build(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        cost: &CostSpec,
        lambda: f64,
    ) -> Result<Self> {
        check_pair(mu, nu)?;
        if cost.norm != Norm::Euclidean {
            return Err(OtError::Unsupported(
                "accelerated backend requires the Euclidean cost".into(),
            ));
        }
        if mu.dim > 3 {
            return Err(OtError::Unsupported(
                "accelerated backend supports dimensions 1..=3".into(),
            ));
        }
        let r = cost.exponent;
        let bandwidth = default_bandwidth(mu.dim);
        let eps_b = default_band(bandwidth);
        let margin = eps_b.max(0.0625);
        let rescale = rescale_pair_to_torus(mu, nu, margin)?;
        let lambda_eff = lambda * rescale.h.powf(r);
        let kernel = SumKernel::gibbs(lambda_eff, r)?;
        let eps_i = default_interior(&kernel, bandwidth);
        let reg = RegularizedKernel::new(
            kernel,
            bandwidth,
            mu.dim,
            DEFAULT_DEGREE,
            eps_i,
            eps_b,
        )?;
        let to_mu = build_plan(reg.clone(), rescale.b.points.clone(), rescale.a.points.clone())?;
        let to_nu = build_plan(reg, rescale.a.points.clone(), rescale.b.points.clone())?;
        Ok(Self {
            h: rescale.h,
            lambda,
            lambda_eff,
            r,
            scaled_mu: rescale.a.points,
            scaled_nu: rescale.b.points,
            to_mu,
            to_nu,
        })
    }

    /// sum_j e^{-lambda d_ij^r} e^{a_j} at every mu atom (or nu atom when
    /// `transpose`); the linear sums cannot be shift-stabilized, so the
    /// exponents are range-checked first.
    fn kernel_sum(&self, a: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let count = a.len() as f64;
        let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max + count.ln() > 700.0 {
            return Err(OtError::Overflow {
                lambda: self.lambda,
                detail: format!(
                    "exponent {max:.1} too large for linear kernel sums; \
                     use a lambda schedule (lambda scaling) to keep the \
                     potentials small"
                ),
            });
        }
        let v: Vec<f64> = a.iter().map(|&x| x.exp()).collect();
        if transpose {
            self.to_nu.apply(&v)
        } else {
            self.to_mu.apply(&v)
        }
    }

    /// Applies the auxiliary cost kernel t^r e^{-lambda t^r} (in original
    /// units) to e^{a_j} at the nu atoms, evaluated at the mu atoms.
    fn cost_kernel_sum(&self, a: &[f64]) -> Result<Vec<f64>> {
        let bandwidth = default_bandwidth(self.scaled_mu[0].len());
        let eps_b = default_band(bandwidth);
        let kernel = SumKernel::cost_weighted(self.lambda_eff, self.r)?;
        let eps_i = default_interior(&kernel, bandwidth);
        let reg = RegularizedKernel::new(
            kernel,
            bandwidth,
            self.scaled_mu[0].len(),
            DEFAULT_DEGREE,
            eps_i,
            eps_b,
        )?;
        let plan = build_plan(reg, self.scaled_nu.clone(), self.scaled_mu.clone())?;
        let v: Vec<f64> = a.iter().map(|&x| x.exp()).collect();
        let s = plan.apply(&v)?;
        // the kernel argument is the scaled distance; d^r = h^r dbar^r
        let hr = self.h.powf(self.r);
        Ok(s.iter().map(|&x| hr * x).collect())
    }
}

fn sweep_nfft(
    ctx: &AccCtx,
    cfg: &SinkhornConfig,
    lambda: f64,
    ln_mu: &[f64],
    ln_nu: &[f64],
    pots: &mut DualPotentials,
) -> Result<f64> {
    let c1 = cfg.eta1 / (1.0 + cfg.eta1 * lambda);
    let c2 = cfg.eta2 / (1.0 + cfg.eta2 * lambda);
    let a: Vec<f64> = pots
        .gamma
        .iter()
        .zip(ln_nu)
        .map(|(&g, &ln)| lambda * g + ln)
        .collect();
    let t = ctx.kernel_sum(&a, false)?;
    let mut change = 0.0f64;
    for (b, &ti) in pots.beta.iter_mut().zip(&t) {
        if !(ti > 0.0) {
            return Err(OtError::Numeric(format!(
                "fast kernel sum {ti} is not positive; the Gibbs kernel \
                 decayed below the fast-summation accuracy at this lambda"
            )));
        }
        let new = -c1 * ti.ln();
        change = change.max((new - *b).abs());
        *b = new;
    }
    let a2: Vec<f64> = pots
        .beta
        .iter()
        .zip(ln_mu)
        .map(|(&b, &ln)| lambda * b + ln)
        .collect();
    let tt = ctx.kernel_sum(&a2, true)?;
    for (g, &tj) in pots.gamma.iter_mut().zip(&tt) {
        if !(tj > 0.0) {
            return Err(OtError::Numeric(format!(
                "fast kernel sum {tj} is not positive; the Gibbs kernel \
                 decayed below the fast-summation accuracy at this lambda"
            )));
        }
        let new = -c2 * tj.ln();
        change = change.max((new - *g).abs());
        *g = new;
    }
    Ok(change)
}

fn zero_potentials(n: usize, m: usize) -> DualPotentials {
    DualPotentials { beta: vec![0.0; n], gamma: vec![0.0; m] }
}

fn initial_potentials(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
    backend: Backend,
) -> Result<DualPotentials> {
    let mut pots = zero_potentials(mu.len(), nu.len());
    if cfg.init == Init::UpperBound {
        let pc = product_transport_cost(mu, nu, cost, backend)?;
        let c = c_star_reg(pc, mu.total_mass(), nu.total_mass(), cfg.eta1, cfg.eta2, cfg.lambda);
        pots.gamma.iter_mut().for_each(|g| *g = c);
    }
    Ok(pots)
}

/// Optimal scaling constant of the entropy-regularized restricted problem
/// over plans c (mu x nu).
pub fn c_star_reg(
    product_cost: f64,
    mu_mass: f64,
    nu_mass: f64,
    eta1: f64,
    eta2: f64,
    lambda: f64,
) -> f64 {
    let s = eta1 + eta2 + 1.0 / lambda;
    (-product_cost / (mu_mass * nu_mass * s)).exp()
        * mu_mass.powf(-eta2 / s)
        * nu_mass.powf(-eta1 / s)
}

/// <mu x nu, d^r>, the transport term of the independence coupling.
pub fn product_transport_cost(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    backend: Backend,
) -> Result<f64> {
    check_pair(mu, nu)?;
    if cost.norm == Norm::Euclidean && cost.exponent == 2.0 {
        // closed form: sum mu_i nu_j |x_i - y_j|^2 splits into moments
        let d = mu.dim;
        let mom2 = |m: &DiscreteMeasure| -> f64 {
            m.points
                .iter()
                .zip(&m.weights)
                .map(|(p, &w)| w * p.iter().map(|&c| c * c).sum::<f64>())
                .sum()
        };
        let mean = |m: &DiscreteMeasure| -> Vec<f64> {
            let mut acc = vec![0.0; d];
            for (p, &w) in m.points.iter().zip(&m.weights) {
                for (a, &c) in acc.iter_mut().zip(p) {
                    *a += w * c;
                }
            }
            acc
        };
        let cross: f64 = mean(mu).iter().zip(&mean(nu)).map(|(a, b)| a * b).sum();
        return Ok(nu.total_mass() * mom2(mu) + mu.total_mass() * mom2(nu) - 2.0 * cross);
    }
    match backend {
        Backend::Dense => {
            let d = pairwise_cost(mu, nu, cost)?;
            let m = nu.len();
            Ok(mu
                .weights
                .par_iter()
                .enumerate()
                .map(|(i, &wi)| {
                    let row = &d[i * m..(i + 1) * m];
                    wi * row.iter().zip(&nu.weights).map(|(c, w)| c * w).sum::<f64>()
                })
                .sum())
        }
        Backend::Nfft => {
            if cost.exponent != 1.0 {
                return Err(OtError::Unsupported(format!(
                    "accelerated product cost supports exponents 1 and 2, got {}",
                    cost.exponent
                )));
            }
            let bandwidth = default_bandwidth(mu.dim);
            let eps_b = default_band(bandwidth);
            let margin = eps_b.max(0.0625);
            let rescale = rescale_pair_to_torus(mu, nu, margin)?;
            let eps_i = default_interior(&SumKernel::Abs, bandwidth);
            let reg = RegularizedKernel::new(
                SumKernel::Abs,
                bandwidth,
                mu.dim,
                DEFAULT_DEGREE,
                eps_i,
                eps_b,
            )?;
            let plan = build_plan(reg, rescale.b.points, rescale.a.points)?;
            let s = plan.apply(&nu.weights)?;
            Ok(rescale.h
                * s.iter().zip(&mu.weights).map(|(v, &w)| v * w).sum::<f64>())
        }
    }
}

/// Dense Sinkhorn solve (Algorithm 1 semantics).
pub fn sinkhorn_uot_dense(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
) -> Result<(DualPotentials, SolveStats)> {
    cfg.validate(Backend::Dense)?;
    check_pair(mu, nu)?;
    let start = Instant::now();
    let mut pots = initial_potentials(mu, nu, cost, cfg, Backend::Dense)?;
    let ctx = DenseCtx::build(mu, nu, cost, cfg.lambda)?;
    let (iters, change) = run_stage(cfg, |p| sweep_dense(&ctx, cfg, cfg.lambda, p), &mut pots)?;
    Ok((
        pots,
        SolveStats {
            iterations: iters,
            final_change: change,
            backend: Backend::Dense,
            wall_time_secs: start.elapsed().as_secs_f64(),
            stage_lambdas: vec![(cfg.lambda, iters)],
        },
    ))
}

/// NFFT-accelerated Sinkhorn solve (Algorithm 2 semantics): identical
/// updates with the kernel sums computed by fast summation.
pub fn sinkhorn_uot_nfft(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
) -> Result<(DualPotentials, SolveStats)> {
    cfg.validate(Backend::Nfft)?;
    let start = Instant::now();
    let mut pots = initial_potentials(mu, nu, cost, cfg, Backend::Nfft)?;
    let ctx = AccCtx::build(mu, nu, cost, cfg.lambda)?;
    let ln_mu: Vec<f64> = mu.weights.iter().map(|w| w.ln()).collect();
    let ln_nu: Vec<f64> = nu.weights.iter().map(|w| w.ln()).collect();
    let (iters, change) = run_stage(
        cfg,
        |p| sweep_nfft(&ctx, cfg, cfg.lambda, &ln_mu, &ln_nu, p),
        &mut pots,
    )?;
    Ok((
        pots,
        SolveStats {
            iterations: iters,
            final_change: change,
            backend: Backend::Nfft,
            wall_time_secs: start.elapsed().as_secs_f64(),
            stage_lambdas: vec![(cfg.lambda, iters)],
        },
    ))
}

fn run_stage(
    cfg: &SinkhornConfig,
    mut sweep: impl FnMut(&mut DualPotentials) -> Result<f64>,
    pots: &mut DualPotentials,
) -> Result<(usize, f64)> {
    let mut change = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        change = sweep(pots)?;
        if change < cfg.tol {
            return Ok((it, change));
        }
    }
    Ok((cfg.max_iter, change))
}

/// Unified entry point across backends (direct solve; the schedule in the
/// config is honored by [`lambda_scaled_solve`]).
pub fn sinkhorn_uot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
    backend: Backend,
) -> Result<(DualPotentials, SolveStats)> {
    match backend {
        Backend::Dense => sinkhorn_uot_dense(mu, nu, cost, cfg),
        Backend::Nfft => sinkhorn_uot_nfft(mu, nu, cost, cfg),
    }
}

/// Solves at each lambda of the schedule in order, warm-starting the
/// potentials; falls back to a direct solve when no schedule is set.
pub fn lambda_scaled_solve(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
    backend: Backend,
) -> Result<(DualPotentials, SolveStats)> {
    cfg.validate(backend)?;
    let schedule = match &cfg.lambda_schedule {
        None => return sinkhorn_uot(mu, nu, cost, cfg, backend),
        Some(s) => s.clone(),
    };
    if schedule.len() == 1 {
        return sinkhorn_uot(mu, nu, cost, cfg, backend);
    }
    let start = Instant::now();
    check_pair(mu, nu)?;
    let mut pots = initial_potentials(mu, nu, cost, cfg, backend)?;
    let ln_mu: Vec<f64> = mu.weights.iter().map(|w| w.ln()).collect();
    let ln_nu: Vec<f64> = nu.weights.iter().map(|w| w.ln()).collect();
    let mut stage_lambdas = Vec::with_capacity(schedule.len());
    let mut total = 0usize;
    let mut change = f64::INFINITY;
    for &lambda in &schedule {
        let (iters, c) = match backend {
            Backend::Dense => {
                let ctx = DenseCtx::build(mu, nu, cost, lambda)?;
                run_stage(cfg, |p| sweep_dense(&ctx, cfg, lambda, p), &mut pots)?
            }
            Backend::Nfft => {
                let ctx = AccCtx::build(mu, nu, cost, lambda)?;
                run_stage(
                    cfg,
                    |p| sweep_nfft(&ctx, cfg, lambda, &ln_mu, &ln_nu, p),
                    &mut pots,
                )?
            }
        };
        stage_lambdas.push((lambda, iters));
        total += iters;
        change = c;
    }
    Ok((
        pots,
        SolveStats {
            iterations: total,
            final_change: change,
            backend,
            wall_time_secs: start.elapsed().as_secs_f64(),
            stage_lambdas,
        },
    ))
}

/// Dense plan recovery: pi_ij = e^{lambda beta_i} k_ij e^{lambda gamma_j}
/// mu_i nu_j.
pub fn recover_plan_dense(
    pots: &DualPotentials,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
) -> Result<Vec<f64>> {
    check_pair(mu, nu)?;
    let d = pairwise_cost(mu, nu, cost)?;
    let m = nu.len();
    let lambda = cfg.lambda;
    let mut plan = vec![0.0; mu.len() * m];
    for i in 0..mu.len() {
        for j in 0..m {
            let e = lambda * (pots.beta[i] + pots.gamma[j] - d[i * m + j])
                + mu.weights[i].ln()
                + nu.weights[j].ln();
            let v = e.exp();
            if !v.is_finite() {
                return Err(OtError::Overflow {
                    lambda,
                    detail: format!("plan entry ({i},{j}) overflowed"),
                });
            }
            plan[i * m + j] = v;
        }
    }
    Ok(plan)
}

/// Row and column sums of a dense plan.
pub fn plan_marginals(plan: &[f64], n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            rows[i] += plan[i * m + j];
            cols[j] += plan[i * m + j];
        }
    }
    (rows, cols)
}

/// Marginals of the recovered plan from the potentials; the accelerated
/// backend never materializes the plan.
pub fn marginals(
    pots: &DualPotentials,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
    backend: Backend,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let lambda = cfg.lambda;
    match backend {
        Backend::Dense => {
            let plan = recover_plan_dense(pots, mu, nu, cost, cfg)?;
            Ok(plan_marginals(&plan, mu.len(), nu.len()))
        }
        Backend::Nfft => {
            let ctx = AccCtx::build(mu, nu, cost, lambda)?;
            let a: Vec<f64> = pots
                .gamma
                .iter()
                .zip(&nu.weights)
                .map(|(&g, &w)| lambda * g + w.ln())
                .collect();
            let t = ctx.kernel_sum(&a, false)?;
            let row: Vec<f64> = pots
                .beta
                .iter()
                .zip(&mu.weights)
                .zip(&t)
                .map(|((&b, &w), &ti)| (lambda * b).exp() * w * ti)
                .collect();
            let a2: Vec<f64> = pots
                .beta
                .iter()
                .zip(&mu.weights)
                .map(|(&b, &w)| lambda * b + w.ln())
                .collect();
            let tt = ctx.kernel_sum(&a2, true)?;
            let col: Vec<f64> = pots
                .gamma
                .iter()
                .zip(&nu.weights)
                .zip(&tt)
                .map(|((&g, &w), &tj)| (lambda * g).exp() * w * tj)
                .collect();
            Ok((row, col))
        }
    }
}

/// Primal value of a dense plan:
/// <pi, d^r> + (1/lambda) KL(pi || mu x nu) + eta1 KL(t1#pi || mu)
/// + eta2 KL(t2#pi || nu).
pub fn primal_objective(
    plan: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
) -> Result<f64> {
    let d = pairwise_cost(mu, nu, cost)?;
    if plan.len() != d.len() {
        return Err(OtError::SizeMismatch(format!(
            "plan has {} entries, expected {}",
            plan.len(),
            d.len()
        )));
    }
    let transport: f64 = plan.iter().zip(&d).map(|(p, c)| p * c).sum();
    let kl = kl_plan_divergence(plan, mu, nu)?;
    let (rows, cols) = plan_marginals(plan, mu.len(), nu.len());
    Ok(transport
        + kl / cfg.lambda
        + cfg.eta1 * kl_weights(&rows, &mu.weights)
        + cfg.eta2 * kl_weights(&cols, &nu.weights))
}

/// Primal value from the potentials on either backend.  The accelerated
/// path uses log(pi/(mu x nu)) = lambda (beta_i + gamma_j - d_ij^r), so
/// every term reduces to marginals and the transport cost.
pub fn primal_value(
    pots: &DualPotentials,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
    backend: Backend,
) -> Result<f64> {
    match backend {
        Backend::Dense => {
            let plan = recover_plan_dense(pots, mu, nu, cost, cfg)?;
            primal_objective(&plan, mu, nu, cost, cfg)
        }
        Backend::Nfft => {
            let lambda = cfg.lambda;
            let (rows, cols) = marginals(pots, mu, nu, cost, cfg, backend)?;
            let transport = transport_cost(pots, mu, nu, cost, cfg, backend)?;
            let plan_mass: f64 = rows.iter().sum();
            let entropy_inner: f64 = lambda
                * (pots.beta.iter().zip(&rows).map(|(b, m)| b * m).sum::<f64>()
                    + pots.gamma.iter().zip(&cols).map(|(g, m)| g * m).sum::<f64>()
                    - transport);
            let kl = entropy_inner + mu.total_mass() * nu.total_mass() - plan_mass;
            Ok(transport
                + kl / lambda
                + cfg.eta1 * kl_weights(&rows, &mu.weights)
                + cfg.eta2 * kl_weights(&cols, &nu.weights))
        }
    }
}

/// Dual objective; strictly concave in the potentials.
pub fn dual_objective(
    pots: &DualPotentials,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
    backend: Backend,
) -> Result<f64> {
    let lambda = cfg.lambda;
    // S = sum_ij mu_i e^{lambda beta_i} k_ij e^{lambda gamma_j} nu_j
    let s = match backend {
        Backend::Dense => {
            let ctx = DenseCtx::build(mu, nu, cost, lambda)?;
            let a: Vec<f64> = pots
                .gamma
                .iter()
                .zip(&ctx.ln_nu)
                .map(|(&g, &ln)| lambda * g + ln)
                .collect();
            let lt = ctx.log_matvec(&a, false)?;
            pots.beta
                .iter()
                .zip(&mu.weights)
                .zip(&lt)
                .map(|((&b, &w), &l)| w * (lambda * b + l).exp())
                .sum::<f64>()
        }
        Backend::Nfft => {
            let ctx = AccCtx::build(mu, nu, cost, lambda)?;
            let a: Vec<f64> = pots
                .gamma
                .iter()
                .zip(&nu.weights)
                .map(|(&g, &w)| lambda * g + w.ln())
                .collect();
            let t = ctx.kernel_sum(&a, false)?;
            pots.beta
                .iter()
                .zip(&mu.weights)
                .zip(&t)
                .map(|((&b, &w), &ti)| w * (lambda * b).exp() * ti)
                .sum::<f64>()
        }
    };
    let m1 = mu.total_mass();
    let m2 = nu.total_mass();
    let term1: f64 = pots
        .beta
        .iter()
        .zip(&mu.weights)
        .map(|(&b, &w)| w * (-b / cfg.eta1).exp())
        .sum();
    let term2: f64 = pots
        .gamma
        .iter()
        .zip(&nu.weights)
        .map(|(&g, &w)| w * (-g / cfg.eta2).exp())
        .sum();
    Ok(-cfg.eta1 * term1 - cfg.eta2 * term2 + cfg.eta1 * m1 + cfg.eta2 * m2
        - (s - m1 * m2) / lambda)
}

/// <pi, d^r> at the recovered plan.
pub fn transport_cost(
    pots: &DualPotentials,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
    backend: Backend,
) -> Result<f64> {
    let lambda = cfg.lambda;
    match backend {
        Backend::Dense => {
            let plan = recover_plan_dense(pots, mu, nu, cost, cfg)?;
            let d = pairwise_cost(mu, nu, cost)?;
            Ok(plan.iter().zip(&d).map(|(p, c)| p * c).sum())
        }
        Backend::Nfft => {
            let ctx = AccCtx::build(mu, nu, cost, lambda)?;
            let a: Vec<f64> = pots
                .gamma
                .iter()
                .zip(&nu.weights)
                .map(|(&g, &w)| lambda * g + w.ln())
                .collect();
            let s = ctx.cost_kernel_sum(&a)?;
            Ok(pots
                .beta
                .iter()
                .zip(&mu.weights)
                .zip(&s)
                .map(|((&b, &w), &si)| w * (lambda * b).exp() * si)
                .sum())
        }
    }
}

/// Debiased (Sinkhorn) divergence:
/// UOT(mu,nu) - UOT(mu,mu)/2 - UOT(nu,nu)/2 + (mu(X)-nu(X))^2/(2 lambda),
/// each UOT value the converged primal objective.
pub fn sinkhorn_divergence(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    cfg: &SinkhornConfig,
    backend: Backend,
) -> Result<f64> {
    let value = |a: &DiscreteMeasure, b: &DiscreteMeasure| -> Result<f64> {
        let (pots, _) = lambda_scaled_solve(a, b, cost, cfg, backend)?;
        primal_value(&pots, a, b, cost, cfg, backend)
    };
    let cross = value(mu, nu)?;
    let self_mu = value(mu, mu)?;
    let self_nu = value(nu, nu)?;
    let mass_gap = mu.total_mass() - nu.total_mass();
    Ok(cross - 0.5 * self_mu - 0.5 * self_nu + mass_gap * mass_gap / (2.0 * cfg.lambda))
}

/// Relative dual-potential residual between two solves.
pub fn residual_dual(reference: &DualPotentials, test: &DualPotentials) -> Result<f64> {
    if reference.beta.len() != test.beta.len() || reference.gamma.len() != test.gamma.len() {
        return Err(OtError::SizeMismatch(
            "potential vectors have different lengths".into(),
        ));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let nb = norm(&reference.beta);
    let ng = norm(&reference.gamma);
    if nb == 0.0 || ng == 0.0 {
        return Err(OtError::InvalidParameter(
            "reference potentials have zero norm".into(),
        ));
    }
    Ok(diff(&test.beta, &reference.beta) / nb + diff(&test.gamma, &reference.gamma) / ng)
}

/// Exact 1D Wasserstein cost w_r (un-rooted) via the monotone coupling,
/// optimal for the convex cost |x - y|^r.
pub fn exact_wasserstein_1d(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    r: f64,
) -> Result<f64> {
    if p.dim != 1 || q.dim != 1 {
        return Err(OtError::DimensionMismatch(
            "exact Wasserstein oracle requires dimension 1".into(),
        ));
    }
    if (p.total_mass() - q.total_mass()).abs() > 1e-12 {
        return Err(OtError::InvalidParameter(format!(
            "total masses differ: {} vs {}",
            p.total_mass(),
            q.total_mass()
        )));
    }
    if !(r >= 1.0) {
        return Err(OtError::InvalidParameter(format!(
            "order r must be >= 1, got {r}"
        )));
    }
    let sorted = |m: &DiscreteMeasure| -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = m
            .points
            .iter()
            .zip(&m.weights)
            .map(|(p, &w)| (p[0], w))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let a = sorted(p);
    let b = sorted(q);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut cost = 0.0;
    loop {
        let m = ra.min(rb);
        cost += m * (a[i].0 - b[j].0).abs().powf(r);
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i].1;
        }
        if rb <= 1e-15 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j].1;
        }
    }
    Ok(cost)
}

/// Result of the balanced entropy-regularized OT solve.
#[derive(Debug, Clone, Copy)]
pub struct BalancedEntropic {
    /// <pi, d^r> + KL(pi || P x Q)/lambda at the converged plan.
    pub value: f64,
    /// <pi, d^r> alone.
    pub plan_cost: f64,
}

/// Balanced entropic OT between probability measures (classical Sinkhorn
/// with both marginals enforced).
pub fn balanced_entropic(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    cost: &CostSpec,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BalancedEntropic> {
    check_pair(p, q)?;
    if (p.total_mass() - 1.0).abs() > 1e-9 || (q.total_mass() - 1.0).abs() > 1e-9 {
        return Err(OtError::InvalidParameter(
            "balanced entropic OT expects probability measures".into(),
        ));
    }
    let d = pairwise_cost(p, q, cost)?;
    let (n, m) = (p.len(), q.len());
    let k: Vec<f64> = d.iter().map(|&c| (-lambda * c).exp()).collect();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    for _ in 0..max_iter {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..m {
                acc += k[i * m + j] * v[j] * q.weights[j];
            }
            if !(acc > 0.0 && acc.is_finite()) {
                return Err(OtError::Numeric(format!(
                    "balanced Sinkhorn kernel sum degenerated to {acc}"
                )));
            }
            let new = 1.0 / acc;
            change = change.max((new - u[i]).abs() / new.abs().max(1.0));
            u[i] = new;
        }
        for j in 0..m {
            let mut acc = 0.0;
            for i in 0..n {
                acc += k[i * m + j] * u[i] * p.weights[i];
            }
            let new = 1.0 / acc;
            change = change.max((new - v[j]).abs() / new.abs().max(1.0));
            v[j] = new;
        }
        if change < tol {
            break;
        }
    }
    // pi_ij = u_i p_i k_ij v_j q_j
    let mut plan_cost = 0.0;
    let mut inner = 0.0; // sum pi log(pi/(p x q)) = sum pi (ln u + ln v - lambda d)
    let mut mass = 0.0;
    for i in 0..n {
        for j in 0..m {
            let pi = u[i] * p.weights[i] * k[i * m + j] * v[j] * q.weights[j];
            plan_cost += pi * d[i * m + j];
            mass += pi;
            if pi > 0.0 {
                inner += pi * (u[i].ln() + v[j].ln() - lambda * d[i * m + j]);
            }
        }
    }
    let kl = inner + 1.0 - mass;
    Ok(BalancedEntropic { value: plan_cost + kl / lambda, plan_cost })
}
