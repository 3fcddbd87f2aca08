//! Soft-constraint training: penalty-method and augmented-Lagrangian
//! objectives over full-batch gradient descent (plain SGD or Adam) with
//! optional gradient clipping, per-step trajectory recording, and a
//! landscape grid evaluator.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invariance::{residual_grad, residuals, Constraint};
use crate::model::{mean_accuracy, mean_risk, mean_risk_grad, LossKind, SuiteData, Weights};
use crate::scalar::Real;
use crate::textio::g17;

/// Soft-constraint scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Penalty method: `L_tr + μ‖c‖²`.
    Pm,
    /// Augmented Lagrangian: `L_tr + μ‖c‖² + λᵀc` with per-step multiplier
    /// accumulation.
    Alm,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pm" => Ok(Method::Pm),
            "alm" => Ok(Method::Alm),
            other => Err(Error::InvalidInput(format!(
                "unknown method '{other}' (expected pm or alm)"
            ))),
        }
    }
}

/// First-order update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind<S> {
    Sgd,
    Adam { beta1: S, beta2: S, eps: S },
}

impl<S: Real> OptimizerKind<S> {
    /// Adam with the betas used for the linear tasks.
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: S::of(0.975),
            beta2: S::of(0.999),
            eps: S::of(1e-8),
        }
    }
}

/// Weight initialization.
#[derive(Debug, Clone)]
pub enum InitSpec<S> {
    Point(Weights<S>),
    /// Componentwise uniform over `[lo, hi]²`, drawn from the config seed.
    Uniform { lo: S, hi: S },
}

/// Full training configuration; every field is materialized (no hidden
/// defaults) so a run is reproducible from its record.
#[derive(Debug, Clone)]
pub struct TrainConfig<S> {
    pub method: Method,
    /// Penalty weight `μ ≥ 0` (ALM requires `μ > 0`).
    pub mu: S,
    /// Optional geometric penalty ramp `μ_t = μ·γ^t`; off when `None`.
    pub mu_ramp: Option<S>,
    /// ALM multiplier initialization; zeros when `None`.
    pub lambda0: Option<Vec<S>>,
    /// ALM multiplier step coefficient; the first-order rule `2μ` when `None`.
    pub alm_step: Option<S>,
    pub optimizer: OptimizerKind<S>,
    pub lr: S,
    pub steps: usize,
    /// Global gradient-norm clip threshold; no clipping when `None`.
    pub clip_norm: Option<S>,
    pub seed: u64,
    pub init: InitSpec<S>,
}

impl<S: Real> TrainConfig<S> {
    fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= S::zero()) {
            return Err(Error::InvalidInput(format!("mu must be >= 0, got {}", self.mu)));
        }
        if self.method == Method::Alm && self.mu <= S::zero() {
            return Err(Error::InvalidInput("ALM requires mu > 0".into()));
        }
        if !(self.lr.is_finite() && self.lr > S::zero()) {
            return Err(Error::InvalidInput(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be >= 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c >= S::zero()) {
                return Err(Error::InvalidInput(format!(
                    "clip_norm must be >= 0, got {c}"
                )));
            }
        }
        if let Some(g) = self.mu_ramp {
            if !(g.is_finite() && g > S::zero()) {
                return Err(Error::InvalidInput(format!(
                    "mu_ramp must be > 0, got {g}"
                )));
            }
        }
        if let InitSpec::Uniform { lo, hi } = &self.init {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput("init range needs lo < hi".into()));
            }
        }
        Ok(())
    }
}

/// One recorded iteration.
#[derive(Debug, Clone)]
pub struct TrajPoint<S> {
    pub step: usize,
    pub weights: Weights<S>,
    pub risk_train: S,
    pub risk_test: S,
    pub residuals: Vec<S>,
    pub c_norm_sq: S,
    pub lambda: Vec<S>,
    /// Gradient norm before clipping.
    pub grad_norm: S,
    /// Gradient norm after clipping (equal to `grad_norm` when inactive).
    pub grad_norm_clipped: S,
}

/// Per-iteration record of a training run, including the initialization.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub points: Vec<TrajPoint<S>>,
    pub diverged: bool,
    /// First step at which `‖w_t − w_{t−1}‖ < 1e−9`, if any.
    pub converged_at: Option<usize>,
}

impl<S: Real> Trajectory<S> {
    pub fn final_point(&self) -> &TrajPoint<S> {
        self.points.last().expect("trajectory is never empty")
    }

    /// Trajectory CSV:
    /// `step,w_inv,w_spu,risk_train,risk_test,c_norm_sq,grad_norm,lambda_0..`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let n_lambda = self.points.first().map_or(0, |p| p.lambda.len());
        let mut header =
            String::from("step,w_inv,w_spu,risk_train,risk_test,c_norm_sq,grad_norm");
        for k in 0..n_lambda {
            header.push_str(&format!(",lambda_{k}"));
        }
        writeln!(out, "{header}")?;
        for p in &self.points {
            let (wi, ws) = p.weights.pair()?;
            let mut line = format!(
                "{},{},{},{},{},{},{}",
                p.step,
                g17(wi),
                g17(ws),
                g17(p.risk_train),
                g17(p.risk_test),
                g17(p.c_norm_sq),
                g17(p.grad_norm)
            );
            for &l in &p.lambda {
                line.push(',');
                line.push_str(&g17(l));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn norm<S: Real>(v: &[S]) -> S {
    v.iter().map(|&x| x * x).sum::<S>().sqrt()
}

/// Soft-constraint objective value.
///
/// PM: `L_tr(w) + μ‖c(w)‖²`. ALM: `L_tr(w) + μ‖c(w)‖² + λᵀc(w)`.
/// `L_tr` is the unweighted mean of per-environment risks.
pub fn objective<S: Real>(
    method: Method,
    w: &Weights<S>,
    lambda: &[S],
    mu: S,
    kind: LossKind,
    constraint: &Constraint<S>,
    suite: &SuiteData<S>,
) -> Result<S> {
    let l_tr = mean_risk(kind, w, &suite.train)?;
    let c = residuals(constraint, kind, w, suite)?;
    let penalty = mu * c.iter().map(|&v| v * v).sum::<S>();
    match method {
        Method::Pm => Ok(l_tr + penalty),
        Method::Alm => {
            if lambda.len() != c.len() {
                return Err(Error::DimensionMismatch(format!(
                    "lambda has {} entries, residual has {}",
                    lambda.len(),
                    c.len()
                )));
            }
            let dual: S = lambda.iter().zip(&c).map(|(&l, &v)| l * v).sum();
            Ok(l_tr + penalty + dual)
        }
    }
}

/// Gradient of [`objective`]: `∇L_tr + Jᵀ(2μc + λ)`.
pub fn objective_grad<S: Real>(
    method: Method,
    w: &Weights<S>,
    lambda: &[S],
    mu: S,
    kind: LossKind,
    constraint: &Constraint<S>,
    suite: &SuiteData<S>,
) -> Result<Vec<S>> {
    let mut g = mean_risk_grad(kind, w, &suite.train)?;
    let c = residuals(constraint, kind, w, suite)?;
    let j = residual_grad(constraint, kind, w, suite)?;
    if method == Method::Alm && lambda.len() != c.len() {
        return Err(Error::DimensionMismatch(format!(
            "lambda has {} entries, residual has {}",
            lambda.len(),
            c.len()
        )));
    }
    let two = S::of(2.0);
    for (r, row) in j.iter().enumerate() {
        let coef = two * mu * c[r]
            + if method == Method::Alm {
                lambda[r]
            } else {
                S::zero()
            };
        for (k, gk) in g.iter_mut().enumerate() {
            *gk += coef * row[k];
        }
    }
    Ok(g)
}

struct AdamState<S> {
    m: Vec<S>,
    v: Vec<S>,
    t: i32,
}

/// Run full-batch training and record the whole trajectory (length
/// `steps + 1` including the initialization, unless the run diverges).
///
/// ALM accumulates the multiplier every iteration:
/// `λ ← λ + coeff·c(w_t)` with `coeff = alm_step` or the first-order rule
/// `2μ_t`. A non-finite objective or gradient aborts the run and marks the
/// trajectory diverged.
pub fn train<S: Real>(
    config: &TrainConfig<S>,
    kind: LossKind,
    constraint: &Constraint<S>,
    suite: &SuiteData<S>,
) -> Result<Trajectory<S>> {
    config.validate()?;
    let c_dim = constraint.residual_dim(suite.n_train());

    let mut w = match &config.init {
        InitSpec::Point(p) => p.clone(),
        InitSpec::Uniform { lo, hi } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let span = *hi - *lo;
            let wi = *lo + span * S::of(rng.random::<f64>());
            let ws = *lo + span * S::of(rng.random::<f64>());
            Weights::scalar(wi, ws)
        }
    };

    let mut lambda = match config.method {
        Method::Pm => Vec::new(),
        Method::Alm => match &config.lambda0 {
            Some(l0) => {
                if l0.len() != c_dim {
                    return Err(Error::DimensionMismatch(format!(
                        "lambda0 has {} entries, constraint residual has {c_dim}",
                        l0.len()
                    )));
                }
                l0.clone()
            }
            None => vec![S::zero(); c_dim],
        },
    };

    let mut adam = AdamState {
        m: vec![S::zero(); w.dim()],
        v: vec![S::zero(); w.dim()],
        t: 0,
    };
    let mut points = Vec::with_capacity(config.steps + 1);
    let mut diverged = false;
    let mut converged_at = None;

    for step in 0..=config.steps {
        let mu_t = match config.mu_ramp {
            Some(gamma) => config.mu * gamma.powi(step as i32),
            None => config.mu,
        };
        let risk_train = mean_risk(kind, &w, &suite.train)?;
        let risk_test = mean_risk(kind, &w, &suite.test)?;
        let c = residuals(constraint, kind, &w, suite)?;
        let c_norm_sq: S = c.iter().map(|&v| v * v).sum();
        let grad = objective_grad(
            config.method,
            &w,
            &lambda,
            mu_t,
            kind,
            constraint,
            suite,
        )?;
        let grad_norm = norm(&grad);
        let dual: S = lambda.iter().zip(&c).map(|(&l, &v)| l * v).sum();
        let obj = risk_train + mu_t * c_norm_sq + dual;

        let finite = obj.is_finite() && grad.iter().all(|g| g.is_finite());
        let mut clipped = grad.clone();
        let mut grad_norm_clipped = grad_norm;
        if finite {
            if let Some(limit) = config.clip_norm {
                if grad_norm > limit {
                    let scale = limit / grad_norm;
                    for g in clipped.iter_mut() {
                        *g *= scale;
                    }
                    grad_norm_clipped = norm(&clipped);
                }
            }
        }

        points.push(TrajPoint {
            step,
            weights: w.clone(),
            risk_train,
            risk_test,
            residuals: c.clone(),
            c_norm_sq,
            lambda: lambda.clone(),
            grad_norm,
            grad_norm_clipped,
        });

        if !finite {
            diverged = true;
            break;
        }
        if step == config.steps {
            break;
        }

        let flat = w.flat();
        let mut next = flat.clone();
        match config.optimizer {
            OptimizerKind::Sgd => {
                for (x, g) in next.iter_mut().zip(&clipped) {
                    *x = *x - config.lr * *g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                adam.t += 1;
                let one = S::one();
                for k in 0..next.len() {
                    adam.m[k] = beta1 * adam.m[k] + (one - beta1) * clipped[k];
                    adam.v[k] = beta2 * adam.v[k] + (one - beta2) * clipped[k] * clipped[k];
                    let m_hat = adam.m[k] / (one - beta1.powi(adam.t));
                    let v_hat = adam.v[k] / (one - beta2.powi(adam.t));
                    next[k] = next[k] - config.lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }

        if config.method == Method::Alm {
            let coeff = config.alm_step.unwrap_or(S::of(2.0) * mu_t);
            for (l, &v) in lambda.iter_mut().zip(&c) {
                *l += coeff * v;
            }
        }

        let delta = flat
            .iter()
            .zip(&next)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<S>()
            .sqrt();
        if converged_at.is_none() && delta < S::of(1e-9) {
            converged_at = Some(step + 1);
        }
        w = Weights::from_flat(&next, w.w_inv.len());
    }

    Ok(Trajectory {
        points,
        diverged,
        converged_at,
    })
}

/// Rectangular weight grid, endpoints inclusive.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec<S> {
    pub inv_lo: S,
    pub inv_hi: S,
    pub spu_lo: S,
    pub spu_hi: S,
    /// Points per axis.
    pub resolution: usize,
}

impl<S: Real> GridSpec<S> {
    pub fn square(lo: S, hi: S, resolution: usize) -> Result<Self> {
        let g = Self {
            inv_lo: lo,
            inv_hi: hi,
            spu_lo: lo,
            spu_hi: hi,
            resolution,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidInput("grid resolution must be >= 2".into()));
        }
        if !(self.inv_lo < self.inv_hi && self.spu_lo < self.spu_hi) {
            return Err(Error::InvalidInput("grid needs lo < hi on both axes".into()));
        }
        Ok(())
    }

    #[inline]
    fn lin(lo: S, hi: S, i: usize, res: usize) -> S {
        lo + (hi - lo) * S::of(i as f64) / S::of((res - 1) as f64)
    }

    pub fn inv_value(&self, i: usize) -> S {
        Self::lin(self.inv_lo, self.inv_hi, i, self.resolution)
    }

    pub fn spu_value(&self, j: usize) -> S {
        Self::lin(self.spu_lo, self.spu_hi, j, self.resolution)
    }

    /// Cell edge lengths.
    pub fn cell(&self) -> (S, S) {
        let denom = S::of((self.resolution - 1) as f64);
        (
            (self.inv_hi - self.inv_lo) / denom,
            (self.spu_hi - self.spu_lo) / denom,
        )
    }
}

/// Quantities a landscape sweep can evaluate at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandscapeQuantity {
    RiskTrain,
    RiskTest,
    /// Expands to train and test accuracy columns.
    Accuracy,
    IrmSqResidual,
    MriSqResidual,
}

impl std::str::FromStr for LandscapeQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "risk_train" => Ok(Self::RiskTrain),
            "risk_test" => Ok(Self::RiskTest),
            "accuracy" => Ok(Self::Accuracy),
            "irm_sq_residual" => Ok(Self::IrmSqResidual),
            "mri_sq_residual" => Ok(Self::MriSqResidual),
            other => Err(Error::InvalidInput(format!(
                "unknown landscape quantity '{other}'"
            ))),
        }
    }
}

/// Landscape table: one row per grid cell, `w_inv` and `w_spu` first.
#[derive(Debug, Clone)]
pub struct LandscapeTable<S> {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<S>>,
}

impl<S: Real> LandscapeTable<S> {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// `w_inv,w_spu,<quantity columns>` CSV.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|&v| g17(v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Evaluate the requested quantities at every grid point. Rows are emitted
/// with `w_inv` varying slowest; cells are evaluated in parallel.
pub fn landscape<S: Real>(
    grid: &GridSpec<S>,
    quantities: &[LandscapeQuantity],
    kind: LossKind,
    suite: &SuiteData<S>,
) -> Result<LandscapeTable<S>> {
    grid.validate()?;
    if quantities.is_empty() {
        return Err(Error::InvalidInput(
            "at least one landscape quantity is required".into(),
        ));
    }
    let mut columns = vec!["w_inv".to_string(), "w_spu".to_string()];
    for q in quantities {
        match q {
            LandscapeQuantity::RiskTrain => columns.push("risk_train".into()),
            LandscapeQuantity::RiskTest => columns.push("risk_test".into()),
            LandscapeQuantity::Accuracy => {
                columns.push("accuracy_train".into());
                columns.push("accuracy_test".into());
            }
            LandscapeQuantity::IrmSqResidual => columns.push("irm_sq_residual".into()),
            LandscapeQuantity::MriSqResidual => columns.push("mri_sq_residual".into()),
        }
    }

    let res = grid.resolution;
    let rows: Result<Vec<Vec<S>>> = (0..res * res)
        .into_par_iter()
        .map(|idx| {
            let i = idx / res;
            let j = idx % res;
            let wi = grid.inv_value(i);
            let ws = grid.spu_value(j);
            let w = Weights::scalar(wi, ws);
            let mut row = vec![wi, ws];
            for q in quantities {
                match q {
                    LandscapeQuantity::RiskTrain => {
                        row.push(mean_risk(kind, &w, &suite.train)?);
                    }
                    LandscapeQuantity::RiskTest => {
                        row.push(mean_risk(kind, &w, &suite.test)?);
                    }
                    LandscapeQuantity::Accuracy => {
                        row.push(mean_accuracy(&w, &suite.train)?);
                        row.push(mean_accuracy(&w, &suite.test)?);
                    }
                    LandscapeQuantity::IrmSqResidual => {
                        row.push(crate::invariance::residual_norm_sq(
                            &Constraint::IrmV1,
                            kind,
                            &w,
                            suite,
                        )?);
                    }
                    LandscapeQuantity::MriSqResidual => {
                        row.push(crate::invariance::residual_norm_sq(
                            &Constraint::MriV1,
                            kind,
                            &w,
                            suite,
                        )?);
                    }
                }
            }
            Ok(row)
        })
        .collect();

    Ok(LandscapeTable {
        columns,
        rows: rows?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::{preset_suite, suite_data_enumerated, suite_data_population, Preset};

    fn st_suite() -> SuiteData<f64> {
        suite_data_population(&preset_suite(Preset::StReg)).unwrap()
    }

    fn pm_config(mu: f64, steps: usize, init: (f64, f64)) -> TrainConfig<f64> {
        TrainConfig {
            method: Method::Pm,
            mu,
            mu_ramp: None,
            lambda0: None,
            alm_step: None,
            optimizer: OptimizerKind::Sgd,
            lr: 5e-3,
            steps,
            clip_norm: Some(2.0),
            seed: 0,
            init: InitSpec::Point(Weights::scalar(init.0, init.1)),
        }
    }

    #[test]
    fn objective_reduces_to_erm_at_mu_zero() {
        let suite = st_suite();
        let w = Weights::scalar(0.4, -0.2);
        let obj = objective(Method::Pm, &w, &[], 0.0, LossKind::Square, &Constraint::IrmV1, &suite)
            .unwrap();
        let erm = mean_risk(LossKind::Square, &w, &suite.train).unwrap();
        assert_eq!(obj, erm);
    }

    #[test]
    fn objective_on_invariant_line_ignores_penalty() {
        let suite = st_suite();
        let w = Weights::scalar(0.75, 0.0);
        let l_tr = mean_risk(LossKind::Square, &w, &suite.train).unwrap();
        assert!((l_tr - 0.4375).abs() < 1e-15);
        for mu in [0.0, 10.0, 5e4] {
            let pm = objective(Method::Pm, &w, &[], mu, LossKind::Square, &Constraint::MriV1, &suite)
                .unwrap();
            assert_eq!(pm, l_tr);
            let alm = objective(
                Method::Alm,
                &w,
                &[3.0],
                mu.max(1.0),
                LossKind::Square,
                &Constraint::MriV1,
                &suite,
            )
            .unwrap();
            assert_eq!(alm, l_tr);
        }
    }

    #[test]
    fn gradient_vanishes_at_erm_optimum() {
        // Unconstrained optimum of the mean train risk solves M̄ w = m̄.
        let suite = st_suite();
        let (m00, m01, m11) = (1.0, 0.75 * 0.9, 1.0);
        let (b0, b1) = (0.75, 0.9);
        let det = m00 * m11 - m01 * m01;
        let w = Weights::scalar((b0 * m11 - m01 * b1) / det, (m00 * b1 - m01 * b0) / det);
        let g = objective_grad(Method::Pm, &w, &[], 0.0, LossKind::Square, &Constraint::MriV1, &suite)
            .unwrap();
        assert!(norm(&g) < 1e-10, "grad {g:?}");
    }

    #[test]
    fn constraint_term_dominates_at_large_mu() {
        let suite = st_suite();
        let w = Weights::scalar(0.75, 0.1);
        let g = objective_grad(
            Method::Pm,
            &w,
            &[],
            5e4,
            LossKind::Square,
            &Constraint::MriV1,
            &suite,
        )
        .unwrap();
        assert!(g[1].abs() > 100.0 * g[0].abs(), "grad {g:?}");
    }

    #[test]
    fn objective_grad_matches_finite_differences() {
        let suite = st_suite();
        let enumerated = suite_data_enumerated(&preset_suite::<f64>(Preset::ToyCmnista)).unwrap();
        let cases: [(&SuiteData<f64>, LossKind); 2] =
            [(&suite, LossKind::Square), (&enumerated, LossKind::Bce)];
        let h = 1e-6;
        for (data, kind) in cases {
            for constraint in [Constraint::IrmV1, Constraint::MriV1, Constraint::IrmRelaxed] {
                let dim = constraint.residual_dim(data.n_train());
                let lambda: Vec<f64> = (0..dim).map(|k| 0.3 * (k as f64 + 1.0)).collect();
                let w = Weights::scalar(0.62, -0.35);
                let g = objective_grad(Method::Alm, &w, &lambda, 7.5, kind, &constraint, data)
                    .unwrap();
                for k in 0..2 {
                    let mut wp = w.flat();
                    let mut wm = w.flat();
                    wp[k] += h;
                    wm[k] -= h;
                    let op = objective(
                        Method::Alm,
                        &Weights::from_flat(&wp, 1),
                        &lambda,
                        7.5,
                        kind,
                        &constraint,
                        data,
                    )
                    .unwrap();
                    let om = objective(
                        Method::Alm,
                        &Weights::from_flat(&wm, 1),
                        &lambda,
                        7.5,
                        kind,
                        &constraint,
                        data,
                    )
                    .unwrap();
                    let fd = (op - om) / (2.0 * h);
                    assert!(
                        (g[k] - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                        "{} {kind:?}: {} vs {fd}",
                        constraint.name(),
                        g[k]
                    );
                }
            }
        }
    }

    #[test]
    fn trajectory_shape_and_determinism() {
        let suite = st_suite();
        let mut config = pm_config(5e4, 50, (1.2, -0.7));
        config.init = InitSpec::Uniform { lo: -1.5, hi: 1.5 };
        config.seed = 9;
        let a = train(&config, LossKind::Square, &Constraint::MriV1, &suite).unwrap();
        let b = train(&config, LossKind::Square, &Constraint::MriV1, &suite).unwrap();
        assert_eq!(a.points.len(), 51);
        assert!(!a.diverged);
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_eq!(pa.weights, pb.weights);
            assert_eq!(pa.risk_train.to_bits(), pb.risk_train.to_bits());
            assert_eq!(pa.grad_norm.to_bits(), pb.grad_norm.to_bits());
        }
    }

    #[test]
    fn clipping_bounds_the_gradient_norm() {
        let suite = st_suite();
        let config = pm_config(5e4, 100, (1.5, 1.5));
        let traj = train(&config, LossKind::Square, &Constraint::MriV1, &suite).unwrap();
        let mut clipped_active = false;
        for p in &traj.points {
            assert!(p.grad_norm_clipped <= 2.0 + 1e-12);
            if p.grad_norm > 2.0 {
                clipped_active = true;
            }
        }
        assert!(clipped_active);
    }

    #[test]
    fn pm_objective_is_monotone_at_small_lr() {
        let suite = st_suite();
        for (mu, lr) in [(100.0, 1e-3), (5e4, 1e-4)] {
            let config = TrainConfig {
                method: Method::Pm,
                mu,
                mu_ramp: None,
                lambda0: None,
                alm_step: None,
                optimizer: OptimizerKind::Sgd,
                lr,
                steps: 400,
                clip_norm: None,
                seed: 0,
                init: InitSpec::Point(Weights::scalar(1.0, 0.5)),
            };
            let traj = train(&config, LossKind::Square, &Constraint::MriV1, &suite).unwrap();
            let objs: Vec<f64> = traj
                .points
                .iter()
                .map(|p| p.risk_train + mu * p.c_norm_sq)
                .collect();
            for pair in objs.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-9, "mu={mu} lr={lr}: {pair:?}");
            }
        }
    }

    #[test]
    fn alm_accumulates_multipliers_and_tightens_feasibility() {
        let suite = st_suite();
        let mk = |method: Method| TrainConfig {
            method,
            mu: 10.0,
            mu_ramp: None,
            lambda0: None,
            alm_step: None,
            optimizer: OptimizerKind::Sgd,
            lr: 5e-3,
            steps: 4000,
            clip_norm: Some(2.0),
            seed: 0,
            init: InitSpec::Point(Weights::scalar(1.0, 1.0)),
        };
        let pm = train(&mk(Method::Pm), LossKind::Square, &Constraint::MriV1, &suite).unwrap();
        let alm = train(&mk(Method::Alm), LossKind::Square, &Constraint::MriV1, &suite).unwrap();
        assert!(alm.final_point().lambda[0].abs() > 0.0);
        let c_pm = pm.final_point().c_norm_sq.sqrt();
        let c_alm = alm.final_point().c_norm_sq.sqrt();
        assert!(c_alm <= c_pm, "ALM {c_alm} vs PM {c_pm}");
        assert!(c_pm > 1e-6);
        assert!(c_alm < 1e-6);
    }

    #[test]
    fn divergence_is_flagged() {
        let suite = st_suite();
        let config = TrainConfig {
            method: Method::Pm,
            mu: 5e4,
            mu_ramp: None,
            lambda0: None,
            alm_step: None,
            optimizer: OptimizerKind::Sgd,
            lr: 1e3,
            steps: 200,
            clip_norm: None,
            seed: 0,
            init: InitSpec::Point(Weights::scalar(1.0, 1.0)),
        };
        let traj = train(&config, LossKind::Square, &Constraint::IrmV1, &suite).unwrap();
        assert!(traj.diverged);
        assert!(traj.points.len() < 201);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let suite = st_suite();
        let mut config = pm_config(5e4, 10, (0.0, 0.0));
        config.method = Method::Alm;
        config.mu = 0.0;
        assert!(train(&config, LossKind::Square, &Constraint::MriV1, &suite).is_err());
        let mut config = pm_config(5e4, 10, (0.0, 0.0));
        config.lr = 0.0;
        assert!(train(&config, LossKind::Square, &Constraint::MriV1, &suite).is_err());
        let mut config = pm_config(5e4, 10, (0.0, 0.0));
        config.method = Method::Alm;
        config.lambda0 = Some(vec![0.0, 0.0]);
        assert!(train(&config, LossKind::Square, &Constraint::MriV1, &suite).is_err());
    }

    #[test]
    fn grid_values_hit_exact_center() {
        let grid = GridSpec::square(-1.5f64, 1.5, 201).unwrap();
        assert_eq!(grid.inv_value(0), -1.5);
        assert_eq!(grid.inv_value(200), 1.5);
        assert_eq!(grid.inv_value(100), 0.0);
        assert!(GridSpec::square(1.0f64, -1.0, 10).is_err());
        assert!(GridSpec::square(-1.0f64, 1.0, 1).is_err());
    }

    #[test]
    fn landscape_on_regression_moments() {
        let suite = st_suite();
        let grid = GridSpec::square(-1.5f64, 1.5, 21).unwrap();
        let table = landscape(
            &grid,
            &[
                LandscapeQuantity::RiskTrain,
                LandscapeQuantity::RiskTest,
                LandscapeQuantity::MriSqResidual,
                LandscapeQuantity::IrmSqResidual,
            ],
            LossKind::Square,
            &suite,
        )
        .unwrap();
        assert_eq!(table.rows.len(), 441);
        let rt = table.column_index("risk_train").unwrap();
        let mri = table.column_index("mri_sq_residual").unwrap();
        for row in &table.rows {
            // mri residual vanishes exactly on w_spu = 0, positive elsewhere
            if row[1] == 0.0 {
                assert_eq!(row[mri], 0.0);
            } else {
                assert!(row[mri] > 0.0);
            }
            if row[0] == 0.0 && row[1] == 0.0 {
                assert_eq!(row[rt], 1.0);
            }
        }
        // accuracy is undefined on a moments-only suite
        assert!(landscape(&grid, &[LandscapeQuantity::Accuracy], LossKind::Square, &suite).is_err());
    }

    #[test]
    fn landscape_accuracy_plateau_on_enumerated_suite() {
        let suite = suite_data_enumerated(&preset_suite::<f64>(Preset::ToyCmnista)).unwrap();
        let grid = GridSpec::square(-1.5f64, 1.5, 21).unwrap();
        let table = landscape(&grid, &[LandscapeQuantity::Accuracy], LossKind::Bce, &suite).unwrap();
        let at = table.column_index("accuracy_train").unwrap();
        let ae = table.column_index("accuracy_test").unwrap();
        let (cell, _) = grid.cell();
        for row in &table.rows {
            if row[0] > row[1].abs() + cell {
                assert_eq!(row[at], 0.75);
                assert_eq!(row[ae], 0.75);
            }
        }
    }

    #[test]
    fn trajectory_csv_schema() {
        let suite = st_suite();
        let mut config = pm_config(10.0, 5, (0.3, 0.3));
        config.method = Method::Alm;
        let traj = train(&config, LossKind::Square, &Constraint::MriV1, &suite).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "step,w_inv,w_spu,risk_train,risk_test,c_norm_sq,grad_norm,lambda_0"
        ));
        assert_eq!(text.lines().count(), 7);
    }
}
