//! Constraint-function evaluation for the invariance families: per-environment
//! perturbed risks, between-environment difference residuals, and their exact
//! Jacobians, over sampled data, exact discrete laws, and population moments.

use crate::error::{Error, Result};
use crate::model::{EnvData, LossKind, SuiteData, Weights};
use crate::scalar::Real;

/// One basis function of the output-perturbation family, supplied as pointwise
/// closures for the value and its derivative.
pub struct OutputBasis<S> {
    pub value: Box<dyn Fn(S) -> S + Send + Sync>,
    pub deriv: Box<dyn Fn(S) -> S + Send + Sync>,
}

impl<S> std::fmt::Debug for OutputBasis<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("OutputBasis")
    }
}

impl<S: Real> OutputBasis<S> {
    /// The identity basis `φ(o) = o`, which reproduces the per-environment
    /// output-perturbation residual.
    pub fn identity() -> Self {
        Self {
            value: Box::new(|o| o),
            deriv: Box::new(|_| S::one()),
        }
    }
}

/// Constraint family bound to a training-environment set.
#[derive(Debug)]
pub enum Constraint<S> {
    /// One output-perturbation residual per environment; all must vanish.
    IrmV1,
    /// Between-environment differences of the output-perturbation residuals.
    IrmRelaxed,
    /// Between-environment differences of the label-perturbation residuals.
    MriV1,
    /// Per-environment, per-basis output-perturbation residuals.
    GeneralizedIrm(Vec<OutputBasis<S>>),
}

impl<S> Constraint<S> {
    pub fn name(&self) -> &'static str {
        match self {
            Constraint::IrmV1 => "irm-v1",
            Constraint::IrmRelaxed => "irm-relaxed",
            Constraint::MriV1 => "mri-v1",
            Constraint::GeneralizedIrm(_) => "generalized-irm",
        }
    }

    /// Residual vector length for `n_envs` training environments.
    pub fn residual_dim(&self, n_envs: usize) -> usize {
        match self {
            Constraint::IrmV1 => n_envs,
            Constraint::IrmRelaxed | Constraint::MriV1 => n_envs - 1,
            Constraint::GeneralizedIrm(basis) => n_envs * basis.len(),
        }
    }
}

impl<S> std::str::FromStr for Constraint<S> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "irm-v1" => Ok(Constraint::IrmV1),
            "irm-relaxed" => Ok(Constraint::IrmRelaxed),
            "mri-v1" => Ok(Constraint::MriV1),
            other => Err(Error::InvalidInput(format!(
                "unknown constraint '{other}' (expected irm-v1, irm-relaxed, mri-v1)"
            ))),
        }
    }
}

/// Orthonormal between-environment difference operator with `Q·1 = 0`.
#[derive(Debug, Clone)]
pub struct DiffMatrixQ<S> {
    rows: Vec<Vec<S>>,
}

impl<S: Real> DiffMatrixQ<S> {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.rows
    }

    /// `Q·v`.
    pub fn apply(&self, v: &[S]) -> Result<Vec<S>> {
        if v.len() != self.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "Q has {} columns, vector has {}",
                self.n_cols(),
                v.len()
            )));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().zip(v).map(|(&q, &x)| q * x).sum())
            .collect())
    }
}

/// Helmert construction: row `k` has `k` entries `1/√(k(k+1))` followed by
/// `−k/√(k(k+1))` and zeros. For two environments this is `[1, −1]/√2`.
pub fn build_q<S: Real>(n_envs: usize) -> Result<DiffMatrixQ<S>> {
    if n_envs < 2 {
        return Err(Error::InvalidInput(format!(
            "the difference operator needs at least 2 environments, got {n_envs}"
        )));
    }
    let mut rows = Vec::with_capacity(n_envs - 1);
    for k in 1..n_envs {
        let norm = S::of((k * (k + 1)) as f64).sqrt();
        let mut row = vec![S::zero(); n_envs];
        for item in row.iter_mut().take(k) {
            *item = S::one() / norm;
        }
        row[k] = -S::of(k as f64) / norm;
        rows.push(row);
    }
    Ok(DiffMatrixQ { rows })
}

/// Output-perturbation residual of one environment: `E[(σ(o) − y)·o]`, or
/// `Re E[(o − y)·conj(o)]` on the circular task. The square-loss moments path
/// uses the closed form `w·M_xx·wᵀ − w·m_xy`.
pub fn perturbed_risk_irm<S: Real>(
    kind: LossKind,
    w: &Weights<S>,
    env: &EnvData<S>,
) -> Result<S> {
    match env {
        EnvData::Moments(m) => {
            if kind != LossKind::Square {
                return Err(Error::Unsupported(
                    "the output-perturbation residual has no second-moment form for BCE".into(),
                ));
            }
            let (wi, ws) = w.pair()?;
            let quad = wi * wi * m.m_xx[0][0]
                + ws * ws * m.m_xx[1][1]
                + S::of(2.0) * wi * ws * m.m_xx[0][1];
            Ok(quad - (wi * m.m_xy[0] + ws * m.m_xy[1]))
        }
        EnvData::Atoms(a) => {
            let (wi, ws) = w.pair()?;
            Ok(a.mean(|x0, x1, y| {
                let o = wi * x0 + ws * x1;
                (kind.sigma(o) - y) * o
            }))
        }
        EnvData::Circular(b) => {
            if kind != LossKind::Square {
                return Err(Error::Unsupported(
                    "BCE loss is not defined for complex values".into(),
                ));
            }
            let (wi, ws) = w.pair()?;
            Ok(b.mean(|x0, x1, y| {
                let o = x0.scale(wi) + x1.scale(ws);
                ((o - y) * o.conj()).re
            }))
        }
    }
}

fn irm_grad<S: Real>(kind: LossKind, w: &Weights<S>, env: &EnvData<S>) -> Result<[S; 2]> {
    let (wi, ws) = w.pair()?;
    match env {
        EnvData::Moments(m) => {
            if kind != LossKind::Square {
                return Err(Error::Unsupported(
                    "the output-perturbation residual has no second-moment form for BCE".into(),
                ));
            }
            let two = S::of(2.0);
            Ok([
                two * (wi * m.m_xx[0][0] + ws * m.m_xx[0][1]) - m.m_xy[0],
                two * (wi * m.m_xx[0][1] + ws * m.m_xx[1][1]) - m.m_xy[1],
            ])
        }
        EnvData::Atoms(a) => {
            let mut g = [S::zero(), S::zero()];
            for i in 0..a.len() {
                let (x0, x1, y) = (a.x0[i], a.x1[i], a.y[i]);
                let o = wi * x0 + ws * x1;
                let d = kind.sigma_deriv(o) * o + kind.sigma(o) - y;
                let wt = a.weight_at(i);
                g[0] += wt * d * x0;
                g[1] += wt * d * x1;
            }
            Ok(g)
        }
        EnvData::Circular(b) => {
            if kind != LossKind::Square {
                return Err(Error::Unsupported(
                    "BCE loss is not defined for complex values".into(),
                ));
            }
            let two = S::of(2.0);
            let mut g = [S::zero(), S::zero()];
            for i in 0..b.len() {
                let o = b.x0[i].scale(wi) + b.x1[i].scale(ws);
                g[0] += two * (b.x0[i] * o.conj()).re - (b.x0[i] * b.y[i].conj()).re;
                g[1] += two * (b.x1[i] * o.conj()).re - (b.x1[i] * b.y[i].conj()).re;
            }
            let n = S::of(b.len() as f64);
            Ok([g[0] / n, g[1] / n])
        }
    }
}

/// Label-perturbation residual of one environment: `E[(ρ(y) − o)·y]`. Square
/// loss gives `E[y²] − Re E[o·conj(y)]`; BCE gives `−E[o·y]`.
pub fn perturbed_risk_mri<S: Real>(
    kind: LossKind,
    w: &Weights<S>,
    env: &EnvData<S>,
) -> Result<S> {
    match env {
        EnvData::Moments(m) => {
            let (wi, ws) = w.pair()?;
            let oy = wi * m.m_xy[0] + ws * m.m_xy[1];
            match kind {
                LossKind::Square => Ok(m.m_yy - oy),
                LossKind::Bce => Ok(-oy),
            }
        }
        EnvData::Atoms(a) => {
            let (wi, ws) = w.pair()?;
            Ok(a.mean(|x0, x1, y| {
                let o = wi * x0 + ws * x1;
                (kind.rho(y) - o) * y
            }))
        }
        EnvData::Circular(b) => {
            if kind != LossKind::Square {
                return Err(Error::Unsupported(
                    "BCE loss is not defined for complex values".into(),
                ));
            }
            let (wi, ws) = w.pair()?;
            Ok(b.mean(|x0, x1, y| {
                let o = x0.scale(wi) + x1.scale(ws);
                ((y - o) * y.conj()).re
            }))
        }
    }
}

fn mri_grad<S: Real>(kind: LossKind, w: &Weights<S>, env: &EnvData<S>) -> Result<[S; 2]> {
    w.pair()?;
    match env {
        EnvData::Moments(m) => Ok([-m.m_xy[0], -m.m_xy[1]]),
        EnvData::Atoms(a) => {
            let _ = kind;
            let mut g = [S::zero(), S::zero()];
            for i in 0..a.len() {
                let wt = a.weight_at(i);
                g[0] -= wt * a.x0[i] * a.y[i];
                g[1] -= wt * a.x1[i] * a.y[i];
            }
            Ok(g)
        }
        EnvData::Circular(b) => {
            let mut g = [S::zero(), S::zero()];
            for i in 0..b.len() {
                g[0] -= (b.x0[i] * b.y[i].conj()).re;
                g[1] -= (b.x1[i] * b.y[i].conj()).re;
            }
            let n = S::of(b.len() as f64);
            Ok([g[0] / n, g[1] / n])
        }
    }
}

fn generalized_residual<S: Real>(
    basis: &OutputBasis<S>,
    kind: LossKind,
    w: &Weights<S>,
    env: &EnvData<S>,
) -> Result<S> {
    let EnvData::Atoms(a) = env else {
        return Err(Error::Unsupported(
            "generalized output-perturbation residuals need pointwise real outputs".into(),
        ));
    };
    let (wi, ws) = w.pair()?;
    Ok(a.mean(|x0, x1, y| {
        let o = wi * x0 + ws * x1;
        (basis.value)(o) * (kind.sigma(o) - y)
    }))
}

fn generalized_grad<S: Real>(
    basis: &OutputBasis<S>,
    kind: LossKind,
    w: &Weights<S>,
    env: &EnvData<S>,
) -> Result<[S; 2]> {
    let EnvData::Atoms(a) = env else {
        return Err(Error::Unsupported(
            "generalized output-perturbation residuals need pointwise real outputs".into(),
        ));
    };
    let (wi, ws) = w.pair()?;
    let mut g = [S::zero(), S::zero()];
    for i in 0..a.len() {
        let (x0, x1, y) = (a.x0[i], a.x1[i], a.y[i]);
        let o = wi * x0 + ws * x1;
        let d = (basis.deriv)(o) * (kind.sigma(o) - y) + (basis.value)(o) * kind.sigma_deriv(o);
        let wt = a.weight_at(i);
        g[0] += wt * d * x0;
        g[1] += wt * d * x1;
    }
    Ok(g)
}

/// Constraint residual vector `c(w)` over the training environments.
pub fn residuals<S: Real>(
    constraint: &Constraint<S>,
    kind: LossKind,
    w: &Weights<S>,
    suite: &SuiteData<S>,
) -> Result<Vec<S>> {
    let n = suite.n_train();
    match constraint {
        Constraint::IrmV1 => suite
            .train
            .iter()
            .map(|e| perturbed_risk_irm(kind, w, e))
            .collect(),
        Constraint::IrmRelaxed => {
            let v: Vec<S> = suite
                .train
                .iter()
                .map(|e| perturbed_risk_irm(kind, w, e))
                .collect::<Result<_>>()?;
            build_q(n)?.apply(&v)
        }
        Constraint::MriV1 => {
            let v: Vec<S> = suite
                .train
                .iter()
                .map(|e| perturbed_risk_mri(kind, w, e))
                .collect::<Result<_>>()?;
            build_q(n)?.apply(&v)
        }
        Constraint::GeneralizedIrm(basis) => {
            if basis.is_empty() {
                return Err(Error::InvalidInput("empty perturbation basis".into()));
            }
            let mut out = Vec::with_capacity(n * basis.len());
            for env in &suite.train {
                for b in basis {
                    out.push(generalized_residual(b, kind, w, env)?);
                }
            }
            Ok(out)
        }
    }
}

/// Exact Jacobian of [`residuals`] with respect to the flat weight vector,
/// one row per residual.
pub fn residual_grad<S: Real>(
    constraint: &Constraint<S>,
    kind: LossKind,
    w: &Weights<S>,
    suite: &SuiteData<S>,
) -> Result<Vec<Vec<S>>> {
    let n = suite.n_train();
    let apply_q = |rows: Vec<[S; 2]>| -> Result<Vec<Vec<S>>> {
        let q = build_q::<S>(n)?;
        Ok(q.rows()
            .iter()
            .map(|qrow| {
                let mut acc = [S::zero(), S::zero()];
                for (qe, row) in qrow.iter().zip(&rows) {
                    acc[0] += *qe * row[0];
                    acc[1] += *qe * row[1];
                }
                acc.to_vec()
            })
            .collect())
    };
    match constraint {
        Constraint::IrmV1 => suite
            .train
            .iter()
            .map(|e| Ok(irm_grad(kind, w, e)?.to_vec()))
            .collect(),
        Constraint::IrmRelaxed => {
            let rows: Vec<[S; 2]> = suite
                .train
                .iter()
                .map(|e| irm_grad(kind, w, e))
                .collect::<Result<_>>()?;
            apply_q(rows)
        }
        Constraint::MriV1 => {
            let rows: Vec<[S; 2]> = suite
                .train
                .iter()
                .map(|e| mri_grad(kind, w, e))
                .collect::<Result<_>>()?;
            apply_q(rows)
        }
        Constraint::GeneralizedIrm(basis) => {
            if basis.is_empty() {
                return Err(Error::InvalidInput("empty perturbation basis".into()));
            }
            let mut out = Vec::with_capacity(n * basis.len());
            for env in &suite.train {
                for b in basis {
                    out.push(generalized_grad(b, kind, w, env)?.to_vec());
                }
            }
            Ok(out)
        }
    }
}

/// Squared residual norm `‖c(w)‖²`.
pub fn residual_norm_sq<S: Real>(
    constraint: &Constraint<S>,
    kind: LossKind,
    w: &Weights<S>,
    suite: &SuiteData<S>,
) -> Result<S> {
    Ok(residuals(constraint, kind, w, suite)?
        .iter()
        .map(|&c| c * c)
        .sum())
}
