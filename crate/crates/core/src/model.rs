//! Losses, link functions, linear predictors over latent features, and
//! risk/accuracy evaluation against sampled data, exact discrete laws, and
//! closed-form population moments.
//!
//! Conventions used throughout the crate:
//!
//! * Pointwise losses carry the conventional normalization: square loss is
//!   `½(o−y)²` and binary cross-entropy uses `(1±y)/2` coefficients with
//!   labels in `{−1,+1}`, so the zero predictor scores `ln 2` per sample.
//! * Risks aggregate the *unhalved* squared error `E‖o−y‖²` for the square
//!   loss (the form whose second-moment expansion is used everywhere) and
//!   the mean pointwise loss for BCE.
//! * `loss_grad_output` / `loss_grad_label` return the link-normalized
//!   derivatives `σ(o)−y` and `ρ(y)−o`. For the square loss these are the
//!   exact derivatives of the pointwise loss; for BCE they are the
//!   derivatives of the doubled loss (the normalization under which
//!   `∂_o l = σ(o)−y` holds with `σ(o)=tanh(o/2)`).

use num_complex::Complex;

use crate::envgen::PopulationMoments;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pointwise loss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `½(o−y)²`; link `σ(o)=o`, label link `ρ(y)=y`.
    Square,
    /// Binary cross-entropy over labels `y ∈ {−1,+1}`; link `σ(o)=tanh(o/2)`,
    /// label link `ρ(y)=0`.
    Bce,
}

impl LossKind {
    /// Link function `σ`.
    #[inline]
    pub fn sigma<S: Real>(self, o: S) -> S {
        match self {
            LossKind::Square => o,
            LossKind::Bce => (o / S::of(2.0)).tanh(),
        }
    }

    /// Derivative `σ'` of the link function.
    #[inline]
    pub fn sigma_deriv<S: Real>(self, o: S) -> S {
        match self {
            LossKind::Square => S::one(),
            LossKind::Bce => {
                let t = (o / S::of(2.0)).tanh();
                (S::one() - t * t) / S::of(2.0)
            }
        }
    }

    /// Label link `ρ`.
    #[inline]
    pub fn rho<S: Real>(self, y: S) -> S {
        match self {
            LossKind::Square => y,
            LossKind::Bce => S::zero(),
        }
    }
}

fn check_finite<S: Real>(label: &str, v: S) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{label} is not finite: {v}")))
    }
}

fn check_bce_label<S: Real>(y: S) -> Result<()> {
    if y == S::one() || y == -S::one() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "BCE label must be -1 or +1, got {y}"
        )))
    }
}

/// `ln(1 + e^t)` without overflow for large `|t|`.
#[inline]
fn softplus<S: Real>(t: S) -> S {
    t.max(S::zero()) + (-t.abs()).exp().ln_1p()
}

/// Pointwise loss `l(o, y)`.
pub fn loss<S: Real>(kind: LossKind, o: S, y: S) -> Result<S> {
    check_finite("output", o)?;
    check_finite("label", y)?;
    match kind {
        LossKind::Square => {
            let d = o - y;
            Ok(d * d / S::of(2.0))
        }
        LossKind::Bce => {
            check_bce_label(y)?;
            Ok(softplus(-y * o))
        }
    }
}

/// Pointwise loss on complex values: `½‖o−y‖²`. Only the square loss has a
/// complex form; the circular-regression task uses it.
pub fn loss_complex<S: Real>(kind: LossKind, o: Complex<S>, y: Complex<S>) -> Result<S> {
    check_finite("output re", o.re)?;
    check_finite("output im", o.im)?;
    check_finite("label re", y.re)?;
    check_finite("label im", y.im)?;
    match kind {
        LossKind::Square => Ok((o - y).norm_sqr() / S::of(2.0)),
        LossKind::Bce => Err(Error::Unsupported(
            "BCE loss is not defined for complex values".into(),
        )),
    }
}

/// Link-normalized output derivative `σ(o) − y`.
pub fn loss_grad_output<S: Real>(kind: LossKind, o: S, y: S) -> Result<S> {
    check_finite("output", o)?;
    check_finite("label", y)?;
    if kind == LossKind::Bce {
        check_bce_label(y)?;
    }
    Ok(kind.sigma(o) - y)
}

/// Complex counterpart of [`loss_grad_output`]: `o − y` packed as a complex
/// number (the gradient with respect to `(Re o, Im o)`).
pub fn loss_grad_output_complex<S: Real>(
    kind: LossKind,
    o: Complex<S>,
    y: Complex<S>,
) -> Result<Complex<S>> {
    match kind {
        LossKind::Square => Ok(o - y),
        LossKind::Bce => Err(Error::Unsupported(
            "BCE loss is not defined for complex values".into(),
        )),
    }
}

/// Link-normalized label derivative `ρ(y) − o`.
pub fn loss_grad_label<S: Real>(kind: LossKind, o: S, y: S) -> Result<S> {
    check_finite("output", o)?;
    check_finite("label", y)?;
    if kind == LossKind::Bce {
        check_bce_label(y)?;
    }
    Ok(kind.rho(y) - o)
}

/// Complex counterpart of [`loss_grad_label`] (square loss): `y − o`.
pub fn loss_grad_label_complex<S: Real>(
    kind: LossKind,
    o: Complex<S>,
    y: Complex<S>,
) -> Result<Complex<S>> {
    match kind {
        LossKind::Square => Ok(y - o),
        LossKind::Bce => Err(Error::Unsupported(
            "BCE loss is not defined for complex values".into(),
        )),
    }
}

/// Linear predictor parameters: one weight block per latent group.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<S> {
    pub w_inv: Vec<S>,
    pub w_spu: Vec<S>,
}

impl<S: Real> Weights<S> {
    pub fn new(w_inv: Vec<S>, w_spu: Vec<S>) -> Result<Self> {
        if w_inv.is_empty() || w_spu.is_empty() {
            return Err(Error::InvalidInput(
                "weight blocks must be non-empty".into(),
            ));
        }
        for &v in w_inv.iter().chain(w_spu.iter()) {
            check_finite("weight", v)?;
        }
        Ok(Self { w_inv, w_spu })
    }

    /// The common one-dimensional case.
    pub fn scalar(w_inv: S, w_spu: S) -> Self {
        Self {
            w_inv: vec![w_inv],
            w_spu: vec![w_spu],
        }
    }

    pub fn dim(&self) -> usize {
        self.w_inv.len() + self.w_spu.len()
    }

    /// Both blocks as scalars; errors unless `d_inv = d_spu = 1`.
    pub fn pair(&self) -> Result<(S, S)> {
        if self.w_inv.len() == 1 && self.w_spu.len() == 1 {
            Ok((self.w_inv[0], self.w_spu[0]))
        } else {
            Err(Error::DimensionMismatch(format!(
                "expected scalar weight blocks, got d_inv={} d_spu={}",
                self.w_inv.len(),
                self.w_spu.len()
            )))
        }
    }

    /// Concatenated `[w_inv..., w_spu...]` view used by the optimizer.
    pub fn flat(&self) -> Vec<S> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.w_inv);
        v.extend_from_slice(&self.w_spu);
        v
    }

    pub fn from_flat(flat: &[S], d_inv: usize) -> Self {
        Self {
            w_inv: flat[..d_inv].to_vec(),
            w_spu: flat[d_inv..].to_vec(),
        }
    }
}

/// `o = w_inv·z_inv + w_spu·z_spu` over real features.
pub fn predict<S: Real>(w: &Weights<S>, z_inv: &[S], z_spu: &[S]) -> Result<S> {
    if z_inv.len() != w.w_inv.len() || z_spu.len() != w.w_spu.len() {
        return Err(Error::DimensionMismatch(format!(
            "features ({}, {}) vs weights ({}, {})",
            z_inv.len(),
            z_spu.len(),
            w.w_inv.len(),
            w.w_spu.len()
        )));
    }
    let dot = |ws: &[S], zs: &[S]| -> S {
        ws.iter().zip(zs).map(|(&a, &b)| a * b).sum()
    };
    Ok(dot(&w.w_inv, z_inv) + dot(&w.w_spu, z_spu))
}

/// Complex-feature predictor with real weights.
pub fn predict_complex<S: Real>(
    w: &Weights<S>,
    z_inv: &[Complex<S>],
    z_spu: &[Complex<S>],
) -> Result<Complex<S>> {
    if z_inv.len() != w.w_inv.len() || z_spu.len() != w.w_spu.len() {
        return Err(Error::DimensionMismatch(format!(
            "features ({}, {}) vs weights ({}, {})",
            z_inv.len(),
            z_spu.len(),
            w.w_inv.len(),
            w.w_spu.len()
        )));
    }
    let mut o = Complex::new(S::zero(), S::zero());
    for (&ws, &z) in w.w_inv.iter().zip(z_inv) {
        o = o + z.scale(ws);
    }
    for (&ws, &z) in w.w_spu.iter().zip(z_spu) {
        o = o + z.scale(ws);
    }
    Ok(o)
}

/// Finite set of weighted real atoms `(x0, x1, y)`. Uniform weights (`None`)
/// represent a sampled dataset; explicit weights represent an exact discrete
/// law (they must sum to one).
#[derive(Debug, Clone)]
pub struct AtomSet<S> {
    pub x0: Vec<S>,
    pub x1: Vec<S>,
    pub y: Vec<S>,
    pub weight: Option<Vec<S>>,
}

impl<S: Real> AtomSet<S> {
    pub fn uniform(x0: Vec<S>, x1: Vec<S>, y: Vec<S>) -> Result<Self> {
        let set = Self {
            x0,
            x1,
            y,
            weight: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn weighted(x0: Vec<S>, x1: Vec<S>, y: Vec<S>, weight: Vec<S>) -> Result<Self> {
        let set = Self {
            x0,
            x1,
            y,
            weight: Some(weight),
        };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        if self.x0.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.x0.len() != self.x1.len() || self.x0.len() != self.y.len() {
            return Err(Error::DimensionMismatch(
                "atom columns have unequal lengths".into(),
            ));
        }
        if let Some(w) = &self.weight {
            if w.len() != self.x0.len() {
                return Err(Error::DimensionMismatch(
                    "weight column length differs from atoms".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }

    /// Weight of atom `i`.
    #[inline]
    pub fn weight_at(&self, i: usize) -> S {
        match &self.weight {
            Some(w) => w[i],
            None => S::one() / S::of(self.x0.len() as f64),
        }
    }

    /// Weighted mean of a per-atom function of `(x0, x1, y)`.
    pub fn mean<F: FnMut(S, S, S) -> S>(&self, mut f: F) -> S {
        let mut acc = S::zero();
        for i in 0..self.len() {
            acc += self.weight_at(i) * f(self.x0[i], self.x1[i], self.y[i]);
        }
        acc
    }
}

/// Sampled circular-regression batch: complex unit features and labels,
/// uniform weights.
#[derive(Debug, Clone)]
pub struct ComplexBatch<S> {
    pub x0: Vec<Complex<S>>,
    pub x1: Vec<Complex<S>>,
    pub y: Vec<Complex<S>>,
}

impl<S: Real> ComplexBatch<S> {
    pub fn new(x0: Vec<Complex<S>>, x1: Vec<Complex<S>>, y: Vec<Complex<S>>) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if x0.len() != x1.len() || x0.len() != y.len() {
            return Err(Error::DimensionMismatch(
                "batch columns have unequal lengths".into(),
            ));
        }
        Ok(Self { x0, x1, y })
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }

    /// Mean of a per-sample function of `(x0, x1, y)`.
    pub fn mean<F: FnMut(Complex<S>, Complex<S>, Complex<S>) -> S>(&self, mut f: F) -> S {
        let mut acc = S::zero();
        for i in 0..self.len() {
            acc += f(self.x0[i], self.x1[i], self.y[i]);
        }
        acc / S::of(self.len() as f64)
    }
}

/// One environment's data in whichever representation is available.
#[derive(Debug, Clone)]
pub enum EnvData<S> {
    /// Exact second-order statistics; supports square-loss closed forms only.
    Moments(PopulationMoments<S>),
    /// Weighted real atoms (sampled data or an exact discrete law).
    Atoms(AtomSet<S>),
    /// Sampled circular-regression data.
    Circular(ComplexBatch<S>),
}

/// Per-environment data for a whole suite, train then held-out test.
#[derive(Debug, Clone)]
pub struct SuiteData<S> {
    pub train: Vec<EnvData<S>>,
    pub test: Vec<EnvData<S>>,
}

impl<S> SuiteData<S> {
    pub fn new(train: Vec<EnvData<S>>, test: Vec<EnvData<S>>) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::InvalidInput(
                "a suite needs at least two training environments".into(),
            ));
        }
        if test.is_empty() {
            return Err(Error::InvalidInput(
                "a suite needs at least one test environment".into(),
            ));
        }
        Ok(Self { train, test })
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }
}

/// Closed-form square-loss risk `w·M_xx·wᵀ − 2·Re(w·m_xy) + m_yy`.
pub fn population_risk<S: Real>(
    kind: LossKind,
    w: &Weights<S>,
    m: &PopulationMoments<S>,
) -> Result<S> {
    if kind != LossKind::Square {
        return Err(Error::Unsupported(
            "no closed-form risk from second moments for BCE; use the enumeration path".into(),
        ));
    }
    let (wi, ws) = w.pair()?;
    let quad = wi * wi * m.m_xx[0][0]
        + ws * ws * m.m_xx[1][1]
        + S::of(2.0) * wi * ws * m.m_xx[0][1];
    Ok(quad - S::of(2.0) * (wi * m.m_xy[0] + ws * m.m_xy[1]) + m.m_yy)
}

fn population_risk_grad<S: Real>(w: &Weights<S>, m: &PopulationMoments<S>) -> Result<Vec<S>> {
    let (wi, ws) = w.pair()?;
    let two = S::of(2.0);
    Ok(vec![
        two * (wi * m.m_xx[0][0] + ws * m.m_xx[0][1] - m.m_xy[0]),
        two * (wi * m.m_xx[0][1] + ws * m.m_xx[1][1] - m.m_xy[1]),
    ])
}

/// Environment risk of a linear predictor.
///
/// Square loss: `E‖o−y‖²` over atoms, complex batches, or moments.
/// BCE: mean pointwise loss over atoms (weighted or sampled).
pub fn risk<S: Real>(kind: LossKind, w: &Weights<S>, env: &EnvData<S>) -> Result<S> {
    match env {
        EnvData::Moments(m) => population_risk(kind, w, m),
        EnvData::Atoms(a) => {
            let (wi, ws) = w.pair()?;
            match kind {
                LossKind::Square => Ok(a.mean(|x0, x1, y| {
                    let d = wi * x0 + ws * x1 - y;
                    d * d
                })),
                LossKind::Bce => Ok(a.mean(|x0, x1, y| softplus(-y * (wi * x0 + ws * x1)))),
            }
        }
        EnvData::Circular(b) => {
            if kind != LossKind::Square {
                return Err(Error::Unsupported(
                    "BCE loss is not defined for complex values".into(),
                ));
            }
            let (wi, ws) = w.pair()?;
            Ok(b.mean(|x0, x1, y| (x0.scale(wi) + x1.scale(ws) - y).norm_sqr()))
        }
    }
}

/// Gradient of [`risk`] with respect to the flat weight vector.
pub fn risk_grad<S: Real>(kind: LossKind, w: &Weights<S>, env: &EnvData<S>) -> Result<Vec<S>> {
    match env {
        EnvData::Moments(m) => {
            if kind != LossKind::Square {
                return Err(Error::Unsupported(
                    "no closed-form risk gradient from second moments for BCE".into(),
                ));
            }
            population_risk_grad(w, m)
        }
        EnvData::Atoms(a) => {
            let (wi, ws) = w.pair()?;
            let two = S::of(2.0);
            let half = S::of(0.5);
            let mut g = [S::zero(), S::zero()];
            for i in 0..a.len() {
                let (x0, x1, y) = (a.x0[i], a.x1[i], a.y[i]);
                let o = wi * x0 + ws * x1;
                // d(risk)/do: unhalved square risk -> 2(o−y); BCE mean loss -> (σ(o)−y)/2.
                let dl = match kind {
                    LossKind::Square => two * (o - y),
                    LossKind::Bce => half * (kind.sigma(o) - y),
                };
                let wt = a.weight_at(i);
                g[0] += wt * dl * x0;
                g[1] += wt * dl * x1;
            }
            Ok(g.to_vec())
        }
        EnvData::Circular(b) => {
            if kind != LossKind::Square {
                return Err(Error::Unsupported(
                    "BCE loss is not defined for complex values".into(),
                ));
            }
            let (wi, ws) = w.pair()?;
            let two = S::of(2.0);
            let mut g = [S::zero(), S::zero()];
            for i in 0..b.len() {
                let o = b.x0[i].scale(wi) + b.x1[i].scale(ws);
                let d = o - b.y[i];
                g[0] += two * (d * b.x0[i].conj()).re;
                g[1] += two * (d * b.x1[i].conj()).re;
            }
            let n = S::of(b.len() as f64);
            Ok(vec![g[0] / n, g[1] / n])
        }
    }
}

/// Fraction of atoms with `sign(o) = y`, counting `sign(0)` as `+1`.
pub fn accuracy<S: Real>(w: &Weights<S>, env: &EnvData<S>) -> Result<S> {
    let a = match env {
        EnvData::Atoms(a) => a,
        _ => {
            return Err(Error::Unsupported(
                "accuracy needs a binary-labelled atom set".into(),
            ))
        }
    };
    let (wi, ws) = w.pair()?;
    let one = S::one();
    for &y in &a.y {
        if y != one && y != -one {
            return Err(Error::InvalidInput(format!(
                "accuracy needs labels in {{-1,+1}}, got {y}"
            )));
        }
    }
    Ok(a.mean(|x0, x1, y| {
        let o = wi * x0 + ws * x1;
        let s = if o >= S::zero() { one } else { -one };
        if s == y {
            one
        } else {
            S::zero()
        }
    }))
}

/// Mean risk over a set of environments.
pub fn mean_risk<S: Real>(kind: LossKind, w: &Weights<S>, envs: &[EnvData<S>]) -> Result<S> {
    let mut acc = S::zero();
    for e in envs {
        acc += risk(kind, w, e)?;
    }
    Ok(acc / S::of(envs.len() as f64))
}

/// Mean risk gradient over a set of environments.
pub fn mean_risk_grad<S: Real>(
    kind: LossKind,
    w: &Weights<S>,
    envs: &[EnvData<S>],
) -> Result<Vec<S>> {
    let mut acc = vec![S::zero(); w.dim()];
    for e in envs {
        let g = risk_grad(kind, w, e)?;
        for (a, b) in acc.iter_mut().zip(g) {
            *a += b;
        }
    }
    let n = S::of(envs.len() as f64);
    for a in acc.iter_mut() {
        *a /= n;
    }
    Ok(acc)
}

/// Mean accuracy over a set of environments.
pub fn mean_accuracy<S: Real>(w: &Weights<S>, envs: &[EnvData<S>]) -> Result<S> {
    let mut acc = S::zero();
    for e in envs {
        acc += accuracy(w, e)?;
    }
    Ok(acc / S::of(envs.len() as f64))
}
