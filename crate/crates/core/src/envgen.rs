//! Environment specifications, seeded samplers for the synthetic tasks,
//! exact population moments, and dataset CSV export.
//!
//! Sampling is driven by a counter-based generator: `(seed, stream)` selects
//! an independent ChaCha stream, so every environment of a suite is
//! reproducible on its own and identical inputs give bitwise-identical data.

use std::io::Write;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{AtomSet, ComplexBatch, EnvData, SuiteData};
use crate::scalar::Real;
use crate::textio::{bit, g17};

/// Synthetic task family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    StRegression,
    StClassification,
    ToyCmnist,
}

/// Whether an environment is observed during training or held out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvRole {
    Train,
    Test,
}

/// One environment's generative parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec<S> {
    /// Probability that the invariant latent copies the label latent.
    pub p_inv: S,
    /// Probability that the spurious latent copies the label (environment-dependent).
    pub p_spu: S,
    /// Gaussian width (radians) of the invariant copy noise; ST tasks only.
    pub sigma_inv: S,
    /// Gaussian width (radians) of the spurious copy noise; ST tasks only.
    pub sigma_spu: S,
    pub task: TaskKind,
    pub role: EnvRole,
}

impl<S: Real> EnvSpec<S> {
    pub fn new(
        p_inv: S,
        p_spu: S,
        sigma_inv: S,
        sigma_spu: S,
        task: TaskKind,
        role: EnvRole,
    ) -> Result<Self> {
        let unit = |name: &str, p: S| -> Result<()> {
            if p.is_finite() && p >= S::zero() && p <= S::one() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be in [0,1], got {p}")))
            }
        };
        unit("p_inv", p_inv)?;
        unit("p_spu", p_spu)?;
        for (name, s) in [("sigma_inv", sigma_inv), ("sigma_spu", sigma_spu)] {
            if !(s.is_finite() && s >= S::zero()) {
                return Err(Error::InvalidInput(format!("{name} must be >= 0, got {s}")));
            }
        }
        Ok(Self {
            p_inv,
            p_spu,
            sigma_inv,
            sigma_spu,
            task,
            role,
        })
    }

    pub fn st_regression(p_inv: S, p_spu: S, role: EnvRole) -> Result<Self> {
        Self::new(p_inv, p_spu, S::zero(), S::zero(), TaskKind::StRegression, role)
    }

    pub fn st_classification(p_inv: S, p_spu: S, role: EnvRole) -> Result<Self> {
        Self::new(
            p_inv,
            p_spu,
            S::zero(),
            S::zero(),
            TaskKind::StClassification,
            role,
        )
    }

    pub fn toy_cmnist(p_inv: S, p_spu: S, role: EnvRole) -> Result<Self> {
        Self::new(p_inv, p_spu, S::zero(), S::zero(), TaskKind::ToyCmnist, role)
    }
}

/// A training/test collection sharing `p_inv` across all members.
#[derive(Debug, Clone)]
pub struct EnvSuite<S> {
    train: Vec<EnvSpec<S>>,
    test: Vec<EnvSpec<S>>,
}

impl<S: Real> EnvSuite<S> {
    pub fn new(mut train: Vec<EnvSpec<S>>, mut test: Vec<EnvSpec<S>>) -> Result<Self> {
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
        let p = train[0].p_inv;
        let task = train[0].task;
        for e in train.iter().chain(test.iter()) {
            if e.p_inv != p {
                return Err(Error::InvalidInput(
                    "p_inv must be identical across all environments of a suite".into(),
                ));
            }
            if e.task != task {
                return Err(Error::InvalidInput(
                    "all environments of a suite must share the task kind".into(),
                ));
            }
        }
        for e in train.iter_mut() {
            e.role = EnvRole::Train;
        }
        for e in test.iter_mut() {
            e.role = EnvRole::Test;
        }
        Ok(Self { train, test })
    }

    pub fn train(&self) -> &[EnvSpec<S>] {
        &self.train
    }

    pub fn test(&self) -> &[EnvSpec<S>] {
        &self.test
    }

    pub fn task(&self) -> TaskKind {
        self.train[0].task
    }

    /// All environments with their stream index and label
    /// (`train1`, `train2`, ..., `test1`, ...).
    pub fn labelled(&self) -> Vec<(u64, String, EnvSpec<S>)> {
        let mut out = Vec::with_capacity(self.train.len() + self.test.len());
        for (i, e) in self.train.iter().enumerate() {
            out.push((i as u64, format!("train{}", i + 1), *e));
        }
        for (j, e) in self.test.iter().enumerate() {
            out.push(((self.train.len() + j) as u64, format!("test{}", j + 1), *e));
        }
        out
    }

    /// Look up an environment by its label (`train1`, `test1`; `test` is
    /// accepted as an alias for `test1`).
    pub fn by_label(&self, label: &str) -> Option<(u64, String, EnvSpec<S>)> {
        let want = if label == "test" { "test1" } else { label };
        self.labelled().into_iter().find(|(_, l, _)| l == want)
    }
}

/// Named environment parameterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    StReg,
    StClass,
    ToyCmnista,
    ToyCmnistb,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "st-reg" => Ok(Preset::StReg),
            "st-class" => Ok(Preset::StClass),
            "toy-cmnista" => Ok(Preset::ToyCmnista),
            "toy-cmnistb" => Ok(Preset::ToyCmnistb),
            other => Err(Error::InvalidInput(format!(
                "unknown preset '{other}' (expected st-reg, st-class, toy-cmnista, toy-cmnistb)"
            ))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Preset::StReg => "st-reg",
            Preset::StClass => "st-class",
            Preset::ToyCmnista => "toy-cmnista",
            Preset::ToyCmnistb => "toy-cmnistb",
        };
        f.write_str(s)
    }
}

/// The standard suites: two training environments and one held-out
/// test environment each.
pub fn preset_suite<S: Real>(preset: Preset) -> EnvSuite<S> {
    let (p_inv, spu_train, spu_test, task) = match preset {
        Preset::StReg => (0.75, [1.0, 0.8], 0.0, TaskKind::StRegression),
        Preset::StClass => (0.75, [1.0, 0.8], 0.0, TaskKind::StClassification),
        Preset::ToyCmnista => (0.75, [0.9, 0.8], 0.1, TaskKind::ToyCmnist),
        Preset::ToyCmnistb => (0.9, [1.0, 0.8], 0.1, TaskKind::ToyCmnist),
    };
    let mk = |p_spu: f64, role: EnvRole| {
        EnvSpec::new(
            S::of(p_inv),
            S::of(p_spu),
            S::zero(),
            S::zero(),
            task,
            role,
        )
        .expect("preset parameters are valid")
    };
    EnvSuite::new(
        spu_train.iter().map(|&p| mk(p, EnvRole::Train)).collect(),
        vec![mk(spu_test, EnvRole::Test)],
    )
    .expect("preset suites are valid")
}

/// Wrap an angle into `[-π, π)`.
pub fn wrap_angle<S: Real>(x: S) -> S {
    let tau = S::of(std::f64::consts::TAU);
    let pi = S::PI();
    let mut y = x - tau * ((x + pi) / tau).floor();
    if y >= pi {
        y -= tau;
    } else if y < -pi {
        y += tau;
    }
    y
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sampled latent angles for the shape-texture tasks.
#[derive(Debug, Clone)]
pub struct StLatents<S> {
    pub env: EnvSpec<S>,
    pub seed: u64,
    pub stream: u64,
    pub theta_y: Vec<S>,
    pub theta_inv: Vec<S>,
    pub theta_spu: Vec<S>,
}

/// Draw `n` latent triples: `θ_y` circular-uniform; each latent copies `θ_y`
/// (plus Gaussian noise of width `σ`) with probability `p`, otherwise it is an
/// independent circular uniform.
pub fn sample_st_latents<S: Real>(
    env: &EnvSpec<S>,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<StLatents<S>> {
    if env.task == TaskKind::ToyCmnist {
        return Err(Error::InvalidInput(
            "latent angles are only defined for the shape-texture tasks".into(),
        ));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = rng_for(seed, stream);
    let tau = std::f64::consts::TAU;
    let pi = std::f64::consts::PI;
    let mut theta_y = Vec::with_capacity(n);
    let mut theta_inv = Vec::with_capacity(n);
    let mut theta_spu = Vec::with_capacity(n);
    let latent = |rng: &mut ChaCha8Rng, ty: f64, p: S, sigma: S| -> S {
        if S::of(rng.random::<f64>()) < p {
            if sigma > S::zero() {
                let g: f64 = StandardNormal.sample(rng);
                wrap_angle(S::of(ty) + sigma * S::of(g))
            } else {
                S::of(ty)
            }
        } else {
            S::of(tau * rng.random::<f64>() - pi)
        }
    };
    for _ in 0..n {
        let ty = tau * rng.random::<f64>() - pi;
        let ti = latent(&mut rng, ty, env.p_inv, env.sigma_inv);
        let ts = latent(&mut rng, ty, env.p_spu, env.sigma_spu);
        theta_y.push(S::of(ty));
        theta_inv.push(ti);
        theta_spu.push(ts);
    }
    Ok(StLatents {
        env: *env,
        seed,
        stream,
        theta_y,
        theta_inv,
        theta_spu,
    })
}

/// Per-sample records of a generated dataset.
#[derive(Debug, Clone)]
pub enum Records<S> {
    /// Circular regression: complex unit inputs and label, plus the angles.
    Regression {
        theta_y: Vec<S>,
        theta_inv: Vec<S>,
        theta_spu: Vec<S>,
        x0: Vec<Complex<S>>,
        x1: Vec<Complex<S>>,
        y: Vec<Complex<S>>,
    },
    /// Binary-labelled real inputs; `bits` marks `{−1,+1}`-valued inputs.
    Binary {
        x0: Vec<S>,
        x1: Vec<S>,
        y: Vec<S>,
        bits: bool,
    },
}

/// A generated dataset for one environment.
#[derive(Debug, Clone)]
pub struct Dataset<S> {
    pub env: EnvSpec<S>,
    pub label: String,
    pub seed: u64,
    pub stream: u64,
    pub records: Records<S>,
}

impl<S: Real> Dataset<S> {
    pub fn len(&self) -> usize {
        match &self.records {
            Records::Regression { theta_y, .. } => theta_y.len(),
            Records::Binary { y, .. } => y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// View the records as evaluation data.
    pub fn env_data(&self) -> Result<EnvData<S>> {
        match &self.records {
            Records::Regression { x0, x1, y, .. } => Ok(EnvData::Circular(ComplexBatch::new(
                x0.clone(),
                x1.clone(),
                y.clone(),
            )?)),
            Records::Binary { x0, x1, y, .. } => Ok(EnvData::Atoms(AtomSet::uniform(
                x0.clone(),
                x1.clone(),
                y.clone(),
            )?)),
        }
    }

    /// Write the dataset CSV.
    ///
    /// Regression: `env_id,theta_y,theta_inv,theta_spu,x0_re,x0_im,x1_re,x1_im,y_re,y_im`.
    /// Classification / toy-CMNIST: `env_id,x0,x1,y`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        match &self.records {
            Records::Regression {
                theta_y,
                theta_inv,
                theta_spu,
                x0,
                x1,
                y,
            } => {
                writeln!(
                    out,
                    "env_id,theta_y,theta_inv,theta_spu,x0_re,x0_im,x1_re,x1_im,y_re,y_im"
                )?;
                for i in 0..theta_y.len() {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{}",
                        self.label,
                        g17(theta_y[i]),
                        g17(theta_inv[i]),
                        g17(theta_spu[i]),
                        g17(x0[i].re),
                        g17(x0[i].im),
                        g17(x1[i].re),
                        g17(x1[i].im),
                        g17(y[i].re),
                        g17(y[i].im)
                    )?;
                }
            }
            Records::Binary { x0, x1, y, bits } => {
                writeln!(out, "env_id,x0,x1,y")?;
                for i in 0..y.len() {
                    let (a, b) = if *bits {
                        (bit(x0[i]), bit(x1[i]))
                    } else {
                        (g17(x0[i]), g17(x1[i]))
                    };
                    writeln!(out, "{},{},{},{}", self.label, a, b, bit(y[i]))?;
                }
            }
        }
        Ok(())
    }
}

fn unit<S: Real>(theta: S) -> Complex<S> {
    Complex::new(theta.cos(), theta.sin())
}

/// Map latent angles to the circular-regression inputs
/// `x = [e^{iθ_inv}, e^{iθ_spu}]` and label `y = e^{iθ_y}`.
pub fn to_regression_io<S: Real>(lat: StLatents<S>) -> Dataset<S> {
    let x0 = lat.theta_inv.iter().map(|&t| unit(t)).collect();
    let x1 = lat.theta_spu.iter().map(|&t| unit(t)).collect();
    let y = lat.theta_y.iter().map(|&t| unit(t)).collect();
    Dataset {
        env: lat.env,
        label: "env1".into(),
        seed: lat.seed,
        stream: lat.stream,
        records: Records::Regression {
            theta_y: lat.theta_y,
            theta_inv: lat.theta_inv,
            theta_spu: lat.theta_spu,
            x0,
            x1,
            y,
        },
    }
}

/// Map latent angles to the classification inputs `x = [sin θ_inv, sin θ_spu]`
/// and label `sign(sin θ_y)`, with `sign(0) := +1`.
pub fn to_classification_io<S: Real>(lat: StLatents<S>) -> Dataset<S> {
    let sgn = |t: S| {
        if t.sin() >= S::zero() {
            S::one()
        } else {
            -S::one()
        }
    };
    let x0 = lat.theta_inv.iter().map(|&t| t.sin()).collect();
    let x1 = lat.theta_spu.iter().map(|&t| t.sin()).collect();
    let y = lat.theta_y.iter().map(|&t| sgn(t)).collect();
    Dataset {
        env: lat.env,
        label: "env1".into(),
        seed: lat.seed,
        stream: lat.stream,
        records: Records::Binary {
            x0,
            x1,
            y,
            bits: false,
        },
    }
}

/// Draw `n` toy-CMNIST bit triples: `z_inv` uniform on `{−1,+1}`, the label
/// copies `z_inv` with probability `p_inv`, and `z_spu` copies the label with
/// probability `p_spu`.
pub fn sample_toy_cmnist<S: Real>(
    env: &EnvSpec<S>,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Dataset<S>> {
    if env.task != TaskKind::ToyCmnist {
        return Err(Error::InvalidInput(
            "bit sampling is only defined for the toy-CMNIST task".into(),
        ));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = rng_for(seed, stream);
    let mut x0 = Vec::with_capacity(n);
    let mut x1 = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let one = S::one();
    for _ in 0..n {
        let zi = if rng.random::<f64>() < 0.5 { one } else { -one };
        let lbl = if S::of(rng.random::<f64>()) < env.p_inv {
            zi
        } else {
            -zi
        };
        let zs = if S::of(rng.random::<f64>()) < env.p_spu {
            lbl
        } else {
            -lbl
        };
        x0.push(zi);
        x1.push(zs);
        y.push(lbl);
    }
    Ok(Dataset {
        env: *env,
        label: "env1".into(),
        seed,
        stream,
        records: Records::Binary {
            x0,
            x1,
            y,
            bits: true,
        },
    })
}

/// Exact second-order statistics of one environment.
#[derive(Debug, Clone, Copy)]
pub struct PopulationMoments<S> {
    pub env: EnvSpec<S>,
    /// `Re E[x x†]`, symmetric 2×2.
    pub m_xx: [[S; 2]; 2],
    /// `Re E[x y†]`.
    pub m_xy: [S; 2],
    /// `E[y y†]`.
    pub m_yy: S,
}

/// Closed-form population moments.
///
/// Noiseless shape-texture regression: `E[xx†] = [[1, p_i p_s],[p_i p_s, 1]]`,
/// `E[xy†] = (p_i, p_s)`. Shape-texture classification replaces the copy
/// correlations by their sine moments (`E[sinθ sign sinθ] = 2/π`,
/// `E[sin²θ] = ½`). Toy-CMNIST uses the exact bit moments `2p−1`.
pub fn population_moments<S: Real>(env: &EnvSpec<S>) -> Result<PopulationMoments<S>> {
    if env.sigma_inv != S::zero() || env.sigma_spu != S::zero() {
        return Err(Error::Unsupported(
            "closed-form moments need sigma = 0; use monte_carlo_moments".into(),
        ));
    }
    let one = S::one();
    let (pi, ps) = (env.p_inv, env.p_spu);
    let (m_xx, m_xy, m_yy) = match env.task {
        TaskKind::StRegression => (
            [[one, pi * ps], [pi * ps, one]],
            [pi, ps],
            one,
        ),
        TaskKind::StClassification => {
            let half = S::of(0.5);
            let two_over_pi = S::of(std::f64::consts::FRAC_2_PI);
            (
                [[half, pi * ps * half], [pi * ps * half, half]],
                [pi * two_over_pi, ps * two_over_pi],
                one,
            )
        }
        TaskKind::ToyCmnist => {
            let two = S::of(2.0);
            let bi = two * pi - one;
            let bs = two * ps - one;
            ([[one, bi * bs], [bi * bs, one]], [bi, bs], one)
        }
    };
    Ok(PopulationMoments {
        env: *env,
        m_xx,
        m_xy,
        m_yy,
    })
}

/// Monte-Carlo moment estimate with a declared sample count; the fallback
/// path for `sigma > 0` and the cross-check for the closed forms.
pub fn monte_carlo_moments<S: Real>(
    env: &EnvSpec<S>,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<PopulationMoments<S>> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let nn = S::of(n as f64);
    let (m_xx, m_xy, m_yy) = match env.task {
        TaskKind::StRegression => {
            let lat = sample_st_latents(env, n, seed, stream)?;
            let mut xx = S::zero();
            let mut x0y = S::zero();
            let mut x1y = S::zero();
            for i in 0..n {
                xx += (lat.theta_inv[i] - lat.theta_spu[i]).cos();
                x0y += (lat.theta_inv[i] - lat.theta_y[i]).cos();
                x1y += (lat.theta_spu[i] - lat.theta_y[i]).cos();
            }
            (
                [[S::one(), xx / nn], [xx / nn, S::one()]],
                [x0y / nn, x1y / nn],
                S::one(),
            )
        }
        TaskKind::StClassification | TaskKind::ToyCmnist => {
            let ds = match env.task {
                TaskKind::StClassification => to_classification_io(sample_st_latents(env, n, seed, stream)?),
                _ => sample_toy_cmnist(env, n, seed, stream)?,
            };
            let Records::Binary { x0, x1, y, .. } = &ds.records else {
                unreachable!()
            };
            let mut m00 = S::zero();
            let mut m11 = S::zero();
            let mut m01 = S::zero();
            let mut x0y = S::zero();
            let mut x1y = S::zero();
            for i in 0..n {
                m00 += x0[i] * x0[i];
                m11 += x1[i] * x1[i];
                m01 += x0[i] * x1[i];
                x0y += x0[i] * y[i];
                x1y += x1[i] * y[i];
            }
            (
                [[m00 / nn, m01 / nn], [m01 / nn, m11 / nn]],
                [x0y / nn, x1y / nn],
                S::one(),
            )
        }
    };
    Ok(PopulationMoments {
        env: *env,
        m_xx,
        m_xy,
        m_yy,
    })
}

/// The exact eight-outcome joint law of a toy-CMNIST environment as weighted
/// atoms `(z_inv, z_spu, y)` with probabilities `½·p̃_inv·p̃_spu`.
pub fn toy_cmnist_atoms<S: Real>(env: &EnvSpec<S>) -> Result<AtomSet<S>> {
    if env.task != TaskKind::ToyCmnist {
        return Err(Error::InvalidInput(
            "exact enumeration is only defined for the toy-CMNIST task".into(),
        ));
    }
    let one = S::one();
    let half = S::of(0.5);
    let mut x0 = Vec::with_capacity(8);
    let mut x1 = Vec::with_capacity(8);
    let mut y = Vec::with_capacity(8);
    let mut w = Vec::with_capacity(8);
    for zi in [one, -one] {
        for lbl in [zi, -zi] {
            let py = if lbl == zi { env.p_inv } else { one - env.p_inv };
            for zs in [lbl, -lbl] {
                let pzs = if zs == lbl { env.p_spu } else { one - env.p_spu };
                x0.push(zi);
                x1.push(zs);
                y.push(lbl);
                w.push(half * py * pzs);
            }
        }
    }
    AtomSet::weighted(x0, x1, y, w)
}

/// Sample every environment of a suite; labels and streams follow the suite
/// order (`train1`, `train2`, ..., `test1`, ...).
pub fn sample_suite<S: Real>(suite: &EnvSuite<S>, n: usize, seed: u64) -> Result<Vec<Dataset<S>>> {
    let mut out = Vec::new();
    for (stream, label, env) in suite.labelled() {
        let mut ds = match env.task {
            TaskKind::StRegression => to_regression_io(sample_st_latents(&env, n, seed, stream)?),
            TaskKind::StClassification => {
                to_classification_io(sample_st_latents(&env, n, seed, stream)?)
            }
            TaskKind::ToyCmnist => sample_toy_cmnist(&env, n, seed, stream)?,
        };
        ds.label = label;
        out.push(ds);
    }
    Ok(out)
}

/// Suite data from sampled datasets.
pub fn suite_data_sampled<S: Real>(
    suite: &EnvSuite<S>,
    n: usize,
    seed: u64,
) -> Result<SuiteData<S>> {
    let datasets = sample_suite(suite, n, seed)?;
    let n_train = suite.train().len();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, ds) in datasets.iter().enumerate() {
        let env = ds.env_data()?;
        if i < n_train {
            train.push(env);
        } else {
            test.push(env);
        }
    }
    SuiteData::new(train, test)
}

/// Suite data from closed-form population moments (square-loss paths).
pub fn suite_data_population<S: Real>(suite: &EnvSuite<S>) -> Result<SuiteData<S>> {
    let train = suite
        .train()
        .iter()
        .map(|e| Ok(EnvData::Moments(population_moments(e)?)))
        .collect::<Result<Vec<_>>>()?;
    let test = suite
        .test()
        .iter()
        .map(|e| Ok(EnvData::Moments(population_moments(e)?)))
        .collect::<Result<Vec<_>>>()?;
    SuiteData::new(train, test)
}

/// Suite data from the exact toy-CMNIST enumeration.
pub fn suite_data_enumerated<S: Real>(suite: &EnvSuite<S>) -> Result<SuiteData<S>> {
    let train = suite
        .train()
        .iter()
        .map(|e| Ok(EnvData::Atoms(toy_cmnist_atoms(e)?)))
        .collect::<Result<Vec<_>>>()?;
    let test = suite
        .test()
        .iter()
        .map(|e| Ok(EnvData::Atoms(toy_cmnist_atoms(e)?)))
        .collect::<Result<Vec<_>>>()?;
    SuiteData::new(train, test)
}
