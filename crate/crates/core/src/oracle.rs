//! Ground-truth machinery: closed-form constrained optima for the regression
//! suite, exact discrete enumeration for toy-CMNIST, brute-force constrained
//! minimization over weight grids, and the moment-matrix rank verifier.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::envgen::{toy_cmnist_atoms, EnvSpec, EnvSuite, TaskKind};
use crate::error::{Error, Result};
use crate::invariance::{perturbed_risk_irm, perturbed_risk_mri, residuals, Constraint};
use crate::model::{accuracy, mean_risk, risk, EnvData, LossKind, SuiteData, Weights};
use crate::optimize::GridSpec;
use crate::scalar::Real;

/// Symbolic parameters of the two-train-environment regression suite.
#[derive(Debug, Clone, Copy)]
pub struct StParams<S> {
    pub p_inv: S,
    pub p_spu1: S,
    pub p_spu2: S,
}

impl<S: Real> StParams<S> {
    /// The standard parameterization `p_i = 0.75`, `p_s = (1, 0.8)`.
    pub fn standard() -> Self {
        Self {
            p_inv: S::of(0.75),
            p_spu1: S::one(),
            p_spu2: S::of(0.8),
        }
    }

    pub fn from_suite(suite: &EnvSuite<S>) -> Result<Self> {
        let train = suite.train();
        if train.len() != 2 || train[0].task != TaskKind::StRegression {
            return Err(Error::Unsupported(
                "closed-form optima cover the two-environment regression suite".into(),
            ));
        }
        Ok(Self {
            p_inv: train[0].p_inv,
            p_spu1: train[0].p_spu,
            p_spu2: train[1].p_spu,
        })
    }

    /// Mean train risk of the regression suite at `w`.
    pub fn train_risk(&self, wi: S, ws: S) -> S {
        let two = S::of(2.0);
        let mut acc = S::zero();
        for ps in [self.p_spu1, self.p_spu2] {
            acc += wi * wi + ws * ws + two * wi * self.p_inv * ws * ps
                - two * (wi * self.p_inv + ws * ps)
                + S::one();
        }
        acc / two
    }
}

/// One constrained optimum with its train risk.
#[derive(Debug, Clone)]
pub struct Solution<S> {
    pub weights: Weights<S>,
    pub train_risk: S,
    /// Whether the solution uses no spurious weight.
    pub invariant: bool,
}

/// The closed-form solution set of one constraint family.
#[derive(Debug, Clone)]
pub struct SolutionSet<S> {
    pub constraint: String,
    pub solutions: Vec<Solution<S>>,
    /// Set when the square-root root pair is not real (`2p_inv² − 1 < 0`).
    pub complex_pair_omitted: bool,
}

#[derive(Serialize)]
struct SolutionJson {
    w_inv: f64,
    w_spu: f64,
    train_risk: f64,
    invariant: bool,
}

#[derive(Serialize)]
struct SolutionSetJson {
    constraint: String,
    complex_pair_omitted: bool,
    solutions: Vec<SolutionJson>,
}

impl<S: Real> SolutionSet<S> {
    /// `{"constraint": ..., "solutions": [{"w_inv":..., "w_spu":...,
    /// "train_risk":..., "invariant": bool}]}`.
    pub fn to_json(&self) -> Result<String> {
        let doc = SolutionSetJson {
            constraint: self.constraint.clone(),
            complex_pair_omitted: self.complex_pair_omitted,
            solutions: self
                .solutions
                .iter()
                .map(|s| {
                    let (wi, ws) = s.weights.pair()?;
                    Ok(SolutionJson {
                        w_inv: wi.as_f64(),
                        w_spu: ws.as_f64(),
                        train_risk: s.train_risk.as_f64(),
                        invariant: s.invariant,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::Numerical(format!("json encoding failed: {e}")))
    }
}

/// Closed-form constrained optima of the regression suite.
///
/// The label-perturbation constraint pins `w_spu = 0` with optimum
/// `(p_inv, 0)`. The relaxed output-perturbation constraint adds the branch
/// `w_inv = 1/(2 p_inv)` with optimum `w_spu = (p_spu1 + p_spu2)/4`. The
/// per-environment output-perturbation constraints intersect in the origin,
/// `(p_inv, 0)`, and the root pair `(1/(2p_inv), ±√(2p_inv²−1)/(2p_inv))`,
/// which is omitted (and flagged) when the radicand is negative.
pub fn analytic_optima<S: Real>(
    constraint: &Constraint<S>,
    params: &StParams<S>,
) -> Result<SolutionSet<S>> {
    let pi = params.p_inv;
    if pi <= S::zero() {
        return Err(Error::InvalidInput("p_inv must be positive".into()));
    }
    let two = S::of(2.0);
    let four = S::of(4.0);
    let mut complex_pair_omitted = false;
    let points: Vec<(S, S)> = match constraint {
        Constraint::MriV1 => vec![(pi, S::zero())],
        Constraint::IrmRelaxed => vec![
            (pi, S::zero()),
            (S::one() / (two * pi), (params.p_spu1 + params.p_spu2) / four),
        ],
        Constraint::IrmV1 => {
            let mut pts = vec![(S::zero(), S::zero()), (pi, S::zero())];
            let radicand = two * pi * pi - S::one();
            if radicand >= S::zero() {
                let root = radicand.sqrt() / (two * pi);
                pts.push((S::one() / (two * pi), root));
                pts.push((S::one() / (two * pi), -root));
            } else {
                complex_pair_omitted = true;
            }
            pts
        }
        Constraint::GeneralizedIrm(_) => {
            return Err(Error::Unsupported(
                "no closed-form solution set for generalized bases".into(),
            ))
        }
    };
    let solutions = points
        .into_iter()
        .map(|(wi, ws)| Solution {
            weights: Weights::scalar(wi, ws),
            train_risk: params.train_risk(wi, ws),
            invariant: ws == S::zero(),
        })
        .collect();
    Ok(SolutionSet {
        constraint: constraint.name().to_string(),
        solutions,
        complex_pair_omitted,
    })
}

/// Exact population quantities of one toy-CMNIST environment.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PopulationStats<S> {
    pub risk: S,
    pub accuracy: S,
    /// Output-perturbation residual `E[(σ(o)−y)·o]`.
    pub irm_residual: S,
    /// Label-perturbation residual `E[(ρ(y)−o)·y]`.
    pub mri_residual: S,
}

/// Exact expectations over the eight-outcome joint law; no sampling.
pub fn enumerate_population<S: Real>(
    env: &EnvSpec<S>,
    w: &Weights<S>,
    kind: LossKind,
) -> Result<PopulationStats<S>> {
    let atoms = EnvData::Atoms(toy_cmnist_atoms(env)?);
    Ok(PopulationStats {
        risk: risk(kind, w, &atoms)?,
        accuracy: accuracy(w, &atoms)?,
        irm_residual: perturbed_risk_irm(kind, w, &atoms)?,
        mri_residual: perturbed_risk_mri(kind, w, &atoms)?,
    })
}

/// Scan the grid, keep points with `‖c‖ < tol`, and return the local minima
/// of the mean train risk among kept points (8-neighborhood). An empty
/// feasible set yields an empty list.
pub fn brute_force_constrained_min<S: Real>(
    constraint: &Constraint<S>,
    kind: LossKind,
    suite: &SuiteData<S>,
    grid: &GridSpec<S>,
    tol: S,
) -> Result<Vec<Solution<S>>> {
    grid.validate()?;
    let res = grid.resolution;
    let cells: Result<Vec<Option<S>>> = (0..res * res)
        .into_par_iter()
        .map(|idx| {
            let w = Weights::scalar(
                grid.inv_value(idx / res),
                grid.spu_value(idx % res),
            );
            let c = residuals(constraint, kind, &w, suite)?;
            let c_norm = c.iter().map(|&v| v * v).sum::<S>().sqrt();
            if c_norm < tol {
                Ok(Some(mean_risk(kind, &w, &suite.train)?))
            } else {
                Ok(None)
            }
        })
        .collect();
    let cells = cells?;

    let mut minima = Vec::new();
    for i in 0..res {
        for j in 0..res {
            let Some(r) = cells[i * res + j] else { continue };
            let mut is_min = true;
            'scan: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= res as i64 || nj >= res as i64 {
                        continue;
                    }
                    if let Some(nr) = cells[ni as usize * res + nj as usize] {
                        if nr < r {
                            is_min = false;
                            break 'scan;
                        }
                    }
                }
            }
            if is_min {
                let ws = grid.spu_value(j);
                minima.push(Solution {
                    weights: Weights::scalar(grid.inv_value(i), ws),
                    train_risk: r,
                    invariant: ws == S::zero(),
                });
            }
        }
    }
    minima.sort_by(|a, b| a.train_risk.partial_cmp(&b.train_risk).unwrap());
    Ok(minima)
}

/// Spurious-moment matrix: `d_spu` rows of `E_e[z_spu·y]`, one column per
/// training environment.
#[derive(Debug, Clone)]
pub struct MomentMatrix<S> {
    rows: Vec<Vec<S>>,
}

impl<S: Real> MomentMatrix<S> {
    pub fn new(rows: Vec<Vec<S>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidInput("moment matrix must be non-empty".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(
                "moment matrix rows have unequal lengths".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn d_spu(&self) -> usize {
        self.rows.len()
    }

    pub fn n_envs(&self) -> usize {
        self.rows[0].len()
    }

    /// Rows with their mean across environments removed.
    pub fn centered(&self) -> Vec<Vec<S>> {
        self.rows
            .iter()
            .map(|row| {
                let mean = row.iter().copied().sum::<S>() / S::of(row.len() as f64);
                row.iter().map(|&v| v - mean).collect()
            })
            .collect()
    }
}

/// Result of the moment-rank check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Theorem1Report {
    pub d_spu: usize,
    pub n_envs: usize,
    /// Numerical rank of the centered moment matrix.
    pub rank: usize,
    /// Dimension of the spurious-weight space left unconstrained.
    pub nullspace_dim: usize,
    /// Whether `w_spu·M' = 0` forces `w_spu = 0`.
    pub invariance_forced: bool,
}

/// Rank of the centered moment matrix via singular values, with the relative
/// threshold `σ > 1e−10 · σ_max · max(dims)`. Full row rank forces every
/// spurious weight to zero, which needs more environments than spurious
/// dimensions.
pub fn theorem1_check<S: Real>(m: &MomentMatrix<S>) -> Result<Theorem1Report> {
    let d = m.d_spu();
    let n = m.n_envs();
    let centered = m.centered();
    let flat: Vec<f64> = centered
        .iter()
        .flat_map(|row| row.iter().map(|&v| v.as_f64()))
        .collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("moment matrix must be finite".into()));
    }
    let svd = DMatrix::from_row_slice(d, n, &flat).svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let threshold = 1e-10 * sigma_max * d.max(n) as f64;
    let rank = if sigma_max == 0.0 {
        0
    } else {
        svd.singular_values.iter().filter(|&&s| s > threshold).count()
    };
    Ok(Theorem1Report {
        d_spu: d,
        n_envs: n,
        rank,
        nullspace_dim: d - rank,
        invariance_forced: rank == d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::{preset_suite, sample_toy_cmnist, suite_data_population, EnvRole, Preset, Records};
    use proptest::prelude::*;

    #[test]
    fn mri_optimum() {
        let set = analytic_optima(&Constraint::MriV1, &StParams::<f64>::standard()).unwrap();
        assert_eq!(set.solutions.len(), 1);
        let (wi, ws) = set.solutions[0].weights.pair().unwrap();
        assert_eq!((wi, ws), (0.75, 0.0));
        assert!(set.solutions[0].invariant);
        assert!((set.solutions[0].train_risk - 0.4375).abs() < 1e-15);
    }

    #[test]
    fn relaxed_optima() {
        let set = analytic_optima(&Constraint::IrmRelaxed, &StParams::<f64>::standard()).unwrap();
        assert_eq!(set.solutions.len(), 2);
        let (wi, ws) = set.solutions[1].weights.pair().unwrap();
        assert!((wi - 2.0 / 3.0).abs() < 1e-15);
        assert!((ws - 0.45).abs() < 1e-15);
        assert!(!set.solutions[1].invariant);
        // the non-invariant branch has strictly lower train risk
        assert!(set.solutions[1].train_risk < set.solutions[0].train_risk - 1e-4);
    }

    #[test]
    fn irm_optima_and_root_pair() {
        let set = analytic_optima(&Constraint::IrmV1, &StParams::<f64>::standard()).unwrap();
        assert_eq!(set.solutions.len(), 4);
        assert!(!set.complex_pair_omitted);
        let root = (2.0 * 0.75f64 * 0.75 - 1.0).sqrt() / 1.5;
        let (wi, ws) = set.solutions[2].weights.pair().unwrap();
        assert!((wi - 2.0 / 3.0).abs() < 1e-15);
        assert!((ws - root).abs() < 1e-15);
        assert!((root - 0.23570226039551584).abs() < 1e-15);

        let low = StParams {
            p_inv: 0.6,
            ..StParams::<f64>::standard()
        };
        let set = analytic_optima(&Constraint::IrmV1, &low).unwrap();
        assert_eq!(set.solutions.len(), 2);
        assert!(set.complex_pair_omitted);
    }

    #[test]
    fn optima_are_feasible_under_population_residuals() {
        let suite = suite_data_population(&preset_suite::<f64>(Preset::StReg)).unwrap();
        for constraint in [Constraint::MriV1, Constraint::IrmRelaxed, Constraint::IrmV1] {
            let set = analytic_optima(&constraint, &StParams::standard()).unwrap();
            for sol in &set.solutions {
                let c = residuals(&constraint, LossKind::Square, &sol.weights, &suite).unwrap();
                for v in c {
                    assert!(v.abs() < 1e-12, "{} at {:?}", constraint.name(), sol.weights);
                }
            }
        }
    }

    #[test]
    fn solution_set_json_schema() {
        let set = analytic_optima(&Constraint::MriV1, &StParams::<f64>::standard()).unwrap();
        let json = set.to_json().unwrap();
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(doc["constraint"], "mri-v1");
        assert_eq!(doc["solutions"][0]["w_inv"], 0.75);
        assert_eq!(doc["solutions"][0]["invariant"], true);
    }

    #[test]
    fn enumeration_examples() {
        let env = EnvSpec::toy_cmnist(0.75, 0.9, EnvRole::Train).unwrap();
        let stats =
            enumerate_population(&env, &Weights::scalar(1.0, 0.0), LossKind::Bce).unwrap();
        assert_eq!(stats.accuracy, 0.75);

        let zero = Weights::scalar(0.0, 0.0);
        let stats = enumerate_population(&env, &zero, LossKind::Bce).unwrap();
        assert!((stats.risk - std::f64::consts::LN_2).abs() < 1e-15);

        // saturating correct logits drive the risk to zero
        let pure = EnvSpec::toy_cmnist(1.0, 1.0, EnvRole::Train).unwrap();
        let r1 = enumerate_population(&pure, &Weights::scalar(10.0, 0.0), LossKind::Bce)
            .unwrap()
            .risk;
        let r2 = enumerate_population(&pure, &Weights::scalar(30.0, 0.0), LossKind::Bce)
            .unwrap()
            .risk;
        assert!(r1 < 1e-4);
        assert!(r2 < r1);
    }

    #[test]
    fn enumeration_matches_monte_carlo() {
        let env: EnvSpec<f64> = EnvSpec::toy_cmnist(0.75, 0.9, EnvRole::Train).unwrap();
        let w = Weights::scalar(0.8, -0.4);
        let exact = enumerate_population(&env, &w, LossKind::Bce).unwrap();
        let n = 100_000;
        let ds = sample_toy_cmnist(&env, n, 13, 0).unwrap();
        let data = ds.env_data().unwrap();
        let tol = 5.0 / (n as f64).sqrt();
        assert!((risk(LossKind::Bce, &w, &data).unwrap() - exact.risk).abs() < tol);
        assert!((accuracy(&w, &data).unwrap() - exact.accuracy).abs() < tol);
        let Records::Binary { .. } = ds.records else { panic!() };
    }

    #[test]
    fn brute_force_recovers_mri_optimum() {
        let suite = suite_data_population(&preset_suite::<f64>(Preset::StReg)).unwrap();
        let grid = GridSpec::square(-1.5f64, 1.5, 400).unwrap();
        let minima =
            brute_force_constrained_min(&Constraint::MriV1, LossKind::Square, &suite, &grid, 1e-3)
                .unwrap();
        assert_eq!(minima.len(), 1);
        let (wi, ws) = minima[0].weights.pair().unwrap();
        let (ci, cs) = grid.cell();
        assert!((wi - 0.75).abs() <= ci && ws.abs() <= cs, "({wi}, {ws})");
    }

    #[test]
    fn brute_force_recovers_irm_roots() {
        let suite = suite_data_population(&preset_suite::<f64>(Preset::StReg)).unwrap();
        let grid = GridSpec::square(-1.5f64, 1.5, 400).unwrap();
        let minima =
            brute_force_constrained_min(&Constraint::IrmV1, LossKind::Square, &suite, &grid, 0.02)
                .unwrap();
        assert!(minima.len() >= 3, "found {}", minima.len());
        let root = (2.0 * 0.75f64 * 0.75 - 1.0).sqrt() / 1.5;
        let targets = [
            (0.0, 0.0),
            (0.75, 0.0),
            (2.0 / 3.0, root),
            (2.0 / 3.0, -root),
        ];
        let (ci, cs) = grid.cell();
        let mut hit = 0;
        for (ti, ts) in targets {
            if minima.iter().any(|m| {
                let (wi, ws) = m.weights.pair().unwrap();
                (wi - ti).abs() <= ci && (ws - ts).abs() <= cs
            }) {
                hit += 1;
            }
        }
        assert!(hit >= 3, "recovered {hit} of 4 roots");
    }

    #[test]
    fn brute_force_empty_feasible_set() {
        let suite = suite_data_population(&preset_suite::<f64>(Preset::StReg)).unwrap();
        let grid = GridSpec::square(-1.5f64, 1.5, 40).unwrap();
        let minima =
            brute_force_constrained_min(&Constraint::MriV1, LossKind::Square, &suite, &grid, 0.0)
                .unwrap();
        assert!(minima.is_empty());
    }

    #[test]
    fn rank_check_examples() {
        let m = MomentMatrix::new(vec![vec![1.0, 0.8]]).unwrap();
        let report = theorem1_check(&m).unwrap();
        assert_eq!(report.rank, 1);
        assert!(report.invariance_forced);
        assert_eq!(report.nullspace_dim, 0);

        let m = MomentMatrix::new(vec![vec![0.7, 0.7]]).unwrap();
        let report = theorem1_check(&m).unwrap();
        assert_eq!(report.rank, 0);
        assert!(!report.invariance_forced);

        // rank(M') <= n_envs − 1: three environments can never pin three dims
        let m = MomentMatrix::new(vec![
            vec![0.3, -0.5, 0.1],
            vec![0.9, 0.2, -0.7],
            vec![-0.4, 0.6, 0.8],
        ])
        .unwrap();
        let report = theorem1_check(&m).unwrap();
        assert!(report.rank <= 2);
        assert!(!report.invariance_forced);
    }

    proptest! {
        #[test]
        fn rank_check_is_scale_invariant(
            alpha in prop::sample::select(vec![-3.0f64, -0.5, 0.25, 2.0, 100.0]),
            seed in 0u64..50,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
                .collect();
            let scaled: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().map(|&v| alpha * v).collect())
                .collect();
            let a = theorem1_check(&MomentMatrix::new(rows).unwrap()).unwrap();
            let b = theorem1_check(&MomentMatrix::new(scaled).unwrap()).unwrap();
            prop_assert_eq!(a.invariance_forced, b.invariance_forced);
            prop_assert_eq!(a.rank, b.rank);
        }
    }

    #[test]
    fn random_environments_force_invariance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for d in 1..=3usize {
            for _ in 0..50 {
                let rows: Vec<Vec<f64>> = (0..d)
                    .map(|_| (0..d + 1).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
                    .collect();
                let report = theorem1_check(&MomentMatrix::new(rows).unwrap()).unwrap();
                assert!(report.invariance_forced, "d={d}");
            }
        }
    }
}
