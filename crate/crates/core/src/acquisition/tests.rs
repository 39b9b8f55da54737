use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::LabeledSet;
use crate::dgp::gen_causalbald;
use crate::gp::{fit_gp, CoregionalizationConfig, GpKernel, GpPosterior, KernelConfig, KernelFamily};
use crate::posterior::fit_ensemble;
use crate::propensity::fit_propensity;

/// Latent covariance given by a table over `(x₀, arm)` keys; zero elsewhere.
struct TableModel {
    keys: Vec<(i64, Arm)>,
    cov: DMatrix<f64>,
    noise: f64,
}

impl TableModel {
    fn key(&self, p: &Point<'_>) -> Option<usize> {
        self.keys.iter().position(|k| *k == (p.x[0] as i64, p.arm))
    }
}

impl CateModel for TableModel {
    fn name(&self) -> &str {
        "table"
    }
    fn dim(&self) -> usize {
        1
    }
    fn noise_variance(&self) -> f64 {
        self.noise
    }
    fn latent_mean(&self, points: &[Point<'_>]) -> Vec<f64> {
        vec![0.0; points.len()]
    }
    fn latent_cov(&self, a: &[Point<'_>], b: &[Point<'_>]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| match (self.key(&a[i]), self.key(&b[j])) {
            (Some(u), Some(v)) => self.cov[(u, v)],
            _ => 0.0,
        })
    }
}

/// Candidate `(0, treated)` and one target at `x = 1`.
fn hand_model() -> TableModel {
    TableModel {
        keys: vec![(0, Arm::Treated), (1, Arm::Control), (1, Arm::Treated)],
        cov: DMatrix::from_row_slice(3, 3, &[0.5, 0.4, 0.2, 0.4, 1.0, 0.5, 0.2, 0.5, 1.0]),
        noise: 0.5,
    }
}

fn one(x: f64) -> Covariates {
    Covariates::new(vec![x], 1).unwrap()
}

fn mi_rho(rho2: f64) -> f64 {
    -0.5 * (1.0 - rho2).ln()
}

#[test]
fn hand_belief_values() {
    let m = hand_model();
    let cand = [0.0];
    let c = Point::new(&cand, Arm::Treated);
    let t = one(1.0);
    // Var[y] = 0.5 + 0.5 = 1, Cov[y, f0] = 0.4, Cov[y, f1] = 0.2.
    let additive = mi_rho(0.16) + mi_rho(0.04);
    assert!((causal_epig_mu_additive(&m, c, &t).unwrap() - additive).abs() < 1e-12);
    assert!((additive - 0.1075883).abs() < 1e-6);
    let full = DMatrix::<f64>::from_row_slice(3, 3, &[1.0, 0.4, 0.2, 0.4, 1.0, 0.5, 0.2, 0.5, 1.0]);
    let joint = 0.5 * (full.view((1, 1), (2, 2)).determinant() / full.determinant()).ln();
    let mu = causal_epig_mu(&m, c, &t).unwrap();
    assert!((mu - joint).abs() < 1e-10, "{mu} vs {joint}");
    // τ = f1 − f0: Var = 1 + 1 − 1 = 1, Cov[y, τ] = −0.2.
    let tau = mi_rho(0.04);
    assert!((causal_epig_tau(&m, c, &t).unwrap() - tau).abs() < 1e-12);
    assert!((causal_epig_global(&m, c, &t, GlobalEstimand::Tau).unwrap() - tau).abs() < 1e-12);
    assert!((causal_eig(&m, c, &t).unwrap() - tau).abs() < 1e-12);
    assert!((causal_epig_global(&m, c, &t, GlobalEstimand::PotentialOutcomes).unwrap() - joint).abs() < 1e-10);
}

#[test]
fn additive_versus_joint_with_uncorrelated_arms() {
    // With Cov[f0, f1] = 0 the joint score is −½ log(1 − ρ0² − ρ1²), which
    // equals the additive one only when one of the correlations vanishes.
    let cand = [0.0];
    let c = Point::new(&cand, Arm::Treated);
    let t = one(1.0);
    let mut m = hand_model();
    m.cov[(1, 2)] = 0.0;
    m.cov[(2, 1)] = 0.0;
    let joint = causal_epig_mu(&m, c, &t).unwrap();
    assert!((joint - mi_rho(0.16 + 0.04)).abs() < 1e-10, "{joint}");
    assert!(joint > causal_epig_mu_additive(&m, c, &t).unwrap());
    m.cov[(0, 2)] = 0.0;
    m.cov[(2, 0)] = 0.0;
    let a = causal_epig_mu_additive(&m, c, &t).unwrap();
    let j = causal_epig_mu(&m, c, &t).unwrap();
    assert!((a - j).abs() < 1e-10, "{a} vs {j}");
    assert!((a - mi_rho(0.16)).abs() < 1e-12);
}

#[test]
fn degenerate_target_scores_zero() {
    let mut m = hand_model();
    for i in 0..3 {
        for j in 0..3 {
            if i > 0 || j > 0 {
                m.cov[(i, j)] = 0.0;
            }
        }
    }
    let cand = [0.0];
    let c = Point::new(&cand, Arm::Treated);
    let t = one(1.0);
    assert_eq!(causal_epig_mu(&m, c, &t).unwrap(), 0.0);
    assert_eq!(causal_epig_tau(&m, c, &t).unwrap(), 0.0);
}

#[test]
fn bald_values() {
    let m = TableModel { keys: vec![(0, Arm::Treated)], cov: DMatrix::from_element(1, 1, 0.3), noise: 0.3 };
    let x = [0.0];
    assert!((mu_bald(&m, Point::new(&x, Arm::Treated)) - 0.5 * 2f64.ln()).abs() < 1e-12);
    assert!((0.5f64 * 2f64.ln() - 0.34657).abs() < 1e-5);
    assert_eq!(mu_bald(&m, Point::new(&x, Arm::Control)), 0.0);
    // Var[τ] = 0.3 with contrast noise 2·0.3.
    assert!((tau_bald(&m, &x).unwrap() - 0.5 * 1.5f64.ln()).abs() < 1e-12);
}

fn toy_data(n: usize, seed: u64) -> (LabeledSet, crate::dgp::Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = gen_causalbald(n, false, &mut rng).unwrap();
    let pool = gen_causalbald(90, false, &mut rng).unwrap();
    (train.labeled(), pool)
}

fn toy_gp(data: &LabeledSet, coreg: CoregionalizationConfig, lengthscale: f64) -> GpPosterior {
    let base = KernelConfig::new(KernelFamily::Rbf, vec![lengthscale], 1.0, 0.1).unwrap();
    fit_gp(data, &GpKernel::Cmgp { base, coreg }).unwrap()
}

#[test]
fn far_candidate_is_uninformative() {
    let (data, _) = toy_data(20, 1);
    let gp = toy_gp(&data, CoregionalizationConfig::new([[1.0, 0.5], [0.5, 1.0]]).unwrap(), 0.2);
    let far = [100.0];
    let c = Point::new(&far, Arm::Treated);
    let targets = Covariates::new(vec![-1.0, 0.0, 0.5, 1.0], 1).unwrap();
    assert_eq!(causal_epig_tau(&gp, c, &targets).unwrap(), 0.0);
    assert_eq!(causal_epig_mu(&gp, c, &targets).unwrap(), 0.0);
    assert_eq!(causal_epig_global(&gp, c, &targets, GlobalEstimand::Tau).unwrap(), 0.0);
    assert_eq!(causal_eig(&gp, c, &targets).unwrap(), 0.0);
    let arms = [Arm::Control, Arm::Treated, Arm::Control, Arm::Treated];
    assert_eq!(epig_factual(&gp, c, &targets, &arms).unwrap(), 0.0);
    assert!(epig_factual(&gp, c, &one(100.0), &[Arm::Treated]).unwrap() > 0.0);
}

#[test]
fn independent_tasks_reduce_to_the_candidate_arm() {
    let (data, _) = toy_data(20, 2);
    let gp = toy_gp(&data, CoregionalizationConfig::identity(), 0.7);
    let targets = Covariates::new(vec![-1.0, 0.2, 1.3], 1).unwrap();
    for arm in Arm::BOTH {
        let x = [0.1];
        let c = Point::new(&x, arm);
        let joint = causal_epig_mu(&gp, c, &targets).unwrap();
        let additive = causal_epig_mu_additive(&gp, c, &targets).unwrap();
        assert!(joint > 0.0);
        assert!((joint - additive).abs() < 1e-10, "{joint} vs {additive}");
    }
}

#[test]
fn global_singleton_and_duplicates() {
    let (data, _) = toy_data(25, 3);
    let gp = toy_gp(&data, CoregionalizationConfig::new([[1.0, 0.6], [0.6, 1.2]]).unwrap(), 0.8);
    let x = [0.3];
    let c = Point::new(&x, Arm::Control);
    let single = one(0.9);
    let marginal = causal_epig_tau(&gp, c, &single).unwrap();
    assert!((causal_epig_global(&gp, c, &single, GlobalEstimand::Tau).unwrap() - marginal).abs() < 1e-10);
    let mu = causal_epig_mu(&gp, c, &single).unwrap();
    let po = causal_epig_global(&gp, c, &single, GlobalEstimand::PotentialOutcomes).unwrap();
    assert!((po - mu).abs() < 1e-10);

    let set = Covariates::new(vec![-0.5, 0.9, 1.4], 1).unwrap();
    let dup = Covariates::new(vec![-0.5, 0.9, 0.9, 1.4, -0.5], 1).unwrap();
    for est in [GlobalEstimand::Tau, GlobalEstimand::PotentialOutcomes] {
        let a = causal_epig_global(&gp, c, &set, est).unwrap();
        let b = causal_epig_global(&gp, c, &dup, est).unwrap();
        assert!((a - b).abs() < 1e-6, "{est:?}: {a} vs {b}");
    }
}

#[test]
fn global_matches_block_determinant() {
    // I(y; τ) = ½ log(Var[y]·det Σ_ττ / det Σ) for m = 3.
    let (data, _) = toy_data(25, 4);
    let gp = toy_gp(&data, CoregionalizationConfig::new([[1.0, 0.3], [0.3, 0.8]]).unwrap(), 0.6);
    let x = [0.2];
    let c = Point::new(&x, Arm::Treated);
    let grid = Covariates::new(vec![-0.8, 0.1, 0.7], 1).unwrap();
    let c0: Vec<Point> = grid.rows().map(|g| Point::new(g, Arm::Control)).collect();
    let c1: Vec<Point> = grid.rows().map(|g| Point::new(g, Arm::Treated)).collect();
    let mut all = vec![c];
    all.extend(c0.iter().copied());
    all.extend(c1.iter().copied());
    let k = gp.latent_cov(&all, &all);
    // Linear map from (f(c), f0(grid), f1(grid)) to (y, τ(grid)).
    let mut a = DMatrix::zeros(4, 7);
    a[(0, 0)] = 1.0;
    for j in 0..3 {
        a[(1 + j, 1 + j)] = -1.0;
        a[(1 + j, 4 + j)] = 1.0;
    }
    let mut s = &a * k * a.transpose();
    s[(0, 0)] += gp.noise_variance();
    let expected = 0.5 * (s[(0, 0)] * s.view((1, 1), (3, 3)).determinant() / s.determinant()).ln();
    let got = causal_epig_global(&gp, c, &grid, GlobalEstimand::Tau).unwrap();
    assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
    assert!((causal_eig(&gp, c, &grid).unwrap() - expected).abs() < 1e-8);
}

#[test]
fn combined_weights() {
    let xs = Covariates::new(vec![0.0, 0.0], 1).unwrap();
    let p = fit_propensity(&xs, &[Arm::Treated, Arm::Control], 1e-3).unwrap();
    assert_eq!(p.predict_pi(&[0.0]), 0.5);
    let (data, pool) = toy_data(20, 5);
    let gp = toy_gp(&data, CoregionalizationConfig::new([[1.0, 0.5], [0.5, 1.0]]).unwrap(), 0.5);
    let x = [0.4];
    for arm in Arm::BOTH {
        let c = Point::new(&x, arm);
        let base = mu_bald(&gp, c);
        assert!((combined_bald(&gp, c, CombinedVariant::MuPi, Some(&p)).unwrap() - 0.5 * base).abs() < 1e-15);
        let sd = gp.arm_moments(&one(0.4))[0].tau_variance().sqrt();
        let v = CombinedVariant::MuRho { pool_max_tau_sd: sd };
        assert!((combined_bald(&gp, c, v, None).unwrap() - base).abs() < 1e-15);
    }
    assert!(combined_bald(&gp, Point::new(&x, Arm::Treated), CombinedVariant::MuPi, None).is_err());

    let fitted = fit_propensity(&pool.covariates, &pool.arms, 1e-3).unwrap();
    let sds: Vec<f64> = gp.arm_moments(&pool.covariates).iter().map(|m| m.tau_variance().sqrt()).collect();
    let max = sds.iter().copied().fold(0.0, f64::max);
    for (i, x) in pool.covariates.rows().enumerate() {
        let wp = utility::combined_weight_pi(fitted.predict_pi(x), pool.arms[i]);
        let wr = utility::combined_weight_rho(sds[i], max);
        assert!((0.0..=1.0).contains(&wp) && (0.0..=1.0).contains(&wr));
    }
}

fn bernoulli_h(p: f64) -> f64 {
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

#[test]
fn sundin_hand_values() {
    assert_eq!(sundin_score_from_draws(&[0.7; 10]), 0.0);
    // {−a, +a}: σ_τ = a, both γ = Φ(−1), so γ̄ = Φ(−1) and the score is zero.
    let phi_m1 = 0.158_655_253_931_457_05;
    let g = [phi_m1, phi_m1];
    let expected = bernoulli_h(g.iter().sum::<f64>() / 2.0) - g.iter().map(|&p| bernoulli_h(p)).sum::<f64>() / 2.0;
    assert!((sundin_score_from_draws(&[-1.3, 1.3]) - expected).abs() < 1e-12);
    // {0, 2}: mean 1, σ_τ = 1, γ = {Φ(0), Φ(−2)}.
    let phi_m2 = 0.022_750_131_948_179_2;
    let g = [0.5, phi_m2];
    let expected = bernoulli_h(g.iter().sum::<f64>() / 2.0) - g.iter().map(|&p| bernoulli_h(p)).sum::<f64>() / 2.0;
    assert!(expected > 0.0);
    assert!((sundin_score_from_draws(&[0.0, 2.0]) - expected).abs() < 1e-9);
}

#[test]
fn coreset_brute_force() {
    let (data, _) = toy_data(15, 6);
    let gp = toy_gp(&data, CoregionalizationConfig::new([[1.0, 0.5], [0.5, 1.0]]).unwrap(), 0.5);
    let cands = Covariates::new(vec![-1.0, -0.2, 0.3, 0.8, 1.5], 1).unwrap();
    let cand_arms = [Arm::Control, Arm::Treated, Arm::Treated, Arm::Control, Arm::Treated];
    let lab = Covariates::new(vec![-0.5, 0.0, 0.3, 1.0], 1).unwrap();
    let lab_arms = [Arm::Control, Arm::Treated, Arm::Treated, Arm::Control];
    let scores = coreset_qhte(&gp, &cands, &cand_arms, &lab, &lab_arms).unwrap();
    for i in 0..5 {
        let p = Point::new(cands.row(i), cand_arms[i]);
        let mut best = f64::INFINITY;
        for l in 0..4 {
            if lab_arms[l] != cand_arms[i] {
                continue;
            }
            let q = Point::new(lab.row(l), lab_arms[l]);
            let k = gp.latent_cov(&[p, q], &[p, q]);
            best = best.min((k[(0, 0)] + k[(1, 1)] - 2.0 * k[(0, 1)]).max(0.0).sqrt());
        }
        let got = scores.as_slice()[i];
        assert!((got * got - best * best).abs() < 1e-12, "{i}: {got} vs {best}");
    }
    assert!(scores.as_slice()[2] < 1e-6);

    // No labeled control point: controls get the sentinel above the maximum.
    let only_t = coreset_qhte(&gp, &cands, &cand_arms, &lab.select(&[1, 2]), &lab_arms[1..3]).unwrap();
    let s = only_t.as_slice();
    let max_t = [s[1], s[2], s[4]].into_iter().fold(0.0, f64::max);
    assert_eq!(s[0], max_t + 1.0);
    assert_eq!(s[3], max_t + 1.0);
}

#[test]
fn random_scores() {
    let a = random_acq(100_000, &mut ChaCha8Rng::seed_from_u64(9));
    let b = random_acq(100_000, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
    assert!(a.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    let mean = a.as_slice().iter().sum::<f64>() / 1e5;
    assert!((mean - 0.5).abs() < 0.01);
}

#[test]
fn mu_bald_ranking_follows_variance() {
    let (data, pool) = toy_data(20, 7);
    let gp = toy_gp(&data, CoregionalizationConfig::new([[1.0, 0.5], [0.5, 1.0]]).unwrap(), 0.5);
    let pts: Vec<Point> = pool.covariates.rows().zip(&pool.arms).map(|(x, a)| Point::new(x, *a)).collect();
    let var = gp.latent_var(&pts);
    let bald: Vec<f64> = pts.iter().map(|p| mu_bald(&gp, *p)).collect();
    let order = |v: &[f64]| {
        let mut o: Vec<usize> = (0..v.len()).collect();
        o.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        o
    };
    assert_eq!(order(&var), order(&bald));
}

/// Reference scores computed one candidate at a time with the single-candidate functions.
fn reference_scores(method: &AcquisitionMethod, inputs: &ScoringInputs<'_>, seed: u64) -> Vec<f64> {
    use AcquisitionMethod::*;
    let m = inputs.model;
    let n = inputs.candidates.len();
    let cand = |i: usize| Point::new(inputs.candidates.row(i), inputs.candidate_arms[i]);
    let per = |f: &dyn Fn(Point<'_>) -> f64| (0..n).map(|i| f(cand(i))).collect::<Vec<f64>>();
    let t = inputs.targets;
    match *method {
        Random => random_acq(n, &mut stream(seed, &["random"])).into_vec(),
        CausalEpigTau => per(&|c| causal_epig_tau(m, c, t).unwrap()),
        CausalEpigMu => per(&|c| causal_epig_mu(m, c, t).unwrap()),
        CausalEpigMuAdditive => per(&|c| causal_epig_mu_additive(m, c, t).unwrap()),
        CausalEpigTauGlobal => per(&|c| causal_epig_global(m, c, t, GlobalEstimand::Tau).unwrap()),
        CausalEpigMuGlobal => per(&|c| causal_epig_global(m, c, t, GlobalEstimand::PotentialOutcomes).unwrap()),
        EpigFactual => per(&|c| epig_factual(m, c, t, inputs.target_arms).unwrap()),
        MuBald => per(&|c| mu_bald(m, c)),
        TauBald => per(&|c| tau_bald(m, c.x).unwrap()),
        MuPiBald => per(&|c| combined_bald(m, c, CombinedVariant::MuPi, inputs.propensity).unwrap()),
        MuRhoBald => {
            let max = m.arm_moments(inputs.candidates).iter().map(|a| a.tau_variance().sqrt()).fold(0.0, f64::max);
            per(&|c| combined_bald(m, c, CombinedVariant::MuRho { pool_max_tau_sd: max }, None).unwrap())
        }
        Sundin { samples } => {
            let base = derive_seed(seed, &["sundin"]);
            (0..n).map(|i| sundin_gamma(m, inputs.candidates.row(i), samples, &mut indexed(base, i)).unwrap()).collect()
        }
        CoresetQhte => {
            coreset_qhte(m, inputs.candidates, inputs.candidate_arms, inputs.labeled, inputs.labeled_arms).unwrap().into_vec()
        }
        CausalEig { grid_size } => {
            let grid = inputs.candidates.select(&(0..grid_size.min(n)).collect::<Vec<_>>());
            per(&|c| causal_eig(m, c, &grid).unwrap())
        }
    }
}

/// Relative tolerance of batched against reference scores. Joint scores over
/// the whole target vector factor a near-singular covariance along different
/// paths, so they agree to fewer digits.
fn tolerance(method: &AcquisitionMethod, base: f64) -> f64 {
    match method {
        AcquisitionMethod::CausalEpigTauGlobal
        | AcquisitionMethod::CausalEpigMuGlobal
        | AcquisitionMethod::CausalEig { .. } => base * 1e3,
        _ => base,
    }
}

fn check_batched(model: &dyn CateModel, data: &LabeledSet, pool: &crate::dgp::Dataset, rel_tol: f64) {
    let candidates = pool.covariates.select(&(0..70).collect::<Vec<_>>());
    let targets = pool.covariates.select(&(60..90).collect::<Vec<_>>());
    let propensity = fit_propensity(&pool.covariates, &pool.arms, 1e-3).unwrap();
    let inputs = ScoringInputs {
        model,
        candidates: &candidates,
        candidate_arms: &pool.arms[..70],
        targets: &targets,
        target_arms: &pool.arms[60..90],
        labeled: &data.covariates,
        labeled_arms: &data.arms,
        propensity: Some(&propensity),
    };
    let methods = [
        AcquisitionMethod::Random,
        AcquisitionMethod::CausalEpigTau,
        AcquisitionMethod::CausalEpigMu,
        AcquisitionMethod::CausalEpigMuAdditive,
        AcquisitionMethod::CausalEpigTauGlobal,
        AcquisitionMethod::CausalEpigMuGlobal,
        AcquisitionMethod::EpigFactual,
        AcquisitionMethod::MuBald,
        AcquisitionMethod::TauBald,
        AcquisitionMethod::MuPiBald,
        AcquisitionMethod::MuRhoBald,
        AcquisitionMethod::Sundin { samples: 50 },
        AcquisitionMethod::CoresetQhte,
        AcquisitionMethod::CausalEig { grid_size: 10 },
    ];
    for method in methods {
        let batched = score_pool(&method, &inputs, 17).unwrap();
        let reference = reference_scores(&method, &inputs, 17);
        assert_eq!(batched.len(), reference.len());
        for (i, (a, b)) in batched.as_slice().iter().zip(&reference).enumerate() {
            assert!((a - b).abs() <= tolerance(&method, rel_tol) * b.abs().max(1e-3), "{method} candidate {i}: {a} vs {b}");
        }
        assert_eq!(batched, score_pool(&method, &inputs, 17).unwrap(), "{method} not deterministic");
    }
}

#[test]
fn batched_scores_match_reference_gp() {
    let (data, pool) = toy_data(30, 8);
    let gp = toy_gp(&data, CoregionalizationConfig::new([[1.0, 0.4], [0.4, 1.5]]).unwrap(), 0.7);
    check_batched(&gp, &data, &pool, 1e-9);
}

#[test]
fn batched_scores_match_reference_ensemble() {
    let (data, pool) = toy_data(30, 9);
    let ens = fit_ensemble(&data, 20, 1e-3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    check_batched(&ens, &data, &pool, 1e-9);
}

#[test]
fn method_names_round_trip() {
    for name in AcquisitionMethod::NAMES {
        assert_eq!(AcquisitionMethod::parse(name).unwrap().name(), name);
    }
    assert!(AcquisitionMethod::parse("epig").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sundin_score_bounded(draws in prop::collection::vec(-5.0f64..5.0, 2..40)) {
        let s = sundin_score_from_draws(&draws);
        prop_assert!((0.0..=2f64.ln() + 1e-12).contains(&s));
    }

    #[test]
    fn utilities_nonnegative_and_bounded(seed in 0u64..10_000, x in -2.0f64..2.0, treated in any::<bool>()) {
        let (data, pool) = toy_data(12, seed);
        let gp = toy_gp(&data, CoregionalizationConfig::new([[1.0, 0.5], [0.5, 1.0]]).unwrap(), 0.6);
        let xv = [x];
        let c = Point::new(&xv, if treated { Arm::Treated } else { Arm::Control });
        let targets = pool.covariates.select(&[0, 1, 2, 3, 4]);
        let vy = gp.latent_var(&[c])[0] + gp.noise_variance();
        // Every per-target MI is at most ½ log(Var[y]/σ_n²).
        let cap = 0.5 * (vy / gp.noise_variance()).ln() + 1e-9;
        for v in [
            causal_epig_tau(&gp, c, &targets).unwrap(),
            causal_epig_mu(&gp, c, &targets).unwrap(),
            causal_epig_mu_additive(&gp, c, &targets).unwrap() / 2.0,
            causal_epig_global(&gp, c, &targets, GlobalEstimand::Tau).unwrap(),
            causal_epig_global(&gp, c, &targets, GlobalEstimand::PotentialOutcomes).unwrap(),
            mu_bald(&gp, c),
        ] {
            prop_assert!(v >= 0.0 && v <= cap, "{} not in [0, {}]", v, cap);
        }
    }
}
