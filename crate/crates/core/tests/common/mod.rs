#![allow(dead_code)]

use dpmm::expfam::{ClassicalParams, ConjugatePosterior, Family};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random SPD matrix with eigenvalues bounded away from zero.
pub fn random_spd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

pub fn random_posterior<R: Rng>(family: &str, rng: &mut R) -> ConjugatePosterior {
    match family {
        "beta" => ConjugatePosterior::beta(
            rng.random_range(0.5..6.0),
            rng.random_range(0.5..6.0),
            rng.random_range(1..6),
        )
        .unwrap(),
        "dirichlet" => {
            let k = rng.random_range(2..6);
            let alphas: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..6.0)).collect();
            ConjugatePosterior::dirichlet(&alphas, rng.random_range(1..4)).unwrap()
        }
        "gamma" => ConjugatePosterior::gamma(rng.random_range(0.5..6.0), rng.random_range(0.2..5.0)).unwrap(),
        "normal_wishart" => {
            let d = rng.random_range(1..4);
            let mean = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let scale = random_spd(d, rng) * rng.random_range(0.1..1.0);
            let dof = d as f64 + rng.random_range(0.5..10.0);
            ConjugatePosterior::normal_wishart(&mean, &scale, dof).unwrap()
        }
        other => panic!("unknown family {other}"),
    }
}

pub const FAMILIES: [&str; 4] = ["beta", "dirichlet", "gamma", "normal_wishart"];

/// Random parameters for a likelihood family together with the family.
pub fn random_params<R: Rng>(name: &str, rng: &mut R) -> (Family, ClassicalParams) {
    match name {
        "binomial" => (
            Family::Binomial { trials: rng.random_range(1..20) },
            ClassicalParams::Binomial { p: rng.random_range(0.01..0.99) },
        ),
        "multinomial" => {
            let k = rng.random_range(2..6);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            (
                Family::Multinomial { trials: rng.random_range(1..10), categories: k },
                ClassicalParams::Multinomial { probs: raw.iter().map(|v| v / total).collect() },
            )
        }
        "poisson" => (Family::Poisson, ClassicalParams::Poisson { rate: rng.random_range(0.05..30.0) }),
        "gaussian" => {
            let d = rng.random_range(1..5);
            (
                Family::Gaussian { dim: d },
                ClassicalParams::Gaussian {
                    mean: DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0)),
                    precision: random_spd(d, rng),
                },
            )
        }
        other => panic!("unknown family {other}"),
    }
}

pub const LIKELIHOODS: [&str; 4] = ["binomial", "multinomial", "poisson", "gaussian"];

/// A point in the support of `family`.
pub fn random_point<R: Rng>(family: Family, rng: &mut R) -> Vec<f64> {
    match family {
        Family::Binomial { trials } => vec![rng.random_range(0..=trials) as f64],
        Family::Multinomial { trials, categories } => {
            let mut x = vec![0.0; categories];
            for _ in 0..trials {
                x[rng.random_range(0..categories)] += 1.0;
            }
            x
        }
        Family::Poisson => vec![rng.random_range(0..40) as f64],
        Family::Gaussian { dim } => (0..dim).map(|_| rng.random_range(-6.0..6.0)).collect(),
    }
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Five-point central differences of `a_p` with respect to every `τ₁`
/// coordinate followed by `τ₂`.
pub fn fd_gradient(post: &ConjugatePosterior, h: f64) -> Vec<f64> {
    let eval = |i: usize, delta: f64| {
        let mut p = post.clone();
        if i < p.tau1.len() {
            p.tau1[i] += delta;
        } else {
            p.tau2 += delta;
        }
        p.log_partition().unwrap()
    };
    (0..=post.tau1.len())
        .map(|i| {
            (-eval(i, 2.0 * h) + 8.0 * eval(i, h) - 8.0 * eval(i, -h) + eval(i, -2.0 * h)) / (12.0 * h)
        })
        .collect()
}

/// Relative error, with an absolute floor for values near zero.
pub fn rel_err(approx: f64, exact: f64) -> f64 {
    (approx - exact).abs() / exact.abs().max(1e-6)
}

use dpmm::data::{Block, DatasetView, Layout};
use dpmm::dpmm::{FitSettings, FittedModel, PriorConfig};
use rand_distr::{Distribution, Poisson, StandardNormal};

/// A clustered dataset with a Gaussian block of random width and one
/// Multinomial, Poisson and Binomial block each.
pub fn random_mixed_view<R: Rng>(n: usize, rng: &mut R) -> DatasetView {
    let d = rng.random_range(1..4);
    let cats = 3;
    let trials = 5;
    let blocks = vec![
        Block { family: Family::Gaussian { dim: d }, start: 0, columns: (0..d).map(|i| format!("g{i}")).collect() },
        Block {
            family: Family::Multinomial { trials: 1, categories: cats },
            start: d,
            columns: (0..cats).map(|i| format!("c{i}")).collect(),
        },
        Block { family: Family::Poisson, start: d + cats, columns: vec!["count".into()] },
        Block { family: Family::Binomial { trials }, start: d + cats + 1, columns: vec!["hits".into()] },
    ];
    let layout = Layout::new(blocks).unwrap();
    let clusters = rng.random_range(1..4);
    let centers: Vec<Vec<f64>> = (0..clusters).map(|_| (0..d).map(|_| rng.random_range(-6.0..6.0)).collect()).collect();
    let rates: Vec<f64> = (0..clusters).map(|_| rng.random_range(0.5..15.0)).collect();
    let probs: Vec<f64> = (0..clusters).map(|_| rng.random_range(0.1..0.9)).collect();
    let mut values = Vec::with_capacity(n * layout.width());
    for _ in 0..n {
        let c = rng.random_range(0..clusters);
        for j in 0..d {
            values.push(centers[c][j] + rng.sample::<f64, _>(StandardNormal));
        }
        let mut onehot = vec![0.0; cats];
        onehot[(c + rng.random_range(0..2)) % cats] = 1.0;
        values.extend(onehot);
        values.push(Poisson::new(rates[c]).unwrap().sample(rng));
        values.push((0..trials).filter(|_| rng.random::<f64>() < probs[c]).count() as f64);
    }
    DatasetView::new(layout, values, None).unwrap()
}

/// Two well separated spherical Gaussian clusters at the origin and at
/// (8, 8), `per_cluster` rows each.
pub fn two_blobs<R: Rng>(per_cluster: usize, rng: &mut R) -> DatasetView {
    let mut rows = Vec::with_capacity(2 * per_cluster);
    for center in [0.0, 8.0] {
        for _ in 0..per_cluster {
            rows.push((0..2).map(|_| center + rng.sample::<f64, _>(StandardNormal)).collect());
        }
    }
    DatasetView::from_real_rows(&rows, None).unwrap()
}

/// A fitted single-Gaussian-block model assembled by hand from
/// Normal-Wishart components and their mixing weights.
pub fn hand_model(components: Vec<ConjugatePosterior>, mixing: Vec<f64>) -> FittedModel {
    let d = match components[0].family {
        Family::Gaussian { dim } => dim,
        _ => panic!("gaussian components only"),
    };
    let k = components.len();
    FittedModel {
        config: PriorConfig {
            settings: FitSettings { truncation: k, ..FitSettings::default() },
            priors: vec![components[0].clone()],
        },
        layout: Layout::gaussian(d),
        tau: components.into_iter().map(|c| vec![c]).collect(),
        alpha: vec![1.0; k - 1],
        beta: vec![1.0; k - 1],
        g1: 1.0,
        g2: 1.0,
        mixing,
        iterations: 0,
        converged: true,
    }
}
