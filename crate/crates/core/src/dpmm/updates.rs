use rand::Rng;
use rayon::prelude::*;

use super::{MixtureState, PriorConfig, SuffStats};
use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::expfam::PosteriorExpectations;
use crate::special::{digamma, ln_beta, ln_gamma, log_sum_exp};

/// Seeded initial state. Each row of `r` averages the uniform row `1/K`
/// with a one-hot assignment to the nearest of K anchor rows picked by
/// k-means++ seeding. Components sit at the prior and the concentration
/// posterior is `Gamma(s₀ + K − 1, r₀)`.
///
/// Sticks start at the values the stick update would produce from these
/// responsibilities with a unit concentration.
pub fn init_state<R: Rng + ?Sized>(view: &DatasetView, config: &PriorConfig, rng: &mut R) -> Result<MixtureState> {
    if view.is_empty() {
        return Err(Error::Input("cannot fit an empty dataset".into()));
    }
    config.validate(view.layout())?;
    let n = view.len();
    let k = config.truncation();
    let nearest = anchor_assignments(view, k, rng);
    let base = 0.5 / k as f64;
    let mut r = vec![base; n * k];
    for (i, &a) in nearest.iter().enumerate() {
        r[i * k + a] += 0.5;
    }
    let s = &config.settings;
    let mut state = MixtureState {
        n,
        k,
        r,
        alpha: vec![1.0; k - 1],
        beta: vec![1.0; k - 1],
        tau: vec![config.priors.clone(); k],
        g1: s.s0 + (k - 1) as f64,
        g2: s.r0,
        elbo_trace: Vec::new(),
    };
    set_sticks(&mut state, 1.0);
    Ok(state)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest k-means++ anchor for every row.
fn anchor_assignments<R: Rng + ?Sized>(view: &DatasetView, k: usize, rng: &mut R) -> Vec<usize> {
    let n = view.len();
    let mut anchors = vec![rng.random_range(0..n)];
    let mut best: Vec<f64> = view.rows().map(|x| sq_dist(x, view.row(anchors[0]))).collect();
    let mut nearest = vec![0; n];
    for a in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in best.iter().enumerate() {
                if u < *d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        anchors.push(pick);
        for (i, x) in view.rows().enumerate() {
            let d = sq_dist(x, view.row(pick));
            if d < best[i] {
                best[i] = d;
                nearest[i] = a;
            }
        }
    }
    nearest
}

/// `E[ln v_k]` and `E[ln(1 − v_k)]` for k = 1..K. Both are zero for the last
/// component since `v_K = 1`.
pub fn stick_expectations(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut ln_v = Vec::with_capacity(alpha.len() + 1);
    let mut ln_1mv = Vec::with_capacity(alpha.len() + 1);
    for (a, b) in alpha.iter().zip(beta) {
        let psi_ab = digamma(a + b);
        ln_v.push(digamma(*a) - psi_ab);
        ln_1mv.push(digamma(*b) - psi_ab);
    }
    ln_v.push(0.0);
    ln_1mv.push(0.0);
    (ln_v, ln_1mv)
}

fn component_expectations(state: &MixtureState) -> Result<Vec<Vec<PosteriorExpectations>>> {
    state
        .tau
        .iter()
        .map(|blocks| blocks.iter().map(|t| t.expectations()).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-component log-likelihood expectation `ln h + E[η]ᵀT + E[−a]` for row `n`.
fn expected_log_lik(exps: &[PosteriorExpectations], stats: &SuffStats, n: usize) -> f64 {
    let mut s = stats.ln_h[n];
    for (e, b) in exps.iter().zip(&stats.blocks) {
        s += dot(&e.eta, b.row(n)) + e.neg_log_partition;
    }
    s
}

/// E-step: `ln ρ_nk = Σ_b [ln h + E[η_k]ᵀT(x_n) + E[−a(η_k)]] + E[ln v_k] + Σ_{i<k} E[ln(1 − v_i)]`,
/// normalized per row.
pub fn update_responsibilities(state: &mut MixtureState, stats: &SuffStats) -> Result<()> {
    check_rows(state, stats)?;
    let exps = component_expectations(state)?;
    let (ln_v, ln_1mv) = stick_expectations(&state.alpha, &state.beta);
    let mut prior = Vec::with_capacity(state.k);
    let mut acc = 0.0;
    for k in 0..state.k {
        prior.push(ln_v[k] + acc);
        acc += ln_1mv[k];
    }
    let k_count = state.k;
    state
        .r
        .par_chunks_mut(k_count)
        .enumerate()
        .try_for_each(|(n, row)| -> Result<()> {
            for k in 0..k_count {
                let v = expected_log_lik(&exps[k], stats, n) + prior[k];
                if !v.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite log responsibility at row {n}, component {k}"
                    )));
                }
                row[k] = v;
            }
            let norm = log_sum_exp(row);
            for v in row.iter_mut() {
                *v = (*v - norm).exp();
            }
            Ok(())
        })
}

fn check_rows(state: &MixtureState, stats: &SuffStats) -> Result<()> {
    if state.n != stats.len() {
        return Err(Error::Shape {
            expected: state.n,
            got: stats.len(),
        });
    }
    if stats.blocks.len() != state.tau.first().map(Vec::len).unwrap_or(0) {
        return Err(Error::Shape {
            expected: state.tau.first().map(Vec::len).unwrap_or(0),
            got: stats.blocks.len(),
        });
    }
    Ok(())
}

fn set_sticks(state: &mut MixtureState, e_w: f64) {
    let counts = state.counts();
    let mut tail = 0.0;
    for k in (0..state.k - 1).rev() {
        tail += counts[k + 1];
        state.alpha[k] = 1.0 + counts[k];
        state.beta[k] = e_w + tail;
    }
}

/// `α_k = 1 + N_k`, `β_k = E[w] + Σ_{i>k} N_i` for k < K.
pub fn update_sticks(state: &mut MixtureState) -> Result<()> {
    let e_w = state.expected_concentration();
    set_sticks(state, e_w);
    Ok(())
}

/// `τ_k = λ + (Σ_n r_nk T(x_n), Σ_n r_nk)` for every component and block.
pub fn update_components(state: &mut MixtureState, stats: &SuffStats, config: &PriorConfig) -> Result<()> {
    check_rows(state, stats)?;
    let k_count = state.k;
    let r = &state.r;
    let tau: Result<Vec<Vec<_>>> = (0..k_count)
        .into_par_iter()
        .map(|k| {
            let mut weight = 0.0;
            for n in 0..stats.len() {
                weight += r[n * k_count + k];
            }
            stats
                .blocks
                .iter()
                .zip(&config.priors)
                .map(|(b, prior)| {
                    let mut sum = vec![0.0; b.dim];
                    for n in 0..stats.len() {
                        let w = r[n * k_count + k];
                        for (s, t) in sum.iter_mut().zip(b.row(n)) {
                            *s += w * t;
                        }
                    }
                    prior.conjugate_update(&sum, weight)
                })
                .collect()
        })
        .collect();
    state.tau = tau?;
    Ok(())
}

/// `g₁ = s₀ + K − 1`, `g₂ = r₀ − Σ_{k<K} E[ln(1 − v_k)]`.
pub fn update_concentration(state: &mut MixtureState, config: &PriorConfig) -> Result<()> {
    let (_, ln_1mv) = stick_expectations(&state.alpha, &state.beta);
    let g2 = config.settings.r0 - ln_1mv[..state.k - 1].iter().sum::<f64>();
    if !(g2 > 0.0 && g2.is_finite()) {
        return Err(Error::Numerical(format!("concentration rate g2 = {g2}")));
    }
    state.g1 = config.settings.s0 + (state.k - 1) as f64;
    state.g2 = g2;
    Ok(())
}

/// The lower bound split into its expectation terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    /// E[ln p(X | Z, η)]
    pub likelihood: f64,
    /// E[ln p(Z | v)]
    pub assignments: f64,
    /// E[ln p(η | λ)] − E[ln q(η | τ)]
    pub components: f64,
    /// E[ln p(v | w)]
    pub sticks_prior: f64,
    /// E[ln p(w | s₀, r₀)]
    pub concentration_prior: f64,
    /// −E[ln q(Z)]
    pub assignment_entropy: f64,
    /// E[ln q(v)]
    pub sticks_q: f64,
    /// E[ln q(w)]
    pub concentration_q: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.likelihood
            + self.assignments
            + self.components
            + self.sticks_prior
            + self.concentration_prior
            + self.assignment_entropy
            - self.sticks_q
            - self.concentration_q
    }

    fn check(&self) -> Result<()> {
        let named = [
            ("likelihood", self.likelihood),
            ("assignments", self.assignments),
            ("components", self.components),
            ("sticks prior", self.sticks_prior),
            ("concentration prior", self.concentration_prior),
            ("assignment entropy", self.assignment_entropy),
            ("sticks entropy", self.sticks_q),
            ("concentration entropy", self.concentration_q),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::Numerical(format!("ELBO term '{name}' is {v}")));
            }
        }
        Ok(())
    }
}

/// Evaluates the evidence lower bound of `state`.
pub fn compute_elbo(state: &MixtureState, stats: &SuffStats, config: &PriorConfig) -> Result<ElboTerms> {
    check_rows(state, stats)?;
    let k_count = state.k;
    let exps = component_expectations(state)?;
    let (ln_v, ln_1mv) = stick_expectations(&state.alpha, &state.beta);

    let per_row: Vec<(f64, f64)> = (0..state.n)
        .into_par_iter()
        .map(|n| {
            let row = state.responsibilities(n);
            let mut lik = 0.0;
            let mut ent = 0.0;
            for k in 0..k_count {
                let r = row[k];
                if r > 0.0 {
                    lik += r * expected_log_lik(&exps[k], stats, n);
                    ent -= r * r.ln();
                }
            }
            (lik, ent)
        })
        .collect();
    let likelihood: f64 = per_row.iter().map(|p| p.0).sum();
    let assignment_entropy: f64 = per_row.iter().map(|p| p.1).sum();

    let counts = state.counts();
    let mut assignments = 0.0;
    let mut tail = 0.0;
    for k in (0..k_count).rev() {
        assignments += tail * ln_1mv[k] + counts[k] * ln_v[k];
        tail += counts[k];
    }

    let mut components = 0.0;
    for (blocks, e) in state.tau.iter().zip(&exps) {
        for ((tau, e), prior) in blocks.iter().zip(e).zip(&config.priors) {
            let d1: f64 = prior
                .tau1
                .iter()
                .zip(&tau.tau1)
                .zip(&e.eta)
                .map(|((l, t), eta)| (l - t) * eta)
                .sum();
            components += d1 + (prior.tau2 - tau.tau2) * e.neg_log_partition - prior.log_partition()?
                + tau.log_partition()?;
        }
    }

    let e_w = state.g1 / state.g2;
    let e_ln_w = digamma(state.g1) - state.g2.ln();
    let sticks = k_count - 1;
    let sticks_prior: f64 = ln_1mv[..sticks]
        .iter()
        .map(|l| e_ln_w + (e_w - 1.0) * l)
        .sum();
    let (s0, r0) = (config.settings.s0, config.settings.r0);
    let concentration_prior = s0 * r0.ln() - ln_gamma(s0) + (s0 - 1.0) * e_ln_w - r0 * e_w;
    let sticks_q: f64 = (0..sticks)
        .map(|k| {
            let (a, b) = (state.alpha[k], state.beta[k]);
            (a - 1.0) * ln_v[k] + (b - 1.0) * ln_1mv[k] - ln_beta(a, b)
        })
        .sum();
    let concentration_q =
        state.g1 * state.g2.ln() - ln_gamma(state.g1) + (state.g1 - 1.0) * e_ln_w - state.g2 * e_w;

    let terms = ElboTerms {
        likelihood,
        assignments,
        components,
        sticks_prior,
        concentration_prior,
        assignment_entropy,
        sticks_q,
        concentration_q,
    };
    terms.check()?;
    Ok(terms)
}
