//! Samplers and evaluators for the limit objects: the quadratic-mechanism
//! continuous-state branching process (Feller diffusion), its rescaled
//! version fed by additive-martingale limits, Polya-Aeppli cluster counts,
//! exponential ratio statistics, and the closed-form / series / integral
//! expressions for the coalescence probabilities of sampled vertex pairs.

use crate::environment::EnvFamily;
use crate::manytoone::WinfPool;
use crate::rng::{purpose, StreamKey};
use crate::stats::StreamMoments;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("conditioning acceptance rate {rate:.4} below {min:.4}")]
    LowAcceptance { rate: f64, min: f64 },
}

/// One exact transition of the branching process with mechanism
/// `lambda -> c0 lambda^2` over a time increment `delta`, started from `y`.
///
/// The conditional Laplace transform `exp(-lambda y / (1 + c0 delta lambda))`
/// is that of a compound Poisson sum: `K ~ Poisson(y / (c0 delta))`
/// exponentials with mean `c0 delta` (drawn as a Gamma(K) variate). Zero is
/// absorbing and there is no discretization error.
pub fn feller_step<R: Rng + ?Sized>(rng: &mut R, y: f64, delta: f64, c0: f64) -> f64 {
    assert!(
        y >= 0.0 && delta > 0.0 && c0 > 0.0,
        "need y >= 0, delta > 0, c0 > 0"
    );
    if y == 0.0 {
        return 0.0;
    }
    let scale = c0 * delta;
    let count = Poisson::new(y / scale).expect("positive rate").sample(rng);
    if count < 0.5 {
        return 0.0;
    }
    Gamma::new(count, scale)
        .expect("positive shape")
        .sample(rng)
}

/// Sample of the rescaled limit `Z_a(w) = w Y_{a/w}` (0 when `w = 0`): a
/// Poisson(`w / (c0 a)`) number of exponentials with mean `c0 a`. Its Laplace
/// transform is `exp(-theta w / (1 + theta c0 a))`.
pub fn z_limit_sample<R: Rng + ?Sized>(rng: &mut R, a: f64, w: f64, c0: f64) -> f64 {
    assert!(w >= 0.0, "mass must be nonnegative");
    if w == 0.0 {
        return 0.0;
    }
    feller_step(rng, w, a, c0)
}

/// Parameters of the cluster-count limit for pairs sampled in generation
/// `b n` with coalescence threshold `a n`, on an environment with martingale
/// limit value `w`.
#[derive(Debug, Clone, Copy)]
pub struct CoalescentParams {
    pub a: f64,
    pub b: f64,
    pub c0: f64,
    pub w: f64,
}

impl CoalescentParams {
    pub fn new(a: f64, b: f64, c0: f64, w: f64) -> Result<Self, LimitError> {
        if !(0.0 < a && a < b) {
            return Err(LimitError::BadParams(format!(
                "need 0 < a < b, got a = {a}, b = {b}"
            )));
        }
        if !(c0 > 0.0) || !(w >= 0.0) {
            return Err(LimitError::BadParams(format!(
                "need c0 > 0 and w >= 0, got {c0}, {w}"
            )));
        }
        Ok(Self { a, b, c0, w })
    }

    /// Poisson rate `w / (b c0)` of the cluster count at the sampling depth.
    pub fn poisson_rate(&self) -> f64 {
        self.w / (self.b * self.c0)
    }

    /// Success probability `1 - a/b` of the per-cluster geometric factor.
    pub fn geometric_success(&self) -> f64 {
        1.0 - self.a / self.b
    }
}

/// Geometric-Poisson (Polya-Aeppli) sample: a Poisson number of geometric
/// variables on the positive integers, summed.
pub fn polya_aeppli_sample<R: Rng + ?Sized>(rng: &mut R, params: &CoalescentParams) -> u64 {
    let rate = params.poisson_rate();
    if rate == 0.0 {
        return 0;
    }
    let clusters = Poisson::new(rate).expect("positive rate").sample(rng) as u64;
    let q = params.a / params.b; // failure probability
    let ln_q = q.ln();
    let mut total = 0u64;
    for _ in 0..clusters {
        // Inverse CDF of the geometric law on {1, 2, ...}.
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        total += 1 + (u.ln() / ln_q).floor().max(0.0) as u64;
    }
    total
}

/// Probability mass function of the Polya-Aeppli law above:
/// `P(N = l) = sum_{j=1}^{l} (mu^j e^{-mu} / j!) C(l-1, j-1) (a/b)^{l-j} ((b-a)/b)^j`
/// for `l >= 1`, and `e^{-mu}` at zero, with `mu = w / (b c0)`.
pub fn polya_aeppli_pmf(ell: u64, params: &CoalescentParams) -> f64 {
    let mu = params.poisson_rate();
    if ell == 0 {
        return (-mu).exp();
    }
    if mu == 0.0 {
        return 0.0;
    }
    let ln_mu = mu.ln();
    let ln_x = (params.a / params.b).ln();
    let ln_y = params.geometric_success().ln();
    let lf = ell as f64;
    let mut total = 0.0;
    for j in 1..=ell {
        let jf = j as f64;
        let ln_binom = ln_gamma(lf) - ln_gamma(jf) - ln_gamma(lf - jf + 1.0);
        let ln_term =
            jf * ln_mu - mu - ln_gamma(jf + 1.0) + ln_binom + (lf - jf) * ln_x + jf * ln_y;
        total += ln_term.exp();
    }
    total
}

/// Exact quenched ratio moment: for `l >= 1` i.i.d. unit exponentials,
/// `E[sum xi_j^2 / (sum xi_j)^2] = 2 / (l + 1)`.
pub fn ratio_moment_exact(ell: u64) -> Result<f64, LimitError> {
    if ell == 0 {
        return Err(LimitError::Degenerate(
            "ratio undefined for an empty sum".into(),
        ));
    }
    Ok(2.0 / (ell as f64 + 1.0))
}

/// A Monte Carlo value with its standard error and conditioning bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
    pub accepted: u64,
    pub rejected: u64,
}

impl McEstimate {
    fn from_moments(m: &StreamMoments, rejected: u64) -> Self {
        Self {
            value: m.mean(),
            se: m.se().unwrap_or(f64::INFINITY),
            accepted: m.count(),
            rejected,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        let total = self.accepted + self.rejected;
        if total == 0 {
            0.0
        } else {
            self.accepted as f64 / total as f64
        }
    }
}

/// Limit of the probability that a sampled pair coalesces above depth `a n`:
/// `E[sum xi_j^2 / (sum xi_j)^2 | N_{a,b} > 0]`, estimated by Monte Carlo over
/// the martingale-limit pool using the exact ratio collapse `2 / (N + 1)` and
/// rejection of the zero-count event.
pub fn recent_past_limit_mc<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    c0: f64,
    pool: &WinfPool,
    samples: u64,
    rng: &mut R,
) -> Result<McEstimate, LimitError> {
    CoalescentParams::new(a, b, c0, 0.0)?;
    if pool.samples().iter().all(|&w| w == 0.0) {
        return Err(LimitError::Degenerate(
            "all martingale-limit samples are zero".into(),
        ));
    }
    let mut acc = StreamMoments::new();
    let mut rejected = 0u64;
    for _ in 0..samples {
        let params = CoalescentParams::new(a, b, c0, pool.draw(rng))?;
        let n = polya_aeppli_sample(rng, &params);
        if n == 0 {
            rejected += 1;
        } else {
            acc.push(2.0 / (n as f64 + 1.0));
        }
    }
    if acc.count() == 0 {
        return Err(LimitError::Degenerate(
            "no sample passed the positivity conditioning".into(),
        ));
    }
    Ok(McEstimate::from_moments(&acc, rejected))
}

/// Same conditional expectation evaluated by direct summation of the cluster
/// pmf against the pool (no sampling noise beyond the pool itself). The pmf
/// sum costs `O(ell_max^2)` special-function calls per pool member, so large
/// pools are strided down to a deterministic subsample.
pub fn recent_past_limit_pmf(
    a: f64,
    b: f64,
    c0: f64,
    pool: &WinfPool,
    ell_max: u64,
) -> Result<f64, LimitError> {
    const MAX_MEMBERS: usize = 10_000;
    CoalescentParams::new(a, b, c0, 0.0)?;
    let stride = pool.len().div_ceil(MAX_MEMBERS);
    let mut numerator = 0.0;
    let mut positive_mass = 0.0;
    for &w in pool.samples().iter().step_by(stride) {
        let params = CoalescentParams { a, b, c0, w };
        positive_mass += 1.0 - polya_aeppli_pmf(0, &params);
        for ell in 1..=ell_max {
            numerator += 2.0 / (ell as f64 + 1.0) * polya_aeppli_pmf(ell, &params);
        }
    }
    if positive_mass == 0.0 {
        return Err(LimitError::Degenerate(
            "conditioning event has zero mass".into(),
        ));
    }
    Ok(numerator / positive_mass)
}

/// Series evaluation of the same limit from the derivatives of the pool's
/// Laplace transform at 1.
#[derive(Debug, Clone, Copy)]
pub struct SeriesEstimate {
    pub value: f64,
    /// Geometric extrapolation of the truncated tail; compare against the
    /// tolerance in use before trusting `value`.
    pub tail_estimate: f64,
    pub terms: u32,
}

/// Power-series form of the recent-past limit:
/// `2 / (1 - psi_b(1)) * sum_{k>=1} 1/(b^k (k+1)) sum_{j=1}^{k} C(k-1, j-1)
/// (-1)^j psi_b^{(j)}(1) / j! a^{k-j} (b-a)^j`,
/// with `psi_b` the Laplace transform of `W / (b c0)` estimated from the pool
/// and `(-1)^j psi_b^{(j)}(1) = E[(W/(b c0))^j e^{-W/(b c0)}]`.
pub fn recent_past_limit_series(
    a: f64,
    b: f64,
    c0: f64,
    pool: &WinfPool,
    k_max: u32,
) -> Result<SeriesEstimate, LimitError> {
    CoalescentParams::new(a, b, c0, 0.0)?;
    let scale = 1.0 / (b * c0);
    let psi1 = pool.laplace(scale);
    if psi1 >= 1.0 - 1e-14 {
        return Err(LimitError::Degenerate(
            "pool Laplace transform is 1; no positive mass".into(),
        ));
    }
    // a_j = E[(W/(b c0))^j e^{-W/(b c0)}] / j!
    let a_coef: Vec<f64> = (1..=k_max)
        .map(|j| {
            let p = pool.tilted_power_moment(j, scale);
            if p > 0.0 {
                (p.ln() - ln_gamma(f64::from(j) + 1.0)).exp()
            } else {
                0.0
            }
        })
        .collect();
    // The k-th term rearranged with x = a/b and y = (b-a)/b so that powers of
    // 1/b never appear alone.
    let x = a / b;
    let y = 1.0 - x;
    let mut value = 0.0;
    let mut last_terms = (0.0f64, 0.0f64);
    for k in 1..=k_max {
        let kf = f64::from(k);
        let mut inner = 0.0;
        for j in 1..=k {
            let jf = f64::from(j);
            let ln_binom = ln_gamma(kf) - ln_gamma(jf) - ln_gamma(kf - jf + 1.0);
            inner += a_coef[(j - 1) as usize] * (ln_binom + (kf - jf) * x.ln() + jf * y.ln()).exp();
        }
        let term = inner / (kf + 1.0);
        value += term;
        last_terms = (last_terms.1, term);
    }
    let tail_estimate = if last_terms.0 > 0.0 && last_terms.1 < last_terms.0 {
        let r = last_terms.1 / last_terms.0;
        last_terms.1 * r / (1.0 - r)
    } else if last_terms.1 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(SeriesEstimate {
        value: 2.0 / (1.0 - psi1) * value,
        tail_estimate: 2.0 / (1.0 - psi1) * tail_estimate,
        terms: k_max,
    })
}

/// Closed-form recent-past limit for pairs sampled in the range of a single
/// excursion: `(2 (b-a) / a^2) (b log(b / (b-a)) - a)`.
pub fn single_excursion_limit(a: f64, b: f64) -> f64 {
    assert!(0.0 < a && a < b, "need 0 < a < b");
    2.0 * (b - a) / (a * a) * (b * (b / (b - a)).ln() - a)
}

/// Remote-past coalescence estimate at separation generation `m`.
#[derive(Debug, Clone, Copy)]
pub struct RemotePastEstimate {
    /// Limit of P(coalescence below generation m | sampled generation non-empty).
    pub head: f64,
    /// The conditional ratio expectation `E[sum T_u^2 / (sum T_u)^2 | max > 0]`
    /// whose complement is `head`.
    pub ratio: f64,
    pub se: f64,
    pub accepted: u64,
    pub rejected: u64,
    /// `1 - psi_b(1)` estimated from the simulated depth-m masses.
    pub conditioning_mass_env: f64,
    /// Same quantity from the pool directly; the two agree because the
    /// depth-m mass sum has the same law as the martingale limit itself.
    pub conditioning_mass_pool: f64,
}

const MIN_ACCEPTANCE: f64 = 0.01;

/// Potentials of generation `m`, generated level by level. The registry
/// families have a deterministic offspring count, so the flat level array is
/// the whole environment down to `m` and no tree arena is needed.
fn level_potentials<R: Rng + ?Sized>(family: &EnvFamily, m: u32, rng: &mut R) -> Vec<f64> {
    let d = family.offspring_count() as usize;
    let mut level = vec![0.0f64];
    for _ in 0..m {
        let mut next = Vec::with_capacity(level.len() * d);
        for &v in &level {
            for _ in 0..d {
                next.push(v + family.sample_displacement(rng));
            }
        }
        level = next;
    }
    level
}

/// Depth-`m` masses `Z_u = e^{-V(u)} W^{(u)}` with i.i.d. pool marks.
fn depth_m_masses(family: &EnvFamily, m: u32, pool: &WinfPool, key: StreamKey) -> Vec<f64> {
    let mut tree_rng = key.rng(purpose::TREE);
    let potentials = level_potentials(family, m, &mut tree_rng);
    let mut mark_rng = key.rng(purpose::LIMIT);
    potentials
        .into_iter()
        .map(|v| (-v).exp() * pool.draw(&mut mark_rng))
        .collect()
}

/// Monte Carlo estimate of the remote-past limit: per replica, a fresh
/// depth-`m` environment with i.i.d. martingale-limit marks
/// `Z_u = e^{-V(u)} W^{(u)}`; each mass spawns `T_u = Z_u Y^{(u)}_{b / Z_u}`,
/// drawn exactly as a Poisson-exponential compound; the all-zero event is
/// rejected.
pub fn remote_past_limit_mc(
    family: &EnvFamily,
    m: u32,
    b: f64,
    c0: f64,
    pool: &WinfPool,
    replicas: u64,
    seed: u64,
) -> Result<RemotePastEstimate, LimitError> {
    if m == 0 {
        return Err(LimitError::BadParams(
            "separation generation must be >= 1".into(),
        ));
    }
    if !(b > 0.0 && c0 > 0.0) {
        return Err(LimitError::BadParams("need b > 0 and c0 > 0".into()));
    }
    let per_replica: Vec<(Option<f64>, f64)> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let key = StreamKey::new(seed, replica);
            let masses = depth_m_masses(family, m, pool, key);
            let mut rng = key.rng(purpose::RANGE);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for &z in &masses {
                let t = z_limit_sample(&mut rng, b, z, c0);
                sum += t;
                sum_sq += t * t;
            }
            let mass_total: f64 = masses.iter().sum();
            let ratio = (sum > 0.0).then(|| sum_sq / (sum * sum));
            (ratio, mass_total)
        })
        .collect();
    let mut acc = StreamMoments::new();
    let mut rejected = 0u64;
    let mut env_mass = StreamMoments::new();
    for (ratio, mass_total) in per_replica {
        env_mass.push(1.0 - (-mass_total / (b * c0)).exp());
        match ratio {
            Some(v) => acc.push(v),
            None => rejected += 1,
        }
    }
    let accepted = acc.count();
    let rate = accepted as f64 / replicas as f64;
    if rate < MIN_ACCEPTANCE {
        return Err(LimitError::LowAcceptance {
            rate,
            min: MIN_ACCEPTANCE,
        });
    }
    Ok(RemotePastEstimate {
        head: 1.0 - acc.mean(),
        ratio: acc.mean(),
        se: acc.se().unwrap_or(f64::INFINITY),
        accepted,
        rejected,
        conditioning_mass_env: env_mass.mean(),
        conditioning_mass_pool: 1.0 - pool.laplace(1.0 / (b * c0)),
    })
}

/// Integral form of the same conditional expectation. After the substitution
/// `u = lambda / (1 + lambda b c0)` the integral runs over the bounded
/// interval `(0, 1/(b c0))`:
///
/// `ratio = 1/(1 - psi_b(1)) * Int_0^{1/(b c0)}
///     E[ sum_u ( u (1 - u b c0) Z_u^2 + 2 b c0 u Z_u ) e^{-u sum Z} ] du`,
///
/// with the expectation estimated over depth-`m` environments and the
/// normalization taken from the same replicas.
#[allow(clippy::too_many_arguments)]
pub fn remote_past_limit_integral(
    family: &EnvFamily,
    m: u32,
    b: f64,
    c0: f64,
    pool: &WinfPool,
    replicas: u64,
    seed: u64,
    quad_points: usize,
) -> Result<RemotePastEstimate, LimitError> {
    if m == 0 {
        return Err(LimitError::BadParams(
            "separation generation must be >= 1".into(),
        ));
    }
    let pairs: Vec<(f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let key = StreamKey::new(seed, replica);
            let masses = depth_m_masses(family, m, pool, key);
            let s1: f64 = masses.iter().sum();
            let s2: f64 = masses.iter().map(|z| z * z).sum();
            (s1, s2)
        })
        .collect();
    let bc0 = b * c0;
    let psi_env: f64 =
        pairs.iter().map(|&(s1, _)| (-s1 / bc0).exp()).sum::<f64>() / pairs.len() as f64;
    let denom = 1.0 - psi_env;
    if denom <= 1e-12 {
        return Err(LimitError::Degenerate(
            "conditioning event has zero mass".into(),
        ));
    }
    let nodes = gauss_legendre(quad_points);
    let (lo, hi) = (0.0, 1.0 / bc0);
    let mut integral = 0.0;
    for &(t, weight) in &nodes {
        let u = lo + (hi - lo) * t;
        let mut mean = 0.0;
        for &(s1, s2) in &pairs {
            mean += (u * (1.0 - u * bc0) * s2 + 2.0 * bc0 * u * s1) * (-u * s1).exp();
        }
        mean /= pairs.len() as f64;
        integral += weight * (hi - lo) * mean;
    }
    let ratio = integral / denom;
    Ok(RemotePastEstimate {
        head: 1.0 - ratio,
        ratio,
        se: f64::NAN,
        accepted: pairs.len() as u64,
        rejected: 0,
        conditioning_mass_env: denom,
        conditioning_mass_pool: 1.0 - pool.laplace(1.0 / bc0),
    })
}

/// Limits of the coalescence head probability as the sampling depth fraction
/// shrinks: `E[ A_m / W^2 ]` over surviving environments, where `A_m` is the
/// pair sum `sum_{x != y} e^{-V(x)-V(y)} 1{x ^ y below generation m}` at a
/// deep generation, normalized by its square mass.
///
/// Computed for every `m <= m_max` on shared realizations, so the profile is
/// nondecreasing in `m` realization by realization.
pub fn small_generation_profile(
    family: &EnvFamily,
    m_max: u32,
    pool: &WinfPool,
    replicas: u64,
    seed: u64,
) -> Result<Vec<McEstimate>, LimitError> {
    if m_max == 0 {
        return Err(LimitError::BadParams("need m_max >= 1".into()));
    }
    let d = family.offspring_count() as usize;
    let per_replica: Vec<Option<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let key = StreamKey::new(seed, replica);
            // Subtree masses at the deepest level; parents sum their d-block.
            let mut level = depth_m_masses(family, m_max, pool, key);
            let mut s2_by_m = vec![0.0f64; m_max as usize + 1];
            s2_by_m[m_max as usize] = level.iter().map(|z| z * z).sum();
            for m in (1..m_max).rev() {
                level = level.chunks_exact(d).map(|c| c.iter().sum()).collect();
                s2_by_m[m as usize] = level.iter().map(|z| z * z).sum();
            }
            let total: f64 = level.iter().sum();
            if total <= 0.0 {
                return None; // extinct proxy; rejected by survival conditioning
            }
            Some(
                (1..=m_max)
                    .map(|m| 1.0 - s2_by_m[m as usize] / (total * total))
                    .collect(),
            )
        })
        .collect();
    let mut acc = vec![StreamMoments::new(); m_max as usize];
    let mut rejected = 0u64;
    for r in per_replica {
        match r {
            Some(values) => {
                for (a, v) in acc.iter_mut().zip(values) {
                    a.push(v);
                }
            }
            None => rejected += 1,
        }
    }
    if acc[0].count() == 0 {
        return Err(LimitError::Degenerate(
            "no environment survived the conditioning".into(),
        ));
    }
    Ok(acc
        .iter()
        .map(|m| McEstimate::from_moments(m, rejected))
        .collect())
}

/// Single-`m` wrapper over [`small_generation_profile`].
pub fn small_generation_limit(
    family: &EnvFamily,
    m: u32,
    pool: &WinfPool,
    replicas: u64,
    seed: u64,
) -> Result<McEstimate, LimitError> {
    Ok(small_generation_profile(family, m, pool, replicas, seed)?
        .pop()
        .expect("profile has m entries"))
}

/// Laplace transform of the limiting rescaled martingale value at depth
/// fraction `a`: pool average of `exp(-theta w / (1 + theta c0 a))`.
pub fn martingale_limit_laplace(theta: f64, a: f64, c0: f64, pool: &WinfPool) -> f64 {
    assert!(theta >= 0.0 && a > 0.0 && c0 > 0.0);
    pool.samples()
        .iter()
        .map(|&w| (-theta * w / (1.0 + theta * c0 * a)).exp())
        .sum::<f64>()
        / pool.len() as f64
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Chebyshev-like initial guess on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = nf * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((x + 1.0) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}
