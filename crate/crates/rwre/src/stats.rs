//! Statistical toolkit backing the property tests and acceptance runs:
//! streaming moments, Wilson intervals, chi-square goodness-of-fit and
//! two-sample tests, Kolmogorov-Smirnov two-sample test.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Numerically stable single-pass moment accumulator (Welford), mergeable
/// across workers.
#[derive(Debug, Clone, Copy, Default)]
pub struct StreamMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl StreamMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combine two accumulators; exact up to floating-point rounding and
    /// associative in the merge order used by the replica farms.
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Self { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; `None` for fewer than two observations.
    pub fn variance(&self) -> Option<f64> {
        if self.n < 2 {
            None
        } else {
            Some(self.m2 / (self.n - 1) as f64)
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.n as f64).sqrt())
    }

    /// |mean - target| measured in standard errors.
    pub fn z_against(&self, target: f64) -> f64 {
        match self.se() {
            Some(se) if se > 0.0 => (self.mean - target).abs() / se,
            _ => {
                if (self.mean - target).abs() == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

impl FromIterator<f64> for StreamMoments {
    fn from_iter<T: IntoIterator<Item = f64>>(iter: T) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Outcome of a chi-square test.
#[derive(Debug, Clone, Copy)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

fn chi2_sf(statistic: f64, dof: u64) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0)
}

/// Pool adjacent bins (in the given order) until every pooled bin has expected
/// count at least `min_expected`; a trailing short group is merged backwards.
fn pool_bins(observed: &[u64], expected: &[f64], min_expected: f64) -> (Vec<f64>, Vec<f64>) {
    let mut obs_pooled = Vec::new();
    let mut exp_pooled = Vec::new();
    let mut o_acc = 0.0;
    let mut e_acc = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o as f64;
        e_acc += e;
        if e_acc >= min_expected {
            obs_pooled.push(o_acc);
            exp_pooled.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        if let (Some(o_last), Some(e_last)) = (obs_pooled.last_mut(), exp_pooled.last_mut()) {
            *o_last += o_acc;
            *e_last += e_acc;
        } else {
            obs_pooled.push(o_acc);
            exp_pooled.push(e_acc);
        }
    }
    (obs_pooled, exp_pooled)
}

/// Chi-square goodness-of-fit of observed counts against a probability vector.
/// `expected_probs` need not sum to one; any missing mass is appended as an
/// implicit tail bin with zero observations outside `observed`'s support.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64], min_expected: f64) -> GofResult {
    assert_eq!(observed.len(), expected_probs.len());
    let n: u64 = observed.iter().sum();
    let total_p: f64 = expected_probs.iter().sum();
    let mut expected: Vec<f64> = expected_probs.iter().map(|p| p * n as f64).collect();
    // Residual probability mass beyond the listed support: fold into the last bin.
    if total_p < 1.0 - 1e-12 {
        if let Some(last) = expected.last_mut() {
            *last += (1.0 - total_p) * n as f64;
        }
    }
    let (obs, exp) = pool_bins(observed, &expected, min_expected);
    let statistic: f64 = obs
        .iter()
        .zip(&exp)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| (o - e) * (o - e) / e)
        .sum();
    let dof = obs.len().saturating_sub(1) as u64;
    GofResult {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof),
    }
}

/// Two-sample chi-square test of homogeneity over a shared categorical
/// support. Bins are pooled so that the combined expected count per category
/// is at least `min_expected` in each sample.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_expected: f64) -> GofResult {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    assert!(na > 0.0 && nb > 0.0);
    // Pool on combined counts so both samples share the same grouping.
    let combined: Vec<u64> = a.iter().zip(b).map(|(&x, &y)| x + y).collect();
    let min_each = min_expected / (na.min(nb) / (na + nb));
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    let mut acc_comb = 0.0;
    for ((&ca, &cb), &cc) in a.iter().zip(b).zip(&combined) {
        acc.0 += ca as f64;
        acc.1 += cb as f64;
        acc_comb += cc as f64;
        if acc_comb >= min_each {
            groups.push(acc);
            acc = (0.0, 0.0);
            acc_comb = 0.0;
        }
    }
    if acc_comb > 0.0 {
        if let Some(last) = groups.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            groups.push(acc);
        }
    }
    let total = na + nb;
    let mut statistic = 0.0;
    for &(oa, ob) in &groups {
        let p = (oa + ob) / total;
        let (ea, eb) = (na * p, nb * p);
        if ea > 0.0 {
            statistic += (oa - ea) * (oa - ea) / ea;
        }
        if eb > 0.0 {
            statistic += (ob - eb) * (ob - eb) / eb;
        }
    }
    let dof = groups.len().saturating_sub(1) as u64;
    GofResult {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof),
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100u32 {
        let term = (-2.0 * (j as f64) * (j as f64) * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the standard asymptotic p-value.
/// NaN inputs are rejected by assertion.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut xs: Vec<f64> = xs.to_vec();
    let mut ys: Vec<f64> = ys.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in KS input"));
    ys.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in KS input"));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let ne_sqrt = ne.sqrt();
    let p = kolmogorov_sf((ne_sqrt + 0.12 + 0.11 / ne_sqrt) * d);
    (d, p)
}
