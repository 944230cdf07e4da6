//! The size-biased (many-to-one) walk associated with an environment family,
//! the constant `c_inf = E[(sum_{j>=0} e^{-S_j})^{-1}]`, and pools of
//! additive-martingale limit samples that feed the limit-law evaluators.

use crate::environment::EnvFamily;
use crate::stats::StreamMoments;
use rand::Rng;
use std::io::Write;

/// One increment of the tilted walk `S`:
/// `E[f(S_1)] = E[sum_{|x|=1} e^{-V(x)} f(V(x))]`.
pub fn sample_s_step<R: Rng + ?Sized>(family: &EnvFamily, rng: &mut R) -> f64 {
    family.sample_tilted_step(rng)
}

#[derive(Debug, Clone, Copy)]
pub struct CinfEstimate {
    pub value: f64,
    pub se: f64,
    /// Number of walk steps summed per path.
    pub truncation: u32,
}

/// Monte Carlo estimate of `c_inf` over `replicas` tilted-walk paths,
/// truncating the series at `J` terms. The summand grows with `J`, so the
/// estimate decreases in `J` path by path and upper-bounds the limit.
/// Truncation adapts: extend by 50 steps at a time until the move is below
/// half a standard error.
pub fn estimate_cinf<R: Rng + ?Sized>(
    family: &EnvFamily,
    replicas: usize,
    rng: &mut R,
) -> CinfEstimate {
    const BLOCK: u32 = 50;
    const MAX_TRUNCATION: u32 = 5_000;
    let mut position = vec![0.0f64; replicas];
    let mut series = vec![1.0f64; replicas]; // j = 0 term: e^{-S_0} = 1
    let mut truncation = 0u32;
    let mut previous: Option<f64> = None;
    loop {
        for _ in 0..BLOCK {
            for (s, acc) in position.iter_mut().zip(series.iter_mut()) {
                *s += sample_s_step(family, rng);
                *acc += (-*s).exp();
            }
        }
        truncation += BLOCK;
        let moments: StreamMoments = series.iter().map(|&t| 1.0 / t).collect();
        let value = moments.mean();
        let se = moments.se().unwrap_or(f64::INFINITY);
        if let Some(prev) = previous {
            if (prev - value).abs() < se / 2.0 || truncation >= MAX_TRUNCATION {
                return CinfEstimate {
                    value,
                    se,
                    truncation,
                };
            }
        }
        previous = Some(value);
    }
}

/// `c_inf` estimates at fixed truncations, computed on one shared set of
/// paths; monotone nonincreasing in the truncation by construction.
pub fn cinf_profile<R: Rng + ?Sized>(
    family: &EnvFamily,
    truncations: &[u32],
    replicas: usize,
    rng: &mut R,
) -> Vec<CinfEstimate> {
    let mut sorted: Vec<u32> = truncations.to_vec();
    sorted.sort_unstable();
    let mut position = vec![0.0f64; replicas];
    let mut series = vec![1.0f64; replicas];
    let mut out = Vec::with_capacity(sorted.len());
    let mut done = 0u32;
    for &j in &sorted {
        while done < j {
            for (s, acc) in position.iter_mut().zip(series.iter_mut()) {
                *s += sample_s_step(family, rng);
                *acc += (-*s).exp();
            }
            done += 1;
        }
        let moments: StreamMoments = series.iter().map(|&t| 1.0 / t).collect();
        out.push(CinfEstimate {
            value: moments.mean(),
            se: moments.se().unwrap_or(f64::INFINITY),
            truncation: j,
        });
    }
    out
}

/// A pool of additive-martingale samples `W_k` standing in for the limit
/// `W_inf`, with the proxy depth recorded.
#[derive(Debug, Clone)]
pub struct WinfPool {
    samples: Vec<f64>,
    depth: u32,
}

impl WinfPool {
    pub fn from_samples(samples: Vec<f64>, depth: u32) -> Self {
        assert!(!samples.is_empty());
        assert!(samples.iter().all(|&w| w >= 0.0));
        Self { samples, depth }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.samples[rng.gen_range(0..self.samples.len())]
    }

    pub fn moments(&self) -> StreamMoments {
        self.samples.iter().copied().collect()
    }

    /// Pool estimate of the Laplace transform `E[e^{-scale W}]`.
    pub fn laplace(&self, scale: f64) -> f64 {
        self.samples
            .iter()
            .map(|&w| (-scale * w).exp())
            .sum::<f64>()
            / self.len() as f64
    }

    /// Pool estimate of `E[(scale W)^j e^{-scale W}]`, the `j`-th derivative
    /// of the Laplace transform up to sign. Bounded summand, heavy-tail safe.
    pub fn tilted_power_moment(&self, j: u32, scale: f64) -> f64 {
        self.samples
            .iter()
            .map(|&w| {
                let t = scale * w;
                if t <= 0.0 {
                    if j == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (f64::from(j) * t.ln() - t).exp()
                }
            })
            .sum::<f64>()
            / self.len() as f64
    }

    /// CSV export, one `value` column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "value")?;
        for s in &self.samples {
            writeln!(w, "{s}")?;
        }
        Ok(())
    }
}

/// Build a pool of `W_depth` samples by iterating the smoothing transform on
/// an empirical population: each new sample combines `d` uniformly resampled
/// members of the previous generation with fresh displacement weights,
/// `W_{k+1} = sum_i e^{-V_i} W_k^{(i)}`.
///
/// Exact per-sample recursion costs `d^depth` draws and is hopeless at the
/// depths where the proxy bias is negligible; population resampling keeps the
/// per-level cost linear in the pool size at the price of weak correlations of
/// order `d^2 / size` between pool members. [`sample_wk_exact`] provides the
/// independent oracle for moderate depths.
pub fn winf_pool<R: Rng + ?Sized>(
    family: &EnvFamily,
    depth: u32,
    size: usize,
    rng: &mut R,
) -> WinfPool {
    assert!(size >= 2);
    let d = family.offspring_count() as usize;
    let mut current = vec![1.0f64; size];
    let mut next = vec![0.0f64; size];
    for _ in 0..depth {
        for slot in next.iter_mut() {
            let mut acc = 0.0;
            for _ in 0..d {
                let parent = current[rng.gen_range(0..size)];
                acc += (-family.sample_displacement(rng)).exp() * parent;
            }
            *slot = acc;
        }
        std::mem::swap(&mut current, &mut next);
    }
    WinfPool::from_samples(current, depth)
}

/// One exact sample of `W_k` by full recursion over the depth-`k` tree.
/// Cost `d^k`; intended for oracle checks at moderate depth.
pub fn sample_wk_exact<R: Rng + ?Sized>(family: &EnvFamily, k: u32, rng: &mut R) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut acc = 0.0;
    for _ in 0..family.offspring_count() {
        acc += (-family.sample_displacement(rng)).exp() * sample_wk_exact(family, k - 1, rng);
    }
    acc
}

/// Deterministic evaluation of the Laplace transform `E[e^{-s W}]` of the
/// martingale limit at the given scales, by solving the smoothing-transform
/// fixed point `phi(s) = (E_V[phi(s e^{-V})])^d` on a log grid.
///
/// This is the sampling-free oracle for every pool-based Laplace functional.
/// The fixed-point family is scale-indexed (any `phi(c s)` also solves the
/// equation), so each sweep renormalizes the grid to keep the mean at one;
/// the iteration then contracts in the remaining directions.
pub fn laplace_fixed_point(family: &EnvFamily, scales: &[f64]) -> Vec<f64> {
    const GRID: usize = 4000;
    const LO: f64 = -28.0; // ln s range
    const HI: f64 = 17.0;
    const QUAD: usize = 64;
    const SPAN_SD: f64 = 9.0;
    let step = (HI - LO) / (GRID - 1) as f64;
    // Gaussian expectation over one displacement by Gauss-Legendre on +-9 sd.
    let mean = family.displacement_mean();
    let sd = family.sigma2().sqrt();
    let quad: Vec<(f64, f64)> = crate::limit_laws::gauss_legendre(QUAD)
        .into_iter()
        .map(|(t, w)| {
            let v = mean - SPAN_SD * sd + 2.0 * SPAN_SD * sd * t;
            let density = (-(v - mean) * (v - mean) / (2.0 * sd * sd)).exp()
                / (sd * (2.0 * std::f64::consts::PI).sqrt());
            (v, w * 2.0 * SPAN_SD * sd * density)
        })
        .collect();
    // Work with g = 1 - phi for precision near s = 0, where g(s) ~ s.
    let eval = |g: &[f64], log_s: f64| -> f64 {
        if log_s < LO {
            return log_s.exp();
        }
        if log_s >= HI {
            return 1.0;
        }
        let pos = (log_s - LO) / step;
        let idx = (pos as usize).min(GRID - 2);
        let frac = pos - idx as f64;
        g[idx] * (1.0 - frac) + g[idx + 1] * frac
    };
    let mut g: Vec<f64> = (0..GRID)
        .map(|i| {
            let s = (LO + i as f64 * step).exp();
            -(-s).exp_m1()
        })
        .collect();
    let d = family.offspring_count();
    let probe = ((-21.0 - LO) / step) as usize; // s ~ 1e-9
    let mut scratch = vec![0.0f64; GRID];
    for _ in 0..1000 {
        for (i, slot) in scratch.iter_mut().enumerate() {
            let log_s = LO + i as f64 * step;
            let mut inner = 0.0;
            for &(v, w) in &quad {
                inner += w * eval(&g, log_s - v);
            }
            // 1 - (1 - inner)^d without cancellation for small inner.
            *slot = -(d as f64 * (-inner).ln_1p()).exp_m1();
        }
        // Renormalize the scale so the mean stays at one.
        let mean_now = scratch[probe] / (LO + probe as f64 * step).exp();
        let shift = mean_now.ln();
        let mut delta: f64 = 0.0;
        for (i, slot) in g.iter_mut().enumerate() {
            let val = eval(&scratch, LO + i as f64 * step - shift);
            delta = delta.max((val - *slot).abs());
            *slot = val;
        }
        if delta < 1e-13 {
            break;
        }
    }
    scales.iter().map(|&s| 1.0 - eval(&g, s.ln())).collect()
}
