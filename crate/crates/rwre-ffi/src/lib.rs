//! C ABI for the rwre simulation library.
//!
//! The surface uses opaque handles plus integer status codes so that any
//! language with a C FFI can drive the simulator: create a family, inspect
//! its regime, run replicas, query range observables and coalescence depths,
//! and evaluate the limit laws. The matching header is generated into
//! `include/rwre.h` at build time.
//!
//! Every function is panic-safe: a Rust panic is caught at the boundary and
//! reported as an internal-error status.

use rwre::environment::{EnvError, EnvFamily, EnvTree};
use rwre::genealogy::{sample_pair, Backend};
use rwre::limit_laws::{self, CoalescentParams, LimitError};
use rwre::manytoone::{self, WinfPool};
use rwre::range_gw::simulate_range;
use rwre::rng::{purpose, StreamKey};
use rwre::walk::{run_excursions, Ledger, SimError, WalkConfig};
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwreStatus {
    RwreStatusOk = 0,
    RwreStatusNullPointer = 1,
    RwreStatusInvalidArgument = 2,
    RwreStatusNotDiffusive = 3,
    RwreStatusBudgetExhausted = 4,
    RwreStatusGenCapExceeded = 5,
    RwreStatusDegenerate = 6,
    RwreStatusLowAcceptance = 7,
    RwreStatusInternal = 8,
}

use RwreStatus::*;

/// Opaque environment family handle.
pub struct RwreFamily {
    inner: EnvFamily,
}

/// Opaque handle owning one simulated replica: the environment together with
/// its edge local times.
pub struct RwreSim {
    tree: EnvTree,
    ledger: Ledger,
}

/// Opaque pool of martingale-limit samples.
pub struct RwrePool {
    inner: WinfPool,
}

/// Regime diagnostics as plain data. `kappa` and `c0` are NaN when the
/// corresponding flag is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RwreRegimeReport {
    pub psi1: f64,
    pub psi_prime1: f64,
    pub psi2: f64,
    pub kappa: f64,
    pub has_kappa: i32,
    pub c0: f64,
    pub has_c0: i32,
    pub diffusive: i32,
    pub assumption1_ok: i32,
    pub assumption2_ok: i32,
}

/// Per-generation observables of a simulated replica.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RwreObservables {
    pub range: u64,
    pub martingale: u64,
    pub local_time: u64,
}

fn env_status(e: &EnvError) -> RwreStatus {
    match e {
        EnvError::VertexBudget { .. } => RwreStatusBudgetExhausted,
        EnvError::NotDiffusive { .. } => RwreStatusNotDiffusive,
        _ => RwreStatusInvalidArgument,
    }
}

fn sim_status(e: &SimError) -> RwreStatus {
    match e {
        SimError::Env(env) => env_status(env),
        SimError::GenCapExceeded { .. } => RwreStatusGenCapExceeded,
        SimError::StepBudget { .. } => RwreStatusBudgetExhausted,
    }
}

fn limit_status(e: &LimitError) -> RwreStatus {
    match e {
        LimitError::BadParams(_) => RwreStatusInvalidArgument,
        LimitError::Degenerate(_) => RwreStatusDegenerate,
        LimitError::LowAcceptance { .. } => RwreStatusLowAcceptance,
    }
}

fn guarded(f: impl FnOnce() -> RwreStatus) -> RwreStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(RwreStatusInternal)
}

/// Static, human-readable description of a status code.
#[no_mangle]
pub extern "C" fn rwre_status_message(status: RwreStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        RwreStatusOk => b"ok\0",
        RwreStatusNullPointer => b"null pointer argument\0",
        RwreStatusInvalidArgument => b"invalid argument\0",
        RwreStatusNotDiffusive => b"family is not in the diffusive regime\0",
        RwreStatusBudgetExhausted => b"vertex or step budget exhausted\0",
        RwreStatusGenCapExceeded => b"walk exceeded the generation cap; replica flagged\0",
        RwreStatusDegenerate => b"degenerate input (no positive mass)\0",
        RwreStatusLowAcceptance => b"conditioning acceptance rate too low\0",
        RwreStatusInternal => b"internal error\0",
    };
    msg.as_ptr().cast()
}

/// Create a d-ary Gaussian family handle. The displacement mean is derived
/// from the criticality normalization, as in the library.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives an owned handle that
/// must be released with `rwre_family_free`.
#[no_mangle]
pub unsafe extern "C" fn rwre_family_new_gaussian(
    d: u32,
    sigma2: f64,
    out: *mut *mut RwreFamily,
) -> RwreStatus {
    if out.is_null() {
        return RwreStatusNullPointer;
    }
    guarded(|| match EnvFamily::gaussian(d, sigma2) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(RwreFamily { inner })) };
            RwreStatusOk
        }
        Err(e) => env_status(&e),
    })
}

/// # Safety
/// `family` must be a handle from [`rwre_family_new_gaussian`] (or null).
#[no_mangle]
pub unsafe extern "C" fn rwre_family_free(family: *mut RwreFamily) {
    if !family.is_null() {
        drop(unsafe { Box::from_raw(family) });
    }
}

/// Evaluate the log-Laplace transform `psi(t)` of the family.
///
/// # Safety
/// `family` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rwre_family_psi(
    family: *const RwreFamily,
    t: f64,
    out: *mut f64,
) -> RwreStatus {
    if family.is_null() || out.is_null() {
        return RwreStatusNullPointer;
    }
    guarded(|| {
        unsafe { *out = (*family).inner.psi(t) };
        RwreStatusOk
    })
}

/// Fill the regime diagnostics for a family.
///
/// # Safety
/// `family` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rwre_regime_report(
    family: *const RwreFamily,
    out: *mut RwreRegimeReport,
) -> RwreStatus {
    if family.is_null() || out.is_null() {
        return RwreStatusNullPointer;
    }
    guarded(|| {
        let report = unsafe { &(*family).inner }.regime_report();
        unsafe {
            *out = RwreRegimeReport {
                psi1: report.psi1,
                psi_prime1: report.psi_prime1,
                psi2: report.psi2,
                kappa: report.kappa.unwrap_or(f64::NAN),
                has_kappa: i32::from(report.kappa.is_some()),
                c0: report.c0.unwrap_or(f64::NAN),
                has_c0: i32::from(report.c0.is_some()),
                diffusive: i32::from(report.diffusive),
                assumption1_ok: i32::from(report.assumption1_ok),
                assumption2_ok: i32::from(report.assumption2_ok),
            };
        }
        RwreStatusOk
    })
}

/// Simulate one replica: `excursions` excursions of the walk (backend 0,
/// generation-capped at `gen_cap`) or the direct range construction down to
/// `max_generation` (backend 1). The replica is reproducible from
/// `(seed, replica)`.
///
/// # Safety
/// `family` and `out` must be valid pointers; the returned handle must be
/// released with [`rwre_sim_free`].
#[no_mangle]
#[allow(clippy::too_many_arguments)] // wide by design: a flat C entry point
pub unsafe extern "C" fn rwre_simulate(
    family: *const RwreFamily,
    seed: u64,
    replica: u64,
    excursions: u32,
    max_generation: u32,
    backend: u32,
    gen_cap: u32,
    vertex_budget: usize,
    out: *mut *mut RwreSim,
) -> RwreStatus {
    if family.is_null() || out.is_null() {
        return RwreStatusNullPointer;
    }
    if excursions == 0 {
        return RwreStatusInvalidArgument;
    }
    guarded(|| {
        let fam = unsafe { (*family).inner };
        let key = StreamKey::new(seed, replica);
        let mut tree = EnvTree::new(fam, key, vertex_budget);
        let ledger = match backend {
            1 => {
                let mut rng = key.rng(purpose::RANGE);
                match simulate_range(&mut tree, excursions, max_generation, &mut rng) {
                    Ok(l) => l,
                    Err(e) => return sim_status(&e),
                }
            }
            0 => {
                let mut rng = key.rng(purpose::WALK);
                match run_excursions(
                    &mut tree,
                    excursions,
                    &WalkConfig::flagged(gen_cap),
                    &mut rng,
                ) {
                    Ok(run) => run.ledger,
                    Err(e) => return sim_status(&e),
                }
            }
            _ => return RwreStatusInvalidArgument,
        };
        unsafe { *out = Box::into_raw(Box::new(RwreSim { tree, ledger })) };
        RwreStatusOk
    })
}

/// # Safety
/// `sim` must be a handle from [`rwre_simulate`] (or null).
#[no_mangle]
pub unsafe extern "C" fn rwre_sim_free(sim: *mut RwreSim) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Range size, additive-martingale value and local time of one generation.
///
/// # Safety
/// `sim` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rwre_sim_observables(
    sim: *const RwreSim,
    generation: u32,
    out: *mut RwreObservables,
) -> RwreStatus {
    if sim.is_null() || out.is_null() {
        return RwreStatusNullPointer;
    }
    guarded(|| {
        let sim = unsafe { &*sim };
        let obs = sim.ledger.observables(&sim.tree, generation);
        unsafe {
            *out = RwreObservables {
                range: obs.r,
                martingale: obs.z,
                local_time: obs.l,
            };
        }
        RwreStatusOk
    })
}

/// Draw one uniform vertex pair from a generation of the range and report its
/// coalescence depth. `*out_found` is 0 when the generation is empty (a
/// conditioning rejection), in which case `*out_lca_depth` is untouched.
///
/// # Safety
/// `sim`, `out_found` and `out_lca_depth` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rwre_sim_pair_coalescence(
    sim: *const RwreSim,
    generation: u32,
    seed: u64,
    out_found: *mut i32,
    out_lca_depth: *mut u32,
) -> RwreStatus {
    if sim.is_null() || out_found.is_null() || out_lca_depth.is_null() {
        return RwreStatusNullPointer;
    }
    guarded(|| {
        let sim = unsafe { &*sim };
        let mut rng = StreamKey::new(seed, 0).rng(purpose::PAIR);
        match sample_pair(&sim.tree, &sim.ledger, generation, &mut rng) {
            Some(pair) => unsafe {
                *out_found = 1;
                *out_lca_depth = pair.lca_depth;
            },
            None => unsafe {
                *out_found = 0;
            },
        }
        RwreStatusOk
    })
}

/// Build a pool of martingale-limit proxy samples at the given depth.
///
/// # Safety
/// `family` and `out` must be valid; release the handle with
/// [`rwre_pool_free`].
#[no_mangle]
pub unsafe extern "C" fn rwre_pool_new(
    family: *const RwreFamily,
    depth: u32,
    size: usize,
    seed: u64,
    out: *mut *mut RwrePool,
) -> RwreStatus {
    if family.is_null() || out.is_null() {
        return RwreStatusNullPointer;
    }
    if size < 2 {
        return RwreStatusInvalidArgument;
    }
    guarded(|| {
        let fam = unsafe { (*family).inner };
        let mut rng = StreamKey::new(seed, 0).rng(purpose::POOL);
        let pool = manytoone::winf_pool(&fam, depth, size, &mut rng);
        unsafe { *out = Box::into_raw(Box::new(RwrePool { inner: pool })) };
        RwreStatusOk
    })
}

/// # Safety
/// `pool` must be a handle from [`rwre_pool_new`] (or null).
#[no_mangle]
pub unsafe extern "C" fn rwre_pool_free(pool: *mut RwrePool) {
    if !pool.is_null() {
        drop(unsafe { Box::from_raw(pool) });
    }
}

/// Mean and second moment of the pool.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rwre_pool_stats(
    pool: *const RwrePool,
    out_mean: *mut f64,
    out_second_moment: *mut f64,
) -> RwreStatus {
    if pool.is_null() || out_mean.is_null() || out_second_moment.is_null() {
        return RwreStatusNullPointer;
    }
    guarded(|| {
        let samples = unsafe { &*pool }.inner.samples();
        let n = samples.len() as f64;
        unsafe {
            *out_mean = samples.iter().sum::<f64>() / n;
            *out_second_moment = samples.iter().map(|w| w * w).sum::<f64>() / n;
        }
        RwreStatusOk
    })
}

/// One exact transition of the quadratic-mechanism branching process.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwre_feller_step(
    y: f64,
    delta: f64,
    c0: f64,
    seed: u64,
    out: *mut f64,
) -> RwreStatus {
    if out.is_null() {
        return RwreStatusNullPointer;
    }
    if !(y >= 0.0) || !(delta > 0.0) || !(c0 > 0.0) {
        return RwreStatusInvalidArgument;
    }
    guarded(|| {
        let mut rng = StreamKey::new(seed, 0).rng(purpose::LIMIT);
        unsafe { *out = limit_laws::feller_step(&mut rng, y, delta, c0) };
        RwreStatusOk
    })
}

/// Pmf of the Polya-Aeppli cluster-count limit.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwre_polya_aeppli_pmf(
    ell: u64,
    a: f64,
    b: f64,
    c0: f64,
    w: f64,
    out: *mut f64,
) -> RwreStatus {
    if out.is_null() {
        return RwreStatusNullPointer;
    }
    guarded(|| match CoalescentParams::new(a, b, c0, w) {
        Ok(params) => {
            unsafe { *out = limit_laws::polya_aeppli_pmf(ell, &params) };
            RwreStatusOk
        }
        Err(e) => limit_status(&e),
    })
}

/// Closed-form recent-past coalescence limit for single-excursion sampling.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwre_single_excursion_limit(a: f64, b: f64, out: *mut f64) -> RwreStatus {
    if out.is_null() {
        return RwreStatusNullPointer;
    }
    if !(0.0 < a && a < b) {
        return RwreStatusInvalidArgument;
    }
    guarded(|| {
        unsafe { *out = limit_laws::single_excursion_limit(a, b) };
        RwreStatusOk
    })
}

/// Monte Carlo recent-past coalescence limit over a sample pool.
///
/// # Safety
/// `pool`, `out_value` and `out_se` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rwre_recent_past_limit(
    a: f64,
    b: f64,
    c0: f64,
    pool: *const RwrePool,
    samples: u64,
    seed: u64,
    out_value: *mut f64,
    out_se: *mut f64,
) -> RwreStatus {
    if pool.is_null() || out_value.is_null() || out_se.is_null() {
        return RwreStatusNullPointer;
    }
    guarded(|| {
        let mut rng = StreamKey::new(seed, 0).rng(purpose::LIMIT);
        match limit_laws::recent_past_limit_mc(
            a,
            b,
            c0,
            unsafe { &(*pool).inner },
            samples,
            &mut rng,
        ) {
            Ok(est) => {
                unsafe {
                    *out_value = est.value;
                    *out_se = est.se;
                }
                RwreStatusOk
            }
            Err(e) => limit_status(&e),
        }
    })
}

/// Monte Carlo remote-past coalescence limit (head probability) at
/// separation generation `m`.
///
/// # Safety
/// `family`, `pool`, `out_head` and `out_se` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rwre_remote_past_limit(
    family: *const RwreFamily,
    m: u32,
    b: f64,
    c0: f64,
    pool: *const RwrePool,
    replicas: u64,
    seed: u64,
    out_head: *mut f64,
    out_se: *mut f64,
) -> RwreStatus {
    if family.is_null() || pool.is_null() || out_head.is_null() || out_se.is_null() {
        return RwreStatusNullPointer;
    }
    guarded(|| {
        let fam = unsafe { (*family).inner };
        match limit_laws::remote_past_limit_mc(
            &fam,
            m,
            b,
            c0,
            unsafe { &(*pool).inner },
            replicas,
            seed,
        ) {
            Ok(est) => {
                unsafe {
                    *out_head = est.head;
                    *out_se = est.se;
                }
                RwreStatusOk
            }
            Err(e) => limit_status(&e),
        }
    })
}

/// Laplace transform of the limiting rescaled martingale value.
///
/// # Safety
/// `pool` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rwre_martingale_limit_laplace(
    theta: f64,
    a: f64,
    c0: f64,
    pool: *const RwrePool,
    out: *mut f64,
) -> RwreStatus {
    if pool.is_null() || out.is_null() {
        return RwreStatusNullPointer;
    }
    if !(theta >= 0.0 && a > 0.0 && c0 > 0.0) {
        return RwreStatusInvalidArgument;
    }
    guarded(|| {
        unsafe {
            *out = limit_laws::martingale_limit_laplace(theta, a, c0, &(*pool).inner);
        }
        RwreStatusOk
    })
}

/// Monte Carlo estimate of the range-density constant
/// `c_inf = E[(sum_j e^{-S_j})^{-1}]` with adaptive truncation.
///
/// # Safety
/// `family`, `out_value` and `out_se` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rwre_estimate_cinf(
    family: *const RwreFamily,
    replicas: usize,
    seed: u64,
    out_value: *mut f64,
    out_se: *mut f64,
) -> RwreStatus {
    if family.is_null() || out_value.is_null() || out_se.is_null() {
        return RwreStatusNullPointer;
    }
    if replicas == 0 {
        return RwreStatusInvalidArgument;
    }
    guarded(|| {
        let fam = unsafe { (*family).inner };
        let mut rng = StreamKey::new(seed, 0).rng(purpose::LIMIT);
        let est = manytoone::estimate_cinf(&fam, replicas, &mut rng);
        unsafe {
            *out_value = est.value;
            *out_se = est.se;
        }
        RwreStatusOk
    })
}

/// Backend selector value for the step-by-step walk.
#[no_mangle]
pub extern "C" fn rwre_backend_walk() -> u32 {
    debug_assert_eq!(Backend::Walk.name(), "walk");
    0
}

/// Backend selector value for the direct range construction.
#[no_mangle]
pub extern "C" fn rwre_backend_gw() -> u32 {
    debug_assert_eq!(Backend::Gw.name(), "gw");
    1
}
