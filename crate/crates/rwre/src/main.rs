//! Batch experiment driver: regime checks, replica simulations, coalescence
//! studies and limit-evaluator cross-checks, with CSV and SVG artifacts.

use clap::{Args, Parser, Subcommand};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use rwre::config::{ConfigError, Settings};
use rwre::environment::EnvTree;
use rwre::genealogy::{self, Backend, TrialSettings};
use rwre::limit_laws;
use rwre::manytoone;
use rwre::range_gw::simulate_range;
use rwre::report::{self, CurveSeries, ErrorBarSeries};
use rwre::rng::{purpose, StreamKey};
use rwre::stats::StreamMoments;
use rwre::walk::{run_excursions, SimError, WalkConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rwre",
    version,
    about = "Monte Carlo lab for biased walks on random trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print regime diagnostics (psi, kappa, c0, assumption verdicts).
    EnvCheck {
        #[command(flatten)]
        common: Common,
        /// Exit non-zero unless the family is in the diffusive regime.
        #[arg(long)]
        require_diffusive: bool,
    },
    /// Simulate replicas and emit per-replica range observables as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Coalescence-depth study with theory comparison (CSV + SVG).
    Genealogy {
        #[command(flatten)]
        common: Common,
        /// Sample pairs in the range of a single excursion instead of n.
        #[arg(long)]
        single_excursion: bool,
    },
    /// Evaluator cross-check suite (ratio, Feller, cluster pmf, series,
    /// integral, complementarity) as CSV.
    Limits {
        #[command(flatten)]
        common: Common,
    },
}

/// Flags mirroring the config keys; any flag overrides the file.
#[derive(Args)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation backend: walk | gw.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    gen_cap: Option<u32>,
    #[arg(long)]
    vertex_budget: Option<usize>,
    #[arg(long)]
    winf_depth: Option<u32>,
    #[arg(long)]
    cinf_truncation: Option<u32>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn settings(&self) -> Result<Settings, ConfigError> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        macro_rules! apply {
            ($field:ident, $key:literal) => {
                if let Some(v) = &self.$field {
                    s.set($key, &v.to_string())?;
                }
            };
        }
        apply!(family, "family");
        apply!(d, "d");
        apply!(sigma2, "sigma2");
        apply!(n, "n");
        apply!(b, "b");
        apply!(a, "a");
        apply!(m, "m");
        apply!(replicas, "replicas");
        apply!(seed, "seed");
        apply!(backend, "backend");
        apply!(gen_cap, "gen_cap");
        apply!(vertex_budget, "vertex_budget");
        apply!(winf_depth, "winf_depth");
        apply!(cinf_truncation, "cinf_truncation");
        if let Some(v) = &self.out_dir {
            s.set("out_dir", &v.display().to_string())?;
        }
        if let Some(t) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .ok();
        }
        Ok(s)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::EnvCheck {
            common,
            require_diffusive,
        } => common
            .settings()
            .map_err(usage)
            .and_then(|s| cmd_env_check(&s, require_diffusive)),
        Command::Simulate { common } => common
            .settings()
            .map_err(usage)
            .and_then(|s| cmd_simulate(&s)),
        Command::Genealogy {
            common,
            single_excursion,
        } => common
            .settings()
            .map_err(usage)
            .and_then(|s| cmd_genealogy(&s, single_excursion)),
        Command::Limits { common } => common
            .settings()
            .map_err(usage)
            .and_then(|s| cmd_limits(&s)),
    };
    match outcome {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

type CmdResult = Result<ExitCode, (ExitCode, String)>;

fn usage(e: ConfigError) -> (ExitCode, String) {
    (ExitCode::from(2), e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> (ExitCode, String) {
    (ExitCode::FAILURE, e.to_string())
}

fn cmd_env_check(settings: &Settings, require_diffusive: bool) -> CmdResult {
    let family = settings.env_family().map_err(usage)?;
    let report = family.regime_report();
    println!(
        "family = {} (d = {}, sigma2 = {})",
        settings.family,
        family.offspring_count(),
        family.sigma2()
    );
    println!("psi(1)  = {:.12}", report.psi1);
    println!("psi'(1) = {:.12}", report.psi_prime1);
    println!("psi(2)  = {:.12}", report.psi2);
    match report.kappa {
        Some(k) => println!("kappa   = {k:.12}"),
        None => println!("kappa   = none (no root of psi in (1, 64])"),
    }
    match report.c0 {
        Some(c0) => println!("c0      = {c0:.12}"),
        None => println!("c0      = undefined (psi(2) >= 0)"),
    }
    println!("assumption1_ok = {}", report.assumption1_ok);
    println!("assumption2_ok = {}", report.assumption2_ok);
    println!("diffusive = {}", report.diffusive);
    if require_diffusive && !report.diffusive {
        return Err((
            ExitCode::FAILURE,
            format!(
                "family is not diffusive (kappa = {:?}, need > 2)",
                report.kappa
            ),
        ));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(settings: &Settings) -> CmdResult {
    let family = settings.env_family().map_err(usage)?;
    let seed = settings.require_seed().map_err(usage)?;
    let n = settings.n;
    let gen_cap = settings.effective_gen_cap();
    let mut ks: Vec<u32> = vec![
        0,
        1,
        n / 4,
        n / 2,
        settings.threshold_an(),
        settings.generation_k(),
    ];
    ks.sort_unstable();
    ks.dedup();
    ks.retain(|&k| k <= gen_cap);
    let max_k = *ks.last().unwrap_or(&0);
    let backend = settings.backend;
    let budget = settings.vertex_budget;
    type ReplicaRows = Result<Option<Vec<(u32, u64, u64, u64)>>, SimError>;
    let per_replica: Vec<ReplicaRows> = (0..settings.replicas)
        .into_par_iter()
        .map(|replica| {
            let key = StreamKey::new(seed, replica);
            let mut tree = EnvTree::new(family, key, budget);
            let ledger = match backend {
                Backend::Gw => {
                    let mut rng = key.rng(purpose::RANGE);
                    simulate_range(&mut tree, n, max_k, &mut rng)?
                }
                Backend::Walk => {
                    let mut rng = key.rng(purpose::WALK);
                    match run_excursions(&mut tree, n, &WalkConfig::flagged(gen_cap), &mut rng) {
                        Ok(run) => run.ledger,
                        Err(SimError::GenCapExceeded { .. }) => return Ok(None),
                        Err(e) => return Err(e),
                    }
                }
            };
            Ok(Some(
                ks.iter()
                    .map(|&k| {
                        let obs = ledger.observables(&tree, k);
                        (k, obs.r, obs.z, obs.l)
                    })
                    .collect(),
            ))
        })
        .collect();
    let mut rows = Vec::new();
    let mut flagged = 0u64;
    let mut z_top = StreamMoments::new();
    for (replica, result) in per_replica.into_iter().enumerate() {
        match result.map_err(runtime)? {
            Some(obs) => {
                for &(k, r, z, l) in &obs {
                    rows.push(format!(
                        "{replica},{},{n},{k},{r},{z},{l},0",
                        backend.name()
                    ));
                    if k == max_k {
                        z_top.push(z as f64 / n as f64);
                    }
                }
            }
            None => {
                flagged += 1;
                for &k in &ks {
                    rows.push(format!("{replica},{},{n},{k},0,0,0,1", backend.name()));
                }
            }
        }
    }
    let path = settings.out_dir.join("simulate.csv");
    report::write_csv(&path, "replica,backend,n,k,r_k,z_k,l_k,flagged", &rows).map_err(runtime)?;
    println!("wrote {}", path.display());
    println!(
        "replicas = {}, flagged = {flagged}, mean Z_{max_k}/n = {:.6} (se {:.6})",
        settings.replicas,
        z_top.mean(),
        z_top.se().unwrap_or(f64::NAN)
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_genealogy(settings: &Settings, single_excursion: bool) -> CmdResult {
    let family = settings.env_family().map_err(usage)?;
    let seed = settings.require_seed().map_err(usage)?;
    let report = family.require_diffusive().map_err(runtime)?;
    let c0 = report.c0.expect("diffusive family has c0");
    let n = settings.n;
    let k = settings.generation_k();
    let p = if single_excursion { 1 } else { n };
    if k == 0 {
        return Err((
            ExitCode::FAILURE,
            "floor(b n) is zero; nothing to sample".into(),
        ));
    }
    // Tail thresholds: the configured floor(a n) plus a grid for the plot.
    let mut tails: Vec<u32> = (0..=8).map(|i| (u64::from(k) * i / 8) as u32).collect();
    tails.push(settings.threshold_an());
    tails.sort_unstable();
    tails.dedup();
    let heads = vec![settings.m];
    let trial = TrialSettings {
        family,
        excursions: p,
        generation: k,
        gen_cap: settings.effective_gen_cap(),
        vertex_budget: settings.vertex_budget,
        backend: settings.backend,
        c_ratio_threshold: Some(settings.threshold_an()),
    };
    let estimate =
        genealogy::coalescence_estimates(&trial, &tails, &heads, settings.replicas, seed, 1.96)
            .map_err(runtime)?;

    // Theory values per threshold from the limit evaluators.
    let pool_key = StreamKey::new(seed ^ 0x9e37_79b9, 0);
    let mut pool_rng = pool_key.rng(purpose::POOL);
    let pool = manytoone::winf_pool(&family, settings.winf_depth, 200_000, &mut pool_rng);
    let mut theory_rng = pool_key.rng(purpose::LIMIT);
    let theory_for_tail = |t: u32, rng: &mut ChaCha12Rng| -> (f64, f64) {
        if t == 0 {
            return (1.0, 0.0);
        }
        let a_frac = t as f64 / n as f64;
        if a_frac >= settings.b {
            // As a -> b the cluster count diverges and the tail limit vanishes.
            return (0.0, 0.0);
        }
        if single_excursion {
            (limit_laws::single_excursion_limit(a_frac, settings.b), 0.0)
        } else {
            match limit_laws::recent_past_limit_mc(a_frac, settings.b, c0, &pool, 200_000, rng) {
                Ok(est) => (est.value, est.se),
                Err(_) => (f64::NAN, f64::NAN),
            }
        }
    };
    let mut rows = Vec::new();
    let mut emp_points = Vec::new();
    let mut theory_points = Vec::new();
    for row in &estimate.rows {
        let (theory, theory_se) = if row.tail {
            theory_for_tail(row.threshold, &mut theory_rng)
        } else if single_excursion {
            // Pairs in one excursion coalesce at positive depth fractions only.
            (0.0, 0.0)
        } else {
            match limit_laws::remote_past_limit_mc(
                &family,
                row.threshold,
                settings.b,
                c0,
                &pool,
                50_000,
                seed ^ 0x5bd1_e995,
            ) {
                Ok(est) => (est.head, est.se),
                Err(_) => (f64::NAN, f64::NAN),
            }
        };
        rows.push(format!(
            "{n},{p},{k},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            row.threshold,
            if row.tail { "tail" } else { "head" },
            row.estimate,
            row.ci_lo,
            row.ci_hi,
            theory,
            theory_se,
            estimate.accepted,
            estimate.rejected,
        ));
        if row.tail {
            let x = row.threshold as f64 / n as f64;
            emp_points.push((x, row.estimate, row.ci_lo, row.ci_hi));
            if theory.is_finite() {
                theory_points.push((x, theory));
            }
        }
    }
    let csv = settings.out_dir.join("genealogy.csv");
    report::write_csv(
        &csv,
        "n,p,k,threshold,kind,estimate,ci_lo,ci_hi,theory,theory_se,accepted,rejected",
        &rows,
    )
    .map_err(runtime)?;
    theory_points.sort_by(|l, r| l.0.total_cmp(&r.0));
    let svg = settings.out_dir.join("genealogy.svg");
    report::write_svg_comparison(
        &svg,
        &format!("coalescence tail, n = {n}, p = {p}, generation {k}"),
        "threshold fraction a",
        "P(coalescence depth >= a n)",
        &[ErrorBarSeries {
            label: "empirical (Wilson 95%)".into(),
            points: emp_points,
        }],
        &[CurveSeries {
            label: "limit theory".into(),
            points: theory_points,
        }],
    )
    .map_err(runtime)?;
    println!("wrote {}", csv.display());
    println!("wrote {}", svg.display());
    println!(
        "accepted = {}, rejected = {}, flagged = {}",
        estimate.accepted, estimate.rejected, estimate.flagged
    );
    if let Some((mean, se)) = estimate.c_ratio_mean {
        println!("all-pairs ratio at floor(a n): {mean:.6} (se {se:.6})");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_limits(settings: &Settings) -> CmdResult {
    let family = settings.env_family().map_err(usage)?;
    let seed = settings.require_seed().map_err(usage)?;
    let report = family.require_diffusive().map_err(runtime)?;
    let c0 = report.c0.expect("diffusive family has c0");
    let key = StreamKey::new(seed, 0);
    let mut rng = key.rng(purpose::LIMIT);
    let mut rows: Vec<String> = Vec::new();
    let mut add = |check: &str, param: String, value: f64, reference: f64, se: f64| {
        println!(
            "{check:<28} {param:<18} value {value:>12.6}  reference {reference:>12.6}  |delta| {:.6}",
            (value - reference).abs()
        );
        rows.push(format!(
            "{check},{param},{value:.8},{reference:.8},{:.8},{se:.8}",
            (value - reference).abs()
        ));
    };

    // Exponential ratio statistics against 2 / (l + 1).
    for ell in [1u64, 2, 5, 10] {
        let mut acc = StreamMoments::new();
        let exp = rand_distr::Exp1;
        for _ in 0..200_000 {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..ell {
                let x: f64 = rand_distr::Distribution::sample(&exp, &mut rng);
                sum += x;
                sum_sq += x * x;
            }
            acc.push(sum_sq / (sum * sum));
        }
        add(
            "ratio_moment",
            format!("l={ell}"),
            acc.mean(),
            limit_laws::ratio_moment_exact(ell).unwrap(),
            acc.se().unwrap_or(f64::NAN),
        );
    }

    // Feller transition: mean, variance, Laplace transform.
    let (y0, delta) = (1.5f64, 0.5f64);
    let mut mean = StreamMoments::new();
    let mut sq_dev = StreamMoments::new();
    let mut laplace = [
        StreamMoments::new(),
        StreamMoments::new(),
        StreamMoments::new(),
    ];
    let lambdas = [0.5, 1.0, 2.0];
    for _ in 0..300_000 {
        let v = limit_laws::feller_step(&mut rng, y0, delta, c0);
        mean.push(v);
        sq_dev.push((v - y0) * (v - y0));
        for (acc, &lambda) in laplace.iter_mut().zip(&lambdas) {
            acc.push((-lambda * v).exp());
        }
    }
    add(
        "feller_mean",
        format!("y={y0}"),
        mean.mean(),
        y0,
        mean.se().unwrap_or(f64::NAN),
    );
    add(
        "feller_variance",
        "2*c0*delta*y".to_string(),
        sq_dev.mean(),
        2.0 * c0 * delta * y0,
        sq_dev.se().unwrap_or(f64::NAN),
    );
    for (acc, &lambda) in laplace.iter().zip(&lambdas) {
        add(
            "feller_laplace",
            format!("lambda={lambda}"),
            acc.mean(),
            (-lambda * y0 / (1.0 + c0 * delta * lambda)).exp(),
            acc.se().unwrap_or(f64::NAN),
        );
    }

    // Cluster-count pmf normalization at truncation 200.
    let params = limit_laws::CoalescentParams::new(settings.a, settings.b, c0, 1.5).unwrap();
    let mass: f64 = (0..=200)
        .map(|l| limit_laws::polya_aeppli_pmf(l, &params))
        .sum();
    add("polya_aeppli_mass", "l<=200".into(), mass, 1.0, 0.0);

    // Martingale-limit pool (exported for reuse) and the three recent-past
    // routes.
    let mut pool_rng = key.rng(purpose::POOL);
    let pool = manytoone::winf_pool(&family, settings.winf_depth, 200_000, &mut pool_rng);
    std::fs::create_dir_all(&settings.out_dir).map_err(runtime)?;
    let pool_path = settings.out_dir.join("winf_pool.csv");
    let pool_file = std::fs::File::create(&pool_path).map_err(runtime)?;
    pool.write_csv(std::io::BufWriter::new(pool_file)).map_err(runtime)?;
    println!("wrote {}", pool_path.display());
    let recent_mc =
        limit_laws::recent_past_limit_mc(settings.a, settings.b, c0, &pool, 400_000, &mut rng)
            .map_err(runtime)?;
    let recent_series = limit_laws::recent_past_limit_series(settings.a, settings.b, c0, &pool, 60)
        .map_err(runtime)?;
    let recent_pmf = limit_laws::recent_past_limit_pmf(settings.a, settings.b, c0, &pool, 64)
        .map_err(runtime)?;
    add(
        "recent_past_mc_vs_series",
        format!("a={},b={}", settings.a, settings.b),
        recent_mc.value,
        recent_series.value,
        recent_mc.se,
    );
    add(
        "recent_past_series_vs_pmf",
        format!("tail<={:.1e}", recent_series.tail_estimate),
        recent_series.value,
        recent_pmf,
        0.0,
    );

    // Remote past: sampling versus integral expression.
    let remote_mc = limit_laws::remote_past_limit_mc(
        &family,
        settings.m,
        settings.b,
        c0,
        &pool,
        60_000,
        seed ^ 0xabcd,
    )
    .map_err(runtime)?;
    let remote_int = limit_laws::remote_past_limit_integral(
        &family,
        settings.m,
        settings.b,
        c0,
        &pool,
        60_000,
        seed ^ 0xdcba,
        64,
    )
    .map_err(runtime)?;
    add(
        "remote_past_mc_vs_integral",
        format!("m={},b={}", settings.m, settings.b),
        remote_mc.head,
        remote_int.head,
        remote_mc.se,
    );
    add(
        "remote_conditioning_identity",
        format!("m={}", settings.m),
        remote_int.conditioning_mass_env,
        remote_int.conditioning_mass_pool,
        0.0,
    );

    // Complementarity of the two coalescence regimes.
    let recent_small_a = limit_laws::recent_past_limit_mc(
        0.01 * settings.b,
        settings.b,
        c0,
        &pool,
        400_000,
        &mut rng,
    )
    .map_err(runtime)?;
    let remote_deep =
        limit_laws::remote_past_limit_mc(&family, 12, settings.b, c0, &pool, 40_000, seed ^ 0x1234)
            .map_err(runtime)?;
    add(
        "regime_complementarity",
        format!("a={},m=12", 0.01 * settings.b),
        recent_small_a.value + remote_deep.head,
        1.0,
        (recent_small_a.se.powi(2) + remote_deep.se.powi(2)).sqrt(),
    );

    // Tilted-walk constant.
    let cinf = if settings.cinf_truncation == 0 {
        manytoone::estimate_cinf(&family, 100_000, &mut rng)
    } else {
        manytoone::cinf_profile(&family, &[settings.cinf_truncation], 100_000, &mut rng)
            .pop()
            .expect("one truncation requested")
    };
    add(
        "cinf",
        format!("J={}", cinf.truncation),
        cinf.value,
        cinf.value,
        cinf.se,
    );

    let path = settings.out_dir.join("limits.csv");
    report::write_csv(&path, "check,param,value,reference,abs_error,se", &rows).map_err(runtime)?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}
