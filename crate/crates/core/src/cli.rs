//! `cocyclelab` command line: one subcommand per experiment, all driven by a
//! TOML config file. Every output file starts with a `#` provenance line.
//!
//! Exit codes: 0 success, 1 other failure, 2 config error, 3 no spectral
//! gap, 4 symbol window horizon exceeded.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::base::BaseSystem;
use crate::cocycle::{bunching_check, BunchingVerdict, Cocycle};
use crate::config::ExperimentConfig;
use crate::continuity::{continuity_experiment, ContinuityBudget};
use crate::error::{LabError, Result};
use crate::oseledets::{default_depth, sample_splittings, Direction};
use crate::plot::{goodset_svg, histogram_svg, write_svg, GoodSetPoint};
use crate::projective::{
    attraction_test, build_invariant_measures_at, default_bank, integrate_phi_with_stderr, invariance_defect,
    sample_base_points,
};
use crate::spectrum::{lyapunov_exponents, spectral_gap, DEFAULT_GAP_FLOOR};

pub const OUT_ENV: &str = "COCYCLELAB_OUT";

#[derive(Parser, Debug)]
#[command(name = "cocyclelab", version, about = "Lyapunov exponents and Oseledets continuity experiments for 2x2 cocycles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extremal Lyapunov exponents by Monte Carlo.
    Lyapunov(Common),
    /// Oseledets splittings at sampled points.
    Oseledets(Common),
    /// Fiber-bunching diagnostic.
    Bunching(Common),
    /// Invariant projective measures, integral identities and attraction.
    Projective {
        #[command(flatten)]
        common: Common,
        /// Also write a direction histogram.
        #[arg(long)]
        svg: bool,
    },
    /// Good-set measures along a perturbation family.
    Continuity(Common),
    /// Run the built-in trivial examples.
    Selftest(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Config(_)
        | LabError::InvalidSystem(_)
        | LabError::InvalidCocycle(_)
        | LabError::Expression(_)
        | LabError::InvalidArgument(_) => 2,
        LabError::NoGap(_) => 3,
        LabError::HorizonExceeded { .. } => 4,
        _ => 1,
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let common = match &cli.command {
        Command::Projective { common, .. } => common.clone(),
        Command::Lyapunov(c) | Command::Oseledets(c) | Command::Bunching(c) | Command::Continuity(c) | Command::Selftest(c) => {
            c.clone()
        }
    };
    let outcome = match common.threads {
        Some(0) => Err(LabError::Config("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, &common)),
            Err(e) => Err(LabError::Io(e.to_string())),
        },
        None => dispatch(&cli.command, &common),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("cocyclelab: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: &Command, common: &Common) -> Result<()> {
    if let Command::Selftest(_) = command {
        return selftest();
    }
    let mut ctx = Context::load(common)?;
    match command {
        Command::Lyapunov(_) => lyapunov(&mut ctx),
        Command::Oseledets(_) => oseledets(&mut ctx),
        Command::Bunching(_) => bunching(&mut ctx),
        Command::Projective { svg, .. } => projective(&mut ctx, *svg),
        Command::Continuity(_) => continuity(&mut ctx),
        Command::Selftest(_) => unreachable!(),
    }
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
    header: String,
}

impl Context {
    fn load(common: &Common) -> Result<Self> {
        let path = common.config.as_ref().ok_or_else(|| LabError::Config("--config <path> is required".into()))?;
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        let env = std::env::var_os(OUT_ENV).map(PathBuf::from);
        let out = resolve_out(common.out.as_deref(), env.as_deref(), &cfg.output_dir);
        let header = format!("# cocyclelab {} config_hash={} seed={}\n", env!("CARGO_PKG_VERSION"), cfg.hash(), cfg.seed);
        Ok(Context { cfg, out, header })
    }

    fn system_and_cocycle(&self) -> Result<(BaseSystem, Cocycle)> {
        let sys = self.cfg.base_system()?;
        let c = self.cfg.cocycle(&sys)?;
        Ok((sys, c))
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        std::fs::write(&path, format!("{}{}", self.header, body))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn write_svg(&self, name: &str, svg: &str) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        // Provenance as a leading XML comment.
        let body = format!("<!-- {} -->\n{svg}", self.header.trim_start_matches("# ").trim_end());
        write_svg(&path, &body)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    /// Splitting depth: the configured one, or `⌈40/gap⌉` from a spectrum run.
    fn depth(&self, sys: &BaseSystem, c: &Cocycle) -> Result<usize> {
        if let Some(d) = self.cfg.budgets.depth {
            return Ok(d);
        }
        let b = &self.cfg.budgets;
        let report = lyapunov_exponents(c, sys, b.n, b.spectrum_samples(), self.cfg.seed)?;
        let gap = spectral_gap(&report, DEFAULT_GAP_FLOOR);
        if !gap.has_gap {
            return Err(LabError::NoGap(format!("measured gap {:.3e} is not resolved", gap.gap)));
        }
        Ok(default_depth(gap.gap, b.depth_cap()))
    }
}

fn lyapunov(ctx: &mut Context) -> Result<()> {
    let (sys, c) = ctx.system_and_cocycle()?;
    let b = &ctx.cfg.budgets;
    let report = lyapunov_exponents(&c, &sys, b.n, b.samples, ctx.cfg.seed)?;
    let gap = spectral_gap(&report, DEFAULT_GAP_FLOOR);
    let mut body = String::from("sample_id,ell_plus,ell_minus\n");
    for (i, (p, m)) in report.per_sample.iter().enumerate() {
        body.push_str(&format!("{i},{p},{m}\n"));
    }
    ctx.write("lyapunov.csv", &body)?;
    let summary = format!(
        "quantity,value\nlambda_plus,{}\nlambda_minus,{}\nstderr_plus,{}\nstderr_minus,{}\ngap,{}\ncorrected_gap,{}\nstderr_gap,{}\nhas_gap,{}\nn,{}\nsamples,{}\n",
        report.lambda_plus,
        report.lambda_minus,
        report.stderr_plus,
        report.stderr_minus,
        gap.gap,
        gap.corrected_gap,
        gap.stderr,
        gap.has_gap,
        report.n,
        report.samples
    );
    ctx.write("lyapunov_summary.csv", &summary)?;
    println!(
        "lambda+ = {:.9} ± {:.2e}, lambda- = {:.9} ± {:.2e}, gap = {:.6} ({})",
        report.lambda_plus,
        report.stderr_plus,
        report.lambda_minus,
        report.stderr_minus,
        gap.gap,
        if gap.has_gap { "gapped" } else { "no gap" }
    );
    Ok(())
}

fn oseledets(ctx: &mut Context) -> Result<()> {
    let (sys, c) = ctx.system_and_cocycle()?;
    let depth = ctx.depth(&sys, &c)?;
    let splittings = sample_splittings(&c, &sys, depth, ctx.cfg.budgets.samples, ctx.cfg.seed);
    let mut body = String::from("sample_id,theta_u,theta_s,residual,depth\n");
    for (i, s) in splittings.into_iter().enumerate() {
        let s = s?;
        body.push_str(&format!("{i},{},{},{},{}\n", s.unstable.angle(), s.stable.angle(), s.residual, s.depth));
    }
    ctx.write("oseledets.csv", &body)?;
    Ok(())
}

fn bunching(ctx: &mut Context) -> Result<()> {
    let (sys, c) = ctx.system_and_cocycle()?;
    let b = &ctx.cfg.budgets;
    let report = bunching_check(&c, &sys, b.n_max, b.samples, ctx.cfg.seed)?;
    let mut body = String::from("n,b_n,fitted\n");
    for n in 1..=report.n_max() {
        body.push_str(&format!("{n},{},{}\n", report.b(n), report.fitted(n)));
    }
    ctx.write("bunching.csv", &body)?;
    ctx.write(
        "bunching_summary.csv",
        &format!(
            "quantity,value\ntheta_hat,{}\nc3_hat,{}\nverdict,{}\nsamples,{}\nexact,{}\n",
            report.theta_hat,
            report.c3_hat,
            report.verdict.as_str(),
            report.samples,
            report.exact
        ),
    )?;
    println!("theta_hat = {:.6}, verdict = {}", report.theta_hat, report.verdict.as_str());
    Ok(())
}

fn projective(ctx: &mut Context, svg: bool) -> Result<()> {
    let (sys, c) = ctx.system_and_cocycle()?;
    let depth = ctx.depth(&sys, &c)?;
    let (b, seed) = (ctx.cfg.budgets.clone(), ctx.cfg.seed);
    let spectrum = lyapunov_exponents(&c, &sys, b.n, b.spectrum_samples(), seed)?;
    let points = sample_base_points(&c, &sys, b.samples, depth, seed);
    let images = points.iter().map(|x| sys.apply_f(x, 1)).collect::<Result<Vec<_>>>()?;
    let (m_s, m_u) = build_invariant_measures_at(&c, &sys, &points, depth)?;
    let (m_s_ref, m_u_ref) = build_invariant_measures_at(&c, &sys, &images, depth)?;
    let bank = default_bank(&sys);
    let mut body = String::from("measure,integral,stderr,lambda,lambda_stderr,defect\n");
    for (name, m, reference, lambda, lambda_se) in [
        ("m_u", &m_u, &m_u_ref, spectrum.lambda_plus, spectrum.stderr_plus),
        ("m_s", &m_s, &m_s_ref, spectrum.lambda_minus, spectrum.stderr_minus),
    ] {
        let (integral, se) = integrate_phi_with_stderr(&c, m)?;
        let defect = invariance_defect(&c, &sys, m, &bank, Some(reference))?;
        body.push_str(&format!("{name},{integral},{se},{lambda},{lambda_se},{defect}\n"));
    }
    ctx.write("projective_integrals.csv", &body)?;

    let attraction = attraction_test(&c, &sys, b.samples.min(1000), b.grid, b.n_max, depth, seed)?;
    let mut curves = String::from("n,forward_median,backward_median\n");
    for j in 0..attraction.forward_curve.len() {
        curves.push_str(&format!("{j},{},{}\n", attraction.forward_curve[j], attraction.backward_curve[j]));
    }
    ctx.write("attraction.csv", &curves)?;
    println!(
        "attraction after {} steps: forward median {:.3e}, backward median {:.3e} ({})",
        b.n_max,
        attraction.forward_final_median,
        attraction.backward_final_median,
        if attraction.pass { "pass" } else { "fail" }
    );

    if svg {
        let unstable: Vec<f64> = m_u.atoms.iter().map(|(p, _)| p.dir.angle()).collect();
        let markers = [(circular_mean(&m_u.atoms), "E^u"), (circular_mean(&m_s.atoms), "E^s")];
        ctx.write_svg("projective_histogram.svg", &histogram_svg(&unstable, 60, &markers)?)?;
    }
    Ok(())
}

fn circular_mean(atoms: &[(crate::projective::ProjectivePoint, f64)]) -> f64 {
    let (c, s) = atoms.iter().fold((0.0, 0.0), |(c, s), (p, w)| {
        let t = 2.0 * p.dir.angle();
        (c + w * t.cos(), s + w * t.sin())
    });
    Direction::from_angle(0.5 * s.atan2(c)).angle()
}

fn continuity(ctx: &mut Context) -> Result<()> {
    let sys = ctx.cfg.base_system()?;
    let family = ctx.cfg.family(&sys)?;
    let b = &ctx.cfg.budgets;
    let budget = ContinuityBudget {
        samples: b.samples,
        depth: b.depth,
        max_depth: b.depth_cap(),
        spectrum_n: b.n,
        spectrum_samples: b.spectrum_samples(),
        holder_pairs: b.pair_samples,
        gap_floor: DEFAULT_GAP_FLOOR,
    };
    let bunched = bunching_check(&family.base, &sys, b.n_max.max(2), b.samples.min(200), ctx.cfg.seed)?;
    if bunched.verdict != BunchingVerdict::Bunched {
        eprintln!(
            "cocyclelab: warning: base cocycle is {} (theta_hat = {:.4}); the continuity theorem does not apply",
            bunched.verdict.as_str(),
            bunched.theta_hat
        );
    }
    let report = continuity_experiment(&family, &sys, ctx.cfg.epsilon, &budget, ctx.cfg.seed)?;
    ctx.write("goodset.csv", &report.to_csv())?;
    let series: Vec<GoodSetPoint> = report
        .rows
        .iter()
        .filter_map(|r| r.stats.map(|s| GoodSetPoint { t: r.t, g: s.g_hat, lo: s.ci_lo, hi: s.ci_hi }))
        .collect();
    if series.is_empty() {
        eprintln!("cocyclelab: every row is censored; no plot written");
    } else {
        ctx.write_svg("goodset.svg", &goodset_svg(&series)?)?;
    }
    for r in &report.rows {
        match r.stats {
            Some(s) => println!("k = {:2}  t = {:.3e}  g = {:.4}  [{:.4}, {:.4}]", r.k, r.t, s.g_hat, s.ci_lo, s.ci_hi),
            None => println!("k = {:2}  t = {:.3e}  censored (no gap)", r.k, r.t),
        }
    }
    Ok(())
}

type Check = (&'static str, fn() -> Result<bool>);

fn selftest_checks() -> Vec<Check> {
    use crate::base::{stream_rng, ShiftMeasure};
    use crate::continuity::good_set_measure;
    use crate::matrix::Matrix2;
    use crate::oseledets::splitting;
    use crate::spectrum::finite_time_exponents;

    fn shift() -> Result<BaseSystem> {
        BaseSystem::full_shift(ShiftMeasure::uniform(2), 0.5)
    }
    vec![
        ("constant diagonal exponents", || {
            let sys = shift()?;
            let x = sys.sample_point(60, &mut stream_rng(0, 0));
            let (p, m) = finite_time_exponents(&Cocycle::constant(Matrix2::diag(2.0, 0.5))?, &sys, &x, 50)?;
            Ok((p - 2f64.ln()).abs() < 1e-12 && (m + 2f64.ln()).abs() < 1e-12)
        }),
        ("identity has zero exponents and no gap", || {
            let sys = shift()?;
            let r = lyapunov_exponents(&Cocycle::identity(), &sys, 20, 5, 0)?;
            Ok(r.lambda_plus == 0.0 && r.lambda_minus == 0.0 && !spectral_gap(&r, DEFAULT_GAP_FLOOR).has_gap)
        }),
        ("diagonal splitting is the coordinate axes", || {
            let sys = shift()?;
            let x = sys.sample_point(30, &mut stream_rng(0, 1));
            let s = splitting(&Cocycle::constant(Matrix2::diag(2.0, 0.5))?, &sys, &x, 20)?;
            Ok(s.unstable == Direction::HORIZONTAL && s.stable == Direction::VERTICAL && s.residual == 0.0)
        }),
        ("identity splitting reports no gap", || {
            let sys = shift()?;
            let x = sys.sample_point(30, &mut stream_rng(0, 2));
            Ok(matches!(splitting(&Cocycle::identity(), &sys, &x, 20), Err(LabError::NoGap(_))))
        }),
        ("diagonal exponential", || {
            let e = Matrix2::diag(1.0, -1.0).scale(2f64.ln()).exp();
            Ok(e.max_abs_diff(&Matrix2::diag(2.0, 0.5)) < 1e-15)
        }),
        ("coupled good set of a cocycle with itself", || {
            let sys = shift()?;
            let a = Cocycle::constant(Matrix2::new(2.0, 1.0, 0.0, 0.5))?;
            Ok(good_set_measure(&a, &a, &sys, 1e-12, 50, 30, 0)?.g_hat == 1.0)
        }),
        ("torus fixed point", || {
            let sys = BaseSystem::torus([[2, 1], [1, 1]])?;
            let o = crate::cocycle::torus_point(0.0, 0.0);
            Ok(sys.apply_f(&o, 7)? == o)
        }),
        ("projective line identifies v and -v", || {
            Ok(Direction::from_vector([0.3, -0.7]) == Direction::from_vector([-0.3, 0.7]))
        }),
        ("empty plot series is rejected", || Ok(goodset_svg(&[]).is_err())),
    ]
}

fn selftest() -> Result<()> {
    let mut failed = 0;
    for (name, check) in selftest_checks() {
        let ok = matches!(check(), Ok(true));
        if !ok {
            failed += 1;
        }
        println!("{} {name}", if ok { "ok  " } else { "FAIL" });
    }
    if failed > 0 {
        return Err(LabError::CheckFailed(format!("{failed} selftest checks failed")));
    }
    Ok(())
}

/// Output directory resolution order: `--out`, then the environment
/// variable, then the config.
pub fn resolve_out(flag: Option<&Path>, env: Option<&Path>, config: &str) -> PathBuf {
    flag.or(env).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(config))
}
