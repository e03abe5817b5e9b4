//! Command-line front end: classification, region scans, step-size bounds,
//! spectral diagnostics, Monte Carlo simulation and criterion
//! cross-validation, emitting CSV/JSON for external plotting.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical failure or criterion
//! disagreement. Stdout carries data only; diagnostics go to stderr.

use clap::{Args, Parser, Subcommand};
use msstab::polystab::{quartic_spectral_radius, StabilityStatus};
use msstab::scalar::{
    classify, cross_validate, h0_ab2, h0_am2, quartic_coeffs, region_rows_to_csv, region_scan,
    RegionScan,
};
use msstab::schemes::{catalog, reduce_scalar, ScalarTestEq, SchemeName};
use msstab::simulate::{
    run_theta_scalar, run_two_step_scalar, run_two_step_system, traces_to_csv, MsTrace, SimConfig,
};
use msstab::system::{
    classify_system, sde_ms_matrix, single_noise_system, spectral_abscissa, system_spectral_radius,
    two_noise_system,
};
use msstab::{Error, SystemTestEq};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "msstab",
    about = "Mean-square stability of stochastic linear two-step Maruyama methods",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify one (scheme, lambda, mu, h) point
    Classify(ClassifyArgs),
    /// Rasterize stability regions over the (x, Y) = (lambda h, mu^2 h) plane
    Region(RegionArgs),
    /// Conditional step-size bound h0 for AB2 or AM2
    H0(H0Args),
    /// Spectral radius of the system stability matrix
    Spectral(SpectralArgs),
    /// Monte Carlo mean-square traces
    Simulate(SimulateArgs),
    /// Cross-validate theorem vs Schur-Cohn criteria vs root oracle
    Check(CheckArgs),
}

#[derive(Args)]
struct ClassifyArgs {
    /// Scheme token: ab2, ab2i, am2, am2i, bdf2, bdf2i
    #[arg(long)]
    scheme: SchemeName,
    /// Drift parameter, real or "re,im"
    #[arg(long, allow_hyphen_values = true)]
    lambda: String,
    /// Diffusion parameter, real or "re,im"
    #[arg(long, allow_hyphen_values = true)]
    mu: String,
    #[arg(long)]
    h: f64,
    /// Emit JSON instead of key=value text
    #[arg(long)]
    json: bool,
    /// Also cross-validate all criterion routes; disagreement exits 3
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct RegionArgs {
    /// Schemes to rasterize (repeatable; default: all six)
    #[arg(long = "scheme")]
    schemes: Vec<SchemeName>,
    /// Grid as "xmin,xmax,ymin,ymax,nx,ny"
    #[arg(long, default_value = "-8,0,0,16,400,400", allow_hyphen_values = true)]
    grid: String,
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct H0Args {
    /// ab2 (real or complex parameters) or am2 (real parameters)
    #[arg(long)]
    scheme: SchemeName,
    #[arg(long, allow_hyphen_values = true)]
    lambda: String,
    #[arg(long, allow_hyphen_values = true)]
    mu: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SpectralArgs {
    #[arg(long)]
    scheme: SchemeName,
    #[arg(long)]
    h: f64,
    /// System JSON file with {"F": [[...]], "G": [[[...]], ...]}
    #[arg(long, conflicts_with_all = ["single_noise", "two_noise"])]
    system: Option<PathBuf>,
    /// Built-in 2x2 single-noise system, as "lambda,sigma,eps"
    #[arg(long, conflicts_with = "two_noise", allow_hyphen_values = true)]
    single_noise: Option<String>,
    /// Built-in 2x2 two-noise system, as "lambda,sigma,eps"
    #[arg(long, allow_hyphen_values = true)]
    two_noise: Option<String>,
    /// Also report the spectral abscissa of the continuous-time MS matrix
    #[arg(long)]
    sde_abscissa: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Clone)]
struct SimulateArgs {
    /// Load a JSON job config; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective job config as JSON and exit
    #[arg(long)]
    dump_config: bool,
    /// Scheme tokens (repeatable); scalar runs also accept euler and theta
    #[arg(long = "scheme")]
    schemes: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// System JSON file with {"F": [[...]], "G": [[[...]], ...]}
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    single_noise: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    two_noise: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of batches M
    #[arg(long)]
    batches: Option<u32>,
    /// Paths per batch L (total paths = M * L)
    #[arg(long)]
    paths: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap parameter for the second initial value
    #[arg(long)]
    theta: Option<f64>,
    /// Report the first-component MS-norm instead of the state norm (systems)
    #[arg(long)]
    first_component: bool,
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Number of random coefficient samples
    #[arg(long, default_value_t = 10_000)]
    samples: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Optional single point: scheme plus lambda, mu, h
    #[arg(long)]
    scheme: Option<SchemeName>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    #[arg(long)]
    h: Option<f64>,
}

fn parse_complex(s: &str) -> Result<Complex64, Error> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || Error::InvalidConfig(format!("cannot parse '{s}' as a real or re,im number"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.trim().parse().map_err(|_| bad())?, 0.0)),
        [re, im] => Ok(Complex64::new(
            re.trim().parse().map_err(|_| bad())?,
            im.trim().parse().map_err(|_| bad())?,
        )),
        _ => Err(bad()),
    }
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), Error> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || Error::InvalidConfig(format!("cannot parse '{s}' as lambda,sigma,eps"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    let v = v.map_err(|_| bad())?;
    Ok((v[0], v[1], v[2]))
}

fn write_output(path: &Option<PathBuf>, data: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, data)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{data}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ClassifyOutput {
    scheme: String,
    lambda: [f64; 2],
    mu: [f64; 2],
    h: f64,
    verdict: StabilityStatus,
    rho: f64,
    witness: f64,
    failed_condition: Option<usize>,
}

fn cmd_classify(args: &ClassifyArgs) -> Result<(), Error> {
    let eq = ScalarTestEq::new(parse_complex(&args.lambda)?, parse_complex(&args.mu)?);
    let verdict = classify(args.scheme, &eq, args.h)?;
    let rc = reduce_scalar(catalog(args.scheme), &eq, args.h)?;
    let rho = quartic_spectral_radius(&quartic_coeffs(&rc))?;
    let out = ClassifyOutput {
        scheme: args.scheme.token().into(),
        lambda: [eq.lambda.re, eq.lambda.im],
        mu: [eq.mu.re, eq.mu.im],
        h: args.h,
        verdict: verdict.status,
        rho,
        witness: verdict.witness,
        failed_condition: verdict.failed_condition,
    };
    if args.json {
        println!("{}", serde_json::to_string(&out).expect("serializable"));
    } else {
        println!(
            "scheme={} verdict={} rho={} witness={} failed_condition={}",
            out.scheme,
            out.verdict,
            out.rho,
            out.witness,
            out.failed_condition.map_or("-".into(), |c| c.to_string()),
        );
    }
    if args.check {
        let cc = cross_validate(&rc)?;
        for f in &cc.findings {
            eprintln!("check: {f}");
        }
        if !cc.consistent {
            return Err(Error::CriterionDisagreement {
                jury: cc.jury.witness,
                elaydi: cc.theorem.witness,
            });
        }
        eprintln!("check: theorem, Schur-Cohn, Jury and root-oracle verdicts agree");
    }
    Ok(())
}

fn cmd_region(args: &RegionArgs) -> Result<(), Error> {
    let parts: Vec<&str> = args.grid.split(',').collect();
    if parts.len() != 6 {
        return Err(Error::InvalidConfig(format!(
            "--grid expects xmin,xmax,ymin,ymax,nx,ny, got '{}'",
            args.grid
        )));
    }
    let num = |i: usize| -> Result<f64, Error> {
        parts[i]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad grid component '{}'", parts[i])))
    };
    let cfg = RegionScan {
        schemes: if args.schemes.is_empty() {
            SchemeName::ALL.to_vec()
        } else {
            args.schemes.clone()
        },
        x_min: num(0)?,
        x_max: num(1)?,
        y_min: num(2)?,
        y_max: num(3)?,
        nx: num(4)? as usize,
        ny: num(5)? as usize,
    };
    let rows = region_scan(&cfg)?;
    write_output(&args.out, &region_rows_to_csv(&rows))
}

fn cmd_h0(args: &H0Args) -> Result<(), Error> {
    let lambda = parse_complex(&args.lambda)?;
    let mu = parse_complex(&args.mu)?;
    let h0 = match args.scheme {
        SchemeName::Ab2 => h0_ab2(&ScalarTestEq::new(lambda, mu))?,
        SchemeName::Am2 => {
            if lambda.im != 0.0 || mu.im != 0.0 {
                return Err(Error::NotApplicable(
                    "the AM2 bound requires real parameters",
                ));
            }
            h0_am2(lambda.re, mu.re)?
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "step-size bounds exist for ab2 and am2 only, got {other}"
            )))
        }
    };
    if args.json {
        println!(
            "{}",
            serde_json::json!({ "scheme": args.scheme.token(), "h0": h0 })
        );
    } else {
        println!("scheme={} h0={}", args.scheme.token(), h0);
    }
    Ok(())
}

fn load_system(
    file: &Option<PathBuf>,
    single: &Option<String>,
    two: &Option<String>,
) -> Result<Option<SystemTestEq>, Error> {
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        return Ok(Some(SystemTestEq::from_json(&text)?));
    }
    if let Some(s) = single {
        let (l, sig, eps) = parse_triple(s)?;
        return Ok(Some(single_noise_system(l, sig, eps)));
    }
    if let Some(s) = two {
        let (l, sig, eps) = parse_triple(s)?;
        return Ok(Some(two_noise_system(l, sig, eps)));
    }
    Ok(None)
}

fn cmd_spectral(args: &SpectralArgs) -> Result<(), Error> {
    let eq = load_system(&args.system, &args.single_noise, &args.two_noise)?.ok_or_else(|| {
        Error::InvalidConfig("need --system, --single-noise or --two-noise".into())
    })?;
    let rho = system_spectral_radius(args.scheme, &eq, args.h)?;
    let verdict = classify_system(args.scheme, &eq, args.h)?;
    let abscissa = if args.sde_abscissa {
        Some(spectral_abscissa(&sde_ms_matrix(&eq))?)
    } else {
        None
    };
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "scheme": args.scheme.token(),
                "h": args.h,
                "rho": rho,
                "verdict": verdict.status,
                "sde_abscissa": abscissa,
            })
        );
    } else {
        match abscissa {
            Some(a) => println!(
                "scheme={} rho={} verdict={} sde_abscissa={}",
                args.scheme.token(),
                rho,
                verdict.status,
                a
            ),
            None => println!(
                "scheme={} rho={} verdict={}",
                args.scheme.token(),
                rho,
                verdict.status
            ),
        }
    }
    Ok(())
}

/// JSON job description for `simulate`; the same shape `--dump-config`
/// emits, so dumped configs feed straight back through `--config`.
#[derive(Serialize, Deserialize, Clone)]
struct SimJob {
    schemes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    system_json: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    single_noise: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    two_noise: Option<String>,
    h: f64,
    t_end: f64,
    batches: u32,
    paths: u32,
    seed: u64,
    theta: f64,
    #[serde(default)]
    first_component: bool,
}

impl Default for SimJob {
    fn default() -> Self {
        SimJob {
            schemes: vec!["all".into()],
            lambda: None,
            mu: None,
            system_json: None,
            single_noise: None,
            two_noise: None,
            h: 0.125,
            t_end: 1.0,
            batches: 100,
            paths: 100,
            seed: 42,
            theta: 0.5,
            first_component: false,
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let mut job = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidConfig(format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str::<SimJob>(&text)
                .map_err(|e| Error::InvalidConfig(format!("bad job config: {e}")))?
        }
        None => SimJob::default(),
    };
    if !args.schemes.is_empty() {
        job.schemes = args.schemes.clone();
    }
    if args.lambda.is_some() {
        job.lambda = args.lambda.clone();
    }
    if args.mu.is_some() {
        job.mu = args.mu.clone();
    }
    if let Some(path) = &args.system {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        job.system_json = Some(SystemTestEq::from_json(&text)?.to_json());
    }
    if args.single_noise.is_some() {
        job.single_noise = args.single_noise.clone();
    }
    if args.two_noise.is_some() {
        job.two_noise = args.two_noise.clone();
    }
    if let Some(v) = args.h {
        job.h = v;
    }
    if let Some(v) = args.t_end {
        job.t_end = v;
    }
    if let Some(v) = args.batches {
        job.batches = v;
    }
    if let Some(v) = args.paths {
        job.paths = v;
    }
    if let Some(v) = args.seed {
        job.seed = v;
    }
    if let Some(v) = args.theta {
        job.theta = v;
    }
    if args.first_component {
        job.first_component = true;
    }

    if args.dump_config {
        println!(
            "{}",
            serde_json::to_string_pretty(&job).expect("serializable")
        );
        return Ok(());
    }

    let cfg = SimConfig {
        h: job.h,
        t_end: job.t_end,
        batches: job.batches,
        paths_per_batch: job.paths,
        seed: job.seed,
        theta: job.theta,
    };

    let mut tokens = Vec::new();
    for s in &job.schemes {
        if s == "all" {
            tokens.extend(SchemeName::ALL.iter().map(|n| n.token().to_string()));
        } else {
            tokens.push(s.clone());
        }
    }

    let system = if let Some(js) = &job.system_json {
        Some(SystemTestEq::from_json(js)?)
    } else {
        load_system(&None, &job.single_noise, &job.two_noise)?
    };

    let mut traces: Vec<MsTrace> = Vec::new();
    match system {
        Some(eq) => {
            for token in &tokens {
                let scheme: SchemeName = token.parse().map_err(|_| {
                    Error::InvalidConfig(format!(
                        "system runs support the six two-step schemes, got '{token}'"
                    ))
                })?;
                let tr = run_two_step_system(scheme, &eq, &cfg)?;
                traces.push(if job.first_component {
                    tr.first_component_trace()
                } else {
                    tr.state_trace()
                });
            }
        }
        None => {
            let lambda = job
                .lambda
                .as_deref()
                .ok_or_else(|| Error::InvalidConfig("scalar runs need --lambda and --mu".into()))?;
            let mu = job
                .mu
                .as_deref()
                .ok_or_else(|| Error::InvalidConfig("scalar runs need --lambda and --mu".into()))?;
            let eq = ScalarTestEq::new(parse_complex(lambda)?, parse_complex(mu)?);
            for token in tokens.iter().map(String::as_str) {
                match token {
                    "euler" => traces.push(run_theta_scalar(&eq, &cfg, 0.0)?),
                    "theta" => traces.push(run_theta_scalar(&eq, &cfg, 0.5)?),
                    _ => {
                        let scheme: SchemeName = token.parse()?;
                        traces.push(run_two_step_scalar(scheme, &eq, &cfg)?);
                    }
                }
            }
        }
    }
    write_output(&args.out, &traces_to_csv(&traces))
}

fn cmd_check(args: &CheckArgs) -> Result<(), Error> {
    if let (Some(scheme), Some(lambda), Some(mu), Some(h)) =
        (args.scheme, &args.lambda, &args.mu, args.h)
    {
        let eq = ScalarTestEq::new(parse_complex(lambda)?, parse_complex(mu)?);
        let rc = reduce_scalar(catalog(scheme), &eq, h)?;
        let cc = cross_validate(&rc)?;
        for f in &cc.findings {
            eprintln!("check: {f}");
        }
        println!(
            "scheme={} theorem={} schur_cohn={} jury={} roots={} rho={} consistent={}",
            scheme.token(),
            cc.theorem.status,
            cc.schur_cohn.status,
            cc.jury.status,
            cc.roots.status,
            cc.spectral_radius,
            cc.consistent
        );
        if !cc.consistent {
            return Err(Error::CriterionDisagreement {
                jury: cc.jury.witness,
                elaydi: cc.theorem.witness,
            });
        }
        return Ok(());
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut disagreements = 0u32;
    let mut checked = 0u32;
    for _ in 0..args.samples {
        let mut draw = || {
            Complex64::from_polar(
                rng.gen_range(0.0..1.5),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        };
        let rc = msstab::ReducedCoeffs::from_abcd(draw(), draw(), draw(), draw());
        let cc = cross_validate(&rc)?;
        checked += 1;
        if !cc.consistent {
            disagreements += 1;
            for f in &cc.findings {
                eprintln!("check: {f}");
            }
        }
    }
    println!("samples={checked} disagreements={disagreements}");
    if disagreements > 0 {
        return Err(Error::CriterionDisagreement {
            jury: f64::NAN,
            elaydi: f64::NAN,
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Classify(args) => cmd_classify(args),
        Command::Region(args) => cmd_region(args),
        Command::H0(args) => cmd_h0(args),
        Command::Spectral(args) => cmd_spectral(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Check(args) => cmd_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
