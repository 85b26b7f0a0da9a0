//! Command-line front end: configuration resolution (defaults, optional
//! key=value config file, flags), check selection, and text/JSON report
//! emission with decimal-string residuals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::model::{
    default_tol, sample_a, sample_cbar, sample_e1, sample_e2, sample_s, sample_z, ModelParams,
};
use crate::numkit::PrecComplex;
use crate::verify::{run_groups, CheckReport, GROUPS};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(
    name = "ybverify",
    version,
    about = "Numerical certification suite for a q-deformed integrable R-matrix and its algebraic geometry"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a verification group (or the whole suite).
    Verify {
        target: VerifyTarget,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Sample one point of a curve or surface and print its coordinates.
    Sample {
        variety: SampleTarget,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run the whole suite and emit the aggregated report.
    Report {
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VerifyTarget {
    All,
    Ybe,
    Identities,
    Isogeny,
    Degenerations,
    Genus,
    Invariants,
    #[value(name = "appendix-b")]
    AppendixB,
    Transfer,
}

impl VerifyTarget {
    fn groups(self) -> Vec<&'static str> {
        match self {
            VerifyTarget::All => GROUPS.to_vec(),
            VerifyTarget::Ybe => vec!["ybe"],
            VerifyTarget::Identities => vec!["identities"],
            VerifyTarget::Isogeny => vec!["isogeny"],
            VerifyTarget::Degenerations => vec!["degenerations"],
            VerifyTarget::Genus => vec!["genus"],
            VerifyTarget::Invariants => vec!["invariants"],
            VerifyTarget::AppendixB => vec!["appendix-b"],
            VerifyTarget::Transfer => vec!["transfer"],
        }
    }

    fn name(self) -> &'static str {
        match self {
            VerifyTarget::All => "all",
            VerifyTarget::Ybe => "ybe",
            VerifyTarget::Identities => "identities",
            VerifyTarget::Isogeny => "isogeny",
            VerifyTarget::Degenerations => "degenerations",
            VerifyTarget::Genus => "genus",
            VerifyTarget::Invariants => "invariants",
            VerifyTarget::AppendixB => "appendix-b",
            VerifyTarget::Transfer => "transfer",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SampleTarget {
    E1,
    S,
    E2,
    Cbar,
    A,
    Z,
}

#[derive(Args, Debug, Default)]
struct CommonOpts {
    /// Real part of q.
    #[arg(long)]
    q_re: Option<f64>,
    /// Imaginary part of q.
    #[arg(long)]
    q_im: Option<f64>,
    /// Real part of the coupling g.
    #[arg(long)]
    g_re: Option<f64>,
    /// Imaginary part of the coupling g.
    #[arg(long)]
    g_im: Option<f64>,
    /// Real part of a direct U override (mutually exclusive with g).
    #[arg(long)]
    u_re: Option<f64>,
    /// Imaginary part of a direct U override (mutually exclusive with g).
    #[arg(long)]
    u_im: Option<f64>,
    /// Working precision in bits (53, 128, 256 or 512).
    #[arg(long)]
    precision: Option<u32>,
    /// Residual tolerance override.
    #[arg(long)]
    tol: Option<f64>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sampled check.
    #[arg(long)]
    trials: Option<usize>,
    /// Degeneration-locus branch (+1 or -1) to restrict to.
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<i8>,
    /// Emit JSON instead of the text table.
    #[arg(long)]
    json: bool,
    /// Flat key=value configuration file (command line overrides it).
    #[arg(long)]
    config: Option<String>,
    /// Also write the JSON report to this path.
    #[arg(long)]
    out: Option<String>,
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub q: (f64, f64),
    pub g: (f64, f64),
    pub u_override: Option<(f64, f64)>,
    pub precision_bits: u32,
    pub tolerance: f64,
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<String>,
    pub json: bool,
    pub epsilon: Option<i8>,
    pub out: Option<String>,
}

fn parse_config_file(path: &str) -> Result<BTreeMap<String, String>, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected key=value", lineno + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn resolve(opts: &CommonOpts, checks: Vec<String>) -> Result<RunConfig, String> {
    let file = match &opts.config {
        Some(p) => parse_config_file(p)?,
        None => BTreeMap::new(),
    };
    let get_f64 = |key: &str| -> Result<Option<f64>, String> {
        match file.get(key) {
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| format!("config key {key}: not a number: {v}")),
            None => Ok(None),
        }
    };
    let q_re = opts.q_re.or(get_f64("q-re")?).unwrap_or(2.0);
    let q_im = opts.q_im.or(get_f64("q-im")?).unwrap_or(0.0);
    let g_given = opts.g_re.is_some()
        || opts.g_im.is_some()
        || file.contains_key("g-re")
        || file.contains_key("g-im");
    let g_re = opts.g_re.or(get_f64("g-re")?).unwrap_or(0.6);
    let g_im = opts.g_im.or(get_f64("g-im")?).unwrap_or(0.0);
    let u_re = opts.u_re.or(get_f64("u-re")?);
    let u_im = opts.u_im.or(get_f64("u-im")?);
    let u_override = match (u_re, u_im) {
        (None, None) => None,
        (r, i) => Some((r.unwrap_or(0.0), i.unwrap_or(0.0))),
    };
    if u_override.is_some() && g_given {
        return Err(
            "give either g (--g-re/--g-im) or a U override (--u-re/--u-im), not both".into(),
        );
    }
    let precision_bits = opts
        .precision
        .or(match file.get("precision") {
            Some(v) => Some(
                v.parse::<u32>()
                    .map_err(|_| format!("config key precision: not an integer: {v}"))?,
            ),
            None => None,
        })
        .unwrap_or(53);
    if ![53, 128, 256, 512].contains(&precision_bits) {
        return Err(format!(
            "precision must be one of 53, 128, 256, 512 (got {precision_bits})"
        ));
    }
    let tolerance = opts
        .tol
        .or(get_f64("tol")?)
        .unwrap_or_else(|| default_tol(precision_bits));
    let seed = match opts.seed {
        Some(s) => s,
        None => match file.get("seed") {
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| format!("config key seed: not an integer: {v}"))?,
            None => 0,
        },
    };
    let trials = match opts.trials {
        Some(t) => t,
        None => match file.get("trials") {
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| format!("config key trials: not an integer: {v}"))?,
            None => 8,
        },
    };
    if trials < 1 {
        return Err("trials must be at least 1".into());
    }
    let epsilon = match opts.epsilon {
        Some(e) => Some(e),
        None => match file.get("epsilon") {
            Some(v) => Some(
                v.parse::<i8>()
                    .map_err(|_| format!("config key epsilon: not an integer: {v}"))?,
            ),
            None => None,
        },
    };
    if let Some(e) = epsilon {
        if e != 1 && e != -1 {
            return Err(format!("epsilon must be +1 or -1 (got {e})"));
        }
    }
    Ok(RunConfig {
        q: (q_re, q_im),
        g: (g_re, g_im),
        u_override,
        precision_bits,
        tolerance,
        seed,
        trials,
        checks,
        json: opts.json,
        epsilon,
        out: opts.out.clone(),
    })
}

fn build_params(cfg: &RunConfig) -> Result<ModelParams, String> {
    let prec = cfg.precision_bits;
    let q = PrecComplex::from_f64(cfg.q.0, cfg.q.1, prec);
    let mut mp = match cfg.u_override {
        Some((ur, ui)) => ModelParams::from_q_u(q, PrecComplex::from_f64(ur, ui, prec), prec)
            .map_err(|e| e.to_string())?,
        None => ModelParams::new(q, PrecComplex::from_f64(cfg.g.0, cfg.g.1, prec), prec)
            .map_err(|e| e.to_string())?,
    };
    mp.tol = cfg.tolerance;
    Ok(mp)
}

fn config_json(cfg: &RunConfig) -> Value {
    let mut m = Map::new();
    m.insert("q-re".into(), json!(cfg.q.0));
    m.insert("q-im".into(), json!(cfg.q.1));
    if let Some((ur, ui)) = cfg.u_override {
        m.insert("u-re".into(), json!(ur));
        m.insert("u-im".into(), json!(ui));
    } else {
        m.insert("g-re".into(), json!(cfg.g.0));
        m.insert("g-im".into(), json!(cfg.g.1));
    }
    m.insert("precision".into(), json!(cfg.precision_bits));
    m.insert("tol".into(), json!(cfg.tolerance));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("trials".into(), json!(cfg.trials));
    if let Some(e) = cfg.epsilon {
        m.insert("epsilon".into(), json!(e));
    }
    m.insert("checks".into(), json!(cfg.checks));
    Value::Object(m)
}

fn reports_json(cfg: &RunConfig, reports: &[CheckReport]) -> Value {
    let passed = reports.iter().filter(|r| r.pass).count();
    let items: Vec<Value> = reports
        .iter()
        .map(|r| {
            let meta: Map<String, Value> = r
                .metadata
                .iter()
                .map(|(k, v)| (k.clone(), json!(v)))
                .collect();
            json!({
                "name": r.name,
                "pass": r.pass,
                "max_residual": format!("{:e}", r.max_residual()),
                "tolerance": format!("{:e}", r.tolerance),
                "metadata": Value::Object(meta),
            })
        })
        .collect();
    json!({
        "version": VERSION,
        "config": config_json(cfg),
        "reports": items,
        "summary": {
            "total": reports.len(),
            "passed": passed,
            "failed": reports.len() - passed,
        },
    })
}

fn text_table(reports: &[CheckReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(4)
        .max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:<4}  {:>13}  {:>9}",
        "check", "", "max residual", "tolerance"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:<4}  {:>13.3e}  {:>9.1e}",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.max_residual(),
            r.tolerance
        );
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    let _ = writeln!(
        out,
        "{} checks, {} passed, {} failed",
        reports.len(),
        passed,
        reports.len() - passed
    );
    out
}

fn emit(cfg: &RunConfig, reports: &[CheckReport]) -> i32 {
    let payload = reports_json(cfg, reports);
    if cfg.json {
        println!("{}", serde_json::to_string_pretty(&payload).unwrap());
    } else {
        print!("{}", text_table(reports));
    }
    if let Some(path) = &cfg.out {
        if let Err(e) = std::fs::write(path, serde_json::to_string_pretty(&payload).unwrap()) {
            eprintln!("error: cannot write {path}: {e}");
            return 1;
        }
    }
    if reports.iter().all(|r| r.pass) {
        0
    } else {
        1
    }
}

fn fmt_c(v: &PrecComplex) -> Value {
    json!({
        "re": format!("{:e}", v.real().to_f64()),
        "im": format!("{:e}", v.imag().to_f64()),
    })
}

fn run_sample(variety: SampleTarget, cfg: &RunConfig) -> Result<Value, String> {
    let mp = build_params(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let err = |e: crate::model::ModelError| e.to_string();
    let point = match variety {
        SampleTarget::E1 => {
            let sp = sample_e1(&mp, &mut rng, None, None, 0).map_err(err)?;
            json!({
                "variety": "e1",
                "xplus": fmt_c(&sp.xplus),
                "xminus": fmt_c(&sp.xminus),
                "gamma": fmt_c(&sp.gamma),
            })
        }
        SampleTarget::S => {
            let p = sample_s(&mp, &mut rng, None, None).map_err(err)?;
            json!({
                "variety": "s",
                "x": fmt_c(&p.x), "y": fmt_c(&p.y), "z": fmt_c(&p.z), "w": fmt_c(&p.w),
            })
        }
        SampleTarget::E2 => {
            let p = sample_e2(&mp, &mut rng, None);
            json!({ "variety": "e2", "y1": fmt_c(&p.y1), "y2": fmt_c(&p.y2) })
        }
        SampleTarget::Cbar => {
            let p = sample_cbar(&mp, &mut rng, None).map_err(err)?;
            json!({ "variety": "cbar", "x": fmt_c(&p.x), "y": fmt_c(&p.y) })
        }
        SampleTarget::A => {
            let p = sample_a(&mp, &mut rng).map_err(err)?;
            json!({
                "variety": "a",
                "a": fmt_c(&p.a), "b": fmt_c(&p.b), "bb": fmt_c(&p.bb), "g": fmt_c(&p.g),
            })
        }
        SampleTarget::Z => {
            let p = sample_z(&mp, &mut rng).map_err(err)?;
            json!({
                "variety": "z",
                "a": fmt_c(&p.a), "b": fmt_c(&p.b), "bb": fmt_c(&p.bb), "c": fmt_c(&p.c),
            })
        }
    };
    Ok(point)
}

/// Entry point used by the binary: parses arguments, runs the requested
/// command, and returns the process exit code (0 all pass, 1 failures,
/// 2 usage errors).
pub fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.cmd {
        Cmd::Verify { target, opts } => {
            let cfg = match resolve(&opts, vec![target.name().to_string()]) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            let mp = match build_params(&cfg) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            let groups = target.groups();
            let reports = run_groups(&mp, cfg.seed, cfg.trials, &groups, cfg.epsilon);
            emit(&cfg, &reports)
        }
        Cmd::Report { opts } => {
            let cfg = match resolve(&opts, vec!["all".to_string()]) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            let mp = match build_params(&cfg) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            let reports = run_groups(&mp, cfg.seed, cfg.trials, &GROUPS, cfg.epsilon);
            emit(&cfg, &reports)
        }
        Cmd::Sample { variety, opts } => {
            let cfg = match resolve(&opts, vec![]) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            match run_sample(variety, &cfg) {
                Ok(v) => {
                    println!("{}", serde_json::to_string_pretty(&v).unwrap());
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_args(args: &[&str]) -> Result<RunConfig, String> {
        let cli = Cli::try_parse_from(args).map_err(|e| e.to_string())?;
        match cli.cmd {
            Cmd::Verify { target, opts } => resolve(&opts, vec![target.name().to_string()]),
            Cmd::Report { opts } => resolve(&opts, vec!["all".into()]),
            Cmd::Sample { opts, .. } => resolve(&opts, vec![]),
        }
    }

    #[test]
    fn parses_verify_subcommand() {
        let cfg = resolve_args(&[
            "ybverify",
            "verify",
            "isogeny",
            "--q-re",
            "2",
            "--g-re",
            "0.6",
            "--precision",
            "256",
        ])
        .unwrap();
        assert_eq!(cfg.checks, vec!["isogeny"]);
        assert_eq!(cfg.precision_bits, 256);
        assert_eq!(cfg.q, (2.0, 0.0));
        assert_eq!(cfg.g, (0.6, 0.0));
        assert!(cfg.u_override.is_none());
    }

    #[test]
    fn rejects_u_and_g_together() {
        let err = resolve_args(&["ybverify", "verify", "all", "--u-re", "17", "--g-re", "0.6"])
            .unwrap_err();
        assert!(err.contains("not both"), "{err}");
    }

    #[test]
    fn rejects_bad_precision_and_epsilon() {
        assert!(resolve_args(&["ybverify", "verify", "all", "--precision", "64"]).is_err());
        assert!(resolve_args(&["ybverify", "verify", "all", "--epsilon", "2"]).is_err());
        assert!(resolve_args(&["ybverify", "verify", "all", "--epsilon", "-1"]).is_ok());
    }

    #[test]
    fn config_file_with_cli_override() {
        let dir = std::env::temp_dir().join("ybverify-cli-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "# demo\nq-re = 3\nseed = 7\ntrials = 4\n").unwrap();
        let cfg = resolve_args(&[
            "ybverify",
            "verify",
            "all",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "42",
        ])
        .unwrap();
        assert_eq!(cfg.q.0, 3.0);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.trials, 4);
    }

    #[test]
    fn config_round_trip_through_json_block() {
        let cfg = resolve_args(&[
            "ybverify", "verify", "all", "--q-re", "2", "--g-re", "0.6", "--seed", "42",
        ])
        .unwrap();
        let j = config_json(&cfg);
        let mut args = vec!["ybverify".to_string(), "verify".into(), "all".into()];
        for (k, flag) in [
            ("q-re", "--q-re"),
            ("q-im", "--q-im"),
            ("g-re", "--g-re"),
            ("g-im", "--g-im"),
        ] {
            args.push(flag.into());
            args.push(j[k].to_string());
        }
        args.push("--precision".into());
        args.push(j["precision"].to_string());
        args.push("--tol".into());
        args.push(j["tol"].to_string());
        args.push("--seed".into());
        args.push(j["seed"].to_string());
        args.push("--trials".into());
        args.push(j["trials"].to_string());
        let argv: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        let cfg2 = resolve_args(&argv).unwrap();
        assert_eq!(cfg, cfg2);
    }

    #[test]
    fn json_schema_and_exit_semantics() {
        let cfg = resolve_args(&["ybverify", "verify", "invariants", "--json"]).unwrap();
        let mp = build_params(&cfg).unwrap();
        let reports = run_groups(&mp, cfg.seed, cfg.trials, &["invariants"], None);
        let j = reports_json(&cfg, &reports);
        assert!(j["version"].is_string());
        assert!(j["config"].is_object());
        assert!(j["reports"].is_array());
        assert_eq!(
            j["summary"]["total"].as_u64().unwrap(),
            reports.len() as u64
        );
        assert!(j["reports"][0]["max_residual"].is_string());
        assert!(reports.iter().all(|r| r.pass));
    }
}
