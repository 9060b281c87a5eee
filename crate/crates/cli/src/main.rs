use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrestenson::approx1d::{lemma33_construct, lemma33_verify, Lemma33Options, Lemma33Request, Lemma33Result};
use chrestenson::approx2d::{
    lemma34_construct, lemma34_verify, lemma35_construct, lemma35_verify, Lemma34Options, Lemma34Request, Lemma34Result,
    Lemma35Options, Lemma35Request, Lemma35Result, Schedule,
};
use chrestenson::cert::Certificate;
use chrestenson::grid::StepFunction;
use chrestenson::num::{format_rational, parse_rational, Rational};
use chrestenson::transform::{fct_forward, fct_inverse};
use chrestenson::universal::{
    build_universal, build_weight, greedy_select, monitor_convergence, trace_csv, GreedySelection, SparseStep,
    StepFunctionEnumerator, UniversalOptions, UniversalSeries, WeightSynthesis,
};
use chrestenson::walsh::{walsh_on_cell, Order, WalshIndex};
use chrestenson::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

const EXIT_CERT: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "chrestenson", version, about = "Generalized Walsh systems and certified universal double series")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    order: Option<u32>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    #[arg(long, global = true, value_enum)]
    schedule: Option<ScheduleArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Certificate,
    Fast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    Strict,
    Compact,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exponents of ψ_n on the cells of a rank, n = 0..=n_max.
    WalshTable {
        #[arg(long)]
        n_max: u64,
        #[arg(long)]
        rank: u32,
    },
    /// Forward transform of a 1D step function file.
    Fct {
        #[arg(long)]
        input: PathBuf,
    },
    Lemma33(LemmaArgs),
    Lemma34(LemmaArgs),
    Lemma35(LemmaArgs),
    UniversalBuild {
        #[arg(long)]
        blocks: Option<u32>,
        #[arg(long)]
        m_max: Option<u32>,
        #[arg(long)]
        d_max: Option<u32>,
        #[arg(long)]
        h_max: Option<u32>,
    },
    UniversalWeight {
        #[arg(long)]
        eps: Option<String>,
    },
    UniversalApprox {
        /// Target as a sparse step function file.
        #[arg(long, conflicts_with = "planted")]
        target: Option<PathBuf>,
        /// Target as the sum of enumerated functions, e.g. "3,4,5".
        #[arg(long)]
        planted: Option<String>,
        #[arg(long)]
        q_max: Option<u32>,
    },
    UniversalMonitor,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long)]
    request: PathBuf,
    /// Re-verify a stored result instead of constructing one.
    #[arg(long)]
    verify: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    order: u32,
    mode: Mode,
    schedule: String,
    blocks: u32,
    m_max: u32,
    d_max: u32,
    h_max: u32,
    q_max: u32,
    retry_budget: u32,
    seed: u64,
    eps: String,
    out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            order: 2,
            mode: Mode::Certificate,
            schedule: "strict".into(),
            blocks: 2,
            m_max: 11,
            d_max: 1,
            h_max: 1,
            q_max: 1,
            retry_budget: 4,
            seed: 0,
            eps: "1/4".into(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), Error> {
        Order::new(self.order)?;
        let budgets = [self.blocks, self.m_max, self.d_max, self.h_max, self.q_max, self.retry_budget];
        if budgets.contains(&0) {
            return Err(Error::InvalidArgument("budgets must be positive".into()));
        }
        self.schedule.parse::<Schedule>()?;
        parse_rational(&self.eps)?;
        Ok(())
    }

    fn schedule(&self) -> Schedule {
        self.schedule.parse().unwrap_or_default()
    }

    fn options(&self) -> UniversalOptions {
        let mut o = UniversalOptions::default().with_schedule(self.schedule());
        o.lemma35.lemma34.lemma33.retry_budget = self.retry_budget;
        o
    }
}

/// Every artifact records how it was produced.
#[derive(Serialize, Deserialize)]
struct Artifact<T> {
    order: u32,
    mode: Mode,
    schedule: Schedule,
    body: T,
}

fn fail(e: Error) -> u8 {
    eprintln!("error: {e}");
    match e {
        Error::Budget(_) => EXIT_BUDGET,
        Error::Certificate(_) => EXIT_CERT,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => ExitCode::from(fail(e)),
    }
}

fn load_config(g: &Global) -> Result<RunConfig, Error> {
    let mut cfg = match &g.config {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(a) = g.order {
        cfg.order = a;
    }
    if let Some(m) = g.mode {
        cfg.mode = m;
    }
    if let Some(s) = g.schedule {
        cfg.schedule = match s {
            ScheduleArg::Strict => "strict",
            ScheduleArg::Compact => "compact",
        }
        .into();
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if g.threads == Some(0) {
        return Err(Error::InvalidArgument("--threads must be positive".into()));
    }
    Ok(cfg)
}

fn read(p: &Path) -> Result<String, Error> {
    fs::read_to_string(p).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", p.display())))
}

fn load<T: DeserializeOwned>(p: &Path) -> Result<T, Error> {
    Ok(serde_json::from_str(&read(p)?)?)
}

fn write(cfg: &RunConfig, name: &str, body: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(&cfg.out)?;
    let p = cfg.out.join(name);
    fs::write(&p, body)?;
    Ok(p)
}

fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, v: &T) -> Result<PathBuf, Error> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write(cfg, name, &s)
}

fn artifact<T>(cfg: &RunConfig, series: &UniversalSeries, body: T) -> Artifact<T> {
    Artifact { order: series.order, mode: cfg.mode, schedule: series.schedule, body }
}

fn prerequisite<T: DeserializeOwned>(cfg: &RunConfig, name: &str, step: &str) -> Result<T, Error> {
    let p = cfg.out.join(name);
    if !p.exists() {
        return Err(Error::InvalidArgument(format!("missing {} (run {step} first)", p.display())));
    }
    let a: Artifact<T> = load(&p)?;
    Ok(a.body)
}

fn verdict(cert: &Certificate) -> u8 {
    if cert.passed() {
        println!("certificate: pass");
        0
    } else {
        for f in cert.failures() {
            println!("failed: {f}");
        }
        EXIT_CERT
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let cfg = load_config(&cli.global)?;
    cfg.validate()?;
    match cli.cmd {
        Cmd::WalshTable { n_max, rank } => walsh_table(&cfg, n_max, rank),
        Cmd::Fct { input } => fct(&cfg, &input),
        Cmd::Lemma33(args) => lemma33(&cfg, &args),
        Cmd::Lemma34(args) => lemma34(&cfg, &args),
        Cmd::Lemma35(args) => lemma35(&cfg, &args),
        Cmd::UniversalBuild { blocks, m_max, d_max, h_max } => {
            let mut cfg = cfg;
            cfg.blocks = blocks.unwrap_or(cfg.blocks);
            cfg.m_max = m_max.unwrap_or(cfg.m_max);
            cfg.d_max = d_max.unwrap_or(cfg.d_max);
            cfg.h_max = h_max.unwrap_or(cfg.h_max);
            cfg.validate()?;
            universal_build(&cfg)
        }
        Cmd::UniversalWeight { eps } => {
            let mut cfg = cfg;
            cfg.eps = eps.unwrap_or(cfg.eps);
            cfg.validate()?;
            universal_weight(&cfg)
        }
        Cmd::UniversalApprox { target, planted, q_max } => {
            let mut cfg = cfg;
            cfg.q_max = q_max.unwrap_or(cfg.q_max);
            cfg.validate()?;
            universal_approx(&cfg, target.as_deref(), planted.as_deref())
        }
        Cmd::UniversalMonitor => universal_monitor(&cfg),
    }
}

fn walsh_table(cfg: &RunConfig, n_max: u64, rank: u32) -> Result<u8, Error> {
    let a = cfg.order;
    let cells = (a as u64).checked_pow(rank).filter(|&c| c <= 1 << 20).ok_or_else(|| Error::InvalidArgument("rank too large".into()))?;
    let mut out = String::from("n");
    for i in 0..cells {
        out.push_str(&format!(",cell{i}"));
    }
    out.push('\n');
    for n in 0..=n_max {
        let k = WalshIndex::new(a, n);
        out.push_str(&n.to_string());
        for i in 0..cells {
            out.push_str(&format!(",{}", walsh_on_cell(&k, rank, i)?));
        }
        out.push('\n');
    }
    let p = write(cfg, "walsh_table.csv", &out)?;
    println!("wrote {}", p.display());
    Ok(0)
}

fn fct(cfg: &RunConfig, input: &Path) -> Result<u8, Error> {
    let f = StepFunction::from_json(&read(input)?)?;
    if f.dim != chrestenson::grid::Dim::One {
        return Err(Error::Shape("fct expects a 1D step function".into()));
    }
    let a = f.a;
    let mut out = String::new();
    match cfg.mode {
        Mode::Certificate => {
            let c = fct_forward(a, &f.values)?;
            let back = fct_inverse(a, &c)?;
            out.push_str("k,value\n");
            for (k, v) in c.iter().enumerate() {
                out.push_str(&format!("{k},{v}\n"));
            }
            println!("round trip exact: {}", back == f.values);
        }
        Mode::Fast => {
            let v: Vec<Complex64> = f.values.iter().map(|x| x.to_complex()).collect();
            let c = fct_forward(a, &v)?;
            let back = fct_inverse(a, &c)?;
            let err = back.iter().zip(&v).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            out.push_str("k,re,im\n");
            for (k, z) in c.iter().enumerate() {
                out.push_str(&format!("{k},{:.17e},{:.17e}\n", z.re, z.im));
            }
            println!("round trip max error: {err:e}");
        }
    }
    let p = write(cfg, "fct.csv", &out)?;
    println!("wrote {}", p.display());
    Ok(0)
}

fn lemma33_opts(cfg: &RunConfig) -> Lemma33Options {
    Lemma33Options { retry_budget: cfg.retry_budget, ..Lemma33Options::default() }
}

fn lemma34_opts(cfg: &RunConfig) -> Lemma34Options {
    Lemma34Options { lemma33: lemma33_opts(cfg), schedule: cfg.schedule(), ..Lemma34Options::default() }
}

fn lemma33(cfg: &RunConfig, args: &LemmaArgs) -> Result<u8, Error> {
    let req: Lemma33Request = load(&args.request)?;
    let opts = lemma33_opts(cfg);
    let cert = match &args.verify {
        Some(p) => {
            let res: Lemma33Result = load(p)?;
            lemma33_verify(&req.f, &req.eps, &req.n0, &res.p, &res.e, &opts)
        }
        None => {
            let res = lemma33_construct(&req, &opts)?;
            write_json(cfg, "lemma33_result.json", &res)?;
            res.certificate
        }
    };
    write_json(cfg, "lemma33_certificate.json", &cert)?;
    Ok(verdict(&cert))
}

fn lemma34(cfg: &RunConfig, args: &LemmaArgs) -> Result<u8, Error> {
    let req: Lemma34Request = load(&args.request)?;
    let opts = lemma34_opts(cfg);
    let cert = match &args.verify {
        Some(p) => lemma34_verify(&req, &load::<Lemma34Result>(p)?, &opts),
        None => {
            let res = lemma34_construct(&req, &opts)?;
            write_json(cfg, "lemma34_result.json", &res)?;
            res.certificate
        }
    };
    write_json(cfg, "lemma34_certificate.json", &cert)?;
    Ok(verdict(&cert))
}

fn lemma35(cfg: &RunConfig, args: &LemmaArgs) -> Result<u8, Error> {
    let req: Lemma35Request = load(&args.request)?;
    let opts = Lemma35Options { lemma34: lemma34_opts(cfg), ..Lemma35Options::default() };
    let cert = match &args.verify {
        Some(p) => lemma35_verify(&req, &load::<Lemma35Result>(p)?, &opts),
        None => {
            let res = lemma35_construct(&req, &opts)?;
            write_json(cfg, "lemma35_result.json", &res)?;
            res.certificate
        }
    };
    write_json(cfg, "lemma35_certificate.json", &cert)?;
    Ok(verdict(&cert))
}

fn universal_build(cfg: &RunConfig) -> Result<u8, Error> {
    let en = StepFunctionEnumerator::new(cfg.order, cfg.m_max, cfg.d_max, cfg.h_max)?;
    let series = build_universal(&en, cfg.blocks, &cfg.options())?;
    let p = write_json(cfg, "series.json", &artifact(cfg, &series, &series))?;
    println!("wrote {} ({} blocks)", p.display(), series.blocks.len());
    Ok(verdict(&series.certificate))
}

fn universal_weight(cfg: &RunConfig) -> Result<u8, Error> {
    let series: UniversalSeries = prerequisite(cfg, "series.json", "universal-build")?;
    let eps: Rational = parse_rational(&cfg.eps)?;
    let w = build_weight(&series, &eps)?;
    let p = write_json(cfg, "weight.json", &artifact(cfg, &series, &w))?;
    println!("wrote {} (n0 = {}, |mu != 1| = {})", p.display(), w.n0, format_rational(&(&w.omega.last().unwrap().measure - &w.omega[0].measure)));
    Ok(verdict(&w.certificate))
}

fn universal_approx(cfg: &RunConfig, target: Option<&Path>, planted: Option<&str>) -> Result<u8, Error> {
    let series: UniversalSeries = prerequisite(cfg, "series.json", "universal-build")?;
    let w: WeightSynthesis = prerequisite(cfg, "weight.json", "universal-weight")?;
    let f = match (target, planted) {
        (Some(p), _) => load::<SparseStep>(p)?,
        (None, Some(list)) => {
            let en = &series.enumerator;
            let mut f = SparseStep::zero(en.order, en.m_max);
            for part in list.split(',') {
                let s: u32 = part.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad index {part}")))?;
                for c in en.get(&s.into())?.cells {
                    match f.cells.iter_mut().find(|d| d.index == c.index) {
                        Some(d) => d.value += c.value,
                        None => f.cells.push(c),
                    }
                }
            }
            f.cells.retain(|c| !num_traits::Zero::is_zero(&c.value));
            f.cells.sort_by_key(|c| c.index);
            f
        }
        (None, None) => return Err(Error::InvalidArgument("give --target or --planted".into())),
    };
    let sel = greedy_select(&series, &w, &f, cfg.q_max)?;
    let p = write_json(cfg, "selection.json", &artifact(cfg, &series, &sel))?;
    println!("wrote {} (indices {:?})", p.display(), sel.indices());
    Ok(verdict(&sel.certificate))
}

fn universal_monitor(cfg: &RunConfig) -> Result<u8, Error> {
    let series: UniversalSeries = prerequisite(cfg, "series.json", "universal-build")?;
    let sel: GreedySelection = prerequisite(cfg, "selection.json", "universal-approx")?;
    let rows = monitor_convergence(&series, &sel)?;
    let p = write(cfg, "trace.csv", &trace_csv(&rows))?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    println!("wrote {} ({} rows, {failed} failing)", p.display(), rows.len());
    Ok(if failed == 0 { 0 } else { EXIT_CERT })
}
