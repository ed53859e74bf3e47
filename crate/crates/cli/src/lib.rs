//! Command-line driver for the `llee` library.
//!
//! Exit codes: 0 success, 1 negative verdict, 2 usage or format error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use llee::chart::{
    labeled_to_dot, load_chart, load_labeled, save_chart, save_labeled, to_dot, ChartError,
};
use llee::collapse::{collapse_llee_traced, PairStrategy};
use llee::extract::{extract_solution, simplify};
use llee::interp::{interpret, interpret_labeled};
use llee::llee::{check_llee_witness, loop_elimination, EntrySelection, LeeStrategy, VertexOrder};
use llee::proof::{
    check_certificate, parse_steps, prove_equal_traced, write_certificate, Certificate,
};
use llee::props::{run_suite, ExprGen, SUITES};
use llee::{bisim, format_expr, parse_expr, Chart, LabeledChart, StarExpr};

#[derive(Parser, Debug)]
#[command(
    name = "llee",
    version,
    about = "Charts, LLEE-witnesses and equational proofs for 1-free star expressions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Output {
    /// Output file (stdout when absent)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Chart interpretation of an expression
    Interpret {
        #[arg(short, long)]
        expr: String,
        #[command(flatten)]
        out: Output,
    },
    /// Labeled chart interpretation of an expression
    Labeled {
        #[arg(short, long)]
        expr: String,
        #[command(flatten)]
        out: Output,
    },
    /// Loop elimination on a chart file
    Lee {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Entries::Maximal)]
        entries: Entries,
        #[arg(long, value_enum, default_value_t = Order::Ascending)]
        order: Order,
        /// Stop at the first dead end instead of backtracking
        #[arg(long)]
        no_backtrack: bool,
        /// Write the resulting witness here when LEE holds
        #[arg(short, long)]
        witness: Option<PathBuf>,
    },
    /// Validate a labeled chart as an LLEE-witness
    LleeCheck { file: PathBuf },
    /// Bisimilarity of two chart files
    Bisim { a: PathBuf, b: PathBuf },
    /// Collapse an LLEE-witness to its bisimulation quotient
    Collapse {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Strategy::Exhaustive)]
        strategy: Strategy,
        /// Write every intermediate witness (`.lchart` and `.dot`) into this directory
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Expression extracted at the start vertex of an LLEE-witness
    Extract {
        file: PathBuf,
        #[arg(long)]
        simplify: bool,
    },
    /// Certificate of e1 = e2, if their charts are bisimilar
    Prove {
        #[arg(long)]
        e1: String,
        #[arg(long)]
        e2: String,
        #[command(flatten)]
        out: Output,
    },
    /// Check a certificate file
    Check { file: PathBuf },
    /// Graphviz rendering of a (labeled) chart file
    Dot {
        file: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Run a property suite on generated expressions
    Test {
        /// Suite name, or `all`
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        cases: usize,
        #[arg(long, default_value_t = 12)]
        max_size: usize,
        #[arg(long, default_value_t = 3)]
        alphabet: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Entries {
    Maximal,
    FirstSingle,
    LastSingle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Order {
    Ascending,
    Descending,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Strategy {
    Exhaustive,
    Constructive,
}

/// A failure with its exit code.
struct Fail(i32, String);

type Res = Result<i32, Fail>;

fn usage(m: impl std::fmt::Display) -> Fail {
    Fail(2, m.to_string())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_to(out: &Output, text: &str, stdout: &mut dyn Write) -> Result<(), Fail> {
    match &out.output {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(usage),
    }
}

fn expr(s: &str) -> Result<StarExpr, Fail> {
    parse_expr(s).map_err(|e| usage(format!("{s:?}: {e}")))
}

fn chart_file(path: &Path) -> Result<Chart, Fail> {
    load_chart(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// A labeled chart file; a plain chart file is read with every transition a body step.
fn labeled_file(path: &Path) -> Result<LabeledChart, Fail> {
    let text = read(path)?;
    match load_labeled(&text) {
        Ok(lc) => Ok(lc),
        Err(ChartError::MissingLevel { .. }) => load_chart(&text)
            .map(LabeledChart::all_body)
            .map_err(|e| usage(format!("{}: {e}", path.display()))),
        Err(e) => Err(usage(format!("{}: {e}", path.display()))),
    }
}

fn witness_file(path: &Path) -> Result<LabeledChart, Fail> {
    let lc = labeled_file(path)?;
    let r = check_llee_witness(&lc);
    if r.ok {
        Ok(lc)
    } else {
        let lines: Vec<String> = r.violations.iter().map(|v| v.to_string()).collect();
        Err(Fail(
            1,
            format!("not an LLEE-witness:\n{}", lines.join("\n")),
        ))
    }
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(usage)?
    };
}

fn lee(
    file: &Path,
    entries: Entries,
    order: Order,
    no_backtrack: bool,
    witness: Option<PathBuf>,
    out: &mut dyn Write,
) -> Res {
    let c = chart_file(file)?;
    let strategy = LeeStrategy {
        entries: match entries {
            Entries::Maximal => EntrySelection::Maximal,
            Entries::FirstSingle => EntrySelection::FirstSingle,
            Entries::LastSingle => EntrySelection::LastSingle,
        },
        order: match order {
            Order::Ascending => VertexOrder::Ascending,
            Order::Descending => VertexOrder::Descending,
        },
        backtrack: !no_backtrack,
    };
    let r = loop_elimination(&c, &strategy).map_err(usage)?;
    for s in &r.trace {
        let ts: Vec<String> = s
            .entries
            .iter()
            .map(|t| format!("{} -{}-> {}", t.src, t.action, t.tgt))
            .collect();
        say!(
            out,
            "step {}: eliminate loop at {} entered by {}",
            s.step,
            s.vertex,
            ts.join(", ")
        );
    }
    if r.lee {
        say!(out, "LEE holds after {} eliminations", r.trace.len());
        if let Some(p) = witness {
            fs::write(&p, save_labeled(&r.witness))
                .map_err(|e| usage(format!("{}: {e}", p.display())))?;
        }
        Ok(0)
    } else {
        say!(
            out,
            "LEE fails after {} eliminations: {}",
            r.trace.len(),
            r.diagnosis.as_deref().unwrap_or("stuck")
        );
        Ok(1)
    }
}

fn collapse(
    file: &Path,
    strategy: Strategy,
    trace: Option<PathBuf>,
    o: &Output,
    out: &mut dyn Write,
) -> Res {
    let lc = witness_file(file)?;
    let strategy = match strategy {
        Strategy::Exhaustive => PairStrategy::Exhaustive,
        Strategy::Constructive => PairStrategy::Constructive,
    };
    let run = collapse_llee_traced(&lc, strategy).map_err(|e| Fail(1, e.to_string()))?;
    if let Some(dir) = trace {
        fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        let mut stages = vec![lc.clone()];
        stages.extend(run.steps.iter().map(|s| s.result.clone()));
        for (i, st) in stages.iter().enumerate() {
            let base = dir.join(format!("step{i:02}"));
            let mut text = String::new();
            if i > 0 {
                let s = &run.steps[i - 1];
                text.push_str(&format!(
                    "# connect {} through {} ({})\n",
                    s.w1, s.w2, s.cond
                ));
            }
            text.push_str(&save_labeled(st));
            let w = |ext: &str, body: &str| {
                let p = base.with_extension(ext);
                fs::write(&p, body).map_err(|e| usage(format!("{}: {e}", p.display())))
            };
            w("lchart", &text)?;
            w("dot", &labeled_to_dot(st))?;
        }
    }
    write_to(o, &save_labeled(&run.result), out)?;
    Ok(0)
}

fn prove(e1: &str, e2: &str, o: &Output, out: &mut dyn Write) -> Res {
    let (a, b) = (expr(e1)?, expr(e2)?);
    match prove_equal_traced(&a, &b).map_err(|e| Fail(1, e.to_string()))? {
        None => Err(Fail(1, "not bisimilar: no certificate".into())),
        Some(p) => {
            check_certificate(&p.certificate).map_err(|e| Fail(1, format!("internal: {e}")))?;
            let text = write_certificate(&p.certificate);
            match &o.output {
                Some(path) => {
                    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                    say!(
                        out,
                        "proved through {} ({} steps)",
                        format_expr(&p.middle),
                        p.certificate.len()
                    );
                }
                None => out.write_all(text.as_bytes()).map_err(usage)?,
            }
            Ok(0)
        }
    }
}

fn test(suite: &str, cfg: ExprGen, cases: usize, out: &mut dyn Write) -> Res {
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut code = 0;
    for n in names {
        let r = run_suite(n, cfg, cases).map_err(usage)?;
        write!(out, "{r}").map_err(usage)?;
        if !r.passed() {
            code = 1;
        }
    }
    Ok(code)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Res {
    match cmd {
        Command::Interpret { expr: e, out: o } => {
            write_to(&o, &save_chart(&interpret(&expr(&e)?).0), out)?;
            Ok(0)
        }
        Command::Labeled { expr: e, out: o } => {
            write_to(&o, &save_labeled(&interpret_labeled(&expr(&e)?)), out)?;
            Ok(0)
        }
        Command::Lee {
            file,
            entries,
            order,
            no_backtrack,
            witness,
        } => lee(&file, entries, order, no_backtrack, witness, out),
        Command::LleeCheck { file } => {
            let r = check_llee_witness(&labeled_file(&file)?);
            if r.ok {
                say!(out, "valid LLEE-witness");
                Ok(0)
            } else {
                say!(out, "invalid: {} violations", r.violations.len());
                for v in &r.violations {
                    say!(out, "  {v}");
                }
                Ok(1)
            }
        }
        Command::Bisim { a, b } => {
            let (c1, c2) = (chart_file(&a)?, chart_file(&b)?);
            match bisim::largest_bisimulation(&c1, &c2) {
                Some(rel) => {
                    say!(out, "bisimilar");
                    for (v, w) in &rel.pairs {
                        say!(out, "  {v} ~ {w}");
                    }
                    Ok(0)
                }
                None => {
                    say!(out, "not bisimilar");
                    Ok(1)
                }
            }
        }
        Command::Collapse {
            file,
            strategy,
            trace,
            out: o,
        } => collapse(&file, strategy, trace, &o, out),
        Command::Extract {
            file,
            simplify: simp,
        } => {
            let lc = witness_file(&file)?;
            let e =
                extract_solution(&lc, lc.chart().start()).map_err(|e| Fail(1, e.to_string()))?;
            let e = if simp { simplify(&e).0 } else { e };
            say!(out, "{}", format_expr(&e));
            Ok(0)
        }
        Command::Prove { e1, e2, out: o } => prove(&e1, &e2, &o, out),
        Command::Check { file } => {
            let text = read(&file)?;
            let (steps, goal) =
                parse_steps(&text).map_err(|e| usage(format!("{}: {e}", file.display())))?;
            let Some(goal) = goal else {
                return Err(Fail(
                    1,
                    format!(
                        "rejected: step {}: no goal line, certificate truncated",
                        steps.len()
                    ),
                ));
            };
            let cert = Certificate { steps, goal };
            match check_certificate(&cert) {
                Ok(()) => {
                    say!(
                        out,
                        "ok: {} steps prove {} = {}",
                        cert.len(),
                        format_expr(&cert.goal.lhs),
                        format_expr(&cert.goal.rhs)
                    );
                    Ok(0)
                }
                Err(e) => Err(Fail(1, format!("rejected: {e}"))),
            }
        }
        Command::Dot { file, out: o } => {
            let text = read(&file)?;
            let dot = match load_labeled(&text) {
                Ok(lc) => labeled_to_dot(&lc),
                Err(_) => to_dot(
                    &load_chart(&text).map_err(|e| usage(format!("{}: {e}", file.display())))?,
                ),
            };
            write_to(&o, &dot, out)?;
            Ok(0)
        }
        Command::Test {
            suite,
            seed,
            cases,
            max_size,
            alphabet,
        } => {
            if alphabet == 0 {
                return Err(usage("--alphabet must be at least 1"));
            }
            let cfg = ExprGen {
                seed,
                max_size,
                alphabet_size: alphabet,
            };
            test(&suite, cfg, cases, out)
        }
    }
}

/// Accepts the single-dash spellings `-e1` and `-e2`.
fn normalise(argv: impl IntoIterator<Item = String>) -> Vec<String> {
    argv.into_iter()
        .map(|a| match a.as_str() {
            "-e1" | "-e2" => format!("-{a}"),
            _ => a,
        })
        .collect()
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run(
    argv: impl IntoIterator<Item = String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(normalise(argv)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "{msg}");
            code
        }
    }
}
