use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use aomdd::{
    compile_be, compile_search, count_solutions, deserialize, equivalent, evaluate, induced_width, min_fill_ordering,
    mpe, parse_dimacs_cnf, parse_evidence, parse_uai, serialize, sum_over, to_dot, Aomdd, CompileOptions, Evidence,
    GraphicalModel, NoPruning, Ordering, PrimalGraph, PseudoTree,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aomdd", version, about = "Compile graphical models into AND/OR decision diagrams and query them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a model and write the canonical diagram.
    Compile(CompileArgs),
    /// Compile a model and print only the statistics report.
    Stats(CompileArgs),
    /// Answer a query on a compiled diagram.
    Query(QueryArgs),
    /// Exit 0 when two compiled diagrams are equivalent, 1 when not.
    Equiv { a: PathBuf, b: PathBuf },
    /// Render a compiled diagram as Graphviz DOT.
    Dot {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Uai,
    Cnf,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Method {
    Search,
    Be,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum OrderKind {
    Minfill,
    Given,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Prune {
    None,
    Bcp,
}

#[derive(Args)]
struct CompileArgs {
    input: PathBuf,
    /// Input format; guessed from the file extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_enum, default_value = "search")]
    method: Method,
    /// Variable ordering; `given` reads --order-file.
    #[arg(long, value_enum, default_value = "minfill")]
    order: OrderKind,
    /// One line of whitespace-separated variable ids.
    #[arg(long)]
    order_file: Option<PathBuf>,
    /// Use the chain pseudo tree of the ordering (MDD mode).
    #[arg(long)]
    chain: bool,
    #[arg(long, value_enum, default_value = "none")]
    prune: Prune,
    /// Seed for min-fill tie breaking.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Significant digits used to compare weights.
    #[arg(long, default_value_t = aomdd::DEFAULT_DIGITS)]
    epsilon_digits: u32,
    /// Maximum number of meta-nodes.
    #[arg(long)]
    mem_cap: Option<usize>,
    /// Diagram output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a DOT rendering here.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Statistics output path (stderr when omitted).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryKind {
    Count,
    Sum,
    Mpe,
    Eval,
}

#[derive(Args)]
struct QueryArgs {
    diagram: PathBuf,
    #[arg(value_enum)]
    kind: QueryKind,
    /// UAI evidence file.
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Full assignment for `eval`: one value per variable.
    #[arg(long)]
    assignment: Option<PathBuf>,
    /// Digits after the decimal point for real results.
    #[arg(long)]
    precision: Option<usize>,
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(args: &CompileArgs) -> anyhow::Result<GraphicalModel> {
    let text = read(&args.input)?;
    let format = match args.format {
        Some(f) => f,
        None => match args.input.extension().and_then(|e| e.to_str()) {
            Some("cnf") | Some("dimacs") => Format::Cnf,
            Some("uai") => Format::Uai,
            _ => bail!(usage("cannot guess the input format, pass --format")),
        },
    };
    let model = match format {
        Format::Uai => parse_uai(&text),
        Format::Cnf => parse_dimacs_cnf(&text),
    }
    .with_context(|| format!("while reading {}", args.input.display()))?;
    Ok(model)
}

fn usage(msg: &str) -> aomdd::Error {
    aomdd::Error::Precondition(msg.to_string())
}

fn ordering(args: &CompileArgs, g: &PrimalGraph) -> anyhow::Result<Ordering> {
    let given = args.order == OrderKind::Given || args.order_file.is_some();
    if !given {
        return Ok(min_fill_ordering(g, args.seed));
    }
    let path = args.order_file.as_ref().ok_or_else(|| usage("--order given needs --order-file"))?;
    let text = read(path)?;
    let vars = text
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| usage(&format!("bad variable id {t:?} in ordering"))))
        .collect::<Result<Vec<_>, _>>()?;
    if vars.len() != g.num_vars() {
        bail!(usage(&format!("ordering lists {} variables, model has {}", vars.len(), g.num_vars())));
    }
    Ok(Ordering::new(vars)?)
}

struct Compiled {
    diagram: Aomdd,
    report: String,
}

fn compile(args: &CompileArgs) -> anyhow::Result<Compiled> {
    let model = load_model(args)?;
    let g = PrimalGraph::from_model(&model);
    let d = ordering(args, &g)?;
    let width = induced_width(&g, &d);
    let tree = Arc::new(if args.chain { PseudoTree::chain(&d) } else { PseudoTree::generate(&g, &d) });
    let opts = CompileOptions { digits: args.epsilon_digits, node_cap: args.mem_cap };
    let start = Instant::now();
    let mut extra = String::new();
    let diagram = match args.method {
        Method::Search => {
            let (diagram, stats) = match args.prune {
                Prune::None => compile_search(&model, Arc::clone(&tree), &mut NoPruning, &opts)?,
                Prune::Bcp => compile_search(&model, Arc::clone(&tree), &mut aomdd::bcp_hook(&model), &opts)?,
            };
            let _ = writeln!(extra, "or_expansions {}", stats.or_expansions.iter().sum::<usize>());
            let _ = writeln!(extra, "and_expansions {}", stats.and_expansions.iter().sum::<usize>());
            let _ = writeln!(extra, "cache_hits {}", stats.cache_hits.iter().sum::<usize>());
            diagram
        }
        Method::Be => {
            if args.prune == Prune::Bcp {
                bail!(usage("--prune bcp applies to --method search only"));
            }
            compile_be(&model, Arc::clone(&tree), &opts)?.0
        }
    };
    let elapsed = start.elapsed();
    let s = diagram.stats();
    let mut report = String::new();
    let _ = writeln!(report, "method {}", if args.method == Method::Search { "search" } else { "be" });
    let _ = writeln!(report, "seed {}", args.seed);
    let _ = writeln!(report, "n {}", model.num_vars());
    let _ = writeln!(report, "k {}", model.max_domain());
    let _ = writeln!(report, "induced_width {width}");
    let _ = writeln!(report, "height {}", tree.height());
    let _ = writeln!(report, "meta_nodes {}", s.meta_nodes);
    let _ = writeln!(report, "edges {}", s.edges);
    let per_var: Vec<String> = s.per_var.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(report, "per_var {}", per_var.join(" "));
    report.push_str(&extra);
    let _ = writeln!(report, "time_ms {:.3}", elapsed.as_secs_f64() * 1e3);
    Ok(Compiled { diagram, report })
}

fn format_real(x: f64, precision: Option<usize>) -> String {
    match precision {
        Some(p) => format!("{x:.p$}"),
        None => format!("{x}"),
    }
}

fn query(args: &QueryArgs) -> anyhow::Result<ExitCode> {
    let d = deserialize(&read(&args.diagram)?)?;
    let n = d.num_vars();
    let evidence = match &args.evidence {
        Some(p) => {
            // evidence files are checked against the diagram's domains
            let dummy = GraphicalModel::new(d.domains().to_vec(), Vec::new(), d.kind())?;
            Evidence::new(parse_evidence(&read(p)?, &dummy)?, d.domains())?
        }
        None => Evidence::none(n),
    };
    match args.kind {
        QueryKind::Count => println!("{}", count_solutions(&d, &evidence)?),
        QueryKind::Sum => println!("{}", format_real(sum_over(&d, &evidence)?, args.precision)),
        QueryKind::Mpe => {
            let (v, x) = mpe(&d, &evidence)?;
            let x: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            println!("{}\n{}", format_real(v, args.precision), x.join(" "));
        }
        QueryKind::Eval => {
            let path = args.assignment.as_ref().ok_or_else(|| usage("eval needs --assignment"))?;
            let x = read(path)?
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| usage(&format!("bad value {t:?} in assignment"))))
                .collect::<Result<Vec<_>, _>>()?;
            println!("{}", format_real(evaluate(&d, &x)?, args.precision));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Compile(args) => {
            let c = compile(&args)?;
            write_or_print(args.out.as_deref(), &serialize(&c.diagram))?;
            if let Some(p) = &args.dot {
                std::fs::write(p, to_dot(&c.diagram)).with_context(|| format!("cannot write {}", p.display()))?;
            }
            match &args.stats {
                Some(p) => std::fs::write(p, &c.report).with_context(|| format!("cannot write {}", p.display()))?,
                None => eprint!("{}", c.report),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats(args) => {
            let c = compile(&args)?;
            write_or_print(args.stats.as_deref(), &c.report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Query(args) => query(&args),
        Command::Equiv { a, b } => {
            let da = deserialize(&read(&a)?)?;
            let db = deserialize(&read(&b)?)?;
            if equivalent(&da, &db)? {
                println!("equivalent");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("not equivalent");
                Ok(ExitCode::from(1))
            }
        }
        Command::Dot { input, out } => {
            let d = deserialize(&read(&input)?)?;
            write_or_print(out.as_deref(), &to_dot(&d))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let resource =
                e.chain().any(|c| matches!(c.downcast_ref::<aomdd::Error>(), Some(aomdd::Error::Resource(_))));
            ExitCode::from(if resource { 3 } else { 2 })
        }
    }
}
