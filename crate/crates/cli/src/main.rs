use std::collections::BTreeMap;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use periodk::dsl::parse_query;
use periodk::physical::RewriteOptions;
use periodk::relation::DataType;
use periodk::semiring::SemiringSpec;
use periodk::telement::Tick;
use periodk::Execution;
use periodk_cli::csvio::{parse_types, OutputOptions, TableBinding};
use periodk_cli::{Answer, EvalConfig, Inputs, Mode};

/// Sequenced temporal queries over period relations stored as CSV.
#[derive(Parser, Debug)]
#[command(name = "periodk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a query and print the coalesced result.
    Eval {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Coalesce one relation.
    Coalesce {
        #[command(flatten)]
        input: InputArgs,
        /// Relation to coalesce; defaults to the only one given.
        #[arg(long)]
        relation: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Split the rows of one relation at the endpoints of another.
    Split {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        /// Comma-separated attributes rows must agree on.
        #[arg(long, value_delimiter = ',')]
        group: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate a query and print its snapshot at one tick.
    Snapshot {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long)]
        at: Tick,
    },
    /// Compare every evaluator against the snapshot oracle on random instances.
    OracleCheck {
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, value_enum, default_value_t = Semiring::Bag)]
        semiring: Semiring,
    },
    /// Time the coalesce operator on synthetic data.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [10_000usize, 100_000, 1_000_000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Run on the calling thread only.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// `name=path:beginCol,endCol`; columns default to `t_begin,t_end`.
    #[arg(long = "table", required = true)]
    tables: Vec<TableBinding>,
    /// `name=col:type,...` with types int, rational or str.
    #[arg(long = "types")]
    types: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    tmin: Option<Tick>,
    #[arg(long, allow_hyphen_values = true)]
    tmax: Option<Tick>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct QueryArgs {
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    query_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = Semiring::Bag)]
    semiring: Semiring,
    #[arg(long, value_enum, default_value_t = ModeArg::Physical)]
    mode: ModeArg,
    /// Coalesce after every operator instead of once at the top.
    #[arg(long)]
    no_pullup: bool,
    /// Use a separate split and plain operator for aggregation and difference.
    #[arg(long)]
    no_fuse: bool,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Decimal places for rational values.
    #[arg(long, default_value_t = 4)]
    precision: u32,
    /// Print a `mult` column instead of repeating rows.
    #[arg(long)]
    with_multiplicity: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Semiring {
    Bag,
    Set,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Physical,
    Logical,
    Oracle,
}

impl Semiring {
    fn spec(self) -> SemiringSpec {
        match self {
            Semiring::Bag => SemiringSpec::BAG,
            Semiring::Set => SemiringSpec::SET,
        }
    }
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<(Inputs, periodk::telement::TimeDomain)> {
        let mut types: BTreeMap<String, BTreeMap<String, DataType>> = BTreeMap::new();
        for t in &self.types {
            let (name, cols) = parse_types(t).map_err(anyhow::Error::msg).context("--types")?;
            types.entry(name).or_default().extend(cols);
        }
        let inputs = Inputs::read(&self.tables, &types)?;
        let domain = inputs.domain(self.tmin, self.tmax)?;
        Ok((inputs, domain))
    }
}

impl QueryArgs {
    fn text(&self) -> anyhow::Result<String> {
        match (&self.query, &self.query_file) {
            (Some(q), _) => Ok(q.clone()),
            (None, Some(p)) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
            (None, None) => bail!("a query is required"),
        }
    }
}

impl RunArgs {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            spec: self.semiring.spec(),
            mode: match self.mode {
                ModeArg::Physical => Mode::Physical,
                ModeArg::Logical => Mode::Logical,
                ModeArg::Oracle => Mode::Oracle,
            },
            rewrite: RewriteOptions {
                pull_up: !self.no_pullup,
                fused: !self.no_fuse,
            },
            exec: Execution::default(),
        }
    }
}

impl OutputArgs {
    fn options(&self) -> OutputOptions {
        OutputOptions {
            precision: self.precision,
            with_multiplicity: self.with_multiplicity,
        }
    }
}

fn answer(input: &InputArgs, query: &QueryArgs, run: &RunArgs) -> anyhow::Result<(Answer, periodk::telement::TimeDomain)> {
    let ast = parse_query(&query.text()?)?;
    let (inputs, domain) = input.load()?;
    Ok((periodk_cli::evaluate(&ast, &inputs, domain, &run.config())?, domain))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Eval { input, query, run, output } => {
            let (answer, _) = answer(&input, &query, &run)?;
            answer.write(&mut out, &output.options())?;
        }
        Command::Coalesce { input, relation, output } => {
            let (inputs, domain) = input.load()?;
            let name = match relation {
                Some(r) => r,
                None if input.tables.len() == 1 => input.tables[0].name.clone(),
                None => bail!("--relation is required with several tables"),
            };
            let r = periodk_cli::coalesce_table(&inputs, &name, domain, Execution::default())?;
            periodk_cli::csvio::write_relation(&mut out, &r, &output.options())?;
        }
        Command::Split { input, left, right, group, output } => {
            let (inputs, domain) = input.load()?;
            let r = periodk_cli::split_tables(&inputs, &left, &right, &group, domain, Execution::default())?;
            periodk_cli::csvio::write_relation(&mut out, &r, &output.options())?;
        }
        Command::Snapshot { input, query, run, output, at } => {
            let (answer, domain) = answer(&input, &query, &run)?;
            domain.check_tick(at)?;
            periodk_cli::write_snapshot(&mut out, &answer, at, &output.options())?;
        }
        Command::OracleCheck { seeds, semiring } => {
            let failures = periodk_cli::oracle_check(&mut out, seeds, semiring.spec(), Execution::default())?;
            out.flush()?;
            return Ok(failures == 0);
        }
        Command::Bench { sizes, repeats, sequential } => {
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            periodk_cli::bench(&mut out, &sizes, repeats, exec)?;
        }
    }
    out.flush()?;
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
