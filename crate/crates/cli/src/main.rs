//! `blockmech`: command-line driver for the block-building mechanism
//! simulator.
//!
//! Exit codes: 0 on success or a passing check, 1 when a check fails or an
//! expected demonstration does not reproduce, 2 on usage or input errors.

mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use blockmech::baselines::{compare_with_timings, Algorithm};
use blockmech::conflict::{get_conflict_groups, group_stats};
use blockmech::default_algo::{candidate_set, DefaultAlgorithm};
use blockmech::mechanism::{run_mechanism_with, RefundRule, Winner};
use blockmech::model::{Bundle, BundleId, Scenario};
use blockmech::oracle::{bid_table, vcg_outcome, DEFAULT_ORACLE_LIMIT};
use blockmech::seeding::derive_seed;
use blockmech::strategy::{adoption_game, ADOPTION_LIMIT, budget_deficit_demo, collusion_demo, collusion_epsilons, sybil_demo};
use blockmech::suites::{self, SuiteReport};
use blockmech::workload::{generate_scenario, load_scenario, resolve_profile, save_scenario, to_json};
use blockmech::{fixtures, Amount};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use table::{pairs, Table};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "blockmech", version, about = "Block-building mechanism simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Seed; overrides the scenario's own seed where one is read.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Group size from which the default builder stops enumerating exactly.
    #[arg(long, global = true)]
    k_cutoff: Option<usize>,
    /// Worker threads. Changes runtime only.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON report (or generated scenario) to this path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Default,
    Alternative,
}

#[derive(Subcommand)]
enum Command {
    /// Run the default builder on a scenario.
    Build {
        scenario: PathBuf,
        /// Also print every bundle's counterfactual block.
        #[arg(long)]
        counterfactuals: bool,
    },
    /// Exhaustive VCG over every ordered subset.
    Oracle {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT)]
        limit: usize,
    },
    /// Run the full mechanism.
    Mechanism {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Rule::Default)]
        refund_rule: Rule,
    },
    /// Conflict groups and how the default builder treats each.
    Groups { scenario: PathBuf },
    /// Default builder against the baselines, on one scenario or a generated batch.
    Compare {
        #[arg(required_unless_present = "gen", conflicts_with = "gen")]
        scenario: Option<PathBuf>,
        /// Profile name or file to generate scenarios from.
        #[arg(long)]
        gen: Option<String>,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Seeded property sweeps.
    #[command(subcommand)]
    Verify(Verify),
    /// Worked exploits and counterexamples.
    #[command(subcommand)]
    Demo(Demo),
    /// Proposer adoption game.
    #[command(subcommand)]
    Game(Game),
    /// Generate a scenario from a profile.
    Gen {
        #[arg(long)]
        profile: String,
    },
}

#[derive(Subcommand)]
enum Verify {
    /// No searcher gains by misreporting when only dominated builders compete.
    DsicSearcher {
        #[arg(long, default_value_t = 300)]
        n: usize,
    },
    /// No builder gains by shading its bid.
    DsicBuilder {
        #[arg(long, default_value_t = 300)]
        n: usize,
    },
    /// Integration never raises the joint utility of a conflict-free searcher and a builder.
    Integration {
        #[arg(long, default_value_t = 300)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum Demo {
    /// A builder colludes with a searcher under the alternative refund rule.
    Collusion {
        /// Defaults to the bundled fixture.
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        bundle: u32,
    },
    /// Builder-only VCG runs a deficit; the mechanism does not.
    Deficit { scenario: Option<PathBuf> },
    /// Splitting one bundle into several inflates its refunds.
    Sybil {
        /// Defaults to the bundled fixture and split.
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        bundle: u32,
        /// JSON array of the replacement bundles.
        #[arg(long, requires = "scenario")]
        split: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Game {
    /// Commit to the mechanism or build privately.
    Adoption {
        #[arg(required_unless_present = "gen", conflicts_with = "gen")]
        scenario: Option<PathBuf>,
        /// Generate scenarios from a profile, capped at the split enumeration limit.
        #[arg(long)]
        gen: Option<String>,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Check,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Build {
            scenario,
            counterfactuals,
        } => build(g, &load(g, scenario)?, *counterfactuals),
        Command::Oracle { scenario, limit } => oracle(g, &load(g, scenario)?, *limit),
        Command::Mechanism { scenario, refund_rule } => {
            let rule = match refund_rule {
                Rule::Default => RefundRule::Default,
                Rule::Alternative => RefundRule::Alternative,
            };
            mechanism(g, &load(g, scenario)?, rule)
        }
        Command::Groups { scenario } => groups(g, &load(g, scenario)?),
        Command::Compare { scenario, gen, n } => match (scenario, gen) {
            (Some(path), _) => compare_one(g, &load(g, path)?),
            (None, Some(profile)) => compare_batch(g, profile, *n),
            (None, None) => unreachable!("clap requires one"),
        },
        Command::Verify(v) => {
            let seed = g.seed.unwrap_or(0);
            let (name, report) = match v {
                Verify::DsicSearcher { n } => ("dsic-searcher", suites::searcher_dsic(*n, seed)),
                Verify::DsicBuilder { n } => ("dsic-builder", suites::builder_dsic(*n, seed)),
                Verify::Integration { n } => ("integration", suites::integration(*n, seed)),
            };
            suite(g, &format!("verify {name}"), &report)
        }
        Command::Demo(d) => demo(g, d),
        Command::Game(Game::Adoption { scenario, gen, n }) => adoption(g, scenario.as_deref(), gen.as_deref(), *n),
        Command::Gen { profile } => gen(g, profile),
    }
}

/// Read a scenario, retrying with `.json` appended, then apply overrides.
fn load(g: &Global, path: &Path) -> anyhow::Result<Scenario> {
    let with_ext = PathBuf::from(format!("{}.json", path.display()));
    let chosen = if !path.exists() && path.extension().is_none() && with_ext.exists() {
        with_ext
    } else {
        path.to_path_buf()
    };
    let mut s = load_scenario(&chosen).map_err(|e| anyhow!(e))?;
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
    if let Some(k) = g.k_cutoff {
        if k == 0 {
            bail!("--k-cutoff must be at least 1");
        }
        s.k_cutoff = k;
    }
    Ok(s)
}

/// Print the report and write it to `--out` if requested. `table` renders
/// the same data for humans.
fn emit<T: Serialize>(g: &Global, command: &str, result: &T, table: impl FnOnce() -> String) -> anyhow::Result<()> {
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "result": result,
    });
    let text = to_json(&report);
    // checks and demos always leave a detail report behind
    let default_path = is_check(command).then(|| PathBuf::from(format!("{}-report.json", command.replace(' ', "-"))));
    if let Some(path) = g.out.as_ref().or(default_path.as_ref()) {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
        if g.out.is_none() {
            eprintln!("report: {}", path.display());
        }
    }
    match g.format {
        Format::Json => print!("{text}"),
        Format::Table => print!("{}", table()),
    }
    Ok(())
}

fn is_check(command: &str) -> bool {
    ["verify ", "demo ", "game "].iter().any(|p| command.starts_with(p))
}

fn build(g: &Global, s: &Scenario, counterfactuals: bool) -> Outcome {
    let algo = DefaultAlgorithm::new(s.k_cutoff, s.seed);
    let taken: Vec<_> = s.builders.iter().map(|b| b.label.clone()).collect();
    let cb = algo.one_time_coinbase(&taken);
    let run = if counterfactuals {
        algo.build_with_counterfactuals(&s.bundles, &cb)
    } else {
        algo.build(&s.bundles, &cb)
    };
    emit(g, "build", &run, || {
        let mut out = pairs([
            ("block", run.block.to_string()),
            ("total bid", run.value.to_string()),
            ("coinbase", run.coinbase.to_string()),
        ]);
        let mut t = Table::new(["group", "size", "strategy", "candidates", "sub-block", "value"]);
        for r in &run.resolutions {
            t.row([
                format!("{}", r.group.smallest().map(|b| b.0).unwrap_or(0)),
                r.group.len().to_string(),
                format!("{:?}", r.strategy),
                r.candidates.to_string(),
                r.sub_block.to_string(),
                r.value.to_string(),
            ]);
        }
        out.push('\n');
        out.push_str(&t.render());
        if counterfactuals {
            let mut t = Table::new(["bundle", "counterfactual block", "others' value"]);
            for (id, c) in &run.counterfactuals {
                t.row([id.to_string(), c.block.to_string(), c.others_value.to_string()]);
            }
            out.push('\n');
            out.push_str(&t.render());
        }
        out
    })?;
    Ok(())
}

fn oracle(g: &Global, s: &Scenario, limit: usize) -> Outcome {
    let cb = DefaultAlgorithm::new(s.k_cutoff, s.seed).one_time_coinbase(&[]);
    let rows = bid_table(&s.bundles, &cb, limit).map_err(|e| anyhow!(e))?;
    let out = vcg_outcome(&s.bundles, &cb, limit).map_err(|e| anyhow!(e))?;
    let result = json!({ "table": rows, "outcome": out });
    emit(g, "oracle", &result, || {
        let ids = s.bundles.ids();
        let mut t = Table::new(
            std::iter::once("block".to_string())
                .chain(ids.iter().map(|id| format!("b{id}")))
                .chain(["total".to_string()]),
        );
        for r in &rows {
            t.row(
                std::iter::once(r.block.to_string())
                    .chain(ids.iter().map(|id| r.bids.get(id).map_or("-".into(), |a| a.to_string())))
                    .chain([r.total.to_string()]),
            );
        }
        let mut text = t.render();
        text.push('\n');
        text.push_str(&pairs([("winner", out.winner.to_string()), ("total bid", out.total_bid.to_string())]));
        let mut r = Table::new(["bundle", "charge", "refund", "others' optimum"]);
        for id in &ids {
            r.row([
                id.to_string(),
                out.charges[id].to_string(),
                out.refunds[id].to_string(),
                out.others_optimum[id].to_string(),
            ]);
        }
        text.push('\n');
        text.push_str(&r.render());
        text.push('\n');
        text.push_str(&pairs([("proposer revenue", out.proposer_revenue.to_string())]));
        text
    })?;
    Ok(())
}

fn mechanism(g: &Global, s: &Scenario, rule: RefundRule) -> Outcome {
    let out = run_mechanism_with(s, rule).map_err(|e| anyhow!(e))?;
    emit(g, "mechanism", &out, || {
        let winner = match out.winner {
            Winner::Default => "default".to_string(),
            Winner::Builder { index } => format!("builder {index} ({})", out.builders[index].name),
        };
        let mut text = pairs([
            ("winner", winner),
            ("final block", out.final_block.to_string()),
            ("final coinbase", out.final_coinbase.to_string()),
            ("default block", out.default_block.to_string()),
            ("beta0", out.beta0.to_string()),
            ("beta*", out.beta_star.to_string()),
            ("beta'", out.beta_prime.to_string()),
            ("proposer revenue", out.proposer_revenue.to_string()),
            ("inflow", out.inflow.to_string()),
            ("outflow", out.outflow.to_string()),
        ]);
        let mut t = Table::new(["bundle", "conflict-free", "included", "charge", "refund", "utility"]);
        for (id, e) in &out.searchers {
            t.row([
                id.to_string(),
                e.conflict_free.to_string(),
                e.included.to_string(),
                e.charge.to_string(),
                e.refund.to_string(),
                out.searcher_utility(*id).to_string(),
            ]);
        }
        text.push('\n');
        text.push_str(&t.render());
        if !out.builders.is_empty() {
            let mut t = Table::new(["builder", "label", "block", "bid", "status", "utility"]);
            for (j, b) in out.builders.iter().enumerate() {
                t.row([
                    b.name.clone(),
                    b.label.to_string(),
                    b.block.to_string(),
                    b.bid.to_string(),
                    b.violation.clone().unwrap_or_else(|| "ok".into()),
                    out.builder_utility(j).to_string(),
                ]);
            }
            text.push('\n');
            text.push_str(&t.render());
        }
        text
    })?;
    Ok(())
}

fn groups(g: &Global, s: &Scenario) -> Outcome {
    let groups = get_conflict_groups(&s.bundles);
    #[derive(Serialize)]
    struct Row {
        members: Vec<BundleId>,
        strategy: String,
        candidates: u64,
    }
    let rows: Vec<Row> = groups
        .iter()
        .map(|grp| {
            let (strategy, space) = candidate_set(grp, &s.bundles, s.k_cutoff, s.seed);
            Row {
                members: grp.members.clone(),
                strategy: format!("{strategy:?}"),
                candidates: space.len(),
            }
        })
        .collect();
    let stats = group_stats(&groups);
    emit(g, "groups", &json!({ "groups": rows, "stats": stats }), || {
        let mut t = Table::new(["size", "strategy", "candidates", "members"]);
        for r in &rows {
            let members: Vec<String> = r.members.iter().map(|m| m.to_string()).collect();
            t.row([
                r.members.len().to_string(),
                r.strategy.clone(),
                r.candidates.to_string(),
                members.join(" "),
            ]);
        }
        let mut text = t.render();
        text.push('\n');
        text.push_str(&pairs([
            ("bundles", stats.bundles.to_string()),
            ("groups", stats.groups.to_string()),
            ("conflict-free", stats.conflict_free.to_string()),
            ("large groups", stats.large_groups.to_string()),
            ("largest group", stats.max_group_size.to_string()),
        ]));
        text
    })?;
    Ok(())
}

fn millis(d: Duration) -> String {
    format!("{:.3} ms", d.as_secs_f64() * 1e3)
}

fn compare_one(g: &Global, s: &Scenario) -> Outcome {
    let (report, timings) = compare_with_timings(s, DEFAULT_ORACLE_LIMIT).map_err(|e| anyhow!(e))?;
    emit(g, "compare", &report, || {
        let mut t = Table::new(["algorithm", "block", "value", "gap", "runtime"]);
        for r in &report.results {
            let time = timings.iter().find(|(a, _)| *a == r.algorithm).map(|(_, d)| *d).unwrap_or_default();
            t.row([
                r.algorithm.name().to_string(),
                r.block.to_string(),
                r.value.to_string(),
                r.gap.to_string(),
                millis(time),
            ]);
        }
        let mut text = t.render();
        text.push('\n');
        text.push_str(&pairs([("default is best", report.default_is_best.to_string())]));
        if !report.oracle_available {
            text.push_str("oracle skipped: too many bundles\n");
        }
        text
    })?;
    Ok(())
}

fn compare_batch(g: &Global, profile: &str, n: usize) -> Outcome {
    use rayon::prelude::*;
    let mut p = resolve_profile(profile).map_err(|e| anyhow!(e))?;
    if let Some(k) = g.k_cutoff {
        p.k_cutoff = k;
    }
    let seed = g.seed.unwrap_or(0);
    let runs: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = generate_scenario(&p, derive_seed(seed, "compare", i as u64)).map_err(|e| anyhow!(e))?;
            compare_with_timings(&s, DEFAULT_ORACLE_LIMIT).map_err(|e| anyhow!(e))
        })
        .collect::<anyhow::Result<_>>()?;

    #[derive(Serialize)]
    struct Summary {
        algorithm: Algorithm,
        runs: usize,
        mean_value: Amount,
        mean_relative_gap: Option<f64>,
    }
    let best = runs.iter().filter(|(r, _)| r.default_is_best).count();
    let summaries: Vec<(Summary, Duration)> = Algorithm::ALL
        .iter()
        .map(|&alg| {
            let mut values = Vec::new();
            let mut gaps = Vec::new();
            let mut time = Duration::ZERO;
            for (report, timings) in &runs {
                if let Some(r) = report.results.iter().find(|r| r.algorithm == alg) {
                    values.push(r.value);
                    gaps.extend(r.relative_gap);
                    time += timings.iter().find(|(a, _)| *a == alg).map(|(_, d)| *d).unwrap_or_default();
                }
            }
            let k = values.len();
            let sum: Amount = values.iter().sum();
            let summary = Summary {
                algorithm: alg,
                runs: k,
                mean_value: if k == 0 { Amount::ZERO } else { Amount::from_nanos(sum.nanos() / k as i128) },
                mean_relative_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
            };
            (summary, time)
        })
        .collect();
    let fraction = if n == 0 { 0.0 } else { best as f64 / n as f64 };
    let result = json!({
        "profile": p.name,
        "scenarios": n,
        "seed": seed,
        "default_optimal": best,
        "default_optimal_fraction": fraction,
        "algorithms": summaries.iter().map(|(s, _)| s).collect::<Vec<_>>(),
    });
    emit(g, "compare", &result, || {
        let mut text = pairs([
            ("profile", p.name.clone()),
            ("scenarios", n.to_string()),
            ("default optimal", format!("{best}/{n} ({:.1}%)", fraction * 100.0)),
        ]);
        let mut t = Table::new(["algorithm", "runs", "mean value", "mean gap", "runtime"]);
        for (s, time) in &summaries {
            t.row([
                s.algorithm.name().to_string(),
                s.runs.to_string(),
                s.mean_value.to_string(),
                s.mean_relative_gap.map_or("-".into(), |x| format!("{:.2}%", x * 100.0)),
                millis(*time),
            ]);
        }
        text.push('\n');
        text.push_str(&t.render());
        text
    })?;
    Ok(())
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn suite(g: &Global, command: &str, report: &SuiteReport) -> Outcome {
    emit(g, command, report, || {
        let mut text = format!("{} {}\n", verdict(report.passed()), report.summary());
        for w in &report.witnesses {
            text.push_str(&format!("  {w}\n"));
        }
        if let Some(note) = report.note {
            text.push_str(&format!("note: {note}\n"));
        }
        text
    })?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn scenario_or(g: &Global, path: Option<&Path>, fixture: fn() -> Scenario) -> anyhow::Result<Scenario> {
    match path {
        Some(p) => load(g, p),
        None => Ok(fixture()),
    }
}

fn demo(g: &Global, d: &Demo) -> Outcome {
    match d {
        Demo::Collusion { scenario, bundle } => {
            let s = scenario_or(g, scenario.as_deref(), fixtures::collusion)?;
            let r = collusion_demo(&s, BundleId(*bundle), &collusion_epsilons()).map_err(|e| anyhow!(e))?;
            let ok = r.holds();
            emit(g, "demo collusion", &r, || {
                let mut text = format!(
                    "{} colluding builder lifts bundle {} from {} to v(o*) - b(o*) + beta0 under the alternative rule\n\n",
                    verdict(ok),
                    r.searcher,
                    r.honest_utility
                );
                let mut t = Table::new([
                    "epsilon",
                    "builder won",
                    "u (default rule)",
                    "u (alternative)",
                    "predicted",
                    "builder u",
                    "proposer",
                ]);
                t.row([
                    "honest".to_string(),
                    "-".into(),
                    r.honest_utility.to_string(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    r.honest_proposer_revenue.to_string(),
                ]);
                for row in &r.rows {
                    t.row([
                        row.epsilon.to_string(),
                        row.builder_won.to_string(),
                        row.searcher_utility_default_rule.to_string(),
                        row.searcher_utility_alternative_rule.to_string(),
                        row.predicted.to_string(),
                        row.builder_utility.to_string(),
                        row.proposer_revenue.to_string(),
                    ]);
                }
                text.push_str(&t.render());
                text
            })?;
            check(ok)
        }
        Demo::Deficit { scenario } => {
            let s = scenario_or(g, scenario.as_deref(), fixtures::deficit)?;
            let r = budget_deficit_demo(&s).map_err(|e| anyhow!(e))?;
            let ok = r.deficit.is_positive() && r.mechanism.is_budget_balanced();
            emit(g, "demo deficit", &r, || {
                let mut text = format!(
                    "{} builder-only VCG pays {} and collects {}; the mechanism stays balanced\n\n",
                    verdict(ok),
                    r.paid,
                    r.collected
                );
                let mut t = Table::new(["bundle", "best without", "refund"]);
                for (id, h) in &r.best_without {
                    t.row([id.to_string(), h.to_string(), r.refunds[id].to_string()]);
                }
                text.push_str(&t.render());
                text.push('\n');
                text.push_str(&pairs([
                    ("beta*", r.beta_star.to_string()),
                    ("beta'", r.beta_prime.to_string()),
                    ("deficit", r.deficit.to_string()),
                    ("mechanism proposer revenue", r.mechanism.proposer_revenue.to_string()),
                    ("mechanism inflow", r.mechanism.inflow.to_string()),
                    ("mechanism outflow", r.mechanism.outflow.to_string()),
                ]));
                text
            })?;
            check(ok)
        }
        Demo::Sybil { scenario, bundle, split } => {
            let (s, parts) = match (scenario, split) {
                (None, _) => (fixtures::sybil(), fixtures::sybil_split()),
                (Some(path), Some(split)) => {
                    let text = std::fs::read_to_string(split).with_context(|| format!("reading {}", split.display()))?;
                    let parts: Vec<Bundle> =
                        serde_json::from_str(&text).with_context(|| format!("parsing {}", split.display()))?;
                    (load(g, path)?, parts)
                }
                (Some(_), None) => return Err(anyhow!("--split is required with a scenario").into()),
            };
            let r = sybil_demo(&s, BundleId(*bundle), parts).map_err(|e| anyhow!(e))?;
            emit(g, "demo sybil", &r, || {
                let mut text = format!(
                    "{} splitting bundle {} changes its refunds from {} to {}\n\n",
                    verdict(r.inflated),
                    r.original,
                    r.refund_before,
                    r.refund_after
                );
                text.push_str(&pairs([
                    ("parts", format!("{:?}", r.parts.iter().map(|p| p.0).collect::<Vec<_>>())),
                    ("utility before", r.utility_before.to_string()),
                    ("utility after", r.utility_after.to_string()),
                ]));
                text
            })?;
            check(r.inflated)
        }
    }
}

fn check(ok: bool) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn adoption(g: &Global, scenario: Option<&Path>, profile: Option<&str>, n: usize) -> Outcome {
    let scenarios: Vec<Scenario> = match (scenario, profile) {
        (Some(path), _) => vec![load(g, path)?],
        (None, Some(profile)) => {
            let mut p = resolve_profile(profile).map_err(|e| anyhow!(e))?;
            // every private split is enumerated, so keep generated scenarios small
            p.n_bundles = p.n_bundles.min(ADOPTION_LIMIT);
            let seed = g.seed.unwrap_or(0);
            (0..n)
                .map(|i| generate_scenario(&p, derive_seed(seed, "adoption", i as u64)).map_err(|e| anyhow!(e)))
                .collect::<anyhow::Result<_>>()?
        }
        (None, None) => unreachable!("clap requires one"),
    };
    let reports = scenarios
        .iter()
        .map(|s| adoption_game(s).map_err(|e| anyhow!(e)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let failures = reports
        .iter()
        .filter(|r| !(r.commit_weakly_optimal && r.predictions_hold))
        .count();
    let ok = failures == 0;
    let result: serde_json::Value = if reports.len() == 1 {
        json!(reports[0])
    } else {
        json!({ "scenarios": reports.len(), "failures": failures, "reports": reports })
    };
    emit(g, "game adoption", &result, || {
        let mut text = format!(
            "{} commit weakly optimal in {}/{} scenarios\n\n",
            verdict(ok),
            reports.len() - failures,
            reports.len()
        );
        let mut t = Table::new(["scenario", "structure", "commit", "predicted", "best build-and-choose"]);
        for (i, r) in reports.iter().enumerate() {
            t.row([
                i.to_string(),
                format!("{:?}", r.structure),
                r.commit_utility.to_string(),
                r.commit_predicted.to_string(),
                r.best_build_and_choose.to_string(),
            ]);
        }
        text.push_str(&t.render());
        text
    })?;
    check(ok)
}

fn gen(g: &Global, profile: &str) -> Outcome {
    let mut p = resolve_profile(profile).map_err(|e| anyhow!(e))?;
    if let Some(k) = g.k_cutoff {
        p.k_cutoff = k;
    }
    let s = generate_scenario(&p, g.seed.unwrap_or(0)).map_err(|e| anyhow!(e))?;
    match &g.out {
        Some(path) => {
            save_scenario(&s, path).map_err(|e| anyhow!(e))?;
            eprintln!("wrote {} bundles to {}", s.bundles.len(), path.display());
        }
        None => print!("{}", to_json(&s)),
    }
    Ok(())
}
