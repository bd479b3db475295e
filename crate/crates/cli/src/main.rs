use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use locsym::density::{
    build_constraints_with, density_curve, exact_alpha, ln_rational, mutate_entry,
    verify_constructed_simulation, Construction, ConstructionParams, PathSpec,
};
use locsym::encodings::{encode_kset, encode_set, verify_encoding_simulation, EncodingKind};
use locsym::render::{to_ascii, to_pgm};
use locsym::rescale::{
    find_subautomaton, rescale_rule, search_simulation, RescaleParams, SearchOptions, SimBounds,
};
use locsym::rule::{Trace, DENSIFY_CAP};
use locsym::{
    count_family, enumerate_family, evolve, is_member, parse_rule, sample_rule, serialize_rule,
    FamilySpec, PConfig, Rule, State,
};

#[derive(Parser)]
#[command(name = "locsym", version, about = "Cellular automata with local symmetries")]
struct Cli {
    /// Seed for every randomized step; printed on stderr for replay.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the primary output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// List the symmetry families (MS, SET, TOT, SS, K, KMS, KSET) a rule belongs to.
    Classify(RuleArg),
    /// Exact member count of a family (closed forms; orbit enumeration for ss).
    Count(SizeArgs),
    /// Enumerate family members in lexicographic class order.
    Enumerate {
        #[command(flatten)]
        size: SizeArgs,
        /// Stop after this many rules.
        #[arg(long, default_value_t = 1000)]
        limit: u64,
    },
    /// Draw a uniform family member (independent draw per neighbourhood class).
    Sample(SizeArgs),
    /// Evolve a periodic configuration and print the space-time trace.
    Evolve {
        #[command(flatten)]
        rule: RuleArg,
        /// Space-separated states of one period; random when omitted.
        #[arg(long)]
        config: Option<String>,
        /// Period of the random configuration.
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long, default_value_t = 16)]
        steps: usize,
    },
    /// Render a trace file as a plain graymap or an ASCII grid.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        ascii: bool,
    },
    /// Rescale a rule: packing into m-blocks, t steps, shift by z.
    Rescale {
        #[command(flatten)]
        rule: RuleArg,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        t: usize,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        z: i64,
    },
    /// Search an injective state map making B a sub-automaton of A.
    CheckSub {
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
    },
    /// Bounded search for a simulation of B by A through rescalings.
    CheckSim {
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        a: PathBuf,
        /// Bound on every block size, time factor and |shift|.
        #[arg(long, default_value_t = 2)]
        max: usize,
        #[arg(long, default_value_t = 200_000)]
        probe_budget: u64,
    },
    /// Encode a rule as a set rule (label encoding) or a captive set rule (library encoding).
    Encode {
        #[command(flatten)]
        rule: RuleArg,
        #[arg(long, default_value = "set")]
        kind: String,
    },
    /// Check the set or captive set encoding simulates the rule on random bases.
    VerifyEncoding {
        #[command(flatten)]
        rule: RuleArg,
        #[arg(long, default_value = "set")]
        kind: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        steps: usize,
    },
    /// Constraint set of a simulation subshift (ms, tot, oms:K', kms, kset, captive-fullshift).
    BuildConstraints(ConstructionArgs),
    /// Lower bounds on the density of simulating rules along a path of sizes.
    Density {
        /// Replay file of key=value lines: construction, a0, path, from, to, seed.
        #[arg(long, conflicts_with_all = ["construction", "a0", "path"])]
        manifest: Option<PathBuf>,
        #[arg(long)]
        construction: Option<String>,
        #[arg(long)]
        a0: Option<PathBuf>,
        /// fixed-k:K, fixed-n:N or list:NxK,...
        #[arg(long)]
        path: Option<String>,
        #[arg(long, default_value_t = 2)]
        from: usize,
        #[arg(long, default_value_t = 40)]
        to: usize,
    },
    /// Sample constrained rules and check they simulate A0 on the subshift.
    VerifyConstruction {
        #[command(flatten)]
        construction: ConstructionArgs,
        #[arg(long, default_value_t = 6)]
        steps: usize,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Change one required output first; the check is then expected to fail.
        #[arg(long)]
        mutate: bool,
    },
}

#[derive(Args)]
struct RuleArg {
    #[arg(long)]
    rule: PathBuf,
}

#[derive(Args)]
struct SizeArgs {
    /// all, ms, set, tot, ss, k, kms, kset, oms:K', oset:K', otot:K', k+<family>
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
struct ConstructionArgs {
    #[arg(long)]
    construction: String,
    /// Rule file of the simulated rule.
    #[arg(long)]
    a0: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    j: usize,
    #[arg(long, default_value_t = 0)]
    block: usize,
    /// Skip the hypotheses not needed by the layout itself.
    #[arg(long)]
    relaxed: bool,
}

impl ConstructionArgs {
    fn build(&self) -> anyhow::Result<(locsym::density::ConstraintSet, Rule)> {
        let c: Construction = self.construction.parse()?;
        let a0 = read_rule(&self.a0)?;
        let p = ConstructionParams {
            n: self.n,
            k: self.k,
            j: self.j,
            block: self.block,
        };
        Ok((build_constraints_with(c, &a0, p, !self.relaxed)?, a0))
    }
}

fn read_rule(path: &Path) -> anyhow::Result<Rule> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_rule(&text)?)
}

fn parse_states(s: &str) -> anyhow::Result<Vec<State>> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| anyhow!("bad state `{t}`")))
        .collect()
}

fn rule_text(rule: &Rule) -> anyhow::Result<String> {
    Ok(serialize_rule(&rule.densify(DENSIFY_CAP)?)?)
}

const CLASSIFY_FAMILIES: [(&str, FamilySpec); 7] = [
    ("MS", FamilySpec::MS),
    ("SET", FamilySpec::SET),
    ("TOT", FamilySpec::TOT),
    ("SS", FamilySpec::SS),
    ("K", FamilySpec::K),
    ("KMS", FamilySpec::KMS),
    ("KSET", FamilySpec::KSET),
];

fn run(cli: &Cli) -> anyhow::Result<String> {
    let mut out = String::new();
    match &cli.command {
        Command::Classify(r) => {
            let rule = read_rule(&r.rule)?;
            let mut names = Vec::new();
            for (name, spec) in CLASSIFY_FAMILIES {
                if is_member(&rule, &spec)? {
                    names.push(name);
                }
            }
            writeln!(out, "{}", if names.is_empty() { "none".into() } else { names.join(" ") })?;
        }
        Command::Count(s) => {
            let spec: FamilySpec = s.family.parse()?;
            writeln!(out, "{}", count_family(&spec, s.n, s.k)?)?;
        }
        Command::Enumerate { size, limit } => {
            let spec: FamilySpec = size.family.parse()?;
            let total = count_family(&spec, size.n, size.k)?;
            let cap = locsym::families::ENUMERATION_CAP.max(*limit);
            for rule in enumerate_family(&spec, size.n, size.k, cap)?.take(*limit as usize) {
                let table = rule.table().expect("enumerated rules are dense");
                let cells: Vec<String> = table.iter().map(|s| s.to_string()).collect();
                match cli.format {
                    Format::Csv => writeln!(out, "{}", cells.join(","))?,
                    Format::Text => writeln!(out, "table {}", cells.join(" "))?,
                }
            }
            eprintln!("# {total} members in total");
        }
        Command::Sample(s) => {
            let spec: FamilySpec = s.family.parse()?;
            out = rule_text(&sample_rule(&spec, s.n, s.k, cli.seed)?)?;
        }
        Command::Evolve {
            rule,
            config,
            width,
            steps,
        } => {
            let rule = read_rule(&rule.rule)?;
            let word = match config {
                Some(c) => parse_states(c)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                    (0..*width).map(|_| rng.gen_range(0..rule.n() as State)).collect()
                }
            };
            out = evolve(&rule, &PConfig::new(word)?, *steps)?.to_text();
        }
        Command::Render { trace, ascii } => {
            let text = fs::read_to_string(trace)
                .with_context(|| format!("reading {}", trace.display()))?;
            let trace = Trace::parse(&text)?;
            out = if *ascii { to_ascii(&trace) } else { to_pgm(&trace) };
        }
        Command::Rescale { rule, m, t, z } => {
            let rule = read_rule(&rule.rule)?;
            out = rule_text(&rescale_rule(&rule, RescaleParams::new(*m, *t, *z)?)?)?;
        }
        Command::CheckSub { b, a, budget } => {
            let (b, a) = (read_rule(b)?, read_rule(a)?);
            match find_subautomaton(&b, &a, *budget)? {
                Some(phi) => {
                    for (i, v) in phi.as_slice().iter().enumerate() {
                        writeln!(out, "map {i} {v}")?;
                    }
                }
                None => writeln!(out, "no sub-automaton")?,
            }
        }
        Command::CheckSim {
            b,
            a,
            max,
            probe_budget,
        } => {
            let (b, a) = (read_rule(b)?, read_rule(a)?);
            let opts = SearchOptions {
                probe_budget: *probe_budget,
                seed: cli.seed,
                ..SearchOptions::default()
            };
            match search_simulation(&b, &a, SimBounds::uniform(*max), opts)? {
                Some(w) => out = w.to_text(),
                None => writeln!(out, "no witness within bounds")?,
            }
        }
        Command::Encode { rule, kind } => {
            let rule = read_rule(&rule.rule)?;
            let encoded = match kind.parse::<EncodingKind>()? {
                EncodingKind::Set => encode_set(&rule)?.encoded().clone(),
                EncodingKind::KSet => encode_kset(&rule)?.encoded().clone(),
            };
            out = match rule_text(&encoded) {
                Ok(t) => t,
                Err(_) => format!(
                    "# table too large to list\nn {}\nk {}\n",
                    encoded.n(),
                    encoded.k()
                ),
            };
        }
        Command::VerifyEncoding {
            rule,
            kind,
            trials,
            steps,
        } => {
            let rule = read_rule(&rule.rule)?;
            let kind: EncodingKind = kind.parse()?;
            let rep = verify_encoding_simulation(&rule, kind, *trials, *steps, cli.seed)?;
            if cli.format == Format::Csv {
                writeln!(out, "trial,passed,failed_step")?;
            }
            for t in &rep.trials {
                let step = t.failed_step.map_or("-".into(), |s| s.to_string());
                match cli.format {
                    Format::Csv => writeln!(out, "{},{},{}", t.trial, t.passed, step)?,
                    Format::Text => writeln!(
                        out,
                        "trial {} {} {}",
                        t.trial,
                        if t.passed { "ok" } else { "FAILED at step" },
                        if t.passed { String::new() } else { step }
                    )?,
                }
            }
            if cli.format == Format::Text {
                writeln!(
                    out,
                    "membership {} captive {} ambiguous {} types {:?}",
                    rep.membership_ok, rep.captive_ok, rep.ambiguous, rep.type_counts
                )?;
                writeln!(out, "{}", if rep.passed() { "PASSED" } else { "FAILED" })?;
            }
            if !rep.passed() {
                eprint!("{out}");
                bail!("encoding check failed");
            }
        }
        Command::BuildConstraints(args) => {
            let (cs, _) = args.build()?;
            out = cs.to_text();
            writeln!(out, "alpha {}", exact_alpha(&cs)?)?;
        }
        Command::Density {
            manifest,
            construction,
            a0,
            path,
            from,
            to,
        } => {
            let m = match manifest {
                Some(file) => Manifest::read(file)?,
                None => Manifest {
                    construction: construction.clone().ok_or_else(|| anyhow!("--construction is required"))?,
                    a0: a0.clone().ok_or_else(|| anyhow!("--a0 is required"))?,
                    path: path.clone().ok_or_else(|| anyhow!("--path is required"))?,
                    from: *from,
                    to: *to,
                },
            };
            let c: Construction = m.construction.parse()?;
            let a0 = read_rule(&m.a0)?;
            let rows = density_curve(&m.path.parse::<PathSpec>()?, c, &a0, m.from..=m.to)?;
            if cli.format == Format::Csv {
                writeln!(out, "x,n,k,j_count,alpha_exact,bound,kind")?;
            }
            for r in rows {
                let alpha = r.alpha_min.as_ref().map_or("-".into(), |a| a.to_string());
                match cli.format {
                    Format::Csv => writeln!(
                        out,
                        "{},{},{},{},{},{:.6e},{}",
                        r.x, r.n, r.k, r.j_count, alpha, r.bound, r.kind()
                    )?,
                    Format::Text => {
                        let log10 = r
                            .alpha_min
                            .as_ref()
                            .map_or(String::new(), |a| format!(" (log10 {:.2})", ln_rational(a) / std::f64::consts::LN_10));
                        writeln!(
                            out,
                            "x {} size ({},{}) subshifts {} alpha {}{} bound {:.6e} {}{}",
                            r.x,
                            r.n,
                            r.k,
                            r.j_count,
                            alpha,
                            log10,
                            r.bound,
                            r.kind(),
                            r.out_of_hypothesis.map_or(String::new(), |w| format!(": {w}"))
                        )?
                    }
                }
            }
        }
        Command::VerifyConstruction {
            construction,
            steps,
            seeds,
            mutate,
        } => {
            let (mut cs, a0) = construction.build()?;
            let mut first = cli.seed;
            if *mutate {
                let (m, s) = mutate_entry(&cs, cli.seed)?;
                cs = m;
                first = s;
            }
            let mut passed = 0;
            for s in first..first + seeds {
                let check = verify_constructed_simulation(&cs, &a0, *steps, s)?;
                passed += u64::from(check.passed);
                match check.failed_step {
                    None => writeln!(out, "seed {s} ok")?,
                    Some(t) => writeln!(out, "seed {s} FAILED at step {t}")?,
                }
            }
            writeln!(out, "{passed}/{seeds} passed")?;
        }
    }
    Ok(out)
}

struct Manifest {
    construction: String,
    a0: PathBuf,
    path: String,
    from: usize,
    to: usize,
}

impl Manifest {
    fn read(file: &Path) -> anyhow::Result<Manifest> {
        let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
        let mut fields = std::collections::BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("manifest line `{line}` is not key=value"))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut get = |k: &str| fields.remove(k).ok_or_else(|| anyhow!("manifest is missing `{k}`"));
        let dir = file.parent().unwrap_or(Path::new("."));
        let m = Manifest {
            construction: get("construction")?,
            a0: dir.join(get("a0")?),
            path: get("path")?,
            from: get("from")?.parse().context("manifest `from`")?,
            to: get("to")?.parse().context("manifest `to`")?,
        };
        // the seed, when present, is informational: the curve is exact
        fields.remove("seed");
        if let Some(k) = fields.keys().next() {
            bail!("unknown manifest key `{k}`");
        }
        Ok(m)
    }
}

fn describe(err: &anyhow::Error) -> String {
    match err.downcast_ref::<locsym::Error>() {
        Some(e @ (locsym::Error::Inconclusive { .. } | locsym::Error::NotLegal(_))) => e.to_string(),
        _ => format!("error: {err:#}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    eprintln!("# seed {}", cli.seed);
    let result = run(&cli).and_then(|text| match &cli.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            let digest = Sha256::digest(text.as_bytes());
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            eprintln!("# wrote {} sha256 {hex}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", describe(&e).replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
