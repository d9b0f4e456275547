use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use folearn::catalog::{self, CATALOG};
use folearn::engine::HyperParams;
use folearn::eval::{evaluate, inject_gaussian_noise, inject_label_noise, rank_metrics, RankMetrics};
use folearn::extract::default_filters;
use folearn::kb::learn_all_relations;
use folearn::io::{parse_facts, parse_program, parse_triples, serialize_facts, serialize_program};
use folearn::logic::{FactSet, Predicate};
use folearn::pipeline::{learn, LearnConfig, LearnOutcome};
use folearn::propositional::DEFAULT_SUBSTITUTION_CAP;
use folearn::task::TaskSpec;

#[derive(Parser)]
#[command(name = "folearn", version, about = "Learn first-order logic programs from relational facts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a program for one target predicate.
    Learn(LearnArgs),
    /// Evaluate a program on test data.
    Eval(EvalArgs),
    /// Write the data files of a bundled task.
    Gen(GenArgs),
    /// Learn from noisy training data and evaluate on clean test data.
    Noise(NoiseArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Bundled task to load instead of fact files.
    #[arg(long, conflicts_with_all = ["facts", "triples"])]
    task: Option<String>,
    /// Background facts (and optionally positives) in fact syntax.
    #[arg(long)]
    facts: Option<PathBuf>,
    /// Tab-separated `subject relation object` triples.
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Positive examples; defaults to the target facts found in the fact file.
    #[arg(long)]
    pos: Option<PathBuf>,
    /// Target predicate as `name/arity`.
    #[arg(long)]
    target: Option<String>,
    /// Number of existential variables.
    #[arg(long)]
    depth: Option<usize>,
    /// Extra background used only when evaluating.
    #[arg(long)]
    test_facts: Option<PathBuf>,
    #[arg(long)]
    test_pos: Option<PathBuf>,
    #[arg(long)]
    test_neg: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct HyperArgs {
    #[arg(long, default_value_t = 8.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    occ_a: f64,
    #[arg(long, default_value_t = 1.0)]
    occ_b: f64,
    #[arg(long, default_value_t = 10.0)]
    occ_c: f64,
    #[arg(long, default_value_t = 1.0)]
    occ_d: f64,
    /// Loss weights for L_I, L_S, L_B, L_O, L_F, L_C.
    #[arg(long, value_delimiter = ',', num_args = 6, default_values_t = [1.0, 0.1, 0.1, 0.1, 0.01, 0.01])]
    theta: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    adam_eps: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    curriculum_every: usize,
    /// Reinitialize and keep training this many times while positives stay uncovered.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    m1: usize,
    #[arg(long, default_value_t = 4)]
    m2: usize,
    #[arg(long, default_value_t = 2)]
    n_a: usize,
    /// Weight deduplicated pairs by how many substitutions they stand for.
    #[arg(long)]
    weight_by_count: bool,
    /// Soundness threshold.
    #[arg(long, default_value_t = 1.0)]
    tau_s: f64,
    /// Rule filters; defaults to 0.05, 0.10, ..., 1.0.
    #[arg(long, value_delimiter = ',')]
    filters: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SUBSTITUTION_CAP)]
    substitution_cap: u64,
    /// Train for the whole epoch budget even once the positives are covered.
    #[arg(long)]
    no_early_stop: bool,
    /// Also keep the minimal sound generalizations of every sound rule.
    #[arg(long)]
    generalize: bool,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output directory for program.pl, loss.csv and summary.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Learn one program per binary predicate and concatenate them.
    #[arg(long, conflicts_with = "target")]
    all_targets: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Program to evaluate.
    #[arg(long)]
    program: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Also rank every test fact and report MRR and HITS@1/3/10.
    #[arg(long)]
    rank: bool,
    /// Test facts as tab-separated triples, for ranking.
    #[arg(long)]
    test_triples: Option<PathBuf>,
    /// Metrics CSV path.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Task name.
    name: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct NoiseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Standard deviation of Gaussian truth noise.
    #[arg(long, conflicts_with = "mu")]
    sigma: Option<f64>,
    /// Label mutation rate.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

type Result<T> = std::result::Result<T, String>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        }
    }
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn read_facts(path: &Path) -> Result<FactSet> {
    parse_facts(&read(path)?).map_err(|e| format!("{}:{e}", path.display()))
}

fn read_triples(path: &Path) -> Result<FactSet> {
    parse_triples(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn optional_facts(path: &Option<PathBuf>) -> Result<FactSet> {
    path.as_deref().map_or_else(|| Ok(FactSet::new()), read_facts)
}

fn all_facts(data: &DataArgs) -> Result<FactSet> {
    match (&data.facts, &data.triples) {
        (Some(f), _) => read_facts(f),
        (None, Some(t)) => read_triples(t),
        (None, None) => Err("one of --task, --facts or --triples is required".into()),
    }
}

fn build_spec(data: &DataArgs, target: Option<Predicate>) -> Result<TaskSpec> {
    if let Some(name) = &data.task {
        let mut spec = catalog::generate(name).map_err(|e| e.to_string())?;
        if let Some(d) = data.depth {
            spec.depth = d;
        }
        return Ok(spec);
    }
    let facts = all_facts(data)?;
    let target = match target {
        Some(t) => t,
        None => {
            let t = data.target.as_deref().ok_or("--target is required")?;
            Predicate::parse(t).ok_or_else(|| format!("bad target `{t}`; expected name/arity with arity 1 or 2"))?
        }
    };
    let mut background = FactSet::new();
    let mut positives = match &data.pos {
        Some(p) => read_facts(p)?,
        None => FactSet::new(),
    };
    for (atom, w) in facts.iter() {
        if atom.predicate == target && data.pos.is_none() {
            positives.insert(atom.clone(), w);
        } else {
            background.insert(atom.clone(), w);
        }
    }
    if let Some(bad) = positives.atoms().find(|a| a.predicate != target) {
        return Err(format!("positive example {bad} does not use the target {target}"));
    }
    if !facts.predicates().iter().chain(positives.predicates().iter()).any(|p| *p == target) {
        return Err(format!("target {target} does not occur in the data"));
    }
    let name = target.name.clone();
    let mut spec = TaskSpec::new(name, target, data.depth.unwrap_or(1), background, positives);
    spec.test_background = optional_facts(&data.test_facts)?;
    spec.test_positives = optional_facts(&data.test_pos)?;
    spec.test_negatives = optional_facts(&data.test_neg)?;
    Ok(spec)
}

fn learn_config(h: &HyperArgs) -> Result<LearnConfig> {
    let mut theta = [0.0; 6];
    theta.copy_from_slice(&h.theta);
    let hp = HyperParams {
        gamma: h.gamma,
        occ_a: h.occ_a,
        occ_b: h.occ_b,
        occ_c: h.occ_c,
        occ_d: h.occ_d,
        theta,
        lr: h.lr,
        beta1: h.beta1,
        beta2: h.beta2,
        eps_adam: h.adam_eps,
        epochs: h.epochs,
        curriculum_every: h.curriculum_every,
        restarts: h.restarts,
        seed: h.seed,
        m1: h.m1,
        m2: h.m2,
        n_a: h.n_a,
        weight_by_count: h.weight_by_count,
    };
    hp.validate()?;
    if !(0.0..=1.0).contains(&h.tau_s) {
        return Err(format!("--tau-s must lie in [0,1], got {}", h.tau_s));
    }
    let mut config = LearnConfig::new(hp, h.tau_s);
    config.train.filters = h.filters.clone().unwrap_or_else(default_filters);
    if config.train.filters.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err("rule filters must lie in (0,1]".into());
    }
    config.train.early_stop = !h.no_early_stop;
    config.train.generalize = h.generalize;
    config.propositionalize.substitution_cap = h.substitution_cap;
    Ok(config)
}

fn write_outputs(out: &Path, outcome: &LearnOutcome) -> Result<()> {
    write(&out.join("program.pl"), &outcome.program_text())?;
    write(&out.join("loss.csv"), &outcome.loss_csv())?;
    let summary = serde_json::to_string_pretty(&outcome.summary).map_err(|e| e.to_string())?;
    write(&out.join("summary.json"), &(summary + "\n"))
}

fn report(outcome: &LearnOutcome) {
    print!("{}", outcome.program_text());
    if let Some(e) = &outcome.evaluation {
        println!("accuracy: {:.3}", e.accuracy);
        if e.negatives_total > 0 {
            println!("test negatives entailed: {}/{}", e.negatives_entailed, e.negatives_total);
        }
    }
}

fn run_learn(spec: &TaskSpec, config: &LearnConfig, out: &Path) -> Result<()> {
    let outcome = learn(spec, config).map_err(|e| e.to_string())?;
    write_outputs(out, &outcome)?;
    report(&outcome);
    Ok(())
}

fn cmd_learn(args: LearnArgs) -> Result<()> {
    let config = learn_config(&args.hyper)?;
    if !args.all_targets {
        let spec = build_spec(&args.data, None)?;
        return run_learn(&spec, &config, &args.output.out);
    }
    let facts = all_facts(&args.data)?;
    let outcome =
        learn_all_relations(&facts, args.data.depth.unwrap_or(1), &config).map_err(|e| e.to_string())?;
    let program = serialize_program(&outcome.rules);
    let losses: String = outcome
        .losses
        .iter()
        .flat_map(|(name, csv)| csv.lines().map(move |l| format!("{name},{l}\n")))
        .collect();
    let out = &args.output.out;
    write(&out.join("program.pl"), &program)?;
    write(
        &out.join("loss.csv"),
        &format!("target,{}\n{losses}", folearn::trainer::LOSS_CSV_HEADER),
    )?;
    let summary = serde_json::to_string_pretty(&outcome.summaries).map_err(|e| e.to_string())?;
    write(&out.join("summary.json"), &(summary + "\n"))?;
    print!("{program}");
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let program = parse_program(&read(&args.program)?).map_err(|e| format!("{}:{e}", args.program.display()))?;
    let mut csv_header = Vec::new();
    let mut csv_row = Vec::new();
    if args.rank {
        let facts = all_facts(&args.data)?;
        let test = match (&args.test_triples, &args.data.test_pos) {
            (Some(t), _) => read_triples(t)?,
            (None, Some(p)) => read_facts(p)?,
            (None, None) => return Err("--rank needs --test-triples or --test-pos".into()),
        };
        let m = rank_metrics(&program, &facts, &test).map_err(|e| e.to_string())?;
        println!(
            "MRR: {:.4}  HITS@1: {:.4}  HITS@3: {:.4}  HITS@10: {:.4}  ({} queries)",
            m.mrr, m.hits1, m.hits3, m.hits10, m.queries
        );
        csv_header.push(RankMetrics::CSV_HEADER.to_string());
        csv_row.push(m.csv_row());
    } else {
        let target = match &args.data.target {
            Some(_) => None,
            None => {
                let heads: Vec<Predicate> = program.rules().iter().map(|r| r.head().predicate.clone()).collect();
                heads.first().cloned().or_else(|| {
                    optional_facts(&args.data.test_pos)
                        .ok()
                        .and_then(|f| f.predicates().into_iter().next())
                })
            }
        };
        let spec = build_spec(&args.data, target)?;
        let r = evaluate(&program, &spec).map_err(|e| e.to_string())?;
        println!("accuracy: {:.3}", r.accuracy);
        csv_header.push("accuracy,positives_covered,positives_total,negatives_entailed,negatives_total".into());
        csv_row.push(format!(
            "{},{},{},{},{}",
            r.accuracy, r.positives_covered, r.positives_total, r.negatives_entailed, r.negatives_total
        ));
    }
    if let Some(path) = &args.metrics {
        write(path, &format!("{}\n{}\n", csv_header.join(","), csv_row.join(",")))?;
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = catalog::generate(&args.name).map_err(|e| e.to_string())?;
    let out = &args.out;
    write(&out.join("bk.pl"), &serialize_facts(&spec.background))?;
    write(&out.join("pos.pl"), &serialize_facts(&spec.positives))?;
    write(&out.join("test_bk.pl"), &serialize_facts(&spec.test_background))?;
    write(&out.join("test_pos.pl"), &serialize_facts(&spec.test_positives))?;
    write(&out.join("test_neg.pl"), &serialize_facts(&spec.test_negatives))?;
    let meta = serde_json::json!({
        "task": spec.name,
        "target": spec.target.to_string(),
        "depth": spec.depth,
        "reconstructed": catalog::RECONSTRUCTED.contains(&args.name.as_str()),
    });
    write(&out.join("task.json"), &(serde_json::to_string_pretty(&meta).map_err(|e| e.to_string())? + "\n"))?;
    println!("wrote {} to {}", spec.name, out.display());
    Ok(())
}

fn cmd_noise(args: NoiseArgs) -> Result<()> {
    let config = learn_config(&args.hyper)?;
    let spec = build_spec(&args.data, None)?;
    let noisy = match (args.sigma, args.mu) {
        (Some(s), _) => {
            if !(s >= 0.0) {
                return Err(format!("--sigma must be non-negative, got {s}"));
            }
            inject_gaussian_noise(&spec, s, args.noise_seed)
        }
        (None, Some(m)) => {
            if !(0.0..=1.0).contains(&m) {
                return Err(format!("--mu must lie in [0,1], got {m}"));
            }
            inject_label_noise(&spec, m, args.noise_seed)
        }
        (None, None) => return Err("one of --sigma or --mu is required".into()),
    };
    run_learn(&noisy, &config, &args.output.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Learn(a) => cmd_learn(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gen(a) => {
            if !CATALOG.contains(&a.name.as_str()) {
                eprintln!("error: unknown task `{}`; available: {}", a.name, CATALOG.join(", "));
                return ExitCode::from(2);
            }
            cmd_gen(a)
        }
        Command::Noise(a) => cmd_noise(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
