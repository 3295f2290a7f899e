//! `ground`: resolve referring expressions against 3D scene files, run and
//! generate benchmarks, and answer queries interactively.

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use ground3d::eval::{
    captions_ablation, evaluate, generate_benchmark, load_scene_dir, load_statements, run_repl, write_benchmark,
    BenchmarkConfig, EvalError, EvalOptions,
};
use ground3d::reasoner::external::{run_external, ExternalReasonerConfig};
use ground3d::scene::{load_captions, SceneError, Vocabulary};
use ground3d::{
    load_scene, make_action, ActionMode, Grounder, ReasonerError, Scene, SynonymTable, ToolboxParams,
};

#[derive(Parser)]
#[command(name = "ground", version, about = "Ground referring expressions in 3D scenes")]
struct Cli {
    /// TOML or JSON file with [toolbox], [external] and [benchmark] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve one query and print the result as JSON.
    Resolve(ResolveArgs),
    /// Score a statements file against a directory of scenes.
    Eval(EvalArgs),
    /// Write a synthetic benchmark (scenes, captions, truth, statements).
    Gen(GenArgs),
    /// Answer queries typed on stdin, one per line; `:quit` exits.
    Repl(ReplArgs),
    /// Evaluate a generated suite with and without captions.
    Ablation(AblationArgs),
}

#[derive(Args)]
struct ExternalArgs {
    /// Use the external reasoner configured under [external].
    #[arg(long)]
    external: bool,
    /// Chat-completions base URL; overrides the config file.
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
}

#[derive(Args)]
struct ResolveArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Caption sidecar (`{"<id>": "<caption>"}`).
    #[arg(long)]
    captions: Option<PathBuf>,
    query: String,
    /// Include the tool-call trace in the output.
    #[arg(long)]
    trace: bool,
    /// Also write the trace to `<dir>/trace.json`.
    #[arg(long, value_name = "DIR")]
    trace_out: Option<PathBuf>,
    /// Navigation action to emit.
    #[arg(long, value_enum, default_value = "near")]
    action: Action,
    /// Second query, grounded for the other endpoint of `--action between`.
    #[arg(long)]
    second: Option<String>,
    #[command(flatten)]
    external: ExternalArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Action {
    Near,
    Between,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of scene files (captions attached from `<id>_captions.json`).
    #[arg(long, alias = "scenes")]
    scene: PathBuf,
    #[arg(long)]
    statements: PathBuf,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Exclude statements flagged `skip`.
    #[arg(long)]
    skip: bool,
    /// Strip captions before resolution.
    #[arg(long)]
    no_captions: bool,
    /// Write per-statement traces into this directory.
    #[arg(long, value_name = "DIR")]
    trace_out: Option<PathBuf>,
    /// Report path; printed to stdout after the table when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    external: ExternalArgs,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of scenes (default from config, else 20).
    #[arg(long)]
    scenes: Option<usize>,
    /// Number of statements (default from config, else 200).
    #[arg(long)]
    statements: Option<usize>,
    /// Share of view-dependent statements.
    #[arg(long)]
    view_dep: Option<f64>,
    /// Share of hard statements.
    #[arg(long)]
    hard: Option<f64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    mix: MixArgs,
}

#[derive(Args)]
struct ReplArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    captions: Option<PathBuf>,
    #[command(flatten)]
    external: ExternalArgs,
}

#[derive(Args)]
struct AblationArgs {
    #[command(flatten)]
    mix: MixArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    toolbox: ToolboxParams,
    external: Option<ExternalReasonerConfig>,
    benchmark: BenchmarkConfig,
    /// Synonym table JSON replacing the built-in one.
    synonyms: Option<PathBuf>,
    /// Attribute vocabulary JSON replacing the built-in one.
    vocabulary: Option<PathBuf>,
}

/// Failure classes, one exit code each.
#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Parse(String),
    Grounding(String),
    NeedsExternal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Parse(_) => 4,
            Failure::Grounding(_) => 5,
            Failure::NeedsExternal(_) => 6,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::NeedsExternal(m) => format!("needs external reasoner: {m}"),
            Failure::Config(m) => format!("config error: {m}"),
            Failure::Io(m) | Failure::Parse(m) | Failure::Grounding(m) => m.clone(),
        }
    }
}

impl From<SceneError> for Failure {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Io { .. } => Failure::Io(e.to_string()),
            SceneError::InvalidConfig(_) => Failure::Config(e.to_string()),
            _ => Failure::Parse(e.to_string()),
        }
    }
}

impl From<ReasonerError> for Failure {
    fn from(e: ReasonerError) -> Self {
        match e {
            ReasonerError::OutOfGrammar(p) => Failure::NeedsExternal(p.to_string()),
            ReasonerError::Config(m) => Failure::Config(m),
            other => Failure::Grounding(other.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } => Failure::Io(e.to_string()),
            EvalError::Scene(s) => s.into(),
            EvalError::Reasoner(r) => r.into(),
            EvalError::UnknownScene { .. } => Failure::Parse(e.to_string()),
            EvalError::InvalidOptions(_) | EvalError::InfeasibleMix(_) => Failure::Config(e.to_string()),
            EvalError::Generation(_) => Failure::Grounding(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    let config: Config = parsed.map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    config.toolbox.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(config)
}

fn grounder(config: &Config) -> Result<Grounder> {
    let mut g = Grounder::new(config.toolbox.clone());
    if let Some(path) = &config.synonyms {
        g.synonyms = SynonymTable::load(path)?;
    }
    if let Some(path) = &config.vocabulary {
        g.vocab = Vocabulary::load(path)?;
    }
    Ok(g)
}

/// The external config when `--external` is set; an endpoint must come from
/// the flag or the config file.
fn external_config(config: &Config, args: &ExternalArgs) -> Result<Option<ExternalReasonerConfig>> {
    if !args.external {
        return Ok(None);
    }
    let mut external = config.external.clone().unwrap_or_default();
    if let Some(url) = &args.endpoint {
        external.base_url = Some(url.clone());
    }
    external.validate()?;
    Ok(Some(external))
}

fn scene_with_captions(path: &Path, captions: Option<&Path>) -> Result<Scene> {
    let scene = load_scene(path)?;
    Ok(match captions {
        Some(c) => scene.attach_captions(&load_captions(c)?)?,
        None => scene,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("values serialize") + "\n"
}

fn resolve(config: &Config, args: &ResolveArgs) -> Result<()> {
    let external = external_config(config, &args.external)?;
    let grounder = grounder(config)?;
    let scene = scene_with_captions(&args.scene, args.captions.as_deref())?;
    let ground = |query: &str| -> Result<ground3d::GroundingResult> {
        Ok(match &external {
            Some(ext) => {
                let mut backend = ext.backend_for(query)?;
                run_external(ext, backend.as_mut(), &grounder, &scene, query)?
            }
            None => grounder.resolve_utterance(query, &scene)?,
        })
    };
    let result = ground(&args.query)?;
    if result.target_id.is_none() {
        return Err(Failure::Grounding(format!("no object matches {:?}", args.query)));
    }
    let (mode, second) = match args.action {
        Action::Near => (ActionMode::Near, None),
        Action::Between => {
            let query = args
                .second
                .as_deref()
                .ok_or_else(|| Failure::Config("--action between needs --second".into()))?;
            (ActionMode::Between, Some(ground(query)?))
        }
    };
    let action = make_action(&result, &scene, mode, second.as_ref()).map_err(|e| Failure::Grounding(e.to_string()))?;

    if let Some(dir) = &args.trace_out {
        write_file(&dir.join("trace.json"), &pretty(&result.trace))?;
    }
    let mut out = serde_json::to_value(&result).expect("results serialize");
    if !args.trace {
        out.as_object_mut().expect("object").remove("trace");
    }
    out["action"] = serde_json::to_value(&action).expect("actions serialize");
    print!("{}", pretty(&out));
    Ok(())
}

fn eval(config: &Config, args: &EvalArgs) -> Result<()> {
    let external = external_config(config, &args.external)?;
    let grounder = grounder(config)?;
    let scenes = load_scene_dir(&args.scene)?;
    let (statements, malformed) = load_statements(&args.statements)?;
    for m in &malformed {
        eprintln!("{}:{}: skipped malformed line: {}", args.statements.display(), m.line, m.message);
    }
    let options = EvalOptions {
        trials: args.trials,
        skip: args.skip,
        no_captions: args.no_captions,
        external,
        trace_dir: args.trace_out.clone(),
    };
    let report = evaluate(&scenes, &statements, malformed, &options, &grounder)?;
    print!("{}", report.table());
    match &args.report {
        Some(path) => write_file(path, &report.to_json())?,
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

fn benchmark_config(config: &Config, mix: &MixArgs) -> BenchmarkConfig {
    let mut b = config.benchmark.clone();
    if let Some(n) = mix.scenes {
        b.n_scenes = n;
    }
    if let Some(n) = mix.statements {
        b.n_statements = n;
    }
    if mix.view_dep.is_some() {
        b.mix.view_dep = mix.view_dep;
    }
    if mix.hard.is_some() {
        b.mix.hard = mix.hard;
    }
    b.statement.params = config.toolbox.clone();
    b
}

fn gen(config: &Config, args: &GenArgs) -> Result<()> {
    let bench = generate_benchmark(&benchmark_config(config, &args.mix), args.mix.seed)?;
    write_benchmark(&bench, &args.out)?;
    let count = |tag: &str| bench.statements.iter().filter(|s| s.tags.contains(tag)).count();
    println!(
        "wrote {} scenes and {} statements to {} (hard {}, easy {}, view_dep {}, view_indep {})",
        bench.scenes.len(),
        bench.statements.len(),
        args.out.display(),
        count("hard"),
        count("easy"),
        count("view_dep"),
        count("view_indep"),
    );
    Ok(())
}

fn repl(config: &Config, args: &ReplArgs) -> Result<()> {
    let external = external_config(config, &args.external)?;
    let grounder = grounder(config)?;
    let scene = scene_with_captions(&args.scene, args.captions.as_deref())?;
    let stdin = io::stdin();
    run_repl(&grounder, &scene, external.as_ref(), stdin.lock(), io::stdout().lock())
        .map_err(|e| Failure::Io(format!("terminal: {e}")))
}

fn ablation(config: &Config, args: &AblationArgs) -> Result<()> {
    let grounder = grounder(config)?;
    let (_, report) = captions_ablation(&benchmark_config(config, &args.mix), args.mix.seed, &grounder)?;
    println!("captions on\n{}", report.captions_on.table());
    println!("captions off\n{}", report.captions_off.table());
    println!("difference: {:.2} pp", report.delta_pp);
    if let Some(path) = &args.report {
        let summary: Value = json!({
            "captions_on": report.captions_on.splits,
            "captions_off": report.captions_off.splits,
            "delta_pp": report.delta_pp,
        });
        write_file(path, &pretty(&summary))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Resolve(a) => resolve(&config, a),
        Command::Eval(a) => eval(&config, a),
        Command::Gen(a) => gen(&config, a),
        Command::Repl(a) => repl(&config, a),
        Command::Ablation(a) => ablation(&config, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ground: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
