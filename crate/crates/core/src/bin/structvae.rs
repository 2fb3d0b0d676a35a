use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use structvae::asdl::{parse_grammar_unchecked, validate_grammar, AsdlGrammar};
use structvae::config::{ExperimentConfig, Mode};
use structvae::corpus::{
    evaluate, make_toy_task, sample_utterances, signal_report, Dataset, ToySizes,
};
use structvae::experiment::{run_seed, ExperimentData, ExperimentError, Score};
use structvae::models::Checkpoint;
use structvae::mr::{delinearize, generic, linearize, parse_mr, print_mr, MrKind};
use structvae::trainer::{TrainerConfig, Unlabeled, VaeModels};
use structvae::transition::{actions_to_ast, ast_to_actions, Ast};

const USAGE: u8 = 1;
const DATA: u8 = 2;
const TRAIN: u8 = 3;

/// Semi-supervised semantic parsing with tree-structured latent variables.
#[derive(Parser)]
#[command(name = "structvae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grammar utilities.
    Grammar {
        #[command(subcommand)]
        command: GrammarCommand,
    },
    /// Reference checks against the transition system and MR adapters.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Train one model per configured seed.
    Train(TrainArgs),
    /// Exact-match accuracy of a trained parser.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Compare MRs verbatim instead of up to conjunct order.
        #[arg(long)]
        no_canonicalize: bool,
        #[arg(long, default_value_t = 100)]
        max_steps: usize,
    },
    /// Draw MRs from the prior and utterances from the reconstruction model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_rejections: usize,
        #[arg(long, default_value_t = 60)]
        max_len: usize,
        /// Only draw MRs; no utterances.
        #[arg(long)]
        prior_only: bool,
    },
    /// Training diagnostics.
    Diagnose {
        #[command(subcommand)]
        command: DiagnoseCommand,
    },
    /// Write a synthetic toy corpus as train/dev/test TSV files.
    MakeToy {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        dev: usize,
        #[arg(long, default_value_t = 100)]
        test: usize,
    },
}

#[derive(Subcommand)]
enum GrammarCommand {
    /// Parse and validate a grammar file.
    Check {
        file: PathBuf,
        /// Root type; defaults to the first composite type.
        #[arg(long)]
        root: Option<String>,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// AST -> actions -> AST and surface -> AST -> surface on every labeled line.
    Roundtrip {
        grammar: PathBuf,
        dataset: PathBuf,
        /// MR format; inferred from the grammar when omitted.
        #[arg(long)]
        kind: Option<MrKind>,
    },
}

#[derive(Subcommand)]
enum DiagnoseCommand {
    /// Learning signals of gold and non-gold samples.
    Signals {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Override the sample size stored with the model.
        #[arg(long)]
        sample_size: Option<usize>,
        #[arg(long)]
        kl_weight: Option<f64>,
        /// Also score utterances that were labeled during training.
        #[arg(long)]
        include_labeled: bool,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    mode: Option<Mode>,
    /// Replaces the configured seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Code<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Code<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Failure {
        let code = match e {
            ExperimentError::Config(_) => USAGE,
            ExperimentError::Train(_) => TRAIN,
            _ => DATA,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .code(DATA)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Grammar {
            command: GrammarCommand::Check { file, root },
        } => grammar_check(&file, root),
        Command::Oracle {
            command:
                OracleCommand::Roundtrip {
                    grammar,
                    dataset,
                    kind,
                },
        } => oracle_roundtrip(&grammar, &dataset, kind),
        Command::Train(args) => train(args),
        Command::Eval {
            model,
            data,
            no_canonicalize,
            max_steps,
        } => {
            let ck = load_model(&model)?;
            let ds = Dataset::load(&data, ck.kind, true).code(DATA)?;
            let labeled = ds.labeled();
            let m = evaluate(&ck.parser, ck.kind, &labeled, max_steps, !no_canonicalize);
            print_json(&m);
            Ok(())
        }
        Command::Sample {
            model,
            n,
            seed,
            max_rejections,
            max_len,
            prior_only,
        } => {
            let ck = load_model(&model)?;
            let prior = ck
                .prior
                .as_ref()
                .ok_or_else(|| anyhow!("model has no prior"))
                .code(DATA)?;
            let recon = (!prior_only).then_some(&ck.recon);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = sample_utterances(prior, recon, ck.kind, n, max_rejections, max_len, &mut rng)
                .code(DATA)?;
            print_json(&r);
            Ok(())
        }
        Command::Diagnose {
            command:
                DiagnoseCommand::Signals {
                    model,
                    data,
                    sample_size,
                    kl_weight,
                    include_labeled,
                },
        } => {
            let ck = load_model(&model)?;
            let mut cfg: TrainerConfig = ck
                .config
                .get("trainer")
                .and_then(|t| serde_json::from_value(t.clone()).ok())
                .unwrap_or_default();
            if let Some(s) = sample_size {
                cfg.sample_size = s;
            }
            if let Some(l) = kl_weight {
                cfg.kl_weight = l;
            }
            cfg.validate().code(USAGE)?;
            let seen: Vec<String> = if include_labeled {
                Vec::new()
            } else {
                ck.config
                    .get("labeled_utterances")
                    .and_then(|v| serde_json::from_value(v.clone()).ok())
                    .unwrap_or_default()
            };
            let ds = Dataset::load(&data, ck.kind, true).code(DATA)?;
            let unlabeled: Vec<Unlabeled> = ds
                .examples
                .into_iter()
                .filter(|e| !seen.contains(&e.utterance.join(" ")))
                .map(|e| Unlabeled {
                    x: e.utterance,
                    gold: e.mr,
                })
                .collect();
            let models = VaeModels::from_checkpoint(ck);
            let report = signal_report(&models, &cfg, &unlabeled).code(TRAIN)?;
            print_json(&report);
            Ok(())
        }
        Command::MakeToy {
            seed,
            out,
            train,
            dev,
            test,
        } => {
            let t = make_toy_task(seed, ToySizes { train, dev, test });
            fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))
                .code(DATA)?;
            for (name, ds) in [("train", &t.train), ("dev", &t.dev), ("test", &t.test)] {
                ds.save(&out.join(format!("{name}.tsv"))).code(DATA)?;
            }
            print_json(&json!({ "seed": seed, "train": train, "dev": dev, "test": test }));
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path).code(DATA)
}

fn grammar_check(file: &Path, root: Option<String>) -> Result<(), Failure> {
    let text = fs::read_to_string(file)
        .with_context(|| format!("reading {}", file.display()))
        .code(DATA)?;
    let g = parse_grammar_unchecked(&text, root.as_deref().unwrap_or("")).code(DATA)?;
    let root = root.or_else(|| {
        g.types()
            .iter()
            .find(|t| !t.is_primitive())
            .map(|t| t.name.clone())
    });
    let Some(root) = root else {
        return Err(Failure {
            code: DATA,
            error: anyhow!("grammar declares no productions"),
        });
    };
    let g = parse_grammar_unchecked(&text, &root).code(DATA)?;
    let diagnostics: Vec<String> = validate_grammar(&g).iter().map(|d| d.to_string()).collect();
    print_json(&json!({
        "valid": diagnostics.is_empty(),
        "root": root,
        "types": g.types().len(),
        "constructors": g.constructors().len(),
        "diagnostics": diagnostics,
    }));
    if diagnostics.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: DATA,
            error: anyhow!("{} grammar violation(s)", diagnostics.len()),
        })
    }
}

#[derive(Serialize)]
struct RoundtripFailure {
    line: usize,
    stage: &'static str,
    message: String,
}

fn oracle_roundtrip(grammar: &Path, dataset: &Path, kind: Option<MrKind>) -> Result<(), Failure> {
    let text = fs::read_to_string(grammar)
        .with_context(|| format!("reading {}", grammar.display()))
        .code(DATA)?;
    let first = parse_grammar_unchecked(&text, "").code(DATA)?;
    let root = first
        .types()
        .iter()
        .find(|t| !t.is_primitive())
        .map(|t| t.name.clone())
        .unwrap_or_default();
    let bundled = |k: MrKind| k.grammar_ref().render();
    // A bundled kind whose grammar matches, else the generic s-expression format.
    let kind = kind.or_else(|| {
        [MrKind::Lambda, MrKind::PyLite, MrKind::Toy]
            .into_iter()
            .find(|k| {
                structvae::asdl::parse_grammar(&text, k.grammar_ref().root_type())
                    .is_ok_and(|g| g.render() == bundled(*k))
            })
    });
    let g: AsdlGrammar = match kind {
        Some(k) => k.grammar(),
        None => structvae::asdl::parse_grammar(&text, &root).code(DATA)?,
    };
    let g = std::sync::Arc::new(g);
    let data = fs::read_to_string(dataset)
        .with_context(|| format!("reading {}", dataset.display()))
        .code(DATA)?;
    let mut failures = Vec::new();
    let mut total = 0;
    for (i, line) in data.lines().enumerate() {
        let Some((_, mr)) = line.split_once('\t') else {
            continue;
        };
        total += 1;
        let fail = |stage, message: String| RoundtripFailure {
            line: i + 1,
            stage,
            message,
        };
        let parsed = match kind {
            Some(k) => parse_mr(k, mr.trim()).map_err(|e| e.to_string()),
            None => generic::parse(&g, mr.trim()).map_err(|e| e.to_string()),
        };
        let z = match parsed {
            Ok(z) => z,
            Err(e) => {
                failures.push(fail("parse", e));
                continue;
            }
        };
        if let Err(msg) = roundtrip_one(&g, &z, kind) {
            failures.push(fail(msg.0, msg.1));
        }
    }
    let ok = total - failures.len();
    print_json(
        &json!({ "kind": kind.map(MrKind::name).unwrap_or("generic"), "total": total, "ok": ok, "failures": failures }),
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: DATA,
            error: anyhow!("{} of {total} MRs failed to roundtrip", failures.len()),
        })
    }
}

fn roundtrip_one(
    g: &std::sync::Arc<AsdlGrammar>,
    z: &Ast,
    kind: Option<MrKind>,
) -> Result<(), (&'static str, String)> {
    let actions = ast_to_actions(g, z).map_err(|e| ("actions", e.to_string()))?;
    let back = actions_to_ast(g, &actions).map_err(|e| ("actions", e.to_string()))?;
    if &back != z {
        return Err(("actions", "AST differs after replaying its actions".into()));
    }
    let printed = match kind {
        Some(k) => print_mr(k, z),
        None => generic::print(g, z),
    }
    .map_err(|e| ("print", e.to_string()))?;
    let reparsed = match kind {
        Some(k) => parse_mr(k, &printed),
        None => generic::parse(g, &printed),
    }
    .map_err(|e| ("print", e.to_string()))?;
    if &reparsed != z {
        return Err((
            "print",
            format!("reparsing `{printed}` gives a different AST"),
        ));
    }
    if let Some(k) = kind {
        let m = linearize(z, k).map_err(|e| ("linearize", e.to_string()))?;
        let d = delinearize(&m).map_err(|e| ("linearize", e.to_string()))?;
        if &d != z {
            return Err(("linearize", "AST differs after delinearizing".into()));
        }
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&args.config).code(USAGE)?;
    if let Some(m) = args.mode {
        cfg.experiment.mode = m;
    }
    if let Some(s) = args.seeds {
        cfg.experiment.seeds = s;
    }
    if let Some(o) = args.out {
        cfg.experiment.output = o;
    } else if cfg.experiment.output.is_relative() {
        let base = args.config.parent().unwrap_or(Path::new("."));
        cfg.experiment.output = base.join(&cfg.experiment.output);
    }
    cfg.validate().code(USAGE)?;
    let data = ExperimentData::load(&cfg)?;
    let out = cfg.experiment.output.clone();
    fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .code(DATA)?;
    let mut runs = Vec::new();
    for &seed in &cfg.experiment.seeds {
        let run = run_seed(&cfg, &data, seed)?;
        let dir = out.join(format!("seed-{seed}"));
        fs::create_dir_all(&dir)
            .with_context(|| format!("creating {}", dir.display()))
            .code(DATA)?;
        let mut history = String::new();
        for r in &run.history {
            history.push_str(&serde_json::to_string(r).expect("serializable"));
            history.push('\n');
        }
        fs::write(dir.join("history.jsonl"), history)
            .context("writing history")
            .code(DATA)?;
        let mut tcfg = cfg.trainer.clone();
        tcfg.seed = seed;
        let meta = json!({
            "trainer": tcfg,
            "model": cfg.model,
            "mode": run.mode,
            "labeled_utterances": run.labeled_utterances,
        });
        let models = run.models.as_ref().expect("fresh run");
        models
            .to_checkpoint(meta)
            .save(&dir.join("model.json"))
            .code(DATA)?;
        write_json(&dir.join("metrics.json"), &run)?;
        runs.push(json!({
            "seed": seed,
            "labeled": run.labeled,
            "unlabeled": run.unlabeled,
            "epochs": run.history.len(),
            "pseudo_labeled": run.pseudo_labeled,
            "dev": Score::from(&run.dev),
            "test": run.test.as_ref().map(Score::from),
        }));
    }
    let mean = |key: &str| {
        let xs: Vec<f64> = runs
            .iter()
            .filter_map(|r| r[key]["accuracy"].as_f64())
            .collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    };
    let summary = json!({
        "kind": cfg.experiment.kind,
        "mode": cfg.experiment.mode,
        "mean_dev_accuracy": mean("dev"),
        "mean_test_accuracy": mean("test"),
        "runs": runs,
    });
    write_json(&out.join("summary.json"), &summary)?;
    print_json(&summary);
    Ok(())
}
