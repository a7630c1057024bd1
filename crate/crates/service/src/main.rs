use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use belief_dialog::classifier::{
    baseline_holdout, evaluate_corpus, format_corpus, holdout_indices, save_model, synthetic_corpus, train, BeliefPredictor,
    FixedBelief,
};
use belief_dialog::dialog::DialogEngine;
use belief_dialog::epistemic::{derive_directives, forward_chain, parse_facts};
use belief_dialog::extraction::{assert_facts, extract_triples};
use belief_dialog::text::Utterance;
use belief_dialog_service::{AdvisorService, AppConfig, ConfigError};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "beliefdm", version, about = "Belief-driven course advising dialog manager")]
struct Cli {
    /// TOML config; assets it does not name come from the bundled set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the server port.
    #[arg(long, global = true)]
    port: Option<u16>,
    /// Override the training and corpus-generation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the belief classifier and save it.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Held-out accuracy of a model next to the naive Bayes baseline.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Score the whole corpus instead of the held-out split.
        #[arg(long)]
        all: bool,
    },
    /// Belief distribution for one utterance.
    Infer { text: Vec<String> },
    /// Triples and asserted facts for one utterance.
    Extract { text: Vec<String> },
    /// Closure of a fact file under the rulebase.
    Reason {
        /// Facts, one `pred(args).` per line.
        facts: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Terminal conversation over the dialog engine.
    Chat {
        /// Use a fixed belief label instead of the model.
        #[arg(long)]
        belief: Option<String>,
    },
    /// Run the HTTP service.
    Serve,
    /// Write a templated labelled corpus.
    GenCorpus {
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `println!` that reports a closed stdout instead of panicking.
macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*).map_err(Failure::Output)?
    };
}

#[derive(Debug)]
enum Failure {
    Output(std::io::Error),
    Usage(String),
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn joined(words: &[String]) -> Result<String, Failure> {
    let text = words.join(" ");
    if text.trim().is_empty() {
        return Err(Failure::Usage("no utterance given".into()));
    }
    Ok(text)
}

fn print_json(v: &impl serde::Serialize) -> Result<(), Failure> {
    say!("{}", serde_json::to_string_pretty(v).map_err(runtime)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.training.seed = seed;
    }
    if let Some(port) = cli.port {
        cfg.server.port = port;
    }
    match cli.command {
        Command::Train { corpus, out, epochs } => {
            if let Some(p) = corpus {
                cfg.assets.corpus = Some(p);
            }
            if let Some(e) = epochs {
                cfg.training.epochs = e;
            }
            cfg.training.validate().map_err(|e| Failure::Config(e.to_string()))?;
            let data = cfg.corpus()?;
            let pre = cfg.preprocessor()?;
            let (model, report) = train(&data, &cfg.labels, &pre, &cfg.training).map_err(runtime)?;
            save_model(&model, &out).map_err(runtime)?;
            if cli.json {
                return print_json(&report);
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for e in &report.epochs {
                let test = e.test_accuracy.map_or("-".to_string(), |a| format!("{a:.3}"));
                say!("epoch {:>3}  loss {:.4}  train acc {:.3}  test acc {test}", e.epoch, e.train_loss, e.train_accuracy);
            }
            if let Some(t) = &report.test {
                say!("held-out accuracy {:.3} on {} utterances", t.accuracy, t.total);
            }
            say!("saved {}", out.display());
        }
        Command::Eval { model, corpus, all } => {
            if let Some(p) = model {
                cfg.assets.model = Some(p);
            }
            if let Some(p) = corpus {
                cfg.assets.corpus = Some(p);
            }
            let model = cfg.model()?;
            let pre = cfg.preprocessor()?;
            let data = cfg.corpus()?;
            let (lstm, baseline) = if all {
                (evaluate_corpus(&model, &pre, &data).map_err(runtime)?, None)
            } else {
                let (_, test) = holdout_indices(&data, &model.labels, &cfg.training).map_err(runtime)?;
                let held: Vec<_> = test.iter().map(|&i| data[i].clone()).collect();
                let nb = baseline_holdout(&data, &model.labels, &pre, &cfg.training).map_err(runtime)?;
                (evaluate_corpus(&model, &pre, &held).map_err(runtime)?, Some(nb))
            };
            if cli.json {
                return print_json(&json!({ "labels": model.labels, "lstm": lstm, "naive_bayes": baseline }));
            }
            say!("lstm accuracy {:.3} on {} utterances", lstm.accuracy, lstm.total);
            say!("confusion (rows true, columns predicted; {})", model.labels.join(", "));
            for row in &lstm.confusion {
                say!("  {}", row.iter().map(|n| format!("{n:>4}")).collect::<String>());
            }
            if let Some(nb) = baseline {
                say!("naive Bayes accuracy {:.3}", nb.accuracy);
            }
        }
        Command::Infer { text } => {
            let text = joined(&text)?;
            let dist = cfg.classifier()?.predict(&text).map_err(runtime)?;
            if cli.json {
                return print_json(&dist);
            }
            say!("{}", dist.label());
            for (l, p) in dist.labels.iter().zip(&dist.probs) {
                say!("  {l:<10} {p:.4}");
            }
        }
        Command::Extract { text } => {
            let text = joined(&text)?;
            let engine = cfg.engine_with(Arc::new(FixedBelief::one_hot(cfg.labels.clone(), &cfg.labels[0]).map_err(runtime)?))?;
            let triples = extract_triples(&Utterance::user(&text, 1), &engine.lexicon);
            let facts = assert_facts(&triples, &engine.assertions, &engine.lexicon).map_err(runtime)?;
            if cli.json {
                return print_json(&json!({ "triples": triples, "facts": facts.iter().map(ToString::to_string).collect::<Vec<_>>() }));
            }
            for t in &triples {
                say!("triple {t}");
            }
            for f in facts.iter() {
                say!("fact   {f}");
            }
        }
        Command::Reason { facts, rules } => {
            if let Some(p) = rules {
                cfg.assets.rules = Some(p);
            }
            let rules = cfg.rules()?;
            let text = std::fs::read_to_string(&facts).map_err(|e| Failure::Runtime(format!("{}: {e}", facts.display())))?;
            let facts = parse_facts(&text).map_err(runtime)?;
            let result = forward_chain(&rules, &facts, cfg.limits()).map_err(runtime)?;
            let directives = derive_directives(&result).map_err(runtime)?;
            if cli.json {
                return print_json(&json!({
                    "facts": result.derived.iter().map(ToString::to_string).collect::<Vec<_>>(),
                    "fired_rules": result.fired_rules(),
                    "directives": directives,
                }));
            }
            for f in result.derived.iter() {
                let marker = if facts.contains(f) { " " } else { "+" };
                say!("{marker} {f}");
            }
            say!("fired: {}", result.fired_rules().join(", "));
        }
        Command::Chat { belief } => {
            let engine = match belief {
                Some(label) => cfg.engine_with(Arc::new(FixedBelief::one_hot(cfg.labels.clone(), &label).map_err(|e| Failure::Usage(e.to_string()))?))?,
                None => cfg.engine()?,
            };
            chat(&engine, cli.json)?;
        }
        Command::Serve => {
            let engine = cfg.engine()?;
            let service = match &cfg.server.journal {
                Some(p) => AdvisorService::with_journal(engine, p).map_err(runtime)?,
                None => AdvisorService::in_memory(engine),
            };
            let addr: SocketAddr = format!("{}:{}", cfg.server.host, cfg.server.port)
                .parse()
                .map_err(|e| Failure::Config(format!("server address: {e}")))?;
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(belief_dialog_service::serve(
                Arc::new(service),
                addr,
                |bound| {
                    println!("listening on http://{bound}");
                    let _ = std::io::stdout().flush();
                },
                async {
                    let _ = tokio::signal::ctrl_c().await;
                },
            ))
            .map_err(runtime)?;
        }
        Command::GenCorpus { per_class, out } => {
            let text = format_corpus(&synthetic_corpus(per_class, cfg.training.seed));
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
                None => std::io::stdout().write_all(text.as_bytes()).map_err(Failure::Output)?,
            }
        }
    }
    Ok(())
}

fn chat(engine: &DialogEngine, json_out: bool) -> Result<(), Failure> {
    let mut session = engine.new_session("terminal");
    say!("advisor: {}", engine.fsm.greeting);
    let stdin = std::io::stdin();
    for line in stdin.lock().lines() {
        let line = line.map_err(runtime)?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = engine.process_turn(&mut session, &line).map_err(runtime)?;
        if json_out {
            say!("{}", serde_json::to_string(&reply).map_err(runtime)?);
        } else {
            let p = &reply.payload;
            say!("advisor: {}", reply.reply);
            say!("  belief {}  fired [{}]  skipped [{}]", p.belief.label, p.fired_rules.join(", "), p.skipped_states.join(", "));
        }
        if !session.is_active() {
            break;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Output(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Output(e)) => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
