//! `leia`: operator tool for scenarios, transcripts, terminal interviews,
//! grading, analytics and the HTTP service.
//!
//! Exit status: 0 success, 1 domain failure (validation or grading
//! rejection), 2 input or I/O error.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use leia_core::analytics::{emd, group_summary, histogram, sad, uniform_edges, Group};
use leia_core::client_sim::{
    render_transcript, ChatProvider, ClientSimulator, ConversationThread, LeakAction, RemoteProvider,
    ScriptedProvider,
};
use leia_core::clock::{Clock, SystemClock};
use leia_core::scenario::{check_complexity, load_scenario, ComplexityReport, ComplexitySpec, Scenario};
use leia_core::{evaluate, mermaid, ClassModel, EvaluationReport, GroupSummary64, Histogram64, Submission};
use leia_service::{Leia, ServiceConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(name = "leia", version, about = "Requirements-elicitation interview trainer")]
struct Cli {
    /// Machine-readable JSON on standard output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Envelope {
    WarmUp,
    MainExercise,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario document and check its reference against its
    /// complexity envelope.
    ValidateScenario {
        path: PathBuf,
        /// Check against a built-in envelope instead of the scenario's own.
        #[arg(long, value_enum)]
        envelope: Option<Envelope>,
    },
    /// Generate a reading transcript for a scenario.
    GenTranscript {
        scenario: PathBuf,
        /// `remote` or `scripted:<replies.json>`.
        #[arg(long, default_value = "remote")]
        provider: ProviderChoice,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interview the simulated client from the terminal. Lines are
    /// questions; `/submit <file>` grades a diagram, `/quit` leaves.
    Interview {
        scenario: PathBuf,
        #[arg(long, default_value = "remote")]
        provider: ProviderChoice,
    },
    /// Grade a Mermaid class diagram against a scenario's reference.
    Grade {
        student: PathBuf,
        scenario: PathBuf,
        /// Open-question note; repeat for several.
        #[arg(long = "note")]
        notes: Vec<String>,
        /// Low-priority note; repeat for several.
        #[arg(long = "low-priority")]
        low_priority: Vec<String>,
    },
    /// Group statistics and duration histogram distances from a CSV with
    /// columns `group,duration_hours,diagram` (diagram paths are relative to
    /// the CSV file).
    Analyze {
        csv: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        low: f64,
        #[arg(long, default_value_t = 1.5)]
        high: f64,
        #[arg(long, default_value_t = 15)]
        bins: usize,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        #[arg(long, default_value = "scenarios")]
        scenarios: PathBuf,
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long, default_value = "remote")]
        provider: ProviderChoice,
        #[arg(long, default_value_t = leia_service::DEFAULT_TIME_LIMIT_MINUTES)]
        time_limit_minutes: i64,
    },
}

#[derive(Clone)]
enum ProviderChoice {
    Remote,
    Scripted(PathBuf),
}

impl std::str::FromStr for ProviderChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "remote" => Ok(Self::Remote),
            Some(("scripted", path)) if !path.is_empty() => Ok(Self::Scripted(path.into())),
            _ => Err("expected `remote` or `scripted:<file>`".into()),
        }
    }
}

impl ProviderChoice {
    fn build(&self) -> Result<Arc<dyn ChatProvider>, Failure> {
        Ok(match self {
            Self::Remote => Arc::new(RemoteProvider::from_env().map_err(|e| Failure::input(anyhow!(e)))?),
            Self::Scripted(path) => {
                Arc::new(ScriptedProvider::from_file(path).map_err(|e| Failure::input(anyhow!(e)))?)
            }
        })
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
    /// Structured cause for `--json` output.
    detail: Option<serde_json::Value>,
}

impl Failure {
    fn domain(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into(), detail: None }
    }

    fn input(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into(), detail: None }
    }

    fn with_detail(mut self, detail: &impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).ok();
        self
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)
}

fn scenario_at(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(&read(path)?)
        .with_context(|| format!("invalid scenario {}", path.display()))
        .map_err(Failure::input)
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("output always serializes"));
}

fn validate_scenario(path: &Path, envelope: Option<Envelope>, json: bool) -> Outcome {
    let text = read(path)?;
    let scenario = match load_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            let detail = json!({"validation": e});
            return Err(Failure::input(anyhow!(e).context(format!("invalid scenario {}", path.display())))
                .with_detail(&detail));
        }
    };
    let spec = match envelope {
        Some(Envelope::WarmUp) => Some(ComplexitySpec::warm_up()),
        Some(Envelope::MainExercise) => Some(ComplexitySpec::main_exercise()),
        None => scenario.complexity.clone(),
    };
    let report: Option<ComplexityReport> =
        spec.map(|spec| check_complexity(&scenario.reference, &spec, &scenario.open_questions));
    let passed = report.as_ref().is_none_or(ComplexityReport::passed);
    if json {
        print_json(&json!({"id": scenario.id, "passed": passed, "complexity": report}));
    } else {
        println!("scenario {}: document valid", scenario.id);
        match &report {
            Some(r) => print!("{r}"),
            None => println!("no complexity envelope to check"),
        }
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::domain(anyhow!("scenario {} is outside its complexity envelope", scenario.id)))
    }
}

fn gen_transcript(scenario: &Path, provider: &ProviderChoice, out: Option<&Path>, json: bool) -> Outcome {
    let scenario = scenario_at(scenario)?;
    let sim = ClientSimulator::for_scenario(provider.build()?, Arc::new(SystemClock), &scenario);
    let turns = sim.generate_transcript(&scenario).map_err(Failure::domain)?;
    let text = render_transcript(&turns);
    match out {
        Some(path) => {
            std::fs::write(path, &text)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(Failure::input)?;
            if json {
                print_json(&json!({"out": path, "turns": turns.len()}));
            } else {
                eprintln!("wrote {} turns to {}", turns.len(), path.display());
            }
        }
        None if json => print_json(&json!({"turns": turns, "text": text})),
        None => print!("{text}"),
    }
    Ok(())
}

fn submission_for(path: &Path) -> Result<Submission, Failure> {
    Ok(Submission {
        mermaid_text: read(path)?,
        ..Default::default()
    })
}

fn report_evaluation(scenario: &Scenario, submission: &Submission, json: bool) -> Result<EvaluationReport, Failure> {
    match evaluate(scenario, submission) {
        Ok(report) => {
            if json {
                print_json(&report);
            } else {
                print!("{}", report.feedback);
            }
            Ok(report)
        }
        Err(e) => {
            let detail = json!({"parse_error": e});
            Err(Failure::domain(anyhow!(e).context("diagram does not parse")).with_detail(&detail))
        }
    }
}

fn interview(scenario: &Path, provider: &ProviderChoice, json: bool) -> Outcome {
    let scenario = scenario_at(scenario)?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let sim = ClientSimulator::for_scenario(provider.build()?, clock, &scenario);
    let mut thread = ConversationThread::for_scenario(&scenario);
    eprintln!("Interviewing the client for {}. Type /submit <file> to hand in, /quit to leave.", scenario.id);

    let stdin = std::io::stdin();
    for line in stdin.lock().lines() {
        let line = line.context("reading standard input").map_err(Failure::input)?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "/quit" {
            return Ok(());
        }
        if let Some(rest) = line.strip_prefix("/submit") {
            let path = rest.trim();
            if path.is_empty() {
                eprintln!("usage: /submit <file>");
                continue;
            }
            let submission = match submission_for(Path::new(path)) {
                Ok(s) => s,
                Err(f) => {
                    eprintln!("error: {:#}", f.error);
                    continue;
                }
            };
            match report_evaluation(&scenario, &submission, json) {
                Ok(_) => return Ok(()),
                Err(f) => {
                    eprintln!("error: {:#}", f.error);
                    continue;
                }
            }
        }
        match sim.post_interviewer_message(&mut thread, line) {
            Ok(exchange) => {
                if json {
                    println!(
                        "{}",
                        json!({"reply": exchange.reply, "leak_flagged": exchange.leak.final_action == LeakAction::Flagged, "leak": exchange.leak})
                    );
                } else {
                    println!("Client: {}", exchange.reply.text);
                    if exchange.leak.final_action == LeakAction::Flagged {
                        eprintln!("[operator] reply still uses: {}", exchange.leak.matched_terms.join(", "));
                    }
                }
            }
            Err(e) => {
                // drop the unanswered question so the next line starts fresh
                thread.withdraw_pending();
                eprintln!("error: {e}");
            }
        }
        std::io::stdout().flush().ok();
    }
    Ok(())
}

fn grade(student: &Path, scenario: &Path, notes: Vec<String>, low_priority: Vec<String>, json: bool) -> Outcome {
    let scenario = scenario_at(scenario)?;
    let submission = Submission {
        mermaid_text: read(student)?,
        open_question_notes: notes,
        low_priority_notes: low_priority,
    };
    report_evaluation(&scenario, &submission, json).map(|_| ())
}

#[derive(Deserialize)]
struct Row {
    group: Group,
    duration_hours: f64,
    diagram: PathBuf,
}

#[derive(Serialize)]
struct Analysis {
    groups: Vec<GroupSummary64>,
    histograms: BTreeMap<Group, Histogram64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    emd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sad: Option<u64>,
}

fn analyze(csv_path: &Path, low: f64, high: f64, bins: usize, json: bool) -> Outcome {
    let base = csv_path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(csv_path)
        .with_context(|| format!("reading {}", csv_path.display()))
        .map_err(Failure::input)?;
    let mut rows: BTreeMap<Group, Vec<(f64, ClassModel)>> = BTreeMap::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row
            .with_context(|| format!("{} record {}", csv_path.display(), i + 1))
            .map_err(Failure::input)?;
        let path = base.join(&row.diagram);
        let model = mermaid::parse(&read(&path)?)
            .with_context(|| format!("{}", path.display()))
            .map_err(Failure::domain)?;
        rows.entry(row.group).or_default().push((row.duration_hours, model));
    }
    if rows.is_empty() {
        return Err(Failure::input(anyhow!("{} has no records", csv_path.display())));
    }
    let edges = uniform_edges(low, high, bins);
    let mut groups = Vec::new();
    let mut histograms = BTreeMap::new();
    for (group, data) in &rows {
        let pairs: Vec<(f64, &ClassModel)> = data.iter().map(|(d, m)| (*d, m)).collect();
        groups.push(group_summary(&pairs, *group).map_err(Failure::domain)?);
        let hours: Vec<f64> = data.iter().map(|(d, _)| *d).collect();
        histograms.insert(*group, histogram(&hours, &edges).map_err(Failure::domain)?);
    }
    let (emd_value, sad_value) = match (histograms.get(&Group::CG), histograms.get(&Group::EG)) {
        (Some(cg), Some(eg)) => (
            Some(emd(cg, eg).map_err(Failure::domain)?),
            Some(sad(cg, eg).map_err(Failure::domain)?),
        ),
        _ => (None, None),
    };
    let analysis = Analysis {
        groups,
        histograms,
        emd: emd_value,
        sad: sad_value,
    };
    if json {
        print_json(&analysis);
        return Ok(());
    }
    println!("group  n    duration (h) min/max/mean/std   classes                    attributes");
    for g in &analysis.groups {
        println!(
            "{:<6} {:<4} {:<32} {:<26} {}",
            format!("{:?}", g.group),
            g.duration_hours.n,
            g.duration_hours.to_string(),
            g.class_count.to_string(),
            g.attribute_count
        );
    }
    for (group, h) in &analysis.histograms {
        let counts: Vec<String> = h.counts().iter().map(u64::to_string).collect();
        println!("{group:?} histogram [{low}, {high}] x {bins}: {}", counts.join(" "));
    }
    if let (Some(e), Some(s)) = (analysis.emd, analysis.sad) {
        println!("EMD {e:.4}  SAD {s}");
    }
    Ok(())
}

fn serve(
    listen: &str,
    scenarios: PathBuf,
    data: PathBuf,
    provider: &ProviderChoice,
    time_limit_minutes: i64,
    json: bool,
) -> Outcome {
    let mut config = ServiceConfig::new(scenarios, data);
    config.time_limit = chrono::Duration::minutes(time_limit_minutes);
    let leia = Leia::open(config, provider.build()?, Arc::new(SystemClock)).map_err(Failure::input)?;
    if json {
        println!("{}", json!({"listen": listen}));
    } else {
        eprintln!("serving on http://{listen}");
    }
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::input)?;
    runtime
        .block_on(leia_service::serve(listen, Arc::new(leia)))
        .with_context(|| format!("serving on {listen}"))
        .map_err(Failure::input)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let json = cli.json;
    let result = match cli.command {
        Command::ValidateScenario { path, envelope } => validate_scenario(&path, envelope, json),
        Command::GenTranscript { scenario, provider, out } => {
            gen_transcript(&scenario, &provider, out.as_deref(), json)
        }
        Command::Interview { scenario, provider } => interview(&scenario, &provider, json),
        Command::Grade {
            student,
            scenario,
            notes,
            low_priority,
        } => grade(&student, &scenario, notes, low_priority, json),
        Command::Analyze { csv, low, high, bins } => analyze(&csv, low, high, bins, json),
        Command::Serve {
            listen,
            scenarios,
            data,
            provider,
            time_limit_minutes,
        } => serve(&listen, scenarios, data, &provider, time_limit_minutes, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            if json {
                print_json(&json!({"error": format!("{:#}", f.error), "exit_code": f.code, "detail": f.detail}));
            }
            ExitCode::from(f.code)
        }
    }
}
