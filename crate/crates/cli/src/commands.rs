use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Read, Write};
use std::path::{Path, PathBuf};

use chrono::SecondsFormat;
use evoforge_core::corpus::VoiceSpace;
use evoforge_core::evolution::EvolutionConfig;
use evoforge_core::judge::{convergence_experiment, restart_utility_experiment, summarize, TrialSummary};
use evoforge_core::PcaModel;
use evoforge_core::synth::{encode_wav, synthesize, BackendRegistry, SynthesisRequest};
use evoforge_core::voicefile::{decode_voicefile, VoiceFile};
use evoforge_core::TrialReport;
use evoforge_service::ServiceConfig;
use serde_json::json;

use crate::error::CliError;
use crate::{CompareArgs, EvolutionArgs, ReportArgs, ReportFormat, ServeArgs, TrialArgs};

const STDIO: &str = "-";

impl EvolutionArgs {
    fn config(&self) -> Result<EvolutionConfig, CliError> {
        let config = EvolutionConfig {
            epsilon: self.epsilon,
            sigma_scale: self.sigma_scale,
            restart_scale: self.restart_scale,
            rng_seed: self.base_seed,
            ..EvolutionConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == STDIO
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path.filter(|p| !is_stdio(p)) {
        Some(p) => fs::write(p, bytes).map_err(CliError::io(p)),
        None => match io::stdout().lock().write_all(bytes) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(CliError::io(Path::new(STDIO))(e)),
            _ => Ok(()),
        },
    }
}

pub fn summary_table(s: &TrialSummary) -> String {
    let mut t = String::new();
    let rows = [
        ("trials", s.trials.to_string()),
        ("median final/initial", format!("{:.4}", s.median_ratio)),
        ("mean final/initial", format!("{:.4}", s.mean_ratio)),
        ("q25 .. q75", format!("{:.4} .. {:.4}", s.q25_ratio, s.q75_ratio)),
        ("improved", format!("{}/{}", s.improved, s.trials)),
        ("monotone", format!("{}/{}", s.monotone, s.trials)),
        ("mean restarts", format!("{:.2}", s.mean_restarts)),
    ];
    for (k, v) in rows {
        let _ = writeln!(t, "{k:<22}{v}");
    }
    t
}

pub fn run_trials(args: &TrialArgs) -> Result<(), CliError> {
    let config = args.evolution.config()?;
    let space = VoiceSpace::reference();
    let reports = convergence_experiment(
        &space,
        &config,
        args.seeds,
        args.evolution.generations,
        args.noise,
        args.evolution.base_seed,
    )?;
    let mut lines = Vec::new();
    for r in &reports {
        serde_json::to_writer(&mut lines, r).expect("reports serialize");
        lines.push(b'\n');
    }
    let table = summary_table(&summarize(&reports));
    match args.out.as_deref().filter(|p| !is_stdio(p)) {
        Some(path) => {
            write_output(Some(path), &lines)?;
            write_output(None, table.as_bytes())?;
        }
        None => {
            write_output(None, &lines)?;
            eprint!("{table}");
        }
    }
    Ok(())
}

pub fn compare_restarts(args: &CompareArgs) -> Result<(), CliError> {
    let config = args.evolution.config()?;
    let space = VoiceSpace::reference();
    let cmp = restart_utility_experiment(
        &space,
        &config,
        args.pairs,
        args.evolution.generations,
        args.evolution.base_seed,
    )?;
    let text = serde_json::to_string_pretty(&cmp).expect("comparison serializes") + "\n";
    write_output(None, text.as_bytes())
}

fn read_reports(path: &Path) -> Result<Vec<TrialReport>, CliError> {
    let reader: Box<dyn BufRead> = if is_stdio(path) {
        Box::new(io::stdin().lock())
    } else {
        Box::new(io::BufReader::new(fs::File::open(path).map_err(CliError::io(path))?))
    };
    let mut reports = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let report = serde_json::from_str(&line).map_err(|source| CliError::Report {
            path: path.to_owned(),
            line: i + 1,
            source,
        })?;
        reports.push(report);
    }
    Ok(reports)
}

pub fn export_report(args: &ReportArgs) -> Result<(), CliError> {
    let reports = read_reports(&args.input)?;
    let summary = summarize(&reports);
    let out = match args.format {
        ReportFormat::Table => summary_table(&summary),
        ReportFormat::Json => serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
        ReportFormat::Csv => {
            let mut s = String::from("seed,generations_run,initial_distance,final_distance,ratio,restart_count,monotone\n");
            for r in &reports {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.seed,
                    r.generations_run,
                    r.initial_distance,
                    r.final_distance,
                    r.ratio(),
                    r.restart_count,
                    r.is_monotone()
                );
            }
            s
        }
    };
    write_output(None, out.as_bytes())
}

fn load_voicefile(path: &Path) -> Result<VoiceFile, CliError> {
    let mut bytes = Vec::new();
    if is_stdio(path) {
        io::stdin().lock().read_to_end(&mut bytes).map_err(CliError::io(path))?;
    } else {
        bytes = fs::read(path).map_err(CliError::io(path))?;
    }
    decode_voicefile(&bytes).map_err(|source| CliError::VoiceFile {
        path: path.to_owned(),
        source,
    })
}

fn load_pca(path: Option<&Path>) -> Result<PcaModel, CliError> {
    match path {
        Some(p) => Ok(PcaModel::from_json(&fs::read_to_string(p).map_err(CliError::io(p))?)?),
        None => Ok(VoiceSpace::reference().pca),
    }
}

pub fn inspect(path: &Path, pca_model: Option<&Path>) -> Result<(), CliError> {
    let voice = load_voicefile(path)?;
    let pca = load_pca(pca_model)?;
    let consistency = match voice.consistency_error(&pca) {
        Ok(err) => json!({ "max_abs_error": err, "consistent": voice.check_consistency(&pca).is_ok() }),
        Err(e) => json!({ "consistent": false, "reason": e.to_string() }),
    };
    let out = json!({
        "version": voice.version,
        "generations": voice.generations,
        "rng_seed": voice.rng_seed,
        "created_at": voice.created_at.to_rfc3339_opts(SecondsFormat::Millis, true),
        "backend_hint": voice.backend_hint,
        "pca_coeffs": voice.pca_coeffs.as_slice(),
        "embedding": voice.embedding.as_slice(),
        "consistency": consistency,
    });
    let text = serde_json::to_string_pretty(&out).expect("json value serializes") + "\n";
    write_output(None, text.as_bytes())
}

pub fn synth(path: &Path, text: &str, sample_rate: u32, out: Option<PathBuf>) -> Result<(), CliError> {
    let voice = load_voicefile(path)?;
    let backend = BackendRegistry::default().get(&voice.backend_hint)?;
    let request = SynthesisRequest::new(voice.embedding, text, sample_rate)?;
    let clip = synthesize(&request, backend.as_ref())?;
    let wav = encode_wav(&clip)?;
    let out = out.unwrap_or_else(|| {
        if is_stdio(path) {
            PathBuf::from(STDIO)
        } else {
            path.with_extension("wav")
        }
    });
    write_output(Some(&out), &wav)
}

pub fn export_pca(out: Option<&Path>) -> Result<(), CliError> {
    let mut json = VoiceSpace::reference().pca.to_json();
    json.push('\n');
    write_output(out, json.as_bytes())
}

pub fn serve(args: ServeArgs) -> Result<(), CliError> {
    let config = ServiceConfig {
        bind: args.bind,
        pca_model: args.pca_model,
        store: args.store,
        default_text: args.default_text,
        cors_origin: args.cors_origin,
        prerender: args.prerender,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::io(Path::new("tokio runtime")))?;
    eprintln!("listening on http://{}", config.bind);
    runtime.block_on(evoforge_service::serve(config))?;
    Ok(())
}
