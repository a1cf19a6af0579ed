use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use icewatch::config::{label_synthetic, ExperimentConfig, TEST_TURBINE, TRAIN_TURBINE};
use icewatch::error::CliError;
use icewatch::exec::{run_experiment, thread_count};
use icewatch::formats::{
    create, dataset_id, load_dataset, open, parse_scada_csv, parse_windows_csv, read_json,
    write_dataset_csv, write_features_csv, write_json, write_labels_csv, write_scada_csv,
    write_windows_csv, DataError,
};
use icewatch::report::render_text;
use icewatch_core::features::{engineer, rank_extended, EngineeredRecord};
use icewatch_core::gate::{builtin_rule, rule_satisfied, IntervalRule, RuleId};
use icewatch_core::pipeline::{
    predict_stream, prepare, train_bundle, FeatureSet, ModelBundle, PipelineConfig,
    BUNDLE_FORMAT_VERSION,
};
use icewatch_core::preprocess::{denoise_dataset, drop_invalid, DenoiseConfig};
use icewatch_core::record::{apply_label_windows, summarize, Class, DatasetSummary};
use icewatch_core::synth::{generate_turbine, OffsetProfile, SynthConfig, SynthOutput};

/// Blade-icing detection on wind-turbine SCADA data.
#[derive(Parser)]
#[command(name = "icewatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label a SCADA CSV with icing/normal windows into a dataset CSV.
    Ingest {
        #[arg(long)]
        scada: PathBuf,
        #[arg(long)]
        windows: PathBuf,
        /// Defaults to the output file stem.
        #[arg(long)]
        turbine: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic turbine pair (or one turbine with --single).
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Generator settings as JSON; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Calibration offsets of the second turbine as JSON.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<usize>,
        #[arg(long)]
        single: bool,
    },
    /// Export the x1..x10 feature matrix of a dataset.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = icewatch_core::preprocess::DEFAULT_MA_WINDOW)]
        window: usize,
        /// Print the Fisher ranking of every raw and derived feature.
        #[arg(long)]
        rank: bool,
    },
    /// Run the configured pipelines and write report.json and report.txt.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train a deployable model bundle.
    Train {
        /// Pipeline config as JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label a raw SCADA CSV with a trained bundle.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        scada: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rule pass rates per class on a dataset.
    InspectRules {
        #[arg(long)]
        dataset: PathBuf,
        /// JSON array of rules; the five built-in rules otherwise.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = icewatch_core::preprocess::DEFAULT_MA_WINDOW)]
        window: usize,
    },
}

fn print_summary(s: &DatasetSummary) {
    let span = s
        .time_span
        .map_or_else(|| "empty".to_string(), |(a, b)| format!("{a}..{b}"));
    println!(
        "{}: {} records ({} normal, {} abnormal, {} invalid), time {}",
        s.turbine_id,
        s.total(),
        s.n_normal,
        s.n_abnormal,
        s.n_invalid,
        span
    );
}

fn write_turbine(dir: &Path, out: &SynthOutput) -> Result<(), CliError> {
    let mut f = create(&dir.join("scada.csv"))?;
    write_scada_csv(&mut f, &out.records)?;
    let mut f = create(&dir.join("windows.csv"))?;
    write_windows_csv(&mut f, &out.truth_windows)?;
    write_json(&dir.join("ledger.json"), &out.episode_ledger)?;
    Ok(())
}

fn flush(w: &mut impl Write, path: &Path) -> Result<(), CliError> {
    w.flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn synth(
    out: &Path,
    config: Option<&Path>,
    profile: Option<&Path>,
    seed: Option<u64>,
    duration: Option<usize>,
    single: bool,
) -> Result<(), CliError> {
    let read_config = |p: &Path| read_json(p).map_err(CliError::config);
    let mut base: SynthConfig = config.map(read_config).transpose()?.unwrap_or_default();
    if let Some(s) = seed {
        base.seed = s;
    }
    if let Some(d) = duration {
        base.duration = d;
    }
    let profile: OffsetProfile = match profile {
        Some(p) => read_json(p).map_err(CliError::config)?,
        None => OffsetProfile::documented_default(),
    };
    let mut turbines = vec![(TRAIN_TURBINE, base.clone())];
    if !single {
        turbines.push((TEST_TURBINE, profile.apply(&base)));
    }
    for (id, cfg) in turbines {
        let generated = generate_turbine(&cfg)?;
        write_turbine(&out.join(id), &generated)?;
        print_summary(&summarize(&label_synthetic(id, generated)?));
    }
    Ok(())
}

fn features(dataset: &Path, out: Option<&Path>, window: usize, rank: bool) -> Result<(), CliError> {
    let ds = load_dataset(dataset)?;
    let denoise = DenoiseConfig::with_window(window);
    let prepared = prepare(&ds, &denoise, FeatureSet::Selected)?;
    if let Some(path) = out {
        let mut f = create(path)?;
        write_features_csv(&mut f, &prepared.vectors)?;
        flush(&mut f, path)?;
        println!(
            "{} feature rows written to {}",
            prepared.len(),
            path.display()
        );
    }
    if rank {
        let smooth = denoise_dataset(&drop_invalid(&ds), &denoise)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let rows: Vec<(EngineeredRecord, Class)> = smooth
            .records()
            .iter()
            .map(|r| {
                Ok((
                    engineer(&r.record)?,
                    r.label.class().expect("invalid dropped"),
                ))
            })
            .collect::<Result<_, icewatch_core::features::FeatureError>>()
            .map_err(|e| CliError::Data(e.to_string()))?;
        let ranking = rank_extended(&rows).map_err(|e| CliError::Data(e.to_string()))?;
        for (i, s) in ranking.iter().enumerate() {
            println!("{:>3}  {:<22} {:.4}", i + 1, s.name, s.score);
        }
    }
    Ok(())
}

fn experiment(config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let threads = thread_count()?;
    let base_dir = config.parent().unwrap_or(Path::new("."));
    let (train, test) = cfg.load_datasets(base_dir)?;
    print_summary(&summarize(&train));
    print_summary(&summarize(&test));
    let report = run_experiment(&cfg, &train, &test, threads)?;
    let text = render_text(&report);
    write_json(&out.join("report.json"), &report)?;
    let txt = out.join("report.txt");
    let mut f = create(&txt)?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::Data(e.to_string()))?;
    flush(&mut f, &txt)?;
    print!("{text}");
    Ok(())
}

fn train(config: &Path, dataset: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    let cfg: PipelineConfig = read_json(config).map_err(CliError::config)?;
    let ds = load_dataset(dataset)?;
    let bundle = train_bundle(&ds, &cfg, seed)?;
    write_json(out, &bundle)?;
    println!("{} bundle written to {}", bundle.variant(), out.display());
    Ok(())
}

fn predict(bundle: &Path, scada: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let bundle: ModelBundle = read_json(bundle).map_err(CliError::config)?;
    if bundle.format_version != BUNDLE_FORMAT_VERSION {
        return Err(CliError::Config(format!(
            "unsupported bundle format version {}",
            bundle.format_version
        )));
    }
    let records = parse_scada_csv(open(scada)?)?;
    let labels = predict_stream(&bundle, &records)?;
    match out {
        Some(path) => {
            let mut f = create(path)?;
            write_labels_csv(&mut f, &labels)?;
            flush(&mut f, path)?;
        }
        None => write_labels_csv(std::io::stdout().lock(), &labels)?,
    }
    Ok(())
}

fn inspect_rules(dataset: &Path, rules: Option<&Path>, window: usize) -> Result<(), CliError> {
    let rules: Vec<IntervalRule> = match rules {
        Some(p) => read_json(p).map_err(CliError::config)?,
        None => RuleId::BUILTIN
            .iter()
            .map(|&id| builtin_rule(id))
            .collect::<Result<_, _>>()?,
    };
    let ds = load_dataset(dataset)?;
    let prepared = prepare(
        &ds,
        &DenoiseConfig::with_window(window),
        FeatureSet::Selected,
    )?;
    let total = |c: Class| prepared.vectors.iter().filter(|v| v.y == c).count();
    let (n_normal, n_abnormal) = (total(Class::Normal), total(Class::Abnormal));
    let pct = |k: usize, n: usize| {
        if n == 0 {
            0.0
        } else {
            100.0 * k as f64 / n as f64
        }
    };
    println!("{:<48} {:>10} {:>10}", "rule", "abnormal%", "normal%");
    for rule in &rules {
        let pass = |c: Class| {
            prepared
                .vectors
                .iter()
                .filter(|v| v.y == c && rule_satisfied(rule, *v))
                .count()
        };
        println!(
            "{:<48} {:>10.2} {:>10.2}",
            rule.to_string(),
            pct(pass(Class::Abnormal), n_abnormal),
            pct(pass(Class::Normal), n_normal)
        );
    }
    Ok(())
}

fn ingest(
    scada: &Path,
    windows: &Path,
    turbine: Option<String>,
    out: &Path,
) -> Result<(), CliError> {
    let records = parse_scada_csv(open(scada)?)?;
    let windows = parse_windows_csv(open(windows)?)?;
    let id = turbine.unwrap_or_else(|| dataset_id(out));
    let ds = apply_label_windows(id, records, &windows)
        .map_err(|e| CliError::Data(DataError::from(e).to_string()))?;
    let mut f = create(out)?;
    write_dataset_csv(&mut f, &ds)?;
    flush(&mut f, out)?;
    print_summary(&summarize(&ds));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            scada,
            windows,
            turbine,
            out,
        } => ingest(&scada, &windows, turbine, &out),
        Command::Synth {
            out,
            config,
            profile,
            seed,
            duration,
            single,
        } => synth(
            &out,
            config.as_deref(),
            profile.as_deref(),
            seed,
            duration,
            single,
        ),
        Command::Features {
            dataset,
            out,
            window,
            rank,
        } => features(&dataset, out.as_deref(), window, rank),
        Command::Experiment { config, out } => experiment(&config, &out),
        Command::Train {
            config,
            dataset,
            seed,
            out,
        } => train(&config, &dataset, seed, &out),
        Command::Predict { bundle, scada, out } => predict(&bundle, &scada, out.as_deref()),
        Command::InspectRules {
            dataset,
            rules,
            window,
        } => inspect_rules(&dataset, rules.as_deref(), window),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icewatch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
