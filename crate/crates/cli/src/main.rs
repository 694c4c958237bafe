//! `slipnet` — train, evaluate, and probe grasp slip-detection models.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use slipnet_cli::dataset::{
    load_dataset, load_episode, load_manifest, make_windows, split_by_object, write_dataset,
    ForceCalibration, SampleWindow,
};
use slipnet_cli::error::{io_at, Error, Result};
use slipnet_cli::experiment::{run_experiment, ExperimentSpec};
use slipnet_cli::eval::evaluate;
use slipnet_cli::synth::{generate_corpus, CorpusSpec, MODERATE_NOISE};
use slipnet_cli::train::{infer_visual_mode, train, TrainConfig, SYNTH_LR};
use slipnet_cli::checkpoint;
use slipnet_core::{predict, run_gradcheck, Modality, SlipModelConfig, TemporalArch};

#[derive(Parser)]
#[command(
    name = "slipnet",
    about = "Visuo-tactile slip detection: synthetic data, training, evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModalityArg {
    Tactile,
    Visual,
    Fused,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Modality {
        match m {
            ModalityArg::Tactile => Modality::TactileOnly,
            ModalityArg::Visual => Modality::VisualOnly,
            ModalityArg::Fused => Modality::Fused,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ArchArg {
    Mstcn,
    Tcn,
}

impl From<ArchArg> for TemporalArch {
    fn from(a: ArchArg) -> TemporalArch {
        match a {
            ArchArg::Mstcn => TemporalArch::MsTcn,
            ArchArg::Tcn => TemporalArch::Tcn,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grasp-episode dataset.
    SynthGen(SynthGenArgs),
    /// Train a model on a dataset's train split.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Predict per-window labels for one episode directory.
    Predict(PredictArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Run a preset experiment described by a TOML spec file.
    Experiment(ExperimentArgs),
    /// Pretty-print the metrics.csv of a finished experiment.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthGenArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    objects: usize,
    #[arg(long, default_value_t = 20)]
    episodes_per_object: usize,
    /// Objects assigned to the train split (the rest go to test).
    #[arg(long, default_value_t = 40)]
    train_objects: usize,
    #[arg(long, default_value_t = 0.5)]
    slip_fraction: f64,
    /// Gaussian noise level; the default is the moderate preset.
    #[arg(long, default_value_t = MODERATE_NOISE)]
    noise: f64,
    #[arg(long, default_value_t = 21)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset root.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoints and history.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModalityArg::Fused)]
    modality: ModalityArg,
    #[arg(long, value_enum, default_value_t = ArchArg::Mstcn)]
    arch: ArchArg,
    /// Window length in frames.
    #[arg(long, default_value_t = 13)]
    seq_len: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = SYNTH_LR)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Also write a checkpoint every N epochs.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Stop after N epochs without validation improvement.
    #[arg(long)]
    patience: Option<usize>,
    /// Use the test split as validation for best-checkpoint selection.
    #[arg(long, default_value_t = false)]
    val_on_test: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Write the full report (confusion, per-object) as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Episode directory (containing meta.json, tactile.csv, ...).
    #[arg(long)]
    episode: PathBuf,
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 200)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML spec file with preset, data, out_dir, seed, epochs, [lr, batch, stride].
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Experiment output directory containing metrics.csv.
    #[arg(long)]
    dir: PathBuf,
}

fn cmd_synth_gen(args: &SynthGenArgs) -> Result<()> {
    let spec = CorpusSpec {
        objects: args.objects,
        episodes_per_object: args.episodes_per_object,
        train_objects: args.train_objects,
        slip_fraction: args.slip_fraction,
        noise_sigma: args.noise,
        frames: args.frames,
        seed: args.seed,
    };
    let (episodes, splits) = generate_corpus(&spec)?;
    write_dataset(&args.out, &episodes, &splits)?;
    println!(
        "wrote {} episodes ({} objects, {} train / {} test) to {}",
        episodes.len(),
        args.objects,
        splits.train.len(),
        splits.test.len(),
        args.out.display()
    );
    Ok(())
}

fn load_split_windows(
    data: &PathBuf,
    seq_len: usize,
    stride: usize,
) -> Result<(Vec<SampleWindow>, Vec<SampleWindow>, Vec<String>)> {
    let manifest = load_manifest(data)?;
    let (episodes, errors) = load_dataset(data)?;
    for e in &errors {
        eprintln!("warning: skipping episode {}: {}", e.dir, e.error);
    }
    if episodes.is_empty() {
        return Err(Error::Data(format!("{}: no loadable episodes", data.display())));
    }
    let split = split_by_object(&episodes, &manifest.splits, seq_len, stride)?;
    Ok((split.train, split.test, split.warnings))
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let (train_windows, test_windows, warnings) =
        load_split_windows(&args.data, args.seq_len, args.stride)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let mut model_cfg =
        SlipModelConfig::preset(args.modality.into(), args.seq_len, args.arch.into());
    if let Some(mode) = infer_visual_mode(&train_windows) {
        model_cfg.visual_mode = mode;
    }
    let cfg = TrainConfig {
        lr: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: args.seed,
        checkpoint_every: args.checkpoint_every,
        early_stop_patience: args.patience,
        stop_when_train_perfect: false,
    };
    let val: &[SampleWindow] = if args.val_on_test { &test_windows } else { &[] };
    fs::create_dir_all(&args.out).map_err(io_at(&args.out))?;
    let cal = ForceCalibration::default();
    let every = cfg.checkpoint_every;
    let out_dir = args.out.clone();
    let hook_cfg = model_cfg.clone();
    let outcome = train(&model_cfg, &cfg, &cal, &train_windows, val, |record, params| {
        println!(
            "epoch {}: train loss {:.6} acc {:.4}{}",
            record.epoch,
            record.train_loss,
            record.train_accuracy,
            match (record.val_loss, record.val_accuracy) {
                (Some(l), Some(a)) => format!(" | val loss {l:.6} acc {a:.4}"),
                _ => String::new(),
            }
        );
        if let Some(n) = every {
            if (record.epoch + 1) % n == 0 {
                let path = out_dir.join(format!("epoch_{:03}.slipckpt", record.epoch));
                checkpoint::save(&path, &hook_cfg, params)?;
            }
        }
        Ok(())
    })?;
    let model_path = args.out.join("model.slipckpt");
    checkpoint::save(&model_path, &model_cfg, &outcome.params)?;
    let history_path = args.out.join("history.csv");
    let mut csv = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for r in &outcome.history {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            r.val_loss.map(|v| v.to_string()).unwrap_or_default(),
            r.val_accuracy.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    fs::write(&history_path, csv).map_err(io_at(&history_path))?;
    match outcome.best_epoch {
        Some(e) => println!("saved best-validation model (epoch {e}) to {}", model_path.display()),
        None => println!("saved final model to {}", model_path.display()),
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let (config, params) = checkpoint::load(&args.checkpoint)?;
    let (train_windows, test_windows, warnings) =
        load_split_windows(&args.data, config.seq_len, args.stride)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let windows = match args.split {
        SplitArg::Train => &train_windows,
        SplitArg::Test => &test_windows,
    };
    let report = evaluate(&config, &params, windows, &ForceCalibration::default())?;
    let m = &report.metrics;
    println!("windows: {}", report.windows);
    println!("confusion [actual slip, actual stable] x [pred slip, pred stable]:");
    println!("  {:>8} {:>8}", report.confusion.counts[0][0], report.confusion.counts[0][1]);
    println!("  {:>8} {:>8}", report.confusion.counts[1][0], report.confusion.counts[1][1]);
    println!(
        "precision {:.4}  recall {:.4}  f1 {:.4}  accuracy {:.4}{}",
        m.precision,
        m.recall,
        m.f1,
        m.accuracy,
        if m.degenerate { "  (degenerate)" } else { "" }
    );
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Data(format!("report encode: {e}")))?;
        fs::write(path, json).map_err(io_at(path))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let (config, params) = checkpoint::load(&args.checkpoint)?;
    let episode = load_episode(&args.episode)?;
    let windows = make_windows(&episode, config.seq_len, args.stride)?;
    let cal = ForceCalibration::default();
    println!("episode,start,label,confidence");
    for w in &windows {
        let input = w.to_input(&cal)?;
        let p = predict(&config, &params, &input)?;
        println!("{},{},{},{:.4}", w.episode_id, w.start, p.label, p.confidence);
    }
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    let outcome = run_gradcheck(&mut rng, args.cases)?;
    for stat in &outcome.per_op {
        println!("{:<24} {:>4} cases  max rel err {:.3e}", stat.op, stat.cases, stat.max_rel_err);
    }
    println!(
        "checked {} elements over {} cases, max rel err {:.3e}",
        outcome.elements_checked, outcome.cases_run, outcome.max_rel_err
    );
    if !outcome.failures.is_empty() {
        let f = &outcome.failures[0];
        return Err(Error::Data(format!(
            "{} gradient mismatches; first: {} leaf {} element {} rel err {:.3e}",
            outcome.failures.len(),
            f.op,
            f.leaf,
            f.index,
            f.rel_err
        )));
    }
    println!("all gradients match finite differences");
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec).map_err(io_at(&args.spec))?;
    let spec = ExperimentSpec::from_toml(&text)?;
    let outcome = run_experiment(&spec)?;
    for w in &outcome.load_errors {
        eprintln!("warning: skipped episode {w}");
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for row in &outcome.rows {
        let m = &row.report.metrics;
        println!(
            "{:<16} acc {:.4}  f1 {:.4}  ({} test windows)",
            row.variant.name, m.accuracy, m.f1, row.report.windows
        );
    }
    println!("wrote metrics.csv, confusion.csv, history.csv to {}", spec.out_dir.display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let path = args.dir.join("metrics.csv");
    let text = fs::read_to_string(&path).map_err(io_at(&path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty metrics file", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no variant rows", path.display())));
    }
    let mut widths: Vec<usize> = columns.iter().map(|c| c.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            }
        }
    }
    let print_row = |cells: &[&str]| {
        let line: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:<width$}", width = widths.get(i).copied().unwrap_or(0)))
            .collect();
        println!("{}", line.join("  "));
    };
    print_row(&columns);
    for row in &rows {
        print_row(row);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::SynthGen(args) => cmd_synth_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (`slipnet predict | head`),
    // like any other line-oriented tool, instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

// Integration tests exercise the binary end to end; unit-level coverage of
// the command layer lives in tests/cli.rs where the compiled binary runs.
#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use slipnet_cli::experiment;

    #[test]
    fn cli_definition_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn experiment_keys_match_the_spec_parser() {
        // keep the --spec help text honest: these keys must parse
        let spec = ExperimentSpec::from_toml(
            "preset = \"arch_comparison\"\ndata = \"d\"\nout_dir = \"o\"\nseed = 1\nepochs = 1\nlr = 0.001\nbatch = 8\nstride = 2\n",
        )
        .unwrap();
        assert_eq!(spec.stride, 2);
        assert_eq!(experiment::PRESETS.len(), 3);
    }
}
