use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use classrbm::data::{
    export_binary_csv, load_binary_csv, load_dataset, load_schema, synth_from_spec, SynthSpec,
};
use classrbm::eval::{evaluate, run_experiment, with_suffix, ExperimentGrid};
use classrbm::io::{load_model, load_toml, save_model, write_json};
use classrbm::model::predict_proba;
use classrbm::oracle::emit_fixtures;
use classrbm::relevance::{relevance_report, DEFAULT_THRESHOLD};
use classrbm::training::{final_prediction_params, train};
use classrbm::{CategoricalSchema, Dataset, DroppingScheme, Error, Label, TrainingConfig};

#[derive(Parser)]
#[command(
    name = "classrbm",
    version,
    about = "Classification RBM with dropping regularizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it together with `<out>.log.csv`.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Categorical schema; without it the data is read as 0/1 columns plus `label`.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        label_column: Option<String>,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the predicted label and p(y|x) for every row.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        label_column: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print p(x_i = 1 | other inputs off, y) for every input.
    Relevance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// One-based class number; all classes when omitted.
        #[arg(long)]
        class: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of repeated trainings and write `<out>`, `<out>.csv` and `<out>.meta.json`.
    Experiment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        label_column: Option<String>,
    },
    /// Write a synthetic dataset and `<out>.gen.json`.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print dimensions and per-block statistics of a model.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
    /// Write enumeration reference values for random tiny models.
    Fixtures {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    /// `index,value` series per class.
    Plot,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code, hint) = classify(&e);
            let msg = e.to_string().replace('\n', "; ");
            eprintln!("error kind={kind} exit={code}: {msg}");
            eprintln!("{hint}");
            ExitCode::from(code)
        }
    }
}

fn classify(e: &Error) -> (&'static str, u8, &'static str) {
    match e {
        Error::NumericalFailure { .. } | Error::NonFinite(_) => (
            "numerical",
            3,
            "training diverged; try a smaller learning rate or momentum",
        ),
        Error::Config(_) | Error::InvalidParameter(_) => {
            ("config", 2, "check the configuration file and flag values")
        }
        Error::Io(_) => ("io", 2, "check that the paths exist and are writable"),
        _ => (
            "data",
            2,
            "check the input files against the expected layout",
        ),
    }
}

fn read_data(
    path: &Path,
    schema: Option<&Path>,
    label_column: Option<&str>,
) -> classrbm::Result<(Dataset, Option<CategoricalSchema>)> {
    let schema = schema.map(load_schema).transpose()?;
    let ds = load_dataset(path, schema.as_ref(), label_column)?;
    Ok((ds, schema))
}

fn emit(out: Option<&Path>, text: &str) -> classrbm::Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: Command) -> classrbm::Result<()> {
    match command {
        Command::Train {
            data,
            schema,
            config,
            out,
            label_column,
            seed,
        } => {
            let (ds, _) = read_data(&data, schema.as_deref(), label_column.as_deref())?;
            let mut cfg: TrainingConfig = match config {
                Some(p) => load_toml(p)?,
                None => TrainingConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (params, log) = train(&ds, &cfg)?;
            save_model(&out, &params, Some(&cfg.scheme))?;
            fs::write(with_suffix(&out, "log.csv"), log.to_csv())?;
            let acc = evaluate(&params, &cfg.scheme, &ds)?;
            eprintln!(
                "trained {} iterations; training accuracy {acc:.4}",
                cfg.iterations
            );
        }
        Command::Predict {
            model,
            data,
            schema,
            label_column,
            out,
        } => {
            let (params, scheme) = load_model(&model)?;
            let dims = params.dims();
            let ds = match schema {
                Some(s) => read_data(&data, Some(&s), label_column.as_deref())?.0,
                None => load_binary_csv(&data, Some(dims.classes))?,
            };
            if ds.inputs() != dims.inputs {
                return Err(Error::DimensionMismatch {
                    what: "data inputs vs model inputs",
                    expected: dims.inputs,
                    actual: ds.inputs(),
                });
            }
            let predictor = final_prediction_params(&params, &scheme.unwrap_or_default());
            let mut text = String::from("row,label");
            for k in 1..=dims.classes {
                let _ = write!(text, ",p{k}");
            }
            text.push('\n');
            let mut hits = 0;
            for (r, ex) in ds.examples().iter().enumerate() {
                let dist = predict_proba(&predictor, &ex.x)?;
                let label = dist.argmax();
                hits += usize::from(label == ex.y);
                let _ = write!(text, "{},{}", r + 1, label.number());
                for p in dist.probs() {
                    let _ = write!(text, ",{p}");
                }
                text.push('\n');
            }
            emit(out.as_deref(), &text)?;
            eprintln!(
                "accuracy {:.4} over {} rows",
                hits as f64 / ds.len() as f64,
                ds.len()
            );
        }
        Command::Relevance {
            model,
            schema,
            class,
            threshold,
            format,
            out,
        } => {
            let (params, scheme) = load_model(&model)?;
            let params = final_prediction_params(&params, &scheme.unwrap_or_default());
            let dims = params.dims();
            let names = match schema {
                Some(s) => load_schema(s)?.input_names(),
                None => (1..=dims.inputs).map(|i| format!("x{i}")).collect(),
            };
            let only = class
                .map(|k| Label::from_number(k, dims.classes))
                .transpose()?;
            let report = relevance_report(&params, &names, threshold, only)?;
            let text = match format {
                Format::Csv => report.to_csv(),
                Format::Json => report.to_json(),
                Format::Plot => {
                    let mut s = String::from("class,index,value\n");
                    for r in &report.rows {
                        let _ = writeln!(s, "{},{},{}", r.class, r.input, r.probability);
                    }
                    s
                }
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Experiment {
            data,
            grid,
            out,
            schema,
            label_column,
        } => {
            let (ds, _) = read_data(&data, schema.as_deref(), label_column.as_deref())?;
            let grid: ExperimentGrid = load_toml(grid)?;
            let report = run_experiment(&ds, &grid)?;
            report.write(&out)?;
            print!("{}", report.format_tables());
            let failed: usize = report.body.cells.iter().map(|c| c.failures.len()).sum();
            if failed > 0 {
                eprintln!("{failed} run(s) failed; see the report for details");
            }
        }
        Command::Synth { spec, out } => {
            let spec: SynthSpec = load_toml(spec)?;
            let (ds, record) = synth_from_spec(&spec)?;
            export_binary_csv(&out, &ds)?;
            write_json(with_suffix(&out, "gen.json"), &record)?;
        }
        Command::Inspect { model } => {
            let (params, scheme) = load_model(&model)?;
            let d = params.dims();
            println!(
                "inputs {}\nhidden {}\nclasses {}",
                d.inputs, d.hidden, d.classes
            );
            println!("scheme {}", scheme.unwrap_or(DroppingScheme::None).label());
            println!(
                "{:<6} {:>8} {:>12} {:>12} {:>12} {:>12}",
                "block", "count", "mean", "std", "min", "max"
            );
            let blocks: [(&str, Vec<f64>); 5] = [
                ("b", params.b().to_vec()),
                ("c", params.c().to_vec()),
                ("d", params.d().to_vec()),
                ("W1", params.w1().iter().copied().collect()),
                ("W2", params.w2().iter().copied().collect()),
            ];
            for (name, v) in blocks {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                println!(
                    "{name:<6} {:>8} {mean:>12.5} {std:>12.5} {min:>12.5} {max:>12.5}",
                    v.len()
                );
            }
        }
        Command::Fixtures { seed, count, out } => {
            write_json(&out, &emit_fixtures(seed, count)?)?;
        }
    }
    Ok(())
}
