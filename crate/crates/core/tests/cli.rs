use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use classrbm::io::{model_to_string, ParamFile};
use classrbm::model::predict_proba;
use classrbm::oracle::{exact_log_likelihood, FixtureSet};
use classrbm::relevance::input_relevance;
use classrbm::{BinaryInput, Dims, Example, Label, ModelParameters};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_classrbm"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn write(&self, name: &str, text: &str) -> String {
        std::fs::write(self.path(name), text).unwrap();
        self.s(name)
    }

    fn synth(&self, inputs: usize) -> String {
        let spec = self.write(
            "synth.toml",
            &format!(
                "inputs = {inputs}\nclasses = 2\nexamples = 60\nsignal_strength = 0.4\nseed = 1\n"
            ),
        );
        let out = run(&["synth", "--spec", &spec, "--out", &self.s("data.csv")]);
        assert!(out.status.success(), "{}", stderr(&out));
        self.s("data.csv")
    }
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn predict_on_zero_model_is_uniform_with_first_label() {
    let ws = Workspace::new();
    let data = ws.synth(5);
    let zero = ModelParameters::zeros(Dims::new(5, 4, 2).unwrap());
    let model = ws.write("zero.json", &model_to_string(&zero, None));
    let out = run(&["predict", "--model", &model, "--data", &data]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,label,p1,p2"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 60);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(*row, format!("{},1,0.5,0.5", i + 1));
    }
}

#[test]
fn relevance_marks_exactly_entries_above_threshold() {
    let ws = Workspace::new();
    let schema = bundled("breast_cancer_schema.toml");
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
    let params = classrbm::oracle::random_model(Dims::new(55, 6, 2).unwrap(), 0.8, &mut rng);
    let model = ws.write("m.json", &model_to_string(&params, None));
    let out = run(&[
        "relevance",
        "--model",
        &model,
        "--schema",
        &schema,
        "--threshold",
        "0.5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let mut rows = 0;
    let expected: Vec<Vec<f64>> = (0..2)
        .map(|k| input_relevance(&params, Label::new(k, 2).unwrap()).unwrap())
        .collect();
    let mut any_selected = false;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let class: usize = rec[0].parse().unwrap();
        let input: usize = rec[1].parse().unwrap();
        let p: f64 = rec[3].parse().unwrap();
        let selected: bool = rec[4].parse().unwrap();
        assert_eq!(p, expected[class - 1][input - 1]);
        assert_eq!(selected, p > 0.5);
        any_selected |= selected;
        rows += 1;
    }
    assert_eq!(rows, 110);
    assert!(any_selected);

    let one = run(&[
        "relevance",
        "--model",
        &model,
        "--class",
        "2",
        "--format",
        "plot",
    ]);
    assert!(one.status.success());
    let plot = stdout(&one);
    assert_eq!(plot.lines().next(), Some("class,index,value"));
    assert_eq!(plot.lines().count(), 56);
    assert!(plot.lines().skip(1).all(|l| l.starts_with("2,")));
}

#[test]
fn train_predict_inspect_round_trip() {
    let ws = Workspace::new();
    let data = ws.synth(12);
    let cfg = ws.write("cfg.toml", "hidden_units = 4\nlearning_rate = 0.1\niterations = 2000\nseed = 2\n[scheme]\nkind = \"dropout\"\np = 0.5\n");
    let model = ws.s("model.json");
    let out = run(&["train", "--data", &data, "--config", &cfg, "--out", &model]);
    assert!(out.status.success(), "{}", stderr(&out));
    let log = std::fs::read_to_string(ws.path("model.json.log.csv")).unwrap();
    assert!(log.starts_with("iteration,reconstruction_error,log_likelihood,train_accuracy"));
    assert!(log.lines().nth(1).unwrap().starts_with("0,"));

    let inspect = run(&["inspect", "--model", &model]);
    let text = stdout(&inspect);
    assert!(text.contains("inputs 12") && text.contains("hidden 4") && text.contains("classes 2"));
    assert!(text.contains("scheme dropout(0.5)"));

    let pred = run(&[
        "predict",
        "--model",
        &model,
        "--data",
        &data,
        "--out",
        &ws.s("pred.csv"),
    ]);
    assert!(pred.status.success());
    assert!(stderr(&pred).contains("accuracy"));
    let rows = std::fs::read_to_string(ws.path("pred.csv")).unwrap();
    assert_eq!(rows.lines().count(), 61);
}

#[test]
fn synth_writes_generation_record() {
    let ws = Workspace::new();
    ws.synth(7);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("data.csv.gen.json")).unwrap())
            .unwrap();
    assert_eq!(record["inputs"], 7);
    assert_eq!(record["templates"].as_array().unwrap().len(), 2);
    let header = std::fs::read_to_string(ws.path("data.csv")).unwrap();
    assert!(header.starts_with("x1,x2,x3,x4,x5,x6,x7,label"));
}

fn error_line(o: &Output) -> String {
    stderr(o).lines().next().unwrap_or_default().to_string()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["train", "--data"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_and_config_errors_exit_with_two() {
    let ws = Workspace::new();
    let missing = run(&[
        "predict",
        "--model",
        &ws.s("nope.json"),
        "--data",
        &ws.s("nope.csv"),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(error_line(&missing).starts_with("error kind=data exit=2: "));
    assert_eq!(stderr(&missing).lines().count(), 2);

    let data = ws.synth(4);
    let bad = ws.write("bad.toml", "hidden_units = \"many\"\n");
    let out = run(&[
        "train",
        "--data",
        &data,
        "--config",
        &bad,
        "--out",
        &ws.s("m.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).starts_with("error kind=config exit=2: "));
    assert!(error_line(&out).contains("bad.toml"));

    let typo = ws.write("typo.toml", "hiden_units = 3\n");
    let out = run(&[
        "train",
        "--data",
        &data,
        "--config",
        &typo,
        "--out",
        &ws.s("m.json"),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let broken = ws.write("broken.csv", "x1,x2,label\n0,1,1\n0,7,2\n");
    let out = run(&["train", "--data", &broken, "--out", &ws.s("m.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).contains("row 3"));
}

#[test]
fn divergence_exits_with_three() {
    let ws = Workspace::new();
    let data = ws.synth(6);
    let cfg = ws.write(
        "cfg.toml",
        "hidden_units = 4\nlearning_rate = 1e308\nmomentum = 0.9\niterations = 200\n",
    );
    let out = run(&[
        "train",
        "--data",
        &data,
        "--config",
        &cfg,
        "--out",
        &ws.s("m.json"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(error_line(&out).starts_with("error kind=numerical exit=3: "));
    assert!(!ws.path("m.json").exists());
}

#[test]
fn emitted_fixtures_agree_with_fast_paths() {
    let ws = Workspace::new();
    let out = run(&[
        "fixtures",
        "--seed",
        "8",
        "--count",
        "12",
        "--out",
        &ws.s("fx.json"),
    ]);
    assert!(out.status.success());
    let set: FixtureSet =
        serde_json::from_str(&std::fs::read_to_string(ws.path("fx.json")).unwrap()).unwrap();
    assert_eq!(set.models.len(), 12);
    for m in &set.models {
        let params = ParamFile::to_params(&m.model).unwrap();
        let k = params.dims().classes;
        for inp in &m.inputs {
            let x = BinaryInput::new(inp.x.clone()).unwrap();
            for (a, b) in predict_proba(&params, &x)
                .unwrap()
                .probs()
                .iter()
                .zip(&inp.label_probs)
            {
                assert!((a - b).abs() <= 1e-9);
            }
        }
        for (y, row) in m.relevance.iter().enumerate() {
            for (a, b) in input_relevance(&params, Label::new(y, k).unwrap())
                .unwrap()
                .iter()
                .zip(row)
            {
                assert!((a - b).abs() <= 1e-9);
            }
        }
        let data: Vec<Example> = m
            .dataset
            .iter()
            .map(|e| Example {
                x: BinaryInput::new(e.x.clone()).unwrap(),
                y: Label::from_number(e.y, k).unwrap(),
            })
            .collect();
        assert!(
            (exact_log_likelihood(&params, &data).unwrap() - m.mean_log_likelihood).abs() <= 1e-12
        );
    }
}

#[test]
fn experiment_writes_consistent_report() {
    let ws = Workspace::new();
    let data = ws.synth(8);
    let grid = ws.write(
        "grid.toml",
        "hidden_units = [3]\nlearning_rates = [0.1]\nrepeats = 3\ntrain_fraction = 0.5\n[base]\niterations = 500\n\
         [[schemes]]\nkind = \"none\"\n[[schemes]]\nkind = \"dropconnect\"\np = 0.5\n\
         [[comparisons]]\nname = \"external\"\naccuracy = 0.7\n",
    );
    let out = run(&[
        "experiment",
        "--data",
        &data,
        "--grid",
        &grid,
        "--out",
        &ws.s("r.json"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("majority baseline"));
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("r.json")).unwrap()).unwrap();
    for cell in body["cells"].as_array().unwrap() {
        let accs: Vec<f64> = cell["accuracies"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        assert_eq!(accs.len(), 3);
        let mean = accs.iter().sum::<f64>() / 3.0;
        let std = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!((cell["mean"].as_f64().unwrap() - mean).abs() <= 1e-12);
        assert!((cell["std"].as_f64().unwrap() - std).abs() <= 1e-12);
    }
    assert_eq!(body["comparisons"][0]["name"], "external");
    assert_eq!(body["test_size"], 30);
    assert!(ws.path("r.json.meta.json").exists());
    assert_eq!(
        std::fs::read_to_string(ws.path("r.json.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}
