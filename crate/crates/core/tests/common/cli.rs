//! Runs the command-line binary and snapshots its output directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

pub fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_convexalign"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "convexalign {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Every file in `dir` except the timestamped manifest, by name.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

/// Series CSV with two models of twelve layers each.
pub const SERIES: &str = "model,layer,convexity,oooa,training,size
a,0,0.50,0.40,pretrained,base
a,1,0.55,0.42,pretrained,base
a,2,0.57,0.45,pretrained,base
a,3,0.61,0.44,pretrained,base
a,4,0.66,0.50,pretrained,base
a,5,0.70,0.52,pretrained,base
b,0,0.48,0.35,finetuned,large
b,1,0.52,0.39,finetuned,large
b,2,0.58,0.41,finetuned,large
b,3,0.60,0.47,finetuned,large
b,4,0.69,0.51,finetuned,large
b,5,0.73,0.55,finetuned,large
";

/// Runs every subcommand into `root/<name>/`, returning (name, output dir) pairs.
pub fn run_all(root: &Path, tag: &str) -> Vec<(String, std::path::PathBuf)> {
    let fixtures = root.join("fixtures");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let scen = fixtures.join("scenario");
    let planted = fixtures.join("planted");
    let mix = fixtures.join("mixture");
    if !scen.exists() {
        run_ok(&["--out-dir", &s(&scen), "--seed", "3", "synth", "--scenario", "lo_conv_hi_align"]);
        run_ok(&["--out-dir", &s(&planted), "--seed", "3", "synth", "--planted"]);
        run_ok(&[
            "--out-dir", &s(&mix), "--seed", "3", "synth", "--classes", "4", "--items", "20", "--dim", "6",
            "--triplets", "300", "--noise", "0.1",
        ]);
        fs::write(fixtures.join("series.csv"), SERIES).unwrap();
    }
    let out = root.join(tag);
    let o = |name: &str| s(&out.join(name));
    let emb = s(&scen.join("embeddings.emb1"));
    let labels = s(&scen.join("labels.json"));
    let mut runs: Vec<(&str, Vec<String>)> = vec![
        ("synth_scenario", vec!["synth".into(), "--scenario".into(), "hi_conv_lo_align".into()]),
        ("synth_planted", vec!["synth".into(), "--planted".into()]),
        ("synth_mixture", vec!["synth".into(), "--classes".into(), "3".into(), "--items".into(), "10".into()]),
        (
            "convexity",
            vec!["convexity", "--emb", &emb, "--labels", &labels, "--dump-graph", "--mode", "max-same-class"]
                .into_iter().map(String::from).collect(),
        ),
        (
            "convexity_sampled",
            vec!["convexity", "--emb", &emb, "--labels", &labels, "--max-pairs", "50"]
                .into_iter().map(String::from).collect(),
        ),
        (
            "baseline",
            vec!["baseline", "--emb", &emb, "--labels", &labels, "--trials", "4"]
                .into_iter().map(String::from).collect(),
        ),
        (
            "oooa",
            vec!["oooa".into(), "--emb".into(), emb.clone(), "--triplets".into(), s(&scen.join("triplets.csv"))],
        ),
        (
            "fit",
            vec![
                "fit".into(), "--emb".into(), s(&planted.join("observed.emb1")),
                "--triplets".into(), s(&planted.join("train.csv")),
                "--test-triplets".into(), s(&planted.join("test.csv")),
                "--epochs".into(), "20".into(),
            ],
        ),
        (
            "fit_minibatch",
            vec![
                "fit".into(), "--emb".into(), s(&mix.join("embeddings.emb1")),
                "--triplets".into(), s(&mix.join("triplets.csv")),
                "--epochs".into(), "5".into(), "--batch-size".into(), "32".into(),
            ],
        ),
        (
            "apply",
            vec![
                "apply".into(), "--emb".into(), s(&planted.join("observed.emb1")),
                "--transform".into(), s(&planted.join("inverse.aft1")), "--no-center".into(),
                "--output-format".into(), "csv".into(),
            ],
        ),
    ];
    for g in ["all", "halves", "per-model", "pretrained-vs-finetuned", "depth-bins"] {
        runs.push((
            Box::leak(format!("correlate_{g}").into_boxed_str()),
            vec!["correlate".into(), "--series".into(), s(&fixtures.join("series.csv")), "--grouping".into(), g.into(),
                 "--bins".into(), "2".into()],
        ));
    }
    runs.into_iter()
        .map(|(name, args)| {
            let dir = out.join(name);
            let mut full: Vec<String> = vec!["--out-dir".into(), o(name), "--seed".into(), "9".into()];
            full.extend(args);
            run_ok(&full.iter().map(String::as_str).collect::<Vec<_>>());
            (name.to_string(), dir)
        })
        .collect()
}
