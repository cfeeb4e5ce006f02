//! Subcommand implementations. Every command writes its outputs plus a
//! `manifest.json` into the output directory; each output cites the manifest hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context as _, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use convexalign::alignment::{self, center, OooaReport, CHANCE_FLOOR, HUMAN_CEILING};
use convexalign::convexity::{
    convexity_score, permutation_baseline, BaselineReport, ClassOutcome, ConvexityConfig, ConvexityReport,
    EndpointConvention,
};
use convexalign::embedding::{
    load_embeddings, load_labels, load_transform, load_triplets, save_embeddings, save_labels, save_transform,
    save_triplets, EmbeddingFormat, EmbeddingSet, LabelMap,
};
use convexalign::graph::{build_knn_graph, PathMode};
use convexalign::manifest::{RunManifest, Timestamps};
use convexalign::plot::{self, Reference, Series, Style};
use convexalign::stats::{correlate_grouped, Grouping, LayerSeries, ModelSize, Training};
use convexalign::synth::{self, PlantedSpec, Scenario, SynthSpec};
use convexalign::transform::{apply_transform, fit_naive_transform, transform_id, FitConfig};

use crate::{EmbeddingFormatArg, EndpointsArg, GraphArgs, GroupingArg, ModeArg, ReportFormat};

pub struct Context {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub format: ReportFormat,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Collects outputs for one run and writes the manifest last.
struct Run<'a> {
    ctx: &'a Context,
    manifest: RunManifest,
    started: u64,
}

impl<'a> Run<'a> {
    fn new(ctx: &'a Context, command: &str) -> Result<Self> {
        fs::create_dir_all(&ctx.out_dir)
            .with_context(|| format!("creating output directory {}", ctx.out_dir.display()))?;
        let mut manifest = RunManifest::new(command, ctx.seed);
        if let Some(t) = ctx.threads {
            // Results do not depend on the thread count; recorded for provenance only.
            manifest.set("threads", t);
        }
        Ok(Self {
            ctx,
            manifest,
            started: unix_now(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.ctx.out_dir.join(name)
    }

    fn record(&mut self, name: &str) {
        self.manifest.outputs.push(name.to_string());
    }

    fn write_text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.record(name);
        Ok(())
    }

    /// CSV with a leading `#` line echoing the manifest hash and config.
    fn write_csv(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("# {}\n{body}", self.manifest.echo());
        self.write_text(name, &text)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, report: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Envelope<'r, T> {
            manifest: String,
            config: &'r BTreeMap<String, String>,
            seed: u64,
            report: &'r T,
        }
        let env = Envelope {
            manifest: self.manifest.hash(),
            config: &self.manifest.config,
            seed: self.manifest.seed,
            report,
        };
        let text = serde_json::to_string_pretty(&env)? + "\n";
        self.write_text(name, &text)
    }

    fn write_report<T: Serialize>(&mut self, stem: &str, csv: &str, json: &T) -> Result<()> {
        if self.ctx.format.csv() {
            self.write_csv(&format!("{stem}.csv"), csv)?;
        }
        if self.ctx.format.json() {
            self.write_json(&format!("{stem}.json"), json)?;
        }
        Ok(())
    }

    fn provenance(&self) -> BTreeMap<String, String> {
        let mut meta = BTreeMap::new();
        meta.insert("manifest".into(), self.manifest.hash());
        meta.insert("command".into(), self.manifest.command.clone());
        meta
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.timestamps = Some(Timestamps {
            started_unix: self.started,
            finished_unix: unix_now(),
        });
        let mut m = serde_json::to_value(&self.manifest)?;
        m["hash"] = serde_json::Value::String(self.manifest.hash());
        let path = self.path("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// A per-layer input file.
struct LayerFile {
    layer: u32,
    path: PathBuf,
}

fn layer_index_from_name(path: &Path) -> Option<u32> {
    let stem = path.file_stem()?.to_str()?;
    stem.strip_prefix("layer_")?.parse().ok()
}

/// A directory yields its `layer_NNN.{emb1,csv}` files in layer order; a file is one layer.
fn discover_layers(path: &Path) -> Result<Vec<LayerFile>> {
    if path.is_dir() {
        let mut layers = Vec::new();
        for entry in fs::read_dir(path).with_context(|| format!("reading {}", path.display()))? {
            let p = entry?.path();
            let ext_ok = matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("emb1") | Some("csv")
            );
            if let (true, Some(layer)) = (ext_ok, layer_index_from_name(&p)) {
                layers.push(LayerFile { layer, path: p });
            }
        }
        if layers.is_empty() {
            bail!("no layer_NNN.emb1 files in {}", path.display());
        }
        layers.sort_by_key(|l| l.layer);
        if let Some(w) = layers.windows(2).find(|w| w[0].layer == w[1].layer) {
            bail!("layer {} appears twice in {}", w[0].layer, path.display());
        }
        Ok(layers)
    } else {
        let layer = layer_index_from_name(path).unwrap_or(0);
        Ok(vec![LayerFile {
            layer,
            path: path.to_path_buf(),
        }])
    }
}

fn load(path: &Path) -> Result<EmbeddingSet> {
    load_embeddings(path, EmbeddingFormat::from_path(path)).with_context(|| format!("loading {}", path.display()))
}

fn convexity_config(ctx: &Context, g: &GraphArgs) -> ConvexityConfig {
    ConvexityConfig {
        mode: match g.mode {
            ModeArg::Arbitrary => PathMode::Arbitrary,
            ModeArg::MaxSameClass => PathMode::MaxSameClass,
        },
        max_pairs: g.max_pairs,
        seed: ctx.seed,
        endpoints: match g.endpoints {
            EndpointsArg::Include => EndpointConvention::Include,
            EndpointsArg::InteriorOnly => EndpointConvention::InteriorOnly,
        },
    }
}

fn echo_graph_config(run: &mut Run, g: &GraphArgs, cfg: &ConvexityConfig) {
    run.manifest
        .set("k", g.k)
        .set("mode", format!("{:?}", cfg.mode))
        .set("max_pairs", cfg.max_pairs.map(|m| m.to_string()).unwrap_or_else(|| "all".into()))
        .set("endpoints", format!("{:?}", cfg.endpoints))
        .set("symmetrization", "union")
        .set("tie_break", "ascending_index");
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct LayerConvexity<'a> {
    layer: u32,
    file: String,
    report: &'a ConvexityReport,
}

pub fn convexity(ctx: &Context, g: &GraphArgs, dump_graph: bool) -> Result<()> {
    let mut run = Run::new(ctx, "convexity")?;
    let cfg = convexity_config(ctx, g);
    echo_graph_config(&mut run, g, &cfg);
    let layers = discover_layers(&g.emb)?;
    run.manifest.add_input(&g.emb)?;
    run.manifest.add_input(&g.labels)?;
    let labels = load_labels(&g.labels).with_context(|| format!("loading {}", g.labels.display()))?;

    let results = layers
        .par_iter()
        .map(|lf| -> Result<_> {
            let set = load(&lf.path)?;
            let classes = labels
                .vertex_classes(&set)
                .with_context(|| format!("joining labels to {}", lf.path.display()))?;
            let graph = build_knn_graph(&set, g.k).with_context(|| format!("graph for {}", lf.path.display()))?;
            let report = convexity_score(&graph, &classes, &cfg)
                .with_context(|| format!("convexity of {}", lf.path.display()))?;
            let edges = dump_graph.then(|| graph.to_edge_csv());
            Ok((report, edges))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("layer,class,class_name,status,score,sem,pairs_evaluated,pairs_disconnected\n");
    for (lf, (report, _)) in layers.iter().zip(&results) {
        for c in report.per_class.values() {
            let status = match c.outcome {
                ClassOutcome::Scored(_) => "scored",
                ClassOutcome::TooFewMembers => "too_few_members",
                ClassOutcome::AllDisconnected => "all_disconnected",
            };
            let name = labels.class_names.get(c.class as usize).cloned().unwrap_or_default();
            csv.push_str(&format!(
                "{},{},{},{},{},,{},{}\n",
                lf.layer,
                c.class,
                name,
                status,
                fmt_opt(c.score()),
                c.pairs_evaluated,
                c.pairs_disconnected
            ));
        }
        let evaluated: usize = report.per_class.values().map(|c| c.pairs_evaluated).sum();
        let disconnected: usize = report.per_class.values().map(|c| c.pairs_disconnected).sum();
        csv.push_str(&format!(
            "{},mean,,mean,{},{},{},{}\n",
            lf.layer,
            report.mean_score,
            fmt_opt(report.sem),
            evaluated,
            disconnected
        ));
    }
    let json: Vec<LayerConvexity> = layers
        .iter()
        .zip(&results)
        .map(|(lf, (report, _))| LayerConvexity {
            layer: lf.layer,
            file: lf.path.display().to_string(),
            report,
        })
        .collect();
    run.write_report("convexity", &csv, &json)?;
    for (lf, (_, edges)) in layers.iter().zip(&results) {
        if let Some(edges) = edges {
            run.write_csv(&format!("graph_layer_{:03}.csv", lf.layer), edges)?;
        }
    }
    run.finish()
}

#[derive(Serialize)]
struct LayerBaseline<'a> {
    layer: u32,
    file: String,
    baseline: &'a BaselineReport,
}

pub fn baseline(ctx: &Context, g: &GraphArgs, trials: usize) -> Result<()> {
    let mut run = Run::new(ctx, "baseline")?;
    let cfg = convexity_config(ctx, g);
    echo_graph_config(&mut run, g, &cfg);
    run.manifest.set("trials", trials);
    let layers = discover_layers(&g.emb)?;
    run.manifest.add_input(&g.emb)?;
    run.manifest.add_input(&g.labels)?;
    let labels = load_labels(&g.labels)?;

    let results = layers
        .par_iter()
        .map(|lf| -> Result<BaselineReport> {
            let set = load(&lf.path)?;
            let classes = labels.vertex_classes(&set)?;
            let graph = build_knn_graph(&set, g.k)?;
            Ok(permutation_baseline(&graph, &classes, trials, ctx.seed, &cfg)?)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("layer,mean,std,trials\n");
    for (lf, b) in layers.iter().zip(&results) {
        csv.push_str(&format!("{},{},{},{}\n", lf.layer, b.mean, b.std, b.trials));
    }
    let json: Vec<LayerBaseline> = layers
        .iter()
        .zip(&results)
        .map(|(lf, baseline)| LayerBaseline {
            layer: lf.layer,
            file: lf.path.display().to_string(),
            baseline,
        })
        .collect();
    run.write_report("baseline", &csv, &json)?;
    run.finish()
}

#[derive(Serialize)]
struct LayerOooa<'a> {
    layer: u32,
    file: String,
    #[serde(flatten)]
    report: &'a OooaReport,
}

pub fn oooa(ctx: &Context, emb: &Path, triplets_path: &Path, center_first: bool) -> Result<()> {
    let mut run = Run::new(ctx, "oooa")?;
    run.manifest.set("center", center_first).set("similarity", "cosine");
    let layers = discover_layers(emb)?;
    run.manifest.add_input(emb)?;
    run.manifest.add_input(triplets_path)?;
    let triplets = load_triplets(triplets_path).with_context(|| format!("loading {}", triplets_path.display()))?;

    let results = layers
        .par_iter()
        .map(|lf| -> Result<OooaReport> {
            let set = load(&lf.path)?;
            alignment::oooa(&set, &triplets, center_first)
                .with_context(|| format!("odd-one-out accuracy of {}", lf.path.display()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("layer,accuracy,n,ties,floor,ceiling,centered\n");
    for (lf, r) in layers.iter().zip(&results) {
        csv.push_str(&format!(
            "{},{},{},{},{:.4},{:.4},{}\n",
            lf.layer, r.accuracy, r.n_triplets, r.tie_count, r.chance_floor, r.human_ceiling, r.centered
        ));
    }
    let json: Vec<LayerOooa> = layers
        .iter()
        .zip(&results)
        .map(|(lf, report)| LayerOooa {
            layer: lf.layer,
            file: lf.path.display().to_string(),
            report,
        })
        .collect();
    run.write_report("oooa", &csv, &json)?;
    run.finish()
}

#[derive(Serialize)]
struct FitReport {
    epochs_run: usize,
    best_epoch: usize,
    stop: String,
    train_triplets: usize,
    val_triplets: usize,
    initial_train_loss: f64,
    best_train_loss: f64,
    initial_val_oooa: Option<f64>,
    best_val_oooa: Option<f64>,
    frobenius_norm: f64,
    transform_id: String,
    order: &'static str,
    test: Option<HeldOut>,
}

#[derive(Serialize)]
struct HeldOut {
    n: usize,
    identity_oooa: f64,
    fitted_oooa: f64,
}

pub fn fit(
    ctx: &Context,
    emb: &Path,
    triplets_path: &Path,
    test_path: Option<&Path>,
    cfg: &FitConfig,
    center_first: bool,
) -> Result<()> {
    let mut run = Run::new(ctx, "fit")?;
    run.manifest
        .set("lambda", cfg.lambda)
        .set("learning_rate", cfg.learning_rate)
        .set("max_epochs", cfg.max_epochs)
        .set("batch_size", cfg.batch_size)
        .set("val_fraction", cfg.val_fraction)
        .set("patience", cfg.patience)
        .set("init", "identity")
        .set("center", center_first);
    run.manifest.add_input(emb)?;
    run.manifest.add_input(triplets_path)?;
    if let Some(t) = test_path {
        run.manifest.add_input(t)?;
    }
    let raw = load(emb)?;
    let set = if center_first { center(&raw) } else { raw };
    let triplets = load_triplets(triplets_path)?;
    let trace = fit_naive_transform(&set, &triplets, cfg)?;

    let mut transform = trace.transform.clone();
    let id = transform_id(&transform);
    transform.meta.extend(run.provenance());
    transform.meta.insert("centered".into(), center_first.to_string());
    transform.meta.insert(
        "order".into(),
        if center_first { "center_then_transform" } else { "transform" }.into(),
    );
    save_transform(&transform, &run.path("transform.aft1"))?;
    run.record("transform.aft1");
    run.write_csv("trace.csv", &trace.to_csv())?;

    let test = match test_path {
        Some(p) => {
            let test = load_triplets(p)?;
            let identity = alignment::oooa(&set, &test, false)?.accuracy;
            let fitted = alignment::oooa(&apply_transform(&trace.transform, &set)?, &test, false)?.accuracy;
            Some(HeldOut {
                n: test.len(),
                identity_oooa: identity,
                fitted_oooa: fitted,
            })
        }
        None => None,
    };
    let best = &trace.epochs[trace.best_epoch.min(trace.epochs.len() - 1)];
    let report = FitReport {
        epochs_run: trace.epochs_run,
        best_epoch: trace.best_epoch,
        stop: format!("{:?}", trace.stop),
        train_triplets: trace.train_triplets,
        val_triplets: trace.val_triplets,
        initial_train_loss: trace.epochs[0].train_loss,
        best_train_loss: best.train_loss,
        initial_val_oooa: trace.epochs[0].val_oooa,
        best_val_oooa: best.val_oooa,
        frobenius_norm: trace.transform.frobenius_norm(),
        transform_id: id,
        order: if center_first { "center_then_transform" } else { "transform" },
        test,
    };
    let mut csv = String::from("key,value\n");
    let value = serde_json::to_value(&report)?;
    for (k, v) in value.as_object().unwrap() {
        if let Some(obj) = v.as_object() {
            for (k2, v2) in obj {
                csv.push_str(&format!("{k}.{k2},{v2}\n"));
            }
        } else {
            csv.push_str(&format!("{k},{}\n", v.to_string().trim_matches('"')));
        }
    }
    run.write_report("fit", &csv, &report)?;
    run.finish()
}

pub fn apply(
    ctx: &Context,
    emb: &Path,
    transform_path: &Path,
    center_first: bool,
    format: EmbeddingFormatArg,
) -> Result<()> {
    let mut run = Run::new(ctx, "apply")?;
    run.manifest.set("center", center_first);
    let layers = discover_layers(emb)?;
    run.manifest.add_input(emb)?;
    run.manifest.add_input(transform_path)?;
    let transform = load_transform(transform_path)?;
    let (fmt, ext) = match format {
        EmbeddingFormatArg::Emb1 => (EmbeddingFormat::Emb1, "emb1"),
        EmbeddingFormatArg::Csv => (EmbeddingFormat::Csv, "csv"),
    };
    for lf in &layers {
        let raw = load(&lf.path)?;
        let set = if center_first { center(&raw) } else { raw };
        let mut out = apply_transform(&transform, &set)
            .with_context(|| format!("applying transform to {}", lf.path.display()))?;
        out.meta.extend(run.provenance());
        out.meta.insert(
            "order".into(),
            if center_first { "center_then_transform" } else { "transform" }.into(),
        );
        let name = format!("layer_{:03}.{ext}", lf.layer);
        save_embeddings(&out, &run.path(&name), fmt)?;
        run.record(&name);
    }
    run.finish()
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    model: String,
    layer: u32,
    convexity: f64,
    oooa: f64,
    training: Training,
    size: ModelSize,
}

fn read_series(path: &Path) -> Result<Vec<LayerSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut by_model: BTreeMap<String, Vec<SeriesRow>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<SeriesRow>().enumerate() {
        let row = row.with_context(|| format!("{} row {}", path.display(), i + 1))?;
        by_model.entry(row.model.clone()).or_default().push(row);
    }
    by_model
        .into_iter()
        .map(|(model, mut rows)| {
            rows.sort_by_key(|r| r.layer);
            let training = rows[0].training;
            let size = rows[0].size;
            if rows.iter().any(|r| r.training != training || r.size != size) {
                bail!("model `{model}` has inconsistent training/size tags");
            }
            Ok(LayerSeries::new(
                model,
                rows.iter().map(|r| r.layer).collect(),
                rows.iter().map(|r| r.convexity).collect(),
                rows.iter().map(|r| r.oooa).collect(),
                training,
                size,
            )?)
        })
        .collect()
}

pub fn correlate(ctx: &Context, series_path: &Path, grouping: GroupingArg, bins: usize) -> Result<()> {
    let mut run = Run::new(ctx, "correlate")?;
    let grouping = match grouping {
        GroupingArg::All => Grouping::All,
        GroupingArg::Halves => Grouping::Halves,
        GroupingArg::PerModel => Grouping::PerModel,
        GroupingArg::PretrainedVsFinetuned => Grouping::PretrainedVsFinetuned,
        GroupingArg::DepthBins => Grouping::DepthBins(bins),
    };
    run.manifest
        .set("grouping", grouping)
        .set("halves_split", "ceil(L/2) layers in first half")
        .set("pooling", "points pooled across models");
    run.manifest.add_input(series_path)?;
    let series = read_series(series_path)?;
    if series.is_empty() {
        bail!("{} contains no rows", series_path.display());
    }
    let grouped = correlate_grouped(&series, grouping);

    let mut csv = String::from("group,r,n_points\n");
    for (group, c) in &grouped.groups {
        csv.push_str(&format!("{group},{},{}\n", c.r, c.n_points));
    }
    for (group, reason) in &grouped.skipped {
        log::warn!("group `{group}` skipped: {reason}");
    }
    run.write_report("correlation", &csv, &grouped)?;

    let echo = run.manifest.echo();
    let per_model = |metric: fn(&LayerSeries, usize) -> f64| -> Vec<Series> {
        series
            .iter()
            .map(|s| Series {
                name: s.model_id.clone(),
                points: (0..s.len()).map(|i| (s.layers[i] as f64, metric(s, i))).collect(),
            })
            .collect()
    };
    let conv_svg = plot::render(
        "Graph convexity by layer",
        "layer",
        "convexity",
        &per_model(|s, i| s.convexity[i]),
        &[],
        Style::Lines,
        &echo,
    );
    run.write_text("convexity_by_layer.svg", &conv_svg)?;
    let oooa_svg = plot::render(
        "Odd-one-out accuracy by layer",
        "layer",
        "OOOA",
        &per_model(|s, i| s.oooa[i]),
        &[
            Reference {
                label: "chance".into(),
                y: CHANCE_FLOOR,
            },
            Reference {
                label: "human consistency".into(),
                y: HUMAN_CEILING,
            },
        ],
        Style::Lines,
        &echo,
    );
    run.write_text("oooa_by_layer.svg", &oooa_svg)?;
    let scatter: Vec<Series> = series
        .iter()
        .map(|s| Series {
            name: s.model_id.clone(),
            points: s.convexity.iter().copied().zip(s.oooa.iter().copied()).collect(),
        })
        .collect();
    let scatter_svg = plot::render(
        "Convexity vs odd-one-out accuracy",
        "convexity",
        "OOOA",
        &scatter,
        &[],
        Style::Markers,
        &echo,
    );
    run.write_text("scatter.svg", &scatter_svg)?;
    run.finish()
}

pub struct SynthArgs {
    pub classes: usize,
    pub items: usize,
    pub dim: usize,
    pub separation: f64,
    pub n_triplets: usize,
    pub noise: f64,
}

pub fn synth(ctx: &Context, scenario: Option<&str>, planted: bool, args: SynthArgs) -> Result<()> {
    let mut run = Run::new(ctx, "synth")?;
    if planted {
        run.manifest.set("fixture", "planted");
        let spec = PlantedSpec {
            seed: ctx.seed,
            ..Default::default()
        };
        let fx = synth::gen_planted(&spec)?;
        let mut observed = fx.observed.clone();
        observed.meta.extend(run.provenance());
        let mut truth = fx.truth.clone();
        truth.meta.extend(run.provenance());
        save_embeddings(&observed, &run.path("observed.emb1"), EmbeddingFormat::Emb1)?;
        run.record("observed.emb1");
        save_embeddings(&truth, &run.path("truth.emb1"), EmbeddingFormat::Emb1)?;
        run.record("truth.emb1");
        for (name, t) in [("planted.aft1", &fx.planted), ("inverse.aft1", &fx.inverse)] {
            let mut t = t.clone();
            t.meta.extend(run.provenance());
            save_transform(&t, &run.path(name))?;
            run.record(name);
        }
        save_triplets(&fx.train, &run.path("train.csv"))?;
        run.record("train.csv");
        save_triplets(&fx.test, &run.path("test.csv"))?;
        run.record("test.csv");
        return run.finish();
    }

    let (set, labels, triplets, expected) = match scenario {
        Some(name) => {
            let which: Scenario = name.parse()?;
            run.manifest.set("fixture", which.name());
            let fx = synth::gen_scenario(which, ctx.seed)?;
            let expected = serde_json::json!({
                "scenario": which.name(),
                "k": fx.k,
                "convexity_band": fx.convexity_band,
                "oooa_band": fx.oooa_band,
            });
            (fx.embeddings, fx.labels, fx.triplets, Some(expected))
        }
        None => {
            let spec = SynthSpec {
                n_classes: args.classes,
                items_per_class: args.items,
                dim: args.dim,
                separation: args.separation,
                sigma: 1.0,
                seed: ctx.seed,
            };
            run.manifest
                .set("fixture", "mixture")
                .set("classes", spec.n_classes)
                .set("items", spec.items_per_class)
                .set("dim", spec.dim)
                .set("separation", spec.separation)
                .set("triplets", args.n_triplets)
                .set("noise", args.noise);
            let (set, labels) = synth::gen_embeddings(&spec)?;
            // Label on the centred geometry, which is what `oooa` evaluates by default.
            let triplets = synth::gen_triplets(&center(&set), args.n_triplets, ctx.seed.wrapping_add(1), args.noise)?;
            (set, labels, triplets, None)
        }
    };
    let mut set = set;
    set.meta.extend(run.provenance());
    save_embeddings(&set, &run.path("embeddings.emb1"), EmbeddingFormat::Emb1)?;
    run.record("embeddings.emb1");
    write_labels(&mut run, &labels)?;
    save_triplets(&triplets, &run.path("triplets.csv"))?;
    run.record("triplets.csv");
    if let Some(expected) = expected {
        run.write_json("expected.json", &expected)?;
    }
    run.finish()
}

fn write_labels(run: &mut Run, labels: &LabelMap) -> Result<()> {
    save_labels(labels, &run.path("labels.json")).map_err(|e| anyhow!(e))?;
    run.record("labels.json");
    Ok(())
}
