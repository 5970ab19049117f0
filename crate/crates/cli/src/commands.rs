use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use remnet_core::dataset::synth::{generate, SynthConfig};
use remnet_core::dataset::{
    convert_records, ingest, pca3, prepare, silhouette_two_groups, split, summary_stats, write_canonical,
    BoxStats, ConvertOptions, IngestOptions, SplitSpec, CIR_WINDOW,
};
use remnet_core::deploy::{calibration_subset, deploy};
use remnet_core::engine::{
    emit_embedded_source, energy_per_inference, measure_latency, power_mw, read_header, serialize,
    serialize_float, Engine,
};
use remnet_core::model::REFERENCE_MLP_HIDDEN;
use remnet_core::train::{evaluate_predictions, train as fit, PreparedSet, SeedSummary, TrainConfig};
use remnet_core::{CirSample, Environment, Metrics, MlpWeights, NormMode, RemnetWeights, SavedModel};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::emit;
use crate::{AnalyzeArgs, Arch, BenchArgs, ConvertArgs, ExportArgs, PipelineArgs, QuantizeArgs, TrainArgs};

const DEFAULT_OUT: &str = "remnet-out";
const TABLE_CIR_LENS: [usize; 5] = [157, 128, 64, 32, 16];
const MAX_REPORTED_REJECTIONS: usize = 20;
const SILHOUETTE_POINTS_PER_GROUP: usize = 2000;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn delimiter(c: char) -> Result<u8> {
    if !c.is_ascii() {
        bail!("delimiter must be a single ASCII character");
    }
    Ok(c as u8)
}

pub fn convert(a: &ConvertArgs) -> Result<()> {
    let (samples, rejected, source) = match (&a.input, a.synthetic) {
        (_, Some(scale)) => {
            if !(scale > 0.0 && scale.is_finite()) {
                bail!("--synthetic scale must be positive");
            }
            (
                generate(&SynthConfig::campaign(scale, a.seed)),
                Vec::new(),
                "synthetic".to_string(),
            )
        }
        (Some(input), None) => {
            let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
            let opts = ConvertOptions {
                delimiter: delimiter(a.delimiter)?,
            };
            let (s, r) =
                convert_records(file, opts).with_context(|| format!("converting {}", input.display()))?;
            (s, r, input.display().to_string())
        }
        (None, None) => bail!("either --input or --synthetic is required"),
    };
    if samples.is_empty() {
        bail!("no valid samples in {source}");
    }
    write_canonical(&a.out, &samples)?;
    let per_env: serde_json::Map<String, serde_json::Value> = Environment::ALL
        .iter()
        .map(|e| {
            let n = samples.iter().filter(|s| s.environment == *e).count();
            (e.label().to_string(), json!(n))
        })
        .collect();
    let shown: Vec<_> = rejected
        .iter()
        .take(MAX_REPORTED_REJECTIONS)
        .map(|(line, reason)| json!({"line": line, "reason": reason}))
        .collect();
    emit(
        "convert",
        &json!({
            "source": source,
            "out": a.out,
            "samples": samples.len(),
            "rejected": rejected.len(),
            "per_environment": per_env,
            "rejections": shown,
        }),
    )
}

fn load_dataset(path: &Path) -> Result<Vec<CirSample>> {
    let report = ingest(path, IngestOptions::default())
        .with_context(|| format!("loading dataset {}", path.display()))?;
    let shown: Vec<_> = report.rejected.iter().take(MAX_REPORTED_REJECTIONS).collect();
    emit(
        "dataset",
        &json!({
            "path": path,
            "samples": report.samples.len(),
            "rejected": report.rejected.len(),
            "rejections": shown,
        }),
    )?;
    if report.samples.is_empty() {
        bail!("dataset {} holds no valid samples", path.display());
    }
    Ok(report.samples)
}

struct Splits {
    samples: Vec<CirSample>,
    split: SplitSpec,
}

impl Splits {
    fn load(path: &Path) -> Result<Self> {
        let samples = load_dataset(path)?;
        let split = split(&samples)?;
        Ok(Splits { samples, split })
    }

    fn sets(&self, cir_len: usize, norm: NormMode) -> Result<(PreparedSet, PreparedSet)> {
        Ok((
            PreparedSet::from_samples(self.split.train_samples(&self.samples), cir_len, norm)?,
            PreparedSet::from_samples(self.split.test_samples(&self.samples), cir_len, norm)?,
        ))
    }

    fn emit_baseline(&self) -> Result<()> {
        let test: Vec<CirSample> = self.split.test_samples(&self.samples).cloned().collect();
        emit(
            "baseline",
            &json!({
                "train_samples": self.split.train.len(),
                "test_samples": self.split.test.len(),
                "unmitigated": summary_stats(&test)?,
            }),
        )
    }
}

#[derive(Serialize)]
struct TrainRun {
    arch: &'static str,
    cir_len: usize,
    seed: u64,
    params: usize,
    final_loss: f64,
    weights: PathBuf,
    history: PathBuf,
    metrics: Metrics,
}

fn arch_name(arch: Arch) -> &'static str {
    match arch {
        Arch::Remnet => "remnet",
        Arch::Mlp => "mlp",
    }
}

/// Trains one model; returns the weights, the final epoch loss and the
/// float test predictions.
fn fit_one(
    arch: Arch,
    cfg: &RunConfig,
    cir_len: usize,
    seed: u64,
    train_set: &PreparedSet,
    train_cfg: &TrainConfig,
) -> Result<(SavedModel, Vec<f64>)> {
    let (model, history) = match arch {
        Arch::Remnet => {
            let mut w = RemnetWeights::build(cfg.model_config(cir_len), seed)?;
            let h = fit(&mut w, train_set, train_cfg, seed)?;
            (SavedModel::Remnet(w), h)
        }
        Arch::Mlp => {
            let dropout = cfg.model_config(cir_len).dropout_rate;
            let mut w = MlpWeights::build(cir_len, &REFERENCE_MLP_HIDDEN, dropout, seed)?;
            let h = fit(&mut w, train_set, train_cfg, seed)?;
            (SavedModel::Mlp(w), h)
        }
    };
    Ok((model, history.epoch_loss))
}

fn predict_all(model: &SavedModel, set: &PreparedSet) -> Result<Vec<f64>> {
    Ok(set
        .inputs
        .iter()
        .map(|x| model.predict(x))
        .collect::<remnet_core::Result<Vec<_>>>()?)
}

/// Trains every seed for one CIR length, persisting weights and histories.
fn train_seeds(
    arch: Arch,
    cfg: &RunConfig,
    cir_len: usize,
    data: &Splits,
    out: &Path,
) -> Result<Vec<(SavedModel, PreparedSet, PreparedSet, Metrics)>> {
    let (train_set, test_set) = data.sets(cir_len, cfg.norm())?;
    let train_cfg = cfg.train_config();
    let dir = out.join(format!("k{cir_len}"));
    create_dir(&dir)?;
    let mut results = Vec::new();
    for &seed in &train_cfg.seeds {
        let (model, losses) = fit_one(arch, cfg, cir_len, seed, &train_set, &train_cfg)?;
        let eval = evaluate_predictions(predict_all(&model, &test_set)?, &test_set)?;
        let weights = dir.join(format!("{}_seed{seed}.json", arch_name(arch)));
        model.save(&weights)?;
        let history = dir.join(format!("{}_seed{seed}_history.json", arch_name(arch)));
        std::fs::write(
            &history,
            serde_json::to_string(&json!({"seed": seed, "epoch_loss": losses}))?,
        )
        .with_context(|| format!("writing {}", history.display()))?;
        emit(
            "train_run",
            &TrainRun {
                arch: arch_name(arch),
                cir_len,
                seed,
                params: model.param_count(),
                final_loss: losses.last().copied().unwrap_or(f64::NAN),
                weights,
                history,
                metrics: eval.metrics.clone(),
            },
        )?;
        results.push((model, train_set.clone(), test_set.clone(), eval.metrics));
    }
    Ok(results)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    create_dir(&out)?;
    cfg.save(&out.join("run_config.toml"))?;
    Ok(out)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let cfg = a.run.to_config(&[157])?;
    let out = out_dir(&cfg)?;
    let data = Splits::load(cfg.dataset())?;
    data.emit_baseline()?;
    for &k in cfg.cir_lens() {
        let runs = train_seeds(a.arch, &cfg, k, &data, &out)?;
        let metrics: Vec<Metrics> = runs.into_iter().map(|r| r.3).collect();
        emit(
            "train_summary",
            &json!({
                "arch": arch_name(a.arch),
                "cir_len": k,
                "summary": SeedSummary::from_runs(&metrics)?,
            }),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PipelineRow {
    model: &'static str,
    cir_len: usize,
    params: usize,
    seeds: usize,
    mae_m: f64,
    mae_go_m: f64,
    mae_int8_m: f64,
    mae_std_m: f64,
    max_optimized_gap_m: f64,
    max_int8_gap_m: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn pipeline_one(arch: Arch, cfg: &RunConfig, k: usize, data: &Splits, out: &Path) -> Result<()> {
    let runs = train_seeds(arch, cfg, k, data, out)?;
    let mut comparisons = Vec::new();
    let mut residuals = Vec::new();
    for (i, (model, train_set, test_set, _)) in runs.iter().enumerate() {
        let calibration = calibration_subset(&train_set.inputs, cfg.calibration_samples());
        let d = deploy(model, &calibration)?;
        for w in &d.quantize_report.warnings {
            emit("warning", &json!({"cir_len": k, "message": w}))?;
        }
        let c = d.compare(test_set)?;
        let preds = predict_all(model, test_set)?;
        residuals.extend(test_set.targets.iter().zip(&preds).map(|(t, p)| (t - p).abs()));
        if i == 0 {
            let sizes = d.image_sizes()?;
            let dir = out.join(format!("k{k}"));
            let stem = format!("{}_seed0", arch_name(arch));
            std::fs::write(dir.join(format!("{stem}.int8.rmni")), serialize(&d.quantized)?)?;
            std::fs::write(
                dir.join(format!("{stem}.f32.rmni")),
                serialize_float(&d.optimized)?,
            )?;
            let arena = Engine::new(d.quantized.clone())?.arena_bytes();
            emit(
                "image_sizes",
                &json!({
                    "model": arch_name(arch),
                    "cir_len": k,
                    "float_bytes": sizes.float_bytes,
                    "optimized_bytes": sizes.optimized_bytes,
                    "int8_bytes": sizes.int8_bytes,
                    "arena_bytes": arena,
                    "optimize": d.optimize_report,
                }),
            )?;
        }
        comparisons.push(c);
    }
    let maes: Vec<f64> = comparisons.iter().map(|c| c.float.mae_m).collect();
    let mae = mean(maes.iter().copied());
    let row = PipelineRow {
        model: arch_name(arch),
        cir_len: k,
        params: runs[0].0.param_count(),
        seeds: runs.len(),
        mae_m: mae,
        mae_go_m: mean(comparisons.iter().map(|c| c.optimized.mae_m)),
        mae_int8_m: mean(comparisons.iter().map(|c| c.int8.mae_m)),
        mae_std_m: mean(maes.iter().map(|m| (m - mae) * (m - mae))).sqrt(),
        max_optimized_gap_m: comparisons
            .iter()
            .map(|c| c.max_optimized_gap_m)
            .fold(0.0, f64::max),
        max_int8_gap_m: comparisons.iter().map(|c| c.max_int8_gap_m).fold(0.0, f64::max),
    };
    emit("pipeline_row", &row)?;
    let mut box_fields = serde_json::to_value(BoxStats::from_values(&residuals)?)?;
    box_fields["model"] = json!(arch_name(arch));
    box_fields["cir_len"] = json!(k);
    emit("residual_box", &box_fields)
}

pub fn pipeline(a: &PipelineArgs) -> Result<()> {
    let cfg = a.run.to_config(&TABLE_CIR_LENS)?;
    let out = out_dir(&cfg)?;
    let data = Splits::load(cfg.dataset())?;
    data.emit_baseline()?;
    let mut jobs: Vec<(Arch, usize)> = cfg.cir_lens().iter().map(|&k| (Arch::Remnet, k)).collect();
    if a.with_mlp {
        jobs.push((Arch::Mlp, CIR_WINDOW));
    }
    let mut failures = 0;
    for (arch, k) in jobs {
        if let Err(e) = pipeline_one(arch, &cfg, k, &data, &out) {
            failures += 1;
            emit(
                "pipeline_error",
                &json!({"model": arch_name(arch), "cir_len": k, "error": format!("{e:#}")}),
            )?;
        }
    }
    if failures > 0 {
        bail!("{failures} pipeline row(s) failed");
    }
    Ok(())
}

pub fn quantize(a: &QuantizeArgs) -> Result<()> {
    let model =
        SavedModel::load(&a.weights).with_context(|| format!("loading weights {}", a.weights.display()))?;
    let k = model.input_len();
    let data = Splits::load(&a.dataset)?;
    let (train_set, test_set) = data.sets(k, a.norm.into())?;
    let calibration = calibration_subset(&train_set.inputs, a.calibration_samples);
    let d = deploy(&model, &calibration)?;
    let image = serialize(&d.quantized)?;
    std::fs::write(&a.out, &image).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.float_out {
        std::fs::write(p, serialize_float(&d.optimized)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let c = d.compare(&test_set)?;
    emit(
        "quantize",
        &json!({
            "weights": a.weights,
            "image": a.out,
            "cir_len": k,
            "calibration_samples": calibration.len(),
            "sizes": d.image_sizes()?,
            "optimize": d.optimize_report,
            "warnings": d.quantize_report.warnings,
            "widened_outputs": d.quantize_report.widened_outputs,
            "mae_m": c.float.mae_m,
            "mae_go_m": c.optimized.mae_m,
            "mae_int8_m": c.int8.mae_m,
            "max_int8_gap_m": c.max_int8_gap_m,
            "output_scale": c.output_scale,
        }),
    )
}

pub fn export(a: &ExportArgs) -> Result<()> {
    let image = std::fs::read(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let header = read_header(&image).with_context(|| format!("checking {}", a.image.display()))?;
    let src = emit_embedded_source(&image, &a.symbol)?;
    std::fs::write(&a.out, &src).with_context(|| format!("writing {}", a.out.display()))?;
    emit(
        "export",
        &json!({
            "image": a.image,
            "out": a.out,
            "symbol": a.symbol,
            "bytes": image.len(),
            "kind": format!("{:?}", header.kind).to_lowercase(),
        }),
    )
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let power = match (a.vcc, a.iabs) {
        (Some(v), Some(i)) => Some(power_mw(v, i)?),
        _ => None,
    };
    // Realistic inputs: a small synthetic campaign.
    let samples = generate(&SynthConfig::campaign(0.002, a.seed));
    for path in &a.image {
        let image = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let mut engine = Engine::from_image(&image).with_context(|| format!("loading {}", path.display()))?;
        let k = engine.model().input_shape().numel();
        let inputs = samples
            .iter()
            .map(|s| engine.model().quantize_input(&prepare(s, k, NormMode::MaxAbs)?))
            .collect::<remnet_core::Result<Vec<_>>>()?;
        let stats = measure_latency(&mut engine, &inputs, a.runs)?;
        let mut rec = json!({
            "image": path,
            "cir_len": k,
            "image_bytes": image.len(),
            "arena_bytes": engine.arena_bytes(),
            "runs": stats.runs,
            "max_ms": stats.max_ms,
            "mean_ms": stats.mean_ms,
            "min_ms": stats.min_ms,
            "f_m_hz": stats.f_m_hz,
        });
        if let Some(p) = power {
            rec["vcc_v"] = json!(a.vcc);
            rec["iabs_ma"] = json!(a.iabs);
            rec["power_mw"] = json!(p);
            rec["energy_mj"] = json!(energy_per_inference(p, stats.f_m_hz)?);
        }
        emit("bench", &rec)?;
    }
    Ok(())
}

fn strided<T: Clone>(v: &[T], max: usize) -> Vec<T> {
    if v.len() <= max {
        return v.to_vec();
    }
    (0..max).map(|i| v[i * v.len() / max].clone()).collect()
}

pub fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let samples = load_dataset(&a.dataset)?;
    let norm: NormMode = a.norm.into();
    create_dir(&a.out)?;
    let rows = samples
        .iter()
        .map(|s| prepare(s, CIR_WINDOW, norm))
        .collect::<remnet_core::Result<Vec<_>>>()?;
    let pca = pca3(&rows)?;
    let proj_path = a.out.join("pca_projection.csv");
    let mut w =
        csv::Writer::from_path(&proj_path).with_context(|| format!("writing {}", proj_path.display()))?;
    w.write_record(["pc1", "pc2", "pc3", "environment", "material", "los"])?;
    for (p, s) in pca.projected.iter().zip(&samples) {
        w.write_record([
            p[0].to_string(),
            p[1].to_string(),
            p[2].to_string(),
            s.environment.label().to_string(),
            s.material.clone(),
            u8::from(s.los).to_string(),
        ])?;
    }
    w.flush()?;
    emit(
        "pca",
        &json!({
            "samples": samples.len(),
            "projection": proj_path,
            "eigenvalues": pca.eigenvalues,
            "explained_variance_ratio": pca.explained_variance_ratio,
        }),
    )?;

    let group = |keep: &dyn Fn(&CirSample) -> bool| -> Vec<[f64; 3]> {
        let all: Vec<[f64; 3]> = pca
            .projected
            .iter()
            .zip(&samples)
            .filter(|(_, s)| keep(s))
            .map(|(p, _)| *p)
            .collect();
        strided(&all, SILHOUETTE_POINTS_PER_GROUP)
    };
    let indoor = group(&|s| s.environment.is_indoor_room());
    let wall = group(&|s| s.environment == Environment::ThroughWall);
    match silhouette_two_groups(&indoor, &wall) {
        Ok(score) => emit(
            "silhouette",
            &json!({"groups": ["indoor", "through_wall"], "points": [indoor.len(), wall.len()], "score": score}),
        )?,
        Err(e) => emit(
            "silhouette",
            &json!({"groups": ["indoor", "through_wall"], "error": e.to_string()}),
        )?,
    }

    if a.weights.is_empty() {
        return Ok(());
    }
    let split = split(&samples)?;
    let mut boxes = Vec::new();
    for path in &a.weights {
        let model = SavedModel::load(path).with_context(|| format!("loading {}", path.display()))?;
        let k = model.input_len();
        let test = PreparedSet::from_samples(split.test_samples(&samples), k, norm)?;
        let eval = evaluate_predictions(predict_all(&model, &test)?, &test)?;
        let mut rec = serde_json::to_value(BoxStats::from_values(&eval.abs_residuals(&test))?)?;
        rec["weights"] = json!(path);
        rec["cir_len"] = json!(k);
        rec["mae_m"] = json!(eval.metrics.mae_m);
        emit("residual_box", &rec)?;
        boxes.push(rec);
    }
    let box_path = a.out.join("residual_boxes.json");
    std::fs::write(&box_path, serde_json::to_string_pretty(&boxes)?)
        .with_context(|| format!("writing {}", box_path.display()))?;
    Ok(())
}
