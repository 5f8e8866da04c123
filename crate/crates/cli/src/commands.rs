use std::path::{Path, PathBuf};

use gazefusion_core::split::split_participants;
use gazefusion_core::{dims, load_manifest, read_array, write_array, Array, SplitAssignment, N_TASKS};
use gazefusion_explain::{
    explain as explain_sample, read_saliency, write_curve_png, write_overlay_png, write_saliency, CamLayer,
};
use gazefusion_model::{load_checkpoint, InferenceMode};
use gazefusion_preprocess::{preprocess_manifest, AlignedSample, SampleStore, Streams};
use gazefusion_synthgen::gen_dataset;
use gazefusion_train::experiment::RunRecord;
use gazefusion_train::metrics::{aggregate_table, objective_table, subjective_table};
use gazefusion_train::{ablation_table, run_experiment, AccuracyReport, Variant};

use crate::args::{AblateArgs, EvaluateArgs, ExplainArgs, PreprocessArgs, ReportArgs, SynthArgs, TrainArgs, TrainOpts};
use crate::settings::{model_enabled, Settings};
use crate::{CliError, CliResult};

/// Prepare an output directory. One holding `marker` is a completed output
/// and is only replaced under `force`.
fn claim_output(stage: &'static str, dir: &Path, marker: &str, force: bool) -> CliResult<()> {
    if dir.join(marker).exists() {
        if !force {
            return Err(CliError::new(
                stage,
                format!("{} already holds a completed output; pass --force to replace it", dir.display()),
            ));
        }
        std::fs::remove_dir_all(dir).map_err(|e| CliError::new(stage, format!("{}: {e}", dir.display())))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::new(stage, format!("{}: {e}", dir.display())))
}

fn write_text(stage: &'static str, path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::new(stage, format!("{}: {e}", path.display())))
}

fn read_text(stage: &'static str, path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(stage, format!("{}: {e}", path.display())))
}

fn apply_train_opts(s: &mut Settings, o: &TrainOpts) {
    s.flag("train.stage1_epochs", o.stage1_epochs);
    s.flag("train.stage3_epochs", o.stage3_epochs);
    s.flag("train.learning_rate", o.learning_rate);
    s.flag("train.batch_size", o.batch_size);
    s.flag("train.freeze_fraction", o.freeze_fraction);
    s.flag("train.patience", o.patience);
    s.flag("train.target_train_accuracy", o.target_train_accuracy);
    s.flag("train.seed", o.seed);
    s.flag("split.seed", o.split_seed);
}

fn open_store(stage: &'static str, dir: &Path) -> CliResult<SampleStore> {
    SampleStore::open(dir).map_err(|e| CliError::new(stage, e))
}

fn store_split(stage: &'static str, store: &SampleStore, s: &Settings) -> CliResult<SplitAssignment> {
    let (ratios, seed) = s.split()?;
    let mut ids: Vec<String> = store.index.samples.iter().map(|m| m.participant_id.clone()).collect();
    ids.sort();
    ids.dedup();
    split_participants(&ids, ratios, seed).map_err(|e| CliError::new(stage, e))
}

fn mode_rank(mode: &str) -> usize {
    ["full", "video-only-zero", "video-only-mean", "no-attention", "no-pupil", "neither"]
        .iter()
        .position(|m| *m == mode)
        .unwrap_or(usize::MAX)
}

fn result_tables(rows: &[(&str, &AccuracyReport)]) -> String {
    format!("{}\n{}\n{}", aggregate_table("Test accuracy", rows), objective_table(rows), subjective_table(rows))
}

pub fn synth(a: &SynthArgs, mut s: Settings, force: bool) -> CliResult<String> {
    s.flag("synth.participants", a.participants);
    s.flag("synth.videos", a.videos);
    s.flag("synth.views", a.views);
    s.flag("synth.seed", a.seed);
    s.flag("synth.width", a.width);
    s.flag("synth.height", a.height);
    s.flag("synth.fps", a.fps);
    s.flag("synth.duration_s", a.duration);
    s.flag("synth.gaze_hz", a.gaze_hz);
    s.flag("synth.design", a.design.as_deref());
    let cfg = s.synth()?;
    cfg.validate().map_err(|e| CliError::new("config", e))?;
    claim_output("synth", &a.out, "manifest.toml", force)?;
    let m = gen_dataset(&cfg, &a.out).map_err(|e| CliError::new("synth", e))?;
    Ok(format!(
        "synth: {} trials from {} participants and {} videos in {}\n",
        m.records.len(),
        cfg.participants,
        cfg.videos,
        a.out.display()
    ))
}

pub fn preprocess(a: &PreprocessArgs, mut s: Settings, force: bool) -> CliResult<String> {
    s.flag("preprocess.window_s", a.window_s);
    s.flag("preprocess.image_size", a.image_size);
    s.flag("preprocess.work_width", a.work_width);
    s.flag("preprocess.work_height", a.work_height);
    let cfg = s.preprocess()?;
    let path = if a.manifest.is_dir() { a.manifest.join("manifest.toml") } else { a.manifest.clone() };
    let manifest = load_manifest(&path).map_err(|e| CliError::new("preprocess", e))?;
    claim_output("preprocess", &a.out, "index.toml", force)?;
    let index = preprocess_manifest(&manifest, &cfg, &a.out).map_err(|e| CliError::new("preprocess", e))?;
    Ok(format!(
        "preprocess: {} samples of {} steps, {} excluded, in {}\n",
        index.samples.len(),
        index.steps,
        index.excluded.len(),
        a.out.display()
    ))
}

pub fn train(a: &TrainArgs, mut s: Settings, force: bool) -> CliResult<String> {
    model_enabled("train")?;
    apply_train_opts(&mut s, &a.opts);
    let variant = Variant::parse(&a.variant).map_err(|e| CliError::new("config", e))?;
    let (model, cfg) = (s.model()?, s.train()?);
    let store = open_store("train", &a.data)?;
    let split = store_split("train", &store, &s)?;
    claim_output("train", &a.out, "run.toml", force)?;
    write_text("train", &a.out.join("config.txt"), &s.kv.to_text())?;
    let reports = run_experiment(&store, &split, &model, &cfg, variant, &a.out).map_err(|e| CliError::new("train", e))?;
    let rows: Vec<(&str, &AccuracyReport)> = reports.iter().map(|r| (r.mode.as_str(), r)).collect();
    Ok(result_tables(&rows))
}

fn load_run(stage: &'static str, run: &Path) -> CliResult<RunRecord> {
    let text = read_text(stage, &run.join("run.toml"))?;
    toml::from_str(&text).map_err(|e| CliError::new(stage, format!("{}: {e}", run.join("run.toml").display())))
}

fn parse_mode(s: &str) -> CliResult<InferenceMode> {
    InferenceMode::parse(s)
        .ok_or_else(|| CliError::new("config", format!("unknown mode {s:?}; expected full, video-only-zero or video-only-mean")))
}

fn mode_streams(mode: InferenceMode) -> Streams {
    match mode {
        InferenceMode::FullMultimodal => Streams::ALL,
        _ => Streams::VIDEO_ONLY,
    }
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<String> {
    model_enabled("evaluate")?;
    let mode = parse_mode(&a.mode)?;
    let record = load_run("evaluate", &a.run)?;
    let (net, stats) = load_checkpoint(&a.run.join("final")).map_err(|e| CliError::new("evaluate", e))?;
    let store = open_store("evaluate", &a.data)?;
    let test: Vec<AlignedSample> = (0..store.len())
        .filter(|&i| record.test_participants.contains(&store.meta(i).participant_id))
        .map(|i| store.load(i, mode_streams(mode)))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::new("evaluate", e))?;
    let r = gazefusion_train::evaluate(&net, &test, mode, stats.as_ref(), record.train.threshold)
        .map_err(|e| CliError::new("evaluate", e))?;
    write_text("evaluate", &a.run.join(format!("report_{}.toml", mode.name())), &r.to_toml())?;
    Ok(result_tables(&[(mode.name(), &r)]))
}

fn ablation_rows(dir: &Path) -> CliResult<Vec<(Variant, AccuracyReport)>> {
    let mut rows = Vec::new();
    for v in Variant::ALL {
        let p = dir.join(v.name()).join(format!("report_{}.toml", v.name()));
        if p.exists() {
            let r = AccuracyReport::from_toml(&read_text("report", &p)?).map_err(|e| CliError::new("report", e))?;
            rows.push((v, r));
        }
    }
    Ok(rows)
}

pub fn ablate(a: &AblateArgs, mut s: Settings, force: bool) -> CliResult<String> {
    model_enabled("ablate")?;
    apply_train_opts(&mut s, &a.opts);
    let variants = match a.variant.as_str() {
        "grid" => Variant::ALL.to_vec(),
        v => vec![Variant::parse(v).map_err(|e| CliError::new("config", e))?],
    };
    let (model, cfg) = (s.model()?, s.train()?);
    let store = open_store("ablate", &a.data)?;
    let split = store_split("ablate", &store, &s)?;
    for v in variants {
        let dir = a.out.join(v.name());
        claim_output("ablate", &dir, "run.toml", force)?;
        write_text("ablate", &dir.join("config.txt"), &s.kv.to_text())?;
        run_experiment(&store, &split, &model, &cfg, v, &dir).map_err(|e| CliError::new("ablate", e))?;
    }
    let rows = ablation_rows(&a.out)?;
    let refs: Vec<(Variant, &AccuracyReport)> = rows.iter().map(|(v, r)| (*v, r)).collect();
    let table = ablation_table(&refs);
    write_text("ablate", &a.out.join("ablation.txt"), &table)?;
    Ok(table)
}

fn resolve_task(s: &str) -> CliResult<usize> {
    let d = match s.parse::<usize>() {
        Ok(id) => dims::active(id),
        Err(_) => dims::by_name(s),
    };
    d.map(|d| d.id).map_err(|e| CliError::new("config", e))
}

fn resolve_sample(store: &SampleStore, s: &str) -> CliResult<usize> {
    if let Some(i) = store.index.samples.iter().position(|m| m.id == s) {
        return Ok(i);
    }
    match s.parse::<usize>() {
        Ok(i) if i < store.len() => Ok(i),
        _ => Err(CliError::new(
            "config",
            format!("no sample {s:?}; give an id such as P00__V00 or an index below {}", store.len()),
        )),
    }
}

pub fn explain(a: &ExplainArgs, force: bool) -> CliResult<String> {
    model_enabled("explain")?;
    let task = resolve_task(&a.task)?;
    let layer = CamLayer::parse(&a.layer).map_err(|e| CliError::new("config", e))?;
    let mode = parse_mode(&a.mode)?;
    let (net, stats) = load_checkpoint(&a.run.join("final")).map_err(|e| CliError::new("explain", e))?;
    let store = open_store("explain", &a.data)?;
    let i = resolve_sample(&store, &a.sample)?;
    let sample = store.load(i, mode_streams(mode)).map_err(|e| CliError::new("explain", e))?;
    claim_output("explain", &a.out, "meta.toml", force)?;
    let r = explain_sample(&net, &sample, task, layer, mode.policy(), stats.as_ref()).map_err(|e| CliError::new("explain", e))?;
    write_saliency(&a.out, &r).map_err(|e| CliError::new("explain", e))?;
    let frames = Array::f32(vec![sample.steps, 3, sample.frame_height, sample.frame_width], sample.frames.clone())
        .map_err(|e| CliError::new("explain", e))?;
    write_array(a.out.join("frames.arr"), &frames).map_err(|e| CliError::new("explain", e))?;
    let peak = r.temporal.combined.iter().enumerate().fold((0, f64::MIN), |b, (t, &w)| if w > b.1 { (t, w) } else { b });
    let quarter = sample.steps.div_ceil(4);
    Ok(format!(
        "explain: {} task {} ({}) layer {} mode {}\n  peak timestep {} ({:.3}); first quarter holds {:.3} of the weight\n",
        store.meta(i).id,
        task,
        dims::active(task).map(|d| d.name).unwrap_or("?"),
        layer.name(),
        mode.name(),
        peak.0,
        peak.1,
        r.temporal.early_mass(quarter),
    ))
}

fn run_reports(run: &Path) -> CliResult<Vec<AccuracyReport>> {
    let entries = std::fs::read_dir(run).map_err(|e| CliError::new("report", format!("{}: {e}", run.display())))?;
    let mut reports = Vec::new();
    for e in entries {
        let p = e.map_err(|e| CliError::new("report", e))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("report_") && name.ends_with(".toml") {
            reports.push(AccuracyReport::from_toml(&read_text("report", &p)?).map_err(|e| CliError::new("report", e))?);
        }
    }
    if reports.is_empty() {
        return Err(CliError::new("report", format!("{} holds no accuracy reports", run.display())));
    }
    reports.sort_by(|a, b| (mode_rank(&a.mode), &a.mode).cmp(&(mode_rank(&b.mode), &b.mode)));
    Ok(reports)
}

fn dir_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
}

pub fn report(a: &ReportArgs, force: bool) -> CliResult<String> {
    if a.run.is_empty() && a.ablation.is_none() && a.explain.is_empty() {
        return Err(CliError::new("report", "nothing to report; give --run, --ablation or --explain"));
    }
    if a.every == 0 {
        return Err(CliError::new("config", "--every must be positive"));
    }
    claim_output("report", &a.out, "tables.txt", force)?;
    let mut text = String::new();
    let mut labelled: Vec<(String, AccuracyReport)> = Vec::new();
    for run in &a.run {
        for r in run_reports(run)? {
            let label = if a.run.len() > 1 { format!("{}:{}", dir_name(run), r.mode) } else { r.mode.clone() };
            labelled.push((label, r));
        }
    }
    if !labelled.is_empty() {
        let rows: Vec<(&str, &AccuracyReport)> = labelled.iter().map(|(l, r)| (l.as_str(), r)).collect();
        text.push_str(&objective_table(&rows));
        text.push('\n');
        text.push_str(&subjective_table(&rows));
        text.push('\n');
    }
    if let Some(dir) = &a.ablation {
        let rows = ablation_rows(dir)?;
        if rows.is_empty() {
            return Err(CliError::new("report", format!("{} holds no ablation reports", dir.display())));
        }
        let refs: Vec<(Variant, &AccuracyReport)> = rows.iter().map(|(v, r)| (*v, r)).collect();
        text.push_str(&ablation_table(&refs));
        text.push('\n');
    }
    for dir in &a.explain {
        let r = read_saliency(dir).map_err(|e| CliError::new("report", e))?;
        let (shape, frames) =
            read_array(dir.join("frames.arr")).and_then(|arr| arr.into_f32(Some(4))).map_err(|e| CliError::new("report", e))?;
        let sample = AlignedSample {
            participant_id: r.participant_id.clone(),
            video_id: r.video_id.clone(),
            steps: shape[0],
            frame_height: shape[2],
            frame_width: shape[3],
            frames,
            pupil_size: 0,
            pupil: None,
            map_height: 0,
            map_width: 0,
            attention: None,
            labels: [0; N_TASKS],
        };
        let out: PathBuf = a.out.join(dir_name(dir));
        std::fs::create_dir_all(&out).map_err(|e| CliError::new("report", e))?;
        write_overlay_png(&out.join("overlay.png"), &sample, &r, a.every).map_err(|e| CliError::new("report", e))?;
        write_curve_png(&out.join("temporal.png"), &r).map_err(|e| CliError::new("report", e))?;
        let quarter = r.temporal.combined.len().div_ceil(4);
        text.push_str(&format!(
            "Saliency {}: {}/{} task {} layer {}; first quarter holds {:.3} of the temporal weight\n",
            dir_name(dir),
            r.participant_id,
            r.video_id,
            dims::active(r.task_id).map(|d| d.name).unwrap_or("?"),
            r.layer.name(),
            r.temporal.early_mass(quarter),
        ));
    }
    write_text("report", &a.out.join("tables.txt"), &text)?;
    Ok(text)
}
