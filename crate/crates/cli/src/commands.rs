//! Command implementations. Every command reads files, writes files and
//! returns an error instead of exiting.

use std::path::Path;

use anyhow::{bail, Context, Result};
use kpls_retarget::evaluation::{
    cyclic_retarget, gen_synthetic_world, improvement_percent, ordering_lines, resolve_method,
    CyclicReport,
};
use kpls_retarget::retarget::{
    retarget_sequence, train_retargeter_with, CorrespondenceSet, Method, RetargetModel,
};
use log::info;

use crate::config::ProjectConfig;
use crate::formats::{
    read_model, read_rig, read_sequence, write_frame_errors, write_model, write_report, write_rig,
    write_sequence, Improvement, ModelFile, ReportFile, MODEL_FORMAT, MODEL_VERSION, REPORT_FORMAT,
    REPORT_VERSION,
};

/// File names used inside a world directory written by `synth`.
pub const WORLD_SOURCE: &str = "source.csv";
pub const WORLD_TARGET: &str = "target.csv";
pub const WORLD_SEQUENCE: &str = "sequence.csv";
pub const WORLD_RIG_A: &str = "rig_a.json";
pub const WORLD_RIG_B: &str = "rig_b.json";

fn load_correspondences(source: &Path, target: &Path) -> Result<CorrespondenceSet> {
    let s = read_sequence(source)?;
    let t = read_sequence(target)?;
    if s.frames.len() != t.frames.len() {
        bail!(
            "{} has {} rows but {} has {}; correspondence rows must pair up",
            source.display(),
            s.frames.len(),
            target.display(),
            t.frames.len()
        );
    }
    let neutral = match (s.neutral, t.neutral) {
        (Some(a), Some(b)) if a != b => bail!(
            "neutral rows disagree: {} flags row {a}, {} flags row {b}",
            source.display(),
            target.display()
        ),
        (a, b) => a.or(b).unwrap_or(0),
    };
    CorrespondenceSet::new(s.frames, t.frames, neutral).with_context(|| {
        format!(
            "invalid correspondences {} / {}",
            source.display(),
            target.display()
        )
    })
}

fn train_one(
    config: &ProjectConfig,
    corr: &CorrespondenceSet,
    method: &Method,
) -> Result<(RetargetModel, usize)> {
    let options = config.train_options();
    let (method, p) = resolve_method(corr, method, config.component_choice(), options)?;
    let model = train_retargeter_with(corr, &method, p, options)?;
    Ok((model, p))
}

pub fn train(config: &ProjectConfig) -> Result<()> {
    let source = ProjectConfig::require(&config.source, "source")?;
    let target = ProjectConfig::require(&config.target, "target")?;
    let out = ProjectConfig::require(&config.model, "model")?;
    let corr = load_correspondences(source, target)?;
    let method = config.method()?;
    let (model, _) = train_one(config, &corr, &method)?;
    let components = model.regressor.components();
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        method: method.label(),
        pairs: corr.len(),
        components,
        model,
    };
    write_model(out, &file)?;
    println!(
        "trained {} on N={} pairs: L_s={} L_t={} dims {}->{} p={}",
        file.method,
        file.pairs,
        file.model.source_points,
        file.model.target_points,
        file.model.input_dim(),
        file.model.output_dim(),
        components.map_or("-".to_string(), |p| p.to_string()),
    );
    Ok(())
}

pub fn retarget(config: &ProjectConfig) -> Result<()> {
    let model_path = ProjectConfig::require(&config.model, "model")?;
    let input = ProjectConfig::require(&config.input, "input")?;
    let output = ProjectConfig::require(&config.output, "output")?;
    let file = read_model(model_path)?;
    let seq = read_sequence(input)?;
    if let Some(points) = seq.points {
        if points != file.model.source_points {
            bail!(
                "{} has {points} feature points per frame but model {} expects {}",
                input.display(),
                model_path.display(),
                file.model.source_points
            );
        }
    }
    let out = retarget_sequence(&file.model, &seq.frames)
        .with_context(|| format!("retargeting {}", input.display()))?;
    write_sequence(output, &out, file.model.target_points, None)?;
    info!("retargeted {} frames to {}", out.len(), output.display());
    Ok(())
}

pub fn eval_cyclic(config: &ProjectConfig) -> Result<()> {
    let in_world = |name: &str| config.world_dir.as_ref().map(|d| d.join(name));
    let source = config.source.clone().or_else(|| in_world(WORLD_SOURCE));
    let target = config.target.clone().or_else(|| in_world(WORLD_TARGET));
    let rig_a = config.rig_a.clone().or_else(|| in_world(WORLD_RIG_A));
    let sequence = config.sequence.clone().or_else(|| in_world(WORLD_SEQUENCE));
    let source = ProjectConfig::require(&source, "source")?;
    let target = ProjectConfig::require(&target, "target")?;
    let rig_a = ProjectConfig::require(&rig_a, "rig_a")?;
    let sequence = ProjectConfig::require(&sequence, "sequence")?;
    let report_path = ProjectConfig::require(&config.report, "report")?;

    let corr = load_correspondences(source, target)?;
    let reversed = corr.reversed();
    let rig = read_rig(rig_a)?;
    let seq = read_sequence(sequence)?.frames;
    let mut reports: Vec<CyclicReport> = Vec::new();
    for method in config.eval_methods()? {
        let (ab, p_ab) = train_one(config, &corr, &method)?;
        let (ba, p_ba) = train_one(config, &reversed, &method)?;
        let mut report = cyclic_retarget(&ab, &ba, &seq, &rig)
            .with_context(|| format!("cyclic evaluation of {}", method.label()))?;
        report.method = method.label();
        info!(
            "{}: e_d = {:e} (p = {p_ab}/{p_ba})",
            report.method, report.e_d
        );
        reports.push(report);
    }
    let improvements = reports
        .iter()
        .skip(1)
        .map(|r| Improvement {
            baseline: r.method.clone(),
            percent: improvement_percent(r.e_d, reports[0].e_d).ok(),
        })
        .collect();
    let file = ReportFile {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        orderings: ordering_lines(&reports),
        improvements,
        reports,
    };
    write_report(report_path, &file)?;
    if let Some(csv) = &config.frames_csv {
        write_frame_errors(csv, &file.reports)?;
    }
    for r in &file.reports {
        println!("{} e_d={:e}", r.method, r.e_d);
    }
    for line in &file.orderings {
        println!("{line}");
    }
    Ok(())
}

pub fn synth(config: &ProjectConfig) -> Result<()> {
    let dir = ProjectConfig::require(&config.out_dir, "out_dir")?;
    let world_config = config.world.unwrap_or_default();
    let seed = config.seed.unwrap_or(0);
    let world = gen_synthetic_world(&world_config, seed)?;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let neutral = Some(world.corr.neutral_index());
    write_sequence(
        &dir.join(WORLD_SOURCE),
        world.corr.source_frames(),
        world.corr.source_points(),
        neutral,
    )?;
    write_sequence(
        &dir.join(WORLD_TARGET),
        world.corr.target_frames(),
        world.corr.target_points(),
        neutral,
    )?;
    write_sequence(
        &dir.join(WORLD_SEQUENCE),
        &world.sequence,
        world.rig_a.feature_point_count(),
        None,
    )?;
    write_rig(&dir.join(WORLD_RIG_A), &world.rig_a)?;
    write_rig(&dir.join(WORLD_RIG_B), &world.rig_b)?;
    println!(
        "wrote world seed={seed} to {}: N={} L_a={} L_b={} frames={}",
        dir.display(),
        world.corr.len(),
        world.corr.source_points(),
        world.corr.target_points(),
        world.sequence.len()
    );
    Ok(())
}

pub fn inspect(config: &ProjectConfig) -> Result<()> {
    let path = ProjectConfig::require(&config.model, "model")?;
    let file = read_model(path)?;
    let m = &file.model;
    println!("format: {} v{}", file.format, file.version);
    println!("method: {}", file.method);
    println!("pairs: {}", file.pairs);
    println!(
        "components: {}",
        file.components.map_or("-".to_string(), |p| p.to_string())
    );
    println!("source points: {} (dim {})", m.source_points, m.input_dim());
    println!(
        "target points: {} (dim {})",
        m.target_points,
        m.output_dim()
    );
    println!("remove rotation: {}", m.source_normalizer.remove_rotation);
    println!("source scale: {:e}", m.source_normalizer.reference_scale);
    println!("target scale: {:e}", m.target_normalizer.reference_scale);
    Ok(())
}
