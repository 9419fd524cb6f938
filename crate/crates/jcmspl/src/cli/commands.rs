use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AblateArgs, CliError, DatasetFingerprint, EvalArgs, ModelArchive, SynthArgs, TrainArgs};
use crate::dataset::{load_manifest, save_manifest, synth_generate, Normalization, ZslDataset};
use crate::recognizer::{
    eval_generalized, eval_hit_at_k, eval_standard, gzsl_holdout, Direction, EvalReport, HitAtK,
};
use crate::trainer::{fit, Hyperparams, JcmsplModel, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutSummary {
    pub fraction: f64,
    pub seed: u64,
    /// Number of seen samples withheld from training.
    pub held_out: usize,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub variant: Variant,
    pub preset: Option<String>,
    /// Hyperparameters after applying the preset and explicit flags.
    pub hyperparams: Hyperparams,
    /// λ1..λ4 actually optimized once the variant's disabled terms are zeroed.
    pub effective_lambdas: [f64; 4],
    pub normalization: Normalization,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub converged_at: Option<usize>,
    pub holdout: Option<HoldoutSummary>,
    pub n_train: usize,
    pub dataset_checksum: String,
    pub warnings: Vec<String>,
}

/// One line of the ablation table. Missing values mean the step failed or
/// does not apply (FPL has no semantic-to-visual direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub loss: Option<f64>,
    pub iters: Option<usize>,
    pub acc_v2s: Option<f64>,
    pub acc_s2v: Option<f64>,
    pub error: Option<String>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s.into_bytes()
}

fn normalize_with_warnings(ds: &ZslDataset, mode: Normalization, warnings: &mut Vec<String>) -> ZslDataset {
    let (out, zero_seen, zero_unseen) = ds.normalized(mode);
    for (split, zeros) in [("seen", zero_seen), ("unseen", zero_unseen)] {
        if !zeros.is_empty() {
            warnings.push(format!(
                "{} zero {split} visual column(s) left unnormalized",
                zeros.len()
            ));
        }
    }
    out
}

/// Trains a model and writes `model.bin`, `trace.csv` and `summary.json`
/// into `args.out`.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary, CliError> {
    let hyper = args.hyper.resolve(args.variant);
    let raw = load_manifest(&args.manifest)?;
    hyper.validate(raw.seen_classes().len())?;
    let fingerprint = DatasetFingerprint::of(&raw);

    let (train_set, holdout) = match args.holdout {
        Some(fraction) => {
            let idx = gzsl_holdout(&raw, fraction, args.split_seed)?;
            let summary = HoldoutSummary {
                fraction,
                seed: args.split_seed,
                held_out: idx.len(),
            };
            (raw.without_seen_samples(&idx)?, Some(summary))
        }
        None => (raw, None),
    };

    let mut warnings = Vec::new();
    let normalization = args.hyper.normalize;
    let data = normalize_with_warnings(&train_set, normalization, &mut warnings);
    let (model, trace) = fit(&data, &hyper)?;
    warnings.extend(trace.warnings.iter().cloned());

    let eff = hyper.effective();
    let summary = TrainSummary {
        variant: hyper.variant,
        preset: args.hyper.preset.map(|p| p.name().to_string()),
        hyperparams: hyper,
        effective_lambdas: [eff.lambda1, eff.lambda2, eff.lambda3, eff.lambda4],
        normalization,
        initial_loss: trace.initial_loss,
        final_loss: trace.final_loss(),
        iterations: trace.iterations(),
        converged: trace.converged_at.is_some(),
        converged_at: trace.converged_at,
        holdout,
        n_train: data.n_seen(),
        dataset_checksum: fingerprint.checksum_hex(),
        warnings,
    };
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }

    create_dir(&args.out)?;
    let archive = ModelArchive {
        model,
        normalization,
        fingerprint,
    };
    write_file(&args.out.join("model.bin"), &archive.to_bytes())?;
    write_file(&args.out.join("trace.csv"), trace.to_csv().as_bytes())?;
    write_file(&args.out.join("summary.json"), &json_bytes(&summary))?;
    Ok(summary)
}

fn check_compatible(archive: &ModelArchive, ds: &ZslDataset) -> Result<(), CliError> {
    let model = &archive.model;
    if model.visual_dim() != ds.visual_dim() || model.semantic_dim() != ds.semantic_dim() {
        return Err(CliError::Mismatch(format!(
            "model maps {}-dim visual to {}-dim semantic features, dataset has {} and {}",
            model.visual_dim(),
            model.semantic_dim(),
            ds.visual_dim(),
            ds.semantic_dim()
        )));
    }
    if archive.fingerprint.checksum != DatasetFingerprint::of(ds).checksum {
        eprintln!("warning: dataset differs from the one the model was trained on");
    }
    Ok(())
}

/// Evaluates an archived model and writes `report.json`.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let archive = ModelArchive::load(&args.model)?;
    let raw = load_manifest(&args.manifest)?;
    check_compatible(&archive, &raw)?;
    let mut warnings = Vec::new();
    let ds = normalize_with_warnings(&raw, archive.normalization, &mut warnings);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let model = &archive.model;

    let mut report = if args.gzsl {
        eval_generalized(model, &ds, args.holdout, args.seed, args.direction, args.distance)?
    } else {
        eval_standard(model, &ds, args.direction, args.distance)?
    };
    if let Some(k) = args.hit_k {
        let fraction = eval_hit_at_k(model, &ds, k, args.direction, args.distance)?;
        report.hit_at_k = Some(HitAtK { k, fraction });
    }

    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => args
            .model
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    create_dir(&out)?;
    let json = json_bytes(&report);
    write_file(&out.join("report.json"), &json)?;
    print!("{}", String::from_utf8_lossy(&json));
    Ok(report)
}

fn ablate_one(
    data: &ZslDataset,
    hyper: &Hyperparams,
    args: &AblateArgs,
    row: &mut AblationRow,
) -> Result<(), CliError> {
    let (model, trace) = fit(data, hyper)?;
    row.loss = Some(trace.final_loss());
    row.iters = Some(trace.iterations());
    let accuracy = |model: &JcmsplModel, direction| {
        eval_standard(model, data, direction, args.distance).map(|r| r.per_class_mean_accuracy)
    };
    row.acc_v2s = Some(accuracy(&model, Direction::V2s)?);
    if model.variant != Variant::Fpl {
        row.acc_s2v = Some(accuracy(&model, Direction::S2v)?);
    }
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders the ablation table as CSV with columns
/// `variant,loss,iters,acc_v2s,acc_s2v`.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,loss,iters,acc_v2s,acc_s2v\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.variant,
            opt(r.loss),
            opt(r.iters),
            opt(r.acc_v2s),
            opt(r.acc_s2v)
        ));
    }
    out
}

/// Trains and evaluates every variant with the same settings, writing
/// `ablation.csv` and `ablation.json`. A failing variant leaves its row
/// partly empty and the remaining variants still run; the first such error
/// is returned alongside the rows.
pub fn cmd_ablate(args: &AblateArgs) -> Result<(Vec<AblationRow>, Option<CliError>), CliError> {
    let raw = load_manifest(&args.manifest)?;
    let mut warnings = Vec::new();
    let data = normalize_with_warnings(&raw, args.hyper.normalize, &mut warnings);
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let mut rows = Vec::new();
    let mut first_error = None;
    for variant in Variant::ALL {
        let hyper = args.hyper.resolve(variant);
        let mut row = AblationRow {
            variant,
            loss: None,
            iters: None,
            acc_v2s: None,
            acc_s2v: None,
            error: None,
        };
        if let Err(e) = ablate_one(&data, &hyper, args, &mut row) {
            eprintln!("error: {variant}: {e}");
            row.error = Some(e.to_string());
            first_error.get_or_insert(e);
        }
        rows.push(row);
    }

    create_dir(&args.out)?;
    write_file(&args.out.join("ablation.csv"), ablation_csv(&rows).as_bytes())?;
    write_file(&args.out.join("ablation.json"), &json_bytes(&rows))?;
    Ok((rows, first_error))
}

/// Writes a synthetic dataset (manifest plus CSVs) and `planted.bin`, the
/// generating model as an archive without normalization.
pub fn cmd_synth(args: &SynthArgs) -> Result<PathBuf, CliError> {
    let spec = args.spec();
    let (ds, planted) = synth_generate(&spec)?;
    create_dir(&args.out)?;
    let manifest = save_manifest(&ds, &args.out)?;

    let mut hyper = Hyperparams::new(spec.k);
    hyper.seed = spec.seed;
    let archive = ModelArchive {
        model: JcmsplModel {
            c: Some(planted.concept_means.select_columns(ds.labels_seen())),
            a: planted.a_true,
            b: Some(planted.b_true),
            variant: Variant::Full,
            hyper,
        },
        normalization: Normalization::None,
        fingerprint: DatasetFingerprint::of(&ds),
    };
    write_file(&args.out.join("planted.bin"), &archive.to_bytes())?;
    Ok(manifest)
}
