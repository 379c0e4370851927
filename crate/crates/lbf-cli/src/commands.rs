//! The five subcommands. Each one resolves its flags into library types,
//! does the work, prints a human summary to stdout, and (where applicable)
//! writes machine-readable output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lbf::io::{
    load_labels, load_points, save_labels, save_matrix_binary, save_matrix_text, save_result,
    ResultFormat,
};
use lbf::rng::derive_seed;
use lbf::{
    generate as generate_cloud, lbf_cluster, misclassification_rate, select_model, FlatKind,
    LbfConfig, MeanShift, OutlierRule, ScaleConfig, SyntheticSpec,
};

use crate::record::{runtime_value, write_record, RunRecord};
use crate::{
    AppError, BenchArgs, ClusterArgs, GenerateArgs, MatrixFormat, ModelselArgs, OutFormat,
    OutlierRuleArg, ScaleArgs, ScalemapArgs,
};

/// 1.0 -> "1", 0.25 -> "0.25"; shortest form that parses back exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn parse_delimiter(s: &str) -> Result<Option<char>, AppError> {
    if s == "ws" {
        return Ok(None);
    }
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(Some(c)),
        _ => Err(AppError::Usage(format!(
            "--delimiter wants a single character or \"ws\", got {s:?}"
        ))),
    }
}

fn parse_mean_shift(s: &str) -> Result<MeanShift, AppError> {
    let bad = || {
        AppError::Usage(format!(
            "--mean-shift wants NEIGHBORS,ITERS (two positive integers), got {s:?}"
        ))
    };
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let neighbors: usize = a.trim().parse().map_err(|_| bad())?;
    let iters: usize = b.trim().parse().map_err(|_| bad())?;
    if neighbors == 0 || iters == 0 {
        return Err(bad());
    }
    Ok(MeanShift { neighbors, iters })
}

fn resolve_scale(args: &ScaleArgs) -> Result<ScaleConfig, AppError> {
    Ok(ScaleConfig {
        start_size: args.start,
        step: args.step,
        mean_shift: args
            .mean_shift
            .as_deref()
            .map(parse_mean_shift)
            .transpose()?,
        allow_first_scale_min: args.first_scale_min,
        max_size: args.max_size,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cluster(args: ClusterArgs) -> Result<(), AppError> {
    let delimiter = parse_delimiter(&args.delimiter)?;
    let cloud = load_points(&args.input, delimiter)?;
    let truth = args.labels.as_deref().map(load_labels).transpose()?;

    let mut cfg = LbfConfig::new(args.dim, args.k);
    cfg.kind = args.kind.into();
    cfg.candidates = args.candidates;
    cfg.passes = args.passes;
    cfg.scale = resolve_scale(&args.scale)?;
    cfg.seed = args.seed;
    let result = lbf_cluster(&cloud, &cfg)?;

    let error_percent = truth
        .as_deref()
        .map(|t| misclassification_rate(&result.labels, t))
        .transpose()?;

    let out_path = args
        .out
        .unwrap_or_else(|| with_suffix(&args.input, ".labels"));
    match args.format {
        OutFormat::Labels => {
            let labels: Vec<i64> = result.labels.iter().map(|&l| l as i64).collect();
            save_labels(&out_path, &labels)?;
        }
        OutFormat::Csv => save_result(&out_path, &result, ResultFormat::DelimitedText)?,
        OutFormat::Jsonl => save_result(&out_path, &result, ResultFormat::JsonLines)?,
    }

    // Echo the configuration with the derived counts filled in, so the record
    // alone says what actually ran.
    let mut echo = cfg.clone();
    echo.candidates = Some(echo.candidates.unwrap_or(70 * echo.k));
    echo.passes = Some(echo.passes.unwrap_or(3 * echo.k));
    let record_path = args
        .record
        .unwrap_or_else(|| with_suffix(&args.input, ".run.json"));
    let record = RunRecord {
        command: "cluster",
        config: serde_json::to_value(&echo).expect("plain fields"),
        seed: args.seed,
        results: serde_json::json!({
            "points": cloud.len(),
            "clusters": result.flats.len(),
            "l1_energy": result.l1_energy,
            "l2_energy": result.l2_energy,
            "empty_clusters": result.empty_clusters,
            "error_percent": error_percent,
            "labels_written_to": out_path.display().to_string(),
        }),
        runtime: (!args.omit_runtime)
            .then(|| runtime_value(result.elapsed_secs, serde_json::json!({}))),
    };
    write_record(&record_path, &record)?;

    println!(
        "{} points in R^{}, {} clusters",
        cloud.len(),
        cloud.ambient_dim(),
        args.k
    );
    println!(
        "l1 energy {}  l2 energy {}",
        fmt_f64(result.l1_energy),
        fmt_f64(result.l2_energy)
    );
    if let Some(err) = error_percent {
        println!("error {err:.2}%");
    }
    if !args.omit_runtime {
        println!("clustered in {:.4} s", result.elapsed_secs);
    }
    println!("wrote {} and {}", out_path.display(), record_path.display());
    Ok(())
}

/// The named arrangements benchmarks run on: dims and ambient dimension.
const SETTINGS: &[(&str, &[usize], usize)] = &[
    ("2^2inR4", &[2, 2], 4),
    ("4^2inR6", &[4, 4], 6),
    ("2^4inR4", &[2, 2, 2, 2], 4),
    ("10^2inR15", &[10, 10], 15),
    ("4-5-6inR10", &[4, 5, 6], 10),
];

pub fn bench(args: BenchArgs) -> Result<(), AppError> {
    let &(_, dims, ambient) = SETTINGS
        .iter()
        .find(|(name, _, _)| *name == args.setting)
        .ok_or_else(|| {
            let valid: Vec<&str> = SETTINGS.iter().map(|(n, _, _)| *n).collect();
            AppError::Usage(format!(
                "unknown setting {:?}; valid settings: {}",
                args.setting,
                valid.join(", ")
            ))
        })?;
    if args.outliers != 5 && args.outliers != 30 {
        return Err(AppError::Usage(format!(
            "--outliers must be 5 or 30, got {}",
            args.outliers
        )));
    }
    if args.trials == 0 {
        return Err(AppError::Usage("--trials must be at least 1".into()));
    }
    let kind: FlatKind = args.suite.into();
    let fraction = f64::from(args.outliers) / 100.0;

    let mut spec_template = SyntheticSpec::new(dims.to_vec(), ambient, args.samples);
    spec_template.noise_sigma = args.sigma;
    spec_template.outlier_fraction = fraction;
    spec_template.kind = kind;
    let d = *dims.iter().max().expect("settings are nonempty");
    let k = dims.len();

    let started = Instant::now();
    let trials: Vec<(f64, f64)> = lbf::par::try_par_map(args.trials, |i| {
        let mut spec = spec_template.clone();
        spec.seed = derive_seed(args.seed, "bench-data", i as u64);
        let labeled = generate_cloud(&spec)?;
        let mut cfg = LbfConfig::new(d, k);
        cfg.kind = kind;
        cfg.seed = derive_seed(args.seed, "bench-run", i as u64);
        let result = lbf_cluster(&labeled.cloud, &cfg)?;
        let err = misclassification_rate(&result.labels, &labeled.truth)?;
        Ok::<_, lbf::Error>((err, result.elapsed_secs))
    })?;
    let elapsed = started.elapsed().as_secs_f64();

    let errors: Vec<f64> = trials.iter().map(|t| t.0).collect();
    let times: Vec<f64> = trials.iter().map(|t| t.1).collect();
    let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
    let median_error = {
        let mut sorted = errors.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        }
    };
    let mean_secs = times.iter().sum::<f64>() / times.len() as f64;

    let suite_name = match kind {
        FlatKind::Affine => "affine",
        FlatKind::Linear => "linear",
    };
    if args.omit_runtime {
        println!("setting,suite,outlier_percent,trials,mean_error_percent,median_error_percent");
        println!(
            "{},{},{},{},{},{}",
            args.setting,
            suite_name,
            args.outliers,
            args.trials,
            fmt_f64(mean_error),
            fmt_f64(median_error),
        );
    } else {
        println!(
            "setting,suite,outlier_percent,trials,mean_error_percent,median_error_percent,mean_secs_per_trial"
        );
        println!(
            "{},{},{},{},{},{},{}",
            args.setting,
            suite_name,
            args.outliers,
            args.trials,
            fmt_f64(mean_error),
            fmt_f64(median_error),
            fmt_f64(mean_secs),
        );
    }

    if let Some(json_path) = args.json {
        let record = RunRecord {
            command: "bench",
            config: serde_json::json!({
                "setting": args.setting,
                "suite": suite_name,
                "outlier_percent": args.outliers,
                "trials": args.trials,
                "spec": spec_template,
                "flat_dim": d,
                "clusters": k,
            }),
            seed: args.seed,
            results: serde_json::json!({
                "trial_error_percent": errors,
                "mean_error_percent": mean_error,
                "median_error_percent": median_error,
            }),
            runtime: (!args.omit_runtime).then(|| {
                runtime_value(
                    elapsed,
                    serde_json::json!({
                        "trial_secs": times,
                        "mean_secs_per_trial": mean_secs,
                    }),
                )
            }),
        };
        write_record(&json_path, &record)?;
    }
    Ok(())
}

pub fn modelsel(args: ModelselArgs) -> Result<(), AppError> {
    let delimiter = parse_delimiter(&args.delimiter)?;
    let cloud = load_points(&args.input, delimiter)?;
    let mut template = LbfConfig::new(args.dim, 1);
    template.kind = args.kind.into();
    template.seed = args.seed;

    let started = Instant::now();
    let curve = select_model(&cloud, args.dim, args.kmax, &template)?;
    let elapsed = started.elapsed().as_secs_f64();

    println!("k,W,SOD");
    for (i, (&k, &w)) in curve.ks.iter().zip(&curve.w).enumerate() {
        // curvature exists only at interior k, so the first and last rows
        // leave the column empty
        let sod = if i >= 1 && i + 1 < curve.ks.len() {
            fmt_f64(curve.sod[i - 1])
        } else {
            String::new()
        };
        println!("{},{},{}", k, fmt_f64(w), sod);
    }
    println!("k_opt = {}", curve.k_opt);

    if let Some(json_path) = args.json {
        let record = RunRecord {
            command: "modelsel",
            config: serde_json::json!({
                "input": args.input.display().to_string(),
                "flat_dim": args.dim,
                "k_max": args.kmax,
                "kind": FlatKind::from(args.kind),
            }),
            seed: args.seed,
            results: serde_json::to_value(&curve).expect("plain fields"),
            runtime: (!args.omit_runtime).then(|| runtime_value(elapsed, serde_json::json!({}))),
        };
        write_record(&json_path, &record)?;
    }
    Ok(())
}

pub fn generate(args: GenerateArgs) -> Result<(), AppError> {
    let dims: Vec<usize> = args
        .dims
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            AppError::Usage(format!(
                "--dims wants comma-separated positive integers, got {:?}",
                args.dims
            ))
        })?;
    let spec = SyntheticSpec {
        dims,
        ambient: args.ambient,
        samples_per_subspace: args.samples,
        noise_sigma: args.sigma,
        outlier_fraction: args.outliers,
        kind: args.kind.into(),
        min_angle: args.min_angle,
        outlier_rule: match args.outlier_rule {
            OutlierRuleArg::Final => OutlierRule::FractionOfFinal,
            OutlierRuleArg::Inliers => OutlierRule::FractionOfInliers,
        },
        seed: args.seed,
    };
    let labeled = generate_cloud(&spec)?;

    let points_path = match args.format {
        MatrixFormat::Text => with_suffix(&args.out, ".csv"),
        MatrixFormat::Binary => with_suffix(&args.out, ".bin"),
    };
    match args.format {
        MatrixFormat::Text => save_matrix_text(&points_path, labeled.cloud.points(), Some(','))?,
        MatrixFormat::Binary => save_matrix_binary(&points_path, labeled.cloud.points())?,
    }
    let labels_path = with_suffix(&args.out, ".labels");
    save_labels(&labels_path, &labeled.truth)?;
    let spec_path = with_suffix(&args.out, ".spec.json");
    let record = RunRecord {
        command: "generate",
        config: serde_json::to_value(&spec).expect("plain fields"),
        seed: args.seed,
        results: serde_json::json!({
            "points": labeled.cloud.len(),
            "ambient_dim": labeled.cloud.ambient_dim(),
            "outliers": labeled.truth.iter().filter(|&&t| t < 0).count(),
        }),
        runtime: None,
    };
    write_record(&spec_path, &record)?;

    println!(
        "{} points in R^{} ({} outliers)",
        labeled.cloud.len(),
        labeled.cloud.ambient_dim(),
        labeled.truth.iter().filter(|&&t| t < 0).count()
    );
    println!(
        "wrote {}, {}, {}",
        points_path.display(),
        labels_path.display(),
        spec_path.display()
    );
    Ok(())
}

pub fn scalemap(args: ScalemapArgs) -> Result<(), AppError> {
    let delimiter = parse_delimiter(&args.delimiter)?;
    let cloud = load_points(&args.input, delimiter)?;
    let scale = resolve_scale(&args.scale)?;
    let kind: FlatKind = args.kind.into();

    let sizes: Vec<usize> = lbf::par::try_par_map(cloud.len(), |i| {
        let profile = lbf::select_neighborhood(&cloud, &cloud.point(i), args.dim, &scale, kind)?;
        Ok::<_, lbf::Error>(profile.sizes[profile.selected_index])
    })?;

    let mut rows = String::new();
    for (i, &size) in sizes.iter().enumerate() {
        let point = cloud.point(i);
        for coord in point.iter() {
            rows.push_str(&fmt_f64(*coord));
            rows.push(',');
        }
        rows.push_str(&size.to_string());
        rows.push('\n');
    }
    match args.out {
        Some(path) => {
            std::fs::write(&path, rows).map_err(|e| AppError::file(&path, e))?;
            println!("wrote {} rows to {}", sizes.len(), path.display());
        }
        None => {
            std::io::stdout()
                .write_all(rows.as_bytes())
                .map_err(|e| AppError::File(PathBuf::from("<stdout>"), e))?;
        }
    }
    Ok(())
}
