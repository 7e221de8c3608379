use std::fs;

use rand::Rng;
use serde::Serialize;
use wfa::linalg3::{self, Mat3, Vec3};
use wfa::procrustes::{brute_force_best_rotation, check_alignment_optimality, kabsch, OptimalityCheckConfig};
use wfa::synthdata::{gen_shape, random_rotation, write_ply, LabeledDataset, RotationMode, ShapeKind, ShapeSpec};
use wfa::toynet::{
    evaluate, gradient_check, read_checkpoint, train, write_checkpoint, GradCheckConfig, GradCheckReport, NetworkConfig,
    TrainOptions, TrainReport,
};
use wfa::wfa::{weight_frame, DEFAULT_RANK_TOL};
use wfa::{
    align_neighborhood, apply_rigid, farthest_point_sample, radius_neighbors, wfa_feature_layer, AxisOrder, LayerWeights,
    PointCloud, Seed, WfaConfig,
};

use crate::args::*;
use crate::data;
use crate::{emit, io_err, CliError};

pub fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::GenData(a) => gen_data(cmd, a),
        Command::InvarianceReport(a) => invariance_report(cmd, a),
        Command::ProcrustesCheck(a) => procrustes_check(cmd, a),
        Command::Train(a) => train_cmd(cmd, a),
        Command::Eval(a) => eval(cmd, a),
        Command::Gradcheck(a) => gradcheck(cmd, a),
        Command::Ablation(a) => ablation(cmd, a),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn gen_data(cmd: &Command, a: &GenDataArgs) -> Result<(), CliError> {
    let template = data::template(a.classes, a.points, a.noise, a.normals);
    let (train, test) = data::generate(a.per_class, &template, a.train_fraction, a.seed)?;
    let manifest = data::manifest_for(&template, &train, &test);
    for sub in ["train", "test"] {
        data::ensure_dir(&a.out.join(sub))?;
    }
    let samples = train.samples.iter().chain(&test.samples);
    for (entry, s) in manifest.files.iter().zip(samples) {
        let path = a.out.join(&entry.file);
        write_ply(&path, &s.cloud).map_err(|e| io_err(&path, e))?;
    }
    // the manifest file doubles as the report: same bytes on disk and on stdout
    let path = a.out.join(data::MANIFEST);
    emit(cmd, a, &manifest, Some(&path), String::new)?;
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    print!("{text}");
    Ok(())
}

/// First-layer weights drawn uniformly from `[-1, 1]³`, redrawn until the
/// weight frame has distinct, unambiguous axes.
fn random_weights(seed: Seed, width: usize, sign_tol: f64, gap_tol: f64) -> Result<LayerWeights, CliError> {
    for attempt in 0..100 {
        let mut rng = seed.derive(attempt).rng();
        let cols: Vec<Vec3> = (0..width)
            .map(|_| [0; 3].map(|_| rng.random_range(-1.0..=1.0)))
            .collect();
        let bias: Vec<f64> = (0..width).map(|_| rng.random_range(-0.1..=0.1)).collect();
        let w = LayerWeights::new(cols, bias)?;
        if matches!(weight_frame(&w, sign_tol, DEFAULT_RANK_TOL), Ok(f) if f.is_clean(gap_tol)) {
            return Ok(w);
        }
    }
    Err(CliError::Internal("could not draw weights with a clean frame".into()))
}

#[derive(Serialize)]
struct InvarianceTrial {
    trial: usize,
    rotation: Mat3,
    translation: Vec3,
    weight_seed: u64,
    clean_queries: usize,
    degenerate: usize,
    ambiguous: usize,
    index_mismatch: usize,
    max_aligned_deviation: f64,
    max_output_deviation: f64,
}

#[derive(Serialize)]
struct InvarianceResult {
    n_points: usize,
    queries_per_trial: usize,
    trials: Vec<InvarianceTrial>,
    clean_queries: usize,
    degenerate: usize,
    ambiguous: usize,
    index_mismatch: usize,
    /// Over clean queries only; zero when there are none.
    max_deviation: f64,
    median_deviation: f64,
    tolerance: f64,
    passed: bool,
}

fn invariance_report(cmd: &Command, a: &InvarianceArgs) -> Result<(), CliError> {
    let cloud = match &a.input {
        Some(p) => data::read_cloud(p)?,
        None => gen_shape(&ShapeSpec {
            kind: ShapeKind::Cone,
            n_points: 512,
            noise_sigma: 0.01,
            with_normals: false,
            seed: Seed(a.seed),
        })?,
    };
    let cfg = WfaConfig {
        sign_tol: a.sign_tol,
        gap_tol: a.gap_tol,
        rank_tol: DEFAULT_RANK_TOL,
        order: a.order,
    };
    let k = a.neighbors as usize;
    let queries = farthest_point_sample(&cloud, (a.queries as usize).min(cloud.len()), 0)?;
    let seed = Seed(a.seed);
    let mut trials = Vec::with_capacity(a.trials);
    let mut deviations = Vec::new();
    for t in 0..a.trials {
        let r = random_rotation(seed.derive(2 * t as u64), RotationMode::Arbitrary);
        let mut rng = seed.derive(2 * t as u64 + 1).rng();
        let shift: Vec3 = [0; 3].map(|_| rng.random_range(-1.0..=1.0) * a.translation);
        let moved = apply_rigid(&cloud, &r, &shift);
        let weight_seed = Seed(a.weight_seed).derive(t as u64);
        let weights = random_weights(weight_seed, a.width as usize, a.sign_tol, a.gap_tol)?;
        let wf = weight_frame(&weights, cfg.sign_tol, cfg.rank_tol)?;
        let moved_queries = farthest_point_sample(&moved, queries.len(), 0)?;

        let mut row = InvarianceTrial {
            trial: t,
            rotation: *r.matrix(),
            translation: shift,
            weight_seed: weight_seed.0,
            clean_queries: 0,
            degenerate: 0,
            ambiguous: 0,
            index_mismatch: 0,
            max_aligned_deviation: 0.0,
            max_output_deviation: 0.0,
        };
        for (&q, &mq) in queries.iter().zip(&moved_queries) {
            let ns = radius_neighbors(&cloud, q, a.radius, k)?;
            let ms = radius_neighbors(&moved, mq, a.radius, k)?;
            if q != mq || ns.indices != ms.indices {
                row.index_mismatch += 1;
                continue;
            }
            let an = align_neighborhood(&cloud, &ns, &wf, &cfg)?;
            let am = align_neighborhood(&moved, &ms, &wf, &cfg)?;
            if an.frame.degenerate || am.frame.degenerate {
                row.degenerate += 1;
                continue;
            }
            if !an.is_clean() || !am.is_clean() {
                row.ambiguous += 1;
                continue;
            }
            row.clean_queries += 1;
            let aligned = an
                .aligned
                .iter()
                .zip(&am.aligned)
                .flat_map(|(x, y)| (0..3).map(move |c| (x[c] - y[c]).abs()))
                .fold(0.0, f64::max);
            let output = wfa_feature_layer(&an, &weights)
                .iter()
                .zip(&wfa_feature_layer(&am, &weights))
                .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
                .fold(0.0, f64::max);
            row.max_aligned_deviation = row.max_aligned_deviation.max(aligned);
            row.max_output_deviation = row.max_output_deviation.max(output);
            deviations.push(aligned.max(output));
        }
        trials.push(row);
    }
    let max_deviation = max_of(&deviations);
    let sum = |f: fn(&InvarianceTrial) -> usize| trials.iter().map(f).sum::<usize>();
    let result = InvarianceResult {
        n_points: cloud.len(),
        queries_per_trial: queries.len(),
        clean_queries: sum(|t| t.clean_queries),
        degenerate: sum(|t| t.degenerate),
        ambiguous: sum(|t| t.ambiguous),
        index_mismatch: sum(|t| t.index_mismatch),
        max_deviation,
        median_deviation: median(deviations),
        tolerance: a.tolerance,
        passed: max_deviation <= a.tolerance,
        trials,
    };
    emit(cmd, a, &result, a.out.as_deref(), || {
        format!(
            "trials {}  clean {}  degenerate {}  ambiguous {}  mismatched {}\nmax deviation {:e}  median {:e}  ({})\n",
            result.trials.len(),
            result.clean_queries,
            result.degenerate,
            result.ambiguous,
            result.index_mismatch,
            result.max_deviation,
            result.median_deviation,
            if result.passed { "pass" } else { "FAIL" }
        )
    })?;
    if !result.passed {
        return Err(CliError::CheckFailed(format!(
            "max deviation {:e} exceeds {:e}",
            result.max_deviation, a.tolerance
        )));
    }
    Ok(())
}

fn gaussian_points(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n).map(|_| [0; 3].map(|_| StandardNormal.sample(rng))).collect()
}

#[derive(Serialize)]
struct ProcrustesInstance {
    instance: usize,
    kabsch_cost: f64,
    brute_force_cost: f64,
    scale: f64,
    passed: bool,
}

#[derive(Serialize)]
struct RegistrationSummary {
    instances: usize,
    clean_instances: usize,
    max_relative_gap: f64,
    median_relative_gap: f64,
    within_tolerance: usize,
    constructed_max_gap: f64,
    constructed_passed: bool,
}

#[derive(Serialize)]
struct ProcrustesResult {
    procrustes_optimality: &'static str,
    instances: Vec<ProcrustesInstance>,
    registration: RegistrationSummary,
}

fn procrustes_check(cmd: &Command, a: &ProcrustesArgs) -> Result<(), CliError> {
    let seed = Seed(a.seed);
    let n = a.points as usize;

    // fixed correspondences: noisy rotated copies
    let mut instances = Vec::with_capacity(a.instances);
    for i in 0..a.instances {
        let s = seed.derive(i as u64);
        let mut rng = s.derive(0).rng();
        let source = gaussian_points(&mut rng, n);
        let q = random_rotation(s.derive(1), RotationMode::Arbitrary);
        let noise = gaussian_points(&mut rng, n);
        let target: Vec<Vec3> = source
            .iter()
            .zip(&noise)
            .map(|(x, e)| linalg3::add(&q.apply(x), &linalg3::scale(e, 0.1)))
            .collect();
        let best = kabsch(&source, &target)?;
        let brute = brute_force_best_rotation(&source, &target, a.samples, s.derive(2));
        let scale: f64 = source.iter().chain(&target).map(|x| linalg3::dot(x, x)).sum();
        instances.push(ProcrustesInstance {
            instance: i,
            kabsch_cost: best.cost,
            brute_force_cost: brute.cost,
            scale,
            passed: best.cost <= brute.cost + 1e-10 * scale,
        });
    }
    let optimal = instances.iter().all(|i| i.passed);

    // nearest-neighbor registration of random neighborhoods against random weights
    let mut gaps = Vec::new();
    let mut within = 0;
    let mut clean = 0;
    let mut constructed_max_gap: f64 = 0.0;
    let check = OptimalityCheckConfig {
        brute_force_samples: a.registration_samples,
        ..Default::default()
    };
    for i in 0..a.instances {
        let s = seed.derive(1_000_000 + i as u64);
        let cloud = gen_shape(&ShapeSpec {
            kind: ShapeKind::ALL[i % ShapeKind::ALL.len()],
            n_points: 256,
            noise_sigma: 0.01,
            with_normals: false,
            seed: s.derive(0),
        })?;
        let query = s.derive(1).rng().random_range(0..cloud.len());
        let ns = radius_neighbors(&cloud, query, 0.4, 16)?;
        let weights = random_weights(s.derive(2), 16, check.wfa.sign_tol, check.wfa.gap_tol)?;
        let cfg = OptimalityCheckConfig { seed: s.derive(3), ..check };
        let rep = check_alignment_optimality(&cloud, &ns, &weights, &cfg)?;
        if rep.local_frame_clean {
            clean += 1;
        }
        within += usize::from(rep.within_tolerance);
        gaps.push(rep.relative_gap);

        // weights that are an exact rotated copy of the neighborhood
        let q = *random_rotation(s.derive(4), RotationMode::Arbitrary).matrix();
        let rep = check_alignment_optimality(&cloud, &ns, &constructed_weights(&cloud, &ns.indices, ns.query_index, &q)?, &cfg)?;
        if rep.local_frame_clean {
            constructed_max_gap = constructed_max_gap.max(rep.gap);
        }
    }
    let result = ProcrustesResult {
        procrustes_optimality: if optimal { "pass" } else { "fail" },
        registration: RegistrationSummary {
            instances: a.instances,
            clean_instances: clean,
            max_relative_gap: max_of(&gaps),
            median_relative_gap: median(gaps),
            within_tolerance: within,
            constructed_max_gap,
            constructed_passed: constructed_max_gap <= 1e-9,
        },
        instances,
    };
    emit(cmd, a, &result, a.out.as_deref(), || {
        let r = &result.registration;
        format!(
            "procrustes optimality: {} ({} instances, {} samples each)\n\
             registration gap: max {:e}  median {:e}  within tolerance {}/{}\n\
             constructed weights: max gap {:e} ({})\n",
            result.procrustes_optimality,
            result.instances.len(),
            a.samples,
            r.max_relative_gap,
            r.median_relative_gap,
            r.within_tolerance,
            r.instances,
            r.constructed_max_gap,
            if r.constructed_passed { "pass" } else { "FAIL" }
        )
    })?;
    if !optimal || !result.registration.constructed_passed {
        return Err(CliError::CheckFailed("procrustes check".into()));
    }
    Ok(())
}

/// `w_j = Q(x_j − (p_i − p̄))`: the neighborhood rotated by `Q`, shifted so
/// the weight barycenter points the way the query offset does.
fn constructed_weights(cloud: &PointCloud, indices: &[usize], query: usize, q: &Mat3) -> Result<LayerWeights, CliError> {
    let pts: Vec<Vec3> = indices.iter().map(|&j| cloud.point(j)).collect();
    let bar = linalg3::scale(
        &pts.iter().fold([0.0; 3], |acc, p| linalg3::add(&acc, p)),
        1.0 / pts.len() as f64,
    );
    let offset = linalg3::sub(&cloud.point(query), &bar);
    let cols: Vec<Vec3> = pts
        .iter()
        .map(|p| linalg3::mat_vec(q, &linalg3::sub(&linalg3::sub(p, &bar), &offset)))
        .collect();
    let n = cols.len();
    Ok(LayerWeights::new(cols, vec![0.0; n])?)
}

fn network_config(net: &NetArgs, num_classes: usize, seed: u64) -> Result<NetworkConfig, CliError> {
    let cfg = NetworkConfig {
        num_queries: net.queries as usize,
        neighbors_per_query: net.neighbors as usize,
        radius: net.radius,
        hidden_widths: net.widths.0.clone(),
        num_classes,
        axis_order: net.order,
        use_wfa: !net.no_wfa,
        seed: Seed(seed),
        sign_tol: net.sign_tol,
        gap_tol: net.gap_tol,
        rank_tol: DEFAULT_RANK_TOL,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn train_options(t: &TrainingArgs) -> TrainOptions {
    TrainOptions {
        epochs: t.epochs,
        lr: t.lr,
        batch_size: t.batch_size as usize,
        augmentation: t.augment.into(),
        eval_every: t.eval_every,
        eval_seed: Seed(t.eval_seed),
    }
}

fn check_points(set: &LabeledDataset, cfg: &NetworkConfig) -> Result<(), CliError> {
    match set.samples.iter().map(|s| s.cloud.len()).min() {
        Some(n) if n < cfg.num_queries => Err(CliError::Usage(format!(
            "--queries {} exceeds the smallest cloud ({n} points)",
            cfg.num_queries
        ))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct TrainResult<'a> {
    network: &'a NetworkConfig,
    train_samples: usize,
    test_samples: usize,
    class_names: &'a [String],
    checkpoint: &'static str,
    report: &'a TrainReport,
}

fn train_cmd(cmd: &Command, a: &TrainArgs) -> Result<(), CliError> {
    let (train_set, test_set) = data::load(&a.data)?;
    let cfg = network_config(&a.net, train_set.num_classes(), a.seed)?;
    check_points(&train_set, &cfg)?;
    let test = (!test_set.is_empty()).then_some(&test_set);
    let (params, report) = train(&cfg, &train_set, test, &train_options(&a.training))?;
    data::ensure_dir(&a.out)?;
    let ckpt = a.out.join("model.ckpt");
    write_checkpoint(&ckpt, &cfg, &params).map_err(|e| io_err(&ckpt, e))?;
    let result = TrainResult {
        network: &cfg,
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        class_names: &train_set.class_names,
        checkpoint: "model.ckpt",
        report: &report,
    };
    emit(cmd, a, &result, Some(&a.out.join("report.json")), || {
        let mut s = String::from("epoch  loss        train    z-test   AR-test\n");
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        for e in &report.epochs {
            s += &format!(
                "{:<6} {:<11.6} {:<8.4} {:<8} {}\n",
                e.epoch,
                e.loss,
                e.train_accuracy,
                fmt(e.test_accuracy_z),
                fmt(e.test_accuracy_arbitrary)
            );
        }
        s
    })
}

#[derive(Serialize)]
struct ModeAccuracy {
    mode: ModeArg,
    accuracy: f64,
}

#[derive(Serialize)]
struct EvalResult<'a> {
    network: &'a NetworkConfig,
    split: &'static str,
    samples: usize,
    accuracies: Vec<ModeAccuracy>,
}

fn eval(cmd: &Command, a: &EvalArgs) -> Result<(), CliError> {
    let (cfg, params) = read_checkpoint(&a.checkpoint).map_err(|e| match e {
        wfa::Error::Io(io) => io_err(&a.checkpoint, io),
        other => io_err(&a.checkpoint, other),
    })?;
    let (train_set, test_set) = data::load(&a.data)?;
    let set = if a.train_split { &train_set } else { &test_set };
    if set.num_classes() != cfg.num_classes {
        return Err(CliError::Usage(format!(
            "dataset has {} classes but the checkpoint expects {}",
            set.num_classes(),
            cfg.num_classes
        )));
    }
    check_points(set, &cfg)?;
    let modes = if a.mode.is_empty() {
        vec![ModeArg::None, ModeArg::Z, ModeArg::Arbitrary]
    } else {
        a.mode.clone()
    };
    let accuracies = modes
        .iter()
        .map(|&m| {
            Ok(ModeAccuracy {
                mode: m,
                accuracy: evaluate(&params, &cfg, set, m.into(), Seed(a.seed))?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let result = EvalResult {
        network: &cfg,
        split: if a.train_split { "train" } else { "test" },
        samples: set.len(),
        accuracies,
    };
    emit(cmd, a, &result, a.out.as_deref(), || {
        result
            .accuracies
            .iter()
            .map(|m| format!("{:<10} {:.4}\n", RotationMode::from(m.mode).name(), m.accuracy))
            .collect()
    })
}

fn gradcheck(cmd: &Command, a: &GradcheckArgs) -> Result<(), CliError> {
    let check = GradCheckConfig {
        configurations: a.configs as usize,
        seed: Seed(a.seed),
        tolerance: a.tolerance,
        worst_tolerance: a.worst_tolerance,
        ..Default::default()
    };
    let report: GradCheckReport = gradient_check(&check)?;
    emit(cmd, a, &report, a.out.as_deref(), String::new)?;
    eprintln!(
        "max rel err {:e}  median rel err {:e}  within {:e}: {:.4} of {} coordinates",
        report.max_rel_error, report.median_rel_error, a.tolerance, report.fraction_within_tolerance, report.coordinates
    );
    if a.out.is_some() {
        println!(
            "max rel err {:e}\nmedian rel err {:e}\n{}",
            report.max_rel_error,
            report.median_rel_error,
            if report.passed { "pass" } else { "FAIL" }
        );
    }
    if !report.passed {
        return Err(CliError::CheckFailed(format!("max rel err {:e}", report.max_rel_error)));
    }
    Ok(())
}

#[derive(Serialize)]
struct AblationRow {
    rank: usize,
    #[serde(serialize_with = "display")]
    order: AxisOrder,
    default: bool,
    mean_accuracy_arbitrary: f64,
    mean_accuracy_z: f64,
    seeds: Vec<u64>,
    accuracy_arbitrary: Vec<f64>,
    accuracy_z: Vec<f64>,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Serialize)]
struct AblationResult {
    train_samples: usize,
    test_samples: usize,
    /// Sorted by mean arbitrary-rotation accuracy, best first.
    rows: Vec<AblationRow>,
}

fn ablation(cmd: &Command, a: &AblationArgs) -> Result<(), CliError> {
    let (train_set, test_set) = data::load(&a.data)?;
    if test_set.is_empty() {
        return Err(CliError::Usage("ablation needs a test split (--train-fraction below 1)".into()));
    }
    let orders = if a.orders.is_empty() { AxisOrder::all().to_vec() } else { a.orders.clone() };
    let opts = train_options(&a.training);
    let mut rows = Vec::with_capacity(orders.len());
    for &order in &orders {
        let net = NetArgs { order, ..a.net.clone() };
        let seeds: Vec<u64> = (0..a.seeds).map(|s| a.seed + s).collect();
        let mut ar = Vec::new();
        let mut z = Vec::new();
        for &s in &seeds {
            let cfg = network_config(&net, train_set.num_classes(), s)?;
            check_points(&train_set, &cfg)?;
            let (_, report) = train(&cfg, &train_set, Some(&test_set), &opts)?;
            ar.push(report.final_test_accuracy_arbitrary.unwrap_or(0.0));
            z.push(report.final_test_accuracy_z.unwrap_or(0.0));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        rows.push(AblationRow {
            rank: 0,
            order,
            default: order == AxisOrder::default(),
            mean_accuracy_arbitrary: mean(&ar),
            mean_accuracy_z: mean(&z),
            seeds,
            accuracy_arbitrary: ar,
            accuracy_z: z,
        });
    }
    // stable sort keeps the input order among ties
    rows.sort_by(|x, y| y.mean_accuracy_arbitrary.total_cmp(&x.mean_accuracy_arbitrary));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    let result = AblationResult {
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        rows,
    };
    emit(cmd, a, &result, a.out.as_deref(), || {
        let mut s = String::from("rank  order  AR-test  z-test\n");
        for r in &result.rows {
            s += &format!(
                "{:<5} {:<6} {:<8.4} {:.4}{}\n",
                r.rank,
                r.order.to_string(),
                r.mean_accuracy_arbitrary,
                r.mean_accuracy_z,
                if r.default { "  (default)" } else { "" }
            );
        }
        s
    })
}
