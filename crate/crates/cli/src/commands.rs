use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use cellplan::ingest::{self, build_load_series_in, parse_cdr, profile_at, CdrFormat, Profile};
use cellplan::model_io::{read_model, write_model};
use cellplan::model_select::{self, grid_search, GridSpec, Metric, SvcTask, SvrTask};
use cellplan::planner::{self, FemtoDb, FemtoRecord};
use cellplan::svc::{self, Evaluation, SvcParams, TrainingSet};
use cellplan::svr::{self, build_features, SvrParams};
use cellplan::synthgen::{self, SiteSpec, WORKWEEK_MAP};
use cellplan::{kmeans, ClassLabel, Error, Granularity, LoadSeries, Model};
use chrono::{Days, NaiveDate};
use serde::Serialize;

use crate::config::ConfigError;
use crate::ctx::Ctx;
use crate::tables::{self, DayKey};
use crate::*;

pub fn run(ctx: &mut Ctx, command: &Command) -> anyhow::Result<()> {
    match command {
        Command::Gen(a) => gen(ctx, a),
        Command::Ingest(a) => ingest(ctx, a),
        Command::TrainSvm(a) => train_svm(ctx, a),
        Command::Classify(a) => classify(ctx, a),
        Command::TrainKmeans(a) => train_kmeans(ctx, a),
        Command::AssignKmeans(a) => assign_kmeans(ctx, a),
        Command::Tune(a) => tune(ctx, a),
        Command::TrainSvr(a) => train_svr(ctx, a),
        Command::Predict(a) => predict(ctx, a),
        Command::Plan(a) => plan(ctx, a),
        Command::Evaluate(a) => evaluate(ctx, a),
        Command::ExportCurve(a) => export_curve(ctx, a),
    }
}

fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn model_bytes(model: &Model<f64>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_model(&mut buf, model)?;
    buf.push(b'\n');
    Ok(buf)
}

fn load_model(ctx: &mut Ctx, path: &Path) -> anyhow::Result<Model<f64>> {
    let bytes = ctx.read(path)?;
    read_model(bytes.as_slice()).with_context(|| format!("loading model {}", path.display()))
}

fn read_series(ctx: &mut Ctx, path: &Path) -> anyhow::Result<Vec<LoadSeries>> {
    let bytes = ctx.read(path)?;
    ingest::read_series(bytes.as_slice())
        .with_context(|| format!("reading series {}", path.display()))
}

fn read_profiles(ctx: &mut Ctx, path: &Path) -> anyhow::Result<Vec<Profile<f64>>> {
    let bytes = ctx.read(path)?;
    ingest::read_profiles(bytes.as_slice())
        .with_context(|| format!("reading profiles {}", path.display()))
}

fn read_classes(ctx: &mut Ctx, path: &Path) -> anyhow::Result<BTreeMap<DayKey, ClassLabel>> {
    let bytes = ctx.read(path)?;
    tables::read_classes(&bytes).with_context(|| format!("reading classes {}", path.display()))
}

fn read_femto(ctx: &mut Ctx, path: &Path) -> anyhow::Result<FemtoDb> {
    let bytes = ctx.read(path)?;
    planner::read_femto_db(bytes.as_slice())
        .with_context(|| format!("reading femto database {}", path.display()))
}

fn key(p: &Profile<f64>) -> DayKey {
    (p.site_id.clone(), p.date)
}

/// Profiles paired with their labels; unlabeled profiles are an error.
fn join_labels(
    profiles: Vec<Profile<f64>>,
    labels: &BTreeMap<DayKey, ClassLabel>,
) -> anyhow::Result<Vec<(Profile<f64>, ClassLabel)>> {
    if profiles.is_empty() {
        bail!(Error::Empty("profiles"));
    }
    profiles
        .into_iter()
        .map(|p| {
            let label = labels
                .get(&key(&p))
                .copied()
                .ok_or_else(|| Error::Coverage(format!("no label for {} {}", p.site_id, p.date)))?;
            Ok((p, label))
        })
        .collect()
}

fn granularity_of_dim(dim: usize) -> anyhow::Result<Granularity> {
    [Granularity::TenMin, Granularity::Hourly]
        .into_iter()
        .find(|g| g.len() == dim)
        .ok_or_else(|| {
            anyhow!(Error::InvalidInput(format!(
                "no profile granularity has dimension {dim}"
            )))
        })
}

/// Profiles at `granularity`, from either a profile file or a series file.
fn profiles_at(
    ctx: &mut Ctx,
    args: &ClassifyArgs,
    granularity: Granularity,
) -> anyhow::Result<Vec<Profile<f64>>> {
    match (&args.profiles, &args.series) {
        (Some(p), _) => read_profiles(ctx, p)?
            .iter()
            .map(|p| tables::regranulate(p, granularity))
            .collect(),
        (None, Some(s)) => Ok(read_series(ctx, s)?
            .iter()
            .map(|s| profile_at(s, granularity))
            .collect()),
        (None, None) => bail!(ConfigError(
            "either --profiles or --series is required".into()
        )),
    }
}

fn gen(ctx: &mut Ctx, a: &GenArgs) -> anyhow::Result<()> {
    let g = &mut ctx.cfg.gen;
    g.stations = a.stations.unwrap_or(g.stations);
    g.days = a.days.unwrap_or(g.days);
    g.start = a.start.unwrap_or(g.start);
    g.users = a.users.unwrap_or(g.users);
    g.weeks = a.weeks.unwrap_or(g.weeks);
    g.weekly |= a.weekly;
    if let Some(sigma) = a.noise {
        ctx.cfg.templates = ctx.cfg.templates.clone().with_noise(sigma);
    }
    let g = ctx.cfg.gen.clone();
    let templates = ctx.cfg.templates.clone();
    let seed = ctx.seed;
    if g.stations == 0 {
        bail!(ConfigError("gen needs at least one station".into()));
    }

    let sites: Vec<(String, ClassLabel)> = (0..g.stations)
        .map(|i| (format!("bs{i:03}"), ClassLabel::from_index(i % 3)))
        .collect();
    let mut cdr = b"# timestamp=iso8601\n".to_vec();
    let mut labels = BTreeMap::new();
    let series = if g.weekly {
        let mut all = Vec::new();
        for (i, (site, _)) in sites.iter().enumerate() {
            let days = synthgen::gen_weekly(
                site,
                &WORKWEEK_MAP,
                &templates,
                g.start,
                g.weeks,
                seed.wrapping_add(i as u64),
            )?;
            for (s, class) in days {
                labels.insert((s.site_id.clone(), s.date), class);
                all.push(s);
            }
        }
        synthgen::cdr_for_series(&mut cdr, &all, g.users, seed)?
    } else {
        let specs: Vec<SiteSpec> = sites
            .iter()
            .map(|(id, class)| SiteSpec {
                site_id: id.clone(),
                template: templates.template(*class),
            })
            .collect();
        let series = synthgen::gen_cdr(&mut cdr, &specs, g.start, g.days, g.users, seed)?;
        for s in &series {
            let class = sites[sites
                .iter()
                .position(|(id, _)| *id == s.site_id)
                .expect("generated site")]
            .1;
            labels.insert((s.site_id.clone(), s.date), class);
        }
        series
    };

    let n = sites.len();
    let records: Vec<FemtoRecord> = sites
        .iter()
        .enumerate()
        .map(|(i, (id, _))| {
            let neighbors: BTreeSet<String> = [(i + n - 1) % n, (i + 1) % n]
                .into_iter()
                .filter(|&j| j != i)
                .map(|j| sites[j].0.clone())
                .collect();
            FemtoRecord {
                cell_id: id.clone(),
                lat: (14_690 + i) as f64 / 1000.0,
                lon: -17.44,
                capacity: g.femto_capacity,
                neighbors,
            }
        })
        .collect();
    let mut femto = Vec::new();
    planner::write_femto_db(&mut femto, &FemtoDb::new(records)?)?;

    let mut truth = Vec::new();
    ingest::write_series(&mut truth, &series)?;
    ctx.write("cdr.csv", &cdr)?;
    ctx.write("series_truth.csv", &truth)?;
    ctx.write("labels.csv", &tables::write_classes(&labels)?)?;
    ctx.write("femto.csv", &femto)?;
    Ok(())
}

fn ingest(ctx: &mut Ctx, a: &IngestArgs) -> anyhow::Result<()> {
    if let Some(g) = a.granularity {
        ctx.cfg.ingest.granularity = g;
    }
    let offset = ctx.cfg.offset()?;
    let format = CdrFormat {
        max_error_fraction: ctx.cfg.ingest.max_error_fraction,
        ..CdrFormat::default()
    };
    let bytes = ctx.read(&a.cdr)?;
    let parsed = parse_cdr(bytes.as_slice(), &format)?;
    let series = build_load_series_in(&parsed.records, offset);
    let profiles: Vec<Profile<f64>> = series
        .values()
        .map(|s| profile_at(s, ctx.cfg.ingest.granularity))
        .collect();

    let mut errors = Vec::new();
    parsed.write_error_report(&mut errors)?;
    let mut series_out = Vec::new();
    ingest::write_series(&mut series_out, series.values())?;
    let mut profiles_out = Vec::new();
    ingest::write_profiles(&mut profiles_out, &profiles)?;
    ctx.write("series.csv", &series_out)?;
    ctx.write("profiles.csv", &profiles_out)?;
    ctx.write("ingest_errors.txt", &errors)?;
    Ok(())
}

fn train_svm(ctx: &mut Ctx, a: &TrainSvmArgs) -> anyhow::Result<()> {
    if let Some(c) = a.c {
        ctx.cfg.svm.c = c;
    }
    if a.gamma.is_some() {
        ctx.cfg.svm.gamma = a.gamma;
    }
    let profiles = read_profiles(ctx, &a.profiles)?;
    let labels = read_classes(ctx, &a.labels)?;
    let labeled = join_labels(profiles, &labels)?;
    let (x, y): (Vec<Vec<f64>>, Vec<ClassLabel>) =
        labeled.into_iter().map(|(p, l)| (p.values, l)).unzip();
    let data = TrainingSet::new(x, y)?;
    let svm = &ctx.cfg.svm;
    let kernel = match svm.gamma {
        Some(g) => cellplan::Kernel::rbf(g)?,
        None => cellplan::Kernel::default_rbf(data.dim()),
    };
    let model = svc::train_multiclass(&data, &SvcParams::new(svm.c, kernel).with_tol(svm.tol))?;
    ctx.write("svm_model.json", &model_bytes(&Model::Svc(model))?)?;
    Ok(())
}

fn classify(ctx: &mut Ctx, a: &ClassifyArgs) -> anyhow::Result<()> {
    let Model::Svc(model) = load_model(ctx, &a.model)? else {
        bail!(Error::InvalidInput("classify needs an svc model".into()));
    };
    let granularity = granularity_of_dim(model.dim)?;
    let mut out = BTreeMap::new();
    for p in profiles_at(ctx, a, granularity)? {
        out.insert(key(&p), model.classify(&p)?);
    }
    ctx.write("classes.csv", &tables::write_classes(&out)?)?;
    Ok(())
}

fn train_kmeans(ctx: &mut Ctx, a: &TrainKmeansArgs) -> anyhow::Result<()> {
    if let Some(g) = a.granularity {
        ctx.cfg.kmeans.granularity = g;
    }
    let granularity = ctx.cfg.kmeans.granularity;
    let profiles = read_profiles(ctx, &a.profiles)?
        .iter()
        .map(|p| tables::regranulate(p, granularity))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let labels = read_classes(ctx, &a.labels)?;
    let labeled = join_labels(profiles, &labels)?;
    let model = kmeans::train(&labeled, ctx.seed)?;
    ctx.write("kmeans_model.json", &model_bytes(&Model::Kmeans(model))?)?;
    Ok(())
}

fn assign_kmeans(ctx: &mut Ctx, a: &ClassifyArgs) -> anyhow::Result<()> {
    let Model::Kmeans(model) = load_model(ctx, &a.model)? else {
        bail!(Error::InvalidInput(
            "assign-kmeans needs a kmeans model".into()
        ));
    };
    let granularity = granularity_of_dim(model.dim())?;
    let mut out = BTreeMap::new();
    for p in profiles_at(ctx, a, granularity)? {
        out.insert(key(&p), model.assign(&p)?);
    }
    ctx.write("kmeans_classes.csv", &tables::write_classes(&out)?)?;
    Ok(())
}

/// History of one site in date order, optionally cut before `before`.
fn site_history(
    series: &[LoadSeries],
    site: &str,
    before: Option<NaiveDate>,
) -> anyhow::Result<Vec<LoadSeries>> {
    let mut days: Vec<LoadSeries> = series
        .iter()
        .filter(|s| s.site_id == site && before.is_none_or(|b| s.date < b))
        .cloned()
        .collect();
    if days.is_empty() {
        bail!(Error::InvalidInput(format!("no history for site {site}")));
    }
    days.sort_by_key(|s| s.date);
    Ok(days)
}

#[derive(Serialize)]
struct TuneSummary {
    task: &'static str,
    metric: Metric,
    c: f64,
    gamma: f64,
    epsilon: Option<f64>,
    score: f64,
    cells: usize,
    failed_cells: usize,
}

fn tune(ctx: &mut Ctx, a: &TuneArgs) -> anyhow::Result<()> {
    let file_grid: Option<GridSpec<f64>> = match &a.grid {
        Some(path) => {
            let bytes = ctx.read(path)?;
            let text = String::from_utf8(bytes).context("grid file is not UTF-8")?;
            Some(
                toml::from_str(&text)
                    .map_err(|e| ConfigError(format!("{}: {}", path.display(), e.message())))?,
            )
        }
        None => None,
    };
    let tune_cfg = ctx.cfg.tune.clone();
    let seed = ctx.seed;
    let (task_name, result) = match a.task {
        Task::Svm => {
            let profiles =
                read_profiles(ctx, a.profiles.as_ref().expect("clap requires --profiles"))?;
            let labels = read_classes(ctx, a.labels.as_ref().expect("clap requires --labels"))?;
            let labeled = join_labels(profiles, &labels)?;
            let (x, y): (Vec<_>, Vec<_>) = labeled.into_iter().map(|(p, l)| (p.values, l)).unzip();
            let data = TrainingSet::new(x, y)?;
            let grid = file_grid.unwrap_or_else(|| GridSpec {
                split: model_select::Split::KFold(tune_cfg.svm_folds),
                mode: tune_cfg.mode,
                ..GridSpec::default_classification()
            });
            let task = SvcTask {
                data: &data,
                tol: ctx.cfg.svm.tol,
            };
            ("svm", grid_search(&task, &grid, seed)?)
        }
        Task::Svr => {
            let series = read_series(ctx, a.series.as_ref().expect("clap requires --series"))?;
            let site = match &a.site {
                Some(s) => s.clone(),
                None => series
                    .iter()
                    .map(|s| s.site_id.clone())
                    .min()
                    .ok_or(Error::Empty("series"))?,
            };
            let history = site_history(&series, &site, a.before)?;
            let samples = build_features(&history, None)?;
            let first_year = history
                .iter()
                .map(|s| chrono::Datelike::year(&s.date))
                .min()
                .expect("non-empty");
            let grid = file_grid.unwrap_or_else(|| {
                let lo = samples
                    .iter()
                    .map(|s| s.label)
                    .fold(f64::INFINITY, f64::min);
                let hi = samples
                    .iter()
                    .map(|s| s.label)
                    .fold(f64::NEG_INFINITY, f64::max);
                GridSpec {
                    mode: tune_cfg.mode,
                    ..GridSpec::default_regression(hi - lo, tune_cfg.svr_split)
                }
            });
            let task = SvrTask {
                samples: &samples,
                first_year,
                tol: ctx.cfg.svr.tol,
            };
            ("svr", grid_search(&task, &grid, seed)?)
        }
    };
    let mut table = Vec::new();
    model_select::write_score_table(&mut table, &result.table)?;
    let metric = match a.task {
        Task::Svm => Metric::Accuracy,
        Task::Svr => Metric::Mse,
    };
    let summary = TuneSummary {
        task: task_name,
        metric,
        c: result.best.c,
        gamma: result.best.gamma,
        epsilon: result.best.epsilon,
        score: result.best_score,
        cells: result.table.len(),
        failed_cells: result.table.iter().filter(|r| r.score.is_none()).count(),
    };
    ctx.write("score_table.csv", &table)?;
    ctx.write("tune_best.json", &json_bytes(&summary)?)?;
    Ok(())
}

fn export_curve(ctx: &mut Ctx, a: &ExportCurveArgs) -> anyhow::Result<()> {
    let bytes = ctx.read(&a.table)?;
    let mut rows = model_select::read_score_table(bytes.as_slice())?;
    let eps = |r: &model_select::ScoreRow<f64>| r.params.epsilon.unwrap_or(0.0);
    rows.sort_by(|x, y| {
        x.params
            .gamma
            .total_cmp(&y.params.gamma)
            .then(x.params.c.total_cmp(&y.params.c))
            .then(eps(x).total_cmp(&eps(y)))
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["gamma", "C", "epsilon", "metric"])?;
    for r in &rows {
        w.write_record([
            r.params.gamma.to_string(),
            r.params.c.to_string(),
            r.params.epsilon.map(|e| e.to_string()).unwrap_or_default(),
            r.score.map_or_else(|| "NaN".to_owned(), |s| s.to_string()),
        ])?;
    }
    ctx.write("curve.csv", &w.into_inner()?)?;
    Ok(())
}

fn train_svr(ctx: &mut Ctx, a: &TrainSvrArgs) -> anyhow::Result<()> {
    let s = &mut ctx.cfg.svr;
    s.c = a.c.unwrap_or(s.c);
    s.gamma = a.gamma.unwrap_or(s.gamma);
    s.epsilon = a.epsilon.unwrap_or(s.epsilon);
    let params = SvrParams::new(s.c, s.gamma, s.epsilon).with_tol(s.tol);
    let series = read_series(ctx, &a.series)?;
    let sites: BTreeSet<String> = if a.site.is_empty() {
        series.iter().map(|s| s.site_id.clone()).collect()
    } else {
        a.site.iter().cloned().collect()
    };
    if sites.is_empty() {
        bail!(Error::Empty("series"));
    }
    for site in &sites {
        if site.is_empty() || site.contains(['/', '\\']) || site.starts_with('.') {
            bail!(Error::InvalidInput(format!(
                "site id {site:?} cannot name a model file"
            )));
        }
        let history = site_history(&series, site, a.before)?;
        let model = svr::train_series(&history, &params).with_context(|| format!("site {site}"))?;
        ctx.write(
            &format!("svr_{site}.json"),
            &model_bytes(&Model::Svr(model))?,
        )?;
    }
    Ok(())
}

fn site_of_model(path: &Path) -> anyhow::Result<String> {
    let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(|| {
        anyhow!(Error::InvalidInput(format!(
            "bad model path {}",
            path.display()
        )))
    })?;
    Ok(stem.strip_prefix("svr_").unwrap_or(stem).to_owned())
}

fn predict(ctx: &mut Ctx, a: &PredictArgs) -> anyhow::Result<()> {
    if a.days == 0 {
        bail!(ConfigError("--days must be at least 1".into()));
    }
    let actual: BTreeMap<DayKey, Vec<u32>> = match &a.actual {
        Some(p) => read_series(ctx, p)?
            .into_iter()
            .map(|s| ((s.site_id.clone(), s.date), s.bins().to_vec()))
            .collect(),
        None => BTreeMap::new(),
    };
    let mut models = BTreeMap::new();
    for path in &a.model {
        let site = site_of_model(path)?;
        let Model::Svr(model) = load_model(ctx, path)? else {
            bail!(Error::InvalidInput(format!(
                "{} is not an svr model",
                path.display()
            )));
        };
        if models.insert(site.clone(), model).is_some() {
            bail!(Error::InvalidInput(format!("two models for site {site}")));
        }
    }
    let mut rows = Vec::new();
    for (site, model) in &models {
        for d in 0..a.days {
            let date = a.date + Days::new(d as u64);
            let predicted = model.predict_date(date)?;
            let truth = actual.get(&(site.clone(), date)).cloned();
            rows.push((site.clone(), date, predicted, truth));
        }
    }
    let mut out = Vec::new();
    svr::write_predictions(&mut out, &rows)?;
    ctx.write("predictions.csv", &out)?;
    Ok(())
}

/// The single day present in `keys`, or `date` when given.
fn pick_date<'a>(
    keys: impl Iterator<Item = &'a DayKey>,
    date: Option<NaiveDate>,
) -> anyhow::Result<NaiveDate> {
    if let Some(d) = date {
        return Ok(d);
    }
    let dates: BTreeSet<NaiveDate> = keys.map(|k| k.1).collect();
    match dates.len() {
        1 => Ok(*dates.first().expect("one date")),
        0 => bail!(Error::Empty("forecast days")),
        n => bail!(ConfigError(format!("input spans {n} days; pass --date"))),
    }
}

fn plan(ctx: &mut Ctx, a: &PlanArgs) -> anyhow::Result<()> {
    let bytes = ctx.read(&a.predictions)?;
    let forecasts = tables::read_predictions(&bytes)?;
    let date = pick_date(forecasts.keys(), a.date)?;
    let predicted: BTreeMap<String, Vec<f64>> = forecasts
        .into_iter()
        .filter(|((_, d), _)| *d == date)
        .map(|((site, _), v)| (site, v))
        .collect();
    if predicted.is_empty() {
        bail!(Error::InvalidInput(format!("no forecasts for {date}")));
    }
    let db = read_femto(ctx, &a.femto)?;
    let classes: BTreeMap<String, ClassLabel> = match &a.classes {
        Some(p) => read_classes(ctx, p)?
            .into_iter()
            .filter(|((_, d), _)| *d == date)
            .map(|((site, _), c)| (site, c))
            .collect(),
        None => BTreeMap::new(),
    };
    let actions = planner::plan(&predicted, &classes, &db, &ctx.cfg.qos)?;
    let mut out = Vec::new();
    planner::write_plan(&mut out, &actions)?;
    ctx.write("plan.csv", &out)?;
    Ok(())
}

#[derive(Serialize)]
struct AccuracyReport {
    rows: usize,
    total: f64,
    per_class: BTreeMap<String, Option<f64>>,
    /// `confusion[truth − 1][predicted − 1]`.
    confusion: [[usize; 3]; 3],
}

#[derive(Serialize)]
struct PlanReport {
    date: NaiveDate,
    cells: usize,
    energy_saved: f64,
    qos_violations: usize,
}

fn evaluate(ctx: &mut Ctx, a: &EvaluateArgs) -> anyhow::Result<()> {
    if let (Some(classes), Some(labels)) = (&a.classes, &a.labels) {
        let predicted = read_classes(ctx, classes)?;
        let truth = read_classes(ctx, labels)?;
        let pairs = predicted
            .iter()
            .map(|(k, p)| {
                truth
                    .get(k)
                    .map(|t| (*t, *p))
                    .ok_or_else(|| Error::Coverage(format!("no label for {} {}", k.0, k.1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let e = Evaluation::from_pairs(pairs)?;
        let report = AccuracyReport {
            rows: predicted.len(),
            total: e.total,
            per_class: ClassLabel::ALL
                .iter()
                .map(|c| (c.to_string(), e.per_class[c.index()]))
                .collect(),
            confusion: e.confusion,
        };
        ctx.write("evaluation.json", &json_bytes(&report)?)?;
        return Ok(());
    }
    let (Some(plan_path), Some(actual_path), Some(femto_path)) = (&a.plan, &a.actual, &a.femto)
    else {
        bail!(ConfigError(
            "evaluate needs --classes with --labels, or --plan with --actual and --femto".into()
        ));
    };
    let bytes = ctx.read(plan_path)?;
    let actions = planner::read_plan(bytes.as_slice())?;
    let cells: BTreeSet<&str> = actions.iter().map(|x| x.cell_id.as_str()).collect();
    let series = read_series(ctx, actual_path)?;
    let keys: Vec<DayKey> = series
        .iter()
        .filter(|s| cells.contains(s.site_id.as_str()))
        .map(|s| (s.site_id.clone(), s.date))
        .collect();
    let date = pick_date(keys.iter(), a.date)?;
    let actual: BTreeMap<String, Vec<f64>> = series
        .iter()
        .filter(|s| s.date == date && cells.contains(s.site_id.as_str()))
        .map(|s| {
            (
                s.site_id.clone(),
                s.bins().iter().map(|&b| b as f64).collect(),
            )
        })
        .collect();
    let db = read_femto(ctx, femto_path)?;
    let e = planner::evaluate_plan(&actions, &actual, &db, &ctx.cfg.qos)?;
    let report = PlanReport {
        date,
        cells: cells.len(),
        energy_saved: e.energy_saved,
        qos_violations: e.qos_violations,
    };
    ctx.write("plan_eval.json", &json_bytes(&report)?)?;
    Ok(())
}
