use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tempfile::NamedTempFile;
use transop::config::{FromKeyValues, KeyValues};
use transop::encoder::{
    mean_scale, spread_matrix, train_classifier, train_encoder, Classifier, ClassifierConfig,
    EncoderConfig, ScaleEncoder,
};
use transop::inference::{benchmark, infer_with};
use transop::learning::{health_report, train_dictionary, TrainerConfig};
use transop::operators::{generate_path, operator_magnitudes, sample_transform};
use transop::pairing::{select_pair_indices, FeatureSource, DEFAULT_K};
use transop::stability::{
    default_coefficient_range, path_trace, stability_csv, DEFAULT_TRACE_SAMPLES,
};
use transop::synth::{make_multiclass_dataset, make_rotation_dataset, two_class_spec};
use transop::{
    io, rng, Error, InferenceConfig, Method, OperatorDictionary, PointPair, TransportModel,
};

use crate::{Common, Failure, Kind};

const DEFAULT_T: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

/// Config file contents plus the command-line seed.
struct Settings {
    kv: KeyValues,
    seed: Option<u64>,
}

impl Settings {
    fn load(common: &Common) -> Result<Self, Failure> {
        let kv = match &common.config {
            Some(path) => KeyValues::load(path).map_err(config_failure)?,
            None => KeyValues::default(),
        };
        Ok(Settings {
            kv,
            seed: common.seed,
        })
    }

    /// Flag value, else the config value, else `default`.
    fn value<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure> {
        match flag {
            Some(v) => {
                // Still mark the key as known.
                self.kv.get::<T>(key).map_err(config_failure)?;
                Ok(v)
            }
            None => Ok(self.kv.get(key).map_err(config_failure)?.unwrap_or(default)),
        }
    }

    fn apply<C: FromKeyValues>(&self, cfg: &mut C) -> Result<(), Failure> {
        cfg.apply(&self.kv).map_err(config_failure)
    }

    fn seed(&self) -> Result<u64, Failure> {
        self.value(self.seed, "seed", 0)
    }

    /// Rejects config keys the command did not read.
    fn finish(&self) -> Result<(), Failure> {
        self.kv.finish().map_err(config_failure)
    }
}

fn config_failure(e: Error) -> Failure {
    match e {
        Error::Parse { .. } => Failure::Usage(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

/// Writes via a temp file in the target directory and renames into place.
fn write_atomic(path: &Path, text: &str) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure::Runtime(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(text.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn emit(common: &Common, text: &str) -> Result<(), Failure> {
    match &common.out {
        Some(path) => write_atomic(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Runtime(format!("stdout: {e}")))
        }
    }
}

fn load_pairs(path: &Path, data: Option<&Path>) -> Result<Vec<PointPair>, Failure> {
    let points = data.map(io::read_dataset).transpose()?;
    Ok(io::resolve_pairs(path, points.as_deref())?)
}

fn parse_method(name: &str) -> Result<Method, Failure> {
    Method::parse(name).ok_or_else(|| {
        Failure::Usage(format!(
            "unknown method {name:?} (expected prox or subgrad)"
        ))
    })
}

fn inference_config(settings: &Settings) -> Result<InferenceConfig, Failure> {
    let mut cfg = InferenceConfig::default();
    settings.apply(&mut cfg)?;
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn model_json(model: &TransportModel) -> String {
    let mut text = model.to_json();
    text.push('\n');
    text
}

pub struct SynthArgs {
    pub kind: Kind,
    pub n: Option<usize>,
    pub radius: Option<f64>,
    pub angle_spread: Option<f64>,
    pub noise: Option<f64>,
    pub pairs_out: Option<PathBuf>,
    pub model_out: Option<PathBuf>,
    pub gain: Option<f64>,
}

pub fn synth(common: &Common, args: SynthArgs) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    let seed = s.seed()?;
    let gain = s.value(args.gain, "gain", 1.0)?;
    let (points, pairs, generators) = match args.kind {
        Kind::Rotation => {
            let n = s.value(args.n, "n", 500)?;
            let radius = s.value(args.radius, "radius", 1.0)?;
            let spread = s.value(args.angle_spread, "angle_spread", 0.5)?;
            let noise = s.value(args.noise, "noise", 0.0)?;
            s.finish()?;
            let ds = make_rotation_dataset(n, radius, spread, noise, seed).map_err(usage)?;
            (ds.points, Some(ds.pairs), vec![ds.generator])
        }
        Kind::TwoClass => {
            let n = s.value(args.n, "n", 200)?;
            s.finish()?;
            if args.radius.is_some() || args.angle_spread.is_some() || args.noise.is_some() {
                return Err(Failure::Usage(
                    "--radius, --angle-spread and --noise apply to rotation data only".into(),
                ));
            }
            let ds = make_multiclass_dataset(&two_class_spec(n), seed)?;
            (ds.points, None, ds.catalog.generators)
        }
    };
    if let Some(path) = &args.pairs_out {
        let pairs = pairs.ok_or_else(|| {
            Failure::Usage("--pairs-out is only available for rotation data".into())
        })?;
        write_atomic(path, &io::pairs_csv(&pairs))?;
    }
    if let Some(path) = &args.model_out {
        let psi = generators.iter().map(|g| g.scaled(gain)).collect();
        let model = TransportModel::new(OperatorDictionary::new(psi, 0.0)?);
        write_atomic(path, &model_json(&model))?;
    }
    emit(common, &io::dataset_csv(&points))
}

pub fn pair(
    common: &Common,
    data: &Path,
    features: Option<&Path>,
    k: Option<usize>,
) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    let seed = s.seed()?;
    let k = s.value(k, "k", DEFAULT_K)?;
    s.finish()?;
    let points = io::read_dataset(data)?;
    let src = match features {
        Some(path) => FeatureSource::from_file(path, k)?,
        None => FeatureSource::identity(k),
    };
    let pairs = select_pair_indices(&points, &src, seed)?;
    emit(common, &io::index_pairs_csv(&pairs))
}

pub fn train(
    common: &Common,
    pairs: &Path,
    data: Option<&Path>,
    operators: Option<usize>,
    log: Option<&Path>,
) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    let mut cfg = TrainerConfig::default();
    s.apply(&mut cfg)?;
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    let m = s.value(operators, "operators", 1)?;
    s.finish()?;
    cfg.validate().map_err(usage)?;
    if m < 1 {
        return Err(Failure::Usage("--operators must be >= 1".into()));
    }
    let pairs = load_pairs(pairs, data)?;
    let (dictionary, train_log) = train_dictionary(&pairs, m, &cfg)?;
    if let Some(path) = log {
        write_atomic(path, &train_log.to_csv())?;
    }
    let health = health_report(&train_log)?;
    let magnitudes: Vec<String> = operator_magnitudes(&dictionary)
        .iter()
        .map(|v| format!("{v:.4}"))
        .collect();
    eprintln!(
        "trained {m} operator(s) over {} steps; magnitudes [{}]; {}",
        train_log.steps.len(),
        magnitudes.join(", "),
        if health.is_healthy() {
            "healthy"
        } else {
            "unhealthy"
        }
    );
    let model = TransportModel {
        dictionary,
        latent_scale: cfg.latent_scale,
    };
    emit(common, &model_json(&model))
}

pub fn infer(
    common: &Common,
    model: &Path,
    pairs: &Path,
    data: Option<&Path>,
    method: &str,
) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    let seed = s.seed()?;
    let cfg = inference_config(&s)?;
    s.finish()?;
    let method = parse_method(method)?;
    let model = TransportModel::load(model)?;
    let pairs = load_pairs(pairs, data)?;
    let reports = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let p = p.scaled(model.latent_scale);
            infer_with(
                method,
                &model.dictionary,
                &p.z0.z,
                &p.z1.z,
                &cfg,
                rng::derive_seed(seed, i as u64),
            )
            .map_err(|e| Error::Pair {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    emit(common, &io::coefficients_csv(&reports))
}

pub fn sample(
    common: &Common,
    model: &Path,
    data: &Path,
    scale: Option<f64>,
    encoder: Option<&Path>,
    noise: Option<f64>,
    count: Option<usize>,
) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    let seed = s.seed()?;
    let scale = s.value(scale, "scale", 0.1)?;
    let noise = s.value(noise, "noise", 0.0)?;
    let count = s.value(count, "count", 1)?;
    s.finish()?;
    let model = TransportModel::load(model)?;
    let dict = &model.dictionary;
    let encoder = encoder.map(load_encoder).transpose()?;
    let points = io::read_dataset(data)?;
    let mut out = Vec::with_capacity(points.len() * count);
    for (i, p) in points.iter().enumerate() {
        let scales = match &encoder {
            Some(enc) => enc.forward(&p.z)?,
            None => vec![scale; dict.count()],
        };
        for j in 0..count {
            let draw = rng::derive_seed(seed, (i * count + j) as u64);
            out.push(sample_transform(dict, p, &scales, noise, draw)?);
        }
    }
    emit(common, &io::dataset_csv(&out))
}

pub fn paths(
    common: &Common,
    model: &Path,
    pairs: &Path,
    data: Option<&Path>,
    t: Vec<f64>,
) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    let seed = s.seed()?;
    let cfg = inference_config(&s)?;
    s.finish()?;
    let t = if t.is_empty() { DEFAULT_T.to_vec() } else { t };
    let model = TransportModel::load(model)?;
    let dict = &model.dictionary;
    let pairs = load_pairs(pairs, data)?;
    let d = dict.dim();
    let mut out = String::from("pair_index,t");
    for i in 0..d {
        write!(out, ",x{i}").unwrap();
    }
    out.push('\n');
    for (i, p) in pairs.iter().enumerate() {
        let scaled = p.scaled(model.latent_scale);
        let report = infer_with(
            Method::Proximal,
            dict,
            &scaled.z0.z,
            &scaled.z1.z,
            &cfg,
            rng::derive_seed(seed, i as u64),
        )
        .map_err(|e| Error::Pair {
            index: i,
            source: Box::new(e),
        })?;
        let path = generate_path(dict, &report.coefficients, &p.z0, &t)?;
        for (tv, z) in t.iter().zip(&path) {
            write!(out, "{i},{tv:?}").unwrap();
            for v in &z.z {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
    }
    emit(common, &out)
}

pub fn stability(
    common: &Common,
    model: &Path,
    trace: Option<usize>,
    point: &[f64],
    trace_out: Option<&Path>,
    samples: Option<usize>,
) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    s.seed()?;
    let samples = s.value(samples, "samples", DEFAULT_TRACE_SAMPLES)?;
    s.finish()?;
    if samples < 2 {
        return Err(Failure::Usage("--samples must be >= 2".into()));
    }
    let model = TransportModel::load(model)?;
    let dict = &model.dictionary;
    if let (Some(m), Some(path)) = (trace, trace_out) {
        let psi = dict.operator(m).map_err(usage)?;
        let range = default_coefficient_range(psi, samples);
        let trace = path_trace(dict, m, point, &range)?;
        write_atomic(path, &trace.to_csv())?;
    }
    emit(common, &stability_csv(dict)?)
}

fn load_encoder(path: &Path) -> Result<ScaleEncoder, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    ScaleEncoder::from_json(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_classifier(path: &Path) -> Result<Classifier, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    Classifier::from_json(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

pub fn classifier(common: &Common, data: &Path) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    s.seed()?;
    let mut cfg = ClassifierConfig::default();
    s.apply(&mut cfg)?;
    s.finish()?;
    let points = io::read_dataset(data)?;
    let fit = train_classifier(&points, &cfg)?;
    eprintln!(
        "classifier: {} classes, training accuracy {:.4}, loss {:.4}",
        fit.classifier.classes, fit.accuracy, fit.loss
    );
    let mut text = fit.classifier.to_json();
    text.push('\n');
    emit(common, &text)
}

pub fn encoder(
    common: &Common,
    model: &Path,
    classifier: &Path,
    data: &Path,
    log: Option<&Path>,
) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    let mut cfg = EncoderConfig::default();
    s.apply(&mut cfg)?;
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    s.finish()?;
    cfg.validate().map_err(usage)?;
    let model = TransportModel::load(model)?;
    let clf = load_classifier(classifier)?;
    let points = io::read_dataset(data)?;
    let init = cfg.new_encoder(&model.dictionary).map_err(usage)?;
    let (enc, train_log) = train_encoder(&init, &clf, &model.dictionary, &points, &cfg)?;
    if let Some(path) = log {
        write_atomic(path, &train_log.to_csv())?;
    }
    eprintln!("encoder: mean scale {:.6}", mean_scale(&enc, &points)?);
    let mut text = enc.to_json();
    text.push('\n');
    emit(common, &text)
}

pub fn spread(common: &Common, encoder: &Path, data: &Path) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    s.seed()?;
    s.finish()?;
    let enc = load_encoder(encoder)?;
    let points = io::read_dataset(data)?;
    emit(common, &spread_matrix(&enc, &points)?.to_csv())
}

pub struct BenchArgs {
    pub pairs: Option<usize>,
    pub methods: Vec<String>,
    pub model: Option<PathBuf>,
    pub pair_file: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub timing: bool,
}

pub fn bench(common: &Common, args: BenchArgs) -> Result<(), Failure> {
    let s = Settings::load(common)?;
    let seed = s.seed()?;
    let cfg = inference_config(&s)?;
    let n = s.value(args.pairs, "pairs", 100)?;
    let radius = s.value(None, "radius", 3.0)?;
    let spread = s.value(None, "angle_spread", 1.0)?;
    s.finish()?;
    let methods = args
        .methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<Vec<_>, _>>()?;
    let model = match &args.model {
        Some(path) => TransportModel::load(path)?,
        None => TransportModel::new(OperatorDictionary::new(
            vec![transop::synth::so2_generator()],
            0.0,
        )?),
    };
    let pairs: Vec<PointPair> = match &args.pair_file {
        Some(path) => load_pairs(path, args.data.as_deref())?,
        None => {
            make_rotation_dataset(n, radius, spread, 0.0, seed)
                .map_err(usage)?
                .pairs
        }
    };
    let scaled: Vec<PointPair> = pairs.iter().map(|p| p.scaled(model.latent_scale)).collect();
    let rows = benchmark(&model.dictionary, &scaled, &cfg, &methods, seed)?;
    emit(common, &io::bench_csv(&rows, args.timing))
}
