//! Command-line front end: fit / outliers / order / generate / demo / report.
//!
//! Commands communicate through a versioned `model.json`; all file formats
//! are documented in FORMATS.md at the repository root.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curve::{
    bin_clusters, fit_principal_curve, order_dataset, CurveConfig, OrderedDataset, PrincipalCurve,
};
use crate::embedding::{cev, fit_pca, project, EmbeddingModel};
use crate::error::{Error, Result};
use crate::generative::{fit_mvg, generate_profiles, rmse_profiles, sample_mvg, GeneratorModel};
use crate::oracle::{generate_process, SyntheticProcessConfig};
use crate::profiles::{
    load_profiles, normalize, standardize, NormalizedMatrix, ProfileMatrix, QuarantineEntry,
};
use crate::sphere::{
    detect_outliers, fit_sphere_model, to_spherical, wrap_angle, wrap_to_branch, SphereModel,
    SphericalCoords,
};
use crate::stats::{spearman, summary_stats, SummaryStats};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "loadsphere",
    version,
    about = "Spherical modelling of daily load profiles: outliers, latent ordering, synthesis"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the embedding and spherical distribution models to a profile CSV.
    Fit {
        /// Input CSV (meter_id,t001,...,tD).
        input: PathBuf,
        /// Where to write the fitted model.
        #[arg(long, default_value = "model.json")]
        model: PathBuf,
    },
    /// Flag outlier meters against a fitted model.
    Outliers {
        input: PathBuf,
        #[arg(long, default_value = "model.json")]
        model: PathBuf,
        /// Confidence level of the rejection regions.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value = "outliers.csv")]
        output: PathBuf,
        #[arg(long, default_value = "plotdata.json")]
        plot: PathBuf,
    },
    /// Fit the principal curve, order meters, and bin them into clusters.
    Order {
        input: PathBuf,
        #[arg(long, default_value = "model.json")]
        model: PathBuf,
        /// Cluster cut points over s, strictly increasing inside (0,1).
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.4, 0.6])]
        bins: Vec<f64>,
        /// Drop outlier-flagged meters before fitting the curve.
        #[arg(long)]
        exclude_outliers: bool,
        /// Confidence level used with --exclude-outliers.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value = "ordering.csv")]
        output: PathBuf,
        #[arg(long, default_value = "order_plotdata.json")]
        plot: PathBuf,
    },
    /// Sample synthetic profiles from the VMF generator along the curve.
    Generate {
        #[arg(long, default_value = "model.json")]
        model: PathBuf,
        /// Original corpus; enables the KS/RMSE metrics report and the MVG
        /// baseline.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Number of equally spaced curve points.
        #[arg(long, default_value_t = 25)]
        s_grid: usize,
        /// Profiles sampled per curve point.
        #[arg(long, default_value_t = 10)]
        per_point: usize,
        /// VMF concentration; defaults to the fitted polar-angle kappa.
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also fit and sample the per-cluster multivariate-Gaussian baseline.
        #[arg(long)]
        baseline_mvg: bool,
        #[arg(long, default_value = "synthetic.csv")]
        output: PathBuf,
        #[arg(long, default_value = "metrics.json")]
        metrics: PathBuf,
    },
    /// End-to-end demonstration on the built-in synthetic process.
    Demo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "demo_out")]
        out_dir: PathBuf,
    },
    /// Print a human-readable summary of a fitted model.
    Report {
        #[arg(default_value = "model.json")]
        model: PathBuf,
    },
}

/// Corpus identity embedded in the model to prevent cross-corpus misuse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fingerprint {
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentSummary {
    pub azimuth: SummaryStats,
    pub polar: SummaryStats,
    pub radius: SummaryStats,
}

/// The persisted model bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub fingerprint: Fingerprint,
    pub resolution_minutes: u32,
    pub quarantined: Vec<QuarantineEntry>,
    pub embedding: EmbeddingModel,
    pub retained: usize,
    pub cev: Vec<f64>,
    pub sphere: SphereModel,
    pub moments: MomentSummary,
    /// Present after `order` has run.
    pub curve: Option<PrincipalCurve>,
    pub curve_bins: Option<Vec<f64>>,
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Fit { input, model } => cmd_fit(&input, &model),
        Command::Outliers { input, model, level, output, plot } => {
            cmd_outliers(&input, &model, level, &output, &plot)
        }
        Command::Order { input, model, bins, exclude_outliers, level, output, plot } => {
            cmd_order(&input, &model, &bins, exclude_outliers, level, &output, &plot)
        }
        Command::Generate {
            model,
            input,
            s_grid,
            per_point,
            kappa,
            seed,
            baseline_mvg,
            output,
            metrics,
        } => cmd_generate(
            &model,
            input.as_deref(),
            s_grid,
            per_point,
            kappa,
            seed,
            baseline_mvg,
            &output,
            &metrics,
        ),
        Command::Demo { seed, out_dir } => cmd_demo(seed, &out_dir),
        Command::Report { model } => cmd_report(&model),
    }
}

fn fingerprint(path: &Path, rows: usize, cols: usize) -> Result<Fingerprint> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(Fingerprint { rows, cols, sha256: format!("{digest:x}") })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn read_model(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path).map_err(|e| {
        Error::Model(format!("cannot read model file {}: {e}", path.display()))
    })?;
    let model: ModelFile = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Model(format!("malformed model file {}: {e}", path.display())))?;
    if model.schema_version != SCHEMA_VERSION {
        return Err(Error::Model(format!(
            "model schema version {} unsupported (expected {SCHEMA_VERSION})",
            model.schema_version
        )));
    }
    Ok(model)
}

/// Load a corpus and verify it matches the model fingerprint dimensions.
fn load_for_model(model: &ModelFile, input: &Path) -> Result<(ProfileMatrix, Vec<QuarantineEntry>)> {
    let loaded = load_profiles(input)?;
    let d = loaded.profiles.ncols();
    if d != model.embedding.dim() {
        return Err(Error::ShapeMismatch(format!(
            "input has {d} time steps, model expects {}",
            model.embedding.dim()
        )));
    }
    Ok((loaded.profiles, loaded.quarantine))
}

fn project_corpus(model: &ModelFile, profiles: &ProfileMatrix) -> Result<(NormalizedMatrix, DMatrix<f64>)> {
    let x = normalize(&standardize(profiles)?);
    let z = project(&model.embedding, &x, model.retained)?.coords;
    Ok((x, z))
}

fn centered_azimuths(sphere: &SphereModel, coords: &SphericalCoords) -> Vec<f64> {
    coords
        .azimuth
        .iter()
        .map(|&a| wrap_to_branch(wrap_angle(a - sphere.azimuth_center), sphere.azimuth.mu))
        .collect()
}

pub fn cmd_fit(input: &Path, model_path: &Path) -> Result<()> {
    let loaded = load_profiles(input)?;
    for q in &loaded.quarantine {
        eprintln!("warning: quarantined meter {}: {}", q.meter_id, q.reason);
    }
    let profiles = loaded.profiles;
    let x = normalize(&standardize(&profiles)?);
    let embedding = fit_pca(&x)?;
    let retained = 3.min(embedding.dim());
    let z = project(&embedding, &x, retained)?.coords;
    let sphere = fit_sphere_model(&z)?;
    let coords = to_spherical(&z, &sphere.fit);
    let moments = MomentSummary {
        azimuth: summary_stats(&centered_azimuths(&sphere, &coords))?,
        polar: summary_stats(&coords.polar)?,
        radius: summary_stats(&coords.radius)?,
    };
    let cev_table: Vec<f64> =
        (1..=embedding.dim()).map(|n| cev(&embedding, n)).collect::<Result<_>>()?;
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        fingerprint: fingerprint(input, profiles.nrows(), profiles.ncols())?,
        resolution_minutes: profiles.resolution_minutes(),
        quarantined: loaded.quarantine,
        embedding,
        retained,
        cev: cev_table,
        sphere,
        moments,
        curve: None,
        curve_bins: None,
    };
    write_json(model_path, &file)?;

    println!(
        "fitted {} meters x {} steps ({} min resolution), {} quarantined",
        file.fingerprint.rows,
        file.fingerprint.cols,
        file.resolution_minutes,
        file.quarantined.len()
    );
    for n in 1..=file.retained {
        println!("cev({n}) = {:.4}", file.cev[n - 1]);
    }
    println!(
        "sphere: center ({:+.4}, {:+.4}, {:+.4}) radius {:.4} (rms gap {:.2e})",
        file.sphere.fit.center[0],
        file.sphere.fit.center[1],
        file.sphere.fit.center[2],
        file.sphere.fit.radius,
        file.sphere.fit.residual_rms
    );
    print_moment_table(&file.moments);
    println!("model written to {}", model_path.display());
    Ok(())
}

fn print_moment_table(m: &MomentSummary) {
    println!("variable   mean      std       skewness  kurtosis");
    for (name, s) in [("azimuth", &m.azimuth), ("polar", &m.polar), ("radius", &m.radius)] {
        println!(
            "{name:<10} {:+.4}   {:.4}    {:+.4}   {:+.4}",
            s.mean, s.std, s.skewness, s.kurtosis
        );
    }
}

/// Distribution curves for external rendering: pdf sampled on a grid.
#[derive(Serialize)]
struct PdfCurve {
    x: Vec<f64>,
    density: Vec<f64>,
}

#[derive(Serialize)]
struct OutlierPlotData<'a> {
    points: Vec<[f64; 3]>,
    sphere: &'a crate::sphere::SphereFit,
    meter_ids: &'a [String],
    azimuth_out: &'a [bool],
    polar_out: &'a [bool],
    radius_out: &'a [bool],
    azimuth: PdfCurve,
    polar: PdfCurve,
    radius: PdfCurve,
    bounds: crate::sphere::RejectionBounds,
}

pub fn cmd_outliers(
    input: &Path,
    model_path: &Path,
    level: f64,
    output: &Path,
    plot: &Path,
) -> Result<()> {
    let model = read_model(model_path)?;
    let (profiles, quarantine) = load_for_model(&model, input)?;
    for q in &quarantine {
        eprintln!("warning: quarantined meter {}: {}", q.meter_id, q.reason);
    }
    let (_, z) = project_corpus(&model, &profiles)?;
    let coords = to_spherical(&z, &model.sphere.fit);
    let report = detect_outliers(&model.sphere, &coords, level)?;
    let phi = centered_azimuths(&model.sphere, &coords);

    let mut w = csv::Writer::from_path(output).map_err(csv_io)?;
    w.write_record(["meter_id", "azimuth_out", "polar_out", "radius_out", "phi", "theta", "r"])
        .map_err(csv_io)?;
    for (i, id) in profiles.meter_ids().iter().enumerate() {
        w.write_record([
            id.as_str(),
            bool_str(report.azimuth_out[i]),
            bool_str(report.polar_out[i]),
            bool_str(report.radius_out[i]),
            &format!("{:.9}", phi[i]),
            &format!("{:.9}", coords.polar[i]),
            &format!("{:.9}", coords.radius[i]),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;

    let plot_data = OutlierPlotData {
        points: (0..z.nrows()).map(|i| [z[(i, 0)], z[(i, 1)], z[(i, 2)]]).collect(),
        sphere: &model.sphere.fit,
        meter_ids: profiles.meter_ids(),
        azimuth_out: &report.azimuth_out,
        polar_out: &report.polar_out,
        radius_out: &report.radius_out,
        azimuth: pdf_curve(201, -std::f64::consts::PI, std::f64::consts::PI, |x| {
            model.sphere.azimuth.pdf(x)
        }),
        polar: pdf_curve(201, 0.0, std::f64::consts::PI, |x| model.sphere.polar.pdf(x)),
        radius: radius_curve(&model, &coords),
        bounds: report.bounds,
    };
    write_json(plot, &plot_data)?;

    let flagged = (0..report.len()).filter(|&i| report.any_out(i)).count();
    println!(
        "{} of {} meters flagged at level {level} ({} azimuth, {} polar, {} radius)",
        flagged,
        report.len(),
        report.azimuth_out.iter().filter(|&&b| b).count(),
        report.polar_out.iter().filter(|&&b| b).count(),
        report.radius_out.iter().filter(|&&b| b).count(),
    );
    println!("flags written to {}, plot data to {}", output.display(), plot.display());
    Ok(())
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn pdf_curve(n: usize, lo: f64, hi: f64, pdf: impl Fn(f64) -> f64) -> PdfCurve {
    let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let density = x.iter().map(|&v| pdf(v)).collect();
    PdfCurve { x, density }
}

fn radius_curve(model: &ModelFile, coords: &SphericalCoords) -> PdfCurve {
    let lo = coords.radius.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = coords.radius.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.25 * (hi - lo).max(1e-6);
    pdf_curve(201, lo - pad, hi + pad, |x| model.sphere.radius.params.pdf(x))
}

#[derive(Serialize)]
struct OrderPlotData<'a> {
    /// 500 samples of f(s).
    polyline: Vec<[f64; 3]>,
    meter_ids: Vec<&'a str>,
    s: &'a [f64],
    cluster_labels: Vec<String>,
    /// Gram matrix of the unit-norm rows in curve order (possibly strided for
    /// large corpora; `gram_stride` tells how many rows each cell spans).
    gram: Vec<Vec<f64>>,
    gram_stride: usize,
    fit_residual: f64,
    converged: bool,
    low_explained_variance: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_order(
    input: &Path,
    model_path: &Path,
    bins: &[f64],
    exclude_outliers: bool,
    level: f64,
    output: &Path,
    plot: &Path,
) -> Result<()> {
    let mut model = read_model(model_path)?;
    let (profiles, quarantine) = load_for_model(&model, input)?;
    for q in &quarantine {
        eprintln!("warning: quarantined meter {}: {}", q.meter_id, q.reason);
    }
    let (x, z_all) = project_corpus(&model, &profiles)?;

    // Optionally drop flagged meters before fitting the curve.
    let keep: Vec<usize> = if exclude_outliers {
        let coords = to_spherical(&z_all, &model.sphere.fit);
        let report = detect_outliers(&model.sphere, &coords, level)?;
        let keep: Vec<usize> = (0..z_all.nrows()).filter(|&i| !report.any_out(i)).collect();
        let dropped = z_all.nrows() - keep.len();
        if dropped > 0 {
            eprintln!("excluding {dropped} outlier-flagged meters from the curve fit");
        }
        keep
    } else {
        (0..z_all.nrows()).collect()
    };
    if keep.len() < 20 {
        return Err(Error::InsufficientData { need: 20, got: keep.len() });
    }
    let z = DMatrix::from_fn(keep.len(), 3, |i, j| z_all[(keep[i], j)]);

    let curve = fit_principal_curve(&z, &CurveConfig::default())?;
    if !curve.converged {
        eprintln!(
            "warning: principal curve stopped after {} iterations without meeting tolerance; using best iterate",
            curve.iterations
        );
    }
    if curve.low_explained_variance {
        eprintln!("warning: curve explains little variance; the corpus may have no 1-D ordering");
    }
    let ordered = order_dataset(&curve, &z);
    let clusters = bin_clusters(&ordered, bins)?;
    for b in &clusters.empty_bins {
        eprintln!("warning: cluster bin C{} is empty", b + 1);
    }

    let ids: Vec<&str> = keep.iter().map(|&i| profiles.meter_ids()[i].as_str()).collect();
    let mut w = csv::Writer::from_path(output).map_err(csv_io)?;
    w.write_record(["meter_id", "s", "cluster_label"]).map_err(csv_io)?;
    for &rank in &ordered.permutation {
        w.write_record([
            ids[rank],
            &format!("{:.9}", ordered.s[rank]),
            &format!("C{}", clusters.labels[rank] + 1),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;

    // Ordered Gram heatmap on the unit-norm rows (stride keeps it bounded).
    let xv = x.values();
    let stride = keep.len().div_ceil(400);
    let picked: Vec<usize> = ordered
        .permutation
        .iter()
        .step_by(stride)
        .map(|&rank| keep[rank])
        .collect();
    let gram: Vec<Vec<f64>> = picked
        .iter()
        .map(|&a| picked.iter().map(|&b| xv.row(a).dot(&xv.row(b))).collect())
        .collect();

    let plot_data = OrderPlotData {
        polyline: (0..500).map(|k| curve.eval(k as f64 / 499.0)).collect(),
        meter_ids: ids.clone(),
        s: &ordered.s,
        cluster_labels: clusters.labels.iter().map(|&c| format!("C{}", c + 1)).collect(),
        gram,
        gram_stride: stride,
        fit_residual: curve.fit_residual,
        converged: curve.converged,
        low_explained_variance: curve.low_explained_variance,
    };
    write_json(plot, &plot_data)?;

    model.curve = Some(curve);
    model.curve_bins = Some(bins.to_vec());
    write_json(model_path, &model)?;

    println!(
        "ordered {} meters into {} clusters (residual {:.4e})",
        keep.len(),
        bins.len() + 1,
        model.curve.as_ref().unwrap().fit_residual
    );
    println!(
        "ordering written to {}, plot data to {}, curve saved into {}",
        output.display(),
        plot.display(),
        model_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ClusterMetrics {
    ks: f64,
    rmse: f64,
}

#[derive(Serialize)]
struct ModelMetrics {
    model: String,
    clusters: std::collections::BTreeMap<String, ClusterMetrics>,
}

#[derive(Serialize)]
struct MetricsFile {
    kappa: f64,
    seed: u64,
    models: Vec<ModelMetrics>,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_generate(
    model_path: &Path,
    input: Option<&Path>,
    s_grid: usize,
    per_point: usize,
    kappa: Option<f64>,
    seed: u64,
    baseline_mvg: bool,
    output: &Path,
    metrics_path: &Path,
) -> Result<()> {
    let model = read_model(model_path)?;
    let curve = model.curve.clone().ok_or_else(|| {
        Error::Model("model has no fitted curve; run the `order` command first".into())
    })?;
    if s_grid < 2 {
        return Err(Error::InvalidParameter("s grid needs at least 2 points".into()));
    }
    let kappa = kappa.unwrap_or(model.sphere.polar.kappa);
    let bins = model.curve_bins.clone().unwrap_or_else(|| vec![0.2, 0.4, 0.6]);

    let generator = GeneratorModel {
        embedding: model.embedding.clone(),
        sphere: model.sphere.fit,
        curve,
        kappa,
        retained: model.retained,
    };
    let s_values: Vec<f64> =
        (0..s_grid).map(|i| i as f64 / (s_grid - 1) as f64).collect();
    let synth = generate_profiles(&generator, &s_values, per_point, seed)?;

    let label_of = |s: f64| format!("C{}", bins.iter().filter(|&&b| b <= s).count() + 1);
    let d = synth.profiles.ncols();
    let mut w = csv::Writer::from_path(output).map_err(csv_io)?;
    let mut header: Vec<String> = Vec::with_capacity(d + 3);
    header.push("meter_id".into());
    for j in 1..=d {
        header.push(format!("t{j:03}"));
    }
    header.push("source_s".into());
    header.push("cluster_label".into());
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..synth.profiles.nrows() {
        let mut record: Vec<String> = Vec::with_capacity(d + 3);
        record.push(synth.profiles.meter_ids()[i].clone());
        for j in 0..d {
            record.push(format!("{:.9}", synth.profiles.values()[(i, j)]));
        }
        record.push(format!("{:.9}", synth.source_s[i]));
        record.push(label_of(synth.source_s[i]));
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    println!(
        "generated {} profiles ({} curve points x {}) with kappa {:.3}, seed {}",
        synth.profiles.nrows(),
        s_grid,
        per_point,
        kappa,
        seed
    );
    println!("synthetic profiles written to {}", output.display());

    let Some(input) = input else {
        eprintln!("no --input corpus given: skipping the KS/RMSE metrics report");
        return Ok(());
    };
    let (profiles, _) = load_for_model(&model, input)?;
    let metrics = compute_metrics(&model, &generator, &profiles, &synth, &bins, baseline_mvg, seed)?;
    let file = MetricsFile { kappa, seed, models: metrics };
    write_json(metrics_path, &file)?;
    for m in &file.models {
        for (cluster, v) in &m.clusters {
            println!("{} {}: ks {:.4} rmse {:.4}", m.model, cluster, v.ks, v.rmse);
        }
    }
    println!("metrics written to {}", metrics_path.display());
    Ok(())
}

fn cluster_rows(values: &DMatrix<f64>, labels: &[usize], cluster: usize) -> DMatrix<f64> {
    let rows: Vec<usize> =
        (0..labels.len()).filter(|&i| labels[i] == cluster).collect();
    DMatrix::from_fn(rows.len(), values.ncols(), |i, j| values[(rows[i], j)])
}

fn pooled(values: &DMatrix<f64>) -> Vec<f64> {
    values.iter().copied().collect()
}

fn compute_metrics(
    model: &ModelFile,
    generator: &GeneratorModel,
    profiles: &ProfileMatrix,
    synth: &crate::generative::SyntheticProfiles,
    bins: &[f64],
    baseline_mvg: bool,
    seed: u64,
) -> Result<Vec<ModelMetrics>> {
    // Real corpus: standardized rows, ordered and binned by the model curve.
    let (x, z) = project_corpus(model, profiles)?;
    let real_std = x.values() * (x.values().ncols() as f64).sqrt();
    let ordered: OrderedDataset = order_dataset(&generator.curve, &z);
    let real_clusters = bin_clusters(&ordered, bins)?;

    // Synthetic rows are already standardized shapes; bin them by source s.
    let synth_ordered = OrderedDataset {
        s: synth.source_s.clone(),
        permutation: (0..synth.source_s.len()).collect(),
    };
    let synth_clusters = bin_clusters(&synth_ordered, bins)?;

    let n_clusters = bins.len() + 1;
    let mut out = Vec::new();
    let mut vmf = ModelMetrics { model: "vmf".into(), clusters: Default::default() };
    let mut mvg = ModelMetrics { model: "mvg".into(), clusters: Default::default() };
    for c in 0..n_clusters {
        let real = cluster_rows(&real_std, &real_clusters.labels, c);
        let syn = cluster_rows(synth.profiles.values(), &synth_clusters.labels, c);
        if real.nrows() == 0 || syn.nrows() == 0 {
            eprintln!("warning: cluster C{} empty on one side; metrics skipped", c + 1);
            continue;
        }
        vmf.clusters.insert(
            format!("C{}", c + 1),
            ClusterMetrics {
                ks: crate::generative::ks_distance(&pooled(&real), &pooled(&syn))?,
                rmse: rmse_profiles(&real, &syn)?,
            },
        );
        if baseline_mvg {
            let fit = fit_mvg(&real)?;
            let sample = sample_mvg(&fit, syn.nrows(), seed.wrapping_add(c as u64))?;
            mvg.clusters.insert(
                format!("C{}", c + 1),
                ClusterMetrics {
                    ks: crate::generative::ks_distance(&pooled(&real), &pooled(&sample))?,
                    rmse: rmse_profiles(&real, &sample)?,
                },
            );
        }
    }
    out.push(vmf);
    if baseline_mvg {
        out.push(mvg);
    }
    Ok(out)
}

/// Write a profile matrix in the ingestion CSV layout.
fn write_corpus(path: &Path, profiles: &ProfileMatrix) -> Result<()> {
    let d = profiles.ncols();
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header: Vec<String> = Vec::with_capacity(d + 1);
    header.push("meter_id".into());
    for j in 1..=d {
        header.push(format!("t{j:03}"));
    }
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..profiles.nrows() {
        let mut record: Vec<String> = Vec::with_capacity(d + 1);
        record.push(profiles.meter_ids()[i].clone());
        for j in 0..d {
            record.push(format!("{:.9}", profiles.values()[(i, j)]));
        }
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

pub fn cmd_demo(seed: u64, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let corpus_path = out_dir.join("corpus.csv");
    let model_path = out_dir.join("model.json");

    let config = SyntheticProcessConfig { seed, ..Default::default() };
    let (profiles, true_order) = generate_process(&config, true)?;
    write_corpus(&corpus_path, &profiles)?;
    println!("synthetic corpus written to {}", corpus_path.display());

    cmd_fit(&corpus_path, &model_path)?;
    cmd_outliers(
        &corpus_path,
        &model_path,
        0.95,
        &out_dir.join("outliers.csv"),
        &out_dir.join("plotdata.json"),
    )?;
    cmd_order(
        &corpus_path,
        &model_path,
        &[0.2, 0.4, 0.6],
        false,
        0.95,
        &out_dir.join("ordering.csv"),
        &out_dir.join("order_plotdata.json"),
    )?;
    cmd_generate(
        &model_path,
        Some(&corpus_path),
        25,
        10,
        None,
        seed,
        true,
        &out_dir.join("synthetic.csv"),
        &out_dir.join("metrics.json"),
    )?;

    // Property checks over the produced artifacts.
    let model = read_model(&model_path)?;
    let (x, z) = project_corpus(&model, &profiles)?;
    let curve = model.curve.clone().expect("order step stored the curve");
    let ordered = order_dataset(&curve, &z);

    let mut checks = Vec::new();

    let d = x.values().ncols() as f64;
    let max_norm_dev = x
        .values()
        .row_iter()
        .map(|r| (r.norm() * d.sqrt() - d.sqrt()).abs())
        .fold(0.0f64, f64::max);
    checks.push(Check {
        name: "unit-norm identity",
        passed: max_norm_dev < 1e-9,
        detail: format!("max deviation {max_norm_dev:.2e}"),
    });

    let cev3 = model.cev[model.retained - 1];
    checks.push(Check {
        name: "3-component explained variance",
        passed: cev3 >= 0.90,
        detail: format!("cev(3) = {cev3:.4}"),
    });

    let (lag_near, lag_far) = band_similarity(x.values(), &ordered);
    checks.push(Check {
        name: "banded similarity after ordering",
        passed: lag_near > lag_far,
        detail: format!("lag<=5 mean {lag_near:.4} vs lag>=50 mean {lag_far:.4}"),
    });

    let truth: Vec<f64> = true_order.iter().map(|&i| i as f64).collect();
    let rho = spearman(&ordered.s, &truth)?.abs();
    checks.push(Check {
        name: "latent order recovery",
        passed: rho >= 0.90,
        detail: format!("|spearman| = {rho:.4}"),
    });

    let synth = crate::generative::generate_profiles(
        &GeneratorModel {
            embedding: model.embedding.clone(),
            sphere: model.sphere.fit,
            curve: curve.clone(),
            kappa: model.sphere.polar.kappa,
            retained: model.retained,
        },
        &[0.2, 0.5, 0.8],
        40,
        seed,
    )?;
    let sx = normalize(&standardize(&synth.profiles)?);
    let sz = project(&model.embedding, &sx, model.retained)?.coords;
    let s_ordered = order_dataset(&curve, &sz);
    let mut max_gap = 0.0f64;
    for (b, &s) in [0.2, 0.5, 0.8].iter().enumerate() {
        let batch = &s_ordered.s[b * 40..(b + 1) * 40];
        let mean = batch.iter().sum::<f64>() / 40.0;
        max_gap = max_gap.max((mean - s).abs());
    }
    checks.push(Check {
        name: "generator round trip",
        passed: max_gap < 0.05,
        detail: format!("max |batch mean s - source s| = {max_gap:.4}"),
    });

    println!("\nproperty checks:");
    let mut all = true;
    for c in &checks {
        println!("  [{}] {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        all &= c.passed;
    }
    if !all {
        return Err(Error::Numeric("one or more demo property checks failed".into()));
    }
    println!("all checks passed; artifacts in {}", out_dir.display());
    Ok(())
}

/// Mean Gram similarity at small vs large rank lags after ordering.
fn band_similarity(unit_rows: &DMatrix<f64>, ordered: &OrderedDataset) -> (f64, f64) {
    let perm = &ordered.permutation;
    let m = perm.len();
    let (mut near, mut near_n) = (0.0, 0usize);
    let (mut far, mut far_n) = (0.0, 0usize);
    for a in 0..m {
        for b in (a + 1)..m {
            let sim = unit_rows.row(perm[a]).dot(&unit_rows.row(perm[b]));
            let lag = b - a;
            if lag <= 5 {
                near += sim;
                near_n += 1;
            } else if lag >= 50 {
                far += sim;
                far_n += 1;
            }
        }
    }
    (near / near_n.max(1) as f64, far / far_n.max(1) as f64)
}

pub fn cmd_report(model_path: &Path) -> Result<()> {
    let model = read_model(model_path)?;
    println!(
        "model schema v{} for {} meters x {} steps ({} min resolution)",
        model.schema_version,
        model.fingerprint.rows,
        model.fingerprint.cols,
        model.resolution_minutes
    );
    println!("corpus sha256: {}", model.fingerprint.sha256);
    if !model.quarantined.is_empty() {
        println!("quarantined rows: {}", model.quarantined.len());
    }
    println!("\ncumulative explained variance:");
    for n in 1..=model.cev.len().min(6) {
        println!("  cev({n}) = {:.4}", model.cev[n - 1]);
    }
    println!("\nsphere fit:");
    println!(
        "  center ({:+.4}, {:+.4}, {:+.4}), radius {:.4}, rms gap {:.2e}",
        model.sphere.fit.center[0],
        model.sphere.fit.center[1],
        model.sphere.fit.center[2],
        model.sphere.fit.radius,
        model.sphere.fit.residual_rms
    );
    println!(
        "  azimuth: von Mises(mu {:+.4}, kappa {:.3}) around center {:+.4}",
        model.sphere.azimuth.mu, model.sphere.azimuth.kappa, model.sphere.azimuth_center
    );
    println!(
        "  polar:   von Mises(mu {:+.4}, kappa {:.3})",
        model.sphere.polar.mu, model.sphere.polar.kappa
    );
    let r = &model.sphere.radius;
    println!(
        "  radius:  skew-normal(xi {:+.4}, omega {:.4}, alpha {:+.3}){}",
        r.params.location,
        r.params.scale,
        r.params.shape,
        if r.converged { "" } else { " [moment fallback]" }
    );
    println!("\nmoment summary:");
    print_moment_table(&model.moments);
    match &model.curve {
        Some(c) => {
            println!(
                "\nprincipal curve: residual {:.4e}, {} iterations{}{}",
                c.fit_residual,
                c.iterations,
                if c.converged { "" } else { " (not converged)" },
                if c.low_explained_variance { " [low explained variance]" } else { "" }
            );
            if let Some(bins) = &model.curve_bins {
                println!("cluster cut points: {bins:?}");
            }
        }
        None => println!("\nno principal curve fitted yet (run `order`)"),
    }
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Entry point used by `main`: run and report errors on stderr with a
/// nonzero exit code.
pub fn main_entry() -> std::process::ExitCode {
    match run() {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
