use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaoslab::diagnostics::{builtin_family, builtin_member, KernelFamily, run_battery, BatteryConfig, SpecFile, TrendThresholds};
use chaoslab::metrics::{bl_distance_1d, ecf_distance, kolmogorov_1d, ks_two_sample, EcfGrid};
use chaoslab::sampler::{sample_batch, sample_ito_oracle, Companions, SampleMatrix};
use chaoslab::sphere::ensemble::{self, SphereConfig};
use chaoslab::sphere::{field_variance_summary, simulate_field, PowerSpectrum, SphereGrid};
use chaoslab::{ChaosVectorSpec, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

/// Gaussian approximation diagnostics for vectors of multiple Wiener-Itô
/// integrals.
#[derive(Debug, Parser, Serialize)]
#[command(name = "chaoslab", version)]
struct Cli {
    /// Master seed of every random stream.
    #[arg(long, global = true, env = "CHAOSLAB_SEED", default_value_t = 42)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    #[serde(skip)]
    workers: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Run the condition battery along a kernel family.
    Diagnose(DiagnoseArgs),
    /// Draw replicates of a chaos vector.
    Sample(SampleArgs),
    /// Distance between a sample file and a second sample or a Gaussian.
    Distance(DistanceArgs),
    /// Isotropic fields on the sphere.
    #[command(subcommand)]
    Sphere(SphereCommand),
}

#[derive(Debug, Args, Serialize)]
#[group(id = "family_source", required = true, multiple = false)]
struct FamilySource {
    /// Built-in family (diag2, diag3, fixed_chisq, oscillating_pair).
    #[arg(long)]
    builtin: Option<String>,
    /// Family JSON file.
    #[arg(long)]
    family: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EcfArgs {
    /// ECF grid half-width T.
    #[arg(long, default_value_t = 4.0)]
    half_width: f64,
    /// ECF lattice points per axis.
    #[arg(long, default_value_t = 81, value_parser = clap::value_parser!(u64).range(2..))]
    points: u64,
}

#[derive(Debug, Args, Serialize)]
struct DiagnoseArgs {
    #[command(flatten)]
    source: FamilySource,
    #[arg(long, default_value_t = 0)]
    lmin: u32,
    #[arg(long, default_value_t = 10)]
    lmax: u32,
    /// Monte Carlo replicates per family member.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[command(flatten)]
    ecf: EcfArgs,
    /// Skip the bounded-Lipschitz columns.
    #[arg(long)]
    no_bl: bool,
    #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(2..))]
    bl_max_samples: u64,
    /// Log-log slope below which a column is falling.
    #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
    slope: f64,
    /// Exact columns: last over max value below which a column is small.
    #[arg(long, default_value_t = 1e-2)]
    relative_tolerance: f64,
    /// Monte Carlo columns: multiple of the noise floor counted as small.
    #[arg(long, default_value_t = 3.0)]
    floor_multiplier: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Hermite,
    Ito,
}

#[derive(Debug, Args, Serialize)]
#[group(id = "spec_source", required = true, multiple = false)]
struct SpecSource {
    /// Built-in family member, used with --l.
    #[arg(long, requires = "l")]
    builtin: Option<String>,
    /// Chaos vector JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    source: SpecSource,
    #[arg(long)]
    l: Option<u32>,
    /// Replicates.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, value_enum, default_value_t = Method::Hermite)]
    method: Method,
    /// Brownian cells per basis direction for the Itô sampler.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    cells: u64,
    /// Output CSV file with columns rep,j,value.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Ecf,
    Bl,
    Ks,
}

#[derive(Debug, Args, Serialize)]
#[group(id = "reference", required = true, multiple = false)]
struct Reference {
    /// Second sample file.
    #[arg(long)]
    b: Option<PathBuf>,
    /// Covariance matrix JSON of the reference Gaussian.
    #[arg(long)]
    cov: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct DistanceArgs {
    /// Sample file.
    #[arg(long)]
    a: PathBuf,
    #[command(flatten)]
    reference: Reference,
    #[arg(long, value_enum)]
    kind: Kind,
    #[command(flatten)]
    ecf: EcfArgs,
}

#[derive(Debug, Args, Serialize)]
#[group(id = "spectrum_source", required = true, multiple = false)]
struct SpectrumSource {
    /// Spectrum CSV with lines l,C_l.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Flat unit-variance spectrum up to this degree.
    #[arg(long)]
    flat: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct SphereCommon {
    #[command(flatten)]
    source: SpectrumSource,
    /// Rescale the spectrum to unit field variance.
    #[arg(long)]
    normalize: bool,
    /// Latitude nodes of the quadrature grid.
    #[arg(long)]
    n_theta: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
enum SphereCommand {
    /// Simulate the field and check its pointwise variance.
    Simulate {
        #[command(flatten)]
        common: SphereCommon,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..))]
        realizations: u64,
    },
    /// Diagnose normalized frequency components of H_q(T).
    Diagnose {
        #[command(flatten)]
        common: SphereCommon,
        /// Hermite rank.
        #[arg(long, default_value_t = 2)]
        q: usize,
        /// Degrees, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        l: Vec<usize>,
        #[arg(long, default_value_t = 4000, value_parser = clap::value_parser!(u64).range(1..))]
        realizations: u64,
        #[command(flatten)]
        ecf: EcfArgs,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

fn fmt(x: f64) -> String {
    chaoslab::diagnostics::report::fmt_f64(x)
}

fn samples_csv(m: &SampleMatrix) -> String {
    let mut out = String::from("rep,j,value\n");
    for (r, row) in m.iter_rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out.push_str(&format!("{r},{},{}\n", j + 1, fmt(*v)));
        }
    }
    out
}

fn parse_samples(path: &Path) -> Result<SampleMatrix> {
    let text = read(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("rep,j,value") {
        return Err(Error::Parse(format!("{}: expected header rep,j,value", path.display())));
    }
    let mut cells = Vec::new();
    for (no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse(format!("{} line {}: `{line}`", path.display(), no + 2));
        let mut it = line.split(',');
        let (Some(r), Some(j), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(bad());
        };
        let r: usize = r.trim().parse().map_err(|_| bad())?;
        let j: usize = j.trim().parse().map_err(|_| bad())?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        if j == 0 {
            return Err(bad());
        }
        cells.push((r, j - 1, v));
    }
    let reps = cells.iter().map(|c| c.0 + 1).max().ok_or_else(|| Error::Parse(format!("{}: no samples", path.display())))?;
    let k = cells.iter().map(|c| c.1 + 1).max().expect("non-empty");
    if cells.len() != reps * k {
        return Err(Error::Parse(format!("{}: incomplete {reps} x {k} sample table", path.display())));
    }
    let mut data = vec![f64::NAN; reps * k];
    for (r, j, v) in cells {
        if !data[r * k + j].is_nan() {
            return Err(Error::Parse(format!("{}: duplicate cell ({r}, {})", path.display(), j + 1)));
        }
        data[r * k + j] = v;
    }
    SampleMatrix::new(reps, k, data)
}

fn load_cov(path: &Path) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&read(path)?)?;
    let k = rows.len();
    if k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Parse(format!("{}: covariance must be a non-empty square matrix", path.display())));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

fn load_spec(source: &SpecSource, l: Option<u32>) -> Result<ChaosVectorSpec> {
    match (&source.builtin, &source.spec) {
        (Some(name), _) => builtin_member(name, l.expect("clap requires --l")),
        (None, Some(path)) => {
            let file: SpecFile = serde_json::from_str(&read(path)?)?;
            file.to_spec()
        }
        (None, None) => unreachable!("clap requires a spec source"),
    }
}

fn load_spectrum(common: &SphereCommon) -> Result<PowerSpectrum> {
    let s = match (&common.source.spectrum, common.source.flat) {
        (Some(path), _) => PowerSpectrum::from_csv(&read(path)?)?,
        (None, Some(l)) => PowerSpectrum::flat(l)?,
        (None, None) => unreachable!("clap requires a spectrum source"),
    };
    Ok(if common.normalize { s.normalized() } else { s })
}

fn run_config(cli: &Cli) -> serde_json::Value {
    serde_json::to_value(cli).expect("config serializes")
}

fn cmd_diagnose(cli: &Cli, args: &DiagnoseArgs) -> Result<()> {
    let family = match (&args.source.builtin, &args.source.family) {
        (Some(name), _) => builtin_family(name, args.lmin, args.lmax)?,
        (None, Some(path)) => KernelFamily::from_json(&read(path)?)?,
        (None, None) => unreachable!("clap requires a family source"),
    };
    let config = BatteryConfig {
        seed: cli.seed,
        samples: args.samples as usize,
        half_width: args.ecf.half_width,
        points_per_axis: args.ecf.points as usize,
        bl: !args.no_bl,
        bl_max_samples: args.bl_max_samples as usize,
        thresholds: TrendThresholds {
            slope: args.slope,
            relative_tolerance: args.relative_tolerance,
            floor_multiplier: args.floor_multiplier,
        },
    };
    let report = run_battery(&family, &config)?;
    prepare_dir(&args.out)?;
    write(&args.out.join("contractions.csv"), &report.contractions_csv())?;
    write(&args.out.join("scalars.csv"), &report.scalars_csv())?;
    write(&args.out.join("distances.csv"), &report.distances_csv())?;
    write(&args.out.join("covariance.csv"), &report.covariance_csv())?;
    write(&args.out.join("report.json"), &report.to_json(run_config(cli)))?;
    match report.trend() {
        Ok(t) => {
            for c in &t.components {
                println!(
                    "component {}: contractions {:?}, fourth cumulant {:?}, malliavin variance {:?}, kolmogorov {:?}",
                    c.j, c.contractions, c.fourth_cumulant, c.malliavin_variance, c.kolmogorov
                );
            }
            println!("ecf {:?}", t.ecf);
        }
        Err(e) => println!("no trend summary: {e}"),
    }
    Ok(())
}

fn cmd_sample(cli: &Cli, args: &SampleArgs) -> Result<()> {
    let spec = load_spec(&args.source, args.l)?;
    let n = args.n as usize;
    let draws = match args.method {
        Method::Hermite => sample_batch(&spec, n, cli.seed, Companions::default())?.draws,
        Method::Ito => sample_ito_oracle(&spec, args.cells as usize * spec.dim(), n, cli.seed)?,
    };
    write(&args.out, &samples_csv(&draws))
}

fn cmd_distance(args: &DistanceArgs) -> Result<()> {
    let a = parse_samples(&args.a)?;
    let b = args.reference.b.as_deref().map(parse_samples).transpose()?;
    let cov = args.reference.cov.as_deref().map(load_cov).transpose()?;
    if let Some(b) = &b {
        if b.cols() != a.cols() {
            return Err(Error::DimMismatch(a.cols(), b.cols()));
        }
    }
    if let Some(c) = &cov {
        if c.nrows() != a.cols() {
            return Err(Error::DimMismatch(a.cols(), c.nrows()));
        }
    }
    match args.kind {
        Kind::Ecf => {
            let cov = cov.ok_or_else(|| Error::InvalidArgument("--kind ecf needs --cov".into()))?;
            let grid = EcfGrid::lattice(a.cols(), args.ecf.half_width, args.ecf.points as usize)?;
            let d = ecf_distance(&a, &cov, &grid)?;
            println!("{}", fmt(d.distance));
        }
        Kind::Bl => {
            let b = b.ok_or_else(|| Error::InvalidArgument("--kind bl needs --b".into()))?;
            for j in 0..a.cols() {
                println!("{}", fmt(bl_distance_1d(&a.column(j), &b.column(j))?));
            }
        }
        Kind::Ks => {
            for j in 0..a.cols() {
                let d = match (&b, &cov) {
                    (Some(b), _) => ks_two_sample(&a.column(j), &b.column(j))?.statistic,
                    (None, Some(c)) => kolmogorov_1d(&a.column(j), c[(j, j)])?,
                    (None, None) => unreachable!("clap requires a reference"),
                };
                println!("{}", fmt(d));
            }
        }
    }
    Ok(())
}

fn cmd_sphere(cli: &Cli, cmd: &SphereCommand) -> Result<()> {
    match cmd {
        SphereCommand::Simulate { common, realizations } => {
            let spectrum = load_spectrum(common)?;
            let grid = SphereGrid::new(common.n_theta.unwrap_or(spectrum.l_max() + 1))?;
            let summary = field_variance_summary(&spectrum, &grid, cli.seed, *realizations as usize)?;
            let first = simulate_field(&spectrum, &grid, cli.seed)?;
            prepare_dir(&common.out)?;
            let mut field = String::from("node,theta,phi,weight,value\n");
            for (i, v) in first.values.iter().enumerate() {
                let (t, p) = grid.node(i);
                field.push_str(&format!("{i},{},{},{},{}\n", fmt(t), fmt(p), fmt(grid.weights()[i]), fmt(*v)));
            }
            write(&common.out.join("field.csv"), &field)?;
            let mut coeffs = String::from("l,m,a\n");
            let mut idx = 0;
            for l in 0..=first.l_max {
                for m in -(l as i64)..=l as i64 {
                    coeffs.push_str(&format!("{l},{m},{}\n", fmt(first.coeffs[idx])));
                    idx += 1;
                }
            }
            write(&common.out.join("coefficients.csv"), &coeffs)?;
            let doc = serde_json::json!({
                "artifact": "chaoslab",
                "version": env!("CARGO_PKG_VERSION"),
                "run": run_config(cli),
                "n_theta": grid.n_theta(),
                "n_phi": grid.n_phi(),
                "spectrum": spectrum.values(),
                "variance": summary,
            });
            write(&common.out.join("summary.json"), &serde_json::to_string_pretty(&doc)?)?;
            println!("Var T = {} (theoretical {}, node SE {})", fmt(summary.empirical), fmt(summary.theoretical), fmt(summary.node_se));
            Ok(())
        }
        SphereCommand::Diagnose { common, q, l, realizations, ecf } => {
            let spectrum = load_spectrum(common)?;
            let config = SphereConfig {
                seed: cli.seed,
                realizations: *realizations as usize,
                n_theta: common.n_theta,
                half_width: ecf.half_width,
                points_per_axis: ecf.points as usize,
            };
            let ens = ensemble::normalized_components(&spectrum, *q, l, &config)?;
            let report = ensemble::sphere_clt_diagnostics(&ens)?;
            prepare_dir(&common.out)?;
            write(&common.out.join("covariance.csv"), &report.covariance_csv())?;
            write(&common.out.join("marginals.csv"), &report.marginals_csv())?;
            write(&common.out.join("distances.csv"), &report.distances_csv())?;
            write(&common.out.join("report.json"), &report.to_json(run_config(cli)))?;
            for r in &report.rows {
                match r.ecf {
                    Some(e) => println!("l = {}: ecf distance {}", r.l, fmt(e.distance)),
                    None => println!("l = {}: degenerate component, skipped", r.l),
                }
            }
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Diagnose(args) => cmd_diagnose(cli, args),
        Command::Sample(args) => cmd_sample(cli, args),
        Command::Distance(args) => cmd_distance(args),
        Command::Sphere(cmd) => cmd_sphere(cli, cmd),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w as usize).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("worker pool: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_assumption_violation() { 2 } else { 1 })
        }
    }
}
