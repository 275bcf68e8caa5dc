//! Result rows, plot tables and the artifact writer.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Generator used for every random draw, recorded in the manifest.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9 ChaCha8Rng::seed_from_u64)";
pub const SEED_DERIVATION: &str =
    "splitmix64 finalizer folded over integer stream labels (mixedorder_statmech::derive_seed)";

/// One number of `results.csv`, tagged with the module and operation that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub module: String,
    pub operation: String,
    pub model: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub p_or_alpha: Option<f64>,
    pub beta: Option<f64>,
    pub x: Option<usize>,
    pub y: Option<usize>,
    pub observable: String,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub detail: String,
}

pub const CSV_HEADER: [&str; 14] = [
    "module",
    "operation",
    "model",
    "L",
    "p_or_alpha",
    "beta",
    "x",
    "y",
    "observable",
    "mean",
    "stderr",
    "n_samples",
    "seed",
    "detail",
];

impl ResultRow {
    pub fn exact(module: &str, operation: &str, model: &str, l: usize, observable: &str, value: f64) -> Self {
        ResultRow {
            module: module.into(),
            operation: operation.into(),
            model: model.into(),
            l,
            p_or_alpha: None,
            beta: None,
            x: None,
            y: None,
            observable: observable.into(),
            mean: value,
            stderr: 0.0,
            n_samples: 1,
            seed: 0,
            detail: String::new(),
        }
    }

    pub fn param(mut self, p: f64) -> Self {
        self.p_or_alpha = Some(p);
        self
    }

    pub fn beta(mut self, b: f64) -> Self {
        self.beta = Some(b);
        self
    }

    pub fn pair(mut self, x: usize, y: usize) -> Self {
        self.x = Some(x);
        self.y = Some(y);
        self
    }

    pub fn sampled(mut self, stderr: f64, n_samples: usize, seed: u64) -> Self {
        self.stderr = stderr;
        self.n_samples = n_samples;
        self.seed = seed;
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    pub fn from_mc(module: &str, operation: &str, r: &mixedorder_statmech::McRow) -> Self {
        ResultRow {
            module: module.into(),
            operation: operation.into(),
            model: r.model.clone(),
            l: r.l,
            p_or_alpha: Some(r.p_or_alpha),
            beta: Some(r.beta),
            x: None,
            y: None,
            observable: r.observable.clone(),
            mean: r.mean,
            stderr: r.stderr,
            n_samples: r.n_samples,
            seed: r.seed,
            detail: String::new(),
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// RFC-4180 CSV with 17 significant digits per double.
pub fn rows_to_csv(rows: &[ResultRow]) -> CliResult<String> {
    let io = |e: csv::Error| CliError::Numeric(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        let opt_f = |v: Option<f64>| v.map(num).unwrap_or_default();
        let opt_u = |v: Option<usize>| v.map(|u| u.to_string()).unwrap_or_default();
        w.write_record([
            r.module.clone(),
            r.operation.clone(),
            r.model.clone(),
            r.l.to_string(),
            opt_f(r.p_or_alpha),
            opt_f(r.beta),
            opt_u(r.x),
            opt_u(r.y),
            r.observable.clone(),
            num(r.mean),
            num(r.stderr),
            r.n_samples.to_string(),
            r.seed.to_string(),
            r.detail.clone(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Numeric(e.to_string()))
}

/// A plot-ready table: one `x y yerr` block per series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatFile {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<(String, Vec<[f64; 3]>)>,
}

impl DatFile {
    pub fn new(name: &str, title: &str, x_label: &str, y_label: &str) -> Self {
        DatFile {
            name: name.into(),
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }

    pub fn push_series(&mut self, label: impl Into<String>, points: Vec<[f64; 3]>) {
        self.series.push((label.into(), points));
    }

    /// Blocks are separated by two blank lines (gnuplot `index`).
    pub fn render(&self) -> String {
        let mut out = format!("# {}\n# {} {} {}_err\n", self.title, self.x_label, self.y_label, self.y_label);
        for (k, (label, pts)) in self.series.iter().enumerate() {
            if k > 0 {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# series {label}\n"));
            for p in pts {
                out.push_str(&format!("{} {} {}\n", num(p[0]), num(p[1]), num(p[2])));
            }
        }
        out
    }
}

/// Everything an experiment produces before it touches the file system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub dat: Vec<DatFile>,
    pub summary: serde_json::Value,
}

impl ExperimentOutput {
    pub fn row(&self, observable: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.observable == observable)
    }
}

fn plot_script(dat: &[DatFile]) -> String {
    let mut s = String::from(
        "# gnuplot script; one page per data file\nset terminal pdfcairo size 5in,3.5in\nset output 'plots.pdf'\n",
    );
    for d in dat {
        s.push_str(&format!("set title '{}'\nset xlabel '{}'\nset ylabel '{}'\n", d.title, d.x_label, d.y_label));
        let parts: Vec<String> = d
            .series
            .iter()
            .enumerate()
            .map(|(i, (label, _))| format!("'{}.dat' index {i} using 1:2:3 with yerrorlines title '{label}'", d.name))
            .collect();
        s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    }
    s
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: String,
    config: &'a RunConfig,
    rng_algorithm: &'static str,
    seed_derivation: &'static str,
    files: Vec<String>,
    summary: &'a serde_json::Value,
}

/// Writes `manifest.json`, `results.csv`, `results.json`, the `.dat` tables and `plot.gp`.
/// `config` must carry the resolved parameters.
pub fn write_artifacts(config: &RunConfig, out: &ExperimentOutput) -> CliResult<Vec<PathBuf>> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let mut written = vec![
        write_atomic(dir, "results.csv", &rows_to_csv(&out.rows)?)?,
        write_atomic(dir, "results.json", &to_json(out)?)?,
    ];
    for d in &out.dat {
        written.push(write_atomic(dir, &format!("{}.dat", d.name), &d.render())?);
    }
    written.push(write_atomic(dir, "plot.gp", &plot_script(&out.dat))?);
    let mut files: Vec<String> =
        written.iter().filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect();
    files.push("manifest.json".into());
    let manifest = Manifest {
        tool: "mixedorder",
        version: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment.name(),
        config,
        rng_algorithm: RNG_ALGORITHM,
        seed_derivation: SEED_DERIVATION,
        files,
        summary: &out.summary,
    };
    written.push(write_atomic(dir, "manifest.json", &to_json(&manifest)?)?);
    Ok(written)
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Numeric(e.to_string()))
}
