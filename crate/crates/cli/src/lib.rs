//! Experiment runner behind the `randqc` binary.
//!
//! A run is fully described by an [`ExperimentConfig`]. Every run writes
//! delimited tables (header row with units in brackets), grid dumps where
//! relevant, and a `manifest.toml` naming seeds, grids and ladders.

pub mod plot;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use randqc::asymptotics::{deviation_curve, log_space, surface_order, DeviationOptions};
use randqc::geom::Rect;
use randqc::io::{write_convergence_log, write_field, write_map, Manifest};
use randqc::modulus::{annulus_chain_diagnostic, conductivity_from_beltrami, random_rectangles, rough_qc_report};
use randqc::partition::{build_square_grid, build_vertex_sector_partition, sector_cell_height, DEFAULT_ANCHORS};
use randqc::percolation::{ratio_experiment, RatioConfig};
use randqc::rng::child_seed;
use randqc::solver::{solve_field, solve_truncated, SolveOptions};
use randqc::surface::{sample_surface, surface_beltrami, ModelFile};
use randqc::{BeltramiField, Complex64, GridSpec, SurfaceModel};

/// Failure of a run, split by exit status.
#[derive(Debug)]
pub enum RunError {
    /// Bad configuration or inputs (exit 2).
    Precondition(String),
    /// The numerics failed (exit 3).
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Precondition(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Precondition(m) => write!(f, "precondition failed: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<randqc::Error> for RunError {
    fn from(e: randqc::Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e.to_string())
        } else {
            RunError::Precondition(e.to_string())
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Precondition(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Precondition(e.to_string())
    }
}

pub type RunResult<T> = Result<T, RunError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Percolation,
    Modulus,
    Linearity,
    SurfaceOrder,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Percolation => "percolation",
            Command::Modulus => "modulus",
            Command::Linearity => "linearity",
            Command::SurfaceOrder => "surface-order",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Uniform laws on the middle 80% of each arc, unit cells.
    #[default]
    Default,
    /// Every marked point at its arc midpoint: the undeformed surface.
    Base,
    Uniform { fraction: f64 },
    Custom(ModelFile),
}

impl ModelSpec {
    pub fn build(&self) -> RunResult<SurfaceModel> {
        Ok(match self {
            ModelSpec::Default => SurfaceModel::default(),
            ModelSpec::Base => SurfaceModel::base(DEFAULT_ANCHORS, 1.0)?,
            ModelSpec::Uniform { fraction } => SurfaceModel::uniform(DEFAULT_ANCHORS, *fraction, 1.0)?,
            ModelSpec::Custom(f) => SurfaceModel::from_file(f)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    Zero,
    Constant { re: f64, im: f64 },
    /// `k z / z̄` on `B(0, radius)`; compared with `z |z|^{2k/(1-k)}`.
    Radial { k: f64, radius: f64 },
    Surface,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveSection {
    pub field: FieldSpec,
    pub truncation: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub collar: usize,
}

impl Default for SolveSection {
    fn default() -> Self {
        let o = SolveOptions::default();
        SolveSection { field: FieldSpec::Surface, truncation: None, tol: o.tol, max_iter: o.max_iter, collar: o.collar }
    }
}

impl SolveSection {
    fn options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iter: self.max_iter, collar: self.collar }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Grid,
    VertexSector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PercolationSection {
    pub family: Family,
    /// Percolation parameters to sweep.
    pub r: Vec<f64>,
    pub n: f64,
    pub pairs: usize,
    pub sources: usize,
    pub colorings: usize,
}

impl Default for PercolationSection {
    fn default() -> Self {
        PercolationSection { family: Family::Grid, r: vec![0.0, 0.02, 0.1, 0.2], n: 64.0, pairs: 100, sources: 5, colorings: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModulusSection {
    pub seeds: usize,
    /// Rectangles lie in `B(0, radius)`.
    pub radius: f64,
    pub rectangles: usize,
    /// Shortest allowed side; `ln N` when absent, `N` the grid half-width.
    pub side_floor: Option<f64>,
    pub max_side_factor: f64,
    pub resolution: usize,
    pub chain_n0: f64,
    pub chain_depth: usize,
    pub chain_resolution: usize,
}

impl Default for ModulusSection {
    fn default() -> Self {
        ModulusSection {
            seeds: 3,
            radius: 14.0,
            rectangles: 6,
            side_floor: None,
            max_side_factor: 3.0,
            resolution: 32,
            chain_n0: 2.0,
            chain_depth: 3,
            chain_resolution: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearitySection {
    pub ladder: Vec<f64>,
    pub trials: usize,
    pub nodes_per_radius: usize,
    pub samples: usize,
}

impl Default for LinearitySection {
    fn default() -> Self {
        let d = DeviationOptions::default();
        LinearitySection { ladder: vec![4.0, 8.0, 16.0], trials: 5, nodes_per_radius: d.nodes_per_radius, samples: d.samples }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderSection {
    pub t_min: f64,
    pub t_max: f64,
    pub t_count: usize,
    pub window: (f64, f64),
    pub samples: usize,
    pub include_base: bool,
}

impl Default for OrderSection {
    fn default() -> Self {
        OrderSection { t_min: 1.0, t_max: 16.0, t_count: 25, window: (4.0, 16.0), samples: 3, include_base: true }
    }
}

/// Everything that determines a run's output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub plot: bool,
    pub grid: GridSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub percolation: PercolationSection,
    #[serde(default)]
    pub modulus: ModulusSection,
    #[serde(default)]
    pub linearity: LinearitySection,
    #[serde(default)]
    pub order: OrderSection,
}

impl ExperimentConfig {
    /// Small default run of `command`.
    pub fn default_for(command: Command) -> Self {
        let grid = match command {
            Command::SurfaceOrder => GridSpec { half_width: 32.0, n: 256 },
            Command::Modulus => GridSpec { half_width: 16.0, n: 128 },
            _ => GridSpec { half_width: 8.0, n: 128 },
        };
        ExperimentConfig {
            command,
            seed: 1,
            output: PathBuf::from(format!("out/{}", command.name())),
            threads: None,
            plot: false,
            grid,
            model: ModelSpec::Default,
            solve: SolveSection::default(),
            percolation: PercolationSection::default(),
            modulus: ModulusSection::default(),
            linearity: LinearitySection::default(),
            order: OrderSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> RunResult<Self> {
        toml::from_str(text).map_err(|e| RunError::Precondition(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> RunResult<String> {
        toml::to_string(self).map_err(|e| RunError::Precondition(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    fn manifest(&self) -> Manifest {
        let mut m = Manifest::new(self.command.name());
        m.seeds.push(self.seed);
        m.grids.push(self.grid);
        m.notes.insert("model".into(), format!("{:?}", self.model));
        m
    }
}

/// Files written by a run.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> RunResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> RunResult<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn finish(mut self, mut manifest: Manifest) -> RunResult<Self> {
        let path = self.path("manifest.toml");
        manifest.outputs = self
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect();
        manifest.write(&path)?;
        Ok(self)
    }
}

fn e(v: f64) -> String {
    format!("{v:.9e}")
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Dispatch on `config.command`.
pub fn run(config: &ExperimentConfig) -> RunResult<Artifacts> {
    match config.command {
        Command::Solve => run_solve(config),
        Command::Percolation => run_percolation(config),
        Command::Modulus => run_modulus(config),
        Command::Linearity => run_linearity(config),
        Command::SurfaceOrder => run_order(config),
    }
}

fn build_field(config: &ExperimentConfig) -> RunResult<BeltramiField> {
    let grid = GridSpec::new(config.grid.half_width, config.grid.n)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut f = match &config.solve.field {
        FieldSpec::Zero => BeltramiField::zero(grid),
        FieldSpec::Constant { re, im } => BeltramiField::from_fn(grid, |_| (Complex64::new(*re, *im), 0))?,
        FieldSpec::Radial { k, radius } => BeltramiField::from_fn(grid, |z| {
            if z.norm() < *radius && z.norm() > 0.0 {
                (*k * z / z.conj(), 1)
            } else {
                (zero, 0)
            }
        })?,
        FieldSpec::Surface => {
            let model = config.model.build()?;
            let sample = sample_surface(&model, Rect::centered_square(grid.half_width), config.seed)?;
            surface_beltrami(&model, &sample, grid)?
        }
    };
    f.seed = config.seed;
    Ok(f)
}

/// Solve one field; dumps field and map, convergence log and a summary.
pub fn run_solve(config: &ExperimentConfig) -> RunResult<Artifacts> {
    let mut art = Artifacts::new(&config.output)?;
    let field = build_field(config)?;
    let opts = config.solve.options();
    let map = match config.solve.truncation {
        Some(r) => solve_truncated(&field, r, &opts)?,
        None => solve_field(&field, &opts)?,
    };
    let stem = art.dir.join("field");
    write_field(&field, &stem)?;
    art.files.extend([stem.with_extension("toml"), stem.with_extension("bin")]);
    let stem = art.dir.join("map");
    write_map(&map, config.seed, &stem)?;
    art.files.extend([stem.with_extension("toml"), stem.with_extension("bin")]);
    let log = art.path("convergence.csv");
    write_convergence_log(&map.meta.history, fs::File::create(&log)?)?;

    let fd = map.meta.fd_residual;
    let mut rows = vec![
        vec!["iterations".into(), map.meta.iterations.to_string(), "1".into()],
        vec!["spectral_residual".into(), e(map.meta.spectral_residual), "1".into()],
        vec!["fd_residual_nodes".into(), fd.count.to_string(), "1".into()],
        vec!["fd_residual_median".into(), e(fd.median), "1".into()],
        vec!["fd_residual_p90".into(), e(fd.p90), "1".into()],
        vec!["fd_residual_max".into(), e(fd.max), "1".into()],
        vec!["positive_jacobian_fraction".into(), e(map.positive_jacobian_fraction()), "1".into()],
        vec!["k_bound".into(), e(field.k_bound()), "1".into()],
    ];
    if let FieldSpec::Radial { k, radius } = config.solve.field {
        // w = z |z|^{a} with a = 2k / (1 - k) inside the disk
        let a = 2.0 * k / (1.0 - k);
        let r = 0.5 * radius;
        let m = map.nodes_per_side();
        let (mut err, mut scale) = (0.0f64, 0.0f64);
        for idx in 0..m * m {
            let z = map.node(idx / m, idx % m);
            if z.norm() <= r {
                let want = z * z.norm().powf(a);
                err = err.max((map.values()[idx] - want).norm());
                scale = scale.max(want.norm());
            }
        }
        rows.push(vec!["oracle_sup_error".into(), e(err), "len".into()]);
        rows.push(vec!["oracle_relative_error".into(), e(err / scale), "1".into()]);
    }
    art.table("summary.csv", &["quantity", "value", "unit"], rows)?;
    if config.plot {
        let pts: Vec<(f64, f64)> = map.meta.history.iter().map(|(k, r)| (*k as f64, r.max(1e-300).log10())).collect();
        plot::lines(&art.path("convergence.svg"), "fixed-point updates", "iteration", "log10 update", &[("update", pts)])?;
    }
    let mut man = config.manifest();
    man.notes.insert("field".into(), format!("{:?}", config.solve.field));
    if let Some(t) = config.solve.truncation {
        man.ladders.insert("truncation".into(), vec![t]);
    }
    art.finish(man)
}

/// Ratio tables over a sweep of `r`.
pub fn run_percolation(config: &ExperimentConfig) -> RunResult<Artifacts> {
    let s = &config.percolation;
    let mut art = Artifacts::new(&config.output)?;
    let window = Rect::centered_square(s.n + 2.0);
    let part = match s.family {
        Family::Grid => build_square_grid(1.0, 1.0, window)?,
        Family::VertexSector => {
            let h = sector_cell_height(1.0, DEFAULT_ANCHORS)?;
            build_vertex_sector_partition(1.0, h, DEFAULT_ANCHORS, window.inflate(2.0))?
        }
    };
    let mut records = Vec::new();
    let mut summary = Vec::new();
    let mut mins = Vec::new();
    let mut q01s = Vec::new();
    for (k, &r) in s.r.iter().enumerate() {
        let cfg = RatioConfig { r, n: s.n, pairs: s.pairs, sources: s.sources, colorings: s.colorings, seed: child_seed(config.seed, k as u64) };
        let st = ratio_experiment(&part, &cfg)?;
        for rec in &st.records {
            records.push(vec![
                format!("{}", s.n),
                format!("{r}"),
                rec.coloring.to_string(),
                rec.pair_id.to_string(),
                e(rec.d),
                e(rec.d_chem),
                e(rec.ratio),
            ]);
        }
        summary.push(vec![format!("{r}"), e(st.min), e(st.q01), e(st.median), e(st.max), e(st.fraction_above_tenth), e(st.yellow_fraction)]);
        mins.push((r, st.min));
        q01s.push((r, st.q01));
    }
    art.table("ratios.csv", &["N [len]", "r [1]", "coloring", "pair_id", "d [len]", "d_chem [len]", "ratio [1]"], records)?;
    art.table(
        "summary.csv",
        &["r [1]", "min_ratio [1]", "q01_ratio [1]", "median_ratio [1]", "max_ratio [1]", "colorings_min_ge_0.1 [1]", "yellow_fraction [1]"],
        summary,
    )?;
    if config.plot {
        plot::lines(&art.path("ratios.svg"), "chemical to Euclidean ratio", "r", "ratio", &[("min", mins), ("1% quantile", q01s)])?;
    }
    let mut man = config.manifest();
    man.seeds.extend((0..s.r.len()).map(|k| child_seed(config.seed, k as u64)));
    man.ladders.insert("r".into(), s.r.clone());
    man.notes.insert("family".into(), format!("{:?}", s.family));
    art.finish(man)
}

/// Rough quasiconformality of rectangles and the annulus chain, per seed.
pub fn run_modulus(config: &ExperimentConfig) -> RunResult<Artifacts> {
    let s = &config.modulus;
    let mut art = Artifacts::new(&config.output)?;
    let model = config.model.build()?;
    let grid = GridSpec::new(config.grid.half_width, config.grid.n)?;
    let floor = s.side_floor.unwrap_or(grid.half_width.ln());
    let mut rq = Vec::new();
    let mut chain_rows = Vec::new();
    let mut summary = Vec::new();
    let mut levels = Vec::new();
    let mut seeds = Vec::new();
    for k in 0..s.seeds {
        let seed = child_seed(config.seed, k as u64);
        seeds.push(seed);
        let sample = sample_surface(&model, Rect::centered_square(grid.half_width), seed)?;
        let field = surface_beltrami(&model, &sample, grid)?;
        let medium = conductivity_from_beltrami(&field)?;
        let rects = random_rectangles(s.radius, s.rectangles, floor, s.max_side_factor * floor, seed)?;
        let report = rough_qc_report(&medium, &rects, floor, s.resolution)?;
        for en in &report.entries {
            rq.push(vec![
                k.to_string(),
                en.id.to_string(),
                en.marking.name().to_string(),
                e(en.rect.x_min),
                e(en.rect.x_max),
                e(en.rect.y_min),
                e(en.rect.y_max),
                e(en.euclidean),
                e(en.intrinsic),
                e(en.ratio),
            ]);
        }
        let chain = annulus_chain_diagnostic(&medium, s.chain_n0, s.chain_depth, s.chain_resolution)?;
        for (ring, sum) in chain.rings.iter().zip(&chain.running_sum) {
            chain_rows.push(vec![k.to_string(), ring.level.to_string(), e(ring.inner), e(ring.outer), e(ring.euclidean), e(ring.intrinsic), e(*sum)]);
        }
        levels.push((k, chain.rings.iter().map(|r| (r.level as f64, r.intrinsic)).collect::<Vec<_>>()));
        summary.push(vec![k.to_string(), seed.to_string(), e(report.k_empirical), e(*chain.running_sum.last().unwrap_or(&0.0))]);
    }
    art.table(
        "rough_qc.csv",
        &["sample", "rect_id", "marking", "x_min [len]", "x_max [len]", "y_min [len]", "y_max [len]", "euclidean [1]", "intrinsic [1]", "ratio [1]"],
        rq,
    )?;
    art.table(
        "chain.csv",
        &["sample", "level", "inner [len]", "outer [len]", "euclidean [1]", "intrinsic [1]", "running_sum [1]"],
        chain_rows,
    )?;
    art.table("summary.csv", &["sample", "seed", "k_empirical [1]", "chain_sum [1]"], summary)?;
    if config.plot {
        let series: Vec<(String, Vec<(f64, f64)>)> = levels.into_iter().map(|(k, v)| (format!("sample {k}"), v)).collect();
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
        plot::lines(&art.path("chain.svg"), "image ring moduli", "level", "modulus", &refs)?;
    }
    let mut man = config.manifest();
    man.seeds.extend(seeds);
    man.ladders.insert("chain_inner".into(), (0..s.chain_depth).map(|k| s.chain_n0 * 2f64.powi(k as i32)).collect());
    art.finish(man)
}

/// Deviation of solved maps from their best linear fit along a ladder.
pub fn run_linearity(config: &ExperimentConfig) -> RunResult<Artifacts> {
    let s = &config.linearity;
    let mut art = Artifacts::new(&config.output)?;
    let model = config.model.build()?;
    let opts = DeviationOptions { nodes_per_radius: s.nodes_per_radius, samples: s.samples, solve: config.solve.options() };
    let curve = deviation_curve(&model, &s.ladder, s.trials, config.seed, &opts)?;
    if let Some(f) = curve.rows.iter().flat_map(|r| &r.failures).next() {
        return Err(RunError::Numerical(f.clone()));
    }
    let rows = curve
        .rows
        .iter()
        .map(|r| {
            let m = r.mean_matrix;
            vec![e(r.radius), r.completed.to_string(), e(r.median), e(r.q10), e(r.q90), e(r.max), e(m[0][0]), e(m[0][1]), e(m[1][0]), e(m[1][1])]
        })
        .collect();
    art.table(
        "deviation.csv",
        &["R [len]", "trials", "median [1]", "q10 [1]", "q90 [1]", "max [1]", "a11 [1]", "a12 [1]", "a21 [1]", "a22 [1]"],
        rows,
    )?;
    let rows = curve
        .trials
        .iter()
        .map(|(r, t, est)| {
            let m = est.matrix;
            vec![e(*r), t.to_string(), e(est.deviation), e(m[0][0]), e(m[0][1]), e(m[1][0]), e(m[1][1])]
        })
        .collect();
    art.table("trials.csv", &["R [len]", "trial", "deviation [1]", "a11 [1]", "a12 [1]", "a21 [1]", "a22 [1]"], rows)?;
    if config.plot {
        let pts = curve.rows.iter().map(|r| (r.radius.log2(), r.median.log10())).collect();
        plot::lines(&art.path("deviation.svg"), "median deviation from linear", "log2 R", "log10 deviation", &[("median", pts)])?;
    }
    let mut man = config.manifest();
    man.seeds.extend((0..s.trials).map(|t| child_seed(config.seed, t as u64)));
    man.ladders.insert("R".into(), s.ladder.clone());
    art.finish(man)
}

/// Spherical area, characteristic and order fits for surface samples.
pub fn run_order(config: &ExperimentConfig) -> RunResult<Artifacts> {
    let s = &config.order;
    let mut art = Artifacts::new(&config.output)?;
    let model = config.model.build()?;
    let grid = GridSpec::new(config.grid.half_width, config.grid.n)?;
    let t = log_space(s.t_min, s.t_max, s.t_count);
    let opts = config.solve.options();
    let mut jobs: Vec<(String, SurfaceModel, u64)> = Vec::new();
    if s.include_base {
        jobs.push(("base".into(), SurfaceModel::base(DEFAULT_ANCHORS, model.cell_width)?, 0));
    }
    for k in 0..s.samples {
        jobs.push((format!("sample-{k}"), model.clone(), child_seed(config.seed, k as u64)));
    }
    let mut curves = Vec::new();
    let mut fits = Vec::new();
    let mut slopes = Vec::new();
    let mut lowers = Vec::new();
    let mut series = Vec::new();
    for (name, m, seed) in &jobs {
        let c = surface_order(m, *seed, grid, &t, s.window, &opts)?;
        for k in 0..t.len() {
            curves.push(vec![name.clone(), e(t[k]), e(c.a_values[k]), e(c.characteristic.t_values[k]), e(c.characteristic.error[k])]);
        }
        let f = c.fit;
        fits.push(vec![name.clone(), seed.to_string(), e(f.slope), e(f.intercept), e(f.residual), e(f.lower_order), f.points.to_string()]);
        if name != "base" {
            slopes.push(f.slope);
            lowers.push(f.lower_order);
        }
        series.push((name.clone(), t.iter().zip(&c.characteristic.t_values).filter(|(_, v)| **v > 0.0).map(|(r, v)| (r.ln(), v.ln())).collect::<Vec<_>>()));
    }
    art.table("curves.csv", &["sample", "t [len]", "A [sphere]", "T [1]", "T_err [1]"], curves)?;
    art.table("fits.csv", &["sample", "seed", "slope [1]", "intercept [1]", "residual [1]", "lower_order [1]", "points"], fits)?;
    let mut sorted = slopes.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| if sorted.is_empty() { f64::NAN } else { sorted[((sorted.len() - 1) as f64 * p).round() as usize] };
    let rows = vec![
        vec!["median_slope".into(), e(median(&mut slopes.clone())), "1".into()],
        vec!["q10_slope".into(), e(q(0.1)), "1".into()],
        vec!["q90_slope".into(), e(q(0.9)), "1".into()],
        vec!["median_lower_order".into(), e(median(&mut lowers)), "1".into()],
    ];
    art.table("summary.csv", &["quantity", "value", "unit"], rows)?;
    if config.plot {
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
        plot::lines(&art.path("characteristic.svg"), "characteristic", "ln r", "ln T", &refs)?;
    }
    let mut man = config.manifest();
    man.seeds.extend(jobs.iter().map(|j| j.2));
    man.ladders.insert("t".into(), t);
    man.ladders.insert("fit_window".into(), vec![s.window.0, s.window.1]);
    art.finish(man)
}
