//! Config-driven pipelines: node states, sampled curves, extrapolation and
//! the files they produce.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use lindblad_extrap::extrapolation::{extrapolate, ResultJson};
use lindblad_extrap::grids::{build_grid, quantize_grid, recommended_interval, GridKind};
use lindblad_extrap::model::expectation;
use lindblad_extrap::reference::exact_evolve;
use lindblad_extrap::sampling::{
    noiseless_curve, node_states, read_curve_csv, sample_states, write_curve_csv, CurveRow, ShotEstimate, ShotMode,
};
use lindblad_extrap::zoo::{build_tfim, random_pure_state, random_model, tfim_initial_state};
use lindblad_extrap::{
    DensityMatrix, ExtrapolationMethod, ExtrapolationWeights, LindbladModel, Observable, StepGrid,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format, Interval, ModelSpec};

/// A config resolved into concrete operators, interval and evolution time.
#[derive(Clone, Debug)]
pub struct Experiment {
    /// Config with the interval made explicit.
    pub config: ExperimentConfig,
    /// Model that is actually evolved (rescaled when requested).
    pub model: LindbladModel,
    pub observable: Observable,
    pub initial_state: DensityMatrix,
    pub initial_state_label: String,
    /// Evolution time of `model`: 1 when rescaled, `total_time` otherwise.
    pub evolution_time: f64,
    pub l: f64,
    pub l_unscaled: f64,
    pub interval_hi: f64,
    pub interval_auto: bool,
}

fn build_model(spec: &ModelSpec) -> Result<(LindbladModel, Observable, DensityMatrix, String)> {
    Ok(match spec {
        ModelSpec::Random16(r) | ModelSpec::Random(r) => {
            let dim = r.dim.unwrap_or(16);
            let (m, o) = random_model(dim, r.n_jumps, r.seed, r.scale.0)?;
            let state_seed = r.state_seed.unwrap_or(r.seed);
            let rho = random_pure_state(dim, state_seed)?;
            (m, o, rho, format!("random pure state, seed {state_seed}"))
        }
        ModelSpec::Tfim(t) => {
            let (m, o) = build_tfim(&t.into())?;
            (m, o, tfim_initial_state(t.n_q)?, "|0...0><0...0|".to_string())
        }
    })
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let (base, observable, initial_state, initial_state_label) = build_model(&config.model)?;
        let t = config.total_time.0;
        let (model, evolution_time) = if config.rescale {
            (base.rescale(t)?, 1.0)
        } else {
            (base.clone(), t)
        };
        let l = model.generator_bound();
        let (interval_hi, interval_auto) = match config.interval() {
            Interval::Fixed(v) => (v, false),
            Interval::Auto => (recommended_interval(l, evolution_time)?, true),
        };
        let mut config = config.clone();
        config.set_interval(interval_hi);
        Ok(Self {
            config,
            model,
            observable,
            initial_state,
            initial_state_label,
            evolution_time,
            l,
            l_unscaled: base.generator_bound(),
            interval_hi,
            interval_auto,
        })
    }

    /// Quantized grid of the given kind over the experiment's interval.
    pub fn grid(&self, kind: GridKind) -> Result<StepGrid> {
        let raw = build_grid(kind, self.interval_hi, self.config.grid.n.0 as usize)?;
        Ok(quantize_grid(&raw, self.evolution_time)?)
    }

    /// Observable expectation in the exactly propagated state.
    pub fn reference_value(&self) -> Result<f64> {
        let sol = exact_evolve(&self.model, &self.initial_state, self.evolution_time, self.config.reference_tol)?;
        Ok(expectation(&sol.state, &self.observable)?)
    }

    pub fn node_states(&self, grid: &StepGrid) -> Result<Vec<DensityMatrix>> {
        Ok(node_states(&self.model, &self.initial_state, grid, self.config.integrator)?)
    }

    pub fn noiseless(&self, grid: &StepGrid) -> Result<Vec<f64>> {
        Ok(noiseless_curve(&self.model, &self.initial_state, grid, &self.observable, self.config.integrator)?)
    }

    pub fn sample(&self, states: &[DensityMatrix], seed: u64) -> Result<Vec<ShotEstimate>> {
        Ok(sample_states(
            states,
            &self.observable,
            self.config.shots.n_shots.0,
            seed,
            0,
            self.config.shots.mode,
        )?)
    }

    /// Everything needed for one grid: states, noiseless values and one
    /// sampled curve per seed.
    pub fn run_grid(&self, kind: GridKind, seeds: &[u64], reference: Option<f64>) -> Result<GridRun> {
        let grid = self.grid(kind)?;
        let states = self.node_states(&grid)?;
        let noiseless = states
            .iter()
            .map(|s| self.observable.expectation_of(s.matrix()))
            .collect::<lindblad_extrap::Result<Vec<f64>>>()?;
        let weights = ExtrapolationWeights::new(&grid, self.config.method())?;
        let mut trials = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let est = self.sample(&states, seed)?;
            let rows = curve_rows(&grid, &est, Some(&noiseless), reference);
            let means: Vec<f64> = est.iter().map(|e| e.mean).collect();
            let result = extrapolate(&weights, &means)?.to_json_value(reference);
            trials.push(Trial { seed, rows, result });
        }
        Ok(GridRun {
            kind,
            grid,
            noiseless,
            trials,
        })
    }

    pub fn meta(&self, command: &str, grid: &StepGrid, reference: Option<f64>) -> Meta {
        Meta {
            library_version: lindblad_extrap::VERSION.to_string(),
            command: command.to_string(),
            config: self.config.clone(),
            derived: Derived {
                generator_bound: self.l,
                generator_bound_unscaled: self.l_unscaled,
                evolution_time: self.evolution_time,
                interval_hi: self.interval_hi,
                interval_auto: self.interval_auto,
                grid_kind: self.config.grid.kind,
                nodes: grid.nodes().to_vec(),
                step_counts: grid.step_counts().map(|c| c.to_vec()).unwrap_or_default(),
                grid_warning: grid.warning().map(str::to_string),
                reference_value: reference,
                observable_norm: self.observable.bound_alpha(),
                initial_state: self.initial_state_label.clone(),
                shot_seed: self.config.shots.seed,
                shot_mode: self.config.shots.mode,
                noise_surrogate: self.config.shots.mode == ShotMode::Gaussian,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trial {
    pub seed: u64,
    pub rows: Vec<CurveRow>,
    pub result: ResultJson,
}

#[derive(Clone, Debug)]
pub struct GridRun {
    pub kind: GridKind,
    pub grid: StepGrid,
    pub noiseless: Vec<f64>,
    pub trials: Vec<Trial>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Derived {
    pub generator_bound: f64,
    pub generator_bound_unscaled: f64,
    pub evolution_time: f64,
    pub interval_hi: f64,
    pub interval_auto: bool,
    pub grid_kind: GridKind,
    pub nodes: Vec<f64>,
    pub step_counts: Vec<u64>,
    pub grid_warning: Option<String>,
    pub reference_value: Option<f64>,
    pub observable_norm: f64,
    pub initial_state: String,
    pub shot_seed: u64,
    pub shot_mode: ShotMode,
    /// True when shot noise is the Gaussian surrogate rather than Born sampling.
    pub noise_surrogate: bool,
}

/// Contents of meta.json. Loading it as a config reproduces the run.
#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub library_version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub derived: Derived,
}

pub fn curve_rows(
    grid: &StepGrid,
    estimates: &[ShotEstimate],
    noiseless: Option<&[f64]>,
    reference: Option<f64>,
) -> Vec<CurveRow> {
    let counts = grid.step_counts().unwrap_or(&[]);
    estimates
        .iter()
        .enumerate()
        .map(|(j, e)| CurveRow {
            node_index: j,
            tau: grid.nodes()[j],
            step_count: counts.get(j).copied().unwrap_or(0),
            n_shots: e.n_shots,
            mean: e.mean,
            seed: e.seed,
            noiseless: noiseless.map(|v| v[j]),
            reference,
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes curve.csv or curve.json into `dir`; returns the file path.
pub fn write_curve(dir: &Path, rows: &[CurveRow], format: Format) -> Result<std::path::PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = match format {
        Format::Csv => {
            let p = dir.join("curve.csv");
            let f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
            write_curve_csv(rows, std::io::BufWriter::new(f))?;
            p
        }
        Format::Json => {
            let p = dir.join("curve.json");
            write_json(&p, &rows)?;
            p
        }
    };
    Ok(path)
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let rows: Vec<CurveRow> = serde_json::from_reader(std::io::BufReader::new(f))
            .with_context(|| format!("parsing {}", path.display()))?;
        anyhow::ensure!(!rows.is_empty(), "curve file has no rows");
        Ok(rows)
    } else {
        Ok(read_curve_csv(std::io::BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))?)
    }
}

/// Extrapolates the `mean` column of a curve. The reference value is taken
/// from the `reference` column when every row carries the same one.
pub fn extrapolate_rows(rows: &[CurveRow], method: ExtrapolationMethod) -> Result<ResultJson> {
    let mut pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.tau, r.mean)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let hi = nodes.last().copied().unwrap_or(0.0);
    let grid = StepGrid::from_nodes(nodes, hi)?;
    let weights = ExtrapolationWeights::new(&grid, method)?;
    let reference = match rows.first().and_then(|r| r.reference) {
        Some(r) if rows.iter().all(|x| x.reference == Some(r)) => Some(r),
        _ => None,
    };
    Ok(extrapolate(&weights, &values)?.to_json_value(reference))
}

/// `curve`: node states, one sampled curve and meta.json.
pub fn cmd_curve(exp: &Experiment, out: &Path, format: Format) -> Result<(Vec<CurveRow>, Meta)> {
    let reference = exp.reference_value()?;
    let run = exp.run_grid(exp.config.grid.kind, &[exp.config.shots.seed], Some(reference))?;
    let trial = run.trials.into_iter().next().expect("one seed");
    write_curve(out, &trial.rows, format)?;
    let meta = exp.meta("curve", &run.grid, Some(reference));
    write_json(&out.join("meta.json"), &meta)?;
    Ok((trial.rows, meta))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub chebyshev_error: f64,
    pub equidistant_error: f64,
    pub chebyshev_better: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReproduceSummary {
    pub recipe: String,
    pub reference_value: f64,
    pub n_shots: u64,
    pub shot_mode: ShotMode,
    pub noise_surrogate: bool,
    pub chebyshev_gamma_l1: f64,
    pub equidistant_gamma_l1: f64,
    pub chebyshev_noiseless_error: f64,
    pub equidistant_noiseless_error: f64,
    pub trials: Vec<SeedComparison>,
    pub chebyshev_wins: usize,
}

fn noiseless_error(exp: &Experiment, run: &GridRun, reference: f64) -> Result<f64> {
    let w = ExtrapolationWeights::new(&run.grid, exp.config.method())?;
    Ok((extrapolate(&w, &run.noiseless)?.value_at_zero - reference).abs())
}

/// `reproduce`: runs the recipe on Chebyshev and equidistant grids for
/// `trials` consecutive shot seeds and writes both curves plus a summary.
pub fn cmd_reproduce(exp: &Experiment, recipe: &str, out: &Path, trials: usize, format: Format) -> Result<ReproduceSummary> {
    let reference = exp.reference_value()?;
    let base = exp.config.shots.seed;
    let seeds: Vec<u64> = (0..trials.max(1) as u64).map(|i| base.wrapping_add(i)).collect();
    let cheb = exp.run_grid(GridKind::Chebyshev, &seeds, Some(reference))?;
    let equi = exp.run_grid(GridKind::Equidistant, &seeds, Some(reference))?;
    for run in [&cheb, &equi] {
        let dir = out.join(run.kind.to_string());
        let first = &run.trials[0];
        write_curve(&dir, &first.rows, format)?;
        write_json(&dir.join("result.json"), &first.result)?;
        let mut sub = exp.clone();
        sub.config.grid.kind = run.kind;
        write_json(&dir.join("meta.json"), &sub.meta(&format!("reproduce {recipe}"), &run.grid, Some(reference)))?;
    }
    let comparisons: Vec<SeedComparison> = cheb
        .trials
        .iter()
        .zip(&equi.trials)
        .map(|(c, e)| {
            let ce = c.result.error.expect("reference present");
            let ee = e.result.error.expect("reference present");
            SeedComparison {
                seed: c.seed,
                chebyshev_error: ce,
                equidistant_error: ee,
                chebyshev_better: ce < ee,
            }
        })
        .collect();
    let summary = ReproduceSummary {
        recipe: recipe.to_string(),
        reference_value: reference,
        n_shots: exp.config.shots.n_shots.0,
        shot_mode: exp.config.shots.mode,
        noise_surrogate: exp.config.shots.mode == ShotMode::Gaussian,
        chebyshev_gamma_l1: cheb.trials[0].result.gamma_l1,
        equidistant_gamma_l1: equi.trials[0].result.gamma_l1,
        chebyshev_noiseless_error: noiseless_error(exp, &cheb, reference)?,
        equidistant_noiseless_error: noiseless_error(exp, &equi, reference)?,
        chebyshev_wins: comparisons.iter().filter(|c| c.chebyshev_better).count(),
        trials: comparisons,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
