//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::inference::{ks_test_normal, FittedModel};
use crate::io::{DataSettings, FitReport, ModelFile, RunConfig, TimeSeriesFrame};
use crate::sim::{builtin_dgp, simulate_replication};
use crate::smoothing::select_smoothness;
use crate::uncertainty::{effect_band, sample_posterior, transition_band, Band, PosteriorSampleSet, TransitionTarget};

#[derive(Debug, Parser)]
#[command(name = "msgamlss", version, about = "Markov-switching distributional regression with smooth effects")]
pub struct Cli {
    /// Increase log verbosity (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate data from the built-in two-state DGP.
    Simulate(SimulateArgs),
    /// Fit a model described by a TOML run configuration.
    Fit(FitArgs),
    /// Most probable state sequence.
    Decode(DataArgs),
    /// One-step-ahead pseudo-residuals and a normality test.
    Residuals(DataArgs),
    /// State-dependent parameter and quantile curves over a covariate.
    Effects(CurveArgs),
    /// Transition probabilities over a covariate.
    Transitions(CurveArgs),
    /// Stationary state probabilities over a covariate.
    Stationary(CurveArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Use the built-in two-state normal design (the only built-in).
    #[arg(long, required = true)]
    pub paper_dgp: bool,
    #[arg(long = "T", default_value_t = 4000)]
    pub length: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV, or a directory when `--replications` exceeds one.
    #[arg(long)]
    pub out: PathBuf,
    /// Added to the mean of state 2.
    #[arg(long)]
    pub mean_offset: Option<f64>,
    /// Skew-normal responses with this shape in both states.
    #[arg(long)]
    pub skew: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub replications: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub covariate: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Equispaced grid points over the fitted covariate range.
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// Add pointwise bands from posterior draws.
    #[arg(long)]
    pub bands: bool,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Conditional quantile levels (effects only), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Vec<f64>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Residuals(a) => residuals_cmd(a),
        Command::Effects(a) => effects_cmd(a),
        Command::Transitions(a) => transitions_cmd(a),
        Command::Stationary(a) => stationary_cmd(a),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let mut dgp = builtin_dgp().with_length(a.length).with_seed(a.seed);
    if let Some(offset) = a.mean_offset {
        dgp = dgp.with_mean_offset(offset);
    }
    if let Some(nu) = a.skew {
        dgp = dgp.with_skew(nu);
    }
    if a.replications == 0 {
        return Err(Error::Config("--replications must be at least 1".into()));
    }
    let write = |r: u64, path: &Path| -> Result<()> {
        let sim = simulate_replication(&dgp, r)?;
        let mut cols = indexmap::IndexMap::new();
        for name in sim.frame.column_names() {
            cols.insert(name.to_string(), sim.frame.column(name)?.to_vec());
        }
        cols.insert("state".to_string(), sim.states.iter().map(|s| (s + 1) as f64).collect());
        TimeSeriesFrame::new(sim.frame.response_name(), cols)?.write_csv(path)
    };
    if a.replications == 1 {
        create_parent(&a.out)?;
        write(0, &a.out)
    } else {
        fs::create_dir_all(&a.out)?;
        let width = a.replications.to_string().len();
        for r in 0..a.replications {
            write(r, &a.out.join(format!("rep_{:0width$}.csv", r + 1)))?;
        }
        Ok(())
    }
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let config = RunConfig::load(&a.config)?;
    let spec = config.model_spec()?;
    let frame = config.load_data()?;
    let mut optimizer = config.optimizer.clone();
    optimizer.seed = config.seed;
    let model = select_smoothness(&spec, &frame, &optimizer)?;
    let out = a.out.unwrap_or_else(|| config.output_dir());
    fs::create_dir_all(&out)?;
    let settings = DataSettings {
        response: config.response.clone(),
        lags: config.lag_directives()?,
        label: config.label.clone(),
    };
    FitReport::new(&model, frame.len()).save(&out.join("fit_report.json"))?;
    ModelFile::new(model.clone(), settings).save(&out.join("model.json"))?;
    println!(
        "log-likelihood {:.6}, {} outer iterations, converged: {}",
        model.log_likelihood, model.diagnostics.outer_iterations, model.diagnostics.converged
    );
    for w in &model.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    create_parent(path)?;
    Ok(csv::Writer::from_path(path)?)
}

fn label_header(frame: &TimeSeriesFrame) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    if let Some((name, _)) = frame.labels() {
        h.push(name.to_string());
    }
    h.push(frame.response_name().to_string());
    h
}

fn label_cells(frame: &TimeSeriesFrame, t: usize) -> Vec<String> {
    let mut row = vec![(t + 1).to_string()];
    if let Some((_, labels)) = frame.labels() {
        row.push(labels[t].clone());
    }
    row.push(frame.response()[t].to_string());
    row
}

fn decode_cmd(a: DataArgs) -> Result<()> {
    let file = ModelFile::load(&a.model)?;
    let frame = file.load_data(&a.data)?;
    let path = file.model.viterbi(&frame)?;
    let mut w = csv_writer(&a.out)?;
    let mut header = label_header(&frame);
    header.push("state".into());
    w.write_record(&header)?;
    for (t, s) in path.iter().enumerate() {
        let mut row = label_cells(&frame, t);
        row.push((s + 1).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn residuals_cmd(a: DataArgs) -> Result<()> {
    let file = ModelFile::load(&a.model)?;
    let frame = file.load_data(&a.data)?;
    let res = file.model.pseudo_residuals(&frame)?;
    let mut w = csv_writer(&a.out)?;
    let mut header = label_header(&frame);
    header.push("residual".into());
    w.write_record(&header)?;
    for (t, r) in res.residuals.iter().enumerate() {
        let mut row = label_cells(&frame, t);
        row.push(r.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    let ks = ks_test_normal(&res.residuals);
    let summary = serde_json::json!({
        "n": res.residuals.len(),
        "ks_statistic": ks.statistic,
        "ks_p_value": ks.p_value,
        "clamped": res.clamped,
    });
    fs::write(a.out.with_extension("ks.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("KS statistic {:.5}, p-value {:.4}, clamped {}", ks.statistic, ks.p_value, res.clamped);
    Ok(())
}

fn grid(model: &FittedModel, covariate: &str, size: usize) -> Result<Vec<f64>> {
    let s = model
        .structure
        .covariates
        .get(covariate)
        .ok_or_else(|| Error::Config(format!("model does not use covariate `{covariate}`")))?;
    if size < 2 {
        return Err(Error::Config("--grid-size must be at least 2".into()));
    }
    Ok((0..size)
        .map(|g| s.min + (s.max - s.min) * g as f64 / (size - 1) as f64)
        .collect())
}

fn samples(model: &FittedModel, a: &CurveArgs) -> Result<Option<PosteriorSampleSet>> {
    if a.bands {
        Ok(Some(sample_posterior(model, a.draws, a.seed)?))
    } else {
        Ok(None)
    }
}

fn write_band_rows(
    w: &mut csv::Writer<fs::File>,
    keys: &[String],
    grid: &[f64],
    estimate: &[f64],
    band: Option<&Band>,
) -> Result<()> {
    for (g, x) in grid.iter().enumerate() {
        let mut row = vec![x.to_string()];
        row.extend(keys.iter().cloned());
        row.push(estimate[g].to_string());
        match band {
            Some(b) => {
                row.push(b.lower[g].to_string());
                row.push(b.upper[g].to_string());
            }
            None => row.extend([String::new(), String::new()]),
        }
        w.write_record(&row)?;
    }
    Ok(())
}

fn effects_cmd(a: CurveArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?.model;
    let grid = grid(&model, &a.covariate, a.grid_size)?;
    let draws = samples(&model, &a)?;
    let curves = model.predict_parameters(&a.covariate, &grid)?;
    let mut w = csv_writer(&a.out)?;
    w.write_record([a.covariate.as_str(), "state", "quantity", "estimate", "lower", "upper"])?;
    for state in 0..model.n_states() {
        for (k, name) in curves.names.iter().enumerate() {
            let band = match &draws {
                Some(d) => Some(effect_band(&model, d, name, state, &a.covariate, &grid, a.level)?),
                None => None,
            };
            let keys = [(state + 1).to_string(), name.to_string()];
            write_band_rows(&mut w, &keys, &grid, &curves.values[state][k], band.as_ref())?;
        }
        if !a.quantiles.is_empty() {
            let q = model.quantile_curves(&a.covariate, &grid, &a.quantiles)?;
            for (pi, p) in a.quantiles.iter().enumerate() {
                let keys = [(state + 1).to_string(), format!("q{p}")];
                write_band_rows(&mut w, &keys, &grid, &q[state][pi], None)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn transitions_cmd(a: CurveArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?.model;
    let grid = grid(&model, &a.covariate, a.grid_size)?;
    let draws = samples(&model, &a)?;
    let tpms = model.tpm_curve(&a.covariate, &grid)?;
    let n = model.n_states();
    let mut w = csv_writer(&a.out)?;
    w.write_record([a.covariate.as_str(), "from", "to", "estimate", "lower", "upper"])?;
    let mut dropped = 0;
    for from in 0..n {
        for to in 0..n {
            let estimate: Vec<f64> = tpms.iter().map(|m| m.get(from, to)).collect();
            let band = match &draws {
                Some(d) => Some(transition_band(
                    &model,
                    d,
                    TransitionTarget::Pair { from, to },
                    &a.covariate,
                    &grid,
                    a.level,
                )?),
                None => None,
            };
            dropped += band.as_ref().map_or(0, |b| b.dropped.iter().sum::<usize>());
            let keys = [(from + 1).to_string(), (to + 1).to_string()];
            write_band_rows(&mut w, &keys, &grid, &estimate, band.as_ref())?;
        }
    }
    w.flush()?;
    if dropped > 0 {
        eprintln!("warning: {dropped} draw/grid-point values dropped");
    }
    Ok(())
}

fn stationary_cmd(a: CurveArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?.model;
    let grid = grid(&model, &a.covariate, a.grid_size)?;
    let draws = samples(&model, &a)?;
    let curve = model.stationary_curve(&a.covariate, &grid)?;
    let mut w = csv_writer(&a.out)?;
    w.write_record([a.covariate.as_str(), "state", "estimate", "lower", "upper"])?;
    let mut dropped = 0;
    for state in 0..model.n_states() {
        let estimate: Vec<f64> = curve.column(state).iter().copied().collect();
        let band = match &draws {
            Some(d) => Some(transition_band(
                &model,
                d,
                TransitionTarget::Stationary { state },
                &a.covariate,
                &grid,
                a.level,
            )?),
            None => None,
        };
        dropped += band.as_ref().map_or(0, |b| b.dropped.iter().sum::<usize>());
        write_band_rows(&mut w, &[(state + 1).to_string()], &grid, &estimate, band.as_ref())?;
    }
    w.flush()?;
    if dropped > 0 {
        eprintln!("warning: {dropped} draw/grid-point values dropped (non-ergodic t.p.m.)");
    }
    Ok(())
}
