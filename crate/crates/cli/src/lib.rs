//! Command implementations behind the `homeostat` binary.
//!
//! Each command reads and writes the file formats of `homeostat_core::io`,
//! prints a short human-readable summary to stdout, and returns the data a
//! caller needs to assert on the outcome. Exit-code mapping lives in the
//! binary: 0 success, 1 usage, 2 parse failure, 3 numerical failure.

use std::path::{Path, PathBuf};

use homeostat_core::discover::{self, Dataset};
use homeostat_core::energy;
use homeostat_core::io;
use homeostat_core::point::{self, LoadingProtocol};
use homeostat_core::verify;
use homeostat_core::Result;

/// Companion loss-history path for a weight document:
/// `weights.toml` becomes `weights_loss.csv` next to it.
pub fn loss_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "train".to_string());
    out.with_file_name(format!("{stem}_loss.csv"))
}

fn resolved_protocol(
    protocol: &LoadingProtocol,
    config: Option<&io::RunConfig>,
) -> Result<LoadingProtocol> {
    match config.and_then(|c| c.dt) {
        Some(dt) => io::resample_protocol(protocol, dt),
        None => Ok(protocol.clone()),
    }
}

/// Forward simulation: weight document + deformation history in, per-step
/// trajectory CSV out. Returns the number of rows written.
pub fn cmd_simulate(
    weights: &Path,
    data: &Path,
    config: Option<&Path>,
    out: &Path,
    eps: Option<f64>,
) -> Result<usize> {
    let (ew, pw) = io::read_weights_toml(weights)?;
    let experiment = io::read_experiment_csv(data)?;
    let run_config = config.map(io::read_run_config).transpose()?;
    let protocol = resolved_protocol(&experiment.protocol, run_config.as_ref())?;
    let eps = eps
        .or(run_config.as_ref().map(|c| c.train.eps))
        .unwrap_or(point::DEFAULT_EPS);
    let traj = point::simulate(&protocol, &ew, &pw, eps)?;
    io::write_trajectory_csv(out, &traj)?;
    let last = traj.steps.last().expect("protocol is non-empty");
    println!(
        "wrote {} ({} rows, final S11 {:.6}, phi {:.6})",
        out.display(),
        traj.times.len(),
        last.s_reported.a11,
        last.phi_hat_value
    );
    Ok(traj.times.len())
}

/// Weight discovery: experiment CSVs + run config in, weight document and
/// per-epoch loss CSV out. Returns the trained outcome for inspection.
pub fn cmd_train(
    data: &[PathBuf],
    config: &Path,
    out: &Path,
    seed: Option<u64>,
) -> Result<discover::TrainOutcome> {
    let run_config = io::read_run_config(config)?;
    let mut train_config = run_config.train.clone();
    if let Some(seed) = seed {
        train_config.seed = seed;
    }
    let mut experiments = Vec::with_capacity(data.len());
    for path in data {
        experiments.push(io::read_experiment_csv(path)?);
    }
    let dataset = Dataset { experiments };
    dataset.validate()?;
    let outcome = discover::train(&dataset, &train_config)?;
    io::write_weights_toml(out, &outcome.energy, &outcome.potential)?;
    let loss_path = loss_path_for(out);
    io::write_loss_csv(&loss_path, &outcome.report)?;
    let last = outcome.report.rows.last().expect("epochs >= 1");
    println!(
        "wrote {} and {} ({} epochs)",
        out.display(),
        loss_path.display(),
        outcome.report.rows.len()
    );
    println!(
        "final loss {:.6e} (data {:.6e}, penalty {:.6e})",
        last.total, last.data, last.penalty
    );
    match energy::moduli(&outcome.energy) {
        Ok(m) => println!(
            "moduli: kappa = {:.6}, mu = {:.6}, E = {:.6}, nu = {:.6}",
            m.kappa, m.mu, m.young, m.poisson
        ),
        Err(e) => println!("moduli: {e}"),
    }
    Ok(outcome)
}

/// Print the linearized moduli of a weight document.
pub fn cmd_moduli(weights: &Path) -> Result<energy::Moduli> {
    let (ew, _) = io::read_weights_toml(weights)?;
    let m = energy::moduli(&ew)?;
    println!(
        "kappa = {:.6}, mu = {:.6}, E = {:.6}, nu = {:.6}",
        m.kappa, m.mu, m.young, m.poisson
    );
    if m.mu == 0.0 {
        println!(
            "warning: shear modulus is zero; the linearized stiffness is \
             singular and implicit structural use is ill-posed"
        );
    }
    Ok(m)
}

/// Run the seeded invariant suite, print the report, optionally write it to
/// a file. Returns whether every check passed.
pub fn cmd_verify(seed: u64, out: Option<&Path>) -> Result<bool> {
    let report = verify::run_suite(seed);
    let text = report.render();
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text).map_err(|e| homeostat_core::Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    Ok(report.all_pass())
}
