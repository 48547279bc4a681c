//! File formats of the toolkit: experiment CSVs in, weight documents and run
//! configurations in TOML, trajectory and loss tables out.
//!
//! All floating-point values are serialized with 17 significant digits, so a
//! write-then-read round trip reproduces every double bit-exactly. Units are
//! fixed: hours for time, microN/mm^2 for stress.

use crate::discover::{
    Experiment, GradientMode, LossReport, LossRow, RegMode, TrainConfig,
};
use crate::energy::EnergyWeights;
use crate::error::{Error, Result};
use crate::point::{DirectionConstraint, LoadingProtocol, Trajectory};
use crate::potential::{ActivationMode, PotentialWeights};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::Path;

const EXPERIMENT_HEADER: [&str; 10] = [
    "time_h", "C11", "C22", "C33", "S11", "S22", "S33", "mask1", "mask2", "mask3",
];

const TRAJECTORY_HEADER: [&str; 8] = [
    "time_h",
    "S11_pred",
    "S22_pred",
    "S33_pred",
    "gamma_hat",
    "phi_hat",
    "newton_iters",
    "det_Cg",
];

const LOSS_HEADER: [&str; 4] = ["epoch", "total", "data", "penalty"];

/// 17 significant digits: lossless decimal round trip for every f64.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => parse_err(path, line, format!("{other:?}")),
    }
}

fn toml_err(path: &Path, text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    parse_err(path, line, e.message().to_string())
}

fn parse_f64(path: &Path, line: usize, name: &str, field: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        parse_err(
            path,
            line,
            format!("{name}: cannot parse '{field}' as a number"),
        )
    })
}

fn parse_mask_char(path: &Path, line: usize, name: &str, field: &str) -> Result<DirectionConstraint> {
    match field {
        "M" => Ok(DirectionConstraint::Measured),
        "Z" => Ok(DirectionConstraint::ZeroStress),
        other => Err(parse_err(
            path,
            line,
            format!("{name}: mask must be M or Z (got '{other}')"),
        )),
    }
}

fn mask_char(c: DirectionConstraint) -> &'static str {
    match c {
        DirectionConstraint::Measured => "M",
        DirectionConstraint::ZeroStress => "Z",
    }
}

/// Read one experiment file. The mask columns must be constant over the
/// file; stress entries in zero-stress directions are ignored (and may be
/// left empty). Errors carry the 1-based line number of the offending row.
pub fn read_experiment_csv(path: impl AsRef<Path>) -> Result<Experiment> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;

    let headers = rdr.headers().map_err(|e| csv_err(path, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != EXPERIMENT_HEADER {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, got {:?}", EXPERIMENT_HEADER, got),
        ));
    }

    let mut times = Vec::new();
    let mut c_rows = Vec::new();
    let mut measured = Vec::new();
    let mut mask: Option<[DirectionConstraint; 3]> = None;

    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != EXPERIMENT_HEADER.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, got {}", EXPERIMENT_HEADER.len(), record.len()),
            ));
        }
        let field = |i: usize| record.get(i).unwrap_or("");

        let row_mask = [
            parse_mask_char(path, line, "mask1", field(7))?,
            parse_mask_char(path, line, "mask2", field(8))?,
            parse_mask_char(path, line, "mask3", field(9))?,
        ];
        match mask {
            None => {
                if !row_mask.contains(&DirectionConstraint::Measured) {
                    return Err(parse_err(
                        path,
                        line,
                        "at least one direction must be measured",
                    ));
                }
                mask = Some(row_mask);
            }
            Some(m) if m != row_mask => {
                return Err(parse_err(
                    path,
                    line,
                    "mask columns must be constant over the file",
                ));
            }
            _ => {}
        }
        let m = mask.unwrap();

        let t = parse_f64(path, line, "time_h", field(0))?;
        if !t.is_finite() {
            return Err(parse_err(path, line, "time_h must be finite"));
        }
        if let Some(prev) = times.last() {
            if t <= *prev {
                return Err(parse_err(
                    path,
                    line,
                    format!("times must increase strictly ({prev} then {t})"),
                ));
            }
        }

        let mut c = [0.0; 3];
        for d in 0..3 {
            let name = EXPERIMENT_HEADER[1 + d];
            c[d] = parse_f64(path, line, name, field(1 + d))?;
            if !(c[d].is_finite() && c[d] > 0.0) {
                return Err(parse_err(
                    path,
                    line,
                    format!("{name} must be positive and finite (got {})", c[d]),
                ));
            }
        }

        let mut s = [0.0; 3];
        for d in 0..3 {
            let name = EXPERIMENT_HEADER[4 + d];
            let raw = field(4 + d);
            if m[d] == DirectionConstraint::Measured {
                s[d] = parse_f64(path, line, name, raw)?;
                if !s[d].is_finite() {
                    return Err(parse_err(path, line, format!("{name} must be finite")));
                }
            } else if !raw.is_empty() {
                // Ignored value, but it still has to be a number.
                parse_f64(path, line, name, raw)?;
            }
        }

        times.push(t);
        c_rows.push(c);
        measured.push(s);
    }

    let Some(mask) = mask else {
        return Err(parse_err(path, 1, "file contains no data rows"));
    };
    let protocol = LoadingProtocol::new(times, c_rows, mask)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok(Experiment { protocol, measured })
}

/// Write an experiment in the same format [`read_experiment_csv`] accepts.
pub fn write_experiment_csv(path: impl AsRef<Path>, ex: &Experiment) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    wtr.write_record(EXPERIMENT_HEADER)
        .map_err(|e| csv_err(path, e))?;
    let p = &ex.protocol;
    for n in 0..p.len() {
        let c = p.c_rows[n];
        let s = ex.measured[n];
        let rec = [
            fmt_f64(p.times[n]),
            fmt_f64(c[0]),
            fmt_f64(c[1]),
            fmt_f64(c[2]),
            fmt_f64(s[0]),
            fmt_f64(s[1]),
            fmt_f64(s[2]),
            mask_char(p.mask[0]).to_string(),
            mask_char(p.mask[1]).to_string(),
            mask_char(p.mask[2]).to_string(),
        ];
        wtr.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsRaw {
    w01: f64,
    w02: f64,
    w11: f64,
    w12: f64,
    ws1: f64,
    ws2: f64,
    ws3: f64,
    ws4: f64,
    wt1: f64,
    wt2: f64,
    wt3: f64,
    wt4: f64,
    weta: f64,
    activation_mode: Option<String>,
}

fn parse_activation(path: &Path, s: &str) -> Result<ActivationMode> {
    match s {
        "NEG_MAX" => Ok(ActivationMode::NegMax),
        "ABS" => Ok(ActivationMode::Abs),
        other => Err(parse_err(
            path,
            0,
            format!("activation_mode must be NEG_MAX or ABS (got '{other}')"),
        )),
    }
}

fn activation_name(mode: ActivationMode) -> &'static str {
    match mode {
        ActivationMode::NegMax => "NEG_MAX",
        ActivationMode::Abs => "ABS",
    }
}

/// Read a weight document. All thirteen weight keys are required;
/// `activation_mode` defaults to NEG_MAX.
pub fn read_weights_toml(
    path: impl AsRef<Path>,
) -> Result<(EnergyWeights<f64>, PotentialWeights<f64>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let raw: WeightsRaw = toml::from_str(&text).map_err(|e| toml_err(path, &text, e))?;
    let mode = match &raw.activation_mode {
        Some(s) => parse_activation(path, s)?,
        None => ActivationMode::NegMax,
    };
    let ew = EnergyWeights {
        w01: raw.w01,
        w02: raw.w02,
        w11: raw.w11,
        w12: raw.w12,
    };
    let pw = PotentialWeights {
        ws1: raw.ws1,
        ws2: raw.ws2,
        ws3: raw.ws3,
        ws4: raw.ws4,
        wt1: raw.wt1,
        wt2: raw.wt2,
        wt3: raw.wt3,
        wt4: raw.wt4,
        weta: raw.weta,
        mode,
    };
    ew.validate().map_err(|e| parse_err(path, 0, e.to_string()))?;
    pw.validate().map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok((ew, pw))
}

/// Write a weight document with a stable key order.
pub fn write_weights_toml(
    path: impl AsRef<Path>,
    ew: &EnergyWeights<f64>,
    pw: &PotentialWeights<f64>,
) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    let _ = writeln!(text, "activation_mode = \"{}\"", activation_name(pw.mode));
    let pairs = [
        ("w01", ew.w01),
        ("w02", ew.w02),
        ("w11", ew.w11),
        ("w12", ew.w12),
        ("ws1", pw.ws1),
        ("ws2", pw.ws2),
        ("ws3", pw.ws3),
        ("ws4", pw.ws4),
        ("wt1", pw.wt1),
        ("wt2", pw.wt2),
        ("wt3", pw.wt3),
        ("wt4", pw.wt4),
        ("weta", pw.weta),
    ];
    for (name, value) in pairs {
        let _ = writeln!(text, "{name} = {}", fmt_f64(value));
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigRaw {
    epochs: usize,
    learning_rate: Option<f64>,
    reg_mode: String,
    reg_strength: Option<f64>,
    eta_reg: Option<f64>,
    seed: Option<u64>,
    eps: Option<f64>,
    gradient_mode: Option<String>,
    dt: Option<f64>,
    activation_mode: Option<String>,
}

/// Parsed run configuration: training hyperparameters plus the forward-run
/// grid policy (`dt` set: resample stepped protocols to that uniform grid;
/// unset: use the data grid as-is).
#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub dt: Option<f64>,
}

/// Read a run configuration. Unknown keys are rejected; omitted optional
/// keys take the canonical defaults (learning_rate 0.001, the mode's
/// canonical penalty strength, eta_reg 0.001, seed 0, eps 1e-8, FORWARD_AD,
/// NEG_MAX).
pub fn read_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let raw: RunConfigRaw = toml::from_str(&text).map_err(|e| toml_err(path, &text, e))?;

    let reg_mode = match raw.reg_mode.as_str() {
        "L1" => RegMode::L1,
        "L2" => RegMode::L2,
        "NONE" => RegMode::None,
        other => {
            return Err(parse_err(
                path,
                0,
                format!("reg_mode must be L1, L2 or NONE (got '{other}')"),
            ))
        }
    };
    let gradient_mode = match raw.gradient_mode.as_deref() {
        None | Some("FORWARD_AD") => GradientMode::ForwardAd,
        Some("FINITE_DIFF") => GradientMode::FiniteDiff,
        Some(other) => {
            return Err(parse_err(
                path,
                0,
                format!("gradient_mode must be FORWARD_AD or FINITE_DIFF (got '{other}')"),
            ))
        }
    };
    let activation_mode = match &raw.activation_mode {
        Some(s) => parse_activation(path, s)?,
        None => ActivationMode::NegMax,
    };

    let mut train = TrainConfig::with_reg(reg_mode, raw.epochs);
    if let Some(lr) = raw.learning_rate {
        train.learning_rate = lr;
    }
    if let Some(s) = raw.reg_strength {
        train.reg_strength = s;
    }
    if let Some(s) = raw.eta_reg {
        train.eta_reg = s;
    }
    if let Some(s) = raw.seed {
        train.seed = s;
    }
    if let Some(e) = raw.eps {
        train.eps = e;
    }
    train.gradient_mode = gradient_mode;
    train.activation_mode = activation_mode;
    train
        .validate()
        .map_err(|e| parse_err(path, 0, e.to_string()))?;

    if let Some(dt) = raw.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(parse_err(path, 0, "dt must be positive and finite"));
        }
    }
    Ok(RunConfig {
        train,
        dt: raw.dt,
    })
}

/// One row of a simulate-output table.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryRow {
    pub time_h: f64,
    pub s_pred: [f64; 3],
    pub gamma_hat: f64,
    pub phi_hat: f64,
    pub newton_iters: usize,
    pub det_cg: f64,
}

pub fn trajectory_rows(traj: &Trajectory) -> Vec<TrajectoryRow> {
    (0..traj.times.len())
        .map(|n| {
            let st = &traj.steps[n];
            TrajectoryRow {
                time_h: traj.times[n],
                s_pred: [st.s_reported.a11, st.s_reported.a22, st.s_reported.a33],
                gamma_hat: st.gamma_hat,
                phi_hat: st.phi_hat_value,
                newton_iters: st.newton_iters,
                det_cg: traj.states[n].cg.det(),
            }
        })
        .collect()
}

pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    wtr.write_record(TRAJECTORY_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for row in trajectory_rows(traj) {
        let rec = [
            fmt_f64(row.time_h),
            fmt_f64(row.s_pred[0]),
            fmt_f64(row.s_pred[1]),
            fmt_f64(row.s_pred[2]),
            fmt_f64(row.gamma_hat),
            fmt_f64(row.phi_hat),
            row.newton_iters.to_string(),
            fmt_f64(row.det_cg),
        ];
        wtr.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRow>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != TRAJECTORY_HEADER {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, got {:?}", TRAJECTORY_HEADER, got),
        ));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != TRAJECTORY_HEADER.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, got {}", TRAJECTORY_HEADER.len(), record.len()),
            ));
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let newton_iters = field(6).parse::<usize>().map_err(|_| {
            parse_err(
                path,
                line,
                format!("newton_iters: cannot parse '{}' as an integer", field(6)),
            )
        })?;
        rows.push(TrajectoryRow {
            time_h: parse_f64(path, line, "time_h", field(0))?,
            s_pred: [
                parse_f64(path, line, "S11_pred", field(1))?,
                parse_f64(path, line, "S22_pred", field(2))?,
                parse_f64(path, line, "S33_pred", field(3))?,
            ],
            gamma_hat: parse_f64(path, line, "gamma_hat", field(4))?,
            phi_hat: parse_f64(path, line, "phi_hat", field(5))?,
            newton_iters,
            det_cg: parse_f64(path, line, "det_Cg", field(7))?,
        });
    }
    Ok(rows)
}

pub fn write_loss_csv(path: impl AsRef<Path>, report: &LossReport) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    wtr.write_record(LOSS_HEADER).map_err(|e| csv_err(path, e))?;
    for row in &report.rows {
        let rec = [
            row.epoch.to_string(),
            fmt_f64(row.total),
            fmt_f64(row.data),
            fmt_f64(row.penalty),
        ];
        wtr.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_loss_csv(path: impl AsRef<Path>) -> Result<Vec<LossRow>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != LOSS_HEADER {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, got {:?}", LOSS_HEADER, got),
        ));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let epoch = field(0).parse::<usize>().map_err(|_| {
            parse_err(
                path,
                line,
                format!("epoch: cannot parse '{}' as an integer", field(0)),
            )
        })?;
        rows.push(LossRow {
            epoch,
            total: parse_f64(path, line, "total", field(1))?,
            data: parse_f64(path, line, "data", field(2))?,
            penalty: parse_f64(path, line, "penalty", field(3))?,
        });
    }
    Ok(rows)
}

/// Resample a protocol to a uniform grid with spacing `dt`. Each resampled
/// row takes the latest original row at or before its time (piecewise
/// constant carry-forward), so original values are reproduced wherever the
/// grids coincide. The grid span must be a multiple of dt.
pub fn resample_protocol(p: &LoadingProtocol, dt: f64) -> Result<LoadingProtocol> {
    p.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput("dt must be positive and finite".to_string()));
    }
    let t0 = p.times[0];
    let span = *p.times.last().unwrap() - t0;
    let n = (span / dt).round() as usize;
    if n == 0 || ((n as f64) * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "grid span {span} is not a positive multiple of dt = {dt}"
        )));
    }
    let mut times = Vec::with_capacity(n + 1);
    let mut c_rows = Vec::with_capacity(n + 1);
    let mut j = 0usize;
    for i in 0..=n {
        let t = t0 + i as f64 * dt;
        while j + 1 < p.len() && p.times[j + 1] <= t + 1e-9 * t.abs().max(1.0) {
            j += 1;
        }
        times.push(t);
        c_rows.push(p.c_rows[j]);
    }
    LoadingProtocol::new(times, c_rows, p.mask)
}
