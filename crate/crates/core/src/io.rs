//! CSV readers and writers, the flat key-value configuration file, run
//! manifests and curve emission.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the in-memory values bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::budding::{budded_prob, BuddingDataset, BuddingRecord};
use crate::comparison::{ComparisonTable, DEFAULT_IMPORTANCE_DRAWS, DEFAULT_RMSE_DRAWS};
use crate::error::{CloccsError, Result};
use crate::flow::{FlowDataset, FlowEvaluator, FlowRecord, CHANNELS};
use crate::inference::{quantile, Blocking, Chain, CloccsModel, PosteriorSummary, SamplerConfig, SummaryRow};
use crate::population::ModelConfig;
use crate::prior::{PriorSpec, SubmodelSpec};
use crate::simulation::SimulateSettings;

fn data_err(path: &Path, line: usize, message: impl Into<String>) -> CloccsError {
    CloccsError::Data {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(CloccsError::from)
}

/// Data lines of a CSV file as `(line number, fields)`, skipping blank lines.
fn csv_rows(path: &Path, text: &str) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(data_err(path, 1, "missing header"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            data_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, column: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| data_err(path, line, format!("column {column}: cannot parse `{v}`")))
}

pub const BUDDING_HEADER: [&str; 3] = ["time_min", "budded", "total"];

/// Reads `time_min,budded,total`; rows may come in any order.
pub fn parse_budding_csv(path: &Path) -> Result<BuddingDataset> {
    let text = read_text(path)?;
    let (header, rows) = csv_rows(path, &text)?;
    if header != BUDDING_HEADER {
        return Err(data_err(
            path,
            1,
            format!("expected header {}", BUDDING_HEADER.join(",")),
        ));
    }
    let mut records = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        if f.len() != 3 {
            return Err(data_err(path, line, format!("expected 3 fields, got {}", f.len())));
        }
        let t: f64 = parse_field(path, line, "time_min", &f[0])?;
        let b: u64 = parse_field(path, line, "budded", &f[1])?;
        let n: u64 = parse_field(path, line, "total", &f[2])?;
        records.push(BuddingRecord::new(t, b, n).map_err(|e| data_err(path, line, e.to_string()))?);
    }
    BuddingDataset::from_unsorted(records).map_err(|e| CloccsError::Validation(format!("{}: {e}", path.display())))
}

pub fn write_budding_csv(path: &Path, data: &BuddingDataset) -> Result<()> {
    let mut s = BUDDING_HEADER.join(",");
    s.push('\n');
    for r in data.records() {
        let _ = writeln!(s, "{},{},{}", r.time(), r.budded, r.total);
    }
    write_file(path, &s)
}

fn flow_header() -> Vec<String> {
    std::iter::once("time_min".to_string())
        .chain((1..=CHANNELS).map(|k| format!("ch{k:04}")))
        .collect()
}

/// Reads the wide `time_min,ch0001..ch1024` table. Absent time points are
/// simply absent.
pub fn parse_flow_table(path: &Path) -> Result<FlowDataset> {
    let text = read_text(path)?;
    let (header, rows) = csv_rows(path, &text)?;
    if header != flow_header() {
        return Err(data_err(
            path,
            1,
            format!(
                "expected time_min followed by ch0001..ch{CHANNELS:04} ({} columns), got {} columns",
                CHANNELS + 1,
                header.len()
            ),
        ));
    }
    let mut records = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        if f.len() != CHANNELS + 1 {
            return Err(data_err(
                path,
                line,
                format!("expected {} fields, got {}", CHANNELS + 1, f.len()),
            ));
        }
        let t: f64 = parse_field(path, line, "time_min", &f[0])?;
        let counts = f[1..]
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let col = format!("ch{:04}", i + 1);
                if v.starts_with('-') {
                    return Err(data_err(path, line, format!("column {col}: negative count `{v}`")));
                }
                parse_field::<u64>(path, line, &col, v)
            })
            .collect::<Result<Vec<u64>>>()?;
        records.push(FlowRecord::new(t, counts).map_err(|e| data_err(path, line, e.to_string()))?);
    }
    records.sort_by(|a, b| a.time().total_cmp(&b.time()));
    FlowDataset::new(records).map_err(|e| CloccsError::Validation(format!("{}: {e}", path.display())))
}

pub fn write_flow_table(path: &Path, data: &FlowDataset) -> Result<()> {
    let mut s = flow_header().join(",");
    s.push('\n');
    for r in data.records() {
        let _ = write!(s, "{}", r.time());
        for c in r.counts() {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
    }
    write_file(path, &s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// `draw,log_posterior,<parameters...>`, one row per saved draw.
pub fn write_chain_csv(path: &Path, chain: &Chain) -> Result<()> {
    let mut s = String::from("draw,log_posterior");
    for n in &chain.names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (i, (d, lp)) in chain.draws.iter().zip(&chain.log_posterior).enumerate() {
        let _ = write!(s, "{i},{lp}");
        for v in d {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    write_file(path, &s)
}

/// Reads a chain written by [`write_chain_csv`]. Acceptance rates and the
/// seed are not stored in the file.
pub fn read_chain_csv(path: &Path) -> Result<Chain> {
    let text = read_text(path)?;
    let (header, rows) = csv_rows(path, &text)?;
    if header.len() < 3 || header[0] != "draw" || header[1] != "log_posterior" {
        return Err(data_err(path, 1, "expected header draw,log_posterior,<parameters>"));
    }
    let names: Vec<String> = header[2..].to_vec();
    let mut draws = Vec::with_capacity(rows.len());
    let mut log_posterior = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        if f.len() != header.len() {
            return Err(data_err(
                path,
                line,
                format!("expected {} fields, got {}", header.len(), f.len()),
            ));
        }
        log_posterior.push(parse_field(path, line, "log_posterior", &f[1])?);
        draws.push(
            f[2..]
                .iter()
                .zip(&names)
                .map(|(v, n)| parse_field(path, line, n, v))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(Chain {
        names,
        draws,
        log_posterior,
        acceptance: Vec::new(),
        seed: 0,
    })
}

pub fn write_summary_csv(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    let mut s = String::from("parameter,mean,lower,upper\n");
    for r in &summary.rows {
        let _ = writeln!(s, "{},{},{},{}", r.parameter, r.mean, r.lower, r.upper);
    }
    write_file(path, &s)
}

pub fn read_summary_csv(path: &Path) -> Result<PosteriorSummary> {
    let text = read_text(path)?;
    let (header, rows) = csv_rows(path, &text)?;
    if header != ["parameter", "mean", "lower", "upper"] {
        return Err(data_err(path, 1, "expected header parameter,mean,lower,upper"));
    }
    let rows = rows
        .into_iter()
        .map(|(line, f)| {
            if f.len() != 4 {
                return Err(data_err(path, line, format!("expected 4 fields, got {}", f.len())));
            }
            Ok(SummaryRow {
                parameter: f[0].clone(),
                mean: parse_field(path, line, "mean", &f[1])?,
                lower: parse_field(path, line, "lower", &f[2])?,
                upper: parse_field(path, line, "upper", &f[3])?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PosteriorSummary { rows })
}

/// Per-block acceptance rates and per-parameter effective sample sizes.
pub fn write_diagnostics_csv(path: &Path, chain: &Chain) -> Result<()> {
    let mut s = String::from("kind,name,value\n");
    for a in &chain.acceptance {
        let _ = writeln!(s, "acceptance,{},{}", a.label, a.rate);
    }
    for (j, n) in chain.names.iter().enumerate() {
        let _ = writeln!(
            s,
            "ess,{n},{}",
            crate::inference::effective_sample_size(&chain.column(j))
        );
    }
    write_file(path, &s)
}

/// Table-2-shaped output: one column per submodel (the larger model), one
/// row per submodel (the smaller model), entries are lBFs where the column
/// model nests the row model. Trailing rows carry RMSE and the
/// importance-sampling diagnostics.
pub fn write_comparison_csv(path: &Path, table: &ComparisonTable) -> Result<()> {
    let labels: Vec<String> = table.models.iter().map(|m| m.submodel.label()).collect();
    let mut s = String::from("submodel");
    for l in &labels {
        let _ = write!(s, ",{l}");
    }
    s.push('\n');
    for (row, label) in labels.iter().enumerate() {
        s.push_str(label);
        for col in 0..labels.len() {
            s.push(',');
            if let Some((v, _)) = table.lbf(col, row) {
                let _ = write!(s, "{v:.4}");
            }
        }
        s.push('\n');
    }
    let stat_rows: [(&str, fn(&crate::comparison::ModelResult) -> String); 6] = [
        ("E(RMSE)", |m| format!("{:.4}", m.rmse_mean)),
        ("SD(RMSE)", |m| format!("{:.4}", m.rmse_sd)),
        ("log_ml", |m| format!("{:.4}", m.estimate.log_ml)),
        ("mc_se", |m| format!("{:.4}", m.estimate.mc_se)),
        ("weight_variance", |m| format!("{:.4}", m.estimate.weight_variance)),
        ("ess", |m| format!("{:.1}", m.estimate.ess)),
    ];
    for (name, f) in stat_rows {
        s.push_str(name);
        for m in &table.models {
            let _ = write!(s, ",{}", f(m));
        }
        s.push('\n');
    }
    write_file(path, &s)
}

/// Writes `key = value` lines in the given order.
pub fn write_manifest(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut s = String::new();
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    write_file(path, &s)
}

/// Reads a flat `key = value` file; `#` starts a comment.
pub fn parse_key_values(path: &Path, text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| data_err(path, i + 1, format!("expected `key = value`, got `{line}`")))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(data_err(path, i + 1, "empty key"));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(data_err(path, i + 1, format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

/// Everything a command needs besides its data paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    pub prior: PriorSpec,
    pub submodel: SubmodelSpec,
    /// Start chains from a searched mode rather than a prior draw.
    pub search_start: bool,
    pub importance_draws: usize,
    pub rmse_draws: usize,
    pub simulate: SimulateSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            sampler: SamplerConfig::default(),
            prior: PriorSpec::default(),
            submodel: SubmodelSpec::FULL,
            search_start: true,
            importance_draws: DEFAULT_IMPORTANCE_DRAWS,
            rmse_draws: DEFAULT_RMSE_DRAWS,
            simulate: SimulateSettings::default(),
        }
    }
}

macro_rules! config_keys {
    ($cfg:ident, $($key:literal => $field:expr),* $(,)?) => {
        fn keyed_fields($cfg: &mut RunConfig) -> Vec<(&'static str, &mut f64)> {
            vec![$(($key, &mut $field)),*]
        }
    };
}

config_keys!(c,
    "prior.lambda_mean" => c.prior.lambda_mean,
    "prior.lambda_sd" => c.prior.lambda_sd,
    "prior.mu0_mean" => c.prior.mu0_mean,
    "prior.delta_mean" => c.prior.delta_mean,
    "prior.sigma0.shape" => c.prior.sigma0.shape,
    "prior.sigma0.scale" => c.prior.sigma0.scale,
    "prior.sigmav.shape" => c.prior.sigmav.shape,
    "prior.sigmav.scale" => c.prior.sigmav.scale,
    "prior.beta.a" => c.prior.beta.a,
    "prior.beta.b" => c.prior.beta.b,
    "prior.gamma1.a" => c.prior.gamma1.a,
    "prior.gamma1.b" => c.prior.gamma1.b,
    "prior.gamma2.a" => c.prior.gamma2.a,
    "prior.gamma2.b" => c.prior.gamma2.b,
    "prior.tau.eta" => c.prior.tau.eta,
    "prior.tau.kappa" => c.prior.tau.kappa,
    "prior.tau.nu" => c.prior.tau.nu,
    "prior.tau.gamma_sq" => c.prior.tau.gamma_sq,
    "prior.alpha1.eta" => c.prior.alpha1.eta,
    "prior.alpha1.kappa" => c.prior.alpha1.kappa,
    "prior.alpha1.nu" => c.prior.alpha1.nu,
    "prior.alpha1.gamma_sq" => c.prior.alpha1.gamma_sq,
    "prior.alpha2.eta" => c.prior.alpha2.eta,
    "prior.alpha2.kappa" => c.prior.alpha2.kappa,
    "prior.alpha2.nu" => c.prior.alpha2.nu,
    "prior.alpha2.gamma_sq" => c.prior.alpha2.gamma_sq,
    "sampler.accept_low" => c.sampler.accept_low,
    "sampler.accept_high" => c.sampler.accept_high,
    "simulate.mu0" => c.simulate.mu0,
    "simulate.sigma0" => c.simulate.sigma0,
    "simulate.sigmav" => c.simulate.sigmav,
    "simulate.lambda" => c.simulate.lambda,
    "simulate.delta" => c.simulate.delta,
    "simulate.beta" => c.simulate.beta,
    "simulate.gamma1" => c.simulate.gamma1,
    "simulate.gamma2" => c.simulate.gamma2,
    "simulate.mu_tau" => c.simulate.hyper.mu_tau,
    "simulate.sigma2_tau" => c.simulate.hyper.sigma2_tau,
    "simulate.mu_alpha1" => c.simulate.hyper.mu_a1,
    "simulate.sigma2_alpha1" => c.simulate.hyper.sigma2_a1,
    "simulate.mu_alpha2" => c.simulate.hyper.mu_a2,
    "simulate.sigma2_alpha2" => c.simulate.hyper.sigma2_a2,
    "simulate.grid_start" => c.simulate.grid_start,
    "simulate.grid_step" => c.simulate.grid_step,
);

impl RunConfig {
    /// Defaults overridden by the entries of a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let map = parse_key_values(path, &text)?;
        Self::from_map(&map).map_err(|e| match e {
            CloccsError::Config(m) => CloccsError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        let bad = |k: &str, v: &str| CloccsError::Config(format!("invalid value `{v}` for {k}"));
        for (k, v) in map {
            let int = || v.parse::<u64>().map_err(|_| bad(k, v));
            match k.as_str() {
                "model.max_instance" => cfg.model.max_instance = int()? as u32,
                "model.cycles" => cfg.model.cycles = int()? as u32,
                "sampler.iterations" => cfg.sampler.iterations = int()? as usize,
                "sampler.thin" => cfg.sampler.thin = int()? as usize,
                "sampler.burn_in" => cfg.sampler.burn_in = int()? as usize,
                "sampler.seed" => cfg.sampler.seed = int()?,
                "sampler.adapt_window" => cfg.sampler.adapt_window = int()? as usize,
                "sampler.blocking" => {
                    cfg.sampler.blocking = match v.as_str() {
                        "grouped" => Blocking::Grouped,
                        "single-site" => Blocking::SingleSite,
                        _ => return Err(bad(k, v)),
                    }
                }
                "sampler.start" => {
                    cfg.search_start = match v.as_str() {
                        "search" => true,
                        "prior" => false,
                        _ => return Err(bad(k, v)),
                    }
                }
                "submodel.fix" => {
                    let names: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                    cfg.submodel = SubmodelSpec::from_fixed(&names)?;
                }
                "compare.importance_draws" => cfg.importance_draws = int()? as usize,
                "compare.rmse_draws" => cfg.rmse_draws = int()? as usize,
                "simulate.grid_points" => cfg.simulate.grid_points = int()? as usize,
                "simulate.budding_cells" => cfg.simulate.budding_cells = int()?,
                "simulate.flow_cells" => cfg.simulate.flow_cells = int()?,
                other => {
                    let mut fields = keyed_fields(&mut cfg);
                    let slot = fields
                        .iter_mut()
                        .find(|(name, _)| *name == other)
                        .ok_or_else(|| CloccsError::Config(format!("unknown key `{other}`")))?;
                    *slot.1 = v.parse::<f64>().map_err(|_| bad(k, v))?;
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ModelConfig::new(self.model.max_instance, self.model.cycles).map_err(|e| CloccsError::Config(e.to_string()))?;
        self.sampler.validate()?;
        self.prior.validate()?;
        if self.importance_draws < 2 || self.rmse_draws == 0 {
            return Err(CloccsError::Config(
                "compare needs importance_draws >= 2 and rmse_draws >= 1".into(),
            ));
        }
        if self.simulate.grid_points == 0 || !(self.simulate.grid_step > 0.0) {
            return Err(CloccsError::Config(
                "simulate grid needs points >= 1 and a positive step".into(),
            ));
        }
        Ok(())
    }

    /// Every resolved setting as `key = value` pairs, for manifests.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut c = self.clone();
        let mut out: Vec<(String, String)> = vec![
            ("model.max_instance".into(), c.model.max_instance.to_string()),
            ("model.cycles".into(), c.model.cycles.to_string()),
            ("sampler.iterations".into(), c.sampler.iterations.to_string()),
            ("sampler.thin".into(), c.sampler.thin.to_string()),
            ("sampler.burn_in".into(), c.sampler.burn_in.to_string()),
            ("sampler.seed".into(), c.sampler.seed.to_string()),
            ("sampler.adapt_window".into(), c.sampler.adapt_window.to_string()),
            (
                "sampler.blocking".into(),
                match c.sampler.blocking {
                    Blocking::Grouped => "grouped",
                    Blocking::SingleSite => "single-site",
                }
                .into(),
            ),
            (
                "sampler.start".into(),
                if c.search_start { "search" } else { "prior" }.into(),
            ),
            ("submodel.fix".into(), fixed_list(c.submodel)),
            ("compare.importance_draws".into(), c.importance_draws.to_string()),
            ("compare.rmse_draws".into(), c.rmse_draws.to_string()),
            ("simulate.grid_points".into(), c.simulate.grid_points.to_string()),
            ("simulate.budding_cells".into(), c.simulate.budding_cells.to_string()),
            ("simulate.flow_cells".into(), c.simulate.flow_cells.to_string()),
        ];
        for (k, v) in keyed_fields(&mut c) {
            out.push((k.to_string(), v.to_string()));
        }
        out
    }
}

fn fixed_list(s: SubmodelSpec) -> String {
    [(s.fix_mu0, "mu0"), (s.fix_delta, "delta"), (s.fix_sigma0, "sigma0")]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect::<Vec<_>>()
        .join(",")
}

/// Pointwise posterior mean and equal-tailed 95% band of the budded
/// fraction, with the observed fraction where the grid hits a data time.
pub fn write_budding_curve_csv(
    path: &Path,
    model: &CloccsModel,
    chain: &Chain,
    grid: &[f64],
    max_draws: usize,
) -> Result<()> {
    let picks = pick_draws(chain, max_draws)?;
    let params: Vec<_> = picks.iter().map(|v| model.decode(v)).collect();
    let Some(_) = params[0].beta else {
        return Err(CloccsError::Validation("the chain has no beta column".into()));
    };
    let observed: BTreeMap<u64, f64> = model
        .budding()
        .map(|d| d.records().iter().map(|r| (r.time().to_bits(), r.fraction())).collect())
        .unwrap_or_default();
    let mut s = String::from("time_min,mean,lower,upper,observed\n");
    for &t in grid {
        let mut vals: Vec<f64> = params
            .iter()
            .map(|p| budded_prob(&p.theta, p.beta.unwrap_or(0.0), t, model.config()))
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.sort_by(f64::total_cmp);
        let obs = observed.get(&t.to_bits()).map_or(String::new(), |v| v.to_string());
        let _ = writeln!(
            s,
            "{t},{mean},{},{},{obs}",
            quantile(&vals, 0.025),
            quantile(&vals, 0.975)
        );
    }
    write_file(path, &s)
}

/// Model flow density (averaged over draws) and the observed
/// change-of-variables density at every channel value, per time point.
pub fn write_flow_density_csv(path: &Path, model: &CloccsModel, chain: &Chain, max_draws: usize) -> Result<()> {
    let flow = model
        .flow()
        .ok_or_else(|| CloccsError::Validation("the model has no flow data".into()))?;
    let picks = pick_draws(chain, max_draws)?;
    let params: Vec<_> = picks.iter().map(|v| model.decode(v)).collect();
    let mut s = String::from("time_min,log2_fluorescence,model_density,observed_density\n");
    for (i, rec) in flow.records().iter().enumerate() {
        let evals: Vec<FlowEvaluator> = params
            .iter()
            .filter_map(|p| {
                p.shared
                    .map(|sh| FlowEvaluator::new(&p.theta, &sh, &p.per_time[i], rec.time(), model.config()))
            })
            .collect();
        for (f, obs) in rec.observed_log2_density() {
            let m = evals.iter().map(|e| e.density(f)).sum::<f64>() / evals.len().max(1) as f64;
            let _ = writeln!(s, "{},{f},{m},{obs}", rec.time());
        }
    }
    write_file(path, &s)
}

/// Evenly spaced saved draws, at most `n`.
fn pick_draws(chain: &Chain, n: usize) -> Result<Vec<Vec<f64>>> {
    if chain.is_empty() || n == 0 {
        return Err(CloccsError::Validation("no posterior draws to emit curves from".into()));
    }
    let k = n.min(chain.len());
    Ok((0..k).map(|i| chain.draws[i * chain.len() / k].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn budding_round_trip_sorts_rows() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "b.csv", "time_min,budded,total\n40,12,200\n30.5,3,200\n\n");
        let d = parse_budding_csv(&p).unwrap();
        assert_eq!(d.times(), vec![30.5, 40.0]);
        let q = dir.path().join("out/b2.csv");
        write_budding_csv(&q, &d).unwrap();
        assert_eq!(parse_budding_csv(&q).unwrap(), d);
    }

    #[test]
    fn budding_errors_carry_line_numbers() {
        let dir = tempdir().unwrap();
        let cases = [
            ("time_min,budded,total\n30,3,200\n38,300,200\n", 3),
            ("time_min,budded,total\n30,x,200\n", 2),
            ("time_min,budded\n30,3\n", 1),
            ("time_min,budded,total\n30,3,200\n38,-1,200\n", 3),
        ];
        for (text, line) in cases {
            let p = write(dir.path(), "bad.csv", text);
            match parse_budding_csv(&p) {
                Err(CloccsError::Data { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        let p = write(dir.path(), "dup.csv", "time_min,budded,total\n30,3,200\n30,4,200\n");
        assert!(matches!(parse_budding_csv(&p), Err(CloccsError::Validation(_))));
    }

    fn flow_text(rows: &[(f64, &[(usize, u64)])]) -> String {
        let mut s = flow_header().join(",");
        s.push('\n');
        for (t, cells) in rows {
            let mut counts = vec![0u64; CHANNELS];
            for &(k, n) in *cells {
                counts[k - 1] = n;
            }
            s.push_str(&t.to_string());
            for c in counts {
                s.push_str(&format!(",{c}"));
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn flow_round_trip() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "f.csv",
            &flow_text(&[(46.0, &[(300, 5), (600, 2)]), (30.0, &[(1, 1)])]),
        );
        let d = parse_flow_table(&p).unwrap();
        assert_eq!(d.times(), vec![30.0, 46.0]);
        assert_eq!(d.records()[1].counts()[299], 5);
        let q = dir.path().join("f2.csv");
        write_flow_table(&q, &d).unwrap();
        assert_eq!(parse_flow_table(&q).unwrap(), d);
    }

    #[test]
    fn flow_rejects_negative_and_empty_rows() {
        let dir = tempdir().unwrap();
        let text = flow_text(&[(30.0, &[(10, 1)])]).replacen(",1,", ",-1,", 1);
        let p = write(dir.path(), "neg.csv", &text);
        assert!(matches!(parse_flow_table(&p), Err(CloccsError::Data { line: 2, .. })));
        let p = write(dir.path(), "empty.csv", &flow_text(&[(30.0, &[])]));
        assert!(matches!(parse_flow_table(&p), Err(CloccsError::Data { line: 2, .. })));
        let p = write(dir.path(), "short.csv", "time_min,ch0001\n30,1\n");
        assert!(matches!(parse_flow_table(&p), Err(CloccsError::Data { line: 1, .. })));
    }

    #[test]
    fn chain_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let chain = Chain {
            names: vec!["mu0".into(), "lambda".into()],
            draws: vec![vec![0.1 + 0.2, 1e-300], vec![94.123456789012345, 79.5]],
            log_posterior: vec![-1234.5678901234567, -1.0 / 3.0],
            acceptance: Vec::new(),
            seed: 0,
        };
        let p = dir.path().join("chain.csv");
        write_chain_csv(&p, &chain).unwrap();
        assert_eq!(read_chain_csv(&p).unwrap(), chain);
    }

    #[test]
    fn summary_round_trip() {
        let dir = tempdir().unwrap();
        let summary = PosteriorSummary {
            rows: vec![SummaryRow {
                parameter: "delta".into(),
                mean: 44.1,
                lower: 42.0,
                upper: 46.25,
            }],
        };
        let p = dir.path().join("s.csv");
        write_summary_csv(&p, &summary).unwrap();
        assert_eq!(read_summary_csv(&p).unwrap(), summary);
    }

    #[test]
    fn key_values_parse_and_reject() {
        let p = Path::new("cfg.txt");
        let m = parse_key_values(p, "# comment\nsampler.seed = 7  # trailing\n\nmodel.cycles=9\n").unwrap();
        assert_eq!(m["sampler.seed"], "7");
        assert_eq!(m["model.cycles"], "9");
        assert!(matches!(
            parse_key_values(p, "a = 1\na = 2\n"),
            Err(CloccsError::Data { line: 2, .. })
        ));
        assert!(matches!(
            parse_key_values(p, "novalue\n"),
            Err(CloccsError::Data { line: 1, .. })
        ));
        assert!(matches!(
            parse_key_values(p, " = 3\n"),
            Err(CloccsError::Data { line: 1, .. })
        ));
    }

    #[test]
    fn run_config_overrides_and_entries_round_trip() {
        let text = "sampler.iterations = 2000\nsampler.burn_in = 500\nsampler.seed = 11\n\
                    sampler.start = prior\nsubmodel.fix = delta, mu0\nprior.sigmav.shape = 10\n\
                    simulate.flow_cells = 123\n";
        let m = parse_key_values(Path::new("c"), text).unwrap();
        let cfg = RunConfig::from_map(&m).unwrap();
        assert_eq!(cfg.sampler.iterations, 2000);
        assert_eq!(cfg.sampler.seed, 11);
        assert!(!cfg.search_start);
        assert!(cfg.submodel.fix_mu0 && cfg.submodel.fix_delta && !cfg.submodel.fix_sigma0);
        assert_eq!(cfg.prior.sigmav.shape, 10.0);
        assert_eq!(cfg.simulate.flow_cells, 123);

        let echoed: BTreeMap<String, String> = cfg.entries().into_iter().collect();
        assert_eq!(RunConfig::from_map(&echoed).unwrap(), cfg);
    }

    #[test]
    fn run_config_rejects_bad_input() {
        let bad = |text: &str| {
            let m = parse_key_values(Path::new("c"), text).unwrap();
            RunConfig::from_map(&m)
        };
        assert!(matches!(bad("nonsense.key = 1\n"), Err(CloccsError::Config(_))));
        assert!(matches!(bad("sampler.thin = two\n"), Err(CloccsError::Config(_))));
        assert!(matches!(
            bad("sampler.blocking = diagonal\n"),
            Err(CloccsError::Config(_))
        ));
        assert!(matches!(bad("submodel.fix = lambda\n"), Err(CloccsError::Config(_))));
        assert!(bad("sampler.iterations = 10\nsampler.burn_in = 10\n").is_err());
        assert!(bad("prior.sigmav.shape = -1\n").is_err());
    }
}
