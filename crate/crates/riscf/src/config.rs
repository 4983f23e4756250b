//! Experiment configuration: flat key-value text with one section per
//! subsystem. Unknown sections or keys are hard errors so a typo never
//! silently falls back to a default.

use std::path::PathBuf;
use std::str::FromStr;

use crate::combining::CombinerKind;
use crate::energy::PowerModel;
use crate::error::{Error, Result};
use crate::optimizer::SwarmConfig;
use crate::system::{dbm_to_watt, RpMode, SystemConfig};
use crate::topology::FadingMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SeCdf,
    SeVsM,
    SeVsU,
    SeVsJ,
    EeVsM,
    EeVsU,
    EeVsRho,
    Optimize,
    OracleSuite,
    Timing,
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "se-cdf" => Self::SeCdf,
            "se-vs-m" => Self::SeVsM,
            "se-vs-u" => Self::SeVsU,
            "se-vs-j" => Self::SeVsJ,
            "ee-vs-m" => Self::EeVsM,
            "ee-vs-u" => Self::EeVsU,
            "ee-vs-rho" => Self::EeVsRho,
            "optimize" => Self::Optimize,
            "oracle-suite" => Self::OracleSuite,
            "timing" => Self::Timing,
            other => return Err(format!("unknown experiment kind '{other}'")),
        })
    }
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SeCdf => "se-cdf",
            Self::SeVsM => "se-vs-m",
            Self::SeVsU => "se-vs-u",
            Self::SeVsJ => "se-vs-j",
            Self::EeVsM => "ee-vs-m",
            Self::EeVsU => "ee-vs-u",
            Self::EeVsRho => "ee-vs-rho",
            Self::Optimize => "optimize",
            Self::OracleSuite => "oracle-suite",
            Self::Timing => "timing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    Random,
    Aligned,
    Zero,
}

/// Sweep grids of the figure-family experiments.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub m_list: Vec<usize>,
    pub u_list: Vec<usize>,
    pub j_list: Vec<usize>,
    pub rho_list: Vec<f64>,
    pub i_list: Vec<usize>,
    /// Total antenna budget M*J of the per-AP-antennas sweep.
    pub antennas_total: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            m_list: vec![5, 10, 15],
            u_list: vec![2, 4, 6, 8],
            j_list: vec![2, 4, 8],
            rho_list: vec![0.25, 0.5, 1.0],
            i_list: vec![8, 16, 32],
            antennas_total: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: u64,
    pub geometry_draws: usize,
    pub cap_draws: u64,
    pub combiner: CombinerKind,
    pub phases: PhaseMode,
    pub rp: RpMode,
    pub k_list: Vec<usize>,
    pub qos_min_se: f64,
    pub output: Option<PathBuf>,
    pub system: SystemConfig,
    pub power: PowerModel,
    pub swarm: SwarmConfig,
    pub opt_seeds: usize,
    pub grid: GridConfig,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        let phases = match kind {
            ExperimentKind::SeVsM | ExperimentKind::SeVsU | ExperimentKind::SeVsJ => {
                PhaseMode::Aligned
            }
            _ => PhaseMode::Random,
        };
        // The CDF family draws many geometries at few trials each; the sweep
        // families invert that. Budgets keep every default run inside ten
        // minutes on a two-core laptop.
        let (geometry_draws, trials) = match kind {
            ExperimentKind::SeCdf => (40, 800),
            _ => (20, 4_000),
        };
        Self {
            kind,
            seed: 1,
            trials,
            geometry_draws,
            cap_draws: 200,
            combiner: CombinerKind::Mr,
            phases,
            rp: RpMode::Average,
            k_list: vec![1, 2, 4],
            qos_min_se: 0.0,
            output: None,
            system: SystemConfig::default(),
            power: PowerModel::default(),
            swarm: SwarmConfig {
                particles: 16,
                t_max: 60,
                ..SwarmConfig::default()
            },
            opt_seeds: 5,
            grid: GridConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        for &k in &self.k_list {
            if k == 0 || k > self.system.n_blocks {
                return Err(Error::InvalidArgument(format!(
                    "k-list entry {k} outside 1..={}",
                    self.system.n_blocks
                )));
            }
        }
        Ok(())
    }
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(line, format!("key '{key}': cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|item| parse_num(line, key, item.trim()))
        .collect()
}

/// Parses the sectioned key-value format. The `[experiment]` section must
/// define `kind` before any other key so kind-dependent defaults apply.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    // First pass: find the experiment kind.
    let mut kind = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(rest) = line.strip_prefix("kind") {
            let rest = rest.trim_start();
            if let Some(v) = rest.strip_prefix('=') {
                kind = Some(
                    ExperimentKind::from_str(v.trim()).map_err(|e| bad(idx + 1, e))?,
                );
                break;
            }
        }
    }
    let kind = kind.ok_or_else(|| bad(0, "missing 'kind' in [experiment] section"))?;
    let mut cfg = ExperimentConfig::new(kind);

    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| bad(line_no, "unterminated section header"))?;
            section = name.trim().to_string();
            match section.as_str() {
                "experiment" | "system" | "power" | "optimizer" | "grid" => {}
                other => return Err(bad(line_no, format!("unknown section '[{other}]'"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        let v = value.trim();
        match (section.as_str(), key) {
            ("experiment", "kind") => {}
            ("experiment", "seed") => cfg.seed = parse_num(line_no, key, v)?,
            ("experiment", "trials") => cfg.trials = parse_num(line_no, key, v)?,
            ("experiment", "geometry-draws") => cfg.geometry_draws = parse_num(line_no, key, v)?,
            ("experiment", "cap-draws") => cfg.cap_draws = parse_num(line_no, key, v)?,
            ("experiment", "combiner") => {
                cfg.combiner = match v {
                    "mr" => CombinerKind::Mr,
                    "lmmse" => CombinerKind::Lmmse,
                    other => return Err(bad(line_no, format!("unknown combiner '{other}'"))),
                }
            }
            ("experiment", "phases") => {
                cfg.phases = match v {
                    "random" => PhaseMode::Random,
                    "aligned" => PhaseMode::Aligned,
                    "zero" => PhaseMode::Zero,
                    other => return Err(bad(line_no, format!("unknown phase mode '{other}'"))),
                }
            }
            ("experiment", "rp") => {
                cfg.rp = if v == "average" {
                    RpMode::Average
                } else if let Some(c) = v.strip_prefix("fixed:") {
                    RpMode::Fixed(parse_num(line_no, key, c)?)
                } else {
                    return Err(bad(line_no, format!("rp must be 'average' or 'fixed:<c>', got '{v}'")));
                }
            }
            ("experiment", "k-list") => cfg.k_list = parse_list(line_no, key, v)?,
            ("experiment", "qos-min-se") => cfg.qos_min_se = parse_num(line_no, key, v)?,
            ("experiment", "output") => cfg.output = Some(PathBuf::from(v)),

            ("system", "aps") => cfg.system.n_aps = parse_num(line_no, key, v)?,
            ("system", "antennas") => cfg.system.n_antennas = parse_num(line_no, key, v)?,
            ("system", "ues") => cfg.system.n_ues = parse_num(line_no, key, v)?,
            ("system", "elements") => cfg.system.n_elements = parse_num(line_no, key, v)?,
            ("system", "blocks") => cfg.system.n_blocks = parse_num(line_no, key, v)?,
            ("system", "active-blocks") => {
                cfg.system.n_active_blocks = parse_num(line_no, key, v)?
            }
            ("system", "tau-c") => cfg.system.tau_c = parse_num(line_no, key, v)?,
            ("system", "tau-p") => cfg.system.tau_p = parse_num(line_no, key, v)?,
            ("system", "area-m") => cfg.system.area_side = parse_num(line_no, key, v)?,
            ("system", "wavelength-m") => cfg.system.wavelength = parse_num(line_no, key, v)?,
            ("system", "ap-spacing-wl") => cfg.system.ap_spacing = parse_num(line_no, key, v)?,
            ("system", "ris-spacing-wl") => cfg.system.ris_spacing = parse_num(line_no, key, v)?,
            ("system", "asd-deg") => {
                cfg.system.asd = parse_num::<f64>(line_no, key, v)?.to_radians()
            }
            ("system", "fading") => {
                cfg.system.fading = match v {
                    "rayleigh" => FadingMode::Rayleigh,
                    "rician" => FadingMode::Rician,
                    "pure-los" => FadingMode::PureLos,
                    other => return Err(bad(line_no, format!("unknown fading '{other}'"))),
                }
            }
            ("system", "tx-power-mw") => {
                cfg.system.tx_power_w = parse_num::<f64>(line_no, key, v)? * 1e-3
            }
            ("system", "noise-dbm") => cfg.system.noise_dbm = parse_num(line_no, key, v)?,
            ("system", "bandwidth-mhz") => {
                cfg.system.bandwidth_hz = parse_num::<f64>(line_no, key, v)? * 1e6;
                cfg.power.bandwidth = cfg.system.bandwidth_hz;
            }
            ("system", "shadow-delta-f") => {
                cfg.system.shadow.delta_f = parse_num(line_no, key, v)?
            }
            ("system", "shadow-sigma-db") => {
                cfg.system.shadow.delta_sf_db = parse_num(line_no, key, v)?
            }
            ("system", "shadow-decorrelation-m") => {
                cfg.system.shadow.d_dc = parse_num(line_no, key, v)?
            }
            ("system", "ris") => {
                cfg.system.ris_enabled = match v {
                    "on" => true,
                    "off" => false,
                    other => return Err(bad(line_no, format!("ris must be on/off, got '{other}'"))),
                }
            }

            ("power", "ris-dbm") => {
                cfg.power.p_ris_element = dbm_to_watt(parse_num(line_no, key, v)?)
            }
            ("power", "traffic-w-per-gbps") => {
                let w: f64 = parse_num(line_no, key, v)?;
                cfg.power.rho_ap = w * 1e-9;
                cfg.power.rho_bh = w * 1e-9;
            }
            ("power", "ap-fix-w") => cfg.power.p_ap_fix = parse_num(line_no, key, v)?,
            ("power", "ap-antenna-w") => cfg.power.p_ap_antenna = parse_num(line_no, key, v)?,
            ("power", "bh-fix-w") => cfg.power.p_bh_fix = parse_num(line_no, key, v)?,
            ("power", "ue-fix-dbm") => {
                cfg.power.p_ue_fix = dbm_to_watt(parse_num(line_no, key, v)?)
            }
            ("power", "ue-amp-efficiency") => cfg.power.alpha_ue = parse_num(line_no, key, v)?,

            ("optimizer", "particles") => cfg.swarm.particles = parse_num(line_no, key, v)?,
            ("optimizer", "iterations") => cfg.swarm.t_max = parse_num(line_no, key, v)?,
            ("optimizer", "t-check") => cfg.swarm.t_check = parse_num(line_no, key, v)?,
            ("optimizer", "c1") => cfg.swarm.c1 = parse_num(line_no, key, v)?,
            ("optimizer", "c2") => cfg.swarm.c2 = parse_num(line_no, key, v)?,
            ("optimizer", "omega-min") => cfg.swarm.omega_min = parse_num(line_no, key, v)?,
            ("optimizer", "omega-max") => cfg.swarm.omega_max = parse_num(line_no, key, v)?,
            ("optimizer", "omega-fixed") => cfg.swarm.omega_fixed = parse_num(line_no, key, v)?,
            ("optimizer", "v-max") => cfg.swarm.v_max = parse_num(line_no, key, v)?,
            ("optimizer", "patience") => cfg.swarm.patience = parse_num(line_no, key, v)?,
            ("optimizer", "epsilon") => cfg.swarm.epsilon = Some(parse_num(line_no, key, v)?),
            ("optimizer", "seeds") => cfg.opt_seeds = parse_num(line_no, key, v)?,

            ("grid", "m-list") => cfg.grid.m_list = parse_list(line_no, key, v)?,
            ("grid", "u-list") => cfg.grid.u_list = parse_list(line_no, key, v)?,
            ("grid", "j-list") => cfg.grid.j_list = parse_list(line_no, key, v)?,
            ("grid", "rho-list") => cfg.grid.rho_list = parse_list(line_no, key, v)?,
            ("grid", "i-list") => cfg.grid.i_list = parse_list(line_no, key, v)?,
            ("grid", "antennas-total") => cfg.grid.antennas_total = parse_num(line_no, key, v)?,

            ("", k) => return Err(bad(line_no, format!("key '{k}' outside any section"))),
            (s, k) => return Err(bad(line_no, format!("unknown key '{k}' in section [{s}]"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
