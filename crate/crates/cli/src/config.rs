//! TOML run configuration: parsing with unknown-key rejection, and resolution
//! of every omitted option to its default.

use anyhow::{anyhow, bail, Context, Result};
use kslimit::dynamics::{Bump, InitPreset, LyapunovSpec};
use kslimit::experiments::{estimate_c0, Norm};
use kslimit::mesh::{FluxMode, Grid};
use kslimit::theory::{eta_closed_form, ChiParams, EtaInputs};
use kslimit::{SimConfig, SweepConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Defaults applied to omitted keys, as shown in `--help`.
pub const DEFAULTS_HELP: &str = "\
Configuration file (TOML). Omitted keys take these defaults:

  [grid]    dim = 1, extents = [1.0; dim], cells = [512] in 1D or [64, 64] in 2D
  [chi]     chi0 = 2.0, a = 1.0, k = 2.0            chi(s) = chi0 / (a + s)^k
  [time]    lambda = 0.01, dt = 1e-4, t_end = 1.0, solver_tol = 1e-10,
            flux = \"centered\" (or \"upwind\")
  [init]    preset = \"gaussian-bump\" (or \"constant\")
            constant:      u = 1.0, v = 1.0
            gaussian-bump: u_base = 0.1, u_amp = 5.0, u_sigma = 0.05,
                           v_base = 1.0, v_amp = 0.0, v_sigma = 0.05,
                           u_center = v_center = domain center
  [output]  every = 10, snapshots = [0.0, t_end], q = dim + 1,
            lyapunov_p = 2.0, lyapunov_eps = 0.25, blowup_factor = 1e6,
            eta = 0 if a > 0, else the lower bound from estimate-c0 (t* = 1, 9 probes)
  [sweep]   lambdas = [0.1, 0.01, 0.001, 0.0001], times = [t_end / 2, t_end],
            norms = [\"linf\", \"l2\"]

Unknown keys are errors. The resolved configuration is echoed into manifest.txt.";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub chi: ChiSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extents: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flux: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_amp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_amp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norms: Option<Vec<String>>,
}

/// Parses TOML text. Errors name the offending key path.
pub fn parse(text: &str) -> Result<ConfigFile> {
    let de = toml::Deserializer::parse(text).map_err(|e| anyhow!("invalid TOML: {e}"))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.inner().message().to_string();
        if path == "." {
            anyhow!("{msg}")
        } else {
            anyhow!("{path}: {msg}")
        }
    })
}

/// Reads and parses a config file; `None` yields an empty file (all defaults).
pub fn load(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse(&text)
        }
    }
}

/// A configuration with every option filled in, and the typed objects built
/// from it.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub file: ConfigFile,
    pub sim: SimConfig,
    pub sweep: SweepConfig,
    /// Kernel lower bound used for the default `eta`, when it was estimated.
    pub eta_c0: Option<f64>,
}

impl Resolved {
    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(&self.file).expect("resolved config serializes")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("resolved config serializes")
    }
}

fn key_err(e: kslimit::Error) -> anyhow::Error {
    anyhow!("{e}")
}

fn resolve_grid(s: &GridSection) -> Result<(GridSection, Grid)> {
    let dim = s.dim.unwrap_or(1);
    let extents = s.extents.clone().unwrap_or_else(|| vec![1.0; dim]);
    let cells = s
        .cells
        .clone()
        .unwrap_or_else(|| if dim == 2 { vec![64, 64] } else { vec![512] });
    let grid = Grid::new(dim, &extents, &cells).map_err(key_err)?;
    Ok((
        GridSection {
            dim: Some(dim),
            extents: Some(extents),
            cells: Some(cells),
        },
        grid,
    ))
}

/// The grid alone, for commands that need nothing else.
pub fn grid_of(file: &ConfigFile) -> Result<Grid> {
    resolve_grid(&file.grid).map(|r| r.1)
}

fn center(key: &str, c: Option<&Vec<f64>>, grid: &Grid) -> Result<Vec<f64>> {
    let c = c
        .cloned()
        .unwrap_or_else(|| grid.domain_center()[..grid.dim()].to_vec());
    if c.len() != grid.dim() {
        bail!("{key}: expected {} value(s), got {}", grid.dim(), c.len());
    }
    Ok(c)
}

fn pad(c: &[f64]) -> [f64; 2] {
    [c[0], c.get(1).copied().unwrap_or(0.0)]
}

fn resolve_init(s: &InitSection, grid: &Grid) -> Result<(InitSection, InitPreset)> {
    let preset = s.preset.clone().unwrap_or_else(|| "gaussian-bump".into());
    match preset.as_str() {
        "constant" => {
            let stray = [
                ("u_base", s.u_base.is_some()),
                ("u_amp", s.u_amp.is_some()),
                ("u_sigma", s.u_sigma.is_some()),
                ("u_center", s.u_center.is_some()),
                ("v_base", s.v_base.is_some()),
                ("v_amp", s.v_amp.is_some()),
                ("v_sigma", s.v_sigma.is_some()),
                ("v_center", s.v_center.is_some()),
            ];
            if let Some((k, _)) = stray.iter().find(|x| x.1) {
                bail!("init.{k}: not used by preset \"constant\"");
            }
            let (u, v) = (s.u.unwrap_or(1.0), s.v.unwrap_or(1.0));
            let section = InitSection {
                preset: Some(preset),
                u: Some(u),
                v: Some(v),
                ..Default::default()
            };
            Ok((section, InitPreset::Constant { u, v }))
        }
        "gaussian-bump" => {
            if s.u.is_some() {
                bail!("init.u: not used by preset \"gaussian-bump\" (use u_base)");
            }
            if s.v.is_some() {
                bail!("init.v: not used by preset \"gaussian-bump\" (use v_base)");
            }
            let uc = center("init.u_center", s.u_center.as_ref(), grid)?;
            let vc = center("init.v_center", s.v_center.as_ref(), grid)?;
            let section = InitSection {
                preset: Some(preset),
                u: None,
                v: None,
                u_base: Some(s.u_base.unwrap_or(0.1)),
                u_amp: Some(s.u_amp.unwrap_or(5.0)),
                u_sigma: Some(s.u_sigma.unwrap_or(0.05)),
                u_center: Some(uc.clone()),
                v_base: Some(s.v_base.unwrap_or(1.0)),
                v_amp: Some(s.v_amp.unwrap_or(0.0)),
                v_sigma: Some(s.v_sigma.unwrap_or(0.05)),
                v_center: Some(vc.clone()),
            };
            let bump = |base: Option<f64>, amp: Option<f64>, sigma: Option<f64>, c: &[f64]| Bump {
                base: base.unwrap(),
                amp: amp.unwrap(),
                sigma: sigma.unwrap(),
                center: Some(pad(c)),
            };
            let preset = InitPreset::GaussianBump {
                u: bump(section.u_base, section.u_amp, section.u_sigma, &uc),
                v: bump(section.v_base, section.v_amp, section.v_sigma, &vc),
            };
            Ok((section, preset))
        }
        other => bail!("init.preset: expected \"constant\" or \"gaussian-bump\" (got \"{other}\")"),
    }
}

/// Fills every omitted key, builds the simulation and sweep configurations
/// and validates both.
pub fn resolve(file: &ConfigFile) -> Result<Resolved> {
    let (grid_s, grid) = resolve_grid(&file.grid)?;

    let c = &file.chi;
    let chi_s = ChiSection {
        chi0: Some(c.chi0.unwrap_or(2.0)),
        a: Some(c.a.unwrap_or(1.0)),
        k: Some(c.k.unwrap_or(2.0)),
    };
    let chi = ChiParams::new(chi_s.chi0.unwrap(), chi_s.a.unwrap(), chi_s.k.unwrap()).map_err(key_err)?;

    let t = &file.time;
    let time_s = TimeSection {
        lambda: Some(t.lambda.unwrap_or(0.01)),
        dt: Some(t.dt.unwrap_or(1e-4)),
        t_end: Some(t.t_end.unwrap_or(1.0)),
        solver_tol: Some(t.solver_tol.unwrap_or(1e-10)),
        flux: Some(t.flux.clone().unwrap_or_else(|| "centered".into())),
    };
    let flux: FluxMode = time_s.flux.as_deref().unwrap().parse().map_err(key_err)?;
    let t_end = time_s.t_end.unwrap();

    let (init_s, init) = resolve_init(&file.init, &grid)?;

    let o = &file.output;
    let mut eta_c0 = None;
    let eta = match o.eta {
        Some(e) => e,
        None if chi.a > 0.0 => 0.0,
        None => {
            let c0 = estimate_c0(&grid, 1.0, 9).map_err(key_err)?.c0;
            let (u0, v0) = init.sample(&grid);
            let inputs = EtaInputs::new(c0, u0.integral(), v0.min()).map_err(|e| anyhow!("output.eta: {e}"))?;
            eta_c0 = Some(c0);
            eta_closed_form(&inputs)
        }
    };
    let output_s = OutputSection {
        every: Some(o.every.unwrap_or(10)),
        snapshots: Some(o.snapshots.clone().unwrap_or_else(|| vec![0.0, t_end])),
        q: Some(o.q.unwrap_or(grid.dim() as f64 + 1.0)),
        lyapunov_p: Some(o.lyapunov_p.unwrap_or(2.0)),
        lyapunov_eps: Some(o.lyapunov_eps.unwrap_or(0.25)),
        eta: Some(eta),
        blowup_factor: Some(o.blowup_factor.unwrap_or(1e6)),
    };

    let mut sim = SimConfig::new(grid, chi, time_s.lambda.unwrap(), time_s.dt.unwrap(), t_end, init);
    sim.solver_tol = time_s.solver_tol.unwrap();
    sim.flux = flux;
    sim.diag_every = output_s.every.unwrap();
    sim.snapshot_times = output_s.snapshots.clone().unwrap();
    sim.blowup_factor = output_s.blowup_factor.unwrap();
    sim.q = output_s.q;
    sim.lyapunov = LyapunovSpec {
        p: output_s.lyapunov_p.unwrap(),
        eps: output_s.lyapunov_eps.unwrap(),
    };
    sim.eta = eta;
    sim.validate().map_err(key_err)?;

    let s = &file.sweep;
    let sweep_s = SweepSection {
        lambdas: Some(s.lambdas.clone().unwrap_or_else(|| vec![0.1, 0.01, 0.001, 0.0001])),
        times: Some(s.times.clone().unwrap_or_else(|| vec![0.5 * t_end, t_end])),
        norms: Some(s.norms.clone().unwrap_or_else(|| vec!["linf".into(), "l2".into()])),
    };
    let norms = sweep_s
        .norms
        .as_ref()
        .unwrap()
        .iter()
        .map(|n| n.parse::<Norm>().map_err(key_err))
        .collect::<Result<Vec<_>>>()?;
    let sweep = SweepConfig {
        base: sim.clone(),
        lambdas: sweep_s.lambdas.clone().unwrap(),
        times: sweep_s.times.clone().unwrap(),
        norms,
    };
    sweep.validate().map_err(key_err)?;

    Ok(Resolved {
        file: ConfigFile {
            grid: grid_s,
            chi: chi_s,
            time: time_s,
            init: init_s,
            output: output_s,
            sweep: sweep_s,
        },
        sim,
        sweep,
        eta_c0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_resolves_to_defaults() {
        let r = resolve(&parse("").unwrap()).unwrap();
        assert_eq!(r.sim.grid.nx(), 512);
        assert_eq!(r.sim.chi.chi0, 2.0);
        assert_eq!(r.file.output.snapshots, Some(vec![0.0, 1.0]));
        assert_eq!(r.file.output.eta, Some(0.0));
        assert_eq!(r.sweep.lambdas.len(), 4);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse("[chi]\nkk = 2.0\n").unwrap_err().to_string();
        assert!(e.starts_with("chi") && e.contains("kk"), "{e}");
        let e = parse("[chii]\n").unwrap_err().to_string();
        assert!(e.contains("chii"), "{e}");
    }

    #[test]
    fn type_errors_name_the_key() {
        let e = parse("[time]\ndt = \"small\"\n").unwrap_err().to_string();
        assert!(e.starts_with("time.dt"), "{e}");
    }

    #[test]
    fn constraint_violations_name_the_key() {
        let e = resolve(&parse("[chi]\nk = 0.5\n").unwrap()).unwrap_err().to_string();
        assert!(e.starts_with("chi.k:") && e.contains("k > 1"), "{e}");
        let e = resolve(&parse("[init]\npreset = \"constant\"\nu_amp = 1.0\n").unwrap())
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("init.u_amp"), "{e}");
        let e = resolve(&parse("[sweep]\nnorms = [\"l3\"]\n").unwrap())
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("sweep.norms"), "{e}");
    }

    #[test]
    fn zero_a_estimates_eta() {
        let r = resolve(&parse("[chi]\na = 0.0\n[grid]\ncells = [64]\n").unwrap()).unwrap();
        let c0 = r.eta_c0.unwrap();
        assert!(c0 > 0.0 && c0 <= (-1.0f64).exp());
        assert!(r.sim.eta > 0.0 && r.sim.eta <= 1.0);
    }

    #[test]
    fn resolution_is_idempotent() {
        let r = resolve(&parse("[grid]\ndim = 2\ncells = [16, 16]\n[chi]\na = 0.0\n").unwrap()).unwrap();
        let again = resolve(&parse(&r.to_toml()).unwrap()).unwrap();
        assert_eq!(again.file, r.file);
        assert_eq!(again.sim, r.sim);
    }
}
