//! JSON run configuration.

use std::path::PathBuf;

use igo_core::{
    ChainPlant, CycleSpec, Horizon, IgoError, ModulationBounds, ModulationKind, SlopeBox, StateVec,
    SweepSpec,
};
use serde::{Deserialize, Serialize};

/// The atracurium example shipped with the binary and used when no config is given.
pub const BUNDLED: &str = include_str!("../configs/atracurium.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub plant: PlantConfig,
    pub cycle: CycleConfig,
    pub modulation: ModulationConfig,
    pub sim: SimConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    /// Border coefficients `(c_J, c_D)` to compare the recomputed ones against.
    #[serde(default)]
    pub reference_border: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub a: [f64; 3],
    pub g: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleConfig {
    pub lambda: f64,
    #[serde(rename = "T")]
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationConfig {
    pub kind: ModulationKind,
    pub slopes: Slopes,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Slopes {
    #[serde(rename = "Fp")]
    pub f: f64,
    #[serde(rename = "Phip")]
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2")]
    pub f2: f64,
    #[serde(rename = "Phi1")]
    pub phi1: f64,
    #[serde(rename = "Phi2")]
    pub phi2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonConfig {
    Firings(usize),
    Time(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Initial state; the designed fixed point when absent.
    #[serde(default)]
    pub x0: Option<[f64; 3]>,
    /// Added to the initial state.
    #[serde(default)]
    pub x0_offset: Option<[f64; 3]>,
    pub horizon: HorizonConfig,
    pub sample_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "Fp_range")]
    pub f_range: [f64; 2],
    #[serde(rename = "Phip_range")]
    pub phi_range: [f64; 2],
    pub n_f: usize,
    pub n_p: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub period: Option<f64>,
    pub f_slope: Option<f64>,
    pub phi_slope: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled config is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), String> {
        if let Some(v) = o.lambda {
            self.cycle.lambda = v;
        }
        if let Some(v) = o.period {
            self.cycle.period = v;
        }
        if let Some(v) = o.f_slope {
            self.modulation.slopes.f = v;
        }
        if let Some(v) = o.phi_slope {
            self.modulation.slopes.phi = v;
        }
        if let Some(dir) = &o.out {
            self.output.directory = Some(dir.clone());
        }
        self.validate()
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), String> {
        self.plant().map_err(|e| e.to_string())?;
        self.cycle().map_err(|e| e.to_string())?;
        let s = self.modulation.slopes;
        if !(s.f.is_finite() && s.phi.is_finite()) {
            return Err("slopes must be finite".into());
        }
        if let Some(b) = self.modulation.bounds {
            if !(0.0 < b.f1 && b.f1 <= b.f2 && 0.0 < b.phi1 && b.phi1 <= b.phi2)
                || ![b.f2, b.phi2].iter().all(|v| v.is_finite())
            {
                return Err(format!(
                    "modulation bounds must satisfy 0 < F1 <= F2 and 0 < Phi1 <= Phi2, got {b:?}"
                ));
            }
        }
        if !(self.sim.sample_step > 0.0 && self.sim.sample_step.is_finite()) {
            return Err(format!(
                "sample_step must be positive, got {}",
                self.sim.sample_step
            ));
        }
        if let HorizonConfig::Time(t) = self.sim.horizon {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(format!("time horizon must be non-negative, got {t}"));
            }
        }
        for v in self
            .sim
            .x0
            .iter()
            .chain(self.sim.x0_offset.iter())
            .flatten()
        {
            if !v.is_finite() {
                return Err("initial state must be finite".into());
            }
        }
        self.sweep_spec().map_err(|e| e.to_string())?;
        if self.output.formats.is_empty() {
            return Err("output.formats must list at least one format".into());
        }
        Ok(())
    }

    pub fn plant(&self) -> igo_core::Result<ChainPlant> {
        ChainPlant::new(self.plant.a, self.plant.g)
    }

    pub fn cycle(&self) -> igo_core::Result<CycleSpec> {
        CycleSpec::new(self.cycle.lambda, self.cycle.period)
    }

    pub fn bounds(&self) -> Option<ModulationBounds> {
        self.modulation.bounds.map(|b| ModulationBounds {
            f_min: b.f1,
            f_max: b.f2,
            phi_min: b.phi1,
            phi_max: b.phi2,
        })
    }

    pub fn sweep_spec(&self) -> igo_core::Result<SweepSpec> {
        let s = &self.sweep;
        let slopes = SlopeBox::new(
            (s.f_range[0], s.f_range[1]),
            (s.phi_range[0], s.phi_range[1]),
        )?;
        SweepSpec::new(slopes, s.n_f, s.n_p)
    }

    pub fn horizon(&self) -> Horizon {
        match self.sim.horizon {
            HorizonConfig::Firings(n) => Horizon::Firings(n),
            HorizonConfig::Time(t) => Horizon::Time(t),
        }
    }

    /// `x0` (or the fixed point) plus `x0_offset`.
    pub fn initial_state(&self, fixed_point: &StateVec) -> StateVec {
        let base = self.sim.x0.map(StateVec::from).unwrap_or(*fixed_point);
        base + self
            .sim
            .x0_offset
            .map(StateVec::from)
            .unwrap_or_else(StateVec::zeros)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

impl From<IgoError> for crate::CliError {
    fn from(e: IgoError) -> Self {
        crate::CliError::Invalid(e.to_string())
    }
}
