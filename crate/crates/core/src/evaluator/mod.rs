//! Pluggable design evaluators.
//!
//! The two circuit models are textbook square-law small-signal analyses of a
//! Miller-compensated two-stage amplifier and a hysteresis comparator. They
//! produce the same metric set a SPICE testbench would, plus a per-device
//! operating-region report. Benchmark functions (Branin, Hartmann-6) are
//! provided for validating the optimization engine itself.

mod amp2;
mod comparator;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{DesignError, DesignPoint, DesignSpace, DeviceRegionReport, EvalRecord, MetricVector, Region, Source};
use crate::fom::{compute_fom, FomConfig};
use crate::presets::Preset;

pub use synthetic::{branin, hartmann6, synthetic_eval, BRANIN_MAX, HARTMANN6_MAX};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Range(#[from] DesignError),
    #[error("unknown benchmark function `{0}`")]
    UnknownFunction(String),
}

/// Process parameters of the reference device model.
///
/// `lambda0` and `offset_coeff` are per-micron quantities: channel-length
/// modulation is `lambda0 / L[um]` and input offset is `offset_coeff / sqrt(W[um] L[um])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConstants {
    /// V
    pub vdd: f64,
    pub vth_n: f64,
    pub vth_p: f64,
    /// A/V^2
    pub kp_n: f64,
    pub kp_p: f64,
    /// 1/V * um
    pub lambda0: f64,
    /// F
    pub c_load: f64,
    pub c_node: f64,
    /// V
    pub v_ov_bias: f64,
    pub v_headroom: f64,
    /// mV * um
    pub offset_coeff: f64,
}

impl Default for ProcessConstants {
    fn default() -> Self {
        ProcessConstants {
            vdd: 1.2,
            vth_n: 0.35,
            vth_p: 0.35,
            kp_n: 200e-6,
            kp_p: 80e-6,
            lambda0: 0.1,
            c_load: 1e-12,
            c_node: 0.5e-12,
            v_ov_bias: 0.2,
            v_headroom: 0.2,
            offset_coeff: 5.0,
        }
    }
}

impl ProcessConstants {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("vdd", self.vdd),
            ("vth_n", self.vth_n),
            ("vth_p", self.vth_p),
            ("kp_n", self.kp_n),
            ("kp_p", self.kp_p),
            ("lambda0", self.lambda0),
            ("c_load", self.c_load),
            ("c_node", self.c_node),
            ("v_ov_bias", self.v_ov_bias),
            ("v_headroom", self.v_headroom),
            ("offset_coeff", self.offset_coeff),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("process constant `{name}` must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Overdrive budget of a device stack.
    pub fn stack_budget(&self) -> f64 {
        self.vdd - self.v_headroom
    }

    /// Channel-length modulation for a length given in meters.
    pub(crate) fn lambda(&self, length_m: f64) -> f64 {
        self.lambda0 / (length_m * 1e6)
    }
}

/// Overdrive of one device and the stack it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceBias {
    pub name: String,
    pub v_ov: f64,
    pub stack: usize,
}

/// DC operating point summary used for region classification.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BiasSolution {
    pub devices: Vec<DeviceBias>,
    /// Overdrive sum of each series stack.
    pub stacks: Vec<f64>,
}

impl BiasSolution {
    pub(crate) fn device(&mut self, name: &str, v_ov: f64, stack: usize) {
        self.devices.push(DeviceBias {
            name: name.to_string(),
            v_ov,
            stack,
        });
    }
}

/// cutoff if `V_ov <= 0`; triode if the device's stack overdrive sum exceeds
/// `vdd - v_headroom`; saturation otherwise.
pub fn classify_regions(bias: &BiasSolution, constants: &ProcessConstants) -> DeviceRegionReport {
    let budget = constants.stack_budget();
    bias.devices
        .iter()
        .map(|d| {
            let stack_sum = bias.stacks.get(d.stack).copied().unwrap_or(f64::NAN);
            let region = if !(d.v_ov > 0.0) {
                Region::Cutoff
            } else if !(stack_sum <= budget) {
                Region::Triode
            } else {
                Region::Saturation
            };
            (d.name.clone(), region)
        })
        .collect()
}

/// Raw outcome of evaluating a point, before FOM scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: MetricVector,
    pub regions: DeviceRegionReport,
    pub simulation_ok: bool,
}

impl Evaluation {
    pub fn into_record(self, point: DesignPoint, fom: &FomConfig, source: Source, iteration: usize) -> EvalRecord {
        let score = compute_fom(&self.metrics, fom).expect("evaluator emits every configured metric");
        EvalRecord {
            point,
            metrics: self.metrics,
            regions: self.regions,
            simulation_ok: self.simulation_ok,
            fom: score,
            source,
            iteration,
        }
    }
}

/// Intermediate result of a circuit analysis.
pub(crate) struct Analysis {
    pub metrics: Vec<(&'static str, f64)>,
    pub bias: BiasSolution,
    /// Stacks whose overdrive budget gates the signal path.
    pub gain_stacks: Vec<usize>,
    pub currents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitModel {
    preset: Preset,
    space: DesignSpace,
    fom: FomConfig,
    constants: ProcessConstants,
}

impl CircuitModel {
    pub fn new(preset: Preset, constants: ProcessConstants) -> Self {
        CircuitModel {
            preset,
            space: preset.space(),
            fom: preset.fom(),
            constants,
        }
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn fom(&self) -> &FomConfig {
        &self.fom
    }

    pub fn constants(&self) -> &ProcessConstants {
        &self.constants
    }

    /// Device names mapped to the parameter indices that size them.
    pub fn sharing(&self) -> Vec<(&'static str, [usize; 2])> {
        match self.preset {
            Preset::Amp2 => amp2::SHARING.to_vec(),
            Preset::Comparator => comparator::SHARING.to_vec(),
            Preset::Branin | Preset::Hartmann6 => Vec::new(),
        }
    }

    /// Bias solution and metrics without guard handling; `None` for benchmarks.
    pub fn bias(&self, point: &DesignPoint) -> Result<Option<BiasSolution>, EvalError> {
        self.space.check(point)?;
        Ok(self.analyze(point).map(|a| a.bias))
    }

    fn analyze(&self, point: &DesignPoint) -> Option<Analysis> {
        match self.preset {
            Preset::Amp2 => Some(amp2::analyze(point.values(), &self.constants)),
            Preset::Comparator => Some(comparator::analyze(point.values(), &self.constants)),
            Preset::Branin | Preset::Hartmann6 => None,
        }
    }

    pub fn evaluate(&self, point: &DesignPoint) -> Result<Evaluation, EvalError> {
        self.space.check(point)?;
        let Some(analysis) = self.analyze(point) else {
            let value = synthetic_eval(self.preset.name(), point.values())?;
            return Ok(Evaluation {
                metrics: [("value".to_string(), value)].into_iter().collect(),
                regions: DeviceRegionReport::new(),
                simulation_ok: true,
            });
        };
        let regions = classify_regions(&analysis.bias, &self.constants);
        let budget = self.constants.stack_budget();
        let ok = analysis.currents.iter().all(|&i| i > 0.0 && i.is_finite())
            && analysis.bias.devices.iter().all(|d| d.v_ov > 0.0 && d.v_ov.is_finite())
            && analysis
                .gain_stacks
                .iter()
                .all(|&s| analysis.bias.stacks[s] <= budget)
            && analysis.metrics.iter().all(|(_, v)| v.is_finite());
        let metrics = if ok {
            analysis
                .metrics
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect()
        } else {
            self.fom.failed_metrics()
        };
        Ok(Evaluation {
            metrics,
            regions,
            simulation_ok: ok,
        })
    }

    pub fn evaluate_record(&self, point: DesignPoint, source: Source, iteration: usize) -> Result<EvalRecord, EvalError> {
        let eval = self.evaluate(&point)?;
        Ok(eval.into_record(point, &self.fom, source, iteration))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bias(v: &[(f64, usize)], stacks: &[f64]) -> BiasSolution {
        BiasSolution {
            devices: v
                .iter()
                .enumerate()
                .map(|(i, &(v_ov, stack))| DeviceBias {
                    name: format!("M{i}"),
                    v_ov,
                    stack,
                })
                .collect(),
            stacks: stacks.to_vec(),
        }
    }

    #[test]
    fn region_rules() {
        let c = ProcessConstants::default();
        assert!((c.stack_budget() - 1.0).abs() < 1e-15);
        let r = classify_regions(&bias(&[(-0.01, 0), (0.0, 0)], &[0.6]), &c);
        assert!(r.values().all(|&x| x == Region::Cutoff));
        let r = classify_regions(&bias(&[(0.2, 0), (0.4, 1)], &[0.6, 1.1]), &c);
        assert_eq!(r["M0"], Region::Saturation);
        assert_eq!(r["M1"], Region::Triode);
    }

    #[test]
    fn constants_must_be_positive() {
        let mut c = ProcessConstants::default();
        assert!(c.validate().is_ok());
        c.kp_p = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn synthetic_preset_scores_value() {
        let m = CircuitModel::new(Preset::Branin, ProcessConstants::default());
        let p = DesignPoint::new(vec![std::f64::consts::PI, 2.275]);
        let rec = m.evaluate_record(p, Source::Random, 0).unwrap();
        assert!((rec.fom - BRANIN_MAX).abs() < 1e-6);
        assert!(rec.regions.is_empty());
    }
}
