//! Miller-compensated two-stage differential amplifier.
//!
//! Mb sinks the first-stage tail current, M1/M2 form the NMOS input pair with
//! the M3/M4 PMOS mirror load, M6 is the PMOS common-source second stage
//! loaded by the M7 current sink, and M5 is the diode-connected bias
//! reference. Rz in series with Cc places the compensation zero.

use std::f64::consts::PI;

use super::{Analysis, BiasSolution, ProcessConstants};

const W1: usize = 0;
const L1: usize = 1;
const W3: usize = 2;
const L3: usize = 3;
const W5: usize = 4;
const L5: usize = 5;
const W6: usize = 6;
const L6: usize = 7;
const W7: usize = 8;
const L7: usize = 9;
const WB: usize = 10;
const LB: usize = 11;
const RZ: usize = 12;
const CC: usize = 13;

pub(crate) const SHARING: [(&str, [usize; 2]); 8] = [
    ("M1", [W1, L1]),
    ("M2", [W1, L1]),
    ("M3", [W3, L3]),
    ("M4", [W3, L3]),
    ("M5", [W5, L5]),
    ("M6", [W6, L6]),
    ("M7", [W7, L7]),
    ("Mb", [WB, LB]),
];

fn par(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

pub(crate) fn analyze(x: &[f64], c: &ProcessConstants) -> Analysis {
    let ratio = |w: usize, l: usize| x[w] / x[l];
    let (s1, s3, s6, s7, sb) = (
        ratio(W1, L1),
        ratio(W3, L3),
        ratio(W6, L6),
        ratio(W7, L7),
        ratio(WB, LB),
    );
    let (rz, cc) = (x[RZ], x[CC]);

    let i_tail = 0.5 * c.kp_n * sb * c.v_ov_bias * c.v_ov_bias;
    let i_side = 0.5 * i_tail;
    let i_stage2 = i_tail * s7 / sb;

    let gm1 = (2.0 * c.kp_n * s1 * i_side).sqrt();
    let gm3 = (2.0 * c.kp_p * s3 * i_side).sqrt();
    let gm6 = (2.0 * c.kp_p * s6 * i_stage2).sqrt();
    let v_ov1 = (2.0 * i_side / (c.kp_n * s1)).sqrt();
    let v_ov3 = (2.0 * i_side / (c.kp_p * s3)).sqrt();
    // diode-connected reference biased at the nominal overdrive
    let v_ov5 = c.v_ov_bias;
    let v_ov6 = (2.0 * i_stage2 / (c.kp_p * s6)).sqrt();
    let v_ov7 = (2.0 * i_stage2 / (c.kp_n * s7)).sqrt();
    let v_ovb = (2.0 * i_tail / (c.kp_n * sb)).sqrt();

    let ro2 = 1.0 / (c.lambda(x[L1]) * i_side);
    let ro4 = 1.0 / (c.lambda(x[L3]) * i_side);
    let ro6 = 1.0 / (c.lambda(x[L6]) * i_stage2);
    let ro7 = 1.0 / (c.lambda(x[L7]) * i_stage2);
    let rob = 1.0 / (c.lambda(x[LB]) * i_tail);

    let a1 = gm1 * par(ro2, ro4);
    let a2 = gm6 * par(ro6, ro7);
    let gain_db = 20.0 * (a1 * a2).log10();
    let gbw_hz = gm1 / (2.0 * PI * cc);
    let wu = 2.0 * PI * gbw_hz;
    let p2 = gm6 / c.c_load;
    let pm = 90.0 - (wu / p2).atan().to_degrees() - (wu * cc * (1.0 / gm6 - rz)).atan().to_degrees();
    let cmrr_db = 20.0 * (a1 * 2.0 * gm3 * rob).log10();
    let power_w = c.vdd * (i_tail + i_stage2);

    let mut bias = BiasSolution::default();
    // stack 0: tail + input pair + mirror load; stack 1: second stage; stack 2: reference diode
    bias.device("M1", v_ov1, 0);
    bias.device("M2", v_ov1, 0);
    bias.device("M3", v_ov3, 0);
    bias.device("M4", v_ov3, 0);
    bias.device("M5", v_ov5, 2);
    bias.device("M6", v_ov6, 1);
    bias.device("M7", v_ov7, 1);
    bias.device("Mb", v_ovb, 0);
    bias.stacks = vec![v_ovb + v_ov1 + v_ov3, v_ov6 + v_ov7, v_ov5];

    Analysis {
        metrics: vec![
            ("gbw", gbw_hz * 1e-6),
            ("gain", gain_db),
            ("cmrr", cmrr_db),
            ("pm", pm),
            ("power", power_w * 1e6),
        ],
        bias,
        gain_stacks: vec![0, 1],
        currents: vec![i_tail, i_stage2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignPoint, Region};
    use crate::evaluator::CircuitModel;
    use crate::presets::Preset;

    /// A hand-sized point that meets every spec under the default constants.
    pub(crate) fn nominal() -> Vec<f64> {
        let mut x = vec![0.0; 14];
        x[W1] = 20e-6;
        x[L1] = 1e-6;
        x[W3] = 10e-6;
        x[L3] = 1e-6;
        x[W5] = 2e-6;
        x[L5] = 0.5e-6;
        x[W6] = 25e-6;
        x[L6] = 0.5e-6;
        x[W7] = 1.25e-6;
        x[L7] = 0.5e-6;
        x[WB] = 2e-6;
        x[LB] = 1e-6;
        x[RZ] = 5e3;
        x[CC] = 2e-12;
        x
    }

    fn model() -> CircuitModel {
        CircuitModel::new(Preset::Amp2, ProcessConstants::default())
    }

    fn metric(x: &[f64], name: &str) -> f64 {
        model().evaluate(&DesignPoint::new(x.to_vec())).unwrap().metrics[name]
    }

    #[test]
    fn nominal_point_is_healthy() {
        let m = model();
        let e = m.evaluate(&DesignPoint::new(nominal())).unwrap();
        assert!(e.simulation_ok);
        assert_eq!(e.regions.len(), 8);
        assert!(e.regions.values().all(|&r| r == Region::Saturation));
        let missed = crate::fom::count_missed_specs(&e.metrics, m.fom()).unwrap();
        assert_eq!(missed, 0, "{:?}", e.metrics);
    }

    #[test]
    fn gbw_halves_when_cc_doubles() {
        let x = nominal();
        let mut y = x.clone();
        y[CC] *= 2.0;
        let (a, b) = (metric(&x, "gbw"), metric(&y, "gbw"));
        assert!((a / b - 2.0).abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn power_grows_with_tail_width() {
        let x = nominal();
        let mut y = x.clone();
        y[WB] *= 2.0;
        assert!(metric(&y, "power") > metric(&x, "power"));
    }

    #[test]
    fn gain_grows_with_output_length() {
        let x = nominal();
        let mut y = x.clone();
        y[L6] = 0.8e-6;
        y[W6] *= 0.8 / 0.5;
        assert!(metric(&y, "gain") > metric(&x, "gain"));
    }

    #[test]
    fn starved_input_pair_fails() {
        let mut x = nominal();
        x[W1] = 120e-9;
        x[W3] = 120e-9;
        let m = model();
        let e = m.evaluate(&DesignPoint::new(x)).unwrap();
        assert!(!e.simulation_ok);
        assert_eq!(e.regions["M1"], Region::Triode);
        let rec = m.evaluate_record(DesignPoint::new(nominal()), crate::design::Source::Random, 0);
        assert!(rec.unwrap().simulation_ok);
        assert_eq!(e.metrics, m.fom().failed_metrics());
    }
}
