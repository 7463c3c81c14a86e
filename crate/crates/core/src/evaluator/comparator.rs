//! Hysteresis comparator: NMOS input pair (M1/M2) on an Mb tail, PMOS diode
//! loads (M3/M4) in parallel with a cross-coupled PMOS pair (M5/M6) that sets
//! the hysteresis, followed by a PMOS mirror (M7/M8) and NMOS output stage
//! (M9/M10/M11) whose branch currents are mirrored from Mb.

use std::f64::consts::PI;

use super::{Analysis, BiasSolution, ProcessConstants};

const W1: usize = 0;
const L1: usize = 1;
const W3: usize = 2;
const L3: usize = 3;
const W5: usize = 4;
const L5: usize = 5;
const W7: usize = 6;
const L7: usize = 7;
const W9: usize = 8;
const L9: usize = 9;
const WB: usize = 10;
const LB: usize = 11;

pub(crate) const SHARING: [(&str, [usize; 2]); 12] = [
    ("M1", [W1, L1]),
    ("M2", [W1, L1]),
    ("M3", [W3, L3]),
    ("M4", [W3, L3]),
    ("M5", [W5, L5]),
    ("M6", [W5, L5]),
    ("M7", [W7, L7]),
    ("M8", [W7, L7]),
    ("M9", [W9, L9]),
    ("M10", [W9, L9]),
    ("M11", [W9, L9]),
    ("Mb", [WB, LB]),
];

/// Number of output branches carrying the mirrored output current.
const OUTPUT_BRANCHES: f64 = 2.0;

fn par(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

/// Hysteresis width for cross-coupled/diode ratio `alpha`; zero for `alpha <= 1`.
pub(crate) fn hysteresis(v_ov1: f64, alpha: f64) -> f64 {
    if alpha > 1.0 {
        v_ov1 * (alpha.sqrt() - 1.0) / (alpha + 1.0).sqrt()
    } else {
        0.0
    }
}

pub(crate) fn analyze(x: &[f64], c: &ProcessConstants) -> Analysis {
    let ratio = |w: usize, l: usize| x[w] / x[l];
    let (s1, s3, s5, s7, s9, sb) = (
        ratio(W1, L1),
        ratio(W3, L3),
        ratio(W5, L5),
        ratio(W7, L7),
        ratio(W9, L9),
        ratio(WB, LB),
    );
    let alpha = s5 / s3;

    let i_tail = 0.5 * c.kp_n * sb * c.v_ov_bias * c.v_ov_bias;
    let i_side = 0.5 * i_tail;
    // Each side's current splits between the diode load and the cross-coupled device.
    let i_diode = i_side / (1.0 + alpha);
    let i_cross = i_side - i_diode;
    let i_out = i_tail * s9 / sb;

    let gm1 = (2.0 * c.kp_n * s1 * i_side).sqrt();
    let gm9 = (2.0 * c.kp_n * s9 * i_out).sqrt();
    let v_ov1 = (2.0 * i_side / (c.kp_n * s1)).sqrt();
    let v_ov3 = (2.0 * i_diode / (c.kp_p * s3)).sqrt();
    let v_ov5 = (2.0 * i_cross / (c.kp_p * s5)).sqrt();
    let v_ov7 = (2.0 * i_out / (c.kp_p * s7)).sqrt();
    let v_ov9 = (2.0 * i_out / (c.kp_n * s9)).sqrt();
    let v_ovb = (2.0 * i_tail / (c.kp_n * sb)).sqrt();

    let ro2 = 1.0 / (c.lambda(x[L1]) * i_side);
    let ro4 = 1.0 / (c.lambda(x[L3]) * i_diode);
    let ro9 = 1.0 / (c.lambda(x[L9]) * i_out);
    let ro11 = ro9;

    let gain_db = 20.0 * (gm1 * par(ro2, ro4) * gm9 * par(ro9, ro11)).log10();
    let ugf_hz = gm1 / (2.0 * PI * c.c_node);
    let w1_um = x[W1] * 1e6;
    let l1_um = x[L1] * 1e6;
    let v_offset_mv = c.offset_coeff / (w1_um * l1_um).sqrt();
    let v_hys_mv = hysteresis(v_ov1, alpha) * 1e3;
    let power_w = c.vdd * (i_tail + OUTPUT_BRANCHES * i_out);

    let mut bias = BiasSolution::default();
    // stack 0: tail + input pair + loads; stack 1: output branches
    for (name, v) in [
        ("M1", v_ov1),
        ("M2", v_ov1),
        ("M3", v_ov3),
        ("M4", v_ov3),
        ("M5", v_ov5),
        ("M6", v_ov5),
    ] {
        bias.device(name, v, 0);
    }
    for (name, v) in [
        ("M7", v_ov7),
        ("M8", v_ov7),
        ("M9", v_ov9),
        ("M10", v_ov9),
        ("M11", v_ov9),
    ] {
        bias.device(name, v, 1);
    }
    bias.device("Mb", v_ovb, 0);
    bias.stacks = vec![v_ovb + v_ov1 + v_ov3.max(v_ov5), v_ov7 + v_ov9];

    Analysis {
        metrics: vec![
            ("gain", gain_db),
            ("ugf", ugf_hz * 1e-6),
            ("v_hys_err", v_hys_mv),
            ("v_offset", v_offset_mv),
            ("power", power_w * 1e6),
        ],
        bias,
        gain_stacks: vec![0, 1],
        currents: vec![i_tail, i_diode, i_cross, i_out],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignPoint, Region};
    use crate::evaluator::CircuitModel;
    use crate::presets::Preset;

    fn nominal() -> Vec<f64> {
        let mut x = vec![0.0; 12];
        x[W1] = 10e-6;
        x[L1] = 0.5e-6;
        x[W3] = 4e-6;
        x[L3] = 0.5e-6;
        x[W5] = 6e-6;
        x[L5] = 0.5e-6;
        x[W7] = 20e-6;
        x[L7] = 0.5e-6;
        x[W9] = 10e-6;
        x[L9] = 1e-6;
        x[WB] = 10e-6;
        x[LB] = 1e-6;
        x
    }

    fn eval(x: &[f64]) -> crate::evaluator::Evaluation {
        CircuitModel::new(Preset::Comparator, ProcessConstants::default())
            .evaluate(&DesignPoint::new(x.to_vec()))
            .unwrap()
    }

    #[test]
    fn nominal_point_is_healthy() {
        let e = eval(&nominal());
        assert!(e.simulation_ok, "{:?}", e);
        assert_eq!(e.regions.len(), 12);
        assert!(e.regions.values().all(|&r| r == Region::Saturation));
        let cfg = Preset::Comparator.fom();
        assert_eq!(crate::fom::count_missed_specs(&e.metrics, &cfg).unwrap(), 0, "{:?}", e.metrics);
    }

    #[test]
    fn unit_ratio_has_no_hysteresis() {
        let mut x = nominal();
        x[W5] = x[W3];
        x[L5] = x[L3];
        assert_eq!(eval(&x).metrics["v_hys_err"], 0.0);
        x[W5] = 0.5 * x[W3];
        assert_eq!(eval(&x).metrics["v_hys_err"], 0.0);
    }

    #[test]
    fn hysteresis_grows_with_ratio() {
        let mut prev = 0.0;
        for a in [1.01, 1.2, 1.5, 2.0, 3.0, 5.0] {
            let h = hysteresis(0.1, a);
            assert!(h > prev);
            prev = h;
        }
    }

    #[test]
    fn offset_shrinks_with_input_area() {
        let x = nominal();
        let mut y = x.clone();
        y[W1] *= 2.0;
        y[L1] *= 1.5;
        assert!(eval(&y).metrics["v_offset"] < eval(&x).metrics["v_offset"]);
    }
}
