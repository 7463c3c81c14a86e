//! Benchmark functions, negated so that larger is better.

use std::f64::consts::PI;

use super::EvalError;
use crate::design::DesignError;

/// Maximum of the negated Branin function.
pub const BRANIN_MAX: f64 = -0.397_887_357_729_738;
/// Maximum of the negated Hartmann-6 function.
pub const HARTMANN6_MAX: f64 = 3.322_368_011_415_515;

/// Negated Branin on `[-5, 10] x [0, 15]`.
pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let q = x2 - b * x1 * x1 + c * x1 - 6.0;
    -(q * q + 10.0 * (1.0 - t) * x1.cos() + 10.0)
}

const H6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Negated Hartmann-6 on `[0, 1]^6`.
pub fn hartmann6(x: &[f64; 6]) -> f64 {
    H6_ALPHA
        .iter()
        .zip(H6_A.iter().zip(H6_P.iter()))
        .map(|(alpha, (a, p))| {
            let e: f64 = (0..6).map(|j| a[j] * (x[j] - p[j]).powi(2)).sum();
            alpha * (-e).exp()
        })
        .sum()
}

fn check_box(name: &str, x: &[f64], bounds: &[(f64, f64)]) -> Result<(), EvalError> {
    if x.len() != bounds.len() {
        return Err(DesignError::DimensionMismatch {
            expected: bounds.len(),
            got: x.len(),
        }
        .into());
    }
    for (i, (&v, &(lo, hi))) in x.iter().zip(bounds).enumerate() {
        if !(v >= lo && v <= hi) {
            return Err(DesignError::OutOfRange {
                name: format!("{name}.x{}", i + 1),
                value: v,
                lower: lo,
                upper: hi,
            }
            .into());
        }
    }
    Ok(())
}

/// Evaluate a benchmark by name (`branin` or `hartmann6`).
pub fn synthetic_eval(name: &str, x: &[f64]) -> Result<f64, EvalError> {
    match name {
        "branin" => {
            check_box(name, x, &[(-5.0, 10.0), (0.0, 15.0)])?;
            Ok(branin(x[0], x[1]))
        }
        "hartmann6" => {
            check_box(name, x, &[(0.0, 1.0); 6])?;
            let mut a = [0.0; 6];
            a.copy_from_slice(x);
            Ok(hartmann6(&a))
        }
        other => Err(EvalError::UnknownFunction(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn branin_known_minimizers() {
        for (a, b) in [(-PI, 12.275), (PI, 2.275), (9.42478, 2.475)] {
            assert!((branin(a, b) - BRANIN_MAX).abs() < 1e-5, "{a} {b}");
        }
    }

    #[test]
    fn branin_grid_never_exceeds_max() {
        let mut best = f64::NEG_INFINITY;
        for i in 0..=600 {
            for j in 0..=600 {
                let x1 = -5.0 + 15.0 * i as f64 / 600.0;
                let x2 = 15.0 * j as f64 / 600.0;
                best = best.max(branin(x1, x2));
            }
        }
        assert!(best <= BRANIN_MAX + 1e-12);
        assert!(BRANIN_MAX - best < 1e-3);
    }

    #[test]
    fn hartmann6_known_maximizer() {
        let x = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];
        assert!((hartmann6(&x) - HARTMANN6_MAX).abs() < 1e-5);
    }

    fn polish(mut best: [f64; 6], mut fbest: f64) -> ([f64; 6], f64) {
        let mut step = 0.05;
        while step > 1e-8 {
            let mut improved = false;
            for j in 0..6 {
                for s in [-step, step] {
                    let mut y = best;
                    y[j] = (y[j] + s).clamp(0.0, 1.0);
                    let f = hartmann6(&y);
                    if f > fbest {
                        fbest = f;
                        best = y;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (best, fbest)
    }

    #[test]
    fn hartmann6_search_does_not_beat_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut starts: Vec<([f64; 6], f64)> = (0..20_000)
            .map(|_| {
                let x: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>());
                (x, hartmann6(&x))
            })
            .collect();
        starts.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut fbest = f64::NEG_INFINITY;
        for &(x0, f0) in starts.iter().take(30) {
            fbest = fbest.max(polish(x0, f0).1);
        }
        assert!(fbest <= HARTMANN6_MAX + 1e-9);
        assert!(HARTMANN6_MAX - fbest < 1e-6, "{fbest}");
    }

    #[test]
    fn dispatch_and_errors() {
        assert!((synthetic_eval("branin", &[PI, 2.275]).unwrap() - BRANIN_MAX).abs() < 1e-6);
        assert!(matches!(synthetic_eval("rosen", &[0.0]), Err(EvalError::UnknownFunction(_))));
        assert!(matches!(
            synthetic_eval("branin", &[11.0, 0.0]),
            Err(EvalError::Range(DesignError::OutOfRange { .. }))
        ));
        assert!(synthetic_eval("hartmann6", &[0.5; 5]).is_err());
    }
}
