//! Adaptive Dormand-Prince 5(4) integrator for autonomous systems.

use crate::error::{KinematError, Result};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

// difference between the 5th- and embedded 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 2_000_000;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

/// Integrates `y' = rhs(y)` over parameter length `span` (either sign).
///
/// `admissible(prev, next)` may veto an otherwise accepted step, which is
/// then retried with half the step size. `on_step(s, y)` sees every accepted
/// state, starting with the initial one.
pub(crate) fn integrate<F, A, O>(
    y0: &[f64],
    span: f64,
    settings: Settings,
    mut rhs: F,
    mut admissible: A,
    mut on_step: O,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
    A: FnMut(&[f64], &[f64]) -> bool,
    O: FnMut(f64, &[f64]),
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    on_step(0.0, &y);
    if span == 0.0 {
        return Ok(y);
    }
    let dir = span.signum();
    let total = span.abs();

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    rhs(&y, &mut k[0]);
    let mut h = initial_step(&y, &k[0], dir, settings, &mut rhs).min(total).min(settings.max_step);
    let mut t = 0.0f64;
    let mut last_rejected = false;

    for _ in 0..MAX_STEPS {
        if t >= total {
            return Ok(y);
        }
        if total - t < h * (1.0 + 1e-12) {
            h = total - t;
        }
        if h < 1e-13 * t.max(1.0) {
            return Err(KinematError::StepUnderflow { at: dir * t, step: h });
        }
        let hs = dir * h;
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + hs * acc;
            }
            rhs(&stage, &mut k[s]);
        }
        // stage 7 evaluated at the 5th-order solution (FSAL)
        y_new.copy_from_slice(&stage);

        let mut err = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = settings.atol + settings.rtol * y[i].abs().max(y_new[i].abs());
            let r = hs * e / sc;
            err += r * r;
        }
        let err = (err / dim.max(1) as f64).sqrt();

        if err <= 1.0 {
            if !admissible(&y, &y_new) {
                h *= 0.5;
                last_rejected = true;
                continue;
            }
            t += h;
            if total - t <= 1e-14 * total {
                t = total;
            }
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            on_step(dir * t, &y);
            let mut fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(settings.max_step);
            last_rejected = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
            last_rejected = true;
        }
    }
    Err(KinematError::StepUnderflow { at: dir * t, step: h })
}

fn scaled_norm(v: &[f64], y: &[f64], settings: Settings) -> f64 {
    let sum: f64 = v.iter().zip(y).map(|(v, y)| (v / (settings.atol + settings.rtol * y.abs())).powi(2)).sum();
    (sum / v.len().max(1) as f64).sqrt()
}

/// Starting step from the size of `y`, `y'` and a difference estimate of `y''`
/// (Hairer, Norsett and Wanner, Solving ODEs I, II.4).
fn initial_step<F: FnMut(&[f64], &mut [f64])>(y: &[f64], f0: &[f64], dir: f64, settings: Settings, rhs: &mut F) -> f64 {
    let d0 = scaled_norm(y, y, settings);
    let d1 = scaled_norm(f0, y, settings);
    if d1 == 0.0 {
        return 1e-6f64.max(settings.max_step.min(1.0));
    }
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(y, f)| y + dir * h0 * f).collect();
    let mut f1 = vec![0.0; y.len()];
    rhs(&y1, &mut f1);
    let df: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_norm(&df, y, settings) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> Settings {
        Settings { rtol: 1e-11, atol: 1e-11, max_step: f64::INFINITY }
    }

    #[test]
    fn exponential_growth_forward_and_backward() {
        let rhs = |y: &[f64], d: &mut [f64]| d[0] = y[0];
        for span in [1.0, -1.0, 2.5] {
            let y = integrate(&[1.0], span, tight(), rhs, |_, _| true, |_, _| {}).unwrap();
            assert!((y[0] - f64::exp(span)).abs() < 1e-9 * f64::exp(span));
        }
    }

    #[test]
    fn harmonic_oscillator_period() {
        let rhs = |y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let y = integrate(&[1.0, 0.0], 2.0 * std::f64::consts::PI, tight(), rhs, |_, _| true, |_, _| {})
            .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn zero_span_and_observer() {
        let mut seen = Vec::new();
        let y = integrate(&[3.0], 0.0, tight(), |_, d| d[0] = 1.0, |_, _| true, |s, _| seen.push(s)).unwrap();
        assert_eq!(y, vec![3.0]);
        assert_eq!(seen, vec![0.0]);

        let mut seen = Vec::new();
        integrate(&[0.0], -2.0, tight(), |_, d| d[0] = 1.0, |_, _| true, |s, _| seen.push(s)).unwrap();
        assert_eq!(*seen.last().unwrap(), -2.0);
        assert!(seen.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn admissibility_forces_small_steps() {
        let mut count = 0;
        integrate(
            &[0.0],
            1.0,
            tight(),
            |_, d| d[0] = 1.0,
            |a, b| (b[0] - a[0]).abs() <= 0.01 + 1e-12,
            |_, _| count += 1,
        )
        .unwrap();
        assert!(count >= 101);
    }

    #[test]
    fn vetoing_everything_underflows() {
        let r = integrate(&[0.0], 1.0, tight(), |_, d| d[0] = 1.0, |_, _| false, |_, _| {});
        assert!(matches!(r, Err(KinematError::StepUnderflow { .. })));
    }
}
