//! Central finite-difference oracle for tape gradients.
//!
//! Only forward values are used, so it stays independent of every backward
//! rule it is used to check.

use crate::error::Result;

use super::{Matrix, Tape, Var};

/// Central finite-difference check of every parameter slot.
///
/// `build` records a forward pass from the given parameter values and
/// returns the scalar output. Returns the worst relative error, with the
/// denominator floored at `floor`.
pub fn check_gradients(
    params: &[Matrix],
    step: f64,
    floor: f64,
    build: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> f64 {
    check_with(params, floor, build, |f| (f(step) - f(-step)) / (2.0 * step))
}

/// As [`check_gradients`], but each numeric derivative is a Ridders
/// extrapolation of central differences starting at `step` and shrinking
/// it by 1.4 per stage. Removes the truncation error that dominates plain
/// differences on high-curvature objectives.
pub fn check_gradients_ridders(
    params: &[Matrix],
    step: f64,
    floor: f64,
    build: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> f64 {
    check_with(params, floor, build, |f| ridders(f, step))
}

/// Ridders' polynomial extrapolation of central differences of `f` at 0.
pub fn ridders(f: &mut dyn FnMut(f64) -> f64, step: f64) -> f64 {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const NTAB: usize = 10;
    const SAFE: f64 = 2.0;
    let mut a = [[0.0f64; NTAB]; NTAB];
    let mut h = step;
    a[0][0] = (f(h) - f(-h)) / (2.0 * h);
    let mut err = f64::INFINITY;
    let mut ans = a[0][0];
    for i in 1..NTAB {
        h /= CON;
        a[0][i] = (f(h) - f(-h)) / (2.0 * h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let errt = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if errt <= err {
                err = errt;
                ans = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= SAFE * err {
            break;
        }
    }
    ans
}

fn check_with(
    params: &[Matrix],
    floor: f64,
    build: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
    derivative: impl Fn(&mut dyn FnMut(f64) -> f64) -> f64,
) -> f64 {
    let eval = |values: &[Matrix]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|m| tape.param(m.clone())).collect();
        let out = build(&mut tape, &vars).unwrap();
        tape.value(out).data()[0]
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|m| tape.param(m.clone())).collect();
    let out = build(&mut tape, &vars).unwrap();
    let analytic = tape.backward(out).unwrap().params();

    let mut worst = 0.0f64;
    let mut values = params.to_vec();
    for p in 0..params.len() {
        for idx in 0..params[p].len() {
            let orig = values[p].data()[idx];
            let mut shifted = |d: f64| {
                values[p].data_mut()[idx] = orig + d;
                let v = eval(&values);
                values[p].data_mut()[idx] = orig;
                v
            };
            let numeric = derivative(&mut shifted);
            let a = analytic[p].data()[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridders_beats_plain_difference_on_steep_function() {
        let f = |x: f64| (5.0 * (1.0 + x)).exp();
        let exact = 5.0 * 5.0f64.exp();
        let plain = (f(1e-3) - f(-1e-3)) / 2e-3;
        let extrapolated = ridders(&mut |d| f(d), 1e-2);
        assert!((extrapolated - exact).abs() / exact < 1e-10);
        assert!((plain - exact).abs() > (extrapolated - exact).abs());
    }
}
