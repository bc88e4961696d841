//! Dormand–Prince 5(4) step on flat `f64` state vectors.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Scratch space for one step; `y_new` and `k7` (derivative at the new
/// point, first-same-as-last) are valid after a successful call.
#[derive(Debug, Clone)]
pub struct Workspace {
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    k5: Vec<f64>,
    k6: Vec<f64>,
    pub k7: Vec<f64>,
    tmp: Vec<f64>,
    pub y_new: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            k5: vec![0.0; n],
            k6: vec![0.0; n],
            k7: vec![0.0; n],
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }
}

/// One trial step from `(x, y)` with derivative `k1`. Returns the scaled RMS
/// error estimate (accept when ≤ 1).
pub fn step<F, E>(f: &mut F, x: f64, y: &[f64], k1: &[f64], h: f64, atol: f64, rtol: f64, ws: &mut Workspace) -> Result<f64, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let n = y.len();
    for i in 0..n {
        ws.tmp[i] = y[i] + h * A21 * k1[i];
    }
    f(x + C2 * h, &ws.tmp, &mut ws.k2)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + h * (A31 * k1[i] + A32 * ws.k2[i]);
    }
    f(x + C3 * h, &ws.tmp, &mut ws.k3)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + h * (A41 * k1[i] + A42 * ws.k2[i] + A43 * ws.k3[i]);
    }
    f(x + C4 * h, &ws.tmp, &mut ws.k4)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + h * (A51 * k1[i] + A52 * ws.k2[i] + A53 * ws.k3[i] + A54 * ws.k4[i]);
    }
    f(x + C5 * h, &ws.tmp, &mut ws.k5)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + h * (A61 * k1[i] + A62 * ws.k2[i] + A63 * ws.k3[i] + A64 * ws.k4[i] + A65 * ws.k5[i]);
    }
    f(x + h, &ws.tmp, &mut ws.k6)?;
    for i in 0..n {
        ws.y_new[i] = y[i] + h * (A71 * k1[i] + A73 * ws.k3[i] + A74 * ws.k4[i] + A75 * ws.k5[i] + A76 * ws.k6[i]);
    }
    f(x + h, &ws.y_new, &mut ws.k7)?;
    let mut acc = 0.0;
    for i in 0..n {
        let e = h * (E1 * k1[i] + E3 * ws.k3[i] + E4 * ws.k4[i] + E5 * ws.k5[i] + E6 * ws.k6[i] + E7 * ws.k7[i]);
        let sc = atol + rtol * y[i].abs().max(ws.y_new[i].abs());
        acc += (e / sc) * (e / sc);
    }
    Ok((acc / n.max(1) as f64).sqrt())
}

/// Step-size factor from an error estimate.
pub fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifth_order_on_exponential() {
        // y' = y; one step of size h has local error O(h^6)
        let mut f = |_x: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ()> {
            dy[0] = y[0];
            Ok(())
        };
        let mut ws = Workspace::new(1);
        let mut errs = Vec::new();
        for h in [0.2, 0.1] {
            step(&mut f, 0.0, &[1.0], &[1.0], h, 1e-12, 1e-12, &mut ws).unwrap();
            errs.push((ws.y_new[0] - f64::exp(h)).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 5.5, "observed local order {order}");
    }
}
