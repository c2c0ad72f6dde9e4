//! Special functions: Gaussian Q-function, the -1 branch of the Lambert W
//! function, and Gauss quadrature rules used for fading averages.

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;
const FRAC_1_SQRT_PI: f64 = 0.5641895835477563;

/// Complementary error function, accurate to a few ulps.
///
/// Small arguments use the scaled Maclaurin series of erf (all terms
/// positive, no cancellation); large arguments use the classical continued
/// fraction evaluated with modified Lentz. Both paths avoid the ~1e-10
/// plateaus of coarse rational fits.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 1.3 {
        // erf(x) = 2x/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n / (2n+1)!!
        let x2 = x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 1.0;
        while term > sum * 1e-18 {
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
            n += 1.0;
        }
        1.0 - 2.0 * FRAC_1_SQRT_PI * x * (-x2).exp() * sum
    } else {
        // sqrt(pi) e^{x^2} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let tiny = 1e-300;
        let mut f: f64 = x;
        let mut c: f64 = x;
        let mut d: f64 = 0.0;
        for n in 1..400 {
            let a = n as f64 / 2.0;
            d = x + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = x + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        FRAC_1_SQRT_PI * (-x * x).exp() / f
    }
}

/// Standard Gaussian upper-tail probability Q(x) = Pr{N(0,1) > x}.
///
/// Total function; strictly decreasing.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard Gaussian density.
fn gauss_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Inverse of [`q_function`] on (0, 1).
///
/// Bisection to a rough bracket, then Newton polish, so the round trip holds
/// to better than 1e-10 relative.
pub fn inverse_q(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "inverse_q requires p in (0,1), got {p}"
        )));
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..6 {
        let err = q_function(x) - p;
        if err == 0.0 {
            break;
        }
        // dQ/dx = -pdf(x)
        let step = err / gauss_pdf(x);
        x += step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Negative reciprocal of Euler's number, the branch point of Lambert W.
pub fn neg_inv_e() -> f64 {
    -(-1f64).exp()
}

/// The -1 branch of the Lambert W function on [-1/e, 0).
///
/// Returns x <= -1 with x*exp(x) = y to a relative residual of 1e-12 or
/// better. Initial guess from the branch-point series (near -1/e) or the
/// log-log asymptotic (near 0), refined by Halley iterations.
pub fn lambert_w_m1(y: f64) -> Result<f64> {
    let branch = neg_inv_e();
    if !(y >= branch && y < 0.0) {
        return Err(Error::Domain(format!(
            "lambert_w_m1 requires y in [-1/e, 0), got {y}"
        )));
    }
    if y == branch {
        return Ok(-1.0);
    }

    // q = sqrt(2*(1 + e*y)) measures distance from the branch point.
    let q2 = 2.0 * (1.0 + std::f64::consts::E * y);
    let q = q2.max(0.0).sqrt();
    let series = -1.0
        - q
        - q2 / 6.0
        - (11.0 / 72.0) * q * q2 / 2.0
        - (43.0 / 540.0) * q2 * q2 / 4.0
        - (769.0 / 17280.0) * q2 * q2 * q / 4.0
        - (221.0 / 8505.0) * q2 * q2 * q2 / 8.0;
    if q < 1e-2 {
        // Truncation error is O(q^7); Halley stalls here because
        // d(x e^x)/dx vanishes at the branch point.
        return Ok(series.min(-1.0));
    }

    let mut w = if y < -0.27 {
        series
    } else {
        // y close to 0: W_{-1}(y) ~ ln(-y) - ln(-ln(-y)) + correction terms.
        let l1 = (-y).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1 + l2 * (l2 - 2.0) / (2.0 * l1 * l1)
            + l2 * (6.0 - 9.0 * l2 + 2.0 * l2 * l2) / (6.0 * l1 * l1 * l1)
    };

    for _ in 0..50 {
        let e = w.exp();
        let f = w * e - y;
        if f == 0.0 {
            break;
        }
        let w1 = w + 1.0;
        let denom = e * w1 - (w + 2.0) * f / (2.0 * w1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-16 * w.abs() {
            break;
        }
    }
    Ok(w.min(-1.0))
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let xm = 0.5 * (b + a);
    let xl = 0.5 * (b - a);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence up to degree n.
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = xm - xl * z;
        nodes[n - 1 - i] = xm + xl * z;
        let w = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Nodes and weights of the n-point Gauss-Laguerre rule for
/// integral_0^inf f(x) e^{-x} dx ~ sum_i w_i f(x_i).
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n {
        // Stroud-Secrest style initial guesses for the i-th root of L_n.
        z = if i == 0 {
            3.0 / (1.0 + 2.4 * nf)
        } else if i == 1 {
            z + 15.0 / (1.0 + 2.5 * nf)
        } else {
            let ai = (i - 1) as f64;
            z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (p1 - p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        // w_i = x_i / (n+1)^2 / L_{n+1}(x_i)^2; with the recurrence values
        // this reduces to the usual -1/(pp * n * p2) form for alpha = 0.
        let mut p1 = 1.0;
        let mut p2 = 0.0;
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
        }
        weights[i] = -1.0 / (pp * nf * p2);
    }
    (nodes, weights)
}
