//! Quadrature rules: Gauss--Legendre on an interval, trapezoid weights.

/// Gauss--Legendre nodes and weights on `[a, b]`.
///
/// Nodes by Newton iteration on the Legendre polynomial; accurate to machine
/// precision for the sizes used here (n <= a few hundred).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Uniform nodes and trapezoid weights on `[0, 1]` including both endpoints.
pub fn trapezoid_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let h = 1.0 / (n - 1) as f64;
    let nodes = (0..n).map(|j| j as f64 * h).collect();
    let mut weights = vec![h; n];
    weights[0] = 0.5 * h;
    weights[n - 1] = 0.5 * h;
    (nodes, weights)
}

/// Uniform periodic nodes on `[0, len)` with the (spectrally accurate)
/// rectangle weights `len / n`.
pub fn periodic_uniform(n: usize, len: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let h = len / n as f64;
    ((0..n).map(|i| i as f64 * h).collect(), vec![h; n])
}

/// Trapezoid rule over time samples `(t_i, f_i)`.
pub fn trapezoid_series(t: &[f64], f: &[f64]) -> f64 {
    assert_eq!(t.len(), f.len());
    let mut acc = 0.0;
    for i in 1..t.len() {
        acc += 0.5 * (f[i] + f[i - 1]) * (t[i] - t[i - 1]);
    }
    acc
}
