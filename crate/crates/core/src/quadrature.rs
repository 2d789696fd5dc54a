//! Quadrature rules on the reference triangle and on edges.
//!
//! The triangle rule is a collapsed (conical product) Gauss–Legendre rule:
//! `x = u`, `y = v (1 - u)` maps the unit square onto the reference triangle,
//! and an `n`-point Gauss rule in each direction integrates polynomials of
//! total degree `2n - 2` exactly once the Jacobian `1 - u` is folded in.
//! All weights are positive and normalized to sum to one, so
//! `∫_K f ≈ |K| Σ w_q f(x_q)`.

/// Default polynomial exactness of element integrals.
pub const DEFAULT_DEGREE: usize = 10;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = if n == 0 { 0.0 } else { n as f64 * (x * p1 - p0) / (x * x - 1.0) };
    (p, dp)
}

/// Rule on the reference triangle in barycentric coordinates.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Rule exact for polynomials of total degree `degree`.
    pub fn with_degree(degree: usize) -> Self {
        let n = (degree + 3) / 2;
        let (gx, gw) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&u, &wu) in gx.iter().zip(&gw) {
            for (&v, &wv) in gx.iter().zip(&gw) {
                let x = u;
                let y = v * (1.0 - u);
                points.push([1.0 - x - y, x, y]);
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        TriangleRule { points, weights, degree }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl Default for TriangleRule {
    fn default() -> Self {
        TriangleRule::with_degree(DEFAULT_DEGREE)
    }
}

/// Gauss rule on `[0, 1]` for edge integrals; weights sum to one.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EdgeRule {
    pub fn gauss(n: usize) -> Self {
        let (points, weights) = gauss_legendre(n);
        EdgeRule { points, weights }
    }
}

impl Default for EdgeRule {
    fn default() -> Self {
        EdgeRule::gauss(4)
    }
}
