//! Gauss–Legendre rules on arbitrary intervals.

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre polynomial roots.
    ///
    /// # Panics
    /// If `n == 0`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "a quadrature rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
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
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes on [-1, 1] in increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// (abscissa, weight) pairs mapped onto [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    /// Node positions on [0, 1] and matching weights.
    pub fn unit(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.on_interval(0.0, 1.0)
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let pm1 = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_rule_matches_tabulated_values() {
        let g = GaussLegendre::new(4);
        let expected = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3];
        assert!((g.nodes()[0] - expected[0]).abs() < 1e-15);
        assert!((g.nodes()[1] - expected[1]).abs() < 1e-15);
        assert!((g.weights()[0] - 0.347_854_845_137_453_9).abs() < 1e-15);
        assert!((g.weights()[1] - 0.652_145_154_862_546_1).abs() < 1e-15);
    }

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..=12 {
            let g = GaussLegendre::new(n);
            for p in 0..(2 * n) {
                let approx: f64 = g.on_interval(0.5, 2.0).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = (2f64.powi(p as i32 + 1) - 0.5f64.powi(p as i32 + 1)) / (p as f64 + 1.0);
                assert!((approx - exact).abs() < 1e-12 * exact.abs().max(1.0), "n={n} p={p}");
            }
        }
    }

    #[test]
    fn sixty_four_point_rule_weights_sum_to_two() {
        let g = GaussLegendre::new(64);
        let s: f64 = g.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
    }
}
