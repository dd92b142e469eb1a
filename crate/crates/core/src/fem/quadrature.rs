//! Quadrature on the reference triangle and on the unit interval.

/// Default polynomial exactness, for triangles and for curve edges alike.
pub const DEFAULT_DEGREE: usize = 5;

/// Rule on the reference triangle `{(0,0), (1,0), (0,1)}`: barycentric
/// points and weights summing to the reference area 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Rule on `[0, 1]`, weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRule {
    pub degree: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Rule exact for polynomials of total degree `degree`. Degree 5 is the
    /// symmetric 7-point Radon rule; other degrees use a collapsed Gauss
    /// product rule.
    pub fn new(degree: usize) -> Self {
        if degree == 5 {
            return radon7();
        }
        collapsed_gauss(degree)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

impl Default for TriangleRule {
    fn default() -> Self {
        TriangleRule::new(DEFAULT_DEGREE)
    }
}

impl LineRule {
    /// Gauss-Legendre rule exact for polynomials of degree `degree`.
    pub fn new(degree: usize) -> Self {
        let n = degree / 2 + 1;
        let (x, w) = gauss_legendre(n);
        LineRule {
            degree,
            points: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|&v| 0.5 * v).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }
}

impl Default for LineRule {
    fn default() -> Self {
        LineRule::new(DEFAULT_DEGREE)
    }
}

fn radon7() -> TriangleRule {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (9.0 + 2.0 * s15) / 21.0;
    let c = (6.0 + s15) / 21.0;
    let d = (9.0 - 2.0 * s15) / 21.0;
    let wa = (155.0 - s15) / 2400.0;
    let wc = (155.0 + s15) / 2400.0;
    let third = 1.0 / 3.0;
    TriangleRule {
        degree: 5,
        points: vec![
            [third, third, third],
            [a, a, b],
            [a, b, a],
            [b, a, a],
            [c, c, d],
            [c, d, c],
            [d, c, c],
        ],
        weights: vec![9.0 / 80.0, wa, wa, wa, wc, wc, wc],
    }
}

/// Duffy-collapsed tensor Gauss rule. With `x = u`, `y = v (1 - u)`, a
/// degree-p integrand becomes degree p + 1 in `u` and p in `v`.
fn collapsed_gauss(degree: usize) -> TriangleRule {
    let nu = degree.div_ceil(2) + 1;
    let nv = degree / 2 + 1;
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (&tu, &au) in xu.iter().zip(&wu) {
        let u = 0.5 * (tu + 1.0);
        for (&tv, &av) in xv.iter().zip(&wv) {
            let v = 0.5 * (tv + 1.0);
            let (x, y) = (u, v * (1.0 - u));
            points.push([1.0 - x - y, x, y]);
            weights.push(0.25 * au * av * (1.0 - u));
        }
    }
    TriangleRule {
        degree,
        points,
        weights,
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of l1^a l2^b l3^c over the reference triangle:
    /// a! b! c! / (a + b + c + 2)! times twice the area.
    fn monomial(a: u32, b: u32, c: u32) -> f64 {
        factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    fn integrate(rule: &TriangleRule, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        rule.iter().map(|(p, w)| w * f(p)).sum()
    }

    #[test]
    fn area_and_bubble() {
        let rule = TriangleRule::default();
        assert_eq!(rule.len(), 7);
        assert!((integrate(&rule, |_| 1.0) - 0.5).abs() < 1e-15);
        let bubble = integrate(&rule, |l| l[0] * l[1] * l[2]);
        assert!((bubble - 1.0 / 120.0).abs() < 1e-16);
        assert!((monomial(1, 1, 1) - 1.0 / 120.0).abs() < 1e-18);
    }

    #[test]
    fn exact_up_to_degree_five() {
        for degree in [1, 2, 3, 4, 5, 6, 8, 11] {
            let rule = TriangleRule::new(degree);
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let c = degree as u32 - a - b;
                    let got = integrate(&rule, |l| {
                        l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32)
                    });
                    assert!(
                        (got - monomial(a, b, c)).abs() < 1e-15,
                        "degree {degree}: ({a},{b},{c}) {got} vs {}",
                        monomial(a, b, c)
                    );
                }
            }
        }
    }

    #[test]
    fn x_to_the_fifth() {
        // x = l2 on the reference triangle: 5! / 7! = 1/42.
        let got = integrate(&TriangleRule::default(), |l| l[1].powi(5));
        assert!((got - 1.0 / 42.0).abs() < 1e-15);
    }

    #[test]
    fn line_rule_exactness() {
        for degree in 0..12 {
            let rule = LineRule::new(degree);
            for p in 0..=degree {
                let got: f64 = rule.iter().map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((got - 1.0 / (p as f64 + 1.0)).abs() < 1e-15, "{degree} {p}");
            }
        }
        assert_eq!(LineRule::default().len(), 3);
    }
}
