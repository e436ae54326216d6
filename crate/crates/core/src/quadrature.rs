//! Quadrature rules on triangles (barycentric coordinates) and on edges.

/// A point in barycentric coordinates with its weight relative to the
/// element measure, so `sum(weights) == 1`.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

// Symmetric 12-point rule, exact for polynomials of total degree 6.
const S21_A: f64 = 0.063_089_014_491_502_130_434_454_3;
const W_A: f64 = 0.050_844_906_370_206_683_305_444_36;
const S21_B: f64 = 0.249_286_745_170_910_688_009_955_2;
const W_B: f64 = 0.116_786_275_726_378_932_626_282_6;
const S111_1: f64 = 0.053_145_049_844_817_127_728_124_73;
const S111_2: f64 = 0.310_352_451_033_784_126_631_018_4;
const W_C: f64 = 0.082_851_075_618_373_858_700_803_16;

/// Degree-6 symmetric triangle rule (12 points).
pub fn triangle_degree6() -> [QuadPoint; 12] {
    let mut pts = [QuadPoint {
        bary: [0.0; 3],
        weight: 0.0,
    }; 12];
    let mut n = 0;
    for (a, w) in [(S21_A, W_A), (S21_B, W_B)] {
        let o = 1.0 - 2.0 * a;
        for bary in [[o, a, a], [a, o, a], [a, a, o]] {
            pts[n] = QuadPoint { bary, weight: w };
            n += 1;
        }
    }
    let (c1, c2) = (S111_1, S111_2);
    let c3 = 1.0 - c1 - c2;
    for bary in [
        [c1, c2, c3],
        [c1, c3, c2],
        [c2, c1, c3],
        [c2, c3, c1],
        [c3, c1, c2],
        [c3, c2, c1],
    ] {
        pts[n] = QuadPoint { bary, weight: W_C };
        n += 1;
    }
    pts
}

/// 3-point Gauss-Legendre rule on the unit interval: `(t, weight)` with
/// weights summing to 1. Exact to degree 5.
pub fn edge_gauss3() -> [(f64, f64); 3] {
    let s = 0.5 * (0.6f64).sqrt();
    [(0.5 - s, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + s, 5.0 / 18.0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // Integral of l1^i l2^j l3^k divided by the element area.
    fn exact(i: u32, j: u32, k: u32) -> f64 {
        2.0 * factorial(i) * factorial(j) * factorial(k) / factorial(i + j + k + 2)
    }

    #[test]
    fn triangle_rule_is_exact_to_degree_six() {
        let rule = triangle_degree6();
        for i in 0..=6u32 {
            for j in 0..=(6 - i) {
                for k in 0..=(6 - i - j) {
                    let q: f64 = rule
                        .iter()
                        .map(|p| {
                            p.weight
                                * p.bary[0].powi(i as i32)
                                * p.bary[1].powi(j as i32)
                                * p.bary[2].powi(k as i32)
                        })
                        .sum();
                    let e = exact(i, j, k);
                    assert!(((q - e) / e).abs() < 1e-14, "({i},{j},{k}): {q} vs {e}");
                }
            }
        }
    }

    #[test]
    fn triangle_rule_points_are_inside() {
        for p in triangle_degree6() {
            assert!(p.bary.iter().all(|&l| l > 0.0 && l < 1.0));
            assert!((p.bary.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_rule_is_exact_to_degree_five() {
        for k in 0..=5 {
            let q: f64 = edge_gauss3().iter().map(|&(t, w)| w * t.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
