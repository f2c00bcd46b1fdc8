/// Quadrature point in barycentric coordinates with a weight relative to the
/// simplex volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePoint {
    pub bary: [f64; 4],
    pub weight: f64,
}

const TRIANGLE: [QuadraturePoint; 3] = [
    QuadraturePoint { bary: [0.5, 0.5, 0.0, 0.0], weight: 1.0 / 3.0 },
    QuadraturePoint { bary: [0.0, 0.5, 0.5, 0.0], weight: 1.0 / 3.0 },
    QuadraturePoint { bary: [0.5, 0.0, 0.5, 0.0], weight: 1.0 / 3.0 },
];

const TET_A: f64 = 0.585_410_196_624_968_5;
const TET_B: f64 = 0.138_196_601_125_010_5;

const TETRAHEDRON: [QuadraturePoint; 4] = [
    QuadraturePoint { bary: [TET_A, TET_B, TET_B, TET_B], weight: 0.25 },
    QuadraturePoint { bary: [TET_B, TET_A, TET_B, TET_B], weight: 0.25 },
    QuadraturePoint { bary: [TET_B, TET_B, TET_A, TET_B], weight: 0.25 },
    QuadraturePoint { bary: [TET_B, TET_B, TET_B, TET_A], weight: 0.25 },
];

/// Degree-2 rule with `D + 1` points on a `D`-simplex.
pub fn simplex_rule(dim: usize) -> &'static [QuadraturePoint] {
    match dim {
        2 => &TRIANGLE,
        3 => &TETRAHEDRON,
        _ => panic!("unsupported dimension {dim}"),
    }
}
