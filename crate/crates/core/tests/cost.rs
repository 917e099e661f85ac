mod common;

use proptest::prelude::*;
use stap::cost::TouchedLinks;
use stap::fixtures::sioux_falls;
use stap::interactions::{generate_weights, GenSpec};
use stap::{CostModel, SparseMatrix};

/// Symmetric linear model `t = c + S x` with a dominant diagonal.
fn arb_symmetric_linear() -> impl Strategy<Value = CostModel> {
    (2usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(1.0..20.0f64, n),
            prop::collection::vec(0.0..0.3f64, n * n),
        )
            .prop_map(move |(c, raw)| {
                let mut rows = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..i {
                        rows[i][j] = raw[i * n + j];
                        rows[j][i] = raw[i * n + j];
                    }
                }
                for i in 0..n {
                    rows[i][i] = 1.0 + rows[i].iter().sum::<f64>();
                }
                CostModel::linear(c, SparseMatrix::from_dense(&rows).unwrap()).unwrap()
            })
    })
}

fn flows(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..50.0f64, n)
}

fn sf_interacting(degrees: usize, symmetric: bool, seed: u64) -> (stap::fixtures::Fixture, CostModel) {
    let sf = sioux_falls();
    let w = generate_weights(&sf.network, &GenSpec::new(degrees, symmetric, seed)).unwrap();
    let model = CostModel::bpr(&sf.network, w).unwrap();
    (sf, model)
}

proptest! {
    #[test]
    fn linear_symmetric_jacobian_is_symmetric((model, x) in arb_symmetric_linear().prop_flat_map(|m| {
        let n = m.link_count();
        (Just(m), flows(n))
    })) {
        let n = model.link_count();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(model.jacobian_entry(&x, a, b), model.jacobian_entry(&x, b, a));
            }
        }
    }

    #[test]
    fn line_integral_gradient_is_link_times((model, x) in arb_symmetric_linear().prop_flat_map(|m| {
        let n = m.link_count();
        (Just(m), prop::collection::vec(1.0..50.0f64, n))
    })) {
        let t = model.link_times(&x);
        for a in 0..x.len() {
            let h = 1e-4 * x[a];
            let mut up = x.clone();
            let mut down = x.clone();
            up[a] += h;
            down[a] -= h;
            let fd = (model.line_integral_objective(&up).value - model.line_integral_objective(&down).value) / (2.0 * h);
            prop_assert!((fd - t[a]).abs() <= 1e-6 * t[a], "link {}: fd {} vs t {}", a, fd, t[a]);
        }
    }

    #[test]
    fn line_integral_is_quadratic_form((model, x) in arb_symmetric_linear().prop_flat_map(|m| {
        let n = m.link_count();
        (Just(m), flows(n))
    })) {
        // c·x + ½ xᵀ S x, computed independently from the matrix
        let zero = vec![0.0; x.len()];
        let c = model.link_times(&zero);
        let sx = model.interaction().mul_vec(&x);
        let expected: f64 = (0..x.len()).map(|a| c[a] * x[a] + 0.5 * x[a] * sx[a]).sum();
        let got = model.line_integral_objective(&x).value;
        prop_assert!((got - expected).abs() <= 1e-10 * expected.abs().max(1.0));
        prop_assert!(model.path_discrepancy(&x) <= 1e-8 * expected.abs().max(1.0));
    }

    #[test]
    fn sioux_falls_jacobian_matches_differences(seed in 1u64..50, scale in 0.2..1.5f64) {
        let (sf, model) = sf_interacting(1, seed % 2 == 0, seed);
        let x: Vec<f64> = sf.network.links().iter().enumerate()
            .map(|(a, l)| l.capacity * scale * (1.0 + (a % 5) as f64 / 5.0))
            .collect();
        for a in (0..76).step_by(7) {
            for b in model.interaction().row_cols(a).to_vec() {
                let h = 1e-3 * x[b];
                let mut up = x.clone();
                let mut down = x.clone();
                up[b] += h;
                down[b] -= h;
                let fd = (model.link_time(&up, a) - model.link_time(&down, a)) / (2.0 * h);
                let exact = model.jacobian_entry(&x, a, b);
                prop_assert!((fd - exact).abs() <= 1e-5 * exact.abs() + 1e-12, "({}, {}): {} vs {}", a, b, fd, exact);
            }
        }
    }

    #[test]
    fn beckmann_is_strictly_convex(
        base in prop::collection::vec(0.0..1.0f64, 76),
        dir in prop::collection::vec(-1.0..1.0f64, 76),
        step in 10.0..2000.0f64,
    ) {
        let sf = sioux_falls();
        let x: Vec<f64> = sf.network.links().iter().zip(&base).map(|(l, u)| 2.0 * u * l.capacity + step).collect();
        let z = |v: &[f64]| sf.model.beckmann_objective(v).unwrap();
        let up: Vec<f64> = x.iter().zip(&dir).map(|(x, d)| x + step * d).collect();
        let down: Vec<f64> = x.iter().zip(&dir).map(|(x, d)| x - step * d).collect();
        let second = z(&up) + z(&down) - 2.0 * z(&x);
        prop_assert!(second > 0.0, "second difference {}", second);
    }

    #[test]
    fn beckmann_gradient_is_link_times(base in prop::collection::vec(0.1..1.5f64, 76)) {
        let sf = sioux_falls();
        let x: Vec<f64> = sf.network.links().iter().zip(&base).map(|(l, u)| u * l.capacity).collect();
        let t = sf.model.link_times(&x);
        for a in (0..76).step_by(5) {
            let h = 1e-5 * x[a];
            let mut up = x.clone();
            let mut down = x.clone();
            up[a] += h;
            down[a] -= h;
            let fd = (sf.model.beckmann_objective(&up).unwrap() - sf.model.beckmann_objective(&down).unwrap()) / (2.0 * h);
            prop_assert!((fd - t[a]).abs() <= 1e-6 * t[a]);
        }
    }

    #[test]
    fn incremental_updates_equal_full(seed in 1u64..100, changes in prop::collection::vec((0usize..76, 0.0..5000.0f64), 1..20)) {
        let (sf, model) = sf_interacting(2, seed % 3 != 0, seed);
        let mut x: Vec<f64> = sf.network.links().iter().map(|l| 0.5 * l.capacity).collect();
        let mut t = model.link_times(&x);
        let mut scratch = TouchedLinks::new(76);
        for (a, v) in changes {
            x[a] = v;
            model.update_times(&x, &mut t, [a], &mut scratch);
            let full = model.link_times(&x);
            prop_assert!(t.iter().zip(&full).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

#[test]
fn asymmetric_line_integral_depends_on_path() {
    let (sf, model) = sf_interacting(2, false, 3);
    let x: Vec<f64> = sf.network.links().iter().map(|l| l.capacity).collect();
    assert!(model.line_integral_objective(&x).path_dependent);
    assert!(model.path_discrepancy(&x) > 0.0);
    assert!(model.objective(&x).is_none());
}
