mod common;

use proptest::prelude::*;
use snapvcs::kernels::ConvSpec;

use common::{gradcheck, op_gradcheck, rng, uniform_tensor, OPS};

const PROBES: usize = 100;
const TOL: f64 = 1e-4;

#[test]
fn every_op_matches_central_differences() {
    for (i, op) in OPS.iter().enumerate() {
        let e = op_gradcheck(op, PROBES, 1 + i as u64);
        assert!(e <= TOL, "{op}: max rel err {e}");
    }
}

#[test]
fn conv3d_small_linear_case_is_tight() {
    let spec = ConvSpec { stride: [1, 1, 1], pad: [1, 0, 1] };
    let mut r = rng(4);
    let x = uniform_tensor(&[1, 1, 2, 3, 3], -1.0, 1.0, &mut r);
    let w = uniform_tensor(&[2, 1, 2, 2, 2], -1.0, 1.0, &mut r);
    let b = uniform_tensor(&[2], -1.0, 1.0, &mut r);
    let e = gradcheck(&[x, w, b], |t, v| t.conv3d(v[0], v[1], v[2], spec).unwrap(), PROBES, 4);
    assert!(e <= 1e-6, "max rel err {e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ops_pass_for_any_seed(seed in any::<u64>(), op in 0usize..OPS.len()) {
        let e = op_gradcheck(OPS[op], 20, seed);
        prop_assert!(e <= TOL, "{}: {}", OPS[op], e);
    }

    #[test]
    fn conv3d_random_geometry(
        seed in 0u64..10_000,
        cin in 1usize..3,
        cout in 1usize..3,
        t in 1usize..4,
        hw in 3usize..7,
        stride_hw in 1usize..3,
    ) {
        let mut r = rng(seed);
        let spec = ConvSpec { stride: [1, stride_hw, stride_hw], pad: [1, 1, 1] };
        let x = uniform_tensor(&[1, cin, t, hw, hw], -1.0, 1.0, &mut r);
        let w = uniform_tensor(&[cout, cin, 3, 3, 3], -0.5, 0.5, &mut r);
        let b = uniform_tensor(&[cout], -0.5, 0.5, &mut r);
        let e = gradcheck(&[x, w, b], |tp, v| tp.conv3d(v[0], v[1], v[2], spec).unwrap(), 30, seed);
        prop_assert!(e <= TOL, "max rel err {}", e);
    }
}
