use microflow::{apply_affine, invert_affine, solve_affine, Point2, TriangleAffine, WarpError};
use proptest::prelude::*;

/// Solves the stacked 6×6 system `[x y 1 0 0 0; 0 0 0 x y 1] m = dst` by
/// Gaussian elimination with partial pivoting.
fn oracle_affine(src: [Point2; 3], dst: [Point2; 3]) -> Option<[f64; 6]> {
    let mut a = [[0.0f64; 7]; 6];
    for v in 0..3 {
        let (x, y) = (src[v].x, src[v].y);
        a[2 * v] = [x, y, 1.0, 0.0, 0.0, 0.0, dst[v].x];
        a[2 * v + 1] = [0.0, 0.0, 0.0, x, y, 1.0, dst[v].y];
    }
    for col in 0..6 {
        let pivot = (col..6).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..6 {
            if row != col {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col];
                for (v, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                    *v -= f * p;
                }
            }
        }
    }
    Some(std::array::from_fn(|i| a[i][6] / a[i][i]))
}

fn point() -> impl Strategy<Value = Point2> {
    (-300.0f64..300.0, -300.0f64..300.0).prop_map(|(x, y)| Point2::new(x, y))
}

fn well_shaped(t: &[Point2; 3]) -> bool {
    let area = 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).abs();
    let longest = (t[1] - t[0])
        .norm()
        .max((t[2] - t[1]).norm())
        .max((t[0] - t[2]).norm());
    area >= 0.01 * longest * longest && area > 1.0
}

fn triangle() -> impl Strategy<Value = [Point2; 3]> {
    [point(), point(), point()].prop_filter("well shaped", well_shaped)
}

proptest! {
    #[test]
    fn matches_gaussian_elimination(src in triangle(), dst in triangle()) {
        let a = solve_affine(src, dst).unwrap();
        let oracle = oracle_affine(src, dst).unwrap();
        for (got, want) in a.params().iter().zip(oracle) {
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn inverse_round_trips(src in triangle(), dst in triangle(), p in point()) {
        let a = solve_affine(src, dst).unwrap();
        let inv = invert_affine(&a).unwrap();
        let back = apply_affine(&inv, apply_affine(&a, p));
        prop_assert!((back - p).norm() < 1e-8 * p.norm().max(1.0));
        // The inverse maps dst vertices onto src vertices.
        for v in 0..3 {
            prop_assert!((inv.apply(dst[v]) - src[v]).norm() < 1e-9 * 300.0);
        }
    }

    #[test]
    fn vectors_ignore_translation(src in triangle(), dst in triangle(), p in point(), q in point()) {
        let a = solve_affine(src, dst).unwrap();
        let via_points = apply_affine(&a, q) - apply_affine(&a, p);
        prop_assert!((a.apply_vector(q - p) - via_points).norm() < 1e-8 * (q - p).norm().max(1.0) * 10.0);
    }
}

#[test]
fn collinear_source_is_rejected() {
    let src = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)];
    let dst = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
    assert!(solve_affine(src, dst).is_err());
}

#[test]
fn singular_map_is_rejected() {
    assert!(matches!(
        TriangleAffine::new([1.0, 2.0, 0.0, 2.0, 4.0, 0.0], 0),
        Err(WarpError::NearSingular { .. })
    ));
}
