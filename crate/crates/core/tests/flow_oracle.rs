use microflow::optflow::{read_flow, write_flow, GradientField};
use microflow::pipeline::median;
use microflow::synth::Texture;
use microflow::{
    compute_flow, lk_solve_at, spatial_gradients, temporal_gradient, CanonicalFrame, FlowParams,
    Grid, Point2,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Intensity of a textured quadratic patch.
fn quad(c: [f64; 6], x: f64, y: f64) -> f64 {
    c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
}

fn coefficients() -> impl Strategy<Value = [f64; 6]> {
    [
        0.3f64..0.7,
        -0.05f64..0.05,
        -0.05f64..0.05,
        -0.004f64..0.004,
        -0.004f64..0.004,
        -0.004f64..0.004,
    ]
}

/// Brute-force least squares over the stacked window rows.
fn stacked_solve(g: &GradientField, x: usize, y: usize) -> (DVector<f64>, f64) {
    let mut rows = Vec::new();
    for j in y - 1..=y + 1 {
        for i in x - 1..=x + 1 {
            rows.push((g.ix().get(i, j), g.iy().get(i, j), g.it().get(i, j)));
        }
    }
    let a = DMatrix::from_fn(9, 2, |r, c| if c == 0 { rows[r].0 } else { rows[r].1 });
    let b = DVector::from_fn(9, |r, _| -rows[r].2);
    let ata = a.transpose() * &a;
    let min_eig = ata.symmetric_eigenvalues().min();
    let d = ata.clone().cholesky().map_or_else(
        || DVector::zeros(2),
        |ch| ch.solve(&(a.transpose() * &b)),
    );
    (d, min_eig)
}

proptest! {
    #[test]
    fn central_differences_are_exact_on_quadratics(c in coefficients()) {
        let g = Grid::from_fn(7, 7, |x, y| quad(c, x as f64, y as f64));
        let (ix, iy) = spatial_gradients(&g).unwrap();
        for y in 1..6 {
            for x in 1..6 {
                let (xf, yf) = (x as f64, y as f64);
                prop_assert!((ix.get(x, y) - (c[1] + 2.0 * c[3] * xf + c[4] * yf)).abs() < 1e-12);
                prop_assert!((iy.get(x, y) - (c[2] + c[4] * xf + 2.0 * c[5] * yf)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lk_matches_stacked_least_squares(c in coefficients(), dx in -0.5f64..0.5, dy in -0.5f64..0.5) {
        let r = Grid::from_fn(7, 7, |x, y| quad(c, x as f64, y as f64));
        let cur = Grid::from_fn(7, 7, |x, y| quad(c, x as f64 - dx, y as f64 - dy));
        let g = GradientField::from_frames(&r, &cur).unwrap();
        let est = lk_solve_at(&g, (3, 3), 1e-12).unwrap();
        let (d, min_eig) = stacked_solve(&g, 3, 3);
        prop_assert!((est.min_eig - min_eig).abs() < 1e-12);
        if est.valid {
            prop_assert!((est.d.x - d[0]).abs() < 1e-9, "{} vs {}", est.d.x, d[0]);
            prop_assert!((est.d.y - d[1]).abs() < 1e-9, "{} vs {}", est.d.y, d[1]);
        }
    }
}

#[test]
fn ramp_is_rejected_and_blob_accepted() {
    let ramp = Grid::from_fn(9, 9, |x, _| 0.05 * x as f64);
    let g = GradientField::from_frames(&ramp, &ramp).unwrap();
    assert!(!lk_solve_at(&g, (4, 4), 1e-4).unwrap().valid);

    let blob = Grid::from_fn(15, 15, |x, y| {
        let r2 = (x as f64 - 7.0).powi(2) + (y as f64 - 7.0).powi(2);
        0.5 + 0.3 * (-r2 / 18.0).exp()
    });
    let g = GradientField::from_frames(&blob, &blob).unwrap();
    assert!(lk_solve_at(&g, (5, 5), 1e-4).unwrap().valid);
}

#[test]
fn temporal_gradient_is_difference() {
    let a = Grid::from_fn(4, 4, |x, y| 0.1 * (x + y) as f64);
    let b = Grid::from_fn(4, 4, |x, y| 0.1 * (x + y) as f64 + 0.02 * x as f64);
    let it = temporal_gradient(&a, &b).unwrap();
    for y in 0..4 {
        for x in 0..4 {
            assert!((it.get(x, y) - 0.02 * x as f64).abs() < 1e-15);
        }
    }
}

fn textured(shift: Point2) -> CanonicalFrame {
    let t = Texture::random(5, Point2::new(-32.0, -32.0), Point2::new(160.0, 160.0));
    CanonicalFrame::fully_covered(t.render(128, 128, shift)).unwrap()
}

fn antisymmetry_residual(shift: Point2) -> f64 {
    let a = textured(Point2::default());
    let b = textured(shift);
    let p = FlowParams::default();
    let ab = compute_flow(&a, &b, &p).unwrap();
    let ba = compute_flow(&b, &a, &p).unwrap();
    let mut sums = Vec::new();
    for ((_, _, d1, v1, _), (_, _, d2, v2, _)) in ab.sites().zip(ba.sites()) {
        if v1 && v2 {
            sums.push((d1 + d2).norm());
        }
    }
    assert!(sums.len() > 1000);
    median(&sums)
}

#[test]
fn swapping_frames_negates_flow() {
    let m = antisymmetry_residual(Point2::new(2.0, -1.0));
    assert!(m < 0.01, "integer shift: median |d_ab + d_ba| = {m}");
    // Sub-pixel shifts carry the bilinear interpolation error in both directions.
    let m = antisymmetry_residual(Point2::new(1.0, 0.5));
    assert!(m < 0.2, "sub-pixel shift: median |d_ab + d_ba| = {m}");
}

#[test]
fn raising_tau_only_removes_sites() {
    let a = textured(Point2::default());
    let b = textured(Point2::new(0.7, -1.2));
    let mut previous: Option<Vec<bool>> = None;
    for tau in [1e-6, 1e-5, 1e-4, 1e-3, 1e-2] {
        let p = FlowParams {
            tau_eig: tau,
            ..FlowParams::default()
        };
        let f = compute_flow(&a, &b, &p).unwrap();
        let valid: Vec<bool> = f.sites().map(|s| s.3).collect();
        if let Some(prev) = &previous {
            assert!(valid.iter().zip(prev).all(|(now, before)| !*now || *before));
        }
        previous = Some(valid);
    }
}

#[test]
fn flow_file_round_trip_preserves_statistics() {
    let a = textured(Point2::default());
    let b = textured(Point2::new(0.4, 0.9));
    let f = compute_flow(&a, &b, &FlowParams { step: 3, ..FlowParams::default() }).unwrap();
    let mut bytes = Vec::new();
    write_flow(&mut bytes, &f).unwrap();
    assert_eq!(bytes.len(), 16 + 13 * f.len());
    let back = read_flow(bytes.as_slice()).unwrap();
    assert_eq!(back.valid_count(), f.valid_count());
    let (m1, m2) = (median(&f.valid_magnitudes()), median(&back.valid_magnitudes()));
    assert!((m1 - m2).abs() < 1e-6);
}
