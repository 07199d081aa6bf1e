use isomesh_bench::{sample, smooth_face_function};

#[test]
fn fixtures_are_well_formed() {
    let tau = sample("product", 8);
    assert_eq!(tau.grid().num_faces(), 64);
    let phi = smooth_face_function(&tau);
    assert!(phi.sum().abs() < 1e-12);
    assert!(phi.max_abs() > 0.5);
}
