use amipdg::mesh::{bisect, build_unit_cube_mesh, Refinement, TetMesh};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const KUHN_MIN_ANGLE_DEG: f64 = 45.0;

/// Every structural invariant of one refinement step.
fn check_step(coarse: &TetMesh, r: &Refinement, marked: &[usize]) {
    let fine = &r.mesh;
    fine.check_conformity().unwrap();
    assert!((fine.total_volume() - 1.0).abs() <= 1e-12);
    let refined = r.refined_parents();
    for &t in marked {
        assert!(refined.contains(&t), "marked element {t} was not refined");
    }
    for (parent, kids) in r.children(coarse.num_tets()).iter().enumerate() {
        let pv = coarse.volume(parent);
        let sum: f64 = kids.iter().map(|&k| fine.volume(k)).sum();
        assert!((sum - pv).abs() <= 1e-14 * pv.max(1e-300) * 16.0, "children do not tile parent {parent}");
        if kids.len() == 1 {
            continue;
        }
        for &k in kids {
            // each child is the parent halved an integer number of times
            let levels = (pv / fine.volume(k)).log2();
            assert!((levels - levels.round()).abs() < 1e-9 && levels.round() >= 1.0);
        }
    }
    for (coarse_t, fine_t) in r.common() {
        assert_eq!(coarse.tets()[coarse_t].vertices, fine.tets()[fine_t].vertices);
    }
}

#[test]
fn local_refinement_keeps_invariants_for_15_rounds() {
    let mut mesh = build_unit_cube_mesh(2);
    for k in 0..15 {
        let radius = 0.3 * 0.8f64.powi(k);
        let marked: Vec<usize> = (0..mesh.num_tets())
            .filter(|&t| mesh.tet_points(t).iter().any(|p| p.coords.norm() <= radius))
            .collect();
        let r = bisect(&mesh, &marked).unwrap();
        check_step(&mesh, &r, &marked);
        assert!(r.mesh.min_dihedral_angle_overall().to_degrees() >= KUHN_MIN_ANGLE_DEG - 1e-9);
        mesh = r.mesh;
    }
}

#[test]
fn random_refinement_keeps_invariants_for_15_rounds() {
    let mut rng = StdRng::seed_from_u64(7);
    let mut mesh = build_unit_cube_mesh(1);
    for _ in 0..15 {
        let marked: Vec<usize> = (0..mesh.num_tets()).filter(|_| rng.random_bool(0.1)).collect();
        let r = bisect(&mesh, &marked).unwrap();
        check_step(&mesh, &r, &marked);
        assert!(r.mesh.min_dihedral_angle_overall().to_degrees() >= KUHN_MIN_ANGLE_DEG - 1e-9);
        mesh = r.mesh;
    }
}

#[test]
fn marked_child_volume_is_exactly_half() {
    let mesh = build_unit_cube_mesh(1);
    let r = bisect(&mesh, &[0]).unwrap();
    let kids = &r.children(mesh.num_tets())[0];
    assert_eq!(kids.len(), 2);
    for &k in kids {
        assert!((r.mesh.volume(k) - mesh.volume(0) / 2.0).abs() <= 1e-16);
    }
}

#[test]
fn uniform_kuhn_meshes_are_conforming() {
    for m in 1..=4 {
        let mesh = build_unit_cube_mesh(m);
        mesh.check_conformity().unwrap();
        assert_eq!(mesh.num_tets(), 6 * m * m * m);
        let boundary = mesh.faces().iter().filter(|f| f.is_boundary()).count();
        assert_eq!(boundary, 12 * m * m);
        assert!((mesh.min_dihedral_angle_overall().to_degrees() - KUHN_MIN_ANGLE_DEG).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn arbitrary_markings_stay_conforming(mask in proptest::collection::vec(any::<bool>(), 48), rounds in 1usize..4) {
        let mut mesh = build_unit_cube_mesh(2);
        for round in 0..rounds {
            let marked: Vec<usize> = (0..mesh.num_tets()).filter(|&t| mask[(t + round) % mask.len()]).collect();
            let r = bisect(&mesh, &marked).unwrap();
            check_step(&mesh, &r, &marked);
            mesh = r.mesh;
        }
    }

    #[test]
    fn every_face_has_one_or_two_elements(seed in 0u64..1000) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mesh = build_unit_cube_mesh(1);
        let marked: Vec<usize> = (0..6).filter(|_| rng.random_bool(0.5)).collect();
        let fine = bisect(&mesh, &marked).unwrap().mesh;
        let mut incidence = vec![0usize; fine.num_faces()];
        for t in 0..fine.num_tets() {
            for f in fine.tet_faces(t) {
                incidence[f] += 1;
            }
        }
        for (f, face) in fine.faces().iter().enumerate() {
            prop_assert_eq!(incidence[f], if face.is_boundary() { 1 } else { 2 });
        }
    }
}
