use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecad_core::kernel::{build_program, BuildError, KernelError};
use ecad_core::model::{Command, Tolerances};
use ecad_oracle::{random_primitive_program, voxel_agreement, AnalyticSolid};

#[test]
fn random_programs_match_analytic_occupancy() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = Instant::now();
    let mut worst = 1.0f64;
    for case in 0..40 {
        let p = random_primitive_program(&mut rng, 3);
        let solid = AnalyticSolid::from_program(&p).unwrap();
        let (mesh, solid) = match build_program(&p, &tol) {
            Ok((m, _)) => (Some(m), solid),
            Err(BuildError { error: KernelError::EmptyResult { step }, .. }) => (None, solid.prefix(step + 1)),
            Err(e) => panic!("case {case}: {e}"),
        };
        let a = voxel_agreement(&solid, mesh.as_ref(), 40, solid.surface_band(tol.chord));
        assert!(a.compared > 0);
        worst = worst.min(a.ratio());
        assert!(a.ratio() >= 0.995, "case {case}: {a:?}\n{}", ecad_core::dsl::serialize_program(&p));
    }
    eprintln!("worst {worst:.5} in {:?}", t.elapsed());
}

#[test]
fn perturbed_geometry_is_detected() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut caught = 0;
    for _ in 0..20 {
        let p = random_primitive_program(&mut rng, 1);
        let (mesh, _) = build_program(&p, &tol).unwrap();
        let mut q = p.clone();
        for s in &mut q.statements {
            if let Command::Extrude(e) = &mut s.command {
                e.extent_one *= 1.5;
            }
        }
        let solid = AnalyticSolid::from_program(&q).unwrap();
        let a = voxel_agreement(&solid, Some(&mesh), 40, solid.surface_band(tol.chord));
        if a.ratio() < 0.995 {
            caught += 1;
        }
    }
    assert_eq!(caught, 20);
}
