//! End-to-end properties of the discretisation on the generated meshes.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wg_lift::element::ElementStore;
use wg_lift::lifting::build_lift_operators;
use wg_lift::mesh::{read_mesh, write_mesh, MeshFamily, PolytopalMesh};
use wg_lift::poly::WgFunction;
use wg_lift::solver::{solve_poisson, DEFAULT_TOLERANCE};
use wg_lift::study::ExactSolution;
use wg_lift::Point;

fn random_homogeneous(mesh: &PolytopalMesh, k: usize, rng: &mut ChaCha8Rng) -> WgFunction {
    let mut v = WgFunction::zeros(mesh, k);
    v.cell_coeffs
        .iter_mut()
        .chain(v.face_coeffs.iter_mut())
        .for_each(|c| *c = rng.gen_range(-1.0..1.0));
    v.zero_boundary(mesh);
    v
}

/// `(∇_w a, ∇_w b)` summed over cells.
fn bilinear(mesh: &PolytopalMesh, store: &ElementStore, a: &WgFunction, b: &WgFunction) -> f64 {
    (0..mesh.num_cells())
        .map(|c| {
            let (x, y) = (a.local_dofs(mesh, c), b.local_dofs(mesh, c));
            y.dot(&(store.local_stiffness(c) * x))
        })
        .sum()
}

#[test]
fn local_stiffness_kernel_is_the_constants() {
    for family in [MeshFamily::Quad, MeshFamily::Mixed, MeshFamily::Wedge] {
        for k in 1..=2 {
            let mesh = family.generate(1);
            let store = ElementStore::build(&mesh, k).unwrap();
            for c in 0..mesh.num_cells() {
                let s = store.local_stiffness(c);
                assert!((&s - s.transpose()).amax() < 1e-14 * s.amax());
                let eig = s.clone().symmetric_eigenvalues();
                let top = eig.max();
                let null = eig.iter().filter(|&&e| e.abs() < 1e-10 * top).count();
                assert_eq!(null, 1, "{} k = {k} cell {c}", family.name());
                assert!(eig.min() > -1e-10 * top);
                let one = project_constant(&mesh, k, c);
                assert!((&s * one).amax() < 1e-11 * top);
            }
        }
    }
}

fn project_constant(mesh: &PolytopalMesh, k: usize, cell: usize) -> nalgebra::DVector<f64> {
    let mut v = WgFunction::zeros(mesh, k);
    for c in 0..mesh.num_cells() {
        v.cell_mut(c)[0] = 1.0;
    }
    for f in 0..mesh.num_faces() {
        v.face_mut(f)[0] = 1.0;
    }
    v.local_dofs(mesh, cell)
}

#[test]
fn galerkin_orthogonality() {
    for (family, k) in [
        (MeshFamily::Mixed, 1),
        (MeshFamily::Quad, 2),
        (MeshFamily::Wedge, 1),
    ] {
        let mesh = family.generate(2);
        let store = ElementStore::build(&mesh, k).unwrap();
        let solution = ExactSolution::for_dim(mesh.dim);
        let f = |x: &Point| solution.source(x);
        let (u_h, _) = solve_poisson(&mesh, &store, f, DEFAULT_TOLERANCE).unwrap();
        let norm_u = bilinear(&mesh, &store, &u_h, &u_h).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v = random_homogeneous(&mesh, k, &mut rng);
            let a = bilinear(&mesh, &store, &u_h, &v);
            let l: f64 = (0..mesh.num_cells())
                .map(|c| {
                    store
                        .load(c, f)
                        .iter()
                        .zip(v.cell(c))
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .sum();
            let scale = norm_u * bilinear(&mesh, &store, &v, &v).sqrt();
            assert!(
                (a - l).abs() <= 1e-10 * scale,
                "{} k = {k}: {a} vs {l}",
                family.name()
            );
        }
    }
}

#[test]
fn zero_load_gives_zero_solution() {
    let mesh = MeshFamily::Mixed.generate(2);
    let store = ElementStore::build(&mesh, 1).unwrap();
    let (u_h, diag) = solve_poisson(&mesh, &store, |_| 0.0, DEFAULT_TOLERANCE).unwrap();
    assert!(u_h
        .cell_coeffs
        .iter()
        .chain(&u_h.face_coeffs)
        .all(|&c| c == 0.0));
    assert!(diag.residual <= 1e-11);
}

#[test]
fn mesh_round_trip() {
    for family in [MeshFamily::Quad, MeshFamily::Mixed, MeshFamily::Wedge] {
        let mesh = family.generate(2);
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back.dim, mesh.dim);
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.num_cells(), mesh.num_cells());
        assert_eq!(back.num_faces(), mesh.num_faces());
        assert_eq!(back.boundary_face_ids, mesh.boundary_face_ids);
        for (a, b) in back.cells.iter().zip(&mesh.cells) {
            assert_eq!(a.faces, b.faces);
            assert_eq!(a.measure, b.measure);
        }
        let mut again = Vec::new();
        write_mesh(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }
}

#[test]
fn wedge_lift_is_a_left_inverse() {
    let mesh = MeshFamily::Wedge.generate(1);
    let store = ElementStore::build(&mesh, 1).unwrap();
    for op in build_lift_operators(&store).unwrap() {
        assert_eq!(op.qmat.ncols(), 20);
        let id = &op.lift_mat * &op.qmat;
        assert!((id - DMatrix::identity(20, 20)).amax() < 1e-10);
    }
}

#[test]
fn malformed_mesh_is_rejected() {
    let text =
        "wgmesh 2 3 1 3\nv 0 0 0\nv 1 0 0\nv 0 1 0\nc 3 0 1 7\nf 2 0 1 1\nf 2 1 2 1\nf 2 2 0 1\n";
    assert!(read_mesh(text.as_bytes()).is_err());
    assert!(read_mesh("not a mesh".as_bytes()).is_err());
}
