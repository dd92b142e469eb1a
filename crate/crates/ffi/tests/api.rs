use std::ffi::{CStr, CString};
use std::ptr;

use shapeopt_ffi::*;

fn mesh_path() -> CString {
    let p = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../meshes/channel_coarse.msh"
    );
    CString::new(p).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(shapeopt_last_error()) }
        .to_str()
        .unwrap()
        .to_owned()
}

fn load_mesh() -> *mut ShapeoptMesh {
    let mut m = ptr::null_mut();
    let s = unsafe { shapeopt_mesh_load(mesh_path().as_ptr(), &mut m) };
    assert_eq!(s, ShapeoptStatus::Ok, "{}", last_error());
    m
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(shapeopt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn mesh_counts() {
    let m = load_mesh();
    let (mut nv, mut nt, mut nd) = (0, 0, 0);
    unsafe {
        assert_eq!(
            shapeopt_mesh_counts(m, &mut nv, &mut nt, &mut nd),
            ShapeoptStatus::Ok
        );
        assert_eq!(
            shapeopt_mesh_counts(m, ptr::null_mut(), &mut nt, ptr::null_mut()),
            ShapeoptStatus::Ok
        );
        shapeopt_mesh_free(m);
    }
    assert_eq!((nv, nt, nd), (894, 1601, 141));
}

#[test]
fn null_and_bad_arguments() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            shapeopt_mesh_load(ptr::null(), &mut m),
            ShapeoptStatus::NullPointer
        );
        assert!(last_error().contains("path"));
        assert_eq!(
            shapeopt_mesh_load(mesh_path().as_ptr(), ptr::null_mut()),
            ShapeoptStatus::NullPointer
        );
        let missing = CString::new("/nonexistent/x.msh").unwrap();
        assert_eq!(
            shapeopt_mesh_load(missing.as_ptr(), &mut m),
            ShapeoptStatus::Io
        );
        assert!(m.is_null());
        assert!(last_error().contains("/nonexistent/x.msh"));

        let mut d = 0.0;
        assert_eq!(
            shapeopt_solve_state(ptr::null(), &mut d),
            ShapeoptStatus::NullPointer
        );
        assert_eq!(shapeopt_result_len(ptr::null()), 0);
        shapeopt_mesh_free(ptr::null_mut());
        shapeopt_problem_free(ptr::null_mut());
        shapeopt_result_free(ptr::null_mut());
        shapeopt_string_free(ptr::null_mut());
    }
}

#[test]
fn malformed_mesh_is_a_mesh_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.msh");
    std::fs::write(&p, "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\nxx\n").unwrap();
    let p = CString::new(p.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { shapeopt_mesh_load(p.as_ptr(), &mut m) },
        ShapeoptStatus::Mesh
    );
    assert!(!last_error().is_empty());
}

#[test]
fn config_errors_and_defaults() {
    let m = load_mesh();
    let mut p = ptr::null_mut();
    unsafe {
        let bad = CString::new(r#"{"alpha_dec": 2.0}"#).unwrap();
        assert_eq!(
            shapeopt_problem_new(m, bad.as_ptr(), &mut p),
            ShapeoptStatus::Config
        );
        assert!(last_error().contains("alpha_dec"));
        assert!(p.is_null());

        let json = shapeopt_default_config_json();
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        assert!(text.contains("\"eta\": 0.08"), "{text}");
        assert_eq!(shapeopt_problem_new(m, json, &mut p), ShapeoptStatus::Ok);
        assert!(last_error().is_empty());
        shapeopt_string_free(json);

        let mut d = 0.0;
        assert_eq!(shapeopt_solve_state(p, &mut d), ShapeoptStatus::Ok);
        assert!((d - 14.15840566768).abs() < 1e-8, "{d}");
        shapeopt_problem_free(p);
        shapeopt_mesh_free(m);
    }
}

#[test]
fn single_problem_run() {
    let m = load_mesh();
    let cfg = CString::new(r#"{"alpha_init": 1e-2, "alpha_target": 1e-2}"#).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out_dir = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            shapeopt_problem_new(m, cfg.as_ptr(), &mut p),
            ShapeoptStatus::Ok
        );
        let mut r = ptr::null_mut();
        assert_eq!(
            shapeopt_optimize(p, out_dir.as_ptr(), &mut r),
            ShapeoptStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(shapeopt_result_len(r), 1);

        let mut e = ShapeoptEntry::default();
        assert_eq!(shapeopt_result_entry(r, 0, &mut e), ShapeoptStatus::Ok);
        assert_eq!(e.alpha, 1e-2);
        assert!(e.newton_iterations >= 1 && e.newton_iterations <= 40);
        assert!(e.dissipation < 14.15840566768);
        assert!(e.volume_defect.abs() < 1e-8 && e.min_jacobian > 0.08);
        assert_eq!(
            shapeopt_result_entry(r, 1, &mut e),
            ShapeoptStatus::InvalidArgument
        );

        let mut need = 0;
        assert_eq!(
            shapeopt_result_displacement(r, ptr::null_mut(), 0, &mut need),
            ShapeoptStatus::Ok
        );
        assert_eq!(need, 2 * 894);
        let mut buf = vec![0.0; need];
        assert_eq!(
            shapeopt_result_displacement(r, buf.as_mut_ptr(), need - 1, &mut need),
            ShapeoptStatus::InvalidArgument
        );
        assert_eq!(
            shapeopt_result_displacement(r, buf.as_mut_ptr(), need, &mut need),
            ShapeoptStatus::Ok
        );
        assert!(buf.iter().all(|x| x.is_finite()) && buf.iter().any(|x| *x != 0.0));

        for f in ["history.csv", "newton.csv", "solution.vtk", "deformed.vtk"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        shapeopt_result_free(r);
        shapeopt_problem_free(p);
        shapeopt_mesh_free(m);
    }
}

#[test]
fn problem_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let mesh = mesh_path().into_string().unwrap();
    std::fs::write(&cfg, format!(r#"{{"mesh": "{mesh}", "strategy": "S2"}}"#)).unwrap();
    let cfg = CString::new(cfg.to_str().unwrap()).unwrap();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(
            shapeopt_problem_from_file(cfg.as_ptr(), &mut p),
            ShapeoptStatus::Ok,
            "{}",
            last_error()
        );
        shapeopt_problem_free(p);
    }
}
