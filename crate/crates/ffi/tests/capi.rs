use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use cnls_lab_ffi::*;

fn last_error() -> String {
    let p = cnls_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn grid(r_max: f64, n: usize) -> *mut CnlsGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { cnls_grid_new(r_max, n, &mut g) }, CnlsStatus::Ok);
    g
}

#[test]
fn grid_lifecycle_and_errors() {
    let g = grid(10.0, 100);
    unsafe {
        assert_eq!(cnls_grid_len(g), 101);
        assert!((cnls_grid_spacing(g) - 0.1).abs() < 1e-15);
        assert_eq!(cnls_grid_len(ptr::null()), 0);
        cnls_grid_free(g);
        cnls_grid_free(ptr::null_mut());

        let mut bad = ptr::null_mut();
        assert_eq!(
            cnls_grid_new(-1.0, 100, &mut bad),
            CnlsStatus::InvalidArgument
        );
        assert!(bad.is_null());
        assert!(last_error().contains("invalid argument"));
        assert_eq!(
            cnls_grid_new(1.0, 20, ptr::null_mut()),
            CnlsStatus::NullPointer
        );
        assert!(last_error().contains("null pointer"));

        // success clears the message
        let g = grid(1.0, 20);
        assert!(cnls_last_error_message().is_null());
        cnls_grid_free(g);
    }
}

#[test]
fn fields_round_trip_through_buffers() {
    let g = grid(5.0, 20);
    unsafe {
        let re: Vec<f64> = (0..21).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let im: Vec<f64> = (0..21).map(|i| -(i as f64) * 0.1).collect();
        let mut f = ptr::null_mut();
        assert_eq!(
            cnls_field_from_values(g, re.as_ptr(), im.as_ptr(), 21, &mut f),
            CnlsStatus::Ok
        );
        assert_eq!(cnls_field_len(f), 21);
        let (mut r2, mut i2) = (vec![0.0; 21], vec![0.0; 21]);
        assert_eq!(
            cnls_field_values(f, r2.as_mut_ptr(), i2.as_mut_ptr(), 21),
            CnlsStatus::Ok
        );
        assert_eq!(r2, re);
        assert_eq!(i2, im);
        assert_eq!(
            cnls_field_values(f, r2.as_mut_ptr(), ptr::null_mut(), 5),
            CnlsStatus::IncompatibleGrid
        );
        cnls_field_free(f);

        let mut f = ptr::null_mut();
        assert_eq!(
            cnls_field_from_values(g, re.as_ptr(), ptr::null(), 7, &mut f),
            CnlsStatus::IncompatibleGrid
        );
        let nan = [f64::NAN; 21];
        assert_eq!(
            cnls_field_from_values(g, nan.as_ptr(), ptr::null(), 21, &mut f),
            CnlsStatus::InvalidArgument
        );
        assert_eq!(
            cnls_field_rescaled_w(g, 1.0, 0.5, 2.0, &mut f),
            CnlsStatus::InvalidArgument
        );
        cnls_grid_free(g);
    }
}

#[test]
fn functionals_match_the_closed_forms() {
    let g = grid(200.0, 20000);
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(cnls_field_ground_state(g, &mut w), CnlsStatus::Ok);
        let mut q = 0.0;
        assert_eq!(cnls_sobolev_quotient(w, &mut q), CnlsStatus::Ok);
        // quadrature sits about 1.2e-3 below 8π²/3 on this grid
        let m = 8.0 * std::f64::consts::PI.powi(2) / 3.0;
        assert!((q / m - 1.0).abs() < 2e-3, "{q}");

        let mut n = CnlsNorms::default();
        assert_eq!(cnls_norms(w, &mut n), CnlsStatus::Ok);
        assert!((n.grad_sq - n.l4_4).abs() / n.grad_sq < 1e-3);
        assert!((n.energy - (n.energy_c + 0.3 * n.l10_3)).abs() < 1e-9 * n.energy);

        let mut k = 0.0;
        assert_eq!(cnls_k(w, 2.0, -1.0, &mut k), CnlsStatus::Ok);
        assert!((k - 0.8 * n.l10_3).abs() < 0.01 * n.l10_3 + 1e-3 * n.grad_sq);
        assert_eq!(cnls_k(w, -1.0, 0.0, &mut k), CnlsStatus::InvalidArgument);
        assert!(last_error().contains("admissible"));

        let mut label = CnlsLabel::KMinus;
        assert_eq!(cnls_classify(w, 0.0, &mut label), CnlsStatus::Ok);
        assert_eq!(label, CnlsLabel::AboveThreshold);
        cnls_field_free(w);

        let mut small = ptr::null_mut();
        assert_eq!(cnls_field_gaussian(g, 0.3, 1.0, &mut small), CnlsStatus::Ok);
        assert_eq!(cnls_classify(small, 0.0, &mut label), CnlsStatus::Ok);
        assert_eq!(label, CnlsLabel::KPlus);
        assert_eq!(
            cnls_field_gaussian(g, 1.0, 0.0, &mut small),
            CnlsStatus::InvalidArgument
        );
        cnls_field_free(small);
        cnls_grid_free(g);
    }
}

#[test]
fn stepping_conserves_mass() {
    let g = grid(20.0, 2000);
    unsafe {
        let mut u = ptr::null_mut();
        assert_eq!(cnls_field_gaussian(g, 0.5, 1.0, &mut u), CnlsStatus::Ok);
        let mut n0 = CnlsNorms::default();
        cnls_norms(u, &mut n0);

        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(cnls_linear_step(u, 0.01, &mut a), CnlsStatus::Ok);
        assert_eq!(cnls_linear_step(a, -0.01, &mut b), CnlsStatus::Ok);
        let (mut x, mut y) = (vec![0.0; 2001], vec![0.0; 2001]);
        cnls_field_values(u, x.as_mut_ptr(), ptr::null_mut(), 2001);
        cnls_field_values(b, y.as_mut_ptr(), ptr::null_mut(), 2001);
        let err = x
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");

        let mut s = ptr::null_mut();
        assert_eq!(cnls_strang_step(u, 1e-3, &mut s), CnlsStatus::Ok);
        let mut n1 = CnlsNorms::default();
        cnls_norms(s, &mut n1);
        assert!((n1.mass / n0.mass - 1.0).abs() < 1e-12);

        let mut cfg = cnls_solver_defaults();
        cfg.t_end = 0.05;
        let (mut o, mut t, mut fin) = (CnlsOutcome::StepUnderflow, 0.0, ptr::null_mut());
        assert_eq!(
            cnls_evolve(u, &cfg, &mut o, &mut t, &mut fin),
            CnlsStatus::Ok
        );
        assert_eq!(o, CnlsOutcome::Completed);
        assert!((t - 0.05).abs() < 1e-12);
        cnls_norms(fin, &mut n1);
        assert!((n1.mass / n0.mass - 1.0).abs() < 1e-11);

        cfg.dt_min = 1.0;
        let mut fin2 = ptr::null_mut();
        assert_eq!(
            cnls_evolve(u, &cfg, &mut o, &mut t, &mut fin2),
            CnlsStatus::InvalidArgument
        );
        assert!(fin2.is_null());

        for f in [u, a, b, s, fin] {
            cnls_field_free(f);
        }
        cnls_grid_free(g);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cnls_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cnls_lab.h");
    assert!(header.exists());
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "cnls_grid_new",
        "cnls_evolve",
        "cnls_last_error_message",
        "CNLS_STATUS_PANIC",
    ] {
        assert!(text.contains(sym), "{sym}");
    }
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(o) = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .output()
        else {
            eprintln!("{cc} not available; skipping");
            continue;
        };
        assert!(
            o.status.success(),
            "{cc}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}
