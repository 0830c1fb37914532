use std::ffi::CStr;
use std::ptr;

use ylab_ffi::*;

fn last_error() -> String {
    let p = ylab_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { ylab_string_free(p) };
    s
}

#[test]
fn ball_lifecycle() {
    unsafe {
        let mut d: *mut YlabDomain = ptr::null_mut();
        assert_eq!(ylab_domain_ball(3, ptr::null(), 1.0, &mut d), YlabStatus::Ok);
        assert_eq!(ylab_domain_dim(d), 3);

        let mut s = 0.0;
        assert_eq!(ylab_domain_signed_distance(d, [0.0, 0.0, 0.0].as_ptr(), &mut s), YlabStatus::Ok);
        assert_eq!(s, 1.0);

        let (mut p, mut nrm, mut hh) = ([0.0; 3], [0.0; 3], 0.0);
        let st = ylab_domain_project(d, [0.5, 0.0, 0.0].as_ptr(), p.as_mut_ptr(), nrm.as_mut_ptr(), &mut hh);
        assert_eq!(st, YlabStatus::Ok);
        assert!((p[0] - 1.0).abs() < 1e-14 && (nrm[0] + 1.0).abs() < 1e-14);
        assert!((hh - 2.0).abs() < 1e-14);

        let mut f: *mut YlabField = ptr::null_mut();
        let mut info = YlabSolveInfo::default();
        assert_eq!(ylab_solve_v(d, 0.125, 1e-10, &mut f, &mut info), YlabStatus::Ok);
        assert!(info.unknowns > 0 && info.residual_inf <= 1e-10);
        assert_eq!(ylab_field_interior_count(f), info.unknowns);

        let mut v = 0.0;
        assert_eq!(ylab_field_value_at(f, [0.0; 3].as_ptr(), &mut v), YlabStatus::Ok);
        assert!((v - 0.5).abs() < 1e-12);

        let mut c = YlabCurvatureSummary::default();
        assert_eq!(ylab_field_curvature(f, &mut c), YlabStatus::Ok);
        assert!((c.max_ricci + 2.0).abs() < 1e-9 && (c.min_sectional + 1.0).abs() < 1e-9);

        ylab_field_free(f);
        ylab_domain_free(d);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut d: *mut YlabDomain = ptr::null_mut();
        assert_eq!(ylab_domain_annulus(3, 2.0, 1.0, &mut d), YlabStatus::InvalidDomain);
        assert!(d.is_null());
        assert!(last_error().contains("invalid domain"));

        assert_eq!(ylab_domain_ball(3, ptr::null(), 1.0, ptr::null_mut()), YlabStatus::NullPointer);
        assert!(last_error().contains("out"));

        let mut s = 0.0;
        assert_eq!(ylab_domain_signed_distance(ptr::null(), [0.0; 3].as_ptr(), &mut s), YlabStatus::NullPointer);

        let mut x = [0.0; 3];
        let st = ylab_stereographic_project([0.0, 0.0, 0.0, 1.0].as_ptr(), 3, x.as_mut_ptr());
        assert_eq!(st, YlabStatus::PointAtInfinity);

        ylab_domain_free(ptr::null_mut());
        ylab_string_free(ptr::null_mut());
    }
}

#[test]
fn radial_and_buffers() {
    unsafe {
        let mut s: *mut YlabRadial = ptr::null_mut();
        assert_eq!(ylab_radial_annulus(3, 0.05, 4.0, 1e-10, &mut s), YlabStatus::Ok);
        let len = ylab_radial_len(s);
        let mut r = vec![0.0; len];
        let mut v = vec![0.0; len];
        assert_eq!(ylab_radial_copy(s, r.as_mut_ptr(), v.as_mut_ptr(), len - 1), YlabStatus::BufferTooSmall);
        assert_eq!(ylab_radial_copy(s, r.as_mut_ptr(), v.as_mut_ptr(), len), YlabStatus::Ok);
        assert_eq!(r[0], 0.05);
        assert_eq!(v[0], 0.0);
        let (mut m, mut at) = (0.0, 0.0);
        assert_eq!(ylab_radial_max_ricci(s, &mut m, &mut at), YlabStatus::Ok);
        assert!(m > 0.0);
        ylab_radial_free(s);

        let x = [0.3, -1.2, 2.0];
        let mut y = [0.0; 4];
        let mut back = [0.0; 3];
        assert_eq!(ylab_stereographic_lift(x.as_ptr(), 3, y.as_mut_ptr()), YlabStatus::Ok);
        assert_eq!(ylab_stereographic_project(y.as_ptr(), 3, back.as_mut_ptr()), YlabStatus::Ok);
        for k in 0..3 {
            assert!((back[k] - x[k]).abs() < 1e-14);
        }
    }
}

#[test]
fn convex_check_through_handle() {
    unsafe {
        let mut d: *mut YlabDomain = ptr::null_mut();
        assert_eq!(ylab_domain_ellipsoid([1.0, 1.2, 1.4].as_ptr(), 3, &mut d), YlabStatus::Ok);
        let (mut pass, mut gap) = (0, 0.0);
        assert_eq!(ylab_verify_convex(d, 0.1, 1e-9, &mut pass, &mut gap), YlabStatus::Ok);
        assert_eq!(pass, 1);
        assert!(gap > 0.0);
        ylab_domain_free(d);
    }
}

#[test]
fn header_lists_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ylab.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let mut count = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            count += 1;
        }
    }
    assert!(count >= 20);
    let v = unsafe { CStr::from_ptr(ylab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
