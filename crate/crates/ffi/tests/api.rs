use std::ffi::CString;
use std::path::Path;
use std::process::Command;
use std::ptr;

use snls_ffi::*;

fn grid(n: usize, length: f64) -> *mut SnlsGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { snls_grid_new(n, length, &mut g) }, SnlsStatus::Ok);
    g
}

fn gaussian(g: *const SnlsGrid) -> *mut SnlsField {
    let n = unsafe { snls_grid_n_points(g) };
    let mut x = vec![0.0; n];
    assert_eq!(unsafe { snls_grid_x(g, x.as_mut_ptr(), n) }, SnlsStatus::Ok);
    let vals: Vec<f64> = x.iter().flat_map(|x| [(-x * x).exp(), 0.0]).collect();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { snls_field_new(g, vals.as_ptr(), vals.len(), &mut f) }, SnlsStatus::Ok);
    f
}

fn values(f: *const SnlsField) -> Vec<f64> {
    let n = unsafe { snls_field_len(f) };
    let mut out = vec![0.0; 2 * n];
    assert_eq!(unsafe { snls_field_values(f, out.as_mut_ptr(), out.len()) }, SnlsStatus::Ok);
    out
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { snls_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(s).unwrap()
}

#[test]
fn grid_and_field_round_trip() {
    let g = grid(64, 10.0);
    assert_eq!(unsafe { snls_grid_n_points(g) }, 64);
    assert_eq!(unsafe { snls_grid_length(g) }, 10.0);
    let f = gaussian(g);
    let mut m = 0.0;
    assert_eq!(unsafe { snls_field_mass(f, &mut m) }, SnlsStatus::Ok);
    assert!((m - std::f64::consts::FRAC_PI_2.sqrt()).abs() < 1e-10, "{m}");
    unsafe {
        snls_field_free(f);
        snls_grid_free(g);
    }
}

#[test]
fn errors_are_reported() {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { snls_grid_new(0, 1.0, &mut g) }, SnlsStatus::InvalidArgument);
    assert!(g.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { snls_grid_new(16, 1.0, ptr::null_mut()) }, SnlsStatus::NullPointer);
    assert!(last_error().contains("null"));

    let g = grid(16, 4.0);
    let vals = vec![0.0; 10];
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { snls_field_new(g, vals.as_ptr(), vals.len(), &mut f) },
        SnlsStatus::DimensionMismatch
    );
    let nan = vec![f64::NAN; 32];
    assert_eq!(
        unsafe { snls_field_new(g, nan.as_ptr(), nan.len(), &mut f) },
        SnlsStatus::InvalidArgument
    );
    assert_eq!(unsafe { snls_field_mass(ptr::null(), &mut 0.0) }, SnlsStatus::NullPointer);
    unsafe {
        snls_grid_free(g);
        snls_grid_free(ptr::null_mut());
        snls_field_free(ptr::null_mut());
    }
}

#[test]
fn truncated_error_message() {
    let mut g = ptr::null_mut();
    unsafe { snls_grid_new(0, 1.0, &mut g) };
    let mut buf = [1 as std::ffi::c_char; 4];
    let full = unsafe { snls_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(full > 3);
    assert_eq!(buf[3], 0);
}

#[test]
fn strang_matches_eigen_oracle() {
    let g = grid(128, 40.0);
    let mut v = vec![0.0; 128];
    let st = unsafe {
        snls_build_potential(g, SnlsPotentialFamily::GaussianMatchedStep, 2.0, 1.0, 0.0, 1.0, v.as_mut_ptr(), 128)
    };
    assert_eq!(st, SnlsStatus::Ok);
    let (mut ps, mut pe) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(snls_propagator_new(g, v.as_ptr(), 128, SnlsMethod::StrangSplitting, 1e-3, &mut ps), SnlsStatus::Ok);
        assert_eq!(snls_propagator_new(g, v.as_ptr(), 128, SnlsMethod::Eigendecomposition, 0.0, &mut pe), SnlsStatus::Ok);
    }
    let f = gaussian(g);
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(snls_propagator_evolve(ps, f, 1.0, &mut a), SnlsStatus::Ok);
        assert_eq!(snls_propagator_evolve(pe, f, 1.0, &mut b), SnlsStatus::Ok);
    }
    let dx = 40.0 / 128.0;
    let d: f64 = values(a)
        .iter()
        .zip(values(b))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        * dx;
    assert!(d.sqrt() < 1e-6, "{}", d.sqrt());
    unsafe {
        for h in [a, b, f] {
            snls_field_free(h);
        }
        snls_propagator_free(ps);
        snls_propagator_free(pe);
        snls_grid_free(g);
    }
}

#[test]
fn free_and_shifted_flows_differ_by_phase() {
    let g = grid(64, 20.0);
    let f = gaussian(g);
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    let t = std::f64::consts::PI;
    unsafe {
        assert_eq!(snls_evolve_free(f, t, &mut a), SnlsStatus::Ok);
        assert_eq!(snls_evolve_shifted(f, t, &mut b), SnlsStatus::Ok);
    }
    for (x, y) in values(a).iter().zip(values(b)) {
        assert!((x + y).abs() < 1e-12);
    }
    unsafe {
        snls_field_free(a);
        snls_field_free(b);
        snls_field_free(f);
        snls_grid_free(g);
    }
}

#[test]
fn nls_conserves_mass_and_energy() {
    let g = grid(256, 40.0);
    let mut v = vec![0.0; 256];
    unsafe {
        snls_build_potential(g, SnlsPotentialFamily::GaussianMatchedStep, 2.0, 1.0, 0.0, 1.0, v.as_mut_ptr(), 256);
    }
    let f = gaussian(g);
    let mut u = ptr::null_mut();
    assert_eq!(unsafe { snls_evolve_nls(f, v.as_ptr(), 256, 5.0, 1e-3, 0.5, &mut u) }, SnlsStatus::Ok);
    let (mut m0, mut m1, mut e0, mut e1) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        snls_field_mass(f, &mut m0);
        snls_field_mass(u, &mut m1);
        snls_field_energy(f, v.as_ptr(), 256, 5.0, &mut e0);
        snls_field_energy(u, v.as_ptr(), 256, 5.0, &mut e1);
    }
    assert!(((m1 - m0) / m0).abs() < 1e-12);
    assert!(((e1 - e0) / e0).abs() < 1e-4, "{e0} {e1}");
    unsafe {
        snls_field_free(u);
        snls_field_free(f);
        snls_grid_free(g);
    }
}

#[test]
fn exponents_for_quintic() {
    let (mut r, mut p, mut q) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { snls_exponents(5.0, &mut r, &mut p, &mut q) }, SnlsStatus::Ok);
    assert_eq!((r, p, q), (7.0, 70.0 / 9.0, 35.0 / 13.0));
    assert_eq!(unsafe { snls_exponents(3.0, &mut r, &mut p, &mut q) }, SnlsStatus::InvalidArgument);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("u.snls").to_str().unwrap()).unwrap();
    let g = grid(32, 8.0);
    let f = gaussian(g);
    assert_eq!(unsafe { snls_checkpoint_write(path.as_ptr(), f, 1.25) }, SnlsStatus::Ok);
    let mut back = ptr::null_mut();
    let mut t = 0.0;
    assert_eq!(unsafe { snls_checkpoint_read(path.as_ptr(), &mut back, &mut t) }, SnlsStatus::Ok);
    assert_eq!(t, 1.25);
    assert_eq!(values(back), values(f));

    let missing = CString::new(dir.path().join("nope.snls").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { snls_checkpoint_read(missing.as_ptr(), &mut back, &mut t) }, SnlsStatus::Io);
    std::fs::write(dir.path().join("bad.snls"), b"JUNKJUNKJUNKJUNKJUNKJUNKJUNKJUNK").unwrap();
    let bad = CString::new(dir.path().join("bad.snls").to_str().unwrap()).unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { snls_checkpoint_read(bad.as_ptr(), &mut other, &mut t) }, SnlsStatus::Format);
    unsafe {
        snls_field_free(back);
        snls_field_free(f);
        snls_grid_free(g);
    }
}

#[test]
fn header_declares_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/snls.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "snls_grid_new",
        "snls_field_new",
        "snls_propagator_evolve",
        "snls_evolve_nls",
        "snls_checkpoint_read",
        "snls_last_error_message",
        "SNLS_STATUS_NULL_POINTER",
        "typedef struct SnlsField SnlsField",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"snls.h\"\nint main(void) { SnlsGrid *g = 0; return snls_grid_new(8, 1.0, &g) == SNLS_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler found; skipping syntax check"),
    }
}
