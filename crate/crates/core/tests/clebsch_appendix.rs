use std::f64::consts::PI;
use vortiline::clebsch::{
    log_velocity_check, make_clebsch_family, ClebschParams, FamilyMember, Region, SplitConfig,
};
use vortiline::{vec3, Grid, Spectral};

fn grid(n: usize, nz: usize) -> Grid {
    Grid::new(&[n, n, nz], &[2.0 * PI; 3]).unwrap()
}

#[test]
fn zero_vorticity_gives_zero_terms() {
    let params = ClebschParams {
        amplitude: 0.0,
        ..ClebschParams::default()
    };
    let f = make_clebsch_family(&grid(32, 32), params, 1.0).unwrap();
    let far = f.far_fields(0.5).unwrap();
    let cfg = SplitConfig::new(0.5, f.omega_max).unwrap();
    let t = f.split_velocity(&far, &cfg, None, 1234).unwrap();
    for v in [t.near, t.intermediate, t.outer_cutoff, t.inner_cutoff, t.kernel, t.far, t.far_cutoff, t.far_kernel, t.total] {
        assert_eq!(v, [0.0; 3]);
    }
}

#[test]
fn split_reassembles_biot_savart_at_twenty_probes() {
    let f = make_clebsch_family(&grid(64, 64), ClebschParams::default(), 1.0).unwrap();
    let probes = f.probe_points(20, 2.0 * f.grid().min_spacing());
    assert_eq!(probes.len(), 20);
    for rho in [0.5, 1.0] {
        let far = f.far_fields(rho).unwrap();
        let cfg = SplitConfig::new(rho, f.omega_max).unwrap();
        let near = f.near_field(cfg.delta).unwrap();
        for &p in &probes {
            let t = f.split_velocity(&far, &cfg, None, p).unwrap();
            assert!(t.relative_error <= 1e-3, "rho {rho}: {}", t.relative_error);
            let cde = vec3::add(vec3::add(t.outer_cutoff, t.inner_cutoff), t.kernel);
            assert!(vec3::dist(cde, t.intermediate) <= 1e-8 * vec3::norm(t.intermediate));
            let ab = vec3::add(t.far_cutoff, t.far_kernel);
            assert!(vec3::dist(ab, t.far) <= 1e-10 * vec3::norm(t.far).max(1.0));
            assert!(vec3::dist(near.at(p), t.near) <= 1e-8 * vec3::norm(t.near));
        }
    }
}

#[test]
fn sharpening_scales_phi_gradient_only() {
    let g = grid(128, 32);
    let sp = Spectral::new(&g);
    let fields: Vec<_> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&l| make_clebsch_family(&g, ClebschParams::default(), l).unwrap())
        .collect();
    for f in &fields {
        assert!(f.representation_error <= 1e-10, "{}", f.representation_error);
        let div = sp.divergence(f.omega()).unwrap();
        let worst = div.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-10 * f.omega_max, "{worst}");
    }
    for pair in fields.windows(2) {
        let ratio = pair[1].max_grad_phi / pair[0].max_grad_phi;
        assert!((ratio - 2.0).abs() <= 0.02, "{ratio}");
        assert!((pair[1].max_grad_psi - pair[0].max_grad_psi).abs() <= 1e-10);
        let growth = pair[1].omega_max / pair[0].omega_max;
        assert!((1.5..=2.5).contains(&growth), "{growth}");
    }
}

#[test]
fn under_resolved_member_is_rejected_with_advice() {
    let err = make_clebsch_family(&grid(64, 32), ClebschParams::default(), 64.0).unwrap_err();
    assert!(err.to_string().contains("points per axis"), "{err}");
    assert!(make_clebsch_family(&grid(64, 32), ClebschParams::default(), 0.5).is_err());
    assert!(make_clebsch_family(&grid(64, 32), ClebschParams::default(), 1.0).is_ok());
    let odd = Grid::new(&[32, 32, 32], &[PI, 2.0 * PI, 2.0 * PI]).unwrap();
    assert!(make_clebsch_family(&odd, ClebschParams::default(), 1.0).is_err());
}

#[test]
fn ball_outside_region_is_rejected() {
    let f = make_clebsch_family(&grid(64, 32), ClebschParams::default(), 1.0).unwrap();
    let far = f.far_fields(0.5).unwrap();
    let cfg = SplitConfig::new(0.5, f.omega_max).unwrap();
    let p = f.probe_points(1, 0.0)[0];
    let x = f.grid().point(p);
    let tight = Region {
        lo: vec3::axpy(x, -0.4, [1.0; 3]),
        hi: vec3::axpy(x, 0.4, [1.0; 3]),
    };
    assert!(f.split_velocity(&far, &cfg, Some(&tight), p).is_err());
    let wide = Region {
        lo: vec3::axpy(x, -0.6, [1.0; 3]),
        hi: vec3::axpy(x, 0.6, [1.0; 3]),
    };
    assert!(f.split_velocity(&far, &cfg, Some(&wide), p).is_ok());
    let other = f.far_fields(1.0).unwrap();
    assert!(f.split_velocity(&other, &cfg, None, p).is_err());
}

#[test]
fn sharpening_both_level_sets_breaks_the_log_bound() {
    let g = grid(128, 32);
    let family = |sharpen_psi| -> Vec<FamilyMember> {
        let params = ClebschParams {
            sharpen_psi,
            ..ClebschParams::default()
        };
        [1.0, 2.0, 4.0]
            .iter()
            .map(|&l| FamilyMember::from(&make_clebsch_family(&g, params, l).unwrap()))
            .collect()
    };
    let good = log_velocity_check(&family(false)).unwrap();
    let bad = log_velocity_check(&family(true)).unwrap();
    assert!(good.bounded, "{good:?}");
    assert!(bad.growth > 1.5 && bad.growth > good.growth, "{bad:?}");
}
