use gexpect::holder::{holder_statistic, kolmogorov_report, moment_exponent_fit, SampledPath, Verdict};
use gexpect::mc::{simulate_grid_paths, ControlPolicy};

fn brownian(level: u32, n: usize, seed: u64) -> Vec<SampledPath> {
    simulate_grid_paths(&ControlPolicy::Constant(1.0), 1.0, 1 << level, seed, n)
        .unwrap()
        .into_iter()
        .map(|v| SampledPath::new(level, v).unwrap())
        .collect()
}

#[test]
fn brownian_fourth_moment_scales_quadratically() {
    let fit = moment_exponent_fit(&[brownian(10, 200, 1)], 4.0).unwrap();
    assert!((fit.exponent_hat - 2.0).abs() < 0.1, "{fit:?}");
    assert!((fit.c_hat - 3.0).abs() < 0.6, "{fit:?}");
}

#[test]
fn brownian_holder_transition() {
    let paths = brownian(10, 128, 2);
    let r = kolmogorov_report(&paths, 4.0, 1.0, &[0.2, 0.7]).unwrap();
    assert_eq!(r.verdicts[0].verdict, Verdict::Stable, "{r:?}");
    assert_eq!(r.verdicts[1].verdict, Verdict::Diverging, "{r:?}");
    assert!(r.verdicts[0].inside_window && !r.verdicts[1].inside_window);
}

#[test]
fn endpoint_pair_bounds_the_statistic() {
    for p in brownian(8, 8, 3) {
        let m = holder_statistic(&p, 0.3).unwrap().m;
        let v = p.values();
        assert!(m >= (v[v.len() - 1] - v[0]).abs());
    }
}
