use lexcom_core::color::{ciede2000, hsl_to_lab, hsl_to_rgb, lab_euclidean, rgb_to_lab, HslColor, LabColor, RgbColor};
use proptest::prelude::*;

fn reference_pairs() -> Vec<(LabColor, LabColor, f64)> {
    let text = include_str!("data/ciede2000_pairs.csv");
    text.lines()
        .skip(1)
        .map(|line| {
            let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
            (LabColor::new(v[0], v[1], v[2]), LabColor::new(v[3], v[4], v[5]), v[6])
        })
        .collect()
}

#[test]
fn ciede2000_reference_pairs_within_1e_4() {
    let pairs = reference_pairs();
    assert_eq!(pairs.len(), 34);
    for (i, (x, y, expected)) in pairs.iter().enumerate() {
        let got = ciede2000(*x, *y);
        assert!((got - expected).abs() < 1e-4, "pair {}: {got} vs {expected}", i + 1);
        let back = ciede2000(*y, *x);
        assert!((back - expected).abs() < 1e-4, "pair {} reversed: {back}", i + 1);
    }
}

#[test]
fn white_and_black_anchor_the_lightness_axis() {
    let white = rgb_to_lab(RgbColor::from_u8(255, 255, 255));
    assert!((white.l - 100.0).abs() < 1e-9);
    assert!(white.a.abs() < 1e-9 && white.b.abs() < 1e-9);
    let black = rgb_to_lab(RgbColor::from_u8(0, 0, 0));
    assert_eq!(black.l, 0.0);
    assert!(black.a.abs() < 1e-12 && black.b.abs() < 1e-12);
}

#[test]
fn grays_are_achromatic() {
    for v in [1u8, 17, 64, 128, 200, 254] {
        let lab = rgb_to_lab(RgbColor::from_u8(v, v, v));
        assert!(lab.a.abs() < 1e-9 && lab.b.abs() < 1e-9, "gray {v}: {lab:?}");
    }
}

#[test]
fn hsl_primaries() {
    let cases = [
        ((0.0, 100.0, 50.0), (1.0, 0.0, 0.0)),
        ((120.0, 100.0, 50.0), (0.0, 1.0, 0.0)),
        ((240.0, 100.0, 50.0), (0.0, 0.0, 1.0)),
    ];
    for ((h, s, l), (r, g, b)) in cases {
        let c = hsl_to_rgb(HslColor { h, s, l }).unwrap();
        assert!((c.r - r).abs() < 1e-12 && (c.g - g).abs() < 1e-12 && (c.b - b).abs() < 1e-12);
    }
    assert!(hsl_to_lab(HslColor { h: 360.0, s: 50.0, l: 50.0 }).is_err());
    assert!(hsl_to_lab(HslColor { h: 10.0, s: 101.0, l: 50.0 }).is_err());
}

fn lab_strategy() -> impl Strategy<Value = LabColor> {
    (0.0..100.0f64, -110.0..110.0f64, -110.0..110.0f64).prop_map(|(l, a, b)| LabColor::new(l, a, b))
}

proptest! {
    #[test]
    fn ciede2000_is_a_symmetric_premetric(x in lab_strategy(), y in lab_strategy()) {
        let d = ciede2000(x, y);
        prop_assert!(d >= 0.0 && d.is_finite());
        prop_assert!((d - ciede2000(y, x)).abs() < 1e-9);
        prop_assert!(ciede2000(x, x).abs() < 1e-12);
    }

    #[test]
    fn rgb_gamut_maps_into_lab_bounds(r in 0.0..=1.0f64, g in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let lab = rgb_to_lab(RgbColor::new(r, g, b).unwrap());
        prop_assert!((0.0..=100.0).contains(&lab.l));
        prop_assert!(lab.a.abs() < 130.0 && lab.b.abs() < 130.0);
    }

    #[test]
    fn euclidean_scales_linearly(x in lab_strategy(), y in lab_strategy(), k in 0.1..10.0f64) {
        let d = lab_euclidean(x, y);
        prop_assert!((lab_euclidean(x.scaled(k), y.scaled(k)) - k * d).abs() < 1e-9 * (1.0 + k * d));
    }

    #[test]
    fn hsl_lightness_orders_grays(l1 in 0.0..100.0f64, l2 in 0.0..100.0f64) {
        let a = hsl_to_lab(HslColor { h: 0.0, s: 0.0, l: l1 }).unwrap();
        let b = hsl_to_lab(HslColor { h: 0.0, s: 0.0, l: l2 }).unwrap();
        if l1 < l2 { prop_assert!(a.l <= b.l); }
    }
}
