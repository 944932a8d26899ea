use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use risbeam::aperture::{
    coding_matrix, quantize_1bit, quantize_phase, wrap_phase, ApertureSpec, CodingMatrix,
    Direction, PhaseProfile, PhaseState,
};
use risbeam::effmedium::{
    effective_loss_tangent, effective_permittivity, electrical_thickness, loss_participation_ratio,
    optimize_air_gap, rank_via_candidates, select_via_location, CurrentMap, FieldRegionSamples,
    FieldSample, FomSample, GridCoord, LayerStack, PermittivityMode, Region,
};
use risbeam::farfield::{beam_metrics, pattern_cut, total_field};
use risbeam::linksim::{
    cophase_codebook, detect_bits, effective_channel, equalize, qpsk_modulate, simulate,
    LinkScenario,
};
use risbeam::refdata::{compare_predictions, load_reference, ReferenceMode, TableId};
use risbeam::Grid;

fn stack(h1: f64, h2: f64, h_air: f64, eps_sub: f64) -> LayerStack {
    LayerStack::new(h1, h2, h_air, eps_sub, 1.0, 0.02, 3.5).unwrap()
}

fn bits_grid(rows: usize, cols: usize) -> impl Strategy<Value = CodingMatrix> {
    prop::collection::vec(prop::collection::vec(0u8..=1, cols), rows)
        .prop_map(|b| CodingMatrix::from_bits(b).unwrap())
}

fn oracle(spec: &ApertureSpec, coding: &CodingMatrix, inc: Direction, obs: Direction) -> Complex64 {
    let k0 = 2.0 * PI / spec.wavelength_mm();
    let (ui, uo) = (inc.unit_vector(), obs.unit_vector());
    let mut e = Complex64::new(0.0, 0.0);
    for m in 0..spec.rows() {
        for n in 0..spec.cols() {
            let x = n as f64 * spec.dx_mm();
            let y = m as f64 * spec.dy_mm();
            let phase = k0 * (x * (uo[0] - ui[0]) + y * (uo[1] - ui[1]));
            let g = if coding.states()[(m, n)] == PhaseState::Pi { -1.0 } else { 1.0 };
            e += spec.alpha_at(m, n) * g * Complex64::from_polar(1.0, phase);
        }
    }
    e * uo[2].max(0.0).powf(spec.q_exponent())
}

proptest! {
    #[test]
    fn series_decreases_with_air_gap(h1 in 0.2..4.0f64, h2 in 0.2..4.0f64, a in 0.0..2.0f64, d in 1e-3..1.0f64, eps in 1.5..12.0f64) {
        let lo = effective_permittivity(&stack(h1, h2, a, eps), PermittivityMode::Series).unwrap();
        let hi = effective_permittivity(&stack(h1, h2, a + d, eps), PermittivityMode::Series).unwrap();
        prop_assert!(hi < lo);
        prop_assert!(hi > 1.0 && lo <= eps);
    }

    #[test]
    fn modes_agree_for_homogeneous_stack(h1 in 0.2..4.0f64, h2 in 0.2..4.0f64, a in 0.0..2.0f64, eps in 1.0..12.0f64) {
        let s = LayerStack::new(h1, h2, a, eps, eps, 0.02, 3.5).unwrap();
        let series = effective_permittivity(&s, PermittivityMode::Series).unwrap();
        let printed = effective_permittivity(&s, PermittivityMode::AsPrinted).unwrap();
        prop_assert!((series - eps).abs() <= 1e-12 * eps);
        prop_assert!((printed - eps).abs() <= 1e-12 * eps);
    }

    #[test]
    fn electrical_thickness_scaling(h1 in 0.2..4.0f64, h2 in 0.2..4.0f64, k in 0.1..10.0f64, f in 0.5..30.0f64) {
        let base = LayerStack::new(h1, h2, 0.0, 3.0, 3.0, 0.0, f).unwrap();
        let scaled = LayerStack::new(k * h1, k * h2, 0.0, 3.0, 3.0, 0.0, f).unwrap();
        let faster = LayerStack::new(h1, h2, 0.0, 3.0, 3.0, 0.0, k * f).unwrap();
        let t = electrical_thickness(&base, PermittivityMode::Series).unwrap();
        let ts = electrical_thickness(&scaled, PermittivityMode::Series).unwrap();
        let tf = electrical_thickness(&faster, PermittivityMode::Series).unwrap();
        prop_assert!((ts - k * t).abs() <= 1e-12 * ts);
        prop_assert!((tf - k * t).abs() <= 1e-12 * tf);
    }

    #[test]
    fn loss_participation_bounds(samples in prop::collection::vec((0.0..1e4f64, 1e-3..10.0f64, any::<bool>()), 1..40), tan in 0.0..0.1f64) {
        let fields: Vec<FieldSample> = samples
            .iter()
            .map(|&(e, v, fr4)| FieldSample { e_mag: e, volume_mm3: v, region: if fr4 { Region::Fr4 } else { Region::Other } })
            .collect();
        let fields = FieldRegionSamples::new(fields).unwrap();
        if let Ok(lpr) = loss_participation_ratio(&fields) {
            prop_assert!((0.0..=1.0).contains(&lpr));
            prop_assert!(effective_loss_tangent(lpr, tan).unwrap() <= tan);
        }
    }

    #[test]
    fn air_gap_argmax_survives_phase_scaling(pts in prop::collection::vec((1.0..100.0f64, -20.0..-0.5f64), 2..20), k in 0.1..3.5f64) {
        let mk = |scale: f64| -> Vec<FomSample> {
            pts.iter()
                .enumerate()
                .map(|(i, &(phi, s11))| FomSample::new(0.05 * (i + 1) as f64, phi * scale, s11).unwrap())
                .collect()
        };
        let a = optimize_air_gap(&mk(1.0)).unwrap();
        let b = optimize_air_gap(&mk(k)).unwrap();
        prop_assert_eq!(a.h_air_opt, b.h_air_opt);
    }

    #[test]
    fn via_selection_and_ranking(values in prop::collection::vec(0.01..1.0f64, 30), dz in 0.01..5.0f64, k in 0.1..10.0f64) {
        let map = CurrentMap::new(Grid::from_fn(5, 6, |r, c| values[6 * r + c]), 17.0).unwrap();
        let max = values.iter().copied().fold(0.0, f64::max);
        let winners: Vec<usize> = (0..30).filter(|&i| values[i] == max).collect();
        if winners.len() == 1 {
            let loc = select_via_location(&map, 0.0).unwrap();
            prop_assert_eq!(loc.plateau_size, 1);
            prop_assert_eq!((loc.nearest.row, loc.nearest.col), (winners[0] / 6, winners[0] % 6));
        }
        let cands: Vec<GridCoord> = (0..30).map(|i| GridCoord { row: i / 6, col: i % 6 }).collect();
        let a: Vec<GridCoord> = rank_via_candidates(&map, &cands, dz).unwrap().iter().map(|c| c.coord).collect();
        let b: Vec<GridCoord> = rank_via_candidates(&map, &cands, dz * k).unwrap().iter().map(|c| c.coord).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn quantizer_ignores_whole_turns(psi in -1e3..1e3f64, k in -50i32..50) {
        let shifted = psi + 2.0 * PI * k as f64;
        let w = wrap_phase(psi);
        prop_assert!(w > -PI && w <= PI);
        // Away from the decision boundaries the state must not move.
        if (w.abs() - PI / 2.0).abs() > 1e-6 {
            prop_assert_eq!(quantize_phase(shifted), quantize_phase(psi));
        }
    }

    #[test]
    fn flipping_every_bit_keeps_the_pattern(coding in bits_grid(6, 7), theta_i in 0.0..60.0f64, obs in -90.0..90.0f64) {
        let spec = ApertureSpec::new(6, 7, 17.0, 17.0, 85.655, 1.0, 1.0).unwrap();
        let inc = Direction::new(theta_i, 0.0).unwrap();
        let o = Direction::from_scan(obs).unwrap();
        let a = total_field(&spec, &coding, inc, o).unwrap();
        let b = total_field(&spec, &coding.inverted(), inc, o).unwrap();
        prop_assert_eq!(a.norm(), b.norm());
    }

    #[test]
    fn amplitude_scales_the_field(coding in bits_grid(5, 5), alpha in 0.05..1.0f64) {
        let unit = ApertureSpec::new(5, 5, 17.0, 17.0, 85.655, 1.0, 1.0).unwrap();
        let scaled = unit.clone().with_alpha(alpha).unwrap();
        let cut1 = pattern_cut(&unit, &coding, Direction::BROADSIDE, -90.0, 90.0, 1.0).unwrap();
        let cut2 = pattern_cut(&scaled, &coding, Direction::BROADSIDE, -90.0, 90.0, 1.0).unwrap();
        for i in 0..cut1.len() {
            prop_assert!((cut2.magnitude[i] - alpha * cut1.magnitude[i]).abs() <= 1e-12 * (1.0 + cut1.magnitude[i]));
        }
        let m1 = beam_metrics(&cut1, false).unwrap();
        let m2 = beam_metrics(&cut2, false).unwrap();
        prop_assert_eq!(m1.peak_angle_deg, m2.peak_angle_deg);
        prop_assert!((m2.peak_db - m1.peak_db - 20.0 * alpha.log10()).abs() < 1e-9);
    }

    #[test]
    fn separable_sum_matches_double_loop(
        rows in 1usize..9, cols in 1usize..9, dx in 5.0..40.0f64, dy in 5.0..40.0f64,
        q in 0.0..3.0f64, theta_i in 0.0..80.0f64, phi_i in -179.0..180.0f64, obs in -90.0..90.0f64,
        seed in any::<u64>(),
    ) {
        let bits: Vec<Vec<u8>> = (0..rows).map(|r| (0..cols).map(|c| ((seed >> ((r * cols + c) % 64)) & 1) as u8).collect()).collect();
        let coding = CodingMatrix::from_bits(bits).unwrap();
        let spec = ApertureSpec::new(rows, cols, dx, dy, 85.655, 0.8, q).unwrap();
        let inc = Direction::new(theta_i, phi_i).unwrap();
        let o = Direction::from_scan(obs).unwrap();
        let fast = total_field(&spec, &coding, inc, o).unwrap();
        let slow = oracle(&spec, &coding, inc, o);
        let scale: f64 = 0.8 * (rows * cols) as f64;
        prop_assert!((fast - slow).norm() <= 1e-12 * scale);
    }

    #[test]
    fn coding_is_deterministic(target in -80.0..80.0f64, inc in -60.0..60.0f64) {
        let spec = ApertureSpec::prototype();
        let i = Direction::from_scan(inc).unwrap();
        let t = Direction::from_scan(target).unwrap();
        prop_assert_eq!(coding_matrix(&spec, i, t).unwrap(), coding_matrix(&spec, i, t).unwrap());
    }

    #[test]
    fn quantized_profile_is_offset_invariant(phases in prop::collection::vec(-PI..PI, 12), k in -3i32..3) {
        let grid = Grid::from_fn(3, 4, |r, c| phases[4 * r + c]);
        let a = quantize_1bit(&PhaseProfile::new(grid.clone()).unwrap()).unwrap();
        let b = quantize_1bit(&PhaseProfile::new(grid.map(|p| p + 2.0 * PI * k as f64)).unwrap()).unwrap();
        for (r, c, &p) in grid.indexed() {
            if (p.abs() - PI / 2.0).abs() > 1e-6 {
                prop_assert_eq!(a.states()[(r, c)], b.states()[(r, c)]);
            }
        }
    }

    #[test]
    fn qpsk_round_trip(bits in prop::collection::vec(0u8..=1, 2..200), es in 0.1..10.0f64) {
        let bits = &bits[..bits.len() / 2 * 2];
        let symbols = qpsk_modulate(bits, es).unwrap();
        let back: Vec<u8> = symbols.iter().flat_map(|&s| detect_bits(s)).collect();
        prop_assert_eq!(back, bits.to_vec());
        for s in &symbols {
            prop_assert!((s.norm_sqr() - 2.0 * es).abs() <= 1e-12 * es);
        }
    }

    #[test]
    fn equalization_inverts_the_channel(re in -5.0..5.0f64, im in -5.0..5.0f64, x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let h = Complex64::new(re, im);
        prop_assume!(h.norm() > 1e-3);
        let s = Complex64::new(x, y);
        let e = equalize(&[h * s], h).unwrap()[0];
        prop_assert!((e - s).norm() <= 1e-12 * (1.0 + s.norm()));
    }

    #[test]
    fn cophasing_never_loses_the_direct_path(seed in any::<u64>()) {
        let s = LinkScenario::seeded(4, 4, 0.1, 1.0, seed, true).unwrap();
        let h = effective_channel(&s, &cophase_codebook(&s).unwrap()).unwrap();
        prop_assert!(h.norm() >= s.h_direct.norm() * (1.0 - 1e-12));
    }

    #[test]
    fn seeded_runs_repeat(seed in any::<u64>(), noise in 0.0..2.0f64) {
        let s = LinkScenario::seeded(3, 3, noise, 1.0, seed, true).unwrap();
        let c = cophase_codebook(&s).unwrap();
        let a = simulate(&s, Some(&c), 64).unwrap();
        let b = simulate(&s, Some(&c), 64).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!((0.0..=1.0).contains(&a.ser));
    }

    #[test]
    fn deviation_report_is_permutation_equivariant(preds in prop::collection::vec(-60.0..60.0f64, 6), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let entries = load_reference(TableId::T1).unwrap();
        let r = compare_predictions(&entries, &preds, ReferenceMode::Simulated).unwrap();
        let pe: Vec<_> = perm.iter().map(|&i| entries[i]).collect();
        let pp: Vec<f64> = perm.iter().map(|&i| preds[i]).collect();
        let rp = compare_predictions(&pe, &pp, ReferenceMode::Simulated).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(rp.per_entry[k], r.per_entry[i]);
        }
        prop_assert!((rp.mean_abs_deviation - r.mean_abs_deviation).abs() <= 1e-12);
        prop_assert_eq!(rp.max_abs_deviation, r.max_abs_deviation);
        prop_assert!(r.mean_abs_deviation <= r.max_abs_deviation);
    }
}

#[test]
fn self_comparison_is_zero() {
    for id in TableId::ALL {
        let e = load_reference(id).unwrap();
        for mode in [ReferenceMode::Simulated, ReferenceMode::Measured] {
            let refs: Vec<f64> = e
                .iter()
                .map(|x| match mode {
                    ReferenceMode::Simulated => x.target_scan_deg,
                    ReferenceMode::Measured => x.measured_scan_deg,
                })
                .collect();
            let r = compare_predictions(&e, &refs, mode).unwrap();
            assert!(r.per_entry.iter().all(|d| d.deviation_deg == 0.0));
            assert_eq!(r.max_abs_deviation, 0.0);
        }
    }
}

#[test]
fn mirrored_target_gives_mirrored_pattern_about_boresight() {
    // With the corner origin the coding for -theta equals the one for +theta
    // at normal incidence, so the pattern is symmetric and holds both lobes.
    let spec = ApertureSpec::prototype();
    let plus = coding_matrix(&spec, Direction::BROADSIDE, Direction::from_scan(30.0).unwrap()).unwrap();
    let minus = coding_matrix(&spec, Direction::BROADSIDE, Direction::from_scan(-30.0).unwrap()).unwrap();
    assert_eq!(plus.states(), minus.states());
    let cut = pattern_cut(&spec, &plus, Direction::BROADSIDE, -90.0, 90.0, 0.25).unwrap();
    let n = cut.len();
    for i in 0..n {
        let j = n - 1 - i;
        assert!((cut.magnitude[i] - cut.magnitude[j]).abs() <= 1e-9 * (1.0 + cut.magnitude[i]));
    }
}
