use printleak::gcode::{Direction, Header, MovementLabel, SpeedClass, Toolpath, Vec3, DEFAULT_SPEED_BOUNDARY};
use printleak::experiment::load_toolpath;
use printleak::reconstruct::{
    mean_tendency_error, mte_breakdown, segment_labels, segments_to_toolpath, smooth_labels, ReconstructConfig,
};
use printleak::simulate::{label_trace, SimConfig};
use proptest::prelude::*;

/// One planned move: geometry, header and speed, and its length in frames.
#[derive(Debug, Clone, Copy)]
struct Step {
    dir: Option<Direction>,
    printing: bool,
    fast: bool,
    frames: u32,
}

impl Step {
    fn label(&self) -> MovementLabel {
        let h = if self.printing { Header::Printing } else { Header::Positioning };
        let s = if self.fast { SpeedClass::Fast } else { SpeedClass::Slow };
        match self.dir {
            Some(d) => MovementLabel::xy(d, h, s),
            None => MovementLabel::z(h, s),
        }
    }
}

fn steps() -> impl Strategy<Value = Vec<Step>> {
    let step = (prop::option::weighted(0.85, prop::sample::select(Direction::ALL.to_vec())), any::<bool>(), any::<bool>(), 1u32..12)
        .prop_map(|(dir, printing, fast, frames)| Step { dir, printing, fast, frames });
    prop::collection::vec(step, 1..25).prop_map(|mut v| {
        // Neighbours must differ in plane, direction or header to form separate runs.
        v.dedup_by(|b, a| a.label().run_key() == b.label().run_key());
        v
    })
}

/// G-code whose moves last a whole number of 100 ms frames: 600 and 3000
/// mm/min cover 1 and 5 mm per frame; Z moves use 120 and 3000 mm/min.
fn gcode_for(steps: &[Step]) -> String {
    let mut g = String::from("; origin X50.000 Y50.000 Z0.200\n");
    let (mut x, mut y, mut z, mut e) = (50.0f64, 50.0f64, 0.2f64, 0.0f64);
    for s in steps {
        let feed = match (s.dir.is_some(), s.fast) {
            (true, false) => 600.0,
            (true, true) => 3000.0,
            (false, false) => 120.0,
            (false, true) => 3000.0,
        };
        let dist = feed / 600.0 * f64::from(s.frames);
        match s.dir {
            Some(Direction::XLeft) => x -= dist,
            Some(Direction::XRight) => x += dist,
            Some(Direction::YUp) => y += dist,
            Some(Direction::YDown) => y -= dist,
            None => z += dist,
        }
        let mut line = format!("G1 X{x:.3} Y{y:.3} Z{z:.3}");
        if s.printing {
            e += 0.1;
            line.push_str(&format!(" E{e:.5}"));
        }
        g.push_str(&format!("{line} F{feed}\n"));
    }
    g
}

fn toolpath(steps: &[Step]) -> Toolpath {
    load_toolpath(&gcode_for(steps), DEFAULT_SPEED_BOUNDARY).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mte_of_a_toolpath_against_itself_is_zero(s in steps()) {
        let t = toolpath(&s);
        prop_assert_eq!(mean_tendency_error(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn labelled_frames_segment_back_to_the_toolpath(s in steps()) {
        let t = toolpath(&s);
        let labels = label_trace(&t, &SimConfig::default().noiseless(), 100.0).unwrap();
        let segs = segment_labels(&labels, &ReconstructConfig::default());
        prop_assert_eq!(segs.len(), s.len());
        for (seg, step) in segs.iter().zip(&s) {
            prop_assert_eq!(seg.label, step.label());
            prop_assert_eq!(seg.n_frames, step.frames as usize);
        }
    }

    #[test]
    fn mte_ignores_a_uniform_frame_shift(s in steps(), shift in 1usize..500) {
        let t = toolpath(&s);
        let labels = label_trace(&t, &SimConfig::default().noiseless(), 100.0).unwrap();
        let cfg = ReconstructConfig::default();
        let segs = segment_labels(&labels, &cfg);
        let shifted: Vec<_> = segs.iter().map(|g| { let mut g = *g; g.first_frame += shift; g }).collect();
        let a = segments_to_toolpath(&segs, t.origin);
        let b = segments_to_toolpath(&shifted, t.origin);
        prop_assert_eq!(mean_tendency_error(&a, &t).unwrap(), mean_tendency_error(&b, &t).unwrap());
    }

    #[test]
    fn smoothing_is_idempotent_on_runs_of_two_or_more(s in steps()) {
        let labels: Vec<MovementLabel> = s
            .iter()
            .flat_map(|st| std::iter::repeat_n(st.label(), st.frames.max(2) as usize))
            .collect();
        let once = smooth_labels(&labels, 3).unwrap();
        let twice = smooth_labels(&once, 3).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once, labels);
    }

    #[test]
    fn mte_is_nonnegative(a in steps(), b in steps()) {
        let m = mean_tendency_error(&toolpath(&a), &toolpath(&b)).unwrap();
        prop_assert!(m >= 0.0 && m.is_finite());
    }
}

#[test]
fn header_change_mid_line_is_one_stroke() {
    let original = load_toolpath("; origin X0 Y0 Z0.2\nG1 X10 E1 F600\n", DEFAULT_SPEED_BOUNDARY).unwrap();
    let split = load_toolpath("; origin X0 Y0 Z0.2\nG1 X6 E1 F600\nG1 X10 F600\n", DEFAULT_SPEED_BOUNDARY).unwrap();
    let m = mte_breakdown(&split, &original).unwrap();
    assert_eq!(m.mte_percent, 0.0);
    assert_eq!(m.pairs.len(), 1);
    assert_eq!(m.reconstructed_lengths, vec![10.0]);
}

#[test]
fn lone_frame_between_runs_joins_the_left_run() {
    let a = MovementLabel::xy(Direction::XRight, Header::Printing, SpeedClass::Slow);
    let b = MovementLabel::xy(Direction::YUp, Header::Printing, SpeedClass::Slow);
    let c = MovementLabel::xy(Direction::XLeft, Header::Printing, SpeedClass::Slow);
    let out = smooth_labels(&[a, a, b, c, c], 3).unwrap();
    assert_eq!(out, vec![a, a, a, c, c]);
}

#[test]
fn reconstruction_starts_where_asked() {
    let s = [Step { dir: Some(Direction::YDown), printing: true, fast: false, frames: 4 }];
    let t = toolpath(&s);
    let labels = label_trace(&t, &SimConfig::default(), 100.0).unwrap();
    let segs = segment_labels(&labels, &ReconstructConfig::default());
    let rebuilt = segments_to_toolpath(&segs, Vec3::new(1.0, 2.0, 3.0));
    assert_eq!(rebuilt.segments[0].start, Vec3::new(1.0, 2.0, 3.0));
    assert!(rebuilt.end_position().max_abs_diff(Vec3::new(1.0, -2.0, 3.0)) < 1e-12);
}
