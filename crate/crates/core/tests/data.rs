use hislr::data::{
    build_test_unit, build_training_unit, equispaced_subvideos, TestMode, TrainMode, VideoSequence,
};
use hislr::io::load_image_sequence;
use hislr::Matrix;
use proptest::prelude::*;

/// Source index of every column of `unit`, matched by exact equality.
fn source_indices(unit: &Matrix, v: &VideoSequence) -> Vec<usize> {
    unit.column_iter()
        .map(|c| {
            v.frames()
                .column_iter()
                .position(|f| f == c)
                .expect("column comes from the video")
        })
        .collect()
}

fn video() -> impl Strategy<Value = VideoSequence> {
    (1usize..6, 2usize..16).prop_flat_map(|(d, m)| {
        prop::collection::vec(0.0f64..=1.0, d * m).prop_map(move |vals| {
            // a distinct first pixel keeps frames distinguishable
            let mut frames = Matrix::from_vec(d, m, vals);
            for j in 0..m {
                frames[(0, j)] = j as f64 / m as f64;
            }
            VideoSequence::new(frames, "c", "v").unwrap()
        })
    })
}

proptest! {
    #[test]
    fn units_are_bounded_and_keep_frame_order(v in video(), tau_seed in 0usize..100) {
        let tau = 1 + tau_seed % v.len();
        for mode in [TestMode::FirstPlusLast, TestMode::RawWindow] {
            if mode == TestMode::FirstPlusLast && tau < 2 {
                continue;
            }
            let unit = build_test_unit(&v, tau, mode).unwrap();
            prop_assert!(unit.iter().all(|x| (0.0..=1.0).contains(x)));
            let idx = source_indices(&unit, &v);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }
        let raw = build_training_unit(&v, tau, TrainMode::Raw).unwrap();
        let idx = source_indices(&raw, &v);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        if tau < v.len() {
            let sub = build_training_unit(&v, tau, TrainMode::NeutralSubtract).unwrap();
            prop_assert!(sub.iter().all(|x| (-1.0..=1.0).contains(x)));
            let first = v.frames().column(0);
            for (k, col) in sub.column_iter().enumerate() {
                let src = v.frames().column(v.len() - tau + k);
                prop_assert_eq!(col.into_owned(), src - first);
            }
        }
    }

    #[test]
    fn subvideos_partition_their_frames(count in 1usize..5, per in 2usize..6, extra in 0usize..4) {
        let m = count * per + extra;
        let frames = Matrix::from_fn(2, m, |_, j| j as f64 / m as f64);
        let v = VideoSequence::new(frames, "c", "v").unwrap();
        let subs = equispaced_subvideos(&v, count, per).unwrap();
        let mut all = Vec::new();
        for s in &subs {
            let idx = source_indices(s.frames(), &v);
            prop_assert!(idx.windows(2).all(|w| w[1] - w[0] == count));
            all.extend(idx);
        }
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), count * per);
    }
}

#[test]
fn image_directory_to_units() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..5u8 {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([k * 50, 255 - k * 50, 0, 255]);
        std::fs::write(dir.path().join(format!("f{k:02}.pgm")), bytes).unwrap();
    }
    let v = load_image_sequence(dir.path(), None, "smile", "s1").unwrap();
    assert_eq!((v.dim(), v.len()), (4, 5));
    assert_eq!(v.frames()[(0, 4)], 200.0 / 255.0);
    let unit = build_training_unit(&v, 3, TrainMode::NeutralSubtract).unwrap();
    assert_eq!(unit[(0, 0)], 100.0 / 255.0);
    assert_eq!(unit[(1, 2)], -200.0 / 255.0);
    assert!(unit
        .row(2)
        .iter()
        .chain(unit.row(3).iter())
        .all(|x| *x == 0.0));
}
