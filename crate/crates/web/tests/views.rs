use advaudio_web::{ctc_view, metrics_view, pca_view, pca_wav, reduce_alignment};

#[test]
fn reduce_collapses_then_drops_blanks() {
    assert_eq!(reduce_alignment("aa-ab").unwrap(), "aab");
    assert_eq!(reduce_alignment("a-a").unwrap(), "aa");
    assert_eq!(reduce_alignment("---").unwrap(), "");
    assert!(reduce_alignment("abc").is_err());
}

#[test]
fn ctc_enumeration_matches_forward_algorithm() {
    for seed in 0..5 {
        let v = ctc_view("ab", 6, seed).unwrap();
        assert!((v.phrase_prob - v.enumerated_prob).abs() <= 1e-12 * v.phrase_prob.max(1e-300));
        assert!(v
            .alignments
            .iter()
            .all(|r| reduce_alignment(&r.alignment).unwrap() == "ab"));
        assert!(v.alignments.windows(2).all(|w| w[0].prob >= w[1].prob));
        for row in &v.probs {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
    // "aa" needs a blank between the repeats, so two frames are too few
    assert!(ctc_view("aa", 2, 0).unwrap().alignments.is_empty());
    assert!(ctc_view("ab", 9, 0).is_err());
    assert!(ctc_view("x", 4, 0).is_err());
}

#[test]
fn pca_view_reports_retention() {
    let full = pca_view("hello", 3, 1.0, "variance").unwrap();
    assert_eq!(full.k, full.max_k);
    assert!((full.cumulative_variance.last().unwrap() - 1.0).abs() < 1e-9);
    assert!(full
        .cumulative_variance
        .windows(2)
        .all(|w| w[0] <= w[1] + 1e-12));
    assert_eq!(full.original_envelope.len(), full.reduced_envelope.len());

    let low = pca_view("hello", 3, 0.1, "components").unwrap();
    assert!(low.k < full.k);
    assert!(low.distortion_db > full.distortion_db);
    assert!(pca_view("hello", 3, 0.5, "loudness").is_err());
}

#[test]
fn wav_bytes_have_riff_header() {
    let original = pca_wav("cab", 1, None, "variance").unwrap();
    let reduced = pca_wav("cab", 1, Some(0.5), "variance").unwrap();
    assert_eq!(&original[..4], b"RIFF");
    assert_eq!(original.len(), reduced.len());
    assert_ne!(original, reduced);
}

#[test]
fn metrics_view_marks_undefined_values() {
    let m = metrics_view("kitten", "sitting");
    assert_eq!(m.edit_distance, 3);
    assert!(m.similarity > 0.0 && m.similarity <= 1.0);
    let empty = metrics_view("", "");
    assert_eq!(empty.normalized_edit_distance, None);
    assert_eq!(empty.word_error_rate, None);
}
