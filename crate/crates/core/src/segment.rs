//! Overlapping fixed-length video segments.

use crate::error::{Error, Result};

/// A half-open frame window `[start_frame, end_frame)` of fixed length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub segment_index: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame == self.start_frame
    }

    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start_frame..self.end_frame
    }
}

/// Splits a video of `frame_count` frames into overlapping segments of
/// `segment_length` frames advancing by `stride`. Trailing frames that cannot
/// fill a full segment are dropped.
pub fn segment_video(
    frame_count: usize,
    segment_length: usize,
    stride: usize,
) -> Result<Vec<Segment>> {
    assert!(frame_count >= 1, "frame_count must be >= 1");
    assert!(
        stride >= 1 && stride < segment_length,
        "stride must satisfy 1 <= stride < segment_length"
    );
    if frame_count < segment_length {
        return Err(Error::EmptyVideo {
            frame_count,
            segment_length,
        });
    }
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + segment_length <= frame_count {
        out.push(Segment {
            start_frame: start,
            end_frame: start + segment_length,
            segment_index: out.len(),
        });
        start += stride;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exactly_one_segment_fits() {
        let s = segment_video(15, 15, 10).unwrap();
        assert_eq!(s, vec![Segment { start_frame: 0, end_frame: 15, segment_index: 0 }]);
    }

    #[test]
    fn trailing_partial_segment_dropped() {
        // Start positions 0, 10, 20; 20 + 15 > 30 so the third is dropped.
        let s = segment_video(30, 15, 10).unwrap();
        assert_eq!(
            s,
            vec![
                Segment { start_frame: 0, end_frame: 15, segment_index: 0 },
                Segment { start_frame: 10, end_frame: 25, segment_index: 1 },
            ]
        );
    }

    #[test]
    fn too_short_video_is_an_error() {
        assert!(matches!(
            segment_video(14, 15, 10),
            Err(Error::EmptyVideo { frame_count: 14, segment_length: 15 })
        ));
    }

    proptest! {
        #[test]
        fn segments_overlap_by_length_minus_stride(
            frame_count in 1usize..400,
            segment_length in 2usize..40,
            stride in 1usize..40,
        ) {
            prop_assume!(stride < segment_length);
            match segment_video(frame_count, segment_length, stride) {
                Err(_) => prop_assert!(frame_count < segment_length),
                Ok(segs) => {
                    prop_assert!(!segs.is_empty());
                    for w in segs.windows(2) {
                        prop_assert_eq!(w[1].start_frame - w[0].start_frame, stride);
                        prop_assert_eq!(w[0].end_frame - w[1].start_frame,
                                        segment_length - stride);
                    }
                    for s in &segs {
                        prop_assert_eq!(s.len(), segment_length);
                        prop_assert!(s.end_frame <= frame_count);
                    }
                    // Maximality: one more stride would overflow.
                    let last = segs.last().unwrap();
                    prop_assert!(last.start_frame + stride + segment_length > frame_count);
                }
            }
        }
    }
}
