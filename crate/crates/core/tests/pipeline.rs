use proptest::prelude::*;
use segfire::imaging::{RasterImage, FRAME_HEIGHT, FRAME_WIDTH, TILE_HEIGHT, TILE_WIDTH};
use segfire::pipeline::*;
use segfire::{Error, Label, Result};

const CALM: [u8; 3] = [70, 110, 60];
const FLAME: [u8; 3] = [245, 130, 30];

/// Fire when at least 1% of the pixels are flame-coloured.
struct ColorCensus;

impl TileClassifier for ColorCensus {
    fn classify_tile(&self, tile: &RasterImage) -> Result<(Label, f64)> {
        let hot = tile
            .pixels()
            .chunks_exact(3)
            .filter(|p| p[0] >= 215 && p[1] >= 60 && p[0] as u16 >= p[2] as u16 + 20)
            .count();
        let fraction = hot as f64 / (tile.width() * tile.height()) as f64;
        let score = fraction - 0.01;
        Ok((Label::from_score(score), score))
    }
}

fn paint_patch(frame: &mut RasterImage, tile: usize) {
    let (x0, y0) = ((tile % 4) * TILE_WIDTH, (tile / 4) * TILE_HEIGHT);
    for y in y0 + 80..y0 + 160 {
        for x in x0 + 100..x0 + 220 {
            frame.put(x, y, FLAME);
        }
    }
}

/// 60 frames: calm, then one burning tile from frame 20, a second from 40.
fn scripted_stream() -> FrameStream {
    FrameStream::from_images(
        (0..60).map(|i| {
            let mut frame = RasterImage::filled(FRAME_WIDTH, FRAME_HEIGHT, CALM);
            if i >= 20 {
                paint_patch(&mut frame, 5);
            }
            if i >= 40 {
                paint_patch(&mut frame, 6);
            }
            frame
        }),
        60,
    )
}

fn array(bits: u16) -> DecisionArray {
    DecisionArray::from_verdicts((0..12).map(|i| bits >> i & 1 == 1).collect())
}

#[test]
fn decide_exhaustive() {
    for bits in 0u16..4096 {
        let expected = match bits.count_ones() {
            0 => Decision::Continue,
            1 => Decision::Reprocess(bits.trailing_zeros() as usize),
            _ => Decision::Alert,
        };
        assert_eq!(decide(&array(bits)), expected, "{bits:012b}");
    }
}

#[test]
fn adding_fire_never_lowers_severity() {
    for bits in 0u16..4096 {
        let base = decide(&array(bits)).severity();
        for tile in 0..12 {
            assert!(decide(&array(bits | 1 << tile)).severity() >= base);
        }
    }
}

#[test]
fn golden_trace() {
    let stream = scripted_stream();
    let mut sink = JsonLinesSink::new(Vec::new());
    let events = run_pipeline(&stream, &ColorCensus, &SamplerConfig::default(), &mut sink).unwrap();
    let frames: Vec<usize> = events.iter().map(|e| e.frame).collect();
    assert_eq!(frames, [0, 20, 40]);
    assert_eq!(events[0].action, EventAction::Continue);
    assert_eq!(
        events[1].action,
        EventAction::Reprocessed { tile: 5, confirmed: true, image_ref: Some("frame:20".into()) }
    );
    assert!(events[1].sub_decisions.as_ref().unwrap().fire_count() >= 2);
    assert_eq!(events[2].action, EventAction::Alert { image_ref: "frame:40".into() });
    assert_eq!(events[2].decisions.fire_tiles(), [5, 6]);
    let timestamps: Vec<f64> = events.iter().map(|e| e.timestamp).collect();
    assert_eq!(timestamps, [0.0, 20.0 / 60.0, 40.0 / 60.0]);

    let first = sink.into_inner();
    let mut again = JsonLinesSink::new(Vec::new());
    run_pipeline(&stream, &ColorCensus, &SamplerConfig::default(), &mut again).unwrap();
    assert_eq!(first, again.into_inner());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 3);
}

#[test]
fn unconfirmed_reprocess_does_not_alert() {
    // A 30 x 30 patch flags tile 1 but falls inside a single sub-tile once upscaled.
    let mut frame = RasterImage::filled(FRAME_WIDTH, FRAME_HEIGHT, CALM);
    for y in 10..40 {
        for x in 10..40 {
            frame.put(TILE_WIDTH + x, y, FLAME);
        }
    }
    let stream = FrameStream::from_images([frame], 60);
    let events = run_pipeline(&stream, &ColorCensus, &SamplerConfig::default(), &mut Vec::new()).unwrap();
    match &events[0].action {
        EventAction::Reprocessed { tile: 1, confirmed, image_ref } => {
            assert!(!confirmed);
            assert!(image_ref.is_none());
            assert!(!events[0].is_alert());
        }
        other => panic!("unexpected action {other:?}"),
    }
}

struct Broken;

impl EventSink for Broken {
    fn emit(&mut self, _: &PipelineEvent) -> std::io::Result<()> {
        Err(std::io::Error::other("disk full"))
    }
}

#[test]
fn sink_failure_keeps_the_event() {
    let stream = scripted_stream();
    match run_pipeline(&stream, &ColorCensus, &SamplerConfig::default(), &mut Broken) {
        Err(Error::Sink { event, .. }) => assert_eq!(event.frame, 0),
        other => panic!("expected sink error, got {other:?}"),
    }
}

#[test]
fn directory_stream_matches_memory_stream() {
    let dir = tempfile::tempdir().unwrap();
    let stream = scripted_stream();
    stream.save_to_dir(dir.path()).unwrap();
    let loaded = FrameStream::from_dir(dir.path(), 60).unwrap();
    assert_eq!(loaded.len(), 60);
    let a = run_pipeline(&stream, &ColorCensus, &SamplerConfig::default(), &mut Vec::new()).unwrap();
    let b = run_pipeline(&loaded, &ColorCensus, &SamplerConfig::default(), &mut Vec::new()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.decisions, y.decisions);
        assert_eq!(x.is_alert(), y.is_alert());
    }
    assert!(b[2].alert_ref().unwrap().ends_with("000040.ppm"));
}

#[test]
fn odd_sized_frames_are_resized() {
    let stream = FrameStream::from_images([RasterImage::filled(640, 360, CALM)], 30);
    let events = run_pipeline(&stream, &ColorCensus, &SamplerConfig { keep_every: 10, fps: 30 }, &mut Vec::new()).unwrap();
    assert_eq!(events[0].decisions.verdicts.len(), 12);
}

proptest! {
    #[test]
    fn sampling_cadence(n in 0usize..400, k in 1usize..50) {
        let stream = FrameStream::from_images((0..n).map(|_| RasterImage::filled(1, 1, [0; 3])), 60);
        let picked: Vec<usize> = sample_frames(&stream, &SamplerConfig { keep_every: k, fps: 60 }).iter().map(|f| f.index).collect();
        prop_assert_eq!(picked.len(), n.div_ceil(k));
        prop_assert!(picked.iter().enumerate().all(|(i, &f)| f == i * k));
    }
}
