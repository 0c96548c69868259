//! Static SVG/CSV renderings of one video: ground-truth occupancy, frame
//! scores, and the piecewise-constant proposal function.

use std::fmt::Write as _;

use crate::types::{FrameScoreTrack, Proposal, Segment};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 320.0;
const MARGIN_LEFT: f64 = 50.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;

const GT_COLOR: &str = "#1f4fd8";
const SCORE_COLOR: &str = "#d62728";
const PROPOSAL_COLOR: &str = "#2ca02c";

/// Per-frame series sampled at frame start times.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub video_id: String,
    pub fps: f64,
    pub time: Vec<f64>,
    /// 1 where the frame center lies inside an annotation.
    pub gt: Vec<f64>,
    pub score: Vec<f64>,
    /// Proposal score on proposal frames, 0 elsewhere.
    pub proposal: Vec<f64>,
    pub gt_segments: Vec<Segment>,
    pub proposals: Vec<Proposal>,
}

impl PlotSeries {
    pub fn new(track: &FrameScoreTrack, gt_segments: &[Segment], proposals: &[Proposal]) -> Self {
        let fps = track.fps();
        let n = track.len();
        let time = (0..n).map(|t| t as f64 / fps).collect();
        let gt = (0..n)
            .map(|t| {
                let center = (t as f64 + 0.5) / fps;
                f64::from(u8::from(gt_segments.iter().any(|s| s.contains(center))))
            })
            .collect();
        let mut proposal = vec![0.0; n];
        for p in proposals {
            for v in proposal
                .iter_mut()
                .take(p.last_frame + 1)
                .skip(p.first_frame)
            {
                *v = p.score;
            }
        }
        Self {
            video_id: track.video_id().to_owned(),
            fps,
            time,
            gt,
            score: track.scores().to_vec(),
            proposal,
            gt_segments: gt_segments.to_vec(),
            proposals: proposals.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn duration(&self) -> f64 {
        let track_end = self.len() as f64 / self.fps;
        self.gt_segments
            .iter()
            .map(Segment::end)
            .fold(track_end, f64::max)
    }
}

/// `time,gt,score,proposal` with a header row and one row per frame.
pub fn render_csv(series: &PlotSeries) -> String {
    let mut out = String::from("time,gt,score,proposal\n");
    for t in 0..series.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            crate::io::format_decimal(series.time[t]),
            crate::io::format_decimal(series.gt[t]),
            crate::io::format_decimal(series.score[t]),
            crate::io::format_decimal(series.proposal[t]),
        );
    }
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_step(duration: f64) -> f64 {
    const STEPS: [f64; 12] = [
        0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 30.0, 60.0, 120.0, 300.0, 600.0, 1800.0,
    ];
    STEPS
        .iter()
        .copied()
        .find(|s| duration / s <= 12.0)
        .unwrap_or(3600.0)
}

struct Frame {
    duration: f64,
}

impl Frame {
    fn x(&self, t: f64) -> f64 {
        MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) * t / self.duration
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) * v
    }
}

/// Step path over frame intervals: value `v[t]` is held on `[t, t+1) / fps`.
fn step_path(frame: &Frame, values: &[f64], fps: f64) -> String {
    let mut d = String::new();
    for (t, v) in values.iter().enumerate() {
        let x0 = frame.x(t as f64 / fps);
        let x1 = frame.x((t + 1) as f64 / fps);
        let y = frame.y(*v);
        let cmd = if t == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{x0:.2},{y:.2} L{x1:.2},{y:.2} ");
    }
    d.trim_end().to_owned()
}

pub fn render_svg(series: &PlotSeries) -> String {
    let frame = Frame {
        duration: series.duration().max(1e-9),
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"  <title>{}</title>"#, escape(&series.video_id));
    let _ = writeln!(
        svg,
        r#"  <rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    for p in &series.proposals {
        let x0 = frame.x(p.segment.start());
        let x1 = frame.x(p.segment.end());
        let _ = writeln!(
            svg,
            r#"  <rect class="proposal-span" data-start="{}" data-end="{}" x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{PROPOSAL_COLOR}" fill-opacity="0.12"/>"#,
            crate::io::format_decimal(p.segment.start()),
            crate::io::format_decimal(p.segment.end()),
            frame.y(1.0),
            x1 - x0,
            frame.y(0.0) - frame.y(1.0),
        );
    }

    // Axes and ticks.
    let (x_left, x_right) = (frame.x(0.0), frame.x(frame.duration));
    let (y_bottom, y_top) = (frame.y(0.0), frame.y(1.0));
    let _ = writeln!(
        svg,
        r#"  <g class="axes" stroke="black" stroke-width="1"><line x1="{x_left:.2}" y1="{y_bottom:.2}" x2="{x_right:.2}" y2="{y_bottom:.2}"/><line x1="{x_left:.2}" y1="{y_bottom:.2}" x2="{x_left:.2}" y2="{y_top:.2}"/></g>"#
    );
    let step = tick_step(frame.duration);
    let mut tick = 0.0;
    svg.push_str("  <g class=\"x-ticks\">\n");
    while tick <= frame.duration + 1e-9 {
        let x = frame.x(tick);
        let _ = writeln!(
            svg,
            r#"    <line x1="{x:.2}" y1="{y_bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y_bottom + 4.0,
            y_bottom + 16.0,
            crate::io::format_decimal(tick).trim_end_matches(".0"),
        );
        tick += step;
    }
    svg.push_str("  </g>\n");
    for v in [0.0, 0.5, 1.0] {
        let y = frame.y(v);
        let _ = writeln!(
            svg,
            r#"  <text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            x_left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        0.5 * (x_left + x_right),
        HEIGHT - 8.0
    );

    let _ = writeln!(
        svg,
        r#"  <path class="gt" d="{}" fill="none" stroke="{GT_COLOR}" stroke-width="2"/>"#,
        step_path(&frame, &series.gt, series.fps)
    );
    let points: Vec<String> = series
        .score
        .iter()
        .enumerate()
        .map(|(t, s)| {
            format!(
                "{:.2},{:.2}",
                frame.x((t as f64 + 0.5) / series.fps),
                frame.y(*s)
            )
        })
        .collect();
    let _ = writeln!(
        svg,
        r#"  <polyline class="score" points="{}" fill="none" stroke="{SCORE_COLOR}" stroke-width="1.5"/>"#,
        points.join(" ")
    );
    let _ = writeln!(
        svg,
        r#"  <path class="proposal" d="{}" fill="none" stroke="{PROPOSAL_COLOR}" stroke-width="2"/>"#,
        step_path(&frame, &series.proposal, series.fps)
    );

    let lx = WIDTH - MARGIN_RIGHT + 15.0;
    svg.push_str("  <g class=\"legend\">\n");
    for (i, (color, label)) in [
        (GT_COLOR, "ground truth"),
        (SCORE_COLOR, "frame score"),
        (PROPOSAL_COLOR, "proposal"),
    ]
    .iter()
    .enumerate()
    {
        let y = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"    <line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            lx + 20.0,
            lx + 26.0,
            y + 4.0
        );
    }
    svg.push_str("  </g>\n");
    svg.push_str("</svg>\n");
    svg
}
