//! Learning/unlearning curves as a standalone SVG document.

use std::fmt::Write as _;

use fnn_core::engine::{MetricsLog, OptimalCriterion, Phase};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;

pub const TEST_COLOR: &str = "#2e8b57";
pub const FORGET_COLOR: &str = "#c0392b";
pub const MIA_COLOR: &str = "#1f5fbf";

struct Frame {
    x_min: f64,
    x_max: f64,
}

impl Frame {
    fn x(&self, epoch: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(1.0);
        LEFT + (epoch - self.x_min) / span * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, value: f64) -> f64 {
        let v = value.clamp(0.0, 1.0);
        HEIGHT - BOTTOM - v * (HEIGHT - TOP - BOTTOM)
    }

    fn step(&self) -> f64 {
        (self.x(self.x_min + 1.0) - self.x(self.x_min)).abs()
    }
}

fn polyline(out: &mut String, frame: &Frame, log: &MetricsLog, color: &str, class: &str, value: impl Fn(usize) -> f64) {
    let points: Vec<String> = log
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{:.2},{:.2}", frame.x(r.global_epoch as f64), frame.y(value(i))))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
        points.join(" ")
    );
}

/// Renders accuracy and attack-score curves over global epochs.
///
/// Unlearning epochs get a grey background band, the chance level 0.5 is a
/// dashed line, and epochs meeting `criterion` are marked with shaded bars.
pub fn render(log: &MetricsLog, criterion: &OptimalCriterion, title: &str) -> String {
    let x_min = log.records.iter().map(|r| r.global_epoch).min().unwrap_or(0) as f64;
    let x_max = log.records.iter().map(|r| r.global_epoch).max().unwrap_or(1) as f64;
    let frame = Frame { x_min, x_max };
    let half = frame.step() / 2.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    for r in log.records.iter().filter(|r| r.phase == Phase::Unlearning) {
        let x = frame.x(r.global_epoch as f64);
        let _ = writeln!(
            out,
            r##"<rect class="unlearning" x="{:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="#eeeeee"/>"##,
            x - half,
            2.0 * half,
            HEIGHT - TOP - BOTTOM
        );
    }
    for r in log
        .records
        .iter()
        .filter(|r| r.phase != Phase::Initial && criterion.accepts(r.test_accuracy, r.mia_score))
    {
        let x = frame.x(r.global_epoch as f64);
        let _ = writeln!(
            out,
            r##"<rect class="optimal" x="{:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="#f1c40f" fill-opacity="0.35"/>"##,
            x - half,
            2.0 * half,
            HEIGHT - TOP - BOTTOM
        );
    }

    // Axes and ticks.
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = frame.y(v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        );
    }
    let span = (x_max - x_min).max(1.0) as usize;
    let stride = (span / 15).max(1);
    let mut e = x_min as usize;
    while e as f64 <= x_max {
        let x = frame.x(e as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{e}</text>"#,
            y0 + 5.0,
            y0 + 19.0
        );
        e += stride;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">epoch</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0
    );

    let chance = frame.y(0.5);
    let _ = writeln!(
        out,
        r#"<line class="chance" x1="{x0:.2}" y1="{chance:.2}" x2="{x1:.2}" y2="{chance:.2}" stroke="{MIA_COLOR}" stroke-dasharray="6,4"/>"#
    );

    let recs = &log.records;
    polyline(&mut out, &frame, log, TEST_COLOR, "test-accuracy", |i| recs[i].test_accuracy);
    polyline(&mut out, &frame, log, FORGET_COLOR, "forget-accuracy", |i| recs[i].forget_accuracy);
    polyline(&mut out, &frame, log, MIA_COLOR, "mia", |i| recs[i].mia_score);

    let legend = [
        (TEST_COLOR, "test accuracy"),
        (FORGET_COLOR, "forget accuracy"),
        (MIA_COLOR, "MIA score"),
    ];
    for (i, (color, label)) in legend.iter().enumerate() {
        let x = x0 + 10.0 + 150.0 * i as f64;
        let y = TOP + 14.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            x + 20.0,
            x + 25.0,
            y + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use fnn_core::engine::MetricsRecord;

    fn log() -> MetricsLog {
        let mut log = MetricsLog::default();
        for g in 1..=6 {
            log.push(MetricsRecord {
                turn: 1,
                phase: if g <= 2 { Phase::Learning } else { Phase::Unlearning },
                epoch_in_phase: if g <= 2 { g } else { g - 2 },
                global_epoch: g,
                train_loss: 0.1,
                test_accuracy: 0.9 + g as f64 / 100.0,
                test_loss: 0.1,
                mia_score: 0.52,
                forget_accuracy: 0.9,
                wall_time: 0.0,
            });
        }
        log
    }

    #[test]
    fn structure() {
        let svg = render(&log(), &OptimalCriterion::default(), "t");
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert_eq!(svg.matches(r#"class="unlearning""#).count(), 4);
        // accuracy 0.95 and 0.96 at epochs 5 and 6.
        assert_eq!(svg.matches(r#"class="optimal""#).count(), 2);
        assert!(svg.contains(r#"class="chance""#));
    }

    #[test]
    fn title_is_escaped() {
        assert!(render(&log(), &OptimalCriterion::default(), "a<b").contains("a&lt;b"));
    }
}
