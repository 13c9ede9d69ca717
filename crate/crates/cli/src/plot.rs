//! Deterministic SVG rendering: interval charts, box plots, and the recall
//! presence matrix. No display dependency; identical inputs produce
//! byte-identical files, which keeps plots diff-testable.

use regolith_core::evaluate::{distribution, CellState, RecallMatrix};
use regolith_core::interval::Interval;
use regolith_core::normalize::sample_id_cmp;

pub const TRUTH_COLOR: &str = "#4472c4";
pub const WITH_DOC_COLOR: &str = "#2e8b57";
pub const STANDALONE_COLOR: &str = "#c0392b";
const MISSED_COLOR: &str = "#c0392b";
const NOT_TRUTHED_COLOR: &str = "#79c77c";

/// One plotted series of per-sample intervals.
pub struct IntervalSeries {
    pub label: String,
    pub color: String,
    pub entries: Vec<(String, Interval)>,
}

fn fmt(value: f64) -> String {
    let mut text = format!("{value:.6}");
    while text.contains('.') && (text.ends_with('0') || text.ends_with('.')) {
        text.pop();
    }
    if text.is_empty() || text == "-" {
        text = "0".to_owned();
    }
    text
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, color: &str, stroke: f64) {
        self.body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"{stroke}\"/>\n",
            x1, y1, x2, y2
        ));
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: Option<&str>) {
        let stroke = stroke
            .map(|s| format!(" stroke=\"{s}\" stroke-width=\"1\""))
            .unwrap_or_default();
        self.body.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"{stroke}/>\n"
        ));
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        self.body.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r:.2}\" fill=\"{fill}\"/>\n"
        ));
    }

    fn path(&mut self, d: &str, fill: &str) {
        self.body
            .push_str(&format!("<path d=\"{d}\" fill=\"{fill}\"/>\n"));
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        self.body.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size}\" font-family=\"sans-serif\" text-anchor=\"{anchor}\">{}</text>\n",
            xml_escape(content)
        ));
    }

    fn text_rotated(&mut self, x: f64, y: f64, size: f64, content: &str) {
        self.body.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size}\" font-family=\"sans-serif\" text-anchor=\"end\" transform=\"rotate(-45 {x:.2} {y:.2})\">{}</text>\n",
            xml_escape(content)
        ));
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

/// Linear value-to-pixel mapping for a vertical axis.
struct YScale {
    min: f64,
    max: f64,
    top: f64,
    bottom: f64,
}

impl YScale {
    fn new(min: f64, max: f64, top: f64, bottom: f64) -> Self {
        let (min, max) = if (max - min).abs() < 1e-12 {
            (min - 0.5, max + 0.5)
        } else {
            let pad = (max - min) * 0.05;
            (min - pad, max + pad)
        };
        Self {
            min,
            max,
            top,
            bottom,
        }
    }

    fn y(&self, value: f64) -> f64 {
        self.bottom - (value - self.min) / (self.max - self.min) * (self.bottom - self.top)
    }

    fn ticks(&self, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / n as f64)
            .collect()
    }
}

/// Interval chart for one compound: samples along the x axis, one colored
/// interval per series. Intervals shorter than 0.5% of the axis range are
/// drawn as an hourglass marker instead of a bar.
pub fn plot_intervals(title: &str, series: &[IntervalSeries]) -> String {
    let mut samples: Vec<String> = series
        .iter()
        .flat_map(|s| s.entries.iter().map(|(id, _)| id.clone()))
        .collect();
    samples.sort_by(|a, b| sample_id_cmp(a, b));
    samples.dedup();

    let values: Vec<f64> = series
        .iter()
        .flat_map(|s| s.entries.iter().flat_map(|(_, iv)| [iv.lo(), iv.hi()]))
        .collect();
    // an empty chart still renders, with a default axis
    let (vmin, vmax) = if values.is_empty() {
        (0.0, 1.0)
    } else {
        (
            values.iter().copied().fold(f64::INFINITY, f64::min),
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };

    let slot = 80.0;
    let (left, right, top, bottom_margin) = (70.0, 30.0, 50.0, 60.0);
    let width = (left + right + slot * samples.len() as f64).max(320.0);
    let height = 420.0;
    let mut svg = Svg::new(width, height);
    let scale = YScale::new(vmin, vmax, top, height - bottom_margin);

    svg.text(width / 2.0, 24.0, 15.0, "middle", title);
    // axes and ticks
    svg.line(left, top, left, height - bottom_margin, "#333", 1.0);
    svg.line(
        left,
        height - bottom_margin,
        width - right,
        height - bottom_margin,
        "#333",
        1.0,
    );
    for tick in scale.ticks(5) {
        let y = scale.y(tick);
        svg.line(left - 4.0, y, left, y, "#333", 1.0);
        svg.text(left - 8.0, y + 4.0, 11.0, "end", &fmt(tick));
        svg.line(left, y, width - right, y, "#eee", 0.5);
    }

    let near_zero = (scale.max - scale.min) * 0.005;
    for (sample_idx, sample) in samples.iter().enumerate() {
        let x0 = left + slot * sample_idx as f64;
        svg.text(
            x0 + slot / 2.0,
            height - bottom_margin + 18.0,
            11.0,
            "middle",
            sample,
        );
        for (series_idx, s) in series.iter().enumerate() {
            let Some((_, interval)) = s.entries.iter().find(|(id, _)| id == sample) else {
                continue;
            };
            let x = x0 + slot * (series_idx + 1) as f64 / (series.len() + 1) as f64;
            if interval.length() <= near_zero {
                let y = scale.y(interval.midpoint());
                svg.path(
                    &format!(
                        "M {:.2} {:.2} H {:.2} L {:.2} {:.2} H {:.2} Z",
                        x - 5.0,
                        y - 6.0,
                        x + 5.0,
                        x - 5.0,
                        y + 6.0,
                        x + 5.0
                    ),
                    &s.color,
                );
            } else {
                let (y_lo, y_hi) = (scale.y(interval.lo()), scale.y(interval.hi()));
                svg.line(x, y_hi, x, y_lo, &s.color, 3.0);
                svg.line(x - 5.0, y_lo, x + 5.0, y_lo, &s.color, 2.0);
                svg.line(x - 5.0, y_hi, x + 5.0, y_hi, &s.color, 2.0);
            }
        }
    }

    // legend
    for (idx, s) in series.iter().enumerate() {
        let y = 38.0 + 16.0 * idx as f64;
        svg.rect(width - right - 120.0, y - 9.0, 12.0, 12.0, &s.color, None);
        svg.text(width - right - 104.0, y + 1.0, 11.0, "start", &s.label);
    }
    svg.finish()
}

/// Box plots, one per group. Whiskers run to the most extreme values inside
/// the 1.5 IQR fences; values beyond them are drawn as dots.
pub fn plot_box(title: &str, groups: &[(String, Vec<f64>)]) -> String {
    let slot = 70.0;
    let (left, right, top, bottom_margin) = (70.0, 30.0, 50.0, 70.0);
    let width = (left + right + slot * groups.len() as f64).max(320.0);
    let height = 420.0;
    let mut svg = Svg::new(width, height);

    let all: Vec<f64> = groups.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let vmin = all.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = YScale::new(vmin, vmax, top, height - bottom_margin);

    svg.text(width / 2.0, 24.0, 15.0, "middle", title);
    svg.line(left, top, left, height - bottom_margin, "#333", 1.0);
    svg.line(
        left,
        height - bottom_margin,
        width - right,
        height - bottom_margin,
        "#333",
        1.0,
    );
    for tick in scale.ticks(5) {
        let y = scale.y(tick);
        svg.line(left - 4.0, y, left, y, "#333", 1.0);
        svg.text(left - 8.0, y + 4.0, 11.0, "end", &fmt(tick));
        svg.line(left, y, width - right, y, "#eee", 0.5);
    }

    for (idx, (label, values)) in groups.iter().enumerate() {
        let Some(dist) = distribution(values) else {
            continue;
        };
        let x = left + slot * idx as f64 + slot / 2.0;
        svg.text_rotated(x, height - bottom_margin + 16.0, 11.0, label);

        let iqr = dist.q3 - dist.q1;
        let (low_fence, high_fence) = (dist.q1 - 1.5 * iqr, dist.q3 + 1.5 * iqr);
        let whisker_lo = values
            .iter()
            .copied()
            .filter(|v| *v >= low_fence)
            .fold(f64::INFINITY, f64::min);
        let whisker_hi = values
            .iter()
            .copied()
            .filter(|v| *v <= high_fence)
            .fold(f64::NEG_INFINITY, f64::max);

        let half = 18.0;
        svg.line(x, scale.y(whisker_hi), x, scale.y(dist.q3), "#333", 1.0);
        svg.line(x, scale.y(dist.q1), x, scale.y(whisker_lo), "#333", 1.0);
        svg.line(x - 8.0, scale.y(whisker_hi), x + 8.0, scale.y(whisker_hi), "#333", 1.0);
        svg.line(x - 8.0, scale.y(whisker_lo), x + 8.0, scale.y(whisker_lo), "#333", 1.0);
        svg.rect(
            x - half,
            scale.y(dist.q3),
            half * 2.0,
            (scale.y(dist.q1) - scale.y(dist.q3)).max(0.5),
            "#cfe2f3",
            Some("#333"),
        );
        svg.line(x - half, scale.y(dist.median), x + half, scale.y(dist.median), "#333", 2.0);
        for outlier in &dist.outliers {
            svg.circle(x, scale.y(*outlier), 3.0, "#e69138");
        }
    }
    svg.finish()
}

/// Recall presence matrix: one colored cell per (compound, sample) pair.
pub fn plot_matrix(title: &str, matrix: &RecallMatrix) -> String {
    let cell = 28.0;
    let (left, top) = (110.0, 110.0);
    let width = left + cell * matrix.sample_ids.len() as f64 + 160.0;
    let height = top + cell * matrix.compounds.len() as f64 + 30.0;
    let mut svg = Svg::new(width, height);

    svg.text(width / 2.0, 24.0, 15.0, "middle", title);
    for (col, sample) in matrix.sample_ids.iter().enumerate() {
        svg.text_rotated(
            left + cell * col as f64 + cell / 2.0 + 4.0,
            top - 8.0,
            11.0,
            sample,
        );
    }
    for (row, compound) in matrix.compounds.iter().enumerate() {
        svg.text(
            left - 8.0,
            top + cell * row as f64 + cell / 2.0 + 4.0,
            11.0,
            "end",
            compound,
        );
        for (col, state) in matrix.cells[row].iter().enumerate() {
            let color = match state {
                CellState::Provided => TRUTH_COLOR,
                CellState::Missed => MISSED_COLOR,
                CellState::NotTruthed => NOT_TRUTHED_COLOR,
            };
            svg.rect(
                left + cell * col as f64,
                top + cell * row as f64,
                cell - 2.0,
                cell - 2.0,
                color,
                None,
            );
        }
    }

    let legend_x = left + cell * matrix.sample_ids.len() as f64 + 16.0;
    for (idx, (color, label)) in [
        (TRUTH_COLOR, "provided"),
        (MISSED_COLOR, "missed"),
        (NOT_TRUTHED_COLOR, "not truthed"),
    ]
    .iter()
    .enumerate()
    {
        let y = top + 18.0 * idx as f64;
        svg.rect(legend_x, y - 10.0, 12.0, 12.0, color, None);
        svg.text(legend_x + 16.0, y, 11.0, "start", label);
    }
    svg.finish()
}
