//! The `render` subcommand: small self-contained SVG charts from the CSVs
//! that `run` emits. No external services or fonts beyond SVG defaults.

use std::collections::BTreeMap;
use std::path::Path;

use bwft::error::{Error, Result};
use bwft::report::SummaryTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c", "#dc7ec0", "#797979",
];

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axes(max_x_label: &str) -> String {
    let x0 = MARGIN;
    let y0 = HEIGHT - MARGIN;
    let x1 = WIDTH - MARGIN;
    let y1 = MARGIN;
    let mut out = format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    for i in 0..=5 {
        let acc = i as f64 / 5.0;
        let y = y0 - acc * (y0 - y1);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{acc:.1}</text>\n",
            x0 - 6.0,
            y + 4.0
        ));
        out.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"#dddddd\"/>\n"
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{max_x_label}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    ));
    out
}

/// accuracy-vs-ordinal polyline chart, one series per repeat plus the mean.
pub fn render_curve_svg(title: &str, csv: &str) -> Result<String> {
    let mut series: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    let mut max_ordinal = 1usize;
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            if line != "ordinal,unit,repeat,accuracy" {
                return Err(Error::config(format!("not a curve CSV: header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::config(format!("curve CSV line {}: bad field count", i + 1)));
        }
        let ordinal: usize = fields[0].parse().map_err(|e| Error::config(format!("{e}")))?;
        let acc: f64 = fields[3].parse().map_err(|e| Error::config(format!("{e}")))?;
        max_ordinal = max_ordinal.max(ordinal);
        series.entry(fields[2].to_string()).or_default().push((ordinal, acc));
    }

    let x0 = MARGIN;
    let y0 = HEIGHT - MARGIN;
    let x1 = WIDTH - MARGIN;
    let y1 = MARGIN;
    let mut svg = svg_header(title);
    svg.push_str(&axes("candidate unit ordinal"));
    for (si, (name, points)) in series.iter().enumerate() {
        let color = if name == "mean" { "#222222" } else { PALETTE[si % PALETTE.len()] };
        let width = if name == "mean" { 2.5 } else { 1.2 };
        let coords: Vec<String> = points
            .iter()
            .map(|(o, a)| {
                let x = x0 + (*o as f64 / max_ordinal.max(1) as f64) * (x1 - x0);
                let y = y0 - a.clamp(0.0, 1.0) * (y0 - y1);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">repeat {name}</text>\n",
            x1 - 90.0,
            y1 + 14.0 * (si as f64 + 1.0)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Grouped bars of final accuracy: one group per model, one bar per strategy.
pub fn render_summary_svg(csv: &str) -> Result<String> {
    let table = SummaryTable::from_csv(csv)?;
    let groups = table.models.len();
    let bars = table.strategies.len();
    let x0 = MARGIN;
    let y0 = HEIGHT - MARGIN;
    let x1 = WIDTH - MARGIN;
    let y1 = MARGIN;
    let group_width = (x1 - x0) / groups.max(1) as f64;
    let bar_width = (group_width * 0.85) / bars.max(1) as f64;

    let mut svg = svg_header("final accuracy by model and strategy");
    svg.push_str(&axes(""));
    for (gi, model) in table.models.iter().enumerate() {
        let gx = x0 + gi as f64 * group_width;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{model}</text>\n",
            gx + group_width / 2.0,
            y0 + 16.0
        ));
        for (bi, _) in table.strategies.iter().enumerate() {
            if let Some(acc) = table.cells[gi][bi] {
                let h = acc.clamp(0.0, 1.0) * (y0 - y1);
                let x = gx + group_width * 0.075 + bi as f64 * bar_width;
                svg.push_str(&format!(
                    "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{}\"/>\n",
                    y0 - h,
                    bar_width * 0.9,
                    PALETTE[bi % PALETTE.len()]
                ));
            }
        }
    }
    for (bi, strategy) in table.strategies.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{}\">{strategy}</text>\n",
            x1 - 80.0,
            y1 + 14.0 * (bi as f64 + 1.0),
            PALETTE[bi % PALETTE.len()]
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders every known CSV in `dir` to an SVG next to it.
pub fn cmd_render(dir: &Path) -> Result<()> {
    let mut listing: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    listing.sort();
    let mut rendered = 0usize;
    for path in listing {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let svg = if name.starts_with("curve_") && name.ends_with(".csv") {
            let title = name.trim_end_matches(".csv").replace('_', " ");
            render_curve_svg(&title, &std::fs::read_to_string(&path)?)?
        } else if name == "summary.csv" {
            render_summary_svg(&std::fs::read_to_string(&path)?)?
        } else {
            continue;
        };
        let out = path.with_extension("svg");
        std::fs::write(&out, svg)?;
        rendered += 1;
        eprintln!("rendered {}", out.display());
    }
    if rendered == 0 {
        return Err(Error::config(format!(
            "nothing to render in {} (expected curve_*.csv or summary.csv)",
            dir.display()
        )));
    }
    Ok(())
}
