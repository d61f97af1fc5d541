use std::fmt::Write;

use super::{AnalysisError, LatentTable};
use crate::geometry::PointCloud;

/// `id,x,y,z,distance_to_mean_face`, one line per point; `id` is the point
/// index.
pub fn distance_csv(cloud: &PointCloud, distances: &[f64]) -> String {
    let mut s = String::from("id,x,y,z,distance_to_mean_face\n");
    for (i, (p, d)) in cloud.points().iter().zip(distances).enumerate() {
        writeln!(s, "{i},{:.9e},{:.9e},{:.9e},{:.9e}", p.x, p.y, p.z, d).unwrap();
    }
    s
}

/// `id,z<a>,z<b>,cluster` for a 2-D view of the latent table.
pub fn scatter_csv(
    table: &LatentTable,
    labels: &[usize],
    dims: (usize, usize),
) -> Result<String, AnalysisError> {
    check_dims(table, dims)?;
    let mut s = format!("id,z{},z{},cluster\n", dims.0, dims.1);
    for (r, l) in table.rows().iter().zip(labels) {
        writeln!(s, "{},{:.16e},{:.16e},{l}", r.id, r.z[dims.0], r.z[dims.1]).unwrap();
    }
    Ok(s)
}

fn check_dims(table: &LatentTable, dims: (usize, usize)) -> Result<(), AnalysisError> {
    for dim in [dims.0, dims.1] {
        if dim >= table.dim() {
            return Err(AnalysisError::Dimension { dim, d: table.dim() });
        }
    }
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Minimal SVG scatter: framed axes, one dot per row coloured by cluster,
/// centroids drawn as crosses.
pub fn scatter_svg(
    table: &LatentTable,
    labels: &[usize],
    centroids: &[Vec<f64>],
    dims: (usize, usize),
    title: &str,
) -> Result<String, AnalysisError> {
    check_dims(table, dims)?;
    const W: f64 = 480.0;
    const M: f64 = 48.0;
    let xs: Vec<f64> = table.rows().iter().map(|r| r.z[dims.0]).chain(centroids.iter().map(|c| c[dims.0])).collect();
    let ys: Vec<f64> = table.rows().iter().map(|r| r.z[dims.1]).chain(centroids.iter().map(|c| c[dims.1])).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| W - M - (y - y0) / (y1 - y0) * (W - 2.0 * M);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{W}" viewBox="0 0 {W} {W}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{W}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#, W / 2.0, escape(title)).unwrap();
    let inner = W - 2.0 * M;
    writeln!(s, r#"<rect x="{M}" y="{M}" width="{inner}" height="{inner}" fill="none" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">z{}</text>"#, W / 2.0, W - 12.0, dims.0).unwrap();
    writeln!(s, r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">z{}</text>"#, W / 2.0, W / 2.0, dims.1).unwrap();
    for (v, x, anchor) in [(x0, M, "start"), (x1, W - M, "end")] {
        writeln!(s, r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="10">{v:.3}</text>"#, W - M + 14.0).unwrap();
    }
    for (v, y) in [(y0, W - M), (y1, M + 10.0)] {
        writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.3}</text>"#, M - 4.0).unwrap();
    }
    for (r, &l) in table.rows().iter().zip(labels) {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"><title>{}</title></circle>"#,
            px(r.z[dims.0]),
            py(r.z[dims.1]),
            PALETTE[l % PALETTE.len()],
            escape(&r.id)
        )
        .unwrap();
    }
    for (c, cent) in centroids.iter().enumerate() {
        let (cx, cy) = (px(cent[dims.0]), py(cent[dims.1]));
        writeln!(
            s,
            r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{}" stroke-width="3"/>"#,
            cx - 7.0, cy - 7.0, cx + 7.0, cy + 7.0, cx - 7.0, cy + 7.0, cx + 7.0, cy - 7.0,
            PALETTE[c % PALETTE.len()]
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::LatentRow;
    use crate::formats::{Gender, Race};
    use crate::geometry::Point3;

    fn table() -> LatentTable {
        LatentTable::new(
            (0..4)
                .map(|i| LatentRow {
                    id: format!("s<{i}>"),
                    z: vec![i as f64, -(i as f64), 0.5],
                    gender: Gender::Male,
                    race: Race::White,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn distance_csv_layout() {
        let c = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0), Point3::new(0.0, 0.0, 0.0)]).unwrap();
        let s = distance_csv(&c, &[0.5, 0.0]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "id,x,y,z,distance_to_mean_face");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,1.0"));
    }

    #[test]
    fn svg_has_one_dot_per_row() {
        let t = table();
        let svg = scatter_svg(&t, &[0, 0, 1, 2], &[vec![0.0, 0.0, 0.5]], (0, 1), "a & b").unwrap();
        assert_eq!(svg.matches("<circle").count(), 4);
        assert!(svg.contains("a &amp; b"));
        assert!(svg.contains("s&lt;3&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(scatter_svg(&t, &[0; 4], &[], (0, 3), "").is_err());
    }

    #[test]
    fn scatter_csv_columns() {
        let s = scatter_csv(&table(), &[0, 1, 2, 0], (2, 0)).unwrap();
        assert!(s.starts_with("id,z2,z0,cluster\n"));
        assert_eq!(s.lines().count(), 5);
    }
}
