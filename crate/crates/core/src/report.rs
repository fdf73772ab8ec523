//! Small deterministic CSV/text helpers shared by the reporting paths.

/// Render a CSV document with a header line. Floats are written with 15
/// significant digits so identical runs produce byte-identical files.
pub fn csv_document(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v:.15e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape() {
        let doc = csv_document(&["a", "b"], &[vec![1.0, 2.0], vec![0.0, -3.5]]);
        let lines: Vec<&str> = doc.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "a,b");
        assert!(lines[2].starts_with("0,-3.5"));
    }
}
