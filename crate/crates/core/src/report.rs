//! Plain-text aligned tables and fixed-precision formatting for reports.

use std::fmt::Write;

/// Rounds half away from zero at `decimals` places, tolerant to binary
/// representation error (20.305 stored as 20.30499.. still rounds up).
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x * scale;
    let nudge = scaled.abs() * 1e-12 + 1e-9;
    let r = if scaled >= 0.0 {
        (scaled + 0.5 + nudge).floor()
    } else {
        (scaled - 0.5 - nudge).ceil()
    };
    r / scale
}

pub fn fmt_fixed(x: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, round_half_up(x, decimals))
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) -> &mut Self {
        self.rows.push(cells.into_iter().map(Into::into).collect());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First column left-aligned, the rest right-aligned, two spaces between columns.
    pub fn render(&self) -> String {
        let ncol = self
            .rows
            .iter()
            .map(Vec::len)
            .chain(std::iter::once(self.header.len()))
            .max()
            .unwrap_or(0);
        let mut widths = vec![0usize; ncol];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (i, c) in r.iter().enumerate() {
                widths[i] = widths[i].max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, r: &[String]| {
            let mut s = String::new();
            for (i, w) in widths.iter().enumerate() {
                let c = r.get(i).map(String::as_str).unwrap_or("");
                if i > 0 {
                    s.push_str("  ");
                }
                if i == 0 {
                    let _ = write!(s, "{c:<w$}");
                } else {
                    let _ = write!(s, "{c:>w$}");
                }
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(&mut out, &self.header);
        let total: usize = widths.iter().sum::<usize>() + 2 * ncol.saturating_sub(1);
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for r in &self.rows {
            line(&mut out, r);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_up() {
        assert_eq!(fmt_fixed(20.305, 2), "20.31");
        assert_eq!(fmt_fixed(12.5, 0), "13");
        assert_eq!(fmt_fixed(2.0 / 3.0 * 100.0, 2), "66.67");
        assert_eq!(fmt_fixed(-0.125, 2), "-0.13");
        assert_eq!(fmt_fixed(53.93, 2), "53.93");
    }

    #[test]
    fn table_alignment() {
        let mut t = Table::new(["model", "n"]);
        t.row(["gpt3", "10"]).row(["t5-large", "7"]);
        let s = t.render();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "model      n");
        assert_eq!(lines[2], "gpt3      10");
        assert_eq!(lines[3], "t5-large   7");
    }
}
