//! CSV emission with byte-stable formatting: floats are printed in their
//! shortest round-trip form, so identical runs produce identical files and
//! parsing the file back recovers the exact doubles.

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(usize),
    /// Rendered as 1/0.
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::F(v) => out.push_str(&format!("{v:?}")),
            Cell::U(v) => out.push_str(&format!("{v}")),
            Cell::B(v) => out.push(if *v { '1' } else { '0' }),
            Cell::S(v) => out.push_str(v),
        }
    }
}

/// A rectangular data table plus leading comment lines.
#[derive(Debug, Clone, Default)]
pub struct Table {
    /// Emitted after the unit line, each prefixed with `# `.
    pub comments: Vec<String>,
    /// Header names, one per column, annotated like `omega[rate]`.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: String) {
        self.comments.push(line);
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    /// Full file contents. The first header line records the unit convention.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 2));
        out.push_str("# hbar=1\n");
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }
}

/// Splits rendered CSV back into (comments, header, numeric rows); used by
/// self-checks and tests. Non-numeric cells parse as NaN.
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<String>, Vec<Vec<f64>>) {
    let mut comments = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix("# ") {
            comments.push(c.to_string());
        } else if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim_start().to_string());
        } else if header.is_empty() {
            header = line.split(',').map(|s| s.to_string()).collect();
        } else if !line.is_empty() {
            rows.push(
                line.split(',')
                    .map(|s| s.parse::<f64>().unwrap_or(f64::NAN))
                    .collect(),
            );
        }
    }
    (comments, header, rows)
}
