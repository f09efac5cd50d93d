use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Round-trip formatting for one number: 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table held in memory until everything it needs has been computed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&fmt_num(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn table_writes_header_and_rows() {
        let mut t = Table::new(vec!["t".into(), "x".into()]);
        t.push(vec![0.0, 1.5]);
        let mut out = Vec::new();
        t.write_to(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "t,x\n0.0000000000000000e0,1.5000000000000000e0\n"
        );
        assert_eq!(t.column("x"), Some(vec![1.5]));
    }
}
