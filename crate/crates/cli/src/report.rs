use std::io::Write;


#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Long,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Float(f64),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => float(*x),
            Cell::Empty => String::new(),
        }
    }

    /// JSON text of the cell; floats keep all 17 significant digits.
    fn json(&self) -> serde_json::Result<String> {
        match self {
            Cell::Text(s) => serde_json::to_string(s),
            Cell::Int(i) => Ok(i.to_string()),
            Cell::Float(x) if x.is_finite() => Ok(float(*x)),
            Cell::Float(_) | Cell::Empty => Ok("null".into()),
        }
    }
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rows of named columns; the first `keys` columns identify a row.
#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub keys: usize,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>, keys: usize) -> Self {
        Self {
            columns,
            keys,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> anyhow::Result<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::render))?;
                }
                w.flush()?;
            }
            Format::Long => {
                let mut w = csv::Writer::from_writer(out);
                let mut header: Vec<&str> = self.columns[..self.keys].to_vec();
                header.extend(["quantity", "value"]);
                w.write_record(&header)?;
                for row in &self.rows {
                    for (name, cell) in self.columns.iter().zip(row).skip(self.keys) {
                        let mut record: Vec<String> = row[..self.keys].iter().map(Cell::render).collect();
                        record.push(name.to_string());
                        record.push(cell.render());
                        w.write_record(&record)?;
                    }
                }
                w.flush()?;
            }
            Format::Json => {
                writeln!(out, "[")?;
                for (r, row) in self.rows.iter().enumerate() {
                    let fields = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(name, cell)| Ok(format!("{}: {}", serde_json::to_string(name)?, cell.json()?)))
                        .collect::<serde_json::Result<Vec<_>>>()?;
                    let comma = if r + 1 < self.rows.len() { "," } else { "" };
                    writeln!(out, "  {{{}}}{comma}", fields.join(", "))?;
                }
                writeln!(out, "]")?;
            }
        }
        Ok(())
    }
}
