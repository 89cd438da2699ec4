use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Directory for one experiment's artifacts.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_jsonl<T: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = self.file(name)?;
        for row in rows {
            serde_json::to_writer(&mut w, &row)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with a leading `# schema: <name> v<version>` line plus metadata.
    pub fn csv<T: Serialize>(&self, name: &str, schema: &Schema, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = self.file(name)?;
        writeln!(w, "{}", schema.header_line())?;
        let mut csv = csv::Writer::from_writer(w);
        for row in rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    }
}

pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub meta: Vec<(&'static str, String)>,
}

impl Schema {
    pub fn new(name: &'static str, version: u32) -> Self {
        Schema { name, version, meta: Vec::new() }
    }

    pub fn with(mut self, key: &'static str, value: impl ToString) -> Self {
        self.meta.push((key, value.to_string()));
        self
    }

    pub fn header_line(&self) -> String {
        let mut line = format!("# schema: {} v{}", self.name, self.version);
        for (k, v) in &self.meta {
            line.push_str(&format!("; {k}: {v}"));
        }
        line
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
    }

    #[test]
    fn csv_has_schema_line_then_header() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path().join("x")).unwrap();
        let schema = Schema::new("metrics", 1).with("ewma_alpha", 0.01);
        out.csv("m.csv", &schema, [Row { a: 1, b: 0.5 }]).unwrap();
        let text = fs::read_to_string(out.path("m.csv")).unwrap();
        assert_eq!(text, "# schema: metrics v1; ewma_alpha: 0.01\na,b\n1,0.5\n");
    }
}
