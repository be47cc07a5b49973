use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Topological,
    Model,
    Embedding,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Topological, Family::Model, Family::Embedding];

    pub fn code(self) -> char {
        match self {
            Family::Topological => 'T',
            Family::Model => 'M',
            Family::Embedding => 'E',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'T' => Some(Family::Topological),
            'M' => Some(Family::Model),
            'E' => Some(Family::Embedding),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub id: String,
    pub family: Family,
}

impl Column {
    pub fn new(id: impl Into<String>, family: Family) -> Self {
        Column {
            id: id.into(),
            family,
        }
    }
}

/// Candidate pairs by predictor scores, stored row-major.
///
/// Higher values mean "more likely missing" for every score-like column.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatureTable {
    pub pairs: Vec<Pair>,
    pub columns: Vec<Column>,
    values: Vec<f64>,
}

const CACHE_MAGIC: &[u8; 4] = b"LSFT";
const CACHE_VERSION: u32 = 1;

impl PairFeatureTable {
    pub fn new(pairs: Vec<Pair>, columns: Vec<Column>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pairs.len() * columns.len() {
            return Err(Error::ColumnMismatch(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                pairs.len(),
                columns.len()
            )));
        }
        let mut ids: Vec<&str> = columns.iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::ColumnMismatch("duplicate column id".into()));
        }
        let cols = columns.len();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                column: pos % cols,
            });
        }
        Ok(PairFeatureTable {
            pairs,
            columns,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.pairs.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.id == id)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.get(r, c)).collect()
    }

    pub fn column_by_id(&self, id: &str) -> Option<Vec<f64>> {
        self.column_index(id).map(|c| self.column(c))
    }

    /// Side-by-side concatenation of tables over identical pairs.
    pub fn hstack(tables: &[&PairFeatureTable]) -> Result<Self> {
        let first = tables
            .first()
            .ok_or(Error::Empty("no tables to concatenate"))?;
        for t in tables {
            if t.pairs != first.pairs {
                return Err(Error::ColumnMismatch(
                    "tables cover different pairs".into(),
                ));
            }
        }
        let columns: Vec<Column> = tables.iter().flat_map(|t| t.columns.clone()).collect();
        let mut values = Vec::with_capacity(first.rows() * columns.len());
        for r in 0..first.rows() {
            for t in tables {
                values.extend_from_slice(t.row(r));
            }
        }
        Self::new(first.pairs.clone(), columns, values)
    }

    /// Keep the given column indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let columns = indices.iter().map(|&c| self.columns[c].clone()).collect();
        let mut values = Vec::with_capacity(self.rows() * indices.len());
        for r in 0..self.rows() {
            let row = self.row(r);
            values.extend(indices.iter().map(|&c| row[c]));
        }
        PairFeatureTable {
            pairs: self.pairs.clone(),
            columns,
            values,
        }
    }

    /// Keep the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.cols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        PairFeatureTable {
            pairs: rows.iter().map(|&r| self.pairs[r]).collect(),
            columns: self.columns.clone(),
            values,
        }
    }

    pub fn select_ids(&self, ids: &[String]) -> Result<Self> {
        let idx = ids
            .iter()
            .map(|id| {
                self.column_index(id)
                    .ok_or_else(|| Error::ColumnMismatch(format!("missing column {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select(&idx))
    }

    pub fn select_families(&self, families: &[Family]) -> Self {
        let idx: Vec<usize> = (0..self.cols())
            .filter(|&c| families.contains(&self.columns[c].family))
            .collect();
        self.select(&idx)
    }

    pub fn write_csv<W: Write>(&self, graph: Option<&Graph>, mut w: W) -> std::io::Result<()> {
        write!(w, "src,dst")?;
        for c in &self.columns {
            write!(w, ",{}", c.id)?;
        }
        writeln!(w)?;
        for (r, &(i, j)) in self.pairs.iter().enumerate() {
            match graph {
                Some(g) => write!(w, "{},{}", g.label(i), g.label(j))?,
                None => write!(w, "{i},{j}")?,
            }
            for v in self.row(r) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_cache<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.cols() as u64).to_le_bytes())?;
        for c in &self.columns {
            w.write_all(&[c.family.code() as u8])?;
            w.write_all(&(c.id.len() as u32).to_le_bytes())?;
            w.write_all(c.id.as_bytes())?;
        }
        for &(i, j) in &self.pairs {
            w.write_all(&(i as u64).to_le_bytes())?;
            w.write_all(&(j as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::Cache(m.to_string());
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("wrong magic"));
        }
        let version = read_u32(&mut r)?;
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let mut columns = Vec::with_capacity(cols);
        for _ in 0..cols {
            let mut code = [0u8; 1];
            read_exact(&mut r, &mut code)?;
            let family = Family::from_code(code[0] as char).ok_or_else(|| bad("bad family"))?;
            let len = read_u32(&mut r)? as usize;
            let mut id = vec![0u8; len];
            read_exact(&mut r, &mut id)?;
            let id = String::from_utf8(id).map_err(|_| bad("column id not utf-8"))?;
            columns.push(Column { id, family });
        }
        let mut pairs = Vec::with_capacity(rows);
        for _ in 0..rows {
            let i = read_u64(&mut r)? as usize;
            let j = read_u64(&mut r)? as usize;
            pairs.push((i, j));
        }
        let mut values = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            read_exact(&mut r, &mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        Self::new(pairs, columns, values)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Cache(format!("truncated: {e}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PairFeatureTable {
        PairFeatureTable::new(
            vec![(0, 1), (0, 2)],
            vec![
                Column::new("a", Family::Topological),
                Column::new("b", Family::Model),
            ],
            vec![1.0, 2.0, 3.5, -4.0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_finite_and_duplicates() {
        let cols = vec![Column::new("a", Family::Topological)];
        assert!(matches!(
            PairFeatureTable::new(vec![(0, 1)], cols.clone(), vec![f64::NAN]),
            Err(Error::NonFinite { row: 0, column: 0 })
        ));
        let dup = vec![cols[0].clone(), cols[0].clone()];
        assert!(PairFeatureTable::new(vec![(0, 1)], dup, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn cache_round_trip_and_version_tag() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_cache(&mut buf).unwrap();
        assert_eq!(PairFeatureTable::read_cache(buf.as_slice()).unwrap(), t);
        buf[4] = 9;
        assert!(matches!(
            PairFeatureTable::read_cache(buf.as_slice()),
            Err(Error::Cache(_))
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let mut buf = Vec::new();
        sample().write_csv(None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "src,dst,a,b\n0,1,1,2\n0,2,3.5,-4\n");
    }

    #[test]
    fn select_and_hstack() {
        let t = sample();
        let m = t.select_families(&[Family::Model]);
        assert_eq!(m.column(0), vec![2.0, -4.0]);
        let other = PairFeatureTable::new(
            t.pairs.clone(),
            vec![Column::new("c", Family::Embedding)],
            vec![7.0, 8.0],
        )
        .unwrap();
        let s = PairFeatureTable::hstack(&[&t, &other]).unwrap();
        assert_eq!(s.row(1), &[3.5, -4.0, 8.0]);
    }
}
