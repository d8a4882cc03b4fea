use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense word vectors of a fixed dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dimension,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn from_vectors<S: Into<String>>(
        dimension: usize,
        rows: impl IntoIterator<Item = (S, Vec<f64>)>,
    ) -> Result<Self> {
        let mut store = Self::new(dimension)?;
        for (word, v) in rows {
            store.insert(word.into(), v)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, word: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::InvalidArgument(format!(
                "vector for {word:?} has {} components, expected {}",
                vector.len(),
                self.dimension
            )));
        }
        if self.index.contains_key(&word) {
            return Err(Error::DuplicateId(word));
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend(vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.words.iter().enumerate().map(|(i, w)| (w.as_str(), self.row(i)))
    }

    /// Applies `f` to every vector, e.g. an orthogonal rotation.
    pub fn map_vectors(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        Self::from_vectors(self.dimension, self.iter().map(|(w, v)| (w.to_string(), f(v))))
    }
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_vectors(BufReader::new(file), &path.display().to_string())
}

/// word2vec text format: a `<count> <dim>` header, then one token followed
/// by `dim` decimals per line.
pub fn read_vectors(reader: impl BufRead, origin: &str) -> Result<EmbeddingStore> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
    let mut parts = header.split_whitespace();
    let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(c), Some(d), None) => (
            c.parse::<usize>().map_err(|_| Error::parse(origin, 1, format!("bad count {c:?}")))?,
            d.parse::<usize>().map_err(|_| Error::parse(origin, 1, format!("bad dimension {d:?}")))?,
        ),
        _ => return Err(Error::parse(origin, 1, "header must be \"<count> <dim>\"")),
    };
    let mut store = EmbeddingStore::new(dim).map_err(|e| Error::parse(origin, 1, e.to_string()))?;
    store.words.reserve(count);
    store.data.reserve(count * dim);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|_| Error::parse(origin, lineno, format!("bad number {f:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected {dim} values for {word:?}, found {}", values.len()),
            ));
        }
        if store.contains(&word) {
            return Err(Error::parse(origin, lineno, format!("duplicate token {word:?}")));
        }
        if store.len() == count {
            return Err(Error::parse(origin, lineno, format!("more rows than the declared {count}")));
        }
        store.insert(word, values)?;
    }
    if store.len() != count {
        return Err(Error::parse(
            origin,
            count + 1,
            format!("header declares {count} rows, found {}", store.len()),
        ));
    }
    Ok(store)
}

pub fn write_vectors(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vectors_to(store, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Values are written in shortest round-trip form, so parsing the output
/// reproduces every component exactly.
pub fn write_vectors_to(store: &EmbeddingStore, mut w: impl Write) -> Result<()> {
    writeln!(w, "{} {}", store.len(), store.dimension())?;
    for (word, v) in store.iter() {
        w.write_all(word.as_bytes())?;
        for x in v {
            write!(w, " {x}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_header_and_rows() {
        let s = read_vectors("2 3\na 1 0 0\nb 0.5 -1e-3 2 \n".as_bytes(), "mem").unwrap();
        assert_eq!((s.len(), s.dimension()), (2, 3));
        assert_eq!(s.get("b").unwrap(), &[0.5, -0.001, 2.0]);
    }

    #[test]
    fn rejects_malformed_rows_with_line_numbers() {
        let err = read_vectors("2 3\na 1 0 0\nb 1 2\n".as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_vectors("2 2\na 1 0\na 0 1\n".as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_vectors("1 2\na 1 x\n".as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(read_vectors("3 2\na 1 0\n".as_bytes(), "mem").is_err());
        assert!(read_vectors("2\n".as_bytes(), "mem").is_err());
    }

    proptest! {
        #[test]
        fn write_then_read_is_exact(rows in proptest::collection::btree_map("[a-z\u{4e00}-\u{4e10}]{1,6}", proptest::collection::vec(-1e6f64..1e6, 4), 0..12)) {
            let store = EmbeddingStore::from_vectors(4, rows.clone()).unwrap();
            let mut buf = Vec::new();
            write_vectors_to(&store, &mut buf).unwrap();
            let back = read_vectors(&buf[..], "mem").unwrap();
            prop_assert_eq!(back, store);
        }
    }
}
