use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::dataset::{Dataset, Document};
use super::label::FoundationLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "jsonl" | "ndjson" => Some(Self::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(Error::InvalidArgument(format!("unknown data format {other:?}"))),
        }
    }
}

/// Defaults applied to records that omit the optional columns.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub language: Option<String>,
    pub source: Option<String>,
    pub name: Option<String>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    label: String,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    load_dataset_with(path, format, &LoadOptions::default())
}

pub fn load_dataset_with(
    path: impl AsRef<Path>,
    format: DataFormat,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let name = opts.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let file = std::fs::File::open(path)?;
    let origin = path.display().to_string();
    let raws = match format {
        DataFormat::Csv => read_csv(file, &origin)?,
        DataFormat::Jsonl => read_jsonl(BufReader::new(file), &origin)?,
    };
    let language = opts.language.as_deref().unwrap_or("und");
    let source = opts.source.as_deref().unwrap_or(&name);
    let docs = raws
        .into_iter()
        .map(|r| {
            let gold = r.label.parse::<FoundationLabel>().map_err(|_| Error::UnknownLabel {
                record: r.id.clone(),
                label: r.label.clone(),
            })?;
            Ok(Document {
                id: r.id,
                text: r.text,
                language: r.language.filter(|s| !s.is_empty()).unwrap_or_else(|| language.to_string()),
                gold,
                source: r.source.filter(|s| !s.is_empty()).unwrap_or_else(|| source.to_string()),
                tokens: r.tokens,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(name, docs)
}

fn read_csv(reader: impl std::io::Read, origin: &str) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec.map_err(|e| crate::lexicon::csv_error(origin, e))?);
    }
    Ok(out)
}

fn read_jsonl(reader: impl BufRead, origin: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_dataset(d: &Dataset, path: impl AsRef<Path>, format: DataFormat) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    match format {
        DataFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(&mut w);
            wtr.write_record(["id", "text", "label", "language", "source"])?;
            for doc in d.documents() {
                wtr.write_record([
                    doc.id.as_str(),
                    doc.text.as_str(),
                    doc.gold.as_str(),
                    doc.language.as_str(),
                    doc.source.as_str(),
                ])?;
            }
            wtr.flush()?;
        }
        DataFormat::Jsonl => {
            for doc in d.documents() {
                serde_json::to_writer(&mut w, doc)?;
                w.write_all(b"\n")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use FoundationLabel::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn csv_counts() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "id,text,label\n1,\"a, b\",care\n2,b,care\n3,c,loyalty\n");
        let d = load_dataset(&p, DataFormat::Csv).unwrap();
        assert_eq!(d.count(Care), 2);
        assert_eq!(d.count(Loyalty), 1);
        assert_eq!(d.documents()[0].text, "a, b");
        assert_eq!(d.name(), "d");
    }

    #[test]
    fn unknown_label_names_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "id,text,label\nr7,x,justice\n");
        match load_dataset(&p, DataFormat::Csv) {
            Err(Error::UnknownLabel { record, label }) => {
                assert_eq!(record, "r7");
                assert_eq!(label, "justice");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jsonl_duplicate_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.jsonl",
            "{\"id\":\"a\",\"text\":\"x\",\"label\":\"care\"}\n{\"id\":\"a\",\"text\":\"y\",\"label\":\"care\"}\n",
        );
        assert!(matches!(load_dataset(&p, DataFormat::Jsonl), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn jsonl_pretokenized() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.jsonl",
            "{\"id\":\"a\",\"text\":\"我们爱\",\"label\":\"care\",\"language\":\"zh\",\"tokens\":[\"我们\",\"爱\"]}\n",
        );
        let d = load_dataset(&p, DataFormat::Jsonl).unwrap();
        assert_eq!(d.documents()[0].tokens.as_deref(), Some(&["我们".to_string(), "爱".to_string()][..]));
        assert_eq!(d.documents()[0].language, "zh");
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "d.csv",
            "id,text,label,language\n1,\"quoted \"\"x\"\", y\",care,en\n2,多行\n文本,sanctity,zh\n3,z,nonmoral,en\n",
        );
        let d = load_dataset(&p, DataFormat::Csv);
        // unquoted newline is a new record, so that row is malformed
        assert!(d.is_err());

        let p = write(
            &dir,
            "d.csv",
            "id,text,label,language\n1,\"quoted \"\"x\"\", y\",care,en\n2,\"多行\n文本\",sanctity,zh\n3,z,nonmoral,en\n",
        );
        let d = load_dataset(&p, DataFormat::Csv).unwrap();
        for fmt in [DataFormat::Csv, DataFormat::Jsonl] {
            let out = dir.path().join(match fmt {
                DataFormat::Csv => "d2.csv",
                DataFormat::Jsonl => "d2.jsonl",
            });
            write_dataset(&d, &out, fmt).unwrap();
            let back = load_dataset_with(&out, fmt, &LoadOptions { name: Some("d".into()), ..Default::default() }).unwrap();
            assert_eq!(back.documents(), d.documents());
            assert_eq!(back.class_counts(), d.class_counts());
        }
    }
}
