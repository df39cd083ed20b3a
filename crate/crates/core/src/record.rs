//! JSON-lines record files.
//!
//! One JSON object per line with keys `id`, `seq`, and optional `group`,
//! `softmax`, `features`, `score`, `label`. Unknown keys are kept on the
//! [`Record`] and written back unchanged. Blank lines are skipped. Reading is
//! streaming: only the set of ids seen so far is retained.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sample::Record;

/// Streaming reader. Yields records in file order and stops at the first
/// error.
pub struct RecordReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
    last_seq: Option<u64>,
    ids: HashSet<String>,
    failed: bool,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R) -> Self {
        RecordReader {
            lines: reader.lines(),
            line: 0,
            last_seq: None,
            ids: HashSet::new(),
            failed: false,
        }
    }

    /// Line number of the most recently read line, 1-based.
    pub fn line(&self) -> usize {
        self.line
    }

    fn parse_line(&mut self, text: &str) -> Result<Record> {
        let line = self.line;
        let parse = |reason: String| Error::Parse { line, reason };
        let record: Record = serde_json::from_str(text).map_err(|e| parse(e.to_string()))?;
        record
            .sample
            .validate()
            .map_err(|e| parse(e.to_string()))?;
        let seq = record.sample.seq;
        if let Some(prev) = self.last_seq {
            if seq <= prev {
                return Err(parse(format!("seq {seq} does not follow {prev}")));
            }
        }
        if !self.ids.insert(record.sample.id.clone()) {
            return Err(parse(format!("duplicate id `{}`", record.sample.id)));
        }
        self.last_seq = Some(seq);
        Ok(record)
    }
}

impl RecordReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(RecordReader::new(BufReader::new(File::open(path)?)))
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let out = self.parse_line(&text);
            self.failed = out.is_err();
            return Some(out);
        }
    }
}

/// Reads a whole record file.
pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    RecordReader::open(path)?.collect()
}

/// Writes records one per line.
pub fn write_records<'a, W, I>(writer: W, records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Record>,
{
    let mut w = BufWriter::new(writer);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_record_file(path: &Path, records: &[Record]) -> Result<()> {
    write_records(File::create(path)?, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Sample;

    fn read(text: &str) -> Result<Vec<Record>> {
        RecordReader::new(text.as_bytes()).collect()
    }

    #[test]
    fn reads_minimal_records() {
        let rs = read("{\"id\":\"a\",\"seq\":0,\"score\":1.5}\n\n{\"id\":\"b\",\"seq\":3,\"score\":0.5,\"label\":\"cat\",\"camera\":7}\n")
            .unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[0].sample.group, "a");
        assert_eq!(rs[1].label.as_deref(), Some("cat"));
        assert_eq!(rs[1].extra["camera"], 7);
        assert!(read("").unwrap().is_empty());
    }

    #[test]
    fn errors_report_line_numbers() {
        let bad_json = "{\"id\":\"a\",\"seq\":0,\"score\":1}\n{\"id\":";
        assert!(matches!(read(bad_json), Err(Error::Parse { line: 2, .. })));
        let seq = "{\"id\":\"a\",\"seq\":5,\"score\":1}\n\n{\"id\":\"b\",\"seq\":5,\"score\":1}";
        assert!(matches!(read(seq), Err(Error::Parse { line: 3, .. })));
        let dup = "{\"id\":\"a\",\"seq\":0,\"score\":1}\n{\"id\":\"a\",\"seq\":1,\"score\":1}";
        assert!(matches!(read(dup), Err(Error::Parse { line: 2, .. })));
        let empty = "{\"id\":\"a\",\"seq\":0}";
        assert!(matches!(read(empty), Err(Error::Parse { line: 1, .. })));
        let negative = "{\"id\":\"a\",\"seq\":0,\"score\":-1}";
        assert!(matches!(read(negative), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn reader_stops_after_error() {
        let text = "oops\n{\"id\":\"a\",\"seq\":0,\"score\":1}";
        let mut r = RecordReader::new(text.as_bytes());
        assert!(r.next().unwrap().is_err());
        assert!(r.next().is_none());
    }

    #[test]
    fn write_then_read_round_trips() {
        let records = vec![
            Record::new(
                Sample::new("x", 1)
                    .with_group("g")
                    .with_softmax(vec![0.25, 0.75])
                    .with_features(vec![1.0, -0.1, 0.1 + 0.2, 1.0 / 3.0, 5e-324]),
                Some("3".into()),
            ),
            Record::new(Sample::new("y", 2).with_score(0.1), None),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let back = read(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, records);
    }
}
