// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{Sample, SegmentedStream, StreamSpec};
use crate::error::{Error, Result};

/// Load a chronological CSV (header row, numeric features, one integer label
/// column) and cut it into the spec's segments. Feature columns are all
/// columns except `label_column`, in file order. Row numbers in errors are
/// 1-based data rows (the header is row 0).
pub fn load_csv(path: &Path, label_column: &str, spec: &StreamSpec) -> Result<SegmentedStream> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let label_idx = headers.iter().position(|h| h.trim() == label_column).ok_or_else(|| {
        Error::CsvRow { row: 0, message: format!("no `{label_column}` column in header") }
    })?;
    let d = headers.len() - 1;
    if d != spec.n_features {
        return Err(Error::DimensionMismatch { expected: spec.n_features, got: d });
    }

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::CsvRow { row, message: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(Error::CsvRow {
                row,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut features = Vec::with_capacity(d);
        let mut label = 0;
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            if j == label_idx {
                label = field.parse::<usize>().map_err(|_| Error::CsvRow {
                    row,
                    message: format!("label `{field}` is not a non-negative integer"),
                })?;
                if label >= spec.n_classes {
                    return Err(Error::CsvRow {
                        row,
                        message: format!("label {label} outside [0, {})", spec.n_classes),
                    });
                }
            } else {
                let v = field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::CsvRow { row, message: format!("feature `{}` = `{field}` is not a finite number", &headers[j]) }
                })?;
                features.push(v);
            }
        }
        samples.push(Sample::new(features, label));
    }
    if samples.is_empty() {
        return Err(Error::NoRows);
    }
    if samples.len() < spec.used_size() {
        return Err(Error::InvalidSpec(format!(
            "{} rows, but {} segments x {} batches x {} samples are required",
            samples.len(),
            spec.num_segments,
            spec.batches_per_segment,
            spec.batch_size
        )));
    }
    SegmentedStream::from_samples(spec.clone(), samples)
}

/// Write a stream as `f0..f{d-1},label` in time order.
pub fn write_csv(stream: &SegmentedStream, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    let d = stream.n_features();
    let header: Vec<String> = (0..d).map(|j| format!("f{j}")).chain(std::iter::once("label".into())).collect();
    writeln!(out, "{}", header.join(","))?;
    for s in stream.samples() {
        for v in &s.features {
            write!(out, "{v},")?;
        }
        writeln!(out, "{}", s.label)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GeneratorKind};

    fn csv_spec(rows: usize, segments: usize, bps: usize, bs: usize, d: usize) -> StreamSpec {
        StreamSpec {
            name: "custom".into(),
            generator: GeneratorKind::Csv,
            total_size: rows,
            n_features: d,
            n_classes: 2,
            num_segments: segments,
            batches_per_segment: bps,
            batch_size: bs,
            seed: 0,
            params: Default::default(),
        }
    }

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn usenet1_shape() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("f0,f1,label\n");
        for i in 0..1_500 {
            body.push_str(&format!("{},{},{}\n", i as f64 * 0.5, -(i as f64), i % 2));
        }
        let p = write_file(&dir, "u.csv", &body);
        let s = load_csv(&p, "label", &csv_spec(1_500, 5, 2, 150, 2)).unwrap();
        assert_eq!(s.segments.len(), 5);
        assert!(s.segments.iter().all(|g| g.len() == 300));
        assert_eq!(s.segments[1].batches[0].samples[0].features, vec![150.0, -300.0]);
    }

    #[test]
    fn empty_file_has_no_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "e.csv", "f0,f1,label\n");
        let err = load_csv(&p, "label", &csv_spec(10, 1, 1, 1, 2)).unwrap_err();
        assert_eq!(err.to_string(), "no rows");
    }

    #[test]
    fn bad_rows_report_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "b.csv", "f0,f1,label\n1,2,0\n1,x,1\n");
        match load_csv(&p, "label", &csv_spec(2, 1, 1, 2, 2)) {
            Err(Error::CsvRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let p = write_file(&dir, "l.csv", "f0,f1,label\n1,2,0\n1,3,2\n");
        match load_csv(&p, "label", &csv_spec(2, 1, 1, 2, 2)) {
            Err(Error::CsvRow { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("outside"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "s.csv", "f0,f1,label\n1,2,0\n1,3,1\n");
        assert!(matches!(load_csv(&p, "label", &csv_spec(4, 2, 1, 2, 2)), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn label_column_may_be_anywhere() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "m.csv", "y,a,b\n1,0.5,0.25\n0,1.5,2\n");
        let s = load_csv(&p, "y", &csv_spec(2, 1, 1, 2, 2)).unwrap();
        let first = &s.segments[0].batches[0].samples[0];
        assert_eq!((first.features.clone(), first.label), (vec![0.5, 0.25], 1));
    }

    #[test]
    fn generated_stream_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let spec = StreamSpec::preset("sea", 42).unwrap();
        let stream = generate(&spec).unwrap();
        let p = dir.path().join("sea.csv");
        write_csv(&stream, &p).unwrap();
        let mut csv_spec = spec.clone();
        csv_spec.generator = GeneratorKind::Csv;
        let back = load_csv(&p, "label", &csv_spec).unwrap();
        assert_eq!(back.segments, stream.segments);
    }
}
