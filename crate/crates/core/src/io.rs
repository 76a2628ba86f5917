//! Problem files, manifests and trace export.
//!
//! Problems are dense numeric CSV without a header: either one file whose
//! rows are `q_1, ..., q_d, b`, or a matrix file plus a one-column vector
//! file. Numbers are written with Rust's shortest round-trip formatting, so
//! a save/load cycle is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::lasso::Manifest;
use crate::solver::{IterateRecord, IterateTrace};
use crate::space::Vector;

/// Reads a rectangular numeric CSV into rows.
pub fn read_rows<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(rows.len() as u64 + 1, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("field {} is not a number: {f:?}", j + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                msg: format!("field {} is not finite", j + 1),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(rows)
}

fn to_matrix(rows: Vec<Vec<f64>>) -> Array2<f64> {
    let (m, d) = (rows.len(), rows[0].len());
    Array2::from_shape_vec((m, d), rows.into_iter().flatten().collect()).expect("rows are rectangular")
}

/// `(Q, b)` from a single file whose last column is `b`.
pub fn load_problem(path: impl AsRef<Path>) -> Result<(Array2<f64>, Vector)> {
    let rows = read_rows(File::open(path)?)?;
    if rows[0].len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "need at least one matrix column and the b column".into(),
        });
    }
    let all = to_matrix(rows);
    let d = all.ncols() - 1;
    Ok((all.slice(s![.., ..d]).to_owned(), all.column(d).to_owned()))
}

/// `(Q, b)` from separate matrix and vector files.
pub fn load_problem_pair(q_path: impl AsRef<Path>, b_path: impl AsRef<Path>) -> Result<(Array2<f64>, Vector)> {
    let q = to_matrix(read_rows(File::open(q_path)?)?);
    let b_rows = read_rows(File::open(b_path)?)?;
    if b_rows[0].len() != 1 {
        return Err(Error::Parse {
            line: 1,
            msg: format!("vector file must have one column, found {}", b_rows[0].len()),
        });
    }
    let b: Vector = b_rows.into_iter().map(|r| r[0]).collect();
    if b.len() != q.nrows() {
        return Err(Error::Parse {
            line: b.len().min(q.nrows()) as u64 + 1,
            msg: format!("matrix has {} rows but vector has {}", q.nrows(), b.len()),
        });
    }
    Ok((q, b))
}

/// Writes rows `q_1, ..., q_d, b`.
pub fn write_problem<W: Write>(writer: W, q: &Array2<f64>, b: &Vector) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let mut fields = Vec::with_capacity(q.ncols() + 1);
    for (row, bi) in q.rows().into_iter().zip(b.iter()) {
        fields.clear();
        fields.extend(row.iter().map(|v| v.to_string()));
        fields.push(bi.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_problem(path: impl AsRef<Path>, q: &Array2<f64>, b: &Vector) -> Result<()> {
    write_problem(BufWriter::new(File::create(path)?), q, b)
}

pub fn save_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, manifest)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Jsonl,
    Csv { header: bool },
}

/// One JSON object per line.
pub fn write_trace_jsonl<W: Write>(mut writer: W, trace: &IterateTrace) -> Result<()> {
    for r in trace.records() {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_trace_jsonl<R: Read>(reader: R) -> Result<IterateTrace> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: IterateRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out.into())
}

fn join_iters(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// Same columns as the JSON records; `inner_iters` is `;`-joined and a
/// missing objective is an empty field.
pub fn write_trace_csv<W: Write>(writer: W, trace: &IterateTrace, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    if header {
        w.write_record(IterateRecord::FIELDS)?;
    }
    for r in trace.records() {
        w.write_record([
            r.k.to_string(),
            r.alpha_k.to_string(),
            r.beta_k.to_string(),
            r.theta_k.to_string(),
            r.phi_at_hat.to_string(),
            r.grad_norm_sq_gamma.to_string(),
            r.residual_primal.to_string(),
            r.residual_dual.to_string(),
            join_iters(&r.inner_iters),
            r.objective.map(|v| v.to_string()).unwrap_or_default(),
            r.step_norm.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<IterateTrace> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.get(0) == Some("k") {
            continue;
        }
        if rec.len() != IterateRecord::FIELDS.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", IterateRecord::FIELDS.len(), rec.len()),
            });
        }
        let bad = |j: usize| Error::Parse {
            line,
            msg: format!("bad value for {}: {:?}", IterateRecord::FIELDS[j], &rec[j]),
        };
        let f = |j: usize| rec[j].parse::<f64>().map_err(|_| bad(j));
        let inner_iters = if rec[8].is_empty() {
            Vec::new()
        } else {
            rec[8]
                .split(';')
                .map(|s| s.parse::<usize>().map_err(|_| bad(8)))
                .collect::<Result<Vec<_>>>()?
        };
        out.push(IterateRecord {
            k: rec[0].parse().map_err(|_| bad(0))?,
            alpha_k: f(1)?,
            beta_k: f(2)?,
            theta_k: f(3)?,
            phi_at_hat: f(4)?,
            grad_norm_sq_gamma: f(5)?,
            residual_primal: f(6)?,
            residual_dual: f(7)?,
            inner_iters,
            objective: if rec[9].is_empty() { None } else { Some(f(9)?) },
            step_norm: f(10)?,
        });
    }
    Ok(out.into())
}

pub fn save_trace(path: impl AsRef<Path>, trace: &IterateTrace, format: TraceFormat) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    match format {
        TraceFormat::Jsonl => write_trace_jsonl(w, trace),
        TraceFormat::Csv { header } => write_trace_csv(w, trace, header),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::{random_instance, RandomSpec};
    use crate::testutil::random_vector;
    use ndarray::array;

    #[test]
    fn one_row_toy() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("toy.csv");
        std::fs::write(&p, "1,1\n").unwrap();
        let (q, b) = load_problem(&p).unwrap();
        assert_eq!(q, array![[1.0]]);
        assert_eq!(b, array![1.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = read_rows("1,2,3\n4,5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_rows("1,2\n3,x\n5,6\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_rows("".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = read_rows("1,NaN\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn problem_round_trip_is_bit_exact() {
        let (p, m) = random_instance(RandomSpec { m: 25, d: 7, r: 3, seed: 17 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("problem.csv");
        // include awkward values as well
        let mut q = p.q().clone();
        q[[0, 0]] = 0.1 + 0.2;
        q[[1, 1]] = -1e-300;
        q[[2, 2]] = 1.0 / 3.0;
        let mut b = p.b().clone();
        b[0] = random_vector(1, 4)[0];
        save_problem(&path, &q, &b).unwrap();
        let (q2, b2) = load_problem(&path).unwrap();
        assert!(q.iter().zip(q2.iter()).all(|(a, c)| a.to_bits() == c.to_bits()));
        assert!(b.iter().zip(b2.iter()).all(|(a, c)| a.to_bits() == c.to_bits()));

        let mpath = dir.path().join("manifest.json");
        save_manifest(&mpath, &m).unwrap();
        assert_eq!(load_manifest(&mpath).unwrap(), m);
    }

    #[test]
    fn pair_files() {
        let dir = tempfile::tempdir().unwrap();
        let qp = dir.path().join("Q.csv");
        let bp = dir.path().join("b.csv");
        std::fs::write(&qp, "1,2\n3,4\n").unwrap();
        std::fs::write(&bp, "5\n6\n").unwrap();
        let (q, b) = load_problem_pair(&qp, &bp).unwrap();
        assert_eq!(q, array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(b, array![5.0, 6.0]);
        std::fs::write(&bp, "5\n").unwrap();
        assert!(load_problem_pair(&qp, &bp).is_err());
    }

    fn sample_trace() -> IterateTrace {
        vec![
            IterateRecord {
                k: 0,
                alpha_k: 0.1,
                beta_k: 1.5519,
                theta_k: 0.25,
                phi_at_hat: 1.0 / 3.0,
                grad_norm_sq_gamma: 2.5e-7,
                residual_primal: 0.5,
                residual_dual: 0.125,
                inner_iters: vec![3, 4, 0],
                objective: Some(0.095),
                step_norm: 0.0,
            },
            IterateRecord {
                k: 1,
                alpha_k: 0.1,
                beta_k: 1.5519,
                theta_k: 0.0,
                phi_at_hat: -1e-17,
                grad_norm_sq_gamma: 1.0,
                residual_primal: 0.0,
                residual_dual: 0.0,
                inner_iters: vec![1, 1, 0],
                objective: None,
                step_norm: 0.7,
            },
        ]
        .into()
    }

    #[test]
    fn trace_round_trips() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        write_trace_jsonl(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
            let mut want = IterateRecord::FIELDS.to_vec();
            want.sort();
            let mut got = keys.clone();
            got.sort();
            assert_eq!(got, want);
        }
        assert_eq!(read_trace_jsonl(buf.as_slice()).unwrap(), trace);

        for header in [false, true] {
            let mut buf = Vec::new();
            write_trace_csv(&mut buf, &trace, header).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            assert_eq!(text.starts_with("k,"), header);
            assert!(text.contains("3;4;0"));
            assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), trace);
        }
    }
}
