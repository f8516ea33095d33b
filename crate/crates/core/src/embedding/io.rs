//! Embedding file formats.
//!
//! Text: first line `|V| d`, then one `node_id v_1 ... v_d` line per row with
//! floats at 9 significant digits (enough for exact f32 round-trips).
//! Binary: little-endian header (u64 row count, u64 dim) followed by the
//! contiguous f32 rows.

use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub fn write_text<W: Write>(em: &EmbeddingMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{} {}", em.len(), em.dim())?;
    for i in 0..em.len() {
        write!(w, "{}", em.ids()[i])?;
        for v in em.row(i) {
            write!(w, " {:.8e}", v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_text<R: Read>(r: R) -> Result<EmbeddingMatrix> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty embedding file".into() })?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let count: usize = parse_field(parts.next(), 1, "row count")?;
    let dim: usize = parse_field(parts.next(), 1, "dimension")?;

    let mut data = Vec::with_capacity(count * dim);
    let mut ids = Vec::with_capacity(count);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id = fields
            .next()
            .ok_or_else(|| Error::Parse { line: line_no, msg: "missing node id".into() })?;
        ids.push(id.to_string());
        let mut got = 0usize;
        for f in fields {
            let v: f32 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad float `{f}`"),
            })?;
            data.push(v);
            got += 1;
        }
        if got != dim {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {dim} values, found {got}"),
            });
        }
    }
    if ids.len() != count {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header declared {count} rows, found {}", ids.len()),
        });
    }
    EmbeddingMatrix::from_rows(dim, data, ids)
}

pub fn write_binary<W: Write>(em: &EmbeddingMatrix, mut w: W) -> Result<()> {
    w.write_all(&(em.len() as u64).to_le_bytes())?;
    w.write_all(&(em.dim() as u64).to_le_bytes())?;
    for v in em.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<EmbeddingMatrix> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    let count = u64::from_le_bytes(header[..8].try_into().unwrap()) as usize;
    let dim = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; count * dim * 4];
    r.read_exact(&mut buf)?;
    let data: Vec<f32> = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::from_rows(dim, data, (0..count).map(|i| i.to_string()).collect())
}

pub fn write_text_file(em: &EmbeddingMatrix, path: &Path) -> Result<()> {
    write_text(em, BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_text_file(path: &Path) -> Result<EmbeddingMatrix> {
    read_text(std::fs::File::open(path)?)
}

pub fn write_binary_file(em: &EmbeddingMatrix, path: &Path) -> Result<()> {
    write_binary(em, BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_binary_file(path: &Path) -> Result<EmbeddingMatrix> {
    read_binary(BufReader::new(std::fs::File::open(path)?))
}

fn parse_field<T: std::str::FromStr>(f: Option<&str>, line: usize, what: &str) -> Result<T> {
    f.and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse { line, msg: format!("bad {what} in header") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_embedding(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..n * d).map(|_| rng.gen_range(-3.0f32..3.0)).collect();
        EmbeddingMatrix::from_rows(d, data, (0..n).map(|i| format!("n{i}")).collect()).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let em = random_embedding(17, 5, 3);
        let mut buf = Vec::new();
        write_text(&em, &mut buf).unwrap();
        let back = read_text(&buf[..]).unwrap();
        assert_eq!(em, back);
    }

    #[test]
    fn binary_round_trip_is_exact_modulo_ids() {
        let em = random_embedding(9, 32, 4);
        let mut buf = Vec::new();
        write_binary(&em, &mut buf).unwrap();
        let back = read_binary(&buf[..]).unwrap();
        assert_eq!(em.data(), back.data());
        assert_eq!(back.dim(), 32);
    }

    #[test]
    fn text_reports_line_number_on_bad_float() {
        let text = "2 2\na 1.0 2.0\nb 1.0 oops\n";
        match read_text(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
