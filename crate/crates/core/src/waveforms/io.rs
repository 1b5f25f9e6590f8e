//! CSV exchange format for waveform sets.
//!
//! ```text
//! p=5,n_tx=2,family_tag=kerdock
//! re_0,im_0,re_1,im_1          <- one row per time sample, p rows
//! ```
//!
//! An optional `gamma=<value>` field may follow the family tag. Values are
//! written with the shortest representation that round-trips exactly.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{FamilyTag, WaveformSet};
use crate::error::{Error, Result};

pub fn write_waveforms_csv<W: Write>(set: &WaveformSet, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let mut header = vec![
        format!("p={}", set.len()),
        format!("n_tx={}", set.n_tx()),
        format!("family_tag={}", set.family_tag()),
    ];
    if let Some(g) = set.gamma() {
        header.push(format!("gamma={g}"));
    }
    w.write_record(&header)?;
    for l in 0..set.len() {
        let row: Vec<String> = (0..set.n_tx())
            .flat_map(|j| {
                let v = set.column(j)[l];
                [v.re.to_string(), v.im.to_string()]
            })
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_waveforms_csv<R: Read>(reader: R) -> Result<WaveformSet> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = r.records();
    let header = records.next().ok_or(Error::Empty("waveform csv"))??;

    let mut p = None;
    let mut n_tx = None;
    let mut tag = None;
    let mut gamma = None;
    for field in header.iter() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("header field `{field}` is not key=value")))?;
        match key {
            "p" => p = Some(parse_usize(value)?),
            "n_tx" => n_tx = Some(parse_usize(value)?),
            "family_tag" => tag = Some(value.parse::<FamilyTag>()?),
            "gamma" => gamma = Some(parse_f64(value)?),
            other => return Err(Error::Format(format!("unknown header key `{other}`"))),
        }
    }
    let p = p.ok_or_else(|| Error::Format("header is missing `p`".into()))?;
    let n_tx = n_tx.ok_or_else(|| Error::Format("header is missing `n_tx`".into()))?;
    let tag = tag.ok_or_else(|| Error::Format("header is missing `family_tag`".into()))?;

    let mut data = DMatrix::from_element(p, n_tx, Complex64::new(0.0, 0.0));
    let mut rows = 0;
    for (l, rec) in records.enumerate() {
        let rec = rec?;
        if l >= p {
            return Err(Error::Format(format!("more than p = {p} sample rows")));
        }
        if rec.len() != 2 * n_tx {
            return Err(Error::Format(format!(
                "row {l} has {} fields, expected {}",
                rec.len(),
                2 * n_tx
            )));
        }
        for j in 0..n_tx {
            data[(l, j)] = Complex64::new(parse_f64(&rec[2 * j])?, parse_f64(&rec[2 * j + 1])?);
        }
        rows += 1;
    }
    if rows != p {
        return Err(Error::Format(format!(
            "found {rows} sample rows, expected {p}"
        )));
    }
    let set = WaveformSet::new(data, tag)?;
    Ok(match gamma {
        Some(g) => set.with_gamma(g),
        None => set,
    })
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Format(format!("`{s}` is not a non-negative integer")))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Format(format!("`{s}` is not a number")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveforms::{alltop_waveforms, kerdock_family, kerdock_waveforms};

    #[test]
    fn round_trip_is_bit_exact() {
        let fam = kerdock_family(13).unwrap();
        let set = kerdock_waveforms(&fam, 4, 2).unwrap();
        let mut buf = Vec::new();
        write_waveforms_csv(&set, &mut buf).unwrap();
        let back = read_waveforms_csv(buf.as_slice()).unwrap();
        assert_eq!(back, set);

        let set = alltop_waveforms(7, 2).unwrap().with_gamma(1.0);
        let mut buf = Vec::new();
        write_waveforms_csv(&set, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("p=7,n_tx=2,family_tag=alltop,gamma=1"));
        assert_eq!(read_waveforms_csv(buf.as_slice()).unwrap(), set);
    }

    #[test]
    fn external_file_is_imported() {
        let s = 0.5f64;
        let text = format!("p=4,n_tx=1,family_tag=external\n{s},0\n0,{s}\n-{s},0\n0,-{s}\n");
        let set = read_waveforms_csv(text.as_bytes()).unwrap();
        assert_eq!(set.family_tag(), FamilyTag::External);
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(read_waveforms_csv("".as_bytes()).is_err());
        assert!(read_waveforms_csv("p=2,n_tx=1\n1,0\n0,0\n".as_bytes()).is_err());
        assert!(read_waveforms_csv("p=2,n_tx=1,family_tag=external\n1,0\n".as_bytes()).is_err());
        assert!(read_waveforms_csv("p=1,n_tx=1,family_tag=external\n1\n".as_bytes()).is_err());
        assert!(read_waveforms_csv("p=1,n_tx=1,family_tag=external\n2,0\n".as_bytes()).is_err());
        assert!(
            read_waveforms_csv("p=1,n_tx=1,family_tag=external,color=red\n1,0\n".as_bytes())
                .is_err()
        );
    }
}
