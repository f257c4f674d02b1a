//! Per-sample CSV with a trailing content digest.
//!
//! The last line is `# sha256=<hex>`, the SHA-256 of every byte before it.
//! Replay runs compare this digest.

use anyhow::{bail, Context};
use clawgate_core::harness::{Decision, Sample};
use sha2::{Digest as _, Sha256};

pub const TRAILER_PREFIX: &str = "# sha256=";

pub const BASE_COLUMNS: [&str; 6] = ["id", "channel", "f_category", "label", "content", "probe_tag"];

pub fn writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}

pub fn reader(body: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(body)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn with_trailer(mut body: Vec<u8>) -> Vec<u8> {
    let digest = sha256_hex(&body);
    body.extend_from_slice(format!("{TRAILER_PREFIX}{digest}\n").as_bytes());
    body
}

/// Splits off the trailer line, if present.
pub fn split_trailer(bytes: &[u8]) -> (&[u8], Option<&str>) {
    let trimmed = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let start = trimmed.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    match std::str::from_utf8(&trimmed[start..]).ok().and_then(|l| l.strip_prefix(TRAILER_PREFIX)) {
        Some(hex) => (&bytes[..start], Some(hex)),
        None => (bytes, None),
    }
}

/// Checks the trailer against the body and returns the digest.
pub fn verify_trailer(bytes: &[u8]) -> anyhow::Result<String> {
    let (body, trailer) = split_trailer(bytes);
    let Some(claimed) = trailer else { bail!("missing digest trailer") };
    let actual = sha256_hex(body);
    if actual != claimed {
        bail!("digest mismatch: trailer {claimed}, body {actual}");
    }
    Ok(actual)
}

pub fn render_samples_csv(samples: &[Sample], subjects: &[&str], decisions: &[Vec<Decision>]) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = writer(&mut buf);
        let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
        for s in subjects {
            header.push(format!("{s}_delivered"));
            header.push(format!("{s}_block_reason"));
        }
        w.write_record(&header)?;
        for (i, s) in samples.iter().enumerate() {
            let mut row: Vec<&str> = vec![
                &s.id,
                s.channel.as_str(),
                s.f_category.as_str(),
                s.label.as_str(),
                &s.content,
                s.probe_tag.as_deref().unwrap_or(""),
            ];
            for d in decisions {
                let d = &d[i];
                row.push(if d.delivered { "true" } else { "false" });
                row.push(d.block_reason.as_deref().unwrap_or(""));
            }
            w.write_record(&row).context("writing CSV row")?;
        }
        w.flush()?;
    }
    Ok(with_trailer(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailer_round_trip() {
        let bytes = with_trailer(b"a,b\n1,2\n".to_vec());
        let (body, t) = split_trailer(&bytes);
        assert_eq!(body, b"a,b\n1,2\n");
        assert_eq!(t.unwrap(), sha256_hex(body));
        assert!(verify_trailer(&bytes).is_ok());
        let mut bad = bytes.clone();
        bad[0] = b'x';
        assert!(verify_trailer(&bad).is_err());
        assert!(verify_trailer(b"a,b\n").is_err());
    }
}
