//! Plain CSV output with a `#`-prefixed `key=value` metadata line.

use std::fmt::Display;
use std::io::Write;

use crate::error::Result;

#[derive(Debug, Default, Clone)]
pub struct MetaHeader {
    fields: Vec<(String, String)>,
}

impl MetaHeader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, key: &str, value: impl Display) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let body: Vec<String> = self.fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(w, "# {}", body.join(","))?;
        Ok(())
    }
}

/// Parses a `# k=v,k=v` line back into pairs. Returns `None` for lines that
/// are not metadata.
pub fn parse_meta(line: &str) -> Option<Vec<(String, String)>> {
    let body = line.strip_prefix('#')?.trim();
    body.split(',')
        .map(|kv| {
            let (k, v) = kv.split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trips() {
        let mut buf = Vec::new();
        MetaHeader::new()
            .field("n", 116)
            .field("alpha", 0.5)
            .write(&mut buf)
            .unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(line, "# n=116,alpha=0.5\n");
        let parsed = parse_meta(line.trim_end()).unwrap();
        assert_eq!(parsed[1], ("alpha".to_string(), "0.5".to_string()));
        assert!(parse_meta("s,gap").is_none());
    }
}
