//! Departure export archives.
//!
//! A plain tar with `ledger.jsonl`, `rules.jsonl`, `lineage.json`,
//! `audit.jsonl` and `manifest.json`. The audit segment starts with an
//! anchor line so it verifies on its own.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::audit::Anchor;
use crate::canonical::Digest;
use crate::ids::CitizenId;
use crate::time::Timestamp;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub engine_version: String,
    pub citizen_id: CitizenId,
    pub created_at: Timestamp,
    pub audit_anchor: Anchor,
    /// File name to SHA-256 of its bytes.
    pub files: BTreeMap<String, Digest>,
}

pub struct ExportContents {
    pub ledger_jsonl: Vec<u8>,
    pub rules_jsonl: Vec<u8>,
    pub lineage_json: Vec<u8>,
    pub audit_jsonl: Vec<u8>,
}

/// Builds the archive and returns it with its manifest.
pub fn build_archive(
    citizen: &CitizenId,
    at: Timestamp,
    anchor: Anchor,
    contents: ExportContents,
) -> std::io::Result<(Vec<u8>, Manifest)> {
    let files: [(&str, Vec<u8>); 4] = [
        ("ledger.jsonl", contents.ledger_jsonl),
        ("rules.jsonl", contents.rules_jsonl),
        ("lineage.json", contents.lineage_json),
        ("audit.jsonl", contents.audit_jsonl),
    ];
    let manifest = Manifest {
        engine_version: ENGINE_VERSION.to_string(),
        citizen_id: citizen.clone(),
        created_at: at,
        audit_anchor: anchor,
        files: files.iter().map(|(n, b)| (n.to_string(), Digest::of(b))).collect(),
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let mtime = u64::try_from(at.unix_millis() / 1000).unwrap_or(0);
    let mut builder = tar::Builder::new(Vec::new());
    for (name, bytes) in files.iter().map(|(n, b)| (*n, b.as_slice())).chain([("manifest.json", manifest_bytes.as_slice())]) {
        let mut header = tar::Header::new_ustar();
        header.set_size(bytes.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(mtime);
        header.set_cksum();
        builder.append_data(&mut header, name, bytes)?;
    }
    Ok((builder.into_inner()?, manifest))
}

/// Reads every file out of an archive.
pub fn read_archive(bytes: &[u8]) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut archive = tar::Archive::new(bytes);
    for entry in archive.entries()? {
        let mut entry = entry?;
        let name = entry.path()?.to_string_lossy().into_owned();
        let mut buf = Vec::new();
        entry.read_to_end(&mut buf)?;
        out.insert(name, buf);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn archive_round_trips_with_hashes() {
        let (bytes, manifest) = build_archive(
            &CitizenId::new("c"),
            Timestamp::from_unix_millis(5_000),
            Anchor::genesis(),
            ExportContents {
                ledger_jsonl: b"l\n".to_vec(),
                rules_jsonl: b"r\n".to_vec(),
                lineage_json: b"{}".to_vec(),
                audit_jsonl: b"".to_vec(),
            },
        )
        .unwrap();
        let files = read_archive(&bytes).unwrap();
        assert_eq!(files.len(), 5);
        for (name, digest) in &manifest.files {
            assert_eq!(&Digest::of(&files[name]), digest);
        }
        let m: Manifest = serde_json::from_slice(&files["manifest.json"]).unwrap();
        assert_eq!(m, manifest);
    }
}
