use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &str = "somdagmm-schema 1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    Continuous,
    Categorical(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
        }
    }

    pub fn categorical(name: &str, vocabulary: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Categorical(vocabulary.iter().map(|s| s.to_string()).collect()),
        }
    }

    /// Encoded width: 1 for continuous, vocabulary size for categorical.
    pub fn width(&self) -> usize {
        match &self.kind {
            FeatureKind::Continuous => 1,
            FeatureKind::Categorical(v) => v.len(),
        }
    }
}

/// Which raw labels count as anomalies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelConvention {
    /// Listed labels are anomalies, everything else is an inlier.
    AnomalyLabels(BTreeSet<String>),
    /// Listed labels are inliers, everything else is an anomaly.
    InlierLabels(BTreeSet<String>),
}

impl LabelConvention {
    pub fn is_anomaly(&self, label: &str) -> bool {
        match self {
            Self::AnomalyLabels(set) => set.contains(label),
            Self::InlierLabels(set) => !set.contains(label),
        }
    }

    fn labels(&self) -> &BTreeSet<String> {
        match self {
            Self::AnomalyLabels(s) | Self::InlierLabels(s) => s,
        }
    }
}

/// Column roles of a raw record file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordSchema {
    pub features: Vec<FeatureSpec>,
    pub label: String,
    pub convention: LabelConvention,
    /// Extra trailing fields a headerless line may carry (ignored).
    pub optional_trailing: usize,
}

const PROTOCOLS: [&str; 3] = ["tcp", "udp", "icmp"];

const SERVICES: [&str; 70] = [
    "aol",
    "auth",
    "bgp",
    "courier",
    "csnet_ns",
    "ctf",
    "daytime",
    "discard",
    "domain",
    "domain_u",
    "echo",
    "eco_i",
    "ecr_i",
    "efs",
    "exec",
    "finger",
    "ftp",
    "ftp_data",
    "gopher",
    "harvest",
    "hostnames",
    "http",
    "http_2784",
    "http_443",
    "http_8001",
    "imap4",
    "IRC",
    "iso_tsap",
    "klogin",
    "kshell",
    "ldap",
    "link",
    "login",
    "mtp",
    "name",
    "netbios_dgm",
    "netbios_ns",
    "netbios_ssn",
    "netstat",
    "nnsp",
    "nntp",
    "ntp_u",
    "other",
    "pm_dump",
    "pop_2",
    "pop_3",
    "printer",
    "private",
    "red_i",
    "remote_job",
    "rje",
    "shell",
    "smtp",
    "sql_net",
    "ssh",
    "sunrpc",
    "supdup",
    "systat",
    "telnet",
    "tftp_u",
    "tim_i",
    "time",
    "urh_i",
    "urp_i",
    "uucp",
    "uucp_path",
    "vmnet",
    "whois",
    "X11",
    "Z39_50",
];

const FLAGS: [&str; 11] = [
    "OTH", "REJ", "RSTO", "RSTOS0", "RSTR", "S0", "S1", "S2", "S3", "SF", "SH",
];

const NSLKDD_CONTINUOUS_AFTER_FLAG: [&str; 37] = [
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

impl RecordSchema {
    /// The 41-feature NSL-KDD layout with fixed vocabularies for
    /// `protocol_type`, `service` and `flag`. `normal` records are anomalies.
    pub fn nslkdd() -> Self {
        let mut features = vec![
            FeatureSpec::continuous("duration"),
            FeatureSpec::categorical("protocol_type", &PROTOCOLS),
            FeatureSpec::categorical("service", &SERVICES),
            FeatureSpec::categorical("flag", &FLAGS),
        ];
        features.extend(NSLKDD_CONTINUOUS_AFTER_FLAG.iter().map(|n| FeatureSpec::continuous(n)));
        Self {
            features,
            label: "label".into(),
            convention: LabelConvention::AnomalyLabels(BTreeSet::from(["normal".to_string()])),
            optional_trailing: 1,
        }
    }

    /// All-continuous schema over the named columns.
    pub fn numeric(columns: &[&str], label: &str, convention: LabelConvention) -> Self {
        Self {
            features: columns.iter().map(|c| FeatureSpec::continuous(c)).collect(),
            label: label.to_string(),
            convention,
            optional_trailing: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Config("schema has no features".into()));
        }
        let mut names = BTreeSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) || f.name == self.label {
                return Err(Error::Config(format!("duplicate column name '{}'", f.name)));
            }
            if let FeatureKind::Categorical(v) = &f.kind {
                if v.is_empty() {
                    return Err(Error::Config(format!("empty vocabulary for '{}'", f.name)));
                }
                if v.iter().collect::<BTreeSet<_>>().len() != v.len() {
                    return Err(Error::Config(format!("repeated category in '{}'", f.name)));
                }
            }
        }
        if self.convention.labels().is_empty() {
            return Err(Error::Config("label convention lists no labels".into()));
        }
        Ok(())
    }

    pub fn encoded_dim(&self) -> usize {
        self.features.iter().map(FeatureSpec::width).sum()
    }

    /// Encoded column offset of every feature.
    pub fn offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.features
            .iter()
            .map(|f| {
                let o = at;
                at += f.width();
                o
            })
            .collect()
    }

    pub fn with_convention(mut self, convention: LabelConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "label {}", self.label).unwrap();
        let (key, set) = match &self.convention {
            LabelConvention::AnomalyLabels(s) => ("anomaly-labels", s),
            LabelConvention::InlierLabels(s) => ("inlier-labels", s),
        };
        writeln!(out, "{key} {}", set.iter().cloned().collect::<Vec<_>>().join(",")).unwrap();
        writeln!(out, "optional-trailing {}", self.optional_trailing).unwrap();
        for f in &self.features {
            match &f.kind {
                FeatureKind::Continuous => writeln!(out, "continuous {}", f.name).unwrap(),
                FeatureKind::Categorical(v) => writeln!(out, "categorical {} {}", f.name, v.join(",")).unwrap(),
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse().map_err(|e| match e {
            Error::Config(message) => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

impl FromStr for RecordSchema {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some(MAGIC) {
            return Err(Error::Config(format!("schema must start with '{MAGIC}'")));
        }
        let mut label = None;
        let mut convention = None;
        let mut optional_trailing = 0;
        let mut features = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let list = |s: &str| s.split(',').map(str::to_string).collect::<Vec<_>>();
            match (key, rest.as_slice()) {
                ("label", [name]) => label = Some(name.to_string()),
                ("anomaly-labels", [v]) => {
                    convention = Some(LabelConvention::AnomalyLabels(list(v).into_iter().collect()))
                }
                ("inlier-labels", [v]) => {
                    convention = Some(LabelConvention::InlierLabels(list(v).into_iter().collect()))
                }
                ("optional-trailing", [n]) => {
                    optional_trailing = n
                        .parse()
                        .map_err(|_| Error::Config(format!("bad trailing count '{n}'")))?
                }
                ("continuous", [name]) => features.push(FeatureSpec::continuous(name)),
                ("categorical", [name, v]) => features.push(FeatureSpec {
                    name: name.to_string(),
                    kind: FeatureKind::Categorical(list(v)),
                }),
                _ => return Err(Error::Config(format!("unrecognized schema line '{line}'"))),
            }
        }
        let schema = Self {
            features,
            label: label.ok_or_else(|| Error::Config("schema has no label line".into()))?,
            convention: convention.ok_or_else(|| Error::Config("schema has no label convention".into()))?,
            optional_trailing,
        };
        schema.validate()?;
        Ok(schema)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nslkdd_layout() {
        let s = RecordSchema::nslkdd();
        s.validate().unwrap();
        assert_eq!(s.features.len(), 41);
        assert_eq!(s.encoded_dim(), 122);
        let categorical = s
            .features
            .iter()
            .filter(|f| matches!(f.kind, FeatureKind::Categorical(_)))
            .count();
        assert_eq!(categorical, 3);
        assert_eq!(s.offsets()[..5], [0, 1, 4, 74, 85]);
    }

    #[test]
    fn convention() {
        let s = RecordSchema::nslkdd();
        assert!(s.convention.is_anomaly("normal"));
        assert!(!s.convention.is_anomaly("neptune"));
        let flipped = LabelConvention::InlierLabels(BTreeSet::from(["normal".to_string()]));
        assert!(!flipped.is_anomaly("normal"));
        assert!(flipped.is_anomaly("smurf"));
    }

    #[test]
    fn text_round_trip_and_hash() {
        let s = RecordSchema::nslkdd();
        let back: RecordSchema = s.to_text().parse().unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
        assert_eq!(s.hash().len(), 64);
        let other = s
            .clone()
            .with_convention(LabelConvention::InlierLabels(BTreeSet::from(["normal".into()])));
        assert_ne!(other.hash(), s.hash());
    }

    #[test]
    fn rejects_malformed_text() {
        assert!("label x\n".parse::<RecordSchema>().is_err());
        let dup = format!("{MAGIC}\nlabel y\nanomaly-labels a\ncontinuous x\ncontinuous x\n");
        assert!(dup.parse::<RecordSchema>().is_err());
        let empty = format!("{MAGIC}\nlabel y\nanomaly-labels a\n");
        assert!(empty.parse::<RecordSchema>().is_err());
        let junk = format!("{MAGIC}\nlabel y\nanomaly-labels a\nwhat x\n");
        assert!(junk.parse::<RecordSchema>().is_err());
    }
}
