//! Tab-separated case manifests.
//!
//! One case per line:
//! `case_id<TAB>image_path<TAB>mask_path<TAB>label[<TAB>row_min,col_min,row_max,col_max]`.
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Abnormal,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "normal",
            Label::Abnormal => "abnormal",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "normal" => Ok(Label::Normal),
            "abnormal" => Ok(Label::Abnormal),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub row_min: usize,
    pub col_min: usize,
    pub row_max: usize,
    pub col_max: usize,
}

impl BBox {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_min..=self.row_max).contains(&row) && (self.col_min..=self.col_max).contains(&col)
    }

    pub fn area(&self) -> usize {
        (self.row_max - self.row_min + 1) * (self.col_max - self.col_min + 1)
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.row_max < height && self.col_max < width
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.row_min, self.col_min, self.row_max, self.col_max
        )
    }
}

impl FromStr for BBox {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("bad bbox {s:?}: {e}"))?;
        let [row_min, col_min, row_max, col_max] = parts[..] else {
            return Err(format!("bbox {s:?} needs four comma-separated values"));
        };
        if row_min > row_max || col_min > col_max {
            return Err(format!("bbox {s:?} has min > max"));
        }
        Ok(BBox {
            row_min,
            col_min,
            row_max,
            col_max,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseManifest {
    pub case_id: String,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub label: Label,
    pub bbox: Option<BBox>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<CaseManifest>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

pub(crate) fn parse_manifest(text: &str, base: &Path) -> Result<Vec<CaseManifest>> {
    let mut seen = HashSet::new();
    let mut cases = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let case_id = fields[0].to_string();
        let err = |message: String| Error::Manifest {
            case_id: case_id.clone(),
            message: format!("line {}: {message}", lineno + 1),
        };
        if !(4..=5).contains(&fields.len()) {
            return Err(err(format!("expected 4 or 5 fields, got {}", fields.len())));
        }
        if case_id.is_empty() {
            return Err(err("empty case id".into()));
        }
        if !seen.insert(case_id.clone()) {
            return Err(err("duplicate case id".into()));
        }
        let label: Label = fields[3].parse().map_err(err)?;
        let bbox = match fields.get(4) {
            Some(s) if !s.trim().is_empty() => Some(s.parse::<BBox>().map_err(err)?),
            _ => None,
        };
        if bbox.is_some() && label == Label::Normal {
            return Err(err("bbox given for a normal case".into()));
        }
        let image_path = base.join(fields[1]);
        let mask_path = base.join(fields[2]);
        for p in [&image_path, &mask_path] {
            if !p.is_file() {
                return Err(err(format!("missing file {}", p.display())));
            }
        }
        cases.push(CaseManifest {
            case_id,
            image_path,
            mask_path,
            label,
            bbox,
        });
    }
    Ok(cases)
}

/// Writes a manifest; paths are written relative to `path`'s directory when possible.
pub fn write_manifest(cases: &[CaseManifest], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let rel = |p: &Path| -> String {
        p.strip_prefix(base)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    };
    let mut out = String::from("# case_id\timage\tmask\tlabel\tbbox\n");
    for c in cases {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}",
            c.case_id,
            rel(&c.image_path),
            rel(&c.mask_path),
            c.label
        ));
        if let Some(b) = c.bbox {
            out.push_str(&format!("\t{b}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.pgm", "b.pgm", "c.pgm", "m.pgm"] {
            fs::write(dir.path().join(name), b"x").unwrap();
        }
        dir
    }

    #[test]
    fn rows_in_file_order() {
        let dir = fixture();
        let text = "# header\n\
                    c1\ta.pgm\tm.pgm\tnormal\n\
                    c2\tb.pgm\tm.pgm\tabnormal\t1,2,3,4\n\
                    \n\
                    c3\tc.pgm\tm.pgm\tabnormal\n";
        let cases = parse_manifest(text, dir.path()).unwrap();
        let ids: Vec<_> = cases.iter().map(|c| c.case_id.as_str()).collect();
        assert_eq!(ids, ["c1", "c2", "c3"]);
        assert_eq!(
            cases[1].bbox,
            Some(BBox {
                row_min: 1,
                col_min: 2,
                row_max: 3,
                col_max: 4
            })
        );
        assert_eq!(cases[2].label, Label::Abnormal);
        assert_eq!(cases[2].bbox, None);
    }

    #[test]
    fn duplicate_id_rejected() {
        let dir = fixture();
        let text = "c1\ta.pgm\tm.pgm\tnormal\nc1\tb.pgm\tm.pgm\tnormal\n";
        let err = parse_manifest(text, dir.path()).unwrap_err();
        assert!(matches!(err, Error::Manifest { ref case_id, .. } if case_id == "c1"));
    }

    #[test]
    fn missing_file_names_the_case() {
        let dir = fixture();
        let err = parse_manifest("gone\tzzz.pgm\tm.pgm\tnormal\n", dir.path()).unwrap_err();
        assert_eq!(err.case_id(), Some("gone"));
    }

    #[test]
    fn bbox_rules() {
        let dir = fixture();
        assert!(parse_manifest("c\ta.pgm\tm.pgm\tnormal\t1,1,2,2\n", dir.path()).is_err());
        assert!(parse_manifest("c\ta.pgm\tm.pgm\tabnormal\t3,1,2,2\n", dir.path()).is_err());
        assert!(parse_manifest("c\ta.pgm\tm.pgm\tabnormal\t1,1,2\n", dir.path()).is_err());
    }

    #[test]
    fn write_then_load() {
        let dir = fixture();
        let cases = vec![
            CaseManifest {
                case_id: "x".into(),
                image_path: dir.path().join("a.pgm"),
                mask_path: dir.path().join("m.pgm"),
                label: Label::Abnormal,
                bbox: Some("0,0,5,6".parse().unwrap()),
            },
            CaseManifest {
                case_id: "y".into(),
                image_path: dir.path().join("b.pgm"),
                mask_path: dir.path().join("m.pgm"),
                label: Label::Normal,
                bbox: None,
            },
        ];
        let path = dir.path().join("manifest.tsv");
        write_manifest(&cases, &path).unwrap();
        assert!(fs::read_to_string(&path)
            .unwrap()
            .contains("x\ta.pgm\tm.pgm"));
        assert_eq!(load_manifest(&path).unwrap(), cases);
    }
}
