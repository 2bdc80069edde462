//! Translation backends: abnormal fixed-frame lung image → virtual normal.

use std::fs;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::imagedata::{check_dims, read_pgm, write_pgm, GrayImage};
use crate::lungmask::Side;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// An external command run once per translation. `{in}` and `{out}` in
/// the template are replaced by shell-quoted PGM paths inside
/// `exchange_dir`; the command must exit 0 and leave a PGM of the input's
/// dimensions at `{out}` before `timeout`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalBackend {
    command: String,
    exchange_dir: PathBuf,
    timeout: Duration,
}

impl ExternalBackend {
    pub fn new(command: impl Into<String>, exchange_dir: impl Into<PathBuf>) -> Result<Self> {
        let command = command.into();
        if !command.contains("{in}") || !command.contains("{out}") {
            return Err(Error::Input(format!(
                "backend command {command:?} must contain both {{in}} and {{out}}"
            )));
        }
        Ok(ExternalBackend {
            command,
            exchange_dir: exchange_dir.into(),
            timeout: DEFAULT_TIMEOUT,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn exchange_dir(&self) -> &Path {
        &self.exchange_dir
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    /// Returns its input.
    Identity,
    /// Returns a stored per-side normal image, whatever the input.
    Template {
        left: GrayImage,
        right: GrayImage,
    },
    External(ExternalBackend),
}

impl BackendSpec {
    pub fn template_from_files(left: impl AsRef<Path>, right: impl AsRef<Path>) -> Result<Self> {
        Ok(BackendSpec::Template {
            left: read_pgm(left)?,
            right: read_pgm(right)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BackendSpec::Identity => "identity",
            BackendSpec::Template { .. } => "template",
            BackendSpec::External(_) => "external",
        }
    }
}

/// Translates one fixed-frame lung image.
pub fn translate(img: &GrayImage, side: Side, backend: &BackendSpec) -> Result<GrayImage> {
    static CALLS: AtomicU64 = AtomicU64::new(0);
    let key = format!(
        "call{}_{}",
        CALLS.fetch_add(1, Ordering::Relaxed),
        std::process::id()
    );
    translate_as(img, side, backend, &key)
}

/// Like [`translate`]; `key` names the exchange files of an external
/// backend and must be unique among concurrent calls.
pub fn translate_as(
    img: &GrayImage,
    side: Side,
    backend: &BackendSpec,
    key: &str,
) -> Result<GrayImage> {
    match backend {
        BackendSpec::Identity => Ok(img.clone()),
        BackendSpec::Template { left, right } => {
            let template = match side {
                Side::Left => left,
                Side::Right => right,
            };
            check_dims(img.dims(), template.dims())?;
            Ok(template.clone())
        }
        BackendSpec::External(ext) => run_external(img, side, ext, key),
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.to_string_lossy().replace('\'', r"'\''"))
}

fn backend_error(message: String, stderr: String) -> Error {
    Error::Backend { message, stderr }
}

/// Kills the whole process group so grandchildren holding the stderr pipe go too.
fn kill_group(pid: u32) {
    let _ = Command::new("kill")
        .args(["-KILL", "--", &format!("-{pid}")])
        .stderr(Stdio::null())
        .status();
}

fn run_external(
    img: &GrayImage,
    side: Side,
    ext: &ExternalBackend,
    key: &str,
) -> Result<GrayImage> {
    let dir = &ext.exchange_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let input = dir.join(format!("{key}_{side}_in.pgm"));
    let output = dir.join(format!("{key}_{side}_out.pgm"));
    let _ = fs::remove_file(&output);
    write_pgm(img, &input)?;

    let script = ext
        .command
        .replace("{in}", &shell_quote(&input))
        .replace("{out}", &shell_quote(&output));
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&script)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
        .map_err(|e| backend_error(format!("cannot start `{script}`: {e}"), String::new()))?;

    // drain stderr on a side thread so a chatty child cannot block on a full pipe
    let mut pipe = child.stderr.take();
    let reader = thread::spawn(move || {
        let mut buf = String::new();
        if let Some(p) = pipe.as_mut() {
            let _ = p.read_to_string(&mut buf);
        }
        buf
    });

    let start = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if start.elapsed() >= ext.timeout => {
                kill_group(child.id());
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                let _ = child.kill();
                return Err(backend_error(
                    format!("waiting for `{script}`: {e}"),
                    String::new(),
                ));
            }
        }
    };
    let stderr = reader.join().unwrap_or_default();
    let status = status.ok_or_else(|| {
        backend_error(
            format!("`{script}` timed out after {:?}", ext.timeout),
            stderr.clone(),
        )
    })?;
    if !status.success() {
        return Err(backend_error(
            format!("`{script}` exited with {status}"),
            stderr,
        ));
    }
    let out = read_pgm(&output).map_err(|e| {
        backend_error(
            format!("`{script}` produced no usable output: {e}"),
            stderr.clone(),
        )
    })?;
    if out.dims() != img.dims() {
        return Err(backend_error(
            format!(
                "`{script}` returned a {}x{} image for a {}x{} input",
                out.height(),
                out.width(),
                img.height(),
                img.width()
            ),
            stderr,
        ));
    }
    let _ = fs::remove_file(&input);
    let _ = fs::remove_file(&output);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img() -> GrayImage {
        GrayImage::from_fn(6, 5, |r, c| (r * 10 + c) as u8)
    }

    #[test]
    fn identity_and_template() {
        assert_eq!(
            translate(&img(), Side::Left, &BackendSpec::Identity).unwrap(),
            img()
        );
        let t = BackendSpec::Template {
            left: GrayImage::filled(6, 5, 1),
            right: GrayImage::filled(6, 5, 2),
        };
        assert_eq!(
            translate(&img(), Side::Right, &t).unwrap(),
            GrayImage::filled(6, 5, 2)
        );
        assert!(matches!(
            translate(&GrayImage::filled(3, 3, 0), Side::Left, &t),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn placeholders_required() {
        assert!(ExternalBackend::new("cp {in} x", "/tmp").is_err());
        assert!(ExternalBackend::new("cp {in} {out}", "/tmp").is_ok());
    }

    #[test]
    fn external_copy_behaves_as_identity() {
        let dir = tempfile::tempdir().unwrap();
        let ext = ExternalBackend::new("cp {in} {out}", dir.path()).unwrap();
        let out = translate(&img(), Side::Left, &BackendSpec::External(ext)).unwrap();
        assert_eq!(out, img());
    }

    #[test]
    fn external_failures_carry_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let run = |cmd: &str| {
            let ext = ExternalBackend::new(cmd, dir.path())
                .unwrap()
                .with_timeout(Duration::from_secs(2));
            translate(&img(), Side::Right, &BackendSpec::External(ext))
        };
        match run("echo broken >&2; exit 3 # {in} {out}") {
            Err(Error::Backend { stderr, .. }) => assert!(stderr.contains("broken")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(run("true {in} {out}"), Err(Error::Backend { .. })));
        let wrong = "printf 'P5\\n2 2\\n255\\n\\0\\0\\0\\0' > {out} # {in}";
        assert!(matches!(run(wrong), Err(Error::Backend { .. })));
        let slow = ExternalBackend::new("sleep 5 # {in} {out}", dir.path())
            .unwrap()
            .with_timeout(Duration::from_millis(200));
        let t = Instant::now();
        assert!(matches!(
            translate(&img(), Side::Left, &BackendSpec::External(slow)),
            Err(Error::Backend { .. })
        ));
        assert!(t.elapsed() < Duration::from_secs(4));
    }
}
