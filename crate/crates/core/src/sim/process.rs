//! Child-process control: spawn with a scrubbed environment, capture merged
//! stdout/stderr into a log file, and kill the process group on deadline.

use std::fs::File;
use std::io::{self, Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

const POLL_INTERVAL: Duration = Duration::from_millis(5);

/// Captured logs larger than this are cut and marked as truncated.
pub const MAX_LOG_BYTES: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Exited(i32),
    Signaled(i32),
    TimedOut,
}

#[derive(Debug)]
pub struct Captured {
    pub termination: Termination,
    pub log: String,
    pub duration: Duration,
}

pub fn run_captured(
    argv: &[String],
    cwd: &Path,
    env_allowlist: &[String],
    timeout: Duration,
    log_path: &Path,
) -> io::Result<Captured> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty command"))?;
    let log_file = File::create(log_path)?;

    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(cwd)
        .env_clear()
        .stdin(Stdio::null())
        .stdout(Stdio::from(log_file.try_clone()?))
        .stderr(Stdio::from(log_file))
        .process_group(0);
    for name in env_allowlist {
        if let Some(value) = std::env::var_os(name) {
            cmd.env(name, value);
        }
    }

    let started = Instant::now();
    let mut child = cmd.spawn()?;
    let deadline = started + timeout;
    let termination = loop {
        if let Some(status) = child.try_wait()? {
            break match (status.code(), status.signal()) {
                (Some(code), _) => Termination::Exited(code),
                (None, Some(sig)) => Termination::Signaled(sig),
                (None, None) => Termination::Exited(-1),
            };
        }
        if Instant::now() >= deadline {
            // SAFETY: the child leads its own process group (process_group(0)),
            // so the negated pid addresses exactly that group.
            unsafe {
                libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
            }
            let _ = child.kill();
            child.wait()?;
            break Termination::TimedOut;
        }
        thread::sleep(POLL_INTERVAL);
    };
    let duration = started.elapsed();

    let mut bytes = Vec::new();
    File::open(log_path)?.take(MAX_LOG_BYTES).read_to_end(&mut bytes)?;
    let mut log = String::from_utf8_lossy(&bytes).into_owned();
    if std::fs::metadata(log_path)?.len() > MAX_LOG_BYTES {
        log.push_str("\n[sim-runner] log truncated\n");
    }
    Ok(Captured {
        termination,
        log,
        duration,
    })
}

/// Appends a runner-authored line to both the in-memory and on-disk log so
/// every signature message stays a verbatim line of the captured log.
pub fn append_runner_line(log: &mut String, log_path: &Path, line: &str) -> io::Result<()> {
    let mut addition = String::new();
    if !log.is_empty() && !log.ends_with('\n') {
        addition.push('\n');
    }
    addition.push_str(line);
    addition.push('\n');
    log.push_str(&addition);
    std::fs::OpenOptions::new()
        .append(true)
        .open(log_path)?
        .write_all(addition.as_bytes())
}
