use std::io::{Read, Write};
use std::process::{Child, Command, Stdio};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::sexp::{parse_all, Sexp};

/// Two z3 configurations raced against each other: plain e-matching does
/// well on large flat models, model-based instantiation alone on deeply
/// nested navigations.
pub const DEFAULT_SOLVER: &str = "z3 -in; z3 -in smt.ematching=false";
pub const SOLVER_ENV: &str = "PLIFT_SOLVER";

/// One solver invocation. The script is written to its standard input and
/// the response read from its standard output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl SolverCommand {
    /// Splits a command line on whitespace.
    pub fn parse(command: &str) -> Option<Self> {
        let mut words = command.split_whitespace().map(str::to_string);
        let program = words.next()?;
        Some(SolverCommand {
            program,
            args: words.collect(),
        })
    }

    pub fn command_line(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// How to run the external solver. With several commands, all run at once
/// and the first `sat` or `unsat` answer wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub commands: Vec<SolverCommand>,
    pub timeout: Option<Duration>,
}

impl SolverConfig {
    /// Parses `;`-separated command lines. Empty entries are skipped.
    pub fn from_command(command: &str) -> Option<Self> {
        let commands: Vec<_> = command.split(';').filter_map(SolverCommand::parse).collect();
        (!commands.is_empty()).then_some(SolverConfig { commands, timeout: None })
    }

    /// `PLIFT_SOLVER` when set, else [`DEFAULT_SOLVER`].
    pub fn from_env() -> Self {
        std::env::var(SOLVER_ENV)
            .ok()
            .and_then(|c| Self::from_command(&c))
            .unwrap_or_else(|| Self::from_command(DEFAULT_SOLVER).expect("default command is non-empty"))
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn command_line(&self) -> String {
        self.commands.iter().map(SolverCommand::command_line).collect::<Vec<_>>().join("; ")
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::from_env()
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("cannot run solver `{command}`: {source}")]
    Process {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unreadable solver response: {message}")]
    Parse { message: String, output: String },
    #[error("solver reported an error: {0}")]
    Reported(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatStatus {
    Sat,
    Unsat,
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverResponse {
    pub status: SatStatus,
    pub output: String,
    /// The command that produced this response.
    pub command: String,
}

fn process_error(command: &SolverCommand, source: std::io::Error) -> SolverError {
    SolverError::Process {
        command: command.command_line(),
        source,
    }
}

struct Running<'a> {
    command: &'a SolverCommand,
    child: Child,
    writer: JoinHandle<()>,
    stdout: JoinHandle<std::io::Result<String>>,
    stderr: JoinHandle<String>,
}

fn drain<R: Read + Send + 'static>(mut source: R) -> JoinHandle<std::io::Result<String>> {
    thread::spawn(move || {
        let mut out = String::new();
        source.read_to_string(&mut out).map(|_| out)
    })
}

fn spawn<'a>(command: &'a SolverCommand, script: &str) -> Result<Running<'a>, SolverError> {
    let mut child = Command::new(&command.program)
        .args(&command.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| process_error(command, e))?;
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let input = script.to_string();
    let writer = thread::spawn(move || {
        // A solver that exits early closes the pipe; its output tells why.
        let _ = stdin.write_all(input.as_bytes());
    });
    let stdout = drain(child.stdout.take().expect("stdout is piped"));
    let stderr = drain(child.stderr.take().expect("stderr is piped"));
    let stderr = thread::spawn(move || stderr.join().ok().and_then(Result::ok).unwrap_or_default());
    Ok(Running {
        command,
        child,
        writer,
        stdout,
        stderr,
    })
}

impl Running<'_> {
    /// Reader threads are left to finish once the pipes close; a killed
    /// solver's own children may keep them open for a while.
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn collect(self) -> Result<SolverResponse, SolverError> {
        let _ = self.writer.join();
        let output = self
            .stdout
            .join()
            .expect("reader thread does not panic")
            .map_err(|e| process_error(self.command, e))?;
        let errors = self.stderr.join().expect("reader thread does not panic");
        let status = parse_status(&output).map_err(|message| {
            if !errors.trim().is_empty() && output.trim().is_empty() {
                SolverError::Reported(errors.trim().to_string())
            } else {
                message
            }
        })?;
        Ok(SolverResponse {
            status,
            output,
            command: self.command.command_line(),
        })
    }
}

/// Runs every configured command on `script` and returns the first
/// definite answer. Without one, the first command's result is returned.
pub fn run_solver(config: &SolverConfig, script: &str) -> Result<SolverResponse, SolverError> {
    let mut running = Vec::new();
    for command in &config.commands {
        match spawn(command, script) {
            Ok(r) => running.push(Some(r)),
            Err(e) => {
                running.into_iter().flatten().for_each(Running::kill);
                return Err(e);
            }
        }
    }
    let mut results: Vec<Option<Result<SolverResponse, SolverError>>> = running.iter().map(|_| None).collect();
    let started = Instant::now();
    loop {
        for (i, slot) in running.iter_mut().enumerate() {
            let Some(r) = slot else { continue };
            let exited = r.child.try_wait().map_err(|e| process_error(r.command, e));
            match exited {
                Ok(None) => continue,
                Ok(Some(_)) => {
                    let result = slot.take().expect("still running").collect();
                    let definite = matches!(&result, Ok(SolverResponse { status: SatStatus::Sat | SatStatus::Unsat, .. }));
                    if definite {
                        running.into_iter().flatten().for_each(Running::kill);
                        return result;
                    }
                    results[i] = Some(result);
                }
                Err(e) => {
                    slot.take().expect("still running").kill();
                    results[i] = Some(Err(e));
                }
            }
        }
        if running.iter().all(Option::is_none) {
            return results.into_iter().flatten().next().expect("at least one command ran");
        }
        if let Some(limit) = config.timeout.filter(|t| started.elapsed() >= *t) {
            running.into_iter().flatten().for_each(Running::kill);
            return Ok(SolverResponse {
                status: SatStatus::Unknown(format!("timeout after {} s", limit.as_secs_f64())),
                output: String::new(),
                command: config.command_line(),
            });
        }
        thread::sleep(Duration::from_millis(2));
    }
}

fn error_text(term: &Sexp) -> Option<String> {
    if term.head() != Some("error") {
        return None;
    }
    Some(match term.list().and_then(|l| l.get(1)) {
        Some(Sexp::Str(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => String::new(),
    })
}

/// Reads the check-sat answer. Errors reported before it are fatal; after an
/// `unsat` or `unknown` answer the failing `(get-model)` is expected.
pub fn parse_status(output: &str) -> Result<SatStatus, SolverError> {
    let terms = parse_all(output).map_err(|e| SolverError::Parse {
        message: e.to_string(),
        output: output.to_string(),
    })?;
    for term in &terms {
        if let Some(message) = error_text(term) {
            return Err(SolverError::Reported(message));
        }
        match term.symbol() {
            Some("sat") => {
                if let Some(message) = terms.iter().find_map(error_text) {
                    return Err(SolverError::Reported(message));
                }
                return Ok(SatStatus::Sat);
            }
            Some("unsat") => return Ok(SatStatus::Unsat),
            Some("unknown") => return Ok(SatStatus::Unknown("solver answered unknown".into())),
            _ => {}
        }
    }
    Err(SolverError::Parse {
        message: "no sat, unsat or unknown answer".into(),
        output: output.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shell(script: &str) -> SolverCommand {
        SolverCommand {
            program: "sh".into(),
            args: vec!["-c".into(), script.into()],
        }
    }

    #[test]
    fn command_parsing() {
        let c = SolverConfig::from_command("  z3  -in -T:5 ").unwrap();
        assert_eq!(c.commands.len(), 1);
        assert_eq!(c.commands[0].program, "z3");
        assert_eq!(c.commands[0].args, ["-in", "-T:5"]);
        assert!(SolverConfig::from_command("   ").is_none());
        assert!(SolverConfig::from_command(" ; ").is_none());
        let pair = SolverConfig::from_command(DEFAULT_SOLVER).unwrap();
        assert_eq!(pair.commands.len(), 2);
        assert_eq!(pair.command_line(), DEFAULT_SOLVER);
    }

    #[test]
    fn statuses() {
        assert_eq!(parse_status("unsat\n(error \"model is not available\")").unwrap(), SatStatus::Unsat);
        assert_eq!(parse_status("sat\n((define-fun a () Bool true))").unwrap(), SatStatus::Sat);
        assert!(matches!(parse_status("unknown\n"), Ok(SatStatus::Unknown(_))));
        assert!(matches!(
            parse_status("(error \"line 3: unknown sort\")\nsat\n()"),
            Err(SolverError::Reported(_))
        ));
        assert!(matches!(parse_status("garbage"), Err(SolverError::Parse { .. })));
    }

    #[test]
    fn missing_executable_is_a_process_error() {
        let config = SolverConfig::from_command("/nonexistent/solver-binary").unwrap();
        assert!(matches!(run_solver(&config, "(check-sat)"), Err(SolverError::Process { .. })));
    }

    #[test]
    fn timeout_kills_the_process() {
        let config = SolverConfig::from_command("sleep 5")
            .unwrap()
            .with_timeout(Some(Duration::from_millis(100)));
        let started = Instant::now();
        let response = run_solver(&config, "").unwrap();
        assert!(matches!(response.status, SatStatus::Unknown(_)));
        assert!(started.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn first_definite_answer_wins() {
        let config = SolverConfig {
            commands: vec![shell("sleep 5; echo sat"), shell("cat >/dev/null; echo unknown"), shell("cat >/dev/null; sleep 0.2; echo unsat")],
            timeout: Some(Duration::from_secs(10)),
        };
        let started = Instant::now();
        let response = run_solver(&config, "(check-sat)").unwrap();
        assert_eq!(response.status, SatStatus::Unsat);
        assert!(response.command.contains("echo unsat"));
        assert!(started.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn without_a_definite_answer_the_first_result_is_kept() {
        let config = SolverConfig {
            commands: vec![shell("echo unknown"), shell("echo garbage")],
            timeout: None,
        };
        assert!(matches!(run_solver(&config, "").unwrap().status, SatStatus::Unknown(_)));
    }
}
