//! Streaming classification with debounced, silent alert dispatch.
//!
//! A reader thread feeds lines to the classifier loop; alerts go through a
//! bounded queue to a dispatcher thread, so slow or failing webhooks never
//! hold up classification. Alerts leave the queue in detection order.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{SecondsFormat, Utc};
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::pipeline::{classify_lines, format_score, Featurizer};
use super::AppError;
use crate::corpus::Label;
use crate::par::Execution;
use crate::svm::SvmModel;

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub webhook_url: Option<String>,
    /// Shell command run once per alert with the event JSON on stdin.
    pub command: Option<String>,
    /// Violent lines closer together than this collapse into one alert.
    pub debounce: Duration,
    /// Log alerts without sending them anywhere.
    pub dry_run: bool,
    pub source_id: String,
    /// Number of POST retries after the first failure.
    pub retries: u32,
    /// Delay before the first retry; doubled for each further one.
    pub retry_base: Duration,
    /// Pending alerts beyond this are dropped oldest first.
    pub queue_capacity: usize,
    pub http_timeout: Duration,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            webhook_url: None,
            command: None,
            debounce: Duration::from_secs(30),
            dry_run: false,
            source_id: "silentalarm".into(),
            retries: 3,
            retry_base: Duration::from_secs(1),
            queue_capacity: 1000,
            http_timeout: Duration::from_secs(10),
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), AppError> {
        if self.webhook_url.is_none() && self.command.is_none() && !self.dry_run {
            return Err(AppError::Usage("monitor needs a webhook URL, a command, or --dry-run".into()));
        }
        if self.queue_capacity == 0 {
            return Err(AppError::Usage("alert queue capacity must be at least 1".into()));
        }
        Ok(())
    }
}

/// Webhook payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    /// RFC-3339 UTC time of the latest detection in the burst.
    pub timestamp: String,
    pub text: String,
    pub score: f64,
    pub label: Label,
    pub source_id: String,
    /// Detections collapsed into this alert.
    pub count: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MonitorStats {
    pub lines: u64,
    pub violent: u64,
    pub alerts: u64,
    pub delivered: u64,
    pub failed: u64,
    pub dropped: u64,
}

#[derive(Default)]
struct QueueState {
    items: VecDeque<AlertEvent>,
    closed: bool,
    dropped: u64,
}

#[derive(Default)]
struct AlertQueue {
    state: Mutex<QueueState>,
    ready: Condvar,
}

impl AlertQueue {
    fn push(&self, event: AlertEvent, capacity: usize) {
        let mut s = self.state.lock().unwrap();
        if s.items.len() >= capacity {
            s.items.pop_front();
            s.dropped += 1;
            warn!("alert queue full ({capacity} pending); dropped the oldest alert");
        }
        s.items.push_back(event);
        self.ready.notify_one();
    }

    fn pop(&self) -> Option<AlertEvent> {
        let mut s = self.state.lock().unwrap();
        loop {
            if let Some(e) = s.items.pop_front() {
                return Some(e);
            }
            if s.closed {
                return None;
            }
            s = self.ready.wait(s).unwrap();
        }
    }

    fn close(&self) -> u64 {
        let mut s = self.state.lock().unwrap();
        s.closed = true;
        self.ready.notify_all();
        s.dropped
    }
}

struct Dispatcher {
    cfg: MonitorConfig,
    agent: ureq::Agent,
}

impl Dispatcher {
    fn new(cfg: MonitorConfig) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(cfg.http_timeout)).build().into();
        Self { cfg, agent }
    }

    /// True when every configured transport accepted the event.
    fn deliver(&self, event: &AlertEvent) -> bool {
        if self.cfg.dry_run {
            return true;
        }
        let body = serde_json::to_string(event).expect("alert serializes");
        let mut ok = true;
        if let Some(url) = &self.cfg.webhook_url {
            ok &= self.post(url, &body);
        }
        if let Some(cmd) = &self.cfg.command {
            ok &= run_hook(cmd, &body);
        }
        ok
    }

    fn post(&self, url: &str, body: &str) -> bool {
        let mut delay = self.cfg.retry_base;
        for attempt in 0..=self.cfg.retries {
            match self.agent.post(url).content_type("application/json").send(body) {
                Ok(_) => return true,
                Err(e) => warn!("alert POST attempt {} failed: {e}", attempt + 1),
            }
            if attempt < self.cfg.retries {
                thread::sleep(delay);
                delay *= 2;
            }
        }
        warn!("alert dropped after {} attempts", self.cfg.retries + 1);
        false
    }
}

fn run_hook(cmd: &str, body: &str) -> bool {
    let mut command = if cfg!(windows) {
        let mut c = Command::new("cmd");
        c.args(["/C", cmd]);
        c
    } else {
        let mut c = Command::new("sh");
        c.args(["-c", cmd]);
        c
    };
    let child = command.stdin(Stdio::piped()).stdout(Stdio::null()).spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => {
            warn!("alert command failed to start: {e}");
            return false;
        }
    };
    if let Some(mut stdin) = child.stdin.take() {
        if let Err(e) = stdin.write_all(body.as_bytes()) {
            warn!("alert command did not read its input: {e}");
        }
    }
    match child.wait() {
        Ok(status) if status.success() => true,
        Ok(status) => {
            warn!("alert command exited with {status}");
            false
        }
        Err(e) => {
            warn!("alert command failed: {e}");
            false
        }
    }
}

struct Pending {
    event: AlertEvent,
    deadline: Instant,
}

fn now_rfc3339() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Classifies `input` line by line until it ends, writing one log line per
/// utterance (and one per emitted alert) to `log`.
pub fn run_monitor<R>(
    cfg: &MonitorConfig,
    model: &SvmModel,
    featurizer: &Featurizer,
    input: R,
    log: &mut dyn Write,
) -> Result<MonitorStats, AppError>
where
    R: BufRead + Send + 'static,
{
    cfg.validate()?;
    let (tx, rx) = mpsc::channel::<io::Result<String>>();
    thread::spawn(move || {
        for line in input.lines() {
            let failed = line.is_err();
            if tx.send(line).is_err() || failed {
                break;
            }
        }
    });

    let queue = Arc::new(AlertQueue::default());
    let dispatcher = {
        let queue = Arc::clone(&queue);
        let d = Dispatcher::new(cfg.clone());
        thread::spawn(move || {
            let (mut delivered, mut failed) = (0u64, 0u64);
            while let Some(event) = queue.pop() {
                if d.deliver(&event) {
                    delivered += 1;
                } else {
                    failed += 1;
                }
            }
            (delivered, failed)
        })
    };

    let mut stats = MonitorStats::default();
    let mut pending: Option<Pending> = None;
    let log_err = |e| AppError::io("writing monitor log", e);
    let emit = |event: AlertEvent, stats: &mut MonitorStats, log: &mut dyn Write| -> Result<(), AppError> {
        stats.alerts += 1;
        let json = serde_json::to_string(&event).expect("alert serializes");
        writeln!(log, "alert\t{json}").map_err(log_err)?;
        queue.push(event, cfg.queue_capacity);
        Ok(())
    };

    let result = (|| -> Result<(), AppError> {
        loop {
            let msg = match &pending {
                Some(p) => rx.recv_timeout(p.deadline.saturating_duration_since(Instant::now())),
                None => rx.recv().map_err(|_| RecvTimeoutError::Disconnected),
            };
            let line = match msg {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(AppError::io("reading monitor input", e)),
                Err(RecvTimeoutError::Timeout) => {
                    if let Some(p) = pending.take() {
                        emit(p.event, &mut stats, log)?;
                    }
                    continue;
                }
                Err(RecvTimeoutError::Disconnected) => break,
            };
            let line = line.strip_suffix('\r').unwrap_or(&line).to_string();
            let c = classify_lines(model, featurizer, Execution::Sequential, std::slice::from_ref(&line))?[0];
            stats.lines += 1;
            let flag = if c.low_signal { "\tlow-signal" } else { "" };
            writeln!(log, "{}\t{}\t{}{}", c.label, format_score(c.score), line, flag).map_err(log_err)?;
            if c.label != Label::Violent {
                continue;
            }
            stats.violent += 1;
            let now = Instant::now();
            let timestamp = now_rfc3339();
            match pending.as_mut() {
                Some(p) if now < p.deadline => {
                    p.event.text = line;
                    p.event.score = c.score;
                    p.event.timestamp = timestamp;
                    p.event.count += 1;
                    debug!("alert debounced (burst of {})", p.event.count);
                }
                _ => {
                    if let Some(p) = pending.take() {
                        emit(p.event, &mut stats, log)?;
                    }
                    let event = AlertEvent {
                        timestamp,
                        text: line,
                        score: c.score,
                        label: Label::Violent,
                        source_id: cfg.source_id.clone(),
                        count: 1,
                    };
                    if cfg.debounce.is_zero() {
                        emit(event, &mut stats, log)?;
                    } else {
                        pending = Some(Pending { event, deadline: now + cfg.debounce });
                    }
                }
            }
        }
        if let Some(p) = pending.take() {
            emit(p.event, &mut stats, log)?;
        }
        Ok(())
    })();

    stats.dropped = queue.close();
    let (delivered, failed) = dispatcher.join().expect("dispatcher thread panicked");
    stats.delivered = delivered;
    stats.failed = failed;
    log.flush().map_err(log_err)?;
    result.map(|_| stats)
}

/// A reader over a growing file: at end of file it waits for more data
/// instead of returning EOF, like `tail -f`.
pub struct FollowReader {
    file: File,
    poll: Duration,
}

impl Read for FollowReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        loop {
            let n = self.file.read(buf)?;
            if n > 0 || buf.is_empty() {
                return Ok(n);
            }
            thread::sleep(self.poll);
        }
    }
}

pub fn follow_file(path: &Path) -> Result<BufReader<FollowReader>, AppError> {
    let file = File::open(path).map_err(|e| AppError::io(format!("opening {}", path.display()), e))?;
    Ok(BufReader::new(FollowReader { file, poll: Duration::from_millis(250) }))
}
