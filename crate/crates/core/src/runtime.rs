//! Fan-out/fan-in of independent solver tasks over a fixed worker pool.
//!
//! Workers are scoped threads; every task builds its own solver instance so
//! nothing solver-side is shared. A panicking or failing task is retried
//! once; a second failure aborts the round after the other tasks finish.

use std::collections::HashSet;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskId {
    Hydro { plant: usize, scenario: usize },
    Balancing,
    LowerHydro { plant: usize, scenario: usize },
    LowerBalancing,
    UpperProjection,
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskId::Hydro { plant, scenario } => write!(f, "hydro({plant},{scenario})"),
            TaskId::Balancing => write!(f, "balancing"),
            TaskId::LowerHydro { plant, scenario } => write!(f, "LB-H({plant},{scenario})"),
            TaskId::LowerBalancing => write!(f, "LB-B"),
            TaskId::UpperProjection => write!(f, "UB-projection"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMessage<I> {
    pub id: TaskId,
    pub iteration: usize,
    pub input: I,
}

impl TaskMessage<()> {
    pub fn bare(id: TaskId, iteration: usize) -> Self {
        Self { id, iteration, input: () }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMessage<O> {
    pub id: TaskId,
    pub iteration: usize,
    pub output: O,
    /// Seconds spent in the successful attempt.
    pub solve_time: f64,
    pub attempts: usize,
}

fn describe_panic(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}

fn attempt<I, O>(
    task: &TaskMessage<I>,
    handler: &(impl Fn(&TaskMessage<I>) -> Result<O> + Sync),
) -> std::result::Result<O, String> {
    match catch_unwind(AssertUnwindSafe(|| handler(task))) {
        Ok(Ok(o)) => Ok(o),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(format!("panicked: {}", describe_panic(p))),
    }
}

/// Runs every task on up to `workers` threads and returns the results
/// ordered by task id.
pub fn dispatch_round<I, O, F>(tasks: &[TaskMessage<I>], workers: usize, handler: F) -> Result<Vec<ResultMessage<O>>>
where
    I: Sync,
    O: Send,
    F: Fn(&TaskMessage<I>) -> Result<O> + Sync,
{
    if workers == 0 {
        return Err(Error::Invalid("worker pool needs at least one worker".into()));
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<std::result::Result<ResultMessage<O>, String>>>> =
        Mutex::new((0..tasks.len()).map(|_| None).collect());
    let run = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(task) = tasks.get(i) else { break };
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            let start = Instant::now();
            match attempt(task, &handler) {
                Ok(output) => {
                    break Ok(ResultMessage {
                        id: task.id,
                        iteration: task.iteration,
                        output,
                        solve_time: start.elapsed().as_secs_f64(),
                        attempts,
                    })
                }
                Err(e) if attempts < 2 => warn!("task {} failed ({e}); retrying", task.id),
                Err(e) => break Err(format!("{}: {e}", task.id)),
            }
        };
        slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(outcome);
    };
    let pool = workers.min(tasks.len()).max(1);
    if pool == 1 {
        run();
    } else {
        std::thread::scope(|s| {
            for _ in 0..pool {
                s.spawn(run);
            }
        });
    }
    let slots = slots.into_inner().unwrap_or_else(|p| p.into_inner());
    let mut done = Vec::with_capacity(tasks.len());
    let mut failed = Vec::new();
    for slot in slots {
        match slot {
            Some(Ok(r)) => done.push(r),
            Some(Err(e)) => failed.push(e),
            None => failed.push("task never ran".into()),
        }
    }
    if !failed.is_empty() {
        return Err(Error::Runtime(format!(
            "{} of {} tasks failed after retry: {}",
            failed.len(),
            tasks.len(),
            failed.join("; ")
        )));
    }
    done.sort_by_key(|r| (r.id, r.iteration));
    Ok(done)
}

/// At-most-once bookkeeping of results per `(task, iteration)`.
#[derive(Debug, Default)]
pub struct ResultLedger {
    seen: HashSet<(TaskId, usize)>,
}

impl ResultLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a result; returns `false` for a duplicate, which the caller drops.
    pub fn accept<O>(&mut self, r: &ResultMessage<O>) -> bool {
        self.seen.insert((r.id, r.iteration))
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Hydro tasks of one iteration plus the balancing task.
pub fn step_one_tasks(plants: usize, scenarios: usize, iteration: usize) -> Vec<TaskMessage<()>> {
    let mut tasks: Vec<_> = (0..plants)
        .flat_map(|plant| (0..scenarios).map(move |scenario| TaskId::Hydro { plant, scenario }))
        .map(|id| TaskMessage::bare(id, iteration))
        .collect();
    tasks.push(TaskMessage::bare(TaskId::Balancing, iteration));
    tasks
}
