//! Fixed-capacity FIFO transition store with uniform sampling.

use rand::Rng;

use crate::error::{dim, Error, Result};
use crate::scenario::N_SCENARIOS;

use super::JointLayout;

/// One joint environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// `(o_1, …, o_N)` concatenated.
    pub obs: Vec<f64>,
    /// `(a_1, …, a_N)` concatenated.
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub scenario: [f64; N_SCENARIOS],
    pub done: bool,
}

/// Column-contiguous view of a sampled batch.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub size: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub scenario: Vec<f64>,
    pub done: Vec<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Self {
        let mut b = Batch {
            size: ts.len(),
            ..Default::default()
        };
        for t in ts {
            b.obs.extend_from_slice(&t.obs);
            b.actions.extend_from_slice(&t.actions);
            b.rewards.extend_from_slice(&t.rewards);
            b.next_obs.extend_from_slice(&t.next_obs);
            b.scenario.extend_from_slice(&t.scenario);
            b.done.push(if t.done { 1.0 } else { 0.0 });
        }
        b
    }
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    obs_len: usize,
    act_len: usize,
    n_agents: usize,
    stride: usize,
    capacity: usize,
    data: Vec<f64>,
    size: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(layout: &JointLayout, capacity: usize) -> Self {
        let obs_len = layout.n_agents * layout.obs_dim;
        let act_len = layout.n_agents * layout.act_dim;
        let stride = 2 * obs_len + act_len + layout.n_agents + N_SCENARIOS + 1;
        Self {
            obs_len,
            act_len,
            n_agents: layout.n_agents,
            stride,
            capacity: capacity.max(1),
            data: Vec::new(),
            size: 0,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `tr` at the cursor, evicting the oldest transition when full.
    pub fn push(&mut self, tr: &Transition) -> Result<()> {
        dim("transition obs", self.obs_len, tr.obs.len())?;
        dim("transition next_obs", self.obs_len, tr.next_obs.len())?;
        dim("transition actions", self.act_len, tr.actions.len())?;
        dim("transition rewards", self.n_agents, tr.rewards.len())?;
        let ones = tr.scenario.iter().filter(|&&g| g == 1.0).count();
        let zeros = tr.scenario.iter().filter(|&&g| g == 0.0).count();
        if ones != 1 || zeros != N_SCENARIOS - 1 {
            return Err(Error::Config("transition scenario code is not one-hot".into()));
        }
        let start = self.cursor * self.stride;
        if start == self.data.len() {
            self.data.resize(start + self.stride, 0.0);
        }
        let row = &mut self.data[start..start + self.stride];
        let mut k = 0;
        for part in [&tr.obs[..], &tr.actions, &tr.rewards, &tr.next_obs, &tr.scenario] {
            row[k..k + part.len()].copy_from_slice(part);
            k += part.len();
        }
        row[k] = if tr.done { 1.0 } else { 0.0 };
        self.cursor = (self.cursor + 1) % self.capacity;
        self.size = (self.size + 1).min(self.capacity);
        Ok(())
    }

    /// Transition in storage slot `i` (`i < len()`).
    pub fn get(&self, i: usize) -> Transition {
        assert!(i < self.size, "replay index out of range");
        let row = &self.data[i * self.stride..(i + 1) * self.stride];
        let (obs, rest) = row.split_at(self.obs_len);
        let (actions, rest) = rest.split_at(self.act_len);
        let (rewards, rest) = rest.split_at(self.n_agents);
        let (next_obs, rest) = rest.split_at(self.obs_len);
        let (scenario, rest) = rest.split_at(N_SCENARIOS);
        Transition {
            obs: obs.to_vec(),
            actions: actions.to_vec(),
            rewards: rewards.to_vec(),
            next_obs: next_obs.to_vec(),
            scenario: scenario.try_into().unwrap(),
            done: rest[0] != 0.0,
        }
    }

    /// Storage slot of the `age`-th oldest transition.
    pub fn oldest_slot(&self, age: usize) -> usize {
        if self.size < self.capacity {
            age
        } else {
            (self.cursor + age) % self.capacity
        }
    }

    /// `batch` slots drawn i.i.d. uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.size < batch || self.size == 0 {
            return Err(Error::Underfull { size: self.size, batch });
        }
        Ok((0..batch).map(|_| rng.gen_range(0..self.size)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<Transition>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| self.get(i))
            .collect())
    }

    /// Copies the given slots into `out`, reusing its allocations.
    pub fn gather(&self, idx: &[usize], out: &mut Batch) {
        out.size = idx.len();
        for v in [
            &mut out.obs,
            &mut out.actions,
            &mut out.rewards,
            &mut out.next_obs,
            &mut out.scenario,
            &mut out.done,
        ] {
            v.clear();
        }
        let o = self.obs_len;
        let a = self.act_len;
        let n = self.n_agents;
        for &i in idx {
            let row = &self.data[i * self.stride..(i + 1) * self.stride];
            out.obs.extend_from_slice(&row[..o]);
            out.actions.extend_from_slice(&row[o..o + a]);
            out.rewards.extend_from_slice(&row[o + a..o + a + n]);
            out.next_obs.extend_from_slice(&row[o + a + n..2 * o + a + n]);
            out.scenario
                .extend_from_slice(&row[2 * o + a + n..2 * o + a + n + N_SCENARIOS]);
            out.done.push(row[self.stride - 1]);
        }
    }
}
