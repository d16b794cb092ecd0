// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Hash aggregation over 64-bit values.

use std::borrow::Cow;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::batch::Batch;
use super::{ExecError, QueryResult};

/// Integer arithmetic over batch slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Col(usize),
    Const(i64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

// Builders, not operator overloads: they take two owned trees.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn col(slot: usize) -> Self {
        Expr::Col(slot)
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub(crate) fn slots(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Col(s) => out.push(*s),
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.slots(out);
                b.slots(out);
            }
        }
    }

    /// Evaluates the expression for every row of `batch`.
    pub(crate) fn eval<'b>(&self, batch: &'b Batch) -> Result<Cow<'b, [i64]>, ExecError> {
        let bin = |a: &Expr, b: &Expr, f: fn(i64, i64) -> Option<i64>| {
            let (x, y) = (a.eval(batch)?, b.eval(batch)?);
            x.iter()
                .zip(y.iter())
                .map(|(&p, &q)| f(p, q).ok_or(ExecError::ArithmeticOverflow))
                .collect::<Result<Vec<_>, _>>()
                .map(Cow::Owned)
        };
        match self {
            Expr::Col(s) => Ok(Cow::Borrowed(batch.int(*s))),
            Expr::Const(c) => Ok(Cow::Owned(vec![*c; batch.rows()])),
            Expr::Add(a, b) => bin(a, b, i64::checked_add),
            Expr::Sub(a, b) => bin(a, b, i64::checked_sub),
            Expr::Mul(a, b) => bin(a, b, i64::checked_mul),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFunc {
    Sum,
    Count,
    Min,
    Max,
    /// Emitted as two columns: sum then count.
    Avg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agg {
    pub func: AggFunc,
    pub expr: Expr,
}

impl Agg {
    pub fn new(func: AggFunc, expr: Expr) -> Self {
        Agg { func, expr }
    }

    pub fn count() -> Self {
        Agg::new(AggFunc::Count, Expr::Const(1))
    }

    pub fn output_width(&self) -> usize {
        if self.func == AggFunc::Avg {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct State {
    sum: i64,
    count: i64,
    min: i64,
    max: i64,
}

impl State {
    const EMPTY: State = State {
        sum: 0,
        count: 0,
        min: i64::MAX,
        max: i64::MIN,
    };

    fn add(&mut self, v: i64) -> Result<(), ExecError> {
        self.sum = self.sum.checked_add(v).ok_or(ExecError::ArithmeticOverflow)?;
        self.count += 1;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        Ok(())
    }

    fn merge(&mut self, o: &State) -> Result<(), ExecError> {
        self.sum = self.sum.checked_add(o.sum).ok_or(ExecError::ArithmeticOverflow)?;
        self.count += o.count;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
        Ok(())
    }
}

/// Partial aggregate; one per worker, merged at the end of the pipeline.
/// Groups get dense ids; their states sit side by side in `states`.
#[derive(Debug, Clone)]
pub struct Aggregator {
    groups: Vec<usize>,
    aggs: Vec<Agg>,
    ids: HashMap<Vec<i64>, usize>,
    states: Vec<State>,
}

impl Aggregator {
    pub fn new(groups: &[usize], aggs: &[Agg]) -> Self {
        Aggregator {
            groups: groups.to_vec(),
            aggs: aggs.to_vec(),
            ids: HashMap::new(),
            states: Vec::new(),
        }
    }

    pub fn group_count(&self) -> usize {
        self.ids.len()
    }

    fn group_id(&mut self, key: &[i64]) -> usize {
        if let Some(&id) = self.ids.get(key) {
            return id;
        }
        let id = self.ids.len();
        self.ids.insert(key.to_vec(), id);
        self.states.extend(std::iter::repeat_n(State::EMPTY, self.aggs.len()));
        id
    }

    pub fn consume(&mut self, batch: &Batch) -> Result<(), ExecError> {
        let values = self.aggs.iter().map(|a| a.expr.eval(batch)).collect::<Result<Vec<_>, _>>()?;
        let keys: Vec<&[i64]> = self.groups.iter().map(|&g| batch.int(g)).collect();
        let n = self.aggs.len();
        let mut key = Vec::with_capacity(keys.len());
        for row in 0..batch.rows() {
            key.clear();
            key.extend(keys.iter().map(|k| k[row]));
            let id = self.group_id(&key);
            for (st, v) in self.states[id * n..(id + 1) * n].iter_mut().zip(&values) {
                st.add(v[row])?;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: Aggregator) -> Result<(), ExecError> {
        let n = self.aggs.len();
        for (k, theirs) in other.ids {
            let id = self.group_id(&k);
            for (a, b) in self.states[id * n..(id + 1) * n].iter_mut().zip(&other.states[theirs * n..(theirs + 1) * n]) {
                a.merge(b)?;
            }
        }
        Ok(())
    }

    /// Rows of group keys then aggregates, sorted by group key.
    pub fn finish(self) -> QueryResult {
        let n = self.aggs.len();
        let mut rows: Vec<Vec<i64>> = self
            .ids
            .into_iter()
            .map(|(mut k, id)| {
                for (st, agg) in self.states[id * n..(id + 1) * n].iter().zip(&self.aggs) {
                    match agg.func {
                        AggFunc::Sum => k.push(st.sum),
                        AggFunc::Count => k.push(st.count),
                        AggFunc::Min => k.push(st.min),
                        AggFunc::Max => k.push(st.max),
                        AggFunc::Avg => {
                            k.push(st.sum);
                            k.push(st.count);
                        }
                    }
                }
                k
            })
            .collect();
        rows.sort_unstable();
        QueryResult { rows }
    }
}
