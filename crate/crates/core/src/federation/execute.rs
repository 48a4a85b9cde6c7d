use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use futures::stream::{self, StreamExt, TryStreamExt};

use super::plan::{parse_federated, plan_xmatch, TupleScope, XMatchPlan};
use super::{FedError, Federation};
use crate::node::{Match, Probe, XMatchRequest};
use crate::query::ast::MatchMode;
use crate::query::{run_bound, ExecError, ExecOptions, RowSource};
use crate::sky::EquatorialPosition;
use crate::table::{ResultTable, Value};

struct TupleRow(Vec<Value>);

impl RowSource for TupleRow {
    fn slot(&self, i: usize) -> Value {
        self.0[i].clone()
    }

    fn position(&self) -> Option<EquatorialPosition> {
        None
    }
}

fn column_index(plan: &XMatchPlan, survey: usize, name: &str) -> Result<usize, FedError> {
    plan.metadata[survey]
        .columns
        .iter()
        .position(|c| c.name == name)
        .ok_or_else(|| FedError::NodeFailed {
            survey: plan.surveys[survey].clone(),
            code: "internal_error".into(),
            message: format!("metadata lacks column {name}"),
        })
}

fn check_shape(plan: &XMatchPlan, survey: usize, table: &ResultTable) -> Result<(), FedError> {
    let expected: Vec<&str> = plan.metadata[survey].columns.iter().map(|c| c.name.as_str()).collect();
    let got: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    if expected == got {
        Ok(())
    } else {
        Err(FedError::NodeFailed {
            survey: plan.surveys[survey].clone(),
            code: "internal_error".into(),
            message: format!("unexpected columns {got:?}"),
        })
    }
}

/// Runs a cross-match plan: fetch anchors, probe each chain survey with the
/// anchors still matched so far, expand tuples, then apply the post-match
/// filter and the query's projection, grouping, ordering, and limit.
pub async fn execute_xmatch(plan: &XMatchPlan, fed: &Federation) -> Result<ResultTable, FedError> {
    let started = Instant::now();
    let settings = fed.settings();
    let anchor_name = &plan.surveys[plan.anchor];
    let anchor_client = fed.client(anchor_name).expect("planned survey");
    let text = match &plan.anchor_filter {
        Some(f) => format!("SELECT * FROM photoobj WHERE {f}"),
        None => "SELECT * FROM photoobj".to_owned(),
    };
    let anchors = anchor_client
        .query(&text)
        .await
        .map_err(|e| FedError::from_client(anchor_name, e))?;
    check_shape(plan, plan.anchor, &anchors)?;
    let ra_col = column_index(plan, plan.anchor, "ra")?;
    let dec_col = column_index(plan, plan.anchor, "dec")?;
    let sigma_col = column_index(plan, plan.anchor, "sigma_pos")?;
    let num = |row: &[Value], i: usize| row[i].as_f64().unwrap_or(f64::NAN);

    let n_surveys = plan.surveys.len();
    // matches[survey][anchor row] for chain surveys.
    let mut matches: Vec<Vec<Vec<Match>>> = vec![Vec::new(); n_surveys];
    let mut objects: Vec<HashMap<u64, Vec<Value>>> = vec![HashMap::new(); n_surveys];
    let mut alive: Vec<usize> = (0..anchors.rows.len()).collect();
    let mut probes_sent = 0usize;

    for &s in &plan.chain {
        if alive.is_empty() {
            break;
        }
        let survey = &plan.surveys[s];
        let client = fed.client(survey).expect("planned survey");
        let probes: Vec<Probe> = alive
            .iter()
            .map(|&a| {
                let row = &anchors.rows[a];
                Probe {
                    probe_id: a as i64,
                    ra_deg: num(row, ra_col),
                    dec_deg: num(row, dec_col),
                    sigma_arcsec: num(row, sigma_col),
                }
            })
            .collect();
        probes_sent += probes.len();
        let requests: Vec<XMatchRequest> = probes
            .chunks(settings.batch_size.max(1))
            .map(|chunk| XMatchRequest {
                positions: chunk.to_vec(),
                k: plan.k,
                max_radius_arcsec: plan.max_radius_arcsec,
            })
            .collect();
        // Owned requests keep the stream future `Send` for HTTP handlers.
        let calls = requests.into_iter().map(|r| {
            let client = Arc::clone(client);
            async move { client.xmatch(&r).await }
        });
        let responses: Vec<_> = stream::iter(calls)
            .buffered(settings.concurrency.max(1))
            .map_err(|e| FedError::from_client(survey, e))
            .try_collect()
            .await?;

        let mut per_anchor = vec![Vec::new(); anchors.rows.len()];
        for resp in responses {
            check_shape(plan, s, &resp.objects)?;
            let obj_id = column_index(plan, s, "object_id")?;
            for row in resp.objects.rows {
                if let Some(id) = row[obj_id].as_i64() {
                    objects[s].insert(id as u64, row);
                }
            }
            for pm in resp.results {
                let Some(slot) = usize::try_from(pm.probe_id).ok().filter(|&i| i < per_anchor.len()) else {
                    return Err(FedError::NodeFailed {
                        survey: survey.clone(),
                        code: "internal_error".into(),
                        message: format!("unknown probe id {}", pm.probe_id),
                    });
                };
                let mut list = pm.matches;
                if plan.mode == MatchMode::Best {
                    list.truncate(1);
                }
                per_anchor[slot] = list;
            }
        }
        alive.retain(|&a| !per_anchor[a].is_empty());
        matches[s] = per_anchor;
    }
    tracing::debug!(anchors = anchors.rows.len(), probes_sent, matched = alive.len(), "cross-match probes done");

    // Expand tuples: anchors ascend by object id (node order); each chain
    // survey's matches are expanded in ascending id order.
    let scope = TupleScope::new(&plan.surveys, &plan.metadata);
    let offsets = scope.offsets();
    let width: usize = plan.metadata.iter().map(|m| m.columns.len() + 1).sum();
    let mut tuples: Vec<TupleRow> = Vec::new();
    for &a in &alive {
        let mut partial: Vec<Vec<Value>> = vec![{
            let mut row = vec![Value::Null; width];
            let base = offsets[plan.anchor];
            let cols = plan.metadata[plan.anchor].columns.len();
            row[base..base + cols].clone_from_slice(&anchors.rows[a]);
            row[base + cols] = Value::Float(0.0);
            row
        }];
        for &s in &plan.chain {
            let mut list: Vec<&Match> = matches[s][a].iter().collect();
            list.sort_by_key(|m| m.object_id);
            let base = offsets[s];
            let cols = plan.metadata[s].columns.len();
            let mut next = Vec::with_capacity(partial.len() * list.len());
            for p in &partial {
                for m in &list {
                    let Some(obj) = objects[s].get(&m.object_id) else {
                        return Err(FedError::NodeFailed {
                            survey: plan.surveys[s].clone(),
                            code: "internal_error".into(),
                            message: format!("matched object {} missing from response", m.object_id),
                        });
                    };
                    let mut row = p.clone();
                    row[base..base + cols].clone_from_slice(obj);
                    row[base + cols] = Value::Float(m.separation_arcsec);
                    next.push(row);
                }
            }
            partial = next;
        }
        tuples.extend(partial.into_iter().map(TupleRow));
    }

    let opts = ExecOptions {
        row_cap: settings.row_cap,
    };
    let mut table = run_bound(&plan.bound, tuples, &opts).map_err(|e| match e {
        ExecError::RowCapExceeded { cap } => FedError::RowCapExceeded { cap },
    })?;
    table.stats.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(table)
}

/// Parse, plan, and execute one portal query.
pub async fn run_federated(text: &str, fed: &Federation) -> Result<ResultTable, FedError> {
    let fq = parse_federated(text, fed).await?;
    let plan = plan_xmatch(&fq, fed).await?;
    execute_xmatch(&plan, fed).await
}
