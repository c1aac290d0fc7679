use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::codeswitch::{generate_cs, PairDictionary};
use crate::error::{Error, Result};
use crate::metrics::{BeliefState, NONE_VALUE};
use crate::text::tokenize;

const REQUESTABLE_KEY: &str = "requestable";

/// Goal slots with their values, plus the requestable slots. File order is kept.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ontology {
    slots: Vec<(String, Vec<String>)>,
    requestable: Vec<String>,
}

impl Ontology {
    pub fn new(slots: Vec<(String, Vec<String>)>, requestable: Vec<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut clean = Vec::with_capacity(slots.len());
        for (slot, values) in slots {
            let slot = slot.trim().to_lowercase();
            if slot.is_empty() || !seen.insert(slot.clone()) {
                return Err(Error::Data(format!("empty or duplicate ontology slot `{slot}`")));
            }
            let mut vs: Vec<String> = Vec::with_capacity(values.len());
            for v in values {
                let v = v.trim().to_lowercase();
                if v.is_empty() || v == NONE_VALUE {
                    return Err(Error::Data(format!("slot `{slot}` has an empty or reserved value")));
                }
                if !vs.contains(&v) {
                    vs.push(v);
                }
            }
            if vs.is_empty() {
                return Err(Error::Data(format!("slot `{slot}` has no values")));
            }
            clean.push((slot, vs));
        }
        let mut req: Vec<String> = Vec::new();
        for r in requestable {
            let r = r.trim().to_lowercase();
            if !r.is_empty() && !req.contains(&r) {
                req.push(r);
            }
        }
        Ok(Ontology {
            slots: clean,
            requestable: req,
        })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let map = value
            .as_object()
            .ok_or_else(|| Error::Data("ontology must be a JSON object".into()))?;
        let strings = |key: &str, v: &Value| -> Result<Vec<String>> {
            v.as_array()
                .ok_or_else(|| Error::Data(format!("ontology entry `{key}` must be a list")))?
                .iter()
                .map(|x| {
                    x.as_str()
                        .map(String::from)
                        .ok_or_else(|| Error::Data(format!("ontology entry `{key}` must hold strings")))
                })
                .collect()
        };
        let mut slots = Vec::new();
        let mut requestable = Vec::new();
        for (key, v) in map {
            if key == REQUESTABLE_KEY {
                requestable = strings(key, v)?;
            } else {
                slots.push((key.clone(), strings(key, v)?));
            }
        }
        Ontology::new(slots, requestable)
    }

    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        for (slot, values) in &self.slots {
            map.insert(slot.clone(), values.clone().into());
        }
        map.insert(REQUESTABLE_KEY.into(), self.requestable.clone().into());
        Value::Object(map)
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        Self::from_json(&serde_json::from_reader(reader)?)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::read(BufReader::new(file)).map_err(|e| e.in_file(path))
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|(s, _)| s.as_str())
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn values(&self, slot: &str) -> Result<&[String]> {
        self.slots
            .iter()
            .find(|(s, _)| s == slot)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Config(format!("slot `{slot}` is not in the ontology")))
    }

    pub fn requestable(&self) -> &[String] {
        &self.requestable
    }

    /// Slot names, then values, then requestable slots.
    pub fn terms(&self) -> Vec<String> {
        let mut out: Vec<String> = self.slots.iter().map(|(s, _)| s.clone()).collect();
        out.extend(self.slots.iter().flat_map(|(_, v)| v.iter().cloned()));
        out.extend(self.requestable.iter().cloned());
        out
    }
}

/// System acts preceding a user turn.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemActs {
    pub request: Option<String>,
    pub confirm: Option<(String, String)>,
}

impl SystemActs {
    pub fn none() -> Self {
        Self::default()
    }
}

/// One user turn with its turn-level labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DialogueTurn {
    pub utterance: Vec<String>,
    pub acts: SystemActs,
    /// Slots the user set in this turn.
    pub gold_slots: BTreeMap<String, String>,
    pub gold_requests: BTreeSet<String>,
}

impl DialogueTurn {
    /// Copy with code-switched utterance tokens; acts and labels are untouched.
    pub fn code_switched(&self, dict: &PairDictionary) -> DialogueTurn {
        DialogueTurn {
            utterance: generate_cs(&self.utterance, dict),
            ..self.clone()
        }
    }

    /// Check every label against the ontology.
    pub fn validate(&self, ontology: &Ontology) -> Result<()> {
        if self.utterance.is_empty() {
            return Err(Error::Data("empty utterance".into()));
        }
        for (slot, value) in &self.gold_slots {
            let values = ontology.values(slot)?;
            if value != NONE_VALUE && !values.contains(value) {
                return Err(Error::Data(format!(
                    "value `{value}` is not in the ontology for `{slot}`"
                )));
            }
        }
        for r in &self.gold_requests {
            if !ontology.requestable().contains(r) {
                return Err(Error::Config(format!("`{r}` is not a requestable slot")));
            }
        }
        Ok(())
    }
}

pub type Dialogue = Vec<DialogueTurn>;

/// Accumulated gold states: goal values carry over from `none`, requests do not.
pub fn gold_beliefs(dialogue: &[DialogueTurn], ontology: &Ontology) -> Vec<BeliefState> {
    let mut goal: BTreeMap<String, String> = ontology
        .slots()
        .map(|s| (s.to_string(), NONE_VALUE.to_string()))
        .collect();
    dialogue
        .iter()
        .map(|turn| {
            for (slot, value) in &turn.gold_slots {
                goal.insert(slot.clone(), value.clone());
            }
            BeliefState {
                goal: goal.clone(),
                requests: turn.gold_requests.clone(),
            }
        })
        .collect()
}

/// Strings from a JSON value that may be null, a string or a list of strings.
fn string_list(v: Option<&Value>, what: &str) -> Result<Vec<String>> {
    match v {
        None | Some(Value::Null) => Ok(vec![]),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(vec![]),
        Some(Value::String(s)) => Ok(vec![s.trim().to_lowercase()]),
        Some(Value::Array(items)) => items
            .iter()
            .filter(|x| !x.is_null())
            .map(|x| {
                x.as_str()
                    .map(|s| s.trim().to_lowercase())
                    .ok_or_else(|| Error::Data(format!("`{what}` must hold strings")))
            })
            .collect(),
        Some(_) => Err(Error::Data(format!("`{what}` must be a string, a list or null"))),
    }
}

fn parse_acts(v: Option<&Value>, extras: &mut usize) -> Result<SystemActs> {
    let obj = match v {
        None | Some(Value::Null) => return Ok(SystemActs::none()),
        Some(Value::Object(o)) => o,
        Some(_) => return Err(Error::Data("`system_acts` must be an object".into())),
    };
    let requests = string_list(obj.get("request"), "request")?;
    let slots = string_list(obj.get("confirm_slot"), "confirm_slot")?;
    let values = string_list(obj.get("confirm_value"), "confirm_value")?;
    if slots.len() != values.len() {
        return Err(Error::Data("confirm_slot and confirm_value must come in pairs".into()));
    }
    *extras += requests.len().saturating_sub(1) + slots.len().saturating_sub(1);
    Ok(SystemActs {
        request: requests.into_iter().next(),
        confirm: slots.into_iter().zip(values).next(),
    })
}

fn parse_turn(v: &Value, extras: &mut usize) -> Result<DialogueTurn> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Data("turn must be an object".into()))?;
    let utterance = obj
        .get("utterance")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Data("turn needs a string `utterance`".into()))?;
    let utterance = tokenize(utterance);
    if utterance.is_empty() {
        return Err(Error::Data("empty utterance".into()));
    }
    let acts = parse_acts(obj.get("system_acts"), extras)?;
    let mut gold_slots = BTreeMap::new();
    match obj.get("turn_label") {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) => {
            for (slot, value) in m {
                let value = value
                    .as_str()
                    .ok_or_else(|| Error::Data(format!("label for `{slot}` must be a string")))?;
                gold_slots.insert(slot.trim().to_lowercase(), value.trim().to_lowercase());
            }
        }
        Some(_) => return Err(Error::Data("`turn_label` must be an object".into())),
    }
    let gold_requests = string_list(obj.get("requested"), "requested")?.into_iter().collect();
    Ok(DialogueTurn {
        utterance,
        acts,
        gold_slots,
        gold_requests,
    })
}

/// Parsed dialogues plus the number of extra system acts that were ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct DialogueSet {
    pub dialogues: Vec<Dialogue>,
    pub ignored_acts: usize,
}

impl DialogueSet {
    pub fn num_turns(&self) -> usize {
        self.dialogues.iter().map(Vec::len).sum()
    }
}

pub fn dialogues_from_json(value: &Value) -> Result<DialogueSet> {
    let list = value
        .as_array()
        .ok_or_else(|| Error::Data("dialogue file must be a list of dialogues".into()))?;
    let mut extras = 0;
    let mut dialogues = Vec::with_capacity(list.len());
    for (i, d) in list.iter().enumerate() {
        let turns = d
            .as_array()
            .ok_or_else(|| Error::Data(format!("dialogue {i} must be a list of turns")))?;
        let parsed = turns
            .iter()
            .enumerate()
            .map(|(j, t)| parse_turn(t, &mut extras).map_err(|e| Error::Data(format!("dialogue {i}, turn {j}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        dialogues.push(parsed);
    }
    if extras > 0 {
        log::warn!("{extras} additional system acts ignored; only the first of each kind is used");
    }
    Ok(DialogueSet {
        dialogues,
        ignored_acts: extras,
    })
}

pub fn parse_dialogues(text: &str) -> Result<DialogueSet> {
    dialogues_from_json(&serde_json::from_str(text)?)
}

pub fn read_dialogues<R: Read>(reader: R) -> Result<DialogueSet> {
    dialogues_from_json(&serde_json::from_reader(reader)?)
}

pub fn load_dialogues(path: impl AsRef<Path>) -> Result<DialogueSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_dialogues(BufReader::new(file)).map_err(|e| e.in_file(path))
}

fn turn_to_json(turn: &DialogueTurn) -> Value {
    let (cs, cv) = match &turn.acts.confirm {
        Some((s, v)) => (Value::from(s.clone()), Value::from(v.clone())),
        None => (Value::Null, Value::Null),
    };
    serde_json::json!({
        "utterance": turn.utterance.join(" "),
        "system_acts": {
            "request": turn.acts.request.clone(),
            "confirm_slot": cs,
            "confirm_value": cv,
        },
        "turn_label": turn.gold_slots,
        "requested": turn.gold_requests,
    })
}

pub fn write_dialogues<W: Write>(dialogues: &[Dialogue], out: W) -> Result<()> {
    let value: Vec<Vec<Value>> = dialogues.iter().map(|d| d.iter().map(turn_to_json).collect()).collect();
    serde_json::to_writer_pretty(out, &value)?;
    Ok(())
}
