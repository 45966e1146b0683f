//! In-process agent message bus with a fixed control-transfer order.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentId {
    UserInterface,
    Ranking,
    DataMining,
    Visualization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    TransferControl,
    Result,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub from: AgentId,
    pub to: AgentId,
    pub kind: MessageKind,
    /// Artifact the message hands over, such as `ranks.json`.
    pub payload: String,
}

impl AgentMessage {
    pub fn new(from: AgentId, to: AgentId, kind: MessageKind, payload: impl Into<String>) -> Self {
        Self { from, to, kind, payload: payload.into() }
    }
}

impl fmt::Display for AgentMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} -> {:?} ({:?}: {})", self.from, self.to, self.kind, self.payload)
    }
}

/// Which agent holds control, and how far the session got.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusStage {
    /// The user interface agent is handling the session.
    Session,
    Mining,
    Ranking,
    /// Mining again, with the ranked attributes in hand.
    Ranked,
    Visualization,
    Done,
    Failed,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BusError {
    #[error("illegal transfer {from:?} -> {to:?} ({kind:?}) while in stage {stage:?}")]
    IllegalTransfer { from: AgentId, to: AgentId, kind: MessageKind, stage: BusStage },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bus {
    stage: BusStage,
    log: Vec<AgentMessage>,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        Self { stage: BusStage::Session, log: Vec::new() }
    }

    pub fn stage(&self) -> BusStage {
        self.stage
    }

    pub fn log(&self) -> &[AgentMessage] {
        &self.log
    }

    /// The agent currently holding control.
    pub fn holder(&self) -> Option<AgentId> {
        match self.stage {
            BusStage::Session | BusStage::Done => Some(AgentId::UserInterface),
            BusStage::Mining | BusStage::Ranked => Some(AgentId::DataMining),
            BusStage::Ranking => Some(AgentId::Ranking),
            BusStage::Visualization => Some(AgentId::Visualization),
            BusStage::Failed => None,
        }
    }

    /// Apply a message. Illegal ones leave the bus untouched.
    ///
    /// Besides the five transfer edges, the agent holding control may
    /// report an `Error` back to the user interface, which ends the session.
    pub fn dispatch(&mut self, msg: AgentMessage) -> Result<BusStage, BusError> {
        use AgentId::*;
        use MessageKind::*;
        let next = match (self.stage, msg.from, msg.to, msg.kind) {
            (BusStage::Session, UserInterface, DataMining, TransferControl) => Some(BusStage::Mining),
            (BusStage::Mining, DataMining, Ranking, TransferControl) => Some(BusStage::Ranking),
            (BusStage::Ranking, Ranking, DataMining, Result) => Some(BusStage::Ranked),
            (BusStage::Ranked, DataMining, Visualization, TransferControl) => Some(BusStage::Visualization),
            (BusStage::Visualization, Visualization, UserInterface, Result) => Some(BusStage::Done),
            (_, from, UserInterface, Error) if from != UserInterface && self.holder() == Some(from) => {
                Some(BusStage::Failed)
            }
            _ => None,
        };
        match next {
            Some(stage) => {
                self.stage = stage;
                self.log.push(msg);
                Ok(stage)
            }
            None => Err(BusError::IllegalTransfer { from: msg.from, to: msg.to, kind: msg.kind, stage: self.stage }),
        }
    }
}

/// The edge sequence of every successful session.
pub fn canonical_trace() -> [(AgentId, AgentId, MessageKind); 5] {
    use AgentId::*;
    use MessageKind::*;
    [
        (UserInterface, DataMining, TransferControl),
        (DataMining, Ranking, TransferControl),
        (Ranking, DataMining, Result),
        (DataMining, Visualization, TransferControl),
        (Visualization, UserInterface, Result),
    ]
}
