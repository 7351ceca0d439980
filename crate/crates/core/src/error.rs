use thiserror::Error;

pub type Result<T, E = PlanError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("domain error: {0}")]
    Domain(String),

    /// No MCS entry offers `required_rate` at the given sharing factor.
    #[error("required rate {required_rate} Mbit/s is unreachable with {n_sharing} users sharing the channel")]
    RateUnreachable { required_rate: f64, n_sharing: usize },

    #[error("ground user {gu} with offered load {load} Mbit/s cannot be served by any FAP position")]
    InfeasibleDemand { gu: usize, load: f64 },

    #[error(
        "ground user {gu} with offered load {load} Mbit/s cannot be served within channel capacity {c_max} Mbit/s"
    )]
    CapacityInfeasible { gu: usize, load: f64, c_max: f64 },

    #[error("group {group} has an empty placement region")]
    EmptyRegion { group: usize },

    #[error("degenerate region: {0}")]
    Degenerate(String),

    #[error("QoS violated for ground user {gu} at waypoint ({x:.3}, {y:.3}, {z:.3}): slack {slack_db:.6} dB")]
    QosViolation {
        gu: usize,
        x: f64,
        y: f64,
        z: f64,
        slack_db: f64,
    },

    #[error("grouping check failed: {0}")]
    GroupingViolation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("scenario {label}: {source}")]
    Scenario {
        label: String,
        #[source]
        source: Box<PlanError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PlanError {
    /// True when the scenario itself cannot be served, as opposed to an
    /// I/O, parse or internal-consistency failure.
    pub fn is_infeasible(&self) -> bool {
        match self {
            PlanError::RateUnreachable { .. }
            | PlanError::InfeasibleDemand { .. }
            | PlanError::CapacityInfeasible { .. }
            | PlanError::EmptyRegion { .. } => true,
            PlanError::Scenario { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        PlanError::Domain(msg.into())
    }
}
