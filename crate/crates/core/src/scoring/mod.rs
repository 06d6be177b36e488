//! Competition-style evaluation: run episodes at the plant rate, record
//! trajectories, and score them for performance (one nominal episode) and
//! robustness (pass rates under a perturbation sweep).

mod csv;
mod episode;
mod robustness;
mod score;
mod trajectory;

pub use csv::{read_csv, write_csv, CSV_HEADER};
pub use episode::{
    Controller, EpisodeRunner, Perturbation, PerturbationKind, PolicyController, ZeroController,
};
pub use robustness::{
    robustness_score, CategoryOutcome, MagnitudePoint, PerturbationCategory, PerturbationSpec,
    RobustnessReport,
};
pub use score::{
    performance_score, success, swingup_time, MetricSet, ScoreBreakdown, ScoreCriteria,
    ScoreReport, SuccessCriterion,
};
pub use trajectory::{Trajectory, TrajectorySample, EPISODE_SECONDS};
