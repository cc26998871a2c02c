//! Episode generation, augmentation, the focal-weighted loss and the training loop.

pub mod data;
pub mod episodes;
pub mod loss;
pub mod trainer;

pub use data::{assign_ids_by_iou, LabeledTrack, NoisyTracks, Observation, ProposalBatch, TrainingSequence};
pub use episodes::{
    augment_missing, augment_missing_with_rate, build_random_episode, ActualEpisode, CarriedState, EpisodeLoss, LossOptions,
    RandomEpisode, RandomEpisodeConfig, SegmentReport,
};
pub use loss::{batch_loss, focal_term, mine_hard, BatchLoss, FocalWeights, PROB_CLAMP};
pub use trainer::{train, LogCollector, LogRow, Optimizer, Phase, TrainConfig, TrainObserver};
