from .buffer import ReplayBuffer, SegmentBatch, Transition, TransitionBatch, TripletSample, WindowSample
from .rewards import high_level_reward, intrinsic_reward, relabel_intrinsic_rewards
from .sac import SacAgent, SacBatch, SacConfig, SacLosses

__all__ = [
    "SacAgent",
    "SacBatch",
    "SacConfig",
    "SacLosses",
    "ReplayBuffer",
    "Transition",
    "TransitionBatch",
    "TripletSample",
    "WindowSample",
    "SegmentBatch",
    "intrinsic_reward",
    "relabel_intrinsic_rewards",
    "high_level_reward",
]
