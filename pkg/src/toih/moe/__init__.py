from toih.moe.features import CONFLICTS, ConflictSpec, synth_features, synth_query, world_directions
from toih.moe.layers import (
    PatchTriplet,
    RoutingTrace,
    attention_pool,
    backbone_forward,
    build_three_token,
    condition_patch,
    consistency,
    moe_layer,
    relevance_scores,
    route_top1,
    routing_logits,
    topk_select,
)
from toih.moe.model import ForwardResult, forward
from toih.moe.params import EXPERTS, N_EXPERTS, N_OPTIONS, ModelConfig, MoEParams, init_params

__all__ = [
    "CONFLICTS",
    "EXPERTS",
    "N_EXPERTS",
    "N_OPTIONS",
    "ConflictSpec",
    "ForwardResult",
    "ModelConfig",
    "MoEParams",
    "PatchTriplet",
    "RoutingTrace",
    "attention_pool",
    "backbone_forward",
    "build_three_token",
    "condition_patch",
    "consistency",
    "forward",
    "init_params",
    "moe_layer",
    "relevance_scores",
    "route_top1",
    "routing_logits",
    "synth_features",
    "synth_query",
    "topk_select",
    "world_directions",
]
