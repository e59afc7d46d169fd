"""Multi-branch feature fusion by channel exchange."""

from helmholtz.models.channel_exchange import (
    DEMO_BRANCHES,
    MIXED,
    SELF,
    BnBranchParams,
    ExchangeConfig,
    ExchangeResult,
    FusionHead,
    RoutingMap,
    bn_normalize,
    exchange,
    exchange_demo,
    fuse,
    routing_raster,
    toy_branches,
)

__all__ = [
    "BnBranchParams",
    "ExchangeConfig",
    "FusionHead",
    "ExchangeResult",
    "RoutingMap",
    "SELF",
    "MIXED",
    "DEMO_BRANCHES",
    "bn_normalize",
    "exchange",
    "fuse",
    "toy_branches",
    "routing_raster",
    "exchange_demo",
]
