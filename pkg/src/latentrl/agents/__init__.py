"""Replay-driven continuous-control agents: SAC, TD3, DDPG."""

from .checkpoint import load_agent, save_agent
from .common import (
    ALGORITHMS,
    AgentHyperparams,
    LossReport,
    make_agent,
    select_action,
    soft_update,
)
from .ddpg import DdpgAgent, ddpg_update
from .sac import SacAgent, sac_update
from .td3 import Td3Agent, td3_update

__all__ = [
    "ALGORITHMS",
    "AgentHyperparams",
    "LossReport",
    "make_agent",
    "select_action",
    "soft_update",
    "SacAgent",
    "Td3Agent",
    "DdpgAgent",
    "sac_update",
    "td3_update",
    "ddpg_update",
    "save_agent",
    "load_agent",
]
