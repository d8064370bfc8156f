"""Campaign generation.

Exports the offline session generator and the live-broker sender.
"""

from .campaign import CraftSpec, craft_campaign, generate_session
from .live import LiveEndpoint, live_send

__all__ = [
    "CraftSpec",
    "LiveEndpoint",
    "craft_campaign",
    "generate_session",
    "live_send",
]
